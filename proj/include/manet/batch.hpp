#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <vector>

#ifndef EIGEN_DONT_PARALLELIZE
#define EIGEN_DONT_PARALLELIZE  // chunk-level parallelism is managed by the caller
#endif
#include <Eigen/Core>

#include "manet/jet.hpp"
#include "manet/network.hpp"

namespace manet {

// Batched jet evaluation over a chunk of points. Each neuron owns a
// contiguous row of 6 channels per point [v, gx, gy, hxx, hxy, hyy], so the
// affine stages become dense matrix products over the chunk.
// Arithmetic is identical to the per-point path up to summation order.

namespace batch {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

struct Workspace {
    std::vector<std::vector<double>> act;  // act[l]: n_l rows of 6P doubles
    std::vector<std::vector<double>> pre;  // pre[l], l >= 1
    std::vector<std::vector<ActivationDerivs>> der;
    std::vector<double> zbar;   // adjoint of the current layer's pre-activations
    std::vector<double> abar;   // adjoint of the previous layer's activations

    void resize(const Mlp& net, std::size_t points) {
        const std::size_t L = net.layers.size();
        const std::size_t S = 6 * points;
        act.resize(L + 1);
        pre.resize(L + 1);
        der.resize(L + 1);
        act[0].resize(2 * S);
        std::size_t widest = 2;
        for (std::size_t l = 1; l <= L; ++l) {
            const std::size_t n = net.layers[l - 1].n_out;
            act[l].resize(n * S);
            pre[l].resize(n * S);
            der[l].resize(n * points);
            widest = std::max(widest, n);
        }
        zbar.resize(widest * S);
        abar.resize(widest * S);
    }
};

/// Forward pass for a chunk; leaves all layer states in the workspace.
/// The output jets of point p sit at act[L].data() + 6p.
inline void forward(const Mlp& net, std::span<const Vec2> pts, Workspace& ws) {
    const std::size_t P = pts.size();
    const std::size_t S = 6 * P;
    ws.resize(net, P);

    double* x_row = ws.act[0].data();
    double* y_row = x_row + S;
    std::fill(ws.act[0].begin(), ws.act[0].end(), 0.0);
    for (std::size_t p = 0; p < P; ++p) {
        x_row[6 * p] = pts[p].x;
        x_row[6 * p + 1] = 1.0;
        y_row[6 * p] = pts[p].y;
        y_row[6 * p + 2] = 1.0;
    }

    const std::size_t L = net.layers.size();
    for (std::size_t l = 1; l <= L; ++l) {
        const MlpLayer& layer = net.layers[l - 1];
        const std::vector<double>& in = ws.act[l - 1];
        std::vector<double>& z = ws.pre[l];
        MapMat Z(z.data(), layer.n_out, S);
        ConstMapMat A(in.data(), layer.n_in, S);
        ConstMapMat W(layer.w.data(), layer.n_out, layer.n_in);
        Z.noalias() = W * A;
        for (int i = 0; i < layer.n_out; ++i) {
            double* row = z.data() + i * S;
            const double bias = layer.b[i];
            for (std::size_t p = 0; p < P; ++p) row[6 * p] += bias;
        }
        if (l < L) {
            std::vector<double>& out = ws.act[l];
            for (int i = 0; i < layer.n_out; ++i) {
                const double* zr = z.data() + i * S;
                double* ar = out.data() + i * S;
                ActivationDerivs* dr = ws.der[l].data() + static_cast<std::size_t>(i) * P;
                for (std::size_t p = 0; p < P; ++p) {
                    const double* zc = zr + 6 * p;
                    double* ac = ar + 6 * p;
                    const ActivationDerivs d = activation_derivs(net.hidden_activation, zc[0]);
                    dr[p] = d;
                    const double gx = zc[1], gy = zc[2];
                    ac[0] = d.s0;
                    ac[1] = d.s1 * gx;
                    ac[2] = d.s1 * gy;
                    ac[3] = d.s2 * gx * gx + d.s1 * zc[3];
                    ac[4] = d.s2 * gx * gy + d.s1 * zc[4];
                    ac[5] = d.s2 * gy * gy + d.s1 * zc[5];
                }
            }
        } else {
            ws.act[l] = z;  // identity output layer
        }
    }
}

/// Backward pass from the seeded output adjoint (6 channels per point in
/// out_adjoint, identity output layer) into the flat parameter gradient.
inline void backward(const Mlp& net, std::size_t points, std::span<const double> out_adjoint,
                     std::span<double> grad_flat, Workspace& ws) {
    const std::size_t P = points;
    const std::size_t S = 6 * P;
    const std::size_t L = net.layers.size();

    std::copy(out_adjoint.begin(), out_adjoint.end(), ws.zbar.begin());

    std::size_t offset = grad_flat.size();
    for (std::size_t l = L; l >= 1; --l) {
        const MlpLayer& layer = net.layers[l - 1];
        offset -= static_cast<std::size_t>(layer.n_out) * (layer.n_in + 1);
        double* wg = grad_flat.data() + offset;
        double* bg = wg + static_cast<std::size_t>(layer.n_out) * layer.n_in;

        // weight and bias gradients from this layer's pre-activation adjoint
        const std::vector<double>& in = ws.act[l - 1];
        {
            MapMat WG(wg, layer.n_out, layer.n_in);
            ConstMapMat ZB(ws.zbar.data(), layer.n_out, S);
            ConstMapMat A(in.data(), layer.n_in, S);
            WG.noalias() += ZB * A.transpose();
        }
        for (int i = 0; i < layer.n_out; ++i) {
            const double* zb = ws.zbar.data() + i * S;
            double bsum = 0.0;
            for (std::size_t p = 0; p < P; ++p) bsum += zb[6 * p];
            bg[i] += bsum;
        }
        if (l == 1) break;

        // adjoint of the previous layer's activations
        {
            MapMat AB(ws.abar.data(), layer.n_in, S);
            ConstMapMat ZB(ws.zbar.data(), layer.n_out, S);
            ConstMapMat W(layer.w.data(), layer.n_out, layer.n_in);
            AB.noalias() = W.transpose() * ZB;
        }

        // chain through the previous layer's activation
        const MlpLayer& prev = net.layers[l - 2];
        const std::vector<double>& z = ws.pre[l - 1];
        for (int i = 0; i < prev.n_out; ++i) {
            const double* ab = ws.abar.data() + i * S;
            const double* zr = z.data() + i * S;
            const ActivationDerivs* dr = ws.der[l - 1].data() + static_cast<std::size_t>(i) * P;
            double* zb = ws.zbar.data() + i * S;
            for (std::size_t p = 0; p < P; ++p) {
                const double* ac = ab + 6 * p;
                const double* zc = zr + 6 * p;
                double* out = zb + 6 * p;
                const ActivationDerivs& d = dr[p];
                const double gx = zc[1], gy = zc[2];
                out[0] = ac[0] * d.s1 + d.s2 * (ac[1] * gx + ac[2] * gy) +
                         ac[3] * (d.s3 * gx * gx + d.s2 * zc[3]) +
                         ac[4] * (d.s3 * gx * gy + d.s2 * zc[4]) +
                         ac[5] * (d.s3 * gy * gy + d.s2 * zc[5]);
                out[1] = d.s1 * ac[1] + d.s2 * (2.0 * ac[3] * gx + ac[4] * gy);
                out[2] = d.s1 * ac[2] + d.s2 * (ac[4] * gx + 2.0 * ac[5] * gy);
                out[3] = d.s1 * ac[3];
                out[4] = d.s1 * ac[4];
                out[5] = d.s1 * ac[5];
            }
        }
    }
}

/// Reads the output jet of point p after forward().
inline Jet2 output_jet(const Workspace& ws, std::size_t layer_count, std::size_t p) {
    const double* c = ws.act[layer_count].data() + 6 * p;
    Jet2 j;
    j.value = c[0];
    j.grad = {c[1], c[2]};
    j.hxx = c[3];
    j.hxy = c[4];
    j.hyy = c[5];
    return j;
}

}  // namespace batch

}  // namespace manet
