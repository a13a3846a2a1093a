#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "manet/jet.hpp"
#include "manet/rng.hpp"

namespace manet {

/// Fully-connected layer; weights are row-major (n_out x n_in).
struct MlpLayer {
    int n_in = 0;
    int n_out = 0;
    std::vector<double> w;
    std::vector<double> b;
};

/// Multilayer perceptron R^2 -> R. Hidden layers share one activation,
/// the output layer is identity.
struct Mlp {
    std::vector<int> layer_sizes;  // (2, hidden..., 1)
    std::vector<MlpLayer> layers;
    Activation hidden_activation = Activation::TanhSquared;
};

inline void validate_layer_sizes(const std::vector<int>& sizes) {
    if (sizes.size() < 2) throw std::invalid_argument("layer_sizes needs at least input and output");
    if (sizes.front() != 2) throw std::invalid_argument("input layer must have 2 neurons");
    if (sizes.back() != 1) throw std::invalid_argument("output layer must have 1 neuron");
    for (int n : sizes)
        if (n < 1) throw std::invalid_argument("layer sizes must be positive");
}

inline std::size_t flat_size(const std::vector<int>& sizes) {
    std::size_t n = 0;
    for (std::size_t l = 1; l < sizes.size(); ++l)
        n += static_cast<std::size_t>(sizes[l]) * (sizes[l - 1] + 1);
    return n;
}

/// Glorot-uniform weights, zero biases; deterministic for a given seed.
inline Mlp mlp_init(const std::vector<int>& layer_sizes, std::uint64_t seed,
                    Activation hidden = Activation::TanhSquared) {
    validate_layer_sizes(layer_sizes);
    Mlp net;
    net.layer_sizes = layer_sizes;
    net.hidden_activation = hidden;
    Rng rng(seed);
    for (std::size_t l = 1; l < layer_sizes.size(); ++l) {
        MlpLayer layer;
        layer.n_in = layer_sizes[l - 1];
        layer.n_out = layer_sizes[l];
        const double bound = std::sqrt(6.0 / (layer.n_in + layer.n_out));
        layer.w.resize(static_cast<std::size_t>(layer.n_out) * layer.n_in);
        for (double& w : layer.w) w = rng.uniform(-bound, bound);
        layer.b.assign(layer.n_out, 0.0);
        net.layers.push_back(std::move(layer));
    }
    return net;
}

// ---- flat parameter vector ---------------------------------------------------
// Ordering: layers in order, each layer row-major weights then biases.

inline std::vector<double> flatten(const Mlp& net) {
    std::vector<double> flat;
    flat.reserve(flat_size(net.layer_sizes));
    for (const MlpLayer& layer : net.layers) {
        flat.insert(flat.end(), layer.w.begin(), layer.w.end());
        flat.insert(flat.end(), layer.b.begin(), layer.b.end());
    }
    return flat;
}

inline void unflatten_into(Mlp& net, std::span<const double> flat) {
    if (flat.size() != flat_size(net.layer_sizes))
        throw std::invalid_argument("unflatten: flat vector length mismatch");
    std::size_t pos = 0;
    for (MlpLayer& layer : net.layers) {
        std::memcpy(layer.w.data(), flat.data() + pos, layer.w.size() * sizeof(double));
        pos += layer.w.size();
        std::memcpy(layer.b.data(), flat.data() + pos, layer.b.size() * sizeof(double));
        pos += layer.b.size();
    }
}

inline Mlp unflatten(const Mlp& shape_template, std::span<const double> flat) {
    Mlp net = shape_template;
    unflatten_into(net, flat);
    return net;
}

// ---- forward passes ----------------------------------------------------------

/// Per-point forward state kept alive across calls to avoid reallocation.
/// Pre-activations and activation derivatives are retained for backprop.
struct ForwardCache {
    std::vector<std::vector<Jet2>> act;  // act[l], l = 0..L; act[0] holds the seeds
    std::vector<std::vector<Jet2>> pre;  // pre[l], l = 1..L
    std::vector<std::vector<ActivationDerivs>> der;  // der[l], hidden layers only

    void resize(const Mlp& net) {
        const std::size_t L = net.layers.size();
        act.resize(L + 1);
        pre.resize(L + 1);
        der.resize(L + 1);
        act[0].resize(2);
        for (std::size_t l = 1; l <= L; ++l) {
            act[l].resize(net.layers[l - 1].n_out);
            pre[l].resize(net.layers[l - 1].n_out);
            der[l].resize(net.layers[l - 1].n_out);
        }
    }
};

/// Evaluates the network together with its exact input-gradient and
/// input-Hessian. The cache retains all layer states for backprop.
inline Jet2 forward_jet(const Mlp& net, Vec2 p, ForwardCache& cache) {
    cache.resize(net);
    auto [jx, jy] = jet_seed(p);
    cache.act[0][0] = jx;
    cache.act[0][1] = jy;
    const std::size_t L = net.layers.size();
    for (std::size_t l = 1; l <= L; ++l) {
        const MlpLayer& layer = net.layers[l - 1];
        const std::vector<Jet2>& in = cache.act[l - 1];
        std::vector<Jet2>& z = cache.pre[l];
        std::vector<Jet2>& out = cache.act[l];
        const bool hidden = l < L;
        for (int i = 0; i < layer.n_out; ++i) {
            const double* w = layer.w.data() + static_cast<std::size_t>(i) * layer.n_in;
            Jet2 zi;
            zi.value = layer.b[i];
            for (int j = 0; j < layer.n_in; ++j) {
                const double wij = w[j];
                const Jet2& a = in[j];
                zi.value += wij * a.value;
                zi.grad[0] += wij * a.grad[0];
                zi.grad[1] += wij * a.grad[1];
                zi.hxx += wij * a.hxx;
                zi.hxy += wij * a.hxy;
                zi.hyy += wij * a.hyy;
            }
            z[i] = zi;
            if (hidden) {
                const ActivationDerivs d = activation_derivs(net.hidden_activation, zi.value);
                cache.der[l][i] = d;
                out[i] = detail::compose(zi, d.s0, d.s1, d.s2);
            } else {
                out[i] = zi;  // identity output layer
            }
        }
    }
    return cache.act[L][0];
}

inline Jet2 forward_jet(const Mlp& net, Vec2 p) {
    ForwardCache cache;
    return forward_jet(net, p, cache);
}

/// Value-only forward; used by the evaluation grid where derivatives
/// are not needed.
inline double forward_value(const Mlp& net, Vec2 p) {
    thread_local std::vector<double> cur, nxt;
    cur.assign({p.x, p.y});
    const std::size_t L = net.layers.size();
    for (std::size_t l = 1; l <= L; ++l) {
        const MlpLayer& layer = net.layers[l - 1];
        nxt.assign(layer.n_out, 0.0);
        const bool hidden = l < L;
        for (int i = 0; i < layer.n_out; ++i) {
            const double* w = layer.w.data() + static_cast<std::size_t>(i) * layer.n_in;
            double z = layer.b[i];
            for (int j = 0; j < layer.n_in; ++j) z += w[j] * cur[j];
            if (hidden) {
                const double t = std::tanh(z);
                nxt[i] = t * t;
            } else {
                nxt[i] = z;
            }
        }
        cur.swap(nxt);
    }
    return cur[0];
}

/// Value and input-gradient; the gradient is the reflector mapping.
struct ValueGrad {
    double value;
    Vec2 grad;
};

inline ValueGrad forward_value_grad(const Mlp& net, Vec2 p) {
    struct Node {
        double v, gx, gy;
    };
    thread_local std::vector<Node> cur, nxt;
    cur.assign({{p.x, 1.0, 0.0}, {p.y, 0.0, 1.0}});
    const std::size_t L = net.layers.size();
    for (std::size_t l = 1; l <= L; ++l) {
        const MlpLayer& layer = net.layers[l - 1];
        nxt.assign(layer.n_out, Node{0, 0, 0});
        const bool hidden = l < L;
        for (int i = 0; i < layer.n_out; ++i) {
            const double* w = layer.w.data() + static_cast<std::size_t>(i) * layer.n_in;
            Node z{layer.b[i], 0.0, 0.0};
            for (int j = 0; j < layer.n_in; ++j) {
                z.v += w[j] * cur[j].v;
                z.gx += w[j] * cur[j].gx;
                z.gy += w[j] * cur[j].gy;
            }
            if (hidden) {
                const double t = std::tanh(z.v);
                const double s1 = 2.0 * t * (1.0 - t * t);
                nxt[i] = Node{t * t, s1 * z.gx, s1 * z.gy};
            } else {
                nxt[i] = z;
            }
        }
        cur.swap(nxt);
    }
    return {cur[0].v, {cur[0].gx, cur[0].gy}};
}

/// The gradient map x -> grad u(x); stereographic coordinates of the
/// reflected ray direction.
inline Vec2 mapping(const Mlp& net, Vec2 p) { return forward_value_grad(net, p).grad; }

// ---- parameter backprop --------------------------------------------------

/// Adjoint buffers reused across points.
struct BackpropScratch {
    std::vector<Jet2> a_bar;
    std::vector<Jet2> z_bar;
};

/// Accumulates d(loss)/d(params) into grad_flat, given the forward cache of
/// one point and the adjoint of the output jet's six channels. Jet2 doubles
/// as the adjoint container: each field holds the sensitivity of the loss to
/// the corresponding output channel.
inline void accumulate_param_gradient(const Mlp& net, const ForwardCache& cache,
                                      const Jet2& out_adjoint, std::span<double> grad_flat,
                                      BackpropScratch& scratch) {
    const std::size_t L = net.layers.size();
    std::vector<Jet2>& a_bar = scratch.a_bar;
    std::vector<Jet2>& z_bar = scratch.z_bar;
    a_bar.assign(1, out_adjoint);

    // flat offset of the last layer's block
    std::size_t offset = grad_flat.size();
    for (std::size_t l = L; l >= 1; --l) {
        const MlpLayer& layer = net.layers[l - 1];
        offset -= static_cast<std::size_t>(layer.n_out) * (layer.n_in + 1);
        double* wg = grad_flat.data() + offset;
        double* bg = wg + static_cast<std::size_t>(layer.n_out) * layer.n_in;

        // activation backward: a = sigma(z) channel-wise chain rule
        z_bar.assign(layer.n_out, Jet2{});
        const bool hidden = l < L;
        for (int i = 0; i < layer.n_out; ++i) {
            const Jet2& ab = a_bar[i];
            if (!hidden) {
                z_bar[i] = ab;
                continue;
            }
            const Jet2& z = cache.pre[l][i];
            const ActivationDerivs& d = cache.der[l][i];
            const double g0 = z.grad[0], g1 = z.grad[1];
            Jet2 zb;
            zb.value = ab.value * d.s1 + d.s2 * (ab.grad[0] * g0 + ab.grad[1] * g1) +
                       ab.hxx * (d.s3 * g0 * g0 + d.s2 * z.hxx) +
                       ab.hxy * (d.s3 * g0 * g1 + d.s2 * z.hxy) +
                       ab.hyy * (d.s3 * g1 * g1 + d.s2 * z.hyy);
            zb.grad[0] = d.s1 * ab.grad[0] + d.s2 * (2.0 * ab.hxx * g0 + ab.hxy * g1);
            zb.grad[1] = d.s1 * ab.grad[1] + d.s2 * (ab.hxy * g0 + 2.0 * ab.hyy * g1);
            zb.hxx = d.s1 * ab.hxx;
            zb.hxy = d.s1 * ab.hxy;
            zb.hyy = d.s1 * ab.hyy;
            z_bar[i] = zb;
        }

        // affine backward: weight/bias gradients and the previous layer's adjoint
        const std::vector<Jet2>& in = cache.act[l - 1];
        for (int i = 0; i < layer.n_out; ++i) {
            const Jet2& zb = z_bar[i];
            double* wgi = wg + static_cast<std::size_t>(i) * layer.n_in;
            for (int j = 0; j < layer.n_in; ++j) {
                const Jet2& a = in[j];
                wgi[j] += zb.value * a.value + zb.grad[0] * a.grad[0] + zb.grad[1] * a.grad[1] +
                          zb.hxx * a.hxx + zb.hxy * a.hxy + zb.hyy * a.hyy;
            }
            bg[i] += zb.value;
        }
        if (l == 1) break;
        a_bar.assign(layer.n_in, Jet2{});
        for (int i = 0; i < layer.n_out; ++i) {
            const Jet2& zb = z_bar[i];
            const double* w = layer.w.data() + static_cast<std::size_t>(i) * layer.n_in;
            for (int j = 0; j < layer.n_in; ++j) {
                Jet2& t = a_bar[j];
                const double wij = w[j];
                t.value += wij * zb.value;
                t.grad[0] += wij * zb.grad[0];
                t.grad[1] += wij * zb.grad[1];
                t.hxx += wij * zb.hxx;
                t.hxy += wij * zb.hxy;
                t.hyy += wij * zb.hyy;
            }
        }
    }
}

// ---- checkpoint file -------------------------------------------------------
// Layout (little-endian): magic "MANET1", u32 layer count, u32 sizes,
// u32 hidden activation id, then the flat f64 parameter vector.

inline constexpr char kCheckpointMagic[6] = {'M', 'A', 'N', 'E', 'T', '1'};

inline void save_checkpoint(const Mlp& net, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open checkpoint for writing: " + path);
    out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
    const std::uint32_t n = static_cast<std::uint32_t>(net.layer_sizes.size());
    out.write(reinterpret_cast<const char*>(&n), sizeof(n));
    for (int s : net.layer_sizes) {
        const std::uint32_t v = static_cast<std::uint32_t>(s);
        out.write(reinterpret_cast<const char*>(&v), sizeof(v));
    }
    const std::uint32_t act = net.hidden_activation == Activation::TanhSquared ? 0u : 1u;
    out.write(reinterpret_cast<const char*>(&act), sizeof(act));
    const std::vector<double> flat = flatten(net);
    out.write(reinterpret_cast<const char*>(flat.data()),
              static_cast<std::streamsize>(flat.size() * sizeof(double)));
    if (!out) throw std::runtime_error("checkpoint write failed: " + path);
}

inline Mlp load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
    char magic[6];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0)
        throw std::runtime_error("not a MANET1 checkpoint: " + path);
    std::uint32_t n = 0;
    in.read(reinterpret_cast<char*>(&n), sizeof(n));
    if (!in || n < 2 || n > 1024) throw std::runtime_error("corrupt checkpoint header: " + path);
    std::vector<int> sizes(n);
    for (std::uint32_t i = 0; i < n; ++i) {
        std::uint32_t v = 0;
        in.read(reinterpret_cast<char*>(&v), sizeof(v));
        sizes[i] = static_cast<int>(v);
    }
    std::uint32_t act = 0;
    in.read(reinterpret_cast<char*>(&act), sizeof(act));
    if (!in) throw std::runtime_error("corrupt checkpoint header: " + path);
    validate_layer_sizes(sizes);
    std::vector<double> flat(flat_size(sizes));
    in.read(reinterpret_cast<char*>(flat.data()),
            static_cast<std::streamsize>(flat.size() * sizeof(double)));
    if (!in) throw std::runtime_error("checkpoint truncated: " + path);
    Mlp net = mlp_init(sizes, 0, act == 0 ? Activation::TanhSquared : Activation::Identity);
    unflatten_into(net, flat);
    return net;
}

}  // namespace manet
