#pragma once

#include <algorithm>
#include <cmath>
#include <exception>
#include <span>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "manet/batch.hpp"
#include "manet/network.hpp"
#include "manet/problem.hpp"
#include "manet/sampling.hpp"

#if defined(_OPENMP)
#include <omp.h>
#endif

namespace manet {

struct LossWeights {
    double alpha = 1.0;  // interior residual
    double beta = 1.0;   // convexity penalty
    double gamma = 1.0;  // boundary penalty
};

struct LossBreakdown {
    double interior = 0.0;
    double convexity = 0.0;
    double boundary = 0.0;
    double total = 0.0;
};

/// Squared residual between the Hessian determinant and f/g.
inline double interior_residual(const Jet2& jet, double f_val, double g_at_grad) {
    if (g_at_grad <= 0.0)
        throw std::domain_error("interior residual: target density not positive at mapped point");
    const double r = jet.hess_det() - f_val / g_at_grad;
    return r * r;
}

/// Squared negative part of the Hessian trace.
inline double convexity_penalty(const Jet2& jet) {
    const double tr = jet.hess_trace();
    return tr < 0.0 ? tr * tr : 0.0;
}

namespace detail {

// Accumulation is chunked with fixed chunk boundaries and partials combined
// in chunk order, so sums are bit-identical for any thread count.
constexpr std::size_t kLossChunk = 512;

inline std::size_t chunk_count(std::size_t n) { return (n + kLossChunk - 1) / kLossChunk; }

[[noreturn]] inline void throw_domain_violation(Vec2 x) {
    std::ostringstream msg;
    msg << "target density not positive at mapped point of sample (" << x.x << ", " << x.y << ")";
    throw std::domain_error(msg.str());
}

/// Collects the first exception thrown inside a parallel chunk loop;
/// exceptions must not unwind out of an OpenMP region.
class ChunkErrors {
public:
    template <class Fn>
    void run(std::size_t chunk, Fn&& fn) noexcept {
        try {
            fn();
        } catch (...) {
#if defined(_OPENMP)
#pragma omp critical(manet_chunk_errors)
#endif
            {
                if (!error_ || chunk < first_chunk_) {
                    error_ = std::current_exception();
                    first_chunk_ = chunk;
                }
            }
        }
    }

    void rethrow_if_any() const {
        if (error_) std::rethrow_exception(error_);
    }

private:
    std::exception_ptr error_;
    std::size_t first_chunk_ = static_cast<std::size_t>(-1);
};

}  // namespace detail

/// Per-point source density over plan.interior, fixed for the whole run.
inline std::vector<double> cache_source_density(const SamplePlan& plan, const Problem& prob) {
    std::vector<double> f;
    f.reserve(plan.interior.size());
    for (const Vec2& x : plan.interior) f.push_back(prob.source_density(x));
    return f;
}

/// Sampled composite loss evaluated on jets produced by any callable
/// (the network or an analytic reflector): mean interior residual and
/// convexity penalty over the interior points plus mean target-boundary
/// penalty over the boundary points. f_interior optionally carries the
/// cached source density aligned with plan.interior.
template <class JetFn>
LossBreakdown total_loss_of(JetFn&& jet_at, const SamplePlan& plan, const Problem& prob,
                            const LossWeights& w = {}, std::span<const double> f_interior = {}) {
    if (plan.interior.empty() || plan.boundary.empty())
        throw std::invalid_argument("total loss: plan must have interior and boundary points");
    if (!f_interior.empty() && f_interior.size() != plan.interior.size())
        throw std::invalid_argument("total loss: density cache length mismatch");
    const std::size_t n_chunks_i = detail::chunk_count(plan.interior.size());
    const std::size_t n_chunks_b = detail::chunk_count(plan.boundary.size());
    std::vector<double> part_int(n_chunks_i, 0.0), part_conv(n_chunks_i, 0.0);
    std::vector<double> part_bnd(n_chunks_b, 0.0);
    detail::ChunkErrors errors;

#if defined(_OPENMP)
#pragma omp parallel for schedule(dynamic, 1)
#endif
    for (std::size_t c = 0; c < n_chunks_i; ++c) {
        errors.run(c, [&] {
            const std::size_t lo = c * detail::kLossChunk;
            const std::size_t hi = std::min(lo + detail::kLossChunk, plan.interior.size());
            double si = 0.0, sc = 0.0;
            for (std::size_t k = lo; k < hi; ++k) {
                const Vec2 x = plan.interior[k];
                const Jet2 u = jet_at(x);
                const double f = f_interior.empty() ? prob.source_density(x) : f_interior[k];
                const double g = prob.target_density({u.grad[0], u.grad[1]});
                if (g <= 0.0) detail::throw_domain_violation(x);
                si += interior_residual(u, f, g);
                sc += convexity_penalty(u);
            }
            part_int[c] = si;
            part_conv[c] = sc;
        });
    }

#if defined(_OPENMP)
#pragma omp parallel for schedule(dynamic, 1)
#endif
    for (std::size_t c = 0; c < n_chunks_b; ++c) {
        errors.run(n_chunks_i + c, [&] {
            const std::size_t lo = c * detail::kLossChunk;
            const std::size_t hi = std::min(lo + detail::kLossChunk, plan.boundary.size());
            double sb = 0.0;
            for (std::size_t k = lo; k < hi; ++k) {
                const Jet2 u = jet_at(plan.boundary[k]);
                sb += prob.boundary_penalty({u.grad[0], u.grad[1]});
            }
            part_bnd[c] = sb;
        });
    }
    errors.rethrow_if_any();

    LossBreakdown out;
    double si = 0.0, sc = 0.0, sb = 0.0;
    for (double v : part_int) si += v;
    for (double v : part_conv) sc += v;
    for (double v : part_bnd) sb += v;
    out.interior = w.alpha * si / static_cast<double>(plan.interior.size());
    out.convexity = w.beta * sc / static_cast<double>(plan.interior.size());
    out.boundary = w.gamma * sb / static_cast<double>(plan.boundary.size());
    out.total = out.interior + out.convexity + out.boundary;
    return out;
}

inline LossBreakdown total_loss(const Mlp& net, const SamplePlan& plan, const Problem& prob,
                                const LossWeights& w = {},
                                std::span<const double> f_interior = {}) {
    thread_local ForwardCache cache;
    return total_loss_of([&](Vec2 x) { return forward_jet(net, x, cache); }, plan, prob, w,
                         f_interior);
}

/// Loss together with its exact gradient with respect to the flat parameter
/// vector, by analytic backpropagation through the value/gradient/Hessian
/// channels of each sample's jet.
inline LossBreakdown loss_and_gradient(const Mlp& net, const SamplePlan& plan, const Problem& prob,
                                       const LossWeights& w, std::span<double> grad_out,
                                       std::span<const double> f_interior = {}) {
    if (plan.interior.empty() || plan.boundary.empty())
        throw std::invalid_argument("loss gradient: plan must have interior and boundary points");
    const std::size_t n_params = flat_size(net.layer_sizes);
    if (grad_out.size() != n_params)
        throw std::invalid_argument("loss gradient: output span has wrong length");
    if (!f_interior.empty() && f_interior.size() != plan.interior.size())
        throw std::invalid_argument("loss gradient: density cache length mismatch");

    const double n_i = static_cast<double>(plan.interior.size());
    const double n_b = static_cast<double>(plan.boundary.size());
    const double wi = w.alpha / n_i;
    const double wc = w.beta / n_i;
    const double wb = w.gamma / n_b;

    const std::size_t n_chunks_i = detail::chunk_count(plan.interior.size());
    const std::size_t n_chunks_b = detail::chunk_count(plan.boundary.size());
    const std::size_t n_chunks = n_chunks_i + n_chunks_b;
    std::vector<std::vector<double>> part_grad(n_chunks);
    std::vector<LossBreakdown> part_sum(n_chunks);
    detail::ChunkErrors errors;

    const std::size_t L = net.layers.size();

#if defined(_OPENMP)
#pragma omp parallel for schedule(dynamic, 1)
#endif
    for (std::size_t c = 0; c < n_chunks; ++c) {
        errors.run(c, [&] {
        thread_local batch::Workspace ws;
        thread_local std::vector<double> adjoint;
        std::vector<double>& grad = part_grad[c];
        grad.assign(n_params, 0.0);
        LossBreakdown& sum = part_sum[c];
        const bool is_boundary = c >= n_chunks_i;
        const std::vector<Vec2>& pts = is_boundary ? plan.boundary : plan.interior;
        const std::size_t lo = (is_boundary ? c - n_chunks_i : c) * detail::kLossChunk;
        const std::size_t hi = std::min(lo + detail::kLossChunk, pts.size());
        const std::size_t count = hi - lo;
        const std::span<const Vec2> chunk(pts.data() + lo, count);

        batch::forward(net, chunk, ws);
        adjoint.assign(6 * count, 0.0);

        for (std::size_t k = 0; k < count; ++k) {
            const Jet2 u = batch::output_jet(ws, L, k);
            const Vec2 p{u.grad[0], u.grad[1]};
            double* adj = adjoint.data() + 6 * k;
            if (!is_boundary) {
                const Vec2 x = chunk[k];
                const double f =
                    f_interior.empty() ? prob.source_density(x) : f_interior[lo + k];
                const double g = prob.target_density(p);
                if (g <= 0.0) detail::throw_domain_violation(x);
                const double r = u.hess_det() - f / g;
                sum.interior += r * r;

                const double two_r = 2.0 * r * wi;
                const Vec2 dg = prob.target_density_grad(p);
                const double through_g = two_r * f / (g * g);
                adj[1] = through_g * dg.x;
                adj[2] = through_g * dg.y;
                adj[3] = two_r * u.hyy;
                adj[4] = -2.0 * two_r * u.hxy;
                adj[5] = two_r * u.hxx;

                const double tr = u.hess_trace();
                if (tr < 0.0) {
                    sum.convexity += tr * tr;
                    adj[3] += 2.0 * tr * wc;
                    adj[5] += 2.0 * tr * wc;
                }
            } else {
                sum.boundary += prob.boundary_penalty(p);
                const Vec2 dp = prob.boundary_penalty_grad(p);
                adj[1] = wb * dp.x;
                adj[2] = wb * dp.y;
            }
        }
        batch::backward(net, count, adjoint, grad, ws);
        });
    }
    errors.rethrow_if_any();

    // ordered combine keeps results independent of the thread count
    std::fill(grad_out.begin(), grad_out.end(), 0.0);
    LossBreakdown out;
    for (std::size_t c = 0; c < n_chunks; ++c) {
        for (std::size_t k = 0; k < n_params; ++k) grad_out[k] += part_grad[c][k];
        out.interior += part_sum[c].interior;
        out.convexity += part_sum[c].convexity;
        out.boundary += part_sum[c].boundary;
    }
    out.interior *= w.alpha / n_i;
    out.convexity *= w.beta / n_i;
    out.boundary *= w.gamma / n_b;
    out.total = out.interior + out.convexity + out.boundary;
    return out;
}

}  // namespace manet
