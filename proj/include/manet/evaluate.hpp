#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "manet/domain.hpp"
#include "manet/network.hpp"
#include "manet/problem.hpp"
#include "manet/sampling.hpp"

namespace manet {

/// Normalized mean absolute error: mean |approx - exact| / mean |exact|.
inline double nmae(std::span<const double> approx, std::span<const double> exact) {
    if (approx.size() != exact.size() || approx.empty())
        throw std::invalid_argument("nmae: inputs must have equal nonzero length");
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < approx.size(); ++i) {
        num += std::abs(approx[i] - exact[i]);
        den += std::abs(exact[i]);
    }
    if (den == 0.0) throw std::invalid_argument("nmae: exact values are identically zero");
    return num / den;
}

/// Removes the additive constant the PDE leaves unconstrained: shifts the
/// approximation by the mean signed offset before error measurement. The
/// reflector mapping (the gradient) is unaffected by this shift.
inline std::vector<double> gauge_fix(std::span<const double> approx,
                                     std::span<const double> exact) {
    if (approx.size() != exact.size() || approx.empty())
        throw std::invalid_argument("gauge_fix: inputs must have equal nonzero length");
    double shift = 0.0;
    for (std::size_t i = 0; i < approx.size(); ++i) shift += approx[i] - exact[i];
    shift /= static_cast<double>(approx.size());
    std::vector<double> out(approx.begin(), approx.end());
    for (double& v : out) v -= shift;
    return out;
}

/// Pointwise |u_approx - u_exact| over a grid, after gauge fixing.
struct ErrorMap {
    std::vector<Vec2> grid;
    std::vector<double> abs_error;
    double nmae = 0.0;
    int rows = 0, cols = 0;  // raster shape of the grid
};

inline ErrorMap make_error_map(const Mlp& net, const std::function<Jet2(Vec2)>& exact_u,
                               const std::vector<Vec2>& grid, int rows, int cols) {
    ErrorMap em;
    em.grid = grid;
    em.rows = rows;
    em.cols = cols;
    std::vector<double> approx(grid.size()), exact(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        approx[i] = forward_value(net, grid[i]);
        exact[i] = exact_u(grid[i]).value;
    }
    const std::vector<double> shifted = gauge_fix(approx, exact);
    em.abs_error.resize(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) em.abs_error[i] = std::abs(shifted[i] - exact[i]);
    em.nmae = nmae(shifted, exact);
    return em;
}

/// Gauge-fixed NMAE of the network against the exact reflector on a grid.
inline double solution_nmae(const Mlp& net, const Problem& prob, const std::vector<Vec2>& grid) {
    if (!prob.has_exact())
        throw std::invalid_argument("solution_nmae: problem has no exact reflector");
    std::vector<double> approx(grid.size()), exact(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        approx[i] = forward_value(net, grid[i]);
        exact[i] = prob.exact_solution(grid[i]).value;
    }
    return nmae(gauge_fix(approx, exact), exact);
}

// ---- ray-traced images ---------------------------------------------------

struct Extent {
    double xmin, xmax, ymin, ymax;
};

/// Extents that cover the target boundary with margin.
inline Extent default_extent(const Domain& target) {
    if (target.kind() == DomainKind::Flower) return {-1.15, 1.15, -1.15, 1.15};
    return {-1.05, 1.05, -1.05, 1.05};
}

/// Histogram of ray hits over a rectangular extent, normalized to unit mass.
struct BinnedImage {
    Extent extent{};
    int rows = 0, cols = 0;
    std::vector<double> mass;    // row-major, rows scan y, cols scan x
    double overflow = 0.0;       // weight landing outside the extent (pre-normalization)

    double& at(int r, int c) { return mass[static_cast<std::size_t>(r) * cols + c]; }
    double at(int r, int c) const { return mass[static_cast<std::size_t>(r) * cols + c]; }
};

/// Quasi-Monte-Carlo ray trace: Halton samples on the source domain, each
/// weighted by the source density, pushed through the mapping and binned.
inline BinnedImage ray_trace(const std::function<Vec2(Vec2)>& map_fn, const Domain& source,
                             const std::function<double(Vec2)>& source_density, std::size_t n_rays,
                             int rows, int cols, const Extent& extent,
                             std::uint64_t halton_skip = 64) {
    if (n_rays < 1) throw std::invalid_argument("ray_trace: n_rays must be >= 1");
    if (rows < 1 || cols < 1) throw std::invalid_argument("ray_trace: bins must be >= 1");
    BinnedImage img;
    img.extent = extent;
    img.rows = rows;
    img.cols = cols;
    img.mass.assign(static_cast<std::size_t>(rows) * cols, 0.0);

    const double inv_dx = cols / (extent.xmax - extent.xmin);
    const double inv_dy = rows / (extent.ymax - extent.ymin);

    // stream rays in fixed-size blocks to bound memory at large ray counts
    constexpr std::size_t kBlock = 1 << 20;
    const Domain::BBox box = source.bounding_box();
    std::uint64_t index = halton_skip;
    std::size_t traced = 0;
    while (traced < n_rays) {
        const std::size_t want = std::min(kBlock, n_rays - traced);
        std::size_t got = 0;
        while (got < want) {
            ++index;
            const Vec2 x{box.xmin + (box.xmax - box.xmin) * detail::radical_inverse(index, 2),
                         box.ymin + (box.ymax - box.ymin) * detail::radical_inverse(index, 3)};
            if (!source.contains(x)) continue;
            ++got;
            const double w = source_density(x);
            const Vec2 y = map_fn(x);
            const int c = static_cast<int>(std::floor((y.x - extent.xmin) * inv_dx));
            const int r = static_cast<int>(std::floor((y.y - extent.ymin) * inv_dy));
            if (r < 0 || r >= rows || c < 0 || c >= cols) {
                img.overflow += w;
            } else {
                img.at(r, c) += w;
            }
        }
        traced += got;
    }

    double total = 0.0;
    for (double v : img.mass) total += v;
    if (total > 0.0)
        for (double& v : img.mass) v /= total;
    return img;
}

/// Reference image of the target density, supersampled so partial boundary
/// bins carry fractional mass.
inline BinnedImage target_image(const Problem& prob, int rows, int cols, const Extent& extent,
                                int supersample = 4) {
    if (supersample < 1) throw std::invalid_argument("target_image: supersample must be >= 1");
    if (rows < 1 || cols < 1) throw std::invalid_argument("target_image: bins must be >= 1");
    BinnedImage img;
    img.extent = extent;
    img.rows = rows;
    img.cols = cols;
    img.mass.assign(static_cast<std::size_t>(rows) * cols, 0.0);
    const double dx = (extent.xmax - extent.xmin) / cols;
    const double dy = (extent.ymax - extent.ymin) / rows;
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            double acc = 0.0;
            for (int sr = 0; sr < supersample; ++sr) {
                for (int sc = 0; sc < supersample; ++sc) {
                    const Vec2 y{extent.xmin + dx * (c + (sc + 0.5) / supersample),
                                 extent.ymin + dy * (r + (sr + 0.5) / supersample)};
                    if (prob.target.contains(y)) acc += prob.target_density(y);
                }
            }
            img.at(r, c) = acc / (supersample * supersample);
        }
    }
    double total = 0.0;
    for (double v : img.mass) total += v;
    if (total > 0.0)
        for (double& v : img.mass) v /= total;
    return img;
}

/// NMAE between two binned images over all bins of the extent.
inline double image_nmae(const BinnedImage& traced, const BinnedImage& target) {
    if (traced.rows != target.rows || traced.cols != target.cols)
        throw std::invalid_argument("image_nmae: bin shapes differ");
    return nmae(traced.mass, target.mass);
}

// ---- post-training audits --------------------------------------------------

struct HessianAudit {
    double min_trace = 0.0;
    double min_eigenvalue = 0.0;
};

/// Smaller eigenvalue of the symmetric 2x2 Hessian: (tr - sqrt(tr^2 - 4 det)) / 2.
/// The discriminant (hxx-hyy)^2 + 4 hxy^2 is clamped against roundoff.
inline double hess_min_eigenvalue(const Jet2& u) {
    const double tr = u.hess_trace();
    const double disc = std::max(0.0, tr * tr - 4.0 * u.hess_det());
    return 0.5 * (tr - std::sqrt(disc));
}

/// Extremes of the network Hessian over a grid.
inline HessianAudit hessian_audit(const Mlp& net, const std::vector<Vec2>& grid) {
    HessianAudit audit;
    audit.min_trace = std::numeric_limits<double>::infinity();
    audit.min_eigenvalue = std::numeric_limits<double>::infinity();
    ForwardCache cache;
    for (const Vec2& p : grid) {
        const Jet2 u = forward_jet(net, p, cache);
        audit.min_trace = std::min(audit.min_trace, u.hess_trace());
        audit.min_eigenvalue = std::min(audit.min_eigenvalue, hess_min_eigenvalue(u));
    }
    return audit;
}

/// Worst target-boundary penalty of the learned mapping over the source
/// boundary points.
inline double max_boundary_penalty(const Mlp& net, const Problem& prob, int m_boundary) {
    double worst = 0.0;
    for (const Vec2& b : boundary_points(prob.source, m_boundary))
        worst = std::max(worst, prob.boundary_penalty(mapping(net, b)));
    return worst;
}

}  // namespace manet
