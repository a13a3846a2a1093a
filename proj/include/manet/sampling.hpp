#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "manet/domain.hpp"
#include "manet/rng.hpp"

namespace manet {

struct PoissonSample {
    std::vector<Vec2> points;
    double radius = 0.0;  // final min-distance radius
};

namespace detail {

/// Background acceleration grid for Bridson dart throwing.
class NeighborGrid {
public:
    NeighborGrid(const Domain::BBox& box, double radius)
        : x0_(box.xmin), y0_(box.ymin), cell_(radius / std::numbers::sqrt2) {
        nx_ = std::max(1, static_cast<int>(std::ceil((box.xmax - box.xmin) / cell_)));
        ny_ = std::max(1, static_cast<int>(std::ceil((box.ymax - box.ymin) / cell_)));
        cells_.assign(static_cast<std::size_t>(nx_) * ny_, -1);
    }

    void insert(Vec2 p, int index) { cells_[cell_index(p)] = index; }

    bool has_neighbor_within(Vec2 p, double radius, const std::vector<Vec2>& pts) const {
        const int cx = clamp_x(static_cast<int>((p.x - x0_) / cell_));
        const int cy = clamp_y(static_cast<int>((p.y - y0_) / cell_));
        const double r2 = radius * radius;
        for (int j = std::max(0, cy - 2); j <= std::min(ny_ - 1, cy + 2); ++j) {
            for (int i = std::max(0, cx - 2); i <= std::min(nx_ - 1, cx + 2); ++i) {
                const int idx = cells_[static_cast<std::size_t>(j) * nx_ + i];
                if (idx < 0) continue;
                const Vec2 d = pts[idx] - p;
                if (d.x * d.x + d.y * d.y < r2) return true;
            }
        }
        return false;
    }

private:
    std::size_t cell_index(Vec2 p) const {
        const int cx = clamp_x(static_cast<int>((p.x - x0_) / cell_));
        const int cy = clamp_y(static_cast<int>((p.y - y0_) / cell_));
        return static_cast<std::size_t>(cy) * nx_ + cx;
    }
    int clamp_x(int i) const { return std::clamp(i, 0, nx_ - 1); }
    int clamp_y(int i) const { return std::clamp(i, 0, ny_ - 1); }

    double x0_, y0_, cell_;
    int nx_ = 0, ny_ = 0;
    std::vector<int> cells_;
};

inline std::vector<Vec2> bridson_fill(const Domain& domain, double radius, Rng& rng) {
    constexpr int kCandidates = 30;
    const Domain::BBox box = domain.bounding_box();
    NeighborGrid grid(box, radius);
    std::vector<Vec2> points;
    std::vector<int> active;

    // seed point by rejection inside the domain
    Vec2 seed;
    do {
        seed = {rng.uniform(box.xmin, box.xmax), rng.uniform(box.ymin, box.ymax)};
    } while (!domain.contains(seed));
    points.push_back(seed);
    grid.insert(seed, 0);
    active.push_back(0);

    while (!active.empty()) {
        const std::size_t slot = static_cast<std::size_t>(rng.below(active.size()));
        const Vec2 base = points[active[slot]];
        bool placed = false;
        for (int c = 0; c < kCandidates; ++c) {
            // area-uniform draw from the annulus [radius, 2*radius]
            const double rho = radius * std::sqrt(1.0 + 3.0 * rng.uniform());
            const double phi = 2.0 * std::numbers::pi * rng.uniform();
            const Vec2 cand = base + rho * Vec2{std::cos(phi), std::sin(phi)};
            if (!domain.contains(cand)) continue;
            if (grid.has_neighbor_within(cand, radius, points)) continue;
            const int idx = static_cast<int>(points.size());
            points.push_back(cand);
            grid.insert(cand, idx);
            active.push_back(idx);
            placed = true;
            break;
        }
        if (!placed) {
            active[slot] = active.back();
            active.pop_back();
        }
    }
    return points;
}

}  // namespace detail

/// Bridson blue-noise sampling yielding exactly n_target interior points.
/// The starting radius targets hexagonal packing density; the radius shrinks
/// 5% per retry until the yield reaches the target, then the set is
/// subsampled uniformly.
inline PoissonSample poisson_disk(const Domain& domain, int n_target, std::uint64_t seed) {
    if (n_target < 1) throw std::invalid_argument("poisson_disk: n_target must be >= 1");
    Rng rng(seed);
    double radius = std::sqrt(2.0 * domain.area() / (std::numbers::sqrt3 * n_target));
    for (int attempt = 0; attempt <= 20; ++attempt) {
        std::vector<Vec2> pts = detail::bridson_fill(domain, radius, rng);
        if (static_cast<int>(pts.size()) >= n_target) {
            // uniform subsample to the exact count (partial Fisher-Yates)
            for (int i = 0; i < n_target; ++i) {
                const std::size_t j = i + rng.below(pts.size() - i);
                std::swap(pts[i], pts[j]);
            }
            pts.resize(n_target);
            return {std::move(pts), radius};
        }
        radius *= 0.95;
    }
    throw std::runtime_error("poisson_disk: target count not reached after 20 retries");
}

/// m points even in the boundary parameter, starting at t = 0.
inline std::vector<Vec2> boundary_points(const Domain& domain, int m) {
    if (m < 1) throw std::invalid_argument("boundary_points: m must be >= 1");
    std::vector<Vec2> pts;
    pts.reserve(m);
    for (int i = 0; i < m; ++i) pts.push_back(domain.boundary_param(static_cast<double>(i) / m));
    return pts;
}

/// Evaluation grid: polar for disks (radii on (0,R], no duplicated center),
/// Cartesian tensor grid including the edges for squares.
inline std::vector<Vec2> eval_grid(const Domain& domain, int rows, int cols) {
    if (rows < 2 || cols < 2) throw std::invalid_argument("eval_grid: rows/cols must be >= 2");
    std::vector<Vec2> pts;
    pts.reserve(static_cast<std::size_t>(rows) * cols);
    switch (domain.kind()) {
        case DomainKind::Disk:
        case DomainKind::Flower: {
            for (int i = 0; i < rows; ++i) {
                for (int j = 0; j < cols; ++j) {
                    const double phi = 2.0 * std::numbers::pi * j / cols;
                    const double rmax = domain.kind() == DomainKind::Disk
                                            ? domain.radius()
                                            : domain.flower_radius(phi);
                    const double r = rmax * (i + 1) / rows;
                    pts.push_back(domain.center() + r * Vec2{std::cos(phi), std::sin(phi)});
                }
            }
            break;
        }
        case DomainKind::Square: {
            const double h = domain.half_side();
            for (int i = 0; i < rows; ++i) {
                for (int j = 0; j < cols; ++j) {
                    const double x = domain.center().x - h + 2.0 * h * i / (rows - 1);
                    const double y = domain.center().y - h + 2.0 * h * j / (cols - 1);
                    pts.push_back({x, y});
                }
            }
            break;
        }
    }
    return pts;
}

namespace detail {

inline double radical_inverse(std::uint64_t i, unsigned base) {
    double inv = 1.0 / base, value = 0.0, scale = inv;
    while (i > 0) {
        value += static_cast<double>(i % base) * scale;
        i /= base;
        scale *= inv;
    }
    return value;
}

}  // namespace detail

/// Halton (2,3) points over the domain's bounding box, rejection-filtered to
/// the domain. Indexing starts at 1, so skip=0 yields (1/2, 1/3) first on the
/// unit box. The default skip drops correlated leading terms.
inline std::vector<Vec2> halton_points(const Domain& domain, std::size_t n, std::uint64_t skip = 64) {
    if (n < 1) throw std::invalid_argument("halton_points: n must be >= 1");
    const Domain::BBox box = domain.bounding_box();
    std::vector<Vec2> pts;
    pts.reserve(n);
    std::uint64_t index = skip;
    while (pts.size() < n) {
        ++index;
        const Vec2 p{box.xmin + (box.xmax - box.xmin) * detail::radical_inverse(index, 2),
                     box.ymin + (box.ymax - box.ymin) * detail::radical_inverse(index, 3)};
        if (domain.contains(p)) pts.push_back(p);
    }
    return pts;
}

/// Collocation points for one optimization run.
struct SamplePlan {
    std::vector<Vec2> interior;
    std::vector<Vec2> boundary;
    std::uint64_t seed = 0;
    double poisson_radius = 0.0;
};

inline SamplePlan make_sample_plan(const Domain& source, int n_interior, int m_boundary,
                                   std::uint64_t seed) {
    PoissonSample ps = poisson_disk(source, n_interior, seed);
    SamplePlan plan;
    plan.interior = std::move(ps.points);
    plan.boundary = boundary_points(source, m_boundary);
    plan.seed = seed;
    plan.poisson_radius = ps.radius;
    return plan;
}

}  // namespace manet
