#pragma once

#include <cmath>
#include <functional>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>

#include "manet/domain.hpp"
#include "manet/jet.hpp"

namespace manet {

enum class ProblemId { A, B, C, D, E };

inline const char* to_string(ProblemId id) {
    switch (id) {
        case ProblemId::A: return "A";
        case ProblemId::B: return "B";
        case ProblemId::C: return "C";
        case ProblemId::D: return "D";
        case ProblemId::E: return "E";
    }
    return "?";
}

inline std::optional<ProblemId> parse_problem(const std::string& s) {
    if (s == "A" || s == "a") return ProblemId::A;
    if (s == "B" || s == "b") return ProblemId::B;
    if (s == "C" || s == "c") return ProblemId::C;
    if (s == "D" || s == "d") return ProblemId::D;
    if (s == "E" || s == "e") return ProblemId::E;
    return std::nullopt;
}

/// One reflector design problem: source/target region, light densities,
/// target-boundary penalty, and (when known) the exact reflector as a jet.
struct Problem {
    ProblemId id = ProblemId::A;
    Domain source;
    Domain target;
    std::function<double(Vec2)> source_density;     // light intensity on the source plane
    std::function<double(Vec2)> target_density;     // desired far-field intensity, defined globally
    std::function<Vec2(Vec2)> target_density_grad;
    std::function<double(Vec2)> boundary_penalty;   // zero exactly on the target boundary
    std::function<Vec2(Vec2)> boundary_penalty_grad;
    std::function<Jet2(Vec2)> exact_solution;       // empty when no closed form exists

    bool has_exact() const { return static_cast<bool>(exact_solution); }
};

// ---- densities -------------------------------------------------------------
// Written generically so the same formula yields plain values (T = double)
// and exact gradients (T = Jet2).

namespace detail {

template <class T>
T target_density_sincos(const T& y1, const T& y2) {
    using std::cos;
    using std::sin;
    return sin(y1 * y1 + y2) * cos(4.0 * y2) + 2.0;
}

template <class T>
T target_density_triple(const T& y1, const T& y2) {
    using std::cos;
    using std::sin;
    return sin(y1 * y1 + 8.0 * (y2 * y2 * y2)) * cos(5.0 * y2) * sin(5.0 * y1 + 7.0 * y2) + 3.0;
}

template <class Fn>
Vec2 density_gradient(Fn&& fn, Vec2 y) {
    auto [j1, j2] = jet_seed(y);
    const Jet2 g = fn(j1, j2);
    return {g.grad[0], g.grad[1]};
}

// ---- exact reflectors ------------------------------------------------------

inline Jet2 reflector_radial_exp(Vec2 p) {
    auto [x1, x2] = jet_seed(p);
    const Jet2 r2 = x1 * x1 + x2 * x2;
    return exp(r2) / (2.0 * std::numbers::e);
}

inline Jet2 reflector_asymmetric_1(Vec2 p) {
    auto [x1, x2] = jet_seed(p);
    const double pi = std::numbers::pi;
    const Jet2 r2 = x1 * x1 + x2 * x2;
    const Jet2 bump = (x1 * x1 * x2) * 0.5 + cos(x1 * x2) * 0.5;
    return 0.5 * r2 + bump * (cos(pi * r2) + 1.0) / (2.0 * pi * pi);
}

inline Jet2 reflector_asymmetric_2(Vec2 p) {
    auto [x1, x2] = jet_seed(p);
    const double pi = std::numbers::pi;
    const Jet2 r2 = x1 * x1 + x2 * x2;
    return 0.5 * r2 + exp(-(x1 * x1) + x2) * (1.0 + cos(pi * r2)) / (5.0 * pi * pi);
}

// ---- target-boundary penalties ----------------------------------------------

inline double circle_penalty(Vec2 y) {
    const double d = norm(y) - 1.0;
    return d * d;
}

inline Vec2 circle_penalty_grad(Vec2 y) {
    const double r = norm(y);
    if (r < 1e-14) return {0.0, 0.0};  // kink at the origin; subgradient zero
    return (2.0 * (r - 1.0) / r) * y;
}

/// Squared distance to the point on the flower curve at the same polar angle.
/// Cheaper than the true nearest-point distance and zero exactly on the curve.
template <class T>
T flower_penalty_impl(const T& y1, const T& y2, double amplitude, int lobes) {
    using std::atan2;
    using std::cos;
    using std::sin;
    const T angle = atan2(y2, y1);
    const T radius = amplitude * cos(static_cast<double>(lobes) * angle) + 1.0;
    const T dx = y1 - radius * cos(angle);
    const T dy = y2 - radius * sin(angle);
    return dx * dx + dy * dy;
}

}  // namespace detail

/// f(x) = g(grad u(x)) * det(D^2 u(x)) for a known reflector; the residual of
/// the trained network is measured against this source density.
inline double derived_source_density(const std::function<Jet2(Vec2)>& exact_u,
                                     const std::function<double(Vec2)>& g, Vec2 x) {
    const Jet2 u = exact_u(x);
    const double gv = g({u.grad[0], u.grad[1]});
    if (gv <= 0.0)
        throw std::domain_error("derived source density: target density not positive at mapped point");
    return gv * u.hess_det();
}

inline Problem make_problem(ProblemId id) {
    Problem prob;
    prob.id = id;
    const Domain unit_disk = Domain::disk({0.0, 0.0}, 1.0);

    switch (id) {
        case ProblemId::A:
        case ProblemId::B: {
            prob.source = unit_disk;
            prob.target = unit_disk;
            prob.exact_solution = id == ProblemId::A ? detail::reflector_radial_exp
                                                     : detail::reflector_asymmetric_1;
            prob.target_density = [](Vec2 y) {
                return detail::target_density_sincos(y.x, y.y);
            };
            prob.target_density_grad = [](Vec2 y) {
                return detail::density_gradient(
                    [](const Jet2& a, const Jet2& b) { return detail::target_density_sincos(a, b); },
                    y);
            };
            break;
        }
        case ProblemId::C: {
            prob.source = unit_disk;
            prob.target = unit_disk;
            prob.exact_solution = detail::reflector_asymmetric_2;
            prob.target_density = [](Vec2 y) {
                return detail::target_density_triple(y.x, y.y);
            };
            prob.target_density_grad = [](Vec2 y) {
                return detail::density_gradient(
                    [](const Jet2& a, const Jet2& b) { return detail::target_density_triple(a, b); },
                    y);
            };
            break;
        }
        case ProblemId::D: {
            prob.source = Domain::square({0.0, 0.0}, 0.5);
            prob.target = unit_disk;
            break;
        }
        case ProblemId::E: {
            prob.source = unit_disk;
            prob.target = Domain::flower();
            break;
        }
    }

    if (prob.has_exact()) {
        // source density derived from the reflector via local energy conservation
        auto exact = prob.exact_solution;
        auto g = prob.target_density;
        prob.source_density = [exact, g](Vec2 x) { return derived_source_density(exact, g, x); };
    } else {
        // uniform light on both sides; conservation fixes the target constant
        const double ratio = prob.source.area() / prob.target.area();
        prob.source_density = [](Vec2) { return 1.0; };
        prob.target_density = [ratio](Vec2) { return ratio; };
        prob.target_density_grad = [](Vec2) { return Vec2{0.0, 0.0}; };
    }

    if (prob.target.kind() == DomainKind::Flower) {
        const double amp = prob.target.flower_amplitude();
        const int lobes = prob.target.flower_lobes();
        prob.boundary_penalty = [amp, lobes](Vec2 y) {
            return detail::flower_penalty_impl(y.x, y.y, amp, lobes);
        };
        prob.boundary_penalty_grad = [amp, lobes](Vec2 y) -> Vec2 {
            if (norm(y) < 1e-14) return {0.0, 0.0};  // angle undefined at the origin
            auto [j1, j2] = jet_seed(y);
            const Jet2 p = detail::flower_penalty_impl(j1, j2, amp, lobes);
            return {p.grad[0], p.grad[1]};
        };
    } else {
        prob.boundary_penalty = detail::circle_penalty;
        prob.boundary_penalty_grad = detail::circle_penalty_grad;
    }
    return prob;
}

}  // namespace manet
