#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <utility>

namespace manet {

/// Second-order Taylor jet of a scalar with respect to a 2-D input point:
/// value, gradient and the three unique entries of the symmetric Hessian.
/// Storing (hxx, hxy, hyy) makes Hessian symmetry structural.
struct Jet2 {
    double value = 0.0;
    std::array<double, 2> grad{0.0, 0.0};
    double hxx = 0.0;
    double hxy = 0.0;
    double hyy = 0.0;

    double hess_det() const { return hxx * hyy - hxy * hxy; }
    double hess_trace() const { return hxx + hyy; }
};

struct Vec2 {
    double x = 0.0;
    double y = 0.0;
};

inline Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
inline Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
inline Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double norm(Vec2 a) { return std::hypot(a.x, a.y); }

/// Coordinate jets at a point: d/dx seeds (1,0), d/dy seeds (0,1), zero Hessians.
inline std::pair<Jet2, Jet2> jet_seed(Vec2 p) {
    Jet2 jx, jy;
    jx.value = p.x;
    jx.grad = {1.0, 0.0};
    jy.value = p.y;
    jy.grad = {0.0, 1.0};
    return {jx, jy};
}

inline Jet2 jet_constant(double c) {
    Jet2 j;
    j.value = c;
    return j;
}

// ---- elementary arithmetic -------------------------------------------------

inline Jet2 operator+(const Jet2& a, const Jet2& b) {
    Jet2 r;
    r.value = a.value + b.value;
    r.grad = {a.grad[0] + b.grad[0], a.grad[1] + b.grad[1]};
    r.hxx = a.hxx + b.hxx;
    r.hxy = a.hxy + b.hxy;
    r.hyy = a.hyy + b.hyy;
    return r;
}

inline Jet2 operator-(const Jet2& a, const Jet2& b) {
    Jet2 r;
    r.value = a.value - b.value;
    r.grad = {a.grad[0] - b.grad[0], a.grad[1] - b.grad[1]};
    r.hxx = a.hxx - b.hxx;
    r.hxy = a.hxy - b.hxy;
    r.hyy = a.hyy - b.hyy;
    return r;
}

inline Jet2 operator-(const Jet2& a) {
    Jet2 r;
    r.value = -a.value;
    r.grad = {-a.grad[0], -a.grad[1]};
    r.hxx = -a.hxx;
    r.hxy = -a.hxy;
    r.hyy = -a.hyy;
    return r;
}

inline Jet2 operator*(const Jet2& a, double s) {
    Jet2 r;
    r.value = a.value * s;
    r.grad = {a.grad[0] * s, a.grad[1] * s};
    r.hxx = a.hxx * s;
    r.hxy = a.hxy * s;
    r.hyy = a.hyy * s;
    return r;
}

inline Jet2 operator*(double s, const Jet2& a) { return a * s; }
inline Jet2 operator/(const Jet2& a, double s) { return a * (1.0 / s); }
inline Jet2 operator+(const Jet2& a, double c) {
    Jet2 r = a;
    r.value += c;
    return r;
}
inline Jet2 operator+(double c, const Jet2& a) { return a + c; }
inline Jet2 operator-(const Jet2& a, double c) { return a + (-c); }
inline Jet2 operator-(double c, const Jet2& a) { return (-a) + c; }

/// Product rule to second order.
inline Jet2 operator*(const Jet2& a, const Jet2& b) {
    Jet2 r;
    r.value = a.value * b.value;
    r.grad = {a.grad[0] * b.value + b.grad[0] * a.value,
              a.grad[1] * b.value + b.grad[1] * a.value};
    r.hxx = a.hxx * b.value + b.hxx * a.value + 2.0 * a.grad[0] * b.grad[0];
    r.hxy = a.hxy * b.value + b.hxy * a.value + a.grad[0] * b.grad[1] + a.grad[1] * b.grad[0];
    r.hyy = a.hyy * b.value + b.hyy * a.value + 2.0 * a.grad[1] * b.grad[1];
    return r;
}

namespace detail {

/// Chain rule for a smooth univariate f applied to a jet, given f(v), f'(v), f''(v).
inline Jet2 compose(const Jet2& a, double f0, double f1, double f2) {
    Jet2 r;
    r.value = f0;
    r.grad = {f1 * a.grad[0], f1 * a.grad[1]};
    r.hxx = f2 * a.grad[0] * a.grad[0] + f1 * a.hxx;
    r.hxy = f2 * a.grad[0] * a.grad[1] + f1 * a.hxy;
    r.hyy = f2 * a.grad[1] * a.grad[1] + f1 * a.hyy;
    return r;
}

}  // namespace detail

inline Jet2 exp(const Jet2& a) {
    const double e = std::exp(a.value);
    return detail::compose(a, e, e, e);
}

inline Jet2 sin(const Jet2& a) {
    const double s = std::sin(a.value), c = std::cos(a.value);
    return detail::compose(a, s, c, -s);
}

inline Jet2 cos(const Jet2& a) {
    const double s = std::sin(a.value), c = std::cos(a.value);
    return detail::compose(a, c, -s, -c);
}

inline Jet2 sqrt(const Jet2& a) {
    const double v = std::sqrt(a.value);
    return detail::compose(a, v, 0.5 / v, -0.25 / (v * a.value));
}

inline Jet2 tanh(const Jet2& a) {
    const double t = std::tanh(a.value);
    const double s = 1.0 - t * t;  // sech^2 without evaluating cosh
    return detail::compose(a, t, s, -2.0 * t * s);
}

/// atan2(b, a): angle of the point (a, b). Undefined at the origin.
inline Jet2 atan2(const Jet2& b, const Jet2& a) {
    const double av = a.value, bv = b.value;
    const double q = av * av + bv * bv;
    const double fa = -bv / q;
    const double fb = av / q;
    const double q2 = q * q;
    const double faa = 2.0 * av * bv / q2;
    const double fab = (bv * bv - av * av) / q2;
    const double fbb = -2.0 * av * bv / q2;
    Jet2 r;
    r.value = std::atan2(bv, av);
    r.grad = {fa * a.grad[0] + fb * b.grad[0], fa * a.grad[1] + fb * b.grad[1]};
    r.hxx = fa * a.hxx + fb * b.hxx + faa * a.grad[0] * a.grad[0] +
            fab * 2.0 * a.grad[0] * b.grad[0] + fbb * b.grad[0] * b.grad[0];
    r.hxy = fa * a.hxy + fb * b.hxy + faa * a.grad[0] * a.grad[1] +
            fab * (a.grad[0] * b.grad[1] + a.grad[1] * b.grad[0]) +
            fbb * b.grad[0] * b.grad[1];
    r.hyy = fa * a.hyy + fb * b.hyy + faa * a.grad[1] * a.grad[1] +
            fab * 2.0 * a.grad[1] * b.grad[1] + fbb * b.grad[1] * b.grad[1];
    return r;
}

/// Linear combination of jets plus a bias on the value channel.
inline Jet2 jet_affine(std::span<const double> weights, std::span<const Jet2> jets, double bias) {
    if (weights.size() != jets.size() || weights.empty())
        throw std::invalid_argument("jet_affine: weights and jets must have equal nonzero length");
    Jet2 r;
    r.value = bias;
    for (std::size_t k = 0; k < weights.size(); ++k) {
        const double w = weights[k];
        const Jet2& j = jets[k];
        r.value += w * j.value;
        r.grad[0] += w * j.grad[0];
        r.grad[1] += w * j.grad[1];
        r.hxx += w * j.hxx;
        r.hxy += w * j.hxy;
        r.hyy += w * j.hyy;
    }
    return r;
}

// ---- activations -----------------------------------------------------------

enum class Activation { TanhSquared, Identity };

/// sigma(v) together with its first three derivatives. The third derivative
/// feeds the parameter backprop of the Hessian channel.
struct ActivationDerivs {
    double s0, s1, s2, s3;
};

inline ActivationDerivs activation_derivs(Activation kind, double v) {
    if (kind == Activation::Identity) return {v, 1.0, 0.0, 0.0};
    const double t = std::tanh(v);
    const double s = 1.0 - t * t;
    return {t * t,                      // tanh^2
            2.0 * t * s,                // 2 tanh sech^2
            2.0 * s * (s - 2.0 * t * t),
            8.0 * t * s * (t * t - 2.0 * s)};
}

/// Activation with the scalar functions the forward pass needs.
struct ActivationProfile {
    Activation kind = Activation::TanhSquared;

    double sigma(double v) const { return activation_derivs(kind, v).s0; }
    double d1(double v) const { return activation_derivs(kind, v).s1; }
    double d2(double v) const { return activation_derivs(kind, v).s2; }
};

/// Applies sigma to a jet by the chain rule to second order.
inline Jet2 jet_activate(const ActivationProfile& a, const Jet2& j) {
    if (a.kind == Activation::Identity) return j;
    const ActivationDerivs d = activation_derivs(a.kind, j.value);
    return detail::compose(j, d.s0, d.s1, d.s2);
}

}  // namespace manet
