#pragma once

#include <cmath>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

namespace manet {

/// A scalar function of a flat parameter vector together with its exact
/// gradient. Optimizers rely solely on these two evaluations.
struct Objective {
    std::function<double(std::span<const double>)> value;
    // writes the gradient into the span, returns the value
    std::function<double(std::span<const double>, std::span<double>)> value_and_gradient;
};

/// Exact gradient of the objective at params, in flat-vector order.
/// A non-finite objective value signals divergence.
inline std::vector<double> param_gradient(const Objective& obj, std::span<const double> params) {
    std::vector<double> grad(params.size(), 0.0);
    const double f = obj.value_and_gradient(params, grad);
    if (!std::isfinite(f)) throw std::runtime_error("param_gradient: objective diverged");
    return grad;
}

}  // namespace manet
