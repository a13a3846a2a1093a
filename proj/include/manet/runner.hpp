#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "manet/evaluate.hpp"
#include "manet/io.hpp"
#include "manet/loss.hpp"
#include "manet/network.hpp"
#include "manet/optimize.hpp"
#include "manet/problem.hpp"
#include "manet/sampling.hpp"

namespace manet {

enum class OptimizerKind { Lbfgs, Adam };

/// Everything one training run needs. Defaults reproduce the reference
/// experimental setup: 2500 interior / 500 boundary points, three hidden
/// layers of 32 neurons, unit loss weights, 15 s budget.
struct RunConfig {
    ProblemId problem = ProblemId::A;
    std::vector<int> layer_sizes = {2, 32, 32, 32, 1};
    int n_interior = 2500;
    int n_boundary = 500;
    LossWeights weights{};
    OptimizerKind optimizer = OptimizerKind::Lbfgs;
    double timeout_s = 15.0;
    std::size_t max_iter = std::numeric_limits<std::size_t>::max();
    double grad_tol = 1e-10;
    std::size_t lbfgs_memory = 10;
    AdamOptions adam{};
    int eval_rows = 100;
    int eval_cols = 100;
    bool record_metric = true;  // per-iteration NMAE when an exact reflector exists
};

struct SolveOutcome {
    Mlp net;
    SamplePlan plan;
    RunRecord record;
    double final_metric = std::numeric_limits<double>::quiet_NaN();  // NMAE, when defined
    double wall_s = 0.0;  // optimization wall time
};

/// Objective over the flat parameter vector; the latest evaluated breakdown
/// is left in *last for the run record. The source density over the fixed
/// interior points is evaluated once up front.
inline Objective make_loss_objective(Mlp& net, const SamplePlan& plan, const Problem& prob,
                                     const LossWeights& w, LossBreakdown* last = nullptr) {
    auto f_cache = std::make_shared<const std::vector<double>>(cache_source_density(plan, prob));
    Objective obj;
    obj.value = [&net, &plan, &prob, w, last, f_cache](std::span<const double> p) {
        unflatten_into(net, p);
        const LossBreakdown bd = total_loss(net, plan, prob, w, *f_cache);
        if (last) *last = bd;
        return bd.total;
    };
    obj.value_and_gradient = [&net, &plan, &prob, w, last, f_cache](std::span<const double> p,
                                                                    std::span<double> grad) {
        unflatten_into(net, p);
        const LossBreakdown bd = loss_and_gradient(net, plan, prob, w, grad, *f_cache);
        if (last) *last = bd;
        return bd.total;
    };
    return obj;
}

/// One full training run: sample, initialize, optimize, evaluate.
/// Deterministic for a given (config, seed).
inline SolveOutcome run_solve(const RunConfig& cfg, std::uint64_t seed) {
    const Problem prob = make_problem(cfg.problem);
    SamplePlan plan = make_sample_plan(prob.source, cfg.n_interior, cfg.n_boundary, seed);
    Mlp net = mlp_init(cfg.layer_sizes, seed);

    LossBreakdown last;
    Objective obj = make_loss_objective(net, plan, prob, cfg.weights, &last);

    RunHooks hooks;
    hooks.breakdown = [&last] { return last; };
    std::vector<Vec2> grid;
    Mlp eval_net = net;
    if (prob.has_exact() && cfg.record_metric) {
        grid = eval_grid(prob.source, cfg.eval_rows, cfg.eval_cols);
        hooks.metric = [&eval_net, &prob, &grid](std::span<const double> p) {
            unflatten_into(eval_net, p);
            return solution_nmae(eval_net, prob, grid);
        };
    }

    OptimizeResult result;
    if (cfg.optimizer == OptimizerKind::Lbfgs) {
        LbfgsOptions opts;
        opts.memory = cfg.lbfgs_memory;
        opts.timeout_s = cfg.timeout_s;
        opts.max_iter = cfg.max_iter;
        opts.grad_tol = cfg.grad_tol;
        result = run_lbfgs(obj, flatten(net), opts, hooks);
    } else {
        AdamOptions opts = cfg.adam;
        opts.timeout_s = cfg.timeout_s;
        opts.max_iter = std::min(cfg.max_iter, opts.max_iter);
        result = run_adam(obj, flatten(net), opts, hooks);
    }

    SolveOutcome out;
    unflatten_into(net, result.params);
    out.net = std::move(net);
    out.plan = std::move(plan);
    out.wall_s = result.record.rows.back().time_s;
    if (prob.has_exact()) {
        if (cfg.record_metric) {
            out.final_metric = result.record.rows.back().metric;
        } else {
            if (grid.empty()) grid = eval_grid(prob.source, cfg.eval_rows, cfg.eval_cols);
            out.final_metric = solution_nmae(out.net, prob, grid);
        }
    }
    out.record = std::move(result.record);
    return out;
}

// ---- small statistics for sweeps ------------------------------------------

inline double median(std::vector<double> v) {
    if (v.empty()) throw std::invalid_argument("median of empty set");
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

struct MeanCi {
    double mean = 0.0;
    double half_width = 0.0;  // 1.96 * stderr
};

inline MeanCi mean_ci95(const std::vector<double>& v) {
    if (v.empty()) throw std::invalid_argument("mean of empty set");
    MeanCi out;
    for (double x : v) out.mean += x;
    out.mean /= static_cast<double>(v.size());
    if (v.size() > 1) {
        double ss = 0.0;
        for (double x : v) ss += (x - out.mean) * (x - out.mean);
        const double stderr_ = std::sqrt(ss / static_cast<double>(v.size() - 1)) /
                               std::sqrt(static_cast<double>(v.size()));
        out.half_width = 1.96 * stderr_;
    }
    return out;
}

}  // namespace manet
