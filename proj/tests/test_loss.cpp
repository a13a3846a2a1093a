#include <catch2/catch_amalgamated.hpp>
#include <algorithm>
#include <numbers>

#include "manet/loss.hpp"
#include "manet/objective.hpp"
#include "manet/rng.hpp"
#include "manet/runner.hpp"
#include "test_helpers.hpp"

using namespace manet;
using manet::testing::rel_err;

namespace {

Jet2 with_hess(double hxx, double hxy, double hyy) {
    Jet2 j;
    j.hxx = hxx;
    j.hxy = hxy;
    j.hyy = hyy;
    return j;
}

}  // namespace

TEST_CASE("interior residual") {
    CHECK(interior_residual(with_hess(1, 0, 1), 1.0, 1.0) == 0.0);
    CHECK(interior_residual(with_hess(1, 0, 1), 2.0, 1.0) == 1.0);
    CHECK_THROWS_AS(interior_residual(with_hess(1, 0, 1), 1.0, 0.0), std::domain_error);
    CHECK_THROWS_AS(interior_residual(with_hess(1, 0, 1), 1.0, -2.0), std::domain_error);

    SECTION("vanishes on the exact reflector by construction") {
        const Problem a = make_problem(ProblemId::A);
        const Vec2 x{0.3, -0.2};
        const Jet2 u = a.exact_solution(x);
        const double g = a.target_density({u.grad[0], u.grad[1]});
        CHECK(interior_residual(u, a.source_density(x), g) <= 1e-12);
    }
}

TEST_CASE("convexity penalty") {
    CHECK(convexity_penalty(with_hess(1, 0, 1)) == 0.0);
    CHECK(convexity_penalty(with_hess(-1, 0, -1)) == 4.0);
    // trace 0.5 >= 0: the negative eigenvalue is policed by the residual term
    CHECK(convexity_penalty(with_hess(1, 0, -0.5)) == 0.0);
    CHECK(convexity_penalty(with_hess(-0.25, 3, 0.25)) == 0.0);
}

TEST_CASE("total loss") {
    const Problem a = make_problem(ProblemId::A);
    const SamplePlan plan = make_sample_plan(a.source, 512, 128, 11);

    SECTION("vanishes on the exact reflector's jets") {
        const LossBreakdown bd = total_loss_of(a.exact_solution, plan, a, {});
        CHECK(bd.total <= 1e-10);
        CHECK(bd.interior >= 0.0);
        CHECK(bd.convexity == 0.0);
        CHECK(bd.boundary >= 0.0);
    }

    SECTION("zero-parameter network: unit boundary loss") {
        Mlp net = mlp_init({2, 8, 1}, 0);
        unflatten_into(net, std::vector<double>(flat_size(net.layer_sizes), 0.0));
        const LossBreakdown bd = total_loss(net, plan, a, {});
        // gradient is identically zero, so every boundary point sits at distance 1
        CHECK(bd.boundary == Catch::Approx(1.0));
        CHECK(bd.interior > 0.0);
    }

    SECTION("zero weights give zero loss") {
        const Mlp net = mlp_init({2, 8, 1}, 1);
        const LossBreakdown bd = total_loss(net, plan, a, {0.0, 0.0, 0.0});
        CHECK(bd.total == 0.0);
    }

    SECTION("breakdown additivity") {
        const Mlp net = mlp_init({2, 8, 8, 1}, 2);
        const LossBreakdown bd = total_loss(net, plan, a, {0.7, 1.3, 2.1});
        CHECK(bd.total == bd.interior + bd.convexity + bd.boundary);
        CHECK(bd.interior >= 0.0);
        CHECK(bd.convexity >= 0.0);
        CHECK(bd.boundary >= 0.0);
    }

    SECTION("identical plans give bit-identical losses") {
        const Mlp net = mlp_init({2, 8, 8, 1}, 3);
        const LossBreakdown x = total_loss(net, plan, a, {});
        const LossBreakdown y = total_loss(net, plan, a, {});
        CHECK(x.total == y.total);
        CHECK(x.interior == y.interior);
    }

    SECTION("permutation of points changes the loss only by reassociation") {
        const Mlp net = mlp_init({2, 8, 8, 1}, 3);
        SamplePlan shuffled = plan;
        std::reverse(shuffled.interior.begin(), shuffled.interior.end());
        std::reverse(shuffled.boundary.begin(), shuffled.boundary.end());
        const LossBreakdown x = total_loss(net, plan, a, {});
        const LossBreakdown y = total_loss(net, shuffled, a, {});
        CHECK(rel_err(x.total, y.total) < 1e-12);
    }

    SECTION("empty plan is rejected") {
        const Mlp net = mlp_init({2, 8, 1}, 0);
        SamplePlan empty;
        CHECK_THROWS_AS(total_loss(net, empty, a, {}), std::invalid_argument);
    }
}

TEST_CASE("loss gradient against finite differences") {
    const Problem a = make_problem(ProblemId::A);
    const SamplePlan plan = make_sample_plan(a.source, 256, 64, 21);
    Mlp net = mlp_init({2, 8, 8, 1}, 13);
    const std::vector<double> theta = flatten(net);
    const LossWeights w{1.0, 1.0, 1.0};

    std::vector<double> grad(theta.size());
    const LossBreakdown bd = loss_and_gradient(net, plan, a, w, grad);

    Mlp scratch_net = net;
    auto value_at = [&](std::span<const double> p) {
        unflatten_into(scratch_net, p);
        return total_loss(scratch_net, plan, a, w).total;
    };

    SECTION("value agrees with the loss-only path") {
        CHECK(bd.total == Catch::Approx(value_at(theta)).epsilon(1e-14));
    }

    SECTION("coordinate-wise central differences") {
        Rng rng(7);
        const double h = 1e-6;
        for (int rep = 0; rep < 20; ++rep) {
            const std::size_t k = rng.below(theta.size());
            std::vector<double> hi = theta, lo = theta;
            hi[k] += h;
            lo[k] -= h;
            const double fd = (value_at(hi) - value_at(lo)) / (2.0 * h);
            CHECK(rel_err(grad[k], fd) < 1e-6);
        }
    }

    SECTION("directional derivatives in random unit directions") {
        Rng rng(8);
        const double eps = 1e-6;
        for (int rep = 0; rep < 10; ++rep) {
            std::vector<double> dir(theta.size());
            double nrm = 0.0;
            for (double& d : dir) {
                d = rng.uniform(-1, 1);
                nrm += d * d;
            }
            nrm = std::sqrt(nrm);
            for (double& d : dir) d /= nrm;
            std::vector<double> hi = theta, lo = theta;
            for (std::size_t i = 0; i < theta.size(); ++i) {
                hi[i] += eps * dir[i];
                lo[i] -= eps * dir[i];
            }
            const double fd = (value_at(hi) - value_at(lo)) / (2.0 * eps);
            double gd = 0.0;
            for (std::size_t i = 0; i < theta.size(); ++i) gd += grad[i] * dir[i];
            CHECK(rel_err(gd, fd) < 1e-6);
        }
    }

    SECTION("boundary weight scales its loss and gradient components linearly") {
        std::vector<double> g_interior_only(theta.size()), g_unit(theta.size()),
            g_double(theta.size());
        const LossBreakdown bd0 = loss_and_gradient(net, plan, a, {1, 1, 0}, g_interior_only);
        const LossBreakdown bd1 = loss_and_gradient(net, plan, a, {1, 1, 1}, g_unit);
        const LossBreakdown bd2 = loss_and_gradient(net, plan, a, {1, 1, 2}, g_double);
        CHECK(bd0.boundary == 0.0);
        CHECK(bd2.boundary == Catch::Approx(2.0 * bd1.boundary).epsilon(1e-15));
        for (std::size_t i = 0; i < theta.size(); i += 97) {
            const double expected = g_interior_only[i] + 2.0 * (g_unit[i] - g_interior_only[i]);
            CHECK(rel_err(g_double[i], expected) < 1e-12);
        }
    }
}

TEST_CASE("param_gradient contract") {
    SECTION("half squared norm has gradient equal to the parameters") {
        Objective obj;
        obj.value = [](std::span<const double> p) {
            double s = 0.0;
            for (double v : p) s += v * v;
            return 0.5 * s;
        };
        obj.value_and_gradient = [&](std::span<const double> p, std::span<double> g) {
            for (std::size_t i = 0; i < p.size(); ++i) g[i] = p[i];
            return obj.value(p);
        };
        const std::vector<double> params{0.5, -2.0, 3.25};
        const std::vector<double> grad = param_gradient(obj, params);
        CHECK(grad == params);
    }

    SECTION("constant objective has zero gradient") {
        Objective obj;
        obj.value = [](std::span<const double>) { return 4.2; };
        obj.value_and_gradient = [](std::span<const double>, std::span<double> g) {
            std::fill(g.begin(), g.end(), 0.0);
            return 4.2;
        };
        const std::vector<double> grad = param_gradient(obj, std::vector<double>{1.0, 2.0});
        CHECK(grad == std::vector<double>{0.0, 0.0});
    }

    SECTION("divergence is reported") {
        Objective obj;
        obj.value_and_gradient = [](std::span<const double>, std::span<double>) {
            return std::numeric_limits<double>::quiet_NaN();
        };
        CHECK_THROWS_AS(param_gradient(obj, std::vector<double>{1.0}), std::runtime_error);
    }
}

TEST_CASE("gradient of the full default-size loss stays exact") {
    // the largest architecture used anywhere: (2,32,32,32,1)
    const Problem a = make_problem(ProblemId::A);
    const SamplePlan plan = make_sample_plan(a.source, 128, 32, 31);
    Mlp net = mlp_init({2, 32, 32, 32, 1}, 41);
    const std::vector<double> theta = flatten(net);

    std::vector<double> grad(theta.size());
    loss_and_gradient(net, plan, a, {}, grad);

    Mlp scratch_net = net;
    auto value_at = [&](std::span<const double> p) {
        unflatten_into(scratch_net, p);
        return total_loss(scratch_net, plan, a, {}).total;
    };
    Rng rng(17);
    const double h = 1e-6;
    for (int rep = 0; rep < 10; ++rep) {
        const std::size_t k = rng.below(theta.size());
        std::vector<double> hi = theta, lo = theta;
        hi[k] += h;
        lo[k] -= h;
        CHECK(rel_err(grad[k], (value_at(hi) - value_at(lo)) / (2.0 * h)) < 1e-6);
    }
}
