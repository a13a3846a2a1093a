#include <catch2/catch_amalgamated.hpp>

#include "manet/jet.hpp"
#include "manet/rng.hpp"
#include "test_helpers.hpp"

using namespace manet;
using manet::testing::max_jet_fd_error;
using manet::testing::rel_err;

TEST_CASE("coordinate jets seed value, unit gradients and zero Hessians") {
    auto [jx, jy] = jet_seed({3.0, -1.0});
    CHECK(jx.value == 3.0);
    CHECK(jy.value == -1.0);
    CHECK(jx.grad == std::array<double, 2>{1.0, 0.0});
    CHECK(jy.grad == std::array<double, 2>{0.0, 1.0});
    CHECK(jx.hxx == 0.0);
    CHECK(jx.hxy == 0.0);
    CHECK(jx.hyy == 0.0);

    auto [ox, oy] = jet_seed({0.0, 0.0});
    CHECK(ox.value == 0.0);
    CHECK(oy.value == 0.0);

    // orthogonal coordinate directions
    const double d = jx.grad[0] * jy.grad[0] + jx.grad[1] * jy.grad[1];
    CHECK(d == 0.0);
}

TEST_CASE("jet_affine") {
    auto [jx, jy] = jet_seed({0.4, -0.7});
    const Jet2 j = sin(jx * jy) + jx;

    SECTION("single unit weight and zero bias is the identity") {
        const double w[] = {1.0};
        const Jet2 r = jet_affine(w, std::span<const Jet2>(&j, 1), 0.0);
        CHECK(r.value == j.value);
        CHECK(r.grad == j.grad);
        CHECK(r.hxy == j.hxy);
    }

    SECTION("constant jets combine on the value channel only") {
        const double w[] = {2.0, 3.0};
        const Jet2 js[] = {jet_constant(1.0), jet_constant(1.0)};
        const Jet2 r = jet_affine(w, js, 5.0);
        CHECK(r.value == 10.0);
        CHECK(r.grad == std::array<double, 2>{0.0, 0.0});
        CHECK(r.hxx == 0.0);
        CHECK(r.hyy == 0.0);
    }

    SECTION("gradient channel is the same linear combination") {
        Rng rng(7);
        for (int rep = 0; rep < 10; ++rep) {
            const Vec2 p{rng.uniform(-1, 1), rng.uniform(-1, 1)};
            const double w[] = {rng.uniform(-2, 2), rng.uniform(-2, 2)};
            auto combo = [&](Vec2 q) {
                auto [a, b] = jet_seed(q);
                const Jet2 js[] = {exp(a * b), cos(a + 2.0 * b)};
                return jet_affine(w, js, 0.3);
            };
            auto [a, b] = jet_seed(p);
            const Jet2 j1 = exp(a * b), j2 = cos(a + 2.0 * b);
            const Jet2 r = combo(p);
            CHECK(r.grad[0] == w[0] * j1.grad[0] + w[1] * j2.grad[0]);
            CHECK(r.grad[1] == w[0] * j1.grad[1] + w[1] * j2.grad[1]);
            // and the whole jet agrees with finite differences of the composite
            CHECK(max_jet_fd_error(combo, p) < 1e-6);
        }
    }

    SECTION("length mismatch is rejected") {
        const double w[] = {1.0, 2.0};
        CHECK_THROWS_AS(jet_affine(w, std::span<const Jet2>(&j, 1), 0.0), std::invalid_argument);
    }
}

TEST_CASE("jet_activate") {
    SECTION("identity activation returns the jet unchanged") {
        auto [jx, jy] = jet_seed({0.2, 0.9});
        const Jet2 j = jx * jx + jy;
        const Jet2 r = jet_activate({Activation::Identity}, j);
        CHECK(r.value == j.value);
        CHECK(r.hxx == j.hxx);
    }

    SECTION("tanh-squared at the origin: sigma'(0)=0, sigma''(0)=2") {
        Jet2 j;
        j.value = 0.0;
        j.grad = {1.0, 0.0};
        const Jet2 r = jet_activate({Activation::TanhSquared}, j);
        CHECK(r.value == 0.0);
        CHECK(r.grad == std::array<double, 2>{0.0, 0.0});
        CHECK(r.hxx == 2.0);
        CHECK(r.hxy == 0.0);
        CHECK(r.hyy == 0.0);
    }

    SECTION("activation derivatives match finite differences of tanh^2") {
        auto sigma = [](double z) { return std::tanh(z) * std::tanh(z); };
        const double h = 1e-5, h2 = 1e-4;
        for (double z : {-2.0, -0.5, 0.0, 0.3, 1.7, 5.0}) {
            const ActivationDerivs d = activation_derivs(Activation::TanhSquared, z);
            CHECK(d.s0 == sigma(z));
            CHECK(rel_err(d.s1, (sigma(z + h) - sigma(z - h)) / (2 * h)) < 1e-6);
            CHECK(rel_err(d.s2, (sigma(z + h2) - 2 * sigma(z) + sigma(z - h2)) / (h2 * h2)) <
                  1e-6);
            // third derivative against differences of the analytic second
            auto d2 = [](double v) { return activation_derivs(Activation::TanhSquared, v).s2; };
            CHECK(rel_err(d.s3, (d2(z + h) - d2(z - h)) / (2 * h)) < 1e-6);
        }
    }

    SECTION("no overflow for large pre-activations") {
        const ActivationDerivs d = activation_derivs(Activation::TanhSquared, 400.0);
        CHECK(d.s0 == 1.0);
        CHECK(std::isfinite(d.s1));
        CHECK(std::isfinite(d.s3));
    }
}

TEST_CASE("jet arithmetic matches finite differences of composites") {
    Rng rng(11);
    auto composite1 = [](Vec2 q) {
        auto [a, b] = jet_seed(q);
        return exp(a * a + b * b) / (2.0 * std::numbers::e);
    };
    auto composite2 = [](Vec2 q) {
        auto [a, b] = jet_seed(q);
        return sin(a * a + 8.0 * (b * b * b)) * cos(5.0 * b) * sin(5.0 * a + 7.0 * b) + 3.0;
    };
    auto composite3 = [](Vec2 q) {
        auto [a, b] = jet_seed(q);
        return sqrt(a * a + b * b + 0.5) - tanh(a - b);
    };
    auto composite4 = [](Vec2 q) {
        auto [a, b] = jet_seed(q);
        const Jet2 angle = atan2(b, a + 3.0);
        return cos(10.0 * angle) * 0.1 + angle;
    };
    for (int rep = 0; rep < 25; ++rep) {
        const Vec2 p{rng.uniform(-0.9, 0.9), rng.uniform(-0.9, 0.9)};
        CHECK(max_jet_fd_error(composite1, p) < 1e-6);
        CHECK(max_jet_fd_error(composite2, p) < 1e-6);
        CHECK(max_jet_fd_error(composite3, p) < 1e-6);
        CHECK(max_jet_fd_error(composite4, p) < 1e-6);
    }
}

TEST_CASE("division and subtraction identities") {
    auto [a, b] = jet_seed({0.3, 0.8});
    const Jet2 j = a * b + sin(a);
    const Jet2 r = (j * 4.0) / 4.0 - j;
    CHECK(r.value == 0.0);
    CHECK(r.grad == std::array<double, 2>{0.0, 0.0});
    CHECK(r.hxx == 0.0);
}
