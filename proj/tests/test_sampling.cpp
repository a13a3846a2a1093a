#include <catch2/catch_amalgamated.hpp>
#include <numbers>
#include <set>

#include "manet/rng.hpp"
#include "manet/sampling.hpp"

using namespace manet;

namespace {

double brute_force_min_distance(const std::vector<Vec2>& pts) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < pts.size(); ++i)
        for (std::size_t j = i + 1; j < pts.size(); ++j) best = std::min(best, norm(pts[i] - pts[j]));
    return best;
}

double dist_to_disk_boundary(Vec2 p) { return std::abs(norm(p) - 1.0); }

double dist_to_square_boundary(Vec2 p, double h) {
    return std::abs(std::max(std::abs(p.x), std::abs(p.y)) - h);
}

/// Star-discrepancy estimate over anchored boxes with corners on a lattice;
/// the same estimator is applied to both point sets under comparison.
double star_discrepancy_estimate(const std::vector<Vec2>& pts, int lattice) {
    double worst = 0.0;
    const double n = static_cast<double>(pts.size());
    for (int a = 1; a <= lattice; ++a) {
        for (int b = 1; b <= lattice; ++b) {
            const double u = static_cast<double>(a) / lattice;
            const double v = static_cast<double>(b) / lattice;
            std::size_t count = 0;
            for (const Vec2& p : pts)
                if (p.x < u && p.y < v) ++count;
            worst = std::max(worst, std::abs(count / n - u * v));
        }
    }
    return worst;
}

}  // namespace

TEST_CASE("poisson disk sampling") {
    const Domain disk = Domain::disk({0, 0}, 1.0);

    SECTION("unit disk, 2500 points: exact count and min-distance property") {
        const PoissonSample ps = poisson_disk(disk, 2500, 0);
        REQUIRE(ps.points.size() == 2500);
        for (const Vec2& p : ps.points) CHECK(norm(p) < 1.0);
        CHECK(brute_force_min_distance(ps.points) >= ps.radius);
    }

    SECTION("single point") {
        const PoissonSample ps = poisson_disk(disk, 1, 3);
        REQUIRE(ps.points.size() == 1);
        CHECK(disk.contains(ps.points[0]));
    }

    SECTION("unit square, 100 points") {
        const Domain sq = Domain::square({0, 0}, 0.5);
        const PoissonSample ps = poisson_disk(sq, 100, 1);
        REQUIRE(ps.points.size() == 100);
        for (const Vec2& p : ps.points) CHECK(sq.contains(p));
        CHECK(brute_force_min_distance(ps.points) >= ps.radius);
    }

    SECTION("deterministic per seed") {
        const PoissonSample a = poisson_disk(disk, 200, 7);
        const PoissonSample b = poisson_disk(disk, 200, 7);
        const PoissonSample c = poisson_disk(disk, 200, 8);
        REQUIRE(a.points.size() == b.points.size());
        bool same = true;
        for (std::size_t i = 0; i < a.points.size(); ++i)
            same = same && a.points[i].x == b.points[i].x && a.points[i].y == b.points[i].y;
        CHECK(same);
        bool differs = false;
        for (std::size_t i = 0; i < c.points.size(); ++i)
            differs = differs || c.points[i].x != a.points[i].x;
        CHECK(differs);
    }

    SECTION("invalid count") { CHECK_THROWS_AS(poisson_disk(disk, 0, 0), std::invalid_argument); }
}

TEST_CASE("boundary points") {
    SECTION("disk, m=4: the four axis points") {
        const auto pts = boundary_points(Domain::disk({0, 0}, 1.0), 4);
        REQUIRE(pts.size() == 4);
        CHECK(pts[0].x == Catch::Approx(1.0).margin(1e-15));
        CHECK(pts[0].y == Catch::Approx(0.0).margin(1e-15));
        CHECK(pts[1].x == Catch::Approx(0.0).margin(1e-15));
        CHECK(pts[1].y == Catch::Approx(1.0).margin(1e-15));
        CHECK(pts[2].x == Catch::Approx(-1.0).margin(1e-15));
        CHECK(pts[3].y == Catch::Approx(-1.0).margin(1e-15));
    }

    SECTION("square half-side 1/2, m=8: corners and edge midpoints") {
        const auto pts = boundary_points(Domain::square({0, 0}, 0.5), 8);
        REQUIRE(pts.size() == 8);
        const std::vector<std::pair<double, double>> expected{
            {-0.5, -0.5}, {0.0, -0.5}, {0.5, -0.5}, {0.5, 0.0},
            {0.5, 0.5},   {0.0, 0.5},  {-0.5, 0.5}, {-0.5, 0.0}};
        for (const Vec2& p : pts) {
            bool found = false;
            for (const auto& [x, y] : expected)
                found = found || (std::abs(p.x - x) < 1e-12 && std::abs(p.y - y) < 1e-12);
            CHECK(found);
        }
    }

    SECTION("all points lie on the boundary to 1e-12") {
        for (int m : {3, 17, 500}) {
            for (const Vec2& p : boundary_points(Domain::disk({0, 0}, 1.0), m))
                CHECK(dist_to_disk_boundary(p) <= 1e-12);
            for (const Vec2& p : boundary_points(Domain::square({0, 0}, 0.5), m))
                CHECK(dist_to_square_boundary(p, 0.5) <= 1e-12);
        }
    }

    SECTION("flower boundary parameterization") {
        const Domain flower = Domain::flower();
        for (int i = 0; i < 40; ++i) {
            const double t = i / 40.0;
            const Vec2 p = flower.boundary_param(t);
            const double phi = 2.0 * std::numbers::pi * t;
            CHECK(std::abs(norm(p) - (1.0 + 0.1 * std::cos(10.0 * phi))) <= 1e-12);
            CHECK(flower.contains(0.999 * p));
        }
    }
}

TEST_CASE("evaluation grids") {
    SECTION("disk 100x100: 10000 points, max radius 1, center-free") {
        const auto pts = eval_grid(Domain::disk({0, 0}, 1.0), 100, 100);
        REQUIRE(pts.size() == 10000);
        double rmax = 0.0, rmin = 10.0;
        for (const Vec2& p : pts) {
            rmax = std::max(rmax, norm(p));
            rmin = std::min(rmin, norm(p));
        }
        CHECK(rmax == Catch::Approx(1.0).margin(1e-12));
        CHECK(rmin > 0.0);
    }

    SECTION("square 2x2 gives the corners") {
        const auto pts = eval_grid(Domain::square({0, 0}, 0.5), 2, 2);
        REQUIRE(pts.size() == 4);
        for (const Vec2& p : pts) {
            CHECK(std::abs(p.x) == Catch::Approx(0.5));
            CHECK(std::abs(p.y) == Catch::Approx(0.5));
        }
    }

    SECTION("grid points stay in the closed domain") {
        const Domain disk = Domain::disk({0, 0}, 1.0);
        for (const Vec2& p : eval_grid(disk, 13, 29)) CHECK(norm(p) <= 1.0 + 1e-12);
        const Domain sq = Domain::square({0, 0}, 0.5);
        for (const Vec2& p : eval_grid(sq, 5, 7)) CHECK(sq.contains(p));
    }
}

TEST_CASE("halton sampling") {
    SECTION("first unskipped point is (1/2, 1/3) scaled to the box") {
        const Domain unit_sq = Domain::square({0.5, 0.5}, 0.5);
        const auto pts = halton_points(unit_sq, 1, 0);
        REQUIRE(pts.size() == 1);
        CHECK(pts[0].x == Catch::Approx(0.5));
        CHECK(pts[0].y == Catch::Approx(1.0 / 3.0));
    }

    SECTION("disk points all inside, deterministic") {
        const Domain disk = Domain::disk({0, 0}, 1.0);
        const auto a = halton_points(disk, 1000);
        const auto b = halton_points(disk, 1000);
        REQUIRE(a.size() == 1000);
        for (const Vec2& p : a) CHECK(disk.contains(p));
        CHECK(a[999].x == b[999].x);
    }

    SECTION("lower star discrepancy than pseudorandom points") {
        const Domain unit_sq = Domain::square({0.5, 0.5}, 0.5);
        const auto halton = halton_points(unit_sq, 4096, 0);
        Rng rng(12345);
        std::vector<Vec2> random;
        random.reserve(4096);
        for (int i = 0; i < 4096; ++i) random.push_back({rng.uniform(), rng.uniform()});
        const double dh = star_discrepancy_estimate(halton, 64);
        const double dr = star_discrepancy_estimate(random, 64);
        INFO("halton " << dh << " vs random " << dr);
        CHECK(dh < dr);
    }
}

TEST_CASE("domain geometry") {
    SECTION("areas") {
        CHECK(Domain::disk({0, 0}, 1.0).area() == Catch::Approx(std::numbers::pi));
        CHECK(Domain::square({0, 0}, 0.5).area() == Catch::Approx(1.0));
        CHECK(Domain::flower().area() == Catch::Approx(std::numbers::pi * 1.005));
    }

    SECTION("flower area formula agrees with quadrature of 1") {
        const Domain flower = Domain::flower();
        const double numeric = flower.integrate([](Vec2) { return 1.0; }, 400, 400);
        CHECK(numeric == Catch::Approx(flower.area()).epsilon(1e-6));
    }

    SECTION("boundary midpoint toward the center is inside") {
        for (const Domain& d :
             {Domain::disk({0, 0}, 1.0), Domain::square({0, 0}, 0.5), Domain::flower()}) {
            for (int i = 0; i < 16; ++i) {
                const Vec2 b = d.boundary_param(i / 16.0);
                const Vec2 inward = d.center() + 0.9 * (b - d.center());
                CHECK(d.contains(inward));
            }
        }
    }
}

TEST_CASE("sample plan") {
    const Domain disk = Domain::disk({0, 0}, 1.0);
    const SamplePlan plan = make_sample_plan(disk, 300, 50, 5);
    CHECK(plan.interior.size() == 300);
    CHECK(plan.boundary.size() == 50);
    CHECK(plan.poisson_radius > 0.0);
    for (const Vec2& p : plan.interior) CHECK(norm(p) < 1.0);
    CHECK(brute_force_min_distance(plan.interior) >= plan.poisson_radius);
}
