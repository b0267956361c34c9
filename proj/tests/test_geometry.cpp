#include "support.hpp"

#include "higgs/errors.hpp"
#include "higgs/geometry.hpp"

#include <random>

using namespace higgs;
using test::vec;

TEST_CASE("metric_dot signature")
{
    const auto s = SpaceSpec::make(1, 2, 1.0);
    const auto h = SpaceSpec::make(-1, 2, 1.0);
    CHECK(metric_dot(s, vec({0, 0, 1}), vec({0, 0, 1})) == 1.0);
    CHECK(metric_dot(h, vec({0, 0, 1}), vec({0, 0, 1})) == -1.0);
    const Vec a = vec({3, 0, 4});
    CHECK(metric_dot(h, a, a) == -7.0);
}

TEST_CASE("metric_dot is bilinear and symmetric")
{
    std::mt19937_64 rng(3);
    std::normal_distribution<double> n(0.0, 1.0);
    for (int eps : {1, -1}) {
        const auto s = SpaceSpec::make(eps, 3, 1.0);
        for (int k = 0; k < 50; ++k) {
            Vec a(4), b(4), c(4);
            for (int i = 0; i < 4; ++i) {
                a[i] = n(rng);
                b[i] = n(rng);
                c[i] = n(rng);
            }
            const double l = n(rng);
            CHECK(metric_dot(s, a, b) == doctest::Approx(metric_dot(s, b, a)).epsilon(1e-15));
            CHECK(metric_dot(s, a + l * c, b) ==
                  doctest::Approx(metric_dot(s, a, b) + l * metric_dot(s, c, b)).epsilon(1e-12));
        }
    }
}

TEST_CASE("space spec validation")
{
    CHECK_THROWS_AS(SpaceSpec::make(0, 2, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(SpaceSpec::make(1, 1, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(SpaceSpec::make(1, 2, 0.0), std::invalid_argument);
    CHECK_NOTHROW(SpaceSpec::make(-1, 4, 2.0));
}

TEST_CASE("lift_to_surface")
{
    const auto s = SpaceSpec::make(1, 2, 1.0);
    const auto h = SpaceSpec::make(-1, 2, 1.0);
    CHECK(lift_to_surface(s, vec({0.6, 0})).x0() == doctest::Approx(0.8).epsilon(1e-15));
    CHECK(lift_to_surface(h, vec({0.75, 0})).x0() == doctest::Approx(1.25).epsilon(1e-15));
    CHECK(lift_to_surface(SpaceSpec::make(1, 3, 2.5), vec({0, 0, 0})).x0() == 2.5);
    CHECK_THROWS_AS(lift_to_surface(s, vec({0.8, 0.6})), ChartViolation);
    CHECK_THROWS_AS(lift_to_surface(s, vec({1.2, 0})), ChartViolation);

    const Vec x = vec({0.31, -0.27});
    for (const auto& sp : {s, h}) {
        const AmbientPoint q = lift_to_surface(sp, x);
        CHECK(q.x() == x);
        CHECK(q.x0() > 0.0);
        CHECK(surface_residual(sp, q) <= 1e-15);
    }
}

TEST_CASE("tangent_project")
{
    const auto s = SpaceSpec::make(1, 2, 1.0);
    const AmbientPoint pole{vec({0, 0, 1})};
    const Vec out = tangent_project(s, pole, vec({1, 0, 1}));
    CHECK(out[0] == 1.0);
    CHECK(out[1] == 0.0);
    CHECK(std::abs(out[2]) <= 1e-16);

    for (int eps : {1, -1}) {
        const auto sp = SpaceSpec::make(eps, 3, 1.7);
        const AmbientPoint q = lift_to_surface(sp, vec({0.4, -0.2, 0.5}));
        CHECK(tangent_project(sp, q, q.coords).norm() <= 1e-15);
        const Vec v = vec({0.3, 1.1, -0.7, 0.9});
        const Vec once = tangent_project(sp, q, v);
        const Vec twice = tangent_project(sp, q, once);
        CHECK(std::abs(metric_dot(sp, q.coords, once)) <= 1e-14);
        CHECK((twice - once).norm() <= 1e-14 * once.norm());
    }
}

TEST_CASE("random_phase_point is deterministic and valid")
{
    for (int eps : {1, -1}) {
        const auto sp = SpaceSpec::make(eps, 3, 1.3);
        const PhasePoint a = random_phase_point(sp, 42, 0.7);
        const PhasePoint b = random_phase_point(sp, 42, 0.7);
        CHECK(a.q.coords == b.q.coords);
        CHECK(a.p == b.p);
        for (std::uint64_t seed = 0; seed < 200; ++seed) {
            const PhasePoint ph = random_phase_point(sp, seed, 0.7);
            CHECK(surface_residual(sp, ph.q) <= 1e-12);
            CHECK(tangency_residual(sp, ph) <= 1e-12);
            CHECK(ph.q.x().norm() <= 0.5 * sp.r0 * (1.0 + 1e-12));
        }
    }
    CHECK_THROWS_AS(random_phase_point(SpaceSpec::make(1, 2, 1.0), 1, 0.0), std::invalid_argument);
}
