#include "support.hpp"

#include "higgs/errors.hpp"
#include "higgs/invariants.hpp"
#include "higgs/reductions.hpp"

#include <cmath>
#include <random>

using namespace higgs;
using test::vec;

namespace {

IntegratorConfig config(double dt, std::size_t n, std::size_t every = 1)
{
    IntegratorConfig cfg;
    cfg.dt = dt;
    cfg.n_steps = n;
    cfg.record_every = every;
    return cfg;
}

Vec fiber_direction(const Vec& u)
{
    return vec({-u[1], u[0], -u[3], u[2]});
}

FlatPoint with_fiber(FlatPoint fp, double target)
{
    const Vec k = fiber_direction(fp.x);
    fp.p += ((target - ks_fiber_momentum(fp.x, fp.p)) / fp.x.squaredNorm()) * k;
    return fp;
}

PotentialTerm oscillator(double w2)
{
    Couplings c;
    c.omega2 = w2;
    return {TermKind::FlatOscillator, c, std::nullopt, -1};
}

ReductionSpec ks_spec(double energy, double s = 0.0)
{
    ReductionSpec r;
    r.kind = ReductionKind::KS;
    r.energy = energy;
    r.s = s;
    return r;
}

} // namespace

TEST_CASE("KS and Levi-Civita maps")
{
    const Vec x = ks_map(vec({1, 0, 0, 0}));
    CHECK(x == vec({0, 0, 1}));
    CHECK(lc_map(vec({1, 1})) == vec({0, 2}));
    CHECK_THROWS_AS(ks_map(vec({1, 0, 0})), std::invalid_argument);

    std::mt19937_64 rng(11);
    std::normal_distribution<double> n(0.0, 1.0);
    for (int k = 0; k < 1000; ++k) {
        const Vec u = vec({n(rng), n(rng), n(rng), n(rng)});
        const double uu = u.squaredNorm();
        CHECK(std::abs(ks_map(u).norm() - uu) <= 1e-13 * uu);
        const Vec w = vec({n(rng), n(rng)});
        CHECK(std::abs(lc_map(w).norm() - w.squaredNorm()) <= 1e-13 * w.squaredNorm());

        const double phi = n(rng);
        CHECK((ks_map(ks_fiber_rotate(u, phi)) - ks_map(u)).norm() <= 1e-12 * uu);
        // the fiber direction is in the kernel of the Jacobian
        CHECK((ks_jacobian(u) * fiber_direction(u)).norm() <= 1e-12 * uu);
    }
}

TEST_CASE("KS Jacobian matches finite differences")
{
    const Vec u = vec({0.3, -0.7, 1.1, 0.4});
    const Mat j = ks_jacobian(u);
    for (int i = 0; i < 4; ++i) {
        Vec e = Vec::Zero(4);
        e[i] = 1e-6;
        const Vec fd = (ks_map(u + e) - ks_map(u - e)) / 2e-6;
        CHECK((fd - j.col(i)).norm() <= 1e-9);
    }
    const Mat jl = lc_jacobian(vec({0.5, 0.2}));
    CHECK(jl(0, 0) == doctest::Approx(1.0));
    CHECK(jl(1, 0) == doctest::Approx(0.4));
}

TEST_CASE("potential pushforward")
{
    const KeplerSide plain = pushforward_potential(ks_spec(2.0), {oscillator(1.0)});
    CHECK(plain.gamma == doctest::Approx(0.5));
    CHECK(plain.energy == doctest::Approx(-0.125));
    REQUIRE(plain.system.terms.size() == 1);
    CHECK(plain.system.terms[0].kind == TermKind::FlatKepler);

    Couplings a;
    a.dOmega2 = 0.4;
    const KeplerSide aniso =
        pushforward_potential(ks_spec(2.0), {oscillator(1.0), {TermKind::FlatAnisotropic, a, std::nullopt, -1}});
    REQUIRE(aniso.system.terms.size() == 2);
    CHECK(aniso.system.terms[1].kind == TermKind::FlatCos);
    CHECK(aniso.system.terms[1].axis == 2);

    Couplings q;
    q.eps_el = 0.1;
    const KeplerSide quartic =
        pushforward_potential(ks_spec(2.0), {oscillator(1.0), {TermKind::FlatQuartic, q, std::nullopt, -1}});
    REQUIRE(quartic.system.terms.size() == 2);
    CHECK(quartic.system.terms[1].kind == TermKind::FlatLinear);

    Couplings k;
    k.gamma = 1.0;
    CHECK_THROWS_AS(pushforward_potential(ks_spec(2.0), {{TermKind::FlatKepler, k, std::nullopt, -1}}), UnsupportedTerm);
    CHECK_THROWS_AS(pushforward_potential(ks_spec(2.0), {{TermKind::FlatAnisotropic, a, TMatrix::diagonal({1, -1, -1, 1}), -1}}),
                    UnsupportedTerm);
    ReductionSpec lc;
    lc.kind = ReductionKind::LeviCivita;
    lc.s = 0.5;
    CHECK_THROWS_AS(pushforward_potential(lc, {oscillator(1.0)}), UnsupportedTerm);
}

TEST_CASE("pushed-forward deformations are pointwise images of the oscillator terms")
{
    // (H_osc - E) / (4 u.u) = H_kepler - E_kepler at every phase point
    Couplings a;
    a.dOmega2 = 0.3;
    Couplings q;
    q.eps_el = 0.07;
    const std::vector<PotentialTerm> terms{oscillator(1.0), {TermKind::FlatAnisotropic, a, std::nullopt, -1},
                                           {TermKind::FlatQuartic, q, std::nullopt, -1}};
    const SystemSpec osc = SystemSpec::flat(4, terms);
    const double energy = 1.3;
    const KeplerSide side = pushforward_potential(ks_spec(energy), terms);

    std::mt19937_64 rng(5);
    std::normal_distribution<double> n(0.0, 1.0);
    for (int k = 0; k < 200; ++k) {
        const FlatPoint fp = with_fiber({vec({n(rng), n(rng), n(rng), n(rng)}), vec({n(rng), n(rng), n(rng), n(rng)})}, 0.0);
        const FlatPoint kp = pushforward_point(ks_spec(energy), fp);
        const double lhs = (hamiltonian(osc, fp) - energy) / (4.0 * fp.x.squaredNorm());
        const double rhs = hamiltonian(side.system, kp) - side.energy;
        CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12).scale(1.0));
    }
}

TEST_CASE("circular oscillator orbit maps to a circular Kepler orbit")
{
    // u(s) = (cos s, 0, sin s, 0): circular, fiber-free, |u| constant
    const SystemSpec osc = SystemSpec::flat(4, {oscillator(1.0)});
    const FlatPoint start{vec({1, 0, 0, 0}), vec({0, 0, 1, 0})};
    REQUIRE(ks_fiber_momentum(start.x, start.p) == 0.0);
    const double energy = hamiltonian(osc, start);
    const auto traj = simulate(osc, start, config(1e-3, 3000, 10));
    const MappedTrajectory mapped = pushforward_trajectory(traj, ks_spec(energy), osc);
    const double r0 = mapped.samples.front().x.norm();
    for (const auto& s : mapped.samples)
        CHECK(std::abs(s.x.norm() - r0) <= 1e-5); // O(dt^2) oscillator ripple, squared
    CHECK(mapped.max_norm_identity_error <= 1e-13);
}

TEST_CASE("undeformed KS trajectory: fixed Kepler energy and conserved Runge-Lenz vector")
{
    const SystemSpec osc = SystemSpec::flat(4, {oscillator(1.0)});
    const FlatPoint start = with_fiber({vec({0.9, 0.2, -0.3, 0.4}), vec({0.1, 0.5, 0.6, -0.2})}, 0.0);
    const double energy = hamiltonian(osc, start);
    // the Kepler energy error is the O(dt^2) oscillator energy error over 4|x|
    const auto traj = simulate(osc, start, config(2.5e-4, 80000, 40));
    const MappedTrajectory mapped = pushforward_trajectory(traj, ks_spec(energy), osc);
    const KeplerSide& side = mapped.kepler;

    double worst = 0.0;
    for (const auto& s : mapped.samples)
        worst = std::max(worst, std::abs(hamiltonian(side.system, s) - side.energy));
    CHECK(worst <= 1e-8);

    Couplings k;
    k.gamma = side.gamma;
    for (int a = 0; a < 3; ++a) {
        const double r0 = flat_runge_lenz(mapped.samples.front(), k, a);
        double dev = 0.0;
        for (const auto& s : mapped.samples)
            dev = std::max(dev, std::abs(flat_runge_lenz(s, k, a) - r0));
        CHECK(dev <= 1e-8);
    }
}

TEST_CASE("mapped velocity is the physical-time derivative of the mapped position")
{
    const SystemSpec osc = SystemSpec::flat(4, {oscillator(1.0)});
    const FlatPoint start = with_fiber({vec({0.7, -0.4, 0.5, 0.1}), vec({0.3, 0.2, -0.4, 0.6})}, 0.0);
    const double energy = hamiltonian(osc, start);
    const auto traj = simulate(osc, start, config(1e-4, 20000, 1));
    const MappedTrajectory mapped = pushforward_trajectory(traj, ks_spec(energy), osc);
    const double gamma = mapped.kepler.gamma;
    for (std::size_t k = 1000; k + 1 < mapped.samples.size(); k += 1000) {
        const double dt = mapped.physical_time[k + 1] - mapped.physical_time[k - 1];
        const Vec vel = (mapped.samples[k + 1].x - mapped.samples[k - 1].x) / dt;
        const Vec acc = (mapped.samples[k + 1].p - mapped.samples[k - 1].p) / dt;
        const Vec& x = mapped.samples[k].x;
        const Vec kepler = -gamma * x / std::pow(x.norm(), 3);
        CHECK((vel - mapped.samples[k].p).norm() <= 1e-6 * mapped.samples[k].p.norm());
        CHECK((acc - kepler).norm() <= 1e-5 * kepler.norm());
    }
}

TEST_CASE("fiber momentum is checked against the requested monopole charge")
{
    const SystemSpec osc = SystemSpec::flat(4, {oscillator(1.0)});
    const FlatPoint twisted = with_fiber({vec({0.9, 0.2, -0.3, 0.4}), vec({0.1, 0.5, 0.6, -0.2})}, 0.3);
    const auto traj = simulate(osc, twisted, config(1e-3, 100, 10));
    CHECK_THROWS_AS(pushforward_trajectory(traj, ks_spec(1.0), osc), FiberViolation);
    CHECK_NOTHROW(pushforward_trajectory(traj, ks_spec(1.0, -0.15), osc));
    CHECK_THROWS_AS(pushforward_trajectory(traj, ks_spec(1.0, 0.15), osc), FiberViolation);
}

TEST_CASE("fiber momentum maps onto the monopole charge s = -l/2")
{
    const double ell = 0.6;
    const double s = -0.5 * ell;
    const SystemSpec osc = SystemSpec::flat(4, {oscillator(1.0)});
    const FlatPoint start = with_fiber({vec({0.9, 0.2, -0.3, 0.4}), vec({0.1, 0.5, 0.6, -0.2})}, ell);
    const double energy = hamiltonian(osc, start);
    const auto traj = simulate(osc, start, config(2.5e-4, 80000, 40));
    const MappedTrajectory mapped = pushforward_trajectory(traj, ks_spec(energy, s), osc);

    auto poincare = [](const FlatPoint& p, double charge) {
        const Eigen::Vector3d x = p.x;
        const Eigen::Vector3d v = p.p;
        return Eigen::Vector3d(x.cross(v) - charge * x.normalized());
    };
    double same = 0.0, flipped = 0.0;
    for (const auto& sample : mapped.samples) {
        same = std::max(same, (poincare(sample, s) - poincare(mapped.samples.front(), s)).norm());
        flipped = std::max(flipped, (poincare(sample, -s) - poincare(mapped.samples.front(), -s)).norm());
    }
    CHECK(same <= 1e-6);
    CHECK(flipped >= 1e-2);

    double worst = 0.0;
    for (const auto& sample : mapped.samples)
        worst = std::max(worst, std::abs(hamiltonian(mapped.kepler.system, sample) - mapped.kepler.energy));
    CHECK(worst <= 1e-8);
}

TEST_CASE("Levi-Civita reduction")
{
    const SystemSpec osc = SystemSpec::flat(2, {oscillator(1.0)});
    const FlatPoint start{vec({0.8, 0.3}), vec({-0.2, 0.7})};
    const double energy = hamiltonian(osc, start);
    ReductionSpec lc;
    lc.kind = ReductionKind::LeviCivita;
    lc.energy = energy;
    const auto traj = simulate(osc, start, config(2.5e-4, 40000, 40));
    const MappedTrajectory mapped = pushforward_trajectory(traj, lc, osc);
    double worst = 0.0;
    for (const auto& sample : mapped.samples)
        worst = std::max(worst, std::abs(hamiltonian(mapped.kepler.system, sample) - mapped.kepler.energy));
    CHECK(worst <= 1e-8);
    CHECK_THROWS_AS(pushforward_trajectory(traj, ks_spec(energy), osc), std::invalid_argument);
    CHECK_THROWS_AS(pushforward_point(lc, {vec({0, 0}), vec({1, 0})}), OriginSingularity);
}
