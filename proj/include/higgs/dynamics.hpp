#pragma once

#include "higgs/errors.hpp"
#include "higgs/geometry.hpp"
#include "higgs/potentials.hpp"

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <vector>

namespace higgs {

struct IntegratorConfig {
    double dt = 1e-3;
    std::size_t n_steps = 1000;
    double newton_tol = 1e-12;
    int newton_max_iter = 50;
    std::size_t record_every = 1;

    /// Throws std::invalid_argument on non-positive step/tolerances.
    void validate() const;
};

template <class Point>
struct Trajectory {
    std::vector<double> times;
    std::vector<Point> samples;
    std::vector<double> energy;
    std::vector<double> surface_res;
    std::vector<double> tangency_res;

    std::size_t size() const { return samples.size(); }
};

using CurvedTrajectory = Trajectory<PhasePoint>;
using FlatTrajectory = Trajectory<FlatPoint>;

/// Anything that supplies a potential and its ambient gradient.
template <class F>
concept PotentialField = requires(const F& f, const Vec& q) {
    { f.potential(q) } -> std::convertible_to<double>;
    { f.gradient(q) } -> std::convertible_to<Vec>;
};

/// One RATTLE step on epsilon x.x + x0^2 = r0^2 for an arbitrary potential field.
/// The position multiplier solves a scalar quadratic by Newton iteration; the
/// velocity multiplier is the eta-orthogonal projection onto the new tangent space.
template <PotentialField Field>
PhasePoint rattle_step(const SpaceSpec& space, const Field& field, const PhasePoint& ph, const IntegratorConfig& cfg)
{
    const int d = space.d;
    const double dt = cfg.dt;
    const double target = space.epsilon * space.r0 * space.r0;
    const Vec& X = ph.q.coords;
    // rounding in <Z,Z>_eta grows with the euclidean size of X on the pseudosphere
    const double tol = cfg.newton_tol * std::max(space.r0 * space.r0, X.squaredNorm());

    auto accel = [&](const Vec& q) {
        Vec a = -field.gradient(q);
        a[d] *= space.epsilon;
        return a;
    };

    const Vec drift = ph.p + (0.5 * dt) * accel(X);
    const Vec Y = X + dt * drift;
    double c = 0.0;
    double residual = 0.0;
    bool converged = false;
    for (int it = 0; it < cfg.newton_max_iter; ++it) {
        const Vec Z = Y + c * X;
        residual = metric_dot(space, Z, Z) - target;
        if (std::abs(residual) <= tol) {
            converged = true;
            break;
        }
        const double slope = 2.0 * metric_dot(space, X, Z);
        if (!std::isfinite(slope) || slope == 0.0)
            break;
        c -= residual / slope;
    }
    if (!converged)
        throw NewtonDivergence("RATTLE multiplier solve did not converge (residual " + std::to_string(residual) +
                               ")");

    PhasePoint out;
    out.q.coords = Y + c * X;
    if (space.epsilon == -1 && out.q.x0() <= 0.0)
        throw NewtonDivergence("RATTLE step left the upper sheet");
    const Vec half = drift + (c / dt) * X; // (X' - X) / dt without the cancellation
    const Vec w = half + (0.5 * dt) * accel(out.q.coords);
    out.p = w - (metric_dot(space, out.q.coords, w) / target) * out.q.coords;
    return out;
}

template <PotentialField Field>
CurvedTrajectory simulate_field(const SpaceSpec& space, const Field& field, const PhasePoint& ph0,
                                const IntegratorConfig& cfg)
{
    cfg.validate();
    CurvedTrajectory traj;
    auto record = [&](std::size_t k, const PhasePoint& ph) {
        traj.times.push_back(static_cast<double>(k) * cfg.dt);
        traj.samples.push_back(ph);
        traj.energy.push_back(0.5 * metric_dot(space, ph.p, ph.p) + field.potential(ph.q.coords));
        traj.surface_res.push_back(surface_residual(space, ph.q));
        traj.tangency_res.push_back(tangency_residual(space, ph));
    };
    PhasePoint ph = ph0;
    try {
        record(0, ph);
        for (std::size_t k = 1; k <= cfg.n_steps; ++k) {
            try {
                ph = rattle_step(space, field, ph, cfg);
            } catch (NumericalError& e) {
                e.set_index(k);
                throw;
            }
            if (k % cfg.record_every == 0)
                record(k, ph);
        }
    } catch (NumericalError& e) {
        if (!e.index())
            e.set_index(0);
        throw;
    }
    return traj;
}

PhasePoint step_constrained(const SystemSpec& system, const PhasePoint& ph, const IntegratorConfig& cfg);

/// Stormer-Verlet (kick-drift-kick). With a monopole charge s the magnetic
/// force v x (s x / r^3) is split symmetrically around the drift.
FlatPoint step_flat(const SystemSpec& system, const FlatPoint& fp, const IntegratorConfig& cfg);

CurvedTrajectory simulate(const SystemSpec& system, const PhasePoint& ph0, const IntegratorConfig& cfg);
FlatTrajectory simulate(const SystemSpec& system, const FlatPoint& fp0, const IntegratorConfig& cfg);

/// Magnetic field of the monopole used by step_flat: s x / r^3.
Vec monopole_field(const Vec& x, double s);

struct ReturnOptions {
    double t_min = 0.0;
    double threshold = 1e-4;
    double length_scale = 1.0;   // positions divided by this (r0 on curved spaces)
    double momentum_scale = 0.0; // <= 0 means |p(0)|
};

struct PeriodReturn {
    double time = 0.0;
    double distance = 0.0;
};

struct DistanceMinimum {
    double time = 0.0;
    double distance = 0.0;
};

/// Local minima of the scaled phase-space distance to ref, each refined by
/// polynomial interpolation of the sampled trajectory.
std::vector<DistanceMinimum> distance_minima(const CurvedTrajectory& traj, const PhasePoint& ref,
                                             const ReturnOptions& opt);
std::vector<DistanceMinimum> distance_minima(const FlatTrajectory& traj, const FlatPoint& ref,
                                             const ReturnOptions& opt);

/// Earliest refined local minimum after t_min with distance below threshold; throws NotFound.
PeriodReturn find_period_return(const CurvedTrajectory& traj, const PhasePoint& ref, const ReturnOptions& opt);
PeriodReturn find_period_return(const FlatTrajectory& traj, const FlatPoint& ref, const ReturnOptions& opt);

} // namespace higgs
