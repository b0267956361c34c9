#include "higgs/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace higgs {

void IntegratorConfig::validate() const
{
    if (!(dt > 0.0) || !std::isfinite(dt))
        throw std::invalid_argument("integrator dt must be positive");
    if (!(newton_tol > 0.0))
        throw std::invalid_argument("newton_tol must be positive");
    if (newton_max_iter < 1)
        throw std::invalid_argument("newton_max_iter must be at least 1");
    if (record_every < 1)
        throw std::invalid_argument("record_every must be at least 1");
}

PhasePoint step_constrained(const SystemSpec& system, const PhasePoint& ph, const IntegratorConfig& cfg)
{
    if (!system.space)
        throw std::invalid_argument("step_constrained needs a curved system");
    return rattle_step(*system.space, system, ph, cfg);
}

Vec monopole_field(const Vec& x, double s)
{
    const double r = x.norm();
    if (r <= kFlatOriginFloor)
        throw OriginSingularity("monopole field evaluated at the origin");
    return (s / (r * r * r)) * x;
}

namespace {

// Exact flow of v' = v x B at fixed x for time tau.
Vec magnetic_rotation(const Vec& v, const Vec& b, double tau)
{
    const double bn = b.norm();
    if (bn == 0.0)
        return v;
    const Eigen::Vector3d k = b / bn;
    const Eigen::Vector3d u = v;
    const double theta = -bn * tau;
    const Eigen::Vector3d out =
        u * std::cos(theta) + k.cross(u) * std::sin(theta) + k * k.dot(u) * (1.0 - std::cos(theta));
    return out;
}

} // namespace

FlatPoint step_flat(const SystemSpec& system, const FlatPoint& fp, const IntegratorConfig& cfg)
{
    if (system.space)
        throw std::invalid_argument("step_flat needs a flat system");
    const double h = 0.5 * cfg.dt;
    FlatPoint out = fp;
    out.p -= h * system.gradient(out.x);
    if (system.s != 0.0)
        out.p = magnetic_rotation(out.p, monopole_field(out.x, system.s), h);
    out.x += cfg.dt * out.p;
    if (system.s != 0.0)
        out.p = magnetic_rotation(out.p, monopole_field(out.x, system.s), h);
    out.p -= h * system.gradient(out.x);
    return out;
}

CurvedTrajectory simulate(const SystemSpec& system, const PhasePoint& ph0, const IntegratorConfig& cfg)
{
    if (!system.space)
        throw std::invalid_argument("simulate: curved initial point given to a flat system");
    return simulate_field(*system.space, system, ph0, cfg);
}

FlatTrajectory simulate(const SystemSpec& system, const FlatPoint& fp0, const IntegratorConfig& cfg)
{
    cfg.validate();
    if (system.space)
        throw std::invalid_argument("simulate: flat initial point given to a curved system");
    FlatTrajectory traj;
    auto record = [&](std::size_t k, const FlatPoint& fp) {
        traj.times.push_back(static_cast<double>(k) * cfg.dt);
        traj.samples.push_back(fp);
        traj.energy.push_back(hamiltonian(system, fp));
        traj.surface_res.push_back(0.0);
        traj.tangency_res.push_back(0.0);
    };
    FlatPoint fp = fp0;
    try {
        record(0, fp);
        for (std::size_t k = 1; k <= cfg.n_steps; ++k) {
            try {
                fp = step_flat(system, fp, cfg);
            } catch (NumericalError& e) {
                e.set_index(k);
                throw;
            }
            if (k % cfg.record_every == 0)
                record(k, fp);
        }
    } catch (NumericalError& e) {
        if (!e.index())
            e.set_index(0);
        throw;
    }
    return traj;
}

namespace {

Vec scaled_state(const Vec& q, const Vec& p, double length_scale, double momentum_scale)
{
    Vec s(q.size() + p.size());
    s << q / length_scale, p / momentum_scale;
    return s;
}

// Lagrange interpolation through states[lo..hi] at time t.
Vec interpolate(const std::vector<double>& times, const std::vector<Vec>& states, std::size_t lo, std::size_t hi,
                double t)
{
    Vec out = Vec::Zero(states[lo].size());
    for (std::size_t i = lo; i <= hi; ++i) {
        double w = 1.0;
        for (std::size_t j = lo; j <= hi; ++j)
            if (j != i)
                w *= (t - times[j]) / (times[i] - times[j]);
        out += w * states[i];
    }
    return out;
}

std::vector<DistanceMinimum> minima_impl(const std::vector<double>& times, const std::vector<Vec>& states,
                                         const Vec& ref)
{
    std::vector<DistanceMinimum> out;
    const std::size_t n = states.size();
    if (n < 3)
        return out;
    std::vector<double> dist(n);
    for (std::size_t k = 0; k < n; ++k)
        dist[k] = (states[k] - ref).norm();

    constexpr std::size_t half_window = 3;
    const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
    for (std::size_t k = 1; k + 1 < n; ++k) {
        if (!(dist[k] <= dist[k - 1] && dist[k] < dist[k + 1]))
            continue;
        const std::size_t lo = k >= half_window ? k - half_window : 0;
        const std::size_t hi = std::min(n - 1, k + half_window);
        auto f = [&](double t) { return (interpolate(times, states, lo, hi, t) - ref).norm(); };
        double a = times[k - 1];
        double b = times[k + 1];
        double c = b - phi * (b - a);
        double e = a + phi * (b - a);
        double fc = f(c);
        double fe = f(e);
        for (int it = 0; it < 80; ++it) {
            if (fc < fe) {
                b = e;
                e = c;
                fe = fc;
                c = b - phi * (b - a);
                fc = f(c);
            } else {
                a = c;
                c = e;
                fc = fe;
                e = a + phi * (b - a);
                fe = f(e);
            }
        }
        const double tm = 0.5 * (a + b);
        const double dm = std::min(f(tm), dist[k]);
        out.push_back({dm == dist[k] ? times[k] : tm, dm});
    }
    return out;
}

PeriodReturn first_return(const std::vector<DistanceMinimum>& minima, const ReturnOptions& opt)
{
    for (const auto& m : minima)
        if (m.time > opt.t_min && m.distance <= opt.threshold)
            return {m.time, m.distance};
    double best = INFINITY;
    for (const auto& m : minima)
        if (m.time > opt.t_min)
            best = std::min(best, m.distance);
    throw NotFound("no return below threshold " + std::to_string(opt.threshold) +
                   " (closest approach " + std::to_string(best) + ")");
}

double momentum_scale_or(const ReturnOptions& opt, double fallback)
{
    if (opt.momentum_scale > 0.0)
        return opt.momentum_scale;
    return fallback > 0.0 ? fallback : 1.0;
}

} // namespace

std::vector<DistanceMinimum> distance_minima(const CurvedTrajectory& traj, const PhasePoint& ref,
                                             const ReturnOptions& opt)
{
    const double ps = momentum_scale_or(opt, ref.p.norm());
    std::vector<Vec> states;
    states.reserve(traj.size());
    for (const auto& s : traj.samples)
        states.push_back(scaled_state(s.q.coords, s.p, opt.length_scale, ps));
    return minima_impl(traj.times, states, scaled_state(ref.q.coords, ref.p, opt.length_scale, ps));
}

std::vector<DistanceMinimum> distance_minima(const FlatTrajectory& traj, const FlatPoint& ref,
                                             const ReturnOptions& opt)
{
    const double ps = momentum_scale_or(opt, ref.p.norm());
    std::vector<Vec> states;
    states.reserve(traj.size());
    for (const auto& s : traj.samples)
        states.push_back(scaled_state(s.x, s.p, opt.length_scale, ps));
    return minima_impl(traj.times, states, scaled_state(ref.x, ref.p, opt.length_scale, ps));
}

PeriodReturn find_period_return(const CurvedTrajectory& traj, const PhasePoint& ref, const ReturnOptions& opt)
{
    return first_return(distance_minima(traj, ref, opt), opt);
}

PeriodReturn find_period_return(const FlatTrajectory& traj, const FlatPoint& ref, const ReturnOptions& opt)
{
    return first_return(distance_minima(traj, ref, opt), opt);
}

} // namespace higgs
