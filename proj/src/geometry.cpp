#include "higgs/geometry.hpp"

#include "higgs/errors.hpp"

#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

namespace higgs {

SpaceSpec SpaceSpec::make(int epsilon, int d, double r0)
{
    if (epsilon != 1 && epsilon != -1)
        throw std::invalid_argument("epsilon must be +1 or -1, got " + std::to_string(epsilon));
    if (d < 2)
        throw std::invalid_argument("dimension must be >= 2, got " + std::to_string(d));
    if (!(r0 > 0.0) || !std::isfinite(r0))
        throw std::invalid_argument("radius must be positive and finite");
    return SpaceSpec{epsilon, d, r0};
}

double metric_dot(const SpaceSpec& space, const Vec& a, const Vec& b)
{
    const int d = space.d;
    return a.head(d).dot(b.head(d)) + space.epsilon * a[d] * b[d];
}

double surface_residual(const SpaceSpec& space, const AmbientPoint& q)
{
    const double r2 = space.r0 * space.r0;
    return std::abs(space.epsilon * q.x().squaredNorm() + q.x0() * q.x0() - r2) / r2;
}

double tangency_residual(const SpaceSpec& space, const PhasePoint& ph)
{
    const double scale = std::max(1.0, ph.p.norm() * space.r0);
    return std::abs(metric_dot(space, ph.q.coords, ph.p)) / scale;
}

AmbientPoint lift_to_surface(const SpaceSpec& space, const Vec& x)
{
    if (x.size() != space.d)
        throw std::invalid_argument("lift_to_surface: dimension mismatch");
    const double arg = space.r0 * space.r0 - space.epsilon * x.squaredNorm();
    if (!(arg > 0.0))
        throw ChartViolation("point outside the north chart: x.x >= r0^2");
    AmbientPoint q{Vec(space.d + 1)};
    q.coords.head(space.d) = x;
    q.coords[space.d] = std::sqrt(arg);
    return q;
}

Vec tangent_project(const SpaceSpec& space, const AmbientPoint& q, const Vec& v)
{
    const double xx = metric_dot(space, q.coords, q.coords);
    return v - (metric_dot(space, q.coords, v) / xx) * q.coords;
}

PhasePoint make_phase_point(const SpaceSpec& space, const Vec& x, const Vec& p_ambient)
{
    PhasePoint ph{lift_to_surface(space, x), Vec()};
    ph.p = tangent_project(space, ph.q, p_ambient);
    return ph;
}

PhasePoint random_phase_point(const SpaceSpec& space, std::uint64_t seed, double momentum_scale, double cap)
{
    if (!(momentum_scale > 0.0))
        throw std::invalid_argument("momentum_scale must be positive");
    if (!(cap > 0.0) || (space.epsilon == 1 && cap >= 1.0))
        throw std::invalid_argument("chart cap must lie in (0, 1) on the sphere");

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> uniform(0.0, 1.0);

    Vec dir(space.d);
    for (int i = 0; i < space.d; ++i)
        dir[i] = normal(rng);
    const double radius = cap * space.r0 * std::pow(uniform(rng), 1.0 / space.d);
    const Vec x = (radius / dir.norm()) * dir;

    Vec p(space.d + 1);
    for (int i = 0; i <= space.d; ++i)
        p[i] = momentum_scale * normal(rng);
    return make_phase_point(space, x, p);
}

} // namespace higgs
