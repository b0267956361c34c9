#pragma once

#include <Eigen/Dense>

#include <cstdint>

namespace higgs {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Default relative tolerance on the surface and tangency constraints.
inline constexpr double kDefaultConstraintTol = 1e-10;

/// Sphere (epsilon=+1) or upper sheet of the two-sheet hyperboloid (epsilon=-1)
///     epsilon x.x + x0^2 = r0^2
/// embedded in R^{d+1} with ambient metric eta = diag(1,...,1,epsilon).
struct SpaceSpec {
    int epsilon = 1;
    int d = 2;
    double r0 = 1.0;

    /// Throws std::invalid_argument unless epsilon = +-1, d >= 2, r0 > 0.
    static SpaceSpec make(int epsilon, int d, double r0);

    int ambient_dim() const { return d + 1; }
};

/// Ambient coordinates (x_1..x_d, x_0); the 0-component is stored last.
struct AmbientPoint {
    Vec coords;

    int dim() const { return static_cast<int>(coords.size()) - 1; }
    auto x() const { return coords.head(dim()); }
    double x0() const { return coords[dim()]; }
};

/// Ambient position with its velocity-type momentum (p_1..p_d, p_0).
/// Tangency reads <X,P>_eta = x.p + epsilon x0 p0 = 0.
struct PhasePoint {
    AmbientPoint q;
    Vec p;

    auto px() const { return p.head(q.dim()); }
    double p0() const { return p[q.dim()]; }
};

/// Flat-space state: position and velocity-type (kinetic) momentum.
struct FlatPoint {
    Vec x;
    Vec p;
};

/// a.b over the spatial block plus epsilon a0 b0.
double metric_dot(const SpaceSpec& space, const Vec& a, const Vec& b);

/// |epsilon x.x + x0^2 - r0^2| / r0^2.
double surface_residual(const SpaceSpec& space, const AmbientPoint& q);

/// |<X,P>_eta| / max(1, |P| r0).
double tangency_residual(const SpaceSpec& space, const PhasePoint& ph);

/// Attach x0 = sqrt(r0^2 - epsilon x.x) > 0. Throws ChartViolation on the
/// sphere when x.x >= r0^2.
AmbientPoint lift_to_surface(const SpaceSpec& space, const Vec& x);

/// Remove the eta-normal component of v at q.
Vec tangent_project(const SpaceSpec& space, const AmbientPoint& q, const Vec& v);

/// Deterministic random phase point: x uniform in the ball |x| <= cap r0,
/// momentum gaussian with the given scale and projected onto the tangent space.
PhasePoint random_phase_point(const SpaceSpec& space, std::uint64_t seed, double momentum_scale,
                              double cap = 0.5);

/// Projects an approximately valid phase point back onto both constraints
/// by re-lifting x and tangent-projecting p.
PhasePoint make_phase_point(const SpaceSpec& space, const Vec& x, const Vec& p_ambient);

} // namespace higgs
