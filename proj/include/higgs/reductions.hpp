#pragma once

#include "higgs/dynamics.hpp"
#include "higgs/geometry.hpp"
#include "higgs/potentials.hpp"

#include <string_view>
#include <vector>

namespace higgs {

enum class ReductionKind { LeviCivita, KS };

std::string_view to_string(ReductionKind kind);
ReductionKind reduction_kind_from_string(std::string_view name);

struct ReductionSpec {
    ReductionKind kind = ReductionKind::KS;
    double energy = 0.0;  // oscillator energy level E
    double s = 0.0;       // monopole charge expected on the Kepler side (KS only)
    double fiber_tol = 1e-10;

    int oscillator_dim() const { return kind == ReductionKind::KS ? 4 : 2; }
    int kepler_dim() const { return kind == ReductionKind::KS ? 3 : 2; }
};

/// Normalization of the map, |x| = u.u, with the oscillator equation divided
/// by conformal * u.u. The remaining ratios follow from that choice.
struct ReductionConstants {
    double conformal = 4.0;           // (H_osc - E) / (conformal |u|^2)
    double gamma_per_energy = 0.25;   // Kepler coupling = E / conformal
    double energy_per_omega2 = -0.125; // Kepler energy = -w2 / (2 conformal)
    double cos_per_dw2 = 0.125;       // coefficient of x_axis/|x| per oscillator dw2
    double linear_per_eps = -0.5;     // linear-field strength per oscillator eps_el
    double monopole_per_fiber = -0.5; // s = -fiber momentum / 2: x cross v - s x/|x| conserved
};

/// x1 = 2(u1 u3 + u2 u4), x2 = 2(u2 u3 - u1 u4), x3 = u1^2 + u2^2 - u3^2 - u4^2.
Vec ks_map(const Vec& u);
/// d x / d u (3 x 4).
Mat ks_jacobian(const Vec& u);
/// u1 p2 - u2 p1 + u3 p4 - u4 p3: momentum conjugate to the U(1) fiber phase.
double ks_fiber_momentum(const Vec& u, const Vec& pu);
/// Simultaneous rotation by phi in the (u1,u2) and (u3,u4) planes; leaves ks_map invariant.
Vec ks_fiber_rotate(const Vec& u, double phi);

/// Complex squaring: x1 = u1^2 - u2^2, x2 = 2 u1 u2.
Vec lc_map(const Vec& u);
Mat lc_jacobian(const Vec& u);

/// Kepler-side system obtained from an oscillator system at energy E.
struct KeplerSide {
    SystemSpec system;
    double gamma = 0.0;
    double energy = 0.0; // fixed Kepler energy
    int axis = 0;        // distinguished axis of the images of the deformations
    ReductionConstants constants;
};

/// Accepts FlatOscillator, FlatAnisotropic and FlatQuartic terms; anything else
/// throws UnsupportedTerm. FlatAnisotropic maps onto FlatCos and FlatQuartic
/// onto FlatLinear along the distinguished axis.
KeplerSide pushforward_potential(const ReductionSpec& spec, const std::vector<PotentialTerm>& oscillator_terms);

struct MappedTrajectory {
    std::vector<double> fictitious_time;
    std::vector<double> physical_time; // trapezoidal integral of conformal |u|^2 ds
    std::vector<FlatPoint> samples;    // Kepler-side position and velocity
    std::vector<double> fiber;         // fiber momentum per sample
    KeplerSide kepler;
    double max_norm_identity_error = 0.0; // max | |x| - u.u |
};

/// Maps an oscillator trajectory (integrated in fictitious time) sample by sample.
/// p_x = (dx/du) p_u / (conformal |u|^2) is the Kepler velocity dx/dt.
/// Throws FiberViolation when spec.s == 0 and a KS sample has non-zero fiber momentum.
MappedTrajectory pushforward_trajectory(const FlatTrajectory& oscillator, const ReductionSpec& spec,
                                        const SystemSpec& oscillator_system);

/// Maps a single oscillator state.
FlatPoint pushforward_point(const ReductionSpec& spec, const FlatPoint& osc);

} // namespace higgs
