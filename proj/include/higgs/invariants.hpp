#pragma once

#include "higgs/dynamics.hpp"
#include "higgs/geometry.hpp"
#include "higgs/potentials.hpp"

#include <optional>
#include <string_view>
#include <vector>

namespace higgs {

enum class GeneratorKind {
    Energy,
    Jalpha,
    Lalphabeta,
    HiggsTensor,
    AnisotropicInvariant,
    NonlinearInvariant,
    RungeLenz,
    KeplerDeformedInvariant,
    FlatRungeLenz,
    FlatAnisotropicInvariant,
    FlatParabolicInvariant,
};

std::string_view to_string(GeneratorKind kind);
GeneratorKind generator_kind_from_string(std::string_view name);

/// Positional companion of the anisotropic invariant: (dw2/2) x.x is the
/// conserved form, (dw2/2) x.T.x the alternative kept for comparison.
enum class AnisotropicForm { RadialSquare, TQuadratic };

/// Coefficients (a, b) of the parabolic correction
///     A_axis + (a eps_el + b dw2 / |x|) (x.x - x_axis^2).
struct ParabolicCoefficients {
    double a = 2.0;
    double b = 1.0;

    static constexpr ParabolicCoefficients nominal() { return {2.0, 1.0}; }
};

struct GeneratorSpec {
    GeneratorKind kind = GeneratorKind::Energy;
    int alpha = 0;
    int beta = 1;
    Couplings c;
    std::optional<TMatrix> t;
    int axis = -1;
    AnisotropicForm aniso_form = AnisotropicForm::RadialSquare;
    double nonlinear_coefficient = 1.0;
    ParabolicCoefficients parabolic = ParabolicCoefficients::nominal();
};

struct DriftReport {
    GeneratorSpec generator;
    double initial = 0.0;
    double max_abs = 0.0;
    double max_rel = 0.0;
    double denominator = 0.0;
};

/// x0 p_a - x_a p0: generator of the (a,0)-plane isometry of eta.
double j_alpha(const SpaceSpec& space, const PhasePoint& ph, int alpha);
/// x_a p_b - x_b p_a; throws std::invalid_argument for a == b.
double l_alphabeta(const PhasePoint& ph, int alpha, int beta);
double l_alphabeta(const FlatPoint& fp, int alpha, int beta);

/// J_a J_b / (2 r0^2) + w2 r0^2 x_a x_b / (2 x0^2).
double higgs_tensor(const SpaceSpec& space, const PhasePoint& ph, const Couplings& c, int alpha, int beta);
/// sum_ab T_ab A_ab.
double higgs_tensor_trace(const SpaceSpec& space, const PhasePoint& ph, const Couplings& c, const TMatrix& t);

double anisotropic_invariant(const SpaceSpec& space, const PhasePoint& ph, const Couplings& c, const TMatrix& t,
                             AnisotropicForm form = AnisotropicForm::RadialSquare, bool check_t = true);

/// A_T + k eps_el ( r0^2 (x.x)^2 / x0^2 + r0^4 (x.T.x)^2 / x0^4 ); k = 1 is conserved.
double nonlinear_invariant(const SpaceSpec& space, const PhasePoint& ph, const Couplings& c, const TMatrix& t,
                           double coefficient = 1.0, bool check_t = true);

/// (1/r0) sum_b J_b L_ab - gamma x_a / |x|; tends to p x L - gamma x/|x| as r0 grows.
double runge_lenz(const SpaceSpec& space, const PhasePoint& ph, const Couplings& c, int alpha);

double kepler_deformed_invariant(const SpaceSpec& space, const PhasePoint& ph, const Couplings& c,
                                 ParabolicCoefficients k = ParabolicCoefficients::nominal(), int axis = -1);

double flat_runge_lenz(const FlatPoint& fp, const Couplings& c, int alpha);
/// 1/2 p.T.p + 1/2 w2 x.T.x + 1/2 dw2 x.x (difference of the per-block energies).
double flat_anisotropic_invariant(const FlatPoint& fp, const Couplings& c, const TMatrix* t = nullptr);
double flat_parabolic_invariant(const FlatPoint& fp, const Couplings& c,
                                ParabolicCoefficients k = ParabolicCoefficients::nominal(), int axis = -1);

double evaluate(const GeneratorSpec& g, const SystemSpec& system, const PhasePoint& ph);
double evaluate(const GeneratorSpec& g, const SystemSpec& system, const FlatPoint& fp);

/// Generator values at every sample; evaluation errors carry the sample index.
std::vector<double> generator_series(const CurvedTrajectory& traj, const GeneratorSpec& g, const SystemSpec& system);
std::vector<double> generator_series(const FlatTrajectory& traj, const GeneratorSpec& g, const SystemSpec& system);

/// max |g(t) - g(0)|, relative to max(|g(0)|, 1e-6 * energy scale).
DriftReport drift_from_series(const std::vector<double>& values, const GeneratorSpec& g, double energy_scale);
DriftReport drift(const CurvedTrajectory& traj, const GeneratorSpec& g, const SystemSpec& system);
DriftReport drift(const FlatTrajectory& traj, const GeneratorSpec& g, const SystemSpec& system);

/// Runge-Lenz axis component and the two parabolic correction profiles at every sample.
struct ParabolicSeries {
    std::vector<double> runge_lenz;
    std::vector<double> transverse;       // x.x - x_axis^2
    std::vector<double> transverse_over_r; // (x.x - x_axis^2) / |x|
};

ParabolicSeries parabolic_series(const SpaceSpec& space, const CurvedTrajectory& traj, const Couplings& c,
                                 int axis = -1);
ParabolicSeries parabolic_series(const FlatTrajectory& traj, const Couplings& c, int axis = -1);
ParabolicSeries parabolic_series(const std::vector<FlatPoint>& samples, const Couplings& c, int axis = -1);

/// Values of A_axis + (a eps_el + b dw2/|x|)(x.x - x_axis^2) along the series.
std::vector<double> parabolic_values(const ParabolicSeries& s, const Couplings& c, ParabolicCoefficients k);

/// Least-squares (a, b) minimizing the deviation of the parabolic invariant from its
/// initial value. A coefficient whose coupling vanishes keeps its nominal value.
ParabolicCoefficients fit_parabolic_coefficients(const ParabolicSeries& s, const Couplings& c);

} // namespace higgs
