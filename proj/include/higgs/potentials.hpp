#pragma once

#include "higgs/geometry.hpp"

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace higgs {

/// Singularity floors. Curved floors are relative to r0.
inline constexpr double kX0FloorRel = 1e-9;
inline constexpr double kOriginFloorRel = 1e-9;
inline constexpr double kFlatOriginFloor = 1e-12;

enum class TermKind {
    CurvedHiggs,
    CurvedAnisotropic,
    CurvedNonlinear,
    CurvedKepler,
    CurvedStark,
    CurvedCos,
    CurvedKeplerDeformed,
    FlatOscillator,
    FlatAnisotropic,
    FlatQuartic,
    FlatKepler,
    FlatLinear,
    FlatCos,
    MonopoleCentrifugal,
};

std::string_view to_string(TermKind kind);
/// Throws std::invalid_argument on unknown names.
TermKind term_kind_from_string(std::string_view name);
/// True for terms that live on the quadric; MonopoleCentrifugal works in both settings.
bool is_curved(TermKind kind);
bool is_flat(TermKind kind);

struct Couplings {
    double omega2 = 0.0;  // base oscillator strength
    double dOmega2 = 0.0; // anisotropy / cos-term strength
    double eps_el = 0.0;  // linear (Stark) field strength
    double gamma = 0.0;   // Kepler coupling
    double s = 0.0;       // monopole charge
};

/// Symmetric d x d matrix with T^2 = Id and T != Id.
class TMatrix {
public:
    /// Validates the involution conditions; throws InvalidT.
    static TMatrix checked(const Mat& t);
    /// Skips validation (negative controls only).
    static TMatrix unchecked(const Mat& t);
    static TMatrix diagonal(const std::vector<double>& entries, bool validate = true);
    /// diag(1,..,1,-1,..,-1) with p entries of each sign.
    static TMatrix split(int p);

    const Mat& matrix() const { return t_; }
    int dim() const { return static_cast<int>(t_.rows()); }
    bool is_valid() const;
    double quadratic(const Vec& x) const { return x.dot(t_ * x); }

private:
    explicit TMatrix(Mat t) : t_(std::move(t)) {}
    Mat t_;
};

/// Describes why t is not an admissible T, or returns nullopt when it is.
std::optional<std::string> t_violation(const Mat& t);

struct PotentialTerm {
    TermKind kind = TermKind::CurvedHiggs;
    Couplings c;
    std::optional<TMatrix> t;
    int axis = -1; // distinguished axis for Stark/cos terms; negative means last

    int axis_index(int dim) const { return axis < 0 ? dim - 1 : axis; }
};

// Curved terms, evaluated at an on-surface ambient point.
double v_curved_higgs(const SpaceSpec& space, const AmbientPoint& q, const Couplings& c);
double v_curved_anisotropic(const SpaceSpec& space, const AmbientPoint& q, const Couplings& c, const TMatrix& t);
double v_curved_nonlinear(const SpaceSpec& space, const AmbientPoint& q, const Couplings& c, const TMatrix& t);
double v_curved_kepler(const SpaceSpec& space, const AmbientPoint& q, const Couplings& c);
double v_curved_stark(const SpaceSpec& space, const AmbientPoint& q, const Couplings& c, int axis = -1);
double v_curved_cos(const SpaceSpec& space, const AmbientPoint& q, const Couplings& c, int axis = -1);
double v_curved_kepler_deformed(const SpaceSpec& space, const AmbientPoint& q, const Couplings& c, int axis = -1);

/// Flat terms. FlatAnisotropic and FlatQuartic use the canonical split
/// diag(1,..,1,-1,..,-1) when t is null.
double v_flat_term(TermKind kind, const Vec& x, const Couplings& c, const TMatrix* t = nullptr, int axis = -1);

/// Value of a term. space is required for curved terms and must be empty for flat ones;
/// point holds ambient coordinates (curved) or x (flat).
double term_value(const PotentialTerm& term, const std::optional<SpaceSpec>& space, const Vec& point);
/// Unprojected ambient gradient (curved) or the d-gradient (flat).
Vec term_gradient(const PotentialTerm& term, const std::optional<SpaceSpec>& space, const Vec& point);

/// A Hamiltonian: kinetic part fixed by the metric plus a sum of terms.
/// s is the flat monopole charge entering through minimal coupling.
struct SystemSpec {
    std::optional<SpaceSpec> space;
    int flat_dim = 0;
    std::vector<PotentialTerm> terms;
    double s = 0.0;

    static SystemSpec curved(const SpaceSpec& space, std::vector<PotentialTerm> terms);
    static SystemSpec flat(int dim, std::vector<PotentialTerm> terms, double s = 0.0);

    bool is_curved() const { return space.has_value(); }
    int dim() const { return space ? space->d : flat_dim; }
    /// Throws ConfigError on kind/dimension/T mismatches.
    void validate(bool allow_invalid_t = false) const;

    double potential(const Vec& point) const;
    Vec gradient(const Vec& point) const;
};

double hamiltonian(const SystemSpec& system, const PhasePoint& ph);
double hamiltonian(const SystemSpec& system, const FlatPoint& fp);

/// Dirac monopole vector potential with string along -axis:
/// A = (-x2, x1, 0) / (r (r + x3)), curl A = x / r^3 (d = 3 only).
Vec dirac_vector_potential(const Vec& x);
/// 1/2 |p - s A(x)|^2 + V(x) for canonical flat momentum p.
double hamiltonian_canonical(const SystemSpec& system, const Vec& x, const Vec& p_canonical);

/// Central finite differences with step h_rel * max(1, |point|_inf) on every
/// ambient (or flat) coordinate.
Vec finite_difference_gradient(const PotentialTerm& term, const std::optional<SpaceSpec>& space, const Vec& point,
                               double h_rel = 1e-6);
/// |reference - analytic|_inf / max(|analytic|_inf, 1e-12).
double gradient_error(const Vec& analytic, const Vec& reference);
double gradient_error(const PotentialTerm& term, const std::optional<SpaceSpec>& space, const Vec& point,
                      double h_rel = 1e-6);

} // namespace higgs
