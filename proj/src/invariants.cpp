#include "higgs/invariants.hpp"

#include "higgs/errors.hpp"

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

namespace higgs {

namespace {

constexpr std::array<std::pair<GeneratorKind, std::string_view>, 11> kGeneratorNames{{
    {GeneratorKind::Energy, "Energy"},
    {GeneratorKind::Jalpha, "Jalpha"},
    {GeneratorKind::Lalphabeta, "Lalphabeta"},
    {GeneratorKind::HiggsTensor, "HiggsTensor"},
    {GeneratorKind::AnisotropicInvariant, "AnisotropicInvariant"},
    {GeneratorKind::NonlinearInvariant, "NonlinearInvariant"},
    {GeneratorKind::RungeLenz, "RungeLenz"},
    {GeneratorKind::KeplerDeformedInvariant, "KeplerDeformedInvariant"},
    {GeneratorKind::FlatRungeLenz, "FlatRungeLenz"},
    {GeneratorKind::FlatAnisotropicInvariant, "FlatAnisotropicInvariant"},
    {GeneratorKind::FlatParabolicInvariant, "FlatParabolicInvariant"},
}};

void check_index(int i, int d)
{
    if (i < 0 || i >= d)
        throw std::invalid_argument("generator index " + std::to_string(i) + " out of range");
}

void check_x0(const SpaceSpec& space, double x0)
{
    if (std::abs(x0) <= kX0FloorRel * space.r0)
        throw EquatorSingularity("|x0| below the equator floor");
}

double checked_radius(double r, double floor)
{
    if (r <= floor)
        throw OriginSingularity("|x| below the origin floor");
    return r;
}

void require_valid(const TMatrix& t, bool check)
{
    if (!check)
        return;
    if (auto why = t_violation(t.matrix()))
        throw InvalidT(*why);
}

Vec j_vector(const PhasePoint& ph)
{
    return ph.q.x0() * ph.px() - ph.p0() * ph.q.x();
}

const TMatrix& require_t(const GeneratorSpec& g)
{
    if (!g.t)
        throw std::invalid_argument(std::string(to_string(g.kind)) + " requires a T matrix");
    return *g.t;
}

} // namespace

std::string_view to_string(GeneratorKind kind)
{
    for (const auto& [k, name] : kGeneratorNames)
        if (k == kind)
            return name;
    return "Unknown";
}

GeneratorKind generator_kind_from_string(std::string_view name)
{
    for (const auto& [k, n] : kGeneratorNames)
        if (n == name)
            return k;
    throw std::invalid_argument("unknown generator kind '" + std::string(name) + "'");
}

double j_alpha(const SpaceSpec& space, const PhasePoint& ph, int alpha)
{
    check_index(alpha, space.d);
    return ph.q.x0() * ph.p[alpha] - ph.q.coords[alpha] * ph.p0();
}

double l_alphabeta(const PhasePoint& ph, int alpha, int beta)
{
    if (alpha == beta)
        throw std::invalid_argument("L_ab needs distinct indices");
    check_index(alpha, ph.q.dim());
    check_index(beta, ph.q.dim());
    const Vec& x = ph.q.coords;
    return x[alpha] * ph.p[beta] - x[beta] * ph.p[alpha];
}

double l_alphabeta(const FlatPoint& fp, int alpha, int beta)
{
    if (alpha == beta)
        throw std::invalid_argument("L_ab needs distinct indices");
    check_index(alpha, static_cast<int>(fp.x.size()));
    check_index(beta, static_cast<int>(fp.x.size()));
    return fp.x[alpha] * fp.p[beta] - fp.x[beta] * fp.p[alpha];
}

double higgs_tensor(const SpaceSpec& space, const PhasePoint& ph, const Couplings& c, int alpha, int beta)
{
    check_index(alpha, space.d);
    check_index(beta, space.d);
    const double x0 = ph.q.x0();
    check_x0(space, x0);
    const double R2 = space.r0 * space.r0;
    const Vec& x = ph.q.coords;
    return j_alpha(space, ph, alpha) * j_alpha(space, ph, beta) / (2.0 * R2) +
           c.omega2 * R2 * x[alpha] * x[beta] / (2.0 * x0 * x0);
}

double higgs_tensor_trace(const SpaceSpec& space, const PhasePoint& ph, const Couplings& c, const TMatrix& t)
{
    const double x0 = ph.q.x0();
    check_x0(space, x0);
    const double R2 = space.r0 * space.r0;
    const Vec j = j_vector(ph);
    const Mat& T = t.matrix();
    const auto x = ph.q.x();
    return j.dot(T * j) / (2.0 * R2) + c.omega2 * R2 * x.dot(T * x) / (2.0 * x0 * x0);
}

double anisotropic_invariant(const SpaceSpec& space, const PhasePoint& ph, const Couplings& c, const TMatrix& t,
                             AnisotropicForm form, bool check_t)
{
    require_valid(t, check_t);
    const auto x = ph.q.x();
    const double positional = form == AnisotropicForm::RadialSquare ? x.squaredNorm() : x.dot(t.matrix() * x);
    return higgs_tensor_trace(space, ph, c, t) + 0.5 * c.dOmega2 * positional;
}

double nonlinear_invariant(const SpaceSpec& space, const PhasePoint& ph, const Couplings& c, const TMatrix& t,
                           double coefficient, bool check_t)
{
    require_valid(t, check_t);
    const double x0 = ph.q.x0();
    check_x0(space, x0);
    const auto x = ph.q.x();
    const double R2 = space.r0 * space.r0;
    const double S = x.squaredNorm();
    const double Q = x.dot(t.matrix() * x);
    const double x02 = x0 * x0;
    return higgs_tensor_trace(space, ph, c, t) +
           coefficient * c.eps_el * (R2 * S * S / x02 + R2 * R2 * Q * Q / (x02 * x02));
}

double runge_lenz(const SpaceSpec& space, const PhasePoint& ph, const Couplings& c, int alpha)
{
    check_index(alpha, space.d);
    const auto x = ph.q.x();
    const double r = checked_radius(x.norm(), kOriginFloorRel * space.r0);
    const Vec j = j_vector(ph);
    // sum_b J_b L_ab = x_a (J.p) - p_a (J.x)
    const double sum = x[alpha] * j.dot(ph.px()) - ph.p[alpha] * j.dot(x);
    return sum / space.r0 - c.gamma * x[alpha] / r;
}

double kepler_deformed_invariant(const SpaceSpec& space, const PhasePoint& ph, const Couplings& c,
                                 ParabolicCoefficients k, int axis)
{
    const int a = axis < 0 ? space.d - 1 : axis;
    check_index(a, space.d);
    const auto x = ph.q.x();
    const double r = checked_radius(x.norm(), kOriginFloorRel * space.r0);
    const double transverse = x.squaredNorm() - x[a] * x[a];
    return runge_lenz(space, ph, c, a) + (k.a * c.eps_el + k.b * c.dOmega2 / r) * transverse;
}

double flat_runge_lenz(const FlatPoint& fp, const Couplings& c, int alpha)
{
    check_index(alpha, static_cast<int>(fp.x.size()));
    const double r = checked_radius(fp.x.norm(), kFlatOriginFloor);
    return fp.p.squaredNorm() * fp.x[alpha] - fp.x.dot(fp.p) * fp.p[alpha] - c.gamma * fp.x[alpha] / r;
}

double flat_anisotropic_invariant(const FlatPoint& fp, const Couplings& c, const TMatrix* t)
{
    const int n = static_cast<int>(fp.x.size());
    const Mat T = t ? t->matrix() : TMatrix::split(n / 2).matrix();
    if (T.rows() != n)
        throw std::invalid_argument("flat anisotropic invariant: T dimension mismatch");
    return 0.5 * fp.p.dot(T * fp.p) + 0.5 * c.omega2 * fp.x.dot(T * fp.x) + 0.5 * c.dOmega2 * fp.x.squaredNorm();
}

double flat_parabolic_invariant(const FlatPoint& fp, const Couplings& c, ParabolicCoefficients k, int axis)
{
    const int n = static_cast<int>(fp.x.size());
    const int a = axis < 0 ? n - 1 : axis;
    check_index(a, n);
    const double r = checked_radius(fp.x.norm(), kFlatOriginFloor);
    const double transverse = fp.x.squaredNorm() - fp.x[a] * fp.x[a];
    return flat_runge_lenz(fp, c, a) + (k.a * c.eps_el + k.b * c.dOmega2 / r) * transverse;
}

double evaluate(const GeneratorSpec& g, const SystemSpec& system, const PhasePoint& ph)
{
    if (!system.space)
        throw std::invalid_argument("curved phase point given to a flat system");
    const SpaceSpec& space = *system.space;
    switch (g.kind) {
    case GeneratorKind::Energy:
        return hamiltonian(system, ph);
    case GeneratorKind::Jalpha:
        return j_alpha(space, ph, g.alpha);
    case GeneratorKind::Lalphabeta:
        return l_alphabeta(ph, g.alpha, g.beta);
    case GeneratorKind::HiggsTensor:
        return higgs_tensor(space, ph, g.c, g.alpha, g.beta);
    case GeneratorKind::AnisotropicInvariant:
        return anisotropic_invariant(space, ph, g.c, require_t(g), g.aniso_form, false);
    case GeneratorKind::NonlinearInvariant:
        return nonlinear_invariant(space, ph, g.c, require_t(g), g.nonlinear_coefficient, false);
    case GeneratorKind::RungeLenz:
        return runge_lenz(space, ph, g.c, g.alpha);
    case GeneratorKind::KeplerDeformedInvariant:
        return kepler_deformed_invariant(space, ph, g.c, g.parabolic, g.axis);
    default:
        throw std::invalid_argument(std::string(to_string(g.kind)) + " is not defined on curved phase points");
    }
}

double evaluate(const GeneratorSpec& g, const SystemSpec& system, const FlatPoint& fp)
{
    if (system.space)
        throw std::invalid_argument("flat point given to a curved system");
    switch (g.kind) {
    case GeneratorKind::Energy:
        return hamiltonian(system, fp);
    case GeneratorKind::Lalphabeta:
        return l_alphabeta(fp, g.alpha, g.beta);
    case GeneratorKind::FlatRungeLenz:
        return flat_runge_lenz(fp, g.c, g.alpha);
    case GeneratorKind::FlatAnisotropicInvariant:
        return flat_anisotropic_invariant(fp, g.c, g.t ? &*g.t : nullptr);
    case GeneratorKind::FlatParabolicInvariant:
        return flat_parabolic_invariant(fp, g.c, g.parabolic, g.axis);
    default:
        throw std::invalid_argument(std::string(to_string(g.kind)) + " is not defined on flat points");
    }
}

namespace {

template <class Traj>
std::vector<double> series_impl(const Traj& traj, const GeneratorSpec& g, const SystemSpec& system)
{
    std::vector<double> out;
    out.reserve(traj.size());
    for (std::size_t k = 0; k < traj.size(); ++k) {
        try {
            out.push_back(evaluate(g, system, traj.samples[k]));
        } catch (NumericalError& e) {
            e.set_index(k);
            throw;
        }
    }
    return out;
}

double energy_scale_of(const std::vector<double>& energy)
{
    const double e = energy.empty() ? 0.0 : std::abs(energy.front());
    return e > 0.0 ? e : 1.0;
}

} // namespace

std::vector<double> generator_series(const CurvedTrajectory& traj, const GeneratorSpec& g, const SystemSpec& system)
{
    return series_impl(traj, g, system);
}

std::vector<double> generator_series(const FlatTrajectory& traj, const GeneratorSpec& g, const SystemSpec& system)
{
    return series_impl(traj, g, system);
}

DriftReport drift_from_series(const std::vector<double>& values, const GeneratorSpec& g, double energy_scale)
{
    DriftReport rep;
    rep.generator = g;
    if (values.empty())
        return rep;
    rep.initial = values.front();
    for (double v : values)
        rep.max_abs = std::max(rep.max_abs, std::abs(v - rep.initial));
    rep.denominator = std::max(std::abs(rep.initial), 1e-6 * energy_scale);
    rep.max_rel = rep.denominator > 0.0 ? rep.max_abs / rep.denominator : 0.0;
    return rep;
}

DriftReport drift(const CurvedTrajectory& traj, const GeneratorSpec& g, const SystemSpec& system)
{
    return drift_from_series(series_impl(traj, g, system), g, energy_scale_of(traj.energy));
}

DriftReport drift(const FlatTrajectory& traj, const GeneratorSpec& g, const SystemSpec& system)
{
    return drift_from_series(series_impl(traj, g, system), g, energy_scale_of(traj.energy));
}

namespace {

template <class Point, class Pos, class Rl>
ParabolicSeries parabolic_impl(const std::vector<Point>& samples, int axis, Pos&& position, Rl&& rl)
{
    ParabolicSeries out;
    for (const Point& pt : samples) {
        const Vec x = position(pt);
        const int a = axis < 0 ? static_cast<int>(x.size()) - 1 : axis;
        check_index(a, static_cast<int>(x.size()));
        const double r = checked_radius(x.norm(), kFlatOriginFloor);
        const double tr = x.squaredNorm() - x[a] * x[a];
        out.runge_lenz.push_back(rl(pt, a));
        out.transverse.push_back(tr);
        out.transverse_over_r.push_back(tr / r);
    }
    return out;
}

} // namespace

ParabolicSeries parabolic_series(const SpaceSpec& space, const CurvedTrajectory& traj, const Couplings& c, int axis)
{
    return parabolic_impl(
        traj.samples, axis, [](const PhasePoint& ph) { return Vec(ph.q.x()); },
        [&](const PhasePoint& ph, int a) { return runge_lenz(space, ph, c, a); });
}

ParabolicSeries parabolic_series(const FlatTrajectory& traj, const Couplings& c, int axis)
{
    return parabolic_impl(
        traj.samples, axis, [](const FlatPoint& fp) { return fp.x; },
        [&](const FlatPoint& fp, int a) { return flat_runge_lenz(fp, c, a); });
}

ParabolicSeries parabolic_series(const std::vector<FlatPoint>& samples, const Couplings& c, int axis)
{
    return parabolic_impl(
        samples, axis, [](const FlatPoint& fp) { return fp.x; },
        [&](const FlatPoint& fp, int a) { return flat_runge_lenz(fp, c, a); });
}

std::vector<double> parabolic_values(const ParabolicSeries& s, const Couplings& c, ParabolicCoefficients k)
{
    std::vector<double> out(s.runge_lenz.size());
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = s.runge_lenz[i] + k.a * c.eps_el * s.transverse[i] + k.b * c.dOmega2 * s.transverse_over_r[i];
    return out;
}

ParabolicCoefficients fit_parabolic_coefficients(const ParabolicSeries& s, const Couplings& c)
{
    ParabolicCoefficients k = ParabolicCoefficients::nominal();
    const std::size_t n = s.runge_lenz.size();
    if (n < 3)
        return k;
    std::vector<int> cols;
    if (c.eps_el != 0.0)
        cols.push_back(0);
    if (c.dOmega2 != 0.0)
        cols.push_back(1);
    if (cols.empty())
        return k;
    Mat a(n - 1, static_cast<Eigen::Index>(cols.size()));
    Vec rhs(n - 1);
    for (std::size_t i = 1; i < n; ++i) {
        const auto row = static_cast<Eigen::Index>(i - 1);
        for (std::size_t j = 0; j < cols.size(); ++j)
            a(row, static_cast<Eigen::Index>(j)) =
                cols[j] == 0 ? c.eps_el * (s.transverse[i] - s.transverse[0])
                             : c.dOmega2 * (s.transverse_over_r[i] - s.transverse_over_r[0]);
        rhs[row] = -(s.runge_lenz[i] - s.runge_lenz[0]);
    }
    const Vec sol = a.colPivHouseholderQr().solve(rhs);
    for (std::size_t j = 0; j < cols.size(); ++j)
        (cols[j] == 0 ? k.a : k.b) = sol[static_cast<Eigen::Index>(j)];
    return k;
}

} // namespace higgs
