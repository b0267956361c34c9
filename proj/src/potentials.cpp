#include "higgs/potentials.hpp"

#include "higgs/errors.hpp"

#include <array>
#include <cmath>
#include <sstream>
#include <utility>

namespace higgs {

namespace {

constexpr std::array<std::pair<TermKind, std::string_view>, 14> kKindNames{{
    {TermKind::CurvedHiggs, "CurvedHiggs"},
    {TermKind::CurvedAnisotropic, "CurvedAnisotropic"},
    {TermKind::CurvedNonlinear, "CurvedNonlinear"},
    {TermKind::CurvedKepler, "CurvedKepler"},
    {TermKind::CurvedStark, "CurvedStark"},
    {TermKind::CurvedCos, "CurvedCos"},
    {TermKind::CurvedKeplerDeformed, "CurvedKeplerDeformed"},
    {TermKind::FlatOscillator, "FlatOscillator"},
    {TermKind::FlatAnisotropic, "FlatAnisotropic"},
    {TermKind::FlatQuartic, "FlatQuartic"},
    {TermKind::FlatKepler, "FlatKepler"},
    {TermKind::FlatLinear, "FlatLinear"},
    {TermKind::FlatCos, "FlatCos"},
    {TermKind::MonopoleCentrifugal, "MonopoleCentrifugal"},
}};

void check_x0(const SpaceSpec& space, double x0)
{
    if (std::abs(x0) <= kX0FloorRel * space.r0)
        throw EquatorSingularity("|x0| below the equator floor");
}

double check_r(const SpaceSpec& space, const Vec& x)
{
    const double r = x.norm();
    if (r <= kOriginFloorRel * space.r0)
        throw OriginSingularity("|x| below the origin floor");
    return r;
}

double check_r_flat(const Vec& x)
{
    const double r = x.norm();
    if (r <= kFlatOriginFloor)
        throw OriginSingularity("|x| below the flat origin floor");
    return r;
}

int resolve_axis(int axis, int dim)
{
    const int a = axis < 0 ? dim - 1 : axis;
    if (a >= dim)
        throw std::invalid_argument("axis index out of range");
    return a;
}

Mat split_matrix(int dim)
{
    if (dim % 2 != 0)
        throw std::invalid_argument("canonical split needs an even dimension");
    return TMatrix::split(dim / 2).matrix();
}

const TMatrix& require_t(const PotentialTerm& term)
{
    if (!term.t)
        throw std::invalid_argument(std::string(to_string(term.kind)) + " requires a T matrix");
    return *term.t;
}

// Curved term value with optional ambient gradient (size d+1).
double eval_curved(const PotentialTerm& term, const SpaceSpec& space, const Vec& X, Vec* grad)
{
    const int d = space.d;
    if (X.size() != d + 1)
        throw std::invalid_argument("curved term: ambient dimension mismatch");
    const auto x = X.head(d);
    const double x0 = X[d];
    const double R = space.r0;
    const double R2 = R * R;
    const Couplings& c = term.c;
    if (grad)
        grad->setZero(d + 1);

    switch (term.kind) {
    case TermKind::CurvedHiggs: {
        check_x0(space, x0);
        const double k = 0.5 * c.omega2 * R2;
        const double xx = x.squaredNorm();
        if (grad) {
            grad->head(d) = (2.0 * k / (x0 * x0)) * x;
            (*grad)[d] = -2.0 * k * xx / (x0 * x0 * x0);
        }
        return k * xx / (x0 * x0);
    }
    case TermKind::CurvedAnisotropic: {
        const TMatrix& t = require_t(term);
        const Vec tx = t.matrix() * x;
        if (grad)
            grad->head(d) = c.dOmega2 * tx;
        return 0.5 * c.dOmega2 * x.dot(tx);
    }
    case TermKind::CurvedNonlinear: {
        check_x0(space, x0);
        const TMatrix& t = require_t(term);
        const Vec tx = t.matrix() * x;
        const double S = x.squaredNorm();
        const double Q = x.dot(tx);
        const double x02 = x0 * x0;
        const double f = (R2 + x02) / (x02 * x02);
        const double df = -4.0 * R2 / (x02 * x02 * x0) - 2.0 / (x02 * x0);
        const double k = c.eps_el * R2;
        if (grad) {
            grad->head(d) = k * f * (2.0 * Q * x + 2.0 * S * tx);
            (*grad)[d] = k * df * S * Q;
        }
        return k * f * S * Q;
    }
    case TermKind::CurvedKepler: {
        const double r = check_r(space, x);
        const double k = c.gamma / R;
        if (grad) {
            grad->head(d) = (k * x0 / (r * r * r)) * x;
            (*grad)[d] = -k / r;
        }
        return -k * x0 / r;
    }
    case TermKind::CurvedStark: {
        const int a = resolve_axis(term.axis, d);
        if (grad) {
            (*grad)[a] = c.eps_el * x0 / R;
            (*grad)[d] = c.eps_el * x[a] / R;
        }
        return c.eps_el * x0 * x[a] / R;
    }
    case TermKind::CurvedCos: {
        const int a = resolve_axis(term.axis, d);
        const double r = check_r(space, x);
        const double k = 0.5 * c.dOmega2;
        if (grad) {
            grad->head(d) = (-k * x[a] / (r * r * r)) * x;
            (*grad)[a] += k / r;
        }
        return k * x[a] / r;
    }
    case TermKind::CurvedKeplerDeformed: {
        const int a = resolve_axis(term.axis, d);
        const double r = check_r(space, x);
        const double k = 0.5 * c.dOmega2;
        const double eps = space.epsilon;
        const double lin = k * eps / R2 + c.eps_el / R; // coefficient of x0 x_a
        if (grad) {
            grad->head(d) = (-k * x[a] / (r * r * r)) * x;
            (*grad)[a] += k / r + lin * x0;
            (*grad)[d] = lin * x[a];
        }
        return k * x[a] / r + lin * x0 * x[a];
    }
    case TermKind::MonopoleCentrifugal: {
        const double r = check_r(space, x);
        const double r2 = r * r;
        const double k = 0.5 * c.s * c.s / R2;
        if (grad) {
            grad->head(d) = (-2.0 * k * x0 * x0 / (r2 * r2)) * x;
            (*grad)[d] = 2.0 * k * x0 / r2;
        }
        return k * x0 * x0 / r2;
    }
    default:
        throw std::invalid_argument(std::string(to_string(term.kind)) + " is not a curved term");
    }
}

double eval_flat(TermKind kind, const Vec& x, const Couplings& c, const TMatrix* t, int axis, Vec* grad)
{
    const int n = static_cast<int>(x.size());
    if (grad)
        grad->setZero(n);

    switch (kind) {
    case TermKind::FlatOscillator:
        if (grad)
            *grad = c.omega2 * x;
        return 0.5 * c.omega2 * x.squaredNorm();
    case TermKind::FlatAnisotropic: {
        const Vec tx = t ? Vec(t->matrix() * x) : Vec(split_matrix(n) * x);
        if (grad)
            *grad = c.dOmega2 * tx;
        return 0.5 * c.dOmega2 * x.dot(tx);
    }
    case TermKind::FlatQuartic: {
        // -2 eps_el (x.x)(x.T.x) = -2 eps_el [ (sum_{i<=p} x_i^2)^2 - (sum_{i>p} x_i^2)^2 ]
        const Vec tx = t ? Vec(t->matrix() * x) : Vec(split_matrix(n) * x);
        const double S = x.squaredNorm();
        const double Q = x.dot(tx);
        if (grad)
            *grad = -2.0 * c.eps_el * (2.0 * Q * x + 2.0 * S * tx);
        return -2.0 * c.eps_el * S * Q;
    }
    case TermKind::FlatKepler: {
        const double r = check_r_flat(x);
        if (grad)
            *grad = (c.gamma / (r * r * r)) * x;
        return -c.gamma / r;
    }
    case TermKind::FlatLinear: {
        const int a = resolve_axis(axis, n);
        if (grad)
            (*grad)[a] = c.eps_el;
        return c.eps_el * x[a];
    }
    case TermKind::FlatCos: {
        const int a = resolve_axis(axis, n);
        const double r = check_r_flat(x);
        const double k = 0.25 * c.dOmega2;
        if (grad) {
            *grad = (-k * x[a] / (r * r * r)) * x;
            (*grad)[a] += k / r;
        }
        return k * x[a] / r;
    }
    case TermKind::MonopoleCentrifugal: {
        const double r = check_r_flat(x);
        const double r2 = r * r;
        if (grad)
            *grad = (-c.s * c.s / (r2 * r2)) * x;
        return 0.5 * c.s * c.s / r2;
    }
    default:
        throw std::invalid_argument(std::string(to_string(kind)) + " is not a flat term");
    }
}

double eval_term(const PotentialTerm& term, const std::optional<SpaceSpec>& space, const Vec& point, Vec* grad)
{
    if (space)
        return eval_curved(term, *space, point, grad);
    return eval_flat(term.kind, point, term.c, term.t ? &*term.t : nullptr, term.axis, grad);
}

} // namespace

std::string_view to_string(TermKind kind)
{
    for (const auto& [k, name] : kKindNames)
        if (k == kind)
            return name;
    return "Unknown";
}

TermKind term_kind_from_string(std::string_view name)
{
    for (const auto& [k, n] : kKindNames)
        if (n == name)
            return k;
    throw std::invalid_argument("unknown potential term kind '" + std::string(name) + "'");
}

bool is_curved(TermKind kind)
{
    switch (kind) {
    case TermKind::CurvedHiggs:
    case TermKind::CurvedAnisotropic:
    case TermKind::CurvedNonlinear:
    case TermKind::CurvedKepler:
    case TermKind::CurvedStark:
    case TermKind::CurvedCos:
    case TermKind::CurvedKeplerDeformed:
    case TermKind::MonopoleCentrifugal:
        return true;
    default:
        return false;
    }
}

bool is_flat(TermKind kind) { return !is_curved(kind) || kind == TermKind::MonopoleCentrifugal; }

std::optional<std::string> t_violation(const Mat& t)
{
    if (t.rows() != t.cols() || t.rows() == 0)
        return "T must be a non-empty square matrix";
    const Mat id = Mat::Identity(t.rows(), t.cols());
    std::ostringstream msg;
    const double asym = (t - t.transpose()).cwiseAbs().maxCoeff();
    if (asym > 1e-12) {
        msg << "T is not symmetric (max |T - T^t| = " << asym << ")";
        return msg.str();
    }
    const double inv = (t * t - id).cwiseAbs().maxCoeff();
    if (inv > 1e-10) {
        msg << "T violates the involution condition T^2 = Id (max |T^2 - Id| = " << inv << ")";
        return msg.str();
    }
    if ((t - id).cwiseAbs().maxCoeff() <= 1e-10)
        return "T violates the condition T != Id";
    return std::nullopt;
}

TMatrix TMatrix::checked(const Mat& t)
{
    if (auto why = t_violation(t))
        throw InvalidT(*why);
    return TMatrix(t);
}

TMatrix TMatrix::unchecked(const Mat& t) { return TMatrix(t); }

TMatrix TMatrix::diagonal(const std::vector<double>& entries, bool validate)
{
    Mat t = Mat::Zero(static_cast<Eigen::Index>(entries.size()), static_cast<Eigen::Index>(entries.size()));
    for (std::size_t i = 0; i < entries.size(); ++i)
        t(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) = entries[i];
    return validate ? checked(t) : unchecked(t);
}

TMatrix TMatrix::split(int p)
{
    std::vector<double> e(2 * static_cast<std::size_t>(p), 1.0);
    for (int i = p; i < 2 * p; ++i)
        e[static_cast<std::size_t>(i)] = -1.0;
    return diagonal(e);
}

bool TMatrix::is_valid() const { return !t_violation(t_).has_value(); }

double v_curved_higgs(const SpaceSpec& space, const AmbientPoint& q, const Couplings& c)
{
    return eval_curved({TermKind::CurvedHiggs, c, std::nullopt, -1}, space, q.coords, nullptr);
}

double v_curved_anisotropic(const SpaceSpec& space, const AmbientPoint& q, const Couplings& c, const TMatrix& t)
{
    if (auto why = t_violation(t.matrix()))
        throw InvalidT(*why);
    return eval_curved({TermKind::CurvedAnisotropic, c, t, -1}, space, q.coords, nullptr);
}

double v_curved_nonlinear(const SpaceSpec& space, const AmbientPoint& q, const Couplings& c, const TMatrix& t)
{
    if (auto why = t_violation(t.matrix()))
        throw InvalidT(*why);
    return eval_curved({TermKind::CurvedNonlinear, c, t, -1}, space, q.coords, nullptr);
}

double v_curved_kepler(const SpaceSpec& space, const AmbientPoint& q, const Couplings& c)
{
    return eval_curved({TermKind::CurvedKepler, c, std::nullopt, -1}, space, q.coords, nullptr);
}

double v_curved_stark(const SpaceSpec& space, const AmbientPoint& q, const Couplings& c, int axis)
{
    return eval_curved({TermKind::CurvedStark, c, std::nullopt, axis}, space, q.coords, nullptr);
}

double v_curved_cos(const SpaceSpec& space, const AmbientPoint& q, const Couplings& c, int axis)
{
    return eval_curved({TermKind::CurvedCos, c, std::nullopt, axis}, space, q.coords, nullptr);
}

double v_curved_kepler_deformed(const SpaceSpec& space, const AmbientPoint& q, const Couplings& c, int axis)
{
    return eval_curved({TermKind::CurvedKeplerDeformed, c, std::nullopt, axis}, space, q.coords, nullptr);
}

double v_flat_term(TermKind kind, const Vec& x, const Couplings& c, const TMatrix* t, int axis)
{
    return eval_flat(kind, x, c, t, axis, nullptr);
}

double term_value(const PotentialTerm& term, const std::optional<SpaceSpec>& space, const Vec& point)
{
    return eval_term(term, space, point, nullptr);
}

Vec term_gradient(const PotentialTerm& term, const std::optional<SpaceSpec>& space, const Vec& point)
{
    Vec g;
    eval_term(term, space, point, &g);
    return g;
}

SystemSpec SystemSpec::curved(const SpaceSpec& space, std::vector<PotentialTerm> terms)
{
    SystemSpec s;
    s.space = space;
    s.flat_dim = 0;
    s.terms = std::move(terms);
    return s;
}

SystemSpec SystemSpec::flat(int dim, std::vector<PotentialTerm> terms, double monopole)
{
    SystemSpec s;
    s.flat_dim = dim;
    s.terms = std::move(terms);
    s.s = monopole;
    return s;
}

void SystemSpec::validate(bool allow_invalid_t) const
{
    const int n = dim();
    if (!space && n < 1)
        throw ConfigError("flat system needs a positive dimension");
    if (!space && s != 0.0 && n != 3)
        throw ConfigError("monopole coupling requires a 3-dimensional flat system");
    for (const auto& term : terms) {
        const std::string name(to_string(term.kind));
        if (space && !higgs::is_curved(term.kind))
            throw ConfigError(name + " is a flat term but the system is curved");
        if (!space && !higgs::is_flat(term.kind))
            throw ConfigError(name + " is a curved term but the system is flat");
        const bool needs_t = term.kind == TermKind::CurvedAnisotropic || term.kind == TermKind::CurvedNonlinear;
        if (needs_t && !term.t)
            throw ConfigError(name + " requires a T matrix");
        if ((term.kind == TermKind::FlatAnisotropic || term.kind == TermKind::FlatQuartic) && !term.t && n % 2 != 0)
            throw ConfigError(name + " without T requires an even dimension");
        if (term.t) {
            if (term.t->dim() != n)
                throw ConfigError(name + ": T dimension does not match the system");
            if (!allow_invalid_t)
                if (auto why = t_violation(term.t->matrix()))
                    throw ConfigError(name + ": " + *why);
        }
        if (term.axis >= n)
            throw ConfigError(name + ": axis out of range");
    }
}

double SystemSpec::potential(const Vec& point) const
{
    double v = 0.0;
    for (const auto& term : terms)
        v += eval_term(term, space, point, nullptr);
    return v;
}

Vec SystemSpec::gradient(const Vec& point) const
{
    Vec total = Vec::Zero(point.size());
    Vec g;
    for (const auto& term : terms) {
        eval_term(term, space, point, &g);
        total += g;
    }
    return total;
}

double hamiltonian(const SystemSpec& system, const PhasePoint& ph)
{
    if (!system.space)
        throw std::invalid_argument("hamiltonian: curved phase point given to a flat system");
    return 0.5 * metric_dot(*system.space, ph.p, ph.p) + system.potential(ph.q.coords);
}

double hamiltonian(const SystemSpec& system, const FlatPoint& fp)
{
    if (system.space)
        throw std::invalid_argument("hamiltonian: flat point given to a curved system");
    return 0.5 * fp.p.squaredNorm() + system.potential(fp.x);
}

Vec dirac_vector_potential(const Vec& x)
{
    if (x.size() != 3)
        throw std::invalid_argument("Dirac potential is defined in three dimensions");
    const double r = x.norm();
    const double den = r * (r + x[2]);
    if (!(den > 0.0))
        throw OriginSingularity("Dirac string or origin reached");
    Vec a(3);
    a << -x[1] / den, x[0] / den, 0.0;
    return a;
}

double hamiltonian_canonical(const SystemSpec& system, const Vec& x, const Vec& p_canonical)
{
    Vec kinetic = p_canonical;
    if (system.s != 0.0)
        kinetic -= system.s * dirac_vector_potential(x);
    return hamiltonian(system, FlatPoint{x, kinetic});
}

Vec finite_difference_gradient(const PotentialTerm& term, const std::optional<SpaceSpec>& space, const Vec& point,
                               double h_rel)
{
    const double h = h_rel * std::max(1.0, point.cwiseAbs().maxCoeff());
    Vec fd(point.size());
    Vec probe = point;
    for (Eigen::Index i = 0; i < point.size(); ++i) {
        const double hi = point[i] + h;
        const double lo = point[i] - h;
        probe[i] = hi;
        const double up = term_value(term, space, probe);
        probe[i] = lo;
        const double down = term_value(term, space, probe);
        probe[i] = point[i];
        fd[i] = (up - down) / (hi - lo); // the step actually taken
    }
    return fd;
}

double gradient_error(const Vec& analytic, const Vec& reference)
{
    const double scale = std::max(analytic.cwiseAbs().maxCoeff(), 1e-12);
    return (reference - analytic).cwiseAbs().maxCoeff() / scale;
}

double gradient_error(const PotentialTerm& term, const std::optional<SpaceSpec>& space, const Vec& point,
                      double h_rel)
{
    return gradient_error(term_gradient(term, space, point), finite_difference_gradient(term, space, point, h_rel));
}

} // namespace higgs
