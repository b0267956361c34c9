#include "higgs/reductions.hpp"

#include "higgs/errors.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace higgs {

std::string_view to_string(ReductionKind kind)
{
    return kind == ReductionKind::KS ? "KS" : "LeviCivita";
}

ReductionKind reduction_kind_from_string(std::string_view name)
{
    if (name == "KS")
        return ReductionKind::KS;
    if (name == "LeviCivita")
        return ReductionKind::LeviCivita;
    throw std::invalid_argument("unknown reduction kind '" + std::string(name) + "'");
}

Vec ks_map(const Vec& u)
{
    if (u.size() != 4)
        throw std::invalid_argument("ks_map needs a 4-vector");
    Vec x(3);
    x << 2.0 * (u[0] * u[2] + u[1] * u[3]), 2.0 * (u[1] * u[2] - u[0] * u[3]),
        u[0] * u[0] + u[1] * u[1] - u[2] * u[2] - u[3] * u[3];
    return x;
}

Mat ks_jacobian(const Vec& u)
{
    Mat j(3, 4);
    j << u[2], u[3], u[0], u[1],
        -u[3], u[2], u[1], -u[0],
        u[0], u[1], -u[2], -u[3];
    return 2.0 * j;
}

double ks_fiber_momentum(const Vec& u, const Vec& pu)
{
    return u[0] * pu[1] - u[1] * pu[0] + u[2] * pu[3] - u[3] * pu[2];
}

Vec ks_fiber_rotate(const Vec& u, double phi)
{
    const double c = std::cos(phi);
    const double s = std::sin(phi);
    Vec out(4);
    out << c * u[0] - s * u[1], s * u[0] + c * u[1], c * u[2] - s * u[3], s * u[2] + c * u[3];
    return out;
}

Vec lc_map(const Vec& u)
{
    if (u.size() != 2)
        throw std::invalid_argument("lc_map needs a 2-vector");
    Vec x(2);
    x << u[0] * u[0] - u[1] * u[1], 2.0 * u[0] * u[1];
    return x;
}

Mat lc_jacobian(const Vec& u)
{
    Mat j(2, 2);
    j << u[0], -u[1], u[1], u[0];
    return 2.0 * j;
}

KeplerSide pushforward_potential(const ReductionSpec& spec, const std::vector<PotentialTerm>& oscillator_terms)
{
    KeplerSide out;
    const ReductionConstants& k = out.constants;
    const int n = spec.oscillator_dim();
    const int m = spec.kepler_dim();
    out.axis = spec.kind == ReductionKind::KS ? 2 : 0;
    out.gamma = k.gamma_per_energy * spec.energy;

    const Mat split = TMatrix::split(n / 2).matrix();
    double omega2 = 0.0;
    double dw2 = 0.0;
    double eps_el = 0.0;
    for (const auto& term : oscillator_terms) {
        switch (term.kind) {
        case TermKind::FlatOscillator:
            omega2 += term.c.omega2;
            break;
        case TermKind::FlatAnisotropic:
        case TermKind::FlatQuartic:
            if (term.t && (term.t->dim() != n || (term.t->matrix() - split).cwiseAbs().maxCoeff() > 1e-12))
                throw UnsupportedTerm(std::string(to_string(term.kind)) +
                                      " with a T other than the canonical split has no Kepler image");
            if (term.kind == TermKind::FlatAnisotropic)
                dw2 += term.c.dOmega2;
            else
                eps_el += term.c.eps_el;
            break;
        default:
            throw UnsupportedTerm(std::string(to_string(term.kind)) + " cannot be pushed forward by the reduction");
        }
    }
    out.energy = k.energy_per_omega2 * omega2;

    std::vector<PotentialTerm> terms;
    Couplings kep;
    kep.gamma = out.gamma;
    terms.push_back({TermKind::FlatKepler, kep, std::nullopt, -1});
    if (dw2 != 0.0) {
        Couplings cc;
        cc.dOmega2 = 4.0 * k.cos_per_dw2 * dw2; // FlatCos evaluates (dOmega2/4) x_axis/|x|
        terms.push_back({TermKind::FlatCos, cc, std::nullopt, out.axis});
    }
    if (eps_el != 0.0) {
        Couplings cl;
        cl.eps_el = k.linear_per_eps * eps_el;
        terms.push_back({TermKind::FlatLinear, cl, std::nullopt, out.axis});
    }
    double monopole = 0.0;
    if (spec.s != 0.0) {
        if (spec.kind != ReductionKind::KS)
            throw UnsupportedTerm("monopole charge requires the KS reduction");
        Couplings cm;
        cm.s = spec.s;
        terms.push_back({TermKind::MonopoleCentrifugal, cm, std::nullopt, -1});
        monopole = spec.s;
    }
    out.system = SystemSpec::flat(m, std::move(terms), monopole);
    return out;
}

FlatPoint pushforward_point(const ReductionSpec& spec, const FlatPoint& osc)
{
    const ReductionConstants k;
    const double uu = osc.x.squaredNorm();
    if (!(uu > 0.0))
        throw OriginSingularity("reduction map evaluated at u = 0");
    if (spec.kind == ReductionKind::KS) {
        if (osc.x.size() != 4)
            throw std::invalid_argument("KS reduction needs a 4-dimensional oscillator");
        return {ks_map(osc.x), ks_jacobian(osc.x) * osc.p / (k.conformal * uu)};
    }
    if (osc.x.size() != 2)
        throw std::invalid_argument("Levi-Civita reduction needs a 2-dimensional oscillator");
    return {lc_map(osc.x), lc_jacobian(osc.x) * osc.p / (k.conformal * uu)};
}

MappedTrajectory pushforward_trajectory(const FlatTrajectory& oscillator, const ReductionSpec& spec,
                                        const SystemSpec& oscillator_system)
{
    if (oscillator_system.space || oscillator_system.dim() != spec.oscillator_dim())
        throw std::invalid_argument("reduction: oscillator system dimension does not match the reduction kind");

    MappedTrajectory out;
    out.kepler = pushforward_potential(spec, oscillator_system.terms);
    const double conformal = out.kepler.constants.conformal;
    const double expected_fiber = spec.s / out.kepler.constants.monopole_per_fiber + 0.0; // no -0

    out.fictitious_time.reserve(oscillator.size());
    out.physical_time.reserve(oscillator.size());
    out.samples.reserve(oscillator.size());
    double t = 0.0;
    for (std::size_t k = 0; k < oscillator.size(); ++k) {
        const FlatPoint& osc = oscillator.samples[k];
        if (spec.kind == ReductionKind::KS) {
            const double fiber = ks_fiber_momentum(osc.x, osc.p);
            const double scale = std::max(1.0, osc.x.norm() * osc.p.norm());
            if (std::abs(fiber - expected_fiber) > spec.fiber_tol * scale)
                throw FiberViolation("fiber momentum " + std::to_string(fiber) + " at sample " + std::to_string(k) +
                                     " differs from the requested value " + std::to_string(expected_fiber));
            out.fiber.push_back(fiber);
        } else {
            out.fiber.push_back(0.0);
        }
        const double uu = osc.x.squaredNorm();
        if (k > 0) {
            const double prev = oscillator.samples[k - 1].x.squaredNorm();
            t += 0.5 * conformal * (uu + prev) * (oscillator.times[k] - oscillator.times[k - 1]);
        }
        FlatPoint mapped = pushforward_point(spec, osc);
        out.max_norm_identity_error = std::max(out.max_norm_identity_error, std::abs(mapped.x.norm() - uu));
        out.fictitious_time.push_back(oscillator.times[k]);
        out.physical_time.push_back(t);
        out.samples.push_back(std::move(mapped));
    }
    return out;
}

} // namespace higgs
