#include "higgs/experiment.hpp"

#include "higgs/errors.hpp"
#include "higgs/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>

namespace higgs::experiment {

namespace fs = std::filesystem;

namespace {

// ---------------------------------------------------------------- parsing

template <class T>
T get_or(const json& j, const char* key, T fallback)
{
    if (!j.is_object() || !j.contains(key) || j.at(key).is_null())
        return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("field '") + key + "': " + e.what());
    }
}

Vec to_vec(const json& j, const std::string& what)
{
    if (!j.is_array())
        throw ConfigError(what + " must be an array of numbers");
    Vec v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_number())
            throw ConfigError(what + " must be an array of numbers");
        v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
    }
    return v;
}

json from_vec(const Vec& v)
{
    json out = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i)
        out.push_back(v[i]);
    return out;
}

Couplings parse_couplings(const json& j, Couplings base = {})
{
    base.omega2 = get_or(j, "omega2", base.omega2);
    base.dOmega2 = get_or(j, "dOmega2", base.dOmega2);
    base.eps_el = get_or(j, "eps_el", base.eps_el);
    base.gamma = get_or(j, "gamma", base.gamma);
    base.s = get_or(j, "s", base.s);
    return base;
}

json couplings_json(const Couplings& c)
{
    return {{"omega2", c.omega2}, {"dOmega2", c.dOmega2}, {"eps_el", c.eps_el}, {"gamma", c.gamma}, {"s", c.s}};
}

// "t" (full matrix) or "t_diag"; validated unless allow_invalid.
std::optional<TMatrix> parse_t(const json& j, bool allow_invalid, const std::string& owner)
{
    if (!j.is_object())
        return std::nullopt;
    Mat m;
    if (j.contains("t_diag")) {
        m = to_vec(j.at("t_diag"), owner + ".t_diag").asDiagonal();
    } else if (j.contains("t")) {
        const json& rows = j.at("t");
        if (!rows.is_array() || rows.empty())
            throw ConfigError(owner + ".t must be a non-empty matrix");
        const auto n = static_cast<Eigen::Index>(rows.size());
        m.resize(n, n);
        for (Eigen::Index r = 0; r < n; ++r) {
            const Vec row = to_vec(rows[static_cast<std::size_t>(r)], owner + ".t row");
            if (row.size() != n)
                throw ConfigError(owner + ".t must be square");
            m.row(r) = row.transpose();
        }
    } else {
        return std::nullopt;
    }
    if (!allow_invalid)
        if (auto why = t_violation(m))
            throw ConfigError(owner + ": T violates the involution condition (" + *why + ")");
    return TMatrix::unchecked(m);
}

std::optional<SpaceSpec> parse_space(const json& j, int& flat_dim)
{
    if (j.is_string()) {
        std::istringstream in(j.get<std::string>());
        std::string word;
        int d = 0;
        if (!(in >> word >> d) || word != "flat" || d < 1)
            throw ConfigError("space must be {epsilon, d, r0} or \"flat <d>\"");
        flat_dim = d;
        return std::nullopt;
    }
    if (!j.is_object())
        throw ConfigError("space section missing");
    if (j.contains("flat")) {
        flat_dim = get_or(j, "flat", 0);
        if (flat_dim < 1)
            throw ConfigError("flat dimension must be positive");
        return std::nullopt;
    }
    try {
        return SpaceSpec::make(get_or(j, "epsilon", 1), get_or(j, "d", 2), get_or(j, "r0", 1.0));
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("space: ") + e.what());
    }
}

GeneratorEntry parse_generator(const json& j, const SystemSpec& system, bool allow_invalid, std::size_t index)
{
    const std::string owner = "generators[" + std::to_string(index) + "]";
    if (!j.is_object() || !j.contains("kind"))
        throw ConfigError(owner + " needs a kind");
    GeneratorEntry g;
    try {
        g.spec.kind = generator_kind_from_string(j.at("kind").get<std::string>());
    } catch (const std::invalid_argument& e) {
        throw ConfigError(owner + ": " + e.what());
    }
    g.spec.alpha = get_or(j, "alpha", 0);
    g.spec.beta = get_or(j, "beta", 1);
    g.spec.axis = get_or(j, "axis", -1);
    g.spec.c = parse_couplings(j, merged_couplings(system));
    g.spec.t = parse_t(j, allow_invalid, owner);
    if (!g.spec.t)
        for (const auto& term : system.terms)
            if (term.t) {
                g.spec.t = term.t;
                break;
            }
    const std::string form = get_or<std::string>(j, "form", "RadialSquare");
    if (form == "RadialSquare")
        g.spec.aniso_form = AnisotropicForm::RadialSquare;
    else if (form == "TQuadratic")
        g.spec.aniso_form = AnisotropicForm::TQuadratic;
    else
        throw ConfigError(owner + ": unknown form '" + form + "'");
    g.spec.nonlinear_coefficient = get_or(j, "coefficient", 1.0);
    if (j.contains("parabolic")) {
        const json& pj = j.at("parabolic");
        if (pj.is_string() && pj.get<std::string>() == "fit") {
            g.fit_parabolic = true;
        } else {
            const Vec ab = to_vec(pj, owner + ".parabolic");
            if (ab.size() != 2)
                throw ConfigError(owner + ".parabolic must be [a, b] or \"fit\"");
            g.spec.parabolic = {ab[0], ab[1]};
        }
    }
    const std::string expect = get_or<std::string>(j, "expect", "conserved");
    if (expect == "conserved")
        g.expect = Expectation::Conserved;
    else if (expect == "violated")
        g.expect = Expectation::Violated;
    else
        throw ConfigError(owner + ": expect must be 'conserved' or 'violated'");
    g.bound = get_or(j, "bound", g.expect == Expectation::Conserved ? 1e-6 : 1e-3);

    const int d = system.dim();
    auto check_index = [&](int i, const char* name) {
        if (i < 0 || i >= d)
            throw ConfigError(owner + ": " + name + " out of range");
    };
    switch (g.spec.kind) {
    case GeneratorKind::Jalpha:
        check_index(g.spec.alpha, "alpha");
        break;
    case GeneratorKind::Lalphabeta:
    case GeneratorKind::HiggsTensor:
        check_index(g.spec.alpha, "alpha");
        check_index(g.spec.beta, "beta");
        if (g.spec.kind == GeneratorKind::Lalphabeta && g.spec.alpha == g.spec.beta)
            throw ConfigError(owner + ": L needs distinct indices");
        break;
    case GeneratorKind::RungeLenz:
    case GeneratorKind::FlatRungeLenz:
        check_index(g.spec.alpha, "alpha");
        break;
    default:
        if (g.spec.axis >= d)
            throw ConfigError(owner + ": axis out of range");
    }
    const bool curved_kind = g.spec.kind == GeneratorKind::Jalpha || g.spec.kind == GeneratorKind::HiggsTensor ||
                             g.spec.kind == GeneratorKind::AnisotropicInvariant ||
                             g.spec.kind == GeneratorKind::NonlinearInvariant ||
                             g.spec.kind == GeneratorKind::RungeLenz ||
                             g.spec.kind == GeneratorKind::KeplerDeformedInvariant;
    const bool flat_kind = g.spec.kind == GeneratorKind::FlatRungeLenz ||
                           g.spec.kind == GeneratorKind::FlatAnisotropicInvariant ||
                           g.spec.kind == GeneratorKind::FlatParabolicInvariant;
    if (curved_kind && !system.space)
        throw ConfigError(owner + ": " + std::string(to_string(g.spec.kind)) + " needs a curved space");
    if (flat_kind && system.space)
        throw ConfigError(owner + ": " + std::string(to_string(g.spec.kind)) + " needs a flat space");
    const bool needs_t = g.spec.kind == GeneratorKind::AnisotropicInvariant ||
                         g.spec.kind == GeneratorKind::NonlinearInvariant;
    if (needs_t && !g.spec.t)
        throw ConfigError(owner + ": " + std::string(to_string(g.spec.kind)) + " requires a T matrix");
    if (g.spec.t && g.spec.t->dim() != d)
        throw ConfigError(owner + ": T dimension does not match the system");
    return g;
}

json* walk(json& root, const std::string& path, bool create)
{
    json* node = &root;
    std::size_t start = 0;
    while (start <= path.size()) {
        const std::size_t dot = path.find('.', start);
        const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (key.empty())
            throw ConfigError("override path '" + path + "' has an empty component");
        const bool numeric = std::all_of(key.begin(), key.end(), [](char ch) { return ch >= '0' && ch <= '9'; });
        if (node->is_array() && numeric) {
            const std::size_t idx = std::stoul(key);
            if (idx >= node->size()) {
                if (!create || idx != node->size())
                    throw ConfigError("override path '" + path + "': index " + key + " out of range");
                node->push_back(json::object());
            }
            node = &(*node)[idx];
        } else {
            if (node->is_null())
                *node = json::object();
            if (!node->is_object())
                throw ConfigError("override path '" + path + "': '" + key + "' is not an object member");
            if (!node->contains(key) && !create)
                throw ConfigError("override path '" + path + "' not found");
            node = &(*node)[key];
        }
        if (dot == std::string::npos)
            break;
        start = dot + 1;
    }
    return node;
}

// ---------------------------------------------------------------- output

class CsvWriter {
public:
    CsvWriter(const fs::path& path, const std::vector<std::string>& header) : out_(path, std::ios::binary)
    {
        if (!out_)
            throw std::runtime_error("cannot open " + path.string());
        for (std::size_t i = 0; i < header.size(); ++i)
            out_ << (i ? "," : "") << header[i];
        out_ << '\n';
    }

    void row(const std::vector<double>& values)
    {
        for (std::size_t i = 0; i < values.size(); ++i)
            out_ << (i ? "," : "") << format_number(values[i]);
        out_ << '\n';
    }

    void raw_row(const std::vector<std::string>& cells)
    {
        for (std::size_t i = 0; i < cells.size(); ++i)
            out_ << (i ? "," : "") << cells[i];
        out_ << '\n';
    }

private:
    std::ofstream out_;
};

void write_json(const fs::path& path, const json& j)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error("cannot open " + path.string());
    out << j.dump(2) << '\n';
}

std::vector<std::string> indexed(const std::string& prefix, int n)
{
    std::vector<std::string> out;
    for (int i = 1; i <= n; ++i)
        out.push_back(prefix + std::to_string(i));
    return out;
}

void write_trajectory(const fs::path& path, const CurvedTrajectory& traj, int d)
{
    std::vector<std::string> header{"t"};
    for (auto& s : indexed("x", d))
        header.push_back(s);
    header.push_back("x0");
    for (auto& s : indexed("p", d))
        header.push_back(s);
    for (const char* s : {"p0", "H", "surface_res", "tangency_res"})
        header.push_back(s);
    CsvWriter csv(path, header);
    for (std::size_t k = 0; k < traj.size(); ++k) {
        std::vector<double> row{traj.times[k]};
        const auto& s = traj.samples[k];
        for (Eigen::Index i = 0; i < s.q.coords.size(); ++i)
            row.push_back(s.q.coords[i]);
        for (Eigen::Index i = 0; i < s.p.size(); ++i)
            row.push_back(s.p[i]);
        row.push_back(traj.energy[k]);
        row.push_back(traj.surface_res[k]);
        row.push_back(traj.tangency_res[k]);
        csv.row(row);
    }
}

void write_trajectory(const fs::path& path, const FlatTrajectory& traj, int d)
{
    std::vector<std::string> header{"t"};
    for (auto& s : indexed("x", d))
        header.push_back(s);
    for (auto& s : indexed("p", d))
        header.push_back(s);
    for (const char* s : {"H", "surface_res", "tangency_res"})
        header.push_back(s);
    CsvWriter csv(path, header);
    for (std::size_t k = 0; k < traj.size(); ++k) {
        std::vector<double> row{traj.times[k]};
        const auto& s = traj.samples[k];
        for (Eigen::Index i = 0; i < s.x.size(); ++i)
            row.push_back(s.x[i]);
        for (Eigen::Index i = 0; i < s.p.size(); ++i)
            row.push_back(s.p[i]);
        row.push_back(traj.energy[k]);
        row.push_back(traj.surface_res[k]);
        row.push_back(traj.tangency_res[k]);
        csv.row(row);
    }
}

// "1e−6" for powers of ten, %g otherwise.
std::string format_bound(double b)
{
    const double e = std::log10(b);
    if (std::abs(e - std::round(e)) < 1e-12) {
        const long k = std::lround(e);
        return k < 0 ? "1e−" + std::to_string(-k) : "1e" + std::to_string(k);
    }
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", b);
    return buf;
}

json drift_json(const DriftReport& r)
{
    json j{{"kind", std::string(to_string(r.generator.kind))},
           {"initial", r.initial},
           {"max_abs_drift", r.max_abs},
           {"max_rel_drift", r.max_rel},
           {"denominator", r.denominator},
           {"couplings", couplings_json(r.generator.c)}};
    switch (r.generator.kind) {
    case GeneratorKind::Jalpha:
    case GeneratorKind::RungeLenz:
    case GeneratorKind::FlatRungeLenz:
        j["alpha"] = r.generator.alpha;
        break;
    case GeneratorKind::Lalphabeta:
    case GeneratorKind::HiggsTensor:
        j["alpha"] = r.generator.alpha;
        j["beta"] = r.generator.beta;
        break;
    case GeneratorKind::AnisotropicInvariant:
        j["form"] = r.generator.aniso_form == AnisotropicForm::RadialSquare ? "RadialSquare" : "TQuadratic";
        break;
    case GeneratorKind::NonlinearInvariant:
        j["coefficient"] = r.generator.nonlinear_coefficient;
        break;
    case GeneratorKind::KeplerDeformedInvariant:
    case GeneratorKind::FlatParabolicInvariant:
        j["axis"] = r.generator.axis;
        j["parabolic"] = {r.generator.parabolic.a, r.generator.parabolic.b};
        break;
    default:
        break;
    }
    if (r.generator.t) {
        json t = json::array();
        const Mat& m = r.generator.t->matrix();
        for (Eigen::Index i = 0; i < m.rows(); ++i)
            t.push_back(from_vec(m.row(i).transpose()));
        j["t"] = t;
    }
    return j;
}

struct Verdicts {
    json list = json::array();
    bool failed = false;
    bool flagged = false;

    void add(const std::string& name, bool passed, const std::string& detail, bool flag = false)
    {
        list.push_back({{"name", name}, {"passed", passed}, {"detail", detail}, {"flagged", flag}});
        failed = failed || !passed;
        flagged = flagged || flag;
    }
};

std::string status_of(const Verdicts& v)
{
    if (v.failed)
        return "fail";
    return v.flagged ? "flagged" : "pass";
}

json base_report(const std::string& command, const Config& cfg)
{
    return {{"command", command}, {"config", cfg.raw}, {"conventions", conventions()}};
}

template <class Traj>
json energy_block(const Traj& traj)
{
    const double e0 = traj.energy.front();
    double max_abs = 0.0;
    for (double e : traj.energy)
        max_abs = std::max(max_abs, std::abs(e - e0));
    const double denom = e0 != 0.0 ? std::abs(e0) : 1.0;
    return {{"initial", e0}, {"max_abs_drift", max_abs}, {"max_rel_drift", max_abs / denom}};
}

template <class Traj>
json constraint_block(const Traj& traj)
{
    double s = 0.0, t = 0.0;
    for (std::size_t k = 0; k < traj.size(); ++k) {
        s = std::max(s, traj.surface_res[k]);
        t = std::max(t, traj.tangency_res[k]);
    }
    return {{"max_surface_residual", s}, {"max_tangency_residual", t}};
}

std::string generator_label(const GeneratorSpec& g, std::size_t index)
{
    return "g" + std::to_string(index) + "_" + std::string(to_string(g.kind));
}

bool is_parabolic(GeneratorKind k)
{
    return k == GeneratorKind::KeplerDeformedInvariant || k == GeneratorKind::FlatParabolicInvariant;
}

ParabolicSeries parabolic_for(const SystemSpec& system, const CurvedTrajectory& traj, const GeneratorSpec& g)
{
    return parabolic_series(*system.space, traj, g.c, g.axis);
}

ParabolicSeries parabolic_for(const SystemSpec&, const FlatTrajectory& traj, const GeneratorSpec& g)
{
    return parabolic_series(traj, g.c, g.axis);
}

// Generators (energy first) with their drift CSVs and verdicts.
template <class Traj>
json analyse_generators(const Config& cfg, const SystemSpec& system, const Traj& traj,
                        std::vector<GeneratorEntry> generators, const fs::path& out, const std::string& prefix,
                        Verdicts& verdicts)
{
    const bool has_energy = std::any_of(generators.begin(), generators.end(),
                                        [](const GeneratorEntry& g) { return g.spec.kind == GeneratorKind::Energy; });
    if (!has_energy)
        generators.insert(generators.begin(), GeneratorEntry{});
    (void)cfg;
    const double e0 = traj.energy.front();
    const double energy_scale = e0 != 0.0 ? std::abs(e0) : 1.0;

    json list = json::array();
    for (std::size_t i = 0; i < generators.size(); ++i) {
        GeneratorEntry& g = generators[i];
        std::vector<double> values;
        if (is_parabolic(g.spec.kind))
            values = parabolic_values(parabolic_for(system, traj, g.spec), g.spec.c, g.spec.parabolic);
        else
            values = generator_series(traj, g.spec, system);
        DriftReport rep = drift_from_series(values, g.spec, energy_scale);
        json entry = drift_json(rep);
        entry["expect"] = g.expect == Expectation::Conserved ? "conserved" : "violated";
        entry["bound"] = g.bound;

        const std::string label = prefix + generator_label(g.spec, i);
        {
            CsvWriter csv(out / ("drift_" + label + ".csv"), {"t", "value", "abs_deviation"});
            for (std::size_t k = 0; k < values.size(); ++k)
                csv.row({traj.times[k], values[k], std::abs(values[k] - values.front())});
        }

        std::string verdict;
        bool passed = false;
        bool flag = false;
        if (g.expect == Expectation::Violated) {
            passed = rep.max_rel >= g.bound;
            verdict = passed ? "expected-fail: drift ≥ " + format_bound(g.bound)
                             : "fail: drift below the expected-violation bound " + format_bound(g.bound);
        } else {
            passed = rep.max_rel <= g.bound;
            verdict = (passed ? "pass: drift ≤ " : "fail: drift > ") + format_bound(g.bound);
            if (is_parabolic(g.spec.kind) && (!passed || g.fit_parabolic)) {
                const ParabolicSeries series = parabolic_for(system, traj, g.spec);
                const ParabolicCoefficients fitted = fit_parabolic_coefficients(series, g.spec.c);
                GeneratorSpec fitted_spec = g.spec;
                fitted_spec.parabolic = fitted;
                const DriftReport frep =
                    drift_from_series(parabolic_values(series, g.spec.c, fitted), fitted_spec, energy_scale);
                entry["fit"] = {{"a", fitted.a},
                                {"b", fitted.b},
                                {"nominal", {g.spec.parabolic.a, g.spec.parabolic.b}},
                                {"max_rel_drift", frep.max_rel},
                                {"max_abs_drift", frep.max_abs}};
                if (!passed) {
                    flag = true;
                    passed = frep.max_rel <= g.bound;
                    verdict = std::string(passed ? "flagged-pass" : "fail") + ": nominal drift " +
                              format_number(rep.max_rel) + ", fitted (a,b) = (" + format_number(fitted.a) + ", " +
                              format_number(fitted.b) + ") drift " + format_number(frep.max_rel) +
                              (passed ? " ≤ " : " > ") + format_bound(g.bound);
                }
            }
        }
        entry["verdict"] = verdict;
        entry["flagged"] = flag;
        verdicts.add(label, passed, verdict, flag);
        list.push_back(entry);
    }
    return list;
}

// Curved or flat trajectory, whichever the system needs.
struct AnyTrajectory {
    std::optional<CurvedTrajectory> curved;
    std::optional<FlatTrajectory> flat;
};

AnyTrajectory integrate(const Config& cfg)
{
    AnyTrajectory out;
    if (cfg.system.space)
        out.curved = simulate(cfg.system, initial_phase_point(cfg), cfg.integrator);
    else
        out.flat = simulate(cfg.system, initial_flat_point(cfg), cfg.integrator);
    return out;
}

int finish(json& report, const Verdicts& v, const fs::path& out, int code_on_fail = kExitVerdict)
{
    const int code = v.failed ? code_on_fail : kExitPass;
    report["verdicts"] = v.list;
    report["status"] = status_of(v);
    report["exit_code"] = code;
    write_json(out / "report.json", report);
    return code;
}

// Fiber momentum set to the requested value by a shift along the fiber direction.
void project_fiber(FlatPoint& fp, double target)
{
    const Vec& u = fp.x;
    Vec k(4);
    k << -u[1], u[0], -u[3], u[2];
    const double uu = u.squaredNorm();
    if (uu > 0.0)
        fp.p += ((target - ks_fiber_momentum(u, fp.p)) / uu) * k;
}

} // namespace

// ---------------------------------------------------------------- public

std::string format_number(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void apply_override(json& config, const std::string& assignment)
{
    const std::size_t eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0)
        throw ConfigError("override must look like key=value: '" + assignment + "'");
    const std::string key = assignment.substr(0, eq);
    const std::string text = assignment.substr(eq + 1);
    json value = json::parse(text, nullptr, false);
    if (value.is_discarded())
        value = text;
    *walk(config, key, true) = std::move(value);
}

Couplings merged_couplings(const SystemSpec& system)
{
    Couplings out;
    auto take = [](double& dst, double src) {
        if (dst == 0.0)
            dst = src;
    };
    for (const auto& t : system.terms) {
        take(out.omega2, t.c.omega2);
        take(out.dOmega2, t.c.dOmega2);
        take(out.eps_el, t.c.eps_el);
        take(out.gamma, t.c.gamma);
        take(out.s, t.c.s);
    }
    return out;
}

Config parse_config(const json& j)
{
    if (!j.is_object())
        throw ConfigError("config must be an object");
    Config cfg;
    cfg.raw = j;
    cfg.allow_invalid_t = get_or(j, "allow_invalid_t", false);

    int flat_dim = 0;
    if (!j.contains("space"))
        throw ConfigError("config needs a space section");
    const std::optional<SpaceSpec> space = parse_space(j.at("space"), flat_dim);

    std::vector<PotentialTerm> terms;
    const json system = j.value("system", json::array());
    if (!system.is_array())
        throw ConfigError("system must be a list of terms");
    double monopole = 0.0;
    for (std::size_t i = 0; i < system.size(); ++i) {
        const json& tj = system[i];
        const std::string owner = "system[" + std::to_string(i) + "]";
        if (!tj.is_object() || !tj.contains("kind"))
            throw ConfigError(owner + " needs a kind");
        PotentialTerm term;
        try {
            term.kind = term_kind_from_string(tj.at("kind").get<std::string>());
        } catch (const std::invalid_argument& e) {
            throw ConfigError(owner + ": " + e.what());
        }
        term.c = parse_couplings(tj);
        term.t = parse_t(tj, cfg.allow_invalid_t, owner);
        term.axis = get_or(tj, "axis", -1);
        if (!space && term.kind == TermKind::MonopoleCentrifugal)
            monopole += term.c.s;
        terms.push_back(std::move(term));
    }
    cfg.system = space ? SystemSpec::curved(*space, std::move(terms)) : SystemSpec::flat(flat_dim, std::move(terms));
    if (!space)
        cfg.system.s = monopole;
    cfg.system.validate(cfg.allow_invalid_t);
    const int d = cfg.system.dim();

    const json initial = j.value("initial", json::object());
    if (initial.contains("x")) {
        cfg.initial.x = to_vec(initial.at("x"), "initial.x");
        if (cfg.initial.x->size() != d)
            throw ConfigError("initial.x has the wrong dimension");
        if (!initial.contains("p"))
            throw ConfigError("initial.x given without initial.p");
        cfg.initial.p = to_vec(initial.at("p"), "initial.p");
        const auto np = cfg.initial.p->size();
        if (np != d && !(space && np == d + 1))
            throw ConfigError("initial.p has the wrong dimension");
    }
    cfg.initial.seed = get_or<std::uint64_t>(initial, "seed", 1);
    cfg.initial.momentum_scale = get_or(initial, "momentum_scale", 0.5);
    cfg.initial.cap = get_or(initial, "cap", 0.5);
    if (!(cfg.initial.momentum_scale > 0.0) || !(cfg.initial.cap > 0.0))
        throw ConfigError("initial.momentum_scale and initial.cap must be positive");
    if (space && space->epsilon == 1 && cfg.initial.cap >= 1.0)
        throw ConfigError("initial.cap must be below 1 on the sphere");

    const json integ = j.value("integrator", json::object());
    cfg.integrator.dt = get_or(integ, "dt", cfg.integrator.dt);
    const long long n_steps = get_or<long long>(integ, "n_steps", static_cast<long long>(cfg.integrator.n_steps));
    if (n_steps < 0)
        throw ConfigError("integrator.n_steps must be non-negative");
    cfg.integrator.n_steps = static_cast<std::size_t>(n_steps);
    cfg.integrator.newton_tol = get_or(integ, "newton_tol", cfg.integrator.newton_tol);
    cfg.integrator.newton_max_iter = get_or(integ, "newton_max_iter", cfg.integrator.newton_max_iter);
    const long long every = get_or<long long>(integ, "record_every", 1);
    if (every < 1)
        throw ConfigError("integrator.record_every must be at least 1");
    cfg.integrator.record_every = static_cast<std::size_t>(every);
    try {
        cfg.integrator.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("integrator: ") + e.what());
    }

    const json gens = j.value("generators", json::array());
    if (!gens.is_array())
        throw ConfigError("generators must be a list");
    for (std::size_t i = 0; i < gens.size(); ++i)
        cfg.generators.push_back(parse_generator(gens[i], cfg.system, cfg.allow_invalid_t, i));

    if (j.contains("reduction") && !j.at("reduction").is_null()) {
        const json& rj = j.at("reduction");
        ReductionSpec r;
        try {
            r.kind = reduction_kind_from_string(get_or<std::string>(rj, "kind", "KS"));
        } catch (const std::invalid_argument& e) {
            throw ConfigError(std::string("reduction: ") + e.what());
        }
        cfg.reduction_energy_given = rj.contains("energy") && !rj.at("energy").is_null();
        r.energy = get_or(rj, "energy", 0.0);
        r.s = get_or(rj, "s", 0.0);
        r.fiber_tol = get_or(rj, "fiber_tol", r.fiber_tol);
        if (space || d != r.oscillator_dim())
            throw ConfigError("reduction " + std::string(to_string(r.kind)) + " needs a flat " +
                              std::to_string(r.oscillator_dim()) + "-dimensional oscillator");
        if (r.s != 0.0 && r.kind != ReductionKind::KS)
            throw ConfigError("monopole charge requires the KS reduction");
        cfg.reduction = r;
    }

    const json cj = j.value("closure", json::object());
    cfg.closure.t_min = get_or(cj, "t_min", 0.0);
    cfg.closure.threshold = get_or(cj, "threshold", 1e-4);
    cfg.closure.length_scale = get_or(cj, "length_scale", space ? space->r0 : 1.0);
    cfg.closure.momentum_scale = get_or(cj, "momentum_scale", 0.0);
    if (!(cfg.closure.length_scale > 0.0) || !(cfg.closure.threshold > 0.0))
        throw ConfigError("closure.length_scale and closure.threshold must be positive");

    const json gj = j.value("gradcheck", json::object());
    cfg.gradcheck.n_points = get_or(gj, "n_points", 100);
    cfg.gradcheck.seed = get_or<std::uint64_t>(gj, "seed", cfg.initial.seed);
    cfg.gradcheck.tolerance = get_or(gj, "tolerance", 1e-6);
    cfg.gradcheck.all_terms = get_or(gj, "all_terms", false);
    cfg.gradcheck.corrupt_term = get_or(gj, "corrupt_term", -1);
    cfg.gradcheck.corrupt_factor = get_or(gj, "corrupt_factor", 1e-3);
    if (cfg.gradcheck.n_points < 1)
        throw ConfigError("gradcheck.n_points must be positive");

    const json oj = j.value("output", json::object());
    if (oj.contains("dir"))
        cfg.output_dir = fs::path(oj.at("dir").get<std::string>());
    return cfg;
}

json load_config_file(const fs::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot read config " + path.string());
    json j = json::parse(in, nullptr, false, true);
    if (j.is_discarded())
        throw ConfigError("config " + path.string() + " is not valid JSON");
    return j;
}

PhasePoint initial_phase_point(const Config& cfg)
{
    const SpaceSpec& space = *cfg.system.space;
    if (!cfg.initial.x)
        return random_phase_point(space, cfg.initial.seed, cfg.initial.momentum_scale, cfg.initial.cap);
    Vec p = *cfg.initial.p;
    if (p.size() == space.d) {
        p.conservativeResize(space.d + 1);
        p[space.d] = 0.0;
    }
    return make_phase_point(space, *cfg.initial.x, p);
}

FlatPoint initial_flat_point(const Config& cfg)
{
    if (cfg.initial.x)
        return {*cfg.initial.x, *cfg.initial.p};
    const int n = cfg.system.dim();
    std::mt19937_64 rng(cfg.initial.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    FlatPoint fp{Vec(n), Vec(n)};
    for (int i = 0; i < n; ++i)
        fp.x[i] = cfg.initial.cap * normal(rng);
    for (int i = 0; i < n; ++i)
        fp.p[i] = cfg.initial.momentum_scale * normal(rng);
    if (cfg.reduction && cfg.reduction->kind == ReductionKind::KS)
        project_fiber(fp, cfg.reduction->s / ReductionConstants{}.monopole_per_fiber);
    return fp;
}

json conventions()
{
    const ReductionConstants k;
    return {
        {"momentum", "velocity-type ambient P, H = <P,P>_eta / 2 + V"},
        {"j_alpha", "x0 p_a - x_a p0"},
        {"runge_lenz",
         {{"formula", "(1/r0) sum_b J_b L_ab - gamma x_a/|x|"}, {"momentum_sign", 1}, {"coulomb_sign", -1}}},
        {"flat_runge_lenz", "|p|^2 x_a - (x.p) p_a - gamma x_a/|x|"},
        {"anisotropic_invariant", "sum T_ab A_ab + (dOmega2/2) x.x"},
        {"nonlinear_invariant",
         "sum T_ab A_ab + k eps_el (r0^2 (x.x)^2/x0^2 + r0^4 (x.T.x)^2/x0^4), default k = 1"},
        {"parabolic", "A_axis + (a eps_el + b dOmega2/|x|)(x.x - x_axis^2), nominal (a,b) = (2,1)"},
        {"ks",
         {{"map", "x1 = 2(u1u3+u2u4), x2 = 2(u2u3-u1u4), x3 = u1^2+u2^2-u3^2-u4^2"},
          {"norm_identity", "|x| = u.u"},
          {"conformal_factor", k.conformal},
          {"time", "dt = conformal u.u ds"},
          {"velocity", "p_x = (dx/du) p_u / (conformal u.u)"},
          {"gamma_per_energy", k.gamma_per_energy},
          {"energy_per_omega2", k.energy_per_omega2},
          {"cos_per_dOmega2", k.cos_per_dw2},
          {"linear_per_eps_el", k.linear_per_eps},
          {"monopole_per_fiber", k.monopole_per_fiber},
          {"fiber_momentum", "u1p2 - u2p1 + u3p4 - u4p3"}}},
    };
}

fs::path resolve_output_dir(const std::optional<fs::path>& explicit_dir, const Config* cfg)
{
    if (explicit_dir)
        return *explicit_dir;
    if (cfg && cfg->output_dir)
        return *cfg->output_dir;
    if (const char* env = std::getenv(kOutputEnv); env && *env)
        return fs::path(env);
    return fs::path(".");
}

int cmd_simulate(const Config& cfg, const fs::path& out, std::ostream& log)
{
    json report = base_report("simulate", cfg);
    const AnyTrajectory traj = integrate(cfg);
    if (traj.curved) {
        write_trajectory(out / "trajectory.csv", *traj.curved, cfg.system.dim());
        report["n_samples"] = traj.curved->size();
        report["energy"] = energy_block(*traj.curved);
        report["constraints"] = constraint_block(*traj.curved);
    } else {
        write_trajectory(out / "trajectory.csv", *traj.flat, cfg.system.dim());
        report["n_samples"] = traj.flat->size();
        report["energy"] = energy_block(*traj.flat);
        report["constraints"] = constraint_block(*traj.flat);
    }
    log << "simulate: " << report["n_samples"] << " samples, max relative energy drift "
        << format_number(report["energy"]["max_rel_drift"].get<double>()) << '\n';
    return finish(report, Verdicts{}, out);
}

int cmd_drift(const Config& cfg, const fs::path& out, std::ostream& log)
{
    if (cfg.generators.empty())
        throw ConfigError("drift needs at least one generator");
    json report = base_report("drift", cfg);
    Verdicts v;
    const AnyTrajectory traj = integrate(cfg);
    if (traj.curved) {
        write_trajectory(out / "trajectory.csv", *traj.curved, cfg.system.dim());
        report["energy"] = energy_block(*traj.curved);
        report["constraints"] = constraint_block(*traj.curved);
        report["generators"] = analyse_generators(cfg, cfg.system, *traj.curved, cfg.generators, out, "", v);
    } else {
        write_trajectory(out / "trajectory.csv", *traj.flat, cfg.system.dim());
        report["energy"] = energy_block(*traj.flat);
        report["constraints"] = constraint_block(*traj.flat);
        report["generators"] = analyse_generators(cfg, cfg.system, *traj.flat, cfg.generators, out, "", v);
    }
    for (const auto& g : report["generators"])
        log << "drift: " << g["kind"].get<std::string>() << " max_rel " << format_number(g["max_rel_drift"])
            << " -> " << g["verdict"].get<std::string>() << '\n';
    return finish(report, v, out);
}

int cmd_reduce(const Config& cfg, const fs::path& out, std::ostream& log)
{
    if (!cfg.reduction)
        throw ConfigError("reduce needs a reduction section");
    ReductionSpec spec = *cfg.reduction;
    const FlatPoint osc0 = initial_flat_point(cfg);
    if (!cfg.reduction_energy_given)
        spec.energy = hamiltonian(cfg.system, osc0);

    json report = base_report("reduce", cfg);
    const FlatTrajectory osc = simulate(cfg.system, osc0, cfg.integrator);
    write_trajectory(out / "oscillator.csv", osc, cfg.system.dim());
    report["energy"] = energy_block(osc);
    report["constraints"] = constraint_block(osc);

    const MappedTrajectory mapped = pushforward_trajectory(osc, spec, cfg.system);
    const KeplerSide& kep = mapped.kepler;
    const int m = spec.kepler_dim();

    FlatTrajectory ktraj;
    ktraj.times = mapped.physical_time;
    ktraj.samples = mapped.samples;
    for (const auto& s : mapped.samples)
        ktraj.energy.push_back(hamiltonian(kep.system, s));
    ktraj.surface_res.assign(ktraj.size(), 0.0);
    ktraj.tangency_res.assign(ktraj.size(), 0.0);

    {
        std::vector<std::string> header{"s", "t"};
        for (auto& h : indexed("x", m))
            header.push_back(h);
        for (auto& h : indexed("p", m))
            header.push_back(h);
        header.push_back("H");
        header.push_back("fiber");
        CsvWriter csv(out / "kepler.csv", header);
        for (std::size_t k = 0; k < ktraj.size(); ++k) {
            std::vector<double> row{mapped.fictitious_time[k], mapped.physical_time[k]};
            for (int i = 0; i < m; ++i)
                row.push_back(mapped.samples[k].x[i]);
            for (int i = 0; i < m; ++i)
                row.push_back(mapped.samples[k].p[i]);
            row.push_back(ktraj.energy[k]);
            row.push_back(mapped.fiber[k]);
            csv.row(row);
        }
    }

    Verdicts v;
    json terms = json::array();
    for (const auto& t : kep.system.terms)
        terms.push_back({{"kind", std::string(to_string(t.kind))},
                         {"couplings", couplings_json(t.c)},
                         {"axis", t.axis_index(m)}});

    const double e_fixed = kep.energy;
    double e_abs = 0.0, e_off = 0.0;
    for (double e : ktraj.energy) {
        e_abs = std::max(e_abs, std::abs(e - ktraj.energy.front()));
        e_off = std::max(e_off, std::abs(e - e_fixed));
    }
    const double e_scale = e_fixed != 0.0 ? std::abs(e_fixed) : 1.0;
    json kepler_energy{{"fixed", e_fixed},
                       {"initial", ktraj.energy.front()},
                       {"max_rel_drift", e_abs / e_scale},
                       {"max_rel_offset", e_off / e_scale}};
    v.add("kepler_energy", e_off / e_scale <= 1e-8,
          std::string(e_off / e_scale <= 1e-8 ? "pass: " : "fail: ") + "Kepler-side energy within 1e−8 of " +
              format_number(e_fixed));

    json deformation = json::object();
    bool deformed = false;
    for (const auto& t : cfg.system.terms) {
        if (t.kind == TermKind::FlatAnisotropic || t.kind == TermKind::FlatQuartic) {
            deformed = true;
            // Pointwise image coefficient: V_term(u) / (conformal u.u) against its Kepler profile.
            double lo = INFINITY, hi = -INFINITY;
            for (std::size_t k = 0; k < osc.size(); ++k) {
                const Vec& u = osc.samples[k].x;
                const Vec& x = mapped.samples[k].x;
                const double r = x.norm();
                const double axis_x = x[kep.axis];
                const double profile = t.kind == TermKind::FlatAnisotropic ? axis_x / r : axis_x;
                const double strength = t.kind == TermKind::FlatAnisotropic ? t.c.dOmega2 : t.c.eps_el;
                if (std::abs(profile) < 1e-6 || strength == 0.0)
                    continue;
                const double ratio =
                    term_value(t, std::nullopt, u) / (kep.constants.conformal * u.squaredNorm()) / profile / strength;
                lo = std::min(lo, ratio);
                hi = std::max(hi, ratio);
            }
            json entry{{"measured_min", lo}, {"measured_max", hi}};
            if (t.kind == TermKind::FlatAnisotropic) {
                entry["profile"] = "x_axis/|x|";
                entry["pinned_per_dOmega2"] = kep.constants.cos_per_dw2;
                entry["stated_per_dOmega2"] = 0.25;
                const bool matches = std::abs(hi - 0.25) <= 1e-12 && std::abs(lo - 0.25) <= 1e-12;
                entry["matches_stated"] = matches;
                if (!matches)
                    entry["discrepancy"] = "image coefficient " + format_number(hi) +
                                           " per dOmega2 differs from the stated 1/4; reported, not rescaled";
                deformation["FlatAnisotropic"] = entry;
            } else {
                entry["profile"] = "x_axis";
                entry["pinned_per_eps_el"] = kep.constants.linear_per_eps;
                deformation["FlatQuartic"] = entry;
            }
        }
    }

    std::vector<GeneratorEntry> kgens;
    if (spec.s == 0.0) {
        for (int a = 0; a < m; ++a) {
            GeneratorEntry g;
            g.spec.kind = GeneratorKind::FlatRungeLenz;
            g.spec.alpha = a;
            g.spec.c.gamma = kep.gamma;
            g.bound = deformed ? 1e-6 : 1e-8;
            if (!deformed)
                kgens.push_back(g);
        }
        if (deformed) {
            GeneratorEntry g;
            g.spec.kind = GeneratorKind::FlatParabolicInvariant;
            g.spec.axis = kep.axis;
            g.spec.c = merged_couplings(kep.system);
            g.fit_parabolic = true;
            g.bound = 1e-6;
            kgens.push_back(g);
        }
    }
    // Config generators describe the Kepler side; their couplings default to its terms.
    for (std::size_t i = 0; i < cfg.generators.size(); ++i) {
        GeneratorEntry g = cfg.generators[i];
        g.spec.c = parse_couplings(cfg.raw.at("generators").at(i), merged_couplings(kep.system));
        kgens.push_back(g);
    }
    json generators = analyse_generators(cfg, kep.system, ktraj, kgens, out, "kepler_", v);

    report["reduction"] = {{"kind", std::string(to_string(spec.kind))},
                           {"oscillator_energy", spec.energy},
                           {"gamma", kep.gamma},
                           {"kepler_energy", kepler_energy},
                           {"axis", kep.axis},
                           {"terms", terms},
                           {"deformation_images", deformation},
                           {"max_norm_identity_error", mapped.max_norm_identity_error},
                           {"max_fiber_momentum", *std::max_element(mapped.fiber.begin(), mapped.fiber.end())},
                           {"min_fiber_momentum", *std::min_element(mapped.fiber.begin(), mapped.fiber.end())}};
    report["generators"] = generators;
    log << "reduce: " << terms.size() << " Kepler-side terms, gamma " << format_number(kep.gamma) << '\n';
    return finish(report, v, out);
}

namespace {

struct CatalogEntry {
    PotentialTerm term;
    std::optional<SpaceSpec> space;
    int flat_dim = 0;
};

std::vector<CatalogEntry> full_catalog()
{
    Couplings c;
    c.omega2 = 1.1;
    c.dOmega2 = 0.3;
    c.eps_el = 0.2;
    c.gamma = 0.9;
    c.s = 0.7;
    std::vector<CatalogEntry> out;
    const TMatrix t4 = TMatrix::split(2);
    for (int eps : {1, -1}) {
        const SpaceSpec space = SpaceSpec::make(eps, 4, 1.3);
        for (TermKind k : {TermKind::CurvedHiggs, TermKind::CurvedAnisotropic, TermKind::CurvedNonlinear,
                           TermKind::CurvedKepler, TermKind::CurvedStark, TermKind::CurvedCos,
                           TermKind::CurvedKeplerDeformed, TermKind::MonopoleCentrifugal}) {
            PotentialTerm term{k, c, std::nullopt, -1};
            if (k == TermKind::CurvedAnisotropic || k == TermKind::CurvedNonlinear)
                term.t = t4;
            out.push_back({term, space, 0});
        }
    }
    for (TermKind k : {TermKind::FlatOscillator, TermKind::FlatAnisotropic, TermKind::FlatQuartic})
        out.push_back({PotentialTerm{k, c, std::nullopt, -1}, std::nullopt, 4});
    for (TermKind k : {TermKind::FlatKepler, TermKind::FlatLinear, TermKind::FlatCos, TermKind::MonopoleCentrifugal})
        out.push_back({PotentialTerm{k, c, std::nullopt, -1}, std::nullopt, 3});
    return out;
}

Vec gradcheck_point(const CatalogEntry& e, std::mt19937_64& rng)
{
    if (e.space) {
        for (;;) {
            const PhasePoint ph = random_phase_point(*e.space, rng(), 1.0, 0.5);
            if (ph.q.x().norm() >= 0.1 * e.space->r0)
                return ph.q.coords;
        }
    }
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    for (;;) {
        Vec x(e.flat_dim);
        for (int i = 0; i < e.flat_dim; ++i)
            x[i] = uni(rng);
        if (x.norm() >= 0.2)
            return x;
    }
}

} // namespace

int cmd_gradcheck(const Config& cfg, const fs::path& out, std::ostream& log)
{
    std::vector<CatalogEntry> entries;
    if (cfg.gradcheck.all_terms) {
        entries = full_catalog();
    } else {
        for (const auto& t : cfg.system.terms)
            entries.push_back({t, cfg.system.space, cfg.system.space ? 0 : cfg.system.dim()});
    }
    if (entries.empty())
        throw ConfigError("gradcheck found no terms to check");

    json report = base_report("gradcheck", cfg);
    json rows = json::array();
    CsvWriter csv(out / "gradcheck.csv", {"index", "term", "space", "n_points", "max_rel_error", "worst_point"});
    std::mt19937_64 rng(cfg.gradcheck.seed);
    bool failed = false;
    double overall = 0.0;
    for (std::size_t i = 0; i < entries.size(); ++i) {
        const CatalogEntry& e = entries[i];
        double worst = 0.0;
        Vec worst_point;
        for (int n = 0; n < cfg.gradcheck.n_points; ++n) {
            const Vec q = gradcheck_point(e, rng);
            Vec g = term_gradient(e.term, e.space, q);
            if (static_cast<int>(i) == cfg.gradcheck.corrupt_term)
                g *= 1.0 + cfg.gradcheck.corrupt_factor;
            const double err = gradient_error(g, finite_difference_gradient(e.term, e.space, q));
            if (err >= worst) {
                worst = err;
                worst_point = q;
            }
        }
        const std::string space_label = e.space ? (e.space->epsilon == 1 ? "S" : "H") + std::to_string(e.space->d)
                                                : "R" + std::to_string(e.flat_dim);
        const bool ok = worst <= cfg.gradcheck.tolerance;
        failed = failed || !ok;
        overall = std::max(overall, worst);
        std::string pt;
        for (Eigen::Index k = 0; k < worst_point.size(); ++k)
            pt += (k ? " " : "") + format_number(worst_point[k]);
        csv.raw_row({std::to_string(i), std::string(to_string(e.term.kind)), space_label,
                     std::to_string(cfg.gradcheck.n_points), format_number(worst), pt});
        rows.push_back({{"term", std::string(to_string(e.term.kind))},
                        {"space", space_label},
                        {"max_rel_error", worst},
                        {"worst_point", from_vec(worst_point)},
                        {"passed", ok}});
        if (!ok)
            log << "gradcheck: " << to_string(e.term.kind) << " on " << space_label << " worst error "
                << format_number(worst) << " at [" << pt << "]\n";
    }
    report["gradcheck"] = {{"n_points", cfg.gradcheck.n_points},
                           {"tolerance", cfg.gradcheck.tolerance},
                           {"max_rel_error", overall},
                           {"terms", rows}};
    Verdicts v;
    v.add("gradcheck", !failed,
          std::string(failed ? "fail" : "pass") + ": max relative gradient error against " +
              format_bound(cfg.gradcheck.tolerance));
    return finish(report, v, out, kExitGradcheck);
}

int cmd_closure(const Config& cfg, const fs::path& out, std::ostream& log)
{
    json report = base_report("closure", cfg);
    const AnyTrajectory traj = integrate(cfg);
    std::vector<DistanceMinimum> minima;
    if (traj.curved) {
        minima = distance_minima(*traj.curved, traj.curved->samples.front(), cfg.closure);
        report["energy"] = energy_block(*traj.curved);
        report["constraints"] = constraint_block(*traj.curved);
    } else {
        minima = distance_minima(*traj.flat, traj.flat->samples.front(), cfg.closure);
        report["energy"] = energy_block(*traj.flat);
        report["constraints"] = constraint_block(*traj.flat);
    }
    {
        CsvWriter csv(out / "minima.csv", {"t", "distance"});
        for (const auto& m : minima)
            csv.row({m.time, m.distance});
    }
    json closure{{"threshold", cfg.closure.threshold}, {"t_min", cfg.closure.t_min}};
    Verdicts v;
    std::optional<DistanceMinimum> hit;
    for (const auto& m : minima)
        if (m.time > cfg.closure.t_min && m.distance <= cfg.closure.threshold) {
            hit = m;
            break;
        }
    if (hit) {
        closure["found"] = true;
        closure["time"] = hit->time;
        closure["distance"] = hit->distance;
        v.add("closure", true, "pass: return at t = " + format_number(hit->time));
        log << "closure: return at t = " << format_number(hit->time) << ", distance " << format_number(hit->distance)
            << '\n';
    } else {
        json table = json::array();
        double best = INFINITY;
        for (const auto& m : minima) {
            table.push_back({{"time", m.time}, {"distance", m.distance}});
            if (m.time > cfg.closure.t_min)
                best = std::min(best, m.distance);
        }
        closure["found"] = false;
        closure["minima"] = table;
        if (std::isfinite(best))
            closure["closest_distance"] = best;
        v.add("closure", false, "NotFound: no return below threshold " + format_number(cfg.closure.threshold));
        log << "closure: NotFound (closest approach " << format_number(best) << ")\n";
        for (const auto& m : minima)
            log << "  t = " << format_number(m.time) << "  distance = " << format_number(m.distance) << '\n';
    }
    report["closure"] = closure;
    return finish(report, v, out);
}

int run(const RunOptions& opts, std::ostream& log)
{
    std::optional<Config> cfg;
    std::optional<fs::path> out;
    auto error_report = [&](int code, const std::string& kind, const std::string& message,
                            std::optional<std::size_t> step) {
        log << opts.command << ": " << kind << ": " << message << '\n';
        if (!out)
            return code;
        json report{{"command", opts.command}, {"status", "error"}, {"exit_code", code},
                    {"conventions", conventions()}, {"verdicts", json::array()}};
        report["config"] = cfg ? cfg->raw : json::object();
        report["error"] = {{"kind", kind}, {"message", message}};
        if (step)
            report["error"]["step"] = *step;
        try {
            fs::create_directories(*out);
            write_json(*out / "report.json", report);
        } catch (const std::exception&) {
        }
        return code;
    };

    try {
        json raw = load_config_file(opts.config_path);
        for (const auto& o : opts.overrides)
            apply_override(raw, o);
        if (opts.seed) {
            raw["initial"]["seed"] = *opts.seed;
            if (raw.contains("gradcheck") && raw["gradcheck"].is_object())
                raw["gradcheck"]["seed"] = *opts.seed;
        }
        out = resolve_output_dir(opts.out_dir, nullptr);
        if (!opts.out_dir && raw.contains("output") && raw["output"].contains("dir"))
            out = fs::path(raw["output"]["dir"].get<std::string>());
        cfg = parse_config(raw);
        out = resolve_output_dir(opts.out_dir, &*cfg);
        fs::create_directories(*out);

        if (opts.command == "simulate")
            return cmd_simulate(*cfg, *out, log);
        if (opts.command == "drift")
            return cmd_drift(*cfg, *out, log);
        if (opts.command == "reduce")
            return cmd_reduce(*cfg, *out, log);
        if (opts.command == "gradcheck")
            return cmd_gradcheck(*cfg, *out, log);
        if (opts.command == "closure")
            return cmd_closure(*cfg, *out, log);
        throw ConfigError("unknown command '" + opts.command + "'");
    } catch (const FiberViolation& e) {
        return error_report(kExitFiber, "FiberViolation", e.what(), std::nullopt);
    } catch (const NumericalError& e) {
        return error_report(kExitNumerics, "NumericalError", e.what(), e.index());
    } catch (const ConfigError& e) {
        return error_report(kExitConfig, "ConfigError", e.what(), std::nullopt);
    } catch (const std::invalid_argument& e) {
        return error_report(kExitConfig, "ConfigError", e.what(), std::nullopt);
    } catch (const json::exception& e) {
        return error_report(kExitConfig, "ConfigError", e.what(), std::nullopt);
    }
}

} // namespace higgs::experiment
