#pragma once

#include "higgs/dynamics.hpp"
#include "higgs/invariants.hpp"
#include "higgs/potentials.hpp"
#include "higgs/reductions.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace higgs::experiment {

using nlohmann::json;

/// Stable process exit codes.
enum ExitCode : int {
    kExitPass = 0,
    kExitVerdict = 1, // a configured bound failed or a closure was not found
    kExitConfig = 2,
    kExitNumerics = 3,
    kExitFiber = 4,
    kExitGradcheck = 5,
};

/// Environment variable naming the output directory when --out is absent.
inline constexpr const char* kOutputEnv = "HIGGS_LAB_OUT";

enum class Expectation { Conserved, Violated };

struct GeneratorEntry {
    GeneratorSpec spec;
    Expectation expect = Expectation::Conserved;
    double bound = 1e-6;
    bool fit_parabolic = false; // also report least-squares (a, b) for parabolic kinds
};

struct InitialSpec {
    std::optional<Vec> x;
    std::optional<Vec> p;
    std::uint64_t seed = 1;
    double momentum_scale = 0.5;
    double cap = 0.5;
};

struct GradcheckOptions {
    int n_points = 100;
    std::uint64_t seed = 1;
    double tolerance = 1e-6;
    bool all_terms = false;
    int corrupt_term = -1;       // test fixture: index of a term whose gradient is perturbed
    double corrupt_factor = 1e-3;
};

struct Config {
    json raw; // effective config after overrides
    SystemSpec system;
    bool allow_invalid_t = false;
    InitialSpec initial;
    IntegratorConfig integrator;
    std::vector<GeneratorEntry> generators;
    std::optional<ReductionSpec> reduction;
    bool reduction_energy_given = false;
    ReturnOptions closure;
    GradcheckOptions gradcheck;
    std::optional<std::filesystem::path> output_dir;
};

/// Sets the value at a dotted path ("a.b.0.c=value"). The value is parsed as
/// JSON when possible and kept as a string otherwise. Throws ConfigError.
void apply_override(json& config, const std::string& assignment);

/// Throws ConfigError (or InvalidT) when the document is inconsistent.
Config parse_config(const json& config);

json load_config_file(const std::filesystem::path& path);

PhasePoint initial_phase_point(const Config& cfg);
FlatPoint initial_flat_point(const Config& cfg);

/// Merged couplings of a system: each field is taken from the first term where it is non-zero.
Couplings merged_couplings(const SystemSpec& system);

json conventions();

/// "%.17g"
std::string format_number(double v);

struct RunOptions {
    std::string command;
    std::filesystem::path config_path;
    std::optional<std::filesystem::path> out_dir;
    std::optional<std::uint64_t> seed;
    std::vector<std::string> overrides;
};

/// Output directory: explicit, then the config, then the environment, then ".".
std::filesystem::path resolve_output_dir(const std::optional<std::filesystem::path>& explicit_dir, const Config* cfg);

/// Full command pipeline. Writes report.json whenever the output directory is known.
int run(const RunOptions& opts, std::ostream& log);

/// Individual commands on a parsed config.
int cmd_simulate(const Config& cfg, const std::filesystem::path& out, std::ostream& log);
int cmd_drift(const Config& cfg, const std::filesystem::path& out, std::ostream& log);
int cmd_reduce(const Config& cfg, const std::filesystem::path& out, std::ostream& log);
int cmd_gradcheck(const Config& cfg, const std::filesystem::path& out, std::ostream& log);
int cmd_closure(const Config& cfg, const std::filesystem::path& out, std::ostream& log);

} // namespace higgs::experiment
