#pragma once

#include "sevo/models.hpp"

#include <json.hpp>

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace sevo {

inline constexpr std::string_view kVersion = "0.1.0";

namespace cli {

enum ExitCode : int { ok = 0, not_contracting = 2, config_error = 3, solver_failure = 4 };

/// Validated run configuration (see docs/config.schema.json).
struct RunConfig {
    nlohmann::json document;  ///< normalized document, defaults filled in

    std::string model;
    double dt = 0.01;
    double horizon = 1.0;
    std::size_t n_steps = 0;

    std::optional<double> nu;  ///< empty for "auto"
    double tol = 1e-8;
    std::size_t max_iter = 100;
    std::size_t n_paths = 1;
    std::uint64_t seed = 0;
    double target_rho = 0.5;

    std::string out_dir = "out";
    std::vector<std::size_t> probes;
    bool stat_mean = true;
    bool stat_variance = true;
    bool stat_weighted = true;
};

struct Overrides {
    std::optional<std::size_t> n_paths;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
};

/// Parses and validates; unknown keys and out-of-range values throw ConfigError.
RunConfig parse_config(const nlohmann::json& document, const Overrides& overrides = {});
RunConfig load_config(const std::string& path, const Overrides& overrides = {});

/// Assembles the model named in the config. Throws the model's errors.
SpdeProblem build_problem(const RunConfig& config);

/// 64-bit FNV-1a.
std::uint64_t fnv1a(std::string_view bytes);

/// Full batch run; writes manifest.json, picard_report.txt and statistics.csv.
int run(const std::string& config_path, const Overrides& overrides, std::ostream& out,
        std::ostream& err);

/// Dry run: schema, Assumption 1 and nu selection, no sample paths.
int validate(const std::string& config_path, const Overrides& overrides, std::ostream& out,
             std::ostream& err);

/// Writes the statistics CSV for a solution ensemble.
void write_statistics(std::ostream& os, const StochasticEnsemble& u, const RunConfig& config);

}  // namespace cli
}  // namespace sevo
