#include "sevo/cli.hpp"

#include "sevo/rng.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

namespace sevo::cli {

namespace {

using nlohmann::json;

std::string fmt(double v)
{
    char buffer[64];
    std::snprintf(buffer, sizeof buffer, "%.17g", v);
    return buffer;
}

struct NuChoice {
    double nu = 0.0;
    bool automatic = false;
    Assumption1Report assumption;
    std::optional<AutoNuResult> search;
};

/// Shared by run and validate so both fail for the same reasons.
NuChoice select_nu(const RunConfig& config, const SpdeProblem& problem)
{
    const TimeGrid grid(config.dt, config.n_steps, 1.0);
    NuChoice choice;
    if (config.nu) {
        choice.nu = *config.nu;
        choice.assumption = assumption1_report(problem.system, choice.nu,
                                               grid.time(grid.n_steps() - 1), 32);
        if (!choice.assumption.passes) {
            throw PreconditionViolation("assumption check fails at nu = " + fmt(choice.nu) +
                                        ": " + choice.assumption.details);
        }
        return choice;
    }
    choice.automatic = true;
    AutoNuResult found = auto_nu(problem, grid, config.target_rho);
    choice.nu = found.nu;
    choice.assumption = found.assumption;
    choice.search = found;
    return choice;
}

void check_probes(const RunConfig& config, const SpdeProblem& problem)
{
    for (std::size_t p : config.probes) {
        if (p >= problem.system.dim()) {
            throw ConfigError("probe index " + std::to_string(p) + " exceeds the state dimension " +
                              std::to_string(problem.system.dim()));
        }
    }
}

std::string nu_lines(const NuChoice& choice, double coercivity)
{
    std::string out;
    out += "nu_source = " + std::string(choice.automatic ? "auto" : "fixed") + '\n';
    out += "coercivity_margin = " + fmt(choice.assumption.min_eig - coercivity) + '\n';
    if (choice.search) {
        out += "gain_s = " + fmt(choice.search->gain_s) + '\n';
        out += "gain_i = " + fmt(choice.search->gain_i) + '\n';
        out += "lipschitz_sigma = " + fmt(choice.search->lipschitz) + '\n';
        out += "estimated_rho = " + fmt(choice.search->estimated_rho) + '\n';
    }
    return out;
}

int classify(const std::exception& e, std::ostream& err)
{
    err << "error: " << e.what() << '\n';
    if (dynamic_cast<const NotContracting*>(&e) != nullptr) {
        return not_contracting;
    }
    if (dynamic_cast<const ConfigError*>(&e) != nullptr ||
        dynamic_cast<const InvalidCoefficient*>(&e) != nullptr ||
        dynamic_cast<const InvalidMask*>(&e) != nullptr ||
        dynamic_cast<const InvalidGrid*>(&e) != nullptr ||
        dynamic_cast<const InvalidCovariance*>(&e) != nullptr ||
        dynamic_cast<const InvalidRate*>(&e) != nullptr ||
        dynamic_cast<const ShapeMismatch*>(&e) != nullptr ||
        dynamic_cast<const PreconditionViolation*>(&e) != nullptr ||
        dynamic_cast<const NuSearchExhausted*>(&e) != nullptr) {
        return config_error;
    }
    return solver_failure;
}

void write_text(const std::filesystem::path& path, const std::string& content)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error("cannot write '" + path.string() + "'");
    }
    out << content;
}

}  // namespace

void write_statistics(std::ostream& os, const StochasticEnsemble& u, const RunConfig& config)
{
    const TimeGrid& grid = u.grid();
    const std::size_t n_paths = u.n_paths();
    os << "time";
    for (std::size_t p : config.probes) {
        if (config.stat_mean) {
            os << ",probe_" << p << "_mean";
        }
        if (config.stat_variance) {
            os << ",probe_" << p << "_var";
        }
    }
    if (config.stat_weighted) {
        os << ",weighted_rms";
    }
    os << '\n';
    for (std::size_t k = 0; k < grid.n_steps(); ++k) {
        const auto kk = static_cast<Eigen::Index>(k);
        os << fmt(grid.time(k));
        for (std::size_t probe : config.probes) {
            const auto i = static_cast<Eigen::Index>(probe);
            double mean = 0.0;
            for (std::size_t p = 0; p < n_paths; ++p) {
                mean += u.path(p)(i, kk);
            }
            mean /= static_cast<double>(n_paths);
            double var = 0.0;
            if (n_paths > 1) {
                for (std::size_t p = 0; p < n_paths; ++p) {
                    const double d = u.path(p)(i, kk) - mean;
                    var += d * d;
                }
                var /= static_cast<double>(n_paths - 1);
            }
            if (config.stat_mean) {
                os << ',' << fmt(mean);
            }
            if (config.stat_variance) {
                os << ',' << fmt(var);
            }
        }
        if (config.stat_weighted) {
            double sq = 0.0;
            for (std::size_t p = 0; p < n_paths; ++p) {
                sq += u.path(p).col(kk).squaredNorm();
            }
            os << ',' << fmt(std::exp(-grid.nu() * grid.time(k)) *
                             std::sqrt(sq / static_cast<double>(n_paths)));
        }
        os << '\n';
    }
}

int run(const std::string& config_path, const Overrides& overrides, std::ostream& out,
        std::ostream& err)
{
    const auto start = std::chrono::steady_clock::now();
    std::optional<RunConfig> config;
    std::optional<NuChoice> choice;
    try {
        config = load_config(config_path, overrides);
        const SpdeProblem problem = build_problem(*config);
        check_probes(*config, problem);
        choice = select_nu(*config, problem);

        const TimeGrid grid(config->dt, config->n_steps, choice->nu);
        PicardOptions options;
        options.tol = config->tol;
        options.max_iter = config->max_iter;
        options.n_paths = config->n_paths;
        options.seed = config->seed;
        const DriverEnsemble driver =
            sample_driver(problem.noise, grid, config->n_paths, config->seed);

        const std::filesystem::path dir(config->out_dir);
        std::filesystem::create_directories(dir);
        PicardResult result = [&]() -> PicardResult {
            try {
                return solve_problem(problem, driver, options);
            } catch (const NotContracting& e) {
                write_text(dir / "picard_report.txt",
                           e.report().to_key_value() + nu_lines(*choice, problem.system.coercivity_c));
                throw;
            } catch (const MaxIterExceeded& e) {
                write_text(dir / "picard_report.txt",
                           e.report().to_key_value() + nu_lines(*choice, problem.system.coercivity_c));
                throw;
            }
        }();

        std::ostringstream csv;
        write_statistics(csv, result.solution, *config);
        write_text(dir / "statistics.csv", csv.str());
        write_text(dir / "picard_report.txt",
                   result.report.to_key_value() + nu_lines(*choice, problem.system.coercivity_c));

        const double wall =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        const std::string canonical = config->document.dump();
        char hash[32];
        std::snprintf(hash, sizeof hash, "%016llx",
                      static_cast<unsigned long long>(fnv1a(canonical)));
        json manifest;
        manifest["config_hash"] = std::string("fnv1a64:") + hash;
        manifest["version"] = std::string(kVersion);
        manifest["model"] = config->model;
        manifest["master_seed"] = config->seed;
        manifest["seed_rule"] = std::string(kSeedRule);
        manifest["n_paths"] = config->n_paths;
        manifest["nu"] = choice->nu;
        manifest["nu_source"] = choice->automatic ? "auto" : "fixed";
        manifest["wall_time_seconds"] = wall;
        manifest["picard"] = {{"iterations", result.report.iterations},
                              {"converged", result.report.converged},
                              {"observed_rho", result.report.observed_rho},
                              {"final_difference", result.report.differences.empty()
                                                       ? 0.0
                                                       : result.report.differences.back()}};
        manifest["files"] = {"statistics.csv", "picard_report.txt"};
        write_text(dir / "manifest.json", manifest.dump(2) + "\n");

        out << "model = " << config->model << "\nnu = " << fmt(choice->nu)
            << "\niterations = " << result.report.iterations
            << "\nobserved_rho = " << fmt(result.report.observed_rho)
            << "\noutput = " << dir.string() << '\n';
        return ok;
    } catch (const std::exception& e) {
        return classify(e, err);
    }
}

int validate(const std::string& config_path, const Overrides& overrides, std::ostream& out,
             std::ostream& err)
{
    try {
        const RunConfig config = load_config(config_path, overrides);
        const SpdeProblem problem = build_problem(config);
        check_probes(config, problem);
        const NuChoice choice = select_nu(config, problem);
        out << "model = " << config.model << '\n';
        out << "state_dim = " << problem.system.dim() << '\n';
        out << "n_steps = " << config.n_steps << '\n';
        out << "nu = " << fmt(choice.nu) << '\n';
        out << nu_lines(choice, problem.system.coercivity_c);
        return ok;
    } catch (const std::exception& e) {
        return classify(e, err);
    }
}

}  // namespace sevo::cli
