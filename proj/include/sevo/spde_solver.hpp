#pragma once

#include "sevo/errors.hpp"
#include "sevo/evo_solver.hpp"
#include "sevo/parallel.hpp"
#include "sevo/stochastic.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace sevo {

/// Driver parameters plus the noise coefficient and where it acts.
///
/// sigma reads the state block [source_offset, source_offset + dim_h) and
/// its stochastic integral is added to the equation rows
/// [target_offset, target_offset + dim_h).
struct NoiseSpec {
    DriverKind driver = DriverKind::wiener;
    Eigen::MatrixXd q;        ///< Wiener covariance (dim_g x dim_g)
    double rate = 0.0;        ///< Poisson intensity
    Eigen::VectorXd jump;     ///< Poisson jump vector (dim_g)
    std::optional<SigmaSpec> sigma;
    std::size_t source_offset = 0;
    std::size_t target_offset = 0;

    bool active() const { return sigma.has_value() && !sigma->is_zero(); }
    std::size_t dim_g() const;
};

DriverEnsemble sample_driver(const NoiseSpec& noise, const TimeGrid& grid, std::size_t n_paths,
                             std::uint64_t seed);

enum class RhsPreprocess { none, apply_j };

/// Deterministic forcing f(t) written into `out` (length = state dimension).
using Forcing = std::function<void(double t, Eigen::Ref<Eigen::VectorXd> out)>;

struct SpdeProblem {
    std::string model;
    BlockSystem system;
    Forcing forcing;  ///< empty means f = 0
    NoiseSpec noise;
    RhsPreprocess preprocess = RhsPreprocess::none;
};

/// Throws ShapeMismatch / PreconditionViolation for inconsistent noise placement.
void validate_problem(const SpdeProblem& problem);

/// f sampled on the grid, with the causal integral applied when requested.
WeightedSignal sample_rhs(const SpdeProblem& problem, const TimeGrid& grid);

struct PicardOptions {
    double tol = 1e-8;
    std::size_t max_iter = 100;
    std::size_t n_paths = 1;
    std::uint64_t seed = 0;
    std::size_t workers = default_workers();
    /// Start from a random Gaussian iterate instead of u^0 = 0.
    bool random_start = false;
    std::uint64_t start_seed = 0xC0FFEE;
    /// Run exactly this many iterations, ignoring the stopping rule.
    std::optional<std::size_t> fixed_iterations;
    StepOptions step;
};

struct PicardReport {
    std::string model;
    double nu = 0.0;
    std::size_t iterations = 0;
    bool converged = false;
    double tol = 0.0;
    std::size_t n_paths = 0;
    std::uint64_t seed = 0;
    std::vector<double> differences;  ///< d_m, m = 1..iterations
    std::vector<double> rho;          ///< d_m / d_{m-1}, m = 2..iterations
    double observed_rho = 0.0;        ///< max rho_m over m >= 2 (0 if fewer than 2 iterates)
    double max_inclusion_residual = 0.0;
    std::size_t max_inner_iterations = 0;

    /// "key = value" lines; vectors are comma separated, doubles at 17 digits.
    std::string to_key_value() const;
};

class NotContracting : public Error {
public:
    explicit NotContracting(PicardReport report);
    const PicardReport& report() const { return report_; }

private:
    PicardReport report_;
};

class MaxIterExceeded : public Error {
public:
    explicit MaxIterExceeded(PicardReport report);
    const PicardReport& report() const { return report_; }

private:
    PicardReport report_;
};

struct PicardResult {
    StochasticEnsemble solution;
    PicardReport report;
};

/// Fixed-point loop u <- S(f + I sigma~(u)) on every path; nu is taken from `grid`.
PicardResult picard_solve(const SpdeProblem& problem, const TimeGrid& grid,
                          const PicardOptions& options);
/// Same loop on a given driver ensemble (its grid and path count are used).
PicardResult picard_solve(const SpdeProblem& problem, const DriverEnsemble& driver,
                          const PicardOptions& options);

/// As picard_solve, with the monotone stepper as S.
PicardResult picard_solve_monotone(const SpdeProblem& problem, const TimeGrid& grid,
                                   const PicardOptions& options);
PicardResult picard_solve_monotone(const SpdeProblem& problem, const DriverEnsemble& driver,
                                   const PicardOptions& options);

/// Dispatches to the monotone loop when the system carries a non-zero relation.
PicardResult solve_problem(const SpdeProblem& problem, const DriverEnsemble& driver,
                           const PicardOptions& options);

struct AutoNuOptions {
    double nu0 = 1.0;
    std::size_t max_doublings = 40;
    std::size_t gain_trials = 2;
    std::size_t power_steps = 8;
    std::size_t integral_trials = 4;
    std::size_t driver_paths = 128;
    std::uint64_t seed = 0xA070;
    std::size_t t_samples = 32;
    StepOptions step;
};

struct AutoNuResult {
    double nu = 0.0;
    std::size_t doublings = 0;
    double gain_s = 0.0;
    double gain_i = 0.0;
    double lipschitz = 0.0;
    double estimated_rho = 0.0;
    Assumption1Report assumption;
};

/// Doubles nu from nu0 until Assumption 1 holds and gain(S) * gain(I) * Lip(sigma)
/// <= target_rho. The grid's own nu is ignored. Throws NuSearchExhausted.
AutoNuResult auto_nu(const SpdeProblem& problem, const TimeGrid& grid, double target_rho,
                     const AutoNuOptions& options = {});

/// Runs the problem with its forcing and with `other` (or, when empty, the
/// forcing plus a unit bump after t_cut) on identical noise, and returns the
/// weighted distance of the solutions truncated at t_cut.
double causality_audit(const SpdeProblem& problem, const TimeGrid& grid,
                       const PicardOptions& options, double t_cut,
                       const Forcing& other = {});

/// Redraws every driver increment after t_cut and returns the truncated
/// distance of the two solutions; 0 for a predictable scheme.
double future_noise_audit(const SpdeProblem& problem, const TimeGrid& grid,
                          const PicardOptions& options, double t_cut,
                          std::uint64_t fresh_seed = 0xF00D);

}  // namespace sevo
