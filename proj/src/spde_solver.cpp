#include "sevo/spde_solver.hpp"

#include "sevo/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <random>
#include <sstream>

namespace sevo {

namespace {

constexpr std::size_t kChunk = 64;

std::string fmt(double v)
{
    char buffer[64];
    std::snprintf(buffer, sizeof buffer, "%.17g", v);
    return buffer;
}

std::string join(const std::vector<double>& values)
{
    std::string out;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i > 0) {
            out += ',';
        }
        out += fmt(values[i]);
    }
    return out;
}

PicardReport make_report(const SpdeProblem& problem, const TimeGrid& grid,
                         const PicardOptions& options, std::size_t n_paths, std::uint64_t seed)
{
    PicardReport report;
    report.model = problem.model;
    report.nu = grid.nu();
    report.tol = options.tol;
    report.n_paths = n_paths;
    report.seed = seed;
    return report;
}

void require_assumption(const SpdeProblem& problem, const TimeGrid& grid)
{
    const std::size_t samples = std::clamp<std::size_t>(grid.n_steps(), 2, 32);
    const Assumption1Report a1 = assumption1_report(problem.system, grid.nu(),
                                                    grid.time(grid.n_steps() - 1), samples);
    if (!a1.passes) {
        throw PreconditionViolation("assumption check fails at nu = " + fmt(grid.nu()) + ": " +
                                    a1.details);
    }
}

/// Linear steps batch the paths of one chunk into a multi-column solve; the
/// monotone variant solves path by path with warm starts.
template <bool Monotone>
PicardResult picard_loop(const SpdeProblem& problem, const DriverEnsemble& driver,
                         const PicardOptions& options)
{
    validate_problem(problem);
    const TimeGrid& grid = driver.grid();
    require_assumption(problem, grid);
    const std::size_t n_paths = driver.n_paths();
    const std::size_t n_steps = grid.n_steps();
    const std::size_t dim = problem.system.dim();
    const auto idim = static_cast<Eigen::Index>(dim);
    const NoiseSpec& noise = problem.noise;
    const bool noisy = noise.active();
    if (noisy && driver.dim() != noise.dim_g()) {
        throw ShapeMismatch("driver dimension does not match the noise coefficient");
    }
    const std::size_t dim_h = noise.sigma ? noise.sigma->dim_h() : 0;
    const auto src = static_cast<Eigen::Index>(noise.source_offset);
    const auto tgt = static_cast<Eigen::Index>(noise.target_offset);
    const auto hdim = static_cast<Eigen::Index>(dim_h);

    const WeightedSignal rhs = sample_rhs(problem, grid);
    StochasticEnsemble u(grid, dim, n_paths, driver.seed());
    if (options.random_start) {
        for (std::size_t p = 0; p < n_paths; ++p) {
            std::mt19937_64 engine(path_seed(options.start_seed, p));
            std::normal_distribution<double> normal;
            auto path = u.path(p);
            for (Eigen::Index k = 0; k < path.cols(); ++k) {
                for (Eigen::Index i = 0; i < path.rows(); ++i) {
                    path(i, k) = normal(engine);
                }
            }
        }
    }

    PicardReport report = make_report(problem, grid, options, n_paths, driver.seed());
    using Stepper = std::conditional_t<Monotone, MonotoneStepper, LinearStepper>;
    Stepper stepper(problem.system, grid.dt(), options.step);

    const std::size_t n_chunks = (n_paths + kChunk - 1) / kChunk;
    const auto gdim = static_cast<Eigen::Index>(noisy ? noise.dim_g() : 0);
    double* const state = u.raw().data();
    auto column = [state, n_steps, dim](std::size_t p, std::size_t k) {
        return state + (p * n_steps + k) * dim;
    };
    std::vector<double> ito(n_paths * dim_h, 0.0);
    std::vector<double> old_source(n_paths * dim_h, 0.0);
    std::vector<double> diff2(n_paths, 0.0);
    std::vector<double> chunk_residual(n_chunks, 0.0);
    std::vector<std::size_t> chunk_inner(n_chunks, 0);
    const std::size_t limit = options.fixed_iterations.value_or(noisy ? options.max_iter : 1);
    std::size_t above_one = 0;

    for (std::size_t m = 1; m <= limit; ++m) {
        std::fill(ito.begin(), ito.end(), 0.0);
        std::fill(diff2.begin(), diff2.end(), 0.0);
        for (std::size_t k = 0; k < n_steps; ++k) {
            stepper.prepare(k);
            const double weight = grid.weight(k);
            auto chunk_task = [&](std::size_t c) {
                const std::size_t first = c * kChunk;
                const std::size_t count = std::min(kChunk, n_paths - first);
                const auto cols = static_cast<Eigen::Index>(count);
                Eigen::MatrixXd batch = rhs.at(k).replicate(1, cols);
                Eigen::MatrixXd prev;
                if (k > 0) {
                    prev.resize(idim, cols);
                    for (std::size_t j = 0; j < count; ++j) {
                        std::copy_n(column(first + j, k - 1), dim,
                                    prev.col(static_cast<Eigen::Index>(j)).data());
                    }
                }
                if (noisy) {
                    Eigen::Map<Eigen::MatrixXd> acc(ito.data() + first * dim_h, hdim, cols);
                    if (k > 0) {
                        Eigen::MatrixXd dx(gdim, cols);
                        for (std::size_t j = 0; j < count; ++j) {
                            dx.col(static_cast<Eigen::Index>(j)) = driver.increment(first + j, k);
                        }
                        const Eigen::Map<const Eigen::MatrixXd> old(
                            old_source.data() + first * dim_h, hdim, cols);
                        noise.sigma->accumulate(old, noise.sigma->phi() * dx, acc);
                    }
                    batch.middleRows(tgt, hdim) += acc;
                }
                if constexpr (Monotone) {
                    for (std::size_t j = 0; j < count; ++j) {
                        const auto jj = static_cast<Eigen::Index>(j);
                        Eigen::VectorXd x =
                            Eigen::Map<const Eigen::VectorXd>(column(first + j, k), idim);
                        const Eigen::VectorXd b = batch.col(jj);
                        const Eigen::VectorXd pv = k > 0 ? Eigen::VectorXd(prev.col(jj))
                                                         : Eigen::VectorXd();
                        const MonotoneStepStats s = stepper.step(b, k > 0 ? &pv : nullptr, x);
                        chunk_residual[c] = std::max(chunk_residual[c], s.residual);
                        chunk_inner[c] = std::max(chunk_inner[c], s.inner_iterations);
                        batch.col(jj) = x;
                    }
                } else {
                    stepper.step(batch, k > 0 ? &prev : nullptr);
                }
                for (std::size_t j = 0; j < count; ++j) {
                    const std::size_t p = first + j;
                    Eigen::Map<Eigen::VectorXd> slot(column(p, k), idim);
                    const auto fresh = batch.col(static_cast<Eigen::Index>(j));
                    diff2[p] += weight * (fresh - slot).squaredNorm();
                    if (noisy) {
                        std::copy_n(slot.data() + src, dim_h, old_source.data() + p * dim_h);
                    }
                    slot = fresh;
                }
            };
            parallel_for(n_chunks, options.workers, chunk_task);
        }

        double total = 0.0;
        for (double v : diff2) {
            total += v;
        }
        const double d = std::sqrt(total / static_cast<double>(n_paths));
        report.differences.push_back(d);
        report.iterations = m;
        if (m >= 2) {
            const double before = report.differences[m - 2];
            const double rho = before > 0.0 ? d / before : 0.0;
            report.rho.push_back(rho);
            report.observed_rho = std::max(report.observed_rho, rho);
            above_one = rho >= 1.0 ? above_one + 1 : 0;
        }
        report.converged = !noisy || d <= options.tol;
        if (options.fixed_iterations) {
            continue;
        }
        if (report.converged) {
            break;
        }
        if (above_one >= 3) {
            for (std::size_t c = 0; c < n_chunks; ++c) {
                report.max_inclusion_residual =
                    std::max(report.max_inclusion_residual, chunk_residual[c]);
            }
            throw NotContracting(report);
        }
    }
    for (std::size_t c = 0; c < n_chunks; ++c) {
        report.max_inclusion_residual = std::max(report.max_inclusion_residual, chunk_residual[c]);
        report.max_inner_iterations = std::max(report.max_inner_iterations, chunk_inner[c]);
    }
    if (!report.converged && !options.fixed_iterations) {
        throw MaxIterExceeded(report);
    }
    return {std::move(u), std::move(report)};
}

}  // namespace

std::size_t NoiseSpec::dim_g() const
{
    if (sigma) {
        return sigma->dim_g();
    }
    return driver == DriverKind::wiener ? static_cast<std::size_t>(q.rows())
                                        : static_cast<std::size_t>(jump.size());
}

DriverEnsemble sample_driver(const NoiseSpec& noise, const TimeGrid& grid, std::size_t n_paths,
                             std::uint64_t seed)
{
    if (noise.driver == DriverKind::wiener) {
        if (noise.q.size() == 0) {
            return sample_wiener(grid, CovarianceSpec::identity(std::max<std::size_t>(1, noise.dim_g())),
                                 n_paths, seed);
        }
        return sample_wiener(grid, CovarianceSpec(noise.q), n_paths, seed);
    }
    return sample_compensated_poisson(grid, noise.rate, noise.jump, n_paths, seed);
}

void validate_problem(const SpdeProblem& problem)
{
    const std::size_t dim = problem.system.dim();
    const NoiseSpec& noise = problem.noise;
    if (!noise.sigma) {
        return;
    }
    const std::size_t h = noise.sigma->dim_h();
    if (noise.source_offset + h > dim || noise.target_offset + h > dim) {
        throw ShapeMismatch("noise source/target block lies outside the state");
    }
    if (noise.driver == DriverKind::wiener && noise.q.size() != 0 &&
        static_cast<std::size_t>(noise.q.rows()) != noise.sigma->dim_g()) {
        throw ShapeMismatch("covariance dimension does not match the noise coefficient");
    }
    if (noise.driver == DriverKind::compensated_poisson &&
        static_cast<std::size_t>(noise.jump.size()) != noise.sigma->dim_g()) {
        throw ShapeMismatch("jump vector dimension does not match the noise coefficient");
    }
}

WeightedSignal sample_rhs(const SpdeProblem& problem, const TimeGrid& grid)
{
    WeightedSignal f(grid, problem.system.dim());
    if (problem.forcing) {
        Eigen::VectorXd value(static_cast<Eigen::Index>(problem.system.dim()));
        for (std::size_t k = 0; k < grid.n_steps(); ++k) {
            value.setZero();
            problem.forcing(grid.time(k), value);
            f.at(k) = value;
        }
    }
    return problem.preprocess == RhsPreprocess::apply_j ? integrate(f) : f;
}

std::string PicardReport::to_key_value() const
{
    std::ostringstream os;
    os << "model = " << model << '\n';
    os << "nu = " << fmt(nu) << '\n';
    os << "iterations = " << iterations << '\n';
    os << "converged = " << (converged ? "true" : "false") << '\n';
    os << "tol = " << fmt(tol) << '\n';
    os << "n_paths = " << n_paths << '\n';
    os << "seed = " << seed << '\n';
    os << "observed_rho = " << fmt(observed_rho) << '\n';
    os << "differences = " << join(differences) << '\n';
    os << "rho = " << join(rho) << '\n';
    os << "max_inclusion_residual = " << fmt(max_inclusion_residual) << '\n';
    os << "max_inner_iterations = " << max_inner_iterations << '\n';
    return os.str();
}

NotContracting::NotContracting(PicardReport report)
    : Error("NotContracting: contraction factor >= 1 for 3 consecutive iterations at nu = " +
            fmt(report.nu) + "; raise nu"),
      report_(std::move(report))
{}

MaxIterExceeded::MaxIterExceeded(PicardReport report)
    : Error("MaxIterExceeded: no convergence after " + std::to_string(report.iterations) +
            " iterations (last difference " +
            (report.differences.empty() ? std::string("n/a") : fmt(report.differences.back())) +
            ")"),
      report_(std::move(report))
{}

PicardResult picard_solve(const SpdeProblem& problem, const TimeGrid& grid,
                          const PicardOptions& options)
{
    return picard_solve(problem, sample_driver(problem.noise, grid, options.n_paths, options.seed),
                        options);
}

PicardResult picard_solve(const SpdeProblem& problem, const DriverEnsemble& driver,
                          const PicardOptions& options)
{
    return picard_loop<false>(problem, driver, options);
}

PicardResult picard_solve_monotone(const SpdeProblem& problem, const TimeGrid& grid,
                                   const PicardOptions& options)
{
    return picard_solve_monotone(
        problem, sample_driver(problem.noise, grid, options.n_paths, options.seed), options);
}

PicardResult picard_solve_monotone(const SpdeProblem& problem, const DriverEnsemble& driver,
                                   const PicardOptions& options)
{
    return picard_loop<true>(problem, driver, options);
}

PicardResult solve_problem(const SpdeProblem& problem, const DriverEnsemble& driver,
                           const PicardOptions& options)
{
    const auto& rel = problem.system.relation;
    if (rel && !rel->relation.is_zero()) {
        return picard_solve_monotone(problem, driver, options);
    }
    return picard_solve(problem, driver, options);
}

AutoNuResult auto_nu(const SpdeProblem& problem, const TimeGrid& grid, double target_rho,
                     const AutoNuOptions& options)
{
    if (!(target_rho > 0.0 && target_rho < 1.0)) {
        throw PreconditionViolation("target contraction factor must lie in (0, 1)");
    }
    validate_problem(problem);
    const double t_end = grid.time(grid.n_steps() - 1);
    const bool noisy = problem.noise.active();
    std::optional<DriverEnsemble> driver;
    double lipschitz = 0.0;
    if (noisy) {
        driver = sample_driver(problem.noise, grid, options.driver_paths, options.seed);
        lipschitz = problem.noise.sigma->lipschitz(driver->dominating_covariance());
    }
    double nu = options.nu0;
    std::string last;
    for (std::size_t doubling = 0; doubling <= options.max_doublings; ++doubling, nu *= 2.0) {
        AutoNuResult result;
        result.nu = nu;
        result.doublings = doubling;
        result.lipschitz = lipschitz;
        result.assumption = assumption1_report(problem.system, nu, t_end, options.t_samples);
        if (!result.assumption.passes) {
            last = result.assumption.details;
            continue;
        }
        if (!noisy) {
            return result;
        }
        result.gain_s = gain_estimate(problem.system, grid.with_nu(nu), options.gain_trials,
                                      options.seed, options.power_steps, options.step)
                            .gain;
        result.gain_i = integral_gain(nu, *driver, options.integral_trials, options.seed);
        result.estimated_rho = result.gain_s * result.gain_i * lipschitz;
        if (result.estimated_rho <= target_rho) {
            return result;
        }
        last = "estimated contraction " + fmt(result.estimated_rho);
    }
    throw NuSearchExhausted("no admissible nu after " + std::to_string(options.max_doublings) +
                            " doublings from " + fmt(options.nu0) + " (last: " + last + ")");
}

double causality_audit(const SpdeProblem& problem, const TimeGrid& grid,
                       const PicardOptions& options, double t_cut, const Forcing& other)
{
    const DriverEnsemble driver = sample_driver(problem.noise, grid, options.n_paths, options.seed);
    const PicardResult first = solve_problem(problem, driver, options);

    SpdeProblem second = problem;
    if (other) {
        second.forcing = other;
    } else {
        const Forcing base = problem.forcing;
        second.forcing = [base, t_cut](double t, Eigen::Ref<Eigen::VectorXd> out) {
            if (base) {
                base(t, out);
            }
            if (t > t_cut) {
                out.array() += 1.0;
            }
        };
    }
    PicardOptions fixed = options;
    fixed.fixed_iterations = first.report.iterations;
    const PicardResult again = solve_problem(second, driver, fixed);
    return truncated_distance(first.solution, again.solution, t_cut);
}

double future_noise_audit(const SpdeProblem& problem, const TimeGrid& grid,
                          const PicardOptions& options, double t_cut, std::uint64_t fresh_seed)
{
    const DriverEnsemble driver = sample_driver(problem.noise, grid, options.n_paths, options.seed);
    const PicardResult first = solve_problem(problem, driver, options);
    const auto cut = grid.last_index_at_or_before(t_cut);
    if (!cut) {
        return 0.0;
    }
    PicardOptions fixed = options;
    fixed.fixed_iterations = first.report.iterations;
    const PicardResult again =
        solve_problem(problem, driver.with_fresh_future(*cut, fresh_seed), fixed);
    return truncated_distance(first.solution, again.solution, t_cut);
}

}  // namespace sevo
