#include "sevo/evo_solver.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>

namespace sevo {

namespace {

SparseOperator zero_operator(std::size_t dim)
{
    SparseOperator z(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
    z.makeCompressed();
    return z;
}

double max_abs_difference(const SparseOperator& a, const SparseOperator& b)
{
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        return std::numeric_limits<double>::infinity();
    }
    const SparseOperator d = a - b;
    double worst = 0.0;
    for (Eigen::Index c = 0; c < d.outerSize(); ++c) {
        for (SparseOperator::InnerIterator it(d, c); it; ++it) {
            worst = std::max(worst, std::abs(it.value()));
        }
    }
    return worst;
}

void check_square(const SparseOperator& op, std::size_t dim, const char* what)
{
    if (static_cast<std::size_t>(op.rows()) != dim || static_cast<std::size_t>(op.cols()) != dim) {
        throw ShapeMismatch(std::string(what) + " must be " + std::to_string(dim) + "x" +
                            std::to_string(dim));
    }
}

bool all_finite(const Eigen::MatrixXd& m)
{
    return m.allFinite();
}

std::string format_double(double v)
{
    char buffer[64];
    std::snprintf(buffer, sizeof buffer, "%.17g", v);
    return buffer;
}

void require_assumption1(const BlockSystem& system, const TimeGrid& grid)
{
    const std::size_t samples = std::clamp<std::size_t>(grid.n_steps(), 2, 32);
    const double t_end = grid.time(grid.n_steps() - 1);
    const Assumption1Report report = assumption1_report(system, grid.nu(), t_end, samples);
    if (!report.passes) {
        throw PreconditionViolation("assumption check fails at nu = " + format_double(grid.nu()) +
                                    ": " + report.details);
    }
}

}  // namespace

OperatorFamily::OperatorFamily(std::size_t dim, Eval m, Eval n, Eval m_prime, double lipschitz_m)
    : dim_(dim), m_(std::move(m)), n_(std::move(n)), m_prime_(std::move(m_prime)),
      lipschitz_m_(lipschitz_m)
{
    if (dim == 0) {
        throw ShapeMismatch("operator family needs a positive dimension");
    }
    if (!m_ || !n_ || !m_prime_) {
        throw PreconditionViolation("operator family needs M, N and M' evaluators");
    }
}

OperatorFamily OperatorFamily::constant(const SparseOperator& m, const SparseOperator& n)
{
    const auto dim = static_cast<std::size_t>(m.rows());
    check_square(m, dim, "M");
    check_square(n, dim, "N");
    const SparseOperator zero = zero_operator(dim);
    OperatorFamily family(
        dim, [m](double) { return m; }, [n](double) { return n; },
        [zero](double) { return zero; }, 0.0);
    family.constant_ = true;
    return family;
}

void validate_system(const BlockSystem& system, double t_end, std::size_t t_samples)
{
    const std::size_t dim = system.dim();
    check_square(system.a, dim, "A");
    if (max_skew_defect(system.a) != 0.0) {
        throw PreconditionViolation("spatial operator A is not skew-symmetric");
    }
    if (system.relation) {
        const auto& rel = *system.relation;
        if (rel.size == 0 || rel.offset + rel.size > dim) {
            throw ShapeMismatch("relation block lies outside the state");
        }
    }
    if (!(system.coercivity_c > 0.0)) {
        throw PreconditionViolation("claimed coercivity constant must be positive");
    }
    const std::size_t samples = std::max<std::size_t>(t_samples, 1);
    for (std::size_t i = 0; i < samples; ++i) {
        const double t = samples == 1 ? 0.0 : t_end * static_cast<double>(i) / (samples - 1);
        const SparseOperator m = system.family.m(t);
        check_square(m, dim, "M(t)");
        check_square(system.family.n(t), dim, "N(t)");
        check_square(system.family.m_prime(t), dim, "M'(t)");
        if (max_abs_difference(m, SparseOperator(m.transpose())) > 1e-10) {
            throw PreconditionViolation("M(t) is not symmetric at t = " + format_double(t));
        }
    }
}

double min_symmetric_eigenvalue(const SparseOperator& s)
{
    const auto n = static_cast<std::size_t>(s.rows());
    std::vector<std::size_t> parent(n);
    std::iota(parent.begin(), parent.end(), std::size_t{0});
    auto find = [&parent](std::size_t i) {
        while (parent[i] != i) {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        return i;
    };
    for (Eigen::Index c = 0; c < s.outerSize(); ++c) {
        for (SparseOperator::InnerIterator it(s, c); it; ++it) {
            if (it.value() != 0.0) {
                const std::size_t a = find(static_cast<std::size_t>(it.row()));
                const std::size_t b = find(static_cast<std::size_t>(it.col()));
                if (a != b) {
                    parent[std::max(a, b)] = std::min(a, b);
                }
            }
        }
    }
    std::vector<std::vector<std::size_t>> members(n);
    std::vector<std::size_t> slot(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t root = find(i);
        slot[i] = members[root].size();
        members[root].push_back(i);
    }
    const Eigen::VectorXd diag = s.diagonal();
    double lowest = std::numeric_limits<double>::infinity();
    for (std::size_t root = 0; root < n; ++root) {
        const auto& block = members[root];
        if (block.empty()) {
            continue;
        }
        if (block.size() == 1) {
            lowest = std::min(lowest, diag[static_cast<Eigen::Index>(block[0])]);
            continue;
        }
        if (block.size() > 4000) {
            throw PreconditionViolation("coupled block of size " + std::to_string(block.size()) +
                                        " is too large for the dense eigenvalue check");
        }
        const auto m = static_cast<Eigen::Index>(block.size());
        Eigen::MatrixXd dense = Eigen::MatrixXd::Zero(m, m);
        for (std::size_t local = 0; local < block.size(); ++local) {
            const auto col = static_cast<Eigen::Index>(block[local]);
            for (SparseOperator::InnerIterator it(s, col); it; ++it) {
                dense(static_cast<Eigen::Index>(slot[static_cast<std::size_t>(it.row())]),
                      static_cast<Eigen::Index>(local)) = it.value();
            }
        }
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(dense, Eigen::EigenvaluesOnly);
        lowest = std::min(lowest, eig.eigenvalues().minCoeff());
    }
    return lowest;
}

Assumption1Report assumption1_report(const BlockSystem& system, double nu, double t_end,
                                     std::size_t t_samples)
{
    if (t_samples < 2) {
        throw PreconditionViolation("assumption check needs at least 2 time samples");
    }
    Assumption1Report report;
    report.claimed_c = system.coercivity_c;
    report.samples = t_samples;
    report.min_eig = std::numeric_limits<double>::infinity();
    const double threshold = system.coercivity_c - 1e-10;
    for (std::size_t i = 0; i < t_samples; ++i) {
        const double t = t_end * static_cast<double>(i) / static_cast<double>(t_samples - 1);
        const SparseOperator op = nu * system.family.m(t) + 0.5 * system.family.m_prime(t) +
                                  system.family.n(t);
        const SparseOperator sym = 0.5 * (op + SparseOperator(op.transpose()));
        const double lowest = min_symmetric_eigenvalue(sym);
        if (lowest < report.min_eig) {
            report.min_eig = lowest;
            report.t_at_min = t;
        }
        if (!report.failing_t && lowest < threshold) {
            report.failing_t = t;
        }
    }
    report.passes = !report.failing_t.has_value();
    report.details = "min eigenvalue " + format_double(report.min_eig) + " at t = " +
                     format_double(report.t_at_min) + ", claimed c = " +
                     format_double(system.coercivity_c);
    if (report.failing_t) {
        report.details += ", first failing t = " + format_double(*report.failing_t);
    }
    return report;
}

StepFactor::StepFactor(const SparseOperator& k, std::size_t dense_limit)
    : dim_(static_cast<std::size_t>(k.rows()))
{
    if (dim_ <= dense_limit) {
        dense_ = std::make_unique<Eigen::PartialPivLU<Eigen::MatrixXd>>(Eigen::MatrixXd(k));
        const double det_scale = dense_->matrixLU().diagonal().cwiseAbs().minCoeff();
        if (!(det_scale > 0.0) || !std::isfinite(det_scale)) {
            throw StepSolveFailure("step matrix is singular");
        }
        if (dim_ <= kExplicitInverseLimit) {
            inverse_ = dense_->inverse();
        }
    } else {
        sparse_ = std::make_unique<Eigen::SparseLU<SparseOperator>>();
        SparseOperator copy = k;
        copy.makeCompressed();
        sparse_->compute(copy);
        if (sparse_->info() != Eigen::Success) {
            throw StepSolveFailure("sparse LU failed: " + sparse_->lastErrorMessage());
        }
    }
}

Eigen::MatrixXd StepFactor::solve(const Eigen::MatrixXd& b) const
{
    Eigen::MatrixXd x;
    if (inverse_.size() > 0) {
        x.noalias() = inverse_.lazyProduct(b);
    } else if (dense_) {
        x = dense_->solve(b);
    } else {
        x = sparse_->solve(b);
    }
    if (!all_finite(x)) {
        throw StepSolveFailure("step solve produced non-finite values");
    }
    return x;
}

Eigen::MatrixXd StepFactor::solve_transpose(const Eigen::MatrixXd& b) const
{
    Eigen::MatrixXd x = dense_ ? Eigen::MatrixXd(dense_->transpose().solve(b))
                               : Eigen::MatrixXd(sparse_->transpose().solve(b));
    if (!all_finite(x)) {
        throw StepSolveFailure("adjoint step solve produced non-finite values");
    }
    return x;
}

LinearStepper::LinearStepper(const BlockSystem& system, double dt, StepOptions options,
                             bool factorize)
    : system_(&system), dt_(dt), options_(options), factorize_(factorize)
{
    if (!(dt > 0.0)) {
        throw InvalidGrid("time step must be positive");
    }
    check_square(system.a, system.dim(), "A");
}

void LinearStepper::prepare(std::size_t k)
{
    const auto& family = system_->family;
    const double t = dt_ * static_cast<double>(k);
    if (family.is_constant() && prepared_) {
        m_prev_ = m_;
        prepared_ = k;
        return;
    }
    SparseOperator m = family.m(t);
    if (k == 0) {
        m_prev_ = zero_operator(system_->dim());
    } else if (prepared_ && *prepared_ + 1 == k) {
        m_prev_ = m_;
    } else {
        m_prev_ = family.m(t - dt_);
    }
    m_ = std::move(m);
    n_ = family.n(t);
    prepared_ = k;

    SparseOperator n_eff = n_;
    if (options_.expanded_form) {
        n_eff = n_eff + family.m_prime(t);
    }
    const bool unchanged = assemblies_ > 0 &&
                           max_abs_difference(m_, k_m_) <= options_.refactor_tol &&
                           max_abs_difference(n_eff, k_n_) <= options_.refactor_tol;
    if (unchanged) {
        return;
    }
    k_m_ = m_;
    k_n_ = n_eff;
    k_ = (1.0 / dt_) * m_ + n_eff + system_->a;
    k_.makeCompressed();
    ++assemblies_;
    if (factorize_) {
        factor_ = std::make_unique<StepFactor>(k_, options_.dense_limit);
        ++factorizations_;
    }
}

const SparseOperator& LinearStepper::coupling() const
{
    return options_.expanded_form ? m_ : m_prev_;
}

void LinearStepper::step(Eigen::MatrixXd& rhs, const Eigen::MatrixXd* prev,
                         double coupling_scale) const
{
    if (!factor_) {
        throw PreconditionViolation("stepper has no factorization; call prepare first");
    }
    if (prev != nullptr) {
        rhs += (coupling_scale / dt_) * (coupling() * *prev);
    }
    rhs = factor_->solve(rhs);
}

void LinearStepper::transpose_solve(Eigen::MatrixXd& b) const
{
    if (!factor_) {
        throw PreconditionViolation("stepper has no factorization; call prepare first");
    }
    b = factor_->solve_transpose(b);
}

InnerIterationDiverged::InnerIterationDiverged(std::size_t step, std::vector<double> trace)
    : Error("InnerIterationDiverged: inclusion not solved at step " + std::to_string(step) +
            " after " + std::to_string(trace.size()) + " iterations (last residual " +
            (trace.empty() ? std::string("n/a") : format_double(trace.back())) + ")"),
      step_(step), trace_(std::move(trace))
{}

MonotoneStepper::MonotoneStepper(const BlockSystem& system, double dt, StepOptions options)
    : system_(&system), options_(options),
      delegate_(!system.relation || system.relation->relation.is_zero()),
      base_(system, dt, options, delegate_)
{
    if (delegate_) {
        return;
    }
    const auto& rel = *system.relation;
    if (rel.size == 0 || rel.offset + rel.size > system.dim()) {
        throw ShapeMismatch("relation block lies outside the state");
    }
    b_offset_ = static_cast<Eigen::Index>(rel.offset);
    b_size_ = static_cast<Eigen::Index>(rel.size);
    for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(system.dim()); ++i) {
        if (i < b_offset_ || i >= b_offset_ + b_size_) {
            rest_.push_back(i);
        }
    }
}

void MonotoneStepper::prepare(std::size_t k)
{
    base_.prepare(k);
    current_step_ = k;
    if (delegate_ || base_.assembly_version() == seen_version_) {
        return;
    }
    seen_version_ = base_.assembly_version();

    const SparseOperator& kmat = base_.step_matrix();
    const auto n_rest = static_cast<Eigen::Index>(rest_.size());
    std::vector<Eigen::Index> rest_slot(system_->dim(), -1);
    for (Eigen::Index i = 0; i < n_rest; ++i) {
        rest_slot[static_cast<std::size_t>(rest_[static_cast<std::size_t>(i)])] = i;
    }
    std::vector<Eigen::Triplet<double>> rr;
    k_rb_ = Eigen::MatrixXd::Zero(n_rest, b_size_);
    k_br_ = Eigen::MatrixXd::Zero(b_size_, n_rest);
    Eigen::MatrixXd k_bb = Eigen::MatrixXd::Zero(b_size_, b_size_);
    for (Eigen::Index c = 0; c < kmat.outerSize(); ++c) {
        for (SparseOperator::InnerIterator it(kmat, c); it; ++it) {
            const Eigen::Index r = it.row();
            const Eigen::Index rs = rest_slot[static_cast<std::size_t>(r)];
            const Eigen::Index cs = rest_slot[static_cast<std::size_t>(c)];
            if (rs >= 0 && cs >= 0) {
                rr.emplace_back(rs, cs, it.value());
            } else if (rs >= 0) {
                k_rb_(rs, c - b_offset_) = it.value();
            } else if (cs >= 0) {
                k_br_(r - b_offset_, cs) = it.value();
            } else {
                k_bb(r - b_offset_, c - b_offset_) = it.value();
            }
        }
    }
    if (n_rest > 0) {
        SparseOperator k_rr(n_rest, n_rest);
        k_rr.setFromTriplets(rr.begin(), rr.end());
        rr_factor_ = std::make_unique<StepFactor>(k_rr, options_.dense_limit);
        rr_inv_rb_ = rr_factor_->solve(k_rb_);
        schur_ = k_bb - k_br_ * rr_inv_rb_;
    } else {
        rr_factor_.reset();
        rr_inv_rb_.resize(0, b_size_);
        schur_ = k_bb;
    }
    const Eigen::MatrixXd sym = 0.5 * (schur_ + schur_.transpose());
    const double m = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(sym, Eigen::EigenvaluesOnly)
                         .eigenvalues()
                         .minCoeff();
    if (!(m > 0.0)) {
        throw StepSolveFailure("reduced step operator on the relation block is not strongly "
                               "monotone (min symmetric eigenvalue " +
                               format_double(m) + ")");
    }
    const double lip = Eigen::JacobiSVD<Eigen::MatrixXd>(schur_).singularValues()(0);
    // m / L^2 always makes I - lambda S a contraction; a log-spaced scan up to 2 / m
    // usually finds a much better step for well-conditioned symmetric parts.
    lambda_ = m / (lip * lip);
    const Eigen::MatrixXd identity = Eigen::MatrixXd::Identity(b_size_, b_size_);
    auto contraction = [&](double lambda) {
        return Eigen::JacobiSVD<Eigen::MatrixXd>(identity - lambda * schur_).singularValues()(0);
    };
    double best = contraction(lambda_);
    const double lo = std::log(lambda_);
    const double hi = std::log(2.0 / m);
    constexpr int kScan = 24;
    for (int i = 1; i <= kScan && hi > lo; ++i) {
        const double lambda = std::exp(lo + (hi - lo) * i / kScan);
        const double q = contraction(lambda);
        if (q < best) {
            best = q;
            lambda_ = lambda;
        }
    }
}

Eigen::VectorXd MonotoneStepper::effective_rhs(const Eigen::VectorXd& rhs,
                                               const Eigen::VectorXd* prev) const
{
    Eigen::VectorXd b = rhs;
    if (prev != nullptr) {
        b += (1.0 / base_.dt()) * (base_.coupling() * *prev);
    }
    return b;
}

Eigen::VectorXd MonotoneStepper::reduced_rhs(const Eigen::VectorXd& b) const
{
    Eigen::VectorXd r = b.segment(b_offset_, b_size_);
    if (rr_factor_) {
        Eigen::VectorXd b_rest(static_cast<Eigen::Index>(rest_.size()));
        for (std::size_t i = 0; i < rest_.size(); ++i) {
            b_rest[static_cast<Eigen::Index>(i)] = b[rest_[i]];
        }
        r -= k_br_ * rr_factor_->solve(b_rest);
    }
    return r;
}

Eigen::VectorXd MonotoneStepper::recover_rest(const Eigen::VectorXd& b,
                                              const Eigen::VectorXd& xb) const
{
    Eigen::VectorXd x(b.size());
    x.segment(b_offset_, b_size_) = xb;
    if (rr_factor_) {
        Eigen::VectorXd b_rest(static_cast<Eigen::Index>(rest_.size()));
        for (std::size_t i = 0; i < rest_.size(); ++i) {
            b_rest[static_cast<Eigen::Index>(i)] = b[rest_[i]];
        }
        const Eigen::VectorXd x_rest = rr_factor_->solve(b_rest - k_rb_ * xb);
        for (std::size_t i = 0; i < rest_.size(); ++i) {
            x[rest_[i]] = x_rest[static_cast<Eigen::Index>(i)];
        }
    }
    return x;
}

Eigen::VectorXd MonotoneStepper::forward_backward(const Eigen::VectorXd& xb,
                                                  const Eigen::VectorXd& r) const
{
    return system_->relation->relation.resolve(lambda_, xb - lambda_ * (schur_ * xb - r));
}

MonotoneStepStats MonotoneStepper::step(const Eigen::VectorXd& rhs, const Eigen::VectorXd* prev,
                                        Eigen::VectorXd& x) const
{
    if (delegate_) {
        Eigen::MatrixXd b = rhs;
        if (prev != nullptr) {
            const Eigen::MatrixXd p = *prev;
            base_.step(b, &p);
        } else {
            base_.step(b, nullptr);
        }
        x = b.col(0);
        return {};
    }
    const Eigen::VectorXd b = effective_rhs(rhs, prev);
    const Eigen::VectorXd r = reduced_rhs(b);
    Eigen::VectorXd xb = x.size() == b.size() ? Eigen::VectorXd(x.segment(b_offset_, b_size_))
                                              : Eigen::VectorXd::Zero(b_size_);
    std::vector<double> trace;
    for (std::size_t it = 0; it <= options_.max_inner; ++it) {
        const Eigen::VectorXd tx = forward_backward(xb, r);
        const double residual = (xb - tx).norm();
        trace.push_back(residual);
        if (residual <= options_.step_tol) {
            // The resolvent output lies in the domain of g (exact zeros for shrinkage).
            x = recover_rest(b, tx);
            return {residual, it};
        }
        if (!std::isfinite(residual)) {
            break;
        }
        xb = (1.0 - options_.damping) * xb + options_.damping * tx;
    }
    throw InnerIterationDiverged(current_step_, std::move(trace));
}

double MonotoneStepper::inclusion_residual(const Eigen::VectorXd& rhs,
                                           const Eigen::VectorXd* prev,
                                           const Eigen::VectorXd& x) const
{
    if (delegate_) {
        Eigen::MatrixXd b = rhs;
        if (prev != nullptr) {
            const Eigen::MatrixXd p = *prev;
            base_.step(b, &p);
        } else {
            base_.step(b, nullptr);
        }
        return (b.col(0) - x).norm();
    }
    const Eigen::VectorXd b = effective_rhs(rhs, prev);
    const Eigen::VectorXd xb = x.segment(b_offset_, b_size_);
    return (xb - forward_backward(xb, reduced_rhs(b))).norm();
}

WeightedSignal solve_linear(const BlockSystem& system, const WeightedSignal& rhs,
                            const StepOptions& options)
{
    if (rhs.dim() != system.dim()) {
        throw ShapeMismatch("rhs dimension " + std::to_string(rhs.dim()) +
                            " does not match the system dimension " +
                            std::to_string(system.dim()));
    }
    const TimeGrid& grid = rhs.grid();
    require_assumption1(system, grid);
    LinearStepper stepper(system, grid.dt(), options);
    WeightedSignal u(grid, system.dim());
    Eigen::MatrixXd prev;
    for (std::size_t k = 0; k < grid.n_steps(); ++k) {
        stepper.prepare(k);
        Eigen::MatrixXd col = rhs.at(k);
        stepper.step(col, k == 0 ? nullptr : &prev);
        u.at(k) = col;
        prev = std::move(col);
    }
    return u;
}

WeightedSignal solve_monotone(const BlockSystem& system, const WeightedSignal& rhs,
                              const StepOptions& options, MonotoneSolveStats* stats)
{
    if (rhs.dim() != system.dim()) {
        throw ShapeMismatch("rhs dimension does not match the system dimension");
    }
    const TimeGrid& grid = rhs.grid();
    require_assumption1(system, grid);
    MonotoneStepper stepper(system, grid.dt(), options);
    WeightedSignal u(grid, system.dim());
    Eigen::VectorXd x = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(system.dim()));
    Eigen::VectorXd prev;
    MonotoneSolveStats local;
    for (std::size_t k = 0; k < grid.n_steps(); ++k) {
        stepper.prepare(k);
        const Eigen::VectorXd col = rhs.at(k);
        const MonotoneStepStats s = stepper.step(col, k == 0 ? nullptr : &prev, x);
        local.max_residual = std::max(local.max_residual, s.residual);
        local.max_inner = std::max(local.max_inner, s.inner_iterations);
        u.at(k) = x;
        prev = x;
    }
    if (stats != nullptr) {
        *stats = local;
    }
    return u;
}

GainEstimate gain_estimate(const BlockSystem& system, const TimeGrid& grid, std::size_t trials,
                           std::uint64_t seed, std::size_t power_steps,
                           const StepOptions& options)
{
    if (trials == 0) {
        throw PreconditionViolation("gain estimate needs at least one trial");
    }
    const std::size_t n = grid.n_steps();
    const auto dim = static_cast<Eigen::Index>(system.dim());
    // Work with e^{-nu t_k} u_k so the weighted norm becomes Euclidean and the
    // weights never overflow; the coupling term picks up e^{-nu dt}.
    const double decay = std::exp(-grid.nu() * grid.dt());
    LinearStepper stepper(system, grid.dt(), options);

    auto forward = [&](const Eigen::MatrixXd& r) {
        Eigen::MatrixXd u(dim, static_cast<Eigen::Index>(n));
        Eigen::MatrixXd prev;
        for (std::size_t k = 0; k < n; ++k) {
            stepper.prepare(k);
            Eigen::MatrixXd col = r.col(static_cast<Eigen::Index>(k));
            stepper.step(col, k == 0 ? nullptr : &prev, decay);
            u.col(static_cast<Eigen::Index>(k)) = col;
            prev = std::move(col);
        }
        return u;
    };
    // Transposed sweep: K_k^T v_k = y_k + e^{-nu dt} C_{k+1}^T v_{k+1}, where C_{k+1}
    // is the matrix coupling step k+1 to u_k.
    auto adjoint = [&](const Eigen::MatrixXd& y) {
        Eigen::MatrixXd v(dim, static_cast<Eigen::Index>(n));
        Eigen::VectorXd carry = Eigen::VectorXd::Zero(dim);
        for (std::size_t kk = n; kk-- > 0;) {
            stepper.prepare(kk);
            Eigen::MatrixXd col = y.col(static_cast<Eigen::Index>(kk)) + carry;
            stepper.transpose_solve(col);
            v.col(static_cast<Eigen::Index>(kk)) = col;
            if (kk > 0) {
                carry = (decay / grid.dt()) *
                        (SparseOperator(stepper.coupling().transpose()) * col.col(0));
            }
        }
        return v;
    };

    std::mt19937_64 engine(seed);
    std::normal_distribution<double> normal;
    double best = 0.0;
    for (std::size_t trial = 0; trial < trials; ++trial) {
        Eigen::MatrixXd r(dim, static_cast<Eigen::Index>(n));
        for (Eigen::Index j = 0; j < r.cols(); ++j) {
            for (Eigen::Index i = 0; i < r.rows(); ++i) {
                r(i, j) = normal(engine);
            }
        }
        r /= r.norm();
        for (std::size_t it = 0; it <= power_steps; ++it) {
            const Eigen::MatrixXd u = forward(r);
            best = std::max(best, u.norm());
            if (it == power_steps) {
                break;
            }
            r = adjoint(u);
            const double norm = r.norm();
            if (!(norm > 0.0)) {
                break;
            }
            r /= norm;
        }
    }
    GainEstimate out;
    out.gain = best;
    out.bound = 1.0 / system.coercivity_c;
    out.excess_per_dt = std::max(0.0, best - out.bound) / grid.dt();
    return out;
}

}  // namespace sevo
