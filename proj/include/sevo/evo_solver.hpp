#pragma once

#include "sevo/errors.hpp"
#include "sevo/monotone.hpp"
#include "sevo/spatial_ops.hpp"
#include "sevo/weighted_time.hpp"

#include <Eigen/Dense>
#include <Eigen/SparseLU>

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace sevo {

/// Time-dependent coefficient triple (M, N, M') acting on R^dim.
///
/// M must be symmetric; M' is its (weak) time derivative. Families built
/// with `constant` skip re-evaluation while stepping.
class OperatorFamily {
public:
    using Eval = std::function<SparseOperator(double)>;

    OperatorFamily(std::size_t dim, Eval m, Eval n, Eval m_prime, double lipschitz_m);

    static OperatorFamily constant(const SparseOperator& m, const SparseOperator& n);

    std::size_t dim() const { return dim_; }
    bool is_constant() const { return constant_; }
    double lipschitz_m() const { return lipschitz_m_; }

    SparseOperator m(double t) const { return m_(t); }
    SparseOperator n(double t) const { return n_(t); }
    SparseOperator m_prime(double t) const { return m_prime_(t); }

private:
    std::size_t dim_;
    Eval m_;
    Eval n_;
    Eval m_prime_;
    double lipschitz_m_;
    bool constant_ = false;
};

/// A maximal monotone relation acting on the contiguous block [offset, offset+size).
struct RelationPlacement {
    std::size_t offset = 0;
    std::size_t size = 0;
    MonotoneRelation relation = zero_relation();
};

/// Discrete counterpart of d_0 M + N + A (+ g on one block).
struct BlockSystem {
    OperatorFamily family;
    SparseOperator a;  ///< skew-symmetric spatial part
    std::optional<RelationPlacement> relation;
    double coercivity_c = 1.0;

    std::size_t dim() const { return family.dim(); }
};

/// Checks the structural invariants (shapes, symmetric M, skew A) and throws
/// ShapeMismatch / PreconditionViolation on failure.
void validate_system(const BlockSystem& system, double t_end, std::size_t t_samples = 8);

struct Assumption1Report {
    bool passes = false;
    double min_eig = 0.0;
    double t_at_min = 0.0;
    std::optional<double> failing_t;  ///< first sampled t below the claimed constant
    double claimed_c = 0.0;
    std::size_t samples = 0;
    std::string details;
};

/// Smallest eigenvalue of sym(nu M(t) + M'(t)/2 + N(t)) over t_samples
/// equispaced times in [0, t_end]; passes iff it is >= claimed c - 1e-10.
Assumption1Report assumption1_report(const BlockSystem& system, double nu, double t_end,
                                     std::size_t t_samples);

/// Smallest eigenvalue of the symmetric sparse matrix, exploiting block
/// structure (connected components of the sparsity graph).
double min_symmetric_eigenvalue(const SparseOperator& s);

/// LU factorization of one step matrix; dense below `dense_limit` unknowns.
class StepFactor {
public:
    explicit StepFactor(const SparseOperator& k, std::size_t dense_limit = 64);

    Eigen::MatrixXd solve(const Eigen::MatrixXd& b) const;
    Eigen::MatrixXd solve_transpose(const Eigen::MatrixXd& b) const;
    std::size_t dim() const { return dim_; }

private:
    /// Tiny systems (e.g. scalar SDEs batched over many paths) multiply by K^{-1}.
    static constexpr std::size_t kExplicitInverseLimit = 8;

    std::size_t dim_;
    Eigen::MatrixXd inverse_;
    std::unique_ptr<Eigen::PartialPivLU<Eigen::MatrixXd>> dense_;
    std::unique_ptr<Eigen::SparseLU<SparseOperator>> sparse_;
};

struct StepOptions {
    /// M_k (u_k - u_{k-1})/dt + M'_k u_k instead of (M_k u_k - M_{k-1} u_{k-1})/dt.
    bool expanded_form = false;
    double refactor_tol = 1e-14;
    double step_tol = 1e-10;
    std::size_t max_inner = 200;
    double damping = 0.5;
    std::size_t dense_limit = 64;
};

/// Implicit Euler stepper for (M_k/dt + N_k + A) u_k = r_k + (M_{k-1}/dt) u_{k-1}.
///
/// `prepare(k)` must be called for k = 0, 1, ... in order (or any order for
/// the adjoint); the factorization is reused while M and N stay unchanged.
class LinearStepper {
public:
    /// With factorize = false only the step matrix is assembled (used by
    /// MonotoneStepper, which eliminates the relation block itself).
    LinearStepper(const BlockSystem& system, double dt, StepOptions options = {},
                  bool factorize = true);

    void prepare(std::size_t k);

    /// Solves the step for every column of rhs (in place); prev holds u_{k-1}.
    /// `coupling_scale` multiplies the (M/dt) u_{k-1} term; 1 for the plain scheme.
    void step(Eigen::MatrixXd& rhs, const Eigen::MatrixXd* prev,
              double coupling_scale = 1.0) const;

    /// b <- K_k^{-T} b, the building block of the backward (adjoint) sweep.
    void transpose_solve(Eigen::MatrixXd& b) const;

    /// Matrix multiplying u_{k-1} in the right-hand side of step k (before 1/dt).
    const SparseOperator& coupling() const;

    std::size_t factorizations() const { return factorizations_; }
    /// Incremented whenever the step matrix is re-assembled.
    std::size_t assembly_version() const { return assemblies_; }
    double dt() const { return dt_; }
    const BlockSystem& system() const { return *system_; }
    const SparseOperator& step_matrix() const { return k_; }
    const SparseOperator& m_current() const { return m_; }

private:
    const BlockSystem* system_;
    double dt_;
    StepOptions options_;
    std::optional<std::size_t> prepared_;
    SparseOperator m_;
    SparseOperator m_prev_;
    SparseOperator n_;
    SparseOperator k_;
    SparseOperator k_m_;
    SparseOperator k_n_;
    bool factorize_;
    std::unique_ptr<StepFactor> factor_;
    std::size_t factorizations_ = 0;
    std::size_t assemblies_ = 0;
};

/// Per-step inclusion K x + (0, g(x_B)) contains b, solved on the relation block
/// by a Krasnosel'skii-Mann damped forward-backward iteration on the Schur
/// complement S_B. The rest of the state is eliminated exactly.
class InnerIterationDiverged : public Error {
public:
    InnerIterationDiverged(std::size_t step, std::vector<double> trace);
    std::size_t step() const { return step_; }
    const std::vector<double>& trace() const { return trace_; }

private:
    std::size_t step_;
    std::vector<double> trace_;
};

struct MonotoneStepStats {
    double residual = 0.0;
    std::size_t inner_iterations = 0;
};

class MonotoneStepper {
public:
    MonotoneStepper(const BlockSystem& system, double dt, StepOptions options = {});

    void prepare(std::size_t k);

    /// Solves one step for a single path. `x` holds the warm start on entry
    /// (only its relation block is used) and the solution on exit.
    MonotoneStepStats step(const Eigen::VectorXd& rhs, const Eigen::VectorXd* prev,
                           Eigen::VectorXd& x) const;

    /// Natural residual |x_B - T(x_B)| of a full state against the step data.
    double inclusion_residual(const Eigen::VectorXd& rhs, const Eigen::VectorXd* prev,
                              const Eigen::VectorXd& x) const;

    double lambda() const { return lambda_; }
    bool delegates_to_linear() const { return delegate_; }
    const LinearStepper& base() const { return base_; }

private:
    Eigen::VectorXd effective_rhs(const Eigen::VectorXd& rhs, const Eigen::VectorXd* prev) const;
    Eigen::VectorXd reduced_rhs(const Eigen::VectorXd& b) const;
    Eigen::VectorXd recover_rest(const Eigen::VectorXd& b, const Eigen::VectorXd& xb) const;
    Eigen::VectorXd forward_backward(const Eigen::VectorXd& xb, const Eigen::VectorXd& r) const;

    const BlockSystem* system_;
    StepOptions options_;
    bool delegate_;
    LinearStepper base_;
    std::size_t current_step_ = 0;
    std::size_t seen_version_ = 0;
    std::vector<Eigen::Index> rest_;
    Eigen::Index b_offset_ = 0;
    Eigen::Index b_size_ = 0;
    Eigen::MatrixXd k_rb_;
    Eigen::MatrixXd k_br_;
    std::unique_ptr<StepFactor> rr_factor_;
    Eigen::MatrixXd rr_inv_rb_;
    Eigen::MatrixXd schur_;
    double lambda_ = 0.0;
};

/// Causal solve of the linear system; rhs.dim() must equal the system dimension.
/// Throws PreconditionViolation when Assumption 1 fails at the rhs grid's nu.
WeightedSignal solve_linear(const BlockSystem& system, const WeightedSignal& rhs,
                            const StepOptions& options = {});

struct MonotoneSolveStats {
    double max_residual = 0.0;
    std::size_t max_inner = 0;
};

/// Causal solve with the relation placed in the system (zero relation when absent).
WeightedSignal solve_monotone(const BlockSystem& system, const WeightedSignal& rhs,
                              const StepOptions& options = {},
                              MonotoneSolveStats* stats = nullptr);

struct GainEstimate {
    double gain = 0.0;           ///< largest observed |S r|_nu / |r|_nu
    double bound = 0.0;          ///< 1 / coercivity_c
    double excess_per_dt = 0.0;  ///< max(0, gain - bound) / dt, the reported K
};

/// Weighted operator norm of the linear solution map on `grid`, estimated by
/// power iteration on S*S (the adjoint is the backward transposed sweep)
/// from `trials` random starts.
GainEstimate gain_estimate(const BlockSystem& system, const TimeGrid& grid, std::size_t trials,
                           std::uint64_t seed = 0x6A1D, std::size_t power_steps = 12,
                           const StepOptions& options = {});

}  // namespace sevo
