#pragma once

#include "sevo/weighted_time.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

namespace sevo {

/// Symmetric positive semidefinite covariance of a driver with values in G = R^dim.
class CovarianceSpec {
public:
    /// Throws InvalidCovariance unless Q is square, symmetric and has
    /// eigenvalues >= -1e-10.
    explicit CovarianceSpec(Eigen::MatrixXd q);

    static CovarianceSpec identity(std::size_t dim);

    std::size_t dim() const { return static_cast<std::size_t>(q_.rows()); }
    const Eigen::MatrixXd& matrix() const { return q_; }
    /// Square root S with S*S^T = Q (eigenvalue based, so singular Q is fine).
    const Eigen::MatrixXd& factor() const { return factor_; }

private:
    Eigen::MatrixXd q_;
    Eigen::MatrixXd factor_;
};

enum class DriverKind { wiener, compensated_poisson };

const char* to_string(DriverKind kind);

/// Seeded increments dX_k, k = 0..n_steps-1, of an L^2-primitive on every path.
///
/// dX_0 = 0 because the driver vanishes for t <= 0; dX_k for k >= 1 is the
/// increment over (t_{k-1}, t_k]. Path p draws from its own engine seeded by
/// path_seed(seed, p), so the increments do not depend on the worker count.
class DriverEnsemble {
public:
    const TimeGrid& grid() const { return grid_; }
    DriverKind kind() const { return kind_; }
    std::size_t dim() const { return dim_; }
    std::size_t n_paths() const { return n_paths_; }
    std::uint64_t seed() const { return seed_; }

    /// Covariance per unit time of the increments: Q for Wiener, rate*jump*jump^T
    /// for compensated Poisson. This is the density of the dominating measure.
    const Eigen::MatrixXd& dominating_covariance() const { return dominating_; }

    Eigen::Map<const Eigen::VectorXd> increment(std::size_t path, std::size_t k) const;

    /// Increments of one path as a dim x n_steps matrix.
    Eigen::Map<const Eigen::MatrixXd> path(std::size_t p) const;

    /// Copy whose increments with index > k are redrawn from `fresh_seed`.
    DriverEnsemble with_fresh_future(std::size_t k, std::uint64_t fresh_seed) const;

    /// Copy with the weight of the grid replaced.
    DriverEnsemble reweighted(double nu) const;

private:
    friend DriverEnsemble sample_wiener(const TimeGrid&, const CovarianceSpec&, std::size_t,
                                        std::uint64_t);
    friend DriverEnsemble sample_compensated_poisson(const TimeGrid&, double,
                                                     const Eigen::VectorXd&, std::size_t,
                                                     std::uint64_t);

    DriverEnsemble(const TimeGrid& grid, DriverKind kind, std::size_t dim, std::size_t n_paths,
                   std::uint64_t seed);
    void fill(std::size_t workers);

    TimeGrid grid_;
    DriverKind kind_;
    std::size_t dim_;
    std::size_t n_paths_;
    std::uint64_t seed_;
    Eigen::MatrixXd cov_factor_;
    double rate_ = 0.0;
    Eigen::VectorXd jump_;
    Eigen::MatrixXd dominating_;
    std::vector<double> increments_;
};

/// Centered Gaussian increments with covariance Q*dt.
DriverEnsemble sample_wiener(const TimeGrid& grid, const CovarianceSpec& cov,
                             std::size_t n_paths, std::uint64_t seed);

/// dX_k = jump * (N_k - rate*dt) with N_k ~ Poisson(rate*dt). Throws InvalidRate for rate < 0.
DriverEnsemble sample_compensated_poisson(const TimeGrid& grid, double rate,
                                          const Eigen::VectorXd& jump, std::size_t n_paths,
                                          std::uint64_t seed);

/// Per-path, per-step operator values Y_k : G -> H (Hilbert-Schmidt).
///
/// The stochastic integral uses Y_{j-1} against dX_j, so a process built
/// from information up to t_k is predictable by construction.
class OperatorProcess {
public:
    OperatorProcess(const TimeGrid& grid, std::size_t dim_h, std::size_t dim_g,
                    std::size_t n_paths);

    const TimeGrid& grid() const { return grid_; }
    std::size_t dim_h() const { return dim_h_; }
    std::size_t dim_g() const { return dim_g_; }
    std::size_t n_paths() const { return n_paths_; }
    static constexpr std::size_t adapted_index_shift = 1;

    Eigen::Map<Eigen::MatrixXd> at(std::size_t path, std::size_t k);
    Eigen::Map<const Eigen::MatrixXd> at(std::size_t path, std::size_t k) const;

private:
    TimeGrid grid_;
    std::size_t dim_h_;
    std::size_t dim_g_;
    std::size_t n_paths_;
    std::vector<double> data_;
};

/// Ensemble of sample paths of an H-valued signal sharing one grid.
class StochasticEnsemble {
public:
    StochasticEnsemble(const TimeGrid& grid, std::size_t dim, std::size_t n_paths,
                       std::uint64_t seed = 0);

    const TimeGrid& grid() const { return grid_; }
    std::size_t dim() const { return dim_; }
    std::size_t n_paths() const { return n_paths_; }
    std::uint64_t seed() const { return seed_; }

    /// dim x n_steps view of one path.
    Eigen::Map<Eigen::MatrixXd> path(std::size_t p);
    Eigen::Map<const Eigen::MatrixXd> path(std::size_t p) const;

    WeightedSignal path_signal(std::size_t p) const;

    std::vector<double>& raw() { return data_; }
    const std::vector<double>& raw() const { return data_; }

    StochasticEnsemble reweighted(double nu) const;

private:
    TimeGrid grid_;
    std::size_t dim_;
    std::size_t n_paths_;
    std::uint64_t seed_;
    std::vector<double> data_;
};

/// Root mean over paths of squared weighted norms: the discrete
/// L^2_nu(R; L^2(P; H)) norm.
double ensemble_norm(const StochasticEnsemble& u);

/// ensemble_norm(a - b) without materializing the difference.
double ensemble_distance(const StochasticEnsemble& a, const StochasticEnsemble& b);

/// Weighted ensemble norm of truncate(a - b, t).
double truncated_distance(const StochasticEnsemble& a, const StochasticEnsemble& b, double t);

/// trace(Y Q Y^T)
double hs_norm_squared(const Eigen::MatrixXd& y, const Eigen::MatrixXd& q);

/// (E sum_k |Y_k|^2_{HS(Q)} exp(-2 nu t_k) dt)^(1/2), Q the dominating covariance.
double alpha_norm(const OperatorProcess& y, const Eigen::MatrixXd& q);

/// (I Y)_k = sum_{j=1}^{k} Y_{j-1} dX_j on every path.
StochasticEnsemble ito_integrate(const OperatorProcess& y, const DriverEnsemble& x);

/// Relative Monte Carlo defect of the isometry at the final grid time:
/// |E|(I Y)_n|^2 - E sum_j |Y_{j-1}|^2_{HS(Q)} dt| / E sum_j |Y_{j-1}|^2_{HS(Q)} dt.
/// Throws DegenerateIntegrand when the reference is 0.
double ito_isometry_error(const OperatorProcess& y, const DriverEnsemble& x);

enum class SigmaKind { multiplicative, clamped };

/// Lipschitz noise coefficient sigma : H_src -> HS(G, H_target) with sigma(0) = 0.
///
/// multiplicative: sigma(u) = s * diag(u) * Phi
/// clamped:        sigma(u) = s * diag(clip(u, -c, c)) * Phi
class SigmaSpec {
public:
    static SigmaSpec multiplicative(double gain, Eigen::MatrixXd phi);
    static SigmaSpec clamped(double gain, double clamp, Eigen::MatrixXd phi);

    SigmaKind kind() const { return kind_; }
    double gain() const { return gain_; }
    double clamp() const { return clamp_; }
    const Eigen::MatrixXd& phi() const { return phi_; }
    std::size_t dim_h() const { return static_cast<std::size_t>(phi_.rows()); }
    std::size_t dim_g() const { return static_cast<std::size_t>(phi_.cols()); }
    bool is_zero() const { return gain_ == 0.0 || phi_.isZero(0.0); }

    Eigen::MatrixXd value(const Eigen::VectorXd& u) const;

    /// out += sigma(u) * dx, evaluated as s * g(u) .* (Phi dx). Columns are
    /// independent samples, so a whole batch of paths can be updated at once.
    void accumulate(const Eigen::Ref<const Eigen::MatrixXd>& u,
                    const Eigen::Ref<const Eigen::MatrixXd>& phi_dx,
                    Eigen::Ref<Eigen::MatrixXd> out) const;

    /// Lipschitz constant from H to HS(Q): s * sqrt(max_i (Phi Q Phi^T)_ii).
    double lipschitz(const Eigen::MatrixXd& q) const;

private:
    SigmaSpec(SigmaKind kind, double gain, double clamp, Eigen::MatrixXd phi);

    SigmaKind kind_;
    double gain_;
    double clamp_;
    Eigen::MatrixXd phi_;
};

/// Pointwise (sigma~ u)(path, k) = sigma(u_path(t_k)).
OperatorProcess nemytskii(const SigmaSpec& sigma, const StochasticEnsemble& u);

/// Largest observed ratio |I Y|_nu / |Y|_alpha over `trials` random
/// predictable integrands (Gaussian, independent of the driver).
double integral_gain(double nu, const DriverEnsemble& x, std::size_t trials,
                     std::uint64_t seed = 0x5EED, std::size_t dim_h = 1);

}  // namespace sevo
