#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <functional>
#include <optional>

namespace sevo {

/// Uniform causal time axis t_k = k*dt, k = 0..n_steps-1, carrying the
/// exponential weight nu of the space the signals are measured in.
///
/// Signals on the grid vanish for k < 0 (zero history), so the finite
/// horizon n_steps*dt truncates the half line; the weight makes the
/// neglected tail of order exp(-2*nu*T).
class TimeGrid {
public:
    TimeGrid(double dt, std::size_t n_steps, double nu);

    double dt() const { return dt_; }
    std::size_t n_steps() const { return n_steps_; }
    double nu() const { return nu_; }
    double horizon() const { return dt_ * static_cast<double>(n_steps_); }
    double time(std::size_t k) const { return dt_ * static_cast<double>(k); }

    /// Left-endpoint quadrature weight exp(-2*nu*t_k)*dt.
    double weight(std::size_t k) const;

    /// Index of the last grid time t_k <= t; empty when t < 0.
    std::optional<std::size_t> last_index_at_or_before(double t) const;

    TimeGrid with_nu(double nu) const { return TimeGrid(dt_, n_steps_, nu); }

    /// Same sampling (dt, n_steps); the weight may differ.
    bool same_axis(const TimeGrid& other) const
    {
        return dt_ == other.dt_ && n_steps_ == other.n_steps_;
    }

private:
    double dt_;
    std::size_t n_steps_;
    double nu_;
};

/// Sampled signal with values in R^dim; column k holds u(t_k).
class WeightedSignal {
public:
    WeightedSignal(const TimeGrid& grid, std::size_t dim);
    WeightedSignal(const TimeGrid& grid, Eigen::MatrixXd values);

    const TimeGrid& grid() const { return grid_; }
    std::size_t dim() const { return static_cast<std::size_t>(values_.rows()); }
    std::size_t n_steps() const { return grid_.n_steps(); }

    const Eigen::MatrixXd& values() const { return values_; }
    Eigen::MatrixXd& values() { return values_; }

    auto at(std::size_t k) const { return values_.col(static_cast<Eigen::Index>(k)); }
    auto at(std::size_t k) { return values_.col(static_cast<Eigen::Index>(k)); }

    /// Same values measured with a different weight.
    WeightedSignal reweighted(double nu) const { return {grid_.with_nu(nu), values_}; }

private:
    TimeGrid grid_;
    Eigen::MatrixXd values_;
};

using SignalMap = std::function<WeightedSignal(const WeightedSignal&)>;

/// (sum_k |u_k|^2 exp(-2 nu t_k) dt)^(1/2)
double weighted_norm(const WeightedSignal& u);

/// Causal running integral (Ju)_k = dt * sum_{j<=k} u_j.
WeightedSignal integrate(const WeightedSignal& u);

/// Backward difference (Du)_k = (u_k - u_{k-1})/dt with u_{-1} = 0.
WeightedSignal differentiate(const WeightedSignal& u);

/// Keeps values at t_k <= t and zeroes the rest.
WeightedSignal truncate(const WeightedSignal& u, double t);

/// Weighted norm of truncate(F(u) - F(v), t); u and v must agree up to t.
/// Throws PreconditionViolation otherwise.
double causality_defect(const SignalMap& map, const WeightedSignal& u,
                        const WeightedSignal& v, double t);

/// Weighted operator norm of J on an infinite grid: dt / (1 - exp(-nu dt)).
double integral_norm_closed_form(double dt, double nu);

}  // namespace sevo
