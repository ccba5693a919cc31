#include "sevo/stochastic.hpp"

#include "sevo/errors.hpp"
#include "sevo/parallel.hpp"
#include "sevo/rng.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <random>
#include <string>

namespace sevo {

namespace {

Eigen::Index idx(std::size_t n) { return static_cast<Eigen::Index>(n); }

}  // namespace

CovarianceSpec::CovarianceSpec(Eigen::MatrixXd q) : q_(std::move(q))
{
    if (q_.rows() == 0 || q_.rows() != q_.cols()) {
        throw InvalidCovariance("covariance must be a non-empty square matrix");
    }
    if (!q_.allFinite()) {
        throw InvalidCovariance("covariance has non-finite entries");
    }
    if ((q_ - q_.transpose()).cwiseAbs().maxCoeff() > 1e-10) {
        throw InvalidCovariance("covariance is not symmetric");
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(q_);
    if (eig.eigenvalues().minCoeff() < -1e-10) {
        throw InvalidCovariance("covariance has negative eigenvalue " +
                                std::to_string(eig.eigenvalues().minCoeff()));
    }
    const Eigen::VectorXd root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    factor_ = eig.eigenvectors() * root.asDiagonal();
    // Exact zeros for Q = 0 keep the increments exactly zero.
    if (q_.isZero(0.0)) {
        factor_.setZero();
    }
}

CovarianceSpec CovarianceSpec::identity(std::size_t dim)
{
    return CovarianceSpec(Eigen::MatrixXd::Identity(idx(dim), idx(dim)));
}

const char* to_string(DriverKind kind)
{
    switch (kind) {
    case DriverKind::wiener:
        return "wiener";
    case DriverKind::compensated_poisson:
        return "compensated_poisson";
    }
    return "unknown";
}

DriverEnsemble::DriverEnsemble(const TimeGrid& grid, DriverKind kind, std::size_t dim,
                               std::size_t n_paths, std::uint64_t seed)
    : grid_(grid), kind_(kind), dim_(dim), n_paths_(n_paths), seed_(seed)
{
    if (n_paths == 0) {
        throw PreconditionViolation("driver ensemble needs at least one path");
    }
    increments_.assign(n_paths * grid.n_steps() * dim, 0.0);
}

void DriverEnsemble::fill(std::size_t workers)
{
    const std::size_t n_steps = grid_.n_steps();
    const double dt = grid_.dt();
    const double sqrt_dt = std::sqrt(dt);
    parallel_for(n_paths_, workers, [&](std::size_t p) {
        std::mt19937_64 engine(path_seed(seed_, p));
        double* base = increments_.data() + p * n_steps * dim_;
        if (kind_ == DriverKind::wiener) {
            std::normal_distribution<double> normal(0.0, 1.0);
            Eigen::VectorXd z(idx(dim_));
            for (std::size_t k = 1; k < n_steps; ++k) {
                for (std::size_t i = 0; i < dim_; ++i) {
                    z[idx(i)] = normal(engine);
                }
                Eigen::Map<Eigen::VectorXd>(base + k * dim_, idx(dim_)) =
                    sqrt_dt * (cov_factor_ * z);
            }
        } else {
            const double mean = rate_ * dt;
            std::poisson_distribution<long> poisson(mean > 0.0 ? mean : 1.0);
            for (std::size_t k = 1; k < n_steps; ++k) {
                const double jumps = mean > 0.0 ? static_cast<double>(poisson(engine)) : 0.0;
                Eigen::Map<Eigen::VectorXd>(base + k * dim_, idx(dim_)) =
                    jump_ * (jumps - mean);
            }
        }
    });
}

Eigen::Map<const Eigen::VectorXd> DriverEnsemble::increment(std::size_t path,
                                                            std::size_t k) const
{
    return {increments_.data() + (path * grid_.n_steps() + k) * dim_, idx(dim_)};
}

Eigen::Map<const Eigen::MatrixXd> DriverEnsemble::path(std::size_t p) const
{
    return {increments_.data() + p * grid_.n_steps() * dim_, idx(dim_), idx(grid_.n_steps())};
}

DriverEnsemble DriverEnsemble::with_fresh_future(std::size_t k, std::uint64_t fresh_seed) const
{
    DriverEnsemble fresh = *this;
    fresh.seed_ = fresh_seed;
    fresh.fill(default_workers());
    const std::size_t n_steps = grid_.n_steps();
    const std::size_t keep = std::min(k + 1, n_steps);
    for (std::size_t p = 0; p < n_paths_; ++p) {
        const double* src = increments_.data() + p * n_steps * dim_;
        std::copy(src, src + keep * dim_, fresh.increments_.data() + p * n_steps * dim_);
    }
    fresh.seed_ = seed_;
    return fresh;
}

DriverEnsemble DriverEnsemble::reweighted(double nu) const
{
    DriverEnsemble out = *this;
    out.grid_ = grid_.with_nu(nu);
    return out;
}

DriverEnsemble sample_wiener(const TimeGrid& grid, const CovarianceSpec& cov,
                             std::size_t n_paths, std::uint64_t seed)
{
    DriverEnsemble x(grid, DriverKind::wiener, cov.dim(), n_paths, seed);
    x.cov_factor_ = cov.factor();
    x.dominating_ = cov.matrix();
    x.fill(default_workers());
    return x;
}

DriverEnsemble sample_compensated_poisson(const TimeGrid& grid, double rate,
                                          const Eigen::VectorXd& jump, std::size_t n_paths,
                                          std::uint64_t seed)
{
    if (!(rate >= 0.0) || !std::isfinite(rate)) {
        throw InvalidRate("jump rate must be non-negative, got " + std::to_string(rate));
    }
    if (jump.size() == 0) {
        throw InvalidRate("jump vector is empty");
    }
    DriverEnsemble x(grid, DriverKind::compensated_poisson,
                     static_cast<std::size_t>(jump.size()), n_paths, seed);
    x.rate_ = rate;
    x.jump_ = jump;
    x.dominating_ = rate * jump * jump.transpose();
    x.fill(default_workers());
    return x;
}

OperatorProcess::OperatorProcess(const TimeGrid& grid, std::size_t dim_h, std::size_t dim_g,
                                 std::size_t n_paths)
    : grid_(grid), dim_h_(dim_h), dim_g_(dim_g), n_paths_(n_paths),
      data_(n_paths * grid.n_steps() * dim_h * dim_g, 0.0)
{}

Eigen::Map<Eigen::MatrixXd> OperatorProcess::at(std::size_t path, std::size_t k)
{
    return {data_.data() + (path * grid_.n_steps() + k) * dim_h_ * dim_g_, idx(dim_h_),
            idx(dim_g_)};
}

Eigen::Map<const Eigen::MatrixXd> OperatorProcess::at(std::size_t path, std::size_t k) const
{
    return {data_.data() + (path * grid_.n_steps() + k) * dim_h_ * dim_g_, idx(dim_h_),
            idx(dim_g_)};
}

StochasticEnsemble::StochasticEnsemble(const TimeGrid& grid, std::size_t dim,
                                       std::size_t n_paths, std::uint64_t seed)
    : grid_(grid), dim_(dim), n_paths_(n_paths), seed_(seed),
      data_(n_paths * grid.n_steps() * dim, 0.0)
{}

Eigen::Map<Eigen::MatrixXd> StochasticEnsemble::path(std::size_t p)
{
    return {data_.data() + p * grid_.n_steps() * dim_, idx(dim_), idx(grid_.n_steps())};
}

Eigen::Map<const Eigen::MatrixXd> StochasticEnsemble::path(std::size_t p) const
{
    return {data_.data() + p * grid_.n_steps() * dim_, idx(dim_), idx(grid_.n_steps())};
}

WeightedSignal StochasticEnsemble::path_signal(std::size_t p) const
{
    return {grid_, Eigen::MatrixXd(path(p))};
}

StochasticEnsemble StochasticEnsemble::reweighted(double nu) const
{
    StochasticEnsemble out = *this;
    out.grid_ = grid_.with_nu(nu);
    return out;
}

namespace {

double weighted_path_sq(const TimeGrid& grid, const double* a, const double* b, std::size_t dim,
                        std::size_t n_keep)
{
    double sum = 0.0;
    for (std::size_t k = 0; k < n_keep; ++k) {
        double s = 0.0;
        for (std::size_t i = 0; i < dim; ++i) {
            const double d = a[k * dim + i] - (b != nullptr ? b[k * dim + i] : 0.0);
            s += d * d;
        }
        sum += s * grid.weight(k);
    }
    return sum;
}

double mean_distance(const StochasticEnsemble& a, const StochasticEnsemble* b,
                     std::size_t n_keep)
{
    const std::size_t stride = a.grid().n_steps() * a.dim();
    double total = 0.0;
    for (std::size_t p = 0; p < a.n_paths(); ++p) {
        total += weighted_path_sq(a.grid(), a.raw().data() + p * stride,
                                  b != nullptr ? b->raw().data() + p * stride : nullptr,
                                  a.dim(), n_keep);
    }
    return std::sqrt(total / static_cast<double>(a.n_paths()));
}

void check_same_shape(const StochasticEnsemble& a, const StochasticEnsemble& b)
{
    if (!a.grid().same_axis(b.grid()) || a.dim() != b.dim() || a.n_paths() != b.n_paths()) {
        throw ShapeMismatch("ensembles differ in grid, dimension or path count");
    }
}

}  // namespace

double ensemble_norm(const StochasticEnsemble& u)
{
    return mean_distance(u, nullptr, u.grid().n_steps());
}

double ensemble_distance(const StochasticEnsemble& a, const StochasticEnsemble& b)
{
    check_same_shape(a, b);
    return mean_distance(a, &b, a.grid().n_steps());
}

double truncated_distance(const StochasticEnsemble& a, const StochasticEnsemble& b, double t)
{
    check_same_shape(a, b);
    const auto last = a.grid().last_index_at_or_before(t);
    if (!last) {
        return 0.0;
    }
    return mean_distance(a, &b, *last + 1);
}

double hs_norm_squared(const Eigen::MatrixXd& y, const Eigen::MatrixXd& q)
{
    return (y * q * y.transpose()).trace();
}

double alpha_norm(const OperatorProcess& y, const Eigen::MatrixXd& q)
{
    const TimeGrid& grid = y.grid();
    double total = 0.0;
    for (std::size_t p = 0; p < y.n_paths(); ++p) {
        for (std::size_t k = 0; k < grid.n_steps(); ++k) {
            total += hs_norm_squared(y.at(p, k), q) * grid.weight(k);
        }
    }
    return std::sqrt(total / static_cast<double>(y.n_paths()));
}

namespace {

void check_integrand(const OperatorProcess& y, const DriverEnsemble& x)
{
    if (!y.grid().same_axis(x.grid())) {
        throw ShapeMismatch("integrand and driver live on different time grids");
    }
    if (y.n_paths() != x.n_paths()) {
        throw ShapeMismatch("integrand has " + std::to_string(y.n_paths()) +
                            " paths, driver has " + std::to_string(x.n_paths()));
    }
    if (y.dim_g() != x.dim()) {
        throw ShapeMismatch("integrand acts on dimension " + std::to_string(y.dim_g()) +
                            ", driver has dimension " + std::to_string(x.dim()));
    }
}

}  // namespace

StochasticEnsemble ito_integrate(const OperatorProcess& y, const DriverEnsemble& x)
{
    check_integrand(y, x);
    StochasticEnsemble out(y.grid(), y.dim_h(), y.n_paths(), x.seed());
    const std::size_t n_steps = y.grid().n_steps();
    parallel_for(y.n_paths(), default_workers(), [&](std::size_t p) {
        auto path = out.path(p);
        Eigen::VectorXd running = Eigen::VectorXd::Zero(idx(y.dim_h()));
        for (std::size_t k = 1; k < n_steps; ++k) {
            running.noalias() += y.at(p, k - 1) * x.increment(p, k);
            path.col(idx(k)) = running;
        }
    });
    return out;
}

double ito_isometry_error(const OperatorProcess& y, const DriverEnsemble& x)
{
    check_integrand(y, x);
    const StochasticEnsemble integral = ito_integrate(y, x);
    const std::size_t n_steps = y.grid().n_steps();
    const Eigen::MatrixXd& q = x.dominating_covariance();
    const double dt = y.grid().dt();
    double lhs = 0.0;
    double rhs = 0.0;
    for (std::size_t p = 0; p < y.n_paths(); ++p) {
        lhs += integral.path(p).col(idx(n_steps - 1)).squaredNorm();
        for (std::size_t j = 1; j < n_steps; ++j) {
            rhs += hs_norm_squared(y.at(p, j - 1), q) * dt;
        }
    }
    const double n = static_cast<double>(y.n_paths());
    lhs /= n;
    rhs /= n;
    if (rhs == 0.0) {
        throw DegenerateIntegrand("expected quadratic variation of the integrand is zero");
    }
    return std::abs(lhs - rhs) / rhs;
}

SigmaSpec::SigmaSpec(SigmaKind kind, double gain, double clamp, Eigen::MatrixXd phi)
    : kind_(kind), gain_(gain), clamp_(clamp), phi_(std::move(phi))
{
    if (!std::isfinite(gain_)) {
        throw PreconditionViolation("noise gain must be finite");
    }
    if (kind_ == SigmaKind::clamped && !(clamp_ > 0.0)) {
        throw PreconditionViolation("clamp level must be positive");
    }
}

SigmaSpec SigmaSpec::multiplicative(double gain, Eigen::MatrixXd phi)
{
    return SigmaSpec(SigmaKind::multiplicative, gain, 0.0, std::move(phi));
}

SigmaSpec SigmaSpec::clamped(double gain, double clamp, Eigen::MatrixXd phi)
{
    return SigmaSpec(SigmaKind::clamped, gain, clamp, std::move(phi));
}

Eigen::MatrixXd SigmaSpec::value(const Eigen::VectorXd& u) const
{
    if (static_cast<std::size_t>(u.size()) != dim_h()) {
        throw ShapeMismatch("sigma expects dimension " + std::to_string(dim_h()));
    }
    Eigen::VectorXd g = u;
    if (kind_ == SigmaKind::clamped) {
        g = u.cwiseMax(-clamp_).cwiseMin(clamp_);
    }
    return gain_ * g.asDiagonal() * phi_;
}

void SigmaSpec::accumulate(const Eigen::Ref<const Eigen::MatrixXd>& u,
                           const Eigen::Ref<const Eigen::MatrixXd>& phi_dx,
                           Eigen::Ref<Eigen::MatrixXd> out) const
{
    if (kind_ == SigmaKind::clamped) {
        out.array() += gain_ * u.array().max(-clamp_).min(clamp_) * phi_dx.array();
    } else {
        out.array() += gain_ * u.array() * phi_dx.array();
    }
}

double SigmaSpec::lipschitz(const Eigen::MatrixXd& q) const
{
    if (phi_.size() == 0) {
        return 0.0;
    }
    const Eigen::VectorXd row_norms = (phi_ * q * phi_.transpose()).diagonal();
    return std::abs(gain_) * std::sqrt(std::max(0.0, row_norms.maxCoeff()));
}

OperatorProcess nemytskii(const SigmaSpec& sigma, const StochasticEnsemble& u)
{
    if (u.dim() != sigma.dim_h()) {
        throw ShapeMismatch("sigma expects dimension " + std::to_string(sigma.dim_h()) +
                            ", ensemble has " + std::to_string(u.dim()));
    }
    OperatorProcess out(u.grid(), sigma.dim_h(), sigma.dim_g(), u.n_paths());
    for (std::size_t p = 0; p < u.n_paths(); ++p) {
        const auto path = u.path(p);
        for (std::size_t k = 0; k < u.grid().n_steps(); ++k) {
            out.at(p, k) = sigma.value(path.col(idx(k)));
        }
    }
    return out;
}

double integral_gain(double nu, const DriverEnsemble& x, std::size_t trials,
                     std::uint64_t seed, std::size_t dim_h)
{
    const DriverEnsemble weighted = x.reweighted(nu);
    const Eigen::MatrixXd& q = weighted.dominating_covariance();
    double best = 0.0;
    for (std::size_t trial = 0; trial < trials; ++trial) {
        OperatorProcess y(weighted.grid(), dim_h, weighted.dim(), weighted.n_paths());
        for (std::size_t p = 0; p < y.n_paths(); ++p) {
            std::mt19937_64 engine(path_seed(splitmix64(seed + trial), p));
            std::normal_distribution<double> normal(0.0, 1.0);
            for (std::size_t k = 0; k < y.grid().n_steps(); ++k) {
                auto value = y.at(p, k);
                for (Eigen::Index c = 0; c < value.cols(); ++c) {
                    for (Eigen::Index r = 0; r < value.rows(); ++r) {
                        value(r, c) = normal(engine);
                    }
                }
            }
        }
        const double denominator = alpha_norm(y, q);
        if (denominator == 0.0) {
            continue;
        }
        best = std::max(best, ensemble_norm(ito_integrate(y, weighted)) / denominator);
    }
    return best;
}

}  // namespace sevo
