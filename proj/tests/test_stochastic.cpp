#include "sevo/errors.hpp"
#include "sevo/rng.hpp"
#include "sevo/stochastic.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <random>

using namespace sevo;

namespace {

class WorkerEnv {
public:
    explicit WorkerEnv(const char* value) { setenv("SEVO_WORKERS", value, 1); }
    ~WorkerEnv() { unsetenv("SEVO_WORKERS"); }
};

OperatorProcess constant_process(const TimeGrid& grid, const Eigen::MatrixXd& y,
                                 std::size_t n_paths)
{
    OperatorProcess out(grid, static_cast<std::size_t>(y.rows()),
                        static_cast<std::size_t>(y.cols()), n_paths);
    for (std::size_t p = 0; p < n_paths; ++p) {
        for (std::size_t k = 0; k < grid.n_steps(); ++k) {
            out.at(p, k) = y;
        }
    }
    return out;
}

}  // namespace

TEST(Covariance, RejectsInvalidMatrices)
{
    EXPECT_THROW(CovarianceSpec(Eigen::MatrixXd(2, 3)), InvalidCovariance);
    Eigen::Matrix2d asym;
    asym << 1.0, 0.5, 0.0, 1.0;
    EXPECT_THROW(CovarianceSpec{asym}, InvalidCovariance);
    Eigen::Matrix2d indefinite;
    indefinite << 1.0, 2.0, 2.0, 1.0;
    EXPECT_THROW(CovarianceSpec{indefinite}, InvalidCovariance);
}

TEST(Covariance, FactorSquaresToQ)
{
    Eigen::Matrix3d q;
    q << 2.0, 0.5, 0.0, 0.5, 1.0, 0.3, 0.0, 0.3, 0.5;
    const CovarianceSpec cov(q);
    EXPECT_LE((cov.factor() * cov.factor().transpose() - q).cwiseAbs().maxCoeff(), 1e-13);

    Eigen::Matrix2d singular;
    singular << 1.0, 1.0, 1.0, 1.0;
    const CovarianceSpec rank1(singular);
    EXPECT_LE((rank1.factor() * rank1.factor().transpose() - singular).cwiseAbs().maxCoeff(),
              1e-13);
}

TEST(Driver, FirstIncrementIsZeroAndPathsAreIndependentOfCount)
{
    const TimeGrid grid(0.01, 50, 1.0);
    const auto small = sample_wiener(grid, CovarianceSpec::identity(2), 3, 77);
    const auto large = sample_wiener(grid, CovarianceSpec::identity(2), 10, 77);
    for (std::size_t p = 0; p < 3; ++p) {
        EXPECT_TRUE(small.increment(p, 0).isZero(0.0));
        EXPECT_EQ(Eigen::MatrixXd(small.path(p)), Eigen::MatrixXd(large.path(p)));
    }
    EXPECT_NE(Eigen::MatrixXd(small.path(0)), Eigen::MatrixXd(small.path(1)));
}

TEST(Driver, BitIdenticalAcrossWorkerCounts)
{
    const TimeGrid grid(0.01, 200, 1.0);
    const auto serial = sample_compensated_poisson(grid, 3.0, Eigen::Vector2d(1.0, -0.5), 64, 5);
    WorkerEnv env("4");
    const auto parallel =
        sample_compensated_poisson(grid, 3.0, Eigen::Vector2d(1.0, -0.5), 64, 5);
    for (std::size_t p = 0; p < 64; ++p) {
        EXPECT_EQ(Eigen::MatrixXd(serial.path(p)), Eigen::MatrixXd(parallel.path(p)));
    }
}

TEST(Driver, PoissonValidation)
{
    const TimeGrid grid(0.01, 10, 1.0);
    EXPECT_THROW(sample_compensated_poisson(grid, -1.0, Eigen::VectorXd::Ones(1), 2, 0),
                 InvalidRate);
    EXPECT_THROW(sample_compensated_poisson(grid, 1.0, Eigen::VectorXd(), 2, 0), InvalidRate);
}

TEST(Driver, PoissonIncrementsAreCenteredWithDominatingVariance)
{
    const TimeGrid grid(0.01, 101, 1.0);
    const double rate = 5.0;
    const std::size_t n = 4000;
    const auto x = sample_compensated_poisson(grid, rate, Eigen::VectorXd::Constant(1, 2.0), n, 3);
    double sum = 0.0;
    double sq = 0.0;
    for (std::size_t p = 0; p < n; ++p) {
        const double total = x.path(p).sum();
        sum += total;
        sq += total * total;
    }
    const double t = 1.0;
    const double var = rate * 4.0 * t;
    EXPECT_NEAR(sum / n, 0.0, 4.0 * std::sqrt(var / n));
    EXPECT_NEAR(sq / n, var, 4.0 * var * std::sqrt(2.0 / n) + 0.1 * var);
    EXPECT_DOUBLE_EQ(x.dominating_covariance()(0, 0), rate * 4.0);
}

TEST(Driver, FreshFutureKeepsThePast)
{
    const TimeGrid grid(0.01, 40, 1.0);
    const auto x = sample_wiener(grid, CovarianceSpec::identity(1), 8, 1);
    const auto y = x.with_fresh_future(19, 99);
    for (std::size_t p = 0; p < 8; ++p) {
        EXPECT_EQ(x.path(p).leftCols(20), y.path(p).leftCols(20));
        EXPECT_NE(Eigen::MatrixXd(x.path(p).rightCols(20)), Eigen::MatrixXd(y.path(p).rightCols(20)));
    }
}

TEST(HilbertSchmidt, TraceMatchesColumnSum)
{
    std::mt19937 engine(4);
    std::normal_distribution<double> normal;
    Eigen::MatrixXd y(3, 4);
    Eigen::MatrixXd b(4, 4);
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        y(i) = normal(engine);
    }
    for (Eigen::Index i = 0; i < b.size(); ++i) {
        b(i) = normal(engine);
    }
    const Eigen::MatrixXd q = b * b.transpose();
    const CovarianceSpec cov(q);
    double brute = 0.0;
    for (Eigen::Index i = 0; i < 4; ++i) {
        brute += (y * cov.factor().col(i)).squaredNorm();
    }
    EXPECT_NEAR(hs_norm_squared(y, q), brute, 1e-10 * brute);
}

TEST(AlphaNorm, ConstantIntegrand)
{
    const double dt = 0.02;
    const double nu = 1.5;
    const std::size_t n = 100;
    const TimeGrid grid(dt, n, nu);
    const OperatorProcess y = constant_process(grid, Eigen::MatrixXd::Constant(1, 1, 2.0), 3);
    const double q = std::exp(-2.0 * nu * dt);
    const double expected = 2.0 * std::sqrt(dt * (1.0 - std::pow(q, n)) / (1.0 - q));
    EXPECT_NEAR(alpha_norm(y, Eigen::MatrixXd::Identity(1, 1)), expected, 1e-12);
}

TEST(ItoIntegral, ConstantIntegrandIsDriverPrimitive)
{
    const TimeGrid grid(0.01, 30, 1.0);
    const auto x = sample_wiener(grid, CovarianceSpec::identity(1), 4, 8);
    const auto integral = ito_integrate(constant_process(grid, Eigen::MatrixXd::Ones(1, 1), 4), x);
    for (std::size_t p = 0; p < 4; ++p) {
        double running = 0.0;
        for (std::size_t k = 0; k < 30; ++k) {
            running += x.increment(p, k)(0);
            EXPECT_NEAR(integral.path(p)(0, static_cast<Eigen::Index>(k)), running, 1e-14);
        }
    }
}

TEST(ItoIntegral, IsometryUnitIntegrand)
{
    const std::size_t n = 20000;
    const TimeGrid grid(0.01, 51, 1.0);
    const auto x = sample_wiener(grid, CovarianceSpec::identity(1), n, 2024);
    const double defect =
        ito_isometry_error(constant_process(grid, Eigen::MatrixXd::Ones(1, 1), n), x);
    EXPECT_LE(defect, 5.0 / std::sqrt(static_cast<double>(n)));
}

TEST(ItoIntegral, IsometryRankOneOperatorWithCovariance)
{
    const std::size_t n = 20000;
    const TimeGrid grid(0.02, 26, 1.0);
    Eigen::Matrix2d q;
    q << 1.0, 0.4, 0.4, 0.5;
    const auto x = sample_wiener(grid, CovarianceSpec(q), n, 31);
    const Eigen::MatrixXd y = Eigen::Vector3d(1.0, -2.0, 0.5) * Eigen::RowVector2d(0.3, 1.0);
    const double defect = ito_isometry_error(constant_process(grid, y, n), x);
    EXPECT_LE(defect, 5.0 / std::sqrt(static_cast<double>(n)));
}

TEST(ItoIntegral, IsometryPoisson)
{
    const std::size_t n = 20000;
    const TimeGrid grid(0.02, 26, 1.0);
    const auto x = sample_compensated_poisson(grid, 4.0, Eigen::VectorXd::Ones(1), n, 12);
    const double defect =
        ito_isometry_error(constant_process(grid, Eigen::MatrixXd::Ones(1, 1), n), x);
    EXPECT_LE(defect, 5.0 / std::sqrt(static_cast<double>(n)));
}

TEST(ItoIntegral, DegenerateIntegrandThrows)
{
    const TimeGrid grid(0.01, 10, 1.0);
    const auto x = sample_wiener(grid, CovarianceSpec::identity(1), 2, 0);
    EXPECT_THROW(ito_isometry_error(constant_process(grid, Eigen::MatrixXd::Zero(1, 1), 2), x),
                 DegenerateIntegrand);
    EXPECT_THROW(ito_integrate(constant_process(grid, Eigen::MatrixXd::Zero(1, 2), 2), x),
                 ShapeMismatch);
}

TEST(ItoIntegral, PredictableIntegrandIgnoresCurrentIncrement)
{
    // Changing Y at the last step must not change the integral: Y_{k-1} pairs with dX_k.
    const TimeGrid grid(0.01, 20, 1.0);
    const auto x = sample_wiener(grid, CovarianceSpec::identity(1), 2, 3);
    OperatorProcess y = constant_process(grid, Eigen::MatrixXd::Ones(1, 1), 2);
    const auto before = ito_integrate(y, x);
    y.at(0, 19)(0, 0) = 1e6;
    const auto after = ito_integrate(y, x);
    EXPECT_EQ(before.raw(), after.raw());
}

TEST(IntegralGain, MatchesGeometricOracle)
{
    // For white integrands the weighted gain squared is exp(-2 nu dt) dt / (1 - exp(-2 nu dt)).
    const double dt = 0.01;
    const double nu = 4.0;
    const TimeGrid grid(dt, 500, nu);
    const auto x = sample_wiener(grid, CovarianceSpec::identity(1), 400, 6);
    const double q = std::exp(-2.0 * nu * dt);
    const double oracle = std::sqrt(q * dt / (1.0 - q));
    EXPECT_NEAR(integral_gain(nu, x, 3), oracle, 0.05 * oracle);
    EXPECT_LT(integral_gain(16.0, x, 3), integral_gain(4.0, x, 3));
}

TEST(Sigma, LipschitzBoundHolds)
{
    std::mt19937 engine(1);
    std::normal_distribution<double> normal;
    const Eigen::MatrixXd phi = Eigen::MatrixXd::Identity(3, 3);
    const Eigen::MatrixXd q = Eigen::Vector3d(1.0, 2.0, 0.5).asDiagonal();
    for (const SigmaSpec& sigma :
         {SigmaSpec::multiplicative(1.5, phi), SigmaSpec::clamped(1.5, 0.3, phi)}) {
        EXPECT_NEAR(sigma.lipschitz(q), 1.5 * std::sqrt(2.0), 1e-14);
        EXPECT_TRUE(sigma.value(Eigen::Vector3d::Zero()).isZero(0.0));
        for (int trial = 0; trial < 200; ++trial) {
            const Eigen::Vector3d u(normal(engine), normal(engine), normal(engine));
            const Eigen::Vector3d v(normal(engine), normal(engine), normal(engine));
            const double lhs = std::sqrt(hs_norm_squared(sigma.value(u) - sigma.value(v), q));
            EXPECT_LE(lhs, sigma.lipschitz(q) * (u - v).norm() + 1e-12);
        }
    }
}

TEST(Sigma, AccumulateMatchesMatrixForm)
{
    const Eigen::MatrixXd phi = Eigen::MatrixXd::Identity(2, 2);
    const SigmaSpec sigma = SigmaSpec::clamped(2.0, 0.5, phi);
    const Eigen::Vector2d u(0.2, -3.0);
    const Eigen::Vector2d dx(0.7, 0.1);
    Eigen::VectorXd out = Eigen::VectorXd::Zero(2);
    sigma.accumulate(u, phi * dx, out);
    EXPECT_LE((out - sigma.value(u) * dx).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Sigma, NemytskiiEvaluatesPointwise)
{
    const TimeGrid grid(0.1, 5, 1.0);
    StochasticEnsemble u(grid, 2, 2);
    u.path(1)(0, 3) = 4.0;
    const SigmaSpec sigma = SigmaSpec::multiplicative(0.5, Eigen::MatrixXd::Identity(2, 2));
    const OperatorProcess y = nemytskii(sigma, u);
    EXPECT_DOUBLE_EQ(y.at(1, 3)(0, 0), 2.0);
    EXPECT_DOUBLE_EQ(y.at(0, 3)(0, 0), 0.0);
    StochasticEnsemble wrong(grid, 3, 1);
    EXPECT_THROW(nemytskii(sigma, wrong), ShapeMismatch);
}

TEST(Seeds, PathSeedsAreDistinct)
{
    EXPECT_NE(path_seed(0, 0), path_seed(0, 1));
    EXPECT_NE(path_seed(0, 0), path_seed(1, 0));
    EXPECT_EQ(path_seed(42, 7), splitmix64(42 ^ splitmix64(8)));
}
