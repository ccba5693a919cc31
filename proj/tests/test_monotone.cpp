#include "sevo/errors.hpp"
#include "sevo/monotone.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace sevo;

namespace {

Eigen::VectorXd gaussian(std::mt19937& engine, Eigen::Index n, double scale)
{
    std::normal_distribution<double> normal(0.0, scale);
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        v[i] = normal(engine);
    }
    return v;
}

Eigen::MatrixXd psd_matrix(Eigen::Index n, unsigned seed)
{
    std::mt19937 engine(seed);
    Eigen::MatrixXd b(n, n - 1);
    for (Eigen::Index j = 0; j < b.cols(); ++j) {
        b.col(j) = gaussian(engine, n, 1.0);
    }
    return b * b.transpose();  // rank deficient on purpose
}

}  // namespace

TEST(SoftThreshold, ClosedForm)
{
    const MonotoneRelation g = soft_threshold_relation(2.0);
    const Eigen::Vector4d w(3.0, -0.5, -5.0, 1.0);
    const Eigen::VectorXd x = g.resolve(0.5, w);
    EXPECT_EQ(x, Eigen::Vector4d(2.0, 0.0, -4.0, 0.0));
    EXPECT_EQ(g.resolve(0.5, Eigen::Vector4d::Zero()), Eigen::Vector4d::Zero());
}

TEST(SoftThreshold, MembershipDefect)
{
    const MonotoneRelation g = soft_threshold_relation(1.0);
    EXPECT_EQ(g.membership_defect(Eigen::Vector2d(0.0, 2.0), Eigen::Vector2d(0.3, 1.0)), 0.0);
    EXPECT_NEAR(g.membership_defect(Eigen::Vector2d(0.0, 2.0), Eigen::Vector2d(1.5, 1.0)), 0.5,
                1e-15);
    EXPECT_NEAR(g.membership_defect(Eigen::Vector2d(0.0, -2.0), Eigen::Vector2d(0.0, 1.0)), 2.0,
                1e-15);
    EXPECT_THROW(soft_threshold_relation(-1.0), PreconditionViolation);
}

TEST(LinearPsd, MatchesDenseSolve)
{
    const Eigen::MatrixXd k = psd_matrix(5, 3);
    const MonotoneRelation g = linear_psd_relation(k);
    std::mt19937 engine(8);
    for (double lambda : {0.1, 1.0, 7.0}) {
        const Eigen::VectorXd w = gaussian(engine, 5, 1.0);
        const Eigen::MatrixXd system = Eigen::MatrixXd::Identity(5, 5) + lambda * k;
        const Eigen::VectorXd expected = system.fullPivLu().solve(w);
        EXPECT_LE((g.resolve(lambda, w) - expected).norm(), 1e-12 * (1.0 + expected.norm()));
    }
    Eigen::Matrix2d indefinite;
    indefinite << 0.0, 1.0, 1.0, 0.0;
    EXPECT_THROW(linear_psd_relation(indefinite), PreconditionViolation);
}

TEST(Resolvent, RequiresPositiveLambda)
{
    EXPECT_THROW(zero_relation().resolve(0.0, Eigen::VectorXd::Ones(2)), PreconditionViolation);
    EXPECT_THROW(soft_threshold_relation(1.0).resolve(-1.0, Eigen::VectorXd::Ones(2)),
                 PreconditionViolation);
}

TEST(Resolvent, FirmlyNonexpansiveOnThousandPairs)
{
    std::mt19937 engine(2026);
    const std::vector<MonotoneRelation> relations = {zero_relation(), soft_threshold_relation(0.7),
                                                     linear_psd_relation(psd_matrix(6, 1))};
    for (const MonotoneRelation& g : relations) {
        for (int pair = 0; pair < 1000; ++pair) {
            const double lambda = std::exp(gaussian(engine, 1, 1.5)[0]);
            const Eigen::VectorXd a = gaussian(engine, 6, 2.0);
            const Eigen::VectorXd b = gaussian(engine, 6, 2.0);
            const Eigen::VectorXd ra = g.resolve(lambda, a);
            const Eigen::VectorXd rb = g.resolve(lambda, b);
            EXPECT_LE((ra - rb).norm(), (a - b).norm() + 1e-10) << g.label();
            EXPECT_LE((ra - rb).squaredNorm(), (ra - rb).dot(a - b) + 1e-10) << g.label();
        }
    }
}

TEST(Resolvent, OutputSatisfiesTheInclusion)
{
    // x = (I + lambda g)^{-1} w  <=>  (w - x) / lambda in g(x).
    std::mt19937 engine(5);
    const std::vector<MonotoneRelation> relations = {zero_relation(), soft_threshold_relation(0.4),
                                                     linear_psd_relation(psd_matrix(4, 2))};
    for (const MonotoneRelation& g : relations) {
        for (int trial = 0; trial < 100; ++trial) {
            const double lambda = 0.3 + trial * 0.05;
            const Eigen::VectorXd w = gaussian(engine, 4, 1.0);
            const Eigen::VectorXd x = g.resolve(lambda, w);
            EXPECT_LE(g.membership_defect(x, (w - x) / lambda), 1e-12) << g.label();
        }
        EXPECT_EQ(g.resolve(1.0, Eigen::VectorXd::Zero(4)), Eigen::VectorXd::Zero(4));
    }
}

TEST(Relation, ZeroIsRecognized)
{
    EXPECT_TRUE(zero_relation().is_zero());
    EXPECT_FALSE(soft_threshold_relation(1.0).is_zero());
    const MonotoneRelation custom("custom", [](double, const Eigen::VectorXd& w) { return w; });
    EXPECT_FALSE(custom.has_membership_defect());
    EXPECT_THROW(custom.membership_defect(Eigen::VectorXd::Zero(1), Eigen::VectorXd::Zero(1)),
                 PreconditionViolation);
}
