#include "sevo/errors.hpp"
#include "sevo/evo_solver.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace sevo;

namespace {

SparseOperator diag(const Eigen::VectorXd& d)
{
    SparseOperator out(d.size(), d.size());
    for (Eigen::Index i = 0; i < d.size(); ++i) {
        if (d[i] != 0.0) {
            out.insert(i, i) = d[i];
        }
    }
    out.makeCompressed();
    return out;
}

SparseOperator scalar(double v) { return diag(Eigen::VectorXd::Constant(1, v)); }

BlockSystem scalar_system(double m, double n, double c = 1.0)
{
    return {OperatorFamily::constant(scalar(m), scalar(n)), SparseOperator(1, 1), std::nullopt, c};
}

/// du/dt - div grad u = f with q = -grad u: M = diag(I, 0), N = diag(0, I).
BlockSystem heat_system(std::size_t n, double h)
{
    const GradDiv ops = build_grad_div_1d(n, h);
    const auto nu = static_cast<Eigen::Index>(n);
    Eigen::VectorXd m = Eigen::VectorXd::Zero(2 * nu + 1);
    m.head(nu).setOnes();
    const Eigen::VectorXd nn = Eigen::VectorXd::Ones(2 * nu + 1) - m;
    return {OperatorFamily::constant(diag(m), diag(nn)), assemble_block(ops.grad, -1).a,
            std::nullopt, 1.0};
}

Eigen::MatrixXd random_matrix(Eigen::Index rows, Eigen::Index cols, unsigned seed)
{
    std::mt19937 engine(seed);
    std::normal_distribution<double> normal;
    Eigen::MatrixXd out(rows, cols);
    for (Eigen::Index i = 0; i < out.size(); ++i) {
        out(i) = normal(engine);
    }
    return out;
}

}  // namespace

TEST(Assumption1, ScalarThreshold)
{
    const BlockSystem system = scalar_system(2.0, -1.0);
    EXPECT_FALSE(assumption1_report(system, 0.5, 1.0, 4).passes);
    const Assumption1Report ok = assumption1_report(system, 1.0, 1.0, 4);
    EXPECT_TRUE(ok.passes);
    EXPECT_DOUBLE_EQ(ok.min_eig, 1.0);
    EXPECT_THROW(assumption1_report(system, 1.0, 1.0, 1), PreconditionViolation);
}

TEST(Assumption1, UsesHalfDerivativeOfM)
{
    // M(t) = 1 + t, N = -1: nu M + M'/2 + N = nu (1 + t) - 1/2.
    const BlockSystem system{
        OperatorFamily(
            1, [](double t) { return scalar(1.0 + t); }, [](double) { return scalar(-1.0); },
            [](double) { return scalar(1.0); }, 1.0),
        SparseOperator(1, 1), std::nullopt, 1.0};
    const Assumption1Report report = assumption1_report(system, 1.5, 2.0, 5);
    EXPECT_TRUE(report.passes);
    EXPECT_DOUBLE_EQ(report.min_eig, 1.0);
    EXPECT_DOUBLE_EQ(report.t_at_min, 0.0);
    EXPECT_FALSE(assumption1_report(system, 1.4, 2.0, 5).passes);
}

TEST(Assumption1, BlockEigenvaluesMatchDense)
{
    const Eigen::MatrixXd b = random_matrix(5, 5, 3);
    Eigen::MatrixXd dense = Eigen::MatrixXd::Zero(12, 12);
    dense.block(0, 0, 5, 5) = b + b.transpose();
    dense.block(5, 5, 5, 5) = b * b.transpose();
    dense(10, 10) = -0.25;
    dense(11, 11) = 3.0;
    const SparseOperator sparse = dense.sparseView();
    const double expected =
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(dense).eigenvalues().minCoeff();
    EXPECT_NEAR(min_symmetric_eigenvalue(sparse), expected, 1e-12);
}

TEST(ValidateSystem, RejectsBrokenStructure)
{
    BlockSystem system = heat_system(4, 0.2);
    EXPECT_NO_THROW(validate_system(system, 1.0));
    BlockSystem not_skew = system;
    not_skew.a.coeffRef(0, 0) = 1.0;
    EXPECT_THROW(validate_system(not_skew, 1.0), PreconditionViolation);
    Eigen::MatrixXd m = Eigen::MatrixXd::Identity(2, 2);
    m(0, 1) = 0.5;
    const BlockSystem asym{OperatorFamily::constant(m.sparseView(), diag(Eigen::Vector2d::Ones())),
                           SparseOperator(2, 2), std::nullopt, 1.0};
    EXPECT_THROW(validate_system(asym, 1.0), PreconditionViolation);
    BlockSystem bad_relation = system;
    bad_relation.relation = RelationPlacement{7, 5, soft_threshold_relation(1.0)};
    EXPECT_THROW(validate_system(bad_relation, 1.0), ShapeMismatch);
}

TEST(LinearSolve, ScalarRecursion)
{
    const double m = 2.0;
    const double n = 0.5;
    const TimeGrid grid(0.05, 40, 1.0);
    const Eigen::MatrixXd r = random_matrix(1, 40, 9);
    const WeightedSignal u = solve_linear(scalar_system(m, n), WeightedSignal(grid, r));
    double prev = 0.0;
    for (std::size_t k = 0; k < 40; ++k) {
        const double expected = (r(0, static_cast<Eigen::Index>(k)) + m / grid.dt() * prev) /
                                (m / grid.dt() + n);
        EXPECT_NEAR(u.at(k)(0), expected, 1e-13);
        prev = expected;
    }
}

TEST(LinearSolve, TimeDependentMassUsesDividedDifference)
{
    auto m = [](double t) { return 1.0 + 0.5 * std::sin(t); };
    const BlockSystem system{
        OperatorFamily(
            1, [m](double t) { return scalar(m(t)); }, [](double) { return scalar(1.0); },
            [](double t) { return scalar(0.5 * std::cos(t)); }, 0.5),
        SparseOperator(1, 1), std::nullopt, 0.5};
    const TimeGrid grid(0.1, 30, 1.0);
    const WeightedSignal u =
        solve_linear(system, WeightedSignal(grid, Eigen::MatrixXd::Ones(1, 30)));
    double prev = 0.0;
    for (std::size_t k = 0; k < 30; ++k) {
        const double t = grid.time(k);
        const double m_prev = k == 0 ? 0.0 : m(t - grid.dt());
        const double expected = (1.0 + m_prev / grid.dt() * prev) / (m(t) / grid.dt() + 1.0);
        EXPECT_NEAR(u.at(k)(0), expected, 1e-13);
        prev = expected;
    }
}

TEST(LinearSolve, ExpandedFormAgreesForConstantMass)
{
    const BlockSystem system = heat_system(6, 1.0 / 7.0);
    const TimeGrid grid(0.01, 50, 1.0);
    const WeightedSignal r(grid, random_matrix(13, 50, 4));
    StepOptions expanded;
    expanded.expanded_form = true;
    EXPECT_LE((solve_linear(system, r).values() - solve_linear(system, r, expanded).values())
                  .cwiseAbs()
                  .maxCoeff(),
              1e-13);
}

TEST(LinearSolve, HeatEigenmodeMatchesDiscreteOracle)
{
    const std::size_t n = 16;
    const double h = 1.0 / 17.0;
    const double dt = 0.002;
    const std::size_t steps = 200;
    const BlockSystem system = heat_system(n, h);
    const double s = std::sin(std::numbers::pi * h / 2.0);
    const double lambda = 4.0 / (h * h) * s * s;
    Eigen::VectorXd mode(n);
    for (std::size_t i = 0; i < n; ++i) {
        mode(static_cast<Eigen::Index>(i)) = std::sin(std::numbers::pi * (i + 1) * h);
    }
    const TimeGrid grid(dt, steps, 1.0);
    WeightedSignal rhs(grid, 2 * n + 1);
    for (std::size_t k = 0; k < steps; ++k) {
        rhs.at(k).head(static_cast<Eigen::Index>(n)) = mode;
    }
    const WeightedSignal u = solve_linear(system, rhs);
    for (std::size_t k : {0u, 10u, 199u}) {
        const double amplitude = (1.0 - std::pow(1.0 + lambda * dt, -double(k + 1))) / lambda;
        EXPECT_LE((u.at(k).head(static_cast<Eigen::Index>(n)) - amplitude * mode).norm(),
                  1e-11 * mode.norm());
    }
}

TEST(LinearSolve, CausalAndLinear)
{
    const BlockSystem system = heat_system(5, 1.0 / 6.0);
    const TimeGrid grid(0.02, 60, 2.0);
    const Eigen::MatrixXd r1 = random_matrix(11, 60, 1);
    Eigen::MatrixXd r2 = r1;
    r2.rightCols(30) = random_matrix(11, 30, 2);
    const WeightedSignal u1 = solve_linear(system, WeightedSignal(grid, r1));
    const WeightedSignal u2 = solve_linear(system, WeightedSignal(grid, r2));
    EXPECT_EQ(u1.values().leftCols(30), u2.values().leftCols(30));

    const Eigen::MatrixXd combo = 2.0 * r1 - 0.5 * r2;
    const WeightedSignal uc = solve_linear(system, WeightedSignal(grid, combo));
    EXPECT_LE((uc.values() - (2.0 * u1.values() - 0.5 * u2.values())).cwiseAbs().maxCoeff(),
              1e-12);
}

TEST(LinearSolve, EnergyIdentityForSkewSystem)
{
    // M = I, N = 0: |u_k|^2 - |u_{k-1}|^2 + |u_k - u_{k-1}|^2 = 2 dt <r_k, u_k>.
    const GradDiv ops = build_grad_div_1d(4, 0.2);
    const SparseOperator a = assemble_block(ops.grad, -1).a;
    const BlockSystem system{OperatorFamily::constant(diag(Eigen::VectorXd::Ones(9)),
                                                      SparseOperator(9, 9)),
                             a, std::nullopt, 1.0};
    const TimeGrid grid(0.01, 80, 1.0);
    const Eigen::MatrixXd r = random_matrix(9, 80, 6);
    const WeightedSignal u = solve_linear(system, WeightedSignal(grid, r));
    Eigen::VectorXd prev = Eigen::VectorXd::Zero(9);
    for (std::size_t k = 0; k < 80; ++k) {
        const Eigen::VectorXd cur = u.at(k);
        const double lhs = cur.squaredNorm() - prev.squaredNorm() + (cur - prev).squaredNorm();
        const double rhs = 2.0 * grid.dt() * r.col(static_cast<Eigen::Index>(k)).dot(cur);
        EXPECT_NEAR(lhs, rhs, 1e-12 * (1.0 + cur.squaredNorm()));
        prev = cur;
    }
}

TEST(LinearSolve, RejectsFailingAssumptionAndWrongShape)
{
    const TimeGrid grid(0.01, 10, 1.0);
    EXPECT_THROW(solve_linear(scalar_system(1.0, -0.5), WeightedSignal(grid, 1)),
                 PreconditionViolation);
    EXPECT_THROW(solve_linear(scalar_system(1.0, 1.0), WeightedSignal(grid, 2)), ShapeMismatch);
}

TEST(LinearStepper, FactorizesOnlyWhenCoefficientsChange)
{
    const BlockSystem constant = heat_system(5, 1.0 / 6.0);
    LinearStepper a(constant, 0.01);
    for (std::size_t k = 0; k < 20; ++k) {
        a.prepare(k);
    }
    EXPECT_EQ(a.factorizations(), 1u);

    const BlockSystem varying{
        OperatorFamily(
            1, [](double t) { return scalar(2.0 + std::sin(t)); },
            [](double) { return scalar(1.0); },
            [](double t) { return scalar(std::cos(t)); }, 1.0),
        SparseOperator(1, 1), std::nullopt, 1.0};
    LinearStepper b(varying, 0.01);
    for (std::size_t k = 0; k < 20; ++k) {
        b.prepare(k);
    }
    EXPECT_EQ(b.factorizations(), 20u);
}

TEST(LinearStepper, SparseAndDenseFactorsAgree)
{
    const BlockSystem system = heat_system(40, 1.0 / 41.0);
    const TimeGrid grid(0.01, 20, 1.0);
    const WeightedSignal r(grid, random_matrix(81, 20, 2));
    StepOptions dense;
    dense.dense_limit = 1000;
    StepOptions sparse;
    sparse.dense_limit = 1;
    EXPECT_LE((solve_linear(system, r, dense).values() - solve_linear(system, r, sparse).values())
                  .cwiseAbs()
                  .maxCoeff(),
              1e-12);
}

TEST(Monotone, ZeroRelationEqualsLinear)
{
    BlockSystem system = heat_system(6, 1.0 / 7.0);
    system.relation = RelationPlacement{2, 3, zero_relation()};
    const TimeGrid grid(0.01, 40, 1.0);
    const WeightedSignal r(grid, random_matrix(13, 40, 8));
    EXPECT_EQ(solve_monotone(system, r).values(), solve_linear(system, r).values());
}

TEST(Monotone, LinearRelationMatchesAugmentedLinearSystem)
{
    // g(x) = k x on the block is linear, so the inclusion is the linear system N + k P_B.
    BlockSystem system = heat_system(4, 0.2);
    const double k = 3.0;
    system.relation = RelationPlacement{5, 4, linear_psd_relation(k * Eigen::MatrixXd::Identity(4, 4))};
    Eigen::VectorXd n = Eigen::VectorXd::Zero(9);
    n.tail(5).setOnes();
    n.segment(5, 4).array() += k;
    Eigen::VectorXd m = Eigen::VectorXd::Zero(9);
    m.head(4).setOnes();
    const BlockSystem augmented{OperatorFamily::constant(diag(m), diag(n)), system.a,
                                std::nullopt, 1.0};
    const TimeGrid grid(0.01, 30, 1.0);
    const WeightedSignal r(grid, random_matrix(9, 30, 1));
    MonotoneSolveStats stats;
    const WeightedSignal u = solve_monotone(system, r, {}, &stats);
    EXPECT_LE((u.values() - solve_linear(augmented, r).values()).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_LE(stats.max_residual, 1e-10);
}

TEST(Monotone, ScalarInclusionSteadyState)
{
    // u' + u + rho sign(u) = f: steady state f - rho above yield, 0 below.
    for (double f : {3.0, 0.5}) {
        BlockSystem system = scalar_system(1.0, 1.0);
        system.relation = RelationPlacement{0, 1, soft_threshold_relation(1.0)};
        const TimeGrid grid(0.05, 600, 1.0);
        const WeightedSignal u =
            solve_monotone(system, WeightedSignal(grid, Eigen::MatrixXd::Constant(1, 600, f)));
        EXPECT_NEAR(u.at(599)(0), std::max(0.0, f - 1.0), 1e-7) << "f = " << f;
    }
}

TEST(Monotone, InclusionHoldsOnEveryStep)
{
    // Membership of (x_B, (b - K x)_B) in the graph of g, with the rest rows solved exactly.
    BlockSystem system = heat_system(5, 1.0 / 6.0);
    system.relation = RelationPlacement{5, 6, soft_threshold_relation(0.2)};
    const TimeGrid grid(0.01, 40, 1.0);
    const Eigen::MatrixXd r = 5.0 * random_matrix(11, 40, 3);
    MonotoneStepper stepper(system, grid.dt());
    Eigen::VectorXd x = Eigen::VectorXd::Zero(11);
    Eigen::VectorXd prev;
    for (std::size_t k = 0; k < 40; ++k) {
        stepper.prepare(k);
        const Eigen::VectorXd rhs = r.col(static_cast<Eigen::Index>(k));
        const MonotoneStepStats stats = stepper.step(rhs, k == 0 ? nullptr : &prev, x);
        EXPECT_LE(stats.residual, 1e-10);
        Eigen::VectorXd b = rhs;
        if (k > 0) {
            b += stepper.base().coupling() * prev / grid.dt();
        }
        const Eigen::VectorXd defect = b - stepper.base().step_matrix() * x;
        EXPECT_LE(defect.head(5).norm(), 1e-10);
        EXPECT_LE(system.relation->relation.membership_defect(x.segment(5, 6), defect.segment(5, 6)),
                  1e-8);
        prev = x;
    }
}

TEST(Monotone, DivergenceIsReported)
{
    BlockSystem system = scalar_system(1.0, 1.0);
    system.relation = RelationPlacement{0, 1, soft_threshold_relation(1.0)};
    StepOptions options;
    options.max_inner = 0;
    MonotoneStepper stepper(system, 0.01, options);
    stepper.prepare(0);
    Eigen::VectorXd x = Eigen::VectorXd::Zero(1);
    try {
        stepper.step(Eigen::VectorXd::Constant(1, 10.0), nullptr, x);
        FAIL() << "expected InnerIterationDiverged";
    } catch (const InnerIterationDiverged& e) {
        EXPECT_EQ(e.step(), 0u);
        EXPECT_EQ(e.trace().size(), 1u);
    }
}

TEST(Gain, ScalarSymbolOracle)
{
    // Scaled recursion u_k (1/dt + n) = r_k + e^{-nu dt} u_{k-1}/dt; its l2 gain is
    // the symbol maximum 1 / (n + (1 - e^{-nu dt}) / dt).
    const double n = 1.5;
    const double nu = 2.0;
    const TimeGrid grid(0.01, 600, nu);
    const GainEstimate g = gain_estimate(scalar_system(1.0, n, 1.5), grid, 2, 7, 30);
    const double oracle = 1.0 / (n + (1.0 - std::exp(-nu * grid.dt())) / grid.dt());
    EXPECT_LE(g.gain, oracle + 1e-12);
    EXPECT_GE(g.gain, 0.97 * oracle);
    EXPECT_LE(g.gain, g.bound);
}

TEST(Gain, BoundedByInverseCoercivityAndNonIncreasingInNu)
{
    const BlockSystem system = heat_system(8, 1.0 / 9.0);
    double last = std::numeric_limits<double>::infinity();
    for (double nu : {1.0, 4.0, 16.0}) {
        const TimeGrid grid(0.01, 100, nu);
        const GainEstimate g = gain_estimate(system, grid, 2);
        EXPECT_LE(g.gain, g.bound + g.excess_per_dt * grid.dt() + 1e-12);
        EXPECT_LE(g.gain, 1.0 / system.coercivity_c + 1e-9);
        // The sup sits at high frequencies where nu barely matters, so allow estimator noise.
        EXPECT_LE(g.gain, last * (1.0 + 1e-3));
        last = g.gain;
    }
}
