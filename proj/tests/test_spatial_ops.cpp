#include "sevo/errors.hpp"
#include "sevo/spatial_ops.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <sstream>

using namespace sevo;

namespace {

Eigen::MatrixXd dense(const SparseOperator& op) { return Eigen::MatrixXd(op); }

}  // namespace

TEST(GradDiv1d, ShapesAndAdjointness)
{
    const GradDiv ops = build_grad_div_1d(5, 0.2);
    EXPECT_EQ(ops.grad.rows(), 6);
    EXPECT_EQ(ops.grad.cols(), 5);
    EXPECT_EQ(dense(ops.div), -dense(ops.grad).transpose());
    EXPECT_THROW(build_grad_div_1d(0, 0.1), InvalidGrid);
    EXPECT_THROW(build_grad_div_1d(4, 0.0), InvalidGrid);
}

TEST(GradDiv1d, SineIsDiscreteEigenfunction)
{
    const std::size_t n = 64;
    const double h = 1.0 / 65.0;
    const GradDiv ops = build_grad_div_1d(n, h);
    const Eigen::MatrixXd laplace = -dense(ops.div * ops.grad);
    for (int mode : {1, 2, 7}) {
        Eigen::VectorXd u(n);
        for (std::size_t i = 0; i < n; ++i) {
            u(static_cast<Eigen::Index>(i)) =
                std::sin(mode * std::numbers::pi * static_cast<double>(i + 1) * h);
        }
        const double s = std::sin(mode * std::numbers::pi * h / 2.0);
        const double lambda = 4.0 / (h * h) * s * s;
        EXPECT_LE((laplace * u - lambda * u).norm(), 1e-10 * lambda * u.norm());
        const double continuum = mode * mode * std::numbers::pi * std::numbers::pi;
        EXPECT_NEAR(lambda / continuum, 1.0, 2e-3 * mode * mode);
    }
}

TEST(GradDiv2d, FivePointLaplacian)
{
    const std::size_t nx = 4;
    const std::size_t ny = 3;
    const double h = 0.5;
    const GradDiv ops = build_grad_div_2d(nx, ny, h);
    EXPECT_EQ(ops.grad.rows(), static_cast<Eigen::Index>((nx + 1) * ny + nx * (ny + 1)));
    EXPECT_EQ(dense(ops.div), -dense(ops.grad).transpose());
    const Eigen::MatrixXd laplace = dense(ops.div * ops.grad);
    for (std::size_t j = 0; j < ny; ++j) {
        for (std::size_t i = 0; i < nx; ++i) {
            const auto c = static_cast<Eigen::Index>(i + nx * j);
            EXPECT_DOUBLE_EQ(laplace(c, c), -4.0 / (h * h));
            if (i + 1 < nx) {
                EXPECT_DOUBLE_EQ(laplace(c, c + 1), 1.0 / (h * h));
            }
            if (j + 1 < ny) {
                EXPECT_DOUBLE_EQ(laplace(c, c + static_cast<Eigen::Index>(nx)), 1.0 / (h * h));
            }
        }
    }
    EXPECT_THROW(build_grad_div_2d(1, 3, h), InvalidGrid);
}

TEST(Yee, CountsMatchInteriorEdgesAndFaces)
{
    const YeeLayout layout(3, 4, 5, 0.1);
    const std::size_t edges = 3 * 3 * 4 + 2 * 4 * 4 + 2 * 3 * 5;
    const std::size_t faces = 4 * 4 * 5 + 3 * 5 * 5 + 3 * 4 * 6;
    EXPECT_EQ(layout.n_edges(), edges);
    EXPECT_EQ(layout.n_faces(), faces);
    EXPECT_EQ(layout.n_nodes(), 2u * 3u * 4u);
    EXPECT_EQ(layout.edge(0, 0, 0, 1), -1);
    EXPECT_GE(layout.edge(0, 0, 1, 1), 0);
    EXPECT_THROW(YeeLayout(1, 4, 4, 0.1), InvalidGrid);
}

TEST(Yee, CurlOfGradientVanishes)
{
    const CurlPair pair = build_curl_pair_3d(4, 5, 6, 0.3);
    const SparseOperator grad = build_node_grad_3d(4, 5, 6, 0.3);
    const SparseOperator product = pair.curl_ring * grad;
    double worst = 0.0;
    for (int k = 0; k < product.outerSize(); ++k) {
        for (SparseOperator::InnerIterator it(product, k); it; ++it) {
            worst = std::max(worst, std::abs(it.value()));
        }
    }
    EXPECT_EQ(worst, 0.0);
    EXPECT_EQ(dense(pair.curl), dense(pair.curl_ring).transpose());
}

TEST(Yee, CavityModeDispersion)
{
    // E_y = sin(pi x / L) sin(pi z / L) on y-edges is an exact eigenvector of
    // curl curl with eigenvalue (8 / h^2) sin^2(pi h / (2 L)).
    const std::size_t n = 32;
    const double h = 1.0 / static_cast<double>(n);
    const YeeLayout layout(n, n, n, h);
    const CurlPair pair = build_curl_pair_3d(n, n, n, h);
    Eigen::VectorXd e = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(layout.n_edges()));
    for (std::size_t i = 0; i < layout.n_edges(); ++i) {
        int axis = 0;
        const auto x = layout.edge_midpoint(i, &axis);
        if (axis == 1) {
            e(static_cast<Eigen::Index>(i)) =
                std::sin(std::numbers::pi * x[0]) * std::sin(std::numbers::pi * x[2]);
        }
    }
    const Eigen::VectorXd ce = pair.curl * (pair.curl_ring * e);
    const double s = std::sin(std::numbers::pi * h / 2.0);
    const double lambda = 8.0 / (h * h) * s * s;
    EXPECT_LE((ce - lambda * e).norm(), 1e-9 * lambda * e.norm());
    const double rayleigh = e.dot(ce) / e.squaredNorm();
    EXPECT_NEAR(rayleigh / (2.0 * std::numbers::pi * std::numbers::pi), 1.0, 2e-3);
}

TEST(SkewBlock, ExactSkewness1d2d3d)
{
    const GradDiv one = build_grad_div_1d(16, 1.0 / 17.0);
    for (int sign : {1, -1}) {
        EXPECT_EQ(max_skew_defect(assemble_block(one.grad, sign).a), 0.0);
        EXPECT_EQ(max_skew_defect(assemble_block(one.grad, sign, 5).a), 0.0);
    }
    const GradDiv two = build_grad_div_2d(6, 5, 0.1);
    EXPECT_EQ(max_skew_defect(assemble_block(two.grad, -1).a), 0.0);
    const CurlPair yee = build_curl_pair_3d(32, 32, 32, 1.0 / 32.0);
    const SkewBlockOperator block = assemble_block(yee.curl_ring, -1);
    EXPECT_EQ(max_skew_defect(block.a), 0.0);
    EXPECT_EQ(block.dim(), static_cast<std::size_t>(yee.curl_ring.rows() + yee.curl_ring.cols()));
    EXPECT_THROW(assemble_block(one.grad, 2), PreconditionViolation);
}

TEST(SkewBlock, BlockLayout)
{
    const GradDiv ops = build_grad_div_1d(3, 0.25);
    const SkewBlockOperator block = assemble_block(ops.grad, -1, 2);
    const Eigen::MatrixXd a = dense(block.a);
    const Eigen::MatrixXd c = dense(ops.grad);
    EXPECT_EQ(a.rows(), 3 + 2 + 4);
    EXPECT_EQ(a.block(0, 5, 3, 4), -c.transpose());
    EXPECT_EQ(a.block(5, 0, 4, 3), c);
    EXPECT_TRUE(a.block(3, 0, 2, 9).isZero(0.0));
    EXPECT_TRUE(a.block(0, 3, 9, 2).isZero(0.0));
}

TEST(Triplets, WritesOneLinePerEntry)
{
    const GradDiv ops = build_grad_div_1d(2, 0.5);
    std::ostringstream out;
    write_triplets(out, ops.grad);
    std::istringstream in(out.str());
    int rows = 0;
    long r = 0;
    long c = 0;
    double v = 0.0;
    while (in >> r >> c >> v) {
        EXPECT_DOUBLE_EQ(v, ops.grad.coeff(r, c));
        ++rows;
    }
    EXPECT_EQ(rows, ops.grad.nonZeros());
}
