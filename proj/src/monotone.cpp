#include "sevo/monotone.hpp"

#include "sevo/errors.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <memory>

namespace sevo {

MonotoneRelation::MonotoneRelation(std::string label, Resolvent resolvent,
                                   MembershipDefect defect)
    : label_(std::move(label)), resolvent_(std::move(resolvent)), defect_(std::move(defect))
{}

Eigen::VectorXd MonotoneRelation::resolve(double lambda, const Eigen::VectorXd& w) const
{
    if (!(lambda > 0.0)) {
        throw PreconditionViolation("resolvent parameter must be positive");
    }
    return resolvent_(lambda, w);
}

double MonotoneRelation::membership_defect(const Eigen::VectorXd& x,
                                           const Eigen::VectorXd& y) const
{
    if (!defect_) {
        throw PreconditionViolation("relation '" + label_ + "' has no membership test");
    }
    return defect_(x, y);
}

MonotoneRelation zero_relation()
{
    return MonotoneRelation(
        "zero", [](double, const Eigen::VectorXd& w) { return w; },
        [](const Eigen::VectorXd&, const Eigen::VectorXd& y) { return y.norm(); });
}

MonotoneRelation soft_threshold_relation(double rho)
{
    if (!(rho >= 0.0)) {
        throw PreconditionViolation("yield level must be non-negative");
    }
    auto resolvent = [rho](double lambda, const Eigen::VectorXd& w) {
        const double level = lambda * rho;
        Eigen::VectorXd x(w.size());
        for (Eigen::Index i = 0; i < w.size(); ++i) {
            const double shrunk = std::abs(w[i]) - level;
            x[i] = shrunk > 0.0 ? std::copysign(shrunk, w[i]) : 0.0;
        }
        return x;
    };
    // y in rho*sign(x): |y_i| <= rho where x_i = 0, y_i = rho*sign(x_i) elsewhere.
    auto defect = [rho](const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
        double sq = 0.0;
        for (Eigen::Index i = 0; i < x.size(); ++i) {
            const double d = x[i] == 0.0 ? std::max(0.0, std::abs(y[i]) - rho)
                                         : y[i] - std::copysign(rho, x[i]);
            sq += d * d;
        }
        return std::sqrt(sq);
    };
    return MonotoneRelation("soft_threshold", resolvent, defect);
}

MonotoneRelation linear_psd_relation(const Eigen::MatrixXd& k)
{
    if (k.rows() != k.cols() || (k - k.transpose()).cwiseAbs().maxCoeff() > 1e-12) {
        throw PreconditionViolation("linear relation needs a symmetric matrix");
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(k);
    if (eig.eigenvalues().minCoeff() < -1e-12) {
        throw PreconditionViolation("linear relation needs a positive semidefinite matrix");
    }
    auto basis = std::make_shared<const Eigen::MatrixXd>(eig.eigenvectors());
    auto spectrum = std::make_shared<const Eigen::VectorXd>(eig.eigenvalues().cwiseMax(0.0));
    auto resolvent = [basis, spectrum](double lambda, const Eigen::VectorXd& w) {
        const Eigen::VectorXd scale = (1.0 + lambda * spectrum->array()).inverse();
        return Eigen::VectorXd(*basis * (scale.asDiagonal() * (basis->transpose() * w)));
    };
    auto defect = [k](const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
        return (y - k * x).norm();
    };
    return MonotoneRelation("linear_psd", resolvent, defect);
}

}  // namespace sevo
