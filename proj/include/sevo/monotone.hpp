#pragma once

#include <Eigen/Dense>

#include <functional>
#include <string>

namespace sevo {

/// Maximal monotone relation g with (0, 0) in g, accessed through its
/// resolvent (I + lambda g)^{-1}.
///
/// `membership_defect(x, y)` measures how far the pair (x, y) is from the
/// graph of g (0 when y in g(x)); the built-ins provide it in closed form so
/// solvers can audit their inclusions independently of the resolvent.
class MonotoneRelation {
public:
    using Resolvent = std::function<Eigen::VectorXd(double, const Eigen::VectorXd&)>;
    using MembershipDefect =
        std::function<double(const Eigen::VectorXd&, const Eigen::VectorXd&)>;

    MonotoneRelation(std::string label, Resolvent resolvent, MembershipDefect defect = {});

    const std::string& label() const { return label_; }

    /// (I + lambda g)^{-1} w; requires lambda > 0.
    Eigen::VectorXd resolve(double lambda, const Eigen::VectorXd& w) const;

    bool has_membership_defect() const { return static_cast<bool>(defect_); }
    double membership_defect(const Eigen::VectorXd& x, const Eigen::VectorXd& y) const;

    /// True for the zero relation (the resolvent is the identity).
    bool is_zero() const { return label_ == "zero"; }

private:
    std::string label_;
    Resolvent resolvent_;
    MembershipDefect defect_;
};

MonotoneRelation zero_relation();

/// g = subdifferential of rho*|.|_1, componentwise; the resolvent is soft thresholding.
MonotoneRelation soft_threshold_relation(double rho);

/// g(x) = K x for symmetric positive semidefinite K.
MonotoneRelation linear_psd_relation(const Eigen::MatrixXd& k);

}  // namespace sevo
