#include "sevo/models.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

namespace sevo {

namespace {

using Triplet = Eigen::Triplet<double>;

std::string fmt(double v)
{
    char buffer[64];
    std::snprintf(buffer, sizeof buffer, "%.17g", v);
    return buffer;
}

SparseOperator diagonal(const Eigen::VectorXd& d)
{
    std::vector<Triplet> triplets;
    triplets.reserve(static_cast<std::size_t>(d.size()));
    for (Eigen::Index i = 0; i < d.size(); ++i) {
        if (d[i] != 0.0) {
            triplets.emplace_back(static_cast<int>(i), static_cast<int>(i), d[i]);
        }
    }
    SparseOperator out(d.size(), d.size());
    out.setFromTriplets(triplets.begin(), triplets.end());
    out.makeCompressed();
    return out;
}

/// Two-block diagonal vector (first block n1 entries of x1, then n2 entries of x2).
Eigen::VectorXd stacked(const Eigen::VectorXd& first, double second, std::size_t n2)
{
    Eigen::VectorXd out(first.size() + static_cast<Eigen::Index>(n2));
    out.head(first.size()) = first;
    out.tail(static_cast<Eigen::Index>(n2)).setConstant(second);
    return out;
}

double sampled_minimum(const CoefficientProfile& a, double t_end, std::size_t samples = 512)
{
    double lowest = a.value(0.0);
    for (std::size_t i = 1; i < samples; ++i) {
        lowest = std::min(lowest, a.value(t_end * static_cast<double>(i) / (samples - 1)));
    }
    return lowest;
}

/// Lipschitz bound of b = 1/a from |b|_Lip <= |a|_Lip / c^2.
double inverse_lipschitz(const CoefficientProfile& a, double t_end)
{
    const double c = sampled_minimum(a, t_end);
    return a.lipschitz() / (c * c);
}

Forcing make_grid_forcing(const ForcingSpec& spec, std::size_t offset, std::size_t n_cells,
                          double h)
{
    if (spec.kind == ForcingSpec::Kind::zero) {
        return {};
    }
    Eigen::VectorXd shape(static_cast<Eigen::Index>(n_cells));
    switch (spec.kind) {
    case ForcingSpec::Kind::constant:
        shape.setConstant(spec.amplitude);
        break;
    case ForcingSpec::Kind::eigenmode: {
        const double length = static_cast<double>(n_cells + 1) * h;
        for (std::size_t i = 0; i < n_cells; ++i) {
            const double x = static_cast<double>(i + 1) * h;
            shape[static_cast<Eigen::Index>(i)] =
                spec.amplitude * std::sin(spec.mode * std::numbers::pi * x / length);
        }
        break;
    }
    default:
        throw PreconditionViolation("forcing shape not available on a 1D grid");
    }
    const double t_off = spec.t_off;
    const auto start = static_cast<Eigen::Index>(offset);
    return [shape, t_off, start](double t, Eigen::Ref<Eigen::VectorXd> out) {
        if (t <= t_off) {
            out.segment(start, shape.size()) += shape;
        }
    };
}

void check_profile(const CoefficientProfile& p, double t_end, const char* name)
{
    try {
        p.validate(t_end);
    } catch (const InvalidCoefficient& e) {
        throw InvalidCoefficient(std::string(name) + ": " + e.what());
    }
}

SpdeProblem build_heat_like(const std::vector<double>& p_mask, const HeatParams& params,
                            const std::string& name)
{
    const std::size_t n = params.n_cells;
    check_profile(params.a, params.t_end, "a");
    const GradDiv ops = build_grad_div_1d(n, params.h);
    const std::size_t dim = 2 * n + 1;
    Eigen::VectorXd p(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
        p[static_cast<Eigen::Index>(i)] = p_mask[i];
    }
    const Eigen::VectorXd one_minus_p = Eigen::VectorXd::Ones(p.size()) - p;
    const CoefficientProfile a = params.a;

    BlockSystem system{
        a.is_constant()
            ? OperatorFamily::constant(diagonal(stacked(p, a.inverse(0.0), n + 1)),
                                       diagonal(stacked(one_minus_p, 0.0, n + 1)))
            : OperatorFamily(
                  dim, [p, a, n](double t) { return diagonal(stacked(p, a.inverse(t), n + 1)); },
                  [one_minus_p, a, n](double t) {
                      return diagonal(stacked(one_minus_p, -a.inverse_derivative(t), n + 1));
                  },
                  [p, a, n](double t) {
                      return diagonal(
                          stacked(Eigen::VectorXd::Zero(p.size()), a.inverse_derivative(t), n + 1));
                  },
                  inverse_lipschitz(a, params.t_end)),
        assemble_block(ops.grad, -1).a,
        std::nullopt,
        params.coercivity_c};

    SpdeProblem problem{name, std::move(system), make_grid_forcing(params.forcing, 0, n, params.h),
                        make_noise(params.noise, n, 0), RhsPreprocess::apply_j};
    validate_problem(problem);
    return problem;
}

}  // namespace

CoefficientProfile::CoefficientProfile(Kind kind, double base, double amplitude, double rate)
    : kind_(kind), base_(base), amplitude_(amplitude), rate_(rate)
{
    if (!std::isfinite(base) || !std::isfinite(amplitude) || !std::isfinite(rate)) {
        throw InvalidCoefficient("profile parameters must be finite");
    }
}

CoefficientProfile CoefficientProfile::constant(double base)
{
    return {Kind::constant, base, 0.0, 0.0};
}

CoefficientProfile CoefficientProfile::sinusoidal(double base, double amplitude, double rate)
{
    return {Kind::sinusoidal, base, amplitude, rate};
}

CoefficientProfile CoefficientProfile::ramp_clamped(double base, double amplitude, double rate)
{
    return {Kind::ramp_clamped, base, amplitude, rate};
}

CoefficientProfile CoefficientProfile::custom(std::function<double(double)> a, double lipschitz,
                                              double fd_step)
{
    if (!a) {
        throw InvalidCoefficient("custom profile needs a function");
    }
    if (!(fd_step > 0.0)) {
        throw InvalidCoefficient("finite-difference step must be positive");
    }
    CoefficientProfile p(Kind::custom, 0.0, 0.0, 0.0);
    p.custom_ = std::move(a);
    p.custom_lipschitz_ = lipschitz;
    p.fd_step_ = fd_step;
    return p;
}

double CoefficientProfile::value(double t) const
{
    switch (kind_) {
    case Kind::constant:
        return base_;
    case Kind::sinusoidal:
        return base_ + amplitude_ * std::sin(rate_ * t);
    case Kind::ramp_clamped:
        return base_ + amplitude_ * std::clamp(rate_ * t, 0.0, 1.0);
    case Kind::custom:
        return custom_(t);
    }
    return base_;
}

double CoefficientProfile::derivative(double t) const
{
    switch (kind_) {
    case Kind::constant:
        return 0.0;
    case Kind::sinusoidal:
        return amplitude_ * rate_ * std::cos(rate_ * t);
    case Kind::ramp_clamped: {
        const double s = rate_ * t;
        return s > 0.0 && s < 1.0 ? amplitude_ * rate_ : 0.0;
    }
    case Kind::custom:
        return (custom_(t + fd_step_) - custom_(t - fd_step_)) / (2.0 * fd_step_);
    }
    return 0.0;
}

double CoefficientProfile::inverse_derivative(double t) const
{
    const double a = value(t);
    return -derivative(t) / (a * a);
}

double CoefficientProfile::lipschitz() const
{
    switch (kind_) {
    case Kind::constant:
        return 0.0;
    case Kind::sinusoidal:
    case Kind::ramp_clamped:
        return std::abs(amplitude_ * rate_);
    case Kind::custom:
        return custom_lipschitz_;
    }
    return 0.0;
}

void CoefficientProfile::validate(double t_end, double floor, std::size_t samples) const
{
    double span = std::max(t_end, 0.0);
    if (kind_ == Kind::sinusoidal && rate_ != 0.0) {
        span = std::max(span, 2.0 * std::numbers::pi / std::abs(rate_));
    } else if (kind_ == Kind::ramp_clamped && rate_ != 0.0) {
        span = std::max(span, 1.0 / std::abs(rate_));
    }
    samples = std::max<std::size_t>(samples, 2);
    for (std::size_t i = 0; i < samples; ++i) {
        const double t = span * static_cast<double>(i) / static_cast<double>(samples - 1);
        const double a = value(t);
        if (!std::isfinite(a) || a < floor) {
            throw InvalidCoefficient(describe() + " is not positive: a(t) = " + fmt(a) +
                                     " at t = " + fmt(t));
        }
    }
}

std::string CoefficientProfile::describe() const
{
    switch (kind_) {
    case Kind::constant:
        return "constant(" + fmt(base_) + ")";
    case Kind::sinusoidal:
        return "sinusoidal(" + fmt(base_) + ", " + fmt(amplitude_) + ", " + fmt(rate_) + ")";
    case Kind::ramp_clamped:
        return "ramp_clamped(" + fmt(base_) + ", " + fmt(amplitude_) + ", " + fmt(rate_) + ")";
    case Kind::custom:
        return "custom";
    }
    return "unknown";
}

NoiseSpec make_noise(const NoiseConfig& config, std::size_t dim_h, std::size_t offset)
{
    NoiseSpec noise;
    noise.driver = config.driver;
    const Eigen::MatrixXd phi = config.common_driver
                                    ? Eigen::MatrixXd(Eigen::MatrixXd::Ones(
                                          static_cast<Eigen::Index>(dim_h), 1))
                                    : Eigen::MatrixXd(Eigen::MatrixXd::Identity(
                                          static_cast<Eigen::Index>(dim_h),
                                          static_cast<Eigen::Index>(dim_h)));
    noise.sigma = config.sigma_kind == SigmaKind::clamped
                      ? SigmaSpec::clamped(config.gain, config.clamp, phi)
                      : SigmaSpec::multiplicative(config.gain, phi);
    const auto dim_g = phi.cols();
    if (config.driver == DriverKind::wiener) {
        noise.q = config.q.size() == 0 ? Eigen::MatrixXd(Eigen::MatrixXd::Identity(dim_g, dim_g))
                                       : config.q;
    } else {
        noise.rate = config.rate;
        noise.jump = config.jump.size() == 0 ? Eigen::VectorXd(Eigen::VectorXd::Ones(dim_g))
                                             : config.jump;
    }
    noise.source_offset = offset;
    noise.target_offset = offset;
    return noise;
}

SpdeProblem build_heat(const HeatParams& params)
{
    return build_heat_like(std::vector<double>(params.n_cells, 0.0), params, "heat");
}

SpdeProblem build_mixed(const std::vector<int>& mask, const HeatParams& params)
{
    if (mask.size() != params.n_cells) {
        throw InvalidMask("mask has " + std::to_string(mask.size()) + " entries, expected " +
                          std::to_string(params.n_cells));
    }
    std::vector<double> p(mask.size());
    for (std::size_t i = 0; i < mask.size(); ++i) {
        if (mask[i] != 0 && mask[i] != 1) {
            throw InvalidMask("mask entry " + std::to_string(i) + " is " +
                              std::to_string(mask[i]) + ", expected 0 or 1");
        }
        p[i] = mask[i];
    }
    return build_heat_like(p, params, "mixed");
}

SpdeProblem build_maxwell(const MaxwellParams& params)
{
    check_profile(params.eps, params.t_end, "eps");
    check_profile(params.mu, params.t_end, "mu");
    if (!(params.eta >= 0.0)) {
        throw InvalidCoefficient("conductivity must be non-negative, got " + fmt(params.eta));
    }
    const YeeLayout layout(params.nx, params.ny, params.nz, params.h);
    const CurlPair curls = build_curl_pair_3d(params.nx, params.ny, params.nz, params.h);
    const std::size_t ne = layout.n_edges();
    const std::size_t nf = layout.n_faces();
    const std::size_t dim = ne + nf;
    const CoefficientProfile eps = params.eps;
    const CoefficientProfile mu = params.mu;
    const double eta = params.eta;
    auto two_block = [ne, nf](double e, double f) {
        return diagonal(stacked(Eigen::VectorXd::Constant(static_cast<Eigen::Index>(ne), e), f, nf));
    };

    OperatorFamily family =
        eps.is_constant() && mu.is_constant()
            ? OperatorFamily::constant(two_block(eps.value(0.0), mu.value(0.0)),
                                       two_block(eta, 0.0))
            : OperatorFamily(
                  dim, [=](double t) { return two_block(eps.value(t), mu.value(t)); },
                  [=](double) { return two_block(eta, 0.0); },
                  [=](double t) { return two_block(eps.derivative(t), mu.derivative(t)); },
                  std::max(eps.lipschitz(), mu.lipschitz()));
    BlockSystem system{std::move(family), assemble_block(curls.curl_ring, -1).a, std::nullopt,
                       params.coercivity_c};

    Forcing forcing;
    const ForcingSpec spec = params.forcing;
    if (spec.kind == ForcingSpec::Kind::constant) {
        const auto n_e = static_cast<Eigen::Index>(ne);
        forcing = [spec, n_e](double t, Eigen::Ref<Eigen::VectorXd> out) {
            if (t <= spec.t_off) {
                out.head(n_e).array() += spec.amplitude;
            }
        };
    } else if (spec.kind == ForcingSpec::Kind::cavity_mode) {
        Eigen::VectorXd shape = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(ne));
        const double lx = static_cast<double>(params.nx) * params.h;
        const double ly = static_cast<double>(params.ny) * params.h;
        for (std::size_t e = 0; e < ne; ++e) {
            int axis = 0;
            const auto x = layout.edge_midpoint(e, &axis);
            if (axis == 2) {
                shape[static_cast<Eigen::Index>(e)] = spec.amplitude *
                                                      std::sin(std::numbers::pi * x[0] / lx) *
                                                      std::sin(std::numbers::pi * x[1] / ly);
            }
        }
        forcing = [spec, shape](double t, Eigen::Ref<Eigen::VectorXd> out) {
            if (t <= spec.t_off) {
                out.head(shape.size()) += shape;
            }
        };
    } else if (spec.kind == ForcingSpec::Kind::eigenmode) {
        throw PreconditionViolation("eigenmode forcing is defined for 1D grids only");
    }

    SpdeProblem problem{"maxwell", std::move(system), std::move(forcing),
                        make_noise(params.noise, dim, 0), RhsPreprocess::none};
    validate_problem(problem);
    return problem;
}

ViscoplasticLayout viscoplastic_layout(const ViscoplasticParams& params)
{
    ViscoplasticLayout l;
    l.u_offset = 0;
    l.u_size = params.n_cells;
    l.w_offset = l.u_size;
    l.w_size = static_cast<std::size_t>(params.b.size()) * (params.n_cells + 1);
    l.t_offset = l.w_offset + l.w_size;
    l.t_size = params.n_cells + 1;
    return l;
}

SpdeProblem build_viscoplastic(const ViscoplasticParams& params)
{
    check_profile(params.r, params.t_end, "R");
    check_profile(params.d, params.t_end, "D");
    check_profile(params.l, params.t_end, "L");
    if (params.b.size() == 0) {
        throw ShapeMismatch("B needs at least one internal variable");
    }
    const ViscoplasticLayout lay = viscoplastic_layout(params);
    const std::size_t dim = lay.t_offset + lay.t_size;
    const auto n_int = static_cast<std::size_t>(params.b.size());
    const Eigen::RowVectorXd b = params.b;
    const double b_sq = b.squaredNorm();

    // 3x3 block matrix from scalar coefficients r (u), l_inv (w) and d_inv (T^):
    // [[r, 0, 0], [0, l_inv, -l_inv B*], [0, -B l_inv, d_inv + B l_inv B*]].
    auto assemble = [lay, n_int, b, b_sq](double r, double l_inv, double d_inv) {
        std::vector<Triplet> t;
        for (std::size_t i = 0; i < lay.u_size; ++i) {
            if (r != 0.0) {
                t.emplace_back(static_cast<int>(lay.u_offset + i), static_cast<int>(lay.u_offset + i), r);
            }
        }
        for (std::size_t f = 0; f < lay.t_size; ++f) {
            const int tf = static_cast<int>(lay.t_offset + f);
            for (std::size_t j = 0; j < n_int; ++j) {
                const int wj = static_cast<int>(lay.w_offset + f * n_int + j);
                if (l_inv != 0.0) {
                    t.emplace_back(wj, wj, l_inv);
                }
                const double off = -l_inv * b[static_cast<Eigen::Index>(j)];
                if (off != 0.0) {
                    t.emplace_back(wj, tf, off);
                    t.emplace_back(tf, wj, off);
                }
            }
            const double diag = d_inv + l_inv * b_sq;
            if (diag != 0.0) {
                t.emplace_back(tf, tf, diag);
            }
        }
        SparseOperator out(static_cast<Eigen::Index>(lay.t_offset + lay.t_size),
                           static_cast<Eigen::Index>(lay.t_offset + lay.t_size));
        out.setFromTriplets(t.begin(), t.end());
        out.makeCompressed();
        return out;
    };

    const CoefficientProfile r = params.r;
    const CoefficientProfile d = params.d;
    const CoefficientProfile l = params.l;
    auto n_of = [assemble](double d_inv_prime) { return assemble(0.0, 0.0, -d_inv_prime); };
    const bool constant = r.is_constant() && d.is_constant() && l.is_constant();
    OperatorFamily family =
        constant ? OperatorFamily::constant(
                       assemble(r.value(0.0), l.inverse(0.0), d.inverse(0.0)), n_of(0.0))
                 : OperatorFamily(
                       dim,
                       [=](double t) { return assemble(r.value(t), l.inverse(t), d.inverse(t)); },
                       [=](double t) { return n_of(d.inverse_derivative(t)); },
                       [=](double t) {
                           return assemble(r.derivative(t), l.inverse_derivative(t),
                                           d.inverse_derivative(t));
                       },
                       r.lipschitz() + (inverse_lipschitz(l, params.t_end) +
                                        inverse_lipschitz(d, params.t_end)) *
                                           (1.0 + b_sq));

    const GradDiv ops = build_grad_div_1d(params.n_cells, params.h);
    RelationPlacement placement{lay.w_offset, lay.w_size, params.g};
    BlockSystem system{std::move(family), assemble_block(ops.grad, +1, lay.w_size).a,
                       std::optional<RelationPlacement>(std::move(placement)),
                       params.coercivity_c};

    SpdeProblem problem{"viscoplastic", std::move(system),
                        make_grid_forcing(params.forcing, lay.u_offset, params.n_cells, params.h),
                        make_noise(params.noise, lay.u_size, lay.u_offset), RhsPreprocess::apply_j};
    validate_problem(problem);
    return problem;
}

SpdeProblem without_relation_block(const SpdeProblem& problem)
{
    if (!problem.system.relation) {
        return problem;
    }
    const std::size_t dim = problem.system.dim();
    const std::size_t off = problem.system.relation->offset;
    const std::size_t size = problem.system.relation->size;
    const std::size_t kept = dim - size;
    std::vector<Triplet> sel;
    for (std::size_t i = 0, row = 0; i < dim; ++i) {
        if (i < off || i >= off + size) {
            sel.emplace_back(static_cast<int>(row++), static_cast<int>(i), 1.0);
        }
    }
    SparseOperator p(static_cast<Eigen::Index>(kept), static_cast<Eigen::Index>(dim));
    p.setFromTriplets(sel.begin(), sel.end());
    const SparseOperator pt = p.transpose();
    auto restrict = [p, pt](const SparseOperator& op) {
        SparseOperator out = p * op * pt;
        out.makeCompressed();
        return out;
    };

    const OperatorFamily& full = problem.system.family;
    OperatorFamily family =
        full.is_constant()
            ? OperatorFamily::constant(restrict(full.m(0.0)), restrict(full.n(0.0)))
            : OperatorFamily(
                  kept, [full, restrict](double t) { return restrict(full.m(t)); },
                  [full, restrict](double t) { return restrict(full.n(t)); },
                  [full, restrict](double t) { return restrict(full.m_prime(t)); },
                  full.lipschitz_m());

    auto shift = [off, size](std::size_t index, std::size_t width) {
        if (index + width <= off) {
            return index;
        }
        if (index >= off + size) {
            return index - size;
        }
        throw PreconditionViolation("noise block overlaps the removed relation block");
    };

    SpdeProblem out = problem;
    out.model = problem.model + "_elastic";
    out.system = BlockSystem{std::move(family), restrict(problem.system.a), std::nullopt,
                             problem.system.coercivity_c};
    if (problem.noise.sigma) {
        const std::size_t h = problem.noise.sigma->dim_h();
        out.noise.source_offset = shift(problem.noise.source_offset, h);
        out.noise.target_offset = shift(problem.noise.target_offset, h);
    }
    if (problem.forcing) {
        const Forcing base = problem.forcing;
        const auto n_full = static_cast<Eigen::Index>(dim);
        out.forcing = [base, p, n_full](double t, Eigen::Ref<Eigen::VectorXd> value) {
            Eigen::VectorXd whole = Eigen::VectorXd::Zero(n_full);
            base(t, whole);
            value += p * whole;
        };
    }
    return out;
}

}  // namespace sevo
