#pragma once

#include "sevo/spde_solver.hpp"

#include <Eigen/Dense>

#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace sevo {

/// Scalar, time-dependent material coefficient a(t) (isotropic: a(t) * I).
///
///   constant:     a(t) = base
///   sinusoidal:   a(t) = base + amplitude * sin(rate * t)
///   ramp_clamped: a(t) = base + amplitude * clamp(rate * t, 0, 1)
///   custom:       user function; a' by central differences
///
/// The inverse b = 1/a and its derivative b' = -a' / a^2 are analytic for
/// the built-in kinds.
class CoefficientProfile {
public:
    enum class Kind { constant, sinusoidal, ramp_clamped, custom };

    static CoefficientProfile constant(double base);
    static CoefficientProfile sinusoidal(double base, double amplitude, double rate);
    static CoefficientProfile ramp_clamped(double base, double amplitude, double rate);
    static CoefficientProfile custom(std::function<double(double)> a, double lipschitz,
                                     double fd_step = 1e-6);

    Kind kind() const { return kind_; }
    double base() const { return base_; }
    double amplitude() const { return amplitude_; }
    double rate() const { return rate_; }

    double value(double t) const;
    double derivative(double t) const;
    double inverse(double t) const { return 1.0 / value(t); }
    double inverse_derivative(double t) const;

    /// Bound on |a(t) - a(s)| / |t - s|.
    double lipschitz() const;
    bool is_constant() const { return kind_ == Kind::constant; }

    /// Throws InvalidCoefficient with the first sampled t where a(t) < floor.
    /// Samples [0, t_end] and one full period of periodic profiles.
    void validate(double t_end, double floor = 1e-12, std::size_t samples = 4096) const;

    std::string describe() const;

private:
    CoefficientProfile(Kind kind, double base, double amplitude, double rate);

    Kind kind_;
    double base_;
    double amplitude_;
    double rate_;
    std::function<double(double)> custom_;
    double custom_lipschitz_ = 0.0;
    double fd_step_ = 1e-6;
};

/// Space-time shape of the deterministic forcing of the first equation row.
///
///   zero
///   constant:    amplitude everywhere in the forced block
///   eigenmode:   amplitude * sin(mode * pi * x / length) on the 1D grid
///   cavity_mode: z-directed current amplitude * sin(pi x / Lx) sin(pi y / Ly)
/// The forcing is switched off for t > t_off.
struct ForcingSpec {
    enum class Kind { zero, constant, eigenmode, cavity_mode };
    Kind kind = Kind::zero;
    double amplitude = 1.0;
    int mode = 1;
    double t_off = std::numeric_limits<double>::infinity();
};

/// Where the multiplicative noise comes from: sigma(u) = gain * diag(g(u)) * Phi.
struct NoiseConfig {
    DriverKind driver = DriverKind::wiener;
    double gain = 0.0;
    SigmaKind sigma_kind = SigmaKind::multiplicative;
    double clamp = 1.0;
    /// Phi = I (one driver component per state entry) or a single common column of ones.
    bool common_driver = false;
    Eigen::MatrixXd q;  ///< optional Wiener covariance; identity when empty
    double rate = 1.0;
    Eigen::VectorXd jump;  ///< Poisson jumps; ones when empty
};

/// Builds the NoiseSpec acting on [offset, offset + dim_h).
NoiseSpec make_noise(const NoiseConfig& config, std::size_t dim_h, std::size_t offset);

struct HeatParams {
    std::size_t n_cells = 8;
    double h = 1.0 / 9.0;
    CoefficientProfile a = CoefficientProfile::constant(1.0);
    NoiseConfig noise;
    ForcingSpec forcing;
    double coercivity_c = 1.0;
    double t_end = 1.0;  ///< horizon used for coefficient validation
};

/// State (u on n_cells interior nodes, q on n_cells + 1 faces);
/// M = diag(0, b), N = diag(1, -b'), A = [[0, div], [grad, 0]], rhs = (J f + I sigma(u), 0).
SpdeProblem build_heat(const HeatParams& params);

/// Mixed heat/wave system: M = diag(P, b), N = diag(1 - P, -b'), P from a 0/1 mask per cell.
/// Throws InvalidMask unless mask has n_cells entries in {0, 1}.
SpdeProblem build_mixed(const std::vector<int>& mask, const HeatParams& params);

struct MaxwellParams {
    std::size_t nx = 4;
    std::size_t ny = 4;
    std::size_t nz = 4;
    double h = 0.25;
    CoefficientProfile eps = CoefficientProfile::constant(1.0);
    CoefficientProfile mu = CoefficientProfile::constant(1.0);
    double eta = 0.0;
    NoiseConfig noise;
    ForcingSpec forcing;
    double coercivity_c = 1.0;
    double t_end = 1.0;
};

/// State (E on interior edges, H on faces); M = diag(eps, mu), N = diag(eta, 0),
/// A = [[0, -curl], [curl_ring, 0]]; noise acts on the full state.
SpdeProblem build_maxwell(const MaxwellParams& params);

struct ViscoplasticParams {
    std::size_t n_cells = 8;
    double h = 1.0 / 9.0;
    CoefficientProfile r = CoefficientProfile::constant(1.0);
    CoefficientProfile d = CoefficientProfile::constant(1.0);
    CoefficientProfile l = CoefficientProfile::constant(1.0);
    Eigen::RowVectorXd b = Eigen::RowVectorXd::Ones(1);  ///< N internal variables -> strain
    MonotoneRelation g = zero_relation();
    NoiseConfig noise;
    ForcingSpec forcing;
    double coercivity_c = 1.0;
    double t_end = 1.0;
};

/// State (u on n_cells nodes, w = N internal variables per face, T^ on faces) with
/// M = [[R, 0, 0], [0, L^-1, -L^-1 B*], [0, -B L^-1, D^-1 + B L^-1 B*]],
/// N = diag(0, 0, -(D^-1)'), A = [[0, 0, -div], [0, g, 0], [-grad, 0, 0]].
SpdeProblem build_viscoplastic(const ViscoplasticParams& params);

/// Offsets of the three viscoplastic blocks.
struct ViscoplasticLayout {
    std::size_t u_offset = 0;
    std::size_t u_size = 0;
    std::size_t w_offset = 0;
    std::size_t w_size = 0;
    std::size_t t_offset = 0;
    std::size_t t_size = 0;
};
ViscoplasticLayout viscoplastic_layout(const ViscoplasticParams& params);

/// Copy of the problem with the relation block's rows and columns removed
/// (the purely elastic system obtained when the internal variables vanish).
SpdeProblem without_relation_block(const SpdeProblem& problem);

}  // namespace sevo
