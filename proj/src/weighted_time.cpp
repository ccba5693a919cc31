#include "sevo/weighted_time.hpp"

#include "sevo/errors.hpp"

#include <cmath>
#include <string>

namespace sevo {

TimeGrid::TimeGrid(double dt, std::size_t n_steps, double nu)
    : dt_(dt), n_steps_(n_steps), nu_(nu)
{
    if (!(dt > 0.0) || !std::isfinite(dt)) {
        throw InvalidGrid("time step must be positive, got " + std::to_string(dt));
    }
    if (n_steps == 0) {
        throw InvalidGrid("time grid needs at least one step");
    }
    if (!(nu > 0.0) || !std::isfinite(nu)) {
        throw InvalidGrid("weight nu must be positive, got " + std::to_string(nu));
    }
}

double TimeGrid::weight(std::size_t k) const
{
    return std::exp(-2.0 * nu_ * time(k)) * dt_;
}

std::optional<std::size_t> TimeGrid::last_index_at_or_before(double t) const
{
    if (t < 0.0) {
        return std::nullopt;
    }
    // Tolerate round-off so that t = k*dt computed elsewhere keeps index k.
    const double ratio = t / dt_;
    const double k = std::floor(ratio + 1e-9 * std::max(1.0, ratio));
    if (k >= static_cast<double>(n_steps_ - 1)) {
        return n_steps_ - 1;
    }
    return static_cast<std::size_t>(k);
}

WeightedSignal::WeightedSignal(const TimeGrid& grid, std::size_t dim)
    : grid_(grid),
      values_(Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(dim),
                                    static_cast<Eigen::Index>(grid.n_steps())))
{}

WeightedSignal::WeightedSignal(const TimeGrid& grid, Eigen::MatrixXd values)
    : grid_(grid), values_(std::move(values))
{
    if (static_cast<std::size_t>(values_.cols()) != grid_.n_steps()) {
        throw ShapeMismatch("signal has " + std::to_string(values_.cols()) +
                            " samples but grid has " + std::to_string(grid_.n_steps()));
    }
}

double weighted_norm(const WeightedSignal& u)
{
    const TimeGrid& grid = u.grid();
    double sum = 0.0;
    for (std::size_t k = 0; k < grid.n_steps(); ++k) {
        sum += u.at(k).squaredNorm() * grid.weight(k);
    }
    return std::sqrt(sum);
}

WeightedSignal integrate(const WeightedSignal& u)
{
    WeightedSignal out(u.grid(), u.dim());
    const double dt = u.grid().dt();
    Eigen::VectorXd running = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(u.dim()));
    for (std::size_t k = 0; k < u.n_steps(); ++k) {
        running += u.at(k);
        out.at(k) = dt * running;
    }
    return out;
}

WeightedSignal differentiate(const WeightedSignal& u)
{
    WeightedSignal out(u.grid(), u.dim());
    const double dt = u.grid().dt();
    out.at(0) = u.at(0) / dt;
    for (std::size_t k = 1; k < u.n_steps(); ++k) {
        out.at(k) = (u.at(k) - u.at(k - 1)) / dt;
    }
    return out;
}

WeightedSignal truncate(const WeightedSignal& u, double t)
{
    WeightedSignal out(u.grid(), u.dim());
    if (const auto last = u.grid().last_index_at_or_before(t)) {
        const auto n = static_cast<Eigen::Index>(*last + 1);
        out.values().leftCols(n) = u.values().leftCols(n);
    }
    return out;
}

double causality_defect(const SignalMap& map, const WeightedSignal& u,
                        const WeightedSignal& v, double t)
{
    if (!u.grid().same_axis(v.grid()) || u.dim() != v.dim()) {
        throw ShapeMismatch("causality_defect inputs live on different grids");
    }
    if (truncate(u, t).values() != truncate(v, t).values()) {
        throw PreconditionViolation("inputs differ at or before t = " + std::to_string(t));
    }
    const WeightedSignal fu = map(u);
    const WeightedSignal fv = map(v);
    WeightedSignal diff(fu.grid(), fu.values() - fv.values());
    return weighted_norm(truncate(diff, t));
}

double integral_norm_closed_form(double dt, double nu)
{
    return dt / (1.0 - std::exp(-nu * dt));
}

}  // namespace sevo
