#include "sevo/cli.hpp"

#include <cmath>
#include <fstream>
#include <initializer_list>
#include <limits>
#include <set>

namespace sevo::cli {

namespace {

using nlohmann::json;

void require_object(const json& node, const std::string& where)
{
    if (!node.is_object()) {
        throw ConfigError(where + " must be an object");
    }
}

void allow_only(const json& node, std::initializer_list<const char*> keys,
                const std::string& where)
{
    require_object(node, where);
    const std::set<std::string> allowed(keys.begin(), keys.end());
    for (const auto& item : node.items()) {
        if (allowed.count(item.key()) == 0) {
            throw ConfigError("unknown key '" + item.key() + "' in " + where);
        }
    }
}

double number(const json& node, const char* key, double fallback, double lo, double hi,
              const std::string& where, bool open_lo = false)
{
    if (!node.contains(key)) {
        return fallback;
    }
    const json& v = node.at(key);
    if (!v.is_number()) {
        throw ConfigError(where + "." + key + " must be a number");
    }
    const double x = v.get<double>();
    if (!std::isfinite(x) || x > hi || (open_lo ? x <= lo : x < lo)) {
        throw ConfigError(where + "." + key + " = " + v.dump() + " is out of range");
    }
    return x;
}

std::size_t count(const json& node, const char* key, std::size_t fallback, std::size_t lo,
                  const std::string& where)
{
    if (!node.contains(key)) {
        return fallback;
    }
    const json& v = node.at(key);
    if (!v.is_number_integer() || (!v.is_number_unsigned() && v.get<long long>() < 0)) {
        throw ConfigError(where + "." + key + " must be a non-negative integer");
    }
    const auto x = v.get<std::uint64_t>();
    if (x < lo) {
        throw ConfigError(where + "." + key + " must be at least " + std::to_string(lo));
    }
    return static_cast<std::size_t>(x);
}

std::string text(const json& node, const char* key, const std::string& fallback,
                 std::initializer_list<const char*> choices, const std::string& where)
{
    if (!node.contains(key)) {
        return fallback;
    }
    const json& v = node.at(key);
    if (!v.is_string()) {
        throw ConfigError(where + "." + key + " must be a string");
    }
    const auto s = v.get<std::string>();
    if (choices.size() == 0) {
        return s;
    }
    for (const char* c : choices) {
        if (s == c) {
            return s;
        }
    }
    throw ConfigError(where + "." + key + " has unsupported value '" + s + "'");
}

CoefficientProfile profile(const json& node, const char* key, const std::string& where)
{
    if (!node.contains(key)) {
        return CoefficientProfile::constant(1.0);
    }
    const json& p = node.at(key);
    const std::string here = where + "." + key;
    if (p.is_number()) {
        return CoefficientProfile::constant(p.get<double>());
    }
    allow_only(p, {"kind", "base", "amplitude", "rate"}, here);
    const std::string kind =
        text(p, "kind", "constant", {"constant", "sinusoidal", "ramp_clamped"}, here);
    const double inf = std::numeric_limits<double>::infinity();
    const double base = number(p, "base", 1.0, -inf, inf, here);
    const double amplitude = number(p, "amplitude", 0.0, -inf, inf, here);
    const double rate = number(p, "rate", 1.0, -inf, inf, here);
    if (kind == "sinusoidal") {
        return CoefficientProfile::sinusoidal(base, amplitude, rate);
    }
    if (kind == "ramp_clamped") {
        return CoefficientProfile::ramp_clamped(base, amplitude, rate);
    }
    return CoefficientProfile::constant(base);
}

ForcingSpec forcing(const json& params, const std::string& where)
{
    ForcingSpec spec;
    if (!params.contains("forcing")) {
        return spec;
    }
    const json& f = params.at("forcing");
    const std::string here = where + ".forcing";
    allow_only(f, {"kind", "amplitude", "mode", "t_off"}, here);
    const std::string kind =
        text(f, "kind", "zero", {"zero", "constant", "eigenmode", "cavity_mode"}, here);
    const double inf = std::numeric_limits<double>::infinity();
    spec.kind = kind == "constant"    ? ForcingSpec::Kind::constant
                : kind == "eigenmode" ? ForcingSpec::Kind::eigenmode
                : kind == "cavity_mode" ? ForcingSpec::Kind::cavity_mode
                                        : ForcingSpec::Kind::zero;
    spec.amplitude = number(f, "amplitude", 1.0, -inf, inf, here);
    spec.mode = static_cast<int>(count(f, "mode", 1, 1, here));
    spec.t_off = number(f, "t_off", inf, 0.0, inf, here);
    return spec;
}

Eigen::MatrixXd matrix(const json& v, const std::string& where)
{
    if (!v.is_array() || v.empty()) {
        throw ConfigError(where + " must be a non-empty array of rows");
    }
    const auto rows = static_cast<Eigen::Index>(v.size());
    const auto cols = static_cast<Eigen::Index>(v.at(0).is_array() ? v.at(0).size() : 0);
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        const json& row = v.at(static_cast<std::size_t>(i));
        if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
            throw ConfigError(where + " rows must be arrays of equal length");
        }
        for (Eigen::Index j = 0; j < cols; ++j) {
            const json& x = row.at(static_cast<std::size_t>(j));
            if (!x.is_number()) {
                throw ConfigError(where + " entries must be numbers");
            }
            m(i, j) = x.get<double>();
        }
    }
    return m;
}

Eigen::VectorXd vector(const json& v, const std::string& where)
{
    if (!v.is_array() || v.empty()) {
        throw ConfigError(where + " must be a non-empty array");
    }
    Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!v.at(i).is_number()) {
            throw ConfigError(where + " entries must be numbers");
        }
        out[static_cast<Eigen::Index>(i)] = v.at(i).get<double>();
    }
    return out;
}

NoiseConfig noise_config(const json& doc)
{
    NoiseConfig nc;
    if (!doc.contains("noise")) {
        return nc;
    }
    const json& n = doc.at("noise");
    allow_only(n, {"driver", "gain", "sigma", "clamp", "common_driver", "Q", "rate", "jump"},
               "noise");
    const double inf = std::numeric_limits<double>::infinity();
    nc.driver = text(n, "driver", "wiener", {"wiener", "compensated_poisson"}, "noise") ==
                        "wiener"
                    ? DriverKind::wiener
                    : DriverKind::compensated_poisson;
    nc.gain = number(n, "gain", 0.0, 0.0, inf, "noise");
    nc.sigma_kind = text(n, "sigma", "multiplicative", {"multiplicative", "clamped"}, "noise") ==
                            "clamped"
                        ? SigmaKind::clamped
                        : SigmaKind::multiplicative;
    nc.clamp = number(n, "clamp", 1.0, 0.0, inf, "noise", true);
    if (n.contains("common_driver")) {
        if (!n.at("common_driver").is_boolean()) {
            throw ConfigError("noise.common_driver must be a boolean");
        }
        nc.common_driver = n.at("common_driver").get<bool>();
    }
    if (n.contains("Q")) {
        nc.q = matrix(n.at("Q"), "noise.Q");
    }
    nc.rate = number(n, "rate", 1.0, 0.0, inf, "noise");
    if (n.contains("jump")) {
        nc.jump = vector(n.at("jump"), "noise.jump");
    }
    return nc;
}

const json& section(const json& doc, const char* key)
{
    static const json empty = json::object();
    return doc.contains(key) ? doc.at(key) : empty;
}

}  // namespace

RunConfig parse_config(const json& input, const Overrides& overrides)
{
    require_object(input, "config");
    allow_only(input, {"model", "grid", "noise", "solver", "output"}, "config");
    json doc = input;
    if (!doc.contains("model")) {
        throw ConfigError("config needs a 'model' section");
    }
    if (overrides.n_paths) {
        doc["solver"]["n_paths"] = *overrides.n_paths;
    }
    if (overrides.seed) {
        doc["solver"]["seed"] = *overrides.seed;
    }
    if (overrides.out_dir) {
        doc["output"]["directory"] = *overrides.out_dir;
    }

    RunConfig cfg;
    const json& model = doc.at("model");
    allow_only(model, {"name", "params"}, "model");
    cfg.model = text(model, "name", "", {"heat", "mixed", "maxwell", "viscoplastic"}, "model");
    if (cfg.model.empty()) {
        throw ConfigError("model.name is required");
    }
    if (model.contains("params")) {
        const json& params = model.at("params");
        const std::string where = "model.params";
        if (cfg.model == "heat") {
            allow_only(params, {"a", "forcing", "coercivity_c"}, where);
        } else if (cfg.model == "mixed") {
            allow_only(params, {"a", "forcing", "coercivity_c", "mask"}, where);
        } else if (cfg.model == "maxwell") {
            allow_only(params, {"eps", "mu", "eta", "forcing", "coercivity_c"}, where);
        } else {
            allow_only(params, {"R", "D", "L", "B", "relation", "forcing", "coercivity_c"},
                       where);
        }
    }

    const double inf = std::numeric_limits<double>::infinity();
    const json& grid = section(doc, "grid");
    allow_only(grid, {"dt", "T", "n_cells", "h", "nx", "ny", "nz"}, "grid");
    cfg.dt = number(grid, "dt", 0.01, 0.0, inf, "grid", true);
    cfg.horizon = number(grid, "T", 1.0, 0.0, inf, "grid", true);
    const double steps = std::round(cfg.horizon / cfg.dt);
    if (steps < 1.0 || std::abs(steps * cfg.dt - cfg.horizon) > 1e-9 * cfg.horizon) {
        throw ConfigError("grid.T must be a positive integer multiple of grid.dt");
    }
    cfg.n_steps = static_cast<std::size_t>(steps);
    const bool yee = cfg.model == "maxwell";
    for (const char* key : {"n_cells", "nx", "ny", "nz"}) {
        const bool belongs = yee ? std::string(key) != "n_cells" : std::string(key) == "n_cells";
        if (grid.contains(key) && !belongs) {
            throw ConfigError(std::string("grid.") + key + " does not apply to model " +
                              cfg.model);
        }
    }

    const json& solver = section(doc, "solver");
    allow_only(solver, {"nu", "tol", "max_iter", "n_paths", "seed", "target_rho"}, "solver");
    if (solver.contains("nu")) {
        const json& nu = solver.at("nu");
        if (nu.is_string()) {
            if (nu.get<std::string>() != "auto") {
                throw ConfigError("solver.nu must be a positive number or \"auto\"");
            }
        } else {
            cfg.nu = number(solver, "nu", 1.0, 0.0, inf, "solver", true);
        }
    }
    cfg.tol = number(solver, "tol", 1e-8, 0.0, inf, "solver", true);
    cfg.max_iter = count(solver, "max_iter", 100, 1, "solver");
    cfg.n_paths = count(solver, "n_paths", 1, 1, "solver");
    if (solver.contains("seed")) {
        const json& s = solver.at("seed");
        if (!s.is_number_unsigned() && !(s.is_number_integer() && s.get<long long>() >= 0)) {
            throw ConfigError("solver.seed must be a non-negative integer");
        }
        cfg.seed = s.get<std::uint64_t>();
    }
    cfg.target_rho = number(solver, "target_rho", 0.5, 0.0, 1.0, "solver", true);
    if (cfg.target_rho >= 1.0) {
        throw ConfigError("solver.target_rho must be below 1");
    }

    const json& output = section(doc, "output");
    allow_only(output, {"directory", "probes", "statistics"}, "output");
    cfg.out_dir = text(output, "directory", "out", {}, "output");
    if (output.contains("probes")) {
        const json& p = output.at("probes");
        if (!p.is_array()) {
            throw ConfigError("output.probes must be an array of state indices");
        }
        for (const json& v : p) {
            if (!v.is_number_integer() || v.get<long long>() < 0) {
                throw ConfigError("output.probes entries must be non-negative integers");
            }
            cfg.probes.push_back(v.get<std::size_t>());
        }
    } else {
        cfg.probes = {0};
    }
    if (output.contains("statistics")) {
        const json& s = output.at("statistics");
        if (!s.is_array()) {
            throw ConfigError("output.statistics must be an array");
        }
        cfg.stat_mean = cfg.stat_variance = cfg.stat_weighted = false;
        for (const json& v : s) {
            const std::string name = v.is_string() ? v.get<std::string>() : std::string();
            if (name == "mean") {
                cfg.stat_mean = true;
            } else if (name == "variance") {
                cfg.stat_variance = true;
            } else if (name == "weighted_norm") {
                cfg.stat_weighted = true;
            } else {
                throw ConfigError("unknown statistic " + v.dump() +
                                  " (expected mean, variance, weighted_norm)");
            }
        }
    }

    noise_config(doc);  // validates the section
    cfg.document = std::move(doc);
    return cfg;
}

RunConfig load_config(const std::string& path, const Overrides& overrides)
{
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot read config file '" + path + "'");
    }
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("malformed JSON: ") + e.what());
    }
    return parse_config(doc, overrides);
}

SpdeProblem build_problem(const RunConfig& config)
{
    const json& doc = config.document;
    const json& grid = section(doc, "grid");
    const json& model = doc.at("model");
    const json params = model.contains("params") ? model.at("params") : json::object();
    const std::string where = "model.params";
    const double inf = std::numeric_limits<double>::infinity();
    const double coercivity = number(params, "coercivity_c", 1.0, 0.0, inf, where, true);
    const NoiseConfig noise = noise_config(doc);

    if (config.model == "maxwell") {
        MaxwellParams p;
        p.nx = count(grid, "nx", 4, 2, "grid");
        p.ny = count(grid, "ny", p.nx, 2, "grid");
        p.nz = count(grid, "nz", p.nx, 2, "grid");
        p.h = number(grid, "h", 1.0 / static_cast<double>(p.nx), 0.0, inf, "grid", true);
        p.eps = profile(params, "eps", where);
        p.mu = profile(params, "mu", where);
        p.eta = number(params, "eta", 0.0, 0.0, inf, where);
        p.noise = noise;
        p.forcing = forcing(params, where);
        p.coercivity_c = coercivity;
        p.t_end = config.horizon;
        return build_maxwell(p);
    }

    const std::size_t n_cells = count(grid, "n_cells", 8, 1, "grid");
    const double h = number(grid, "h", 1.0 / static_cast<double>(n_cells + 1), 0.0, inf, "grid",
                            true);
    if (config.model == "viscoplastic") {
        ViscoplasticParams p;
        p.n_cells = n_cells;
        p.h = h;
        p.r = profile(params, "R", where);
        p.d = profile(params, "D", where);
        p.l = profile(params, "L", where);
        if (params.contains("B")) {
            p.b = vector(params.at("B"), where + ".B").transpose();
        }
        if (params.contains("relation")) {
            const json& rel = params.at("relation");
            const std::string here = where + ".relation";
            allow_only(rel, {"kind", "rho"}, here);
            const std::string kind = text(rel, "kind", "zero", {"zero", "soft_threshold"}, here);
            if (kind == "soft_threshold") {
                p.g = soft_threshold_relation(number(rel, "rho", 1.0, 0.0, inf, here));
            }
        }
        p.noise = noise;
        p.forcing = forcing(params, where);
        p.coercivity_c = coercivity;
        p.t_end = config.horizon;
        return build_viscoplastic(p);
    }

    HeatParams p;
    p.n_cells = n_cells;
    p.h = h;
    p.a = profile(params, "a", where);
    p.noise = noise;
    p.forcing = forcing(params, where);
    p.coercivity_c = coercivity;
    p.t_end = config.horizon;
    if (config.model == "mixed") {
        std::vector<int> mask(n_cells, 0);
        if (params.contains("mask")) {
            const json& m = params.at("mask");
            if (!m.is_array()) {
                throw ConfigError("model.params.mask must be an array of 0/1 entries");
            }
            mask.clear();
            for (const json& v : m) {
                if (!v.is_number_integer()) {
                    throw InvalidMask("mask entries must be integers 0 or 1");
                }
                mask.push_back(v.get<int>());
            }
        }
        return build_mixed(mask, p);
    }
    return build_heat(p);
}

std::uint64_t fnv1a(std::string_view bytes)
{
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    for (const char c : bytes) {
        hash ^= static_cast<unsigned char>(c);
        hash *= 0x100000001b3ULL;
    }
    return hash;
}

}  // namespace sevo::cli
