#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "tvopt/common.hpp"
#include "tvopt/graph.hpp"
#include "tvopt/integrate.hpp"
#include "tvopt/objective.hpp"
#include "tvopt/trajectory.hpp"

namespace tvopt {

using json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// JSON helpers
// ---------------------------------------------------------------------------

namespace detail {

inline Eigen::VectorXd json_to_vector(const json& j, const char* what) {
    if (j.is_number()) return Eigen::VectorXd::Constant(1, j.get<double>());
    if (!j.is_array()) throw ConfigError(strf("%s: expected a numeric array", what));
    Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
    Eigen::Index k = 0;
    for (const auto& e : j) {
        if (!e.is_number()) throw ConfigError(strf("%s: expected numbers", what));
        v(k++) = e.get<double>();
    }
    return v;
}

inline Eigen::MatrixXd json_to_matrix(const json& j, const char* what) {
    if (j.is_number()) return Eigen::MatrixXd::Constant(1, 1, j.get<double>());
    if (!j.is_array() || j.empty()) throw ConfigError(strf("%s: expected an array of rows", what));
    if (!j.front().is_array()) {
        const Eigen::VectorXd row = json_to_vector(j, what);
        return row.transpose();
    }
    const Eigen::Index rows = static_cast<Eigen::Index>(j.size());
    const Eigen::Index cols = static_cast<Eigen::Index>(j.front().size());
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        const auto& row = j[static_cast<size_t>(r)];
        if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols)
            throw ConfigError(strf("%s: ragged matrix rows", what));
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = row[static_cast<size_t>(c)].get<double>();
    }
    return m;
}

inline json vector_to_json(const Eigen::VectorXd& v) {
    json out = json::array();
    for (Eigen::Index k = 0; k < v.size(); ++k) out.push_back(v(k));
    return out;
}

inline json matrix_to_json(const Eigen::MatrixXd& m) {
    json out = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        out.push_back(row);
    }
    return out;
}

/// Gain entry: a scalar s means s * I_m, otherwise a full m x m matrix.
inline Eigen::MatrixXd json_to_gain(const json& j, int m, const char* what) {
    if (j.is_number()) return j.get<double>() * Eigen::MatrixXd::Identity(m, m);
    const Eigen::MatrixXd mat = json_to_matrix(j, what);
    if (mat.rows() != m || mat.cols() != m) throw ConfigError(strf("%s: expected %d x %d", what, m, m));
    return mat;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Specs (plain data, round-trippable through JSON)
// ---------------------------------------------------------------------------

struct TrajectorySpec {
    enum class Kind { Sinusoid, Linear, Constant } kind = Kind::Constant;
    Eigen::VectorXd amplitude, phase, offset;  // sinusoid
    double omega = 1.0;
    Eigen::VectorXd slope;  // linear (offset shared)
    Eigen::VectorXd value;  // constant

    int dim() const {
        switch (kind) {
            case Kind::Sinusoid: return static_cast<int>(amplitude.size());
            case Kind::Linear: return static_cast<int>(slope.size());
            default: return static_cast<int>(value.size());
        }
    }

    Trajectory build() const {
        switch (kind) {
            case Kind::Sinusoid: return sinusoid_trajectory(amplitude, omega, phase, offset);
            case Kind::Linear: return linear_trajectory(slope, offset);
            default: return constant_trajectory(value);
        }
    }

    static TrajectorySpec from_json(const json& j) {
        TrajectorySpec spec;
        const std::string kind = j.at("kind").get<std::string>();
        if (kind == "sinusoid") {
            spec.kind = Kind::Sinusoid;
            spec.amplitude = detail::json_to_vector(j.at("amplitude"), "trajectory amplitude");
            spec.omega = j.value("omega", 1.0);
            spec.phase = j.contains("phase") ? detail::json_to_vector(j.at("phase"), "trajectory phase")
                                             : Eigen::VectorXd::Zero(spec.amplitude.size());
            spec.offset = j.contains("offset") ? detail::json_to_vector(j.at("offset"), "trajectory offset")
                                               : Eigen::VectorXd::Zero(spec.amplitude.size());
        } else if (kind == "linear") {
            spec.kind = Kind::Linear;
            spec.slope = detail::json_to_vector(j.at("slope"), "trajectory slope");
            spec.offset = j.contains("offset") ? detail::json_to_vector(j.at("offset"), "trajectory offset")
                                               : Eigen::VectorXd::Zero(spec.slope.size());
        } else if (kind == "constant") {
            spec.kind = Kind::Constant;
            spec.value = detail::json_to_vector(j.at("value"), "trajectory value");
        } else {
            throw ConfigError(strf("unknown trajectory kind '%s'", kind.c_str()));
        }
        return spec;
    }

    json to_json() const {
        json j;
        switch (kind) {
            case Kind::Sinusoid:
                j["kind"] = "sinusoid";
                j["amplitude"] = detail::vector_to_json(amplitude);
                j["omega"] = omega;
                j["phase"] = detail::vector_to_json(phase);
                j["offset"] = detail::vector_to_json(offset);
                break;
            case Kind::Linear:
                j["kind"] = "linear";
                j["slope"] = detail::vector_to_json(slope);
                j["offset"] = detail::vector_to_json(offset);
                break;
            case Kind::Constant:
                j["kind"] = "constant";
                j["value"] = detail::vector_to_json(value);
                break;
        }
        return j;
    }
};

struct ObjectiveSpec {
    enum class Kind { QuadraticTracking, SourceSeekLocal, PowerSupply } kind = Kind::QuadraticTracking;
    // quadratic_tracking
    Eigen::MatrixXd tracking_weight;
    TrajectorySpec traj;
    // source_seek_local
    double signal_power = 0.0;
    Eigen::MatrixXd trajectory_param;
    TrajectorySpec source_traj;
    std::vector<Anchor> anchors;
    // power_supply
    double supply_k1 = 0.0, supply_k2 = 0.0;
    TrajectorySpec supply_r1, supply_r2;

    ObjectiveModel build() const {
        switch (kind) {
            case Kind::QuadraticTracking: return build_quadratic_tracking(tracking_weight, traj.build());
            case Kind::SourceSeekLocal:
                return build_source_seek_local(signal_power, trajectory_param, source_traj.build(), anchors);
            default: return build_power_supply(supply_k1, supply_k2, supply_r1.build(), supply_r2.build());
        }
    }

    static ObjectiveSpec from_json(const json& j) {
        ObjectiveSpec spec;
        const std::string kind = j.at("kind").get<std::string>();
        if (kind == "quadratic_tracking") {
            spec.kind = Kind::QuadraticTracking;
            spec.tracking_weight = detail::json_to_matrix(j.at("K"), "objective K");
            spec.traj = TrajectorySpec::from_json(j.at("traj"));
        } else if (kind == "source_seek_local") {
            spec.kind = Kind::SourceSeekLocal;
            spec.signal_power = j.at("a").get<double>();
            spec.trajectory_param = detail::json_to_matrix(j.at("b"), "objective b");
            spec.source_traj = TrajectorySpec::from_json(j.at("r"));
            for (const auto& ja : j.value("anchors", json::array())) {
                Anchor anchor;
                anchor.weight = ja.at("weight").get<double>();
                anchor.position = detail::json_to_vector(ja.at("position"), "anchor position");
                spec.anchors.push_back(std::move(anchor));
            }
        } else if (kind == "power_supply") {
            spec.kind = Kind::PowerSupply;
            spec.supply_k1 = j.at("k1").get<double>();
            spec.supply_k2 = j.at("k2").get<double>();
            spec.supply_r1 = TrajectorySpec::from_json(j.at("r1"));
            spec.supply_r2 = TrajectorySpec::from_json(j.at("r2"));
        } else {
            throw ConfigError(strf("unknown objective kind '%s'", kind.c_str()));
        }
        return spec;
    }

    json to_json() const {
        json j;
        switch (kind) {
            case Kind::QuadraticTracking:
                j["kind"] = "quadratic_tracking";
                j["K"] = detail::matrix_to_json(tracking_weight);
                j["traj"] = traj.to_json();
                break;
            case Kind::SourceSeekLocal: {
                j["kind"] = "source_seek_local";
                j["a"] = signal_power;
                j["b"] = detail::matrix_to_json(trajectory_param);
                j["r"] = source_traj.to_json();
                json ja = json::array();
                for (const auto& anchor : anchors) {
                    json a;
                    a["weight"] = anchor.weight;
                    a["position"] = detail::vector_to_json(anchor.position);
                    ja.push_back(a);
                }
                j["anchors"] = ja;
                break;
            }
            case Kind::PowerSupply:
                j["kind"] = "power_supply";
                j["k1"] = supply_k1;
                j["k2"] = supply_k2;
                j["r1"] = supply_r1.to_json();
                j["r2"] = supply_r2.to_json();
                break;
        }
        return j;
    }
};

struct TopologySpec {
    std::optional<Eigen::MatrixXd> adjacency;
    std::string generator;  // cycle | complete | star | path
    int n = 0;
    double weight = 1.0;

    Topology build() const {
        if (adjacency) return Topology(*adjacency);
        if (generator == "cycle") return Topology::cycle(n, weight);
        if (generator == "complete") return Topology::complete(n, weight);
        if (generator == "star") return Topology::star(n, weight);
        if (generator == "path") return Topology::path(n, weight);
        throw ConfigError(strf("unknown topology generator '%s'", generator.c_str()));
    }

    static TopologySpec from_json(const json& j) {
        TopologySpec spec;
        if (j.contains("adjacency")) {
            spec.adjacency = detail::json_to_matrix(j.at("adjacency"), "topology adjacency");
        } else {
            spec.generator = j.at("generator").get<std::string>();
            spec.n = j.at("n").get<int>();
            spec.weight = j.value("weight", 1.0);
        }
        return spec;
    }

    json to_json() const {
        json j;
        if (adjacency) {
            j["adjacency"] = detail::matrix_to_json(*adjacency);
        } else {
            j["generator"] = generator;
            j["n"] = n;
            j["weight"] = weight;
        }
        return j;
    }
};

enum class ControllerKind { CentralizedSi, DistributedSi, CentralizedDi, DistributedDi, NonadaptiveSi };

inline std::string to_string(ControllerKind k) {
    switch (k) {
        case ControllerKind::CentralizedSi: return "centralized_si";
        case ControllerKind::DistributedSi: return "distributed_si";
        case ControllerKind::CentralizedDi: return "centralized_di";
        case ControllerKind::DistributedDi: return "distributed_di";
        default: return "nonadaptive_si";
    }
}

inline ControllerKind controller_kind_from_string(const std::string& s) {
    if (s == "centralized_si") return ControllerKind::CentralizedSi;
    if (s == "distributed_si") return ControllerKind::DistributedSi;
    if (s == "centralized_di") return ControllerKind::CentralizedDi;
    if (s == "distributed_di") return ControllerKind::DistributedDi;
    if (s == "nonadaptive_si") return ControllerKind::NonadaptiveSi;
    throw ConfigError(strf("unknown controller kind '%s'", s.c_str()));
}

inline bool is_distributed(ControllerKind k) {
    return k == ControllerKind::DistributedSi || k == ControllerKind::DistributedDi;
}
inline bool is_double_integrator(ControllerKind k) {
    return k == ControllerKind::CentralizedDi || k == ControllerKind::DistributedDi;
}

struct GainsConfig {
    Eigen::MatrixXd gamma1, gamma2, gamma3;       // centralized adaptation gains
    std::vector<Eigen::MatrixXd> gamma_theta;     // per agent
    Eigen::MatrixXd gamma_omega;                  // shared
    std::vector<Eigen::MatrixXd> gamma_a;         // per agent
    double k1 = 0.0, k2 = 0.0;                    // distributed DI consensus gains
    double alpha_est = 0.0;                       // finite-time estimator gain
    double epsilon = 0.1, c = 0.1;                // boundary layer
    double nonadaptive_k = 1.0;                   // baseline feedback gain
    double nonadaptive_a_scale = 1.0;             // baseline parameter perturbations
    double nonadaptive_omega_scale = 1.0;
};

struct InitialStates {
    std::vector<Eigen::VectorXd> x0;
    std::vector<Eigen::VectorXd> v0;
    std::vector<Eigen::VectorXd> sigma0;
    std::vector<Eigen::MatrixXd> theta0;
    std::vector<Eigen::MatrixXd> omega0;
    std::vector<Eigen::MatrixXd> a0;
    Eigen::MatrixXd eta1, eta2, eta3;
    double beta0 = 0.0;
    std::optional<std::pair<Eigen::VectorXd, Eigen::VectorXd>> x0_random;  // low/high box, uses the seed
};

struct VehicleSpec {
    Eigen::VectorXd masses;                  // per agent
    std::vector<Eigen::VectorXd> frictions;  // per agent, diagonal entries
};

struct OutputConfig {
    std::string dir;       // empty = resolve from --out / TVOPT_OUT_DIR / "out"
    std::string basename;  // default: scenario name
    bool binary = false;
};

/// A fully described experiment: topology, objective family, controller kind,
/// gains, initial states, integration settings and output routing.
struct ScenarioConfig {
    std::string name = "scenario";
    ControllerKind controller = ControllerKind::CentralizedSi;
    std::optional<TopologySpec> topology;
    std::vector<ObjectiveSpec> objectives;
    GainsConfig gains;
    InitialStates initial;
    IntegratorConfig integrator;
    std::optional<VehicleSpec> vehicle;
    double alpha_bound = 0.0;  // 0 = derive from samples at finalize
    double beta_bar = 10.0;
    bool clamp_beta = false;
    double sensor_noise = 0.0;
    std::uint64_t seed = 0;
    OutputConfig output;

    int n_agents() const { return static_cast<int>(objectives.size()); }

    std::vector<ObjectiveModel> build_objectives() const {
        std::vector<ObjectiveModel> out;
        out.reserve(objectives.size());
        for (const auto& spec : objectives) {
            ObjectiveModel model = spec.build();
            model.set_sensor_noise(sensor_noise, seed);
            out.push_back(std::move(model));
        }
        return out;
    }

    Topology build_topology() const {
        if (!topology) throw ValidationError("scenario has no topology");
        return topology->build();
    }

    void finalize();
    void validate() const;
    json to_json() const;
    static ScenarioConfig from_json(const json& j);
    std::string normalized_dump() const { return to_json().dump(2) + "\n"; }
};

// ---------------------------------------------------------------------------
// Deterministic validation samples
// ---------------------------------------------------------------------------

namespace detail {
inline std::vector<std::pair<Eigen::VectorXd, double>> validation_samples(const ScenarioConfig& cfg, int m,
                                                                          int count = 32) {
    std::vector<std::pair<Eigen::VectorXd, double>> samples;
    samples.reserve(static_cast<size_t>(count));
    double radius = 1.0;
    for (const auto& x : cfg.initial.x0) radius = std::max(radius, x.norm());
    std::uint64_t state = 0x5eedULL;
    for (int s = 0; s < count; ++s) {
        Eigen::VectorXd x(m);
        for (int k = 0; k < m; ++k) {
            state = mix64(state + static_cast<std::uint64_t>(s * m + k));
            x(k) = (radius + 2.0) * unit_noise(state);
        }
        state = mix64(state);
        const double t = cfg.integrator.t_end * 0.5 * (unit_noise(state) + 1.0);
        samples.emplace_back(std::move(x), t);
    }
    return samples;
}
}  // namespace detail

inline void ScenarioConfig::finalize() {
    if (objectives.empty()) throw ValidationError("scenario needs at least one objective");
    std::vector<ObjectiveModel> models = build_objectives();
    const int m = models.front().dim();
    const int n = n_agents();

    auto default_gain = [&](Eigen::MatrixXd& g) {
        if (g.size() == 0) g = Eigen::MatrixXd::Identity(m, m);
    };
    default_gain(gains.gamma1);
    default_gain(gains.gamma2);
    default_gain(gains.gamma3);
    default_gain(gains.gamma_omega);
    if (gains.gamma_theta.empty()) gains.gamma_theta.assign(static_cast<size_t>(n), Eigen::MatrixXd::Identity(m, m));
    if (gains.gamma_theta.size() == 1 && n > 1) gains.gamma_theta.assign(static_cast<size_t>(n), gains.gamma_theta[0]);
    if (gains.gamma_a.empty()) gains.gamma_a.assign(static_cast<size_t>(n), Eigen::MatrixXd::Identity(m, m));
    if (gains.gamma_a.size() == 1 && n > 1) gains.gamma_a.assign(static_cast<size_t>(n), gains.gamma_a[0]);

    if (initial.x0.empty() && initial.x0_random) {
        const auto& [low, high] = *initial.x0_random;
        std::uint64_t state = mix64(seed ^ 0x9e3779b97f4a7c15ULL);
        for (int i = 0; i < n; ++i) {
            Eigen::VectorXd x(m);
            for (int k = 0; k < m; ++k) {
                state = mix64(state);
                x(k) = low(k) + 0.5 * (unit_noise(state) + 1.0) * (high(k) - low(k));
            }
            initial.x0.push_back(std::move(x));
        }
    }
    if (initial.v0.empty()) initial.v0.assign(static_cast<size_t>(n), Eigen::VectorXd::Zero(m));
    if (initial.sigma0.empty()) initial.sigma0.assign(static_cast<size_t>(n), Eigen::VectorXd::Zero(m));
    if (initial.theta0.empty())
        for (int i = 0; i < n; ++i) initial.theta0.push_back(Eigen::MatrixXd::Zero(m, models[static_cast<size_t>(i)].param_dim()));
    if (initial.omega0.empty()) initial.omega0.assign(static_cast<size_t>(n), Eigen::MatrixXd::Zero(m, m));
    if (initial.a0.empty())
        for (int i = 0; i < n; ++i) initial.a0.push_back(Eigen::MatrixXd::Zero(m, models[static_cast<size_t>(i)].param_dim()));
    const int p0 = models.front().param_dim();
    if (initial.eta1.size() == 0) initial.eta1 = Eigen::MatrixXd::Zero(m, p0);
    if (initial.eta2.size() == 0) initial.eta2 = Eigen::MatrixXd::Zero(m, m);
    if (initial.eta3.size() == 0) initial.eta3 = Eigen::MatrixXd::Zero(m, p0);

    if (alpha_bound <= 0.0) {
        double sup = 0.0;
        for (const auto& model : models)
            for (const auto& s : detail::validation_samples(*this, m)) sup = std::max(sup, model.dgrad_dt(s.first, s.second).norm());
        alpha_bound = 1.5 * sup + 1e-6;
    }
    if (gains.alpha_est <= 0.0) gains.alpha_est = 5.0 * alpha_bound;
    if (output.basename.empty()) output.basename = name;
}

inline void ScenarioConfig::validate() const {
    integrator.validate();
    const std::vector<ObjectiveModel> models = build_objectives();
    const int m = models.front().dim();
    const int n = n_agents();
    for (const auto& model : models)
        if (model.dim() != m) throw ValidationError("objective dimensions differ across agents");

    const bool centralized =
        controller == ControllerKind::CentralizedSi || controller == ControllerKind::CentralizedDi ||
        controller == ControllerKind::NonadaptiveSi;
    if (centralized && n != 1)
        throw ValidationError(strf("%s expects exactly one objective, got %d", to_string(controller).c_str(), n));

    if (static_cast<int>(initial.x0.size()) != n)
        throw ValidationError(strf("expected %d initial positions, got %zu", n, initial.x0.size()));
    for (const auto& x : initial.x0)
        if (x.size() != m) throw ValidationError("initial position dimension mismatch");
    if (is_double_integrator(controller)) {
        if (static_cast<int>(initial.v0.size()) != n) throw ValidationError("missing initial velocities");
        for (const auto& v : initial.v0)
            if (v.size() != m) throw ValidationError("initial velocity dimension mismatch");
    }

    auto require_spd_named = [&](const Eigen::MatrixXd& g, const char* what) {
        if (g.rows() != m || g.cols() != m) throw ValidationError(strf("%s must be %d x %d", what, m, m));
        detail::require_spd(g, what);
    };

    // Standing assumptions on the objective family.
    const auto samples = detail::validation_samples(*this, m);
    const ValidationReport report = validate_assumptions(models, samples, alpha_bound);
    if (const auto* a1 = report.find("A1"); a1 && !a1->passed)
        throw ValidationError(
            strf("objective family violates Assumption 1 (identical invertible Hessians): %s", a1->detail.c_str()));
    if (const auto* a2 = report.find("A2"); a2 && !a2->passed)
        throw ValidationError(
            strf("objective family violates Assumption 2 (bounded gradient time-partial): %s", a2->detail.c_str()));
    if (const auto* a3 = report.find("A3"); a3 && !a3->passed)
        throw ValidationError(
            strf("objective family violates Assumption 3 (factored decomposition): %s", a3->detail.c_str()));

    if (is_distributed(controller)) {
        if (!topology) throw ValidationError("distributed controllers need a topology");
        const Topology topo = build_topology();
        if (topo.size() != n)
            throw ValidationError(strf("topology has %d vertices but %d objectives given", topo.size(), n));
        if (!is_connected(topo))
            throw ValidationError("communication topology is not connected (Assumption 4)");
    }

    switch (controller) {
        case ControllerKind::CentralizedSi:
            require_spd_named(gains.gamma1, "gamma1");
            break;
        case ControllerKind::CentralizedDi:
            require_spd_named(gains.gamma1, "gamma1");
            require_spd_named(gains.gamma2, "gamma2");
            require_spd_named(gains.gamma3, "gamma3");
            break;
        case ControllerKind::NonadaptiveSi:
            if (!(gains.nonadaptive_k > 0.0)) throw ValidationError("baseline gain k must be positive");
            break;
        case ControllerKind::DistributedSi: {
            for (const auto& g : gains.gamma_theta) require_spd_named(g, "gamma_theta");
            if (!(gains.alpha_est > 0.0)) throw ValidationError("estimator gain alpha_est must be positive");
            Eigen::VectorXd sigma_sum = Eigen::VectorXd::Zero(m);
            for (const auto& s : initial.sigma0) sigma_sum += s;
            if (sigma_sum.lpNorm<Eigen::Infinity>() > 1e-12)
                throw ValidationError("estimator initial states must sum to zero across agents");
            break;
        }
        case ControllerKind::DistributedDi: {
            for (const auto& g : gains.gamma_theta) require_spd_named(g, "gamma_theta");
            for (const auto& g : gains.gamma_a) require_spd_named(g, "gamma_a");
            require_spd_named(gains.gamma_omega, "gamma_omega");
            if (!(gains.k1 > 0.0) || !(gains.k2 > 0.0)) throw ValidationError("k1 and k2 must be positive");
            const Topology topo = build_topology();
            if (const auto uncovered = first_uncovered_pair(topo))
                throw ValidationError(strf(
                    "agents %d and %d are neither adjacent nor share a common neighbor (Assumption 6)",
                    uncovered->first, uncovered->second));
            const SpectralData spectral = build_spectral(topo);
            if (!consensus_gain_condition(gains.k1, gains.k2, spectral.lambda2))
                throw ValidationError(strf("k1/(2*k2^2) = %.6g >= lambda2 = %.6g, violates the Theorem 4 gain "
                                           "condition",
                                           gains.k1 / (2.0 * gains.k2 * gains.k2), spectral.lambda2));
            for (int i = 1; i < n; ++i)
                if (!models[static_cast<size_t>(i)].true_params().omega.isApprox(models[0].true_params().omega, 1e-12))
                    throw ValidationError(
                        "distributed double-integrator design requires identical Omega across agents (Theorem 4)");
            break;
        }
    }

    if (!(gains.epsilon > 0.0) || !(gains.c > 0.0))
        throw ValidationError("boundary-layer constants epsilon and c must be positive");

    if (vehicle) {
        if (!is_double_integrator(controller))
            throw ValidationError("vehicle dynamics require a double-integrator controller");
        if (static_cast<int>(vehicle->masses.size()) != n || static_cast<int>(vehicle->frictions.size()) != n)
            throw ValidationError("vehicle parameters must cover every agent");
        for (int i = 0; i < n; ++i) {
            if (!(vehicle->masses(i) > 0.0)) throw ValidationError("vehicle masses must be positive");
            if (vehicle->frictions[static_cast<size_t>(i)].size() != m)
                throw ValidationError("vehicle friction dimension mismatch");
        }
    }
}

// ---------------------------------------------------------------------------
// JSON round trip
// ---------------------------------------------------------------------------

inline ScenarioConfig ScenarioConfig::from_json(const json& j) {
    ScenarioConfig cfg;
    cfg.name = j.value("name", std::string("scenario"));
    cfg.controller = controller_kind_from_string(j.at("controller").get<std::string>());
    if (j.contains("topology")) cfg.topology = TopologySpec::from_json(j.at("topology"));
    if (!j.contains("objectives") || !j.at("objectives").is_array() || j.at("objectives").empty())
        throw ConfigError("scenario needs a non-empty 'objectives' array");
    for (const auto& jo : j.at("objectives")) cfg.objectives.push_back(ObjectiveSpec::from_json(jo));

    // gains need m for scalar-to-matrix expansion
    const int m = cfg.objectives.front().build().dim();
    if (j.contains("gains")) {
        const json& jg = j.at("gains");
        if (jg.contains("gamma1")) cfg.gains.gamma1 = detail::json_to_gain(jg.at("gamma1"), m, "gamma1");
        if (jg.contains("gamma2")) cfg.gains.gamma2 = detail::json_to_gain(jg.at("gamma2"), m, "gamma2");
        if (jg.contains("gamma3")) cfg.gains.gamma3 = detail::json_to_gain(jg.at("gamma3"), m, "gamma3");
        if (jg.contains("gamma_omega"))
            cfg.gains.gamma_omega = detail::json_to_gain(jg.at("gamma_omega"), m, "gamma_omega");
        // accepted forms: scalar | matrix | array of per-agent matrices
        auto parse_per_agent = [&](const json& jj, const char* what) {
            std::vector<Eigen::MatrixXd> out;
            const bool per_agent_list =
                jj.is_array() && !jj.empty() && jj.front().is_array() && jj.front().front().is_array();
            if (per_agent_list) {
                for (const auto& e : jj) out.push_back(detail::json_to_gain(e, m, what));
            } else {
                out.push_back(detail::json_to_gain(jj, m, what));
            }
            return out;
        };
        if (jg.contains("gamma_theta")) cfg.gains.gamma_theta = parse_per_agent(jg.at("gamma_theta"), "gamma_theta");
        if (jg.contains("gamma_a")) cfg.gains.gamma_a = parse_per_agent(jg.at("gamma_a"), "gamma_a");
        cfg.gains.k1 = jg.value("k1", 0.0);
        cfg.gains.k2 = jg.value("k2", 0.0);
        cfg.gains.alpha_est = jg.value("alpha_est", 0.0);
        cfg.gains.epsilon = jg.value("epsilon", 0.1);
        cfg.gains.c = jg.value("c", 0.1);
        cfg.gains.nonadaptive_k = jg.value("nonadaptive_k", 1.0);
        cfg.gains.nonadaptive_a_scale = jg.value("nonadaptive_a_scale", 1.0);
        cfg.gains.nonadaptive_omega_scale = jg.value("nonadaptive_omega_scale", 1.0);
    }

    if (j.contains("initial")) {
        const json& ji = j.at("initial");
        auto parse_vectors = [&](const char* key, std::vector<Eigen::VectorXd>& out) {
            if (!ji.contains(key)) return;
            for (const auto& e : ji.at(key)) out.push_back(detail::json_to_vector(e, key));
        };
        parse_vectors("x0", cfg.initial.x0);
        parse_vectors("v0", cfg.initial.v0);
        parse_vectors("sigma0", cfg.initial.sigma0);
        auto parse_matrices = [&](const char* key, std::vector<Eigen::MatrixXd>& out) {
            if (!ji.contains(key)) return;
            for (const auto& e : ji.at(key)) out.push_back(detail::json_to_matrix(e, key));
        };
        parse_matrices("theta0", cfg.initial.theta0);
        parse_matrices("omega0", cfg.initial.omega0);
        parse_matrices("a0", cfg.initial.a0);
        if (ji.contains("eta1")) cfg.initial.eta1 = detail::json_to_matrix(ji.at("eta1"), "eta1");
        if (ji.contains("eta2")) cfg.initial.eta2 = detail::json_to_matrix(ji.at("eta2"), "eta2");
        if (ji.contains("eta3")) cfg.initial.eta3 = detail::json_to_matrix(ji.at("eta3"), "eta3");
        cfg.initial.beta0 = ji.value("beta0", 0.0);
        if (ji.contains("x0_random")) {
            const json& jr = ji.at("x0_random");
            cfg.initial.x0_random = std::make_pair(detail::json_to_vector(jr.at("low"), "x0_random low"),
                                                   detail::json_to_vector(jr.at("high"), "x0_random high"));
        }
    }

    if (j.contains("integrator")) {
        const json& jint = j.at("integrator");
        if (jint.contains("method"))
            cfg.integrator.method = integrator_method_from_string(jint.at("method").get<std::string>());
        cfg.integrator.step = jint.value("step", 1e-3);
        cfg.integrator.t_end = jint.value("t_end", 20.0);
        cfg.integrator.record_every = jint.value("record_every", 10);
    }

    if (j.contains("vehicle")) {
        VehicleSpec v;
        v.masses = detail::json_to_vector(j.at("vehicle").at("masses"), "vehicle masses");
        for (const auto& e : j.at("vehicle").at("frictions"))
            v.frictions.push_back(detail::json_to_vector(e, "vehicle frictions"));
        cfg.vehicle = std::move(v);
    }

    cfg.alpha_bound = j.value("alpha_bound", 0.0);
    cfg.beta_bar = j.value("beta_bar", 10.0);
    cfg.clamp_beta = j.value("clamp_beta", false);
    cfg.sensor_noise = j.value("sensor_noise", 0.0);
    cfg.seed = j.value("seed", 0ULL);
    if (j.contains("output")) {
        cfg.output.dir = j.at("output").value("dir", std::string());
        cfg.output.basename = j.at("output").value("basename", std::string());
        cfg.output.binary = j.at("output").value("binary", false);
    }
    cfg.finalize();
    return cfg;
}

inline json ScenarioConfig::to_json() const {
    json j;
    j["name"] = name;
    j["controller"] = to_string(controller);
    if (topology) j["topology"] = topology->to_json();
    json jobj = json::array();
    for (const auto& spec : objectives) jobj.push_back(spec.to_json());
    j["objectives"] = jobj;

    json jg;
    jg["gamma1"] = detail::matrix_to_json(gains.gamma1);
    jg["gamma2"] = detail::matrix_to_json(gains.gamma2);
    jg["gamma3"] = detail::matrix_to_json(gains.gamma3);
    json jt = json::array();
    for (const auto& g : gains.gamma_theta) jt.push_back(detail::matrix_to_json(g));
    jg["gamma_theta"] = jt;
    jg["gamma_omega"] = detail::matrix_to_json(gains.gamma_omega);
    json jga = json::array();
    for (const auto& g : gains.gamma_a) jga.push_back(detail::matrix_to_json(g));
    jg["gamma_a"] = jga;
    jg["k1"] = gains.k1;
    jg["k2"] = gains.k2;
    jg["alpha_est"] = gains.alpha_est;
    jg["epsilon"] = gains.epsilon;
    jg["c"] = gains.c;
    jg["nonadaptive_k"] = gains.nonadaptive_k;
    jg["nonadaptive_a_scale"] = gains.nonadaptive_a_scale;
    jg["nonadaptive_omega_scale"] = gains.nonadaptive_omega_scale;
    j["gains"] = jg;

    json ji;
    auto vectors_to_json = [](const std::vector<Eigen::VectorXd>& vs) {
        json out = json::array();
        for (const auto& v : vs) out.push_back(detail::vector_to_json(v));
        return out;
    };
    auto matrices_to_json = [](const std::vector<Eigen::MatrixXd>& ms) {
        json out = json::array();
        for (const auto& mt : ms) out.push_back(detail::matrix_to_json(mt));
        return out;
    };
    ji["x0"] = vectors_to_json(initial.x0);
    ji["v0"] = vectors_to_json(initial.v0);
    ji["sigma0"] = vectors_to_json(initial.sigma0);
    ji["theta0"] = matrices_to_json(initial.theta0);
    ji["omega0"] = matrices_to_json(initial.omega0);
    ji["a0"] = matrices_to_json(initial.a0);
    ji["eta1"] = detail::matrix_to_json(initial.eta1);
    ji["eta2"] = detail::matrix_to_json(initial.eta2);
    ji["eta3"] = detail::matrix_to_json(initial.eta3);
    ji["beta0"] = initial.beta0;
    j["initial"] = ji;

    json jint;
    jint["method"] = to_string(integrator.method);
    jint["step"] = integrator.step;
    jint["t_end"] = integrator.t_end;
    jint["record_every"] = integrator.record_every;
    j["integrator"] = jint;

    if (vehicle) {
        json jv;
        jv["masses"] = detail::vector_to_json(vehicle->masses);
        json jf = json::array();
        for (const auto& f : vehicle->frictions) jf.push_back(detail::vector_to_json(f));
        jv["frictions"] = jf;
        j["vehicle"] = jv;
    }

    j["alpha_bound"] = alpha_bound;
    j["beta_bar"] = beta_bar;
    j["clamp_beta"] = clamp_beta;
    j["sensor_noise"] = sensor_noise;
    j["seed"] = seed;
    json jo;
    jo["dir"] = output.dir;
    jo["basename"] = output.basename;
    jo["binary"] = output.binary;
    j["output"] = jo;
    return j;
}

// ---------------------------------------------------------------------------
// Loading
// ---------------------------------------------------------------------------

/// Parses and validates a scenario file. Parse failures report the line and
/// column; validation failures name the violated condition.
inline ScenarioConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(strf("cannot open config file '%s'", path.c_str()));
    std::stringstream buffer;
    buffer << in.rdbuf();
    const std::string text = buffer.str();
    json j;
    try {
        j = json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        size_t line = 1, col = 1;
        for (size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
            if (text[i] == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
        }
        throw ConfigError(strf("%s: parse error at line %zu, column %zu: %s", path.c_str(), line, col, e.what()));
    }
    ScenarioConfig cfg;
    try {
        cfg = ScenarioConfig::from_json(j);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(strf("%s: %s", path.c_str(), e.what()));
    }
    cfg.validate();
    return cfg;
}

// ---------------------------------------------------------------------------
// Builtin catalog
// ---------------------------------------------------------------------------

namespace detail {
inline TrajectorySpec sine_spec(double amplitude) {
    TrajectorySpec spec;
    spec.kind = TrajectorySpec::Kind::Sinusoid;
    spec.amplitude = Eigen::VectorXd::Constant(1, amplitude);
    spec.omega = 1.0;
    spec.phase = Eigen::VectorXd::Zero(1);
    spec.offset = Eigen::VectorXd::Zero(1);
    return spec;
}

inline ObjectiveSpec scalar_tracking_spec(double amplitude) {
    ObjectiveSpec obj;
    obj.kind = ObjectiveSpec::Kind::QuadraticTracking;
    obj.tracking_weight = Eigen::MatrixXd::Identity(1, 1);
    obj.traj = sine_spec(amplitude);
    return obj;
}
}  // namespace detail

/// Scalar sinusoid tracking with the adaptive single-integrator law.
inline ScenarioConfig builtin_quad_si_central() {
    ScenarioConfig cfg;
    cfg.name = "quad_si_central";
    cfg.controller = ControllerKind::CentralizedSi;
    cfg.objectives = {detail::scalar_tracking_spec(1.0)};
    cfg.gains.gamma1 = Eigen::MatrixXd::Constant(1, 1, 2.0);
    cfg.initial.x0 = {Eigen::VectorXd::Constant(1, 2.0)};
    cfg.integrator.record_every = 1;
    cfg.alpha_bound = 2.5;
    cfg.finalize();
    return cfg;
}

/// Five agents on a cycle, each tracking a differently scaled sinusoid, with
/// the distributed single-integrator law and the finite-time estimator.
inline ScenarioConfig builtin_quad_si_dist() {
    ScenarioConfig cfg;
    cfg.name = "quad_si_dist";
    cfg.controller = ControllerKind::DistributedSi;
    TopologySpec topo;
    topo.generator = "cycle";
    topo.n = 5;
    cfg.topology = topo;
    const double amps[5] = {0.6, 0.8, 1.0, 1.2, 1.4};
    for (double a : amps) cfg.objectives.push_back(detail::scalar_tracking_spec(a));
    cfg.gains.gamma_theta = {Eigen::MatrixXd::Identity(1, 1)};
    cfg.gains.alpha_est = 15.0;
    cfg.gains.epsilon = 0.1;
    cfg.gains.c = 0.1;
    const double x0s[5] = {2.0, -1.0, 0.5, -2.0, 1.0};
    for (double x : x0s) cfg.initial.x0.push_back(Eigen::VectorXd::Constant(1, x));
    cfg.alpha_bound = 3.0;
    cfg.finalize();
    return cfg;
}

/// Scalar sinusoid tracking with the adaptive double-integrator law.
inline ScenarioConfig builtin_quad_di_central() {
    ScenarioConfig cfg;
    cfg.name = "quad_di_central";
    cfg.controller = ControllerKind::CentralizedDi;
    cfg.objectives = {detail::scalar_tracking_spec(1.0)};
    cfg.gains.gamma1 = Eigen::MatrixXd::Constant(1, 1, 2.0);
    cfg.gains.gamma2 = Eigen::MatrixXd::Constant(1, 1, 2.0);
    cfg.gains.gamma3 = Eigen::MatrixXd::Constant(1, 1, 2.0);
    cfg.initial.x0 = {Eigen::VectorXd::Constant(1, 2.0)};
    cfg.initial.v0 = {Eigen::VectorXd::Zero(1)};
    cfg.integrator.record_every = 1;
    cfg.alpha_bound = 2.5;
    cfg.finalize();
    return cfg;
}

/// Five vehicles seeking a circling signal source with four reference anchors,
/// distributed double-integrator law under feedback-linearized vehicle
/// dynamics.
inline ScenarioConfig builtin_source_seek() {
    ScenarioConfig cfg;
    cfg.name = "source_seek";
    cfg.controller = ControllerKind::DistributedDi;

    Eigen::MatrixXd adjacency(5, 5);
    adjacency << 0, 1, 0, 0, 1,  //
        1, 0, 1, 0, 0,           //
        0, 1, 0, 1, 0,           //
        0, 0, 1, 0, 1,           //
        1, 0, 0, 1, 0;
    TopologySpec topo;
    topo.adjacency = adjacency;
    cfg.topology = topo;

    Eigen::MatrixXd b(2, 2);
    b << 1.9, 0.0, 0.0, 2.1;
    TrajectorySpec r;
    r.kind = TrajectorySpec::Kind::Sinusoid;
    r.amplitude = Eigen::VectorXd::Ones(2);
    r.omega = 1.0;
    r.phase = (Eigen::VectorXd(2) << 0.0, std::numbers::pi / 2.0).finished();  // (sin t, cos t)
    r.offset = Eigen::VectorXd::Zero(2);

    const Eigen::Vector2d anchor_positions[4] = {{-6.0, 6.0}, {6.0, 6.0}, {6.0, -6.0}, {-6.0, -6.0}};
    const int anchor_sets[5][2] = {{0, 1}, {1, 2}, {2, 3}, {0, 3}, {0, 2}};
    for (int i = 0; i < 5; ++i) {
        ObjectiveSpec obj;
        obj.kind = ObjectiveSpec::Kind::SourceSeekLocal;
        obj.signal_power = 0.9;
        obj.trajectory_param = b;
        obj.source_traj = r;
        for (int a : anchor_sets[i]) obj.anchors.push_back({0.1, anchor_positions[a]});
        cfg.objectives.push_back(std::move(obj));
    }

    cfg.gains.k1 = 3.12;
    cfg.gains.k2 = 1.1;
    cfg.gains.epsilon = 0.1;
    cfg.gains.c = 0.1;
    cfg.gains.gamma_theta = {0.8 * Eigen::MatrixXd::Identity(2, 2)};
    cfg.gains.gamma_omega = 0.5 * Eigen::MatrixXd::Identity(2, 2);
    cfg.gains.gamma_a = {Eigen::MatrixXd::Identity(2, 2)};

    const double x0s[5][2] = {{4, 4}, {-4, 4}, {-4, -4}, {4, -4}, {1, 3}};
    for (const auto& x : x0s) cfg.initial.x0.push_back((Eigen::VectorXd(2) << x[0], x[1]).finished());
    for (int i = 0; i < 5; ++i) cfg.initial.v0.push_back(Eigen::VectorXd::Zero(2));

    VehicleSpec vehicle;
    vehicle.masses = (Eigen::VectorXd(5) << 1.9, 2.0, 2.1, 2.2, 2.3).finished();
    for (int i = 1; i <= 5; ++i)
        vehicle.frictions.push_back((Eigen::VectorXd(2) << 0.5 + 0.1 * i, 0.6 + 0.2 * i).finished());
    cfg.vehicle = std::move(vehicle);

    cfg.alpha_bound = 5.0;
    cfg.beta_bar = 10.0;
    cfg.finalize();
    return cfg;
}

struct BuiltinEntry {
    std::string name;
    std::string description;
    std::function<ScenarioConfig()> factory;
};

inline const std::vector<BuiltinEntry>& builtin_catalog() {
    static const std::vector<BuiltinEntry> catalog = {
        {"quad_si_central", "scalar sinusoid tracking, adaptive single-integrator law", builtin_quad_si_central},
        {"quad_si_dist", "five-agent cycle, distributed single-integrator law with finite-time estimator",
         builtin_quad_si_dist},
        {"quad_di_central", "scalar sinusoid tracking, adaptive double-integrator law", builtin_quad_di_central},
        {"source_seek", "five vehicles seeking a circling source, distributed double-integrator law",
         builtin_source_seek},
    };
    return catalog;
}

/// Resolves "builtin:NAME" to a catalog entry, anything else to a file path.
inline ScenarioConfig resolve_scenario(const std::string& arg) {
    const std::string prefix = "builtin:";
    if (arg.rfind(prefix, 0) == 0) {
        const std::string name = arg.substr(prefix.size());
        for (const auto& entry : builtin_catalog())
            if (entry.name == name) return entry.factory();
        throw ConfigError(strf("unknown builtin scenario '%s' (see `list`)", name.c_str()));
    }
    return load_config(arg);
}

}  // namespace tvopt
