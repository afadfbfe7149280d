#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <optional>
#include <utility>
#include <vector>

#include "tvopt/common.hpp"
#include "tvopt/controllers.hpp"
#include "tvopt/scenario.hpp"
#include "tvopt/sim.hpp"

namespace tvopt {

/// Raised when a state goes non-finite; carries the most recent records so the
/// caller can dump them for diagnosis.
class DivergenceError : public SimulationError {
public:
    DivergenceError(const std::string& msg, std::vector<TraceRecord> tail_records)
        : SimulationError(msg), tail(std::move(tail_records)) {}
    std::vector<TraceRecord> tail;
};

namespace detail {

inline Eigen::Map<const Eigen::MatrixXd> cmat(const Eigen::VectorXd& y, int off, int rows, int cols) {
    return Eigen::Map<const Eigen::MatrixXd>(y.data() + off, rows, cols);
}
inline Eigen::Map<Eigen::MatrixXd> mmat(Eigen::VectorXd& y, int off, int rows, int cols) {
    return Eigen::Map<Eigen::MatrixXd>(y.data() + off, rows, cols);
}

/// Offsets of one agent's blocks inside the packed state (-1 = absent).
struct AgentLayout {
    int x = -1, v = -1, sigma = -1, theta = -1, omega = -1, a = -1, beta = -1;
    int p = 0;
    int deg = 0;
};

/// Closed-loop system for one scenario: packs agent and estimator states into
/// a flat vector, evaluates every control law from a consistent snapshot and
/// produces trace records with oracle-referenced errors and Lyapunov values.
class SimulationEngine {
public:
    explicit SimulationEngine(const ScenarioConfig& cfg)
        : cfg_(cfg), models_(cfg.build_objectives()), oracle_(models_) {
        n_ = cfg_.n_agents();
        m_ = models_.front().dim();
        views_.reserve(models_.size());
        for (const auto& model : models_) views_.emplace_back(model);
        if (is_distributed(cfg_.controller)) {
            topo_ = cfg_.build_topology();
            spectral_ = build_spectral(*topo_);
        }
        smoothing_ = SmoothingParams{cfg_.gains.epsilon, cfg_.gains.c, m_};
        if (cfg_.controller == ControllerKind::NonadaptiveSi) {
            const TrueParams& tp = models_.front().true_params();
            baseline_omega_ = cfg_.gains.nonadaptive_omega_scale * tp.omega;
            baseline_a_ = cfg_.gains.nonadaptive_a_scale * tp.a;
        }
        build_layout();
    }

    std::vector<TraceRecord> run() {
        const double h = cfg_.integrator.step;
        const long n_steps = std::lround(cfg_.integrator.t_end / h);
        std::vector<TraceRecord> records;
        records.reserve(static_cast<size_t>(n_steps / cfg_.integrator.record_every + 2));
        Eigen::VectorXd y = initial_state();
        for (long k = 0; k <= n_steps; ++k) {
            const double t = static_cast<double>(k) * h;
            if (!y.allFinite()) {
                const size_t keep = std::min<size_t>(records.size(), 100);
                std::vector<TraceRecord> tail(records.end() - static_cast<long>(keep), records.end());
                throw DivergenceError(
                    strf("state became non-finite at t=%.6g (step %ld); dumping last %zu records", t, k, keep),
                    std::move(tail));
            }
            if (k % cfg_.integrator.record_every == 0 || k == n_steps) records.push_back(make_record(t, y));
            if (k == n_steps) break;
            const StepContext ctx = make_context(t, y);
            y = integrator_step(cfg_.integrator.method, t, y, h,
                                [&](double tt, const Eigen::VectorXd& yy) { return deriv(tt, yy, ctx); });
            if (cfg_.clamp_beta) clamp_betas(y);
        }
        return records;
    }

private:
    /// Data shared by every stage evaluation of one step. Distributed DI
    /// recomputes its global sums once per step (one two-round exchange per
    /// time step), so they are frozen here rather than per stage.
    struct StepContext {
        std::vector<GlobalAggregates> aggregates;
    };

    void build_layout() {
        layouts_.assign(static_cast<size_t>(n_), AgentLayout{});
        int off = 0;
        const bool di = is_double_integrator(cfg_.controller);
        for (int i = 0; i < n_; ++i) {
            AgentLayout& lay = layouts_[static_cast<size_t>(i)];
            lay.p = models_[static_cast<size_t>(i)].param_dim();
            lay.deg = topo_ ? topo_->degree(i) : 0;
            lay.x = off;
            off += m_;
            if (di) {
                lay.v = off;
                off += m_;
            }
            switch (cfg_.controller) {
                case ControllerKind::CentralizedSi:
                    lay.theta = off;  // eta1_hat
                    off += m_ * lay.p;
                    break;
                case ControllerKind::CentralizedDi:
                    lay.theta = off;  // eta1_hat
                    off += m_ * lay.p;
                    lay.omega = off;  // eta2_hat
                    off += m_ * m_;
                    lay.a = off;  // eta3_hat
                    off += m_ * lay.p;
                    break;
                case ControllerKind::DistributedSi:
                    lay.sigma = off;
                    off += m_;
                    lay.theta = off;
                    off += m_ * lay.p;
                    lay.beta = off;
                    off += lay.deg;
                    break;
                case ControllerKind::DistributedDi:
                    lay.theta = off;
                    off += m_ * lay.p;
                    lay.omega = off;
                    off += m_ * m_;
                    lay.a = off;
                    off += m_ * lay.p;
                    lay.beta = off;
                    off += lay.deg;
                    break;
                case ControllerKind::NonadaptiveSi:
                    break;
            }
        }
        state_size_ = off;
    }

    Eigen::VectorXd initial_state() const {
        Eigen::VectorXd y = Eigen::VectorXd::Zero(state_size_);
        for (int i = 0; i < n_; ++i) {
            const AgentLayout& lay = layouts_[static_cast<size_t>(i)];
            y.segment(lay.x, m_) = cfg_.initial.x0[static_cast<size_t>(i)];
            if (lay.v >= 0) y.segment(lay.v, m_) = cfg_.initial.v0[static_cast<size_t>(i)];
            if (lay.sigma >= 0) y.segment(lay.sigma, m_) = cfg_.initial.sigma0[static_cast<size_t>(i)];
            switch (cfg_.controller) {
                case ControllerKind::CentralizedSi:
                    mmat(y, lay.theta, m_, lay.p) = cfg_.initial.eta1;
                    break;
                case ControllerKind::CentralizedDi:
                    mmat(y, lay.theta, m_, lay.p) = cfg_.initial.eta1;
                    mmat(y, lay.omega, m_, m_) = cfg_.initial.eta2;
                    mmat(y, lay.a, m_, lay.p) = cfg_.initial.eta3;
                    break;
                case ControllerKind::DistributedSi:
                    mmat(y, lay.theta, m_, lay.p) = cfg_.initial.theta0[static_cast<size_t>(i)];
                    y.segment(lay.beta, lay.deg).setConstant(cfg_.initial.beta0);
                    break;
                case ControllerKind::DistributedDi:
                    mmat(y, lay.theta, m_, lay.p) = cfg_.initial.theta0[static_cast<size_t>(i)];
                    mmat(y, lay.omega, m_, m_) = cfg_.initial.omega0[static_cast<size_t>(i)];
                    mmat(y, lay.a, m_, lay.p) = cfg_.initial.a0[static_cast<size_t>(i)];
                    y.segment(lay.beta, lay.deg).setConstant(cfg_.initial.beta0);
                    break;
                case ControllerKind::NonadaptiveSi:
                    break;
            }
        }
        return y;
    }

    std::map<int, double> unpack_beta(const Eigen::VectorXd& y, int i) const {
        std::map<int, double> beta;
        const AgentLayout& lay = layouts_[static_cast<size_t>(i)];
        const auto& nbrs = topo_->neighbors(i);
        for (size_t k = 0; k < nbrs.size(); ++k) beta[nbrs[k]] = y(lay.beta + static_cast<int>(k));
        return beta;
    }

    void pack_beta(Eigen::VectorXd& dy, int i, const std::map<int, double>& d_beta) const {
        const AgentLayout& lay = layouts_[static_cast<size_t>(i)];
        const auto& nbrs = topo_->neighbors(i);
        for (size_t k = 0; k < nbrs.size(); ++k) dy(lay.beta + static_cast<int>(k)) = d_beta.at(nbrs[k]);
    }

    void clamp_betas(Eigen::VectorXd& y) const {
        for (const auto& lay : layouts_)
            if (lay.beta >= 0 && lay.deg > 0)
                y.segment(lay.beta, lay.deg) = y.segment(lay.beta, lay.deg).cwiseMax(0.0);
    }

    /// Acceleration produced by the plant for commanded input u: the ideal
    /// double integrator, or the vehicle under its linearizing control force.
    Eigen::VectorXd plant_accel(int i, const Eigen::VectorXd& u, const Eigen::VectorXd& v) const {
        if (!cfg_.vehicle) return u;
        const double mass = cfg_.vehicle->masses(i);
        const Eigen::VectorXd& friction = cfg_.vehicle->frictions[static_cast<size_t>(i)];
        const Eigen::VectorXd tau = feedback_linearize_vehicle(u, v, mass, friction);
        return (tau + friction.cwiseProduct(vehicle_drag(v))) / mass;
    }

    StepContext make_context(double t, const Eigen::VectorXd& y) const {
        StepContext ctx;
        if (cfg_.controller != ControllerKind::DistributedDi) return ctx;
        std::vector<Eigen::VectorXd> grads(static_cast<size_t>(n_)), hvs(static_cast<size_t>(n_)),
            combined(static_cast<size_t>(n_));
        for (int i = 0; i < n_; ++i) {
            const AgentLayout& lay = layouts_[static_cast<size_t>(i)];
            const Eigen::VectorXd x = y.segment(lay.x, m_);
            const Eigen::VectorXd v = y.segment(lay.v, m_);
            const Eigen::MatrixXd theta = cmat(y, lay.theta, m_, lay.p);
            const Eigen::VectorXd grad = views_[static_cast<size_t>(i)].grad(x, t);
            const Eigen::MatrixXd h = views_[static_cast<size_t>(i)].h(x, t);
            const Eigen::VectorXd g = views_[static_cast<size_t>(i)].g(x, t);
            const Eigen::MatrixXd h_inv = invert_checked(h, t, x);
            grads[static_cast<size_t>(i)] = grad;
            hvs[static_cast<size_t>(i)] = h * v;
            combined[static_cast<size_t>(i)] = grad + h_inv * theta * g + v;
        }
        // each agent obtains its own copy of the global sums through the
        // two-round exchange; three invocations run in parallel over the data
        const auto zeta_n = distributed_summation(grads, *topo_);
        const auto sum_hv = distributed_summation(hvs, *topo_);
        const auto zeta_g = distributed_summation(combined, *topo_);
        ctx.aggregates.resize(static_cast<size_t>(n_));
        for (int i = 0; i < n_; ++i)
            ctx.aggregates[static_cast<size_t>(i)] =
                GlobalAggregates{zeta_n[static_cast<size_t>(i)], sum_hv[static_cast<size_t>(i)],
                                 zeta_g[static_cast<size_t>(i)]};
        return ctx;
    }

    Eigen::VectorXd deriv(double t, const Eigen::VectorXd& y, const StepContext& ctx) const {
        Eigen::VectorXd dy = Eigen::VectorXd::Zero(state_size_);
        switch (cfg_.controller) {
            case ControllerKind::CentralizedSi: {
                const AgentLayout& lay = layouts_[0];
                CentralizedSiState st{cmat(y, lay.theta, m_, lay.p), cfg_.gains.gamma1};
                const auto d = centralized_si_step(y.segment(lay.x, m_), t, views_[0], st);
                dy.segment(lay.x, m_) = d.u;
                mmat(dy, lay.theta, m_, lay.p) = d.d_eta1;
                break;
            }
            case ControllerKind::NonadaptiveSi: {
                const AgentLayout& lay = layouts_[0];
                dy.segment(lay.x, m_) = nonadaptive_si_step(y.segment(lay.x, m_), t, views_[0],
                                                            cfg_.gains.nonadaptive_k, baseline_omega_, baseline_a_);
                break;
            }
            case ControllerKind::CentralizedDi: {
                const AgentLayout& lay = layouts_[0];
                CentralizedDiState st{cmat(y, lay.theta, m_, lay.p), cmat(y, lay.omega, m_, m_),
                                      cmat(y, lay.a, m_, lay.p),    cfg_.gains.gamma1,
                                      cfg_.gains.gamma2,            cfg_.gains.gamma3};
                const Eigen::VectorXd x = y.segment(lay.x, m_);
                const Eigen::VectorXd v = y.segment(lay.v, m_);
                const auto d = centralized_di_step(x, v, t, views_[0], st);
                dy.segment(lay.x, m_) = v;
                dy.segment(lay.v, m_) = plant_accel(0, d.u, v);
                mmat(dy, lay.theta, m_, lay.p) = d.d_eta1;
                mmat(dy, lay.omega, m_, m_) = d.d_eta2;
                mmat(dy, lay.a, m_, lay.p) = d.d_eta3;
                break;
            }
            case ControllerKind::DistributedSi: {
                // consistent snapshot: all estimator outputs from the same state
                std::vector<Eigen::VectorXd> xs(static_cast<size_t>(n_)), xis(static_cast<size_t>(n_));
                for (int i = 0; i < n_; ++i) {
                    const AgentLayout& lay = layouts_[static_cast<size_t>(i)];
                    xs[static_cast<size_t>(i)] = y.segment(lay.x, m_);
                    xis[static_cast<size_t>(i)] =
                        y.segment(lay.sigma, m_) + views_[static_cast<size_t>(i)].grad(xs[static_cast<size_t>(i)], t);
                }
                for (int i = 0; i < n_; ++i) {
                    const AgentLayout& lay = layouts_[static_cast<size_t>(i)];
                    DistributedSiAgentState st;
                    st.sigma = y.segment(lay.sigma, m_);
                    st.beta = unpack_beta(y, i);
                    st.theta_hat = cmat(y, lay.theta, m_, lay.p);
                    st.gamma_theta = cfg_.gains.gamma_theta[static_cast<size_t>(i)];
                    st.alpha_est = cfg_.gains.alpha_est;
                    std::vector<NeighborSi> nbrs;
                    nbrs.reserve(topo_->neighbors(i).size());
                    for (int j : topo_->neighbors(i))
                        nbrs.push_back({j, xs[static_cast<size_t>(j)], xis[static_cast<size_t>(j)]});
                    const auto d =
                        distributed_si_step(xs[static_cast<size_t>(i)], t, views_[static_cast<size_t>(i)], st, nbrs,
                                            n_, smoothing_);
                    dy.segment(lay.x, m_) = d.u;
                    dy.segment(lay.sigma, m_) = d.d_sigma;
                    mmat(dy, lay.theta, m_, lay.p) = d.d_theta;
                    pack_beta(dy, i, d.d_beta);
                }
                break;
            }
            case ControllerKind::DistributedDi: {
                std::vector<Eigen::VectorXd> xs(static_cast<size_t>(n_)), vs(static_cast<size_t>(n_));
                for (int i = 0; i < n_; ++i) {
                    const AgentLayout& lay = layouts_[static_cast<size_t>(i)];
                    xs[static_cast<size_t>(i)] = y.segment(lay.x, m_);
                    vs[static_cast<size_t>(i)] = y.segment(lay.v, m_);
                }
                for (int i = 0; i < n_; ++i) {
                    const AgentLayout& lay = layouts_[static_cast<size_t>(i)];
                    DistributedDiAgentState st;
                    st.beta = unpack_beta(y, i);
                    st.theta_hat = cmat(y, lay.theta, m_, lay.p);
                    st.omega_hat = cmat(y, lay.omega, m_, m_);
                    st.a_hat = cmat(y, lay.a, m_, lay.p);
                    st.gamma_theta = cfg_.gains.gamma_theta[static_cast<size_t>(i)];
                    st.gamma_omega = cfg_.gains.gamma_omega;
                    st.gamma_a = cfg_.gains.gamma_a[static_cast<size_t>(i)];
                    st.k1 = cfg_.gains.k1;
                    st.k2 = cfg_.gains.k2;
                    std::vector<NeighborDi> nbrs;
                    nbrs.reserve(topo_->neighbors(i).size());
                    for (int j : topo_->neighbors(i))
                        nbrs.push_back({j, xs[static_cast<size_t>(j)], vs[static_cast<size_t>(j)]});
                    const auto d = distributed_di_step(xs[static_cast<size_t>(i)], vs[static_cast<size_t>(i)], t,
                                                       views_[static_cast<size_t>(i)], st, nbrs,
                                                       ctx.aggregates[static_cast<size_t>(i)], n_, smoothing_);
                    dy.segment(lay.x, m_) = vs[static_cast<size_t>(i)];
                    dy.segment(lay.v, m_) = plant_accel(i, d.u, vs[static_cast<size_t>(i)]);
                    mmat(dy, lay.theta, m_, lay.p) = d.d_theta;
                    mmat(dy, lay.omega, m_, m_) = d.d_omega;
                    mmat(dy, lay.a, m_, lay.p) = d.d_a;
                    pack_beta(dy, i, d.d_beta);
                }
                break;
            }
        }
        return dy;
    }

    TraceRecord make_record(double t, const Eigen::VectorXd& y) const {
        TraceRecord rec;
        rec.t = t;
        rec.x.resize(static_cast<size_t>(n_));
        const bool di = is_double_integrator(cfg_.controller);
        if (di) rec.v.resize(static_cast<size_t>(n_));
        for (int i = 0; i < n_; ++i) {
            const AgentLayout& lay = layouts_[static_cast<size_t>(i)];
            rec.x[static_cast<size_t>(i)] = y.segment(lay.x, m_);
            if (di) rec.v[static_cast<size_t>(i)] = y.segment(lay.v, m_);
        }
        rec.x_star = oracle_.x_star(t);
        rec.tracking_error = 0.0;
        for (const auto& x : rec.x) rec.tracking_error = std::max(rec.tracking_error, (x - rec.x_star).norm());

        switch (cfg_.controller) {
            case ControllerKind::CentralizedSi: {
                const AgentLayout& lay = layouts_[0];
                CentralizedSiState st{cmat(y, lay.theta, m_, lay.p), cfg_.gains.gamma1};
                rec.estimates.theta = {st.eta1_hat};
                rec.lyapunov_v = lyapunov_diagnostics(models_[0], rec.x[0], t, st).v;
                break;
            }
            case ControllerKind::NonadaptiveSi:
                break;  // no adaptive state, no certificate
            case ControllerKind::CentralizedDi: {
                const AgentLayout& lay = layouts_[0];
                CentralizedDiState st{cmat(y, lay.theta, m_, lay.p), cmat(y, lay.omega, m_, m_),
                                      cmat(y, lay.a, m_, lay.p),    cfg_.gains.gamma1,
                                      cfg_.gains.gamma2,            cfg_.gains.gamma3};
                rec.estimates.theta = {st.eta1_hat};
                rec.estimates.omega = {st.eta2_hat};
                rec.estimates.a = {st.eta3_hat};
                rec.lyapunov_v = lyapunov_diagnostics(models_[0], rec.x[0], rec.v[0], t, st).v;
                break;
            }
            case ControllerKind::DistributedSi: {
                std::vector<DistributedSiAgentState> states(static_cast<size_t>(n_));
                Eigen::VectorXd zeta_n = Eigen::VectorXd::Zero(m_);
                std::vector<Eigen::VectorXd> xis(static_cast<size_t>(n_));
                for (int i = 0; i < n_; ++i) {
                    const AgentLayout& lay = layouts_[static_cast<size_t>(i)];
                    auto& st = states[static_cast<size_t>(i)];
                    st.sigma = y.segment(lay.sigma, m_);
                    st.beta = unpack_beta(y, i);
                    st.theta_hat = cmat(y, lay.theta, m_, lay.p);
                    st.gamma_theta = cfg_.gains.gamma_theta[static_cast<size_t>(i)];
                    st.alpha_est = cfg_.gains.alpha_est;
                    const Eigen::VectorXd grad =
                        views_[static_cast<size_t>(i)].grad(rec.x[static_cast<size_t>(i)], t);
                    xis[static_cast<size_t>(i)] = st.sigma + grad;
                    zeta_n += grad;
                    rec.estimates.sigma.push_back(st.sigma);
                    rec.estimates.theta.push_back(st.theta_hat);
                    rec.estimates.beta.push_back(st.beta);
                }
                for (const auto& xi : xis)
                    rec.estimator_error =
                        std::max(rec.estimator_error, (xi - zeta_n / static_cast<double>(n_)).norm());
                rec.consensus_error = detail::mean_deviation(rec.x).norm();
                const auto lyap = lyapunov_diagnostics(models_, rec.x, t, states, cfg_.beta_bar);
                rec.lyapunov_v = lyap.v;
                rec.lyapunov_w = lyap.w;
                break;
            }
            case ControllerKind::DistributedDi: {
                std::vector<DistributedDiAgentState> states(static_cast<size_t>(n_));
                for (int i = 0; i < n_; ++i) {
                    const AgentLayout& lay = layouts_[static_cast<size_t>(i)];
                    auto& st = states[static_cast<size_t>(i)];
                    st.beta = unpack_beta(y, i);
                    st.theta_hat = cmat(y, lay.theta, m_, lay.p);
                    st.omega_hat = cmat(y, lay.omega, m_, m_);
                    st.a_hat = cmat(y, lay.a, m_, lay.p);
                    st.gamma_theta = cfg_.gains.gamma_theta[static_cast<size_t>(i)];
                    st.gamma_omega = cfg_.gains.gamma_omega;
                    st.gamma_a = cfg_.gains.gamma_a[static_cast<size_t>(i)];
                    st.k1 = cfg_.gains.k1;
                    st.k2 = cfg_.gains.k2;
                    rec.estimates.theta.push_back(st.theta_hat);
                    rec.estimates.omega.push_back(st.omega_hat);
                    rec.estimates.a.push_back(st.a_hat);
                    rec.estimates.beta.push_back(st.beta);
                }
                rec.consensus_error = detail::mean_deviation(rec.x).norm();
                const auto lyap =
                    lyapunov_diagnostics(models_, rec.x, rec.v, t, states, *spectral_, cfg_.beta_bar);
                rec.lyapunov_v = lyap.v;
                rec.lyapunov_w = lyap.w;
                break;
            }
        }
        return rec;
    }

    ScenarioConfig cfg_;
    std::vector<ObjectiveModel> models_;
    std::vector<ObjectiveView> views_;
    OptimalTrajectory oracle_;
    std::optional<Topology> topo_;
    std::optional<SpectralData> spectral_;
    SmoothingParams smoothing_;
    Eigen::MatrixXd baseline_omega_, baseline_a_;
    std::vector<AgentLayout> layouts_;
    int state_size_ = 0;
    int n_ = 0;
    int m_ = 0;
};

}  // namespace detail

/// Integrates the closed-loop multi-agent system described by the scenario.
/// Deterministic for a fixed config: fixed step, fixed evaluation order, and
/// every derivative evaluation reads one consistent state snapshot.
inline std::vector<TraceRecord> simulate(const ScenarioConfig& cfg) {
    detail::SimulationEngine engine(cfg);
    return engine.run();
}

}  // namespace tvopt
