#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <map>
#include <optional>
#include <vector>

#include "tvopt/common.hpp"
#include "tvopt/graph.hpp"
#include "tvopt/objective.hpp"

namespace tvopt {

// ---------------------------------------------------------------------------
// Boundary-layer smoothing
// ---------------------------------------------------------------------------

/// Parameters of the vanishing boundary layer: the componentwise smooth sign
/// s(y) = y / (|y| + epsilon * exp(-c t)) approaches sign(y) as t grows.
struct SmoothingParams {
    double epsilon = 0.1;
    double c = 0.1;
    int dim = 1;
};

/// Componentwise smooth sign. Every output component lies strictly in (-1, 1)
/// for finite t, and the map is odd in y.
inline Eigen::VectorXd smooth_sign(const Eigen::VectorXd& y, double t, const SmoothingParams& params) {
    const double layer = params.epsilon * std::exp(-params.c * t);
    Eigen::VectorXd out(y.size());
    for (Eigen::Index k = 0; k < y.size(); ++k) out(k) = y(k) / (std::abs(y(k)) + layer);
    return out;
}

inline double sign_of(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

// ---------------------------------------------------------------------------
// Centralized single integrator
// ---------------------------------------------------------------------------

/// Estimate of the coupled unknown Omega^{-1} A together with its adaptation
/// gain. The single estimate avoids identifying Omega and A separately.
struct CentralizedSiState {
    Eigen::MatrixXd eta1_hat;  // m x p
    Eigen::MatrixXd gamma1;    // m x m, symmetric positive definite
};

struct CentralizedSiDeriv {
    Eigen::VectorXd u;
    Eigen::MatrixXd d_eta1;
};

/// Adaptive gradient-plus-feedforward law for xdot = u:
///   u       = -grad f - h^{-1} eta1_hat g
///   eta1dot = gamma1 (h^{-1})' grad f g'
/// Pure function; the caller integrates the returned derivatives.
inline CentralizedSiDeriv centralized_si_step(const Eigen::VectorXd& x, double t, const ObjectiveView& obj,
                                              const CentralizedSiState& st) {
    const Eigen::VectorXd grad = obj.grad(x, t);
    const Eigen::MatrixXd h_inv = invert_checked(obj.h(x, t), t, x);
    const Eigen::VectorXd g = obj.g(x, t);
    CentralizedSiDeriv out;
    out.u = -grad - h_inv * st.eta1_hat * g;
    out.d_eta1 = st.gamma1 * h_inv.transpose() * grad * g.transpose();
    return out;
}

/// Non-adaptive baseline that needs the full parameterization. Given assumed
/// (Omega, A) it applies xdot = -H^{-1} (k grad f + A g) with H = Omega h;
/// inaccurate parameters leave a persistent tracking error.
inline Eigen::VectorXd nonadaptive_si_step(const Eigen::VectorXd& x, double t, const ObjectiveView& obj,
                                           double k, const Eigen::MatrixXd& omega_assumed,
                                           const Eigen::MatrixXd& a_assumed) {
    const Eigen::MatrixXd hessian_assumed = omega_assumed * obj.h(x, t);
    const Eigen::MatrixXd h_inv = invert_checked(hessian_assumed, t, x, "assumed Hessian");
    return -h_inv * (k * obj.grad(x, t) + a_assumed * obj.g(x, t));
}

// ---------------------------------------------------------------------------
// Centralized double integrator
// ---------------------------------------------------------------------------

struct CentralizedDiState {
    Eigen::MatrixXd eta1_hat;  // m x p, estimates Omega^{-1} A
    Eigen::MatrixXd eta2_hat;  // m x m, estimates Omega
    Eigen::MatrixXd eta3_hat;  // m x p, estimates A
    Eigen::MatrixXd gamma1, gamma2, gamma3;
};

struct CentralizedDiDeriv {
    Eigen::VectorXd u;
    Eigen::MatrixXd d_eta1, d_eta2, d_eta3;
};

/// Adaptive law for xdot = v, vdot = u. The velocity reference is
/// v* = -grad f - h^{-1} eta1_hat g and zeta = v - v*; the control cancels the
/// estimated dynamics and the total derivative of the feedforward term:
///   u = -grad f - eta2_hat h v - eta3_hat g - d/dt( h^{-1} eta1_hat g )
/// with the last term expanded by the product rule using the adaptive law for
/// eta1_hat (no numeric differentiation).
inline CentralizedDiDeriv centralized_di_step(const Eigen::VectorXd& x, const Eigen::VectorXd& v, double t,
                                              const ObjectiveView& obj, const CentralizedDiState& st) {
    const Eigen::VectorXd grad = obj.grad(x, t);
    const Eigen::MatrixXd h = obj.h(x, t);
    const Eigen::MatrixXd h_inv = invert_checked(h, t, x);
    const Eigen::VectorXd g = obj.g(x, t);
    const Eigen::MatrixXd dh = obj.h_dot(x, v, t);
    const Eigen::VectorXd dg = obj.g_dot(x, v, t);

    CentralizedDiDeriv out;
    out.d_eta1 = st.gamma1 * h_inv.transpose() * grad * g.transpose();

    const Eigen::VectorXd v_star = -grad - h_inv * st.eta1_hat * g;
    const Eigen::VectorXd zeta = v - v_star;
    out.d_eta2 = st.gamma2 * zeta * v.transpose() * h;
    out.d_eta3 = st.gamma3 * zeta * g.transpose();

    const Eigen::MatrixXd dh_inv = -h_inv * dh * h_inv;
    const Eigen::VectorXd ff_rate = dh_inv * st.eta1_hat * g + h_inv * out.d_eta1 * g + h_inv * st.eta1_hat * dg;
    out.u = -grad - st.eta2_hat * h * v - st.eta3_hat * g - ff_rate;
    return out;
}

// ---------------------------------------------------------------------------
// Finite-time average estimator (distributed average tracking)
// ---------------------------------------------------------------------------

/// One derivative evaluation of the signum-coupled estimator
///   sigma_i_dot = -alpha * sum_{j in N_i} sgn(xi_i - xi_j),  xi_i = sigma_i + grad f_i.
/// sgn(0) = 0, so the pairwise terms cancel and sum_i sigma_i is conserved.
inline std::vector<Eigen::VectorXd> dat_estimator_step(const std::vector<Eigen::VectorXd>& xi,
                                                       const Topology& topo, double alpha_est) {
    const int n = topo.size();
    std::vector<Eigen::VectorXd> d_sigma(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        Eigen::VectorXd acc = Eigen::VectorXd::Zero(xi[static_cast<size_t>(i)].size());
        for (int j : topo.neighbors(i)) {
            const Eigen::VectorXd diff = xi[static_cast<size_t>(i)] - xi[static_cast<size_t>(j)];
            for (Eigen::Index k = 0; k < diff.size(); ++k) acc(k) -= alpha_est * sign_of(diff(k));
        }
        d_sigma[static_cast<size_t>(i)] = acc;
    }
    return d_sigma;
}

// ---------------------------------------------------------------------------
// Distributed single integrator
// ---------------------------------------------------------------------------

/// Per-agent state of the distributed single-integrator law: the estimator
/// internal state sigma, the adaptive consensus gains beta (keyed by neighbor
/// id), and the coupled-parameter estimate theta_hat.
struct DistributedSiAgentState {
    Eigen::VectorXd sigma;
    std::map<int, double> beta;
    Eigen::MatrixXd theta_hat;    // m x p_i
    Eigen::MatrixXd gamma_theta;  // m x m, symmetric positive definite
    double alpha_est = 0.0;       // estimator gain
};

/// Neighbor snapshot the agent receives over one hop: position and the
/// neighbor's estimator output xi_j.
struct NeighborSi {
    int id = 0;
    Eigen::VectorXd x;
    Eigen::VectorXd xi;
};

struct DistributedSiDeriv {
    Eigen::VectorXd u;
    Eigen::VectorXd d_sigma;
    std::map<int, double> d_beta;
    Eigen::MatrixXd d_theta;
};

/// Distributed single-integrator law for agent i:
///   u_i        = -sum_j beta_ij S(x_i - x_j) + phi_i
///   beta_ij dot = |x_i - x_j|_1 - m epsilon exp(-c t)
///   phi_i      = -grad f_i - h_i^{-1} theta_hat_i g_i
///   theta_dot  = N^2 Gamma_theta (h_i^{-1})' xi_i g_i'
/// using only the agent's own estimator output xi_i and one-hop neighbor data.
inline DistributedSiDeriv distributed_si_step(const Eigen::VectorXd& x_i, double t, const ObjectiveView& obj,
                                              const DistributedSiAgentState& st,
                                              const std::vector<NeighborSi>& neighbors, int n_agents,
                                              const SmoothingParams& params) {
    const int m = obj.dim();
    const Eigen::VectorXd grad = obj.grad(x_i, t);
    const Eigen::MatrixXd h_inv = invert_checked(obj.h(x_i, t), t, x_i);
    const Eigen::VectorXd g = obj.g(x_i, t);
    const Eigen::VectorXd xi_i = st.sigma + grad;
    const double layer = m * params.epsilon * std::exp(-params.c * t);

    DistributedSiDeriv out;
    out.u = -grad - h_inv * st.theta_hat * g;  // phi_i
    out.d_sigma = Eigen::VectorXd::Zero(m);
    for (const auto& nb : neighbors) {
        const Eigen::VectorXd diff = x_i - nb.x;
        const auto beta_it = st.beta.find(nb.id);
        const double beta = beta_it == st.beta.end() ? 0.0 : beta_it->second;
        out.u -= beta * smooth_sign(diff, t, params);
        out.d_beta[nb.id] = diff.lpNorm<1>() - layer;
        const Eigen::VectorXd xi_diff = xi_i - nb.xi;
        for (Eigen::Index k = 0; k < xi_diff.size(); ++k)
            out.d_sigma(k) -= st.alpha_est * sign_of(xi_diff(k));
    }
    const double n2 = static_cast<double>(n_agents) * static_cast<double>(n_agents);
    out.d_theta = n2 * st.gamma_theta * h_inv.transpose() * xi_i * g.transpose();
    return out;
}

// ---------------------------------------------------------------------------
// Distributed summation (exact two-round global sums)
// ---------------------------------------------------------------------------

/// Two synchronous neighbor-exchange rounds that give every agent the exact
/// global sum of the local values, provided any two agents are neighbors or
/// share a common neighbor. Round 1 collects one-hop values; round 2 adds the
/// values of two-hop vertices not already counted.
inline std::vector<Eigen::VectorXd> distributed_summation(const std::vector<Eigen::VectorXd>& local_values,
                                                          const Topology& topo) {
    const int n = topo.size();
    if (static_cast<int>(local_values.size()) != n)
        throw ValidationError("distributed summation: one value per agent required");
    if (const auto uncovered = first_uncovered_pair(topo)) {
        throw ValidationError(strf(
            "distributed summation requires a two-hop cover: agents %d and %d are neither adjacent nor share "
            "a common neighbor (Assumption 6)",
            uncovered->first, uncovered->second));
    }

    std::vector<Eigen::VectorXd> psi(static_cast<size_t>(n));
    // Round 1: psi_i <- own value + one-hop neighbor values.
    for (int i = 0; i < n; ++i) {
        Eigen::VectorXd acc = local_values[static_cast<size_t>(i)];
        for (int j : topo.neighbors(i)) acc += local_values[static_cast<size_t>(j)];
        psi[static_cast<size_t>(i)] = acc;
    }
    // Round 2: each neighbor j relays its closed neighborhood; add the
    // vertices outside the agent's own closed neighborhood, each once.
    for (int i = 0; i < n; ++i) {
        std::vector<char> counted(static_cast<size_t>(n), 0);
        counted[static_cast<size_t>(i)] = 1;
        for (int j : topo.neighbors(i)) counted[static_cast<size_t>(j)] = 1;
        std::vector<char> in_c(static_cast<size_t>(n), 0);
        for (int j : topo.neighbors(i)) {
            in_c[static_cast<size_t>(j)] = 1;  // j's own value is part of its relayed neighborhood
            for (int l : topo.neighbors(j)) in_c[static_cast<size_t>(l)] = 1;
        }
        for (int l = 0; l < n; ++l)
            if (in_c[static_cast<size_t>(l)] && !counted[static_cast<size_t>(l)])
                psi[static_cast<size_t>(i)] += local_values[static_cast<size_t>(l)];
    }
    return psi;
}

// ---------------------------------------------------------------------------
// Distributed double integrator
// ---------------------------------------------------------------------------

/// Global sums an agent obtains from the two-round summation, recomputed once
/// per time step: zeta_n = sum grad f_j, sum_hv = sum h_j v_j and
/// zeta_g = sum (grad f_j + h_j^{-1} theta_hat_j g_j + v_j).
struct GlobalAggregates {
    Eigen::VectorXd zeta_n;
    Eigen::VectorXd sum_hv;
    Eigen::VectorXd zeta_g;
};

struct DistributedDiAgentState {
    std::map<int, double> beta;
    Eigen::MatrixXd theta_hat;  // m x p_i, estimates N (sum Omega_j)^{-1} A_i
    Eigen::MatrixXd omega_hat;  // m x m, estimates the shared Omega
    Eigen::MatrixXd a_hat;      // m x p_i, estimates A_i
    Eigen::MatrixXd gamma_theta, gamma_omega, gamma_a;
    double k1 = 0.0, k2 = 0.0;
};

struct NeighborDi {
    int id = 0;
    Eigen::VectorXd x;
    Eigen::VectorXd v;
};

struct DistributedDiDeriv {
    Eigen::VectorXd u;
    std::map<int, double> d_beta;
    Eigen::MatrixXd d_theta, d_omega, d_a;
};

/// Distributed double-integrator law for agent i. The consensus part combines
/// a linear position/velocity coupling with an adaptively weighted smooth sign
/// of the same mixed error; phi_i cancels the estimated dynamics:
///   u_i   = -sum_j [ k1 (x_i-x_j) + k2 (v_i-v_j) ]
///           -sum_j beta_ij S( k1 (x_i-x_j) + k2 (v_i-v_j) ) + phi_i
///   phi_i = -grad f_i - omega_hat h_i v_i - a_hat g_i - d/dt( h_i^{-1} theta_hat g_i )
/// with the adaptive laws driven by the two-round global aggregates.
inline DistributedDiDeriv distributed_di_step(const Eigen::VectorXd& x_i, const Eigen::VectorXd& v_i, double t,
                                              const ObjectiveView& obj, const DistributedDiAgentState& st,
                                              const std::vector<NeighborDi>& neighbors,
                                              const GlobalAggregates& agg, int n_agents,
                                              const SmoothingParams& params) {
    const int m = obj.dim();
    if (agg.zeta_n.size() != m || agg.sum_hv.size() != m || agg.zeta_g.size() != m)
        throw ValidationError("aggregate dimension does not match the agent state");
    const Eigen::VectorXd grad = obj.grad(x_i, t);
    const Eigen::MatrixXd h = obj.h(x_i, t);
    const Eigen::MatrixXd h_inv = invert_checked(h, t, x_i);
    const Eigen::VectorXd g = obj.g(x_i, t);
    const Eigen::MatrixXd dh = obj.h_dot(x_i, v_i, t);
    const Eigen::VectorXd dg = obj.g_dot(x_i, v_i, t);
    const double n = static_cast<double>(n_agents);
    const double layer = m * params.epsilon * std::exp(-params.c * t);

    DistributedDiDeriv out;
    out.d_theta = n * st.gamma_theta * h_inv.transpose() * agg.zeta_n * g.transpose();
    out.d_omega = (1.0 / n) * st.gamma_omega * agg.zeta_g * agg.sum_hv.transpose();
    out.d_a = (1.0 / n) * st.gamma_a * agg.zeta_g * g.transpose();

    const Eigen::MatrixXd dh_inv = -h_inv * dh * h_inv;
    const Eigen::VectorXd ff_rate = dh_inv * st.theta_hat * g + h_inv * out.d_theta * g + h_inv * st.theta_hat * dg;
    out.u = -grad - st.omega_hat * h * v_i - st.a_hat * g - ff_rate;  // phi_i
    for (const auto& nb : neighbors) {
        const Eigen::VectorXd mixed = st.k1 * (x_i - nb.x) + st.k2 * (v_i - nb.v);
        const auto beta_it = st.beta.find(nb.id);
        const double beta = beta_it == st.beta.end() ? 0.0 : beta_it->second;
        out.u -= mixed + beta * smooth_sign(mixed, t, params);
        out.d_beta[nb.id] = mixed.lpNorm<1>() - layer;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Lyapunov diagnostics
// ---------------------------------------------------------------------------

/// Runtime evaluation of the stability certificates. V is the adaptive-law
/// Lyapunov candidate of the matching design; W (distributed kinds only) is
/// the consensus candidate and depends on the user-supplied constant beta_bar,
/// so it is logged for inspection, never asserted.
struct LyapunovDiagnostics {
    double v = 0.0;
    std::optional<double> w;
};

namespace detail {
inline double trace_quad(const Eigen::MatrixXd& err, const Eigen::MatrixXd& gain) {
    // tr(err' gain^{-1} err), gains are SPD by construction
    return (err.transpose() * gain.inverse() * err).trace();
}

inline double beta_spread(const std::vector<std::map<int, double>>& betas, double beta_bar) {
    double acc = 0.0;
    for (const auto& per_agent : betas)
        for (const auto& [_, b] : per_agent) acc += (b - beta_bar) * (b - beta_bar);
    return 0.5 * acc;
}

/// Stacked deviation from the network average, e_i = x_i - mean_j x_j.
inline Eigen::VectorXd mean_deviation(const std::vector<Eigen::VectorXd>& xs) {
    const int m = static_cast<int>(xs.front().size());
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(m);
    for (const auto& x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    Eigen::VectorXd out(static_cast<Eigen::Index>(xs.size()) * m);
    for (size_t i = 0; i < xs.size(); ++i) out.segment(static_cast<Eigen::Index>(i) * m, m) = xs[i] - mean;
    return out;
}

inline Eigen::MatrixXd kron_identity(const Eigen::MatrixXd& a, int m) {
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(a.rows() * m, a.cols() * m);
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j)
            out.block(i * m, j * m, m, m) = a(i, j) * Eigen::MatrixXd::Identity(m, m);
    return out;
}
}  // namespace detail

/// V = 1/2 grad' H^{-1} grad + 1/2 tr(eta1_err' gamma1^{-1} eta1_err) with
/// eta1_err = Omega^{-1} A - eta1_hat.
inline LyapunovDiagnostics lyapunov_diagnostics(const ObjectiveModel& obj, const Eigen::VectorXd& x, double t,
                                                const CentralizedSiState& st) {
    const Eigen::VectorXd grad = obj.grad(x, t);
    const Eigen::MatrixXd hess = obj.hessian(x, t);
    const TrueParams& tp = obj.true_params();
    const Eigen::MatrixXd eta1_err = tp.omega.inverse() * tp.a - st.eta1_hat;
    LyapunovDiagnostics out;
    out.v = 0.5 * (grad.transpose() * hess.inverse() * grad).value() + 0.5 * detail::trace_quad(eta1_err, st.gamma1);
    return out;
}

/// Double-integrator extension: adds the velocity error 1/2 zeta' zeta and the
/// eta2/eta3 estimate errors against Omega and A.
inline LyapunovDiagnostics lyapunov_diagnostics(const ObjectiveModel& obj, const Eigen::VectorXd& x,
                                                const Eigen::VectorXd& v, double t,
                                                const CentralizedDiState& st) {
    const Eigen::VectorXd grad = obj.grad(x, t);
    const Eigen::MatrixXd hess = obj.hessian(x, t);
    const TrueParams& tp = obj.true_params();
    const Eigen::MatrixXd h_inv = obj.h(x, t).inverse();
    const Eigen::VectorXd v_star = -grad - h_inv * st.eta1_hat * obj.g(x, t);
    const Eigen::VectorXd zeta = v - v_star;
    const Eigen::MatrixXd eta1_err = tp.omega.inverse() * tp.a - st.eta1_hat;
    const Eigen::MatrixXd eta2_err = tp.omega - st.eta2_hat;
    const Eigen::MatrixXd eta3_err = tp.a - st.eta3_hat;
    LyapunovDiagnostics out;
    out.v = 0.5 * (grad.transpose() * hess.inverse() * grad).value() + 0.5 * zeta.squaredNorm() +
            0.5 * detail::trace_quad(eta1_err, st.gamma1) + 0.5 * detail::trace_quad(eta2_err, st.gamma2) +
            0.5 * detail::trace_quad(eta3_err, st.gamma3);
    return out;
}

/// Distributed single-integrator certificate: V sums the network gradient
/// through (sum H_j)^{-1} and the theta estimate errors
/// theta_err_i = (sum Omega_j)^{-1} A_i - theta_hat_i / N; W = e'e plus the
/// beta spread around beta_bar.
inline LyapunovDiagnostics lyapunov_diagnostics(const std::vector<ObjectiveModel>& objectives,
                                                const std::vector<Eigen::VectorXd>& xs, double t,
                                                const std::vector<DistributedSiAgentState>& states,
                                                double beta_bar) {
    const size_t n = objectives.size();
    const int m = objectives.front().dim();
    const double n_d = static_cast<double>(n);
    Eigen::VectorXd zeta_n = Eigen::VectorXd::Zero(m);
    Eigen::MatrixXd hess_sum = Eigen::MatrixXd::Zero(m, m);
    Eigen::MatrixXd omega_sum = Eigen::MatrixXd::Zero(m, m);
    for (size_t i = 0; i < n; ++i) {
        zeta_n += objectives[i].grad(xs[i], t);
        hess_sum += objectives[i].hessian(xs[i], t);
        omega_sum += objectives[i].true_params().omega;
    }
    LyapunovDiagnostics out;
    out.v = 0.5 * (zeta_n.transpose() * hess_sum.inverse() * zeta_n).value();
    const Eigen::MatrixXd omega_sum_inv = omega_sum.inverse();
    std::vector<std::map<int, double>> betas;
    betas.reserve(n);
    for (size_t i = 0; i < n; ++i) {
        const Eigen::MatrixXd theta_err = omega_sum_inv * objectives[i].true_params().a - states[i].theta_hat / n_d;
        out.v += 0.5 * detail::trace_quad(theta_err, states[i].gamma_theta);
        betas.push_back(states[i].beta);
    }
    out.w = detail::mean_deviation(xs).squaredNorm() + detail::beta_spread(betas, beta_bar);
    return out;
}

/// Distributed double-integrator certificate. V adds the a_hat/omega_hat
/// errors and the mean velocity mismatch 1/(2N) |sum v* - sum v|^2; W is the
/// quadratic form y' P y in y = (e, delta) with
/// P = [2 k1 k2 L (x) I, k1 I; k1 I, k2 I], plus the beta spread.
inline LyapunovDiagnostics lyapunov_diagnostics(const std::vector<ObjectiveModel>& objectives,
                                                const std::vector<Eigen::VectorXd>& xs,
                                                const std::vector<Eigen::VectorXd>& vs, double t,
                                                const std::vector<DistributedDiAgentState>& states,
                                                const SpectralData& spectral, double beta_bar) {
    const size_t n = objectives.size();
    const int m = objectives.front().dim();
    const double n_d = static_cast<double>(n);
    Eigen::VectorXd zeta_n = Eigen::VectorXd::Zero(m);
    Eigen::MatrixXd hess_sum = Eigen::MatrixXd::Zero(m, m);
    Eigen::MatrixXd omega_sum = Eigen::MatrixXd::Zero(m, m);
    Eigen::VectorXd v_star_sum = Eigen::VectorXd::Zero(m);
    Eigen::VectorXd v_sum = Eigen::VectorXd::Zero(m);
    for (size_t i = 0; i < n; ++i) {
        const Eigen::VectorXd grad = objectives[i].grad(xs[i], t);
        zeta_n += grad;
        hess_sum += objectives[i].hessian(xs[i], t);
        omega_sum += objectives[i].true_params().omega;
        const Eigen::MatrixXd h_inv = objectives[i].h(xs[i], t).inverse();
        v_star_sum += -grad - h_inv * states[i].theta_hat * objectives[i].g(xs[i], t);
        v_sum += vs[i];
    }
    LyapunovDiagnostics out;
    out.v = 0.5 * (zeta_n.transpose() * hess_sum.inverse() * zeta_n).value() +
            0.5 / n_d * (v_star_sum - v_sum).squaredNorm();
    const Eigen::MatrixXd omega_sum_inv = omega_sum.inverse();
    // omega_hat is shared dynamics; agents stay identical under identical
    // initialization, so the network estimate is their average.
    Eigen::MatrixXd omega_hat_mean = Eigen::MatrixXd::Zero(m, m);
    std::vector<std::map<int, double>> betas;
    betas.reserve(n);
    for (size_t i = 0; i < n; ++i) {
        const TrueParams& tp = objectives[i].true_params();
        const Eigen::MatrixXd theta_err = omega_sum_inv * tp.a - states[i].theta_hat / n_d;
        const Eigen::MatrixXd a_err = tp.a - states[i].a_hat;
        out.v += 0.5 * detail::trace_quad(theta_err, states[i].gamma_theta);
        out.v += 0.5 * detail::trace_quad(a_err, states[i].gamma_a);
        omega_hat_mean += states[i].omega_hat;
        betas.push_back(states[i].beta);
    }
    omega_hat_mean /= n_d;
    const Eigen::MatrixXd omega_err = objectives.front().true_params().omega - omega_hat_mean;
    out.v += 0.5 * detail::trace_quad(omega_err, states.front().gamma_omega);

    const Eigen::VectorXd e = detail::mean_deviation(xs);
    const Eigen::VectorXd delta = detail::mean_deviation(vs);
    const double k1 = states.front().k1;
    const double k2 = states.front().k2;
    const Eigen::Index nm = e.size();
    Eigen::VectorXd y(2 * nm);
    y << e, delta;
    Eigen::MatrixXd p(2 * nm, 2 * nm);
    p.topLeftCorner(nm, nm) = 2.0 * k1 * k2 * detail::kron_identity(spectral.laplacian, m);
    p.topRightCorner(nm, nm) = k1 * Eigen::MatrixXd::Identity(nm, nm);
    p.bottomLeftCorner(nm, nm) = k1 * Eigen::MatrixXd::Identity(nm, nm);
    p.bottomRightCorner(nm, nm) = k2 * Eigen::MatrixXd::Identity(nm, nm);
    out.w = (y.transpose() * p * y).value() + detail::beta_spread(betas, beta_bar);
    return out;
}

}  // namespace tvopt
