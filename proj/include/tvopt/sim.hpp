#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <vector>

#include "tvopt/common.hpp"
#include "tvopt/integrate.hpp"
#include "tvopt/objective.hpp"

namespace tvopt {

// ---------------------------------------------------------------------------
// Optimal-trajectory oracle
// ---------------------------------------------------------------------------

/// Solves sum_i grad f_i(x, t) = 0 by damped Newton iteration. Throws with the
/// residual history when the iteration stalls.
inline Eigen::VectorXd oracle_solve(const std::vector<ObjectiveModel>& objectives, double t,
                                    const Eigen::VectorXd& x_init_guess, double tol = 1e-12,
                                    int max_iters = 100) {
    const int m = objectives.front().dim();
    auto total_grad = [&](const Eigen::VectorXd& x) {
        Eigen::VectorXd g = Eigen::VectorXd::Zero(m);
        for (const auto& obj : objectives) g += obj.grad(x, t);
        return g;
    };
    auto total_hess = [&](const Eigen::VectorXd& x) {
        Eigen::MatrixXd h = Eigen::MatrixXd::Zero(m, m);
        for (const auto& obj : objectives) h += obj.hessian(x, t);
        return h;
    };

    Eigen::VectorXd x = x_init_guess;
    double residual = total_grad(x).norm();
    std::vector<double> history{residual};
    for (int iter = 0; iter < max_iters && residual > tol; ++iter) {
        const Eigen::VectorXd g = total_grad(x);
        const Eigen::VectorXd step = total_hess(x).partialPivLu().solve(g);
        double damping = 1.0;
        Eigen::VectorXd candidate = x - damping * step;
        double cand_res = total_grad(candidate).norm();
        while (cand_res > residual && damping > 1e-8) {
            damping *= 0.5;
            candidate = x - damping * step;
            cand_res = total_grad(candidate).norm();
        }
        if (cand_res >= residual && residual > tol) {
            std::string hist;
            for (double r : history) hist += strf(" %.3g", r);
            throw SimulationError(strf("optimal-point Newton stalled at t=%.6g, residuals:%s", t, hist.c_str()));
        }
        x = candidate;
        residual = cand_res;
        history.push_back(residual);
    }
    if (residual > tol) {
        std::string hist;
        for (double r : history) hist += strf(" %.3g", r);
        throw SimulationError(
            strf("optimal-point Newton did not converge at t=%.6g, residuals:%s", t, hist.c_str()));
    }
    return x;
}

/// The minimizer trajectory x*(t) of the summed objective, with its velocity
/// xdot* = -(sum H_i)^{-1} sum d/dt grad f_i evaluated at x*. Uses the affine
/// closed form when every objective provides one, Newton continuation with a
/// warm start otherwise. Every query verifies the first-order residual.
class OptimalTrajectory {
public:
    explicit OptimalTrajectory(std::vector<ObjectiveModel> objectives)
        : objectives_(std::move(objectives)) {
        if (objectives_.empty()) throw ValidationError("oracle needs at least one objective");
        const int m = objectives_.front().dim();
        closed_form_ = true;
        for (const auto& obj : objectives_) {
            if (obj.dim() != m) throw ValidationError("objective dimensions differ");
            closed_form_ = closed_form_ && obj.linear_gradient().has_value();
        }
        if (closed_form_) {
            coeff_sum_ = Eigen::MatrixXd::Zero(m, m);
            for (const auto& obj : objectives_) coeff_sum_ += obj.linear_gradient()->coeff;
            coeff_lu_.compute(coeff_sum_);
        }
        last_solution_ = Eigen::VectorXd::Zero(m);
    }

    bool closed_form() const { return closed_form_; }

    Eigen::VectorXd x_star(double t) const {
        const int m = objectives_.front().dim();
        Eigen::VectorXd x;
        if (closed_form_) {
            Eigen::VectorXd offset_sum = Eigen::VectorXd::Zero(m);
            for (const auto& obj : objectives_) offset_sum += obj.linear_gradient()->offset(t);
            x = coeff_lu_.solve(offset_sum);
        } else {
            x = oracle_solve(objectives_, t, last_solution_);
            last_solution_ = x;
        }
        Eigen::VectorXd residual = Eigen::VectorXd::Zero(m);
        for (const auto& obj : objectives_) residual += obj.grad(x, t);
        if (!(residual.norm() <= 1e-8))
            throw SimulationError(strf("oracle residual %.3g exceeds 1e-8 at t=%.6g", residual.norm(), t));
        return x;
    }

    Eigen::VectorXd v_star(double t) const {
        const int m = objectives_.front().dim();
        const Eigen::VectorXd x = x_star(t);
        Eigen::MatrixXd hess_sum = Eigen::MatrixXd::Zero(m, m);
        Eigen::VectorXd rate_sum = Eigen::VectorXd::Zero(m);
        for (const auto& obj : objectives_) {
            hess_sum += obj.hessian(x, t);
            rate_sum += obj.dgrad_dt(x, t);
        }
        return -hess_sum.partialPivLu().solve(rate_sum);
    }

private:
    std::vector<ObjectiveModel> objectives_;
    bool closed_form_ = false;
    Eigen::MatrixXd coeff_sum_;
    Eigen::PartialPivLU<Eigen::MatrixXd> coeff_lu_;
    mutable Eigen::VectorXd last_solution_;
};

// ---------------------------------------------------------------------------
// Vehicle model
// ---------------------------------------------------------------------------

/// Quadratic drag of the planar vehicle, componentwise -v_k |v_k|.
inline Eigen::VectorXd vehicle_drag(const Eigen::VectorXd& v) {
    Eigen::VectorXd d(v.size());
    for (Eigen::Index k = 0; k < v.size(); ++k) d(k) = -v(k) * std::abs(v(k));
    return d;
}

/// Control force that exactly cancels the vehicle's mass and friction, so the
/// plant q' = v, mass v' = tau + friction*drag(v) behaves as v' = u:
///   tau = mass * u - friction * drag(v).
inline Eigen::VectorXd feedback_linearize_vehicle(const Eigen::VectorXd& u, const Eigen::VectorXd& v,
                                                  double mass, const Eigen::VectorXd& friction_diag) {
    if (!(mass > 0.0)) throw ValidationError("vehicle mass must be positive");
    if (friction_diag.size() != v.size()) throw ValidationError("friction dimension mismatch");
    return mass * u - friction_diag.cwiseProduct(vehicle_drag(v));
}

// ---------------------------------------------------------------------------
// Trace records and aggregate metrics
// ---------------------------------------------------------------------------

/// Per-agent snapshot of every adaptive estimate, decoded from the packed
/// state. Centralized runs use a single "agent".
struct EstimateSnapshot {
    std::vector<Eigen::VectorXd> sigma;           // estimator internal states
    std::vector<Eigen::MatrixXd> theta;           // eta1_hat / theta_hat
    std::vector<Eigen::MatrixXd> omega;           // eta2_hat / omega_hat
    std::vector<Eigen::MatrixXd> a;               // eta3_hat / a_hat
    std::vector<std::map<int, double>> beta;      // adaptive consensus gains
};

struct TraceRecord {
    double t = 0.0;
    std::vector<Eigen::VectorXd> x;
    std::vector<Eigen::VectorXd> v;  // double-integrator kinds only
    EstimateSnapshot estimates;
    Eigen::VectorXd x_star;
    double tracking_error = 0.0;   // max_i |x_i - x*(t)|
    double consensus_error = 0.0;  // |e|, distributed kinds
    double estimator_error = 0.0;  // max_i |xi_i - zeta_n / N|, distributed SI
    double lyapunov_v = std::numeric_limits<double>::quiet_NaN();
    std::optional<double> lyapunov_w;
};

struct Metrics {
    double max_tracking_error = 0.0;
    double max_consensus_error = 0.0;
    int lyapunov_violations = 0;
    double settle_time = std::numeric_limits<double>::infinity();
};

/// Deterministic aggregates over the window [t_a, t_b]: worst errors, count of
/// V increases beyond v_tol between consecutive records, and the earliest
/// record time after which the tracking error stays within settle_tol.
inline Metrics metrics(const std::vector<TraceRecord>& trace, double t_a, double t_b,
                       double settle_tol = 1e-2, double v_tol = 1e-6) {
    if (!(t_a < t_b)) throw ValidationError("metrics window must satisfy t_a < t_b");
    Metrics out;
    const TraceRecord* prev = nullptr;
    double settle = std::numeric_limits<double>::infinity();
    bool any = false;
    for (const auto& rec : trace) {
        if (rec.t < t_a - 1e-12 || rec.t > t_b + 1e-12) continue;
        any = true;
        out.max_tracking_error = std::max(out.max_tracking_error, rec.tracking_error);
        out.max_consensus_error = std::max(out.max_consensus_error, rec.consensus_error);
        if (prev && rec.lyapunov_v - prev->lyapunov_v > v_tol) ++out.lyapunov_violations;
        prev = &rec;
        if (rec.tracking_error <= settle_tol) {
            if (!std::isfinite(settle)) settle = rec.t;
        } else {
            settle = std::numeric_limits<double>::infinity();
        }
    }
    if (!any) throw ValidationError(strf("metrics window [%g, %g] contains no records", t_a, t_b));
    out.settle_time = settle;
    return out;
}

}  // namespace tvopt
