#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "tvopt/common.hpp"
#include "tvopt/trajectory.hpp"

namespace tvopt {

/// The constant parameter pair (Omega, A) behind the factored Hessian
/// H(x,t) = Omega * h(x,t) and gradient time-partial d/dt grad = A * g(x,t).
/// Controllers never see these; they are reserved for oracles, validators and
/// Lyapunov diagnostics (see ObjectiveView for the controller-visible surface).
struct TrueParams {
    Eigen::MatrixXd omega;  // m x m
    Eigen::MatrixXd a;      // m x p
};

/// Affine gradient structure grad(x,t) = coeff * x - offset(t), available for
/// the quadratic families. Lets the optimal-trajectory oracle use a closed
/// form instead of Newton iteration.
struct LinearGradient {
    Eigen::MatrixXd coeff;
    std::function<Eigen::VectorXd(double)> offset;
};

/// A local time-varying objective f(x,t) with analytic derivatives and the
/// (h, g) factored decomposition of its Hessian and gradient time-partial.
class ObjectiveModel {
public:
    using ScalarFn = std::function<double(const Eigen::VectorXd&, double)>;
    using VectorFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&, double)>;
    using MatrixFn = std::function<Eigen::MatrixXd(const Eigen::VectorXd&, double)>;
    using VectorFlowFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&, const Eigen::VectorXd&, double)>;
    using MatrixFlowFn = std::function<Eigen::MatrixXd(const Eigen::VectorXd&, const Eigen::VectorXd&, double)>;

    struct Parts {
        int dim = 0;        // m
        int param_dim = 0;  // p
        ScalarFn value;
        VectorFn grad;
        MatrixFn hessian;
        VectorFn dgrad_dt;
        MatrixFn h;             // known factor of the Hessian
        VectorFn g;             // known factor of the gradient time-partial
        MatrixFlowFn h_dot;     // d h / dt along a trajectory (x, xdot, t)
        VectorFlowFn g_dot;     // d g / dt along a trajectory
        std::optional<LinearGradient> linear;
        double sensor_noise = 0.0;  // magnitude of the additive gradient-noise hook
        std::uint64_t noise_seed = 0;
    };

    ObjectiveModel(Parts parts, TrueParams hidden) : parts_(std::move(parts)), hidden_(std::move(hidden)) {
        if (parts_.dim <= 0 || parts_.param_dim <= 0)
            throw ValidationError("objective dimensions must be positive");
        if (hidden_.omega.rows() != parts_.dim || hidden_.omega.cols() != parts_.dim ||
            hidden_.a.rows() != parts_.dim || hidden_.a.cols() != parts_.param_dim)
            throw ValidationError("objective parameter matrices have inconsistent dimensions");
    }

    int dim() const { return parts_.dim; }
    int param_dim() const { return parts_.param_dim; }

    double value(const Eigen::VectorXd& x, double t) const { return parts_.value(x, t); }
    Eigen::VectorXd grad(const Eigen::VectorXd& x, double t) const { return parts_.grad(x, t); }
    Eigen::MatrixXd hessian(const Eigen::VectorXd& x, double t) const { return parts_.hessian(x, t); }
    Eigen::VectorXd dgrad_dt(const Eigen::VectorXd& x, double t) const { return parts_.dgrad_dt(x, t); }
    Eigen::MatrixXd h(const Eigen::VectorXd& x, double t) const { return parts_.h(x, t); }
    Eigen::VectorXd g(const Eigen::VectorXd& x, double t) const { return parts_.g(x, t); }
    Eigen::MatrixXd h_dot(const Eigen::VectorXd& x, const Eigen::VectorXd& xdot, double t) const {
        return parts_.h_dot(x, xdot, t);
    }
    Eigen::VectorXd g_dot(const Eigen::VectorXd& x, const Eigen::VectorXd& xdot, double t) const {
        return parts_.g_dot(x, xdot, t);
    }

    /// Oracle-only accessor: the true constant parameters. Reserved for the
    /// optimal-trajectory oracle, assumption validators and Lyapunov
    /// diagnostics; controllers receive an ObjectiveView instead.
    const TrueParams& true_params() const { return hidden_; }

    const std::optional<LinearGradient>& linear_gradient() const { return parts_.linear; }

    double sensor_noise() const { return parts_.sensor_noise; }
    void set_sensor_noise(double magnitude, std::uint64_t seed = 0) {
        parts_.sensor_noise = magnitude;
        parts_.noise_seed = seed;
    }

    /// Gradient as a sensor would report it: the analytic value plus the
    /// additive noise hook (deterministic hash noise; magnitude 0 = exact).
    Eigen::VectorXd measured_grad(const Eigen::VectorXd& x, double t) const {
        Eigen::VectorXd gr = parts_.grad(x, t);
        if (parts_.sensor_noise != 0.0) {
            std::uint64_t seed = parts_.noise_seed;
            for (Eigen::Index k = 0; k < x.size(); ++k) seed = hash_fold(seed, x(k));
            seed = hash_fold(seed, t);
            for (Eigen::Index k = 0; k < gr.size(); ++k)
                gr(k) += parts_.sensor_noise * unit_noise(seed + static_cast<std::uint64_t>(k));
        }
        return gr;
    }

private:
    Parts parts_;
    TrueParams hidden_;
};

/// The controller-visible slice of an objective: the measured gradient and the
/// known factors (h, g) with their total derivatives. Keeps the unknown
/// (Omega, A) out of reach of any control law.
class ObjectiveView {
public:
    explicit ObjectiveView(const ObjectiveModel& model) : model_(&model) {}

    int dim() const { return model_->dim(); }
    int param_dim() const { return model_->param_dim(); }
    Eigen::VectorXd grad(const Eigen::VectorXd& x, double t) const { return model_->measured_grad(x, t); }
    Eigen::MatrixXd h(const Eigen::VectorXd& x, double t) const { return model_->h(x, t); }
    Eigen::VectorXd g(const Eigen::VectorXd& x, double t) const { return model_->g(x, t); }
    Eigen::MatrixXd h_dot(const Eigen::VectorXd& x, const Eigen::VectorXd& xdot, double t) const {
        return model_->h_dot(x, xdot, t);
    }
    Eigen::VectorXd g_dot(const Eigen::VectorXd& x, const Eigen::VectorXd& xdot, double t) const {
        return model_->g_dot(x, xdot, t);
    }

private:
    const ObjectiveModel* model_;
};

// ---------------------------------------------------------------------------
// Builders
// ---------------------------------------------------------------------------

namespace detail {
inline void require_spd(const Eigen::MatrixXd& k, const char* what) {
    if (k.rows() != k.cols()) throw ValidationError(strf("%s must be square", what));
    if (!k.isApprox(k.transpose(), 1e-12)) throw ValidationError(strf("%s must be symmetric", what));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(k);
    if (eig.eigenvalues()(0) <= 0.0) throw ValidationError(strf("%s must be positive definite", what));
}
}  // namespace detail

/// f(x,t) = (x - traj(t))' K (x - traj(t)) with K symmetric positive definite.
/// Decomposition: h = I, g = traj_dot(t), Omega = 2K, A = -2K. The Hessian 2K
/// is constant, so a family of these with equal K has identical Hessians.
inline ObjectiveModel build_quadratic_tracking(const Eigen::MatrixXd& K, const Trajectory& traj) {
    detail::require_spd(K, "tracking weight K");
    const int m = static_cast<int>(K.rows());
    if (traj.dim != m) throw ValidationError("trajectory dimension does not match K");

    ObjectiveModel::Parts parts;
    parts.dim = m;
    parts.param_dim = m;
    const Eigen::MatrixXd two_k = 2.0 * K;
    parts.value = [K, traj](const Eigen::VectorXd& x, double t) {
        const Eigen::VectorXd d = x - traj.value(t);
        return (d.transpose() * K * d).value();
    };
    parts.grad = [two_k, traj](const Eigen::VectorXd& x, double t) {
        return Eigen::VectorXd(two_k * (x - traj.value(t)));
    };
    parts.hessian = [two_k](const Eigen::VectorXd&, double) { return two_k; };
    parts.dgrad_dt = [two_k, traj](const Eigen::VectorXd&, double t) {
        return Eigen::VectorXd(-two_k * traj.dot(t));
    };
    parts.h = [m](const Eigen::VectorXd&, double) { return Eigen::MatrixXd(Eigen::MatrixXd::Identity(m, m)); };
    parts.g = [traj](const Eigen::VectorXd&, double t) { return traj.dot(t); };
    parts.h_dot = [m](const Eigen::VectorXd&, const Eigen::VectorXd&, double) {
        return Eigen::MatrixXd(Eigen::MatrixXd::Zero(m, m));
    };
    parts.g_dot = [traj](const Eigen::VectorXd&, const Eigen::VectorXd&, double t) { return traj.ddot(t); };
    parts.linear = LinearGradient{two_k, [two_k, traj](double t) { return Eigen::VectorXd(two_k * traj.value(t)); }};

    TrueParams hidden{two_k, -two_k};
    return ObjectiveModel(std::move(parts), std::move(hidden));
}

/// Weighted reference anchor at a fixed position.
struct Anchor {
    double weight = 0.0;
    Eigen::VectorXd position;
};

/// Local source-seeking objective: inverse signal strength of a moving source
/// plus quadratic pulls toward available anchors,
///   F(x,t) = (1/a) |x - b r(t)|^2 + sum_j q_j |x - R_j|^2.
/// Decomposition: h = I, g = r_dot(t), Omega = (2/a + 2 sum q_j) I,
/// A = -(2/a) b.
inline ObjectiveModel build_source_seek_local(double a, const Eigen::MatrixXd& b, const Trajectory& r,
                                              const std::vector<Anchor>& anchors) {
    if (!(a > 0.0)) throw ValidationError("signal power parameter a must be positive");
    const int m = static_cast<int>(b.rows());
    const int p = static_cast<int>(b.cols());
    if (r.dim != p) throw ValidationError("source trajectory dimension does not match b");
    double weight_sum = 0.0;
    for (const auto& anchor : anchors) {
        if (anchor.weight < 0.0) throw ValidationError("anchor weights must be nonnegative");
        if (anchor.position.size() != m) throw ValidationError("anchor position dimension mismatch");
        weight_sum += anchor.weight;
    }

    ObjectiveModel::Parts parts;
    parts.dim = m;
    parts.param_dim = p;
    const double hess_coeff = 2.0 / a + 2.0 * weight_sum;
    parts.value = [a, b, r, anchors](const Eigen::VectorXd& x, double t) {
        double v = (x - b * r.value(t)).squaredNorm() / a;
        for (const auto& anchor : anchors) v += anchor.weight * (x - anchor.position).squaredNorm();
        return v;
    };
    parts.grad = [a, b, r, anchors](const Eigen::VectorXd& x, double t) {
        Eigen::VectorXd gr = (2.0 / a) * (x - b * r.value(t));
        for (const auto& anchor : anchors) gr += 2.0 * anchor.weight * (x - anchor.position);
        return gr;
    };
    parts.hessian = [hess_coeff, m](const Eigen::VectorXd&, double) {
        return Eigen::MatrixXd(hess_coeff * Eigen::MatrixXd::Identity(m, m));
    };
    parts.dgrad_dt = [a, b, r](const Eigen::VectorXd&, double t) {
        return Eigen::VectorXd(-(2.0 / a) * b * r.dot(t));
    };
    parts.h = [m](const Eigen::VectorXd&, double) { return Eigen::MatrixXd(Eigen::MatrixXd::Identity(m, m)); };
    parts.g = [r](const Eigen::VectorXd&, double t) { return r.dot(t); };
    parts.h_dot = [m](const Eigen::VectorXd&, const Eigen::VectorXd&, double) {
        return Eigen::MatrixXd(Eigen::MatrixXd::Zero(m, m));
    };
    parts.g_dot = [r](const Eigen::VectorXd&, const Eigen::VectorXd&, double t) { return r.ddot(t); };

    Eigen::VectorXd anchor_pull = Eigen::VectorXd::Zero(m);
    for (const auto& anchor : anchors) anchor_pull += 2.0 * anchor.weight * anchor.position;
    parts.linear = LinearGradient{hess_coeff * Eigen::MatrixXd::Identity(m, m),
                                  [a, b, r, anchor_pull](double t) {
                                      return Eigen::VectorXd((2.0 / a) * b * r.value(t) + anchor_pull);
                                  }};

    TrueParams hidden{hess_coeff * Eigen::MatrixXd::Identity(m, m), -(2.0 / a) * b};
    return ObjectiveModel(std::move(parts), std::move(hidden));
}

/// Scalar supply-scheduling objective f(x,t) = (x + k1 r1(t) + k2 r2(t))^2.
/// Decomposition with p = 2: h = 1, g = (r1_dot, r2_dot), Omega = 2,
/// A = (2 k1, 2 k2).
inline ObjectiveModel build_power_supply(double k1, double k2, const Trajectory& r1, const Trajectory& r2) {
    if (r1.dim != 1 || r2.dim != 1) throw ValidationError("power-supply references must be scalar");
    if (!(k1 > 0.0) || !(k2 > 0.0)) throw ValidationError("power-supply coefficients must be positive");

    ObjectiveModel::Parts parts;
    parts.dim = 1;
    parts.param_dim = 2;
    auto shift = [k1, k2, r1, r2](double t) { return k1 * r1.value(t)(0) + k2 * r2.value(t)(0); };
    parts.value = [shift](const Eigen::VectorXd& x, double t) {
        const double d = x(0) + shift(t);
        return d * d;
    };
    parts.grad = [shift](const Eigen::VectorXd& x, double t) {
        return Eigen::VectorXd(Eigen::VectorXd::Constant(1, 2.0 * (x(0) + shift(t))));
    };
    parts.hessian = [](const Eigen::VectorXd&, double) {
        return Eigen::MatrixXd(Eigen::MatrixXd::Constant(1, 1, 2.0));
    };
    parts.dgrad_dt = [k1, k2, r1, r2](const Eigen::VectorXd&, double t) {
        return Eigen::VectorXd(
            Eigen::VectorXd::Constant(1, 2.0 * (k1 * r1.dot(t)(0) + k2 * r2.dot(t)(0))));
    };
    parts.h = [](const Eigen::VectorXd&, double) { return Eigen::MatrixXd(Eigen::MatrixXd::Identity(1, 1)); };
    parts.g = [r1, r2](const Eigen::VectorXd&, double t) {
        Eigen::VectorXd g(2);
        g << r1.dot(t)(0), r2.dot(t)(0);
        return g;
    };
    parts.h_dot = [](const Eigen::VectorXd&, const Eigen::VectorXd&, double) {
        return Eigen::MatrixXd(Eigen::MatrixXd::Zero(1, 1));
    };
    parts.g_dot = [r1, r2](const Eigen::VectorXd&, const Eigen::VectorXd&, double t) {
        Eigen::VectorXd g(2);
        g << r1.ddot(t)(0), r2.ddot(t)(0);
        return g;
    };
    parts.linear = LinearGradient{Eigen::MatrixXd::Constant(1, 1, 2.0), [shift](double t) {
                                      return Eigen::VectorXd(Eigen::VectorXd::Constant(1, -2.0 * shift(t)));
                                  }};

    Eigen::MatrixXd a_mat(1, 2);
    a_mat << 2.0 * k1, 2.0 * k2;
    TrueParams hidden{Eigen::MatrixXd::Constant(1, 1, 2.0), a_mat};
    return ObjectiveModel(std::move(parts), std::move(hidden));
}

// ---------------------------------------------------------------------------
// Validators and derivative oracle
// ---------------------------------------------------------------------------

struct AssumptionCheck {
    std::string name;
    bool passed = false;
    std::string detail;
};

struct ValidationReport {
    std::vector<AssumptionCheck> checks;

    bool all_passed() const {
        for (const auto& c : checks)
            if (!c.passed) return false;
        return true;
    }
    const AssumptionCheck* find(const std::string& name) const {
        for (const auto& c : checks)
            if (c.name == name) return &c;
        return nullptr;
    }
    std::string summary() const {
        std::string out;
        for (const auto& c : checks)
            out += strf("%-4s %s %s\n", c.name.c_str(), c.passed ? "pass" : "FAIL", c.detail.c_str());
        return out;
    }
};

/// Checks the standing assumptions over the given samples: identical and
/// invertible Hessians across agents (A1, probed at shared and at rotated
/// sample arguments since the identity must hold at different states),
/// bounded gradient time-partial (A2), exact (Omega, A) factorization (A3),
/// plus the reported-only magnitudes for gradient disparity (A5) and the
/// second-order time derivatives (A7).
inline ValidationReport validate_assumptions(const std::vector<ObjectiveModel>& objectives,
                                             const std::vector<std::pair<Eigen::VectorXd, double>>& samples,
                                             double alpha_bound) {
    if (objectives.empty()) throw ValidationError("no objectives to validate");
    if (samples.empty()) throw ValidationError("assumption validation needs at least one sample");
    const int m = objectives.front().dim();
    for (const auto& obj : objectives)
        if (obj.dim() != m) throw ValidationError("objective dimensions differ across agents");
    for (const auto& s : samples)
        if (s.first.size() != m) throw ValidationError("sample dimension does not match objectives");

    const size_t n_obj = objectives.size();
    const size_t n_s = samples.size();
    ValidationReport report;

    // A1: Hessian identity and invertibility.
    double worst_identity = 0.0, worst_cond = 0.0;
    for (size_t k = 0; k < n_s; ++k) {
        const double t = samples[k].second;
        std::vector<Eigen::MatrixXd> shared(n_obj), rotated(n_obj);
        for (size_t i = 0; i < n_obj; ++i) {
            shared[i] = objectives[i].hessian(samples[k].first, t);
            rotated[i] = objectives[i].hessian(samples[(k + i) % n_s].first, t);
            worst_cond = std::max(worst_cond, condition_number(shared[i]));
        }
        for (size_t i = 0; i < n_obj; ++i)
            for (size_t j = i + 1; j < n_obj; ++j) {
                worst_identity = std::max(worst_identity, (shared[i] - shared[j]).norm());
                worst_identity = std::max(worst_identity, (rotated[i] - rotated[j]).norm());
            }
        for (size_t i = 0; i < n_obj; ++i)
            worst_identity = std::max(worst_identity, (shared[i] - rotated[i]).norm());
    }
    report.checks.push_back({"A1", worst_identity <= 1e-9 && worst_cond < 1e12,
                             strf("max Hessian mismatch %.3g, max cond %.3g", worst_identity, worst_cond)});

    // A2: bounded gradient time-partial.
    double worst_rate = 0.0;
    for (const auto& obj : objectives)
        for (const auto& s : samples) worst_rate = std::max(worst_rate, obj.dgrad_dt(s.first, s.second).norm());
    report.checks.push_back({"A2", worst_rate < alpha_bound,
                             strf("max |d/dt grad| %.6g vs bound %.6g", worst_rate, alpha_bound)});

    // A3: factorization consistency against the true parameters.
    double worst_h_fact = 0.0, worst_g_fact = 0.0;
    for (const auto& obj : objectives) {
        const TrueParams& tp = obj.true_params();
        for (const auto& s : samples) {
            worst_h_fact = std::max(
                worst_h_fact, (obj.hessian(s.first, s.second) - tp.omega * obj.h(s.first, s.second)).norm());
            worst_g_fact = std::max(
                worst_g_fact, (obj.dgrad_dt(s.first, s.second) - tp.a * obj.g(s.first, s.second)).norm());
        }
    }
    report.checks.push_back({"A3", worst_h_fact <= 1e-9 && worst_g_fact <= 1e-9,
                             strf("max |H - Omega h| %.3g, max |dgrad/dt - A g| %.3g", worst_h_fact, worst_g_fact)});

    // A5: gradient disparity across agents (reported, existential bound).
    double worst_disparity = 0.0;
    for (size_t k = 0; k < n_s; ++k) {
        const double t = samples[k].second;
        for (size_t i = 0; i < n_obj; ++i)
            for (size_t j = i + 1; j < n_obj; ++j) {
                const Eigen::VectorXd gi = objectives[i].grad(samples[(k + i) % n_s].first, t);
                const Eigen::VectorXd gj = objectives[j].grad(samples[(k + j) % n_s].first, t);
                worst_disparity = std::max(worst_disparity, (gi - gj).norm());
            }
    }
    report.checks.push_back({"A5", std::isfinite(worst_disparity),
                             strf("max gradient disparity %.6g (reported)", worst_disparity)});

    // A7: second time-derivatives, finite-difference estimates (reported).
    const double dt = 1e-5;
    double worst_d2grad = 0.0, worst_dhess = 0.0;
    for (const auto& obj : objectives) {
        for (const auto& s : samples) {
            const Eigen::VectorXd d2 =
                (obj.dgrad_dt(s.first, s.second + dt) - obj.dgrad_dt(s.first, s.second - dt)) / (2.0 * dt);
            const Eigen::MatrixXd dh =
                (obj.hessian(s.first, s.second + dt) - obj.hessian(s.first, s.second - dt)) / (2.0 * dt);
            worst_d2grad = std::max(worst_d2grad, d2.norm());
            worst_dhess = std::max(worst_dhess, dh.norm());
        }
    }
    report.checks.push_back({"A7", std::isfinite(worst_d2grad) && std::isfinite(worst_dhess),
                             strf("max |d2/dt2 grad| %.6g, max |dH/dt| %.6g (reported)", worst_d2grad, worst_dhess)});

    return report;
}

/// Central-difference cross-check of all analytic derivatives at one point:
/// grad against value, hessian against grad in x, dgrad_dt against grad in t.
/// Returns the worst relative error (denominator floored at 1).
inline double finite_difference_check(const ObjectiveModel& obj, const Eigen::VectorXd& x, double t,
                                      double step = 1e-5) {
    if (!(step > 0.0)) throw ValidationError("finite-difference step must be positive");
    const int m = obj.dim();
    double worst = 0.0;
    auto rel = [](double err, double ref) { return err / std::max(1.0, std::abs(ref)); };

    const Eigen::VectorXd grad = obj.grad(x, t);
    for (int k = 0; k < m; ++k) {
        Eigen::VectorXd xp = x, xm = x;
        xp(k) += step;
        xm(k) -= step;
        const double fd = (obj.value(xp, t) - obj.value(xm, t)) / (2.0 * step);
        worst = std::max(worst, rel(std::abs(fd - grad(k)), grad(k)));
    }

    const Eigen::MatrixXd hess = obj.hessian(x, t);
    for (int k = 0; k < m; ++k) {
        Eigen::VectorXd xp = x, xm = x;
        xp(k) += step;
        xm(k) -= step;
        const Eigen::VectorXd col = (obj.grad(xp, t) - obj.grad(xm, t)) / (2.0 * step);
        for (int r = 0; r < m; ++r) worst = std::max(worst, rel(std::abs(col(r) - hess(r, k)), hess(r, k)));
    }

    const Eigen::VectorXd dg = obj.dgrad_dt(x, t);
    const Eigen::VectorXd fd_t = (obj.grad(x, t + step) - obj.grad(x, t - step)) / (2.0 * step);
    for (int r = 0; r < m; ++r) worst = std::max(worst, rel(std::abs(fd_t(r) - dg(r)), dg(r)));

    return worst;
}

}  // namespace tvopt
