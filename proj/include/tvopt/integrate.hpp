#pragma once

#include <Eigen/Dense>

#include <string>

#include "tvopt/common.hpp"

namespace tvopt {

enum class IntegratorMethod { ExplicitEuler, Rk4 };

inline std::string to_string(IntegratorMethod m) {
    return m == IntegratorMethod::Rk4 ? "rk4" : "explicit-euler";
}

inline IntegratorMethod integrator_method_from_string(const std::string& s) {
    if (s == "rk4") return IntegratorMethod::Rk4;
    if (s == "explicit-euler" || s == "euler") return IntegratorMethod::ExplicitEuler;
    throw ConfigError(strf("unknown integrator method '%s' (expected rk4 or explicit-euler)", s.c_str()));
}

/// Fixed-step integration settings. Defaults resolve the slowly decaying
/// boundary layer and the signum-driven estimator acceptably.
struct IntegratorConfig {
    IntegratorMethod method = IntegratorMethod::Rk4;
    double step = 1e-3;
    double t_end = 20.0;
    int record_every = 10;

    void validate() const {
        if (!(step > 0.0)) throw ValidationError("integrator step must be positive");
        if (!(t_end >= step)) throw ValidationError("integrator horizon must cover at least one step");
        if (record_every < 1) throw ValidationError("record_every must be >= 1");
    }
};

/// One explicit Euler step of y' = f(t, y).
template <typename DerivFn>
Eigen::VectorXd euler_step(double t, const Eigen::VectorXd& y, double h, DerivFn&& f) {
    return y + h * f(t, y);
}

/// One classical fourth-order Runge-Kutta step of y' = f(t, y).
template <typename DerivFn>
Eigen::VectorXd rk4_step(double t, const Eigen::VectorXd& y, double h, DerivFn&& f) {
    const Eigen::VectorXd k1 = f(t, y);
    const Eigen::VectorXd k2 = f(t + 0.5 * h, Eigen::VectorXd(y + 0.5 * h * k1));
    const Eigen::VectorXd k3 = f(t + 0.5 * h, Eigen::VectorXd(y + 0.5 * h * k2));
    const Eigen::VectorXd k4 = f(t + h, Eigen::VectorXd(y + h * k3));
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

template <typename DerivFn>
Eigen::VectorXd integrator_step(IntegratorMethod method, double t, const Eigen::VectorXd& y, double h, DerivFn&& f) {
    return method == IntegratorMethod::Rk4 ? rk4_step(t, y, h, f) : euler_step(t, y, h, f);
}

}  // namespace tvopt
