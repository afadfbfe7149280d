#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <utility>

#include "tvopt/common.hpp"

namespace tvopt {

/// Smooth reference trajectory with analytic first and second derivatives.
/// Objective builders require the analytic forms; nothing in the controllers
/// differentiates numerically.
struct Trajectory {
    int dim = 0;
    std::function<Eigen::VectorXd(double)> value;
    std::function<Eigen::VectorXd(double)> dot;
    std::function<Eigen::VectorXd(double)> ddot;
};

/// r_k(t) = offset_k + amplitude_k * sin(omega * t + phase_k)
inline Trajectory sinusoid_trajectory(Eigen::VectorXd amplitude, double omega, Eigen::VectorXd phase,
                                      Eigen::VectorXd offset) {
    const int m = static_cast<int>(amplitude.size());
    if (phase.size() != m || offset.size() != m)
        throw ValidationError("sinusoid trajectory: amplitude/phase/offset dimensions differ");
    Trajectory traj;
    traj.dim = m;
    traj.value = [=](double t) {
        Eigen::VectorXd r(m);
        for (int k = 0; k < m; ++k) r(k) = offset(k) + amplitude(k) * std::sin(omega * t + phase(k));
        return r;
    };
    traj.dot = [=](double t) {
        Eigen::VectorXd r(m);
        for (int k = 0; k < m; ++k) r(k) = amplitude(k) * omega * std::cos(omega * t + phase(k));
        return r;
    };
    traj.ddot = [=](double t) {
        Eigen::VectorXd r(m);
        for (int k = 0; k < m; ++k) r(k) = -amplitude(k) * omega * omega * std::sin(omega * t + phase(k));
        return r;
    };
    return traj;
}

/// r(t) = slope * t + offset
inline Trajectory linear_trajectory(Eigen::VectorXd slope, Eigen::VectorXd offset) {
    const int m = static_cast<int>(slope.size());
    if (offset.size() != m) throw ValidationError("linear trajectory: slope/offset dimensions differ");
    Trajectory traj;
    traj.dim = m;
    traj.value = [=](double t) { return Eigen::VectorXd(offset + slope * t); };
    traj.dot = [=](double) { return slope; };
    traj.ddot = [=](double) { return Eigen::VectorXd(Eigen::VectorXd::Zero(m)); };
    return traj;
}

inline Trajectory constant_trajectory(Eigen::VectorXd c) {
    const int m = static_cast<int>(c.size());
    Trajectory traj;
    traj.dim = m;
    traj.value = [=](double) { return c; };
    traj.dot = [=](double) { return Eigen::VectorXd(Eigen::VectorXd::Zero(m)); };
    traj.ddot = [=](double) { return Eigen::VectorXd(Eigen::VectorXd::Zero(m)); };
    return traj;
}

}  // namespace tvopt
