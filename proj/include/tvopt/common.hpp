#pragma once

#include <Eigen/Dense>

#include <cstdarg>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <limits>
#include <stdexcept>
#include <string>

namespace tvopt {

/// Input file could not be read or parsed.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Scenario violates a structural precondition or a theorem condition.
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Runtime failure inside a simulation (singular factor, divergence, ...).
class SimulationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// printf-style formatting into a std::string.
inline std::string strf(const char* fmt, ...) {
    va_list args;
    va_start(args, fmt);
    va_list copy;
    va_copy(copy, args);
    const int n = std::vsnprintf(nullptr, 0, fmt, copy);
    va_end(copy);
    std::string out(n > 0 ? static_cast<size_t>(n) : 0, '\0');
    if (n > 0) std::vsnprintf(out.data(), out.size() + 1, fmt, args);
    va_end(args);
    return out;
}

/// Round-trippable decimal form of a double (17 significant digits).
inline std::string format_double(double v) { return strf("%.17g", v); }

inline std::string format_vector(const Eigen::VectorXd& v, const char* fmt = "%.4g") {
    std::string out = "[";
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (i > 0) out += ", ";
        out += strf(fmt, v(i));
    }
    return out + "]";
}

/// SplitMix64 bit mixer, used by the deterministic sensor-noise hook.
inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

/// Hash of a double's bit pattern folded into a running seed.
inline std::uint64_t hash_fold(std::uint64_t seed, double v) {
    std::uint64_t bits;
    static_assert(sizeof(bits) == sizeof(v));
    std::memcpy(&bits, &v, sizeof(bits));
    return mix64(seed ^ bits);
}

/// Deterministic value in [-1, 1] derived from a seed.
inline double unit_noise(std::uint64_t seed) {
    return static_cast<double>(mix64(seed) >> 11) * 0x1.0p-52 - 1.0;
}

/// Spectral condition number, infinity for singular matrices.
inline double condition_number(const Eigen::MatrixXd& a) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(a);
    const auto& s = svd.singularValues();
    const double smin = s(s.size() - 1);
    if (!(smin > 0.0)) return std::numeric_limits<double>::infinity();
    return s(0) / smin;
}

/// Inverse of a square factor that controllers divide by. Throws when the
/// factor is numerically singular, naming the time and state.
inline Eigen::MatrixXd invert_checked(const Eigen::MatrixXd& a, double t, const Eigen::VectorXd& x,
                                      const char* what = "h(x,t)", double cond_limit = 1e12) {
    const double cond = condition_number(a);
    if (!(cond < cond_limit)) {
        throw SimulationError(strf("%s is singular (cond %.3g) at t=%.6g, x=%s", what, cond, t,
                                   format_vector(x).c_str()));
    }
    return a.inverse();
}

}  // namespace tvopt
