#pragma once

// Smooth scalar profiles driving the radial part of the folding map:
// the transition function rho, the radius map g with its derivatives,
// the height factor h, and the wedge bump psi.

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace qcfold {

/// e^{-1/x} on (0, inf), 0 elsewhere.
inline double eval_sigma(double x) {
    return x > 0.0 ? std::exp(-1.0 / x) : 0.0;
}

namespace detail {

inline double sigma_d1(double x) {
    if (x <= 0.0) return 0.0;
    return std::exp(-1.0 / x) / (x * x);
}

inline double sigma_d2(double x) {
    if (x <= 0.0) return 0.0;
    const double x2 = x * x;
    return std::exp(-1.0 / x) * (1.0 - 2.0 * x) / (x2 * x2);
}

} // namespace detail

/// Smooth step: 0 on (-inf, 0], 1 on [1, inf), strictly increasing between.
inline double eval_rho(double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double s = eval_sigma(x);
    return s / (s + eval_sigma(1.0 - x));
}

inline double eval_rho_prime(double x) {
    if (x <= 0.0 || x >= 1.0) return 0.0;
    const double s = eval_sigma(x), t = eval_sigma(1.0 - x);
    const double sum = s + t;
    const double num = detail::sigma_d1(x) * t + s * detail::sigma_d1(1.0 - x);
    return num / (sum * sum);
}

inline double eval_rho_second(double x) {
    if (x <= 0.0 || x >= 1.0) return 0.0;
    // rho = s / (s + t) with t(x) = sigma(1 - x); t' = -sigma'(1-x), t'' = sigma''(1-x)
    const double s = eval_sigma(x), t = eval_sigma(1.0 - x);
    const double s1 = detail::sigma_d1(x), t1 = -detail::sigma_d1(1.0 - x);
    const double s2 = detail::sigma_d2(x), t2 = detail::sigma_d2(1.0 - x);
    const double sum = s + t, sum1 = s1 + t1;
    const double num = s1 * t - s * t1;
    const double num1 = s2 * t - s * t2;
    return num1 / (sum * sum) - 2.0 * num * sum1 / (sum * sum * sum);
}

namespace detail {

// Square root of a radicand that is nonnegative in exact arithmetic.
inline double guarded_sqrt(double radicand) {
    if (radicand < -1e-12) {
        throw std::domain_error("negative radicand " + std::to_string(radicand) +
                                " in height profile");
    }
    return radicand > 0.0 ? std::sqrt(radicand) : 0.0;
}

} // namespace detail

/// Parameters (a, b) of the radial profile. `lipschitz` holds the empirical
/// derivative bound once calibration has measured it (0 until then).
struct ProfileParams {
    double a = 0.5;
    double b = 0.1;
    double lipschitz = 0.0;

    void validate() const {
        if (!(a > 0.0 && a < 1.0)) throw std::invalid_argument("profile: a must lie in (0,1)");
        if (!(b > 0.0 && b < 1.0)) throw std::invalid_argument("profile: b must lie in (0,1)");
    }
};

/// Values of the radius map and its derived quantities at one radius.
struct RadialJet {
    double g = 0.0;        // g(r)
    double g_over_r = 0.0; // g(r)/r, with limit b at r = 0
    double g_prime = 0.0;  // g'(r)
    double h = 0.0;        // sqrt(g'^2 - (g/r)^2)
    double h_prime = 0.0;  // h'(r)
};

/// The radius map g(r) = (1-b) rho((r-a)/(1-a)) r + b r and its companions.
///
/// Written through q(r) = g(r)/r = (1-b) rho(u) + b, u = (r-a)/(1-a):
///   g' = q + r q',   h^2 = g'^2 - q^2 = (r q') (2q + r q').
/// The factored form keeps the radicand nonnegative without cancellation.
class RadialProfile {
public:
    explicit RadialProfile(ProfileParams params) : p_(params) { p_.validate(); }

    const ProfileParams& params() const { return p_; }
    double a() const { return p_.a; }
    double b() const { return p_.b; }

    double g(double r) const {
        require_radius(r);
        if (r <= p_.a) return p_.b * r;
        if (r >= 1.0) return r;
        return (1.0 - p_.b) * eval_rho(u(r)) * r + p_.b * r;
    }

    double g_prime(double r) const { return jet(r).g_prime; }
    double h(double r) const { return jet(r).h; }

    double g_second(double r) const {
        require_radius(r);
        const double c = slope();
        const double x = u(r);
        const double q1 = c * eval_rho_prime(x);
        const double q2 = c * eval_rho_second(x) / (1.0 - p_.a);
        return 2.0 * q1 + r * q2;
    }

    RadialJet jet(double r) const {
        require_radius(r);
        RadialJet j;
        if (r <= p_.a) {
            j.g = p_.b * r;
            j.g_over_r = p_.b;
            j.g_prime = p_.b;
            return j;
        }
        if (r >= 1.0) {
            j.g = r;
            j.g_over_r = 1.0;
            j.g_prime = 1.0;
            return j;
        }
        const double c = slope();
        const double x = u(r);
        const double q = (1.0 - p_.b) * eval_rho(x) + p_.b;
        const double q1 = c * eval_rho_prime(x);
        const double q2 = c * eval_rho_second(x) / (1.0 - p_.a);
        j.g = q * r;
        j.g_over_r = q;
        j.g_prime = q + r * q1;
        const double lo = r * q1;          // g' - g/r >= 0
        const double hi = 2.0 * q + r * q1; // g' + g/r > 0
        j.h = detail::guarded_sqrt(lo * hi);
        if (lo > 0.0 && j.h > 0.0) {
            // (lo*hi)' / (2h), lo' = q1 + r q2, hi' = 3 q1 + r q2
            const double lo1 = q1 + r * q2;
            const double hi1 = 3.0 * q1 + r * q2;
            j.h_prime = (lo1 * hi + lo * hi1) / (2.0 * j.h);
        }
        return j;
    }

    /// Coarse bound of sup g' sampled on [a, 1]; used when no measured value exists.
    double sampled_derivative_bound(int samples = 20000) const {
        double best = 1.0;
        for (int i = 0; i <= samples; ++i) {
            const double r = p_.a + (1.0 - p_.a) * static_cast<double>(i) / samples;
            best = std::max(best, jet(r).g_prime);
        }
        return best;
    }

private:
    double slope() const { return (1.0 - p_.b) / (1.0 - p_.a); }
    double u(double r) const { return (r - p_.a) / (1.0 - p_.a); }

    static void require_radius(double r) {
        if (!(r >= 0.0)) throw std::domain_error("radial profile: radius must be >= 0");
    }

    ProfileParams p_;
};

inline double eval_g(const ProfileParams& p, double r) { return RadialProfile(p).g(r); }
inline double eval_g_prime(const ProfileParams& p, double r) { return RadialProfile(p).g_prime(r); }
inline double eval_h(const ProfileParams& p, double r) { return RadialProfile(p).h(r); }

/// Bump on the wedge D_k = {r <= 1, 0 <= theta <= pi/k} vanishing exactly on its
/// boundary: psi = eps * P / P_max with P = y (x sin(pi/k) - y cos(pi/k)) (1 - r^2).
/// In polar form P = r^2 (1 - r^2) sin(theta) sin(pi/k - theta), so
/// P_max = sin^2(pi/(2k)) / 4, attained at r^2 = 1/2, theta = pi/(2k).
class WedgeBump {
public:
    WedgeBump(int k, double eps) : k_(k), eps_(eps) {
        if (k < 1) throw std::invalid_argument("wedge bump: k must be >= 1");
        if (!(eps > 0.0)) throw std::invalid_argument("wedge bump: eps must be > 0");
        const double half = std::numbers::pi / (2.0 * k);
        sin_a_ = std::sin(2.0 * half);
        cos_a_ = std::cos(2.0 * half);
        p_max_ = std::sin(half) * std::sin(half) / 4.0;
    }

    int k() const { return k_; }
    double eps() const { return eps_; }
    double p_max() const { return p_max_; }

    /// Polynomial part; may be negative outside D_k.
    double polynomial(double x, double y) const {
        return y * (x * sin_a_ - y * cos_a_) * (1.0 - x * x - y * y);
    }

    /// Gradient of the normalized bump (eps * grad P / P_max).
    std::pair<double, double> gradient(double x, double y) const {
        const double lin = x * sin_a_ - y * cos_a_;
        const double rad = 1.0 - x * x - y * y;
        const double px = y * sin_a_ * rad - 2.0 * x * y * lin;
        const double py = lin * rad - y * cos_a_ * rad - 2.0 * y * y * lin;
        const double scale = eps_ / p_max_;
        return {scale * px, scale * py};
    }

    bool contains(double x, double y, double tol = 1e-12) const {
        return y >= -tol && x * sin_a_ - y * cos_a_ >= -tol && x * x + y * y <= 1.0 + tol;
    }

    /// psi(x, y); points within `tol` of D_k are accepted and clamped at 0.
    double operator()(double x, double y, double tol = 1e-12) const {
        if (!contains(x, y, tol)) {
            throw std::domain_error("wedge bump: point outside D_k");
        }
        const double v = eps_ * polynomial(x, y) / p_max_;
        return v > 0.0 ? v : 0.0;
    }

private:
    int k_;
    double eps_;
    double sin_a_ = 0.0, cos_a_ = 1.0, p_max_ = 1.0;
};

inline double eval_psi(int k, double eps, double x, double y) { return WedgeBump(k, eps)(x, y); }

} // namespace qcfold
