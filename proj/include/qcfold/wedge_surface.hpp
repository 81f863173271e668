#pragma once

// The folded surface G on one wedge, its differential and unit normal, and
// the normal-offset map F(x, y, t) = G(x, y) + t g'(r) N(x, y).

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string_view>

#include <Eigen/Dense>

#include "profiles.hpp"

namespace qcfold {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat32 = Eigen::Matrix<double, 3, 2>;

inline double radius(const Vec2& p) { return std::hypot(p.x(), p.y()); }
inline double radius(const Vec3& p) { return std::hypot(p.x(), p.y()); }
inline double angle(const Vec2& p) { return std::atan2(p.y(), p.x()); }
inline double angle(const Vec3& p) { return std::atan2(p.y(), p.x()); }

enum class RegionTag { E_plus, E_minus, S1, S1_prime, S2, S2_prime };

constexpr std::string_view to_string(RegionTag tag) {
    switch (tag) {
    case RegionTag::E_plus: return "E_plus";
    case RegionTag::E_minus: return "E_minus";
    case RegionTag::S1: return "S1";
    case RegionTag::S1_prime: return "S1_prime";
    case RegionTag::S2: return "S2";
    case RegionTag::S2_prime: return "S2_prime";
    }
    return "?";
}

/// Geometry of one wedge: k half-wedge count, slab half-thickness eps, bump
/// scale s and the radial profile. The slab graph is phi = s * psi <= s * eps.
class WedgeConfig {
public:
    WedgeConfig(int k, double eps, double s, ProfileParams profile)
        : k_(k), eps_(eps), s_(s), profile_(profile), bump_(k, eps) {
        if (k < 4) throw std::invalid_argument("wedge config: k must be >= 4");
        if (!(s >= 0.0 && s <= 1.0)) throw std::invalid_argument("wedge config: s must lie in [0,1]");
        if (!(eps > 0.0 && eps <= 1.0)) throw std::invalid_argument("wedge config: eps must lie in (0,1]");
    }

    int k() const { return k_; }
    double eps() const { return eps_; }
    double s() const { return s_; }
    double wedge_angle() const { return std::numbers::pi / k_; }
    const ProfileParams& profile_params() const { return profile_.params(); }
    const RadialProfile& profile() const { return profile_; }
    const WedgeBump& bump() const { return bump_; }

    WedgeConfig with_eps(double eps) const { return {k_, eps, s_, profile_.params()}; }
    WedgeConfig with_s(double s) const { return {k_, eps_, s, profile_.params()}; }

    double psi(double x, double y) const { return bump_(x, y); }
    double phi(double x, double y) const { return s_ * bump_(x, y); }

    bool in_wedge(double x, double y, double tol = 1e-12) const { return bump_.contains(x, y, tol); }

    /// Open 1/k-neighbourhood of D_k, realized as a polar box.
    bool in_omega(double x, double y) const {
        const double r = std::hypot(x, y);
        if (r >= 1.0 + 1.0 / k_) return false;
        if (r == 0.0) return true;
        const double th = std::atan2(y, x);
        return th > -1.0 / k_ && th < wedge_angle() + 1.0 / k_;
    }

private:
    int k_;
    double eps_;
    double s_;
    RadialProfile profile_;
    WedgeBump bump_;
};

/// G, its partial derivatives, the unit normal and g'(r) at one point.
struct SurfaceFrame {
    Vec3 value;
    Vec3 dx;
    Vec3 dy;
    Vec3 normal;
    double g_prime = 0.0;
};

namespace detail {

inline SurfaceFrame surface_frame(const WedgeConfig& cfg, double x, double y) {
    const RadialProfile& prof = cfg.profile();
    const double r = std::hypot(x, y);
    SurfaceFrame f;
    if (r <= prof.a()) {
        const double b = prof.b();
        f.value = Vec3(b * x, b * y, 0.0);
        f.dx = Vec3(b, 0.0, 0.0);
        f.dy = Vec3(0.0, b, 0.0);
        f.normal = Vec3(0.0, 0.0, 1.0);
        f.g_prime = b;
        return f;
    }
    const RadialJet j = prof.jet(r);
    const double th = std::atan2(y, x);
    const double q = j.g_over_r, gp = j.g_prime;
    const double r2 = r * r;
    f.value = Vec3(q * x, q * y, r * j.h * th);
    const double cross = x * y * (gp - q) / r2;
    f.dx = Vec3((y * y * q + x * x * gp) / r2, cross, (-y + x * th) * j.h / r + x * th * j.h_prime);
    f.dy = Vec3(cross, (x * x * q + y * y * gp) / r2, (x + y * th) * j.h / r + y * th * j.h_prime);
    const Vec3 n = f.dx.cross(f.dy);
    const double len = n.norm();
    if (!(len > 0.0)) throw std::runtime_error("surface map: rank-deficient differential");
    f.normal = n / len;
    f.g_prime = gp;
    return f;
}

} // namespace detail

inline void require_omega(const WedgeConfig& cfg, double x, double y) {
    if (!cfg.in_omega(x, y)) throw std::domain_error("surface map: point outside the 1/k-neighbourhood of the wedge");
}

/// G(x, y) = (g(r) x / r, g(r) y / r, r h(r) theta).
inline Vec3 eval_G(const WedgeConfig& cfg, double x, double y) {
    require_omega(cfg, x, y);
    return detail::surface_frame(cfg, x, y).value;
}

/// Columns G_x, G_y of the analytic differential.
inline Mat32 jacobian_G(const WedgeConfig& cfg, double x, double y) {
    require_omega(cfg, x, y);
    const SurfaceFrame f = detail::surface_frame(cfg, x, y);
    Mat32 j;
    j.col(0) = f.dx;
    j.col(1) = f.dy;
    return j;
}

inline Vec3 normal_N(const WedgeConfig& cfg, double x, double y) {
    require_omega(cfg, x, y);
    return detail::surface_frame(cfg, x, y).normal;
}

/// Offset map on Omega_k x R without region checks.
inline Vec3 slab_map(const WedgeConfig& cfg, double x, double y, double t) {
    const SurfaceFrame f = detail::surface_frame(cfg, x, y);
    return f.value + (t * f.g_prime) * f.normal;
}

/// F(x, y, t) = G(x, y) + t g'(r) N(x, y) for (x, y) in D_k, |t| <= eps.
inline Vec3 eval_F_slab(const WedgeConfig& cfg, double x, double y, double t) {
    if (!cfg.in_wedge(x, y)) throw std::domain_error("slab map: (x,y) outside D_k");
    if (std::abs(t) > cfg.eps()) throw std::domain_error("slab map: |t| exceeds eps");
    return slab_map(cfg, x, y, t);
}

/// Region of the base wedge cylinder T_k containing z; ties go to E.
inline RegionTag classify_region(const WedgeConfig& cfg, const Vec3& z) {
    if (!cfg.in_wedge(z.x(), z.y()) || std::abs(z.z()) > 2.0) {
        throw std::domain_error("classify_region: point outside T_k");
    }
    const double t = z.z();
    const double phi = cfg.phi(z.x(), z.y());
    if (std::abs(t) <= phi) return t >= 0.0 ? RegionTag::E_plus : RegionTag::E_minus;
    if (t > 0.0) return t < 1.0 ? RegionTag::S1 : RegionTag::S2;
    return t > -1.0 ? RegionTag::S1_prime : RegionTag::S2_prime;
}

} // namespace qcfold
