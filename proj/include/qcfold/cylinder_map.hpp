#pragma once

// The homeomorphism F_k of the cylinder T = closed unit disk x [-2, 2]:
// the slab map on E, vertical linear interpolations on S1/S1' and S2/S2',
// reflection across pi/k, rotation onto the other wedges, identity outside T.

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "qc_verify.hpp"
#include "wedge_surface.hpp"

namespace qcfold {

/// Which smooth piece of F_k a point belongs to.
struct Piece {
    int half_wedge = -1; // 0 .. 2k-1, or -1 outside T
    RegionTag region = RegionTag::E_plus;
    bool operator==(const Piece&) const = default;
};

/// Orthogonal change of frame taking a point of T to the base wedge D_k x [-2, 2].
struct WedgeFrame {
    int half_wedge = 0;
    double cos_rot = 1.0, sin_rot = 0.0; // rotation by 2 pi l / k
    bool reflected = false;
    double cos_2a = 1.0, sin_2a = 0.0; // reflection across the line at angle pi/k

    Vec3 to_base(const Vec3& p) const {
        Vec3 q(cos_rot * p.x() + sin_rot * p.y(), -sin_rot * p.x() + cos_rot * p.y(), p.z());
        return reflected ? reflect(q) : q;
    }

    Vec3 from_base(const Vec3& q) const {
        const Vec3 u = reflected ? reflect(q) : q;
        return {cos_rot * u.x() - sin_rot * u.y(), sin_rot * u.x() + cos_rot * u.y(), u.z()};
    }

    /// Linear part of from_base (orthogonal, det = -1 when reflected).
    Mat3 matrix() const {
        Mat3 rot;
        rot << cos_rot, -sin_rot, 0, sin_rot, cos_rot, 0, 0, 0, 1;
        if (!reflected) return rot;
        Mat3 refl;
        refl << cos_2a, sin_2a, 0, sin_2a, -cos_2a, 0, 0, 0, 1;
        return rot * refl;
    }

private:
    Vec3 reflect(const Vec3& p) const {
        return {cos_2a * p.x() + sin_2a * p.y(), sin_2a * p.x() - cos_2a * p.y(), p.z()};
    }
};

class CylinderMap {
public:
    explicit CylinderMap(WedgeConfig cfg) : cfg_(std::move(cfg)) {
        const int k = cfg_.k();
        rot_.reserve(k);
        for (int l = 0; l < k; ++l) {
            const double ang = 2.0 * std::numbers::pi * l / k;
            rot_.push_back({std::cos(ang), std::sin(ang)});
        }
        cos_2a_ = std::cos(2.0 * cfg_.wedge_angle());
        sin_2a_ = std::sin(2.0 * cfg_.wedge_angle());
    }

    const WedgeConfig& config() const { return cfg_; }

    // -- region formulas on the base wedge, valid on an open neighbourhood ----

    /// phi extended smoothly past D_k (may be negative outside).
    double phi_ext(double x, double y) const {
        const WedgeBump& bump = cfg_.bump();
        return cfg_.s() * bump.eps() * bump.polynomial(x, y) / bump.p_max();
    }

    Vec3 region_formula(RegionTag tag, const Vec3& z) const {
        const double x = z.x(), y = z.y(), t = z.z();
        switch (tag) {
        case RegionTag::E_plus:
        case RegionTag::E_minus: return slab_map(cfg_, x, y, t);
        case RegionTag::S1: {
            const double phi = phi_ext(x, y);
            Vec3 top = slab_map(cfg_, x, y, phi);
            top.z() += (t - phi) / (1.0 - phi) * (1.0 - top.z());
            return top;
        }
        case RegionTag::S1_prime: {
            const double phi = phi_ext(x, y);
            Vec3 bot = slab_map(cfg_, x, y, -phi);
            bot.z() += (-phi - t) / (1.0 - phi) * (-1.0 - bot.z());
            return bot;
        }
        case RegionTag::S2: {
            const Vec3 top = slab_map(cfg_, x, y, phi_ext(x, y));
            return (2.0 - t) * Vec3(top.x(), top.y(), 1.0) + (t - 1.0) * Vec3(x, y, 2.0);
        }
        case RegionTag::S2_prime: {
            const Vec3 bot = slab_map(cfg_, x, y, -phi_ext(x, y));
            return (2.0 + t) * Vec3(bot.x(), bot.y(), -1.0) + (-1.0 - t) * Vec3(x, y, -2.0);
        }
        }
        throw std::logic_error("unknown region");
    }

    /// Interpolation on S1(s) = {phi <= t <= 1}.
    Vec3 eval_Fs_S1(double x, double y, double t) const {
        require(x, y);
        const double phi = cfg_.phi(x, y);
        if (t < phi || t > 1.0) throw std::domain_error("F^s on S1: t outside [phi, 1]");
        return region_formula(RegionTag::S1, {x, y, t});
    }

    Vec3 eval_Fs_S1_prime(double x, double y, double t) const {
        require(x, y);
        const double phi = cfg_.phi(x, y);
        if (t > -phi || t < -1.0) throw std::domain_error("F^s on S1': t outside [-1, -phi]");
        return region_formula(RegionTag::S1_prime, {x, y, t});
    }

    Vec3 eval_Fs_S2(double x, double y, double t) const {
        require(x, y);
        if (t < 1.0 || t > 2.0) throw std::domain_error("F^s on S2: t outside [1, 2]");
        return region_formula(RegionTag::S2, {x, y, t});
    }

    Vec3 eval_Fs_S2_prime(double x, double y, double t) const {
        require(x, y);
        if (t > -1.0 || t < -2.0) throw std::domain_error("F^s on S2': t outside [-2, -1]");
        return region_formula(RegionTag::S2_prime, {x, y, t});
    }

    /// F on the base cylinder T_k.
    Vec3 eval_base(const Vec3& z) const { return region_formula(classify_region(cfg_, z), z); }

    // -- the full map --------------------------------------------------------

    static bool inside(const Vec3& z) { return std::hypot(z.x(), z.y()) < 1.0 && std::abs(z.z()) < 2.0; }

    WedgeFrame frame_of(const Vec3& z) const {
        const int k = cfg_.k();
        double th = std::atan2(z.y(), z.x());
        if (th < 0.0) th += 2.0 * std::numbers::pi;
        int w = static_cast<int>(std::floor(th / cfg_.wedge_angle()));
        w = std::clamp(w, 0, 2 * k - 1);
        WedgeFrame f;
        f.half_wedge = w;
        f.cos_rot = rot_[w / 2].first;
        f.sin_rot = rot_[w / 2].second;
        f.reflected = (w % 2) == 1;
        f.cos_2a = cos_2a_;
        f.sin_2a = sin_2a_;
        return f;
    }

    /// F_k on R^3 (identity outside the open cylinder).
    Vec3 operator()(const Vec3& z) const {
        if (!inside(z)) return z;
        const WedgeFrame f = frame_of(z);
        return f.from_base(eval_base(f.to_base(z)));
    }

    Piece piece(const Vec3& z) const {
        if (!inside(z)) return {};
        const WedgeFrame f = frame_of(z);
        return {f.half_wedge, classify_region(cfg_, f.to_base(z))};
    }

    /// Differential of the smooth piece containing z (one-sided at interfaces).
    Mat3 jacobian(const Vec3& z, double step = 0x1.0p-17) const {
        if (!inside(z)) return Mat3::Identity();
        const WedgeFrame f = frame_of(z);
        const Vec3 base = f.to_base(z);
        const RegionTag tag = classify_region(cfg_, base);
        const Mat3 jb = numeric_jacobian([&](const Vec3& p) { return region_formula(tag, p); }, base, step);
        const Mat3 q = f.matrix();
        return q * jb * q.transpose();
    }

private:
    void require(double x, double y) const {
        if (!cfg_.in_wedge(x, y)) throw std::domain_error("cylinder map: (x,y) outside D_k");
    }

    WedgeConfig cfg_;
    std::vector<std::pair<double, double>> rot_;
    double cos_2a_ = 1.0, sin_2a_ = 0.0;
};

inline Vec3 eval_Fk(const CylinderMap& map, const Vec3& z) { return map(z); }

} // namespace qcfold
