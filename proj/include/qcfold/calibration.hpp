#pragma once

// Executable versions of "for sufficiently small eps / s / large k": dyadic
// searches certified on sample grids of the base wedge. By the rotation and
// reflection symmetry of F_k, one wedge D_k x [-2, 2] suffices.

#include <cmath>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "cylinder_map.hpp"
#include "qc_verify.hpp"

namespace qcfold {

class CalibrationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct SampleGrid {
    int n_r = 64;
    int n_theta = 64;
    int n_t = 9;
};

/// Finite-difference step used for all sweep Jacobians. A power of two keeps
/// z +- h exact for the dyadic grid offsets.
inline constexpr double kSweepStep = 0x1.0p-17;

struct Sample {
    Vec3 z;
    RegionTag region;
};

namespace detail {

inline double cell_mid(int i, int n) { return (i + 0.5) / n; }

/// Interior polar grid of the base wedge.
inline std::vector<Vec2> wedge_points(const WedgeConfig& cfg, const SampleGrid& grid) {
    std::vector<Vec2> pts;
    pts.reserve(static_cast<std::size_t>(grid.n_r) * grid.n_theta);
    for (int i = 0; i < grid.n_r; ++i) {
        const double r = cell_mid(i, grid.n_r);
        for (int j = 0; j < grid.n_theta; ++j) {
            const double th = cell_mid(j, grid.n_theta) * cfg.wedge_angle();
            pts.emplace_back(r * std::cos(th), r * std::sin(th));
        }
    }
    return pts;
}

} // namespace detail

/// Slab samples |t| <= half_width(x, y), tagged E_plus / E_minus.
template <class HalfWidth>
std::vector<Sample> slab_samples(const WedgeConfig& cfg, const SampleGrid& grid, HalfWidth&& half_width) {
    std::vector<Sample> out;
    for (const Vec2& p : detail::wedge_points(cfg, grid)) {
        const double w = half_width(p.x(), p.y());
        for (int l = 0; l < grid.n_t; ++l) {
            const double t = w * (2.0 * detail::cell_mid(l, grid.n_t) - 1.0);
            out.push_back({{p.x(), p.y(), t}, t >= 0.0 ? RegionTag::E_plus : RegionTag::E_minus});
        }
    }
    return out;
}

/// Samples of the four interpolation regions S1, S1', S2, S2' for the config's s.
inline std::vector<Sample> interpolation_samples(const WedgeConfig& cfg, const SampleGrid& grid) {
    std::vector<Sample> out;
    for (const Vec2& p : detail::wedge_points(cfg, grid)) {
        const double phi = cfg.phi(p.x(), p.y());
        for (int l = 0; l < grid.n_t; ++l) {
            const double u = detail::cell_mid(l, grid.n_t);
            out.push_back({{p.x(), p.y(), phi + (1.0 - phi) * u}, RegionTag::S1});
            out.push_back({{p.x(), p.y(), -phi - (1.0 - phi) * u}, RegionTag::S1_prime});
            out.push_back({{p.x(), p.y(), 1.0 + u}, RegionTag::S2});
            out.push_back({{p.x(), p.y(), -1.0 - u}, RegionTag::S2_prime});
        }
    }
    return out;
}

struct SweepResult {
    DilatationReport report;
    std::vector<Vec3> domain;
    std::vector<Vec3> images;
    std::size_t escaped = 0; // images outside T_k

    void append(const SweepResult& o) {
        report.merge(o.report);
        domain.insert(domain.end(), o.domain.begin(), o.domain.end());
        images.insert(images.end(), o.images.begin(), o.images.end());
        escaped += o.escaped;
    }
};

/// Evaluates each sample with the smooth formula of its region and records
/// the Jacobian of that formula (so stencils never straddle an interface).
inline SweepResult sweep(const CylinderMap& map, const std::vector<Sample>& samples,
                         double step = kSweepStep) {
    SweepResult res;
    res.domain.reserve(samples.size());
    res.images.reserve(samples.size());
    const WedgeConfig& cfg = map.config();
    for (const Sample& s : samples) {
        auto f = [&](const Vec3& p) { return map.region_formula(s.region, p); };
        const Vec3 img = f(s.z);
        res.report.add(std::string(to_string(s.region)), numeric_jacobian(f, s.z, step));
        res.domain.push_back(s.z);
        res.images.push_back(img);
        if (!cfg.in_wedge(img.x(), img.y(), 1e-9) || std::abs(img.z()) > 2.0 + 1e-12) ++res.escaped;
    }
    return res;
}

// ---------------------------------------------------------------------------
// eps

struct EpsilonCalibration {
    double eps = 0.0;
    int exponent = 0;           // eps = 2^-exponent
    double surface_eta = 0.0;   // max dilatation - 1 at t = 0
    double surface_stretch = 0.0;
    DilatationReport slab;      // on D_k x [-eps, eps]
    CollisionReport injectivity;
};

/// Largest eps = 2^-j (j = 1..20) whose slab D_k x [-eps, eps] passes: positive
/// determinant, eta(slab) <= (1 + eta_tol) eta(t = 0), stretch <= 2 x the t = 0
/// stretch, and no image collisions.
inline EpsilonCalibration calibrate_epsilon(int k, const ProfileParams& profile, double eta_tol = 0.1,
                                            const SampleGrid& grid = {}) {
    if (!(eta_tol >= 0.0)) throw std::invalid_argument("calibrate_epsilon: eta_tol must be >= 0");
    const WedgeConfig base(k, 1.0, 1.0, profile);
    const CylinderMap base_map(base);
    const SweepResult surface = sweep(base_map, slab_samples(base, grid, [](double, double) { return 0.0; }));
    if (!surface.report.orientation_ok()) {
        throw CalibrationError("calibrate_epsilon: degenerate differential at t = 0 for k = " + std::to_string(k));
    }
    EpsilonCalibration out;
    out.surface_eta = surface.report.max_dilatation() - 1.0;
    out.surface_stretch = surface.report.max_stretch();
    const double eta_cap = (1.0 + eta_tol) * out.surface_eta + 1e-12;
    for (int j = 1; j <= 20; ++j) {
        const double eps = std::ldexp(1.0, -j);
        const WedgeConfig cfg = base.with_eps(eps);
        const SweepResult slab = sweep(CylinderMap(cfg), slab_samples(cfg, grid, [eps](double, double) { return eps; }));
        if (!slab.report.orientation_ok()) continue;
        if (slab.report.max_dilatation() - 1.0 > eta_cap) continue;
        if (slab.report.max_stretch() > 2.0 * out.surface_stretch) continue;
        const CollisionReport inj = injectivity_scan(slab.domain, slab.images);
        if (!inj.ok()) continue;
        out.eps = eps;
        out.exponent = j;
        out.slab = slab.report;
        out.injectivity = inj;
        return out;
    }
    throw CalibrationError("calibrate_epsilon: no admissible eps down to 2^-20 (k = " + std::to_string(k) +
                           " too small)");
}

// ---------------------------------------------------------------------------
// s

struct SCalibration {
    double s = 0.0;
    int exponent = 0; // s = 2^-exponent
    double k_target = 0.0;
    double l_target = 0.0;
    DilatationReport report; // all six regions at the returned s
    CollisionReport injectivity;
};

/// Largest s = 2^-j (j = 0..20) for which the assembled wedge map passes on
/// E and S1, S1', S2, S2': positive determinant, dilatation and stretch within
/// (1 + slack) of the s = 0 limit maps and the eps-slab, no collisions, and
/// images inside T_k. Throws when even the s = 0 limit is degenerate.
inline SCalibration calibrate_s(const WedgeConfig& draft, const DilatationReport& slab, double slack = 0.1,
                                const SampleGrid& grid = {}) {
    const WedgeConfig limit = draft.with_s(0.0);
    const SweepResult ref = sweep(CylinderMap(limit), interpolation_samples(limit, grid));
    if (!ref.report.orientation_ok() || ref.escaped > 0) {
        throw CalibrationError("calibrate_s: s = 0 limit map is not an orientation-preserving map of T_k (k = " +
                               std::to_string(draft.k()) + " too small)");
    }
    SCalibration out;
    out.k_target = (1.0 + slack) * std::max(ref.report.max_dilatation(), slab.max_dilatation());
    out.l_target = (1.0 + slack) * std::max(ref.report.max_stretch(), slab.max_stretch());
    for (int j = 0; j <= 20; ++j) {
        const WedgeConfig cfg = draft.with_s(std::ldexp(1.0, -j));
        const CylinderMap map(cfg);
        SweepResult all = sweep(map, interpolation_samples(cfg, grid));
        all.append(sweep(map, slab_samples(cfg, grid, [&](double x, double y) { return cfg.phi(x, y); })));
        if (!all.report.orientation_ok() || all.escaped > 0) continue;
        if (all.report.max_dilatation() > out.k_target || all.report.max_stretch() > out.l_target) continue;
        const CollisionReport inj = injectivity_scan(all.domain, all.images);
        if (!inj.ok()) continue;
        out.s = cfg.s();
        out.exponent = j;
        out.report = all.report;
        out.injectivity = inj;
        return out;
    }
    throw CalibrationError("calibrate_s: no admissible s down to 2^-20 (k = " + std::to_string(draft.k()) + ")");
}

// ---------------------------------------------------------------------------
// eta(k) and the k schedule

/// Sampled slab {|t| <= phi} of the calibrated config.
inline SweepResult sweep_slab(const WedgeConfig& cfg, const SampleGrid& grid = {}) {
    return sweep(CylinderMap(cfg), slab_samples(cfg, grid, [&](double x, double y) { return cfg.phi(x, y); }));
}

/// Max of dilatation - 1 over the sampled V_k; throws on an orientation violation.
inline double measure_eta(const WedgeConfig& cfg, const SampleGrid& grid = {}) {
    const SweepResult res = sweep_slab(cfg, grid);
    if (!res.report.orientation_ok()) throw OrientationViolation(res.report.min_jacobian_det());
    return std::max(0.0, res.report.max_dilatation() - 1.0);
}

/// Everything measured for one k.
struct KRecord {
    int k = 0;
    EpsilonCalibration eps;
    std::optional<SCalibration> s; // empty when F_k could not be assembled
    std::string s_error;
    double eta = 0.0;        // over V_k (s = 1 stand-in when s failed)
    double K = 0.0;          // max dilatation of F_k over T (needs s)
    double L = 0.0;          // max stretch of F_k over T (needs s)
    double L_annulus = 0.0;  // max stretch over V_k restricted to r >= a

    bool assembled() const { return s.has_value(); }

    WedgeConfig config(const ProfileParams& profile) const {
        return WedgeConfig(k, eps.eps, s ? s->s : 1.0, profile);
    }
};

inline KRecord measure_k(int k, const ProfileParams& profile, double eta_tol = 0.1, double slack = 0.1,
                         const SampleGrid& grid = {}) {
    KRecord rec;
    rec.k = k;
    rec.eps = calibrate_epsilon(k, profile, eta_tol, grid);
    const WedgeConfig draft(k, rec.eps.eps, 1.0, profile);
    try {
        rec.s = calibrate_s(draft, rec.eps.slab, slack, grid);
    } catch (const CalibrationError& e) {
        rec.s_error = e.what();
    }
    const WedgeConfig cfg = rec.config(profile);
    rec.eta = measure_eta(cfg, grid);
    if (rec.s) {
        rec.K = rec.s->report.max_dilatation();
        rec.L = rec.s->report.max_stretch();
    }
    const CylinderMap map(cfg);
    for (const Sample& smp : slab_samples(cfg, grid, [&](double x, double y) { return cfg.phi(x, y); })) {
        if (std::hypot(smp.z.x(), smp.z.y()) < profile.a) continue;
        const Mat3 j = numeric_jacobian([&](const Vec3& p) { return map.region_formula(smp.region, p); }, smp.z,
                                        kSweepStep);
        rec.L_annulus = std::max(rec.L_annulus, operator_norm(j));
    }
    return rec;
}

/// Memoized per-k measurements and the level rule eta(k_m) < 2^-m.
class KSchedule {
public:
    explicit KSchedule(ProfileParams profile, SampleGrid grid = {}, double eta_tol = 0.1, double slack = 0.1)
        : profile_(profile), grid_(grid), eta_tol_(eta_tol), slack_(slack) {
        profile_.validate();
    }

    const ProfileParams& profile() const { return profile_; }
    const SampleGrid& grid() const { return grid_; }

    const KRecord& record(int k) {
        auto it = cache_.find(k);
        if (it == cache_.end()) it = cache_.emplace(k, measure_k(k, profile_, eta_tol_, slack_, grid_)).first;
        return it->second;
    }

    /// Smallest k in the doubling sweep 4, 8, 16, ... with an assembled F_k and
    /// eta(k) < 2^-m.
    int choose_k(int m, int k_cap = 1 << 16) {
        if (m < 1) throw std::invalid_argument("choose_k: level must be >= 1");
        const double target = std::ldexp(1.0, -m);
        for (int k = 4; k <= k_cap; k *= 2) {
            const KRecord& rec = record(k);
            if (rec.assembled() && rec.eta < target) return k;
        }
        throw CalibrationError("choose_k: sweep cap exceeded for level " + std::to_string(m));
    }

    const std::map<int, KRecord>& records() const { return cache_; }

private:
    ProfileParams profile_;
    SampleGrid grid_;
    double eta_tol_;
    double slack_;
    std::map<int, KRecord> cache_;
};

} // namespace qcfold
