#pragma once

// Nested Vitali cylinders and the finite-depth composition h_m = g_1 o ... o g_m.
//
// Each node stores its center and radius relative to its parent's unit frame,
// so chains of any depth are evaluated in local coordinates without the
// cancellation a global frame would suffer at radii far below 1e-16.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "calibration.hpp"
#include "cylinder_map.hpp"
#include "qc_verify.hpp"
#include "rng.hpp"

namespace qcfold {

// ---------------------------------------------------------------------------
// Planar pieces

struct Ball {
    Vec2 center = Vec2::Zero();
    double radius = 0.0;
};

struct Rect {
    Vec2 lo = Vec2::Zero();
    Vec2 hi = Vec2::Zero();
};

/// Finite union of pairwise disjoint closed rectangles and disks.
struct PlanarRegion {
    std::vector<Rect> rects;
    std::vector<Ball> disks;

    static PlanarRegion square(double half_side) {
        return {{Rect{Vec2(-half_side, -half_side), Vec2(half_side, half_side)}}, {}};
    }
    static PlanarRegion disk(const Vec2& c, double r) { return {{}, {Ball{c, r}}}; }

    double area() const {
        double s = 0.0;
        for (const Rect& r : rects) s += (r.hi - r.lo).prod();
        for (const Ball& b : disks) s += std::numbers::pi * b.radius * b.radius;
        return s;
    }

    /// Distance from p to the complement (0 outside); exact for disjoint pieces.
    double inner_distance(const Vec2& p) const {
        double best = 0.0;
        for (const Rect& r : rects) {
            const double d = std::min({p.x() - r.lo.x(), r.hi.x() - p.x(), p.y() - r.lo.y(), r.hi.y() - p.y()});
            best = std::max(best, d);
        }
        for (const Ball& b : disks) best = std::max(best, b.radius - (p - b.center).norm());
        return best;
    }

    bool contains(const Vec2& p) const { return inner_distance(p) >= 0.0 && bounding_box_contains(p); }

    Rect bounding_box() const {
        Rect box{Vec2::Constant(std::numeric_limits<double>::infinity()),
                 Vec2::Constant(-std::numeric_limits<double>::infinity())};
        for (const Rect& r : rects) {
            box.lo = box.lo.cwiseMin(r.lo);
            box.hi = box.hi.cwiseMax(r.hi);
        }
        for (const Ball& b : disks) {
            box.lo = box.lo.cwiseMin(b.center - Vec2::Constant(b.radius));
            box.hi = box.hi.cwiseMax(b.center + Vec2::Constant(b.radius));
        }
        return box;
    }

    /// Radius of the smallest origin-centered disk containing the region.
    double bounding_radius() const {
        double r = 0.0;
        for (const Rect& q : rects) {
            r = std::max(r, std::hypot(std::max(std::abs(q.lo.x()), std::abs(q.hi.x())),
                                       std::max(std::abs(q.lo.y()), std::abs(q.hi.y()))));
        }
        for (const Ball& b : disks) r = std::max(r, b.center.norm() + b.radius);
        return r;
    }

private:
    bool bounding_box_contains(const Vec2& p) const {
        const Rect b = bounding_box();
        return p.x() >= b.lo.x() && p.x() <= b.hi.x() && p.y() >= b.lo.y() && p.y() <= b.hi.y();
    }
};

/// Z_k = unit circle, the circle S_a and the 2k radial segments at angles pi j / k.
struct SingularSet {
    int k = 4;
    double a = 0.5;

    double distance(const Vec2& w) const {
        const double r = w.norm();
        double d = std::min(std::abs(1.0 - r), std::abs(r - a));
        if (r == 0.0) return 0.0;
        const double step = std::numbers::pi / k;
        double th = std::atan2(w.y(), w.x());
        if (th < 0.0) th += 2.0 * std::numbers::pi;
        double delta = std::fmod(th, step);
        delta = std::min(delta, step - delta);
        // nearest point on a segment from the origin; inside the unit disk the
        // foot of the perpendicular is on the segment
        const double radial = delta < std::numbers::pi / 2 ? r * std::sin(delta) : r;
        return std::min(d, radial);
    }
};

/// Spatial hash of disjoint balls; each ball is registered in every cell its
/// bounding box touches, so ring searches find all nearby edges.
class BallIndex {
public:
    explicit BallIndex(double cell) : cell_(cell) {}

    void insert(const Ball& b, std::size_t id) {
        const auto [x0, y0] = key(b.center - Vec2::Constant(b.radius));
        const auto [x1, y1] = key(b.center + Vec2::Constant(b.radius));
        for (std::int64_t x = x0; x <= x1; ++x) {
            for (std::int64_t y = y0; y <= y1; ++y) cells_[pack(x, y)].push_back(id);
        }
    }

    /// min(cap, distance from p to the nearest ball edge); negative inside a ball.
    double clearance(const Vec2& p, double cap, const std::vector<Ball>& balls) const {
        double best = cap;
        const auto [cx, cy] = key(p);
        for (std::int64_t ring = 0; (static_cast<double>(ring) - 1.0) * cell_ < best; ++ring) {
            for (std::int64_t x = cx - ring; x <= cx + ring; ++x) {
                for (std::int64_t y = cy - ring; y <= cy + ring; ++y) {
                    if (std::max(std::abs(x - cx), std::abs(y - cy)) != ring) continue;
                    auto it = cells_.find(pack(x, y));
                    if (it == cells_.end()) continue;
                    for (std::size_t id : it->second) {
                        best = std::min(best, (balls[id].center - p).norm() - balls[id].radius);
                        if (best < 0.0) return best;
                    }
                }
            }
        }
        return best;
    }

private:
    std::pair<std::int64_t, std::int64_t> key(const Vec2& p) const {
        return {static_cast<std::int64_t>(std::floor(p.x() / cell_)),
                static_cast<std::int64_t>(std::floor(p.y() / cell_))};
    }
    static std::uint64_t pack(std::int64_t x, std::int64_t y) {
        return (static_cast<std::uint64_t>(x) << 32) ^ (static_cast<std::uint64_t>(y) & 0xffffffffULL);
    }

    double cell_;
    std::unordered_map<std::uint64_t, std::vector<std::size_t>> cells_;
};

// ---------------------------------------------------------------------------
// Root cover

struct VitaliOptions {
    double lambda = 0.5;          // max diameter
    double coverage_tol = 0.05;   // stop once covered fraction >= 1 - tol
    double shrink = 0.75;         // threshold factor between passes
    int max_passes = 80;
    std::size_t max_balls = 2'000'000;
    std::uint64_t seed = 1;
};

struct VitaliCover {
    std::vector<Ball> balls;
    double region_area = 0.0;
    double covered_fraction = 0.0;
    int passes = 0;
};

/// Greedy disjoint packing: Halton darts (with a seeded shift) take the largest
/// admissible radius; pass i accepts radii >= lambda/2 * shrink^i.
inline VitaliCover build_vitali_cover(const PlanarRegion& region, const VitaliOptions& opt = {}) {
    if (!(opt.coverage_tol > 0.0 && opt.coverage_tol < 1.0)) {
        throw std::invalid_argument("vitali cover: coverage_tol must lie in (0,1)");
    }
    if (!(opt.lambda > 0.0)) throw std::invalid_argument("vitali cover: lambda must be > 0");
    VitaliCover out;
    out.region_area = region.area();
    if (!(out.region_area > 0.0)) throw std::invalid_argument("vitali cover: region has no area");
    const Rect box = region.bounding_box();
    const Vec2 span = box.hi - box.lo;
    SplitStream rng(opt.seed, 0);
    const double shift_x = rng.uniform(), shift_y = rng.uniform();
    BallIndex index(opt.lambda / 8.0);
    double covered = 0.0;
    std::uint64_t dart = 1;
    double threshold = opt.lambda / 2.0;
    for (int pass = 0; pass < opt.max_passes; ++pass) {
        out.passes = pass + 1;
        const double darts = std::min(4e6, 4.0 * out.region_area / (std::numbers::pi * threshold * threshold) + 64.0);
        for (std::uint64_t i = 0; i < static_cast<std::uint64_t>(darts); ++i, ++dart) {
            const Vec2 p(box.lo.x() + span.x() * std::fmod(radical_inverse(dart, 2) + shift_x, 1.0),
                         box.lo.y() + span.y() * std::fmod(radical_inverse(dart, 3) + shift_y, 1.0));
            const double edge = region.inner_distance(p);
            if (!(edge >= threshold)) continue;
            const double r = index.clearance(p, std::min(opt.lambda / 2.0, edge), out.balls) * (1.0 - 1e-9);
            if (r < threshold) continue;
            index.insert({p, r}, out.balls.size());
            out.balls.push_back({p, r});
            covered += std::numbers::pi * r * r;
            if (out.balls.size() >= opt.max_balls) break;
        }
        out.covered_fraction = covered / out.region_area;
        if (out.covered_fraction >= 1.0 - opt.coverage_tol) return out;
        if (out.balls.size() >= opt.max_balls) break;
        threshold *= opt.shrink;
    }
    throw std::runtime_error("vitali cover: coverage " + std::to_string(out.covered_fraction) +
                             " below target within the iteration cap");
}

// ---------------------------------------------------------------------------
// Levels and the tree

/// The calibrated F_{k_m} used at one level.
struct LevelMap {
    int k = 0;
    double eps = 0.0, s = 0.0, eta = 0.0, K = 0.0, L = 0.0, L_annulus = 0.0;
    CylinderMap map;

    static LevelMap from_record(const KRecord& rec, const ProfileParams& profile) {
        if (!rec.assembled()) throw CalibrationError("level map: F_k not assembled for k = " + std::to_string(rec.k));
        return {rec.k, rec.eps.eps, rec.s->s, rec.eta, rec.K, rec.L, rec.L_annulus, CylinderMap(rec.config(profile))};
    }
};

enum class KRule { eta, list };

/// k_m for m = 1..depth: by eta(k_m) < 2^-m, or by cycling through k_list.
inline std::vector<LevelMap> make_levels(KSchedule& sched, int depth, KRule rule, const std::vector<int>& k_list = {}) {
    if (depth < 1) throw std::invalid_argument("make_levels: depth must be >= 1");
    if (rule == KRule::list && k_list.empty()) throw std::invalid_argument("make_levels: empty k_list");
    std::vector<LevelMap> levels;
    for (int m = 1; m <= depth; ++m) {
        const int k = rule == KRule::eta ? sched.choose_k(m) : k_list[(m - 1) % k_list.size()];
        levels.push_back(LevelMap::from_record(sched.record(k), sched.profile()));
    }
    return levels;
}

enum class CoverRegion { root, inner, annulus };

constexpr std::string_view to_string(CoverRegion r) {
    switch (r) {
    case CoverRegion::root: return "root";
    case CoverRegion::inner: return "inner";
    case CoverRegion::annulus: return "annulus";
    }
    return "?";
}

struct CoverNode {
    Vec2 local_center = Vec2::Zero(); // in the parent's unit frame (global for roots)
    double ratio = 1.0;               // radius in the parent's unit frame (global for roots)
    double radius = 0.0;              // absolute radius
    Vec2 center = Vec2::Zero();       // absolute center, rounded
    int level = 1;
    std::vector<int> multi_index;
    int k = 0;
    CoverRegion region = CoverRegion::root;
    int parent = -1;
    std::vector<int> children;
};

struct TreeOptions {
    int child_cap = 16;
    int darts_per_child = 8;       // dart budget per node = cap * this
    double r_min_factor = 1e-6;    // r_min = factor * s * eps
    double slab_margin = 1.1;      // cylinder height 2 rho must stay below phi / margin
    int slab_probes = 24;
    std::uint64_t seed = 1;
};

struct CoverTree {
    ProfileParams profile;
    std::vector<LevelMap> levels; // levels[m-1] drives g_m
    std::vector<CoverNode> nodes;
    std::vector<int> roots;
    std::vector<double> area_fraction; // per level m >= 2: child area / parent area
    std::uint64_t seed = 1;

    int depth() const { return static_cast<int>(levels.size()); }
    const LevelMap& level(int m) const { return levels.at(m - 1); }

    double K_measured() const {
        double k = 1.0;
        for (const LevelMap& l : levels) k = std::max(k, l.K);
        return k;
    }
    double L_measured() const {
        double v = 1.0;
        for (const LevelMap& l : levels) v = std::max(v, l.L);
        return v;
    }

    std::vector<int> nodes_at(int m) const {
        std::vector<int> out;
        for (int i = 0; i < static_cast<int>(nodes.size()); ++i) {
            if (nodes[i].level == m) out.push_back(i);
        }
        return out;
    }

    /// Node indices from the root down to `id`.
    std::vector<int> chain_to(int id) const {
        std::vector<int> chain;
        for (int n = id; n >= 0; n = nodes[n].parent) chain.push_back(n);
        std::reverse(chain.begin(), chain.end());
        return chain;
    }
};

namespace detail {

/// Largest admissible child radius at w (unit frame of a level-m parent), or 0.
inline double child_radius(const LevelMap& lvl, const SingularSet& z, const Vec2& w, double cap,
                           const std::vector<Ball>& siblings, const TreeOptions& opt) {
    double rho = std::min(cap, z.distance(w));
    for (const Ball& b : siblings) rho = std::min(rho, (b.center - w).norm() - b.radius);
    if (!(rho > 0.0)) return 0.0;
    const WedgeConfig& cfg = lvl.map.config();
    auto phi_at = [&](const Vec2& p) {
        const WedgeFrame f = lvl.map.frame_of(Vec3(p.x(), p.y(), 0.0));
        const Vec3 q = f.to_base(Vec3(p.x(), p.y(), 0.0));
        return cfg.s() * cfg.bump()(q.x(), q.y(), 1e-9);
    };
    for (int iter = 0; iter < 400 && rho > 0.0; ++iter) {
        double lo = phi_at(w);
        for (int i = 0; i < opt.slab_probes && lo >= 2.0 * opt.slab_margin * rho; ++i) {
            const double th = 2.0 * std::numbers::pi * i / opt.slab_probes;
            lo = std::min(lo, phi_at(w + rho * Vec2(std::cos(th), std::sin(th))));
        }
        if (2.0 * opt.slab_margin * rho <= lo) return rho * (1.0 - 1e-9);
        rho *= 0.9;
    }
    return 0.0;
}

} // namespace detail

/// Children of every node down to level `levels.size()`, using the node's own
/// F_{k_m} to define the singular set and the slab V.
inline CoverTree build_cover_tree(const VitaliCover& root, std::vector<LevelMap> levels, const TreeOptions& opt = {},
                                  const ProfileParams& profile = {}) {
    if (levels.empty()) throw std::invalid_argument("cover tree: need at least one level");
    CoverTree tree;
    tree.profile = profile;
    tree.levels = std::move(levels);
    tree.seed = opt.seed;
    tree.area_fraction.assign(tree.levels.size() + 1, 0.0);
    for (std::size_t i = 0; i < root.balls.size(); ++i) {
        const Ball& b = root.balls[i];
        if (b.radius > 0.25 + 1e-15) throw std::runtime_error("cover tree: root radius exceeds 2^-2");
        CoverNode n;
        n.local_center = n.center = b.center;
        n.ratio = n.radius = b.radius;
        n.level = 1;
        n.multi_index = {static_cast<int>(i)};
        n.k = tree.levels[0].k;
        tree.roots.push_back(static_cast<int>(tree.nodes.size()));
        tree.nodes.push_back(std::move(n));
    }
    std::vector<double> parent_area(tree.levels.size() + 1, 0.0), child_area(tree.levels.size() + 1, 0.0);
    for (std::size_t idx = 0; idx < tree.nodes.size(); ++idx) {
        const int m = tree.nodes[idx].level;
        if (m >= tree.depth()) continue;
        const LevelMap& lvl = tree.level(m);
        const SingularSet zset{lvl.k, profile.a};
        const double r_min = opt.r_min_factor * lvl.s * lvl.eps;
        const double parent_radius = tree.nodes[idx].radius;
        const double cap = std::min(1.0, std::ldexp(1.0, -(m + 2)) / parent_radius); // r <= 2^-(m+1) at level m+1
        SplitStream rng(opt.seed, idx);
        const double sx = rng.uniform(), sy = rng.uniform();
        std::vector<Ball> kids;
        const int budget = opt.child_cap * opt.darts_per_child;
        for (int d = 1; d <= budget && static_cast<int>(kids.size()) < opt.child_cap; ++d) {
            const double u = std::fmod(radical_inverse(d, 2) + sx, 1.0);
            const double v = std::fmod(radical_inverse(d, 3) + sy, 1.0);
            const double rr = std::sqrt(u), th = 2.0 * std::numbers::pi * v;
            const Vec2 w(rr * std::cos(th), rr * std::sin(th));
            const double rho = detail::child_radius(lvl, zset, w, cap, kids, opt);
            if (rho < r_min) continue;
            kids.push_back({w, rho});
        }
        parent_area[m + 1] += parent_radius * parent_radius;
        for (std::size_t j = 0; j < kids.size(); ++j) {
            CoverNode c;
            c.local_center = kids[j].center;
            c.ratio = kids[j].radius;
            c.radius = parent_radius * kids[j].radius;
            c.center = tree.nodes[idx].center + parent_radius * kids[j].center;
            c.level = m + 1;
            c.multi_index = tree.nodes[idx].multi_index;
            c.multi_index.push_back(static_cast<int>(j));
            c.k = tree.level(m + 1).k;
            c.region = kids[j].center.norm() < profile.a ? CoverRegion::inner : CoverRegion::annulus;
            c.parent = static_cast<int>(idx);
            child_area[m + 1] += c.radius * c.radius;
            tree.nodes[idx].children.push_back(static_cast<int>(tree.nodes.size()));
            tree.nodes.push_back(std::move(c));
        }
    }
    for (int m = 2; m <= tree.depth(); ++m) {
        tree.area_fraction[m] = parent_area[m] > 0.0 ? child_area[m] / parent_area[m] : 0.0;
    }
    return tree;
}

// ---------------------------------------------------------------------------
// Evaluation

inline bool in_unit_cylinder(const Vec3& p) {
    return std::hypot(p.x(), p.y()) < 1.0 && std::abs(p.z()) < 2.0;
}

inline Vec3 to_local(const CoverNode& n, const Vec3& p) {
    return {(p.x() - n.local_center.x()) / n.ratio, (p.y() - n.local_center.y()) / n.ratio, p.z() / n.ratio};
}

inline Vec3 from_local(const CoverNode& n, const Vec3& p) {
    return {n.local_center.x() + n.ratio * p.x(), n.local_center.y() + n.ratio * p.y(), n.ratio * p.z()};
}

/// Node switches for the truncated composition; empty means no truncation.
using ActiveMask = std::vector<char>;

namespace detail {

// Apply g_q for q = level(id) .. m_max to local point p of node `id`,
// deepest first.
inline Vec3 apply_node(const CoverTree& t, int id, const Vec3& p, int m_max, const ActiveMask* active) {
    const CoverNode& n = t.nodes[id];
    if (n.level > m_max) return p;
    if (active && !(*active)[id]) return p;
    Vec3 q = p;
    for (int c : n.children) {
        const Vec3 lc = to_local(t.nodes[c], p);
        if (in_unit_cylinder(lc)) {
            q = from_local(t.nodes[c], apply_node(t, c, lc, m_max, active));
            break;
        }
    }
    return t.level(n.level).map(q);
}

} // namespace detail

/// The level-1 node whose cylinder contains z (global frame), if any.
inline std::optional<int> root_of(const CoverTree& t, const Vec3& z) {
    for (int r : t.roots) {
        if (in_unit_cylinder(to_local(t.nodes[r], z))) return r;
    }
    return std::nullopt;
}

/// h_{m_max}(z) = g_1 o ... o g_{m_max}(z); the identity for m_max = 0.
inline Vec3 eval_f_depth(const CoverTree& t, int m_max, const Vec3& z, const ActiveMask* active = nullptr) {
    if (m_max <= 0) return z;
    if (m_max > t.depth()) throw std::invalid_argument("eval_f_depth: tree is shallower than m_max");
    const auto r = root_of(t, z);
    if (!r) return z;
    const CoverNode& n = t.nodes[*r];
    return from_local(n, detail::apply_node(t, *r, to_local(n, z), m_max, active));
}

/// Chain of nodes (root first) whose cylinders contain z, down to level m_max.
inline std::vector<int> chain_of(const CoverTree& t, const Vec3& z, int m_max) {
    std::vector<int> chain;
    const auto r = root_of(t, z);
    if (!r) return chain;
    int id = *r;
    Vec3 p = to_local(t.nodes[id], z);
    chain.push_back(id);
    while (t.nodes[id].level < m_max) {
        int next = -1;
        for (int c : t.nodes[id].children) {
            const Vec3 lc = to_local(t.nodes[c], p);
            if (in_unit_cylinder(lc)) {
                next = c;
                p = lc;
                break;
            }
        }
        if (next < 0) break;
        id = next;
        chain.push_back(id);
    }
    return chain;
}

/// g_m alone: phi_J o F_{k_m} o phi_J^{-1} on level-m cylinders, identity elsewhere.
inline Vec3 eval_g_m(const CoverTree& t, int m, const Vec3& z) {
    const std::vector<int> chain = chain_of(t, z, m);
    if (chain.empty() || t.nodes[chain.back()].level != m) return z;
    Vec3 p = z;
    for (int id : chain) p = to_local(t.nodes[id], p);
    p = t.level(m).map(p);
    for (auto it = chain.rbegin(); it != chain.rend(); ++it) p = from_local(t.nodes[*it], p);
    return p;
}

/// A point given by its chain and its coordinates in the deepest node's frame.
struct ChainPoint {
    std::vector<int> chain;
    Vec3 local = Vec3::Zero();
};

struct ChainEval {
    Mat3 jacobian = Mat3::Identity(); // D h at the point (similarities cancel)
    Vec3 image_local = Vec3::Zero();  // h(z) in the root node's frame
    std::vector<Mat3> per_level;      // D F_{k_q} at the point reached, q = 1..p
    double dilatation() const { return dilatation_3d(jacobian); }
    double stretch() const { return operator_norm(jacobian); }
};

/// Pushes the point up its chain applying F_{k_q} (deepest first) and
/// accumulates D h = D F_1 ... D F_p. Inactive nodes act as the identity.
inline ChainEval eval_chain(const CoverTree& t, const ChainPoint& cp, const ActiveMask* active = nullptr) {
    if (cp.chain.empty()) throw std::invalid_argument("eval_chain: empty chain");
    ChainEval out;
    out.per_level.assign(cp.chain.size(), Mat3::Identity());
    Vec3 p = cp.local;
    for (std::size_t i = cp.chain.size(); i-- > 0;) {
        const int id = cp.chain[i];
        const CoverNode& n = t.nodes[id];
        if (!active || (*active)[id]) {
            const CylinderMap& map = t.level(n.level).map;
            out.per_level[i] = map.jacobian(p);
            p = map(p);
        }
        if (i > 0) p = from_local(n, p);
    }
    for (const Mat3& j : out.per_level) out.jacobian = out.jacobian * j;
    out.image_local = p;
    return out;
}

/// Random chain points: nodes drawn uniformly among level-m nodes, local points
/// uniformly in the unit cylinder.
inline std::vector<ChainPoint> sample_chain_points(const CoverTree& t, int m, std::size_t n, std::uint64_t seed) {
    const std::vector<int> pool = t.nodes_at(m);
    if (pool.empty()) throw std::runtime_error("sample_chain_points: no nodes at level " + std::to_string(m));
    SplitStream rng(seed, 0x5eed);
    std::vector<ChainPoint> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const int id = pool[static_cast<std::size_t>(rng.uniform() * pool.size())];
        const auto [x, y] = rng.in_unit_disk();
        out.push_back({t.chain_to(id), Vec3(x, y, rng.uniform(-2.0, 2.0))});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Dilatation ledger and truncation

/// (1 + eta(k_1)) ... (1 + eta(k_{p-1})) K for a chain of length p; 1 off the tree.
inline double dilatation_ledger(const CoverTree& t, const std::vector<int>& chain) {
    if (chain.empty()) return 1.0;
    double bound = t.K_measured();
    for (std::size_t q = 0; q + 1 < chain.size(); ++q) bound *= 1.0 + t.level(static_cast<int>(q) + 1).eta;
    return bound;
}

inline double dilatation_ledger(const CoverTree& t, const Vec3& z) {
    return dilatation_ledger(t, chain_of(t, z, t.depth()));
}

/// Truncation at -M: a node is switched off once the +1 (inner) / -1 (annulus)
/// walk over the tags of its ancestors and itself has reached -M.
struct Truncation {
    int M = 1;
    ActiveMask active;

    /// Chains that never trigger the truncation (points of A'').
    bool untouched(const std::vector<int>& chain) const {
        return std::all_of(chain.begin(), chain.end(), [&](int id) { return active[id] != 0; });
    }
};

inline Truncation apply_truncation(const CoverTree& t, int M) {
    if (M < 1) throw std::invalid_argument("apply_truncation: M must be >= 1");
    Truncation tr;
    tr.M = M;
    tr.active.assign(t.nodes.size(), 1);
    std::vector<int> walk(t.nodes.size(), 0);
    std::vector<char> hit(t.nodes.size(), 0);
    for (std::size_t i = 0; i < t.nodes.size(); ++i) { // parents precede children
        const CoverNode& n = t.nodes[i];
        if (n.parent < 0) continue;
        walk[i] = walk[n.parent] + (n.region == CoverRegion::inner ? 1 : -1);
        hit[i] = hit[n.parent] || walk[i] <= -M;
        tr.active[i] = hit[i] ? 0 : 1;
    }
    return tr;
}

// ---------------------------------------------------------------------------
// Serialization

template <class Json>
Json node_to_json(const CoverTree& t, int id) {
    const CoverNode& n = t.nodes[id];
    Json j;
    j["center"] = {n.center.x(), n.center.y()};
    j["radius"] = n.radius;
    j["level"] = n.level;
    j["k"] = n.k;
    j["region"] = n.region == CoverRegion::inner ? "inner" : (n.region == CoverRegion::annulus ? "annulus" : "root");
    Json kids = Json::array();
    for (int c : n.children) kids.push_back(node_to_json<Json>(t, c));
    j["children"] = std::move(kids);
    return j;
}

template <class Json>
Json tree_to_json(const CoverTree& t) {
    Json roots = Json::array();
    for (int r : t.roots) roots.push_back(node_to_json<Json>(t, r));
    return roots;
}

} // namespace qcfold
