#pragma once

// Numerical differential analysis: finite-difference Jacobians, the 3D and
// surface dilatation, the column criterion for near-conformal matrices, and
// grid scans for Lipschitz bounds, injectivity and the graph property.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "rng.hpp"
#include "wedge_surface.hpp"

namespace qcfold {

class OrientationViolation : public std::runtime_error {
public:
    explicit OrientationViolation(double det)
        : std::runtime_error("orientation violation: det = " + std::to_string(det)), det_(det) {}
    double det() const { return det_; }

private:
    double det_;
};

/// Central differences; column i = (f(z + h e_i) - f(z - h e_i)) / 2h.
template <class Map>
Mat3 numeric_jacobian(Map&& f, const Vec3& z, double step) {
    if (!(step > 0.0)) throw std::invalid_argument("numeric_jacobian: step must be > 0");
    Mat3 j;
    for (int i = 0; i < 3; ++i) {
        Vec3 zp = z, zm = z;
        zp[i] += step;
        zm[i] -= step;
        j.col(i) = (f(zp) - f(zm)) / (zp[i] - zm[i]);
    }
    return j;
}

/// Jacobian of a piecewise-smooth map. The step is halved until all six
/// stencil points lie in the same piece as z; returns nullopt when the
/// stencil cannot be made one-sided above `min_step`.
template <class Map, class Piece>
std::optional<Mat3> piecewise_jacobian(Map&& f, Piece&& piece, const Vec3& z, double step,
                                       double min_step = 1e-12) {
    const auto home = piece(z);
    for (double h = step; h >= min_step; h *= 0.5) {
        bool same = true;
        for (int i = 0; i < 3 && same; ++i) {
            Vec3 zp = z, zm = z;
            zp[i] += h;
            zm[i] -= h;
            same = piece(zp) == home && piece(zm) == home;
        }
        if (same) return numeric_jacobian(f, z, h);
    }
    return std::nullopt;
}

inline double operator_norm(const Mat3& j) {
    return Eigen::JacobiSVD<Mat3>(j).singularValues()(0);
}

/// ||J||^3 / det J with the operator norm.
inline double dilatation_3d(const Mat3& j) {
    const double det = j.determinant();
    if (!(det > 0.0)) throw OrientationViolation(det);
    const double n = operator_norm(j);
    return n * n * n / det;
}

/// sigma_1 / sigma_2 of a full-rank 3x2 differential.
inline double surface_dilatation(const Mat32& j) {
    const Eigen::Vector2d sv = Eigen::JacobiSVD<Mat32>(j).singularValues();
    if (!(sv(1) > 0.0) || sv(1) <= 1e-300 * sv(0)) {
        throw std::domain_error("surface_dilatation: rank-deficient differential");
    }
    return sv(0) / sv(1);
}

struct MatrixQcDelta {
    double norm_deviation = 0.0; // max_i | |A_i| - R |
    double max_inner = 0.0;      // max_{i != j} |<A_i, A_j>|
};

template <class Derived>
MatrixQcDelta matrix_qc_delta(const Eigen::MatrixBase<Derived>& a, double scale) {
    MatrixQcDelta d;
    for (Eigen::Index i = 0; i < a.cols(); ++i) {
        d.norm_deviation = std::max(d.norm_deviation, std::abs(a.col(i).norm() - scale));
        for (Eigen::Index k = i + 1; k < a.cols(); ++k) {
            d.max_inner = std::max(d.max_inner, std::abs(a.col(i).dot(a.col(k))));
        }
    }
    return d;
}

struct RegionStats {
    double max_dilatation = 1.0;
    double max_stretch = 0.0;
    double min_jacobian_det = std::numeric_limits<double>::infinity();
    std::size_t samples = 0;
    std::size_t violations = 0; // det <= 0

    void add(const Mat3& j) {
        ++samples;
        const double det = j.determinant();
        min_jacobian_det = std::min(min_jacobian_det, det);
        const double n = operator_norm(j);
        max_stretch = std::max(max_stretch, n);
        if (det > 0.0) {
            max_dilatation = std::max(max_dilatation, n * n * n / det);
        } else {
            ++violations;
        }
    }

    void merge(const RegionStats& o) {
        max_dilatation = std::max(max_dilatation, o.max_dilatation);
        max_stretch = std::max(max_stretch, o.max_stretch);
        min_jacobian_det = std::min(min_jacobian_det, o.min_jacobian_det);
        samples += o.samples;
        violations += o.violations;
    }
};

/// Sampled Jacobian statistics, overall and per region.
struct DilatationReport {
    RegionStats total;
    std::map<std::string, RegionStats> per_region;
    std::size_t discarded = 0;

    void add(const std::string& region, const Mat3& j) {
        total.add(j);
        per_region[region].add(j);
    }

    void merge(const DilatationReport& o) {
        total.merge(o.total);
        for (const auto& [name, stats] : o.per_region) per_region[name].merge(stats);
        discarded += o.discarded;
    }

    double max_dilatation() const { return total.max_dilatation; }
    double max_stretch() const { return total.max_stretch; }
    double min_jacobian_det() const { return total.min_jacobian_det; }
    std::size_t samples() const { return total.samples; }
    bool orientation_ok() const { return total.violations == 0 && total.samples > 0; }
};

// ---------------------------------------------------------------------------
// Scans

/// Max of |f(u) - f(v)| / |u - v| over random pairs drawn by `sample`.
template <class Map, class Sampler>
double lipschitz_scan(Map&& f, Sampler&& sample, std::size_t n_pairs, std::uint64_t seed) {
    SplitStream rng(seed, 0);
    double best = 0.0;
    for (std::size_t i = 0; i < n_pairs; ++i) {
        const Vec3 u = sample(rng), v = sample(rng);
        const double d = (u - v).norm();
        if (d <= 0.0) continue;
        best = std::max(best, (f(u) - f(v)).norm() / d);
    }
    return best;
}

struct CollisionReport {
    std::size_t points = 0;
    std::size_t collisions = 0;
    double min_image_separation = std::numeric_limits<double>::infinity(); // over qualifying pairs
    bool ok() const { return collisions == 0; }
};

namespace detail {

struct CellKey {
    std::int64_t x, y, z;
    bool operator==(const CellKey&) const = default;
};

struct CellKeyHash {
    std::size_t operator()(const CellKey& c) const noexcept {
        std::uint64_t h = splitmix64(static_cast<std::uint64_t>(c.x));
        h = splitmix64(h ^ static_cast<std::uint64_t>(c.y));
        return static_cast<std::size_t>(splitmix64(h ^ static_cast<std::uint64_t>(c.z)));
    }
};

template <int Dim>
CellKey cell_of(const Vec3& p, double cell) {
    return {static_cast<std::int64_t>(std::floor(p.x() / cell)),
            static_cast<std::int64_t>(std::floor(p.y() / cell)),
            Dim == 3 ? static_cast<std::int64_t>(std::floor(p.z() / cell)) : 0};
}

template <int Dim>
CollisionReport collision_scan(std::span<const Vec3> domain, std::span<const Vec3> images,
                               double min_domain_separation, double tol) {
    if (domain.size() != images.size()) throw std::invalid_argument("collision scan: size mismatch");
    CollisionReport rep;
    rep.points = images.size();
    std::unordered_map<CellKey, std::vector<std::size_t>, CellKeyHash> grid;
    grid.reserve(images.size());
    auto project = [](const Vec3& p) { return Dim == 3 ? p : Vec3(p.x(), p.y(), 0.0); };
    for (std::size_t i = 0; i < images.size(); ++i) {
        const Vec3 img = project(images[i]);
        const CellKey c = cell_of<Dim>(img, tol);
        for (int dx = -1; dx <= 1; ++dx) {
            for (int dy = -1; dy <= 1; ++dy) {
                for (int dz = (Dim == 3 ? -1 : 0); dz <= (Dim == 3 ? 1 : 0); ++dz) {
                    auto it = grid.find({c.x + dx, c.y + dy, c.z + dz});
                    if (it == grid.end()) continue;
                    for (std::size_t j : it->second) {
                        if ((domain[i] - domain[j]).norm() < min_domain_separation) continue;
                        const double sep = (img - project(images[j])).norm();
                        rep.min_image_separation = std::min(rep.min_image_separation, sep);
                        if (sep < tol) ++rep.collisions;
                    }
                }
            }
        }
        grid[c].push_back(i);
    }
    return rep;
}

} // namespace detail

/// Image pairs closer than `tol` whose preimages are at least
/// `min_domain_separation` apart.
inline CollisionReport injectivity_scan(std::span<const Vec3> domain, std::span<const Vec3> images,
                                        double min_domain_separation = 1e-3, double tol = 1e-9) {
    return detail::collision_scan<3>(domain, images, min_domain_separation, tol);
}

template <class Map>
    requires std::invocable<Map&, const Vec3&>
CollisionReport injectivity_scan(Map&& f, std::span<const Vec3> domain, double min_domain_separation = 1e-3,
                                 double tol = 1e-9) {
    std::vector<Vec3> images;
    images.reserve(domain.size());
    for (const Vec3& z : domain) images.push_back(f(z));
    return injectivity_scan(domain, images, min_domain_separation, tol);
}

/// Vertical-line single-valuedness of a parametric surface: no two images
/// share an (x, y)-projection within `tol` unless their parameters coincide.
inline CollisionReport graph_scan(std::span<const Vec3> params, std::span<const Vec3> images,
                                  double min_param_separation = 1e-12, double tol = 1e-9) {
    return detail::collision_scan<2>(params, images, min_param_separation, tol);
}

} // namespace qcfold
