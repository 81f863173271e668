#pragma once

// Run configuration, its content hash, OBJ meshes of the folded surface and
// JSON renderings of the measurement structs.

#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "calibration.hpp"
#include "cover.hpp"
#include "cylinder_map.hpp"
#include "measure.hpp"

namespace qcfold {

using json = nlohmann::json;

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct RunConfig {
    double a = 0.5;
    double b = 0.1;
    std::vector<int> k_list;
    SampleGrid grid;
    std::uint64_t seed = 1;
    int depth = 3;
    double coverage_tol = 0.05;
    double c = 0.0; // 0: midpoint of (1, 1/mu)
    int M = 3;
    double kappa = 0.1;
    std::string out_dir = "out";
    std::optional<double> L;   // overrides the measured Lipschitz constant in measure
    KRule k_rule = KRule::list;
    int child_cap = 16;
    double lambda = 0.5;
    double eta_tol = 0.1;
    double slack = 0.1;

    ProfileParams profile() const { return {a, b, L.value_or(0.0)}; }

    json to_json() const {
        json j;
        j["a"] = a;
        j["b"] = b;
        j["k_list"] = k_list;
        j["grid"] = {grid.n_r, grid.n_theta, grid.n_t};
        j["seed"] = seed;
        j["depth"] = depth;
        j["coverage_tol"] = coverage_tol;
        j["c"] = c;
        j["M"] = M;
        j["kappa"] = kappa;
        j["out_dir"] = out_dir;
        j["L"] = L ? json(*L) : json(nullptr);
        j["k_schedule"] = k_rule == KRule::eta ? "eta" : "list";
        j["child_cap"] = child_cap;
        j["lambda"] = lambda;
        j["eta_tol"] = eta_tol;
        j["slack"] = slack;
        return j;
    }
};

/// Parses and validates a config document; unknown keys are rejected.
inline RunConfig parse_config(const json& j) {
    if (!j.is_object()) throw ConfigError("config: expected a JSON object");
    static const std::vector<std::string> known = {"a", "b", "k_list", "grid", "seed", "depth", "coverage_tol", "c",
                                                   "M", "kappa", "out_dir", "L", "k_schedule", "child_cap",
                                                   "lambda", "eta_tol", "slack"};
    for (const auto& [key, _] : j.items()) {
        if (std::find(known.begin(), known.end(), key) == known.end()) throw ConfigError("config: unknown key " + key);
    }
    RunConfig c;
    try {
        c.a = j.value("a", c.a);
        c.b = j.value("b", c.b);
        c.k_list = j.value("k_list", c.k_list);
        if (j.contains("grid")) {
            const json& g = j["grid"];
            if (g.is_array()) {
                if (g.size() < 2 || g.size() > 3) throw ConfigError("config: grid must have 2 or 3 entries");
                c.grid.n_r = g[0].get<int>();
                c.grid.n_theta = g[1].get<int>();
                if (g.size() == 3) c.grid.n_t = g[2].get<int>();
            } else {
                c.grid.n_r = g.value("n_r", c.grid.n_r);
                c.grid.n_theta = g.value("n_theta", c.grid.n_theta);
                c.grid.n_t = g.value("n_t", c.grid.n_t);
            }
        }
        c.seed = j.value("seed", c.seed);
        c.depth = j.value("depth", c.depth);
        c.coverage_tol = j.value("coverage_tol", c.coverage_tol);
        c.c = j.value("c", c.c);
        c.M = j.value("M", c.M);
        c.kappa = j.value("kappa", c.kappa);
        c.out_dir = j.value("out_dir", c.out_dir);
        if (j.contains("L") && !j["L"].is_null()) c.L = j["L"].get<double>();
        const std::string rule = j.value("k_schedule", std::string("list"));
        if (rule == "eta") {
            c.k_rule = KRule::eta;
        } else if (rule == "list") {
            c.k_rule = KRule::list;
        } else {
            throw ConfigError("config: k_schedule must be \"list\" or \"eta\"");
        }
        c.child_cap = j.value("child_cap", c.child_cap);
        c.lambda = j.value("lambda", c.lambda);
        c.eta_tol = j.value("eta_tol", c.eta_tol);
        c.slack = j.value("slack", c.slack);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    if (c.k_list.empty()) throw ConfigError("config: k_list must not be empty");
    for (int k : c.k_list) {
        if (k < 4) throw ConfigError("config: every k must be >= 4");
    }
    try {
        c.profile().validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    if (c.grid.n_r < 1 || c.grid.n_theta < 1 || c.grid.n_t < 1) throw ConfigError("config: grid sizes must be >= 1");
    if (c.depth < 1) throw ConfigError("config: depth must be >= 1");
    if (!(c.coverage_tol > 0.0 && c.coverage_tol < 1.0)) throw ConfigError("config: coverage_tol must lie in (0,1)");
    if (c.M < 1) throw ConfigError("config: M must be >= 1");
    if (!(c.kappa > 0.0)) throw ConfigError("config: kappa must be > 0");
    if (c.child_cap < 1) throw ConfigError("config: child_cap must be >= 1");
    return c;
}

inline RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError("config: " + path + ": " + e.what());
    }
    return parse_config(j);
}

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : bytes) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// Hash of the canonical (sorted-key, defaults-filled) form of the config.
/// out_dir is left out: it places results but does not change them.
inline std::string config_hash(const RunConfig& c) {
    json j = c.to_json();
    j.erase("out_dir");
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(j.dump())));
    return buf;
}

// ---------------------------------------------------------------------------
// Mesh

struct Mesh {
    std::vector<Vec3> vertices;
    std::vector<Vec3> preimages;
    std::vector<std::array<int, 3>> faces; // 0-based
};

namespace detail {

class VertexWelder {
public:
    explicit VertexWelder(double tol) : tol_(tol) {}

    int add(Mesh& mesh, const Vec3& v, const Vec3& pre) {
        const auto key = [&](double x) { return static_cast<std::int64_t>(std::floor(x / tol_)); };
        const std::int64_t kx = key(v.x()), ky = key(v.y()), kz = key(v.z());
        for (std::int64_t dx = -1; dx <= 1; ++dx) {
            for (std::int64_t dy = -1; dy <= 1; ++dy) {
                for (std::int64_t dz = -1; dz <= 1; ++dz) {
                    auto it = cells_.find(CellKey{kx + dx, ky + dy, kz + dz});
                    if (it == cells_.end()) continue;
                    for (int id : it->second) {
                        if ((mesh.vertices[id] - v).norm() <= tol_) return id;
                    }
                }
            }
        }
        const int id = static_cast<int>(mesh.vertices.size());
        mesh.vertices.push_back(v);
        mesh.preimages.push_back(pre);
        cells_[CellKey{kx, ky, kz}].push_back(id);
        return id;
    }

private:
    double tol_;
    std::unordered_map<CellKey, std::vector<int>, CellKeyHash> cells_;
};

} // namespace detail

/// Image of G over all 2k half-wedges on an n_r x n_theta polar grid per
/// half-wedge (radii i/(n_r-1), angles j/(n_theta-1) * pi/k), welded at `weld`.
inline Mesh surface_mesh(const WedgeConfig& cfg, int n_r, int n_theta, double weld = 1e-9) {
    if (n_r < 2 || n_theta < 2) throw std::invalid_argument("surface mesh: grid must be at least 2 x 2");
    const CylinderMap map(cfg);
    Mesh mesh;
    detail::VertexWelder welder(weld);
    std::vector<int> ids(static_cast<std::size_t>(n_r) * n_theta);
    const int k = cfg.k();
    for (int w = 0; w < 2 * k; ++w) {
        // a point strictly inside half-wedge w selects its frame
        const double mid = (w + 0.5) * cfg.wedge_angle();
        const WedgeFrame frame = map.frame_of(Vec3(0.5 * std::cos(mid), 0.5 * std::sin(mid), 0.0));
        for (int i = 0; i < n_r; ++i) {
            const double r = static_cast<double>(i) / (n_r - 1);
            for (int j = 0; j < n_theta; ++j) {
                const double th = static_cast<double>(j) / (n_theta - 1) * cfg.wedge_angle();
                const double x = r * std::cos(th), y = r * std::sin(th);
                const Vec3 g = detail::surface_frame(cfg, x, y).value;
                ids[static_cast<std::size_t>(i) * n_theta + j] =
                    welder.add(mesh, frame.from_base(g), frame.from_base(Vec3(x, y, 0.0)));
            }
        }
        auto at = [&](int i, int j) { return ids[static_cast<std::size_t>(i) * n_theta + j]; };
        auto emit = [&](int p, int q, int r) {
            if (p == q || q == r || p == r) return;
            if (frame.reflected) std::swap(q, r);
            mesh.faces.push_back({p, q, r});
        };
        for (int i = 0; i + 1 < n_r; ++i) {
            for (int j = 0; j + 1 < n_theta; ++j) {
                emit(at(i, j), at(i + 1, j), at(i + 1, j + 1));
                emit(at(i, j), at(i + 1, j + 1), at(i, j + 1));
            }
        }
    }
    return mesh;
}

inline void write_obj(std::ostream& os, const Mesh& mesh) {
    char buf[128];
    for (const Vec3& v : mesh.vertices) {
        std::snprintf(buf, sizeof buf, "v %.9g %.9g %.9g\n", v.x(), v.y(), v.z());
        os << buf;
    }
    for (const auto& f : mesh.faces) os << "f " << f[0] + 1 << ' ' << f[1] + 1 << ' ' << f[2] + 1 << '\n';
}

// ---------------------------------------------------------------------------
// JSON views

inline json to_json(const RegionStats& s) {
    return {{"max_dilatation", s.max_dilatation},
            {"max_stretch", s.max_stretch},
            {"min_jacobian_det", s.min_jacobian_det},
            {"samples", s.samples},
            {"violations", s.violations}};
}

inline json to_json(const DilatationReport& r) {
    json j = to_json(r.total);
    json regions = json::object();
    for (const auto& [name, stats] : r.per_region) regions[name] = to_json(stats);
    j["region"] = std::move(regions);
    j["discarded"] = r.discarded;
    return j;
}

inline json to_json(const KRecord& r) {
    json j;
    j["k"] = r.k;
    j["eps"] = r.eps.eps;
    j["eps_exponent"] = r.eps.exponent;
    j["surface_eta"] = r.eps.surface_eta;
    j["eta"] = r.eta;
    j["slab"] = to_json(r.eps.slab);
    if (r.s) {
        j["s"] = r.s->s;
        j["s_exponent"] = r.s->exponent;
        j["K"] = r.K;
        j["L"] = r.L;
        j["L_annulus"] = r.L_annulus;
        j["full"] = to_json(r.s->report);
    } else {
        j["s"] = nullptr;
        j["s_error"] = r.s_error;
    }
    return j;
}

inline json to_json(const ContentLevel& c) {
    return {{"m", c.m},
            {"delta_m", c.delta},
            {"bound", c.bound},
            {"tail", c.tail},
            {"empirical_content", c.empirical},
            {"selected_fraction", c.selected_fraction},
            {"nodes", c.nodes},
            {"selected", c.selected},
            {"diameter_violations", c.diameter_violations}};
}

} // namespace qcfold
