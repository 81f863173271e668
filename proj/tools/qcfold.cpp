// qcfold: surface | verify | calibrate | compose | measure
//
// Every subcommand reads one JSON config, writes its artifacts under out_dir,
// prints a JSON report carrying the config hash and exits 0 iff every checked
// invariant held. Usage and config errors exit with status 2.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "qcfold/qcfold.hpp"

using namespace qcfold;

namespace {

struct Options {
    std::string config_path;
    std::string out_dir;
    std::optional<std::uint64_t> seed;
    int k = 0;        // surface: which k to mesh (0: first of k_list)
    std::size_t n = 0; // Monte Carlo size override (0: default)
};

struct Run {
    RunConfig cfg;
    std::string hash;
    std::filesystem::path out;
    json report;
    std::vector<std::string> failures;

    void check(bool ok, const std::string& what) {
        if (!ok) failures.push_back(what);
    }
};

Run prepare(const Options& o) {
    Run run;
    run.cfg = load_config(o.config_path);
    if (const char* env = std::getenv("QCFOLD_SEED")) {
        try {
            run.cfg.seed = std::stoull(env);
        } catch (const std::exception&) {
            throw ConfigError(std::string("QCFOLD_SEED is not an unsigned integer: ") + env);
        }
    }
    if (o.seed) run.cfg.seed = *o.seed;
    if (!o.out_dir.empty()) run.cfg.out_dir = o.out_dir;
    run.hash = config_hash(run.cfg);
    run.out = run.cfg.out_dir;
    std::filesystem::create_directories(run.out);
    run.report["config_hash"] = run.hash;
    run.report["config"] = run.cfg.to_json();
    return run;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + path.string());
    f << text;
    if (!f) throw std::runtime_error("write failed: " + path.string());
}

int finish(Run& run, const std::string& name) {
    run.report["command"] = name;
    run.report["failures"] = run.failures;
    run.report["ok"] = run.failures.empty();
    const std::string text = run.report.dump(2) + "\n";
    write_text(run.out / (name + ".json"), text);
    std::cout << text;
    return run.failures.empty() ? 0 : 1;
}

KSchedule make_schedule(const RunConfig& c) { return KSchedule(c.profile(), c.grid, c.eta_tol, c.slack); }

// ---------------------------------------------------------------------------

int cmd_surface(const Options& o) {
    Run run = prepare(o);
    const int k = o.k ? o.k : run.cfg.k_list.front();
    const ProfileParams prof = run.cfg.profile();
    const EpsilonCalibration eps = calibrate_epsilon(k, prof, run.cfg.eta_tol, run.cfg.grid);
    const WedgeConfig wc(k, eps.eps, 1.0, prof);
    const Mesh mesh = surface_mesh(wc, run.cfg.grid.n_r, run.cfg.grid.n_theta);
    std::size_t scaled_bad = 0, rim_bad = 0;
    for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
        const Vec3& v = mesh.vertices[i];
        const Vec3& p = mesh.preimages[i];
        const double r = radius(p);
        if (r <= prof.a && (v - prof.b * p).norm() > 1e-12) ++scaled_bad;
        if (r >= 1.0 - 1e-12 && (v - p).norm() > 1e-12) ++rim_bad;
    }
    run.check(scaled_bad == 0, "surface: vertices with r <= a not scaled by b: " + std::to_string(scaled_bad));
    run.check(rim_bad == 0, "surface: rim vertices moved: " + std::to_string(rim_bad));
    std::ostringstream obj;
    obj << "# config_hash " << run.hash << " k " << k << '\n';
    write_obj(obj, mesh);
    const std::string name = "surface_k" + std::to_string(k) + ".obj";
    write_text(run.out / name, obj.str());
    run.report["k"] = k;
    run.report["eps"] = eps.eps;
    run.report["vertices"] = mesh.vertices.size();
    run.report["faces"] = mesh.faces.size();
    run.report["mesh"] = name;
    return finish(run, "surface");
}

int cmd_verify(const Options& o) {
    Run run = prepare(o);
    KSchedule sched = make_schedule(run.cfg);
    std::vector<int> ks = run.cfg.k_list;
    std::sort(ks.begin(), ks.end());
    ks.erase(std::unique(ks.begin(), ks.end()), ks.end());
    json rows = json::array();
    double prev = std::numeric_limits<double>::infinity();
    for (int k : ks) {
        const KRecord& rec = sched.record(k);
        rows.push_back(to_json(rec));
        run.check(rec.eta < prev, "verify: eta not strictly decreasing at k = " + std::to_string(k));
        prev = rec.eta;
        run.check(rec.eps.slab.orientation_ok(), "verify: orientation violated on the slab at k = " + std::to_string(k));
        run.check(rec.eps.injectivity.ok(), "verify: slab collisions at k = " + std::to_string(k));
        run.check(rec.assembled(), "verify: F_k not assembled at k = " + std::to_string(k) + ": " + rec.s_error);
        if (rec.assembled()) {
            run.check(rec.s->report.orientation_ok(), "verify: orientation violated at k = " + std::to_string(k));
            run.check(rec.s->injectivity.ok(), "verify: collisions at k = " + std::to_string(k));
        }
    }
    run.report["records"] = std::move(rows);
    return finish(run, "verify");
}

int cmd_calibrate(const Options& o) {
    Run run = prepare(o);
    KSchedule sched = make_schedule(run.cfg);
    json levels = json::array();
    for (int m = 1; m <= run.cfg.depth; ++m) {
        json lv{{"m", m}, {"eta_target", std::ldexp(1.0, -m)}};
        try {
            const int k = sched.choose_k(m);
            lv["k"] = k;
            lv["eta"] = sched.record(k).eta;
        } catch (const CalibrationError& e) {
            lv["k"] = nullptr;
            run.check(false, std::string("calibrate: level ") + std::to_string(m) + ": " + e.what());
        }
        levels.push_back(std::move(lv));
    }
    for (int k : run.cfg.k_list) sched.record(k);
    json rows = json::array();
    for (const auto& [k, rec] : sched.records()) rows.push_back(to_json(rec));
    run.report["levels"] = std::move(levels);
    run.report["records"] = std::move(rows);
    return finish(run, "calibrate");
}

struct Built {
    CoverTree tree;
    VitaliCover root;
};

Built build_tree(Run& run) {
    KSchedule sched = make_schedule(run.cfg);
    VitaliOptions vo;
    vo.lambda = run.cfg.lambda;
    vo.coverage_tol = run.cfg.coverage_tol;
    vo.seed = run.cfg.seed;
    VitaliCover root = build_vitali_cover(PlanarRegion::square(0.5), vo);
    TreeOptions to;
    to.child_cap = run.cfg.child_cap;
    to.seed = run.cfg.seed;
    CoverTree tree = build_cover_tree(root, make_levels(sched, run.cfg.depth, run.cfg.k_rule, run.cfg.k_list), to,
                                      run.cfg.profile());
    return {std::move(tree), std::move(root)};
}

json tree_summary(const CoverTree& t, const VitaliCover& root) {
    json levels = json::array();
    for (int m = 1; m <= t.depth(); ++m) {
        const LevelMap& l = t.level(m);
        std::size_t inner = 0;
        const std::vector<int> ids = t.nodes_at(m);
        for (int id : ids) inner += t.nodes[id].region == CoverRegion::inner;
        levels.push_back({{"m", m},
                          {"k", l.k},
                          {"eta", l.eta},
                          {"K", l.K},
                          {"L", l.L},
                          {"nodes", ids.size()},
                          {"inner", inner},
                          {"area_fraction", m >= 2 ? t.area_fraction[m] : root.covered_fraction}});
    }
    return {{"root_balls", root.balls.size()}, {"covered_fraction", root.covered_fraction}, {"levels", levels}};
}

int cmd_compose(const Options& o) {
    Run run = prepare(o);
    const auto [tree, root] = build_tree(run);
    run.report["tree"] = tree_summary(tree, root);
    const std::size_t n = o.n ? o.n : 1000;
    const std::vector<ChainPoint> pts = sample_chain_points(tree, tree.depth(), n, run.cfg.seed);
    double worst_ledger = 0.0, worst_ratio = 0.0, worst_dil = 0.0;
    for (const ChainPoint& cp : pts) {
        const double ledger = dilatation_ledger(tree, cp.chain);
        const double dil = eval_chain(tree, cp).dilatation();
        worst_ledger = std::max(worst_ledger, ledger);
        worst_dil = std::max(worst_dil, dil);
        worst_ratio = std::max(worst_ratio, dil / ledger);
    }
    const double eK = std::exp(1.0) * tree.K_measured();
    run.check(worst_ledger <= eK, "compose: ledger exceeds e K");
    run.check(worst_ratio <= 1.05, "compose: measured dilatation exceeds the ledger by more than 5%");
    run.report["ledger"] = {{"samples", n},       {"max_ledger", worst_ledger}, {"eK", eK},
                            {"max_dilatation", worst_dil}, {"max_ratio", worst_ratio}};
    write_text(run.out / "tree.json",
               json{{"config_hash", run.hash}, {"roots", tree_to_json<json>(tree)}}.dump() + "\n");
    run.report["tree_file"] = "tree.json";
    return finish(run, "compose");
}

int cmd_measure(const Options& o) {
    Run run = prepare(o);
    const RunConfig& c = run.cfg;
    const double p = c.a * c.a;
    std::optional<Built> built;
    double L = 0.0;
    if (c.L) {
        L = *c.L;
    } else {
        built = build_tree(run);
        L = built->tree.L_measured();
    }
    const SimParams s = SimParams::make(p, c.b, L, c.c, c.M, std::sqrt(0.5), c.kappa, c.seed);
    const ParamCheck pc = check_params(s);
    for (const std::string& f : pc.failures) run.check(false, "measure: parameter check: " + f);
    run.report["params"] = {{"p", s.p}, {"b", s.b}, {"L", s.L}, {"mu", s.mu}, {"c", s.c}, {"M", s.M}, {"R", s.R}};
    const std::size_t n = o.n ? o.n : 100000;

    if (s.mu < 1.0) {
        const SllnResult sl = simulate_log_mean(s, 200, n);
        run.check(std::abs(sl.z_score()) <= 3.0, "measure: log-mean off log mu by more than 3 sigma");
        run.report["slln"] = {{"paths", sl.paths}, {"length", 200},       {"mean", sl.mean},
                              {"target", sl.target}, {"stddev", sl.stddev}, {"z", sl.z_score()}};
    }
    if (p > 0.5) {
        const TerminationResult t = simulate_termination(p, c.M, n, c.seed);
        const double pm = termination_prob(p, c.M);
        run.check(std::abs(t.frequency() - pm) <= 0.02, "measure: termination frequency off P_M by more than 0.02");
        run.report["termination"] = {{"P_M", pm},         {"frequency", t.frequency()}, {"walks", t.walks},
                                     {"capped", t.capped}, {"escaped", t.escaped},      {"escape_bias", t.escape_bias}};
        run.report["budget"] = budget_schedule(c.kappa, c.depth, p);
    }
    if (built && pc.ok()) {
        std::vector<ContentLevel> rows;
        json levels = json::array();
        for (int m = 1; m <= built->tree.depth(); ++m) {
            rows.push_back(estimate_content(built->tree, m, s));
            const ContentLevel& r = rows.back();
            run.check(r.diameter_violations == 0, "measure: diameter bound violated at level " + std::to_string(m));
            run.check(r.empirical <= r.bound, "measure: empirical content above the bound at level " + std::to_string(m));
            levels.push_back(to_json(r));
        }
        std::ostringstream csv;
        csv << "# config_hash " << run.hash << '\n';
        write_content_csv(csv, rows);
        write_text(run.out / "content.csv", csv.str());
        run.report["content"] = std::move(levels);
        run.report["content_file"] = "content.csv";
    }
    return finish(run, "measure");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Quasiconformal folding maps: surface meshes, calibration, composition and measure experiments"};
    app.require_subcommand(1);
    Options o;
    std::uint64_t seed = 0;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", o.config_path, "JSON config file")->required()->check(CLI::ExistingFile);
        sub->add_option("--out", o.out_dir, "output directory (overrides out_dir)");
        sub->add_option("--seed", seed, "seed (overrides config and QCFOLD_SEED)");
    };
    CLI::App* surface = app.add_subcommand("surface", "OBJ mesh of the folded surface");
    add_common(surface);
    surface->add_option("--k", o.k, "number of half-wedges (default: first of k_list)")->check(CLI::Range(4, 1 << 20));
    CLI::App* verify = app.add_subcommand("verify", "eta, dilatation and injectivity of F_k over k_list");
    add_common(verify);
    CLI::App* calibrate = app.add_subcommand("calibrate", "k_m schedule and per-k calibration records");
    add_common(calibrate);
    CLI::App* compose = app.add_subcommand("compose", "cover tree and dilatation ledger");
    add_common(compose);
    compose->add_option("--samples", o.n, "chain samples");
    CLI::App* measure = app.add_subcommand("measure", "random walk and content experiments");
    add_common(measure);
    measure->add_option("--samples", o.n, "Monte Carlo paths");

    CLI11_PARSE(app, argc, argv);
    for (CLI::App* sub : app.get_subcommands()) {
        if (sub->count("--seed")) o.seed = seed;
    }
    try {
        if (*surface) return cmd_surface(o);
        if (*verify) return cmd_verify(o);
        if (*calibrate) return cmd_calibrate(o);
        if (*compose) return cmd_compose(o);
        if (*measure) return cmd_measure(o);
    } catch (const ConfigError& e) {
        std::cerr << json{{"ok", false}, {"failures", {e.what()}}}.dump() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << json{{"ok", false}, {"failures", {e.what()}}}.dump() << '\n';
        return 1;
    }
    return 2;
}
