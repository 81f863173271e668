#pragma once

// The probabilistic bookkeeping behind the content estimate: the factors
// X_m in {b, L}, their product Y_k and additive shadow walk, the content
// bound R^2 (c mu)^{2(m-1)}, and the truncated walk with P_M = (q/p)^M.

#include <cmath>
#include <cstdint>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "cover.hpp"
#include "rng.hpp"

namespace qcfold {

inline double compute_mu(double p, double b, double L) {
    if (!(p > 0.0 && p <= 1.0)) throw std::invalid_argument("compute_mu: p must lie in (0,1]");
    if (!(b > 0.0 && L > 0.0)) throw std::invalid_argument("compute_mu: b and L must be > 0");
    return std::exp(p * std::log(b) + (1.0 - p) * std::log(L));
}

struct SimParams {
    double p = 0.5625; // a^2
    double b = 0.1;
    double L = 5.0;
    double mu = 0.0;   // filled by make()
    double c = 0.0;    // (1 + 1/mu) / 2 unless set
    int M = 3;
    double R = std::sqrt(0.5);
    double kappa = 0.1;
    std::uint64_t seed = 1;

    /// Fills mu and, when c is not given, the midpoint of (1, 1/mu).
    static SimParams make(double p, double b, double L, double c = 0.0, int M = 3, double R = std::sqrt(0.5),
                          double kappa = 0.1, std::uint64_t seed = 1) {
        SimParams s{p, b, L, 0.0, c, M, R, kappa, seed};
        s.mu = compute_mu(p, b, L);
        if (s.c == 0.0) s.c = 0.5 * (1.0 + 1.0 / s.mu);
        return s;
    }
};

struct ParamCheck {
    std::vector<std::string> failures;
    bool ok() const { return failures.empty(); }
};

inline ParamCheck check_params(const SimParams& s) {
    ParamCheck out;
    auto need = [&](bool cond, const char* what) {
        if (!cond) out.failures.emplace_back(what);
    };
    need(s.p > 0.5 && s.p < 1.0, "p = a^2 must lie in (1/2, 1)");
    need(s.b > 0.0 && s.L > 0.0, "b and L must be positive");
    need(s.b * s.L <= 1.0 + 1e-15, "b <= 1/L");
    need(std::abs(s.mu - compute_mu(s.p, s.b, s.L)) <= 1e-12 * s.mu, "mu = b^p L^(1-p)");
    need(s.mu < 1.0, "mu < 1");
    need(s.c > 1.0 && s.c * s.mu < 1.0, "1 < c < 1/mu");
    need(s.M >= 1, "M >= 1");
    need(s.R > 0.0, "R > 0");
    need(s.kappa > 0.0, "kappa > 0");
    return out;
}

// ---------------------------------------------------------------------------
// Walks

struct YPath {
    std::vector<double> log_y; // log Y_1 .. log Y_k
    std::vector<int> walk;     // additive walk, +1 for b, -1 for L
};

/// k i.i.d. draws: X = b with probability p, else L.
inline YPath sample_Y_path(const SimParams& s, int k, SplitStream& rng) {
    if (k < 1) throw std::invalid_argument("sample_Y_path: length must be >= 1");
    YPath out;
    out.log_y.reserve(k);
    out.walk.reserve(k);
    const double lb = std::log(s.b), ll = std::log(s.L);
    double acc = 0.0;
    int w = 0;
    for (int i = 0; i < k; ++i) {
        const bool inner = rng.bernoulli(s.p);
        acc += inner ? lb : ll;
        w += inner ? 1 : -1;
        out.log_y.push_back(acc);
        out.walk.push_back(w);
    }
    return out;
}

struct SllnResult {
    double mean = 0.0;   // mean of (1/k) log Y_k
    double stddev = 0.0; // sample standard deviation of (1/k) log Y_k
    double target = 0.0; // log mu
    std::size_t paths = 0;
    double z_score() const { return (mean - target) / (stddev / std::sqrt(static_cast<double>(paths))); }
};

/// Path i uses the stream (seed, i).
inline SllnResult simulate_log_mean(const SimParams& s, int k, std::size_t n_paths) {
    SllnResult out;
    out.paths = n_paths;
    out.target = std::log(compute_mu(s.p, s.b, s.L));
    double sum = 0.0, sum2 = 0.0;
    for (std::size_t i = 0; i < n_paths; ++i) {
        SplitStream rng(s.seed, i);
        const double v = sample_Y_path(s, k, rng).log_y.back() / k;
        sum += v;
        sum2 += v * v;
    }
    const double n = static_cast<double>(n_paths);
    out.mean = sum / n;
    out.stddev = std::sqrt(std::max(0.0, (sum2 - n * out.mean * out.mean) / (n - 1.0)));
    return out;
}

inline double termination_prob(double p, int M) {
    if (!(p > 0.5 && p <= 1.0)) throw std::invalid_argument("termination_prob: p must lie in (1/2, 1]");
    if (M < 0) throw std::invalid_argument("termination_prob: M must be >= 0");
    return std::pow((1.0 - p) / p, M);
}

struct TerminationResult {
    std::size_t walks = 0;
    std::size_t terminated = 0;
    std::size_t capped = 0;   // reached the step cap undecided
    std::size_t escaped = 0;  // reached the escape height
    double escape_bias = 0.0; // upper bound on P(terminate later | escaped)
    double frequency() const { return static_cast<double>(terminated) / walks; }
};

/// Walks from 0 with +1 w.p. p until -M, the step cap, or height `escape`
/// (from which termination has probability (q/p)^(escape + M)). Walks that
/// stop undecided count as non-terminating.
inline TerminationResult simulate_termination(double p, int M, std::size_t n_walks, std::uint64_t seed,
                                              int step_cap = 10'000, int escape = 200) {
    termination_prob(p, M);
    TerminationResult out;
    out.walks = n_walks;
    out.escape_bias = termination_prob(p, escape + M);
    for (std::size_t i = 0; i < n_walks; ++i) {
        SplitStream rng(seed, i);
        int w = 0, steps = 0;
        for (; steps < step_cap; ++steps) {
            w += rng.bernoulli(p) ? 1 : -1;
            if (w <= -M || w >= escape) break;
        }
        if (w <= -M) {
            ++out.terminated;
        } else if (w >= escape) {
            ++out.escaped;
        } else {
            ++out.capped;
        }
    }
    return out;
}

/// Smallest M(k) with P_M * mass <= 2^-k kappa, for k = 1..levels.
inline std::vector<int> budget_schedule(double kappa, int levels, double p, double mass = 1.0) {
    if (!(kappa > 0.0)) throw std::invalid_argument("budget_schedule: kappa must be > 0");
    if (levels < 1) throw std::invalid_argument("budget_schedule: levels must be >= 1");
    std::vector<int> out;
    int M = 0;
    for (int k = 1; k <= levels; ++k) {
        const double budget = std::ldexp(kappa, -k);
        while (termination_prob(p, M) * mass > budget) ++M;
        out.push_back(M);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Content

inline double delta_m(int m) { return std::ldexp(1.0, -m); }

inline double content_bound(int m, double R, double c, double mu) {
    if (m < 1) throw std::invalid_argument("content_bound: m must be >= 1");
    const double cm = c * mu;
    if (!(cm < 1.0)) throw std::invalid_argument("content_bound: c mu must be < 1");
    return R * R * std::pow(cm, 2.0 * (m - 1));
}

inline double content_tail(int m, double R, double c, double mu) {
    const double cm = c * mu;
    return content_bound(m, R, c, mu) / (1.0 - cm * cm);
}

/// P(Y_{m-1} <= (c mu)^{m-1}) from the binomial law of the inner count.
inline double selection_probability(const SimParams& s, int m) {
    const int n = m - 1;
    const double lim = n * std::log(s.c * s.mu);
    double prob = 0.0;
    for (int j = 0; j <= n; ++j) {
        const double log_y = j * std::log(s.b) + (n - j) * std::log(s.L);
        if (log_y > lim + 1e-12) continue;
        prob += std::exp(std::lgamma(n + 1.0) - std::lgamma(j + 1.0) - std::lgamma(n - j + 1.0) + j * std::log(s.p) +
                         (n - j) * std::log1p(-s.p));
    }
    return prob;
}

struct ContentLevel {
    int m = 0;
    double delta = 0.0;
    double bound = 0.0;
    double tail = 0.0;
    double empirical = 0.0;         // sum over selected balls of (diam f(B) / 2)^2
    double selected_fraction = 0.0; // selected / level-m nodes
    std::size_t nodes = 0;
    std::size_t selected = 0;
    std::size_t diameter_violations = 0;
    double max_diameter_ratio = 0.0; // max diam f(B) / (2 r (c mu)^{m-1}) over selected balls
};

/// Census of level-m balls with Y_{m-1} <= (c mu)^{m-1}. Y uses X in {b, L};
/// the diameter of f(B) uses the exact per-level factors (b on inner tags,
/// the parent level's measured annulus stretch otherwise).
inline ContentLevel estimate_content(const CoverTree& t, int m, const SimParams& s) {
    if (m < 1 || m > t.depth()) throw std::invalid_argument("estimate_content: level out of range");
    ContentLevel out;
    out.m = m;
    out.delta = delta_m(m);
    out.bound = content_bound(m, s.R, s.c, s.mu);
    out.tail = content_tail(m, s.R, s.c, s.mu);
    const double cap = std::pow(s.c * s.mu, m - 1);
    for (int id : t.nodes_at(m)) {
        ++out.nodes;
        double y = 1.0, factor = 1.0;
        for (int n = id; t.nodes[n].parent >= 0; n = t.nodes[n].parent) {
            const CoverNode& node = t.nodes[n];
            const bool inner = node.region == CoverRegion::inner;
            y *= inner ? s.b : s.L;
            factor *= inner ? s.b : t.level(node.level - 1).L_annulus;
        }
        if (y > cap * (1.0 + 1e-12)) continue;
        ++out.selected;
        const double r = t.nodes[id].radius;
        const double diam = 2.0 * r * factor;
        out.max_diameter_ratio = std::max(out.max_diameter_ratio, diam / (2.0 * r * cap));
        if (diam > 2.0 * r * cap * (1.0 + 1e-12)) ++out.diameter_violations;
        out.empirical += 0.25 * diam * diam;
    }
    out.selected_fraction = out.nodes ? static_cast<double>(out.selected) / out.nodes : 0.0;
    return out;
}

inline void write_content_csv(std::ostream& os, const std::vector<ContentLevel>& rows) {
    os << "m,delta_m,bound,tail,empirical_content,selected_fraction\n";
    char buf[256];
    for (const ContentLevel& r : rows) {
        std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.m, r.delta, r.bound, r.tail,
                      r.empirical, r.selected_fraction);
        os << buf;
    }
}

} // namespace qcfold
