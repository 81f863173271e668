#include <cmath>
#include <sstream>

#include <gtest/gtest.h>

#include "qcfold/measure.hpp"

using namespace qcfold;

TEST(Mu, Formula) {
    EXPECT_NEAR(compute_mu(0.81, 0.2, 5.0), std::exp(0.81 * std::log(0.2) + 0.19 * std::log(5.0)), 1e-15);
    EXPECT_NEAR(compute_mu(0.81, 0.2, 5.0), 0.3687, 5e-5);
    EXPECT_NEAR(compute_mu(1.0, 0.3, 7.0), 0.3, 1e-15);
    EXPECT_NEAR(compute_mu(0.6, 2.0, 2.0), 2.0, 1e-15);
    EXPECT_THROW(compute_mu(0.5, -1.0, 2.0), std::invalid_argument);
}

TEST(Mu, GeometricMeanIdentity) {
    for (double p : {0.6, 0.81, 0.95}) {
        const double elog = p * std::log(0.2) + (1 - p) * std::log(5.0);
        EXPECT_NEAR(elog, std::log(compute_mu(p, 0.2, 5.0)), 1e-15);
    }
}

TEST(Params, Admissibility) {
    const SimParams ok = SimParams::make(0.81, 0.2, 5.0);
    EXPECT_TRUE(check_params(ok).ok());
    EXPECT_NEAR(ok.c, 0.5 * (1 + 1 / ok.mu), 1e-15);
    EXPECT_FALSE(check_params(SimParams::make(0.81, 2.0, 2.0)).ok()); // b = L > 1
    EXPECT_FALSE(check_params(SimParams::make(0.4, 0.2, 5.0)).ok());  // p < 1/2
    EXPECT_FALSE(check_params(SimParams::make(0.81, 0.3, 5.0)).ok()); // b > 1/L
    EXPECT_FALSE(check_params(SimParams::make(0.81, 0.2, 5.0, 1.0 / compute_mu(0.81, 0.2, 5.0))).ok());
}

TEST(Walk, ExtremePaths) {
    SimParams all_inner = SimParams::make(1.0, 0.2, 5.0);
    SplitStream rng(1, 0);
    const YPath a = sample_Y_path(all_inner, 10, rng);
    EXPECT_NEAR(a.log_y.back(), 10 * std::log(0.2), 1e-12);
    EXPECT_EQ(a.walk.back(), 10);
    SimParams all_out = all_inner;
    all_out.p = 0.0;
    const YPath b = sample_Y_path(all_out, 10, rng);
    EXPECT_NEAR(b.log_y.back(), 10 * std::log(5.0), 1e-12);
    EXPECT_EQ(b.walk.back(), -10);
}

TEST(Walk, TruncatedProductBound) {
    // with b = 1/L, log Y_m = -walk_m log L, so Y_m < L^M until the walk reaches -M
    const SimParams s = SimParams::make(0.81, 0.2, 5.0, 0.0, 3);
    for (std::size_t i = 0; i < 2000; ++i) {
        SplitStream rng(s.seed, i);
        const YPath path = sample_Y_path(s, 60, rng);
        for (std::size_t m = 0; m < path.walk.size(); ++m) {
            EXPECT_NEAR(path.log_y[m], -path.walk[m] * std::log(s.L), 1e-12);
            if (path.walk[m] <= -s.M) break;
            EXPECT_LT(path.log_y[m], s.M * std::log(s.L));
        }
    }
}

TEST(Walk, SllnSmall) {
    const SimParams s = SimParams::make(0.81, 0.2, 5.0);
    const SllnResult r = simulate_log_mean(s, 200, 10000);
    EXPECT_LE(std::abs(r.z_score()), 3.0);
    EXPECT_EQ(r.mean, simulate_log_mean(s, 200, 10000).mean);
}

TEST(Termination, FormulaAndRecursion) {
    EXPECT_NEAR(termination_prob(0.81, 1), 0.19 / 0.81, 1e-15);
    EXPECT_NEAR(termination_prob(0.81, 1), 0.23457, 5e-6);
    double prev = 1.0;
    for (int M = 1; M < 20; ++M) {
        EXPECT_LT(termination_prob(0.81, M), prev);
        prev = termination_prob(0.81, M);
    }
    const double r = termination_prob(0.81, 1);
    EXPECT_NEAR(r, 0.19 + 0.81 * r * r, 1e-12);
    EXPECT_THROW(termination_prob(0.4, 1), std::invalid_argument);
}

TEST(Termination, SimulationMatches) {
    for (int M : {1, 2, 3}) {
        const TerminationResult t = simulate_termination(0.81, M, 20000, 7);
        const double p = termination_prob(0.81, M);
        EXPECT_NEAR(t.frequency(), p, 4.0 * std::sqrt(p * (1 - p) / 20000)) << M;
        EXPECT_EQ(t.capped, 0u);
        EXPECT_LT(t.escape_bias, 1e-100);
    }
}

TEST(Budget, Schedule) {
    const std::vector<int> s = budget_schedule(0.1, 10, 0.81);
    EXPECT_EQ(s[0], 3);
    EXPECT_GT(termination_prob(0.81, 2), 0.05);
    EXPECT_LE(termination_prob(0.81, 3), 0.05);
    for (std::size_t k = 1; k < s.size(); ++k) EXPECT_GE(s[k], s[k - 1]);
    double total = 0;
    for (int k = 1; k <= 60; ++k) total += std::ldexp(0.1, -k);
    EXPECT_NEAR(total, 0.1, 1e-15);
}

TEST(Content, BoundAndTail) {
    const double R = std::sqrt(0.5), c = 1.2, mu = 0.5;
    EXPECT_DOUBLE_EQ(content_bound(1, R, c, mu), R * R);
    for (int m = 1; m < 30; ++m) {
        EXPECT_NEAR(content_bound(m + 1, R, c, mu) / content_bound(m, R, c, mu), 0.36, 1e-14);
        EXPECT_NEAR(content_tail(m, R, c, mu), content_bound(m, R, c, mu) / (1 - 0.36), 1e-16);
        EXPECT_LT(content_bound(m + 1, R, c, mu), content_bound(m, R, c, mu));
    }
    EXPECT_LT(content_bound(30, R, c, mu), 1e-12);
    EXPECT_THROW(content_bound(1, R, 3.0, 0.5), std::invalid_argument);
    EXPECT_EQ(delta_m(3), 0.125);
}

TEST(Content, SelectionProbabilityMatchesWalks) {
    const SimParams s = SimParams::make(0.5625, 0.1, 3.5);
    for (int m = 2; m <= 6; ++m) {
        const double p = selection_probability(s, m);
        const double lim = (m - 1) * std::log(s.c * s.mu);
        const int n = 20000;
        int hits = 0;
        for (int i = 0; i < n; ++i) {
            SplitStream rng(s.seed + m, i);
            hits += sample_Y_path(s, m - 1, rng).log_y.back() <= lim + 1e-12;
        }
        EXPECT_NEAR(static_cast<double>(hits) / n, p, 3.0 * std::sqrt(p * (1 - p) / n) + 1e-12) << m;
    }
    EXPECT_DOUBLE_EQ(selection_probability(s, 1), 1.0);
}

TEST(Content, CsvColumns) {
    std::ostringstream os;
    ContentLevel row;
    row.m = 2;
    row.delta = 0.25;
    write_content_csv(os, {row});
    EXPECT_EQ(os.str().substr(0, os.str().find('\n')), "m,delta_m,bound,tail,empirical_content,selected_fraction");
}
