#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "qcfold/calibration.hpp"

using namespace qcfold;

namespace {

const ProfileParams kProfile{0.5, 0.1, 0.0};

Vec3 cyl(double r, double th, double t) { return {r * std::cos(th), r * std::sin(th), t}; }

} // namespace

TEST(Calibration, EpsilonGoldenMonotoneAndReplayed) {
    const SampleGrid grid{32, 32, 5};
    const EpsilonCalibration e = calibrate_epsilon(64, kProfile, 0.1, grid);
    EXPECT_GE(e.eps, std::ldexp(1.0, -12));
    const EpsilonCalibration loose = calibrate_epsilon(64, kProfile, 0.5, grid);
    const EpsilonCalibration tight = calibrate_epsilon(64, kProfile, 0.05, grid);
    EXPECT_GE(loose.eps, tight.eps);
    // replay
    const WedgeConfig cfg(64, e.eps, 1.0, kProfile);
    const SweepResult slab = sweep(CylinderMap(cfg), slab_samples(cfg, grid, [&](double, double) { return e.eps; }));
    EXPECT_TRUE(slab.report.orientation_ok());
    EXPECT_LE(slab.report.max_dilatation() - 1.0, 1.1 * e.surface_eta + 1e-12);
    EXPECT_LE(slab.report.max_stretch(), 2.0 * e.surface_stretch);
    EXPECT_TRUE(injectivity_scan(slab.domain, slab.images).ok());
}

TEST(Calibration, SFoundForK16AndDownwardClosed) {
    const SampleGrid grid{32, 32, 5};
    const EpsilonCalibration e = calibrate_epsilon(16, kProfile, 0.1, grid);
    const WedgeConfig draft(16, e.eps, 1.0, kProfile);
    const SCalibration s = calibrate_s(draft, e.slab, 0.1, grid);
    EXPECT_GT(s.s, 0.0);
    EXPECT_TRUE(s.report.orientation_ok());
    EXPECT_TRUE(s.injectivity.ok());
    EXPECT_LE(s.report.max_dilatation(), s.k_target);
    EXPECT_LE(s.report.max_stretch(), s.l_target);
    // one halving still passes every check
    const WedgeConfig half = draft.with_s(s.s / 2);
    const CylinderMap map(half);
    SweepResult all = sweep(map, interpolation_samples(half, grid));
    all.append(sweep(map, slab_samples(half, grid, [&](double x, double y) { return half.phi(x, y); })));
    EXPECT_TRUE(all.report.orientation_ok());
    EXPECT_EQ(all.escaped, 0u);
    EXPECT_LE(all.report.max_dilatation(), s.k_target);
    EXPECT_LE(all.report.max_stretch(), s.l_target);
    EXPECT_TRUE(injectivity_scan(all.domain, all.images).ok());
    // the top face of S1 meets the bottom of S2
    const WedgeConfig cal = draft.with_s(s.s);
    const CylinderMap cmap(cal);
    for (int i = 1; i < 20; ++i) {
        const Vec3 p = cyl(i / 20.0, 0.5 * cal.wedge_angle(), 1.0);
        EXPECT_LE((cmap.eval_Fs_S1(p.x(), p.y(), 1.0) - cmap.eval_Fs_S2(p.x(), p.y(), 1.0)).norm(), 1e-12);
    }
}

TEST(Calibration, SmallKHasNoAssembledMap) {
    const SampleGrid grid{16, 16, 5};
    const EpsilonCalibration e = calibrate_epsilon(8, kProfile, 0.1, grid);
    EXPECT_THROW(calibrate_s(WedgeConfig(8, e.eps, 1.0, kProfile), e.slab, 0.1, grid), CalibrationError);
}

TEST(KSchedule, ChoosesFirstKBelowLevelTarget) {
    KSchedule sched(kProfile, SampleGrid{16, 16, 5});
    const int k1 = sched.choose_k(1);
    EXPECT_LT(sched.record(k1).eta, 0.5);
    EXPECT_TRUE(sched.record(k1).assembled());
    for (int k = 4; k < k1; k *= 2) {
        const KRecord& r = sched.record(k);
        EXPECT_TRUE(!r.assembled() || r.eta >= 0.5) << k;
    }
    const int k2 = sched.choose_k(2);
    EXPECT_GE(k2, k1);
    EXPECT_LT(sched.record(k2).eta, 0.25);
    EXPECT_THROW(sched.choose_k(0), std::invalid_argument);
    EXPECT_THROW(sched.choose_k(30, 64), CalibrationError);
}
