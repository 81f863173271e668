#include <cmath>
#include <numbers>
#include <vector>

#include <gtest/gtest.h>

#include "qcfold/calibration.hpp"
#include "qcfold/qc_verify.hpp"
#include "qcfold/cylinder_map.hpp"

using namespace qcfold;

namespace {

const ProfileParams kProfile{0.5, 0.1, 0.0};

// k = 64 with eps and s in the calibrated range.
WedgeConfig config() { return WedgeConfig(64, 0x1.0p-10, 0.5, kProfile); }

Vec3 cyl(double r, double th, double t) { return {r * std::cos(th), r * std::sin(th), t}; }

} // namespace

TEST(Interpolation, S1Endpoints) {
    const WedgeConfig cfg = config();
    const CylinderMap map(cfg);
    for (int i = 1; i < 10; ++i) {
        const Vec3 p = cyl(0.1 * i, 0.3 * cfg.wedge_angle(), 0.0);
        const double phi = cfg.phi(p.x(), p.y());
        const Vec3 bottom = map.eval_Fs_S1(p.x(), p.y(), phi);
        EXPECT_NEAR((bottom - eval_F_slab(cfg, p.x(), p.y(), phi)).norm(), 0.0, 1e-15);
        const Vec3 top = map.eval_Fs_S1(p.x(), p.y(), 1.0);
        EXPECT_NEAR(top.x(), bottom.x(), 1e-15);
        EXPECT_NEAR(top.y(), bottom.y(), 1e-15);
        EXPECT_NEAR(top.z(), 1.0, 1e-15);
        const Vec3 mirror = map.eval_Fs_S1_prime(p.x(), p.y(), -1.0);
        EXPECT_NEAR(mirror.z(), -1.0, 1e-15);
    }
    EXPECT_THROW(map.eval_Fs_S1(0.5, 0.001, 1.5), std::domain_error);
    EXPECT_THROW(map.eval_Fs_S1_prime(0.5, 0.001, 0.5), std::domain_error);
}

TEST(Interpolation, S1LinearInT) {
    const WedgeConfig cfg = config();
    const CylinderMap map(cfg);
    const Vec3 p = cyl(0.7, 0.5 * cfg.wedge_angle(), 0.0);
    const double phi = cfg.phi(p.x(), p.y());
    const Vec3 lo = map.eval_Fs_S1(p.x(), p.y(), phi), hi = map.eval_Fs_S1(p.x(), p.y(), 1.0);
    for (double u : {0.1, 0.5, 0.9}) {
        const Vec3 mid = map.eval_Fs_S1(p.x(), p.y(), phi + u * (1.0 - phi));
        EXPECT_NEAR((mid - (lo + u * (hi - lo))).norm(), 0.0, 1e-14);
    }
}

TEST(Interpolation, IdentityOnRimAndOuterPlanes) {
    const WedgeConfig cfg = config();
    const CylinderMap map(cfg);
    for (int j = 0; j <= 10; ++j) {
        const double th = j / 10.0 * cfg.wedge_angle();
        for (double t : {0.3, 0.7, 1.0}) {
            const Vec3 z = cyl(1.0, th, t);
            EXPECT_NEAR((map.eval_Fs_S1(z.x(), z.y(), t) - z).norm(), 0.0, 1e-12);
        }
        const Vec3 top = cyl(0.6, th, 2.0);
        EXPECT_NEAR((map.eval_Fs_S2(top.x(), top.y(), 2.0) - top).norm(), 0.0, 1e-15);
        const Vec3 bot = cyl(0.6, th, -2.0);
        EXPECT_NEAR((map.eval_Fs_S2_prime(bot.x(), bot.y(), -2.0) - bot).norm(), 0.0, 1e-15);
    }
}

TEST(Interpolation, S2GluesToS1) {
    const WedgeConfig cfg = config();
    const CylinderMap map(cfg);
    for (int i = 1; i < 10; ++i) {
        const Vec3 p = cyl(0.1 * i, 0.6 * cfg.wedge_angle(), 0.0);
        EXPECT_NEAR((map.eval_Fs_S2(p.x(), p.y(), 1.0) - map.eval_Fs_S1(p.x(), p.y(), 1.0)).norm(), 0.0, 1e-12);
        EXPECT_NEAR((map.eval_Fs_S2_prime(p.x(), p.y(), -1.0) - map.eval_Fs_S1_prime(p.x(), p.y(), -1.0)).norm(), 0.0,
                    1e-12);
    }
}

TEST(Interpolation, S2LimitMatchesPlanarClosedForm) {
    // s = 0: the S2 map is ((2 - t) g(r)/r + (t - 1)) (x, y) at height t
    const WedgeConfig cfg(64, 0x1.0p-10, 0.0, kProfile);
    const CylinderMap map(cfg);
    const RadialProfile& prof = cfg.profile();
    for (double r : {0.3, 0.6, 0.8, 0.99}) {
        for (double t : {1.0, 1.25, 1.5, 2.0}) {
            const Vec3 z = cyl(r, 0.4 * cfg.wedge_angle(), t);
            const double f = (2.0 - t) * prof.g(r) / r + (t - 1.0);
            const Vec3 got = map.eval_Fs_S2(z.x(), z.y(), t);
            EXPECT_NEAR(got.x(), f * z.x(), 1e-14);
            EXPECT_NEAR(got.y(), f * z.y(), 1e-14);
            EXPECT_NEAR(got.z(), t, 1e-14);
        }
    }
}

TEST(FullMap, IdentityOnBoundaryAndOutside) {
    const CylinderMap map(config());
    SplitStream rng(11, 0);
    for (int i = 0; i < 1000; ++i) {
        const double th = 2.0 * std::numbers::pi * rng.uniform();
        const Vec3 side = cyl(1.0, th, rng.uniform(-2.0, 2.0));
        EXPECT_LE((map(side) - side).norm(), 1e-9);
        const auto [x, y] = rng.in_unit_disk();
        const Vec3 lid(x, y, rng.bernoulli(0.5) ? 2.0 : -2.0);
        EXPECT_LE((map(lid) - lid).norm(), 1e-9);
    }
    const Vec3 far(3.0, -1.0, 0.5);
    EXPECT_EQ(map(far), far);
}

TEST(FullMap, ExactScalingNearAxis) {
    const WedgeConfig cfg = config();
    const CylinderMap map(cfg);
    SplitStream rng(12, 0);
    for (int i = 0; i < 1000; ++i) {
        const double r = 0.5 * std::sqrt(rng.uniform()), th = 2.0 * std::numbers::pi * rng.uniform();
        Vec3 z = cyl(r, th, 0.0);
        const WedgeFrame f = map.frame_of(z);
        const Vec3 base = f.to_base(z);
        z.z() = rng.uniform(-1.0, 1.0) * cfg.phi(base.x(), base.y());
        EXPECT_LE((map(z) - 0.1 * z).norm(), 1e-12);
    }
}

TEST(FullMap, ReflectionAcrossWedgeEdge) {
    const WedgeConfig cfg = config();
    const CylinderMap map(cfg);
    const double alpha = cfg.wedge_angle();
    const Mat3 refl = (Mat3() << std::cos(2 * alpha), std::sin(2 * alpha), 0, std::sin(2 * alpha),
                       -std::cos(2 * alpha), 0, 0, 0, 1)
                          .finished();
    for (double t : {0.0, 0.5, -1.5}) {
        const Vec3 z = cyl(0.7, 1.3 * alpha, t);
        EXPECT_NEAR((map(z) - refl * map(refl * z)).norm(), 0.0, 1e-13);
    }
}

TEST(FullMap, RadialPlanesInvariant) {
    const WedgeConfig cfg = config();
    const CylinderMap map(cfg);
    for (int j = 0; j < 2 * cfg.k(); j += 7) {
        const double th = j * cfg.wedge_angle();
        for (double r : {0.2, 0.6, 0.9}) {
            for (double t : {-1.5, -0.5, 0.0, 0.5, 1.5}) {
                const Vec3 img = map(cyl(r, th, t));
                const double d = std::remainder(std::atan2(img.y(), img.x()) - th, 2.0 * std::numbers::pi);
                EXPECT_NEAR(d, 0.0, 1e-9) << j << ' ' << r << ' ' << t;
            }
        }
    }
}

TEST(FullMap, ContinuousAcrossInterfaces) {
    const WedgeConfig cfg = config();
    const CylinderMap map(cfg);
    SplitStream rng(13, 0);
    for (int i = 0; i < 1000; ++i) {
        const double r = std::sqrt(rng.uniform()), th = rng.uniform() * cfg.wedge_angle();
        const Vec3 p = cyl(r, th, 0.0);
        const double phi = cfg.phi(p.x(), p.y());
        const Vec3 on_graph(p.x(), p.y(), phi), on_low(p.x(), p.y(), -phi);
        EXPECT_LE((map.region_formula(RegionTag::E_plus, on_graph) - map.region_formula(RegionTag::S1, on_graph)).norm(),
                  1e-12);
        EXPECT_LE(
            (map.region_formula(RegionTag::E_minus, on_low) - map.region_formula(RegionTag::S1_prime, on_low)).norm(),
            1e-12);
        const Vec3 one(p.x(), p.y(), 1.0), minus_one(p.x(), p.y(), -1.0);
        EXPECT_LE((map.region_formula(RegionTag::S1, one) - map.region_formula(RegionTag::S2, one)).norm(), 1e-12);
        EXPECT_LE((map.region_formula(RegionTag::S1_prime, minus_one) -
                   map.region_formula(RegionTag::S2_prime, minus_one))
                      .norm(),
                  1e-12);
        // wedge edges: the two adjacent half-wedges agree
        const double t = rng.uniform(-2.0, 2.0);
        for (double edge : {0.0, cfg.wedge_angle(), 2.0 * cfg.wedge_angle()}) {
            const Vec3 a = map(cyl(r, edge + 1e-13, t)), b = map(cyl(r, edge - 1e-13, t));
            EXPECT_LE((a - b).norm(), 1e-9);
        }
    }
}

TEST(FullMap, PiecesAndJacobianConjugation) {
    const WedgeConfig cfg = config();
    const CylinderMap map(cfg);
    const double alpha = cfg.wedge_angle();
    const Vec3 z = cyl(0.7, 5.4 * alpha, 0.4);
    const Piece pc = map.piece(z);
    EXPECT_EQ(pc.half_wedge, 5);
    EXPECT_EQ(pc.region, RegionTag::S1);
    const Mat3 fd = numeric_jacobian([&](const Vec3& p) { return map(p); }, z, 1e-7);
    EXPECT_NEAR((map.jacobian(z) - fd).norm(), 0.0, 1e-5 * fd.norm());
    EXPECT_EQ(map.piece(Vec3(2, 0, 0)).half_wedge, -1);
}

TEST(FullMap, InjectiveOnGrid) {
    const WedgeConfig cfg = config();
    const CylinderMap map(cfg);
    std::vector<Vec3> dom;
    const int nr = 12, nth = 2 * cfg.k() * 2, nt = 13;
    for (int i = 0; i < nr; ++i) {
        for (int j = 0; j < nth; ++j) {
            for (int l = 0; l < nt; ++l) {
                dom.push_back(cyl((i + 0.5) / nr, (j + 0.25) * 2 * std::numbers::pi / nth, -2.0 + 4.0 * (l + 0.5) / nt));
            }
        }
    }
    EXPECT_TRUE(injectivity_scan([&](const Vec3& p) { return map(p); }, dom).ok());
}
