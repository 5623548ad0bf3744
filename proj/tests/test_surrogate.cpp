#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "mwrl/errors.hpp"
#include "mwrl/mesh.hpp"
#include "mwrl/surrogate.hpp"

using namespace mwrl;

#ifndef MWRL_SOURCE_DIR
#define MWRL_SOURCE_DIR "."
#endif

namespace {

const std::string kData = std::string(MWRL_SOURCE_DIR) + "/data/";

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

}  // namespace

// Golden values below come from an independent script of the closed-form formulas.
TEST(Microstrip, HammerstadJensen) {
    auto m = microstrip_params(0.5, 0.5, 12.9);
    EXPECT_LT(rel(m.z0, 43.2733952947), 1e-9);
    EXPECT_LT(rel(m.eeff, 8.53524878124), 1e-9);
    m = microstrip_params(1.5, 0.5, 12.9);
    EXPECT_LT(rel(m.z0, 22.5405024697), 1e-9);
    EXPECT_LT(rel(m.eeff, 9.58401738979), 1e-9);
    m = microstrip_params(0.25, 0.5, 4.4);
    EXPECT_LT(rel(m.z0, 95.4533702578), 1e-9);
    EXPECT_LT(rel(m.eeff, 3.04991416446), 1e-9);
}

TEST(Microstrip, WiderIsLowerImpedance) {
    double prev = INFINITY;
    for (double w = 0.1; w < 5.0; w += 0.1) {
        const double z = microstrip_params(w, 0.5, 12.9).z0;
        EXPECT_LT(z, prev);
        prev = z;
    }
}

TEST(Microstrip, RejectsBadInput) {
    EXPECT_THROW(microstrip_params(0.0, 0.5, 12.9), UserError);
    EXPECT_THROW(microstrip_params(1.0, 0.5, 0.5), UserError);
}

TEST(Line, TwoSegmentReflection) {
    const std::vector<MicrostripSegment> segs{{0.365, 2.0, 0.5, 12.9}, {1.28, 3.0, 0.5, 12.9}};
    const SParamSweep s = tl_sweep(segs, {5e9, 10e9});
    EXPECT_NEAR(std::abs(s.points[0].s11), 0.52194448785, 1e-10);
    EXPECT_NEAR(std::abs(s.points[1].s11), 0.573122315559, 1e-10);
    for (const auto& p : s.points) {
        EXPECT_NEAR(std::norm(p.s11) + std::norm(p.s21), 1.0, 1e-12);
        EXPECT_EQ(p.s12, p.s21);
    }
}

TEST(Line, MatchedLineIsTransparent) {
    // Find the 50 ohm width by bisection, then a matched line has no reflection.
    double lo = 0.1, hi = 2.0;
    for (int i = 0; i < 80; ++i) {
        const double mid = 0.5 * (lo + hi);
        (microstrip_params(mid, 0.5, 12.9).z0 > 50.0 ? lo : hi) = mid;
    }
    const SParamSweep s = tl_sweep({{lo, 7.0, 0.5, 12.9}}, default_grid(10e9, 11));
    for (const auto& p : s.points) EXPECT_LT(std::abs(p.s11), 1e-9);
}

TEST(Filter, MatchesFullCouplingMatrix) {
    // Reference values from the source/load-extended matrix. That form puts an
    // inverter at each port, so both parameters come out with opposite sign.
    CoupledResonatorParams p{9e9, 9e9, 0.2, 0.15, 0.2, 0.9e9, 9e9};
    const SParamSweep s = filter_sweep(p, {8.5e9, 9e9, 9.6e9});
    const cplx s11[] = {{0.3332335548025287, 0.30851424685807666}, {0.28, 0.0}, {0.32843845706093666, -0.37038001069092363}};
    const cplx s21[] = {{-0.605274564496171, 0.65377141189657}, {0.0, 0.96}, {0.6500931015479082, 0.5764770480460117}};
    for (int i = 0; i < 3; ++i) {
        EXPECT_NEAR(std::abs(s.points[i].s11 + s11[i]), 0.0, 1e-12);
        EXPECT_NEAR(std::abs(s.points[i].s21 + s21[i]), 0.0, 1e-12);
    }
}

TEST(Filter, ButterworthCentreAndEdges) {
    // Equal external and inter-resonator coupling gives a maximally flat response:
    // |s21|^2 = 1 / (1 + (lambda / (sqrt(2) R))^4).
    CoupledResonatorParams p{9e9, 9e9, 0.2, 0.2, 0.2, 0.9e9, 9e9};
    const std::vector<double> f{7816762238.39008, 9e9, 10362346650.6617};
    const SParamSweep s = filter_sweep(p, f);
    EXPECT_NEAR(std::abs(s.points[1].s21), 1.0, 1e-12);
    EXPECT_NEAR(std::norm(s.points[0].s21), 0.5, 1e-9);
    EXPECT_NEAR(std::norm(s.points[2].s21), 0.5, 1e-9);
}

TEST(Filter, LosslessAndReciprocal) {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int t = 0; t < 50; ++t) {
        CoupledResonatorParams p;
        p.f1 = 8e9 + 2e9 * u(rng);
        p.f2 = 8e9 + 2e9 * u(rng);
        p.m0 = 0.05 + 0.4 * u(rng);
        p.m1 = 0.4 * u(rng);
        p.m2 = 0.05 + 0.4 * u(rng);
        p.f0 = std::sqrt(p.f1 * p.f2);
        p.bw = 0.1 * p.f0;
        const SParamSweep s = filter_sweep(p, default_grid(p.f0));
        for (const auto& pt : s.points) {
            EXPECT_NEAR(std::norm(pt.s11) + std::norm(pt.s21), 1.0, 1e-9);
            EXPECT_NEAR(std::norm(pt.s22) + std::norm(pt.s12), 1.0, 1e-9);
            EXPECT_EQ(pt.s12, pt.s21);
        }
    }
}

TEST(Filter, ResonatorFrequencyFromLength) {
    MeshModel m = load_mesh(kData + "filter_desk.json");
    const FilterGeometry g = filter_geometry(m);
    const double eeff = microstrip_params(1.5, 0.5, 12.9).eeff;
    const auto p = extract_filter_params(m, Material{}, FilterMap{});
    EXPECT_NEAR(p.f1, kSpeedOfLight / (2.0 * g.r1.length * 1e-3 * std::sqrt(eeff)), 1.0);
    // A 4 mm half-wave resonator on the nominal strip.
    EXPECT_LT(rel(kSpeedOfLight / (2.0 * 4e-3 * std::sqrt(eeff)), 12104780521.3), 1e-9);
}

TEST(Filter, DeskMeshGeometry) {
    const MeshModel m = load_mesh(kData + "filter_desk.json");
    const FilterGeometry g = filter_geometry(m);
    EXPECT_NEAR(g.r1.length, 5.76, 1e-9);
    EXPECT_NEAR(g.r2.length, 5.76, 1e-9);
    EXPECT_NEAR(g.gap, 0.8, 1e-9);
    const auto p = extract_filter_params(m, Material{}, FilterMap{});
    EXPECT_NEAR(p.m1, 0.4 * std::exp(-0.8 / 2.0), 1e-12);
    EXPECT_NEAR(p.f0, p.f1, 1e-3);
}

TEST(Filter, NeedsTwoResonators) {
    MeshModel m = load_mesh(kData + "filter_desk.json");
    m.polygons.erase(m.polygons.begin());
    EXPECT_THROW(extract_filter_params(m, Material{}), UserError);
}

TEST(Patch, ResonanceGolden) {
    PatchParams p;
    p.l_mm = 5.0;
    p.w_mm = 6.0;
    p.h_mm = 0.5;
    p.er = 12.9;
    EXPECT_LT(rel(patch_resonance(p), 8279341476.76), 1e-9);
}

TEST(Patch, LongerPatchResonatesLower) {
    PatchParams p{5.0, 6.0, 0.5, 12.9, 0.4, 2.0, 1.0};
    const double f = patch_resonance(p);
    p.l_mm = 5.2;
    EXPECT_LT(patch_resonance(p), f);
}

TEST(Patch, SeedMeshResonatesAboveTarget) {
    const MeshModel m = load_mesh(kData + "patch_antenna.json");
    Solver s;
    s.kind = CircuitKind::Antenna;
    s.material = Material{12.9, 3.0};
    const auto grid = default_grid(7.35e9);
    const SParamSweep sw = s.sweep(m, grid);
    for (const auto& p : sw.points) {
        EXPECT_LE(std::abs(p.s11), 1.0 + 1e-12);
        EXPECT_EQ(p.s21, cplx(0.0));
    }
    std::size_t best = 0;
    for (std::size_t i = 0; i < sw.size(); ++i)
        if (std::abs(sw.points[i].s11) < std::abs(sw.points[best].s11)) best = i;
    EXPECT_GT(grid[best], 7.35e9);
    EXPECT_LT(grid[best], 8.0e9);
    EXPECT_LT(db_mag(sw.points[best].s11), -5.0);
}

TEST(Patch, GeometryReading) {
    const MeshModel m = load_mesh(kData + "patch_antenna.json");
    const PatchGeometry g = patch_geometry(m);
    EXPECT_NEAR(g.l, 3.968, 1e-9);
    EXPECT_NEAR(g.w, 10.0, 1e-9);
    EXPECT_NEAR(g.wf, 1.022, 1e-9);
    EXPECT_NEAR(g.lf, 3.611, 1e-9);
    EXPECT_NEAR(g.inset, 0.933, 1e-9);
}

TEST(Grid, DefaultGrid) {
    const auto g = default_grid(9.3e9);
    ASSERT_EQ(g.size(), 101u);
    EXPECT_DOUBLE_EQ(g.front(), 4.65e9);
    EXPECT_DOUBLE_EQ(g[50], 9.3e9);
    EXPECT_DOUBLE_EQ(g.back(), 13.95e9);
}

TEST(Solver, LineMeshMatchesSegments) {
    const MeshModel m = load_mesh(kData + "line_stepped.json");
    const auto segs = extract_line_segments(m, Material{});
    ASSERT_EQ(segs.size(), 3u);
    EXPECT_NEAR(segs[0].w_mm, 0.364, 1e-9);
    EXPECT_NEAR(segs[0].l_mm, 2.0, 1e-9);
    EXPECT_NEAR(segs[1].w_mm, 1.28, 1e-9);
    EXPECT_NEAR(segs[1].l_mm, 3.0, 1e-9);
    Solver s;
    s.kind = CircuitKind::Line;
    const auto grid = default_grid(10e9, 21);
    const auto a = s.sweep(m, grid);
    const auto b = tl_sweep(segs, grid);
    for (std::size_t i = 0; i < grid.size(); ++i) EXPECT_EQ(a.points[i].s21, b.points[i].s21);
}

TEST(Solver, KindNames) {
    for (auto k : {CircuitKind::Filter, CircuitKind::Line, CircuitKind::Antenna})
        EXPECT_EQ(parse_circuit_kind(circuit_kind_name(k)), k);
    EXPECT_THROW(parse_circuit_kind("waveguide"), UserError);
}
