#include <gtest/gtest.h>

#include "conicwave/geodesic.hpp"

using namespace cwave;

namespace {
ConnectOptions wide_opts(double eps = 0.0) {
    ConnectOptions o;
    if (eps > 0) {
        o.eps_geo = eps;
    } else {
        o.check_trust = false;
    }
    return o;
}
}  // namespace

TEST(Flow, EuclideanStraightLine) {
    auto s = make_euclidean();
    FlowState st = make_flow_state(s, Point::cap(0.0, 0.0), VecN(1.0, 0.0), false);
    FlowResult r = hamilton_flow(s, st, 2.0);
    ASSERT_TRUE(r.ok);
    ASSERT_EQ(r.state.chart, Chart::Cap);
    EXPECT_NEAR(r.state.q[0], 2.0, 1e-10);
    EXPECT_NEAR(r.state.q[1], 0.0, 1e-10);
}

TEST(Flow, EnergyConservationAcrossCharts) {
    auto s = make_short_range_cone();
    CotangentState cs;
    cs.z = Point::collar(3.0, 0.4);
    cs.p = VecN(-0.8, 1.1);
    const double E0 = hamiltonian(s, cs);
    FlowState st = make_flow_state(s, cs.z, cs.p, false);
    FlowResult r = hamilton_flow(s, st, 4.0);
    ASSERT_TRUE(r.ok);
    EXPECT_LT(r.energy_drift, 1e-8);
    EXPECT_GT(E0, 0.0);
}

TEST(Flow, ConeRadialDataStaysRadial) {
    auto s = make_cone(0.8);
    FlowState st = make_flow_state(s, Point::collar(2.0, 1.0), VecN(1.0, 0.0), false);
    FlowResult r = hamilton_flow(s, st, 3.0);
    ASSERT_TRUE(r.ok);
    EXPECT_NEAR(r.state.q[0], 5.0, 1e-10);
    EXPECT_NEAR(r.state.q[1], 1.0, 1e-12);
}

TEST(Flow, Reversibility) {
    auto s = make_long_range_cone();
    Point z = Point::collar(4.0, 2.0);
    VecN p(0.7, -2.1);
    FlowState st = make_flow_state(s, z, p, false);
    FlowResult fwd = hamilton_flow(s, st, 1.5);
    ASSERT_TRUE(fwd.ok);
    FlowState back = fwd.state;
    back.p *= -1.0;
    FlowResult rtn = hamilton_flow(s, back, 1.5);
    ASSERT_TRUE(rtn.ok);
    ASSERT_EQ(rtn.state.chart, Chart::Collar);
    EXPECT_NEAR(rtn.state.q[0], z.q[0], 1e-7);
    EXPECT_NEAR(wrap_angle(rtn.state.q[1] - z.q[1]), 0.0, 1e-7);
}

TEST(Flow, ChartSwitchPreservesEnergy) {
    auto s = make_euclidean();
    // Launch inward from the collar so the flow crosses into the cap.
    FlowState st = make_flow_state(s, Point::collar(5.0, 0.0), VecN(-1.0, 0.3), false);
    FlowResult r = hamilton_flow(s, st, 3.0);
    ASSERT_TRUE(r.ok);
    EXPECT_EQ(r.state.chart, Chart::Cap);
    EXPECT_LT(r.energy_drift, 1e-9);
}

TEST(Connect, EuclideanSegment) {
    auto s = make_euclidean();
    // z' = (3,4) sits at r = 5, i.e. in the collar chart.
    auto sol = connect(s, Point::cap(0.0, 0.0), Point::collar(5.0, std::atan2(4.0, 3.0)),
                       wide_opts());
    EXPECT_NEAR(sol.d, 5.0, 1e-9);
    EXPECT_NEAR(sol.phase(), 12.5, 1e-8);
    // grad_{z'} Phi = z' - z: radial of length 5 in the collar frame.
    EXPECT_NEAR(sol.p1[0], 5.0, 1e-8);
    EXPECT_NEAR(sol.p1[1], 0.0, 1e-8);
    EXPECT_LT(sol.speed_drift, 1e-8);
}

TEST(Connect, EuclideanCapPair) {
    auto s = make_euclidean();
    auto sol = connect(s, Point::cap(0.1, -0.2), Point::cap(1.6, 1.8), wide_opts());
    EXPECT_NEAR(sol.d, std::hypot(1.5, 2.0), 1e-9);
    EXPECT_NEAR(sol.p1[0], 1.5, 1e-8);
    EXPECT_NEAR(sol.p1[1], 2.0, 1e-8);
}

TEST(Connect, ConeCosineRulePair) {
    auto s = make_cone(0.8);
    auto sol = connect(s, Point::collar(1.0, 0.0), Point::collar(1.0, 1.0), wide_opts(1.0));
    const double d_ref = std::sqrt(2.0 - 2.0 * std::cos(0.8));
    EXPECT_NEAR(sol.d, d_ref, 1e-9 * d_ref);
    EXPECT_NEAR(sol.phase(), 0.303293, 1.5e-6);
    EXPECT_LT(eikonal_residual(s, sol), 1e-7 * (1.0 + sol.phase()));
    // Closed-form oracle for the full covector data.
    auto cg = cone_connect(0.8, 1.0, 0.0, 1.0, 1.0);
    ASSERT_TRUE(cg.valid);
    EXPECT_NEAR(sol.p0[0], cg.p0[0], 1e-8);
    EXPECT_NEAR(sol.p0[1], cg.p0[1], 1e-8);
    EXPECT_NEAR(sol.p1[0], cg.p1[0], 1e-8);
    EXPECT_NEAR(sol.p1[1], cg.p1[1], 1e-8);
}

TEST(Connect, ConeRadialPairMidpoint) {
    auto s = make_cone(0.8);
    auto sol = connect(s, Point::collar(2.0, 0.5), Point::collar(4.0, 0.5), wide_opts(0.3));
    EXPECT_NEAR(sol.d, 2.0, 1e-10);
    Point mid = geodesic_point(s, sol, 0.5);
    EXPECT_NEAR(radial_coordinate(s, mid), 3.0, 1e-9);
}

TEST(Connect, SymmetryOfDistance) {
    auto s = make_long_range_cone();
    Point a = Point::collar(3.0, 0.2), b = Point::collar(4.5, 0.45);
    auto s1 = connect(s, a, b, wide_opts(0.5));
    auto s2 = connect(s, b, a, wide_opts(0.5));
    EXPECT_NEAR(s1.d, s2.d, 1e-9 * s1.d);
    // Reversal: gamma_{b->a}(theta) = gamma_{a->b}(1-theta).
    Point m1 = geodesic_point(s, s1, 0.25);
    Point m2 = geodesic_point(s, s2, 0.75);
    EXPECT_NEAR(radial_coordinate(s, m1), radial_coordinate(s, m2), 1e-7);
}

TEST(Connect, TrustRegionRefusal) {
    auto s = make_cone(0.8);
    EXPECT_THROW(connect(s, Point::collar(1.0, 0.0), Point::collar(1.0, 2.5)), std::domain_error);
}

TEST(Connect, DegeneratePair) {
    auto s = make_short_range_cone();
    Point z = Point::collar(3.0, 1.0);
    auto sol = connect(s, z, z, wide_opts(0.3));
    EXPECT_DOUBLE_EQ(sol.d, 0.0);
    EXPECT_NEAR(amplitude_from_solution(s, sol), 1.0, 1e-12);
}

TEST(Connect, GaussLemmaFiniteDifferenceOrder) {
    auto s = make_short_range_cone();
    Point z = Point::collar(3.0, 0.3), zp = Point::collar(3.6, 0.55);
    auto opt = wide_opts(0.5);
    auto [gz, gzp] = grad_phase(s, z, zp, opt);
    auto phi = [&](Point a, Point b) { return connect(s, a, b, opt).phase(); };
    double errs[2];
    for (int k = 0; k < 2; ++k) {
        const double h = 0.02 / (k + 1);
        double worst = 0.0;
        for (int c = 0; c < 2; ++c) {
            Point zp_p = zp, zp_m = zp;
            zp_p.q[c] += h;
            zp_m.q[c] -= h;
            const double fd = (phi(z, zp_p) - phi(z, zp_m)) / (2 * h);
            worst = std::max(worst, std::abs(fd - gzp[c]));
        }
        errs[k] = worst;
    }
    const double order = std::log(errs[0] / errs[1]) / std::log(2.0);
    EXPECT_GE(order, 1.8);
}

TEST(Amplitude, EuclideanIsOne) {
    auto s = make_euclidean();
    Rng rng(21);
    for (int k = 0; k < 10; ++k) {
        Point z = Point::cap(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0));
        Point zp = Point::cap(z.q[0] + rng.uniform(-0.5, 0.5), z.q[1] + rng.uniform(-0.5, 0.5));
        EXPECT_NEAR(amplitude(s, z, zp, wide_opts()), 1.0, 1e-7);
    }
}

TEST(Amplitude, DiagonalIsOneOnPerturbedPresets) {
    for (const char* name : {"short-range-cone", "long-range-cone"}) {
        auto s = make_preset(name);
        for (double r : {2.0, 5.0, 11.0}) {
            Point z = Point::collar(r, 0.9);
            auto sol = connect(s, z, z, wide_opts(0.3));
            EXPECT_NEAR(amplitude_from_solution(s, sol), 1.0, 1e-6) << name;
        }
    }
}

TEST(Amplitude, ConeAmplitudeIsOneAndMatchesFdOracle) {
    auto s = make_cone(0.8);
    Point z = Point::collar(1.0, 0.0), zp = Point::collar(1.0, 1.0);
    auto opt = wide_opts(1.0);
    const double a_engine = amplitude(s, z, zp, opt);
    EXPECT_NEAR(a_engine, 1.0, 1e-6);  // flat sectors: a = 1 exactly
    const double a_fd = amplitude_fd(s, z, zp, 0.005, opt);
    EXPECT_NEAR(a_engine, a_fd, 1e-5);
}

TEST(Amplitude, PerturbedConeMatchesFdOracle) {
    auto s = make_short_range_cone();
    Point z = Point::collar(3.0, 0.1), zp = Point::collar(3.5, 0.35);
    auto opt = wide_opts(0.5);
    const double a_engine = amplitude(s, z, zp, opt);
    const double a_fd = amplitude_fd(s, z, zp, 0.005, opt);
    EXPECT_NEAR(a_engine, a_fd, 1e-5);
}

TEST(Geometry, TriangleInequalityInTrustRegion) {
    auto s = make_short_range_cone();
    auto opt = wide_opts(0.6);
    Rng rng(17);
    for (int k = 0; k < 6; ++k) {
        const double r = rng.uniform(2.0, 6.0), th = rng.uniform(0.0, 2 * kPi);
        Point a = Point::collar(r, th);
        Point b = Point::collar(r * rng.uniform(0.95, 1.05), th + rng.uniform(-0.1, 0.1));
        Point c = Point::collar(r * rng.uniform(0.95, 1.05), th + rng.uniform(-0.1, 0.1));
        const double ab = connect(s, a, b, opt).d;
        const double bc = connect(s, b, c, opt).d;
        const double ac = connect(s, a, c, opt).d;
        EXPECT_LE(ac, ab + bc + 1e-9);
    }
}

TEST(Nontrapping, EuclideanEscapes) {
    auto s = make_euclidean();
    auto rep = nontrapping_probe(s, 12, 40.0, 20.0, 99);
    EXPECT_EQ(rep.escaped, rep.total);
    EXPECT_EQ(rep.failures, 0);
    EXPECT_TRUE(rep.no_trapping_detected());
}

TEST(Nontrapping, ExactConeEscapes) {
    auto s = make_cone(0.8);
    auto rep = nontrapping_probe(s, 12, 40.0, 20.0, 100);
    EXPECT_EQ(rep.escaped, rep.total);
}

TEST(Nontrapping, NeckEquatorIsTrapped) {
    auto s = make_neck();
    NeckParams p;
    // Clairaut oracle: locate the profile's interior critical radius.
    double s_eq = 0, best = 0;
    for (double t = 2.0; t < 7.0; t += 0.0005) {
        const double R = t * neck_m(p, t);
        if (R > best) {
            best = R;
            s_eq = t;
        }
    }
    // Purely angular momentum at the equator: the orbit oscillates in the
    // potential well around the profile maximum and never escapes.
    Point z = Point::collar(s_eq, 0.0);
    MatN G;
    collar_metric_ry(s, z.q, G, nullptr);
    VecN pcov(0.0, std::sqrt(G(1, 1)));  // unit speed, purely angular
    FlowState st = make_flow_state(s, z, pcov, false);
    double t_esc = -1.0;
    FlowResult r = hamilton_flow(s, st, 60.0, OdeOptions{1e-9, 1e-9}, 15.0, &t_esc);
    ASSERT_TRUE(r.ok);
    EXPECT_LT(t_esc, 0.0) << "equatorial orbit escaped but should be trapped";
    const double r_end = r.state.chart == Chart::Collar ? r.state.q[0] : r.state.q.norm();
    EXPECT_LT(std::abs(r_end - s_eq), 1.5);
}
