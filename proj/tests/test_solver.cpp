#include <gtest/gtest.h>

#include "conicwave/hamiltonian.hpp"
#include "conicwave/normal_form.hpp"

using namespace cwave;

namespace {

std::shared_ptr<const ManifoldSpec> spec_ptr(ManifoldSpec s) {
    return std::make_shared<const ManifoldSpec>(std::move(s));
}

GridField gaussian_field(std::shared_ptr<const GridDiscretization> g, double width = 1.0,
                         double r0 = 0.0, double th0 = 0.0) {
    GridField f(g);
    for (int i = 0; i < g->nr; ++i)
        for (int j = 0; j < g->ntheta; ++j) {
            const double r = g->r[size_t(i)], th = g->theta(j);
            const double x = r * std::cos(th) - r0 * std::cos(th0);
            const double y = r * std::sin(th) - r0 * std::sin(th0);
            f.at(i, j) = std::exp(-(x * x + y * y) / (2.0 * width * width));
        }
    return f;
}

GridField random_field(std::shared_ptr<const GridDiscretization> g, uint64_t seed) {
    GridField f(g);
    Rng rng(seed);
    for (auto& z : f.v) z = complexd(rng.normal(), rng.normal());
    return f;
}

}  // namespace

TEST(Grid, TotalMeasureMatchesAnalyticArea) {
    auto cone = spec_ptr(make_cone(0.8));
    auto g = make_grid(cone, 160, 64, 8.0);
    const double area = kPi * 0.8 * (64.0 - g->r_lo * g->r_lo);
    EXPECT_NEAR(g->total_weight(), area, 0.01 * area);

    auto euc = spec_ptr(make_euclidean());
    auto ge = make_grid(euc, 160, 32, 16.0);
    EXPECT_NEAR(ge->total_weight(), kPi * 256.0, 0.01 * kPi * 256.0);
}

TEST(Hamiltonian, ConstantFieldInteriorResidual) {
    auto euc = spec_ptr(make_euclidean());
    auto g = make_grid(euc, 96, 16, 8.0);
    auto H = build_hamiltonian(g);
    GridField one(g);
    for (auto& z : one.v) z = 1.0;
    GridField r = H.apply(one);
    for (int i = 0; i + 1 < g->nr; ++i)
        for (int j = 0; j < g->ntheta; ++j) EXPECT_LT(std::abs(r.at(i, j)), 1e-8);
}

TEST(Hamiltonian, WeightedSymmetryAndPositivity) {
    auto s = spec_ptr(make_short_range_cone());
    auto g = make_grid(s, 48, 16, 6.0);
    auto H = build_hamiltonian(g);
    auto f = random_field(g, 1), h = random_field(g, 2);
    const complexd a = inner(H.apply(f), h), b = inner(f, H.apply(h));
    EXPECT_LT(std::abs(a - b), 1e-12 * std::abs(a));
    const complexd q = inner(H.apply(f), f);
    EXPECT_GT(q.real(), -1e-8 * f.norm2() * f.norm2());
    EXPECT_LT(std::abs(q.imag()), 1e-10 * std::abs(q.real()));
}

TEST(Hamiltonian, ModalMatchesSparse) {
    auto s = spec_ptr(make_cone(0.8));
    auto g = make_grid(s, 40, 16, 6.0);
    auto H = build_hamiltonian(g);
    ASSERT_TRUE(H.modal);
    auto f = random_field(g, 3);
    GridField sparse = H.apply(f);
    auto modes = to_modes(f);
    std::vector<complexd> out;
    for (int m = 0; m < g->ntheta; ++m) {
        mode_apply(H, m, modes[size_t(m)], out);
        modes[size_t(m)] = out;
    }
    GridField modal = from_modes(g, modes);
    for (size_t k = 0; k < f.v.size(); ++k)
        EXPECT_LT(std::abs(sparse.v[k] - modal.v[k]), 1e-10 * (1.0 + std::abs(sparse.v[k])));
}

TEST(Hamiltonian, ConeAngularModePotential) {
    // Mode-m angular potential matches m^2/(2 rho^2 r^2) at second order.
    auto s = spec_ptr(make_cone(0.8));
    double errs[2];
    for (int k = 0; k < 2; ++k) {
        const int nth = 64 << k;
        auto g = make_grid(s, 32, nth, 6.0);
        auto H = build_hamiltonian(g);
        const int m = 3;
        double worst = 0;
        for (int i = 0; i < g->nr; ++i) {
            const double analytic = m * m / (2.0 * 0.64 * sqr(g->r[size_t(i)]));
            const double got = H.angpot[size_t(i)] * H.mode_symbol(m);
            worst = std::max(worst, std::abs(got - analytic) / analytic);
        }
        errs[k] = worst;
    }
    EXPECT_GE(std::log2(errs[0] / errs[1]), 1.8);
}

TEST(Hamiltonian, RayleighQuotientPlaneWave) {
    // Enveloped plane wave on the Euclidean disk: RQ -> |k|^2/2 at O(h^2).
    auto euc = spec_ptr(make_euclidean());
    const double kx = 2.0, ky = 1.0;
    double rq[2];
    for (int lvl = 0; lvl < 2; ++lvl) {
        auto g = make_grid(euc, 160 << lvl, 64 << lvl, 10.0);
        auto H = build_hamiltonian(g);
        GridField f(g);
        for (int i = 0; i < g->nr; ++i)
            for (int j = 0; j < g->ntheta; ++j) {
                const double r = g->r[size_t(i)], th = g->theta(j);
                const double X = r * std::cos(th), Y = r * std::sin(th);
                const double env = std::exp(-r * r / 8.0);
                f.at(i, j) = env * std::polar(1.0, kx * X + ky * Y);
            }
        rq[lvl] = (inner(H.apply(f), f) / inner(f, f)).real();
    }
    // Richardson-extrapolate the envelope-corrected limit.
    const double extrap = (4.0 * rq[1] - rq[0]) / 3.0;
    const double kinetic = 0.5 * (kx * kx + ky * ky);
    // The envelope contributes |grad env|^2-type energy ~ r^2/16 weighted.
    EXPECT_NEAR(extrap, kinetic, 0.05 * kinetic + 0.2);
    EXPECT_LT(std::abs(rq[1] - extrap), std::abs(rq[0] - extrap));
}

TEST(Propagate, IdentityAtZeroTimeAndStepRule) {
    auto euc = spec_ptr(make_euclidean());
    auto g = make_grid(euc, 64, 8, 8.0);
    auto H = build_hamiltonian(g);
    auto f = gaussian_field(g);
    EXPECT_THROW(propagate(H, f, 1.0, 3), std::invalid_argument);
    auto res = propagate(H, f, 1e-9, 1, PropagateOptions{false});
    EXPECT_LT((res.u - f).norm2(), 1e-8 * f.norm2());
}

TEST(Propagate, FreeGaussianOracle) {
    // n = 2 free evolution of exp(-|z|^2/2): |u(t,0)| = (1+t^2)^{-1/2} and
    // the L2 norm stays sqrt(pi).
    auto euc = spec_ptr(make_euclidean());
    auto g = make_grid(euc, 320, 16, 16.0);
    auto H = build_hamiltonian(g);
    auto f = gaussian_field(g);
    EXPECT_NEAR(f.norm2(), std::sqrt(kPi), 0.01 * std::sqrt(kPi));
    const double t = 1.0;
    const int steps = int(std::ceil(t * H.gershgorin / 0.5));
    auto res = propagate(H, f, t, steps, PropagateOptions{}, {0.25, 0.5, 1.0});
    EXPECT_LT(res.norm_drift, 1e-9);
    ASSERT_EQ(res.snapshots.size(), 3u);
    const double times[3] = {0.25, 0.5, 1.0};
    for (int k = 0; k < 3; ++k) {
        const double expect = 1.0 / std::sqrt(1.0 + times[k] * times[k]);
        // Innermost ring approximates z = 0.
        const double got = std::abs(res.snapshots[size_t(k)].at(0, 0));
        EXPECT_NEAR(got, expect, 0.01 * expect) << "t = " << times[k];
        EXPECT_NEAR(res.snapshots[size_t(k)].norm2(), std::sqrt(kPi), 0.01);
    }
}

TEST(Propagate, SelfConvergenceSecondOrder) {
    auto euc = spec_ptr(make_euclidean());
    auto g = make_grid(euc, 96, 8, 8.0);
    auto H = build_hamiltonian(g);
    auto f = gaussian_field(g);
    const double t = 0.5;
    const int base = 600;  // deliberately coarse time grid, rule disabled
    PropagateOptions po{false};
    auto ur = propagate(H, f, t, base * 8, po).u;
    const double e1 = (propagate(H, f, t, base, po).u - ur).norm2();
    const double e2 = (propagate(H, f, t, base * 2, po).u - ur).norm2();
    EXPECT_NEAR(e1 / e2, 4.0, 1.3);
}

TEST(Propagate, GeneralPathMatchesModal) {
    auto s = spec_ptr(make_cone(0.8));
    auto g = make_grid(s, 32, 8, 5.0);
    auto H = build_hamiltonian(g);
    auto f = gaussian_field(g, 0.8, 2.5, 0.0);
    PropagateOptions po{false};
    auto a = propagate(H, f, 0.3, 400, po).u;
    auto b = propagate_general(H, f, 0.3, 400, po).u;
    EXPECT_LT((a - b).norm2(), 1e-9 * a.norm2());
}

TEST(Sobolev, IdentityAndRoundTrip) {
    auto s = spec_ptr(make_cone(0.8));
    auto g = make_grid(s, 64, 16, 6.0);
    auto H = build_hamiltonian(g);
    auto f = random_field(g, 9);
    auto f0 = sobolev_apply(H, 0.0, f);
    EXPECT_LT((f0 - f).norm2(), 1e-14 * f.norm2());
    auto up = sobolev_apply(H, 0.5, f);
    auto back = sobolev_apply(H, -0.5, up);
    EXPECT_LT((back - f).norm2(), 1e-8 * f.norm2());
}

TEST(Sobolev, EigenfieldScaling) {
    auto s = spec_ptr(make_cone(0.8));
    auto g = make_grid(s, 64, 16, 6.0);
    auto H = build_hamiltonian(g);
    auto [lam, phi] = mode_ground_state(H, 2);
    auto scaled = sobolev_apply(H, 1.0, phi);
    const double factor = std::sqrt(1.0 + lam);
    GridField expect = phi;
    for (auto& z : expect.v) z *= factor;
    EXPECT_LT((scaled - expect).norm2(), 1e-8 * factor);
}

TEST(Sobolev, RejectsLargeExponent) {
    auto s = spec_ptr(make_cone(0.8));
    auto g = make_grid(s, 16, 8, 6.0);
    auto H = build_hamiltonian(g);
    auto f = random_field(g, 4);
    EXPECT_THROW(sobolev_apply(H, 2.5, f), std::invalid_argument);
}

TEST(Propagate, AbsorbingLayerMonitor) {
    auto euc = spec_ptr(make_euclidean());
    auto g = make_grid(euc, 128, 8, 10.0, 0.0, BoundaryKind::AbsorbingLayer);
    auto H = build_hamiltonian(g);
    auto f = gaussian_field(g);
    PropagateOptions po;
    po.enforce_step_rule = false;
    auto res = propagate(H, f, 0.2, 2000, po);
    EXPECT_LT(res.absorbed_mass, 1e-4);  // nothing reaches the layer this early
}

// --- normal form -------------------------------------------------------------

TEST(NormalForm, ConstantK00ClosedForm) {
    NormalFormInput in;
    in.delta = 0.3;
    in.nstep = 1;
    in.k00 = [](double, double) { return 1.0; };
    auto sol = normal_form_transform(in);
    // a = k00 / (2(n delta - 1)) = 1/(2(0.3-1)) = -0.714286 everywhere.
    for (int iu = 0; iu < in.nu; iu += 97)
        for (int iy = 0; iy < in.ny; iy += 7)
            EXPECT_NEAR(sol.a[sol.idx(iu, iy)], -0.71428571428571430, 1e-9);
}

TEST(NormalForm, ConstantCrossTermClosedForm) {
    NormalFormInput in;
    in.delta = 0.3;
    in.nstep = 1;
    in.k01 = [](double, double) { return 0.7; };
    auto sol = normal_form_transform(in);
    // b = c/(n delta) = 0.7/0.3.
    for (int iu = 0; iu < in.nu; iu += 101)
        EXPECT_NEAR(sol.b[sol.idx(iu, 3)], 0.7 / 0.3, 1e-9);
}

TEST(NormalForm, ZeroForcingGivesZero) {
    NormalFormInput in;
    in.delta = 0.45;
    auto sol = normal_form_transform(in);
    for (double v : sol.a) EXPECT_EQ(v, 0.0);
    for (double v : sol.b) EXPECT_EQ(v, 0.0);
}

TEST(NormalForm, ResonantDeltaRejected) {
    NormalFormInput in;
    in.delta = 0.5;
    in.nstep = 2;  // n delta = 1
    EXPECT_THROW(normal_form_transform(in), std::invalid_argument);
}

TEST(NormalForm, TransformGainsOneOrderOfDecay) {
    NormalFormInput in;
    in.delta = 0.35;
    in.nstep = 1;
    in.x_min = 1e-4;
    in.nu = 641;
    in.h11 = 1.0 / 0.64;
    in.k00 = [](double x, double y) { return 0.8 / (1.0 + x) + 0.2 * std::sin(y); };
    in.k01 = [](double x, double y) { return 0.6 / (1.0 + 2.0 * x) + 0.1 * std::cos(y); };
    in.k11 = [](double, double) { return 0.3; };
    auto sol = normal_form_transform(in);
    auto chk = normal_form_exponent_check(sol);
    EXPECT_NEAR(chk.input_cross_exponent, in.delta, 0.05);
    EXPECT_NEAR(chk.cross_exponent, 2.0 * in.delta, 0.15);
    EXPECT_NEAR(chk.nu2_exponent, 2.0 * in.delta, 0.15);
}
