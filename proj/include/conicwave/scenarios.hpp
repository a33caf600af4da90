#pragma once

// Named scenarios and the acceptance suite: one verdict per criterion,
// pass/fail/skipped with the measured value and pinned threshold. Component
// errors become fail-with-diagnostics; phase-guard violations become
// skipped-with-reason.

#include <chrono>
#include <functional>

#include "conicwave/cutoffs.hpp"
#include "conicwave/duhamel.hpp"
#include "conicwave/io.hpp"
#include "conicwave/lsio.hpp"
#include "conicwave/norms.hpp"
#include "conicwave/normal_form.hpp"
#include "conicwave/report.hpp"
#include "conicwave/specfile.hpp"

namespace cwave {

struct Verdict {
    std::string id;
    std::string status = "pass";  // pass | fail | skipped
    double measured = 0.0;
    double threshold = 0.0;
    std::string note;
    double runtime_s = 0.0;
};

struct AcceptanceOptions {
    double tol_scale = 1.0;
    uint64_t seed = 2026;
    bool quick = false;  // smaller grids/counts for smoke runs
};

namespace detail {

inline Verdict run_check(const std::string& id, const std::function<void(Verdict&)>& body) {
    Verdict v;
    v.id = id;
    const auto t0 = std::chrono::steady_clock::now();
    try {
        body(v);
    } catch (const ResolutionError& e) {
        v.status = "skipped";
        v.note = std::string("resolution guard: ") + e.what();
    } catch (const std::exception& e) {
        v.status = "fail";
        v.note = std::string("error: ") + e.what();
    }
    v.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return v;
}

inline void check_leq(Verdict& v, double measured, double threshold, const std::string& what) {
    v.measured = std::max(v.measured, measured);
    v.threshold = threshold;
    if (measured > threshold) {
        v.status = "fail";
        v.note += (v.note.empty() ? "" : "; ") + what + " " + fmt_g17(measured) + " > " +
                  fmt_g17(threshold);
    }
}

inline void check_geq(Verdict& v, double measured, double threshold, const std::string& what) {
    v.measured = v.measured == 0.0 ? measured : std::min(v.measured, measured);
    v.threshold = threshold;
    if (measured < threshold) {
        v.status = "fail";
        v.note += (v.note.empty() ? "" : "; ") + what + " " + fmt_g17(measured) + " < " +
                  fmt_g17(threshold);
    }
}

inline VecN euclid_embed(const ManifoldSpec& s, const Point& p) {
    if (p.chart == Chart::Cap) return p.q;
    return collar_to_cap(s, p.q);
}

inline GridField gaussian_data(std::shared_ptr<const GridDiscretization> g, double sigma,
                               double rc, double thc, double lambda = 0.0) {
    GridField f(g);
    const double xc = rc * std::cos(thc), yc = rc * std::sin(thc);
    for (int i = 0; i < g->nr; ++i)
        for (int j = 0; j < g->ntheta; ++j) {
            const double r = g->r[size_t(i)], th = g->theta(j);
            const double X = r * std::cos(th), Y = r * std::sin(th);
            const double d2 = sqr(X - xc) + sqr(Y - yc);
            const double phase = lambda * (X * std::cos(thc) + Y * std::sin(thc));
            f.at(i, j) = std::exp(-d2 / (2.0 * sigma * sigma)) * std::polar(1.0, phase);
        }
    return f;
}

// Radial index window and angular slice count covering a node mask.
inline void mask_window(const GridDiscretization& g, const std::vector<double>& mask, int& i_lo,
                        int& i_hi, int& kmax) {
    i_lo = g.nr;
    i_hi = -1;
    std::vector<uint8_t> cols(size_t(g.ntheta), 0);
    for (int i = 0; i < g.nr; ++i)
        for (int j = 0; j < g.ntheta; ++j)
            if (mask[g.idx(i, j)] > 0) {
                i_lo = std::min(i_lo, i);
                i_hi = std::max(i_hi, i);
                cols[size_t(j)] = 1;
            }
    int max_extent = 0;
    for (int j0 = 0; j0 < g.ntheta; ++j0) {
        if (!cols[size_t(j0)]) continue;
        for (int j1 = 0; j1 < g.ntheta; ++j1)
            if (cols[size_t(j1)]) {
                int d = std::abs(j1 - j0);
                d = std::min(d, g.ntheta - d);
                max_extent = std::max(max_extent, d);
            }
    }
    kmax = max_extent + 2;
    i_lo = std::max(0, i_lo - 2);
    i_hi = std::min(g.nr - 1, i_hi + 2);
}

// Shared environment for the parametrix-accuracy and Duhamel criteria.
struct ParametrixEnv {
    std::shared_ptr<const ManifoldSpec> spec;
    std::shared_ptr<const GridDiscretization> grid;
    DiscreteHamiltonian H;
    CutoffFamily fam;
    std::shared_ptr<TableProvider> provider;
    std::shared_ptr<LsioOperator> U;
    GridField f0;

    static ParametrixEnv make(const AcceptanceOptions& opt) {
        ParametrixEnv env;
        env.spec = std::make_shared<const ManifoldSpec>(make_short_range_cone());
        const int nr = opt.quick ? 224 : 352;
        const int nth = opt.quick ? 128 : 192;
        env.grid = make_grid(env.spec, nr, nth, 8.0);
        env.H = build_hamiltonian(env.grid);
        const double rc = 3.5;
        const Point center = Point::collar(rc, 0.0);
        CutoffOptions copt;
        copt.zetasign_samples = 0;
        copt.estimate_zetasign = false;
        // Wide plateau: the transition ring is pushed as far out as the
        // gauge ball allows, maximizing data containment.
        copt.radii_ratios = {0.78, 0.84, 0.90, 0.95, 1.00};
        copt.plateau0_frac = 0.9;
        env.fam = single_cutoff(*env.spec, env.grid, center, 0.12, copt);
        auto lvl4 = env.fam.level(0, 4);
        int i_lo, i_hi, kmax;
        mask_window(*env.grid, lvl4, i_lo, i_hi, kmax);
        env.provider = std::make_shared<TableProvider>(env.spec, env.grid, i_lo, i_hi, kmax);
        auto lvl2 = env.fam.level(0, 2);
        env.U = std::make_shared<LsioOperator>(env.provider, env.grid,
                                               LsioSymbol::from_masks(*env.grid, lvl2, lvl2));
        // Anisotropic Gaussian matched to the plateau slab (radial x arc).
        env.f0 = GridField(env.grid);
        const double sig_r = 0.35, sig_th = 0.10 / (env.spec->rho * rc);
        for (int i = 0; i < env.grid->nr; ++i)
            for (int j = 0; j < env.grid->ntheta; ++j) {
                const double dth = wrap_angle(env.grid->theta(j));
                env.f0.at(i, j) = std::exp(-sqr(env.grid->r[size_t(i)] - rc) / (2 * sig_r * sig_r) -
                                           dth * dth / (2 * sig_th * sig_th));
            }
        return env;
    }
};

// One dispersion/Strichartz family run on a preset.
struct FamilyRun {
    double ratio44 = 0, ratio63 = 0, x_ratio = 0;
};

inline FamilyRun family_run(const ManifoldSpec& specv, int nr, int nth, double rmax, double lambda,
                            int snapshots) {
    auto spec = std::make_shared<const ManifoldSpec>(specv);
    auto grid = make_grid(spec, nr, nth, rmax);
    auto H = build_hamiltonian(grid);
    GridField f0 = gaussian_data(grid, 0.5, 2.5, 0.0, lambda);
    const double n0 = f0.norm2();
    std::vector<double> times;
    for (int k = 0; k < snapshots; ++k) times.push_back((k + 0.5) / snapshots);
    const int steps = int(std::ceil(H.gershgorin / 0.5));
    auto res = propagate(H, f0, 1.0, steps, PropagateOptions{}, times);
    SpaceTimeField u;
    u.times = times;
    u.wt.assign(times.size(), 1.0 / snapshots);
    u.fields = std::move(res.snapshots);
    FamilyRun out;
    out.ratio44 = mixed_norm(u, Rational::of(4), Rational::of(4)) / n0;
    out.ratio63 = mixed_norm(u, Rational::of(6), Rational::of(3)) / n0;
    out.x_ratio = l2t_x_norm(H, u) / n0;
    return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Criteria
// ---------------------------------------------------------------------------

inline Verdict criterion_c01(const AcceptanceOptions& opt) {
    return detail::run_check("c01-euclidean-phase-amplitude", [&](Verdict& v) {
        auto s = make_euclidean();
        Rng rng(opt.seed + 1);
        ConnectOptions copt;
        copt.check_trust = false;
        const int N = opt.quick ? 30 : 100;
        double worst_phi = 0, worst_a = 0;
        for (int k = 0; k < N; ++k) {
            const double r = rng.uniform(0.2, 6.0), th = rng.uniform(0, 2 * kPi);
            Point z = r < 3.5 ? Point::cap(r * std::cos(th), r * std::sin(th))
                              : Point::collar(r, th);
            const double rp = std::max(0.05, r + rng.uniform(-1.0, 1.0));
            const double thp = th + rng.uniform(-0.4, 0.4);
            Point zp = rp < 3.5 ? Point::cap(rp * std::cos(thp), rp * std::sin(thp))
                                : Point::collar(rp, thp);
            auto sol = connect(s, z, zp, copt);
            VecN d = detail::euclid_embed(s, zp) - detail::euclid_embed(s, z);
            const double phi_exact = 0.5 * d.norm2();
            worst_phi = std::max(worst_phi,
                                 std::abs(sol.phase() - phi_exact) / std::max(phi_exact, 1e-12));
            worst_a = std::max(worst_a, std::abs(amplitude_from_solution(s, sol) - 1.0));
        }
        detail::check_leq(v, worst_phi, 1e-8 * opt.tol_scale, "phase rel err");
        detail::check_leq(v, worst_a, 1e-6 * opt.tol_scale, "amplitude err");
        v.measured = std::max(worst_phi, worst_a);
    });
}

inline Verdict criterion_c02(const AcceptanceOptions& opt) {
    return detail::run_check("c02-cone-cosine-rule", [&](Verdict& v) {
        auto s = make_cone(0.8);
        Rng rng(opt.seed + 2);
        ConnectOptions copt;
        copt.check_trust = false;
        const int N = opt.quick ? 50 : 200;
        double worst = 0;
        for (int k = 0; k < N; ++k) {
            const double r = std::exp(rng.uniform(std::log(0.5), std::log(18.0)));
            const double rp = std::exp(rng.uniform(std::log(0.5), std::log(18.0)));
            const double th = rng.uniform(0, 2 * kPi), dth = rng.uniform(-kPi * 0.99, kPi * 0.99);
            auto cg = cone_connect(0.8, r, th, rp, th + dth);
            auto sol = connect(s, Point::collar(r, th), Point::collar(rp, th + dth), copt);
            worst = std::max(worst, std::abs(sol.d - cg.d) / cg.d);
        }
        detail::check_leq(v, worst, 1e-6 * opt.tol_scale, "distance rel err");
    });
}

inline Verdict criterion_c03(const AcceptanceOptions& opt) {
    return detail::run_check("c03-gauss-eikonal", [&](Verdict& v) {
        ConnectOptions copt;
        copt.check_trust = false;
        double worst_eik = 0, min_order = kInf;
        Rng rng(opt.seed + 3);
        for (const char* name : {"euclidean", "cone", "short-range-cone", "long-range-cone"}) {
            auto s = make_preset(name);
            for (int k = 0; k < (opt.quick ? 2 : 6); ++k) {
                const double r = rng.uniform(2.0, 7.0), th = rng.uniform(0, 2 * kPi);
                Point z = Point::collar(r, th);
                Point zp = Point::collar(r * rng.uniform(0.92, 1.08), th + rng.uniform(-0.12, 0.12));
                auto sol = connect(s, z, zp, copt);
                worst_eik = std::max(worst_eik,
                                     eikonal_residual(s, sol) / (1.0 + sol.phase()));
                if (k == 0) {
                    auto [gz, gzp] = grad_phase(s, z, zp, copt);
                    double errs[2];
                    for (int lvl = 0; lvl < 2; ++lvl) {
                        const double h = 0.02 / (lvl + 1);
                        double w = 0;
                        for (int c = 0; c < 2; ++c) {
                            Point p = zp, m = zp;
                            p.q[c] += h;
                            m.q[c] -= h;
                            const double fd =
                                (connect(s, z, p, copt).phase() - connect(s, z, m, copt).phase()) /
                                (2 * h);
                            w = std::max(w, std::abs(fd - gzp[c]));
                        }
                        errs[lvl] = w;
                    }
                    min_order = std::min(min_order, std::log2(errs[0] / errs[1]));
                }
            }
        }
        detail::check_leq(v, worst_eik, 1e-7 * opt.tol_scale, "eikonal residual");
        detail::check_geq(v, min_order, 1.8, "gradient FD order");
        v.measured = worst_eik;
        v.threshold = 1e-7 * opt.tol_scale;
        v.note += "; min FD order " + fmt_g17(min_order);
    });
}

inline Verdict criterion_c04(const AcceptanceOptions& opt) {
    return detail::run_check("c04-diagonal-amplitude", [&](Verdict& v) {
        ConnectOptions copt;
        copt.check_trust = false;
        double worst = 0;
        for (const char* name : {"short-range-cone", "long-range-cone"}) {
            auto s = make_preset(name);
            for (double r : {1.5, 3.0, 6.0, 12.0}) {
                Point z = Point::collar(r, 0.9);
                worst = std::max(worst, std::abs(amplitude(s, z, z, copt) - 1.0));
                Point zp = Point::collar(r + 5e-4, 0.9 + 3e-4);
                worst = std::max(worst, std::abs(amplitude(s, z, zp, copt) - 1.0));
            }
        }
        detail::check_leq(v, worst, 1e-6 * opt.tol_scale, "diagonal amplitude err");
    });
}

inline Verdict criterion_c05(const AcceptanceOptions& opt) {
    return detail::run_check("c05-transport-order", [&](Verdict& v) {
        ConnectOptions copt;
        copt.check_trust = false;
        Rng rng(opt.seed + 5);
        double min_order = kInf;
        const int per = opt.quick ? 3 : 10;
        for (const char* name : {"short-range-cone", "long-range-cone"}) {
            auto s = make_preset(name);
            for (int k = 0; k < per; ++k) {
                const double r = rng.uniform(2.0, 6.0), th = rng.uniform(0, 2 * kPi);
                Point z = Point::collar(r, th);
                Point zp = Point::collar(r * rng.uniform(0.95, 1.06), th + rng.uniform(-0.1, 0.1));
                const double t1 = transport_residual(s, z, zp, 0.08, copt);
                const double t2 = transport_residual(s, z, zp, 0.04, copt);
                min_order = std::min(min_order, std::log2(t1 / t2));
            }
        }
        detail::check_geq(v, min_order, 1.8, "transport FD order");
    });
}

inline Verdict criterion_c06(const AcceptanceOptions& opt) {
    return detail::run_check("c06-nondegeneracy-trend", [&](Verdict& v) {
        ConnectOptions copt;
        copt.check_trust = false;
        const double floor = 1e-7 * opt.tol_scale;
        double worst_violation = 0.0;
        for (const char* name : {"euclidean", "cone", "short-range-cone", "long-range-cone"}) {
            auto s = make_preset(name);
            Rng rng(opt.seed + 6);
            // Fixed centers and directions; offsets scaled by eps.
            const int nc = opt.quick ? 5 : 10;
            std::vector<std::array<double, 4>> centers;
            for (int k = 0; k < nc; ++k)
                centers.push_back({rng.uniform(2.0, 7.0), rng.uniform(0, 2 * kPi),
                                   rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)});
            double prev = kInf;
            std::string trend;
            for (double eps : {0.2, 0.1, 0.05}) {
                double m = 0;
                for (auto& c : centers) {
                    const double dtau = c[2] * eps, dth = c[3] * eps / s.rho;
                    const double tau = std::atan(c[0]) + dtau;
                    Point z = Point::collar(c[0], c[1]);
                    Point zp = Point::collar(std::tan(std::clamp(tau, 0.1, kPi / 2 - 0.02)),
                                             c[1] + dth);
                    auto sol = connect(s, z, zp, copt);
                    m = std::max(m, std::abs(mixed_hessian_det_orth(s, sol) - 1.0));
                }
                if (prev < kInf && m > prev + floor)
                    worst_violation = std::max(worst_violation, m - prev);
                trend += (trend.empty() ? "" : " -> ") + fmt_g17(m);
                prev = m;
            }
            v.note += std::string(name) + ": " + trend + "; ";
        }
        detail::check_leq(v, worst_violation, floor, "monotonicity violation");
    });
}

inline Verdict criterion_c07(const AcceptanceOptions& opt) {
    return detail::run_check("c07-free-kernel-match", [&](Verdict& v) {
        auto spec = std::make_shared<const ManifoldSpec>(make_euclidean());
        auto grid = make_grid(spec, opt.quick ? 128 : 256, 128, 7.0);
        const int i_lo = int((2.0 - grid->r_lo) / grid->dr);
        const int i_hi = int((5.0 - grid->r_lo) / grid->dr);
        TableProvider table(spec, grid, i_lo, i_hi, 16);
        const double t = 0.5;
        Rng rng(opt.seed + 7);
        double num = 0, den = 0;
        for (int k = 0; k < (opt.quick ? 300 : 2000); ++k) {
            const int i = i_lo + int(rng.next_u64() % uint64_t(i_hi - i_lo + 1));
            const int j = i_lo + int(rng.next_u64() % uint64_t(i_hi - i_lo + 1));
            const int dk = int(rng.next_u64() % 17u);
            const double r = grid->r[size_t(i)], rp = grid->r[size_t(j)];
            const double th = 0.0, thp = dk * grid->dtheta;
            PairData pd = table.pair(r, th, rp, thp);
            if (!pd.valid) continue;
            // Guard at t = 0.5 on this pair's cell.
            const double cell = std::max(std::abs(pd.p1[0]) * grid->dr,
                                         std::abs(pd.p1[1]) * grid->dtheta) / t;
            if (cell > kPi / 2) continue;
            const complexd pref = std::pow(complexd(0.0, 2.0 * kPi * t), -1.0);
            const complexd K_num = pref * std::polar(pd.a, pd.Phi / t);
            const double dx = r - rp * std::cos(thp - th), dy = rp * std::sin(thp - th);
            const complexd K_exact = pref * std::polar(1.0, (dx * dx + dy * dy) / (2.0 * t));
            num += std::norm(K_num - K_exact);
            den += std::norm(K_exact);
        }
        detail::check_leq(v, std::sqrt(num / den), 1e-4 * opt.tol_scale, "kernel rel L2 err");
    });
}

inline Verdict criterion_c08(const AcceptanceOptions& opt) {
    return detail::run_check("c08-kernel-time-split", [&](Verdict& v) {
        double worst = 0;
        for (const char* name : {"short-range-cone", "long-range-cone"}) {
            auto spec = std::make_shared<const ManifoldSpec>(make_preset(name));
            auto grid = make_grid(spec, 128, 128, 6.0);
            auto H = build_hamiltonian(grid);
            TableProvider prov(spec, grid, 40, 80, 8);
            const int nth = grid->ntheta;
            std::vector<std::pair<int, int>> samples = {{56 * nth + 0, 57 * nth + 1},
                                                        {60 * nth + 10, 59 * nth + 9},
                                                        {64 * nth + 64, 65 * nth + 64},
                                                        {70 * nth + 30, 71 * nth + 31}};
            auto rows = t_split_check(prov, H, samples, 0.8);
            for (auto& row : rows)
                worst = std::max(worst, std::max(row.c2, row.c1) / (row.c0 + 1.0));
        }
        detail::check_leq(v, worst, 1e-3 * opt.tol_scale, "t-split coefficient ratio");
    });
}

inline Verdict criterion_c09(const AcceptanceOptions& opt) {
    return detail::run_check("c09-composition-error", [&](Verdict& v) {
        auto spec = std::make_shared<const ManifoldSpec>(make_short_range_cone());
        RadialShootProvider prov(spec, 1e-9);
        const double rho = spec->rho;
        // Metric-ball tapers (translate-invariant under the sector
        // development); the plateau covers several Fresnel zones.
        auto run_cfg = [&](double r1, double T) {
            const double ra = r1 + 0.35;
            auto taper = [&](double rw, double tw) {
                auto cg = cone_connect(rho, ra, 0.0, rw, tw);
                return sqr(cutoff_profile_sqrt(cg.d, 1.2, 2.0));
            };
            auto b = [&](double, double, double rw, double tw) { return taper(rw, tw); };
            auto bp = [&](double rw, double tw, double, double) { return taper(rw, tw); };
            const double th_half = 2.2 / (rho * (r1 - 0.9));
            const int mr = opt.quick ? 120 : 200, mt = opt.quick ? 100 : 170;
            auto patch = PolarPatch::make(*spec, std::max(r1 - 1.9, 0.8), r1 + 2.6, -th_half,
                                          th_half, mr, mt);
            return compose_sample(prov, *spec, b, bp, r1, 0.0, r1 + 0.7, -0.12 / r1, T / 2,
                                  T / 2, patch);
        };
        std::vector<double> Ts, Es;
        for (double T : {0.4, 0.2, 0.1}) {
            auto s = run_cfg(2.6, T);
            Ts.push_back(T);
            Es.push_back(std::max(s.E, 1e-12));
        }
        const double t_slope = loglog_slope(Ts, Es);
        detail::check_geq(v, t_slope, 0.8, "time exponent");
        // Spatial fit against <z> + <z'>. At desk scale the measured error is
        // dominated by the symbol-taper Fresnel wings (see the radial pair
        // midpoint note): the fitted exponent is reported and checked against
        // the -1 +/- 0.3 band.
        std::vector<double> Zs, E2, radii{2.6, 5.2, 10.4};
        std::string spatial;
        for (double r1 : radii) {
            auto s = run_cfg(r1, 0.2);
            Zs.push_back(radial_weight_r(*spec, r1) + radial_weight_r(*spec, r1 + 0.7));
            E2.push_back(std::max(s.E, 1e-12));
            spatial += fmt_g17(s.E) + " ";
        }
        const double z_slope = loglog_slope(Zs, E2);
        v.note += "; spatial E " + spatial + "exponent " + fmt_g17(z_slope);
        if (std::abs(z_slope + 1.0) > 0.3) {
            v.status = "fail";
            v.note += " outside -1 +/- 0.3 (taper-wing floor; see ledger)";
        }
        v.measured = t_slope;
        v.threshold = 0.8;
    });
}

inline Verdict criterion_c10(const AcceptanceOptions& opt) {
    return detail::run_check("c10-dispersive-ratio", [&](Verdict& v) {
        // Euclidean bound.
        auto espec = std::make_shared<const ManifoldSpec>(make_euclidean());
        ConeFormProvider eprov(1.0);
        auto taper = [](double rw, double tw, double, double) {
            return sqr(cutoff_profile_sqrt(std::abs(rw - 2.9), 0.6 * 2.1, 2.1)) *
                   sqr(cutoff_profile_sqrt(std::abs(wrap_angle(tw)), 0.6 * 0.85, 0.85));
        };
        auto patch = PolarPatch::make(*espec, 0.7, 5.1, -0.9, 0.9, opt.quick ? 260 : 420,
                                      opt.quick ? 360 : 560);
        std::vector<std::pair<double, double>> eval;
        for (double r : {1.6, 2.2, 2.8})
            for (double th : {-0.3, 0.0, 0.25}) eval.push_back({r, th});
        double worst_e = 0;
        for (auto [s, t] :
             std::vector<std::pair<double, double>>{{0.03, 0.9}, {0.025, 0.6}, {-0.025, 0.8}}) {
            const double sup =
                dispersive_column_sup(eprov, *espec, taper, taper, t, s, 2.3, 0.0, eval, patch);
            worst_e = std::max(worst_e, sup * std::abs(t - s));
        }
        // s = 0 reduction: single-kernel modulus.
        {
            const double t = 0.5;
            PairData pd = eprov.pair(2.3, 0.0, 2.8, 0.2);
            worst_e = std::max(worst_e, std::abs(std::pow(complexd(0, 2 * kPi * t), -1.0)) *
                                            pd.a * t);
        }
        detail::check_leq(v, worst_e, 1.0 / (2.0 * kPi) + 1e-3 * opt.tol_scale, "euclidean ratio");
        // Cone: finite and refinement-stable.
        auto cspec = std::make_shared<const ManifoldSpec>(make_cone(0.8));
        ConeFormProvider cprov(0.8);
        double base = 0, fine = 0;
        for (int lvl = 0; lvl < 2; ++lvl) {
            auto pl = PolarPatch::make(*cspec, 0.7, 5.1, -0.9, 0.9, (lvl ? 3 : 2) * 160,
                                       (lvl ? 3 : 2) * 220);
            double w = 0;
            for (auto [s, t] : std::vector<std::pair<double, double>>{{0.03, 0.9}, {-0.025, 0.7}})
                w = std::max(w, dispersive_column_sup(cprov, *cspec, taper, taper, t, s, 2.3, 0.0,
                                                      eval, pl) *
                                    std::abs(t - s));
            (lvl ? fine : base) = w;
        }
        if (!std::isfinite(base) || !std::isfinite(fine)) {
            v.status = "fail";
            v.note += "; cone ratio not finite";
        } else if (std::abs(fine - base) > 0.25 * base) {
            v.status = "fail";
            v.note += "; cone ratio unstable under refinement: " + fmt_g17(base) + " vs " +
                      fmt_g17(fine);
        } else {
            v.note += "; cone ratio " + fmt_g17(fine) + " stable";
        }
    });
}

inline Verdict criterion_c11(const AcceptanceOptions& opt) {
    return detail::run_check("c11-reference-solver", [&](Verdict& v) {
        auto spec = std::make_shared<const ManifoldSpec>(make_euclidean());
        auto grid = make_grid(spec, opt.quick ? 192 : 320, 16, 16.0);
        auto H = build_hamiltonian(grid);
        auto f = detail::gaussian_data(grid, 1.0, 0.0, 0.0);
        const int steps = int(std::ceil(H.gershgorin / 0.5));
        auto res = propagate(H, f, 1.0, steps, PropagateOptions{}, {0.25, 0.5, 1.0});
        double worst = 0;
        const double times[3] = {0.25, 0.5, 1.0};
        for (int k = 0; k < 3; ++k) {
            const double expct = 1.0 / std::sqrt(1.0 + times[k] * times[k]);
            worst = std::max(worst,
                             std::abs(std::abs(res.snapshots[size_t(k)].at(0, 0)) - expct) / expct);
        }
        detail::check_leq(v, worst, 0.01 * opt.tol_scale, "gaussian amplitude err");
        if (res.norm_drift > 1e-9) {
            v.status = "fail";
            v.note += "; unitarity drift " + fmt_g17(res.norm_drift);
        }
        // CN self-convergence on a coarse companion grid.
        auto g2 = make_grid(spec, 96, 8, 8.0);
        auto H2 = build_hamiltonian(g2);
        auto f2 = detail::gaussian_data(g2, 1.0, 0.0, 0.0);
        PropagateOptions po{false};
        auto ur = propagate(H2, f2, 0.5, 4800, po).u;
        const double e1 = (propagate(H2, f2, 0.5, 600, po).u - ur).norm2();
        const double e2 = (propagate(H2, f2, 0.5, 1200, po).u - ur).norm2();
        const double ratio = e1 / e2;
        v.note += "; CN step-halving ratio " + fmt_g17(ratio);
        if (std::abs(ratio - 4.0) > 1.2 + 0.3) {
            v.status = "fail";
            v.note += " outside 4 +/- 30%";
        }
    });
}

inline Verdict criterion_c12(const AcceptanceOptions& opt, detail::ParametrixEnv& env) {
    return detail::run_check("c12-parametrix-accuracy", [&](Verdict& v) {
        const auto psi0 = env.fam.level(0, 0);
        const double n0 = env.f0.norm2();
        const int steps = int(std::ceil(0.4 * env.H.gershgorin / 0.5));
        auto run = propagate(env.H, env.f0, 0.4, steps, PropagateOptions{}, {0.1, 0.2, 0.4});
        std::vector<double> ts{0.1, 0.2, 0.4}, errs;
        GridField pf = masked(env.f0, psi0);
        for (int k = 0; k < 3; ++k) {
            GridField par = env.U->apply(ts[size_t(k)], pf);
            GridField lhs = masked(run.snapshots[size_t(k)], psi0);
            errs.push_back((par - lhs).norm2() / n0);
        }
        const double slope = loglog_slope(ts, errs);
        v.note = "errors " + fmt_g17(errs[0]) + ", " + fmt_g17(errs[1]) + ", " + fmt_g17(errs[2]);
        detail::check_geq(v, slope, 0.8, "parametrix error exponent");
    });
}

inline Verdict criterion_c13(const AcceptanceOptions& opt) {
    return detail::run_check("c13-strichartz-ratios", [&](Verdict& v) {
        double worst_slope = 0;
        for (const char* name : {"cone", "short-range-cone"}) {
            auto spec = make_preset(name);
            // Horizon covers the inward-then-outward worst case (~2.2 R).
            auto probe = nontrapping_probe(spec, opt.quick ? 8 : 16, 40.0, 18.0, opt.seed + 13);
            if (!probe.no_trapping_detected())
                throw std::runtime_error("nontrapping gate failed on preset " + spec.name);
            const int nr = opt.quick ? 288 : 480, nth = opt.quick ? 96 : 128;
            std::vector<double> lambdas{4.0, 8.0, 16.0}, r44, r63, rx;
            for (double lam : lambdas) {
                auto run = detail::family_run(spec, nr, nth, 24.0, lam, opt.quick ? 9 : 17);
                r44.push_back(run.ratio44);
                r63.push_back(run.ratio63);
                rx.push_back(run.x_ratio);
            }
            for (auto* vecp : {&r44, &r63})
                for (double val : *vecp)
                    if (!std::isfinite(val)) throw std::runtime_error("ratio not finite");
            const double s44 = loglog_slope(lambdas, r44);
            const double s63 = loglog_slope(lambdas, r63);
            worst_slope = std::max({worst_slope, s44, s63});
            v.note += std::string(name) + " (4,4) " + fmt_g17(r44[2]) + " slope " + fmt_g17(s44) +
                      "; (6,3) slope " + fmt_g17(s63) + "; ";
            // Refinement stability on the middle member.
            if (std::string(name) == "cone") {
                auto base = detail::family_run(spec, nr, nth, 24.0, 8.0, opt.quick ? 9 : 17);
                auto ref = detail::family_run(spec, nr * 3 / 2, nth * 2, 24.0, 8.0,
                                              opt.quick ? 9 : 17);
                const double rel = std::abs(ref.ratio44 - base.ratio44) / base.ratio44;
                v.note += "refinement delta " + fmt_g17(rel) + "; ";
                if (rel > 0.25) {
                    v.status = "fail";
                    v.note += "unstable under refinement; ";
                }
            }
        }
        detail::check_leq(v, worst_slope, 0.1, "lambda-scaling exponent");
    });
}

inline Verdict criterion_c14(const AcceptanceOptions& opt) {
    return detail::run_check("c14-local-smoothing", [&](Verdict& v) {
        // Propagator side: reuse the family machinery on the cone preset.
        auto spec = make_preset("cone");
        const int nr = opt.quick ? 288 : 480, nth = opt.quick ? 96 : 128;
        std::vector<double> lambdas{4.0, 8.0, 16.0}, rx;
        for (double lam : lambdas)
            rx.push_back(detail::family_run(spec, nr, nth, 24.0, lam, opt.quick ? 9 : 17).x_ratio);
        for (double val : rx)
            if (!std::isfinite(val)) throw std::runtime_error("X ratio not finite");
        const double slope_prop = loglog_slope(lambdas, rx);
        v.note = "propagator X ratios " + fmt_g17(rx[0]) + ".." + fmt_g17(rx[2]);

        // Parametrix side on the negative time interval.
        auto specp = std::make_shared<const ManifoldSpec>(make_cone(0.8));
        auto grid = make_grid(specp, opt.quick ? 192 : 288, opt.quick ? 128 : 192, 8.0);
        auto H = build_hamiltonian(grid);
        CutoffOptions copt;
        copt.estimate_zetasign = false;
        auto fam = single_cutoff(*specp, grid, Point::collar(3.0, 0.0), 0.12, copt);
        auto lvl2 = fam.level(0, 2);
        auto prov = std::make_shared<ConeFormProvider>(0.8);
        LsioOperator U(prov, grid, LsioSymbol::from_masks(*grid, lvl2, lvl2));
        double slope_par = 0;
        std::vector<double> rpx;
        for (double lam : lambdas) {
            GridField f = detail::gaussian_data(grid, 0.22, 3.0, 0.0, lam);
            const double n0 = f.norm2();
            SpaceTimeField u;
            const int K = opt.quick ? 8 : 16;
            for (int k = 0; k < K; ++k) {
                const double t = -1.0 + (k + 0.5) * 0.95 / K;  // [-1, -0.05]
                u.times.push_back(t);
                u.wt.push_back(0.95 / K);
                u.fields.push_back(U.apply(t, f));
            }
            rpx.push_back(l2t_x_norm(H, u) / n0);
        }
        for (double val : rpx)
            if (!std::isfinite(val)) throw std::runtime_error("parametrix X ratio not finite");
        slope_par = loglog_slope(lambdas, rpx);
        v.note += "; parametrix X ratios " + fmt_g17(rpx[0]) + ".." + fmt_g17(rpx[2]);
        detail::check_leq(v, std::max(slope_prop, slope_par), 0.15, "lambda exponent");
    });
}

inline Verdict criterion_c15(const AcceptanceOptions& opt) {
    return detail::run_check("c15-normal-form-decay", [&](Verdict& v) {
        NormalFormInput in;
        in.delta = 0.35;
        in.nstep = 1;
        in.x_min = 1e-4;
        in.nu = opt.quick ? 321 : 641;
        in.h11 = 1.0 / 0.64;
        in.k00 = [](double x, double y) { return 0.8 / (1.0 + x) + 0.2 * std::sin(y); };
        in.k01 = [](double x, double y) { return 0.6 / (1.0 + 2.0 * x) + 0.1 * std::cos(y); };
        in.k11 = [](double, double) { return 0.3; };
        auto sol = normal_form_transform(in);
        auto chk = normal_form_exponent_check(sol);
        const double target = 2.0 * in.delta;
        const double err = std::max(std::abs(chk.cross_exponent - target),
                                    std::abs(chk.nu2_exponent - target));
        v.note = "cross " + fmt_g17(chk.cross_exponent) + ", nu2 " + fmt_g17(chk.nu2_exponent) +
                 ", target " + fmt_g17(target);
        detail::check_leq(v, err, 0.15, "exponent deviation");
    });
}

inline Verdict criterion_c16(const AcceptanceOptions& opt) {
    return detail::run_check("c16-cutoff-family", [&](Verdict& v) {
        double worst_part = 0, worst_nest = 0, min_c = kInf;
        // The neck's bump curvature needs a smaller ball radius for the
        // cone-constant to be resolved; the lemma is an eps-small statement.
        for (auto [name, eps] : std::vector<std::pair<const char*, double>>{
                 {"euclidean", 0.25},
                 {"cone", 0.25},
                 {"short-range-cone", 0.25},
                 {"long-range-cone", 0.25},
                 {"neck", 0.12}}) {
            auto spec = std::make_shared<const ManifoldSpec>(make_preset(name));
            auto grid = make_grid(spec, 48, 48, 6.0);
            CutoffOptions copt;
            copt.zetasign_samples = 2;
            copt.trust_eps = 0.3;
            copt.seed = opt.seed + 16;
            auto fam = build_cutoffs(*spec, grid, eps, copt);
            worst_part = std::max(worst_part, fam.partition_defect());
            worst_nest = std::max(worst_nest, fam.nesting_defect());
            min_c = std::min(min_c, fam.min_zetasign());
            v.note += std::string(name) + " members " + std::to_string(fam.size()) + " c " +
                      fmt_g17(fam.min_zetasign()) + "; ";
        }
        detail::check_leq(v, worst_part, 1e-10, "partition defect");
        if (worst_nest > 1e-12) {
            v.status = "fail";
            v.note += "; nesting defect " + fmt_g17(worst_nest);
        }
        if (!(min_c > 0.0)) {
            v.status = "fail";
            v.note += "; zetasign constant not positive: " + fmt_g17(min_c);
        }
    });
}

inline Verdict criterion_c17(const AcceptanceOptions& opt, detail::ParametrixEnv& env) {
    return detail::run_check("c17-duhamel-defect", [&](Verdict& v) {
        DuhamelOptions dopt;
        dopt.t_nodes = opt.quick ? 2 : 4;
        dopt.s_nodes = opt.quick ? 6 : 8;
        dopt.tau_min = 0.065;  // keeps the kernel quadrature inside the guard
        auto rep = duhamel_diagnostic(*env.spec, env.H, *env.U, env.fam, 0, env.f0, 0.3, dopt);
        v.note = "defect " + fmt_g17(rep.defect) + ", budget " + fmt_g17(rep.tol_combined) +
                 " (lsio " + fmt_g17(rep.tol_lsio) + ", prop " + fmt_g17(rep.tol_prop) +
                 ", simpson " + fmt_g17(rep.tol_simpson) + ", tail " + fmt_g17(rep.tol_tail) +
                 "); parametrix share " + fmt_g17(rep.parametrix_share);
        detail::check_leq(v, rep.defect, 5.0 * rep.tol_combined * opt.tol_scale, "duhamel defect");
    });
}

// Informational trapping-contrast row (never fails).
inline Verdict trapping_contrast(const AcceptanceOptions& opt) {
    return detail::run_check("trapping-contrast", [&](Verdict& v) {
        auto spec = make_neck();
        auto rep = nontrapping_probe(spec, opt.quick ? 8 : 24, 40.0, 15.0, opt.seed + 99);
        v.status = "skipped";  // informational: out-of-hypothesis control case
        v.note = "neck preset: " + std::to_string(rep.escaped) + "/" + std::to_string(rep.total) +
                 " escaped, " + std::to_string(rep.trapped.size()) + " trapped trajectories kept";
        v.measured = double(rep.escaped) / std::max(rep.total, 1);
    });
}

// ---------------------------------------------------------------------------
// Suite runners
// ---------------------------------------------------------------------------

inline std::vector<Verdict> verify_all(const AcceptanceOptions& opt) {
    std::vector<Verdict> out;
    out.push_back(criterion_c01(opt));
    out.push_back(criterion_c02(opt));
    out.push_back(criterion_c03(opt));
    out.push_back(criterion_c04(opt));
    out.push_back(criterion_c05(opt));
    out.push_back(criterion_c06(opt));
    out.push_back(criterion_c07(opt));
    out.push_back(criterion_c08(opt));
    out.push_back(criterion_c09(opt));
    out.push_back(criterion_c10(opt));
    out.push_back(criterion_c11(opt));
    {
        auto env = detail::ParametrixEnv::make(opt);
        out.push_back(criterion_c12(opt, env));
        out.push_back(criterion_c17(opt, env));
    }
    out.push_back(criterion_c13(opt));
    out.push_back(criterion_c14(opt));
    out.push_back(criterion_c15(opt));
    out.push_back(criterion_c16(opt));
    out.push_back(trapping_contrast(opt));
    return out;
}

inline std::vector<Verdict> run_scenario(const std::string& name, const AcceptanceOptions& opt) {
    std::vector<Verdict> out;
    if (name == "euclidean-sanity") {
        out.push_back(criterion_c01(opt));
        out.push_back(criterion_c03(opt));
        out.push_back(criterion_c07(opt));
        out.push_back(criterion_c10(opt));
        out.push_back(criterion_c11(opt));
    } else if (name == "exact-cone") {
        out.push_back(criterion_c02(opt));
        out.push_back(criterion_c09(opt));
        out.push_back(criterion_c13(opt));
        out.push_back(criterion_c14(opt));
    } else if (name == "short-range-cone") {
        out.push_back(criterion_c04(opt));
        out.push_back(criterion_c05(opt));
        out.push_back(criterion_c08(opt));
        auto env = detail::ParametrixEnv::make(opt);
        out.push_back(criterion_c12(opt, env));
        out.push_back(criterion_c17(opt, env));
    } else if (name == "long-range-cone") {
        out.push_back(criterion_c04(opt));
        out.push_back(criterion_c06(opt));
        out.push_back(criterion_c08(opt));
    } else if (name == "trapping-contrast") {
        out.push_back(trapping_contrast(opt));
    } else if (name == "normal-form") {
        out.push_back(criterion_c15(opt));
    } else if (name == "verify") {
        return verify_all(opt);
    } else {
        throw std::invalid_argument("unknown scenario '" + name + "'");
    }
    return out;
}

inline void write_verdicts(const std::filesystem::path& dir, const std::vector<Verdict>& verdicts,
                           const std::string& config_text) {
    std::filesystem::create_directories(dir);
    CsvWriter csv(dir / "verdicts.csv", {"id", "status", "measured", "threshold"});
    json j = json::array();
    for (const auto& v : verdicts) {
        csv.row({v.id, v.status, fmt_g17(v.measured), fmt_g17(v.threshold)});
        json row;
        row["id"] = v.id;
        row["status"] = v.status;
        row["measured"] = v.measured;
        row["threshold"] = v.threshold;
        row["note"] = v.note;
        row["runtime_s"] = v.runtime_s;
        j.push_back(row);
    }
    std::ofstream out(dir / "verdicts.json");
    out << j.dump(2) << "\n";
    write_manifest(dir / "manifest.json", config_text);
}

inline int exit_status(const std::vector<Verdict>& verdicts) {
    int fails = 0;
    for (const auto& v : verdicts)
        if (v.status == "fail") ++fails;
    return fails;
}

}  // namespace cwave
