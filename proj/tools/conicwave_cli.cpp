// Command-line front end: scenario runner, verification suite, and the
// direct table/field subcommands. Outputs are CSV/JSON plus binary field
// dumps under the chosen output directory.

#include <CLI11.hpp>
#include <cstdlib>
#include <iostream>

#include "conicwave/conicwave.hpp"

using namespace cwave;

namespace {

std::filesystem::path out_root(const std::string& flag_value) {
    if (!flag_value.empty()) return flag_value;
    if (const char* env = std::getenv("CONICWAVE_OUT")) return env;
    return "out";
}

struct GlobalArgs {
    std::string config_path;
    std::string out_dir;
    int threads = 1;
    uint64_t seed = 2026;
    double tol_scale = 1.0;

    RunConfig config() const {
        RunConfig cfg = config_path.empty() ? RunConfig{} : load_config(config_path);
        if (threads > 0) cfg.threads = threads;
        cfg.seed = seed;
        cfg.tolerance_scale = tol_scale;
        if (!out_dir.empty()) cfg.out_dir = out_dir;
        return cfg;
    }
};

int print_verdicts(const std::vector<Verdict>& verdicts) {
    for (const auto& v : verdicts) {
        std::cout << (v.status == "pass" ? "PASS " : v.status == "fail" ? "FAIL " : "SKIP ")
                  << v.id << "  measured=" << fmt_g17(v.measured)
                  << " threshold=" << fmt_g17(v.threshold) << "  (" << v.runtime_s << " s)\n";
        if (!v.note.empty()) std::cout << "      " << v.note << "\n";
    }
    return exit_status(verdicts);
}

Point point_from_labels(const ManifoldSpec& spec, double r, double th) {
    if (!spec.has_cap || in_collar_domain(spec, r)) return Point::collar(r, th);
    return Point::cap(r * std::cos(th), r * std::sin(th));
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Schrodinger flow and geodesic geometry on asymptotically conic manifolds"};
    app.require_subcommand(1);
    app.fallthrough();  // global flags may follow the subcommand

    GlobalArgs g;
    app.add_option("--config", g.config_path, "key=value configuration file");
    app.add_option("--out", g.out_dir, "output directory (default $CONICWAVE_OUT or ./out)");
    app.add_option("--threads", g.threads, "worker threads");
    app.add_option("--seed", g.seed, "base random seed");
    app.add_option("--tolerance-scale", g.tol_scale, "scale applied to acceptance tolerances");

    // --- run / verify ---------------------------------------------------
    std::string scenario_name = "euclidean-sanity";
    bool quick = false;
    auto* cmd_run = app.add_subcommand("run", "run a named scenario");
    cmd_run->add_option("--scenario", scenario_name, "scenario name");
    cmd_run->add_flag("--quick", quick, "reduced sizes");
    auto* cmd_verify = app.add_subcommand("verify", "run the full verification suite");
    cmd_verify->add_flag("--quick", quick, "reduced sizes");

    // --- geodesic -------------------------------------------------------
    std::string preset = "cone";

    auto* cmd_geo = app.add_subcommand("geodesic", "solve one two-point connector");
    double geo_from[2] = {2.0, 0.0}, geo_to[2] = {3.0, 0.3};
    cmd_geo->add_option("--preset", preset);
    cmd_geo->add_option("--from", geo_from[0], "start radius");
    cmd_geo->add_option("--from-theta", geo_from[1]);
    cmd_geo->add_option("--to", geo_to[0], "end radius");
    cmd_geo->add_option("--to-theta", geo_to[1]);

    auto* cmd_dt = app.add_subcommand("distance-table", "sampled pair distances");
    int dt_count = 50;
    cmd_dt->add_option("--preset", preset);
    cmd_dt->add_option("--count", dt_count);

    auto* cmd_gr = app.add_subcommand("geometry-report", "estimate diagnostics table");
    int gr_count = 24;
    double gr_eps = 0.15;
    cmd_gr->add_option("--preset", preset);
    cmd_gr->add_option("--count", gr_count);
    cmd_gr->add_option("--eps", gr_eps);

    auto* cmd_at = app.add_subcommand("amplitude-table", "phase/amplitude sample table");
    int at_count = 24;
    cmd_at->add_option("--preset", preset);
    cmd_at->add_option("--count", at_count);

    auto* cmd_la = app.add_subcommand("lsio-apply", "apply a localized kernel to Gaussian data");
    double la_t = 0.3, la_center = 2.8, la_eps = 0.11, la_sigma = 0.3;
    cmd_la->add_option("--preset", preset);
    cmd_la->add_option("--t", la_t);
    cmd_la->add_option("--center", la_center);
    cmd_la->add_option("--eps", la_eps);
    cmd_la->add_option("--sigma", la_sigma);

    auto* cmd_cc = app.add_subcommand("compose-check", "composition-law error report");
    cmd_cc->add_option("--preset", preset);

    auto* cmd_dc = app.add_subcommand("dispersive-check", "dispersive ratio report");
    cmd_dc->add_option("--preset", preset);

    auto* cmd_prop = app.add_subcommand("propagate", "reference propagation with snapshots");
    int pr_nr = 160, pr_nth = 64, pr_steps = 0, pr_snap = 4;
    double pr_t = 0.5, pr_rmax = 8.0, pr_sigma = 0.5, pr_center = 2.8;
    std::string pr_boundary = "dirichlet";
    cmd_prop->add_option("--preset", preset);
    cmd_prop->add_option("--nr", pr_nr);
    cmd_prop->add_option("--ntheta", pr_nth);
    cmd_prop->add_option("--rmax", pr_rmax);
    cmd_prop->add_option("--t", pr_t);
    cmd_prop->add_option("--steps", pr_steps, "0 = spectral step rule");
    cmd_prop->add_option("--snapshots", pr_snap);
    cmd_prop->add_option("--sigma", pr_sigma);
    cmd_prop->add_option("--center", pr_center);
    cmd_prop->add_option("--boundary", pr_boundary, "dirichlet|absorbing");

    auto* cmd_norms = app.add_subcommand("norms", "mixed-norm and X-norm ratios");
    double no_lambda = 8.0;
    cmd_norms->add_option("--preset", preset);
    cmd_norms->add_option("--lambda", no_lambda);

    CLI11_PARSE(app, argc, argv);

    try {
        RunConfig cfg = g.config();
        worker_threads() = cfg.threads;
        const auto root = out_root(cfg.out_dir);
        AcceptanceOptions aopt;
        aopt.seed = cfg.seed;
        aopt.tol_scale = cfg.tolerance_scale;
        aopt.quick = quick;

        if (*cmd_run) {
            const auto verdicts = run_scenario(scenario_name, aopt);
            write_verdicts(root / scenario_name, verdicts, cfg.raw_text);
            return print_verdicts(verdicts) > 0 ? 1 : 0;
        }
        if (*cmd_verify) {
            const auto verdicts = verify_all(aopt);
            write_verdicts(root / "verify", verdicts, cfg.raw_text);
            return print_verdicts(verdicts) > 0 ? 1 : 0;
        }

        ManifoldSpec spec = cfg.preset == "custom" || g.config_path.empty()
                                ? make_preset(preset)
                                : spec_from_config(cfg);
        if (*cmd_geo) {
            ConnectOptions copt;
            copt.check_trust = false;
            auto sol = connect(spec, point_from_labels(spec, geo_from[0], geo_from[1]),
                               point_from_labels(spec, geo_to[0], geo_to[1]), copt);
            std::filesystem::create_directories(root);
            CsvWriter csv(root / "geodesic.csv", {"theta", "r", "angle", "p_r", "p_theta"});
            for (size_t k = 0; k < sol.samples.size(); ++k) {
                const auto& p = sol.samples[k];
                const double rr = radial_coordinate(spec, p);
                const double th = p.chart == Chart::Collar ? p.q[1] : std::atan2(p.q[1], p.q[0]);
                csv.row({fmt_g17(double(k) / double(sol.samples.size() - 1)), fmt_g17(rr),
                         fmt_g17(th), fmt_g17(sol.sample_p[k][0]), fmt_g17(sol.sample_p[k][1])});
            }
            write_manifest(root / "geodesic_manifest.json", cfg.raw_text,
                           json{{"distance", sol.d},
                                {"phase", sol.phase()},
                                {"newton_iters", sol.newton_iters},
                                {"endpoint_residual", sol.endpoint_residual}});
            std::cout << "d = " << fmt_g17(sol.d) << ", Phi = " << fmt_g17(sol.phase()) << "\n";
            return 0;
        }
        if (*cmd_dt) {
            Rng rng(cfg.seed);
            ConnectOptions copt;
            copt.check_trust = false;
            std::filesystem::create_directories(root);
            CsvWriter csv(root / "distance_table.csv",
                          {"r", "theta", "rp", "thetap", "d", "d_gauge", "d_conic"});
            for (int k = 0; k < dt_count; ++k) {
                const double r = rng.uniform(1.0, 10.0), th = rng.uniform(0, 2 * kPi);
                const double rp = r * rng.uniform(0.85, 1.18), thp = th + rng.uniform(-0.25, 0.25);
                Point a = point_from_labels(spec, r, th), b = point_from_labels(spec, rp, thp);
                auto sol = connect(spec, a, b, copt);
                auto cg = cone_connect(spec.rho, r, th, rp, thp);
                csv.row({fmt_g17(r), fmt_g17(th), fmt_g17(rp), fmt_g17(thp), fmt_g17(sol.d),
                         fmt_g17(compactified_distance(spec, a, b)), fmt_g17(cg.d)});
            }
            write_manifest(root / "distance_manifest.json", cfg.raw_text);
            return 0;
        }
        if (*cmd_gr) {
            auto rows = geometry_report(spec, sample_triples(spec, gr_count, gr_eps, cfg.seed),
                                        ConnectOptions{.check_trust = false});
            std::filesystem::create_directories(root);
            CsvWriter csv(root / "geometry_report.csv",
                          {"r", "theta", "rp", "thetap", "d", "det_orth", "grad_ratio",
                           "gradw_ratio", "comparable", "lipschitz", "dm_conic_rel",
                           "id_residual", "e_over_phi", "error"});
            for (const auto& w : rows)
                csv.row({fmt_g17(w.r), fmt_g17(w.th), fmt_g17(w.rp), fmt_g17(w.thp), fmt_g17(w.d),
                         fmt_g17(w.det_orth), fmt_g17(w.grad_ratio), fmt_g17(w.gradw_ratio),
                         fmt_g17(w.comparable_ratio), fmt_g17(w.lipschitz_ratio),
                         fmt_g17(w.dm_conic_rel), fmt_g17(w.id_residual), fmt_g17(w.e_over_phi),
                         w.error});
            write_manifest(root / "geometry_manifest.json", cfg.raw_text);
            return 0;
        }
        if (*cmd_at) {
            Rng rng(cfg.seed);
            ConnectOptions copt;
            copt.check_trust = false;
            std::filesystem::create_directories(root);
            CsvWriter csv(root / "amplitude_table.csv",
                          {"r", "theta", "rp", "thetap", "phi", "amplitude", "amplitude_fd"});
            for (int k = 0; k < at_count; ++k) {
                const double r = rng.uniform(1.5, 7.0), th = rng.uniform(0, 2 * kPi);
                Point a = point_from_labels(spec, r, th);
                Point b = point_from_labels(spec, r * rng.uniform(0.93, 1.08),
                                            th + rng.uniform(-0.12, 0.12));
                auto sol = connect(spec, a, b, copt);
                csv.row({fmt_g17(r), fmt_g17(th), fmt_g17(radial_coordinate(spec, b)),
                         fmt_g17(b.chart == Chart::Collar ? b.q[1] : std::atan2(b.q[1], b.q[0])),
                         fmt_g17(sol.phase()), fmt_g17(amplitude_from_solution(spec, sol)),
                         fmt_g17(amplitude_fd(spec, a, b, 0.005, copt))});
            }
            write_manifest(root / "amplitude_manifest.json", cfg.raw_text);
            return 0;
        }
        if (*cmd_la) {
            auto specp = std::make_shared<const ManifoldSpec>(spec);
            auto grid = make_grid(specp, cfg.grid_nr, cfg.grid_ntheta, cfg.grid_rmax);
            CutoffOptions copt;
            copt.estimate_zetasign = false;
            auto fam = single_cutoff(spec, grid, point_from_labels(spec, la_center, 0.0), la_eps,
                                     copt);
            auto lvl2 = fam.level(0, 2);
            std::shared_ptr<PhaseProvider> prov;
            if (spec.perfectly_conic()) {
                prov = std::make_shared<ConeFormProvider>(spec.rho);
            } else {
                int i_lo, i_hi, kmax;
                detail::mask_window(*grid, fam.level(0, 4), i_lo, i_hi, kmax);
                prov = std::make_shared<TableProvider>(specp, grid, i_lo, i_hi, kmax);
            }
            LsioOperator U(prov, grid, LsioSymbol::from_masks(*grid, lvl2, lvl2));
            GridField f = detail::gaussian_data(grid, la_sigma, la_center, 0.0);
            GridField u = U.apply(la_t, f);
            std::filesystem::create_directories(root);
            write_field(root / "lsio_out", u, spec.name, la_t, fnv1a(cfg.raw_text));
            write_manifest(root / "lsio_manifest.json", cfg.raw_text,
                           json{{"t", la_t}, {"l2", u.norm2()}});
            std::cout << "||S_b(t) f||_2 = " << fmt_g17(u.norm2()) << "\n";
            return 0;
        }
        if (*cmd_cc) {
            ConeFormProvider prov(spec.rho);
            auto taperw = [](double rw, double tw, double, double) {
                return sqr(cutoff_profile_sqrt(std::abs(rw - 2.6), 0.78, 1.3)) *
                       sqr(cutoff_profile_sqrt(std::abs(wrap_angle(tw)), 0.36, 0.6));
            };
            auto patch = PolarPatch::make(spec, 1.2, 4.0, -0.75, 0.75, 280, 240);
            std::filesystem::create_directories(root);
            CsvWriter csv(root / "compose_check.csv", {"t_total", "E", "w_r", "w_theta"});
            for (double T : {0.4, 0.2, 0.1}) {
                auto smp = compose_sample(prov, spec, taperw, taperw, 2.3, 0.05, 2.9, -0.07, T / 2,
                                          T / 2, patch);
                csv.row({fmt_g17(T), fmt_g17(smp.E), fmt_g17(smp.wr), fmt_g17(smp.wth)});
            }
            write_manifest(root / "compose_manifest.json", cfg.raw_text);
            return 0;
        }
        if (*cmd_dc) {
            ConeFormProvider prov(spec.rho);
            auto taper = [](double rw, double tw, double, double) {
                return sqr(cutoff_profile_sqrt(std::abs(rw - 2.9), 1.26, 2.1)) *
                       sqr(cutoff_profile_sqrt(std::abs(wrap_angle(tw)), 0.51, 0.85));
            };
            auto patch = PolarPatch::make(spec, 0.7, 5.1, -0.9, 0.9, 420, 560);
            std::vector<std::pair<double, double>> eval;
            for (double r : {1.6, 2.2, 2.8})
                for (double th : {-0.3, 0.0, 0.25}) eval.push_back({r, th});
            std::filesystem::create_directories(root);
            CsvWriter csv(root / "dispersive_check.csv", {"s", "t", "sup_times_dt"});
            for (auto [s, t] :
                 std::vector<std::pair<double, double>>{{0.03, 0.9}, {0.025, 0.6}, {-0.025, 0.8}}) {
                const double sup =
                    dispersive_column_sup(prov, spec, taper, taper, t, s, 2.3, 0.0, eval, patch);
                csv.row({fmt_g17(s), fmt_g17(t), fmt_g17(sup * std::abs(t - s))});
            }
            write_manifest(root / "dispersive_manifest.json", cfg.raw_text);
            return 0;
        }
        if (*cmd_prop) {
            auto specp = std::make_shared<const ManifoldSpec>(spec);
            auto grid = make_grid(specp, pr_nr, pr_nth, pr_rmax, 0.0,
                                  pr_boundary == "absorbing" ? BoundaryKind::AbsorbingLayer
                                                             : BoundaryKind::Dirichlet);
            auto H = build_hamiltonian(grid);
            GridField f0 = detail::gaussian_data(grid, pr_sigma, pr_center, 0.0);
            const int steps =
                pr_steps > 0 ? pr_steps : int(std::ceil(pr_t * H.gershgorin / 0.5));
            std::vector<double> snaps;
            for (int k = 1; k <= pr_snap; ++k) snaps.push_back(pr_t * k / pr_snap);
            auto res = propagate(H, f0, pr_t, steps, PropagateOptions{}, snaps);
            std::filesystem::create_directories(root);
            const uint64_t h = fnv1a(cfg.raw_text);
            for (size_t k = 0; k < res.snapshots.size(); ++k)
                write_field(root / ("snapshot_" + std::to_string(k)), res.snapshots[k], spec.name,
                            snaps[k], h);
            write_manifest(root / "propagate_manifest.json", cfg.raw_text,
                           json{{"t", pr_t},
                                {"steps", steps},
                                {"norm_drift", res.norm_drift},
                                {"absorbed_mass", res.absorbed_mass}});
            std::cout << "norm drift " << fmt_g17(res.norm_drift) << "\n";
            return 0;
        }
        if (*cmd_norms) {
            auto run = detail::family_run(spec, 288, 96, 24.0, no_lambda, 9);
            std::filesystem::create_directories(root);
            CsvWriter csv(root / "norms.csv", {"lambda", "ratio_44", "ratio_63", "x_ratio"});
            csv.row({fmt_g17(no_lambda), fmt_g17(run.ratio44), fmt_g17(run.ratio63),
                     fmt_g17(run.x_ratio)});
            write_manifest(root / "norms_manifest.json", cfg.raw_text);
            std::cout << "L4L4/L2 = " << fmt_g17(run.ratio44) << "\n";
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
