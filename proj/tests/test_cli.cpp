#include <gtest/gtest.h>

#include <fstream>

#include "conicwave/io.hpp"
#include "conicwave/report.hpp"
#include "conicwave/scenarios.hpp"
#include "conicwave/specfile.hpp"

using namespace cwave;

TEST(Config, ParsesAndValidates) {
    auto cfg = parse_config_text(
        "scenario = exact-cone\n"
        "preset = cone\n"
        "grid.nr = 96   # comment\n"
        "time.t = 0.25\n"
        "manifold.delta = inf\n");
    EXPECT_EQ(cfg.scenario, "exact-cone");
    EXPECT_EQ(cfg.grid_nr, 96);
    EXPECT_DOUBLE_EQ(cfg.time_t, 0.25);
    EXPECT_TRUE(std::isinf(cfg.delta));
}

TEST(Config, RejectsUnknownKeys) {
    EXPECT_THROW(parse_config_text("grid.nx = 12\n"), std::invalid_argument);
    EXPECT_THROW(parse_config_text("grid.boundary = weird\n"), std::invalid_argument);
}

TEST(Config, CustomSpecFromExpression) {
    auto cfg = parse_config_text(
        "preset = custom\n"
        "manifold.rho = 0.9\n"
        "manifold.delta = 0.5\n"
        "manifold.e = 1/(1+x)\n");
    auto spec = spec_from_config(cfg);
    auto g = metric_at(spec, Point::collar(4.0, 0.0));
    // angular = (rho^2 + x^0.5/(1+x)) / x^2 at x = 0.25.
    const double x = 0.25;
    EXPECT_NEAR(g.components(1, 1), (0.81 + std::sqrt(x) / (1 + x)) / (x * x), 1e-10);
}

TEST(Io, FieldDumpRoundTrip) {
    auto spec = std::make_shared<const ManifoldSpec>(make_cone(0.8));
    auto grid = make_grid(spec, 24, 16, 6.0);
    GridField f(grid);
    Rng rng(4);
    for (auto& z : f.v) z = complexd(rng.normal(), rng.normal());
    const auto base = std::filesystem::temp_directory_path() / "cw_field_test";
    write_field(base, f, spec->name, 0.25);
    GridField g = read_field(base, grid);
    double worst = 0;
    for (size_t k = 0; k < f.v.size(); ++k) worst = std::max(worst, std::abs(f.v[k] - g.v[k]));
    EXPECT_LT(worst, 1e-6);  // float32 storage
}

TEST(Io, CsvDeterministicAcrossRuns) {
    auto write_once = [&](const std::filesystem::path& p) {
        auto spec = make_cone(0.8);
        auto rows = geometry_report(spec, sample_triples(spec, 6, 0.15, 42),
                                    ConnectOptions{.check_trust = false});
        CsvWriter csv(p, {"r", "det", "grad"});
        for (auto& w : rows) csv.row({fmt_g17(w.r), fmt_g17(w.det_orth), fmt_g17(w.grad_ratio)});
    };
    const auto p1 = std::filesystem::temp_directory_path() / "cw_det1.csv";
    const auto p2 = std::filesystem::temp_directory_path() / "cw_det2.csv";
    write_once(p1);
    write_once(p2);
    std::ifstream f1(p1), f2(p2);
    std::stringstream s1, s2;
    s1 << f1.rdbuf();
    s2 << f2.rdbuf();
    EXPECT_EQ(s1.str(), s2.str());
    EXPECT_GT(s1.str().size(), 100u);
}

TEST(Scenarios, UnknownSceneRejected) {
    AcceptanceOptions opt;
    opt.quick = true;
    EXPECT_THROW(run_scenario("no-such-scenario", opt), std::invalid_argument);
}

TEST(Scenarios, VerdictWriterProducesArtifacts) {
    std::vector<Verdict> vs;
    Verdict v;
    v.id = "c00-demo";
    v.measured = 0.5;
    v.threshold = 1.0;
    vs.push_back(v);
    const auto dir = std::filesystem::temp_directory_path() / "cw_verdicts";
    write_verdicts(dir, vs, "seed=1\n");
    EXPECT_TRUE(std::filesystem::exists(dir / "verdicts.csv"));
    EXPECT_TRUE(std::filesystem::exists(dir / "verdicts.json"));
    EXPECT_TRUE(std::filesystem::exists(dir / "manifest.json"));
}

TEST(Scenarios, GeometryReportRowsCaptureErrors) {
    auto spec = make_cone(0.8);
    std::vector<GeometryTriple> cloud;
    GeometryTriple bad;
    bad.z = Point::collar(2.0, 0.0);
    bad.zp = Point::collar(2.1, 0.05);
    bad.zpp = Point::collar(0.051, 3.0);  // near the excised tip: likely to fail
    cloud.push_back(bad);
    GeometryTriple good;
    good.z = Point::collar(3.0, 0.0);
    good.zp = Point::collar(3.2, 0.04);
    good.zpp = Point::collar(3.1, 0.02);
    cloud.push_back(good);
    auto rows = geometry_report(spec, cloud, ConnectOptions{.check_trust = false});
    ASSERT_EQ(rows.size(), 2u);
    EXPECT_TRUE(rows[1].error.empty());
    EXPECT_NEAR(rows[1].det_orth, 1.0, 1e-6);
    EXPECT_NEAR(rows[1].grad_ratio, 1.0, 0.05);
    EXPECT_LT(rows[1].id_residual, 1e-7);
}

TEST(Scenarios, EuclideanGaussianFamilyStableUnderTimeSampling) {
    auto spec = make_euclidean();
    auto a = detail::family_run(spec, 192, 16, 12.0, 0.0, 9);
    auto b = detail::family_run(spec, 192, 16, 12.0, 0.0, 18);
    EXPECT_TRUE(std::isfinite(a.ratio44));
    EXPECT_NEAR(a.ratio44, b.ratio44, 0.01 * a.ratio44);
    EXPECT_GT(a.x_ratio, 0.0);
}
