#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>

#include <gtest/gtest.h>

#include <sketchreg/experiment.hpp>

using namespace sketchreg;
namespace fs = std::filesystem;

namespace {

ExperimentConfig small_psi_config() {
  ExperimentConfig c;
  c.model.n = 64;
  c.model.p = 24;
  c.model.beta = RandomIsotropicBeta{2.0};
  c.model.noise_sd = 1.0;
  c.axis = Axis::Psi;
  c.series = {{"haar", SketchKind::HaarOrthogonal}, {"iid", SketchKind::IIDGaussian}};
  c.delta = 0.25;
  c.replications = 8;
  c.n_test = 20;
  c.base_seed = 42;
  return c;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

fs::path scratch(const std::string& name) {
  const auto d = fs::temp_directory_path() / ("sketchreg_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

}  // namespace

TEST(Sweep, DeterministicAndWorkerIndependent) {
  auto c = small_psi_config();
  const auto a = run_sweep(c);
  c.workers = 4;
  const auto b = run_sweep(c);
  ASSERT_EQ(a.points.size(), b.points.size());
  ASSERT_EQ(a.points.size(), 8u);
  for (std::size_t i = 0; i < a.points.size(); ++i) EXPECT_EQ(a.points[i].rep_risk, b.points[i].rep_risk);
}

TEST(Sweep, SeriesShareReplicationSeeds) {
  const auto res = run_sweep(small_psi_config());
  for (const auto& p : res.points)
    for (const auto& q : res.points)
      if (p.grid_index == q.grid_index) EXPECT_EQ(p.rep_seed, q.rep_seed);
  EXPECT_NE(res.points[0].rep_seed, res.points[1].rep_seed);
}

TEST(Sweep, PointsCarryTheoryAndSizes) {
  const auto res = run_sweep(small_psi_config());
  for (const auto& p : res.points) {
    EXPECT_EQ(p.n, 64);
    EXPECT_EQ(p.p, 24);
    EXPECT_EQ(p.stats.count, 8u);
    ASSERT_TRUE(p.theory.has_value());
    EXPECT_NEAR(p.theory->risk, p.theory->bias + p.theory->variance, 1e-12);
    EXPECT_EQ(p.m, size_for_ratio(psi_grid(0.25)[p.grid_index], 64));
  }
}

TEST(Sweep, ThresholdPointSkipped) {
  auto c = small_psi_config();
  c.model.p = 32;  // p = m at psi = 0.5
  c.series.resize(1);
  const auto res = run_sweep(c);
  for (const auto& p : res.points) EXPECT_NE(p.m, 32);
  EXPECT_EQ(res.points.size(), 3u);
}

TEST(Sweep, OracleEvaluationMatchesTestSetOnAverage) {
  auto c = small_psi_config();
  c.series.resize(1);
  c.replications = 200;
  c.n_test = 200;
  const auto t = run_sweep(c);
  c.risk_eval = RiskEval::Oracle;
  const auto o = run_sweep(c);
  for (std::size_t i = 0; i < t.points.size(); ++i)
    EXPECT_NEAR(t.points[i].stats.mean, o.points[i].stats.mean,
                4.0 * std::hypot(t.points[i].stats.se, o.points[i].stats.se) + 0.05 * o.points[i].stats.mean);
}

TEST(Sweep, RedrawXChangesDraws) {
  auto c = small_psi_config();
  c.series.resize(1);
  const auto fixed = run_sweep(c);
  c.redraw_x = true;
  const auto redraw = run_sweep(c);
  EXPECT_NE(fixed.points[0].rep_risk, redraw.points[0].rep_risk);
  EXPECT_EQ(redraw.points[0].rep_risk, run_sweep(c).points[0].rep_risk);
}

TEST(Sweep, MonteCarloMeanNearLimitForIsotropicFeatures) {
  ExperimentConfig c;
  c.model.n = 400;
  c.model.p = 200;
  c.model.beta = RandomIsotropicBeta{5.0};
  c.model.noise_sd = 5.0;
  c.series = {{"haar", SketchKind::HaarOrthogonal}};
  c.delta = 0.25;
  c.replications = 60;
  c.base_seed = 9;
  c.workers = 2;
  const auto res = run_sweep(c);
  for (const auto& p : res.points) {
    if (std::abs(p.phi() / p.psi() - 1.0) <= 0.2) continue;
    EXPECT_NEAR(p.stats.mean, p.theory->risk, std::max(3.0 * p.stats.se, 0.07 * p.theory->risk)) << p.psi();
  }
}

TEST(Sweep, PhiAxisWithClosedAndValidationRules) {
  ExperimentConfig c;
  c.model.n = 100;
  c.model.beta = RandomIsotropicBeta{6.0};
  c.model.noise_sd = 2.0;
  c.axis = Axis::Phi;
  c.phi_grid = {0.5, 1.15, 2.0};
  c.series = {{"full", SketchKind::Identity, SizeRule::Full},
              {"haar_opt", SketchKind::HaarOrthogonal, SizeRule::Closed},
              {"val", SketchKind::HaarOrthogonal, SizeRule::Validation, 40, ValidationMode::Labels}};
  c.delta = 0.1;
  c.replications = 5;
  c.n_test = 30;
  c.base_seed = 3;
  const auto res = run_sweep(c);
  ASSERT_EQ(res.points.size(), 9u);
  for (const auto& p : res.points) {
    EXPECT_EQ(p.p, size_for_ratio(c.phi_grid[p.grid_index], 100));
    if (p.series == "full") EXPECT_EQ(p.m, 100);
    if (p.series == "haar_opt") EXPECT_EQ(p.m, optimal_m_closed(6, 2, p.phi(), 100).m_star);
    if (p.series == "val") {
      EXPECT_FALSE(p.theory.has_value());
      for (auto m : p.rep_m) EXPECT_TRUE(m >= 0 && m <= 100);
    }
  }
}

TEST(Sweep, ConfigValidation) {
  auto c = small_psi_config();
  c.replications = 0;
  EXPECT_THROW(run_sweep(c), std::invalid_argument);
  c = small_psi_config();
  c.series.clear();
  EXPECT_THROW(run_sweep(c), std::invalid_argument);
  c = small_psi_config();
  c.series = {{"full", SketchKind::Identity}};
  EXPECT_THROW(run_sweep(c), std::invalid_argument);
  c = small_psi_config();
  c.axis = Axis::Phi;
  EXPECT_THROW(run_sweep(c), std::invalid_argument);
}

TEST(Output, SweepFilesAndColumns) {
  const auto c = small_psi_config();
  const auto res = run_sweep(c);
  const auto dir = scratch("sweep_files");
  const auto files = write_sweep(res, c, dir, "run");
  ASSERT_EQ(files.size(), 4u);
  EXPECT_TRUE(fs::exists(dir / "run_summary.csv"));
  EXPECT_TRUE(fs::exists(dir / "run_reps.csv"));
  EXPECT_TRUE(fs::exists(dir / "run_haar.csv"));
  std::istringstream haar(slurp(dir / "run_haar.csv"));
  std::string header, mc, lim;
  std::getline(haar, header);
  std::getline(haar, mc);
  std::getline(haar, lim);
  EXPECT_EQ(header, "n,p,m,phi,psi,kind,origin,bias,variance,risk,reps,seed");
  EXPECT_NE(mc.find(",integrated,monte_carlo,,,"), std::string::npos);
  EXPECT_NE(lim.find(",integrated,limit,"), std::string::npos);
  std::istringstream reps(slurp(dir / "run_reps.csv"));
  std::string line;
  std::size_t count = 0;
  while (std::getline(reps, line)) ++count;
  EXPECT_EQ(count, 1 + 8 * res.points.size());
  fs::remove_all(dir);
}

TEST(Output, ConfigJsonRoundTrip) {
  ExperimentConfig c = small_psi_config();
  c.series.push_back({"val", SketchKind::HaarOrthogonal, SizeRule::Validation, 30, ValidationMode::Labels});
  c.redraw_x = true;
  c.risk_eval = RiskEval::Oracle;
  const auto r = experiment_config_from_json(to_json(c));
  EXPECT_EQ(to_json(r), to_json(c));
}

TEST(Output, ManifestListsFiles) {
  const auto dir = scratch("manifest");
  write_manifest(dir / "m.json", {{"k", 1}}, {dir / "a.csv", dir / "b.csv"});
  const auto j = nlohmann::json::parse(slurp(dir / "m.json"));
  EXPECT_EQ(j.at("version"), kVersion);
  EXPECT_EQ(j.at("files"), (nlohmann::json{"a.csv", "b.csv"}));
  EXPECT_EQ(j.at("eigen").get<std::string>().substr(0, 3), "3.4");
  fs::remove_all(dir);
}

TEST(Curves, Grids) {
  const auto g = log_grid(0.1, 10.0, 40);
  EXPECT_EQ(g.size(), 40u);
  EXPECT_DOUBLE_EQ(g.front(), 0.1);
  EXPECT_DOUBLE_EQ(g.back(), 10.0);
  for (std::size_t i = 1; i < g.size(); ++i) EXPECT_NEAR(g[i] / g[i - 1], std::pow(100.0, 1.0 / 39.0), 1e-12);
  const auto u = uniform_grid(0.005, 1.0, 0.005);
  EXPECT_EQ(u.size(), 200u);
  EXPECT_DOUBLE_EQ(u.back(), 1.0);
  EXPECT_DOUBLE_EQ(u[2], 0.015);
}

TEST(Curves, PsiCurveSkipsThresholdAndTagsFamilies) {
  const auto rows = theory_curve_psi(make_point_mass(1.0), {SketchFamily::Orthogonal, SketchFamily::IID}, 0.5, 1, 1,
                                     {0.25, 0.5, 0.75, 1.0});
  ASSERT_EQ(rows.size(), 6u);
  EXPECT_EQ(rows[0].first, "orthogonal");
  EXPECT_EQ(rows[3].first, "iid");
  EXPECT_EQ(rows[0].second.regime, Regime::Over);
  EXPECT_EQ(rows[1].second.regime, Regime::Under);
  EXPECT_NEAR(rows[2].second.risk, rows[5].second.risk, 1e-12);  // psi = 1 is the same estimator
}

TEST(Figures, PanelDefinitions) {
  const auto f1 = figure_panels(1, Scale::Desk, 0);
  ASSERT_EQ(f1.size(), 2u);
  EXPECT_EQ(f1[0].config.model.n, 400);
  EXPECT_EQ(f1[0].config.model.p, 200);
  EXPECT_EQ(f1[0].config.replications, 100u);
  EXPECT_EQ(figure_panels(1, Scale::Full, 0)[0].config.replications, 500u);
  EXPECT_EQ(figure_panels(4, Scale::Full, 0)[0].config.phi_grid.size(), 40u);
  EXPECT_EQ(figure_panels(6, Scale::Desk, 0)[1].config.series.size(), 5u);
  EXPECT_TRUE(figure_panels(5, Scale::Desk, 0).empty());
  EXPECT_THROW(figure_panels(7, Scale::Desk, 0), std::invalid_argument);
  EXPECT_NE(f1[0].config.base_seed, f1[1].config.base_seed);
}

TEST(Figures, TheoryOnlyFigureWritesTuningTrace) {
  const auto dir = scratch("fig5");
  const auto files = reproduce_figure(5, Scale::Desk, 1, dir);
  EXPECT_EQ(files.size(), 5u);
  std::istringstream in(slurp(dir / "fig5_p424_tuning.csv"));
  std::string line, last;
  while (std::getline(in, line)) last = line;
  EXPECT_EQ(last.substr(0, 4), "240,");
  EXPECT_EQ(last.substr(last.size() - 2), ",1");
  fs::remove_all(dir);
}

TEST(Figures, SmallFigureIsByteReproducible) {
  const auto a = scratch("fig2a"), b = scratch("fig2b");
  const auto fa = reproduce_figure(2, Scale::Desk, 5, a, 2, 3);
  const auto fb = reproduce_figure(2, Scale::Desk, 5, b, 1, 3);
  ASSERT_EQ(fa.size(), fb.size());
  for (std::size_t i = 0; i < fa.size(); ++i) {
    EXPECT_EQ(fa[i].filename(), fb[i].filename());
    EXPECT_EQ(slurp(fa[i]), slurp(fb[i])) << fa[i];
  }
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(Clt, CheckProducesStandardizedStatistic) {
  CLTSetting s{.phi = 0.25, .psi = 0.5, .alpha = 5.0, .sigma = 5.0, .n = 200, .p = 50, .m = 100};
  const auto r = clt_check(CLTStatistic::IntegratedRisk, s, SketchKind::HaarOrthogonal, 40, 3, 2);
  EXPECT_EQ(r.statistic.size(), 40u);
  EXPECT_NEAR(r.params.mean, 25.0, 1e-9);
  // the statistic is O(1) in p, not O(p)
  EXPECT_LT(std::abs(r.stats.mean), 10.0 * std::sqrt(r.params.variance));
  EXPECT_THROW(clt_check(CLTStatistic::IntegratedRisk, s, SketchKind::IIDGaussian, 10, 3), std::invalid_argument);
}

TEST(Timing, BenchAndFit) {
  const auto rows = bench_time(128, 16, {0.25, 0.5}, SketchKind::SRHT, 1);
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0].kind, "full");
  EXPECT_EQ(rows[0].m, 128);
  EXPECT_EQ(rows[1].m, 32);
  for (const auto& r : rows) EXPECT_GT(r.seconds, 0.0);

  std::vector<TimingRow> synth{{1000, 100, 1000, "full", 2e-9 * 1000 * 100 * 100}};
  for (Eigen::Index m : {100, 300, 600})
    synth.push_back({1000, 100, m, "srht", 1e-9 * 100 * 1000 * std::log(1000.0) + 3e-9 * m * 100 * 100});
  const auto fit = fit_timing_model(synth);
  EXPECT_NEAR(fit.c1, 2e-9, 1e-15);
  EXPECT_NEAR(fit.c2, 1e-9, 1e-13);
  EXPECT_NEAR(fit.c3, 3e-9, 1e-13);
}
