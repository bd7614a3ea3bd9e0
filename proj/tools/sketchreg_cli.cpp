// sketchreg: experiment runner for sketched ridgeless regression.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include <sketchreg/sketchreg.hpp>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace sketchreg;

namespace {

json read_json(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config '" + path + "'");
  return json::parse(in);
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

SketchFamily family_from_string(const std::string& s) {
  if (s == "orthogonal" || s == "haar" || s == "srht") return SketchFamily::Orthogonal;
  if (s == "iid" || s == "gaussian") return SketchFamily::IID;
  throw std::invalid_argument("unknown sketch family '" + s + "'");
}

SpectralMeasure spectrum_from(const json& cfg) {
  return cfg.contains("sigma_spec") ? measure_from_json(cfg.at("sigma_spec")) : make_point_mass(1.0);
}

struct Common {
  std::string config;
  std::string out = ".";
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> reps;
  unsigned workers = 1;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config, "JSON config file");
  sub->add_option("--out", c.out, "output directory");
  sub->add_option("--seed", c.seed, "base seed (u64)");
  sub->add_option("--reps", c.reps, "replications")->check(CLI::PositiveNumber);
  sub->add_option("--workers", c.workers, "worker threads")->check(CLI::PositiveNumber);
}

// {"sigma_spec":measure,"alpha":a,"sigma":s,"axis":"psi","phi":f,"delta":d,
//  "families":["orthogonal","iid"]} or {"axis":"phi","phi_grid":[..]}
int cmd_theory_curve(const Common& c) {
  const json cfg = read_json(c.config);
  const SpectralMeasure H = spectrum_from(cfg);
  const double alpha = cfg.value("alpha", 1.0), sigma = cfg.value("sigma", 1.0);
  std::vector<std::pair<std::string, AsymptoticRisk>> rows;
  if (cfg.value("axis", "psi") == "psi") {
    std::vector<SketchFamily> fams;
    for (const auto& f : cfg.value("families", std::vector<std::string>{"orthogonal", "iid"}))
      fams.push_back(family_from_string(f));
    const auto psis = cfg.contains("psi_grid") ? cfg.at("psi_grid").get<std::vector<double>>()
                                               : psi_grid(cfg.value("delta", 0.01));
    rows = theory_curve_psi(H, fams, cfg.value("phi", 0.5), alpha, sigma, psis);
  } else {
    const auto phis = cfg.contains("phi_grid") ? cfg.at("phi_grid").get<std::vector<double>>()
                                               : log_grid(0.1, 10.0, 200);
    rows = theory_curve_phi(H, alpha, sigma, phis);
  }
  fs::create_directories(c.out);
  const fs::path path = fs::path(c.out) / "theory_curve.csv";
  write_theory_curve(path, rows);
  std::cout << "wrote " << rows.size() << " rows to " << path.string() << '\n';
  return 0;
}

int cmd_simulate(const Common& c, bool redraw_x) {
  if (c.config.empty()) throw std::invalid_argument("simulate needs --config");
  ExperimentConfig cfg = experiment_config_from_json(read_json(c.config));
  if (c.seed) cfg.base_seed = *c.seed;
  if (c.reps) cfg.replications = *c.reps;
  if (redraw_x) cfg.redraw_x = true;
  cfg.workers = c.workers;
  const SweepResult res = run_sweep(cfg);
  auto files = write_sweep(res, cfg, c.out, "sweep");
  const fs::path manifest = fs::path(c.out) / "sweep_manifest.json";
  write_manifest(manifest, to_json(cfg), files);
  for (const auto& pt : res.points) {
    std::cout << pt.series << " p=" << pt.p << " m=" << pt.m << " mean=" << pt.stats.mean << " se=" << pt.stats.se;
    if (pt.theory) std::cout << " limit=" << pt.theory->risk;
    std::cout << '\n';
  }
  return 0;
}

// {"method":"closed|grid|validation","alpha","sigma","phi","n","delta",
//  "sigma_spec","family"} ; validation adds {"model":{..},"n_val","sketch",
//  "validation":"oracle|labels"}
int cmd_tune(const Common& c) {
  const json cfg = read_json(c.config);
  const std::string method = cfg.value("method", "closed");
  const double delta = cfg.value("delta", 0.05);
  OptimalSize res;
  std::string mode = method;
  Eigen::Index n = 0;
  if (method == "closed" || method == "grid") {
    const double alpha = cfg.at("alpha").get<double>(), sigma = cfg.at("sigma").get<double>();
    const double phi = cfg.at("phi").get<double>();
    n = cfg.at("n").get<Eigen::Index>();
    res = method == "closed"
              ? optimal_m_closed(alpha, sigma, phi, n)
              : optimal_m_grid(spectrum_from(cfg), family_from_string(cfg.value("family", "orthogonal")), alpha, sigma,
                               phi, n, delta);
  } else if (method == "validation") {
    ModelConfig model = model_config_from_json(cfg.at("model"));
    if (c.seed) model.seed = *c.seed;
    n = model.n;
    const Dataset train = sample_dataset(model);
    const Dataset val = sample_dataset(cfg.at("n_val").get<Eigen::Index>(), train.sigma, train.beta, model.noise_sd,
                                       derive_seed(model.seed, Stream::validation));
    const ValidationMode vm = validation_mode_from_string(cfg.value("validation", "oracle"));
    mode = to_string(vm);
    res = select_m_validation(train, val, vm, sketch_kind_from_string(cfg.value("sketch", "haar")), delta,
                              derive_seed(model.seed, Stream::sketch));
  } else {
    throw std::invalid_argument("unknown tuning method '" + method + "'");
  }
  fs::create_directories(c.out);
  {
    csv::Writer w((fs::path(c.out) / "tuning.csv").string(), kTuningTraceColumns);
    write_tuning_trace(w, res, mode);
  }
  write_json(fs::path(c.out) / "tuning.json", {{"m_star", res.m_star},
                                               {"case", to_string(res.case_label)},
                                               {"attained_risk", res.attained_risk},
                                               {"n", n},
                                               {"grid", res.grid}});
  std::cout << "m*=" << res.m_star << " case=" << to_string(res.case_label) << " risk=" << res.attained_risk << '\n';
  return 0;
}

// {"statistic":"integrated|conditional","phi","psi","alpha","sigma","nu4",
//  "n","p","m","sketch"}; with --reps also runs the replication check.
int cmd_clt(const Common& c) {
  const json cfg = read_json(c.config);
  CLTSetting s;
  s.n = cfg.value("n", Eigen::Index{600});
  s.p = cfg.value("p", Eigen::Index{150});
  s.m = cfg.value("m", Eigen::Index{300});
  s.phi = cfg.value("phi", static_cast<double>(s.p) / static_cast<double>(s.n));
  s.psi = cfg.value("psi", static_cast<double>(s.m) / static_cast<double>(s.n));
  s.alpha = cfg.value("alpha", 1.0);
  s.sigma = cfg.value("sigma", 1.0);
  s.nu4 = cfg.value("nu4", 3.0);
  const SketchKind kind = sketch_kind_from_string(cfg.value("sketch", "haar"));
  s.family = family_of(kind);
  const std::string st = cfg.value("statistic", "integrated");
  const CLTStatistic stat = st == "conditional" ? CLTStatistic::ConditionalRisk : CLTStatistic::IntegratedRisk;
  const Regime regime = s.phi / s.psi < 1.0 ? Regime::Under : Regime::Over;
  const CLTParams par = clt_params(stat, regime, s);
  json j{{"statistic", to_string(stat)}, {"regime", to_string(regime)}, {"mean", par.mean},
         {"variance", par.variance},     {"centering", par.centering},  {"scale", to_string(par.scale)}};
  fs::create_directories(c.out);
  if (c.reps) {
    const std::uint64_t seed = c.seed.value_or(0);
    const CLTCheck chk = clt_check(stat, s, kind, *c.reps, seed, c.workers);
    j["replications"] = *c.reps;
    j["seed"] = seed;
    j["sample_mean"] = chk.stats.mean;
    j["sample_variance"] = chk.stats.variance;
    csv::Writer w((fs::path(c.out) / "clt_reps.csv").string(), {"replication", "seed", "statistic"});
    for (std::size_t r = 0; r < chk.statistic.size(); ++r)
      w.write_row({csv::format_uint(r), csv::format_uint(seed), csv::format_real(chk.statistic[r])});
  }
  write_json(fs::path(c.out) / "clt.json", j);
  std::cout << j.dump(2) << '\n';
  return 0;
}

int cmd_bench(const Common& c, Eigen::Index n, Eigen::Index p, const std::string& kind, double delta) {
  const auto rows = bench_time(n, p, psi_grid(delta), sketch_kind_from_string(kind), c.seed.value_or(0));
  fs::create_directories(c.out);
  {
    csv::Writer w((fs::path(c.out) / "timing.csv").string(), kTimingColumns);
    for (const auto& r : rows)
      w.write_row({csv::format_int(r.n), csv::format_int(r.p), csv::format_int(r.m), r.kind,
                   csv::format_real(r.seconds)});
  }
  const TimingFit fit = fit_timing_model(rows);
  write_json(fs::path(c.out) / "timing_fit.json", {{"c1", fit.c1}, {"c2", fit.c2}, {"c3", fit.c3}});
  for (const auto& r : rows) std::cout << r.kind << " m=" << r.m << " " << r.seconds << " s\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sketched ridgeless least squares: limits, simulations, tuning"};
  app.require_subcommand(1);

  Common theory_c, sim_c, tune_c, clt_c, fig_c, bench_c;
  auto* theory = app.add_subcommand("theory-curve", "emit limiting risk curves");
  add_common(theory, theory_c);

  bool redraw_x = false;
  auto* sim = app.add_subcommand("simulate", "Monte-Carlo sweep from an experiment config");
  add_common(sim, sim_c);
  sim->add_flag("--redraw-x", redraw_x, "draw a fresh X for every replication");

  auto* tune = app.add_subcommand("tune", "select the sketch size");
  add_common(tune, tune_c);

  auto* clt = app.add_subcommand("clt", "CLT parameters, optionally with a replication check");
  add_common(clt, clt_c);

  int fig_id = 1;
  std::string scale = "desk";
  auto* fig = app.add_subcommand("reproduce-figure", "run a figure configuration");
  add_common(fig, fig_c);
  fig->add_option("--id", fig_id, "figure 1..6")->required()->check(CLI::Range(1, 6));
  fig->add_option("--scale", scale, "desk or full")->check(CLI::IsMember({"desk", "full"}));

  Eigen::Index bn = 2048, bp = 256;
  std::string bkind = "srht";
  double bdelta = 0.1;
  auto* bench = app.add_subcommand("bench-time", "wall-time of full vs sketched fits");
  add_common(bench, bench_c);
  bench->add_option("--n", bn, "samples")->check(CLI::PositiveNumber);
  bench->add_option("--p", bp, "features")->check(CLI::PositiveNumber);
  bench->add_option("--kind", bkind, "sketch kind");
  bench->add_option("--delta", bdelta, "psi grid step");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*theory) return cmd_theory_curve(theory_c);
    if (*sim) return cmd_simulate(sim_c, redraw_x);
    if (*tune) return cmd_tune(tune_c);
    if (*clt) return cmd_clt(clt_c);
    if (*fig) {
      const auto files = reproduce_figure(fig_id, scale_from_string(scale), fig_c.seed.value_or(0), fig_c.out,
                                          fig_c.workers, fig_c.reps);
      for (const auto& f : files) std::cout << f.string() << '\n';
      return 0;
    }
    if (*bench) return cmd_bench(bench_c, bn, bp, bkind, bdelta);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
