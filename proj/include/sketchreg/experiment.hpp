#pragma once

// Seeded Monte-Carlo sweeps over psi (fixed p) or phi (p = [n phi]) with the
// matching limits written next to the empirical means.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "covariance.hpp"
#include "csv.hpp"
#include "detail/parallel.hpp"
#include "detail/random.hpp"
#include "estimator.hpp"
#include "measures.hpp"
#include "model.hpp"
#include "sketch.hpp"
#include "theory.hpp"
#include "tuning.hpp"

namespace sketchreg {

inline constexpr const char* kVersion = "1.0.0";

enum class Axis { Psi, Phi };
/// How a phi-axis series picks m at each grid point.
enum class SizeRule { Full, Closed, Grid, Validation };
enum class RiskEval { TestSet, Oracle };

inline std::string to_string(Axis a) { return a == Axis::Psi ? "psi" : "phi"; }
inline std::string to_string(SizeRule r) {
  switch (r) {
    case SizeRule::Full: return "full";
    case SizeRule::Closed: return "closed";
    case SizeRule::Grid: return "grid";
    case SizeRule::Validation: return "validation";
  }
  return "unknown";
}
inline std::string to_string(RiskEval r) { return r == RiskEval::TestSet ? "test_set" : "oracle"; }

inline Axis axis_from_string(const std::string& s) {
  if (s == "psi") return Axis::Psi;
  if (s == "phi") return Axis::Phi;
  throw std::invalid_argument("unknown axis '" + s + "'");
}
inline SizeRule size_rule_from_string(const std::string& s) {
  if (s == "full") return SizeRule::Full;
  if (s == "closed") return SizeRule::Closed;
  if (s == "grid") return SizeRule::Grid;
  if (s == "validation") return SizeRule::Validation;
  throw std::invalid_argument("unknown size rule '" + s + "'");
}
inline RiskEval risk_eval_from_string(const std::string& s) {
  if (s == "test_set") return RiskEval::TestSet;
  if (s == "oracle") return RiskEval::Oracle;
  throw std::invalid_argument("unknown risk evaluation '" + s + "'");
}
inline ValidationMode validation_mode_from_string(const std::string& s) {
  if (s == "oracle") return ValidationMode::OracleBeta;
  if (s == "labels") return ValidationMode::Labels;
  throw std::invalid_argument("unknown validation mode '" + s + "'");
}

struct SeriesSpec {
  std::string name;
  SketchKind kind = SketchKind::HaarOrthogonal;
  SizeRule size = SizeRule::Grid;  ///< phi axis only
  Eigen::Index n_val = 0;          ///< validation rule only
  ValidationMode validation = ValidationMode::OracleBeta;
};

struct ExperimentConfig {
  ModelConfig model;  ///< p is ignored on the phi axis
  Axis axis = Axis::Psi;
  std::vector<SeriesSpec> series;
  double delta = 0.05;
  std::vector<double> phi_grid;
  std::size_t replications = 100;
  Eigen::Index n_test = 100;
  std::uint64_t base_seed = 0;
  bool redraw_x = false;
  unsigned workers = 1;
  RiskEval risk_eval = RiskEval::TestSet;
};

/// Spectrum H of Sigma as a measure.
inline SpectralMeasure feature_spectrum(const ModelConfig& m) {
  if (m.sigma_eigenvalues)
    return make_empirical(std::vector<double>(m.sigma_eigenvalues->begin(), m.sigma_eigenvalues->end()));
  return m.sigma_spec;
}

inline void validate(const ExperimentConfig& c) {
  validate(c.model);
  if (c.replications < 1) throw std::invalid_argument("replications must be at least 1");
  if (c.n_test < 1) throw std::invalid_argument("n_test must be at least 1");
  if (c.series.empty()) throw std::invalid_argument("experiment has no series");
  if (!(c.delta > 0.0) || c.delta > 0.5) throw std::invalid_argument("delta must lie in (0, 0.5]");
  if (c.axis == Axis::Phi) {
    if (c.phi_grid.empty()) throw std::invalid_argument("phi axis needs a phi grid");
    if (!std::holds_alternative<RandomIsotropicBeta>(c.model.beta))
      throw std::invalid_argument("phi sweeps need a random isotropic beta");
    if (c.model.sigma_eigenvalues) throw std::invalid_argument("phi sweeps need a spectral measure for Sigma");
    for (double phi : c.phi_grid)
      if (!(phi > 0.0)) throw std::invalid_argument("phi grid values must be positive");
  }
  for (const auto& s : c.series) {
    if (s.name.empty()) throw std::invalid_argument("series needs a name");
    if (s.size == SizeRule::Validation && s.n_val < 1) throw std::invalid_argument("validation series needs n_val");
    if (s.kind == SketchKind::Identity && c.axis == Axis::Psi)
      throw std::invalid_argument("identity sketch has no psi sweep");
  }
}

/// One (series, grid point) aggregate.
struct SeriesPoint {
  std::string series;
  std::size_t grid_index = 0;
  Eigen::Index n = 0, p = 0, m = 0;
  std::string sketch;
  detail::MeanStats stats;
  double mean_m = 0.0;
  std::optional<AsymptoticRisk> theory;
  std::vector<double> rep_risk;
  std::vector<std::uint64_t> rep_seed;
  std::vector<Eigen::Index> rep_m;

  double phi() const { return static_cast<double>(p) / static_cast<double>(n); }
  double psi() const { return static_cast<double>(m) / static_cast<double>(n); }
};

struct SweepResult {
  std::vector<SeriesPoint> points;
};

namespace detail {

inline std::uint64_t replication_seed(std::uint64_t base, std::size_t grid_index, std::size_t rep) {
  return derive_seed(base, {static_cast<std::uint64_t>(Stream::replication), grid_index, rep});
}

inline double alpha_of(const BetaMode& b) {
  if (const auto* r = std::get_if<RandomIsotropicBeta>(&b)) return r->alpha;
  return std::get<DeterministicBeta>(b).vector.norm();
}

/// Limit at (p/n, m/n); empty at the threshold. m = 0 is the null estimator.
inline std::optional<AsymptoticRisk> point_theory(const SpectralMeasure& H, SketchFamily family, Eigen::Index n,
                                                  Eigen::Index p, Eigen::Index m, const BetaMode& beta,
                                                  const Covariance& sigma, double noise_sd) {
  const double phi = static_cast<double>(p) / static_cast<double>(n);
  if (m == 0) {
    AsymptoticRisk r;
    r.phi = phi;
    r.regime = Regime::Over;
    if (const auto* d = std::get_if<DeterministicBeta>(&beta))
      r.bias = sigma.quad(d->vector);
    else
      r.bias = alpha_of(beta) * alpha_of(beta) * H.integrate([](double x) { return x; });
    r.risk = r.bias;
    return r;
  }
  const double psi = static_cast<double>(m) / static_cast<double>(n);
  if (std::abs(phi / psi - 1.0) < kThresholdGuard) return std::nullopt;
  if (const auto* d = std::get_if<DeterministicBeta>(&beta)) {
    AsymptoticRisk r = theory_risk(H, family, phi, psi, 0.0, noise_sd);
    if (r.regime == Regime::Over && d->vector.squaredNorm() > 0.0)
      r.bias = deterministic_bias_over(H, vesd(d->vector, sigma), phi, psi, d->vector.squaredNorm());
    r.risk = r.bias + r.variance;
    return r;
  }
  return theory_risk(H, family, phi, psi, alpha_of(beta), noise_sd);
}

/// Fixed training design shared by all replications of one point.
struct PointSetup {
  Covariance sigma = Covariance::identity(1);
  Eigen::MatrixXd X;
  Eigen::Index m = 0;
  std::shared_ptr<const SketchedDesign> design;  ///< null for m = 0
  std::shared_ptr<const ValidationSelector> selector;
};

inline SketchOperator point_sketch(SketchKind kind, Eigen::Index m, Eigen::Index n, std::uint64_t seed) {
  return m == n ? make_identity(n) : make_sketch(kind, m, n, seed);
}

}  // namespace detail

/// Runs every series over its grid. Replication r at grid index g always uses
/// seed hash(base_seed, g, r), so series at the same point share beta, noise
/// and test draws.
inline SweepResult run_sweep(const ExperimentConfig& cfg) {
  validate(cfg);
  const SpectralMeasure H = feature_spectrum(cfg.model);
  const Eigen::Index n = cfg.model.n;
  const double alpha = detail::alpha_of(cfg.model.beta);
  const double noise_sd = cfg.model.noise_sd;
  SweepResult out;

  struct Task {
    std::size_t series_index;
    std::size_t grid_index;
    Eigen::Index p;
    Eigen::Index m;  ///< -1 for validation selection
  };
  std::vector<Task> tasks;
  if (cfg.axis == Axis::Psi) {
    const auto grid = psi_grid(cfg.delta);
    for (std::size_t s = 0; s < cfg.series.size(); ++s)
      for (std::size_t g = 0; g < grid.size(); ++g) {
        const Eigen::Index m = size_for_ratio(grid[g], n);
        if (m < 1) continue;
        if (std::abs(static_cast<double>(cfg.model.p) / static_cast<double>(m) - 1.0) < kThresholdGuard) continue;
        tasks.push_back({s, g, cfg.model.p, m});
      }
  } else {
    for (std::size_t s = 0; s < cfg.series.size(); ++s)
      for (std::size_t g = 0; g < cfg.phi_grid.size(); ++g) {
        const Eigen::Index p = std::max<Eigen::Index>(1, size_for_ratio(cfg.phi_grid[g], n));
        const double phi_n = static_cast<double>(p) / static_cast<double>(n);
        const auto& sp = cfg.series[s];
        Eigen::Index m = n;
        switch (sp.size) {
          case SizeRule::Full: m = n; break;
          case SizeRule::Closed: m = optimal_m_closed(alpha, noise_sd, phi_n, n).m_star; break;
          case SizeRule::Grid:
            m = optimal_m_grid(H, family_of(sp.kind), alpha, noise_sd, phi_n, n, cfg.delta).m_star;
            break;
          case SizeRule::Validation: m = -1; break;
        }
        if (m > 0 && std::abs(phi_n * static_cast<double>(n) / static_cast<double>(m) - 1.0) < kThresholdGuard)
          continue;
        tasks.push_back({s, g, p, m});
      }
  }

  for (const Task& t : tasks) {
    const SeriesSpec& sp = cfg.series[t.series_index];
    const bool validation = t.m < 0;
    const Covariance sigma = cfg.axis == Axis::Psi ? realize_covariance(cfg.model) : make_covariance(H, t.p);
    const std::uint64_t x_seed = derive_seed(cfg.base_seed, Stream::features, t.grid_index);
    const std::uint64_t s_seed = derive_seed(cfg.base_seed, {static_cast<std::uint64_t>(Stream::sketch),
                                                             t.series_index, t.grid_index});

    auto build = [&](std::uint64_t xs) {
      detail::PointSetup ps;
      ps.sigma = sigma;
      ps.X = sample_features(n, sigma, xs);
      ps.m = t.m;
      if (validation)
        ps.selector = std::make_shared<const ValidationSelector>(ps.X, sp.kind, cfg.delta, s_seed);
      else if (t.m > 0)
        ps.design = std::make_shared<const SketchedDesign>(detail::point_sketch(sp.kind, t.m, n, s_seed), ps.X);
      return ps;
    };
    std::optional<detail::PointSetup> fixed;
    if (!cfg.redraw_x) fixed = build(x_seed);

    struct RepOut {
      double risk;
      Eigen::Index m;
    };
    auto rep_fn = [&](std::size_t r) -> RepOut {
      const std::uint64_t seed = detail::replication_seed(cfg.base_seed, t.grid_index, r);
      std::optional<detail::PointSetup> local;
      if (!fixed) local = build(derive_seed(seed, Stream::features));
      const detail::PointSetup& ps = fixed ? *fixed : *local;
      const Eigen::VectorXd beta = sample_beta(cfg.model.beta, t.p, derive_seed(seed, Stream::beta));
      const Eigen::VectorXd Y = ps.X * beta + gaussian_vector(n, derive_seed(seed, Stream::noise), noise_sd);

      Eigen::VectorXd bh;
      Eigen::Index m_used = ps.m;
      if (validation) {
        const Dataset val = sample_dataset(sp.n_val, sigma, beta, noise_sd, derive_seed(seed, Stream::validation));
        const OptimalSize sel = ps.selector->select(Y, val.X, val.Y, sp.validation, &beta);
        m_used = sel.m_star;
        bh = ps.selector->fit(ps.selector->index_of(sel.m_star), Y);
      } else if (ps.design) {
        bh = ps.design->fit(Y);
      } else {
        bh = Eigen::VectorXd::Zero(t.p);
      }
      double risk;
      if (cfg.risk_eval == RiskEval::Oracle) {
        risk = oracle_risk(bh, beta, sigma);
      } else {
        const Eigen::MatrixXd Xt = sample_features(cfg.n_test, sigma, derive_seed(seed, Stream::test_features));
        risk = empirical_risk(bh, beta, Xt);
      }
      return {risk, m_used};
    };
    const auto reps = detail::parallel_map(cfg.replications, cfg.workers, rep_fn);

    SeriesPoint pt;
    pt.series = sp.name;
    pt.grid_index = t.grid_index;
    pt.n = n;
    pt.p = t.p;
    pt.sketch = to_string(sp.kind);
    std::vector<double> ms;
    for (std::size_t r = 0; r < reps.size(); ++r) {
      pt.rep_risk.push_back(reps[r].risk);
      pt.rep_m.push_back(reps[r].m);
      pt.rep_seed.push_back(detail::replication_seed(cfg.base_seed, t.grid_index, r));
      ms.push_back(static_cast<double>(reps[r].m));
    }
    pt.stats = detail::mean_stats(pt.rep_risk);
    pt.mean_m = detail::mean_stats(ms).mean;
    pt.m = validation ? static_cast<Eigen::Index>(std::lround(pt.mean_m)) : t.m;
    if (!validation)
      pt.theory = detail::point_theory(H, family_of(sp.kind), n, t.p, t.m, cfg.model.beta, sigma, noise_sd);
    out.points.push_back(std::move(pt));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Output

inline const std::vector<std::string> kSummaryColumns = {
    "series", "sketch", "grid_index", "n", "p", "m", "phi", "psi", "mean_risk", "se", "mean_m",
    "theory_bias", "theory_variance", "theory_risk", "reps", "base_seed"};
inline const std::vector<std::string> kReplicationColumns = {"series", "grid_index", "replication", "base_seed",
                                                             "seed",   "m",          "risk"};

/// Writes <prefix>_<series>.csv (RiskReport rows: Monte-Carlo mean, then
/// the limit), <prefix>_summary.csv and <prefix>_reps.csv. Returns the paths.
inline std::vector<std::filesystem::path> write_sweep(const SweepResult& res, const ExperimentConfig& cfg,
                                                      const std::filesystem::path& dir, const std::string& prefix) {
  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> files;
  const auto summary_path = dir / (prefix + "_summary.csv");
  const auto reps_path = dir / (prefix + "_reps.csv");
  csv::Writer summary(summary_path.string(), kSummaryColumns);
  csv::Writer reps(reps_path.string(), kReplicationColumns);
  files.push_back(summary_path);
  files.push_back(reps_path);

  std::vector<std::string> names;
  for (const auto& s : cfg.series) names.push_back(s.name);
  for (const auto& name : names) {
    const auto path = dir / (prefix + "_" + name + ".csv");
    csv::Writer w(path.string(), kRiskReportColumns);
    files.push_back(path);
    for (const auto& pt : res.points) {
      if (pt.series != name) continue;
      RiskReport mc;
      mc.kind = RiskKind::BetaIntegrated;
      mc.origin = RiskOrigin::MonteCarlo;
      mc.risk = pt.stats.mean;
      mc.meta = {pt.n, pt.p, pt.m, pt.stats.count, cfg.base_seed};
      w.write_row(csv_fields(mc));
      if (pt.theory) {
        RiskReport th = mc;
        th.origin = RiskOrigin::AsymptoticLimit;
        th.bias = pt.theory->bias;
        th.variance = pt.theory->variance;
        th.risk = pt.theory->risk;
        w.write_row(csv_fields(th));
      }
    }
  }

  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (const auto& pt : res.points) {
    summary.write_row({pt.series, pt.sketch, csv::format_uint(pt.grid_index), csv::format_int(pt.n),
                       csv::format_int(pt.p), csv::format_int(pt.m), csv::format_real(pt.phi()),
                       csv::format_real(pt.psi()), csv::format_real(pt.stats.mean), csv::format_real(pt.stats.se),
                       csv::format_real(pt.mean_m), csv::format_real(pt.theory ? pt.theory->bias : nan),
                       csv::format_real(pt.theory ? pt.theory->variance : nan),
                       csv::format_real(pt.theory ? pt.theory->risk : nan), csv::format_uint(pt.stats.count),
                       csv::format_uint(cfg.base_seed)});
    for (std::size_t r = 0; r < pt.rep_risk.size(); ++r)
      reps.write_row({pt.series, csv::format_uint(pt.grid_index), csv::format_uint(r), csv::format_uint(cfg.base_seed),
                      csv::format_uint(pt.rep_seed[r]), csv::format_int(pt.rep_m[r]),
                      csv::format_real(pt.rep_risk[r])});
  }
  return files;
}

// ---------------------------------------------------------------------------
// JSON

inline nlohmann::json to_json(const ExperimentConfig& c) {
  nlohmann::json j;
  j["model"] = to_json(c.model);
  j["axis"] = to_string(c.axis);
  j["series"] = nlohmann::json::array();
  for (const auto& s : c.series) {
    nlohmann::json e{{"name", s.name}, {"sketch", to_string(s.kind)}, {"size", to_string(s.size)}};
    if (s.size == SizeRule::Validation) {
      e["n_val"] = s.n_val;
      e["validation"] = to_string(s.validation);
    }
    j["series"].push_back(e);
  }
  j["delta"] = c.delta;
  if (c.axis == Axis::Phi) j["phi_grid"] = c.phi_grid;
  j["replications"] = c.replications;
  j["n_test"] = c.n_test;
  j["base_seed"] = c.base_seed;
  j["redraw_x"] = c.redraw_x;
  j["risk_eval"] = to_string(c.risk_eval);
  return j;
}

inline ExperimentConfig experiment_config_from_json(const nlohmann::json& j) {
  ExperimentConfig c;
  c.model = model_config_from_json(j.at("model"));
  c.axis = axis_from_string(j.value("axis", "psi"));
  for (const auto& e : j.at("series")) {
    SeriesSpec s;
    s.kind = sketch_kind_from_string(e.value("sketch", "haar"));
    s.name = e.value("name", to_string(s.kind));
    s.size = size_rule_from_string(e.value("size", "grid"));
    s.n_val = e.value("n_val", Eigen::Index{0});
    s.validation = validation_mode_from_string(e.value("validation", "oracle"));
    c.series.push_back(s);
  }
  c.delta = j.value("delta", 0.05);
  if (j.contains("phi_grid")) c.phi_grid = j.at("phi_grid").get<std::vector<double>>();
  c.replications = j.value("replications", std::size_t{100});
  c.n_test = j.value("n_test", Eigen::Index{100});
  c.base_seed = j.value("base_seed", std::uint64_t{0});
  c.redraw_x = j.value("redraw_x", false);
  c.risk_eval = risk_eval_from_string(j.value("risk_eval", "test_set"));
  validate(c);
  return c;
}

inline void write_manifest(const std::filesystem::path& path, const nlohmann::json& config,
                           const std::vector<std::filesystem::path>& files) {
  nlohmann::json j;
  j["version"] = kVersion;
  j["eigen"] = std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
               std::to_string(EIGEN_MINOR_VERSION);
  j["config"] = config;
  j["files"] = nlohmann::json::array();
  for (const auto& f : files) j["files"].push_back(f.filename().string());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write manifest " + path.string());
  out << j.dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// Theory curves

/// Limits along psi for fixed phi, one block per family.
inline std::vector<std::pair<std::string, AsymptoticRisk>> theory_curve_psi(const SpectralMeasure& H,
                                                                            const std::vector<SketchFamily>& families,
                                                                            double phi, double alpha, double sigma,
                                                                            const std::vector<double>& psis) {
  std::vector<std::pair<std::string, AsymptoticRisk>> out;
  for (const auto f : families)
    for (const double psi : psis) {
      if (std::abs(phi / psi - 1.0) < kThresholdGuard) continue;
      out.emplace_back(to_string(f), theory_risk(H, f, phi, psi, alpha, sigma));
    }
  return out;
}

/// Full-sample limits along phi.
inline std::vector<std::pair<std::string, AsymptoticRisk>> theory_curve_phi(const SpectralMeasure& H, double alpha,
                                                                            double sigma,
                                                                            const std::vector<double>& phis) {
  std::vector<std::pair<std::string, AsymptoticRisk>> out;
  for (const double phi : phis) {
    if (std::abs(phi - 1.0) < kThresholdGuard) continue;
    out.emplace_back("full", theory_risk(H, SketchFamily::Orthogonal, phi, 1.0, alpha, sigma));
  }
  return out;
}

inline void write_theory_curve(const std::filesystem::path& path,
                               const std::vector<std::pair<std::string, AsymptoticRisk>>& rows) {
  csv::Writer w(path.string(), kTheoryCurveColumns);
  for (const auto& [kind, r] : rows) w.write_row(csv_fields(r, kind));
}

/// n log-spaced points on [lo, hi].
inline std::vector<double> log_grid(double lo, double hi, std::size_t count) {
  if (!(lo > 0.0) || !(hi > lo) || count < 2) throw std::invalid_argument("invalid log grid");
  std::vector<double> g(count);
  const double a = std::log(lo), b = std::log(hi);
  for (std::size_t i = 0; i < count; ++i)
    g[i] = std::exp(a + (b - a) * static_cast<double>(i) / static_cast<double>(count - 1));
  g.front() = lo;
  g.back() = hi;
  return g;
}

inline std::vector<double> uniform_grid(double lo, double hi, double step) {
  std::vector<double> g;
  for (long i = 0;; ++i) {
    const double v = lo + static_cast<double>(i) * step;
    if (v > hi + 1e-12) break;
    g.push_back(std::round(v * 1e12) / 1e12);
  }
  return g;
}

// ---------------------------------------------------------------------------
// Figures

enum class Scale { Desk, Full };

inline Scale scale_from_string(const std::string& s) {
  if (s == "desk") return Scale::Desk;
  if (s == "full") return Scale::Full;
  throw std::invalid_argument("unknown scale '" + s + "'");
}

struct FigurePanel {
  std::string name;
  ExperimentConfig config;
};

inline SpectralMeasure two_level_spectrum() { return make_discrete({{2.0, 0.5}, {1.0, 0.5}}); }

/// Experiment definitions behind each figure; figure 5 is theory only and
/// has no panels here.
inline std::vector<FigurePanel> figure_panels(int id, Scale scale, std::uint64_t seed) {
  const std::size_t reps = scale == Scale::Desk ? 100 : 500;
  const std::vector<double> phis = log_grid(0.1, 10.0, scale == Scale::Desk ? 20 : 40);
  auto base = [&](double alpha, double sigma, SpectralMeasure H, std::uint64_t panel) {
    ExperimentConfig c;
    c.model.n = 400;
    c.model.p = 200;
    c.model.sigma_spec = std::move(H);
    c.model.beta = RandomIsotropicBeta{alpha};
    c.model.noise_sd = sigma;
    c.replications = reps;
    c.n_test = 100;
    c.delta = 0.05;
    c.base_seed = derive_seed(seed, Stream::grid_point, panel);
    c.model.seed = c.base_seed;
    return c;
  };
  auto psi_panel = [&](const std::string& name, double a, double s, SpectralMeasure H, std::uint64_t k) {
    FigurePanel fp{name, base(a, s, std::move(H), k)};
    fp.config.axis = Axis::Psi;
    fp.config.series = {{"haar", SketchKind::HaarOrthogonal}, {"iid", SketchKind::IIDGaussian}};
    return fp;
  };
  auto phi_panel = [&](const std::string& name, double a, double s, SpectralMeasure H, std::uint64_t k,
                       std::vector<SeriesSpec> series) {
    FigurePanel fp{name, base(a, s, std::move(H), k)};
    fp.config.axis = Axis::Phi;
    fp.config.phi_grid = phis;
    fp.config.series = std::move(series);
    return fp;
  };
  const SeriesSpec full{"full", SketchKind::Identity, SizeRule::Full};
  switch (id) {
    case 1:
      return {psi_panel("a5_s5", 5, 5, make_point_mass(1.0), 0), psi_panel("a15_s5", 15, 5, make_point_mass(1.0), 1)};
    case 2:
      return {phi_panel("a3_s4", 3, 4, make_point_mass(1.0), 0,
                        {full, {"haar_opt", SketchKind::HaarOrthogonal, SizeRule::Closed}}),
              phi_panel("a6_s2", 6, 2, make_point_mass(1.0), 1,
                        {full, {"haar_opt", SketchKind::HaarOrthogonal, SizeRule::Closed}})};
    case 3:
      return {psi_panel("a3_s3", 3, 3, two_level_spectrum(), 0), psi_panel("a9_s3", 9, 3, two_level_spectrum(), 1)};
    case 4:
      return {phi_panel("a6_s3", 6, 3, two_level_spectrum(), 0,
                        {full,
                         {"haar_opt", SketchKind::HaarOrthogonal, SizeRule::Grid},
                         {"iid_opt", SketchKind::IIDGaussian, SizeRule::Grid}})};
    case 5: return {};
    case 6: {
      auto series = [&](SizeRule opt) {
        std::vector<SeriesSpec> s{full, {"haar_opt", SketchKind::HaarOrthogonal, opt}};
        for (Eigen::Index nv : {20, 100, 200})
          s.push_back({"val_" + std::to_string(nv), SketchKind::HaarOrthogonal, SizeRule::Validation, nv});
        return s;
      };
      return {phi_panel("isotropic", 6, 3, make_point_mass(1.0), 0, series(SizeRule::Closed)),
              phi_panel("correlated", 6, 3, two_level_spectrum(), 1, series(SizeRule::Grid))};
    }
    default: throw std::invalid_argument("unknown figure id " + std::to_string(id) + " (expected 1..6)");
  }
}

/// Runs one figure and writes its CSVs plus a manifest into `dir`. Returns
/// the files written.
inline std::vector<std::filesystem::path> reproduce_figure(int id, Scale scale, std::uint64_t seed,
                                                           const std::filesystem::path& dir, unsigned workers = 1,
                                                           std::optional<std::size_t> reps = std::nullopt) {
  if (id < 1 || id > 6) throw std::invalid_argument("unknown figure id " + std::to_string(id) + " (expected 1..6)");
  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> files;
  nlohmann::json echo{{"figure", id}, {"scale", scale == Scale::Desk ? "desk" : "full"}, {"seed", seed},
                      {"panels", nlohmann::json::array()}};
  const std::string stem = "fig" + std::to_string(id);
  const std::vector<double> fine_psi = uniform_grid(0.005, 1.0, 0.005);

  if (id == 5) {
    const SpectralMeasure H = two_level_spectrum();
    for (const Eigen::Index p : {Eigen::Index{200}, Eigen::Index{424}}) {
      const double phi = static_cast<double>(p) / 400.0;
      const auto path = dir / (stem + "_p" + std::to_string(p) + "_theory.csv");
      write_theory_curve(path, theory_curve_psi(H, {SketchFamily::Orthogonal}, phi, 6.0, 3.0, fine_psi));
      files.push_back(path);
      const auto tpath = dir / (stem + "_p" + std::to_string(p) + "_tuning.csv");
      csv::Writer w(tpath.string(), kTuningTraceColumns);
      write_tuning_trace(w, optimal_m_grid(H, SketchFamily::Orthogonal, 6.0, 3.0, phi, 400, 0.05), "theory");
      files.push_back(tpath);
      echo["panels"].push_back({{"p", p}, {"alpha", 6.0}, {"sigma", 3.0}, {"n", 400}});
    }
  }

  for (auto& panel : figure_panels(id, scale, seed)) {
    panel.config.workers = workers;
    if (reps) panel.config.replications = *reps;
    const std::string prefix = stem + "_" + panel.name;
    const SweepResult res = run_sweep(panel.config);
    for (auto& f : write_sweep(res, panel.config, dir, prefix)) files.push_back(std::move(f));

    const auto& m = panel.config.model;
    const SpectralMeasure H = feature_spectrum(m);
    const double alpha = detail::alpha_of(m.beta);
    const auto tpath = dir / (prefix + "_theory.csv");
    if (panel.config.axis == Axis::Psi) {
      write_theory_curve(tpath, theory_curve_psi(H, {SketchFamily::Orthogonal, SketchFamily::IID}, m.aspect_ratio(),
                                                 alpha, m.noise_sd, fine_psi));
    } else {
      write_theory_curve(tpath, theory_curve_phi(H, alpha, m.noise_sd, log_grid(0.1, 10.0, 200)));
    }
    files.push_back(tpath);
    echo["panels"].push_back(nlohmann::json{{"name", panel.name}, {"config", to_json(panel.config)}});
  }
  const auto manifest = dir / (stem + "_manifest.json");
  write_manifest(manifest, echo, files);
  files.push_back(manifest);
  return files;
}

// ---------------------------------------------------------------------------
// CLT check

struct CLTCheck {
  CLTParams params;
  std::vector<double> statistic;  ///< scale * (risk - centering), one per replication
  detail::MeanStats stats;
};

/// Replicates the exact beta-integrated risk of a fixed sketch with X redrawn
/// each time (Sigma = I) and standardizes it with clt_params.
inline CLTCheck clt_check(CLTStatistic stat, const CLTSetting& s, SketchKind kind, std::size_t reps,
                          std::uint64_t seed, unsigned workers = 1) {
  if (reps < 2) throw std::invalid_argument("need at least two replications");
  if (family_of(kind) != s.family) throw std::invalid_argument("sketch kind differs from the CLT family");
  CLTCheck out;
  const Regime regime = detail::regime_of(s.phi, s.psi);
  out.params = clt_params(stat, regime, s);
  const SketchOperator S = detail::point_sketch(kind, s.m, s.n, derive_seed(seed, Stream::sketch));
  const Covariance sigma = Covariance::identity(s.p);
  const double scale = out.params.scale_factor(s.p);
  out.statistic = detail::parallel_map(reps, workers, [&](std::size_t r) {
    const std::uint64_t rs = derive_seed(seed, Stream::replication, r);
    const Eigen::MatrixXd X = sample_features(s.n, sigma, derive_seed(rs, Stream::features));
    const SketchedDesign d(S, X);
    double risk;
    if (stat == CLTStatistic::IntegratedRisk) {
      risk = d.integrated_bias(s.alpha, sigma) + d.variance(s.sigma, sigma);
    } else {
      const Eigen::VectorXd beta = sample_beta(RandomIsotropicBeta{s.alpha}, s.p, derive_seed(rs, Stream::beta));
      risk = d.conditional_bias(beta, sigma) + d.variance(s.sigma, sigma);
    }
    return scale * (risk - out.params.centering);
  });
  out.stats = detail::mean_stats(out.statistic);
  return out;
}

// ---------------------------------------------------------------------------
// Timing

struct TimingRow {
  Eigen::Index n, p, m;
  std::string kind;
  double seconds;
};

struct TimingFit {
  double c1 = 0.0;  ///< t_full ~ c1 n p^2
  double c2 = 0.0;  ///< t_sketch ~ c2 p n log n + c3 m p^2
  double c3 = 0.0;
};

namespace detail {
template <class F>
double median_seconds(F&& f, int repeats = 5) {
  std::vector<double> t;
  for (int i = 0; i < repeats; ++i) {
    const auto start = std::chrono::steady_clock::now();
    f();
    t.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
  }
  std::sort(t.begin(), t.end());
  return t[t.size() / 2];
}
}  // namespace detail

/// Median-of-5 wall times of the full fit (kind "full", m = n) and of
/// sketch-apply + fit at each psi. Sketch construction is not timed.
inline std::vector<TimingRow> bench_time(Eigen::Index n, Eigen::Index p, const std::vector<double>& psis,
                                         SketchKind kind, std::uint64_t seed) {
  const Eigen::MatrixXd X = gaussian_matrix(n, p, derive_seed(seed, Stream::features));
  const Eigen::VectorXd Y = gaussian_vector(n, derive_seed(seed, Stream::noise));
  std::vector<TimingRow> rows;
  volatile double sink = 0.0;
  rows.push_back({n, p, n, "full", detail::median_seconds([&] { sink = sink + minnorm_fit(X, Y)(0); })});
  for (const double psi : psis) {
    const Eigen::Index m = size_for_ratio(psi, n);
    if (m < 1 || m > n) continue;
    const SketchOperator S = make_sketch(kind, m, n, derive_seed(seed, Stream::sketch, static_cast<std::uint64_t>(m)));
    rows.push_back({n, p, m, to_string(kind), detail::median_seconds([&] { sink = sink + sketched_fit(X, Y, S)(0); })});
  }
  return rows;
}

/// Least-squares fit of the timing model to the measured rows.
inline TimingFit fit_timing_model(const std::vector<TimingRow>& rows) {
  TimingFit fit;
  std::vector<const TimingRow*> sk;
  double num = 0.0, den = 0.0;
  for (const auto& r : rows) {
    const double f = static_cast<double>(r.n) * static_cast<double>(r.p) * static_cast<double>(r.p);
    if (r.kind == "full") {
      num += r.seconds * f;
      den += f * f;
    } else {
      sk.push_back(&r);
    }
  }
  if (den > 0.0) fit.c1 = num / den;
  if (sk.size() >= 2) {
    Eigen::MatrixXd A(static_cast<Eigen::Index>(sk.size()), 2);
    Eigen::VectorXd t(A.rows());
    for (Eigen::Index i = 0; i < A.rows(); ++i) {
      const auto& r = *sk[static_cast<std::size_t>(i)];
      const double n = static_cast<double>(r.n), p = static_cast<double>(r.p), m = static_cast<double>(r.m);
      A(i, 0) = p * n * std::log(n);
      A(i, 1) = m * p * p;
      t(i) = r.seconds;
    }
    const Eigen::VectorXd c = minnorm_fit(A, t);
    fit.c2 = c(0);
    fit.c3 = c(1);
  }
  return fit;
}

inline const std::vector<std::string> kTimingColumns = {"n", "p", "m", "kind", "seconds"};

}  // namespace sketchreg
