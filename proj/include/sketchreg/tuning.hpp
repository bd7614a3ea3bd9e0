#pragma once

// Choosing the sketch size m: closed form for isotropic features, argmin of
// the limiting risk over a psi grid, and argmin of a validation risk.

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "csv.hpp"
#include "estimator.hpp"
#include "measures.hpp"
#include "model.hpp"
#include "sketch.hpp"
#include "theory.hpp"

namespace sketchreg {

enum class SizeCase { NontrivialSketch, NullEstimator, NoSketch, GridMin, ValidationMin };

inline std::string to_string(SizeCase c) {
  switch (c) {
    case SizeCase::NontrivialSketch: return "nontrivial_sketch";
    case SizeCase::NullEstimator: return "null_estimator";
    case SizeCase::NoSketch: return "no_sketch";
    case SizeCase::GridMin: return "grid_min";
    case SizeCase::ValidationMin: return "validation_min";
  }
  return "unknown";
}

struct GridPoint {
  Eigen::Index m = 0;
  double psi = 0.0;
  double risk = std::numeric_limits<double>::quiet_NaN();
};

struct OptimalSize {
  Eigen::Index m_star = 0;
  SizeCase case_label = SizeCase::NoSketch;
  double attained_risk = 0.0;
  std::vector<double> grid;
  /// one entry per evaluated grid point, in increasing m
  std::vector<GridPoint> trace;
};

/// m = [psi n] read as the integer part; the 1e-9 absorbs products like
/// 0.35 * 400 landing one ulp below an integer.
inline Eigen::Index size_for_ratio(double psi, Eigen::Index n) {
  return static_cast<Eigen::Index>(std::floor(psi * static_cast<double>(n) + 1e-9));
}

/// {delta, 2 delta, ...} below 1, then 1 itself.
inline std::vector<double> psi_grid(double delta) {
  if (!(delta > 0.0) || delta > 0.5) throw std::invalid_argument("grid step delta must lie in (0, 0.5]");
  std::vector<double> g;
  for (long i = 1;; ++i) {
    const double psi = static_cast<double>(i) * delta;
    if (psi >= 1.0 - 1e-12) break;
    g.push_back(psi);
  }
  g.push_back(1.0);
  return g;
}

/// Optimal size for Sigma = I and random isotropic beta.
inline OptimalSize optimal_m_closed(double alpha, double sigma, double phi, Eigen::Index n) {
  if (!(alpha > 0.0) || !(sigma > 0.0) || !(phi > 0.0) || n < 1)
    throw std::invalid_argument("alpha, sigma, phi and n must be positive");
  OptimalSize out;
  if (alpha > sigma && phi > 1.0 - sigma / (2.0 * alpha) && phi <= alpha / (alpha - sigma)) {
    out.case_label = SizeCase::NontrivialSketch;
    out.m_star = std::min(n, size_for_ratio((alpha - sigma) / alpha * phi, n));
    out.attained_risk = sigma * (2.0 * alpha - sigma);
  } else if (alpha <= sigma && phi > alpha * alpha / (alpha * alpha + sigma * sigma)) {
    out.case_label = SizeCase::NullEstimator;
    out.m_star = 0;
    out.attained_risk = alpha * alpha;
  } else {
    out.case_label = SizeCase::NoSketch;
    out.m_star = n;
    out.attained_risk = full_sample_risk(phi, alpha, sigma);
  }
  return out;
}

namespace detail {
/// Index of the smallest finite risk. Values within 1e-12 of the largest
/// finite |risk| on the grid count as ties and go to the later (larger m)
/// point; a purely relative rule would split exact-zero ties by rounding.
inline std::optional<std::size_t> argmin_prefer_last(const std::vector<GridPoint>& pts) {
  double scale = 0.0;
  for (const auto& pt : pts)
    if (std::isfinite(pt.risk)) scale = std::max(scale, std::abs(pt.risk));
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (!std::isfinite(pts[i].risk)) continue;
    if (!best || pts[i].risk <= pts[*best].risk + 1e-12 * scale) best = i;
  }
  return best;
}
}  // namespace detail

/// Argmin over the psi grid of any risk curve psi -> risk. Points within the
/// threshold guard are skipped.
inline OptimalSize optimal_m_grid(const std::function<double(double)>& risk_at, double phi, Eigen::Index n,
                                  double delta) {
  if (n < 1) throw std::invalid_argument("n must be positive");
  OptimalSize out;
  out.case_label = SizeCase::GridMin;
  out.grid = psi_grid(delta);
  for (const double psi : out.grid) {
    if (std::abs(phi / psi - 1.0) < kThresholdGuard) continue;
    out.trace.push_back({size_for_ratio(psi, n), psi, risk_at(psi)});
  }
  const auto best = detail::argmin_prefer_last(out.trace);
  if (!best) throw std::domain_error("no feasible point on the psi grid");
  out.m_star = out.trace[*best].m;
  out.attained_risk = out.trace[*best].risk;
  return out;
}

inline OptimalSize optimal_m_grid(const SpectralMeasure& H, SketchFamily family, double alpha, double sigma,
                                  double phi, Eigen::Index n, double delta) {
  return optimal_m_grid([&](double psi) { return theory_risk(H, family, phi, psi, alpha, sigma).risk; }, phi, n,
                        delta);
}

// ---------------------------------------------------------------------------
// Validation-set selection

enum class ValidationMode { OracleBeta, Labels };

inline std::string to_string(ValidationMode m) { return m == ValidationMode::OracleBeta ? "oracle" : "labels"; }

/// Training design with one sketch per grid size, drawn from
/// (seed, m_i) sub-streams and reused across calls to select(). m = n uses
/// the unsketched fit and m = 0 the null estimator.
class ValidationSelector {
 public:
  ValidationSelector(const Eigen::MatrixXd& X_train, SketchKind kind, double delta, std::uint64_t seed)
      : n_(X_train.rows()), p_(X_train.cols()), grid_(psi_grid(delta)) {
    if (n_ < 1 || p_ < 1) throw std::invalid_argument("training design is empty");
    for (const double psi : grid_) {
      const Eigen::Index m = size_for_ratio(psi, n_);
      if (!sizes_.empty() && sizes_.back() == m) continue;
      sizes_.push_back(m);
      psis_.push_back(psi);
      if (m == 0) {
        designs_.emplace_back(nullptr);
      } else {
        const SketchOperator S = m == n_ ? make_identity(n_)
                                         : make_sketch(kind, m, n_, derive_seed(seed, Stream::validation,
                                                                                static_cast<std::uint64_t>(m)));
        designs_.push_back(std::make_unique<SketchedDesign>(S, X_train));
      }
    }
  }

  const std::vector<Eigen::Index>& sizes() const { return sizes_; }
  const std::vector<double>& grid() const { return grid_; }

  Eigen::VectorXd fit(std::size_t i, const Eigen::VectorXd& Y_train) const {
    if (!designs_[i]) return Eigen::VectorXd::Zero(p_);
    return designs_[i]->fit(Y_train);
  }
  const SketchedDesign* design(std::size_t i) const { return designs_[i].get(); }
  std::size_t index_of(Eigen::Index m) const {
    for (std::size_t i = 0; i < sizes_.size(); ++i)
      if (sizes_[i] == m) return i;
    throw std::out_of_range("size not on the validation grid");
  }

  /// OracleBeta scores (x^T beta_hat - x^T beta)^2 and needs beta; Labels
  /// scores (y - x^T beta_hat)^2.
  OptimalSize select(const Eigen::VectorXd& Y_train, const Eigen::MatrixXd& X_val, const Eigen::VectorXd& Y_val,
                     ValidationMode mode, const Eigen::VectorXd* beta = nullptr) const {
    if (Y_train.size() != n_) throw std::invalid_argument("Y_train has the wrong length");
    if (X_val.rows() == 0) throw std::invalid_argument("validation set is empty");
    if (X_val.cols() != p_) throw std::invalid_argument("validation features differ in dimension");
    if (mode == ValidationMode::OracleBeta && !beta) throw std::invalid_argument("oracle validation needs beta");
    OptimalSize out;
    out.case_label = SizeCase::ValidationMin;
    out.grid = grid_;
    for (std::size_t i = 0; i < sizes_.size(); ++i) {
      const Eigen::VectorXd bh = fit(i, Y_train);
      const double r = mode == ValidationMode::OracleBeta ? empirical_risk(bh, *beta, X_val)
                                                          : label_risk(bh, X_val, Y_val);
      out.trace.push_back({sizes_[i], psis_[i], r});
    }
    const auto best = detail::argmin_prefer_last(out.trace);
    if (!best) throw std::runtime_error("validation risks are all non-finite");
    out.m_star = out.trace[*best].m;
    out.attained_risk = out.trace[*best].risk;
    return out;
  }

 private:
  Eigen::Index n_, p_;
  std::vector<double> grid_;
  std::vector<double> psis_;
  std::vector<Eigen::Index> sizes_;
  std::vector<std::unique_ptr<SketchedDesign>> designs_;
};

inline OptimalSize select_m_validation(const Dataset& train, const Dataset& val, ValidationMode mode,
                                       SketchKind kind, double delta, std::uint64_t seed) {
  if (train.p() != val.p()) throw std::invalid_argument("train and validation differ in dimension");
  if (val.n() == 0) throw std::invalid_argument("validation set is empty");
  const ValidationSelector sel(train.X, kind, delta, seed);
  return sel.select(train.Y, val.X, val.Y, mode, &train.beta);
}

inline const std::vector<std::string> kTuningTraceColumns = {"m", "psi", "risk_estimate", "mode",
                                                                               "selected"};

/// Trace rows in increasing m followed by the selected point with selected=1.
inline void write_tuning_trace(csv::Writer& w, const OptimalSize& r, const std::string& mode) {
  for (const auto& pt : r.trace)
    w.write_row({csv::format_int(pt.m), csv::format_real(pt.psi), csv::format_real(pt.risk), mode, "0"});
  double psi = std::numeric_limits<double>::quiet_NaN();
  for (const auto& pt : r.trace)
    if (pt.m == r.m_star) psi = pt.psi;
  w.write_row({csv::format_int(r.m_star), csv::format_real(psi), csv::format_real(r.attained_risk), mode, "1"});
}

}  // namespace sketchreg
