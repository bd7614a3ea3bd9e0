#pragma once

// Minimum-norm (ridgeless) least squares on full and sketched data, and the
// exact finite-sample bias / variance of the sketched estimator given
// (beta, S, X).

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "covariance.hpp"
#include "csv.hpp"
#include "sketch.hpp"

namespace sketchreg {

/// Pseudoinverse of a fixed design A (rows x cols) via thin SVD. Singular
/// values at or below tol = max(rows, cols) * eps * sigma_max count as zero
/// unless an explicit tolerance is supplied.
class MinNormSolver {
 public:
  explicit MinNormSolver(const Eigen::MatrixXd& A, std::optional<double> tol = std::nullopt)
      : rows_(A.rows()), cols_(A.cols()) {
    if (A.size() == 0) throw std::invalid_argument("design matrix is empty");
    Eigen::BDCSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::VectorXd& s = svd.singularValues();
    const double smax = s.size() ? s(0) : 0.0;
    tol_ = tol.value_or(static_cast<double>(std::max(rows_, cols_)) * std::numeric_limits<double>::epsilon() * smax);
    Eigen::Index r = 0;
    while (r < s.size() && s(r) > tol_) ++r;
    singular_ = s.head(r);
    U_ = svd.matrixU().leftCols(r);
    V_ = svd.matrixV().leftCols(r);
  }

  Eigen::Index rank() const { return singular_.size(); }
  double tolerance() const { return tol_; }
  const Eigen::VectorXd& singular_values() const { return singular_; }
  /// Orthonormal basis of the row space of A (cols x rank).
  const Eigen::MatrixXd& row_basis() const { return V_; }
  const Eigen::MatrixXd& column_basis() const { return U_; }

  /// A^+ b
  Eigen::VectorXd solve(const Eigen::VectorXd& b) const {
    if (b.size() != rows_) throw std::invalid_argument("right-hand side has the wrong length");
    if (rank() == 0) return Eigen::VectorXd::Zero(cols_);
    return V_ * (U_.transpose() * b).cwiseQuotient(singular_);
  }

  /// A^+ (cols x rows)
  Eigen::MatrixXd pseudo_inverse() const {
    if (rank() == 0) return Eigen::MatrixXd::Zero(cols_, rows_);
    return V_ * singular_.cwiseInverse().asDiagonal() * U_.transpose();
  }

 private:
  Eigen::Index rows_, cols_;
  double tol_ = 0.0;
  Eigen::VectorXd singular_;
  Eigen::MatrixXd U_, V_;
};

/// (X^T X)^+ X^T Y
inline Eigen::VectorXd minnorm_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& Y,
                                   std::optional<double> tol = std::nullopt) {
  if (X.rows() != Y.size()) throw std::invalid_argument("X and Y have different row counts");
  return MinNormSolver(X, tol).solve(Y);
}

/// (X^T S^T S X)^+ X^T S^T S Y
inline Eigen::VectorXd sketched_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& Y, const SketchOperator& S,
                                    std::optional<double> tol = std::nullopt) {
  if (S.cols() != X.rows()) throw std::invalid_argument("sketch width differs from the number of samples");
  const auto [SX, SY] = S.apply(X, Y);
  return minnorm_fit(SX, SY, tol);
}

enum class VariancePath { Auto, General, Orthogonal };

/// A fixed pair (S, X) with the SVD of S X computed once. Every exact
/// quantity that conditions on (S, X) goes through this.
class SketchedDesign {
 public:
  SketchedDesign(const SketchOperator& S, const Eigen::MatrixXd& X, std::optional<double> tol = std::nullopt)
      : S_(S), SX_(checked_apply(S, X)), solver_(SX_, tol) {}

  const SketchOperator& sketch() const { return S_; }
  const Eigen::MatrixXd& sketched_features() const { return SX_; }
  const MinNormSolver& solver() const { return solver_; }
  Eigen::Index p() const { return SX_.cols(); }

  Eigen::VectorXd fit(const Eigen::VectorXd& Y) const { return solver_.solve(S_.apply(Eigen::MatrixXd(Y)).col(0)); }
  Eigen::VectorXd fit_sketched(const Eigen::VectorXd& SY) const { return solver_.solve(SY); }

  /// P = (SX)^+ (SX), the projector onto the row space of SX.
  Eigen::MatrixXd projector() const { return solver_.row_basis() * solver_.row_basis().transpose(); }

  /// ||Sigma^{1/2} (P - I) beta||^2
  double conditional_bias(const Eigen::VectorXd& beta, const Covariance& sigma) const {
    if (beta.size() != p()) throw std::invalid_argument("beta has the wrong length");
    const auto& V = solver_.row_basis();
    const Eigen::VectorXd resid = V * (V.transpose() * beta) - beta;
    return sigma.quad(resid);
  }

  /// (alpha^2 / p) tr[(I - P) Sigma]
  double integrated_bias(double alpha, const Covariance& sigma) const {
    if (sigma.dim() != p()) throw std::invalid_argument("covariance has the wrong dimension");
    const double kept = sigma.trace_quad(solver_.row_basis());
    return alpha * alpha / static_cast<double>(p()) * std::max(0.0, sigma.trace() - kept);
  }

  /// sigma^2 tr[(SX)^+ S S^T (SX)^{+T} Sigma]. With S S^T = I_m this equals
  /// sigma^2 tr[(X^T S^T S X)^+ Sigma], which avoids forming S S^T.
  double variance(double noise_sd, const Covariance& sigma, VariancePath path = VariancePath::Auto) const {
    if (sigma.dim() != p()) throw std::invalid_argument("covariance has the wrong dimension");
    if (noise_sd == 0.0 || solver_.rank() == 0) return 0.0;
    if (path == VariancePath::Auto) path = orthogonal() ? VariancePath::Orthogonal : VariancePath::General;
    const double s2 = noise_sd * noise_sd;
    if (path == VariancePath::Orthogonal) {
      const Eigen::MatrixXd scaled = solver_.row_basis() * solver_.singular_values().cwiseInverse().asDiagonal();
      return s2 * sigma.trace_quad(scaled);
    }
    const Eigen::MatrixXd M = solver_.pseudo_inverse();  // p x m
    const Eigen::MatrixXd inner = M.transpose() * sigma.apply(M);  // m x m
    return s2 * (inner.cwiseProduct(gram())).sum();
  }

  /// ||S S^T - I||_max < 1e-8
  bool orthogonal() const {
    if (!orthogonal_) orthogonal_ = S_.kind() == SketchKind::Identity || orthogonality_defect(S_) < 1e-8;
    return *orthogonal_;
  }

 private:
  static Eigen::MatrixXd checked_apply(const SketchOperator& S, const Eigen::MatrixXd& X) {
    if (S.cols() != X.rows()) throw std::invalid_argument("sketch width differs from the number of samples");
    return S.apply(X);
  }
  const Eigen::MatrixXd& gram() const {
    if (!gram_) gram_ = S_.gram();
    return *gram_;
  }

  SketchOperator S_;
  Eigen::MatrixXd SX_;
  MinNormSolver solver_;
  mutable std::optional<bool> orthogonal_;
  mutable std::optional<Eigen::MatrixXd> gram_;
};

inline double exact_conditional_bias(const Eigen::VectorXd& beta, const SketchOperator& S, const Eigen::MatrixXd& X,
                                     const Covariance& sigma) {
  return SketchedDesign(S, X).conditional_bias(beta, sigma);
}

inline double exact_integrated_bias(const SketchOperator& S, const Eigen::MatrixXd& X, const Covariance& sigma,
                                    double alpha) {
  return SketchedDesign(S, X).integrated_bias(alpha, sigma);
}

inline double exact_variance(const SketchOperator& S, const Eigen::MatrixXd& X, const Covariance& sigma,
                             double noise_sd, VariancePath path = VariancePath::Auto) {
  return SketchedDesign(S, X).variance(noise_sd, sigma, path);
}

/// ||beta_hat - beta||_Sigma^2, the out-of-sample risk averaged over x ~ N(0, Sigma).
inline double oracle_risk(const Eigen::VectorXd& beta_hat, const Eigen::VectorXd& beta, const Covariance& sigma) {
  if (beta_hat.size() != beta.size()) throw std::invalid_argument("coefficient vectors differ in length");
  return sigma.quad(beta_hat - beta);
}

/// (1/n_eval) sum_i (x_i^T beta_hat - x_i^T beta)^2 over the evaluation rows.
inline double empirical_risk(const Eigen::VectorXd& beta_hat, const Eigen::VectorXd& beta,
                             const Eigen::MatrixXd& X_eval) {
  if (X_eval.rows() == 0) throw std::invalid_argument("evaluation set is empty");
  if (beta_hat.size() != X_eval.cols() || beta.size() != X_eval.cols())
    throw std::invalid_argument("coefficient length differs from feature dimension");
  return (X_eval * (beta_hat - beta)).squaredNorm() / static_cast<double>(X_eval.rows());
}

/// (1/n_eval) sum_i (y_i - x_i^T beta_hat)^2; needs no knowledge of beta.
inline double label_risk(const Eigen::VectorXd& beta_hat, const Eigen::MatrixXd& X_eval,
                         const Eigen::VectorXd& Y_eval) {
  if (X_eval.rows() == 0) throw std::invalid_argument("evaluation set is empty");
  if (Y_eval.size() != X_eval.rows()) throw std::invalid_argument("X_eval and Y_eval have different row counts");
  if (beta_hat.size() != X_eval.cols()) throw std::invalid_argument("coefficient length differs from feature dimension");
  return (Y_eval - X_eval * beta_hat).squaredNorm() / static_cast<double>(X_eval.rows());
}

enum class RiskKind { ConditionalOnBeta, BetaIntegrated };
enum class RiskOrigin { ExactFormula, MonteCarlo, AsymptoticLimit };

inline std::string to_string(RiskKind k) {
  return k == RiskKind::ConditionalOnBeta ? "conditional" : "integrated";
}
inline std::string to_string(RiskOrigin o) {
  switch (o) {
    case RiskOrigin::ExactFormula: return "exact";
    case RiskOrigin::MonteCarlo: return "monte_carlo";
    case RiskOrigin::AsymptoticLimit: return "limit";
  }
  return "unknown";
}

struct RiskMeta {
  Eigen::Index n = 0, p = 0, m = 0;
  std::size_t replications = 0;
  std::uint64_t seed = 0;
};

/// A bias / variance / risk triple. Monte-Carlo reports may leave bias and
/// variance as NaN when only the total risk is estimated.
struct RiskReport {
  double bias = std::numeric_limits<double>::quiet_NaN();
  double variance = std::numeric_limits<double>::quiet_NaN();
  double risk = std::numeric_limits<double>::quiet_NaN();
  RiskKind kind = RiskKind::BetaIntegrated;
  RiskOrigin origin = RiskOrigin::ExactFormula;
  RiskMeta meta;
};

inline RiskReport exact_risk_report(const SketchedDesign& design, const Covariance& sigma, double noise_sd,
                                    RiskKind kind, double alpha, const Eigen::VectorXd* beta = nullptr) {
  RiskReport r;
  r.kind = kind;
  r.origin = RiskOrigin::ExactFormula;
  if (kind == RiskKind::ConditionalOnBeta) {
    if (!beta) throw std::invalid_argument("conditional risk needs beta");
    r.bias = design.conditional_bias(*beta, sigma);
  } else {
    r.bias = design.integrated_bias(alpha, sigma);
  }
  r.variance = design.variance(noise_sd, sigma);
  r.risk = r.bias + r.variance;
  r.meta = {design.sketch().cols(), design.p(), design.sketch().rows(), 1, design.sketch().seed()};
  return r;
}

inline const std::vector<std::string> kRiskReportColumns = {
    "n", "p", "m", "phi", "psi", "kind", "origin", "bias", "variance", "risk", "reps", "seed"};

inline std::vector<std::string> csv_fields(const RiskReport& r) {
  const double n = static_cast<double>(r.meta.n);
  return {csv::format_int(r.meta.n),
          csv::format_int(r.meta.p),
          csv::format_int(r.meta.m),
          csv::format_real(static_cast<double>(r.meta.p) / n),
          csv::format_real(static_cast<double>(r.meta.m) / n),
          to_string(r.kind),
          to_string(r.origin),
          csv::format_real(r.bias),
          csv::format_real(r.variance),
          csv::format_real(r.risk),
          csv::format_uint(r.meta.replications),
          csv::format_uint(r.meta.seed)};
}

}  // namespace sketchreg
