#pragma once

// Asymptotic bias / variance limits of the sketched ridgeless estimator as
// n, p, m -> inf with p/n -> phi, m/n -> psi, and the CLT parameters of the
// risks around their finite-n centerings.

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "csv.hpp"
#include "measures.hpp"
#include "sketch.hpp"

namespace sketchreg {

enum class Regime { Under, Over };
/// Limit law of S S^T: a point mass for orthogonal sketches, MP(psi) for i.i.d.
enum class SketchFamily { Orthogonal, IID };

inline std::string to_string(Regime r) { return r == Regime::Under ? "under" : "over"; }
inline std::string to_string(SketchFamily f) { return f == SketchFamily::Orthogonal ? "orthogonal" : "iid"; }

inline SketchFamily family_of(SketchKind k) {
  return is_orthogonal(k) ? SketchFamily::Orthogonal : SketchFamily::IID;
}

/// Points with |phi/psi - 1| below this are rejected: every limit diverges there.
inline constexpr double kThresholdGuard = 1e-6;

struct AsymptoticRisk {
  double bias = 0.0;
  double variance = 0.0;
  double risk = 0.0;
  Regime regime = Regime::Under;
  /// c0 (over) or c0-tilde (under) when a self-consistent root was involved
  std::optional<double> root;
  double phi = 0.0, psi = 0.0;
};

namespace detail {

inline void check_ratios(double phi, double psi) {
  if (!(phi > 0.0) || !std::isfinite(phi)) throw std::invalid_argument("phi must be positive");
  if (!(psi > 0.0) || psi > 1.0) throw std::invalid_argument("psi must lie in (0, 1]");
  if (std::abs(phi / psi - 1.0) < kThresholdGuard)
    throw std::domain_error("phi/psi is at the interpolation threshold; the limit diverges");
}

inline Regime regime_of(double phi, double psi) {
  check_ratios(phi, psi);
  return phi / psi < 1.0 ? Regime::Under : Regime::Over;
}

inline void check_noise(double alpha, double sigma) {
  if (alpha < 0.0 || sigma < 0.0) throw std::invalid_argument("alpha and sigma must be nonnegative");
}

struct BisectionResult {
  double root;
  double residual;
  int iterations;
};

/// Root of a function decreasing on (-inf, 0): positive far left, negative
/// just below 0. The left end starts at -c_hi and doubles if it is not yet
/// positive.
template <class F>
BisectionResult bisect_negative(F&& f, double c_hi, const char* what) {
  double lo = -c_hi, hi = -1e-14;
  double flo = f(lo);
  const double fhi = f(hi);
  for (int k = 0; k < 64 && !(flo > 0.0); ++k) flo = f(lo *= 2.0);
  if (!(flo > 0.0) || !(fhi < 0.0))
    throw std::domain_error(std::string("no sign change bracketing the root of ") + what);
  int it = 0;
  for (; it < 200 && hi - lo > 1e-12; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double fm = f(mid);
    if (fm == 0.0) {
      lo = hi = mid;
      break;
    }
    (fm > 0.0 ? lo : hi) = mid;
  }
  const double c = 0.5 * (lo + hi);
  const double res = f(c);
  if (!(std::abs(res) <= 1e-10)) throw std::runtime_error(std::string("root of ") + what + " did not converge");
  return {c, res, it};
}

}  // namespace detail

/// Unique negative c0 with 1 = int x / (-c0 + x psi/phi) dH(x).
inline double solve_c0(const SpectralMeasure& H, double phi, double psi) {
  if (detail::regime_of(phi, psi) != Regime::Over) throw std::domain_error("c0 requires phi/psi > 1");
  const double r = psi / phi;
  auto f = [&](double c) { return 1.0 - H.integrate([&](double x) { return x / (-c + x * r); }); };
  return detail::bisect_negative(f, 10.0 * (H.support_max() * r + 1.0), "the c0 equation").root;
}

/// Unique negative c0~ with 1 = psi int x / (-c0~ + x phi) dB(x).
inline double solve_c0_tilde(const SpectralMeasure& B, double phi, double psi) {
  if (detail::regime_of(phi, psi) != Regime::Under) throw std::domain_error("c0 tilde requires phi/psi < 1");
  auto g = [&](double c) { return 1.0 - psi * B.integrate([&](double x) { return x / (-c + x * phi); }); };
  return detail::bisect_negative(g, 10.0 * (B.support_max() * phi + 1.0), "the c0-tilde equation").root;
}

namespace detail {
inline double j_integral(const SpectralMeasure& H, double c0, double r) {
  return H.integrate([&](double x) {
    const double d = c0 - x * r;
    return x * x * r / (d * d);
  });
}
inline double ratio_to_variance(double J, const char* what) {
  if (!(J < 1.0)) throw std::runtime_error(std::string(what) + " integral reached 1; numeric failure");
  return J / (1.0 - J);
}
}  // namespace detail

/// Overparameterized limits for general H (random isotropic beta):
/// bias -alpha^2 c0, variance sigma^2 J / (1 - J).
inline AsymptoticRisk over_limits(const SpectralMeasure& H, double phi, double psi, double alpha, double sigma) {
  detail::check_noise(alpha, sigma);
  const double c0 = solve_c0(H, phi, psi);
  const double J = detail::j_integral(H, c0, psi / phi);
  AsymptoticRisk out;
  out.regime = Regime::Over;
  out.root = c0;
  out.phi = phi;
  out.psi = psi;
  out.bias = -alpha * alpha * c0;
  out.variance = sigma * sigma * detail::ratio_to_variance(J, "J");
  out.risk = out.bias + out.variance;
  return out;
}

/// Underparameterized limits: bias 0, variance sigma^2 K / (1 - K) with
/// K = psi int x^2 phi / (c0~ - x phi)^2 dB(x).
inline AsymptoticRisk under_variance(const SpectralMeasure& B, double phi, double psi, double sigma) {
  detail::check_noise(0.0, sigma);
  const double ct = solve_c0_tilde(B, phi, psi);
  const double K = psi * B.integrate([&](double x) {
    const double d = ct - x * phi;
    return x * x * phi / (d * d);
  });
  AsymptoticRisk out;
  out.regime = Regime::Under;
  out.root = ct;
  out.phi = phi;
  out.psi = psi;
  out.bias = 0.0;
  out.variance = sigma * sigma * detail::ratio_to_variance(K, "K");
  out.risk = out.variance;
  return out;
}

/// Closed-form underparameterized variance. At psi = 1 both families give
/// the full-sample value sigma^2 phi / (1 - phi).
inline double under_variance_closed(SketchFamily family, double phi, double psi, double sigma) {
  if (detail::regime_of(phi, psi) != Regime::Under) throw std::domain_error("requires phi/psi < 1");
  const double x = phi / psi;
  const double s2 = sigma * sigma;
  if (family == SketchFamily::Orthogonal || psi == 1.0) return s2 * x / (1.0 - x);
  return s2 * (phi / (1.0 - phi) + x / (1.0 - x));
}

/// Limits for Sigma = I (random isotropic beta).
inline AsymptoticRisk isotropic_limit(SketchFamily family, double phi, double psi, double alpha, double sigma) {
  detail::check_noise(alpha, sigma);
  AsymptoticRisk out;
  out.regime = detail::regime_of(phi, psi);
  out.phi = phi;
  out.psi = psi;
  const double x = phi / psi;
  if (out.regime == Regime::Under) {
    out.bias = 0.0;
    out.variance = under_variance_closed(family, phi, psi, sigma);
  } else {
    out.bias = alpha * alpha * (1.0 - 1.0 / x);
    out.variance = sigma * sigma / (x - 1.0);
  }
  out.risk = out.bias + out.variance;
  return out;
}

/// Limit of S S^T's spectrum for the given family at ratio psi.
inline SpectralMeasure sketch_spectrum(SketchFamily family, double psi) {
  if (family == SketchFamily::Orthogonal || psi == 1.0) return make_point_mass(1.0);
  return make_mp(psi);
}

/// Limiting risk for feature spectrum H, dispatching on the regime.
inline AsymptoticRisk theory_risk(const SpectralMeasure& H, SketchFamily family, double phi, double psi, double alpha,
                                  double sigma) {
  if (detail::regime_of(phi, psi) == Regime::Over) return over_limits(H, phi, psi, alpha, sigma);
  return under_variance(sketch_spectrum(family, psi), phi, psi, sigma);
}

/// Full-sample (psi = 1) limit for Sigma = I.
inline double full_sample_risk(double phi, double alpha, double sigma) {
  return isotropic_limit(SketchFamily::Orthogonal, phi, 1.0, alpha, sigma).risk;
}

/// c1 = J / (1 - J).
inline double c1(const SpectralMeasure& H, double phi, double psi) {
  const double c0 = solve_c0(H, phi, psi);
  return detail::ratio_to_variance(detail::j_integral(H, c0, psi / phi), "J");
}

/// Bias limit for a deterministic beta with VESD G:
/// ||beta||^2 (1 + c1) int c0^2 x / (c0 - x psi/phi)^2 dG(x). Zero when
/// underparameterized.
inline double deterministic_bias_over(const SpectralMeasure& H, const SpectralMeasure& G, double phi, double psi,
                                      double beta_norm_sq) {
  if (beta_norm_sq < 0.0) throw std::invalid_argument("||beta||^2 must be nonnegative");
  if (detail::regime_of(phi, psi) == Regime::Under) return 0.0;
  const double r = psi / phi;
  const double c0 = solve_c0(H, phi, psi);
  const double cc1 = detail::ratio_to_variance(detail::j_integral(H, c0, r), "J");
  const double g = G.integrate([&](double x) {
    const double d = c0 - x * r;
    return c0 * c0 * x / (d * d);
  });
  return beta_norm_sq * (1.0 + cc1) * g;
}

// ---------------------------------------------------------------------------
// CLT parameters

enum class CLTStatistic { IntegratedRisk, ConditionalRisk };
enum class CLTScale { P, SqrtP };

inline std::string to_string(CLTStatistic s) {
  return s == CLTStatistic::IntegratedRisk ? "integrated" : "conditional";
}
inline std::string to_string(CLTScale s) { return s == CLTScale::P ? "p" : "sqrt_p"; }

/// scale * (risk - centering) -> N(mean, variance).
struct CLTParams {
  double mean = 0.0;
  double variance = 0.0;
  double centering = 0.0;
  CLTScale scale = CLTScale::P;

  double scale_factor(Eigen::Index p) const {
    return scale == CLTScale::P ? static_cast<double>(p) : std::sqrt(static_cast<double>(p));
  }
};

struct CLTSetting {
  double phi = 0.0, psi = 0.0;
  double alpha = 0.0, sigma = 1.0;
  double nu4 = 3.0;
  Eigen::Index n = 0, p = 0, m = 0;
  SketchFamily family = SketchFamily::Orthogonal;
};

namespace detail {
inline double mu_over(double x, double s2, double nu4) {
  return s2 * x / ((x - 1.0) * (x - 1.0)) + s2 * (nu4 - 3.0) / (x - 1.0);
}
inline double var_over(double x, double s2, double nu4) {
  const double d = x - 1.0;
  return 2.0 * s2 * s2 * x * x * x / (d * d * d * d) + s2 * s2 * x * (nu4 - 3.0) / (d * d);
}
inline double mu_under(double x, double s2, double nu4) {
  return s2 * x * x / ((x - 1.0) * (x - 1.0)) + s2 * x * x * (nu4 - 3.0) / (1.0 - x);
}
inline double var_under(double x, double s2, double nu4) {
  const double d = x - 1.0;
  return 2.0 * s2 * s2 * x * x * x / (d * d * d * d) + s2 * s2 * x * x * x * (nu4 - 3.0) / (d * d);
}
}  // namespace detail

/// Mean and variance come from the limits (phi, psi); the centering uses the
/// finite ratios p/n, m/n. The conditional risk shares the integrated CLT in
/// the underparameterized regime.
inline CLTParams clt_params(CLTStatistic stat, Regime regime, const CLTSetting& s) {
  if (detail::regime_of(s.phi, s.psi) != regime) throw std::invalid_argument("regime does not match phi/psi");
  detail::check_noise(s.alpha, s.sigma);
  if (s.n < 1 || s.p < 1 || s.m < 1 || s.m > s.n) throw std::invalid_argument("invalid n, p, m");
  const double x = s.phi / s.psi;
  const double xn = static_cast<double>(s.p) / static_cast<double>(s.m);
  if (std::abs(xn - 1.0) < kThresholdGuard) throw std::domain_error("p/m is at the interpolation threshold");
  const double s2 = s.sigma * s.sigma;
  const double a2 = s.alpha * s.alpha;
  CLTParams out;
  if (regime == Regime::Under) {
    if (s.family != SketchFamily::Orthogonal)
      throw std::invalid_argument("the underparameterized CLT needs an orthogonal sketch");
    if (xn >= 1.0) throw std::invalid_argument("p/m must be below 1 in the underparameterized regime");
    out.mean = detail::mu_under(x, s2, s.nu4);
    out.variance = detail::var_under(x, s2, s.nu4);
    out.centering = s2 * xn / (1.0 - xn);
    out.scale = CLTScale::P;
    return out;
  }
  if (xn <= 1.0) throw std::invalid_argument("p/m must exceed 1 in the overparameterized regime");
  const double mu2 = detail::mu_over(x, s2, s.nu4);
  const double var2 = detail::var_over(x, s2, s.nu4);
  out.centering = a2 * (1.0 - 1.0 / xn) + s2 / (xn - 1.0);
  if (stat == CLTStatistic::IntegratedRisk) {
    out.mean = mu2;
    out.variance = var2;
    out.scale = CLTScale::P;
  } else {
    const double dp = static_cast<double>(s.p);
    out.mean = mu2 / std::sqrt(dp);
    out.variance = 2.0 * (1.0 - 1.0 / x) * a2 * a2 + var2 / dp;
    out.scale = CLTScale::SqrtP;
  }
  return out;
}

/// Asymptotic variance of the integrated risk for the orthogonally sketched
/// estimator at the closed-form optimal size. For phi > 1 in the no-sketch
/// case this is the overparameterized CLT variance at psi = 1.
inline double optimal_clt_variance(double alpha, double sigma, double phi, double nu4 = 3.0) {
  if (!(alpha > 0.0) || !(sigma > 0.0) || !(phi > 0.0)) throw std::invalid_argument("parameters must be positive");
  const double s2 = sigma * sigma;
  if (alpha > sigma) {
    if (phi > 1.0 - sigma / (2.0 * alpha) && phi <= alpha / (alpha - sigma))
      return 2.0 * alpha * alpha * alpha * (alpha - sigma) + s2 * (nu4 - 3.0) * alpha * (alpha - sigma);
  } else if (phi > alpha * alpha / (alpha * alpha + s2)) {
    return 0.0;
  }
  if (std::abs(phi - 1.0) < kThresholdGuard) throw std::domain_error("phi is at the interpolation threshold");
  return phi < 1.0 ? detail::var_under(phi, s2, nu4) : detail::var_over(phi, s2, nu4);
}

// ---------------------------------------------------------------------------
// Theory curves

inline const std::vector<std::string> kTheoryCurveColumns = {
    "phi", "psi", "kind", "regime", "bias", "variance", "risk", "c0"};

inline std::vector<std::string> csv_fields(const AsymptoticRisk& r, const std::string& kind) {
  return {csv::format_real(r.phi),     csv::format_real(r.psi),      kind,
          to_string(r.regime),         csv::format_real(r.bias),     csv::format_real(r.variance),
          csv::format_real(r.risk),    r.root ? csv::format_real(*r.root) : std::string{}};
}

}  // namespace sketchreg
