#pragma once

// Spectral measures on the positive reals: finite atomic measures and the
// Marchenko-Pastur law. These stand in for the limiting spectrum of the
// feature covariance, of S S^T, and for the eigenvector-weighted spectrum of
// a coefficient vector.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <json.hpp>

#include "detail/quadrature.hpp"

namespace sketchreg {

struct Atom {
  double location = 0.0;
  double weight = 0.0;

  friend bool operator==(const Atom&, const Atom&) = default;
};

/// Finite atomic probability measure. Atoms are sorted by location, distinct,
/// and their weights sum to one.
struct DiscreteMeasure {
  std::vector<Atom> atoms;
};

/// Marchenko-Pastur law with ratio psi in (0, 1), the limiting spectrum of
/// S S^T for an m x n Gaussian sketch with N(0, 1/n) entries and m/n -> psi.
struct MarchenkoPasturMeasure {
  double ratio = 0.5;

  double lower() const { return (1.0 - std::sqrt(ratio)) * (1.0 - std::sqrt(ratio)); }
  double upper() const { return (1.0 + std::sqrt(ratio)) * (1.0 + std::sqrt(ratio)); }
  double density(double x) const {
    if (x <= lower() || x >= upper()) return 0.0;
    return std::sqrt((upper() - x) * (x - lower())) / (2.0 * std::numbers::pi * ratio * x);
  }
};

class SpectralMeasure;
inline SpectralMeasure make_discrete(std::vector<Atom> atoms);
inline SpectralMeasure make_mp(double psi);

class SpectralMeasure {
 public:
  using Variant = std::variant<DiscreteMeasure, MarchenkoPasturMeasure>;

  const Variant& variant() const { return value_; }
  bool is_discrete() const { return std::holds_alternative<DiscreteMeasure>(value_); }
  bool is_marchenko_pastur() const { return std::holds_alternative<MarchenkoPasturMeasure>(value_); }

  const std::vector<Atom>& atoms() const {
    if (!is_discrete()) throw std::logic_error("measure is not discrete");
    return std::get<DiscreteMeasure>(value_).atoms;
  }
  double mp_ratio() const {
    if (!is_marchenko_pastur()) throw std::logic_error("measure is not Marchenko-Pastur");
    return std::get<MarchenkoPasturMeasure>(value_).ratio;
  }

  /// True for a single atom, the limit spectrum of an orthogonal sketch.
  bool is_point_mass() const { return is_discrete() && atoms().size() == 1; }

  double support_min() const {
    if (is_discrete()) return atoms().front().location;
    return std::get<MarchenkoPasturMeasure>(value_).lower();
  }
  double support_max() const {
    if (is_discrete()) return atoms().back().location;
    return std::get<MarchenkoPasturMeasure>(value_).upper();
  }

  /// Integral of f against the measure. Atomic measures use the exact
  /// weighted sum; the Marchenko-Pastur law uses adaptive Gauss-Legendre
  /// after x = a + (b - a) sin^2(theta), which removes the square-root
  /// endpoint behaviour of the density.
  template <typename F>
  double integrate(F&& f, double rel_tol = 1e-10) const {
    if (is_discrete()) {
      double sum = 0.0;
      for (const auto& a : atoms()) {
        const double v = f(a.location);
        if (!std::isfinite(v)) throw std::domain_error("integrand is not finite on the support");
        sum += a.weight * v;
      }
      return sum;
    }
    const auto& mp = std::get<MarchenkoPasturMeasure>(value_);
    const double a = mp.lower(), b = mp.upper(), width = b - a;
    const double scale = width * width / (std::numbers::pi * mp.ratio);
    auto g = [&](double theta) {
      const double s = std::sin(theta), c = std::cos(theta);
      const double x = a + width * s * s;
      return f(x) * scale * s * s * c * c / x;
    };
    return detail::integrate_adaptive(g, 0.0, std::numbers::pi / 2.0, rel_tol);
  }

  friend bool operator==(const SpectralMeasure& l, const SpectralMeasure& r) {
    if (l.is_discrete() != r.is_discrete()) return false;
    if (l.is_discrete()) return l.atoms() == r.atoms();
    return l.mp_ratio() == r.mp_ratio();
  }

 private:
  explicit SpectralMeasure(Variant v) : value_(std::move(v)) {}
  Variant value_;

  friend SpectralMeasure make_discrete(std::vector<Atom> atoms);
  friend SpectralMeasure make_mp(double psi);
};

/// Build an atomic measure. Duplicate locations (relative 1e-12) are merged
/// by adding weights; a total weight within 1e-9 of one is renormalized.
inline SpectralMeasure make_discrete(std::vector<Atom> atoms) {
  if (atoms.empty()) throw std::invalid_argument("discrete measure needs at least one atom");
  for (const auto& a : atoms) {
    if (!(a.location > 0.0) || !std::isfinite(a.location))
      throw std::invalid_argument("atom locations must be positive and finite");
    if (!(a.weight > 0.0) || !std::isfinite(a.weight))
      throw std::invalid_argument("atom weights must be positive and finite");
  }
  std::sort(atoms.begin(), atoms.end(), [](const Atom& l, const Atom& r) { return l.location < r.location; });

  std::vector<Atom> merged;
  for (const auto& a : atoms) {
    if (!merged.empty() && std::abs(a.location - merged.back().location) <= 1e-12 * a.location)
      merged.back().weight += a.weight;
    else
      merged.push_back(a);
  }

  double total = 0.0;
  for (const auto& a : merged) total += a.weight;
  if (std::abs(total - 1.0) > 1e-9)
    throw std::invalid_argument("atom weights must sum to 1 (got " + std::to_string(total) + ")");
  for (auto& a : merged) a.weight /= total;
  return SpectralMeasure(DiscreteMeasure{std::move(merged)});
}

inline SpectralMeasure make_point_mass(double location) { return make_discrete({{location, 1.0}}); }

/// Empirical spectral distribution of a list of eigenvalues.
inline SpectralMeasure make_empirical(const std::vector<double>& eigenvalues) {
  std::vector<Atom> atoms;
  atoms.reserve(eigenvalues.size());
  const double w = 1.0 / static_cast<double>(eigenvalues.size());
  for (double x : eigenvalues) atoms.push_back({x, w});
  return make_discrete(std::move(atoms));
}

inline SpectralMeasure make_mp(double psi) {
  if (!(psi > 0.0 && psi < 1.0)) throw std::invalid_argument("Marchenko-Pastur ratio must lie in (0, 1)");
  return SpectralMeasure(MarchenkoPasturMeasure{psi});
}

/// Closed-form Stieltjes transform s(z) = int 1/(x - z) dF(x) of the
/// Marchenko-Pastur law for real z < 0, on the branch with s(z) > 0.
/// It solves psi z s^2 + (z - 1 + psi) s + 1 = 0.
inline double mp_stieltjes_negative_axis(double psi, double z) {
  if (!(z < 0.0)) throw std::invalid_argument("closed form is implemented for z < 0 only");
  const double b = z - 1.0 + psi;
  const double disc = b * b - 4.0 * psi * z;
  return (-b - std::sqrt(disc)) / (2.0 * psi * z);
}

// JSON: {"kind":"discrete","atoms":[[x,w],...]} or {"kind":"mp","psi":psi}

inline void to_json(nlohmann::json& j, const SpectralMeasure& m) {
  if (m.is_discrete()) {
    nlohmann::json atoms = nlohmann::json::array();
    for (const auto& a : m.atoms()) atoms.push_back({a.location, a.weight});
    j = {{"kind", "discrete"}, {"atoms", atoms}};
  } else {
    j = {{"kind", "mp"}, {"psi", m.mp_ratio()}};
  }
}

inline SpectralMeasure measure_from_json(const nlohmann::json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "discrete") {
    std::vector<Atom> atoms;
    for (const auto& a : j.at("atoms")) {
      if (!a.is_array() || a.size() != 2) throw std::invalid_argument("atoms must be [location, weight] pairs");
      atoms.push_back({a[0].get<double>(), a[1].get<double>()});
    }
    return make_discrete(std::move(atoms));
  }
  if (kind == "mp") return make_mp(j.at("psi").get<double>());
  throw std::invalid_argument("unknown measure kind '" + kind + "'");
}

}  // namespace sketchreg
