#pragma once

// Gauss-Legendre rules and an adaptive bisecting integrator.

#include <array>
#include <cmath>
#include <cstddef>
#include <stdexcept>

#include <gsl/gsl_integration.h>

namespace sketchreg::detail {

template <std::size_t N>
struct GaussLegendreRule {
  std::array<double, N> nodes{};    // on [-1, 1]
  std::array<double, N> weights{};
};

template <std::size_t N>
GaussLegendreRule<N> make_gauss_legendre() {
  GaussLegendreRule<N> rule;
  gsl_integration_glfixed_table* t = gsl_integration_glfixed_table_alloc(N);
  if (!t) throw std::runtime_error("gsl_integration_glfixed_table_alloc failed");
  for (std::size_t i = 0; i < N; ++i) gsl_integration_glfixed_point(-1.0, 1.0, i, &rule.nodes[i], &rule.weights[i], t);
  gsl_integration_glfixed_table_free(t);
  return rule;
}

inline const GaussLegendreRule<256>& gauss_legendre_256() {
  static const GaussLegendreRule<256> rule = make_gauss_legendre<256>();
  return rule;
}

template <typename F>
double gauss_legendre_256(F&& f, double lo, double hi) {
  const auto& rule = gauss_legendre_256();
  const double mid = 0.5 * (lo + hi), half = 0.5 * (hi - lo);
  double sum = 0.0;
  for (std::size_t i = 0; i < 256; ++i) {
    const double v = f(mid + half * rule.nodes[i]);
    if (!std::isfinite(v)) throw std::domain_error("integrand is not finite on the support");
    sum += rule.weights[i] * v;
  }
  return half * sum;
}

namespace quad_impl {
template <typename F>
double adaptive(F& f, double lo, double hi, double whole, double rel_tol, int depth) {
  const double mid = 0.5 * (lo + hi);
  const double left = gauss_legendre_256(f, lo, mid);
  const double right = gauss_legendre_256(f, mid, hi);
  const double refined = left + right;
  if (std::abs(refined - whole) <= rel_tol * std::abs(refined) + 1e-300 || depth <= 0) return refined;
  return adaptive(f, lo, mid, left, rel_tol, depth - 1) + adaptive(f, mid, hi, right, rel_tol, depth - 1);
}
}  // namespace quad_impl

/// 256-point Gauss-Legendre, bisected until successive refinements agree
/// to `rel_tol` relative.
template <typename F>
double integrate_adaptive(F&& f, double lo, double hi, double rel_tol = 1e-10, int max_depth = 24) {
  const double whole = gauss_legendre_256(f, lo, hi);
  return quad_impl::adaptive(f, lo, hi, whole, rel_tol, max_depth);
}

}  // namespace sketchreg::detail
