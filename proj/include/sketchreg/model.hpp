#pragma once

// Synthetic data: x_i = Sigma^{1/2} z_i with Gaussian z_i, y = X beta + eps.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "covariance.hpp"
#include "detail/random.hpp"
#include "measures.hpp"

namespace sketchreg {

/// beta ~ N_p(0, alpha^2 / p I_p), so E||beta||^2 = alpha^2.
struct RandomIsotropicBeta {
  double alpha = 1.0;
};
struct DeterministicBeta {
  Eigen::VectorXd vector;
};
using BetaMode = std::variant<RandomIsotropicBeta, DeterministicBeta>;

enum class FeatureLaw { Gaussian };

struct ModelConfig {
  Eigen::Index n = 400;
  Eigen::Index p = 200;
  /// Spectrum of Sigma; realized with make_covariance unless explicit
  /// eigenvalues are given.
  SpectralMeasure sigma_spec = make_point_mass(1.0);
  std::optional<Eigen::VectorXd> sigma_eigenvalues;
  BetaMode beta = RandomIsotropicBeta{1.0};
  double noise_sd = 1.0;
  FeatureLaw feature_law = FeatureLaw::Gaussian;
  std::uint64_t seed = 0;

  double aspect_ratio() const { return static_cast<double>(p) / static_cast<double>(n); }
};

struct Dataset {
  Eigen::MatrixXd X;      ///< n x p
  Eigen::VectorXd Y;      ///< n
  Eigen::VectorXd beta;   ///< ground truth, p
  Eigen::VectorXd noise;  ///< the realized E with Y = X beta + E
  Covariance sigma = Covariance::identity(1);

  Eigen::Index n() const { return X.rows(); }
  Eigen::Index p() const { return X.cols(); }
};

/// Diagonal Sigma whose eigenvalue multiplicities realize the atom weights
/// of `spec` by largest-remainder rounding. Leftover slots go to the largest
/// fractional parts; ties go to the larger eigenvalue. Eigenvalues are laid
/// out in decreasing order.
inline Covariance make_covariance(const SpectralMeasure& spec, Eigen::Index p) {
  if (p < 1) throw std::invalid_argument("dimension p must be positive");
  if (!spec.is_discrete()) throw std::invalid_argument("covariance spectrum must be a discrete measure");
  std::vector<Atom> atoms = spec.atoms();
  std::sort(atoms.begin(), atoms.end(), [](const Atom& l, const Atom& r) { return l.location > r.location; });

  const double dp = static_cast<double>(p);
  std::vector<Eigen::Index> counts(atoms.size());
  std::vector<double> remainder(atoms.size());
  Eigen::Index assigned = 0;
  for (std::size_t i = 0; i < atoms.size(); ++i) {
    const double exact = atoms[i].weight * dp;
    counts[i] = static_cast<Eigen::Index>(std::floor(exact + 1e-9));
    remainder[i] = exact - static_cast<double>(counts[i]);
    assigned += counts[i];
  }
  std::vector<std::size_t> order(atoms.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  // atoms are already in decreasing location, so a stable sort keeps ties
  // ordered toward the larger eigenvalue
  std::stable_sort(order.begin(), order.end(), [&](std::size_t l, std::size_t r) {
    return remainder[l] > remainder[r] + 1e-12;
  });
  for (std::size_t k = 0; assigned < p; ++k, ++assigned) ++counts[order[k % order.size()]];

  Eigen::VectorXd diag(p);
  Eigen::Index pos = 0;
  for (std::size_t i = 0; i < atoms.size(); ++i)
    for (Eigen::Index c = 0; c < counts[i]; ++c) diag(pos++) = atoms[i].location;
  return Covariance::diagonal(std::move(diag));
}

inline Covariance realize_covariance(const ModelConfig& config) {
  if (config.sigma_eigenvalues) {
    if (config.sigma_eigenvalues->size() != config.p)
      throw std::invalid_argument("explicit eigenvalue list must have length p");
    return Covariance::diagonal(*config.sigma_eigenvalues);
  }
  return make_covariance(config.sigma_spec, config.p);
}

inline Eigen::VectorXd sample_beta(const BetaMode& mode, Eigen::Index p, std::uint64_t seed) {
  if (p < 1) throw std::invalid_argument("dimension p must be positive");
  if (const auto* r = std::get_if<RandomIsotropicBeta>(&mode)) {
    if (r->alpha < 0.0) throw std::invalid_argument("alpha must be nonnegative");
    return gaussian_vector(p, seed, r->alpha / std::sqrt(static_cast<double>(p)));
  }
  const auto& d = std::get<DeterministicBeta>(mode);
  if (d.vector.size() != p)
    throw std::invalid_argument("deterministic beta has length " + std::to_string(d.vector.size()) + ", expected " +
                                std::to_string(p));
  return d.vector;
}

/// n rows of N(0, Sigma) features.
inline Eigen::MatrixXd sample_features(Eigen::Index n, const Covariance& sigma, std::uint64_t seed) {
  return sigma.color_rows(gaussian_matrix(n, sigma.dim(), seed));
}

inline void validate(const ModelConfig& c) {
  if (c.n < 1 || c.p < 1) throw std::invalid_argument("n and p must be positive");
  if (c.noise_sd < 0.0) throw std::invalid_argument("noise standard deviation must be nonnegative");
  if (const auto* r = std::get_if<RandomIsotropicBeta>(&c.beta); r && r->alpha < 0.0)
    throw std::invalid_argument("alpha must be nonnegative");
}

/// Dataset for a fixed coefficient vector; features and noise come from
/// independent sub-streams of `seed`.
inline Dataset sample_dataset(Eigen::Index n, const Covariance& sigma, const Eigen::VectorXd& beta, double noise_sd,
                              std::uint64_t seed) {
  if (beta.size() != sigma.dim()) throw std::invalid_argument("beta length differs from covariance dimension");
  Dataset d{.X = sample_features(n, sigma, derive_seed(seed, Stream::features)),
            .Y = {},
            .beta = beta,
            .noise = gaussian_vector(n, derive_seed(seed, Stream::noise), noise_sd),
            .sigma = sigma};
  d.Y = d.X * d.beta + d.noise;
  return d;
}

inline Dataset sample_dataset(const ModelConfig& config) {
  validate(config);
  const Covariance sigma = realize_covariance(config);
  const Eigen::VectorXd beta = sample_beta(config.beta, config.p, derive_seed(config.seed, Stream::beta));
  return sample_dataset(config.n, sigma, beta, config.noise_sd, config.seed);
}

/// Eigenvector empirical spectral distribution: atom lambda_i with weight
/// <beta, u_i>^2 / ||beta||^2.
inline SpectralMeasure vesd(const Eigen::VectorXd& beta, const Covariance& sigma) {
  const double norm_sq = beta.squaredNorm();
  if (!(norm_sq > 0.0)) throw std::invalid_argument("VESD is undefined for beta = 0");
  Eigen::VectorXd lambda, proj;
  if (sigma.is_diagonal()) {
    lambda = sigma.diag();
    proj = beta;
  } else {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sigma.matrix());
    lambda = eig.eigenvalues();
    proj = eig.eigenvectors().transpose() * beta;
  }
  std::vector<Atom> atoms;
  for (Eigen::Index i = 0; i < lambda.size(); ++i) {
    const double w = proj(i) * proj(i) / norm_sq;
    if (w > 0.0) atoms.push_back({lambda(i), w});
  }
  return make_discrete(std::move(atoms));
}

// ModelConfig JSON:
// {"n":..,"p":..,"sigma":{measure}|{"eigenvalues":[..]},
//  "beta":{"mode":"random","alpha":a}|{"mode":"deterministic","vector":[..]},
//  "sigma_noise":s,"seed":u64}

inline nlohmann::json to_json(const ModelConfig& c) {
  nlohmann::json j;
  j["n"] = c.n;
  j["p"] = c.p;
  if (c.sigma_eigenvalues) {
    j["sigma"] = {{"eigenvalues", std::vector<double>(c.sigma_eigenvalues->begin(), c.sigma_eigenvalues->end())}};
  } else {
    nlohmann::json m;
    to_json(m, c.sigma_spec);
    j["sigma"] = m;
  }
  if (const auto* r = std::get_if<RandomIsotropicBeta>(&c.beta)) {
    j["beta"] = {{"mode", "random"}, {"alpha", r->alpha}};
  } else {
    const auto& v = std::get<DeterministicBeta>(c.beta).vector;
    j["beta"] = {{"mode", "deterministic"}, {"vector", std::vector<double>(v.begin(), v.end())}};
  }
  j["sigma_noise"] = c.noise_sd;
  j["seed"] = c.seed;
  return j;
}

inline ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.n = j.at("n").get<Eigen::Index>();
  c.p = j.at("p").get<Eigen::Index>();
  if (j.contains("sigma")) {
    const auto& s = j.at("sigma");
    if (s.contains("eigenvalues")) {
      const auto ev = s.at("eigenvalues").get<std::vector<double>>();
      c.sigma_eigenvalues = Eigen::Map<const Eigen::VectorXd>(ev.data(), static_cast<Eigen::Index>(ev.size()));
    } else {
      c.sigma_spec = measure_from_json(s);
    }
  }
  if (j.contains("beta")) {
    const auto& b = j.at("beta");
    const std::string mode = b.value("mode", "random");
    if (mode == "random") {
      c.beta = RandomIsotropicBeta{b.at("alpha").get<double>()};
    } else if (mode == "deterministic") {
      const auto v = b.at("vector").get<std::vector<double>>();
      c.beta = DeterministicBeta{Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()))};
    } else {
      throw std::invalid_argument("unknown beta mode '" + mode + "'");
    }
  }
  c.noise_sd = j.value("sigma_noise", 1.0);
  c.seed = j.value("seed", std::uint64_t{0});
  validate(c);
  return c;
}

}  // namespace sketchreg
