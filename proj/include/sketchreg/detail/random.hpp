#pragma once

// Seed derivation and seeded Gaussian fills.
//
// Every random object in the library is a pure function of a 64-bit seed.
// Sub-streams are derived by hashing (seed, stream id, index...) with
// splitmix64, so components such as the sketch rows, signs and permutation
// can be regenerated independently of each other.

#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

#include <Eigen/Dense>

namespace sketchreg {

/// Stream identifiers used when deriving sub-seeds.
enum class Stream : std::uint64_t {
  features = 0x01,
  beta = 0x02,
  noise = 0x03,
  test_features = 0x04,
  validation = 0x05,
  sketch = 0x10,
  sketch_rows = 0x11,
  sketch_signs = 0x12,
  sketch_perm = 0x13,
  replication = 0x20,
  grid_point = 0x21,
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace detail

/// Mix a base seed with a path of integers into an independent sub-seed.
inline std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> path) {
  std::uint64_t h = detail::splitmix64(base);
  for (auto v : path) h = detail::splitmix64(h ^ detail::splitmix64(v + 0x632be59bd9b4e019ULL));
  return h;
}

inline std::uint64_t derive_seed(std::uint64_t base, Stream s) {
  return derive_seed(base, {static_cast<std::uint64_t>(s)});
}

inline std::uint64_t derive_seed(std::uint64_t base, Stream s, std::uint64_t index) {
  return derive_seed(base, {static_cast<std::uint64_t>(s), index});
}

using Engine = std::mt19937_64;

/// rows x cols matrix of i.i.d. N(0, sd^2), filled column-major.
inline Eigen::MatrixXd gaussian_matrix(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed,
                                       double sd = 1.0) {
  Engine gen(seed);
  std::normal_distribution<double> dist(0.0, 1.0);
  Eigen::MatrixXd out(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) out(i, j) = sd * dist(gen);
  return out;
}

inline Eigen::VectorXd gaussian_vector(Eigen::Index size, std::uint64_t seed, double sd = 1.0) {
  return gaussian_matrix(size, 1, seed, sd).col(0);
}

/// Uniform random permutation of {0, ..., n-1} by Fisher-Yates.
inline std::vector<Eigen::Index> random_permutation(Eigen::Index n, std::uint64_t seed) {
  std::vector<Eigen::Index> perm(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) perm[static_cast<std::size_t>(i)] = i;
  Engine gen(seed);
  for (Eigen::Index i = n - 1; i > 0; --i) {
    std::uniform_int_distribution<Eigen::Index> pick(0, i);
    std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(pick(gen))]);
  }
  return perm;
}

/// k distinct indices from {0, ..., n-1}, sampled without replacement by a
/// partial Fisher-Yates shuffle. Order is the draw order.
inline std::vector<Eigen::Index> sample_without_replacement(Eigen::Index n, Eigen::Index k,
                                                            std::uint64_t seed) {
  std::vector<Eigen::Index> pool(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) pool[static_cast<std::size_t>(i)] = i;
  Engine gen(seed);
  for (Eigen::Index i = 0; i < k; ++i) {
    std::uniform_int_distribution<Eigen::Index> pick(i, n - 1);
    std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(pick(gen))]);
  }
  pool.resize(static_cast<std::size_t>(k));
  return pool;
}

/// Rademacher signs (+1 / -1) of length n.
inline Eigen::VectorXd rademacher(Eigen::Index n, std::uint64_t seed) {
  Engine gen(seed);
  std::bernoulli_distribution coin(0.5);
  Eigen::VectorXd s(n);
  for (Eigen::Index i = 0; i < n; ++i) s(i) = coin(gen) ? 1.0 : -1.0;
  return s;
}

}  // namespace sketchreg
