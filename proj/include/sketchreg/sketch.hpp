#pragma once

// Sketching operators S (m x n) and their application to a dataset (X, Y).

#include <bit>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "detail/random.hpp"

namespace sketchreg {

enum class SketchKind { Identity, HaarOrthogonal, SRHT, IIDGaussian };

inline std::string to_string(SketchKind k) {
  switch (k) {
    case SketchKind::Identity: return "identity";
    case SketchKind::HaarOrthogonal: return "haar";
    case SketchKind::SRHT: return "srht";
    case SketchKind::IIDGaussian: return "iid";
  }
  return "unknown";
}

inline SketchKind sketch_kind_from_string(const std::string& s) {
  if (s == "identity" || s == "none" || s == "full") return SketchKind::Identity;
  if (s == "haar" || s == "orthogonal") return SketchKind::HaarOrthogonal;
  if (s == "srht") return SketchKind::SRHT;
  if (s == "iid" || s == "gaussian") return SketchKind::IIDGaussian;
  throw std::invalid_argument("unknown sketch kind '" + s + "'");
}

/// Orthogonal kinds satisfy S S^T = I_m exactly (SRHT: in the padded dimension).
inline bool is_orthogonal(SketchKind k) { return k != SketchKind::IIDGaussian; }

namespace detail {

inline Eigen::Index next_power_of_two(Eigen::Index n) {
  return static_cast<Eigen::Index>(std::bit_ceil(static_cast<std::uint64_t>(n)));
}

/// In-place normalized Walsh-Hadamard transform along the rows of A
/// (A.rows() must be a power of two). Row butterflies keep the inner loop
/// contiguous over the columns of each row block.
inline void fwht_rows(Eigen::MatrixXd& A) {
  const Eigen::Index n = A.rows();
  for (Eigen::Index h = 1; h < n; h *= 2) {
    for (Eigen::Index i = 0; i < n; i += 2 * h) {
      auto top = A.middleRows(i, h);
      auto bottom = A.middleRows(i + h, h);
      Eigen::MatrixXd sum = top + bottom;
      bottom = top - bottom;
      top = sum;
    }
  }
  A *= 1.0 / std::sqrt(static_cast<double>(n));
}

}  // namespace detail

/// Subsampled randomized Hadamard transform state, S = B H D P over the
/// padded dimension N = 2^ceil(log2 n).
struct SrhtState {
  Eigen::Index padded = 0;
  std::vector<Eigen::Index> permutation;  ///< (P x)_i = x_{permutation[i]}
  Eigen::VectorXd signs;                  ///< diagonal of D
  std::vector<Eigen::Index> rows;         ///< rows kept by B, in draw order
};

class SketchOperator;
inline SketchOperator make_identity(Eigen::Index n);
inline SketchOperator make_haar(Eigen::Index m, Eigen::Index n, std::uint64_t seed);
inline SketchOperator make_srht(Eigen::Index m, Eigen::Index n, std::uint64_t seed);
inline SketchOperator make_iid_gaussian(Eigen::Index m, Eigen::Index n, std::uint64_t seed);

class SketchOperator {
 public:
  SketchKind kind() const { return kind_; }
  Eigen::Index rows() const { return m_; }
  Eigen::Index cols() const { return n_; }
  std::uint64_t seed() const { return seed_; }
  double downsampling_ratio() const { return static_cast<double>(m_) / static_cast<double>(n_); }

  /// Implicit SRHT factors; throws for other kinds.
  const SrhtState& srht() const {
    if (kind_ != SketchKind::SRHT) throw std::logic_error("operator is not an SRHT");
    return srht_;
  }

  /// S X for an n-row matrix X.
  Eigen::MatrixXd apply(const Eigen::MatrixXd& X) const {
    if (X.rows() != n_)
      throw std::invalid_argument("sketch expects " + std::to_string(n_) + " rows, got " + std::to_string(X.rows()));
    switch (kind_) {
      case SketchKind::Identity: return X;
      case SketchKind::SRHT: return apply_srht(X);
      default: return dense_ * X;
    }
  }

  /// (S X, S Y).
  std::pair<Eigen::MatrixXd, Eigen::VectorXd> apply(const Eigen::MatrixXd& X, const Eigen::VectorXd& Y) const {
    if (Y.size() != X.rows()) throw std::invalid_argument("X and Y have different row counts");
    return {apply(X), apply(Eigen::MatrixXd(Y)).col(0)};
  }

  /// Dense m x n realization (materialized for SRHT and identity).
  Eigen::MatrixXd dense() const {
    switch (kind_) {
      case SketchKind::Identity: return Eigen::MatrixXd::Identity(n_, n_);
      case SketchKind::SRHT: return apply_srht(Eigen::MatrixXd::Identity(n_, n_));
      default: return dense_;
    }
  }

  /// S S^T (m x m).
  Eigen::MatrixXd gram() const {
    if (kind_ == SketchKind::Identity) return Eigen::MatrixXd::Identity(m_, m_);
    const Eigen::MatrixXd S = dense();
    Eigen::MatrixXd G(m_, m_);
    G.setZero();
    G.selfadjointView<Eigen::Lower>().rankUpdate(S);
    return G.selfadjointView<Eigen::Lower>();
  }

 private:
  SketchOperator(SketchKind kind, Eigen::Index m, Eigen::Index n, std::uint64_t seed)
      : kind_(kind), m_(m), n_(n), seed_(seed) {}

  Eigen::MatrixXd apply_srht(const Eigen::MatrixXd& X) const {
    Eigen::MatrixXd work = Eigen::MatrixXd::Zero(srht_.padded, X.cols());
    for (Eigen::Index i = 0; i < srht_.padded; ++i) {
      const Eigen::Index src = srht_.permutation[static_cast<std::size_t>(i)];
      if (src < n_) work.row(i) = srht_.signs(i) * X.row(src);
    }
    detail::fwht_rows(work);
    Eigen::MatrixXd out(m_, X.cols());
    for (Eigen::Index r = 0; r < m_; ++r) out.row(r) = work.row(srht_.rows[static_cast<std::size_t>(r)]);
    return out;
  }

  SketchKind kind_;
  Eigen::Index m_, n_;
  std::uint64_t seed_;
  Eigen::MatrixXd dense_;
  SrhtState srht_;

  friend SketchOperator make_identity(Eigen::Index n);
  friend SketchOperator make_haar(Eigen::Index m, Eigen::Index n, std::uint64_t seed);
  friend SketchOperator make_srht(Eigen::Index m, Eigen::Index n, std::uint64_t seed);
  friend SketchOperator make_iid_gaussian(Eigen::Index m, Eigen::Index n, std::uint64_t seed);
};

namespace detail {
inline void check_sketch_size(Eigen::Index m, Eigen::Index n) {
  if (n < 1 || m < 1) throw std::invalid_argument("sketch sizes must be positive");
  if (m > n) throw std::invalid_argument("sketch size m must not exceed n");
}
}  // namespace detail

/// S = I_n; the unsketched estimator.
inline SketchOperator make_identity(Eigen::Index n) {
  detail::check_sketch_size(n, n);
  return SketchOperator(SketchKind::Identity, n, n, 0);
}

/// First m rows of a Haar-distributed n x n orthogonal matrix: the Q factor
/// of a Gaussian matrix with the signs fixed so that diag(R) > 0.
inline SketchOperator make_haar(Eigen::Index m, Eigen::Index n, std::uint64_t seed) {
  detail::check_sketch_size(m, n);
  const Eigen::MatrixXd G = gaussian_matrix(n, n, derive_seed(seed, Stream::sketch));
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(G);
  Eigen::MatrixXd Q = qr.householderQ();
  const auto& R = qr.matrixQR();
  for (Eigen::Index j = 0; j < n; ++j)
    if (R(j, j) < 0.0) Q.col(j) *= -1.0;
  SketchOperator op(SketchKind::HaarOrthogonal, m, n, seed);
  op.dense_ = Q.topRows(m);
  return op;
}

/// S = B H D P. For n not a power of two the input is zero-padded to
/// N = next power of two, so S S^T = I_m holds in dimension N only.
inline SketchOperator make_srht(Eigen::Index m, Eigen::Index n, std::uint64_t seed) {
  detail::check_sketch_size(m, n);
  SketchOperator op(SketchKind::SRHT, m, n, seed);
  const Eigen::Index N = detail::next_power_of_two(n);
  op.srht_.padded = N;
  op.srht_.permutation = random_permutation(N, derive_seed(seed, Stream::sketch_perm));
  op.srht_.signs = rademacher(N, derive_seed(seed, Stream::sketch_signs));
  op.srht_.rows = sample_without_replacement(N, m, derive_seed(seed, Stream::sketch_rows));
  return op;
}

/// Entries i.i.d. N(0, 1/n).
inline SketchOperator make_iid_gaussian(Eigen::Index m, Eigen::Index n, std::uint64_t seed) {
  detail::check_sketch_size(m, n);
  SketchOperator op(SketchKind::IIDGaussian, m, n, seed);
  op.dense_ = gaussian_matrix(m, n, derive_seed(seed, Stream::sketch), 1.0 / std::sqrt(static_cast<double>(n)));
  return op;
}

inline SketchOperator make_sketch(SketchKind kind, Eigen::Index m, Eigen::Index n, std::uint64_t seed) {
  switch (kind) {
    case SketchKind::Identity:
      if (m != n) throw std::invalid_argument("identity sketch requires m == n");
      return make_identity(n);
    case SketchKind::HaarOrthogonal: return make_haar(m, n, seed);
    case SketchKind::SRHT: return make_srht(m, n, seed);
    case SketchKind::IIDGaussian: return make_iid_gaussian(m, n, seed);
  }
  throw std::invalid_argument("unknown sketch kind");
}

/// max |S S^T - I|, used to pick the orthogonal fast path.
inline double orthogonality_defect(const SketchOperator& S) {
  if (S.kind() == SketchKind::Identity) return 0.0;
  return (S.gram() - Eigen::MatrixXd::Identity(S.rows(), S.rows())).cwiseAbs().maxCoeff();
}

// Operator spec JSON: {"kind":"haar|srht|iid","m":m,"n":n,"seed":s}.
// Dense realizations are never serialized.

inline nlohmann::json sketch_spec_json(const SketchOperator& S) {
  return {{"kind", to_string(S.kind())}, {"m", S.rows()}, {"n", S.cols()}, {"seed", S.seed()}};
}

inline SketchOperator sketch_from_json(const nlohmann::json& j) {
  return make_sketch(sketch_kind_from_string(j.at("kind").get<std::string>()), j.at("m").get<Eigen::Index>(),
                     j.at("n").get<Eigen::Index>(), j.at("seed").get<std::uint64_t>());
}

}  // namespace sketchreg
