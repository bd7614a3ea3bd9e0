#pragma once

#include <cmath>
#include <stdexcept>
#include <utility>
#include <variant>

#include <Eigen/Dense>

namespace sketchreg {

/// Feature covariance Sigma, either diagonal (all built-in generators) or a
/// dense symmetric positive definite matrix.
class Covariance {
 public:
  static Covariance diagonal(Eigen::VectorXd eigenvalues) {
    if (eigenvalues.size() == 0) throw std::invalid_argument("covariance needs positive dimension");
    if (!(eigenvalues.minCoeff() > 0.0)) throw std::invalid_argument("covariance eigenvalues must be positive");
    Covariance c;
    c.value_ = std::move(eigenvalues);
    return c;
  }
  static Covariance identity(Eigen::Index p) { return diagonal(Eigen::VectorXd::Ones(p)); }
  static Covariance dense(Eigen::MatrixXd sigma) {
    if (sigma.rows() != sigma.cols()) throw std::invalid_argument("covariance must be square");
    if ((sigma - sigma.transpose()).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + sigma.cwiseAbs().maxCoeff()))
      throw std::invalid_argument("covariance must be symmetric");
    if (Eigen::LLT<Eigen::MatrixXd>(sigma).info() != Eigen::Success)
      throw std::invalid_argument("covariance must be positive definite");
    Covariance c;
    c.value_ = std::move(sigma);
    return c;
  }

  bool is_diagonal() const { return std::holds_alternative<Eigen::VectorXd>(value_); }
  Eigen::Index dim() const {
    return is_diagonal() ? std::get<Eigen::VectorXd>(value_).size() : std::get<Eigen::MatrixXd>(value_).rows();
  }
  const Eigen::VectorXd& diag() const { return std::get<Eigen::VectorXd>(value_); }

  Eigen::MatrixXd matrix() const {
    if (is_diagonal()) return diag().asDiagonal();
    return std::get<Eigen::MatrixXd>(value_);
  }

  double trace() const { return is_diagonal() ? diag().sum() : std::get<Eigen::MatrixXd>(value_).trace(); }

  /// v^T Sigma v
  double quad(const Eigen::VectorXd& v) const {
    check(v.size());
    if (is_diagonal()) return (v.array().square() * diag().array()).sum();
    return v.dot(std::get<Eigen::MatrixXd>(value_) * v);
  }

  /// Sigma M
  Eigen::MatrixXd apply(const Eigen::MatrixXd& M) const {
    check(M.rows());
    if (is_diagonal()) return diag().asDiagonal() * M;
    return std::get<Eigen::MatrixXd>(value_) * M;
  }

  /// sum_j v_j^T Sigma v_j over the columns of V, i.e. tr(V^T Sigma V).
  double trace_quad(const Eigen::MatrixXd& V) const {
    check(V.rows());
    if (is_diagonal()) return (diag().asDiagonal() * V.cwiseAbs2()).sum();
    return (V.transpose() * std::get<Eigen::MatrixXd>(value_) * V).trace();
  }

  /// Rows of Z mapped to rows of Z Sigma^{1/2}.
  Eigen::MatrixXd color_rows(const Eigen::MatrixXd& Z) const {
    check(Z.cols());
    if (is_diagonal()) return Z * diag().cwiseSqrt().asDiagonal();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(std::get<Eigen::MatrixXd>(value_));
    const Eigen::MatrixXd root = eig.operatorSqrt();
    return Z * root;
  }

 private:
  Covariance() = default;
  void check(Eigen::Index d) const {
    if (d != dim()) throw std::invalid_argument("dimension mismatch with covariance");
  }
  std::variant<Eigen::VectorXd, Eigen::MatrixXd> value_;
};

}  // namespace sketchreg
