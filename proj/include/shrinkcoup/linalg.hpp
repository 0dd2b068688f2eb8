#pragma once

// Dense kernels behind each Gibbs iteration.  Everything is templated on the
// scalar type and accepts Eigen expressions; the sampler instantiates double.

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <cmath>
#include <string>

#include "shrinkcoup/errors.hpp"

namespace shrinkcoup::linalg {

template <class Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <class Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

namespace detail {
inline void require(bool ok, const char* msg) {
  if (!ok) throw DomainError(msg);
}
}  // namespace detail

/// G = X Diag(eta)^{-1} X^T, accumulated as a symmetric rank-p update.
template <class XD, class ED>
Matrix<typename XD::Scalar> weighted_cross(const Eigen::MatrixBase<XD>& X,
                                           const Eigen::MatrixBase<ED>& eta) {
  using S = typename XD::Scalar;
  detail::require(X.cols() == eta.size(), "weighted_cross: X has wrong column count");
  detail::require((eta.array() > S(0)).all(), "weighted_cross: eta must be positive");
  const Matrix<S> Xs = X * eta.cwiseInverse().cwiseSqrt().asDiagonal();
  Matrix<S> G = Matrix<S>::Zero(X.rows(), X.rows());
  G.template selfadjointView<Eigen::Lower>().rankUpdate(Xs);
  G.template triangularView<Eigen::StrictlyUpper>() = G.transpose();
  return G;
}

/// M = I + xi^{-1} G for a precomputed G.
template <class GD>
Matrix<typename GD::Scalar> gram_to_M(const Eigen::MatrixBase<GD>& G, typename GD::Scalar xi) {
  using S = typename GD::Scalar;
  detail::require(xi > S(0), "gram_to_M: xi must be positive");
  Matrix<S> M = G / xi;
  M.diagonal().array() += S(1);
  return M;
}

/// M = I + xi^{-1} X Diag(eta)^{-1} X^T.
template <class XD, class ED>
Matrix<typename XD::Scalar> weighted_gram(const Eigen::MatrixBase<XD>& X,
                                          const Eigen::MatrixBase<ED>& eta,
                                          typename XD::Scalar xi) {
  detail::require(xi > 0, "weighted_gram: xi must be positive");
  return gram_to_M(weighted_cross(X, eta), xi);
}

/// Cholesky factor of a symmetric positive definite matrix with its log-determinant.
template <class Scalar>
class SpdFactor {
 public:
  SpdFactor() = default;

  template <class MD>
  explicit SpdFactor(const Eigen::MatrixBase<MD>& M) : llt_(M.rows()) {
    detail::require(M.rows() == M.cols(), "spd_factor: matrix must be square");
    llt_.compute(M);
    if (llt_.info() != Eigen::Success) throw FactorizationError("spd_factor: matrix is not positive definite");
    log_det_ = Scalar(2) * llt_.matrixLLT().diagonal().array().log().sum();
    if (!std::isfinite(static_cast<double>(log_det_)))
      throw FactorizationError("spd_factor: non-finite log-determinant");
  }

  Eigen::Index dim() const { return llt_.rows(); }
  Scalar log_det() const { return log_det_; }
  Matrix<Scalar> lower() const { return llt_.matrixL(); }

  template <class VD>
  Vector<Scalar> solve(const Eigen::MatrixBase<VD>& v) const {
    detail::require(v.rows() == dim(), "SpdFactor::solve: dimension mismatch");
    return llt_.solve(v);
  }

  /// v^T M^{-1} v through one triangular solve.
  template <class VD>
  Scalar quad_form(const Eigen::MatrixBase<VD>& v) const {
    detail::require(v.rows() == dim(), "SpdFactor::quad_form: dimension mismatch");
    return llt_.matrixL().solve(v).squaredNorm();
  }

 private:
  Eigen::LLT<Matrix<Scalar>, Eigen::Lower> llt_;
  Scalar log_det_{0};
};

template <class MD>
SpdFactor<typename MD::Scalar> spd_factor(const Eigen::MatrixBase<MD>& M) {
  return SpdFactor<typename MD::Scalar>(M);
}

template <class Scalar>
struct SymEigen {
  Vector<Scalar> values;   // descending
  Matrix<Scalar> vectors;  // columns match values
};

template <class MD>
SymEigen<typename MD::Scalar> sym_eigen(const Eigen::MatrixBase<MD>& M) {
  using S = typename MD::Scalar;
  detail::require(M.rows() == M.cols(), "sym_eigen: matrix must be square");
  Eigen::SelfAdjointEigenSolver<Matrix<S>> es(M);
  if (es.info() != Eigen::Success) throw ConvergenceError("sym_eigen: eigensolver did not converge");
  // Eigen returns ascending order.
  return {es.eigenvalues().reverse(), es.eigenvectors().rowwise().reverse()};
}

/// -1/2 log|M| - (a0+n)/2 log(b0 + y^T M^{-1} y) for a factored M.
template <class Scalar, class YD>
Scalar marginal_log_lik(const SpdFactor<Scalar>& f, const Eigen::MatrixBase<YD>& y, Scalar a0,
                        Scalar b0) {
  const auto n = static_cast<Scalar>(y.size());
  return Scalar(-0.5) * f.log_det() - Scalar(0.5) * (a0 + n) * std::log(b0 + f.quad_form(y));
}

template <class XD, class ED, class YD>
typename XD::Scalar marginal_log_lik(typename XD::Scalar xi, const Eigen::MatrixBase<ED>& eta,
                                     const Eigen::MatrixBase<XD>& X, const Eigen::MatrixBase<YD>& y,
                                     typename XD::Scalar a0, typename XD::Scalar b0) {
  detail::require(X.rows() == y.size(), "marginal_log_lik: X and y disagree on n");
  return marginal_log_lik(spd_factor(weighted_gram(X, eta, xi)), y, a0, b0);
}

/// Same quantity from the eigendecomposition G = Q Lambda Q^T, with
/// qty = Q^T y.  Cost O(n) per xi once the decomposition is known.
template <class LD, class QD>
typename LD::Scalar marginal_log_lik_eigen(typename LD::Scalar xi, const Eigen::MatrixBase<LD>& lambda,
                                           const Eigen::MatrixBase<QD>& qty, typename LD::Scalar a0,
                                           typename LD::Scalar b0) {
  using S = typename LD::Scalar;
  const auto n = static_cast<S>(qty.size());
  const auto d = (S(1) + lambda.array() / xi).eval();
  const S quad = (qty.array().square() / d).sum();
  return S(-0.5) * d.log().sum() - S(0.5) * (a0 + n) * std::log(b0 + quad);
}

}  // namespace shrinkcoup::linalg
