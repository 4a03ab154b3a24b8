#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <utility>

namespace steinlab {

/// Finite truncation of the pair of Hilbert spaces the lab works on: an
/// m-dimensional slice of the isonormal index space with orthonormal basis
/// {h_j}, and a p-node quadrature model of K with inner product
/// <u, v>_K = sum_i w_i u_i v_i.  The induced orthonormal K basis is
/// k_i = e_i / sqrt(w_i); all kernel and operator coefficients in this
/// library are stored in that orthonormal basis.
struct HilbertSpec {
  int m = 0;
  int p = 0;
  Eigen::VectorXd k_weights;

  HilbertSpec() = default;

  HilbertSpec(int m_dim, int k_nodes, Eigen::VectorXd weights)
      : m(m_dim), p(k_nodes), k_weights(std::move(weights)) {
    if (m < 1) throw std::invalid_argument("HilbertSpec: m must be positive");
    if (p < 1) throw std::invalid_argument("HilbertSpec: p must be positive");
    if (k_weights.size() != p) throw std::invalid_argument("HilbertSpec: weight count != p");
    for (int i = 0; i < p; ++i) {
      if (!(k_weights(i) > 0.0)) throw std::invalid_argument("HilbertSpec: weights must be strictly positive");
    }
  }

  /// Plain Euclidean K (all quadrature weights 1).
  static HilbertSpec euclidean(int m_dim, int k_nodes) {
    return HilbertSpec(m_dim, k_nodes, Eigen::VectorXd::Ones(k_nodes));
  }

  bool same_as(const HilbertSpec& other) const {
    return m == other.m && p == other.p && k_weights.size() == other.k_weights.size() &&
           (k_weights - other.k_weights).lpNorm<Eigen::Infinity>() == 0.0;
  }

  /// Node values u(x_i) -> orthonormal coordinates sqrt(w_i) u(x_i).
  Eigen::VectorXd coords_from_values(const Eigen::VectorXd& values) const {
    check_dim(values);
    return values.cwiseProduct(k_weights.cwiseSqrt());
  }

  Eigen::VectorXd values_from_coords(const Eigen::VectorXd& coords) const {
    check_dim(coords);
    return coords.cwiseQuotient(k_weights.cwiseSqrt());
  }

 private:
  void check_dim(const Eigen::VectorXd& v) const {
    if (v.size() != p) throw std::invalid_argument("HilbertSpec: K-vector dimension mismatch");
  }
};

struct KOperatorNorms {
  double trace = 0.0;
  double hs = 0.0;
  double opnorm = 0.0;
};

/// Linear operator on K stored as a p x p matrix of coefficients in the
/// orthonormal K basis.
struct KOperator {
  Eigen::MatrixXd entries;

  KOperator() = default;
  explicit KOperator(Eigen::MatrixXd e) : entries(std::move(e)) {
    if (entries.rows() != entries.cols()) throw std::invalid_argument("KOperator: matrix must be square");
  }

  static KOperator zero(int p) { return KOperator(Eigen::MatrixXd::Zero(p, p)); }

  int dim() const { return static_cast<int>(entries.rows()); }

  /// trace, Hilbert-Schmidt (Frobenius) norm, operator norm (largest
  /// singular value, via full SVD).
  KOperatorNorms norms() const {
    KOperatorNorms out;
    out.trace = entries.trace();
    out.hs = entries.norm();
    if (entries.rows() > 0) {
      Eigen::JacobiSVD<Eigen::MatrixXd> svd(entries);
      out.opnorm = svd.singularValues()(0);
    }
    return out;
  }
};

inline double hs_distance(const KOperator& a, const KOperator& b) {
  return (a.entries - b.entries).norm();
}

}  // namespace steinlab
