#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

namespace steinlab {

struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;

  std::size_t size() const { return nodes.size(); }

  double integrate(const std::function<double(double)>& f) const {
    double acc = 0.0;
    for (std::size_t i = 0; i < nodes.size(); ++i) acc += weights[i] * f(nodes[i]);
    return acc;
  }
};

namespace detail {

/// Golub-Welsch: nodes/weights from the symmetric tridiagonal Jacobi matrix.
inline QuadratureRule golub_welsch(const Eigen::VectorXd& offdiag, double weight_total) {
  const int n = static_cast<int>(offdiag.size()) + 1;
  Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(n, n);
  for (int k = 0; k < n - 1; ++k) {
    jacobi(k, k + 1) = offdiag(k);
    jacobi(k + 1, k) = offdiag(k);
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jacobi);
  QuadratureRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  for (int i = 0; i < n; ++i) {
    rule.nodes[i] = es.eigenvalues()(i);
    const double v0 = es.eigenvectors()(0, i);
    rule.weights[i] = weight_total * v0 * v0;
  }
  return rule;
}

}  // namespace detail

/// Gauss-Legendre rule on [-1, 1].
inline QuadratureRule gauss_legendre(int n) {
  if (n < 1) throw std::invalid_argument("gauss_legendre: order must be >= 1");
  Eigen::VectorXd off(n - 1);
  for (int k = 1; k < n; ++k) off(k - 1) = k / std::sqrt(4.0 * k * k - 1.0);
  return detail::golub_welsch(off, 2.0);
}

/// Gauss-Legendre rule mapped to [a, b].
inline QuadratureRule gauss_legendre(int n, double a, double b) {
  QuadratureRule base = gauss_legendre(n);
  const double mid = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  for (std::size_t i = 0; i < base.size(); ++i) {
    base.nodes[i] = mid + half * base.nodes[i];
    base.weights[i] *= half;
  }
  return base;
}

/// Quadrature for E[f(Z)] with Z ~ N(0,1): probabilists' Gauss-Hermite.
inline QuadratureRule normal_quadrature(int n) {
  if (n < 1) throw std::invalid_argument("normal_quadrature: order must be >= 1");
  Eigen::VectorXd off(n - 1);
  for (int k = 1; k < n; ++k) off(k - 1) = std::sqrt(0.5 * k);
  QuadratureRule phys = detail::golub_welsch(off, std::sqrt(M_PI));
  const double inv_sqrt_pi = 1.0 / std::sqrt(M_PI);
  for (std::size_t i = 0; i < phys.size(); ++i) {
    phys.nodes[i] *= std::sqrt(2.0);
    phys.weights[i] *= inv_sqrt_pi;
  }
  return phys;
}

/// Composite Gauss-Legendre rule split at the given breakpoints; exact for
/// integrands that are piecewise polynomial between breakpoints.
inline QuadratureRule piecewise_gauss(std::vector<double> breakpoints, int per_piece) {
  std::sort(breakpoints.begin(), breakpoints.end());
  breakpoints.erase(std::unique(breakpoints.begin(), breakpoints.end(),
                                [](double a, double b) { return std::abs(a - b) < 1e-14; }),
                    breakpoints.end());
  if (breakpoints.size() < 2) throw std::invalid_argument("piecewise_gauss: need >= 2 breakpoints");
  QuadratureRule out;
  for (std::size_t s = 0; s + 1 < breakpoints.size(); ++s) {
    QuadratureRule piece = gauss_legendre(per_piece, breakpoints[s], breakpoints[s + 1]);
    out.nodes.insert(out.nodes.end(), piece.nodes.begin(), piece.nodes.end());
    out.weights.insert(out.weights.end(), piece.weights.begin(), piece.weights.end());
  }
  return out;
}

}  // namespace steinlab
