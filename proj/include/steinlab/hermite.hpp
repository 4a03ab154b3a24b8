#pragma once

#include <cmath>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

#include "steinlab/quadrature.hpp"

namespace steinlab {

/// Probabilists' Hermite polynomial H_q(x) via the three-term recurrence
/// H_{q+1}(x) = x H_q(x) - q H_{q-1}(x), H_0 = 1, H_1 = x.
inline double hermite_eval(int q, double x) {
  if (q < 0) throw std::invalid_argument("hermite_eval: negative order");
  if (q == 0) return 1.0;
  double prev = 1.0;
  double cur = x;
  for (int k = 1; k < q; ++k) {
    const double next = x * cur - static_cast<double>(k) * prev;
    prev = cur;
    cur = next;
  }
  return cur;
}

/// Fills out[0..qmax] with H_0(x), ..., H_qmax(x).
inline void hermite_row(int qmax, double x, std::span<double> out) {
  out[0] = 1.0;
  if (qmax >= 1) out[1] = x;
  for (int k = 1; k < qmax; ++k) {
    out[static_cast<std::size_t>(k) + 1] = x * out[k] - static_cast<double>(k) * out[k - 1];
  }
}

/// Coefficients of f in the Hermite basis: c_q = E[f(N) H_q(N)] / q!.
/// bessel_defect = E[f(N)^2] - sum c_q^2 q! reports the truncation loss.
struct HermiteCoefficients {
  std::vector<double> c;
  double bessel_defect = 0.0;
  int quad_order = 0;

  int truncation_order() const { return static_cast<int>(c.size()) - 1; }

  /// Smallest q >= 1 with c_q significantly nonzero (Hermite rank).
  int rank(double tol = 1e-12) const {
    for (std::size_t q = 1; q < c.size(); ++q)
      if (std::abs(c[q]) > tol) return static_cast<int>(q);
    return 0;
  }
};

inline HermiteCoefficients hermite_expand(const std::function<double(double)>& f, int order_q,
                                          int quad_order = 64) {
  if (order_q < 0) throw std::invalid_argument("hermite_expand: negative truncation order");
  if (quad_order < order_q + 1)
    throw std::invalid_argument("hermite_expand: quadrature order too small for requested Q");
  const QuadratureRule rule = normal_quadrature(quad_order);

  HermiteCoefficients out;
  out.quad_order = quad_order;
  out.c.assign(static_cast<std::size_t>(order_q) + 1, 0.0);
  std::vector<double> hrow(static_cast<std::size_t>(order_q) + 1, 0.0);
  double second_moment = 0.0;
  for (std::size_t i = 0; i < rule.size(); ++i) {
    const double x = rule.nodes[i];
    const double w = rule.weights[i];
    const double fx = f(x);
    second_moment += w * fx * fx;
    hermite_row(order_q, x, hrow);
    for (int q = 0; q <= order_q; ++q) out.c[q] += w * fx * hrow[q];
  }
  double qfact = 1.0;
  double bessel_sum = 0.0;
  for (int q = 0; q <= order_q; ++q) {
    if (q > 0) qfact *= static_cast<double>(q);
    out.c[q] /= qfact;
    bessel_sum += out.c[q] * out.c[q] * qfact;
  }
  out.bessel_defect = second_moment - bessel_sum;
  return out;
}

}  // namespace steinlab
