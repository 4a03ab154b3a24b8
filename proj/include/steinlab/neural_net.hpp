#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "steinlab/hilbert.hpp"
#include "steinlab/quadrature.hpp"
#include "steinlab/rng.hpp"
#include "steinlab/stein.hpp"

namespace steinlab {

/// C^2 activation with the polynomial envelope |tau^(l)(x)| <= a + b|x|^gamma
/// for l = 0, 1, 2.
struct ActivationSpec {
  std::string name;
  std::function<double(double)> tau, d1, d2;
  double a = 1.0;
  double b = 0.0;
  double gamma = 1.0;

  static ActivationSpec tanh_act() {
    ActivationSpec s;
    s.name = "tanh";
    s.tau = [](double x) { return std::tanh(x); };
    s.d1 = [](double x) {
      const double c = std::cosh(x);
      return 1.0 / (c * c);
    };
    s.d2 = [](double x) {
      const double t = std::tanh(x);
      const double c = std::cosh(x);
      return -2.0 * t / (c * c);
    };
    // sup |tanh| = sup |tanh'| = 1, sup |tanh''| = 4/(3 sqrt(3)) < 1.
    s.a = 1.0;
    s.b = 0.0;
    s.gamma = 1.0;
    return s;
  }

  static ActivationSpec identity() {
    ActivationSpec s;
    s.name = "identity";
    s.tau = [](double x) { return x; };
    s.d1 = [](double) { return 1.0; };
    s.d2 = [](double) { return 0.0; };
    s.a = 1.0;
    s.b = 1.0;
    s.gamma = 1.0;
    return s;
  }

  static ActivationSpec constant(double c) {
    ActivationSpec s;
    s.name = "constant";
    s.tau = [c](double) { return c; };
    s.d1 = [](double) { return 0.0; };
    s.d2 = [](double) { return 0.0; };
    s.a = std::abs(c) + 1.0;
    s.b = 0.0;
    s.gamma = 1.0;
    return s;
  }

  static ActivationSpec cosine() {
    ActivationSpec s;
    s.name = "cos";
    s.tau = [](double x) { return std::cos(x); };
    s.d1 = [](double x) { return -std::sin(x); };
    s.d2 = [](double x) { return -std::cos(x); };
    s.a = 1.0;
    s.b = 0.0;
    s.gamma = 1.0;
    return s;
  }

  static ActivationSpec from_name(const std::string& name) {
    if (name == "tanh") return tanh_act();
    if (name == "identity") return identity();
    if (name == "constant") return constant(1.0);
    if (name == "cos") return cosine();
    throw std::invalid_argument("ActivationSpec: unknown activation '" + name + "'");
  }

  /// Envelope check on a dense grid over [-50, 50].
  bool envelope_holds(int grid_points = 1000) const {
    for (int i = 0; i < grid_points; ++i) {
      const double x = -50.0 + 100.0 * i / (grid_points - 1);
      const double cap = a + b * std::pow(std::abs(x), gamma);
      if (std::abs(tau(x)) > cap || std::abs(d1(x)) > cap || std::abs(d2(x)) > cap) return false;
    }
    return true;
  }
};

/// Quadrature model of the input measure nu: nodes with nu-weights.
struct InputMeasure {
  Eigen::VectorXd nodes;
  Eigen::VectorXd weights;

  static InputMeasure uniform(int n_nodes, double lo = -1.0, double hi = 1.0) {
    const QuadratureRule rule = gauss_legendre(n_nodes, lo, hi);
    InputMeasure m;
    m.nodes = Eigen::Map<const Eigen::VectorXd>(rule.nodes.data(), n_nodes);
    // Uniform probability measure on [lo, hi].
    m.weights = Eigen::Map<const Eigen::VectorXd>(rule.weights.data(), n_nodes) / (hi - lo);
    return m;
  }

  static InputMeasure gaussian(int n_nodes) {
    const QuadratureRule rule = normal_quadrature(n_nodes);
    InputMeasure m;
    m.nodes = Eigen::Map<const Eigen::VectorXd>(rule.nodes.data(), n_nodes);
    m.weights = Eigen::Map<const Eigen::VectorXd>(rule.weights.data(), n_nodes);
    return m;
  }

  static InputMeasure from_name(const std::string& name, int n_nodes) {
    if (name == "uniform") return uniform(n_nodes);
    if (name == "gaussian") return gaussian(n_nodes);
    throw std::invalid_argument("InputMeasure: unknown measure '" + name + "'");
  }

  int size() const { return static_cast<int>(nodes.size()); }

  /// |x|^{2 gamma + 4} moment, finite by construction on a quadrature grid;
  /// reported so configs can sanity-check the continuum condition.
  double moment_2g4(double gamma) const {
    double acc = 0.0;
    for (int i = 0; i < size(); ++i) acc += weights(i) * std::pow(std::abs(nodes(i)), 2.0 * gamma + 4.0);
    return acc;
  }

  HilbertSpec k_spec(int m_unused = 1) const { return HilbertSpec(m_unused, size(), weights); }
};

/// One draw of the width-n shallow network on the nu-nodes:
/// f_n(x) = n^{-1/2} sum_j w_j tau(x w_j^0), all weights standard normal.
inline Eigen::VectorXd sample_network(int width, const ActivationSpec& act, const InputMeasure& meas,
                                      std::uint64_t seed, std::uint64_t replicate) {
  if (width < 1) throw std::invalid_argument("sample_network: width must be >= 1");
  CounterRng rng(seed, RngStream::kNnWeights, replicate);
  Eigen::VectorXd out = Eigen::VectorXd::Zero(meas.size());
  const double scale = 1.0 / std::sqrt(static_cast<double>(width));
  for (int j = 0; j < width; ++j) {
    const double w = rng.normal();
    const double w0 = rng.normal();
    for (int i = 0; i < meas.size(); ++i) out(i) += w * act.tau(meas.nodes(i) * w0);
  }
  return out * scale;
}

/// Width-independent covariance C(x, y) = E[tau(xZ) tau(yZ)], by normal
/// quadrature.  Doubling the order must move the value by < 1e-8, else the
/// quadrature has not converged for this activation.
inline double nn_covariance(const ActivationSpec& act, double x, double y, int quad_order = 64) {
  auto eval = [&](int order) {
    const QuadratureRule rule = normal_quadrature(order);
    double acc = 0.0;
    for (std::size_t i = 0; i < rule.size(); ++i)
      acc += rule.weights[i] * act.tau(x * rule.nodes[i]) * act.tau(y * rule.nodes[i]);
    return acc;
  };
  const double v = eval(quad_order);
  const double v2 = eval(2 * quad_order);
  if (std::abs(v2 - v) > 1e-8 * std::max(1.0, std::abs(v)))
    throw std::runtime_error("nn_covariance: quadrature not converged for this activation");
  return v2;
}

inline KOperator nn_covariance_operator(const ActivationSpec& act, const InputMeasure& meas,
                                        int quad_order = 64) {
  const int p = meas.size();
  Eigen::MatrixXd cov(p, p);
  for (int i = 0; i < p; ++i)
    for (int j = i; j < p; ++j) {
      const double v = nn_covariance(act, meas.nodes(i), meas.nodes(j), quad_order);
      cov(i, j) = v;
      cov(j, i) = v;
    }
  // Into the orthonormal K basis: S_ij = sqrt(w_i w_j) C(x_i, x_j).
  const Eigen::VectorXd sw = meas.weights.cwiseSqrt();
  return KOperator(sw.asDiagonal() * cov * sw.asDiagonal());
}

/// Closed-form L4-norm tables of the derivative fields over the weight
/// blocks.  The isonormal slots come in (w_j, w_j^0) interval pairs; the
/// tables depend on the block type only, not on j:
///   ||D_z f_n(r)||_4     = n^{-1/2} [ t0(r)            on w-blocks
///                                     3^{1/4} |r| t1(r) on w0-blocks ]
///   ||D^2_{x,z} f_n(r)||_4 = n^{-1/2} [ 0                    (w, w)
///                                       |r| t1(r)            (w, w0), (w0, w)
///                                       3^{1/4} r^2 t2(r)    (w0, w0) ]
/// with t_l(r) = ||tau^(l)(r G)||_4.
struct NnDerivTables {
  Eigen::VectorXd t0, t1, t2;  // per r node
  int width = 1;

  double n_scale() const { return 1.0 / std::sqrt(static_cast<double>(width)); }

  // Block-type indices: 0 = w, 1 = w0.
  double d1_block(int type, int r_idx, const InputMeasure& meas) const {
    const double r = meas.nodes(r_idx);
    const double v = (type == 0) ? t0(r_idx) : std::pow(3.0, 0.25) * std::abs(r) * t1(r_idx);
    return n_scale() * v;
  }

  double d2_block(int type_x, int type_z, int r_idx, const InputMeasure& meas) const {
    const double r = meas.nodes(r_idx);
    double v = 0.0;
    if (type_x == 0 && type_z == 0) v = 0.0;
    else if (type_x == 1 && type_z == 1) v = std::pow(3.0, 0.25) * r * r * t2(r_idx);
    else v = std::abs(r) * t1(r_idx);
    return n_scale() * v;
  }
};

inline NnDerivTables nn_derivative_norm_tables(const ActivationSpec& act, int width,
                                               const InputMeasure& meas, int quad_order = 64) {
  const QuadratureRule rule = normal_quadrature(quad_order);
  NnDerivTables tab;
  tab.width = width;
  const int p = meas.size();
  tab.t0.resize(p);
  tab.t1.resize(p);
  tab.t2.resize(p);
  for (int i = 0; i < p; ++i) {
    const double r = meas.nodes(i);
    double m0 = 0.0, m1 = 0.0, m2 = 0.0;
    for (std::size_t q = 0; q < rule.size(); ++q) {
      const double z = r * rule.nodes[q];
      const double w = rule.weights[q];
      m0 += w * std::pow(act.tau(z), 4);
      m1 += w * std::pow(act.d1(z), 4);
      m2 += w * std::pow(act.d2(z), 4);
    }
    tab.t0(i) = std::pow(m0, 0.25);
    tab.t1(i) = std::pow(m1, 0.25);
    tab.t2(i) = std::pow(m2, 0.25);
  }
  return tab;
}

/// Reduced second-order bound for the shallow network.  The A-integrals
/// collapse to sums over the j = 1..n block pairs, each block of unit
/// length, so the five-fold integral is the two-point-grid evaluation times
/// the width:  bound = sqrt(n) * imp_bound_quadrature(block tables).
inline double nn_theorem_bound(const ActivationSpec& act, const InputMeasure& meas, int width,
                               int quad_order = 64) {
  const NnDerivTables tab = nn_derivative_norm_tables(act, width, meas, quad_order);
  const int nr = meas.size();
  DerivL4Tables t;
  t.nx = 2;
  t.nr = nr;
  t.mu_w = {1.0, 1.0};
  t.nu_w.assign(static_cast<std::size_t>(nr), 0.0);
  for (int r = 0; r < nr; ++r) t.nu_w[static_cast<std::size_t>(r)] = meas.weights(r);
  t.d1.assign(2 * static_cast<std::size_t>(nr), 0.0);
  t.d2.assign(4 * static_cast<std::size_t>(nr), 0.0);
  for (int r = 0; r < nr; ++r) {
    for (int x = 0; x < 2; ++x) {
      t.d1[static_cast<std::size_t>(x) * nr + r] = tab.d1_block(x, r, meas);
      for (int y = 0; y < 2; ++y)
        t.d2[(static_cast<std::size_t>(x) * 2 + y) * nr + r] = tab.d2_block(x, y, r, meas);
    }
  }
  return std::sqrt(static_cast<double>(width)) * imp_bound_quadrature(t);
}

/// Envelope-constant majorant of the same integral: the bound must stay
/// below this for any activation satisfying the envelope.
inline double nn_theorem_majorant(const ActivationSpec& act, const InputMeasure& meas, int width,
                                  int quad_order = 64) {
  const NnDerivTables tab = nn_derivative_norm_tables(act, width, meas, quad_order);
  double c2 = 0.0;  // ||D2|| <= c2 (1 + |r|^{2+gamma}) / sqrt(n) on paired blocks
  double c1 = 0.0;  // ||D1|| <= c1 (1 + |r|^{1+gamma}) / sqrt(n)
  for (int i = 0; i < meas.size(); ++i) {
    const double r = std::abs(meas.nodes(i));
    const double env2 = 1.0 + std::pow(r, 2.0 + act.gamma);
    const double env1 = 1.0 + std::pow(r, 1.0 + act.gamma);
    for (int x = 0; x < 2; ++x) {
      c1 = std::max(c1, tab.d1_block(x, i, meas) / tab.n_scale() / env1);
      for (int y = 0; y < 2; ++y) c2 = std::max(c2, tab.d2_block(x, y, i, meas) / tab.n_scale() / env2);
    }
  }
  double i2 = 0.0, i1 = 0.0;
  for (int i = 0; i < meas.size(); ++i) {
    const double r = std::abs(meas.nodes(i));
    i2 += meas.weights(i) * std::pow(1.0 + std::pow(r, 2.0 + act.gamma), 2);
    i1 += meas.weights(i) * std::pow(1.0 + std::pow(r, 1.0 + act.gamma), 2);
  }
  // Five-fold integral of the separable majorant: the block triple integral
  // contributes 8 per j (three unit-length pairs), n blocks, n^{-2} scale.
  const double integral = c2 * c2 * c1 * c1 * i2 * i1 * 8.0 / static_cast<double>(width);
  return 0.5 * std::sqrt(3.0) * std::sqrt(integral);
}

}  // namespace steinlab
