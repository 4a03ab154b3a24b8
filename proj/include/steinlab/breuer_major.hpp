#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "steinlab/hermite.hpp"
#include "steinlab/quadrature.hpp"
#include "steinlab/rng.hpp"

namespace steinlab {

/// Scalar C^2 function with explicit derivatives, the subordinating f of the
/// Breuer-Major functional.
struct ScalarC2 {
  std::string name;
  std::function<double(double)> f, d1, d2;
};

/// f = H_q with derivatives from H_q' = q H_{q-1}.
inline ScalarC2 hermite_function(int q) {
  if (q < 0) throw std::invalid_argument("hermite_function: negative order");
  ScalarC2 out;
  out.name = "hermite" + std::to_string(q);
  out.f = [q](double x) { return hermite_eval(q, x); };
  out.d1 = [q](double x) { return q >= 1 ? q * hermite_eval(q - 1, x) : 0.0; };
  out.d2 = [q](double x) { return q >= 2 ? q * (q - 1.0) * hermite_eval(q - 2, x) : 0.0; };
  return out;
}

/// Moving-average representation of a stationary Gaussian process:
/// Y_t = X(h_t) with h_t(x) = g(t - x), g nonnegative with compact support
/// and unit L2 norm, so rho(t) = int g(s) g(s + |t|) ds with rho(0) = 1.
class MovingAverageModel {
 public:
  enum class Family { kBoxcar, kTriangle, kTruncGauss };

  static MovingAverageModel boxcar() { return MovingAverageModel(Family::kBoxcar); }
  static MovingAverageModel triangle() { return MovingAverageModel(Family::kTriangle); }
  static MovingAverageModel trunc_gauss() { return MovingAverageModel(Family::kTruncGauss); }

  static MovingAverageModel from_name(const std::string& name) {
    if (name == "boxcar") return boxcar();
    if (name == "triangle") return triangle();
    if (name == "trunc_gauss") return trunc_gauss();
    throw std::invalid_argument("MovingAverageModel: unknown kernel family '" + name + "'");
  }

  Family family() const { return family_; }

  /// Normalized kernel value (int g^2 = 1); support is [0, support()).
  double g(double x) const {
    if (x < 0.0 || x >= support_) return 0.0;
    switch (family_) {
      case Family::kBoxcar:
        return norm_;
      case Family::kTriangle:
        return norm_ * (1.0 - std::abs(2.0 * x / support_ - 1.0));
      case Family::kTruncGauss:
        return norm_ * std::exp(-0.5 * square(3.0 * (2.0 * x / support_ - 1.0)));
    }
    return 0.0;
  }

  double support() const { return support_; }

  /// Autocorrelation rho(t) = int g(s) g(s + |t|) ds; compactly supported on
  /// [-support, support], rho(0) = 1.
  double rho(double t) const {
    const double u = std::abs(t);
    if (u >= support_) return 0.0;
    // Piecewise-smooth integrand: split at the kernel's own breakpoints and
    // their shifts so Gauss-Legendre stays exact for the polynomial pieces.
    std::vector<double> cuts;
    for (const double b : breakpoints_) {
      cuts.push_back(b);
      cuts.push_back(b - u);
    }
    std::vector<double> bounded;
    for (const double c : cuts)
      if (c > 0.0 && c < support_ - u) bounded.push_back(c);
    bounded.push_back(0.0);
    bounded.push_back(support_ - u);
    const QuadratureRule rule = piecewise_gauss(bounded, 16);
    return rule.integrate([&](double s) { return g(s) * g(s + u); });
  }

  /// int rho(t)^q dt over the support.
  double rho_power_integral(int q) const {
    std::vector<double> cuts = breakpoints_;
    cuts.push_back(0.0);
    cuts.push_back(support_);
    const QuadratureRule rule = piecewise_gauss(cuts, 24);
    double half = 0.0;
    for (std::size_t i = 0; i < rule.size(); ++i)
      half += rule.weights[i] * std::pow(rho(rule.nodes[i]), q);
    return 2.0 * half;  // rho is even
  }

  /// G* = sup_u int g(t + u) dt, located by direct maximization over a shift
  /// grid (constant in u for an integral over the whole line).
  double g_star(int shift_grid = 33) const {
    const QuadratureRule rule = piecewise_gauss(full_breakpoints(), 16);
    double best = 0.0;
    for (int s = 0; s < shift_grid; ++s) {
      const double u = -support_ + 2.0 * support_ * s / (shift_grid - 1);
      double val = 0.0;
      for (std::size_t i = 0; i < rule.size(); ++i) val += rule.weights[i] * g(rule.nodes[i] + u);
      best = std::max(best, val);
    }
    return best;
  }

  std::vector<double> full_breakpoints() const {
    std::vector<double> cuts = breakpoints_;
    cuts.push_back(0.0);
    cuts.push_back(support_);
    return cuts;
  }

 private:
  explicit MovingAverageModel(Family fam) : family_(fam) {
    switch (family_) {
      case Family::kBoxcar:
        support_ = 1.0;
        norm_ = 1.0;  // int 1 = 1 already
        breakpoints_ = {};
        break;
      case Family::kTriangle: {
        support_ = 1.0;
        // int_0^1 tri(x)^2 dx = 1/3 for the unit triangle.
        norm_ = std::sqrt(3.0);
        breakpoints_ = {0.5};
        break;
      }
      case Family::kTruncGauss: {
        support_ = 1.0;
        QuadratureRule rule = gauss_legendre(48, 0.0, 1.0);
        double l2 = 0.0;
        for (std::size_t i = 0; i < rule.size(); ++i) {
          const double v = std::exp(-0.5 * square(3.0 * (2.0 * rule.nodes[i] - 1.0)));
          l2 += rule.weights[i] * v * v;
        }
        norm_ = 1.0 / std::sqrt(l2);
        breakpoints_ = {};
        break;
      }
    }
  }

  static double square(double x) { return x * x; }

  Family family_;
  double support_ = 1.0;
  double norm_ = 1.0;
  std::vector<double> breakpoints_;  // interior kinks of g within (0, support)
};

namespace detail_bm {

/// Covariance of f(Y_t), f(Y_0) as a function of the lag via the Hermite
/// expansion: K(u) = sum_{q>=1} c_q^2 q! rho(u)^q.
inline double lag_covariance(const MovingAverageModel& model, const HermiteCoefficients& coeffs,
                             double u) {
  const double r = model.rho(u);
  if (r == 0.0) return 0.0;
  double acc = 0.0;
  double qfact = 1.0;
  double rpow = 1.0;
  for (int q = 1; q <= coeffs.truncation_order(); ++q) {
    qfact *= static_cast<double>(q);
    rpow *= r;
    acc += coeffs.c[static_cast<std::size_t>(q)] * coeffs.c[static_cast<std::size_t>(q)] * qfact * rpow;
  }
  return acc;
}

/// Length of [-r1 T, r1 T] cap ([-r2 T, r2 T] + u).
inline double interval_overlap(double r1, double r2, double T, double u) {
  const double lo = std::max(-r1 * T, -r2 * T + u);
  const double hi = std::min(r1 * T, r2 * T + u);
  return std::max(0.0, hi - lo);
}

}  // namespace detail_bm

/// C_T(r1, r2) = (1/T) int int K(t - s) over the two windows, reduced by
/// stationarity to a single lag integral against the overlap length.
inline double covariance_CT(const MovingAverageModel& model, const HermiteCoefficients& coeffs,
                            double r1, double r2, double T) {
  if (r1 <= 0.0 || r2 <= 0.0) return 0.0;
  const double L = model.support();
  std::vector<double> cuts = model.full_breakpoints();
  for (double& c : cuts) c = -c;
  for (const double b : model.full_breakpoints()) cuts.push_back(b);
  // Kinks of the overlap length fall at u = (r1 -+ r2) T; only those inside
  // the lag support matter.
  for (const double k : {(r1 - r2) * T, (r2 - r1) * T, (r1 + r2) * T, -(r1 + r2) * T})
    if (k > -L && k < L) cuts.push_back(k);
  cuts.push_back(-L);
  cuts.push_back(L);
  const QuadratureRule rule = piecewise_gauss(cuts, 24);
  double acc = 0.0;
  for (std::size_t i = 0; i < rule.size(); ++i) {
    const double u = rule.nodes[i];
    acc += rule.weights[i] * detail_bm::lag_covariance(model, coeffs, u) *
           detail_bm::interval_overlap(r1, r2, T, u);
  }
  return acc / T;
}

/// Limit covariance: C_inf(r1, r2) = 2 min(r1, r2) sum c_q^2 q! int rho^q.
inline double covariance_Cinf(const MovingAverageModel& model, const HermiteCoefficients& coeffs,
                              double r1, double r2) {
  if (r1 <= 0.0 || r2 <= 0.0) return 0.0;
  double acc = 0.0;
  double qfact = 1.0;
  for (int q = 1; q <= coeffs.truncation_order(); ++q) {
    qfact *= static_cast<double>(q);
    const double cq = coeffs.c[static_cast<std::size_t>(q)];
    if (cq == 0.0) continue;
    acc += cq * cq * qfact * model.rho_power_integral(q);
  }
  return 2.0 * std::min(r1, r2) * acc;
}

/// M1 = int |Cov[f(Y_t), f(Y_0)]| dt.  Diagnostic only; bounded by
/// ||rho||_{L1} E[f(Y_0)^2 - (E f)^2].
inline double bm_m1_diagnostic(const MovingAverageModel& model, const HermiteCoefficients& coeffs) {
  std::vector<double> cuts = model.full_breakpoints();
  for (const double b : model.full_breakpoints()) cuts.push_back(-b);
  const QuadratureRule rule = piecewise_gauss(cuts, 24);
  double acc = 0.0;
  for (std::size_t i = 0; i < rule.size(); ++i)
    acc += rule.weights[i] * std::abs(detail_bm::lag_covariance(model, coeffs, rule.nodes[i]));
  return acc;
}

/// sigma = sqrt(2 sum c_q^2 q! int rho^q); the Brownian scale of the limit.
inline double sigma_limit(const MovingAverageModel& model, const HermiteCoefficients& coeffs) {
  const double sq = covariance_Cinf(model, coeffs, 1.0, 1.0) / 2.0;
  const double sigma_sq = 2.0 * sq;
  if (sigma_sq < -1e-12) throw std::runtime_error("sigma_limit: negative radicand, quadrature bug");
  return std::sqrt(std::max(0.0, sigma_sq));
}

/// L4 norm of h(N), N ~ N(0,1), by normal quadrature.
inline double gaussian_l4_norm(const std::function<double(double)>& h, int quad_order = 64) {
  const QuadratureRule rule = normal_quadrature(quad_order);
  double m4 = 0.0;
  for (std::size_t i = 0; i < rule.size(); ++i) {
    const double v = h(rule.nodes[i]);
    m4 += rule.weights[i] * v * v * v * v;
  }
  if (!std::isfinite(m4)) throw std::runtime_error("gaussian_l4_norm: fourth moment not finite");
  return std::pow(m4, 0.25);
}

/// Explicit theorem bound (sqrt(3)/2) ||f'(Y0)||_4 ||f''(Y0)||_4 G*^3 / sqrt(T).
inline double bm_theorem_bound(const MovingAverageModel& model, const ScalarC2& f, double T) {
  const double l4_d1 = gaussian_l4_norm(f.d1);
  const double l4_d2 = gaussian_l4_norm(f.d2);
  const double gs = model.g_star();
  return 0.5 * std::sqrt(3.0) * l4_d1 * l4_d2 * gs * gs * gs / std::sqrt(T);
}

/// Discrete moving-average simulator for F_T on the K nodes r in [0, 1]:
/// Y on a step-Delta grid is an exact stationary Gaussian sequence (stencil
/// renormalized to unit variance), and F_T(r) is the Riemann sum of
/// f(Y_t) - E f(N) over [-rT, rT] scaled by 1/sqrt(T), with fractional
/// weights for the boundary cells.
class BmSimulator {
 public:
  BmSimulator(MovingAverageModel model, ScalarC2 f, double T, std::vector<double> r_nodes,
              double delta = 1.0 / 64.0)
      : model_(std::move(model)), f_(std::move(f)), T_(T), r_nodes_(std::move(r_nodes)), delta_(delta) {
    if (T_ <= 0.0) throw std::invalid_argument("BmSimulator: T must be positive");
    if (delta_ <= 0.0 || delta_ > model_.support() / 16.0)
      throw std::invalid_argument("BmSimulator: grid too coarse for the kernel support");
    stencil_len_ = static_cast<int>(std::round(model_.support() / delta_));
    stencil_.resize(static_cast<std::size_t>(stencil_len_));
    double ss = 0.0;
    for (int j = 0; j < stencil_len_; ++j) {
      stencil_[static_cast<std::size_t>(j)] = model_.g((j + 0.5) * delta_) * std::sqrt(delta_);
      ss += stencil_[static_cast<std::size_t>(j)] * stencil_[static_cast<std::size_t>(j)];
    }
    // Unit marginal variance, exact at the grid level.
    const double inv = 1.0 / std::sqrt(ss);
    for (double& s : stencil_) s *= inv;

    n_cells_ = static_cast<int>(std::round(2.0 * T_ / delta_));
    f_mean_ = gaussian_mean(f_.f);
  }

  int n_cells() const { return n_cells_; }
  double f_mean() const { return f_mean_; }

  /// One replicate of (F_T(r_i))_i as node values.
  Eigen::VectorXd simulate(std::uint64_t seed, std::uint64_t replicate) const {
    const int n_innov = n_cells_ + stencil_len_;
    CounterRng rng(seed, RngStream::kBmInnovations, replicate);
    std::vector<double> xi(static_cast<std::size_t>(n_innov));
    for (double& x : xi) x = rng.normal();

    // Y at cell centers: convolution of the innovations with the stencil.
    std::vector<double> fy(static_cast<std::size_t>(n_cells_));
    for (int i = 0; i < n_cells_; ++i) {
      double y = 0.0;
      for (int j = 0; j < stencil_len_; ++j)
        y += stencil_[static_cast<std::size_t>(j)] * xi[static_cast<std::size_t>(i + stencil_len_ - 1 - j)];
      fy[static_cast<std::size_t>(i)] = f_.f(y) - f_mean_;
    }
    std::vector<double> prefix(static_cast<std::size_t>(n_cells_) + 1, 0.0);
    for (int i = 0; i < n_cells_; ++i) prefix[static_cast<std::size_t>(i) + 1] = prefix[static_cast<std::size_t>(i)] + fy[static_cast<std::size_t>(i)];

    Eigen::VectorXd out(static_cast<Eigen::Index>(r_nodes_.size()));
    const double inv_sqrt_T = 1.0 / std::sqrt(T_);
    for (std::size_t k = 0; k < r_nodes_.size(); ++k) {
      const double r = r_nodes_[k];
      if (r <= 0.0) {
        out(static_cast<Eigen::Index>(k)) = 0.0;
        continue;
      }
      // Window [-rT, rT] in cell coordinates [a, b], cells are [i, i+1).
      const double a = (T_ - r * T_) / delta_;
      const double b = (T_ + r * T_) / delta_;
      const int ia = std::min(n_cells_ - 1, std::max(0, static_cast<int>(std::floor(a))));
      const int ib = std::min(n_cells_ - 1, std::max(0, static_cast<int>(std::ceil(b)) - 1));
      double acc = prefix[static_cast<std::size_t>(ib) + 1] - prefix[static_cast<std::size_t>(ia)];
      acc -= (a - ia) * fy[static_cast<std::size_t>(ia)];
      acc -= (ib + 1 - b) * fy[static_cast<std::size_t>(ib)];
      out(static_cast<Eigen::Index>(k)) = acc * delta_ * inv_sqrt_T;
    }
    return out;
  }

  static double gaussian_mean(const std::function<double(double)>& h, int quad_order = 64) {
    const QuadratureRule rule = normal_quadrature(quad_order);
    double acc = 0.0;
    for (std::size_t i = 0; i < rule.size(); ++i) acc += rule.weights[i] * h(rule.nodes[i]);
    return acc;
  }

  /// Exact variance of the discretized F_T(1): the grid process has the
  /// stencil autocorrelation, so Var = (Delta^2/T) sum_{i,j} K((i-j) Delta)
  /// collapses to a lag sum.  Differencing this against the half-step value
  /// isolates the discretization bias with no Monte Carlo noise.
  double discrete_variance_r1(const HermiteCoefficients& coeffs) const {
    std::vector<double> rho_d(static_cast<std::size_t>(stencil_len_), 0.0);
    for (int lag = 0; lag < stencil_len_; ++lag)
      for (int j = 0; j + lag < stencil_len_; ++j)
        rho_d[static_cast<std::size_t>(lag)] +=
            stencil_[static_cast<std::size_t>(j)] * stencil_[static_cast<std::size_t>(j + lag)];
    auto lag_cov = [&](int lag) {
      if (lag >= stencil_len_) return 0.0;
      double acc = 0.0;
      double qfact = 1.0;
      double rpow = 1.0;
      for (int q = 1; q <= coeffs.truncation_order(); ++q) {
        qfact *= static_cast<double>(q);
        rpow *= rho_d[static_cast<std::size_t>(lag)];
        acc += coeffs.c[static_cast<std::size_t>(q)] * coeffs.c[static_cast<std::size_t>(q)] * qfact * rpow;
      }
      return acc;
    };
    double total = static_cast<double>(n_cells_) * lag_cov(0);
    for (int lag = 1; lag < std::min(stencil_len_, n_cells_); ++lag)
      total += 2.0 * static_cast<double>(n_cells_ - lag) * lag_cov(lag);
    return total * delta_ * delta_ / T_;
  }

 private:
  MovingAverageModel model_;
  ScalarC2 f_;
  double T_;
  std::vector<double> r_nodes_;
  double delta_;
  int stencil_len_ = 0;
  int n_cells_ = 0;
  double f_mean_ = 0.0;
  std::vector<double> stencil_;
};

}  // namespace steinlab
