#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include "steinlab/parallel.hpp"
#include "steinlab/quadrature.hpp"

namespace steinlab {

/// d = 1 heat kernel p_t(x) = (2 pi t)^{-1/2} exp(-x^2 / (2t)).
inline double heat_kernel(double t, double x) {
  if (t <= 0.0) throw std::invalid_argument("heat_kernel: t must be positive");
  return std::exp(-0.5 * x * x / t) / std::sqrt(2.0 * M_PI * t);
}

/// Space-time noise correlation: gamma0 temporal, gamma1 spatial (d = 1).
/// The default pair gamma0(t) = e^{-|t|}, gamma1 = standard Gaussian density
/// keeps every structural condition checkable in closed form: gamma0 is
/// nonnegative-definite with int_0^a gamma0 = 1 - e^{-a}, gamma1 is in L1
/// with unit norm and Gaussian spectral measure.
struct NoiseSpec {
  std::function<double(double)> gamma0;
  std::function<double(double)> gamma1;
  std::function<double(double)> gamma0_integral;  // int_0^a gamma0, analytic
  double gamma1_l1 = 0.0;
  int d = 1;

  static NoiseSpec exponential_gaussian() {
    NoiseSpec n;
    n.gamma0 = [](double t) { return std::exp(-std::abs(t)); };
    n.gamma1 = [](double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI); };
    n.gamma0_integral = [](double a) { return 1.0 - std::exp(-a); };
    n.gamma1_l1 = 1.0;
    n.d = 1;
    return n;
  }

  /// Dalang margin int mu(d xi) / (1 + |xi|^2) for the Gaussian gamma1:
  /// mu(d xi) = (2 pi)^{-1} e^{-xi^2/2} d xi.  Gauss-Legendre on [0, 12];
  /// the tail beyond contributes below 1e-30.
  double dalang_margin(int quad_order = 64) const {
    const QuadratureRule rule = gauss_legendre(quad_order, 0.0, 12.0);
    double acc = 0.0;
    for (std::size_t i = 0; i < rule.size(); ++i) {
      const double xi = rule.nodes[i];
      acc += rule.weights[i] * std::exp(-0.5 * xi * xi) / (1.0 + xi * xi);
    }
    return 2.0 * acc / (2.0 * M_PI);
  }

  /// gamma0 nontriviality: int_0^a int_0^a gamma0(t - t') > 0 on a check set.
  bool gamma0_nontrivial(const std::vector<double>& check = {0.25, 1.0, 4.0}) const {
    for (const double a : check) {
      const QuadratureRule rule = gauss_legendre(16, 0.0, a);
      double acc = 0.0;
      for (std::size_t i = 0; i < rule.size(); ++i)
        for (std::size_t j = 0; j < rule.size(); ++j)
          acc += rule.weights[i] * rule.weights[j] * gamma0(rule.nodes[i] - rule.nodes[j]);
      if (!(acc > 0.0)) return false;
    }
    return true;
  }

  bool kernels_nonnegative(int grid = 256, double span = 8.0) const {
    for (int i = 0; i < grid; ++i) {
      const double x = -span + 2.0 * span * i / (grid - 1);
      if (gamma0(x) < 0.0 || gamma1(x) < 0.0) return false;
    }
    return true;
  }
};

/// Chaos-truncated model of the parabolic Anderson solution: horizon,
/// truncation order, per-order time-quadrature resolution, and the
/// derivative-majorant constants C(t) = a e^{bt} (a, b are inputs, not
/// derived quantities).
struct PAMChaosModel {
  double T = 1.0;
  int N_trunc = 3;
  std::array<int, 4> time_nodes = {0, 16, 16, 8};  // per simplex axis, by order
  double const_a = 1.0;
  double const_b = 1.0;

  int nodes_for_order(int n) const {
    if (n < 1) throw std::invalid_argument("PAMChaosModel: order must be >= 1");
    if (n < static_cast<int>(time_nodes.size())) return time_nodes[static_cast<std::size_t>(n)];
    return time_nodes.back();
  }
};

namespace detail_pam {

/// Iterates the order-n covariance quadrature.  For each pair of ordered
/// time tuples (one simplex per factor, mapped from [0,1]^n cubes) and each
/// pairing permutation, the spatial integrals are Gaussian chains and
/// collapse in Fourier space to
///     amp * exp(-z^2 / (2 tau)),
/// where amp and tau come from the n x n matrix M = I + A_f + A_g of the
/// partial-sum quadratic forms.  The visitor receives (amp, tau) and
/// aggregates whatever z-functional it needs.
template <typename Visitor>
void order_scan(const PAMChaosModel& model, const NoiseSpec& noise, int order, double t, double s,
                Visitor&& visit) {
  const int n = order;
  const int nq = model.nodes_for_order(n);
  const QuadratureRule cube = gauss_legendre(nq, 0.0, 1.0);
  const std::size_t npts = cube.size();

  // Permutations of {0..n-1}.
  std::vector<std::vector<int>> perms;
  {
    std::vector<int> p(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) p[static_cast<std::size_t>(i)] = i;
    do {
      perms.push_back(p);
    } while (std::next_permutation(p.begin(), p.end()));
  }

  std::vector<std::size_t> fi(static_cast<std::size_t>(n), 0);
  std::vector<double> u(static_cast<std::size_t>(n));   // f times, ordered
  std::vector<double> v(static_cast<std::size_t>(n));   // g times, ordered
  Eigen::MatrixXd M(n, n);
  Eigen::VectorXd ones = Eigen::VectorXd::Ones(n);

  const double two_pi_pow = std::pow(2.0 * M_PI, 0.5 * n);

  // Odometer over the two n-dim cubes.
  const auto advance = [&](std::vector<std::size_t>& idx) {
    for (int k = 0; k < n; ++k) {
      if (++idx[static_cast<std::size_t>(k)] < npts) return true;
      idx[static_cast<std::size_t>(k)] = 0;
    }
    return false;
  };

  do {
    // Map the f cube point to the ordered simplex 0 < u_1 < ... < u_n < t.
    double wf = 1.0;
    {
      double upper = t;
      for (int k = n - 1; k >= 0; --k) {
        const std::size_t q = fi[static_cast<std::size_t>(k)];
        u[static_cast<std::size_t>(k)] = upper * cube.nodes[q];
        wf *= upper * cube.weights[q];
        upper = u[static_cast<std::size_t>(k)];
      }
    }
    std::vector<std::size_t> gidx(static_cast<std::size_t>(n), 0);
    do {
      double wg = 1.0;
      {
        double upper = s;
        for (int k = n - 1; k >= 0; --k) {
          const std::size_t q = gidx[static_cast<std::size_t>(k)];
          v[static_cast<std::size_t>(k)] = upper * cube.nodes[q];
          wg *= upper * cube.weights[q];
          upper = v[static_cast<std::size_t>(k)];
        }
      }
      for (const auto& sigma : perms) {
        double g0prod = 1.0;
        for (int i = 0; i < n; ++i)
          g0prod *= noise.gamma0(u[static_cast<std::size_t>(i)] - v[static_cast<std::size_t>(sigma[static_cast<std::size_t>(i)])]);
        if (g0prod == 0.0) continue;

        // M = I + A_f + A_g in the coupling variables; A_f[a][b] =
        // t - max(u_a, u_b), and A_g picks up the permutation.
        for (int a = 0; a < n; ++a) {
          for (int b = a; b < n; ++b) {
            const double af = t - std::max(u[static_cast<std::size_t>(a)], u[static_cast<std::size_t>(b)]);
            const double ag =
                s - std::max(v[static_cast<std::size_t>(sigma[static_cast<std::size_t>(a)])],
                             v[static_cast<std::size_t>(sigma[static_cast<std::size_t>(b)])]);
            M(a, b) = af + ag + (a == b ? 1.0 : 0.0);
            M(b, a) = M(a, b);
          }
        }
        double det = 0.0;
        double quad = 0.0;  // ones^T M^{-1} ones
        if (n == 1) {
          det = M(0, 0);
          quad = 1.0 / det;
        } else if (n == 2) {
          det = M(0, 0) * M(1, 1) - M(0, 1) * M(1, 0);
          quad = (M(1, 1) + M(0, 0) - 2.0 * M(0, 1)) / det;
        } else if (n == 3) {
          const double A = M(0, 0), B = M(0, 1), C = M(0, 2);
          const double D = M(1, 1), E = M(1, 2), F = M(2, 2);
          det = A * (D * F - E * E) - B * (B * F - C * E) + C * (B * E - C * D);
          const double adj_sum = (D * F - E * E) + (A * F - C * C) + (A * D - B * B) +
                                 2.0 * ((C * E - B * F) + (B * E - C * D) + (B * C - A * E));
          quad = adj_sum / det;
        } else {
          Eigen::LLT<Eigen::MatrixXd> llt(M);
          const Eigen::MatrixXd& L = llt.matrixL();
          det = 1.0;
          for (int k = 0; k < n; ++k) det *= L(k, k) * L(k, k);
          quad = llt.solve(ones).sum();
        }
        const double amp = wf * wg * g0prod / (two_pi_pow * std::sqrt(det));
        visit(amp, 1.0 / quad);
      }
    } while (advance(gidx));
  } while (advance(fi));
}

}  // namespace detail_pam

/// Per-order contributions to Cov(u(t, z), u(s, 0)); every term is a
/// positive mixture of Gaussians in z.
struct PamCovTerms {
  std::vector<double> per_order;  // index 0 <-> chaos order 1

  double total() const {
    double acc = 0.0;
    for (const double v : per_order) acc += v;
    return acc;
  }

  /// Ratio of the order-N to the order-(N-1) contribution.
  double trunc_ratio() const {
    if (per_order.size() < 2) return 0.0;
    const double last = per_order.back();
    const double prev = per_order[per_order.size() - 2];
    return prev == 0.0 ? 1.0 : last / prev;
  }
};

inline PamCovTerms pam_covariance(const PAMChaosModel& model, const NoiseSpec& noise, double t,
                                  double s, double z) {
  if (!(t > 0.0) || !(s > 0.0) || t > model.T + 1e-12 || s > model.T + 1e-12)
    throw std::invalid_argument("pam_covariance: need 0 < s, t <= T");
  PamCovTerms out;
  for (int n = 1; n <= model.N_trunc; ++n) {
    double acc = 0.0;
    detail_pam::order_scan(model, noise, n, t, s, [&](double amp, double tau) {
      if (!std::isfinite(amp) || !std::isfinite(tau)) throw std::runtime_error("pam_covariance: quadrature failure");
      acc += amp * std::exp(-0.5 * z * z / tau);
    });
    out.per_order.push_back(acc);
  }
  if (out.trunc_ratio() >= 1.0) throw std::runtime_error("pam_covariance: chaos truncation not converging");
  return out;
}

/// C_R and C_inf at (t, s) for a batch of radii, sharing one quadrature
/// sweep.  d = 1: the overlap ratio is max(0, 1 - |z|/(2R)) and both
/// z-integrals of a Gaussian mixture have closed forms.
struct SpatialCov {
  double C_inf = 0.0;
  std::vector<double> C_R;
};

inline SpatialCov spatial_covariances(const PAMChaosModel& model, const NoiseSpec& noise, double t,
                                      double s, const std::vector<double>& radii) {
  for (const double R : radii)
    if (!(R > 0.0)) throw std::invalid_argument("spatial_covariances: R must be positive");
  SpatialCov out;
  out.C_R.assign(radii.size(), 0.0);
  const double sqrt2pi = std::sqrt(2.0 * M_PI);
  for (int n = 1; n <= model.N_trunc; ++n) {
    detail_pam::order_scan(model, noise, n, t, s, [&](double amp, double tau) {
      const double st = std::sqrt(tau);
      out.C_inf += 2.0 * amp * sqrt2pi * st;
      for (std::size_t k = 0; k < radii.size(); ++k) {
        const double R = radii[k];
        const double erf_term = std::erf(std::sqrt(2.0) * R / st);
        const double ratio_int = sqrt2pi * st * erf_term - (tau / R) * (1.0 - std::exp(-2.0 * R * R / tau));
        out.C_R[k] += 2.0 * amp * ratio_int;
      }
    });
  }
  return out;
}

/// Interval-overlap ratio Vol{|x|<=R, |x-z|<=R} / Vol{|x|<=R} at d = 1.
inline double overlap_ratio(double z, double R) {
  return std::max(0.0, 1.0 - std::abs(z) / (2.0 * R));
}

/// Closed-form majorant of A*_{r1,r2}:
/// omega_d R^d ||gamma1||_1^3 (2 int_0^{max(r1,r2)} gamma0)^3.
inline double spde_astar_majorant(const NoiseSpec& noise, double R, double r1, double r2) {
  const double omega_d = 2.0;  // volume of the unit ball at d = 1
  const double g0 = 2.0 * noise.gamma0_integral(std::max(r1, r2));
  const double l1 = noise.gamma1_l1;
  return omega_d * R * l1 * l1 * l1 * g0 * g0 * g0;
}

struct SpdeBound {
  double A = 0.0;
  double d2_bound = 0.0;
};

/// Assembles A <= 16 R^{-2d} int int C(r1)^2 C(r2)^2 A*_{r1,r2} over [0,T]^2
/// and returns d2 = (sqrt(3)/2) sqrt(A); the R-scaling is R^{-d/2} by
/// construction.
inline SpdeBound spde_bound(const PAMChaosModel& model, const NoiseSpec& noise, double R,
                            const QuadratureRule& t_quad) {
  if (!(noise.gamma1_l1 > 0.0) || !std::isfinite(noise.gamma1_l1))
    throw std::invalid_argument("spde_bound: ||gamma1||_1 must be positive and finite");
  const auto C = [&](double r) { return model.const_a * std::exp(model.const_b * r); };
  double integral = 0.0;
  for (std::size_t i = 0; i < t_quad.size(); ++i) {
    for (std::size_t j = 0; j < t_quad.size(); ++j) {
      const double r1 = t_quad.nodes[i];
      const double r2 = t_quad.nodes[j];
      integral += t_quad.weights[i] * t_quad.weights[j] * C(r1) * C(r1) * C(r2) * C(r2) *
                  spde_astar_majorant(noise, R, r1, r2);
    }
  }
  SpdeBound out;
  out.A = 16.0 * integral / (R * R);
  out.d2_bound = 0.5 * std::sqrt(3.0) * std::sqrt(out.A);
  return out;
}

}  // namespace steinlab
