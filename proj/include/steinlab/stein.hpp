#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

#include "steinlab/chaos.hpp"
#include "steinlab/parallel.hpp"

namespace steinlab {

/// Covariance operator of F: <S_F k_i, k_j> = sum_n n! <f_n^(i), f_n^(j)>.
/// Symmetric positive semidefinite by construction.
inline KOperator covariance_operator(const ChaosFunctional& F) {
  return chaos_inner(F, F).op;
}

/// One draw of the carre-du-champs <DF, -DL^{-1}F>_H, a K (x) K array whose
/// expectation over draws is S_F.
struct GammaSample {
  Eigen::MatrixXd matrix;
};

/// Precomputed derivative fields for repeated per-draw evaluation.
class GammaEvaluator {
 public:
  explicit GammaEvaluator(const ChaosFunctional& F)
      : spec_(F.spec()), dF_(malliavin_derivative(F, 1)), neg_dLinvF_(minus_d_linv(F)) {}

  Eigen::MatrixXd eval(const GaussianDraw& draw) const {
    const Eigen::VectorXd a = dF_.eval(draw);        // [y][i]
    const Eigen::VectorXd b = neg_dLinvF_.eval(draw);  // [y][j]
    const int m = spec_.m;
    const int p = spec_.p;
    Eigen::MatrixXd gamma = Eigen::MatrixXd::Zero(p, p);
    for (int y = 0; y < m; ++y) {
      for (int i = 0; i < p; ++i) {
        const double ai = a(static_cast<Eigen::Index>(y) * p + i);
        if (ai == 0.0) continue;
        for (int j = 0; j < p; ++j) gamma(i, j) += ai * b(static_cast<Eigen::Index>(y) * p + j);
      }
    }
    return gamma;
  }

 private:
  HilbertSpec spec_;
  ChaosField dF_;
  ChaosField neg_dLinvF_;
};

inline GammaSample gamma_sample(const ChaosFunctional& F, const GaussianDraw& draw) {
  return GammaSample{GammaEvaluator(F).eval(draw)};
}

struct MsbcResult {
  double msbc = 0.0;        // 1/2 sqrt(E ||Gamma - S_Z||_HS^2)
  double gamma_term = 0.0;  // same with S_F in place of S_Z
  double cov_gap = 0.0;     // 1/2 ||S_F - S_Z||_HS, exact
};

/// Malliavin-Stein d2 bound against a centered Gaussian with covariance
/// S_Z, Monte Carlo over n_mc draws, plus the triangle-inequality split.
inline MsbcResult msbc_bound(const ChaosFunctional& F, const KOperator& S_Z, int n_mc,
                             std::uint64_t seed, int threads = 1) {
  if (!F.mean_is_zero()) throw std::invalid_argument("msbc_bound: F must be centered (mean below 1e-12)");
  if (n_mc < 2) throw std::invalid_argument("msbc_bound: need at least 2 Monte Carlo draws");
  if (S_Z.dim() != F.spec().p) throw std::invalid_argument("msbc_bound: S_Z dimension mismatch");

  const GammaEvaluator gamma(F);
  const KOperator S_F = covariance_operator(F);

  struct Partial {
    double sq_z = 0.0;
    double sq_f = 0.0;
  };
  const Partial tot = parallel_blocks(
      static_cast<std::size_t>(n_mc), threads, kMcBlockSize, Partial{},
      [&](std::size_t lo, std::size_t hi) {
        Partial p;
        for (std::size_t rep = lo; rep < hi; ++rep) {
          const GaussianDraw d = sample_draw(F.spec(), seed, RngStream::kChaosDraw, rep);
          const Eigen::MatrixXd g = gamma.eval(d);
          p.sq_z += (g - S_Z.entries).squaredNorm();
          p.sq_f += (g - S_F.entries).squaredNorm();
        }
        return p;
      },
      [](Partial& a, const Partial& b) {
        a.sq_z += b.sq_z;
        a.sq_f += b.sq_f;
      });

  MsbcResult out;
  out.msbc = 0.5 * std::sqrt(tot.sq_z / n_mc);
  out.gamma_term = 0.5 * std::sqrt(tot.sq_f / n_mc);
  out.cov_gap = 0.5 * hs_distance(S_F, S_Z);
  return out;
}

struct SecondOrderResult {
  double thm1 = 0.0;  // operator-norm form
  double thm2 = 0.0;  // contraction form
  bool per_draw_ordered = true;  // ||D2F||_op^4 <= ||D2F (x)_1 D2F||^2 at every draw
};

/// Both second-order Gaussian Poincare bounds:
///   thm1 = (E ||D^2F||_op^4)^{1/4} (E ||DF||^4)^{1/4}
///   thm2 = (E ||D^2F (x)_1 D^2F||^2)^{1/4} (E ||DF||^4)^{1/4}
/// where the operator norm is of D^2F as a map H (x) K -> H, computed by
/// exact SVD of the m x (m p) flattening per draw.
inline SecondOrderResult second_order_bounds(const ChaosFunctional& F, int n_mc, std::uint64_t seed,
                                             int threads = 1) {
  if (!F.mean_is_zero())
    throw std::invalid_argument("second_order_bounds: F must be centered (mean below 1e-12)");
  if (n_mc < 1) throw std::invalid_argument("second_order_bounds: n_mc must be positive");
  const HilbertSpec& spec = F.spec();
  const int m = spec.m;
  const int p = spec.p;
  const ChaosField dF = malliavin_derivative(F, 1);
  const ChaosField d2F = malliavin_derivative(F, 2);

  struct Partial {
    double op4 = 0.0;
    double contr2 = 0.0;
    double d1_4 = 0.0;
    bool ordered = true;
  };
  const Partial tot = parallel_blocks(
      static_cast<std::size_t>(n_mc), threads, kMcBlockSize, Partial{},
      [&](std::size_t lo, std::size_t hi) {
        Partial acc;
        for (std::size_t rep = lo; rep < hi; ++rep) {
          const GaussianDraw d = sample_draw(spec, seed, RngStream::kChaosDraw, rep);
          const Eigen::VectorXd t1 = dF.eval(d);   // [y][i]
          const Eigen::VectorXd t2 = d2F.eval(d);  // [y][z][i]
          const double d1_sq = t1.squaredNorm();

          Eigen::MatrixXd flat(m, m * p);  // row y, column (z, i)
          for (int y = 0; y < m; ++y)
            for (int z = 0; z < m; ++z)
              for (int i = 0; i < p; ++i)
                flat(y, z * p + i) = t2((static_cast<Eigen::Index>(y) * m + z) * p + i);
          Eigen::JacobiSVD<Eigen::MatrixXd> svd(flat);
          const double opn = svd.singularValues()(0);
          const double op4 = opn * opn * opn * opn;

          // (D2F (x)_1 D2F)[y, z, i, j] = sum_u T2[y, u, i] T2[z, u, j];
          // squared Frobenius norm via the Gram matrix of the flattening.
          Eigen::MatrixXd by_u(m, m * p);  // row u, column (y, i)
          for (int u = 0; u < m; ++u)
            for (int y = 0; y < m; ++y)
              for (int i = 0; i < p; ++i)
                by_u(u, y * p + i) = t2((static_cast<Eigen::Index>(y) * m + u) * p + i);
          const Eigen::MatrixXd gram = by_u.transpose() * by_u;  // (y,i) x (z,j)
          const double contr2 = gram.squaredNorm();

          acc.op4 += op4;
          acc.contr2 += contr2;
          acc.d1_4 += d1_sq * d1_sq;
          if (op4 > contr2 * (1.0 + 1e-9) + 1e-12) acc.ordered = false;
        }
        return acc;
      },
      [](Partial& a, const Partial& b) {
        a.op4 += b.op4;
        a.contr2 += b.contr2;
        a.d1_4 += b.d1_4;
        a.ordered = a.ordered && b.ordered;
      });

  SecondOrderResult out;
  const double e_d1 = std::pow(tot.d1_4 / n_mc, 0.25);
  out.thm1 = std::pow(tot.op4 / n_mc, 0.25) * e_d1;
  out.thm2 = std::pow(tot.contr2 / n_mc, 0.25) * e_d1;
  out.per_draw_ordered = tot.ordered;
  return out;
}

/// Admissible test functional phi(v) = c cos(<v, a>_K + b) with the scale
/// c = 1 / max(||a||, ||a||^2, 1), so both Frechet derivatives are bounded
/// by one and phi is a legal d2 witness.
struct TestFunctional {
  Eigen::VectorXd a;
  double b = 0.0;
  double c = 1.0;

  static TestFunctional make(Eigen::VectorXd direction, double phase) {
    TestFunctional t;
    t.a = std::move(direction);
    t.b = phase;
    const double na = t.a.norm();
    t.c = 1.0 / std::max({na, na * na, 1.0});
    return t;
  }

  double operator()(const Eigen::VectorXd& v) const { return c * std::cos(a.dot(v) + b); }

  /// E[phi(Z)] for Z Gaussian with covariance S: c cos(b) e^{-<Sa,a>/2}.
  double gaussian_expectation(const KOperator& S) const {
    return c * std::cos(b) * std::exp(-0.5 * a.dot(S.entries * a));
  }
};

/// Cosine dictionary: directions on K-spheres of the given radii, phases
/// uniform on [0, 2pi).  Deterministic in the seed.
inline std::vector<TestFunctional> cosine_dictionary(int p, int count, std::uint64_t seed,
                                                     const std::vector<double>& radii = {0.5, 1.0, 2.0, 4.0}) {
  if (count < 1) throw std::invalid_argument("cosine_dictionary: empty dictionary");
  std::vector<TestFunctional> dict;
  dict.reserve(static_cast<std::size_t>(count));
  for (int idx = 0; idx < count; ++idx) {
    CounterRng rng(seed, RngStream::kDictionary, static_cast<std::uint64_t>(idx));
    Eigen::VectorXd u(p);
    for (int i = 0; i < p; ++i) u(i) = rng.normal();
    const double norm = u.norm();
    const double radius = radii[static_cast<std::size_t>(idx) % radii.size()];
    Eigen::VectorXd a = (norm > 0) ? Eigen::VectorXd(u * (radius / norm)) : u;
    const double phase = rng.uniform() * 2.0 * M_PI;
    dict.push_back(TestFunctional::make(std::move(a), phase));
  }
  return dict;
}

using KSampler = std::function<Eigen::VectorXd(std::uint64_t replicate)>;

/// Samples a centered Gaussian on K with the given covariance operator via
/// eigendecomposition.  Eigenvalues below -1e-10 are rejected; small
/// negative ones are clamped to zero.
class GaussianKSampler {
 public:
  GaussianKSampler(const KOperator& S, std::uint64_t seed, RngStream stream = RngStream::kGaussianZ)
      : seed_(seed), stream_(stream) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S.entries);
    Eigen::VectorXd evals = es.eigenvalues();
    for (Eigen::Index i = 0; i < evals.size(); ++i) {
      if (evals(i) < -1e-10) throw std::invalid_argument("GaussianKSampler: covariance is not PSD");
      if (evals(i) < 0.0) evals(i) = 0.0;
    }
    root_ = es.eigenvectors() * evals.cwiseSqrt().asDiagonal();
  }

  Eigen::VectorXd operator()(std::uint64_t replicate) const {
    CounterRng rng(seed_, stream_, replicate);
    Eigen::VectorXd xi(root_.cols());
    for (Eigen::Index i = 0; i < xi.size(); ++i) xi(i) = rng.normal();
    return root_ * xi;
  }

 private:
  std::uint64_t seed_;
  RngStream stream_;
  Eigen::MatrixXd root_;
};

struct D2LowerResult {
  double value = 0.0;
  double stderr_ = 0.0;
  int argmax = -1;
};

/// Monte Carlo lower estimate of d2(F, Z): the dictionary maximum of
/// |mean phi(F_r) - mean phi(Z_r)| with replicate-paired samples, and the
/// standard error of the maximizing difference.
inline D2LowerResult d2_lower_estimate(const KSampler& sampler_F, const KSampler& sampler_Z,
                                       const std::vector<TestFunctional>& dictionary, int n_mc,
                                       int threads = 1) {
  if (dictionary.empty()) throw std::invalid_argument("d2_lower_estimate: empty dictionary");
  if (n_mc < 2) throw std::invalid_argument("d2_lower_estimate: need at least 2 replicates");
  const std::size_t nd = dictionary.size();

  struct Partial {
    std::vector<double> sum;
    std::vector<double> sum_sq;
  };
  Partial init;
  init.sum.assign(nd, 0.0);
  init.sum_sq.assign(nd, 0.0);
  const Partial tot = parallel_blocks(
      static_cast<std::size_t>(n_mc), threads, kMcBlockSize, init,
      [&](std::size_t lo, std::size_t hi) {
        Partial p;
        p.sum.assign(nd, 0.0);
        p.sum_sq.assign(nd, 0.0);
        for (std::size_t rep = lo; rep < hi; ++rep) {
          const Eigen::VectorXd vf = sampler_F(rep);
          const Eigen::VectorXd vz = sampler_Z(rep);
          for (std::size_t k = 0; k < nd; ++k) {
            const double diff = dictionary[k](vf) - dictionary[k](vz);
            p.sum[k] += diff;
            p.sum_sq[k] += diff * diff;
          }
        }
        return p;
      },
      [nd](Partial& a, const Partial& b) {
        for (std::size_t k = 0; k < nd; ++k) {
          a.sum[k] += b.sum[k];
          a.sum_sq[k] += b.sum_sq[k];
        }
      });

  D2LowerResult out;
  for (std::size_t k = 0; k < nd; ++k) {
    const double mean = tot.sum[k] / n_mc;
    if (std::abs(mean) >= out.value) {
      out.value = std::abs(mean);
      const double var = std::max(0.0, tot.sum_sq[k] / n_mc - mean * mean);
      out.stderr_ = std::sqrt(var / n_mc);
      out.argmax = static_cast<int>(k);
    }
  }
  return out;
}

/// Tabulated L4-norm surfaces on product grids, the inputs of the improved
/// second-order bound.
struct DerivL4Tables {
  int nx = 0;  // A-grid size
  int nr = 0;  // E-grid size
  std::vector<double> d2;  // [x][y][r]: ||D^2_{x,y} F(r)||_4
  std::vector<double> d1;  // [x][r]:    ||D_x F(r)||_4
  std::vector<double> mu_w;
  std::vector<double> nu_w;

  double d2_at(int x, int y, int r) const {
    return d2[(static_cast<std::size_t>(x) * nx + y) * nr + r];
  }
  double d1_at(int x, int r) const { return d1[static_cast<std::size_t>(x) * nr + r]; }
};

/// Five-fold integral of the improved bound, evaluated by tensorized
/// quadrature:
///   integral = sum_{r1,r2} nu nu sum_y mu_y ( sum_x mu_x T2(x,y,r1) T1(x,r2) )^2
/// and the returned bound is (sqrt(3)/2) sqrt(integral).  The covariance-gap
/// term is the caller's responsibility.
inline double imp_bound_quadrature(const DerivL4Tables& t) {
  if (t.nx <= 0 || t.nr <= 0) throw std::invalid_argument("imp_bound_quadrature: empty grids");
  if (t.d2.size() != static_cast<std::size_t>(t.nx) * t.nx * t.nr ||
      t.d1.size() != static_cast<std::size_t>(t.nx) * t.nr ||
      t.mu_w.size() != static_cast<std::size_t>(t.nx) || t.nu_w.size() != static_cast<std::size_t>(t.nr))
    throw std::invalid_argument("imp_bound_quadrature: table shapes inconsistent");
  for (const double v : t.d2)
    if (!std::isfinite(v) || v < 0.0) throw std::invalid_argument("imp_bound_quadrature: bad D2 table entry");
  for (const double v : t.d1)
    if (!std::isfinite(v) || v < 0.0) throw std::invalid_argument("imp_bound_quadrature: bad D1 table entry");

  double integral = 0.0;
  for (int r1 = 0; r1 < t.nr; ++r1) {
    for (int r2 = 0; r2 < t.nr; ++r2) {
      double inner_y = 0.0;
      for (int y = 0; y < t.nx; ++y) {
        double gx = 0.0;
        for (int x = 0; x < t.nx; ++x) gx += t.mu_w[x] * t.d2_at(x, y, r1) * t.d1_at(x, r2);
        inner_y += t.mu_w[y] * gx * gx;
      }
      integral += t.nu_w[r1] * t.nu_w[r2] * inner_y;
    }
  }
  return 0.5 * std::sqrt(3.0) * std::sqrt(integral);
}

/// Evaluated bound components for one experiment.
struct BoundReport {
  double msbc = 0.0;
  double gamma_term = 0.0;
  double cov_gap = 0.0;
  double thm1 = 0.0;
  double thm2 = 0.0;
  double d2_lower = 0.0;
  double d2_lower_stderr = 0.0;
};

}  // namespace steinlab
