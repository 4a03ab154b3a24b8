#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "steinlab/hermite.hpp"
#include "steinlab/hilbert.hpp"
#include "steinlab/rng.hpp"
#include "steinlab/tensor.hpp"

namespace steinlab {

/// One realization of the isonormal process on the truncated basis:
/// g_j = W(h_j), i.i.d. standard normal under the sampler.
struct GaussianDraw {
  Eigen::VectorXd g;
  std::uint64_t replicate = 0;
};

inline GaussianDraw sample_draw(const HilbertSpec& spec, std::uint64_t seed, RngStream stream,
                                std::uint64_t replicate) {
  CounterRng rng(seed, stream, replicate);
  GaussianDraw d;
  d.replicate = replicate;
  d.g.resize(spec.m);
  for (int j = 0; j < spec.m; ++j) d.g(j) = rng.normal();
  return d;
}

/// Mehler coupling W^t = e^{-t} W + sqrt(1 - e^{-2t}) W' with a fresh
/// independent draw W'.  Marginally standard normal for every t >= 0.
inline GaussianDraw mehler_coupled_draw(const GaussianDraw& draw, std::uint64_t seed,
                                        std::uint64_t coupling_replicate, double t) {
  if (t < 0.0) throw std::invalid_argument("mehler_coupled_draw: t must be nonnegative");
  const double decay = std::exp(-t);
  const double fresh = std::sqrt(std::max(0.0, 1.0 - decay * decay));
  CounterRng rng(seed, RngStream::kMehlerPrime, coupling_replicate);
  GaussianDraw out;
  out.replicate = coupling_replicate;
  out.g.resize(draw.g.size());
  for (Eigen::Index j = 0; j < draw.g.size(); ++j) out.g(j) = decay * draw.g(j) + fresh * rng.normal();
  return out;
}

namespace detail {

/// Hermite values H_a(g_j) for a <= amax, all coordinates of a draw.
inline void hermite_table(const Eigen::VectorXd& g, int amax, std::vector<double>& table) {
  const int m = static_cast<int>(g.size());
  table.resize(static_cast<std::size_t>(amax + 1) * m);
  for (int j = 0; j < m; ++j) {
    table[j] = 1.0;
    if (amax >= 1) table[static_cast<std::size_t>(m) + j] = g(j);
    for (int a = 1; a < amax; ++a) {
      table[static_cast<std::size_t>(a + 1) * m + j] =
          g(j) * table[static_cast<std::size_t>(a) * m + j] -
          static_cast<double>(a) * table[static_cast<std::size_t>(a - 1) * m + j];
    }
  }
}

inline double factorial(int n) {
  double f = 1.0;
  for (int k = 2; k <= n; ++k) f *= static_cast<double>(k);
  return f;
}

}  // namespace detail

/// K-valued random variable with a finite chaos expansion:
/// F = mean + sum_n I_n(f_n), kernels f_n in H^{(sym)n} (x) K.
/// All coefficients are in the orthonormal K basis.  Immutable in spirit:
/// operations return new functionals.
class ChaosFunctional {
 public:
  ChaosFunctional() = default;

  ChaosFunctional(HilbertSpec spec, int max_order)
      : spec_(std::move(spec)), mean_(Eigen::VectorXd::Zero(spec_.p)) {
    if (max_order < 0) throw std::invalid_argument("ChaosFunctional: negative order");
    kernels_.reserve(static_cast<std::size_t>(max_order));
    for (int n = 1; n <= max_order; ++n) kernels_.emplace_back(spec_, n);
  }

  const HilbertSpec& spec() const { return spec_; }
  int max_order() const { return static_cast<int>(kernels_.size()); }

  const Eigen::VectorXd& mean() const { return mean_; }
  Eigen::VectorXd& mean() { return mean_; }

  const SymmetricKernel& kernel(int order) const { return kernels_.at(static_cast<std::size_t>(order) - 1); }
  SymmetricKernel& kernel(int order) { return kernels_.at(static_cast<std::size_t>(order) - 1); }

  /// I_n of the symmetric basis element with occupation numbers a evaluates
  /// to prod_j H_{a_j}(g_j); the functional is the multiplicity-weighted sum
  /// of those products plus the mean.
  Eigen::VectorXd eval(const GaussianDraw& draw) const {
    if (draw.g.size() != spec_.m) throw std::invalid_argument("eval: draw dimension mismatch");
    Eigen::VectorXd out = mean_;
    std::vector<double> htab;
    detail::hermite_table(draw.g, max_order(), htab);
    const int m = spec_.m;
    for (const SymmetricKernel& ker : kernels_) {
      const MultiIndexSet& ms = ker.mset();
      for (std::size_t r = 0; r < ms.size(); ++r) {
        double prod = ms.multiplicity(r);
        for (const auto& [var, cnt] : ms.runs(r)) prod *= htab[static_cast<std::size_t>(cnt) * m + var];
        if (prod == 0.0) continue;
        for (int k = 0; k < spec_.p; ++k) out(k) += prod * ker.at(r, k);
      }
    }
    return out;
  }

  /// Exact total variance E||F - E F||_K^2 = sum_n n! ||f_n||^2.
  double total_variance() const {
    double acc = 0.0;
    for (const SymmetricKernel& ker : kernels_) acc += detail::factorial(ker.order()) * ker.norm_sq();
    return acc;
  }

  bool mean_is_zero(double tol = 1e-12) const { return mean_.lpNorm<Eigen::Infinity>() <= tol; }

 private:
  HilbertSpec spec_;
  Eigen::VectorXd mean_;
  std::vector<SymmetricKernel> kernels_;  // kernels_[n-1] has order n
};

/// Cross-covariance of two chaos functionals: entry (i, j) is
/// sum_n n! <f_n^(i), g_n^(j)>; orders never mix.
struct CrossCovariance {
  KOperator op;
  double total = 0.0;  // trace, i.e. the scalar covariance <F, G>_{L2 K}
};

inline CrossCovariance chaos_inner(const ChaosFunctional& F, const ChaosFunctional& G) {
  if (!F.spec().same_as(G.spec())) throw std::invalid_argument("chaos_inner: spec mismatch");
  const int p = F.spec().p;
  Eigen::MatrixXd entries = Eigen::MatrixXd::Zero(p, p);
  const int shared = std::min(F.max_order(), G.max_order());
  for (int n = 1; n <= shared; ++n) {
    const SymmetricKernel& f = F.kernel(n);
    const SymmetricKernel& g = G.kernel(n);
    const double nfact = detail::factorial(n);
    for (std::size_t r = 0; r < f.n_multi(); ++r) {
      const double w = nfact * f.mset().multiplicity(r);
      for (int i = 0; i < p; ++i) {
        const double fi = f.at(r, i);
        if (fi == 0.0) continue;
        for (int j = 0; j < p; ++j) entries(i, j) += w * fi * g.at(r, j);
      }
    }
  }
  CrossCovariance out;
  out.op = KOperator(std::move(entries));
  out.total = out.op.entries.trace();
  return out;
}

/// Chaos-expanded object valued in H^{(x)d} (x) K (d = 1 for DF, d = 2 for
/// D^2 F).  Component of chaos order n stores coefficients indexed by
/// [sorted multi-index of the chaos part][dense d-tuple of free H slots][K].
class ChaosField {
 public:
  struct Component {
    int chaos_order = 0;
    std::shared_ptr<const MultiIndexSet> mset;
    std::vector<double> data;  // [rank][free flat][k]
  };

  ChaosField() = default;
  ChaosField(HilbertSpec spec, int free_slots) : spec_(std::move(spec)), free_slots_(free_slots) {
    free_grid_ = 1;
    for (int i = 0; i < free_slots; ++i) free_grid_ *= static_cast<std::size_t>(spec_.m);
  }

  const HilbertSpec& spec() const { return spec_; }
  int free_slots() const { return free_slots_; }
  std::size_t free_grid() const { return free_grid_; }
  const std::vector<Component>& components() const { return comps_; }
  std::vector<Component>& components() { return comps_; }

  Component& add_component(int chaos_order) {
    Component c;
    c.chaos_order = chaos_order;
    c.mset = MultiIndexSet::get(spec_.m, chaos_order);
    c.data.assign(c.mset->size() * free_grid_ * static_cast<std::size_t>(spec_.p), 0.0);
    comps_.push_back(std::move(c));
    return comps_.back();
  }

  /// Evaluates to a dense array over [free H slots][K node], flattened with
  /// the free slots major.
  Eigen::VectorXd eval(const GaussianDraw& draw) const {
    if (draw.g.size() != spec_.m) throw std::invalid_argument("ChaosField::eval: draw dimension mismatch");
    const std::size_t out_size = free_grid_ * static_cast<std::size_t>(spec_.p);
    Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(out_size));
    int amax = 1;
    for (const Component& c : comps_) amax = std::max(amax, c.chaos_order);
    std::vector<double> htab;
    detail::hermite_table(draw.g, amax, htab);
    const int m = spec_.m;
    for (const Component& c : comps_) {
      const MultiIndexSet& ms = *c.mset;
      for (std::size_t r = 0; r < ms.size(); ++r) {
        double prod = ms.multiplicity(r);
        for (const auto& [var, cnt] : ms.runs(r)) prod *= htab[static_cast<std::size_t>(cnt) * m + var];
        if (prod == 0.0) continue;
        const double* src = c.data.data() + r * out_size;
        for (std::size_t q = 0; q < out_size; ++q) out(static_cast<Eigen::Index>(q)) += prod * src[q];
      }
    }
    return out;
  }

  /// E||V||^2 over the product space (free slots and K Euclidean in the
  /// orthonormal bases): sum_n n! sum mult c^2.
  double expected_sq_norm() const {
    double acc = 0.0;
    const std::size_t blk = free_grid_ * static_cast<std::size_t>(spec_.p);
    for (const Component& c : comps_) {
      const double nfact = detail::factorial(c.chaos_order);
      for (std::size_t r = 0; r < c.mset->size(); ++r) {
        const double w = nfact * c.mset->multiplicity(r);
        const double* src = c.data.data() + r * blk;
        for (std::size_t q = 0; q < blk; ++q) acc += w * src[q] * src[q];
      }
    }
    return acc;
  }

  /// E<A, B> with both fields chaos-expanded on the same spaces.
  static double inner_expectation(const ChaosField& A, const ChaosField& B) {
    if (!A.spec_.same_as(B.spec_) || A.free_slots_ != B.free_slots_)
      throw std::invalid_argument("ChaosField::inner_expectation: shape mismatch");
    double acc = 0.0;
    const std::size_t blk = A.free_grid_ * static_cast<std::size_t>(A.spec_.p);
    for (const Component& a : A.comps_) {
      for (const Component& b : B.comps_) {
        if (a.chaos_order != b.chaos_order) continue;
        const double nfact = detail::factorial(a.chaos_order);
        for (std::size_t r = 0; r < a.mset->size(); ++r) {
          const double w = nfact * a.mset->multiplicity(r);
          const double* pa = a.data.data() + r * blk;
          const double* pb = b.data.data() + r * blk;
          for (std::size_t q = 0; q < blk; ++q) acc += w * pa[q] * pb[q];
        }
      }
    }
    return acc;
  }

 private:
  HilbertSpec spec_;
  int free_slots_ = 0;
  std::size_t free_grid_ = 1;
  std::vector<Component> comps_;
};

/// Malliavin derivative of the requested order (1 or 2).  On I_n(f_n) the
/// first derivative is n I_{n-1}(f_n) with one H slot freed; the second is
/// n(n-1) I_{n-2}(f_n) with two slots freed.
inline ChaosField malliavin_derivative(const ChaosFunctional& F, int order) {
  if (order != 1 && order != 2) throw std::invalid_argument("malliavin_derivative: order must be 1 or 2");
  const HilbertSpec& spec = F.spec();
  const int m = spec.m;
  const int p = spec.p;
  ChaosField out(spec, order);

  for (int n = order; n <= F.max_order(); ++n) {
    const SymmetricKernel& ker = F.kernel(n);
    ChaosField::Component& comp = out.add_component(n - order);
    const MultiIndexSet& src_ms = ker.mset();
    const MultiIndexSet& dst_ms = *comp.mset;
    const double factor = (order == 1) ? static_cast<double>(n)
                                       : static_cast<double>(n) * static_cast<double>(n - 1);
    const std::size_t blk = out.free_grid() * static_cast<std::size_t>(p);

    std::vector<int> full(static_cast<std::size_t>(n), 0);
    for (std::size_t dr = 0; dr < dst_ms.size(); ++dr) {
      const auto beta = dst_ms.index(dr);
      if (order == 1) {
        for (int y = 0; y < m; ++y) {
          full.assign(beta.begin(), beta.end());
          full.push_back(y);
          std::sort(full.begin(), full.end());
          const std::size_t sr = src_ms.rank_of(full);
          full.resize(beta.size());
          double* dst = comp.data.data() + dr * blk + static_cast<std::size_t>(y) * p;
          for (int k = 0; k < p; ++k) dst[k] = factor * ker.at(sr, k);
        }
      } else {
        for (int y = 0; y < m; ++y) {
          for (int z = 0; z < m; ++z) {
            full.assign(beta.begin(), beta.end());
            full.push_back(y);
            full.push_back(z);
            std::sort(full.begin(), full.end());
            const std::size_t sr = src_ms.rank_of(full);
            full.resize(beta.size());
            double* dst = comp.data.data() + dr * blk +
                          (static_cast<std::size_t>(y) * m + static_cast<std::size_t>(z)) * p;
            for (int k = 0; k < p; ++k) dst[k] = factor * ker.at(sr, k);
          }
        }
      }
    }
  }
  return out;
}

/// Divergence (Skorohod integral) of a field valued in H (x) K: each chaos
/// order-n component lifts to I_{n+1} of the canonical symmetrization of its
/// kernel with the free slot appended.  The expectation of the result is the
/// zero vector of K.
inline ChaosFunctional divergence(const ChaosField& V) {
  if (V.free_slots() != 1) throw std::invalid_argument("divergence: field must have one free H slot");
  const HilbertSpec& spec = V.spec();
  const int m = spec.m;
  const int p = spec.p;
  int max_out = 0;
  for (const auto& c : V.components()) max_out = std::max(max_out, c.chaos_order + 1);
  ChaosFunctional out(spec, max_out);

  for (const auto& c : V.components()) {
    const int n = c.chaos_order;
    SymmetricKernel& dst = out.kernel(n + 1);
    const MultiIndexSet& dst_ms = dst.mset();
    const MultiIndexSet& src_ms = *c.mset;
    const std::size_t blk = static_cast<std::size_t>(m) * p;
    // Symmetrizing a tensor already symmetric in its first n slots reduces
    // to averaging over which of the n+1 indices sits in the free slot.
    std::vector<int> gamma;
    std::vector<int> rest(static_cast<std::size_t>(n), 0);
    for (std::size_t gr = 0; gr < dst_ms.size(); ++gr) {
      const auto idx = dst_ms.index(gr);
      gamma.assign(idx.begin(), idx.end());
      for (int k = 0; k < p; ++k) {
        double acc = 0.0;
        for (int slot = 0; slot <= n; ++slot) {
          rest.clear();
          for (int q = 0; q <= n; ++q)
            if (q != slot) rest.push_back(gamma[static_cast<std::size_t>(q)]);
          const std::size_t sr = src_ms.rank_of(rest);
          const int y = gamma[static_cast<std::size_t>(slot)];
          acc += c.data[sr * blk + static_cast<std::size_t>(y) * p + k];
        }
        dst.at(gr, k) += acc / static_cast<double>(n + 1);
      }
    }
  }
  return out;
}

/// Ornstein-Uhlenbeck semigroup P_t: multiplies the order-n kernel by
/// e^{-nt}; fixes the mean.
inline ChaosFunctional ou_semigroup(const ChaosFunctional& F, double t) {
  if (t < 0.0) throw std::invalid_argument("ou_semigroup: t must be nonnegative");
  ChaosFunctional out = F;
  for (int n = 1; n <= out.max_order(); ++n) out.kernel(n).scale(std::exp(-static_cast<double>(n) * t));
  return out;
}

/// OU generator L: multiplies the order-n kernel by -n and drops the mean.
inline ChaosFunctional ou_generator(const ChaosFunctional& F) {
  ChaosFunctional out = F;
  out.mean().setZero();
  for (int n = 1; n <= out.max_order(); ++n) out.kernel(n).scale(-static_cast<double>(n));
  return out;
}

struct PseudoInverseResult {
  ChaosFunctional value;
  Eigen::VectorXd dropped_mean;  // L^{-1} acts on the centered part only
};

/// Pseudo-inverse L^{-1}: multiplies the order-n kernel by -1/n.  Acts on
/// F - E[F]; the dropped mean is reported alongside.
inline PseudoInverseResult ou_pseudo_inverse(const ChaosFunctional& F) {
  PseudoInverseResult out{F, F.mean()};
  out.value.mean().setZero();
  for (int n = 1; n <= out.value.max_order(); ++n)
    out.value.kernel(n).scale(-1.0 / static_cast<double>(n));
  return out;
}

/// -D L^{-1} F, the second leg of the carre-du-champs pairing.  Equals
/// sum_n I_{n-1}(f_n): the derivative with the chaos factor n cancelled.
inline ChaosField minus_d_linv(const ChaosFunctional& F) {
  ChaosField d = malliavin_derivative(F, 1);
  for (auto& comp : d.components()) {
    const double inv = 1.0 / static_cast<double>(comp.chaos_order + 1);
    for (auto& v : comp.data) v *= inv;
  }
  return d;
}

/// Random chaos functional with unit expected variance per order; used by
/// the self-test and bound experiments.  Deterministic in (seed, tag).
inline ChaosFunctional random_functional(const HilbertSpec& spec, int max_order, std::uint64_t seed,
                                         std::uint64_t tag, bool zero_mean = true) {
  CounterRng rng(seed, RngStream::kKernelInit, tag);
  ChaosFunctional F(spec, max_order);
  if (!zero_mean) {
    for (int k = 0; k < spec.p; ++k) F.mean()(k) = rng.normal();
  }
  for (int n = 1; n <= max_order; ++n) {
    SymmetricKernel& ker = F.kernel(n);
    const double nfact = detail::factorial(n);
    const double denom = nfact * static_cast<double>(ker.n_multi()) * static_cast<double>(spec.p);
    for (std::size_t r = 0; r < ker.n_multi(); ++r) {
      const double scale = 1.0 / std::sqrt(denom * ker.mset().multiplicity(r));
      for (int k = 0; k < spec.p; ++k) ker.at(r, k) = rng.normal() * scale;
    }
  }
  return F;
}

/// Maximum absolute coefficient difference across mean and all kernels.
inline double kernel_distance(const ChaosFunctional& A, const ChaosFunctional& B) {
  if (!A.spec().same_as(B.spec())) throw std::invalid_argument("kernel_distance: spec mismatch");
  double d = (A.mean() - B.mean()).lpNorm<Eigen::Infinity>();
  const int nmax = std::max(A.max_order(), B.max_order());
  for (int n = 1; n <= nmax; ++n) {
    const bool ha = n <= A.max_order();
    const bool hb = n <= B.max_order();
    const std::size_t count = ha ? A.kernel(n).data().size() : B.kernel(n).data().size();
    for (std::size_t q = 0; q < count; ++q) {
      const double va = ha ? A.kernel(n).data()[q] : 0.0;
      const double vb = hb ? B.kernel(n).data()[q] : 0.0;
      d = std::max(d, std::abs(va - vb));
    }
  }
  return d;
}

/// Flat text snapshot, one line per coefficient:
///   order,i1 i2 ... in,k,coefficient
/// with 1-based basis indices; the mean occupies order-0 lines with an empty
/// multi-index field.  Comment lines carry the space dimensions so the file
/// round-trips.
inline void dump_kernels(const ChaosFunctional& F, std::ostream& os) {
  os << "# steinlab kernel snapshot\n";
  os << "# m=" << F.spec().m << " p=" << F.spec().p << " max_order=" << F.max_order() << "\n";
  os << "# k_weights=";
  for (int i = 0; i < F.spec().p; ++i) {
    if (i) os << ' ';
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", F.spec().k_weights(i));
    os << buf;
  }
  os << "\n";
  char buf[32];
  for (int k = 0; k < F.spec().p; ++k) {
    std::snprintf(buf, sizeof buf, "%.17g", F.mean()(k));
    os << "0,," << (k + 1) << ',' << buf << "\n";
  }
  for (int n = 1; n <= F.max_order(); ++n) {
    const SymmetricKernel& ker = F.kernel(n);
    for (std::size_t r = 0; r < ker.n_multi(); ++r) {
      const auto idx = ker.mset().index(r);
      for (int k = 0; k < F.spec().p; ++k) {
        const double c = ker.at(r, k);
        if (c == 0.0) continue;
        os << n << ',';
        for (std::size_t q = 0; q < idx.size(); ++q) {
          if (q) os << ' ';
          os << (idx[q] + 1);
        }
        std::snprintf(buf, sizeof buf, "%.17g", c);
        os << ',' << (k + 1) << ',' << buf << "\n";
      }
    }
  }
}

inline ChaosFunctional load_kernels(std::istream& is) {
  int m = -1, p = -1, max_order = -1;
  Eigen::VectorXd weights;
  struct Line {
    int order;
    std::vector<int> idx;
    int k;
    double c;
  };
  std::vector<Line> lines;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream hs(line.substr(1));
      std::string tok;
      while (hs >> tok) {
        if (tok.rfind("m=", 0) == 0) m = std::stoi(tok.substr(2));
        else if (tok.rfind("p=", 0) == 0) p = std::stoi(tok.substr(2));
        else if (tok.rfind("max_order=", 0) == 0) max_order = std::stoi(tok.substr(10));
        else if (tok.rfind("k_weights=", 0) == 0) {
          std::vector<double> w;
          w.push_back(std::stod(tok.substr(10)));
          double v;
          while (hs >> v) w.push_back(v);
          weights = Eigen::Map<Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size()));
        }
      }
      continue;
    }
    Line ln;
    std::istringstream ls(line);
    std::string field;
    std::getline(ls, field, ',');
    ln.order = std::stoi(field);
    std::getline(ls, field, ',');
    std::istringstream idxs(field);
    int v;
    while (idxs >> v) ln.idx.push_back(v - 1);
    std::getline(ls, field, ',');
    ln.k = std::stoi(field) - 1;
    std::getline(ls, field, ',');
    ln.c = std::stod(field);
    if (static_cast<int>(ln.idx.size()) != ln.order)
      throw std::runtime_error("load_kernels: multi-index length does not match order");
    lines.push_back(std::move(ln));
  }
  if (m < 1 || p < 1 || max_order < 0) throw std::runtime_error("load_kernels: missing header");
  if (weights.size() != p) throw std::runtime_error("load_kernels: missing or malformed k_weights");
  ChaosFunctional F(HilbertSpec(m, p, weights), max_order);
  for (const Line& ln : lines) {
    if (ln.order == 0) {
      F.mean()(ln.k) = ln.c;
    } else {
      F.kernel(ln.order).at(std::span<const int>(ln.idx.data(), ln.idx.size()), ln.k) = ln.c;
    }
  }
  return F;
}

}  // namespace steinlab
