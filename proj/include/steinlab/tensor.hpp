#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <span>
#include <stdexcept>
#include <vector>

#include "steinlab/hilbert.hpp"
#include "steinlab/multi_index.hpp"

namespace steinlab {

/// Element of H^{(sym)n} (x) K: one coefficient per (sorted multi-index,
/// K node), where the stored value is the dense symmetric-array entry, i.e.
/// the inner product of the tensor with h_{a_1} (x) ... (x) h_{a_n} (x) k_i.
/// Squared norms and inner products therefore carry the multinomial
/// multiplicity of each multi-index.
class SymmetricKernel {
 public:
  SymmetricKernel() = default;

  SymmetricKernel(const HilbertSpec& spec, int order)
      : m_(spec.m), p_(spec.p), order_(order), mset_(MultiIndexSet::get(spec.m, order)),
        coeffs_(mset_->size() * static_cast<std::size_t>(spec.p), 0.0) {}

  int order() const { return order_; }
  int m() const { return m_; }
  int p() const { return p_; }
  const MultiIndexSet& mset() const { return *mset_; }
  std::size_t n_multi() const { return mset_->size(); }

  double& at(std::size_t rank, int k) { return coeffs_[rank * static_cast<std::size_t>(p_) + k]; }
  double at(std::size_t rank, int k) const { return coeffs_[rank * static_cast<std::size_t>(p_) + k]; }

  double& at(std::span<const int> sorted_idx, int k) { return at(mset_->rank_of(sorted_idx), k); }
  double at(std::span<const int> sorted_idx, int k) const { return at(mset_->rank_of(sorted_idx), k); }

  std::vector<double>& data() { return coeffs_; }
  const std::vector<double>& data() const { return coeffs_; }

  SymmetricKernel& scale(double s) {
    for (auto& c : coeffs_) c *= s;
    return *this;
  }

  /// Squared H^{(x)n} (x) K norm: sum over (alpha, i) of mult(alpha) c^2.
  double norm_sq() const {
    double acc = 0.0;
    for (std::size_t r = 0; r < n_multi(); ++r) {
      const double mult = mset_->multiplicity(r);
      for (int k = 0; k < p_; ++k) {
        const double c = at(r, k);
        acc += mult * c * c;
      }
    }
    return acc;
  }

  static double inner(const SymmetricKernel& f, const SymmetricKernel& g) {
    if (f.order_ != g.order_ || f.m_ != g.m_ || f.p_ != g.p_)
      throw std::invalid_argument("SymmetricKernel::inner: shape mismatch");
    double acc = 0.0;
    for (std::size_t r = 0; r < f.n_multi(); ++r) {
      const double mult = f.mset_->multiplicity(r);
      for (int k = 0; k < f.p_; ++k) acc += mult * f.at(r, k) * g.at(r, k);
    }
    return acc;
  }

  /// Expansion onto the full m^n grid (K index minor).  Test-scale helper.
  std::vector<double> to_dense() const {
    const std::size_t grid = dense_grid_size(m_, order_);
    std::vector<double> dense(grid * static_cast<std::size_t>(p_), 0.0);
    std::vector<int> tuple(static_cast<std::size_t>(order_), 0);
    for (std::size_t flat = 0; flat < grid; ++flat) {
      decode_tuple(flat, tuple);
      std::vector<int> sorted(tuple);
      std::sort(sorted.begin(), sorted.end());
      const std::size_t r = mset_->rank_of(sorted);
      for (int k = 0; k < p_; ++k) dense[flat * p_ + k] = at(r, k);
    }
    return dense;
  }

  static std::size_t dense_grid_size(int m, int order) {
    std::size_t grid = 1;
    for (int i = 0; i < order; ++i) {
      grid *= static_cast<std::size_t>(m);
      if (grid > (std::size_t{1} << 40)) throw std::invalid_argument("dense grid too large");
    }
    return grid;
  }

  void decode_tuple(std::size_t flat, std::vector<int>& tuple) const {
    for (int pos = order_ - 1; pos >= 0; --pos) {
      tuple[static_cast<std::size_t>(pos)] = static_cast<int>(flat % m_);
      flat /= static_cast<std::size_t>(m_);
    }
  }

 private:
  int m_ = 0;
  int p_ = 0;
  int order_ = 0;
  std::shared_ptr<const MultiIndexSet> mset_;
  std::vector<double> coeffs_;
};

/// Canonical symmetrization of a dense order-n array with a trailing K slot
/// (layout: H indices major, K index minor).  Averages over all n!
/// permutations of the H indices; idempotent.
inline SymmetricKernel symmetrize(const HilbertSpec& spec, int order, std::span<const double> raw) {
  const std::size_t grid = SymmetricKernel::dense_grid_size(spec.m, order);
  if (raw.size() != grid * static_cast<std::size_t>(spec.p))
    throw std::invalid_argument("symmetrize: array size does not match declared order");
  SymmetricKernel out(spec, order);
  std::vector<int> tuple(static_cast<std::size_t>(order), 0);
  std::vector<int> sorted(static_cast<std::size_t>(order), 0);
  for (std::size_t flat = 0; flat < grid; ++flat) {
    out.decode_tuple(flat, tuple);
    sorted.assign(tuple.begin(), tuple.end());
    std::sort(sorted.begin(), sorted.end());
    const std::size_t r = out.mset().rank_of(sorted);
    for (int k = 0; k < spec.p; ++k) out.at(r, k) += raw[flat * spec.p + k];
  }
  // Each sorted slot received exactly mult(alpha) grid entries.
  for (std::size_t r = 0; r < out.n_multi(); ++r) {
    const double inv = 1.0 / out.mset().multiplicity(r);
    for (int k = 0; k < spec.p; ++k) out.at(r, k) *= inv;
  }
  return out;
}

inline SymmetricKernel symmetrize(const HilbertSpec& spec, int order, const std::vector<double>& raw) {
  return symmetrize(spec, order, std::span<const double>(raw.data(), raw.size()));
}

/// f (x)_r g with the K-slot convention: both K indices are carried along,
/// so the result lives in H^{(x)(n+q-2r)} (x) K (x) K.  Stored dense; the
/// H part is in general not symmetric.
struct ContractionResult {
  int m = 0;
  int p = 0;
  int left_order = 0;   // surviving H indices inherited from f
  int right_order = 0;  // surviving H indices inherited from g
  std::vector<double> data;  // [left grid][right grid][p][p]

  std::size_t left_grid() const { return SymmetricKernel::dense_grid_size(m, left_order); }
  std::size_t right_grid() const { return SymmetricKernel::dense_grid_size(m, right_order); }

  double at(std::size_t left_flat, std::size_t right_flat, int ki, int kj) const {
    return data[((left_flat * right_grid() + right_flat) * p + ki) * p + kj];
  }

  /// Frobenius norm over all H and K slots (orthonormal bases).
  double norm() const {
    double acc = 0.0;
    for (const double v : data) acc += v * v;
    return std::sqrt(acc);
  }
};

inline ContractionResult contract_r(const SymmetricKernel& f, const SymmetricKernel& g, int r) {
  if (f.m() != g.m() || f.p() != g.p())
    throw std::invalid_argument("contract_r: kernels live on different spaces");
  if (r < 0 || r > std::min(f.order(), g.order()))
    throw std::invalid_argument("contract_r: r out of range");
  const int m = f.m();
  const int p = f.p();
  ContractionResult out;
  out.m = m;
  out.p = p;
  out.left_order = f.order() - r;
  out.right_order = g.order() - r;

  const std::vector<double> fd = f.to_dense();
  const std::vector<double> gd = g.to_dense();
  const std::size_t lg = out.left_grid();
  const std::size_t rg = out.right_grid();
  const std::size_t sg = SymmetricKernel::dense_grid_size(m, r);
  out.data.assign(lg * rg * static_cast<std::size_t>(p) * p, 0.0);

  for (std::size_t li = 0; li < lg; ++li) {
    for (std::size_t ri = 0; ri < rg; ++ri) {
      for (std::size_t sh = 0; sh < sg; ++sh) {
        const std::size_t f_flat = li * sg + sh;  // f indices: [left, shared]
        const std::size_t g_flat = ri * sg + sh;  // g indices: [right, shared]
        for (int ki = 0; ki < p; ++ki) {
          const double fv = fd[f_flat * p + ki];
          if (fv == 0.0) continue;
          for (int kj = 0; kj < p; ++kj) {
            out.data[((li * rg + ri) * p + ki) * p + kj] += fv * gd[g_flat * p + kj];
          }
        }
      }
    }
  }
  return out;
}

}  // namespace steinlab
