#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <stdexcept>
#include <unordered_map>
#include <utility>
#include <vector>

namespace steinlab {

/// Sorted multi-indices of length n over {0, ..., m-1}, enumerated in
/// lexicographic order.  A multi-index stands for the symmetric-array slot
/// shared by all permutations of the tuple; `multiplicity` is the number of
/// those permutations (n! / prod a_j!).
class MultiIndexSet {
 public:
  MultiIndexSet(int m, int n) : m_(m), order_(n) {
    if (m < 1 || n < 0) throw std::invalid_argument("MultiIndexSet: bad dimensions");
    std::vector<int> idx(static_cast<std::size_t>(n), 0);
    enumerate(idx, 0, 0);
    lookup_.reserve(tuples_.size());
    for (std::size_t r = 0; r < size(); ++r) lookup_.emplace(encode(index(r)), r);
  }

  int m() const { return m_; }
  int order() const { return order_; }
  std::size_t size() const { return order_ == 0 ? 1 : tuples_.size() / order_; }

  std::span<const int> index(std::size_t rank) const {
    return {tuples_.data() + rank * order_, static_cast<std::size_t>(order_)};
  }

  double multiplicity(std::size_t rank) const { return mult_[rank]; }

  /// Runs of equal entries: pairs (variable, count), used for Hermite
  /// product evaluation.
  const std::vector<std::pair<int, int>>& runs(std::size_t rank) const { return runs_[rank]; }

  std::size_t rank_of(std::span<const int> sorted) const {
    const auto it = lookup_.find(encode(sorted));
    if (it == lookup_.end()) throw std::out_of_range("MultiIndexSet: tuple not found (is it sorted?)");
    return it->second;
  }

  /// Shared per-(m, n) instance.
  static std::shared_ptr<const MultiIndexSet> get(int m, int n) {
    static std::mutex mu;
    static std::map<std::pair<int, int>, std::shared_ptr<const MultiIndexSet>> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto& slot = cache[{m, n}];
    if (!slot) slot = std::make_shared<MultiIndexSet>(m, n);
    return slot;
  }

 private:
  void enumerate(std::vector<int>& idx, int pos, int low) {
    if (pos == order_) {
      tuples_.insert(tuples_.end(), idx.begin(), idx.end());
      std::vector<std::pair<int, int>> rr;
      for (int k = 0; k < order_; ++k) {
        if (k > 0 && idx[k] == idx[k - 1]) {
          ++rr.back().second;
        } else {
          rr.emplace_back(idx[k], 1);
        }
      }
      // n! / prod(a_j!) built as a product of binomials so it stays exact.
      double mult = 1.0;
      int produced = 0;
      for (const auto& run : rr) {
        for (int a = 1; a <= run.second; ++a) {
          ++produced;
          mult *= static_cast<double>(produced) / static_cast<double>(a);
        }
      }
      mult_.push_back(mult);
      runs_.push_back(std::move(rr));
      return;
    }
    for (int v = low; v < m_; ++v) {
      idx[static_cast<std::size_t>(pos)] = v;
      enumerate(idx, pos + 1, v);
    }
  }

  std::uint64_t encode(std::span<const int> tuple) const {
    std::uint64_t code = 0;
    for (const int v : tuple) code = code * static_cast<std::uint64_t>(m_ + 1) + static_cast<std::uint64_t>(v + 1);
    return code;
  }

  int m_;
  int order_;
  std::vector<int> tuples_;
  std::vector<double> mult_;
  std::vector<std::vector<std::pair<int, int>>> runs_;
  std::unordered_map<std::uint64_t, std::size_t> lookup_;
};

}  // namespace steinlab
