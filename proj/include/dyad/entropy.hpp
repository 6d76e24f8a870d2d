#pragma once

// Normalized Shannon entropy of the neural output trajectory, measured on a
// 100 x 100 x 100 histogram over the unit cube.

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <unordered_map>

namespace dyad::entropy {

inline constexpr std::size_t kBinsPerAxis = 100;
inline constexpr std::size_t kTotalBins = kBinsPerAxis * kBinsPerAxis * kBinsPerAxis;

inline std::size_t bin_of(double v) {
  if (!(v >= 0.0 && v <= 1.0)) throw std::out_of_range("histogram sample outside [0, 1]");
  const auto i = static_cast<std::size_t>(v * static_cast<double>(kBinsPerAxis));
  return i < kBinsPerAxis ? i : kBinsPerAxis - 1;
}

struct BinIndex {
  std::size_t i, j, k;
  friend bool operator==(const BinIndex&, const BinIndex&) = default;
};

class Histogram3D {
 public:
  void accumulate(const std::array<double, 3>& v) {
    ++counts_[key(bin_of(v[0]), bin_of(v[1]), bin_of(v[2]))];
    ++total_;
  }

  // Bin-wise sum; associative and commutative.
  Histogram3D& merge(const Histogram3D& other) {
    for (const auto& [k, c] : other.counts_) counts_[k] += c;
    total_ += other.total_;
    return *this;
  }

  std::uint64_t count(const BinIndex& b) const {
    const auto it = counts_.find(key(b.i, b.j, b.k));
    return it == counts_.end() ? 0 : it->second;
  }
  std::uint64_t total() const { return total_; }
  std::size_t occupied() const { return counts_.size(); }
  void reserve(std::size_t n) { counts_.reserve(n); }
  void clear() {
    counts_.clear();
    total_ = 0;
  }

  template <class F>
  void for_each_bin(F&& f) const {
    for (const auto& [k, c] : counts_) f(unkey(k), c);
  }

 private:
  static std::uint32_t key(std::size_t i, std::size_t j, std::size_t k) {
    return static_cast<std::uint32_t>((i * kBinsPerAxis + j) * kBinsPerAxis + k);
  }
  static BinIndex unkey(std::uint32_t key) {
    return {key / (kBinsPerAxis * kBinsPerAxis), (key / kBinsPerAxis) % kBinsPerAxis, key % kBinsPerAxis};
  }

  std::unordered_map<std::uint32_t, std::uint64_t> counts_;
  std::uint64_t total_ = 0;
};

struct EntropyValue {
  double value = 0.0;
  bool degenerate = false;  // empty histogram
};

/// Shannon entropy in nats over occupied bins. Bins sharing a count are
/// summed together and the per-count terms are added with compensation, so
/// a million equal bins still come out at ln(1e6) to the last few ulps.
inline EntropyValue shannon_entropy(const Histogram3D& h) {
  if (h.total() == 0) return {0.0, true};
  std::map<std::uint64_t, std::uint64_t> multiplicity;  // count -> number of bins
  h.for_each_bin([&](const BinIndex&, std::uint64_t c) { ++multiplicity[c]; });
  const double total = static_cast<double>(h.total());
  double sum = 0.0, carry = 0.0;
  for (const auto& [c, m] : multiplicity) {
    const double p = static_cast<double>(c) / total;
    const double term = -static_cast<double>(m) * p * std::log(p);
    const double t = sum + term;
    carry += std::abs(sum) >= std::abs(term) ? (sum - t) + term : (term - t) + sum;
    sum = t;
  }
  return {sum + carry, false};
}

inline double max_entropy() { return std::log(static_cast<double>(kTotalBins)); }

inline EntropyValue normalized_entropy(const Histogram3D& h) {
  auto e = shannon_entropy(h);
  e.value /= max_entropy();
  return e;
}

}  // namespace dyad::entropy
