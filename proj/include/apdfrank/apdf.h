#ifndef APDFRANK_APDF_H_
#define APDFRANK_APDF_H_

// Attribute-perceptual distance factors.
//
// For one attribute with per-candidate gain G and rank positions l induced by
// that gain, the distance factor between candidates i and j is
//
//   delta(i, j) = (G(i) - G(j)) * (D(l_i) - D(l_j)),   D(l) = 1 / log(l + 1)
//
// Collected over all pairs this is a symmetric, zero-diagonal, nonnegative
// M x M matrix. Several attributes fuse by element-wise product.

#include <chrono>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "apdfrank/timestamp.h"

namespace apdfrank {

inline constexpr double kNaturalLogBase = std::numbers::e;

struct GainVector {
  std::string attribute;
  std::vector<double> gains;
};

class ApdfMatrix {
 public:
  ApdfMatrix() = default;
  ApdfMatrix(std::string attribute, size_t size)
      : attribute_(std::move(attribute)), size_(size), values_(size * size) {}

  const std::string& attribute() const { return attribute_; }
  size_t size() const { return size_; }

  double operator()(size_t row, size_t col) const {
    return values_[row * size_ + col];
  }
  double& operator()(size_t row, size_t col) {
    return values_[row * size_ + col];
  }
  std::span<const double> row(size_t r) const {
    return {values_.data() + r * size_, size_};
  }
  std::span<const double> values() const { return values_; }

  bool operator==(const ApdfMatrix&) const = default;

 private:
  std::string attribute_;
  size_t size_ = 0;
  std::vector<double> values_;
};

struct DecayConfig {
  Timestamp reference_time{};
  std::chrono::milliseconds half_life = std::chrono::days{365};
  bool enabled = false;
};

void ValidateDecayConfig(const DecayConfig& cfg);

// 1 / log_base(rank + 1). rank is 1-indexed.
double RankDiscount(int rank, double log_base = kNaturalLogBase);

// 2^(phi - 1) for phi in [-1, 1].
double SemanticGain(double phi);

// votes * 2^(-age / half_life); identity when decay is disabled. Ages from
// the future clamp to zero.
double DecayedPopularity(double votes, Timestamp created_at,
                         const DecayConfig& cfg);

// log10(decayed + 1).
double PopularityGain(double decayed_popularity);

// 1-indexed ranks by descending gain, ties by lower candidate index.
std::vector<int> InducedRanks(std::span<const double> gains);

ApdfMatrix SingleApdf(const GainVector& gains,
                      double log_base = kNaturalLogBase);

// Element-wise product. Throws ValidationError on empty input or shape
// mismatch.
ApdfMatrix MultiApdf(std::span<const ApdfMatrix> matrices);

// Single-attribute matrices plus their fusion for one response pool.
struct ApdfBundle {
  std::vector<ApdfMatrix> singles;
  ApdfMatrix multi;
};

// Semantic + popularity bundle from per-candidate question cosines and
// (already decayed) popularity.
ApdfBundle BuildCodeApdf(std::span<const double> phis,
                         std::span<const double> decayed_popularity,
                         double log_base = kNaturalLogBase);

}  // namespace apdfrank

#endif  // APDFRANK_APDF_H_
