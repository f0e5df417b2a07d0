#include "apdfrank/apdf.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "apdfrank/error.h"

namespace apdfrank {

void ValidateDecayConfig(const DecayConfig& cfg) {
  if (cfg.enabled && cfg.half_life.count() <= 0) {
    throw ValidationError("decay half_life must be positive when enabled");
  }
}

double RankDiscount(int rank, double log_base) {
  if (rank < 1) {
    throw ValidationError("rank must be >= 1, got " + std::to_string(rank));
  }
  if (!(log_base > 1.0)) {
    throw ValidationError("log base must be > 1");
  }
  return std::log(log_base) / std::log(static_cast<double>(rank) + 1.0);
}

double SemanticGain(double phi) {
  if (!std::isfinite(phi) || std::abs(phi) > 1.0 + 1e-9) {
    throw ValidationError("semantic similarity out of [-1, 1]: " +
                          std::to_string(phi));
  }
  phi = std::clamp(phi, -1.0, 1.0);
  return std::exp2(phi - 1.0);
}

double DecayedPopularity(double votes, Timestamp created_at,
                         const DecayConfig& cfg) {
  if (!cfg.enabled || votes == 0.0) return votes;
  ValidateDecayConfig(cfg);
  const auto age = std::max(cfg.reference_time - created_at,
                            std::chrono::milliseconds::zero());
  const double halves = static_cast<double>(age.count()) /
                        static_cast<double>(cfg.half_life.count());
  return votes * std::exp2(-halves);
}

double PopularityGain(double decayed_popularity) {
  if (!(decayed_popularity >= 0.0) || !std::isfinite(decayed_popularity)) {
    throw ValidationError("popularity must be finite and >= 0");
  }
  return std::log10(decayed_popularity + 1.0);
}

std::vector<int> InducedRanks(std::span<const double> gains) {
  std::vector<size_t> order(gains.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    return gains[a] > gains[b];
  });
  std::vector<int> ranks(gains.size());
  for (size_t pos = 0; pos < order.size(); ++pos) {
    ranks[order[pos]] = static_cast<int>(pos) + 1;
  }
  return ranks;
}

ApdfMatrix SingleApdf(const GainVector& gains, double log_base) {
  const size_t m = gains.gains.size();
  for (double g : gains.gains) {
    if (!std::isfinite(g) || g < 0.0) {
      throw ValidationError("gain for attribute '" + gains.attribute +
                            "' must be finite and >= 0");
    }
  }
  const std::vector<int> ranks = InducedRanks(gains.gains);
  std::vector<double> discount(m);
  for (size_t i = 0; i < m; ++i) discount[i] = RankDiscount(ranks[i], log_base);

  ApdfMatrix out(gains.attribute, m);
  for (size_t i = 0; i < m; ++i) {
    for (size_t j = i + 1; j < m; ++j) {
      const double delta =
          (gains.gains[i] - gains.gains[j]) * (discount[i] - discount[j]);
      // Equal gains can still receive distinct ranks through the index
      // tie-break; the gain factor is then exactly zero.
      out(i, j) = delta;
      out(j, i) = delta;
    }
  }
  return out;
}

ApdfMatrix MultiApdf(std::span<const ApdfMatrix> matrices) {
  if (matrices.empty()) {
    throw ValidationError("multi-APDF needs at least one matrix");
  }
  const size_t m = matrices.front().size();
  std::string name = matrices.front().attribute();
  for (size_t k = 1; k < matrices.size(); ++k) {
    if (matrices[k].size() != m) {
      throw ValidationError("APDF shape mismatch: " + std::to_string(m) +
                            " vs " + std::to_string(matrices[k].size()));
    }
    name += "*" + matrices[k].attribute();
  }
  ApdfMatrix out(matrices.size() == 1 ? name : "multi", m);
  for (size_t i = 0; i < m; ++i) {
    for (size_t j = 0; j < m; ++j) {
      double v = matrices.front()(i, j);
      for (size_t k = 1; k < matrices.size(); ++k) v *= matrices[k](i, j);
      out(i, j) = v;
    }
  }
  return out;
}

ApdfBundle BuildCodeApdf(std::span<const double> phis,
                         std::span<const double> decayed_popularity,
                         double log_base) {
  if (phis.size() != decayed_popularity.size()) {
    throw ValidationError("semantic and popularity vectors differ in length");
  }
  GainVector semantic{"semantic", {}};
  GainVector popularity{"popularity", {}};
  for (double phi : phis) semantic.gains.push_back(SemanticGain(phi));
  for (double p : decayed_popularity) {
    popularity.gains.push_back(PopularityGain(p));
  }
  ApdfBundle bundle;
  bundle.singles.push_back(SingleApdf(semantic, log_base));
  bundle.singles.push_back(SingleApdf(popularity, log_base));
  bundle.multi = MultiApdf(bundle.singles);
  return bundle;
}

}  // namespace apdfrank
