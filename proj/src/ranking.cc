#include "apdfrank/ranking.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "apdfrank/error.h"

namespace apdfrank {

namespace {

void CheckInputs(const ApdfMatrix& multi, const SemanticRank& arank) {
  const size_t m = multi.size();
  if (arank.rank_of.size() != m) {
    throw ValidationError("semantic rank has " +
                          std::to_string(arank.rank_of.size()) +
                          " entries for a " + std::to_string(m) + "x" +
                          std::to_string(m) + " matrix");
  }
  if (!IsPermutation(arank.rank_of, m)) {
    throw ValidationError("semantic rank is not a permutation");
  }
  for (double v : multi.values()) {
    if (!std::isfinite(v)) {
      throw ValidationError("APDF matrix has non-finite entries");
    }
  }
}

void AppendRemaining(const SemanticRank& arank, std::vector<bool>& placed,
                     std::vector<size_t>& order) {
  for (size_t c : arank.order()) {
    if (!placed[c]) {
      placed[c] = true;
      order.push_back(c);
    }
  }
}

}  // namespace

std::vector<size_t> SemanticRank::order() const {
  std::vector<size_t> out(rank_of.size());
  for (size_t c = 0; c < rank_of.size(); ++c) out.at(rank_of[c]) = c;
  return out;
}

bool IsPermutation(std::span<const size_t> order, size_t size) {
  if (order.size() != size) return false;
  std::vector<bool> seen(size, false);
  for (size_t v : order) {
    if (v >= size || seen[v]) return false;
    seen[v] = true;
  }
  return true;
}

SemanticRank SemanticRankFromScores(std::span<const double> similarities) {
  std::vector<size_t> order(similarities.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    return similarities[a] > similarities[b];
  });
  SemanticRank rank;
  rank.rank_of.resize(order.size());
  for (size_t pos = 0; pos < order.size(); ++pos) rank.rank_of[order[pos]] = pos;
  return rank;
}

SemanticRank ComputeSemanticRank(const EmbeddingVector& question,
                                 std::span<const EmbeddingVector> candidates) {
  std::vector<double> sims;
  sims.reserve(candidates.size());
  for (const auto& c : candidates) sims.push_back(Cosine(question, c));
  return SemanticRankFromScores(sims);
}

DynamicRanking DynamicRank(const ApdfMatrix& multi, const SemanticRank& arank) {
  CheckInputs(multi, arank);
  const size_t m = multi.size();
  ApdfMatrix work = multi;
  std::vector<bool> placed(m, false);
  DynamicRanking out;
  out.order.reserve(m);

  while (out.order.size() < m) {
    double best = 0.0;
    size_t row = 0, col = 0;
    for (size_t i = 0; i < m; ++i) {
      for (size_t j = i + 1; j < m; ++j) {
        if (work(i, j) > best) {
          best = work(i, j);
          row = i;
          col = j;
        }
      }
    }
    if (best <= 0.0) break;
    const size_t winner = arank.rank_of[row] < arank.rank_of[col] ? row : col;
    out.order.push_back(winner);
    placed[winner] = true;
    for (size_t k = 0; k < m; ++k) {
      work(winner, k) = 0.0;
      work(k, winner) = 0.0;
    }
  }
  AppendRemaining(arank, placed, out.order);
  return out;
}

DynamicRanking BruteForceRank(const ApdfMatrix& multi,
                              const SemanticRank& arank) {
  CheckInputs(multi, arank);
  const size_t m = multi.size();
  std::vector<bool> placed(m, false);
  DynamicRanking out;

  for (size_t step = 0; step < m; ++step) {
    // Maximum over every live (i, j) pair in both orientations.
    double best = -1.0;
    for (size_t i = 0; i < m; ++i) {
      for (size_t j = 0; j < m; ++j) {
        if (placed[i] || placed[j]) continue;
        best = std::max(best, multi(i, j));
      }
    }
    if (!(best > 0.0)) break;
    // First pair attaining it in lexicographic order, oriented row < col.
    std::vector<std::pair<size_t, size_t>> hits;
    for (size_t i = 0; i < m; ++i) {
      for (size_t j = 0; j < m; ++j) {
        if (placed[i] || placed[j] || multi(i, j) != best) continue;
        hits.emplace_back(std::min(i, j), std::max(i, j));
      }
    }
    const auto [row, col] = *std::min_element(hits.begin(), hits.end());
    const size_t winner = arank.rank_of[row] < arank.rank_of[col] ? row : col;
    out.order.push_back(winner);
    placed[winner] = true;
  }
  AppendRemaining(arank, placed, out.order);
  return out;
}

}  // namespace apdfrank
