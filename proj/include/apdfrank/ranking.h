#ifndef APDFRANK_RANKING_H_
#define APDFRANK_RANKING_H_

// Self-supervised dynamic ranking over a fused APDF matrix.

#include <span>
#include <vector>

#include "apdfrank/apdf.h"
#include "apdfrank/embed.h"

namespace apdfrank {

// rank_of[c] is the 0-indexed semantic rank of candidate c (0 = closest to
// the question).
struct SemanticRank {
  std::vector<size_t> rank_of;

  // Candidates listed best first.
  std::vector<size_t> order() const;
  bool operator==(const SemanticRank&) const = default;
};

struct DynamicRanking {
  std::vector<size_t> order;  // candidate indices, best first

  size_t at(size_t position) const { return order.at(position); }
  size_t size() const { return order.size(); }
  bool operator==(const DynamicRanking&) const = default;
};

// Descending similarity, ties by lower index.
SemanticRank SemanticRankFromScores(std::span<const double> similarities);
SemanticRank ComputeSemanticRank(const EmbeddingVector& question,
                                 std::span<const EmbeddingVector> candidates);

// Repeatedly takes the largest surviving entry (lexicographically smallest
// (row, col) with row < col among ties), places whichever endpoint ranks
// better semantically, and clears that candidate's row and column. Once no
// positive entry is left, the unplaced candidates follow in semantic order.
DynamicRanking DynamicRank(const ApdfMatrix& multi, const SemanticRank& arank);

// Same contract, implemented by rescanning the full matrix against an
// explicit placed-set each step. Test oracle for DynamicRank.
DynamicRanking BruteForceRank(const ApdfMatrix& multi,
                              const SemanticRank& arank);

bool IsPermutation(std::span<const size_t> order, size_t size);

}  // namespace apdfrank

#endif  // APDFRANK_RANKING_H_
