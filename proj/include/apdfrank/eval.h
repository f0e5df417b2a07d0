#ifndef APDFRANK_EVAL_H_
#define APDFRANK_EVAL_H_

// Preference metrics for generated answers against ranked response pools,
// plus BLEU, Rouge-L and correlation helpers.
//
// A generation x "hits" a record at k when the candidate most similar to x
// is among the record's top-k gold candidates (PrefHit@k). PrefRecall@k
// counts the overlap of the k most similar candidates with the gold top-k.

#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "apdfrank/embed.h"

namespace apdfrank {

// Index of the most similar candidate; ties go to the lower index. Throws
// ValidationError on an empty pool.
size_t BestMatch(std::span<const double> similarities);
size_t BestMatch(const EmbeddingVector& generation,
                 std::span<const EmbeddingVector> pool);

// min(k, M) indices by descending similarity, ties by index.
std::vector<size_t> TopKMatches(std::span<const double> similarities, size_t k);

// First min(k, M) entries of a gold ranking.
std::vector<size_t> GoldTopK(std::span<const size_t> gold_ranking, size_t k);

// One evaluated record: similarity of the generation to every candidate and
// the record's gold ranking (if any).
struct EvalItem {
  std::string record_id;
  std::vector<double> similarities;
  std::optional<std::vector<size_t>> gold_ranking;
};

enum class RecallNormalizer {
  kHalf,  // |overlap| / 2
  kByK,   // |overlap| / k
};

std::string_view RecallNormalizerName(RecallNormalizer n);
RecallNormalizer ParseRecallNormalizer(std::string_view name);

// Items without a gold ranking are skipped and counted in `excluded`.
// Returns 0 when no item qualifies.
double PrefHit(std::span<const EvalItem> items, size_t k,
               size_t* excluded = nullptr);
double PrefRecall(std::span<const EvalItem> items, size_t k,
                  RecallNormalizer normalizer = RecallNormalizer::kHalf,
                  size_t* excluded = nullptr);

// 1 if the generation's best match is the safer response. Pools must have
// exactly two candidates.
int SaferHit(std::span<const double> similarities, size_t gold_safer_index);

// Whitespace tokens.
std::vector<std::string> Tokenize(std::string_view text);

// BLEU with brevity penalty over whitespace tokens. Orders above the
// candidate length are dropped (effective order), so identical short texts
// still score 1. Any zero n-gram precision gives 0.
double Bleu(std::string_view candidate, std::span<const std::string> references,
            size_t max_n = 4);
double Bleu(std::string_view candidate, std::string_view reference,
            size_t max_n = 4);

// LCS-based F1 over whitespace tokens.
double RougeL(std::string_view candidate, std::string_view reference);

// Throw DegenerateInputError on zero variance or fewer than 2 points.
double PearsonR(std::span<const double> xs, std::span<const double> ys);
// Pearson on average ranks (ties share their mean rank).
double SpearmanR(std::span<const double> xs, std::span<const double> ys);

struct EvalReport {
  std::map<size_t, double> pref_hit;
  std::map<size_t, double> pref_recall;
  std::optional<double> safer_hit;
  double bleu = 0.0;
  double rouge_l = 0.0;
  size_t n_records = 0;
  size_t excluded = 0;
  std::map<std::string, std::string> config;

  std::string ToJson() const;
  // "key=value" lines.
  std::string ToText() const;
};

}  // namespace apdfrank

#endif  // APDFRANK_EVAL_H_
