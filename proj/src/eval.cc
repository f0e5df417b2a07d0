#include "apdfrank/eval.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "apdfrank/error.h"

namespace apdfrank {

size_t BestMatch(std::span<const double> similarities) {
  if (similarities.empty()) throw ValidationError("best match of an empty pool");
  size_t best = 0;
  for (size_t i = 1; i < similarities.size(); ++i) {
    if (similarities[i] > similarities[best]) best = i;
  }
  return best;
}

size_t BestMatch(const EmbeddingVector& generation,
                 std::span<const EmbeddingVector> pool) {
  std::vector<double> sims;
  for (const auto& c : pool) sims.push_back(Cosine(generation, c));
  return BestMatch(sims);
}

std::vector<size_t> TopKMatches(std::span<const double> similarities, size_t k) {
  if (k < 1) throw ValidationError("k must be >= 1");
  std::vector<size_t> order(similarities.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    return similarities[a] > similarities[b];
  });
  order.resize(std::min(k, order.size()));
  return order;
}

std::vector<size_t> GoldTopK(std::span<const size_t> gold_ranking, size_t k) {
  const size_t n = std::min(k, gold_ranking.size());
  return {gold_ranking.begin(), gold_ranking.begin() + n};
}

std::string_view RecallNormalizerName(RecallNormalizer n) {
  return n == RecallNormalizer::kHalf ? "half" : "by_k";
}

RecallNormalizer ParseRecallNormalizer(std::string_view name) {
  if (name == "half") return RecallNormalizer::kHalf;
  if (name == "by_k") return RecallNormalizer::kByK;
  throw ValidationError("unknown recall normalizer '" + std::string(name) +
                        "' (expected half or by_k)");
}

double PrefHit(std::span<const EvalItem> items, size_t k, size_t* excluded) {
  if (k < 1) throw ValidationError("k must be >= 1");
  size_t hits = 0, used = 0, skipped = 0;
  for (const EvalItem& item : items) {
    if (!item.gold_ranking || item.similarities.empty()) {
      ++skipped;
      continue;
    }
    const auto gold = GoldTopK(*item.gold_ranking, k);
    const size_t best = BestMatch(item.similarities);
    if (std::find(gold.begin(), gold.end(), best) != gold.end()) ++hits;
    ++used;
  }
  if (excluded != nullptr) *excluded = skipped;
  return used == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(used);
}

double PrefRecall(std::span<const EvalItem> items, size_t k,
                  RecallNormalizer normalizer, size_t* excluded) {
  if (k < 1) throw ValidationError("k must be >= 1");
  double sum = 0.0;
  size_t used = 0, skipped = 0;
  const double denom =
      normalizer == RecallNormalizer::kHalf ? 2.0 : static_cast<double>(k);
  for (const EvalItem& item : items) {
    if (!item.gold_ranking || item.similarities.empty()) {
      ++skipped;
      continue;
    }
    const auto gold = GoldTopK(*item.gold_ranking, k);
    const auto top = TopKMatches(item.similarities, k);
    size_t overlap = 0;
    for (size_t c : top) {
      if (std::find(gold.begin(), gold.end(), c) != gold.end()) ++overlap;
    }
    sum += static_cast<double>(overlap) / denom;
    ++used;
  }
  if (excluded != nullptr) *excluded = skipped;
  return used == 0 ? 0.0 : sum / static_cast<double>(used);
}

int SaferHit(std::span<const double> similarities, size_t gold_safer_index) {
  if (similarities.size() != 2) {
    throw ValidationError("SaferHit needs exactly 2 candidates, got " +
                          std::to_string(similarities.size()));
  }
  if (gold_safer_index > 1) throw ValidationError("safer index must be 0 or 1");
  return BestMatch(similarities) == gold_safer_index ? 1 : 0;
}

std::vector<std::string> Tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::istringstream in{std::string(text)};
  std::string tok;
  while (in >> tok) tokens.push_back(tok);
  return tokens;
}

namespace {

std::map<std::vector<std::string>, size_t> NgramCounts(
    const std::vector<std::string>& tokens, size_t n) {
  std::map<std::vector<std::string>, size_t> counts;
  for (size_t i = 0; i + n <= tokens.size(); ++i) {
    ++counts[std::vector<std::string>(tokens.begin() + i, tokens.begin() + i + n)];
  }
  return counts;
}

}  // namespace

double Bleu(std::string_view candidate, std::span<const std::string> references,
            size_t max_n) {
  if (max_n < 1) throw ValidationError("BLEU order must be >= 1");
  if (references.empty()) throw ValidationError("BLEU needs a reference");
  const auto cand = Tokenize(candidate);
  if (cand.empty()) return 0.0;
  std::vector<std::vector<std::string>> refs;
  for (const auto& r : references) refs.push_back(Tokenize(r));

  const size_t order = std::min(max_n, cand.size());
  double log_precision = 0.0;
  for (size_t n = 1; n <= order; ++n) {
    const auto cand_counts = NgramCounts(cand, n);
    std::map<std::vector<std::string>, size_t> max_ref;
    for (const auto& r : refs) {
      for (const auto& [gram, c] : NgramCounts(r, n)) {
        max_ref[gram] = std::max(max_ref[gram], c);
      }
    }
    size_t matched = 0, total = 0;
    for (const auto& [gram, c] : cand_counts) {
      total += c;
      auto it = max_ref.find(gram);
      if (it != max_ref.end()) matched += std::min(c, it->second);
    }
    if (matched == 0) return 0.0;
    log_precision += std::log(static_cast<double>(matched) /
                              static_cast<double>(total));
  }
  log_precision /= static_cast<double>(order);

  // Closest reference length, shorter wins ties.
  size_t ref_len = refs.front().size();
  for (const auto& r : refs) {
    const long d_new = std::labs(static_cast<long>(r.size()) - long(cand.size()));
    const long d_old = std::labs(static_cast<long>(ref_len) - long(cand.size()));
    if (d_new < d_old || (d_new == d_old && r.size() < ref_len)) ref_len = r.size();
  }
  const double c = static_cast<double>(cand.size());
  const double brevity =
      cand.size() >= ref_len ? 1.0 : std::exp(1.0 - static_cast<double>(ref_len) / c);
  return brevity * std::exp(log_precision);
}

double Bleu(std::string_view candidate, std::string_view reference,
            size_t max_n) {
  const std::string refs[] = {std::string(reference)};
  return Bleu(candidate, refs, max_n);
}

double RougeL(std::string_view candidate, std::string_view reference) {
  const auto a = Tokenize(candidate);
  const auto b = Tokenize(reference);
  if (a.empty() || b.empty()) return 0.0;
  std::vector<size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (size_t i = 1; i <= a.size(); ++i) {
    for (size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1
                                    : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  const double lcs = static_cast<double>(prev[b.size()]);
  if (lcs == 0.0) return 0.0;
  const double p = lcs / static_cast<double>(a.size());
  const double r = lcs / static_cast<double>(b.size());
  return 2.0 * p * r / (p + r);
}

double PearsonR(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) throw ValidationError("correlation length mismatch");
  if (xs.size() < 2) throw DegenerateInputError("correlation needs >= 2 points");
  const double n = static_cast<double>(xs.size());
  const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) {
    throw DegenerateInputError("correlation of a constant series");
  }
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

namespace {

std::vector<double> AverageRanks(std::span<const double> xs) {
  std::vector<size_t> order(xs.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t a, size_t b) { return xs[a] < xs[b]; });
  std::vector<double> ranks(xs.size());
  for (size_t i = 0; i < order.size();) {
    size_t j = i;
    while (j + 1 < order.size() && xs[order[j + 1]] == xs[order[i]]) ++j;
    const double mean_rank = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (size_t k = i; k <= j; ++k) ranks[order[k]] = mean_rank;
    i = j + 1;
  }
  return ranks;
}

std::string FormatDouble(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

}  // namespace

double SpearmanR(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) throw ValidationError("correlation length mismatch");
  const auto rx = AverageRanks(xs);
  const auto ry = AverageRanks(ys);
  return PearsonR(rx, ry);
}

std::string EvalReport::ToJson() const {
  nlohmann::ordered_json j;
  nlohmann::ordered_json hit, recall;
  for (const auto& [k, v] : pref_hit) hit[std::to_string(k)] = v;
  for (const auto& [k, v] : pref_recall) recall[std::to_string(k)] = v;
  j["pref_hit"] = hit;
  j["pref_recall"] = recall;
  j["safer_hit"] = safer_hit ? nlohmann::ordered_json(*safer_hit)
                             : nlohmann::ordered_json(nullptr);
  j["bleu"] = bleu;
  j["rouge_l"] = rouge_l;
  j["n_records"] = n_records;
  j["excluded"] = excluded;
  j["config"] = config;
  return j.dump(2);
}

std::string EvalReport::ToText() const {
  std::ostringstream out;
  for (const auto& [k, v] : pref_hit) {
    out << "pref_hit@" << k << "=" << FormatDouble(v) << "\n";
  }
  for (const auto& [k, v] : pref_recall) {
    out << "pref_recall@" << k << "=" << FormatDouble(v) << "\n";
  }
  if (safer_hit) out << "safer_hit=" << FormatDouble(*safer_hit) << "\n";
  out << "bleu=" << FormatDouble(bleu) << "\n";
  out << "rouge_l=" << FormatDouble(rouge_l) << "\n";
  out << "n_records=" << n_records << "\n";
  out << "excluded=" << excluded << "\n";
  for (const auto& [key, value] : config) out << "config." << key << "=" << value << "\n";
  return out.str();
}

}  // namespace apdfrank
