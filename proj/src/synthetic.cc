#include "apdfrank/synthetic.h"

#include <algorithm>
#include <array>
#include <cstdio>
#include <random>
#include <string>

#include "apdfrank/error.h"

namespace apdfrank {

namespace {

constexpr std::array<std::string_view, 5> kAlphabets = {
    "abcde", "fghij", "klmno", "pqrst", "uvwxy"};
constexpr size_t kWordsPerStyle = 4;

std::vector<std::vector<std::string>> MakeVocabularies(std::mt19937_64& rng) {
  std::vector<std::vector<std::string>> vocab(kAlphabets.size());
  for (size_t s = 0; s < kAlphabets.size(); ++s) {
    std::uniform_int_distribution<size_t> letter(0, kAlphabets[s].size() - 1);
    std::uniform_int_distribution<size_t> length(3, 5);
    while (vocab[s].size() < kWordsPerStyle) {
      std::string w;
      const size_t len = length(rng);
      for (size_t i = 0; i < len; ++i) w.push_back(kAlphabets[s][letter(rng)]);
      if (std::find(vocab[s].begin(), vocab[s].end(), w) == vocab[s].end()) {
        vocab[s].push_back(w);
      }
    }
  }
  return vocab;
}

std::string MakeText(const std::vector<std::string>& words, size_t count,
                     std::mt19937_64& rng) {
  std::uniform_int_distribution<size_t> pick(0, words.size() - 1);
  std::string out;
  for (size_t i = 0; i < count; ++i) {
    if (i) out.push_back(' ');
    out += words[pick(rng)];
  }
  return out;
}

}  // namespace

HashedNgramEmbedder SyntheticEmbedder(const SyntheticConfig& cfg) {
  return HashedNgramEmbedder(cfg.embedding_dim, 1);
}

SyntheticSuite MakeSyntheticSuite(const SyntheticConfig& cfg) {
  const size_t styles = kAlphabets.size();
  if (cfg.pool_size < 2 || cfg.pool_size > styles) {
    throw ValidationError("synthetic pool size must be in [2, 5]");
  }
  std::mt19937_64 rng(cfg.seed);
  const auto vocab = MakeVocabularies(rng);
  const HashedNgramEmbedder embedder = SyntheticEmbedder(cfg);
  const Timestamp base = *ParseTimestamp("2024-01-01T00:00:00");

  SyntheticSuite suite;
  std::uniform_int_distribution<size_t> words_in_answer(5, 8);
  std::uniform_int_distribution<int64_t> target_votes(40, 80);
  std::uniform_int_distribution<int64_t> other_votes(0, 30);

  for (size_t r = 0; r < cfg.records; ++r) {
    const size_t target_style = r % styles;
    for (int attempt = 0;; ++attempt) {
      if (attempt == 100) {
        throw ValidationError("could not build a synthetic pool for record " +
                              std::to_string(r));
      }
      std::vector<size_t> pool_styles = {target_style};
      std::vector<size_t> others;
      for (size_t s = 0; s < styles; ++s) {
        if (s != target_style) others.push_back(s);
      }
      std::shuffle(others.begin(), others.end(), rng);
      pool_styles.insert(pool_styles.end(), others.begin(),
                         others.begin() + static_cast<long>(cfg.pool_size - 1));
      std::shuffle(pool_styles.begin(), pool_styles.end(), rng);

      char id[32];
      std::snprintf(id, sizeof(id), "syn-%05zu", r);
      QARecord record;
      record.question_id = id;
      record.question_text = MakeText(vocab[target_style], 4, rng);
      record.question_created_at = base + std::chrono::hours(r);
      size_t target = 0;
      for (size_t i = 0; i < pool_styles.size(); ++i) {
        const bool is_target = pool_styles[i] == target_style;
        if (is_target) target = i;
        record.candidates.push_back(
            {.id = "a" + std::to_string(i),
             .content = MakeText(vocab[pool_styles[i]], words_in_answer(rng), rng),
             .votes = is_target ? target_votes(rng) : other_votes(rng),
             .created_at = record.question_created_at + std::chrono::minutes(i + 1),
             .accepted = is_target});
      }

      const RecordAnalysis analysis =
          AnalyzeRecord(record, EmbedRecordText(record, embedder), {});
      if (analysis.targets.ranking.at(0) != target) continue;
      record = AssignGoldRanking(std::move(record), {});
      suite.records.push_back(std::move(record));
      suite.target.push_back(target);
      break;
    }
  }
  return suite;
}

}  // namespace apdfrank
