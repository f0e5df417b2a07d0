#ifndef APDFRANK_SYNTHETIC_H_
#define APDFRANK_SYNTHETIC_H_

// Synthetic response pools for end-to-end training runs.
//
// Every pool holds one candidate per "style"; each style writes with its own
// disjoint alphabet and a small fixed vocabulary. The question of a record is
// written in the target style and the target candidate carries the most
// votes, so it tops both attribute rankings and is placed first by the
// dynamic ranking. Gold rankings list the target first.

#include <cstdint>
#include <vector>

#include "apdfrank/corpus.h"
#include "apdfrank/pipeline.h"

namespace apdfrank {

struct SyntheticConfig {
  size_t records = 200;
  size_t pool_size = 5;
  uint64_t seed = 20240501;
  size_t embedding_dim = 256;
};

struct SyntheticSuite {
  std::vector<QARecord> records;
  std::vector<size_t> target;  // per record, the intended best candidate
};

// Deterministic for a fixed config. pool_size is capped by the number of
// styles (5).
SyntheticSuite MakeSyntheticSuite(const SyntheticConfig& cfg);

// Embedder the suite is designed for.
HashedNgramEmbedder SyntheticEmbedder(const SyntheticConfig& cfg);

}  // namespace apdfrank

#endif  // APDFRANK_SYNTHETIC_H_
