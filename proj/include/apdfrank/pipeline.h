#ifndef APDFRANK_PIPELINE_H_
#define APDFRANK_PIPELINE_H_

// Glue from a QARecord to its APDF bundle, semantic rank and dynamic ranking,
// plus a small deterministic parallel-for.

#include <algorithm>
#include <exception>
#include <functional>
#include <string>
#include <thread>
#include <vector>

#include "apdfrank/apdf.h"
#include "apdfrank/corpus.h"
#include "apdfrank/embed.h"
#include "apdfrank/objective.h"
#include "apdfrank/policy.h"
#include "apdfrank/ranking.h"

namespace apdfrank {

struct RecordEmbeddings {
  EmbeddingVector question;
  std::vector<EmbeddingVector> candidates;
};

// Ids used in external embedding files.
std::string QuestionEmbeddingId(const QARecord& record);
std::string CandidateEmbeddingId(const QARecord& record, size_t candidate);
std::string GenerationEmbeddingId(const std::string& record_id);

// Embeds question text and candidate contents.
RecordEmbeddings EmbedRecordText(const QARecord& record, const Embedder& embedder);
// Looks vectors up by the ids above.
RecordEmbeddings EmbedRecordById(const QARecord& record,
                                 const LookupEmbedder& lookup);

struct AnalysisOptions {
  DecayConfig decay;
  double log_base = kNaturalLogBase;
};

struct RecordAnalysis {
  std::vector<double> similarity;         // cos(question, candidate)
  std::vector<double> decayed_popularity;
  SemanticRank arank;
  RecordTargets targets;                  // APDF bundle + dynamic ranking
};

RecordAnalysis AnalyzeRecord(const QARecord& record,
                             const RecordEmbeddings& embeddings,
                             const AnalysisOptions& options);

// Loss of one record from externally supplied token log-probabilities.
LossBreakdown LossFromLogProbs(const QARecord& record,
                               const RecordTargets& targets,
                               const LogProbTable& table,
                               const PolicyObjectiveConfig& cfg);

// Runs fn(i) for i in [0, n) on up to `workers` threads. Callers write
// results into slot i, so output order never depends on scheduling. The first
// exception (lowest index) is rethrown after all workers join.
void ParallelFor(size_t n, size_t workers, const std::function<void(size_t)>& fn);

size_t DefaultWorkers();

}  // namespace apdfrank

#endif  // APDFRANK_PIPELINE_H_
