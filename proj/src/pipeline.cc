#include "apdfrank/pipeline.h"

#include <atomic>
#include <mutex>

#include "apdfrank/error.h"

namespace apdfrank {

std::string QuestionEmbeddingId(const QARecord& record) {
  return record.question_id;
}

std::string CandidateEmbeddingId(const QARecord& record, size_t candidate) {
  return record.question_id + "/" + record.candidates.at(candidate).id;
}

std::string GenerationEmbeddingId(const std::string& record_id) {
  return record_id + "/@generation";
}

RecordEmbeddings EmbedRecordText(const QARecord& record, const Embedder& embedder) {
  RecordEmbeddings out;
  out.question = embedder.Embed(record.question_text);
  for (const auto& c : record.candidates) out.candidates.push_back(embedder.Embed(c.content));
  return out;
}

RecordEmbeddings EmbedRecordById(const QARecord& record,
                                 const LookupEmbedder& lookup) {
  RecordEmbeddings out;
  out.question = lookup.Embed(QuestionEmbeddingId(record));
  for (size_t i = 0; i < record.candidates.size(); ++i) {
    out.candidates.push_back(lookup.Embed(CandidateEmbeddingId(record, i)));
  }
  return out;
}

RecordAnalysis AnalyzeRecord(const QARecord& record,
                             const RecordEmbeddings& embeddings,
                             const AnalysisOptions& options) {
  const size_t m = record.pool_size();
  if (embeddings.candidates.size() != m) {
    throw ValidationError("record '" + record.question_id +
                          "': embedding count does not match the pool");
  }
  RecordAnalysis out;
  for (size_t i = 0; i < m; ++i) {
    out.similarity.push_back(Cosine(embeddings.question, embeddings.candidates[i]));
    const auto& c = record.candidates[i];
    out.decayed_popularity.push_back(
        DecayedPopularity(static_cast<double>(c.votes), c.created_at, options.decay));
  }
  out.arank = SemanticRankFromScores(out.similarity);
  out.targets.apdf =
      BuildCodeApdf(out.similarity, out.decayed_popularity, options.log_base);
  out.targets.ranking = DynamicRank(out.targets.apdf.multi, out.arank);
  return out;
}

LossBreakdown LossFromLogProbs(const QARecord& record,
                               const RecordTargets& targets,
                               const LogProbTable& table,
                               const PolicyObjectiveConfig& cfg) {
  const size_t m = record.pool_size();
  std::vector<double> scores;
  for (const auto& c : record.candidates) {
    scores.push_back(MeanLogProb(table.Get(record.question_id, c.id)));
  }
  const size_t best = targets.ranking.at(0);
  const double l_pa = PerceptualAlignmentLoss(
      table.Get(record.question_id, record.candidates[best].id));
  const double l_pc =
      m < 2 ? 0.0
            : PerceptualComparisonLoss(scores, targets.ranking, targets.apdf.singles,
                                       targets.apdf.multi, cfg.mode);
  return TotalLoss(l_pc, l_pa, cfg.alpha);
}

size_t DefaultWorkers() {
  return std::max<size_t>(1, std::thread::hardware_concurrency());
}

void ParallelFor(size_t n, size_t workers, const std::function<void(size_t)>& fn) {
  workers = std::max<size_t>(1, std::min(workers, n));
  if (workers <= 1) {
    for (size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<size_t> next{0};
  std::mutex mu;
  size_t failed_index = n;
  std::exception_ptr failure;
  std::vector<std::thread> threads;
  for (size_t w = 0; w < workers; ++w) {
    threads.emplace_back([&] {
      for (size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(mu);
          if (i < failed_index) {
            failed_index = i;
            failure = std::current_exception();
          }
        }
      }
    });
  }
  for (auto& t : threads) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace apdfrank
