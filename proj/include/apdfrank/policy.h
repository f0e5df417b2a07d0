#ifndef APDFRANK_POLICY_H_
#define APDFRANK_POLICY_H_

// Token log-probability providers.
//
// ToyPolicy is a byte-level bigram softmax language model with a
// question-conditioned bias:
//
//   logits(k) = W[prev_byte_k] + sum_h f_h(question) * B[h]
//
// where prev_byte_0 is a BOS context and f is the question's byte histogram
// folded into `buckets` slots and L1-normalized. The features carry no
// linguistic meaning; they are just enough conditioning for desk-scale
// training runs to separate questions.

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "apdfrank/apdf.h"
#include "apdfrank/corpus.h"
#include "apdfrank/objective.h"
#include "apdfrank/ranking.h"

namespace apdfrank {

struct ToyPolicyConfig {
  size_t buckets = 256;
  double learning_rate = 0.5;
  uint64_t seed = 7;
  // Standard deviation of the initial weights; 0 gives a uniform policy.
  double init_scale = 0.0;

  bool operator==(const ToyPolicyConfig&) const = default;
};

class ToyPolicy {
 public:
  static constexpr size_t kVocab = 256;
  static constexpr size_t kBos = 256;
  static constexpr size_t kContexts = kVocab + 1;

  explicit ToyPolicy(const ToyPolicyConfig& cfg = {});

  const ToyPolicyConfig& config() const { return cfg_; }
  size_t buckets() const { return cfg_.buckets; }

  // Flat parameter vector: kContexts x kVocab transition logits followed by
  // buckets x kVocab question-bias rows.
  std::vector<double>& params() { return params_; }
  const std::vector<double>& params() const { return params_; }
  size_t num_params() const { return params_.size(); }
  size_t TransitionIndex(size_t context, size_t token) const {
    return context * kVocab + token;
  }
  size_t BiasIndex(size_t bucket, size_t token) const {
    return kContexts * kVocab + bucket * kVocab + token;
  }

  std::vector<double> QuestionFeatures(std::string_view question) const;

  // Log-probability of every byte of `response`; entry k depends only on the
  // question and bytes < k. Throws ValidationError on an empty response.
  std::vector<double> Score(std::string_view question,
                            std::string_view response) const;

  // Greedy byte decoding.
  std::string Generate(std::string_view question, size_t length) const;

  void Save(const std::string& path) const;
  static ToyPolicy Load(const std::string& path);

  // sum_h f_h * B[h], one entry per token.
  std::vector<double> QuestionBias(const std::vector<double>& features) const;
  // Log-softmax over the next byte given a context and a question bias.
  void LogSoftmax(size_t context, const std::vector<double>& bias,
                  std::vector<double>& out) const;

  bool operator==(const ToyPolicy&) const = default;

 private:
  ToyPolicyConfig cfg_;
  std::vector<double> params_;
};

// Everything the objective needs about one record besides the policy.
struct RecordTargets {
  ApdfBundle apdf;
  DynamicRanking ranking;
};

struct PolicyLoss {
  LossBreakdown breakdown;
  std::vector<double> scores;  // pi_s per candidate
};

struct PolicyObjectiveConfig {
  double alpha = kDefaultAlpha;
  ComparisonMode mode = ComparisonMode::kLiteral;
};

PolicyLoss EvaluateLoss(const ToyPolicy& policy, const QARecord& record,
                        const RecordTargets& targets,
                        const PolicyObjectiveConfig& cfg);

// Analytic gradient of the total loss with respect to policy.params().
// `loss`, when non-null, receives the loss at the current parameters.
std::vector<double> LossGradient(const ToyPolicy& policy,
                                 const QARecord& record,
                                 const RecordTargets& targets,
                                 const PolicyObjectiveConfig& cfg,
                                 PolicyLoss* loss = nullptr);

struct TrainOptions {
  size_t epochs = 1;
  PolicyObjectiveConfig objective;
  // Called after every `checkpoint_every` steps (0 disables).
  size_t checkpoint_every = 0;
  std::function<void(size_t step, const ToyPolicy&)> on_checkpoint;
};

struct TrainStep {
  size_t step = 0;
  size_t epoch = 0;
  std::string record_id;
  LossBreakdown loss;
};

struct TrainResult {
  std::vector<TrainStep> trace;
  std::vector<double> epoch_mean_total;
};

// Plain per-record gradient descent, records visited in ascending
// question_id order every epoch. `targets` is parallel to `records`. Throws
// DegenerateInputError naming the step on a non-finite loss.
TrainResult Train(ToyPolicy& policy, const std::vector<QARecord>& records,
                  const std::vector<RecordTargets>& targets,
                  const TrainOptions& options);

// (record_id, candidate_id) -> token log-probabilities.
class LogProbTable {
 public:
  using Key = std::pair<std::string, std::string>;

  // Throws ValidationError on empty, positive or non-finite entries.
  void Set(const std::string& record_id, const std::string& candidate_id,
           std::vector<double> logprobs);
  const std::vector<double>& Get(const std::string& record_id,
                                 const std::string& candidate_id) const;
  bool Contains(const std::string& record_id,
                const std::string& candidate_id) const;
  size_t size() const { return table_.size(); }
  const std::map<Key, std::vector<double>>& entries() const { return table_; }

  // Throws ValidationError naming the first candidate of `records` that has
  // no entry.
  void CheckCovers(const std::vector<QARecord>& records) const;

  bool operator==(const LogProbTable&) const = default;

 private:
  std::map<Key, std::vector<double>> table_;
};

// JSON-Lines: {"record_id": ..., "candidate_id": ..., "logprobs": [...]}.
LogProbTable LoadLogProbFile(const std::string& path);
void WriteLogProbFile(const std::string& path, const LogProbTable& table);

LogProbTable ScoreRecords(const ToyPolicy& policy,
                          const std::vector<QARecord>& records);

}  // namespace apdfrank

#endif  // APDFRANK_POLICY_H_
