#include "apdfrank/policy.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <random>

#include <nlohmann/json.hpp>

#include "apdfrank/error.h"

namespace apdfrank {

namespace {

constexpr char kCheckpointMagic[8] = {'A', 'P', 'D', 'F', 'P', 'O', 'L', '\0'};
constexpr uint32_t kCheckpointVersion = 1;

// In-place log-softmax.
void LogSoftmaxInPlace(std::vector<double>& z) {
  const double hi = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (double v : z) sum += std::exp(v - hi);
  const double lse = hi + std::log(sum);
  for (double& v : z) v -= lse;
}

template <typename T>
void WritePod(std::ofstream& out, const T& value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T ReadPod(std::ifstream& in, const std::string& path) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw ValidationError("truncated policy checkpoint: " + path);
  return value;
}

}  // namespace

ToyPolicy::ToyPolicy(const ToyPolicyConfig& cfg) : cfg_(cfg) {
  if (cfg_.buckets == 0) throw ValidationError("policy needs >= 1 bucket");
  if (!(cfg_.learning_rate >= 0.0)) {
    throw ValidationError("learning rate must be >= 0");
  }
  params_.assign((kContexts + cfg_.buckets) * kVocab, 0.0);
  if (cfg_.init_scale > 0.0) {
    std::mt19937_64 rng(cfg_.seed);
    std::normal_distribution<double> normal(0.0, cfg_.init_scale);
    for (double& p : params_) p = normal(rng);
  }
}

std::vector<double> ToyPolicy::QuestionFeatures(std::string_view question) const {
  std::vector<double> f(cfg_.buckets, 0.0);
  if (question.empty()) return f;
  for (unsigned char c : question) f[c % cfg_.buckets] += 1.0;
  const double inv = 1.0 / static_cast<double>(question.size());
  for (double& v : f) v *= inv;
  return f;
}

std::vector<double> ToyPolicy::QuestionBias(
    const std::vector<double>& features) const {
  std::vector<double> bias(kVocab, 0.0);
  for (size_t h = 0; h < cfg_.buckets; ++h) {
    if (features[h] == 0.0) continue;
    const double* row = params_.data() + BiasIndex(h, 0);
    for (size_t t = 0; t < kVocab; ++t) bias[t] += features[h] * row[t];
  }
  return bias;
}

void ToyPolicy::LogSoftmax(size_t context, const std::vector<double>& bias,
                           std::vector<double>& out) const {
  out.resize(kVocab);
  const double* row = params_.data() + TransitionIndex(context, 0);
  for (size_t t = 0; t < kVocab; ++t) out[t] = row[t] + bias[t];
  LogSoftmaxInPlace(out);
}

std::vector<double> ToyPolicy::Score(std::string_view question,
                                     std::string_view response) const {
  if (response.empty()) throw ValidationError("cannot score an empty response");
  const std::vector<double> bias = QuestionBias(QuestionFeatures(question));
  std::vector<double> logprobs;
  logprobs.reserve(response.size());
  std::vector<double> lsm;
  size_t context = kBos;
  for (unsigned char c : response) {
    LogSoftmax(context, bias, lsm);
    logprobs.push_back(lsm[c]);
    context = c;
  }
  return logprobs;
}

std::string ToyPolicy::Generate(std::string_view question, size_t length) const {
  const std::vector<double> bias = QuestionBias(QuestionFeatures(question));
  std::string out;
  std::vector<double> lsm;
  size_t context = kBos;
  for (size_t k = 0; k < length; ++k) {
    LogSoftmax(context, bias, lsm);
    const size_t next = static_cast<size_t>(
        std::max_element(lsm.begin(), lsm.end()) - lsm.begin());
    out.push_back(static_cast<char>(next));
    context = next;
  }
  return out;
}

void ToyPolicy::Save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write policy checkpoint: " + path);
  out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  WritePod(out, kCheckpointVersion);
  WritePod(out, static_cast<uint32_t>(kVocab));
  WritePod(out, static_cast<uint32_t>(kContexts));
  WritePod(out, static_cast<uint32_t>(cfg_.buckets));
  WritePod(out, cfg_.learning_rate);
  WritePod(out, cfg_.seed);
  WritePod(out, cfg_.init_scale);
  WritePod(out, static_cast<uint64_t>(params_.size()));
  out.write(reinterpret_cast<const char*>(params_.data()),
            static_cast<std::streamsize>(params_.size() * sizeof(double)));
  if (!out) throw IoError("write failed: " + path);
}

ToyPolicy ToyPolicy::Load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open policy checkpoint: " + path);
  char magic[sizeof(kCheckpointMagic)];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) {
    throw ValidationError("not a policy checkpoint: " + path);
  }
  const auto version = ReadPod<uint32_t>(in, path);
  if (version != kCheckpointVersion) {
    throw ValidationError("unsupported checkpoint version " +
                          std::to_string(version));
  }
  const auto vocab = ReadPod<uint32_t>(in, path);
  const auto contexts = ReadPod<uint32_t>(in, path);
  if (vocab != kVocab || contexts != kContexts) {
    throw ValidationError("checkpoint vocabulary does not match this build");
  }
  ToyPolicyConfig cfg;
  cfg.buckets = ReadPod<uint32_t>(in, path);
  cfg.learning_rate = ReadPod<double>(in, path);
  cfg.seed = ReadPod<uint64_t>(in, path);
  cfg.init_scale = ReadPod<double>(in, path);
  const auto count = ReadPod<uint64_t>(in, path);
  ToyPolicyConfig zero_init = cfg;
  zero_init.init_scale = 0.0;
  ToyPolicy policy(zero_init);
  policy.cfg_ = cfg;
  if (count != policy.params_.size()) {
    throw ValidationError("checkpoint parameter count mismatch");
  }
  in.read(reinterpret_cast<char*>(policy.params_.data()),
          static_cast<std::streamsize>(count * sizeof(double)));
  if (!in) throw ValidationError("truncated policy checkpoint: " + path);
  return policy;
}

PolicyLoss EvaluateLoss(const ToyPolicy& policy, const QARecord& record,
                        const RecordTargets& targets,
                        const PolicyObjectiveConfig& cfg) {
  PolicyLoss out;
  const size_t m = record.pool_size();
  std::vector<std::vector<double>> token_lp(m);
  for (size_t i = 0; i < m; ++i) {
    token_lp[i] = policy.Score(record.question_text, record.candidates[i].content);
    out.scores.push_back(MeanLogProb(token_lp[i]));
  }
  const size_t best = targets.ranking.at(0);
  const double l_pa = PerceptualAlignmentLoss(token_lp[best]);
  const double l_pc =
      m < 2 ? 0.0
            : PerceptualComparisonLoss(out.scores, targets.ranking,
                                       targets.apdf.singles, targets.apdf.multi,
                                       cfg.mode);
  out.breakdown = TotalLoss(l_pc, l_pa, cfg.alpha);
  return out;
}

std::vector<double> LossGradient(const ToyPolicy& policy,
                                 const QARecord& record,
                                 const RecordTargets& targets,
                                 const PolicyObjectiveConfig& cfg,
                                 PolicyLoss* loss) {
  const size_t m = record.pool_size();
  const size_t vocab = ToyPolicy::kVocab;
  std::vector<double> scores(m);
  std::vector<std::vector<double>> token_lp(m);
  for (size_t i = 0; i < m; ++i) {
    token_lp[i] = policy.Score(record.question_text, record.candidates[i].content);
    scores[i] = MeanLogProb(token_lp[i]);
  }
  const size_t best = targets.ranking.at(0);

  // d total / d pi_s(i): comparison term plus -alpha on the aligned
  // candidate (L_pa = -pi_s(best)).
  std::vector<double> coeff(m, 0.0);
  double l_pc = 0.0;
  if (m >= 2) {
    ComparisonResult cmp =
        PerceptualComparison(scores, targets.ranking, targets.apdf.singles,
                             targets.apdf.multi, cfg.mode);
    l_pc = cmp.loss;
    coeff = std::move(cmp.grad_scores);
  }
  coeff[best] -= cfg.alpha;
  if (loss != nullptr) {
    loss->scores = scores;
    loss->breakdown = TotalLoss(l_pc, -scores[best], cfg.alpha);
  }

  // d pi_s(i) / d logits_k = (onehot(token_k) - softmax_k) / t; logits_k
  // depend on W[context_k] directly and on B[h] through f_h.
  std::vector<double> grad(policy.num_params(), 0.0);
  const std::vector<double> features = policy.QuestionFeatures(record.question_text);
  const std::vector<double> bias = policy.QuestionBias(features);
  std::vector<double> bias_grad(vocab, 0.0);
  std::vector<double> lsm;
  for (size_t i = 0; i < m; ++i) {
    if (coeff[i] == 0.0) continue;
    const std::string& text = record.candidates[i].content;
    const double scale = coeff[i] / static_cast<double>(text.size());
    size_t context = ToyPolicy::kBos;
    for (unsigned char c : text) {
      policy.LogSoftmax(context, bias, lsm);
      double* row = grad.data() + policy.TransitionIndex(context, 0);
      for (size_t t = 0; t < vocab; ++t) {
        const double d = -scale * std::exp(lsm[t]);
        row[t] += d;
        bias_grad[t] += d;
      }
      row[c] += scale;
      bias_grad[c] += scale;
      context = c;
    }
  }
  for (size_t h = 0; h < policy.buckets(); ++h) {
    if (features[h] == 0.0) continue;
    double* row = grad.data() + policy.BiasIndex(h, 0);
    for (size_t t = 0; t < vocab; ++t) row[t] = features[h] * bias_grad[t];
  }
  return grad;
}

TrainResult Train(ToyPolicy& policy, const std::vector<QARecord>& records,
                  const std::vector<RecordTargets>& targets,
                  const TrainOptions& options) {
  if (records.empty()) throw ValidationError("training needs >= 1 record");
  if (records.size() != targets.size()) {
    throw ValidationError("records and targets differ in length");
  }
  std::vector<size_t> order(records.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    return records[a].question_id < records[b].question_id;
  });

  TrainResult result;
  const double lr = policy.config().learning_rate;
  size_t step = 0;
  for (size_t epoch = 0; epoch < options.epochs; ++epoch) {
    double epoch_sum = 0.0;
    for (size_t idx : order) {
      PolicyLoss loss;
      const std::vector<double> grad = LossGradient(
          policy, records[idx], targets[idx], options.objective, &loss);
      if (!std::isfinite(loss.breakdown.total)) {
        throw DegenerateInputError("non-finite loss at training step " +
                                   std::to_string(step) + " (record " +
                                   records[idx].question_id + ")");
      }
      if (lr != 0.0) {
        auto& params = policy.params();
        for (size_t p = 0; p < params.size(); ++p) params[p] -= lr * grad[p];
      }
      result.trace.push_back({.step = step,
                              .epoch = epoch,
                              .record_id = records[idx].question_id,
                              .loss = loss.breakdown});
      epoch_sum += loss.breakdown.total;
      ++step;
      if (options.checkpoint_every != 0 && options.on_checkpoint &&
          step % options.checkpoint_every == 0) {
        options.on_checkpoint(step, policy);
      }
    }
    result.epoch_mean_total.push_back(epoch_sum /
                                      static_cast<double>(order.size()));
  }
  return result;
}

void LogProbTable::Set(const std::string& record_id,
                       const std::string& candidate_id,
                       std::vector<double> logprobs) {
  const std::string where = "(" + record_id + ", " + candidate_id + ")";
  if (logprobs.empty()) {
    throw ValidationError("empty logprob vector for " + where);
  }
  for (double lp : logprobs) {
    if (!std::isfinite(lp) || lp > 0.0) {
      throw ValidationError("logprob " + std::to_string(lp) + " for " + where +
                            " must be finite and <= 0");
    }
  }
  table_[{record_id, candidate_id}] = std::move(logprobs);
}

const std::vector<double>& LogProbTable::Get(
    const std::string& record_id, const std::string& candidate_id) const {
  auto it = table_.find({record_id, candidate_id});
  if (it == table_.end()) {
    throw ValidationError("no logprobs for record '" + record_id +
                          "' candidate '" + candidate_id + "'");
  }
  return it->second;
}

bool LogProbTable::Contains(const std::string& record_id,
                            const std::string& candidate_id) const {
  return table_.count({record_id, candidate_id}) != 0;
}

void LogProbTable::CheckCovers(const std::vector<QARecord>& records) const {
  for (const QARecord& r : records) {
    for (const ResponseCandidate& c : r.candidates) {
      if (!Contains(r.question_id, c.id)) {
        throw ValidationError("logprob file is missing record '" +
                              r.question_id + "' candidate '" + c.id + "'");
      }
    }
  }
}

LogProbTable LoadLogProbFile(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open logprob file: " + path);
  LogProbTable table;
  std::string line;
  size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.empty()) continue;
    const std::string where = path + ":" + std::to_string(line_number) + ": ";
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(where + e.what());
    }
    if (!j.is_object() || !j.contains("record_id") ||
        !j.contains("candidate_id") || !j.contains("logprobs") ||
        !j["record_id"].is_string() || !j["candidate_id"].is_string() ||
        !j["logprobs"].is_array()) {
      throw ValidationError(where +
                            "expected record_id, candidate_id and logprobs");
    }
    std::vector<double> lps;
    for (const auto& v : j["logprobs"]) {
      if (!v.is_number()) throw ValidationError(where + "non-numeric logprob");
      lps.push_back(v.get<double>());
    }
    try {
      table.Set(j["record_id"].get<std::string>(),
                j["candidate_id"].get<std::string>(), std::move(lps));
    } catch (const ValidationError& e) {
      throw ValidationError(where + e.what());
    }
  }
  return table;
}

void WriteLogProbFile(const std::string& path, const LogProbTable& table) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write logprob file: " + path);
  for (const auto& [key, lps] : table.entries()) {
    nlohmann::ordered_json j;
    j["record_id"] = key.first;
    j["candidate_id"] = key.second;
    j["logprobs"] = lps;
    out << j.dump() << '\n';
  }
  if (!out) throw IoError("write failed: " + path);
}

LogProbTable ScoreRecords(const ToyPolicy& policy,
                          const std::vector<QARecord>& records) {
  LogProbTable table;
  for (const QARecord& r : records) {
    for (const ResponseCandidate& c : r.candidates) {
      table.Set(r.question_id, c.id, policy.Score(r.question_text, c.content));
    }
  }
  return table;
}

}  // namespace apdfrank
