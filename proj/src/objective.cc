#include "apdfrank/objective.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include "apdfrank/error.h"

namespace apdfrank {

namespace {

// log(exp(a) + exp(b)) style reduction over the finite entries of `xs`.
double LogSumExp(std::span<const double> xs) {
  double hi = -std::numeric_limits<double>::infinity();
  for (double x : xs) hi = std::max(hi, x);
  if (!std::isfinite(hi)) return hi;
  double sum = 0.0;
  for (double x : xs) sum += std::exp(x - hi);
  return hi + std::log(sum);
}

// -log(sigmoid(z)) without overflow.
double SoftplusNeg(double z) {
  return z > 0 ? std::log1p(std::exp(-z)) : -z + std::log1p(std::exp(z));
}

}  // namespace

std::string_view ComparisonModeName(ComparisonMode mode) {
  return mode == ComparisonMode::kLiteral ? "literal" : "top_anchored";
}

ComparisonMode ParseComparisonMode(std::string_view name) {
  if (name == "literal") return ComparisonMode::kLiteral;
  if (name == "top_anchored") return ComparisonMode::kTopAnchored;
  throw ValidationError("unknown comparison mode '" + std::string(name) +
                        "' (expected literal or top_anchored)");
}

std::vector<size_t> ComparisonRounds(ComparisonMode mode, size_t pool_size) {
  std::vector<size_t> rounds;
  if (pool_size < 2) return rounds;
  const size_t first = mode == ComparisonMode::kLiteral ? 1 : 0;
  for (size_t m = first; m < first + pool_size - 1; ++m) rounds.push_back(m);
  return rounds;
}

double MeanLogProb(std::span<const double> token_logprobs) {
  if (token_logprobs.empty()) {
    throw ValidationError("policy score of an empty response");
  }
  double sum = 0.0;
  for (double lp : token_logprobs) sum += lp;
  return sum / static_cast<double>(token_logprobs.size());
}

double PerceptualAlignmentLoss(std::span<const double> token_logprobs) {
  if (token_logprobs.empty()) {
    throw ValidationError("alignment loss of an empty response");
  }
  return -MeanLogProb(token_logprobs);
}

double RewardWeight(std::span<const ApdfMatrix> singles, size_t positive) {
  if (singles.empty()) throw ValidationError("no single-attribute matrices");
  const size_t m = singles.front().size();
  if (positive >= m) throw ValidationError("positive index out of range");
  double w = 1.0;
  for (const ApdfMatrix& mat : singles) {
    if (mat.size() != m) throw ValidationError("APDF shape mismatch");
    const auto row = mat.row(positive);
    w *= *std::max_element(row.begin(), row.end());
  }
  return w;
}

std::vector<double> PenaltyWeights(const ApdfMatrix& multi,
                                   const DynamicRanking& ranking,
                                   size_t positive) {
  const size_t m = multi.size();
  if (positive >= m) throw ValidationError("positive index out of range");
  if (!IsPermutation(ranking.order, m)) {
    throw ValidationError("dynamic ranking is not a permutation of the pool");
  }
  std::vector<double> sorted;
  sorted.reserve(m - 1);
  for (size_t j = 0; j < m; ++j) {
    if (j != positive) sorted.push_back(multi(positive, j));
  }
  std::sort(sorted.begin(), sorted.end());

  std::vector<double> penalties(m, 0.0);
  size_t next = 0;
  for (size_t c : ranking.order) {
    if (c == positive) continue;
    penalties[c] = sorted[next++];
  }
  return penalties;
}

ComparisonWeights RoundWeights(std::span<const ApdfMatrix> singles,
                               const ApdfMatrix& multi,
                               const DynamicRanking& ranking, size_t position) {
  ComparisonWeights w;
  w.positive = ranking.at(position);
  w.reward = RewardWeight(singles, w.positive);
  w.penalties = PenaltyWeights(multi, ranking, w.positive);
  return w;
}

ComparisonResult PerceptualComparison(std::span<const double> scores,
                                      const DynamicRanking& ranking,
                                      std::span<const ApdfMatrix> singles,
                                      const ApdfMatrix& multi,
                                      ComparisonMode mode) {
  const size_t m = scores.size();
  if (m < 2) throw ValidationError("comparison loss needs at least 2 candidates");
  if (multi.size() != m || ranking.size() != m) {
    throw ValidationError("score, ranking and matrix sizes disagree");
  }
  for (double s : scores) {
    if (std::isnan(s)) throw ValidationError("NaN policy score");
  }

  ComparisonResult result;
  result.grad_scores.assign(m, 0.0);
  std::vector<double> logits(m);
  std::vector<bool> active(m);
  for (size_t position : ComparisonRounds(mode, m)) {
    const ComparisonWeights w = RoundWeights(singles, multi, ranking, position);
    if (!(w.reward > 0.0)) {
      throw DegenerateInputError(
          "reward weight is zero in comparison round " +
          std::to_string(position) + " (positive candidate " +
          std::to_string(w.positive) + ")");
    }
    // log tau = pi_s + log W; zero-weight negatives drop out of the sum.
    std::vector<double> live;
    for (size_t i = 0; i < m; ++i) {
      const double weight = i == w.positive ? w.reward : w.penalties[i];
      active[i] = weight > 0.0;
      logits[i] = active[i] ? scores[i] + std::log(weight)
                            : -std::numeric_limits<double>::infinity();
      if (active[i]) live.push_back(logits[i]);
    }
    const double lse = LogSumExp(live);
    result.loss += lse - logits[w.positive];
    for (size_t i = 0; i < m; ++i) {
      if (active[i]) result.grad_scores[i] += std::exp(logits[i] - lse);
    }
    result.grad_scores[w.positive] -= 1.0;
  }
  return result;
}

double PerceptualComparisonLoss(std::span<const double> scores,
                                const DynamicRanking& ranking,
                                std::span<const ApdfMatrix> singles,
                                const ApdfMatrix& multi, ComparisonMode mode) {
  return PerceptualComparison(scores, ranking, singles, multi, mode).loss;
}

LossBreakdown TotalLoss(double l_pc, double l_pa, double alpha) {
  if (!(alpha >= 0.0)) throw ValidationError("alpha must be >= 0");
  return {.l_pa = l_pa, .l_pc = l_pc, .alpha = alpha, .total = l_pc + alpha * l_pa};
}

double DpoPairLoss(double theta_w, double theta_l, double ref_w, double ref_l,
                   double beta) {
  if (!(beta > 0.0)) throw ValidationError("beta must be > 0");
  const double margin = beta * ((theta_w - ref_w) - (theta_l - ref_l));
  return SoftplusNeg(margin);
}

double PlackettLuceLoss(std::span<const double> theta,
                        std::span<const double> ref,
                        std::span<const size_t> ranking, double beta) {
  if (theta.size() != ref.size() || theta.size() != ranking.size()) {
    throw ValidationError("Plackett-Luce inputs differ in length");
  }
  if (theta.size() < 2) throw ValidationError("Plackett-Luce needs M >= 2");
  if (!(beta > 0.0)) throw ValidationError("beta must be > 0");
  if (!IsPermutation(ranking, theta.size())) {
    throw ValidationError("Plackett-Luce ranking is not a permutation");
  }
  std::vector<double> rewards;
  for (size_t c : ranking) rewards.push_back(beta * (theta[c] - ref[c]));
  double loss = 0.0;
  for (size_t k = 0; k + 1 < rewards.size(); ++k) {
    const std::span<const double> tail(rewards.begin() + k, rewards.end());
    loss += LogSumExp(tail) - rewards[k];
  }
  return loss;
}

}  // namespace apdfrank
