#ifndef APDFRANK_OBJECTIVE_H_
#define APDFRANK_OBJECTIVE_H_

// Alignment losses over per-candidate policy scores.
//
// A policy score pi_s(i) is the mean token log-probability of candidate i.
// The comparison loss runs one softmax round per positive b taken from the
// dynamic ranking:
//
//   tau_r(b) = exp(pi_s(b)) * W^r      W^r  = prod_k max(row b of single_k)
//   tau_p(i) = exp(pi_s(i)) * W^p_i    W^p  = row b of the fused matrix,
//                                             sorted ascending, handed out in
//                                             dynamic-rank order
//   round    = -log(tau_r(b) / (sum_{i != b} tau_p(i) + tau_r(b)))
//
// The alignment loss is the NLL of the top dynamically-ranked candidate and
// the total is L_pc + alpha * L_pa.

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "apdfrank/apdf.h"
#include "apdfrank/ranking.h"

namespace apdfrank {

inline constexpr double kDefaultAlpha = 0.05;
inline constexpr double kDefaultDpoBeta = 0.1;

enum class ComparisonMode {
  // Positives are D(1) .. D(M-1).
  kLiteral,
  // Positives are D(0) .. D(M-2).
  kTopAnchored,
};

std::string_view ComparisonModeName(ComparisonMode mode);
ComparisonMode ParseComparisonMode(std::string_view name);

// Dynamic-rank positions that act as the positive, one per round.
std::vector<size_t> ComparisonRounds(ComparisonMode mode, size_t pool_size);

// Arithmetic mean of token log-probabilities. Throws on empty input.
double MeanLogProb(std::span<const double> token_logprobs);

// -mean(token_logprobs).
double PerceptualAlignmentLoss(std::span<const double> token_logprobs);

double RewardWeight(std::span<const ApdfMatrix> singles, size_t positive);

// Penalty per candidate, indexed by candidate; the positive's own slot is 0
// and unused.
std::vector<double> PenaltyWeights(const ApdfMatrix& multi,
                                   const DynamicRanking& ranking,
                                   size_t positive);

struct ComparisonWeights {
  size_t positive = 0;
  double reward = 0.0;
  std::vector<double> penalties;
};

ComparisonWeights RoundWeights(std::span<const ApdfMatrix> singles,
                               const ApdfMatrix& multi,
                               const DynamicRanking& ranking, size_t position);

struct ComparisonResult {
  double loss = 0.0;
  // d loss / d pi_s, one entry per candidate.
  std::vector<double> grad_scores;
};

// Throws DegenerateInputError when a round's reward weight is zero and
// ValidationError on NaN scores or shape mismatches.
ComparisonResult PerceptualComparison(std::span<const double> scores,
                                      const DynamicRanking& ranking,
                                      std::span<const ApdfMatrix> singles,
                                      const ApdfMatrix& multi,
                                      ComparisonMode mode);

double PerceptualComparisonLoss(std::span<const double> scores,
                                const DynamicRanking& ranking,
                                std::span<const ApdfMatrix> singles,
                                const ApdfMatrix& multi, ComparisonMode mode);

struct LossBreakdown {
  double l_pa = 0.0;
  double l_pc = 0.0;
  double alpha = kDefaultAlpha;
  double total = 0.0;
};

LossBreakdown TotalLoss(double l_pc, double l_pa, double alpha);

// -log sigmoid(beta * ((theta_w - ref_w) - (theta_l - ref_l))) on sequence
// log-probabilities.
double DpoPairLoss(double theta_w, double theta_l, double ref_w, double ref_l,
                   double beta = kDefaultDpoBeta);

// Negative log Plackett-Luce likelihood of `ranking` (best first) with
// rewards beta * (theta - ref).
double PlackettLuceLoss(std::span<const double> theta,
                        std::span<const double> ref,
                        std::span<const size_t> ranking,
                        double beta = kDefaultDpoBeta);

}  // namespace apdfrank

#endif  // APDFRANK_OBJECTIVE_H_
