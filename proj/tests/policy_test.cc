#include "apdfrank/policy.h"

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "apdfrank/error.h"
#include "apdfrank/synthetic.h"
#include "gradient_check.h"
#include "test_support.h"

namespace apdfrank {
namespace {

using testing::Fixture;

TEST(ToyPolicy, UniformScore) {
  const ToyPolicy policy;
  const auto lp = policy.Score("any question", "x");
  ASSERT_EQ(lp.size(), 1u);
  EXPECT_NEAR(lp[0], std::log(1.0 / 256.0), 1e-12);
  const auto longer = policy.Score("q", "hello");
  ASSERT_EQ(longer.size(), 5u);
  for (double v : longer) EXPECT_NEAR(v, -std::log(256.0), 1e-12);
}

TEST(ToyPolicy, ScoreIsDeterministicAndNonPositive) {
  ToyPolicyConfig cfg;
  cfg.init_scale = 0.5;
  const ToyPolicy a(cfg), b(cfg);
  EXPECT_EQ(a, b);
  const auto x = a.Score("question text", "response text");
  EXPECT_EQ(x, b.Score("question text", "response text"));
  for (double v : x) EXPECT_LE(v, 0.0);
  EXPECT_DOUBLE_EQ(MeanLogProb(x), std::accumulate(x.begin(), x.end(), 0.0) / x.size());
  EXPECT_THROW(a.Score("q", ""), ValidationError);
}

TEST(ToyPolicy, RowsAreDistributions) {
  ToyPolicyConfig cfg;
  cfg.init_scale = 1.0;
  const ToyPolicy p(cfg);
  const auto bias = p.QuestionBias(p.QuestionFeatures("some question"));
  std::vector<double> lsm;
  for (size_t ctx : {size_t{0}, size_t{65}, ToyPolicy::kBos}) {
    p.LogSoftmax(ctx, bias, lsm);
    double total = 0.0;
    for (double v : lsm) total += std::exp(v);
    EXPECT_NEAR(total, 1.0, 1e-9);
  }
}

TEST(ToyPolicy, Autoregressive) {
  ToyPolicyConfig cfg;
  cfg.init_scale = 0.3;
  const ToyPolicy p(cfg);
  const auto a = p.Score("q", "abcdef");
  const auto b = p.Score("q", "abcdzz");
  for (size_t k = 0; k < 4; ++k) EXPECT_EQ(a[k], b[k]);
  EXPECT_NE(a[4], b[4]);
  EXPECT_NE(a[5], b[5]);
}

TEST(ToyPolicy, QuestionConditioning) {
  ToyPolicyConfig cfg;
  cfg.init_scale = 0.3;
  const ToyPolicy p(cfg);
  EXPECT_NE(p.Score("aaaa", "hello"), p.Score("zzzz", "hello"));
  const auto f = p.QuestionFeatures("abca");
  EXPECT_NEAR(std::accumulate(f.begin(), f.end(), 0.0), 1.0, 1e-15);
  EXPECT_DOUBLE_EQ(f['a'], 0.5);
}

TEST(ToyPolicy, CheckpointRoundTrip) {
  testing::TempDir dir;
  ToyPolicyConfig cfg;
  cfg.init_scale = 0.2;
  cfg.buckets = 16;
  cfg.learning_rate = 0.25;
  const ToyPolicy p(cfg);
  p.Save(dir.File("p.bin"));
  EXPECT_EQ(ToyPolicy::Load(dir.File("p.bin")), p);
  testing::WriteText(dir.File("bad.bin"), "definitely not a checkpoint");
  EXPECT_THROW(ToyPolicy::Load(dir.File("bad.bin")), ValidationError);
  EXPECT_THROW(ToyPolicy::Load(dir.File("missing.bin")), IoError);
}

TEST(LossGradient, MatchesFiniteDifferences) {
  std::mt19937_64 rng(2024);
  for (auto mode : {ComparisonMode::kLiteral, ComparisonMode::kTopAnchored}) {
    const PolicyObjectiveConfig cfg{0.05, mode};
    for (int trial = 0; trial < 5; ++trial) {
      ToyPolicyConfig pc;
      pc.init_scale = 0.1;
      pc.seed = rng();
      pc.buckets = 32;
      const ToyPolicy policy(pc);
      const auto c = testing::RandomCheckCase(rng, 5, cfg);
      const auto coords = testing::SampleCoordinates(policy, c, cfg, rng, 60);
      EXPECT_LT(testing::MaxGradientError(policy, c, cfg, coords), 1e-4);
    }
  }
}

TEST(LossGradient, LinearInAlpha) {
  std::mt19937_64 rng(7);
  ToyPolicyConfig pc;
  pc.init_scale = 0.1;
  const ToyPolicy policy(pc);
  const auto c = testing::RandomCheckCase(rng, 4, {});
  const auto g0 = LossGradient(policy, c.record, c.targets, {0.0, ComparisonMode::kLiteral});
  const auto g1 = LossGradient(policy, c.record, c.targets, {1.0, ComparisonMode::kLiteral});
  const auto ga = LossGradient(policy, c.record, c.targets, {0.3, ComparisonMode::kLiteral});
  for (size_t p = 0; p < g0.size(); ++p) {
    EXPECT_NEAR(ga[p], g0[p] + 0.3 * (g1[p] - g0[p]), 1e-12);
  }
}

TEST(LossGradient, AlphaZeroIsComparisonGradientOnly) {
  std::mt19937_64 rng(9);
  ToyPolicyConfig pc;
  pc.init_scale = 0.1;
  ToyPolicy policy(pc);
  const auto c = testing::RandomCheckCase(rng, 3, {});
  const PolicyObjectiveConfig cfg{0.0, ComparisonMode::kLiteral};
  PolicyLoss loss;
  LossGradient(policy, c.record, c.targets, cfg, &loss);
  EXPECT_EQ(loss.breakdown.total, loss.breakdown.l_pc);
  EXPECT_GT(loss.breakdown.l_pa, 0.0);
}

TEST(LossGradient, VanishesAtConstructedOptimum) {
  QARecord r;
  r.question_id = "opt";
  r.question_text = "q";
  r.candidates = {{.id = "good", .content = "a", .votes = 10},
                  {.id = "bad", .content = "b", .votes = 1}};
  RecordTargets t;
  const std::vector<double> phi = {0.9, 0.1};
  const std::vector<double> pop = {10.0, 1.0};
  t.apdf = BuildCodeApdf(phi, pop);
  t.ranking = DynamicRanking{{0, 1}};
  ToyPolicy policy;
  policy.params()[policy.TransitionIndex(ToyPolicy::kBos, 'a')] = 60.0;
  const PolicyObjectiveConfig cfg{0.05, ComparisonMode::kTopAnchored};
  PolicyLoss loss;
  const auto g = LossGradient(policy, r, t, cfg, &loss);
  double norm = 0.0;
  for (double v : g) norm = std::max(norm, std::abs(v));
  EXPECT_LT(norm, 1e-12);
  EXPECT_LT(loss.breakdown.total, 1e-12);
}

struct SyntheticFixture {
  std::vector<QARecord> records;
  std::vector<RecordTargets> targets;
};

SyntheticFixture SmallSuite() {
  SyntheticConfig sc;
  sc.records = 40;
  const auto suite = MakeSyntheticSuite(sc);
  const auto embedder = SyntheticEmbedder(sc);
  SyntheticFixture f;
  f.records = suite.records;
  for (const auto& r : f.records) {
    f.targets.push_back(AnalyzeRecord(r, EmbedRecordText(r, embedder), {}).targets);
  }
  return f;
}

double MeanTotal(const ToyPolicy& p, const SyntheticFixture& f, const PolicyObjectiveConfig& cfg) {
  double s = 0.0;
  for (size_t i = 0; i < f.records.size(); ++i) {
    s += EvaluateLoss(p, f.records[i], f.targets[i], cfg).breakdown.total;
  }
  return s / static_cast<double>(f.records.size());
}

TEST(Train, OneEpochLowersLoss) {
  const auto f = SmallSuite();
  for (auto mode : {ComparisonMode::kLiteral, ComparisonMode::kTopAnchored}) {
    ToyPolicy p;
    TrainOptions opt;
    opt.objective.mode = mode;
    const double before = MeanTotal(p, f, opt.objective);
    const TrainResult res = Train(p, f.records, f.targets, opt);
    ASSERT_EQ(res.trace.size(), f.records.size());
    for (const auto& s : res.trace) EXPECT_TRUE(std::isfinite(s.loss.total));
    EXPECT_LT(MeanTotal(p, f, opt.objective), before);
  }
}

TEST(Train, ZeroLearningRateIsIdentity) {
  const auto f = SmallSuite();
  ToyPolicyConfig pc;
  pc.learning_rate = 0.0;
  pc.init_scale = 0.1;
  ToyPolicy p(pc);
  const ToyPolicy before = p;
  TrainOptions opt;
  opt.epochs = 2;
  Train(p, f.records, f.targets, opt);
  EXPECT_EQ(p, before);
}

TEST(Train, BitReproducibleAndOrderedById) {
  auto f = SmallSuite();
  ToyPolicy a, b;
  TrainOptions opt;
  opt.epochs = 2;
  size_t checkpoints = 0;
  opt.checkpoint_every = 10;
  opt.on_checkpoint = [&](size_t, const ToyPolicy&) { ++checkpoints; };
  const auto ra = Train(a, f.records, f.targets, opt);
  std::reverse(f.records.begin(), f.records.end());
  std::reverse(f.targets.begin(), f.targets.end());
  const auto rb = Train(b, f.records, f.targets, opt);
  EXPECT_EQ(a, b);
  EXPECT_EQ(checkpoints, 2 * (2 * f.records.size() / 10));
  ASSERT_EQ(ra.trace.size(), rb.trace.size());
  for (size_t i = 0; i < ra.trace.size(); ++i) {
    EXPECT_EQ(ra.trace[i].record_id, rb.trace[i].record_id);
    EXPECT_EQ(ra.trace[i].loss.total, rb.trace[i].loss.total);
  }
  EXPECT_TRUE(std::is_sorted(ra.trace.begin(), ra.trace.begin() + f.records.size(),
                             [](const TrainStep& x, const TrainStep& y) {
                               return x.record_id < y.record_id;
                             }));
}

TEST(Train, RejectsEmptyInput) {
  ToyPolicy p;
  EXPECT_THROW(Train(p, {}, {}, {}), ValidationError);
}

TEST(LogProbTable, Validation) {
  LogProbTable t;
  EXPECT_THROW(t.Set("r", "c", {0.5}), ValidationError);
  EXPECT_THROW(t.Set("r", "c", {}), ValidationError);
  EXPECT_THROW(t.Set("r", "c", {-INFINITY}), ValidationError);
  t.Set("r", "c", {-0.1, 0.0});
  EXPECT_TRUE(t.Contains("r", "c"));
  EXPECT_THROW(t.Get("r", "missing"), ValidationError);
}

TEST(LogProbTable, FixtureLoads) {
  const LogProbTable t = LoadLogProbFile(Fixture("logprobs_three.jsonl"));
  EXPECT_EQ(t.size(), 3u * 2u);
  EXPECT_EQ(t.Get("q2", "a"), (std::vector<double>{-0.5, -1.25}));
}

TEST(LogProbTable, RoundTripAndCoverage) {
  testing::TempDir dir;
  ToyPolicyConfig cfg;
  cfg.init_scale = 0.2;
  const ToyPolicy p(cfg);
  const auto f = SmallSuite();
  const LogProbTable t = ScoreRecords(p, f.records);
  EXPECT_EQ(t.size(), f.records.size() * 5);
  t.CheckCovers(f.records);
  WriteLogProbFile(dir.File("lp.jsonl"), t);
  EXPECT_EQ(LoadLogProbFile(dir.File("lp.jsonl")), t);

  QARecord extra = f.records.front();
  extra.candidates.push_back({.id = "ghost", .content = "boo"});
  try {
    t.CheckCovers({extra});
    FAIL() << "expected a coverage error";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("ghost"), std::string::npos);
  }
}

TEST(LogProbTable, BadFiles) {
  testing::TempDir dir;
  testing::WriteText(dir.File("pos.jsonl"),
                     "{\"record_id\":\"r\",\"candidate_id\":\"c\",\"logprobs\":[0.5]}\n");
  EXPECT_THROW(LoadLogProbFile(dir.File("pos.jsonl")), ValidationError);
  EXPECT_THROW(LoadLogProbFile(dir.File("none.jsonl")), IoError);
}

}  // namespace
}  // namespace apdfrank
