// apdfrank: command-line entry point for the corpus, ranking, loss, training
// and evaluation pipeline.
//
// Every subcommand writes its artifact plus a run manifest (config echo,
// SHA-256 of every input, tool version). Failures print one JSON object on
// stderr and exit with the error category's code.

#include <openssl/evp.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "apdfrank/apdf.h"
#include "apdfrank/corpus.h"
#include "apdfrank/embed.h"
#include "apdfrank/error.h"
#include "apdfrank/eval.h"
#include "apdfrank/objective.h"
#include "apdfrank/pipeline.h"
#include "apdfrank/policy.h"
#include "apdfrank/ranking.h"
#include "apdfrank/synthetic.h"

namespace {

using namespace apdfrank;
using Json = nlohmann::ordered_json;

constexpr int kInternalExit = 1;

// ---------------------------------------------------------------- helpers

std::string Sha256File(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read input for digest: " + path);
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    EVP_DigestUpdate(ctx, buf.data(), static_cast<size_t>(in.gcount()));
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, md, &len);
  EVP_MD_CTX_free(ctx);
  std::string hex;
  char byte[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(byte, sizeof(byte), "%02x", md[i]);
    hex += byte;
  }
  return hex;
}

std::ofstream OpenOutput(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write output: " + path);
  return out;
}

std::string Dump(const Json& j) {
  return j.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
}

void ForEachJsonLine(const std::string& path,
                     const std::function<void(const nlohmann::json&, size_t)>& fn) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read input: " + path);
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(path + " line " + std::to_string(line_no) +
                            ": invalid JSON (" + e.what() + ")");
    }
    try {
      fn(j, line_no);
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(path + " line " + std::to_string(line_no) +
                            ": " + e.what());
    }
  }
}

// Run manifest shared by all subcommands.
class Manifest {
 public:
  Manifest(std::string subcommand, const CLI::App* sub, size_t workers)
      : subcommand_(std::move(subcommand)) {
    config_["workers"] = workers;
    for (const CLI::Option* opt : sub->get_options()) {
      if (opt == sub->get_help_ptr()) continue;
      const std::string key = opt->get_single_name();
      const auto& results = opt->results();
      if (results.empty()) {
        config_[key] = opt->get_default_str();
      } else if (results.size() == 1) {
        config_[key] = results.front();
      } else {
        config_[key] = results;
      }
    }
  }

  void AddInput(const std::string& path) {
    inputs_.push_back({{"path", path}, {"sha256", Sha256File(path)}});
  }
  void AddOutput(const std::string& path) { outputs_.push_back(path); }
  Json& extra() { return extra_; }

  void Write(const std::string& path) const {
    Json j;
    j["tool"] = "apdfrank";
    j["version"] = APDFRANK_VERSION;
    j["subcommand"] = subcommand_;
    j["config"] = config_;
    j["inputs"] = inputs_;
    j["outputs"] = outputs_;
    for (const auto& [k, v] : extra_.items()) j[k] = v;
    auto out = OpenOutput(path);
    out << j.dump(2) << "\n";
  }

 private:
  std::string subcommand_;
  Json config_ = Json::object();
  Json inputs_ = Json::array();
  std::vector<std::string> outputs_;
  Json extra_ = Json::object();
};

std::string ManifestPath(const std::string& requested, const std::string& output) {
  return requested.empty() ? output + ".manifest.json" : requested;
}

// ------------------------------------------------------- shared options

struct EmbedOptions {
  size_t dim = 256;
  size_t ngram = 3;
  std::string embeddings_path;
};

void AddEmbedOptions(CLI::App* sub, EmbedOptions& o) {
  sub->add_option("--dim", o.dim, "Hashed embedder dimension")
      ->envname("APDFRANK_EMBED_DIM")
      ->check(CLI::Range(size_t{8}, size_t{1} << 20))
      ->capture_default_str();
  sub->add_option("--ngram", o.ngram, "Hashed embedder character n-gram size")
      ->check(CLI::Range(size_t{1}, size_t{64}))
      ->capture_default_str();
  sub->add_option("--embeddings", o.embeddings_path,
                  "External embeddings TSV (id<TAB>values); replaces the hashed embedder");
}

// Either hashed text embeddings or an external lookup table keyed by ids.
class EmbeddingSource {
 public:
  explicit EmbeddingSource(const EmbedOptions& o)
      : hashed_(o.dim, o.ngram) {
    if (!o.embeddings_path.empty()) {
      auto table = LoadExternalEmbeddings(o.embeddings_path);
      const size_t dim = table.empty() ? o.dim : table.begin()->second.dim();
      lookup_.emplace(std::move(table), dim);
    }
  }
  explicit EmbeddingSource(HashedNgramEmbedder hashed) : hashed_(hashed) {}

  RecordEmbeddings ForRecord(const QARecord& r) const {
    return lookup_ ? EmbedRecordById(r, *lookup_) : EmbedRecordText(r, hashed_);
  }
  EmbeddingVector ForGeneration(const std::string& record_id,
                                const std::string& text) const {
    return lookup_ ? lookup_->Embed(GenerationEmbeddingId(record_id))
                   : hashed_.Embed(text);
  }
  std::string name() const { return lookup_ ? lookup_->name() : hashed_.name(); }

 private:
  HashedNgramEmbedder hashed_;
  std::optional<LookupEmbedder> lookup_;
};

struct AnalysisFlags {
  double half_life_days = 365.0;
  std::string reference;
  std::string log_base = "e";
};

void AddAnalysisOptions(CLI::App* sub, AnalysisFlags& a) {
  sub->add_option("--decay-half-life-days", a.half_life_days,
                  "Popularity half-life in days")
      ->envname("APDFRANK_HALF_LIFE_DAYS")
      ->capture_default_str();
  sub->add_option("--decay-reference", a.reference,
                  "Reference time for popularity decay (enables decay)");
  sub->add_option("--log-base", a.log_base, "Rank discount log base: e, 2 or a number > 1")
      ->envname("APDFRANK_LOG_BASE")
      ->capture_default_str();
}

DecayConfig ResolveDecay(const AnalysisFlags& a) {
  DecayConfig d;
  if (!(a.half_life_days > 0.0) || !std::isfinite(a.half_life_days)) {
    throw ValidationError("--decay-half-life-days must be > 0");
  }
  d.half_life = std::chrono::milliseconds(
      static_cast<int64_t>(std::llround(a.half_life_days * 86400000.0)));
  if (!a.reference.empty()) {
    auto t = ParseTimestamp(a.reference);
    if (!t) throw ValidationError("bad --decay-reference timestamp: " + a.reference);
    d.reference_time = *t;
    d.enabled = true;
  }
  ValidateDecayConfig(d);
  return d;
}

AnalysisOptions ResolveAnalysis(const AnalysisFlags& a) {
  AnalysisOptions o;
  o.decay = ResolveDecay(a);
  if (a.log_base == "e") {
    o.log_base = kNaturalLogBase;
  } else {
    try {
      size_t used = 0;
      o.log_base = std::stod(a.log_base, &used);
      if (used != a.log_base.size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw ValidationError("bad --log-base: " + a.log_base);
    }
    if (!(o.log_base > 1.0) || !std::isfinite(o.log_base)) {
      throw ValidationError("--log-base must be > 1");
    }
  }
  return o;
}

std::vector<RecordAnalysis> AnalyzeAll(const std::vector<QARecord>& records,
                                       const EmbeddingSource& source,
                                       const AnalysisOptions& options,
                                       size_t workers) {
  std::vector<RecordAnalysis> out(records.size());
  ParallelFor(records.size(), workers, [&](size_t i) {
    out[i] = AnalyzeRecord(records[i], source.ForRecord(records[i]), options);
  });
  return out;
}

std::vector<size_t> SortedById(const std::vector<QARecord>& records) {
  std::vector<size_t> idx(records.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](size_t a, size_t b) {
    return records[a].question_id < records[b].question_id;
  });
  return idx;
}

void PutBreakdown(Json& o, const LossBreakdown& b) {
  o["l_pa"] = b.l_pa;
  o["l_pc"] = b.l_pc;
  o["alpha"] = b.alpha;
  o["total"] = b.total;
}

// ------------------------------------------------------------ subcommands

struct Common {
  size_t workers = DefaultWorkers();
  std::string manifest;
};

struct IngestArgs {
  std::string input, output, report, since;
  FilterConfig filter;
  bool keep_unaccepted = false;
  bool keep_without_code = false;
  AnalysisFlags analysis;
};

int RunIngest(const CLI::App* sub, const Common& common, const IngestArgs& a) {
  Manifest manifest("ingest", sub, common.workers);
  manifest.AddInput(a.input);
  FilterConfig cfg = a.filter;
  if (!a.since.empty()) {
    auto t = ParseTimestamp(a.since);
    if (!t) throw ValidationError("bad --since timestamp: " + a.since);
    cfg.since = *t;
  }
  cfg.require_code_block = false;
  const DecayConfig decay = ResolveDecay(a.analysis);

  ParseStats stats;
  std::vector<RawEntry> entries = ParseDump(a.input, &stats);
  Json stages;
  stages["parsed"] = entries.size();
  if (!a.keep_unaccepted) entries = FilterAccepted(std::move(entries));
  stages["accepted"] = entries.size();
  if (!a.keep_without_code) entries = FilterCodeBlock(std::move(entries));
  stages["code_block"] = entries.size();
  entries = CleanEntries(std::move(entries));
  stages["cleaned"] = entries.size();
  RejectionCounters counters;
  std::vector<QARecord> records = ApplyQualityFilters(entries, cfg, &counters);
  stages["quality"] = records.size();
  for (QARecord& r : records) r = AssignGoldRanking(std::move(r), decay);

  WriteRecords(a.output, records);
  manifest.AddOutput(a.output);
  if (!a.report.empty()) {
    auto out = OpenOutput(a.report);
    out << counters.Report();
    manifest.AddOutput(a.report);
  }
  manifest.extra()["stages"] = stages;
  manifest.extra()["parse"] = {{"rows", stats.rows},
                               {"questions", stats.questions},
                               {"answers", stats.answers},
                               {"skipped_rows", stats.skipped_rows},
                               {"orphan_answers", stats.orphan_answers}};
  manifest.extra()["rejections"] = counters.counts;
  manifest.Write(ManifestPath(common.manifest, a.output));
  for (const auto& w : stats.warnings) std::cerr << "warning: " << w << "\n";
  for (const auto& [k, v] : stages.items()) std::cout << "stage." << k << "=" << v << "\n";
  return 0;
}

struct EmbedArgs {
  std::string records, output, generations;
  EmbedOptions embed;
};

int RunEmbed(const CLI::App* sub, const Common& common, const EmbedArgs& a) {
  Manifest manifest("embed", sub, common.workers);
  manifest.AddInput(a.records);
  const auto records = ReadRecords(a.records);
  const HashedNgramEmbedder embedder(a.embed.dim, a.embed.ngram);
  std::vector<std::vector<std::pair<std::string, EmbeddingVector>>> slots(records.size());
  ParallelFor(records.size(), common.workers, [&](size_t i) {
    const QARecord& r = records[i];
    slots[i].emplace_back(QuestionEmbeddingId(r), embedder.Embed(r.question_text));
    for (size_t c = 0; c < r.pool_size(); ++c) {
      slots[i].emplace_back(CandidateEmbeddingId(r, c),
                            embedder.Embed(r.candidates[c].content));
    }
  });
  std::vector<std::pair<std::string, EmbeddingVector>> rows;
  for (auto& s : slots) rows.insert(rows.end(), s.begin(), s.end());
  if (!a.generations.empty()) {
    manifest.AddInput(a.generations);
    ForEachJsonLine(a.generations, [&](const nlohmann::json& j, size_t) {
      const std::string id = j.at("record_id").get<std::string>();
      rows.emplace_back(GenerationEmbeddingId(id),
                        embedder.Embed(j.at("text").get<std::string>()));
    });
  }
  WriteEmbeddings(a.output, rows);
  manifest.AddOutput(a.output);
  manifest.extra()["embedder"] = embedder.name();
  manifest.Write(ManifestPath(common.manifest, a.output));
  return 0;
}

struct RankArgs {
  std::string records, matrices, output;
  EmbedOptions embed;
  AnalysisFlags analysis;
};

int RunRank(const CLI::App* sub, const Common& common, const RankArgs& a) {
  Manifest manifest("rank", sub, common.workers);
  auto out = OpenOutput(a.output);
  if (!a.matrices.empty()) {
    manifest.AddInput(a.matrices);
    ForEachJsonLine(a.matrices, [&](const nlohmann::json& j, size_t line) {
      const auto rows = j.at("matrix").get<std::vector<std::vector<double>>>();
      ApdfMatrix m("multi", rows.size());
      for (size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != rows.size()) {
          throw ValidationError(a.matrices + " line " + std::to_string(line) +
                                ": matrix is not square");
        }
        for (size_t c = 0; c < rows.size(); ++c) m(r, c) = rows[r][c];
      }
      SemanticRank arank{j.at("rank_of").get<std::vector<size_t>>()};
      const DynamicRanking d = DynamicRank(m, arank);
      Json o;
      o["record_id"] = j.at("record_id").get<std::string>();
      o["order"] = d.order;
      out << Dump(o) << "\n";
    });
  } else {
    manifest.AddInput(a.records);
    if (!a.embed.embeddings_path.empty()) manifest.AddInput(a.embed.embeddings_path);
    const auto records = ReadRecords(a.records);
    const EmbeddingSource source(a.embed);
    const auto analyses =
        AnalyzeAll(records, source, ResolveAnalysis(a.analysis), common.workers);
    for (size_t i = 0; i < records.size(); ++i) {
      Json o;
      o["record_id"] = records[i].question_id;
      o["order"] = analyses[i].targets.ranking.order;
      o["semantic_order"] = analyses[i].arank.order();
      out << Dump(o) << "\n";
    }
    manifest.extra()["embedder"] = source.name();
  }
  out.close();
  manifest.AddOutput(a.output);
  manifest.Write(ManifestPath(common.manifest, a.output));
  return 0;
}

struct LossArgs {
  std::string records, logprobs, output, summary;
  double alpha = kDefaultAlpha;
  std::string mode = "literal";
  bool skip_degenerate = false;
  EmbedOptions embed;
  AnalysisFlags analysis;
};

int RunLoss(const CLI::App* sub, const Common& common, const LossArgs& a) {
  Manifest manifest("loss", sub, common.workers);
  manifest.AddInput(a.records);
  manifest.AddInput(a.logprobs);
  if (!a.embed.embeddings_path.empty()) manifest.AddInput(a.embed.embeddings_path);
  if (!(a.alpha >= 0.0) || !std::isfinite(a.alpha)) {
    throw ValidationError("--alpha must be >= 0");
  }
  const PolicyObjectiveConfig cfg{a.alpha, ParseComparisonMode(a.mode)};
  const auto records = ReadRecords(a.records);
  const LogProbTable table = LoadLogProbFile(a.logprobs);
  table.CheckCovers(records);
  const EmbeddingSource source(a.embed);
  const auto analyses =
      AnalyzeAll(records, source, ResolveAnalysis(a.analysis), common.workers);

  std::vector<std::optional<LossBreakdown>> losses(records.size());
  std::vector<std::string> failures(records.size());
  ParallelFor(records.size(), common.workers, [&](size_t i) {
    try {
      losses[i] = LossFromLogProbs(records[i], analyses[i].targets, table, cfg);
    } catch (const DegenerateInputError& e) {
      if (!a.skip_degenerate) {
        throw DegenerateInputError("record '" + records[i].question_id +
                                   "': " + e.what());
      }
      failures[i] = e.what();
    }
  });

  auto out = OpenOutput(a.output);
  double sum_total = 0.0, sum_pa = 0.0, sum_pc = 0.0;
  size_t n = 0, skipped = 0;
  for (size_t i : SortedById(records)) {
    if (!losses[i]) {
      ++skipped;
      std::cerr << "warning: skipped degenerate record '" << records[i].question_id
                << "': " << failures[i] << "\n";
      continue;
    }
    Json o;
    o["record_id"] = records[i].question_id;
    PutBreakdown(o, *losses[i]);
    o["mode"] = a.mode;
    out << Dump(o) << "\n";
    sum_total += losses[i]->total;
    sum_pa += losses[i]->l_pa;
    sum_pc += losses[i]->l_pc;
    ++n;
  }
  out.close();

  Json summary;
  summary["n_records"] = n;
  summary["skipped_degenerate"] = skipped;
  summary["mode"] = ComparisonModeName(cfg.mode);
  summary["alpha"] = a.alpha;
  summary["sum_total"] = sum_total;
  summary["mean_total"] = n ? sum_total / static_cast<double>(n) : 0.0;
  summary["mean_l_pa"] = n ? sum_pa / static_cast<double>(n) : 0.0;
  summary["mean_l_pc"] = n ? sum_pc / static_cast<double>(n) : 0.0;
  const std::string summary_path = a.summary.empty() ? a.output + ".summary.json" : a.summary;
  OpenOutput(summary_path) << summary.dump(2) << "\n";

  manifest.AddOutput(a.output);
  manifest.AddOutput(summary_path);
  manifest.extra()["embedder"] = source.name();
  manifest.Write(ManifestPath(common.manifest, a.output));
  std::cout << "n_records=" << n << "\nmean_total=" << summary["mean_total"] << "\n";
  return 0;
}

struct TrainArgs {
  std::string records, records_out, output, trace, generations, logprobs_out, checkpoint_dir,
      checkpoint_log;
  size_t synthetic = 0;
  uint64_t synthetic_seed = SyntheticConfig{}.seed;
  size_t epochs = 5;
  size_t checkpoint_every = 0;
  size_t gen_length = 32;
  ToyPolicyConfig policy;
  double alpha = kDefaultAlpha;
  std::string mode = "literal";
  EmbedOptions embed;
  AnalysisFlags analysis;
};

int RunTrain(const CLI::App* sub, const Common& common, const TrainArgs& a) {
  Manifest manifest("train-toy", sub, common.workers);
  if (a.records.empty() == (a.synthetic == 0)) {
    throw ValidationError("give exactly one of --records or --synthetic");
  }
  if (!(a.policy.learning_rate >= 0.0)) throw ValidationError("--lr must be >= 0");
  if (a.policy.buckets < 1) throw ValidationError("--buckets must be >= 1");
  if (!(a.alpha >= 0.0)) throw ValidationError("--alpha must be >= 0");
  const PolicyObjectiveConfig objective{a.alpha, ParseComparisonMode(a.mode)};

  std::vector<QARecord> records;
  std::optional<EmbeddingSource> source;
  if (a.synthetic > 0) {
    SyntheticConfig sc;
    sc.records = a.synthetic;
    sc.seed = a.synthetic_seed;
    records = MakeSyntheticSuite(sc).records;
    const bool custom = sub->get_option("--ngram")->count() > 0 ||
                        sub->get_option("--embeddings")->count() > 0;
    if (custom) {
      source.emplace(a.embed);
    } else {
      source.emplace(SyntheticEmbedder(sc));
    }
  } else {
    manifest.AddInput(a.records);
    records = ReadRecords(a.records);
    source.emplace(a.embed);
  }
  if (!a.embed.embeddings_path.empty()) manifest.AddInput(a.embed.embeddings_path);
  if (records.empty()) throw ValidationError("no records to train on");
  const auto analyses =
      AnalyzeAll(records, *source, ResolveAnalysis(a.analysis), common.workers);
  std::vector<RecordTargets> targets;
  for (const auto& an : analyses) targets.push_back(an.targets);

  std::optional<std::ofstream> ckpt_log;
  if (!a.checkpoint_log.empty()) ckpt_log.emplace(OpenOutput(a.checkpoint_log));
  if (!a.checkpoint_dir.empty()) std::filesystem::create_directories(a.checkpoint_dir);

  ToyPolicy policy(a.policy);
  TrainOptions options;
  options.epochs = a.epochs;
  options.objective = objective;
  options.checkpoint_every = a.checkpoint_every;
  options.on_checkpoint = [&](size_t step, const ToyPolicy& p) {
    if (!a.checkpoint_dir.empty()) {
      char name[32];
      std::snprintf(name, sizeof(name), "ckpt-%06zu.bin", step);
      p.Save((std::filesystem::path(a.checkpoint_dir) / name).string());
    }
    if (!ckpt_log) return;
    std::vector<double> totals(records.size());
    std::vector<EvalItem> items(records.size());
    ParallelFor(records.size(), common.workers, [&](size_t i) {
      totals[i] = EvaluateLoss(p, records[i], targets[i], objective).breakdown.total;
      const auto g = source->ForGeneration(
          records[i].question_id,
          p.Generate(records[i].question_text, a.gen_length));
      const auto emb = source->ForRecord(records[i]);
      items[i].record_id = records[i].question_id;
      items[i].gold_ranking = records[i].gold_ranking;
      for (const auto& c : emb.candidates) items[i].similarities.push_back(Cosine(g, c));
    });
    double mean = 0.0;
    for (size_t i : SortedById(records)) mean += totals[i];
    mean /= static_cast<double>(records.size());
    Json o;
    o["step"] = step;
    o["mean_total"] = mean;
    o["pref_hit@1"] = PrefHit(items, 1);
    *ckpt_log << Dump(o) << "\n";
  };
  const TrainResult result = Train(policy, records, targets, options);

  policy.Save(a.output);
  manifest.AddOutput(a.output);
  if (!a.trace.empty()) {
    auto out = OpenOutput(a.trace);
    for (const TrainStep& s : result.trace) {
      Json o;
      o["step"] = s.step;
      o["epoch"] = s.epoch;
      o["record_id"] = s.record_id;
      PutBreakdown(o, s.loss);
      out << Dump(o) << "\n";
    }
    manifest.AddOutput(a.trace);
  }
  if (!a.generations.empty()) {
    auto out = OpenOutput(a.generations);
    for (const QARecord& r : records) {
      Json o;
      o["record_id"] = r.question_id;
      o["text"] = policy.Generate(r.question_text, a.gen_length);
      out << Dump(o) << "\n";
    }
    manifest.AddOutput(a.generations);
  }
  if (!a.logprobs_out.empty()) {
    WriteLogProbFile(a.logprobs_out, ScoreRecords(policy, records));
    manifest.AddOutput(a.logprobs_out);
  }
  if (!a.records_out.empty()) {
    WriteRecords(a.records_out, records);
    manifest.AddOutput(a.records_out);
  }
  if (ckpt_log) manifest.AddOutput(a.checkpoint_log);
  manifest.extra()["embedder"] = source->name();
  manifest.extra()["epoch_mean_total"] = result.epoch_mean_total;
  manifest.Write(ManifestPath(common.manifest, a.output));
  for (size_t e = 0; e < result.epoch_mean_total.size(); ++e) {
    std::cout << "epoch." << e << ".mean_total=" << result.epoch_mean_total[e] << "\n";
  }
  return 0;
}

struct EvalArgs {
  std::string records, generations, output, text_output;
  std::vector<size_t> ks = {1, 2, 3};
  std::string normalizer = "half";
  EmbedOptions embed;
};

int RunEval(const CLI::App* sub, const Common& common, const EvalArgs& a) {
  Manifest manifest("eval", sub, common.workers);
  manifest.AddInput(a.records);
  manifest.AddInput(a.generations);
  if (!a.embed.embeddings_path.empty()) manifest.AddInput(a.embed.embeddings_path);
  const RecallNormalizer normalizer = ParseRecallNormalizer(a.normalizer);
  for (size_t k : a.ks) {
    if (k < 1) throw ValidationError("k values must be >= 1");
  }
  const auto records = ReadRecords(a.records);
  std::map<std::string, std::string> generations;
  ForEachJsonLine(a.generations, [&](const nlohmann::json& j, size_t line) {
    const std::string id = j.at("record_id").get<std::string>();
    if (!generations.emplace(id, j.at("text").get<std::string>()).second) {
      throw ValidationError(a.generations + " line " + std::to_string(line) +
                            ": duplicate record_id '" + id + "'");
    }
  });
  for (const QARecord& r : records) {
    if (!generations.contains(r.question_id)) {
      throw ValidationError("no generation for record '" + r.question_id + "'");
    }
  }

  const EmbeddingSource source(a.embed);
  std::vector<EvalItem> items(records.size());
  ParallelFor(records.size(), common.workers, [&](size_t i) {
    const QARecord& r = records[i];
    const auto g = source.ForGeneration(r.question_id, generations.at(r.question_id));
    const auto emb = source.ForRecord(r);
    items[i].record_id = r.question_id;
    items[i].gold_ranking = r.gold_ranking;
    for (const auto& c : emb.candidates) items[i].similarities.push_back(Cosine(g, c));
  });

  EvalReport report;
  for (size_t k : a.ks) {
    report.pref_hit[k] = PrefHit(items, k, &report.excluded);
    report.pref_recall[k] = PrefRecall(items, k, normalizer);
  }
  double bleu = 0.0, rouge = 0.0;
  size_t used = 0, safer = 0;
  bool pairwise = true;
  for (size_t i = 0; i < records.size(); ++i) {
    const QARecord& r = records[i];
    if (!r.gold_ranking) continue;
    const std::string& best = r.candidates[r.gold_ranking->front()].content;
    const std::string& gen = generations.at(r.question_id);
    bleu += Bleu(gen, best);
    rouge += RougeL(gen, best);
    if (r.pool_size() == 2) {
      safer += static_cast<size_t>(SaferHit(items[i].similarities, r.gold_ranking->front()));
    } else {
      pairwise = false;
    }
    ++used;
  }
  report.n_records = used;
  if (used > 0) {
    report.bleu = bleu / static_cast<double>(used);
    report.rouge_l = rouge / static_cast<double>(used);
    if (pairwise) report.safer_hit = static_cast<double>(safer) / static_cast<double>(used);
  }
  report.config["normalizer"] = std::string(RecallNormalizerName(normalizer));
  std::string ks;
  for (size_t k : a.ks) ks += (ks.empty() ? "" : ",") + std::to_string(k);
  report.config["k"] = ks;
  report.config["embedder"] = source.name();

  OpenOutput(a.output) << report.ToJson() << "\n";
  manifest.AddOutput(a.output);
  const std::string text_path = a.text_output.empty() ? a.output + ".txt" : a.text_output;
  OpenOutput(text_path) << report.ToText();
  manifest.AddOutput(text_path);
  manifest.Write(ManifestPath(common.manifest, a.output));
  std::cout << report.ToText();
  return 0;
}

struct HeatmapArgs {
  std::string records, record_id, matrix = "multi", output;
  EmbedOptions embed;
  AnalysisFlags analysis;
};

int RunHeatmap(const CLI::App* sub, const Common& common, const HeatmapArgs& a) {
  Manifest manifest("export-heatmap", sub, common.workers);
  manifest.AddInput(a.records);
  if (!a.embed.embeddings_path.empty()) manifest.AddInput(a.embed.embeddings_path);
  const auto records = ReadRecords(a.records);
  if (records.empty()) throw ValidationError("no records in " + a.records);
  const QARecord* record = &records.front();
  if (!a.record_id.empty()) {
    auto it = std::find_if(records.begin(), records.end(),
                           [&](const QARecord& r) { return r.question_id == a.record_id; });
    if (it == records.end()) throw ValidationError("unknown record id '" + a.record_id + "'");
    record = &*it;
  }
  const EmbeddingSource source(a.embed);
  const RecordAnalysis an =
      AnalyzeRecord(*record, source.ForRecord(*record), ResolveAnalysis(a.analysis));
  const ApdfMatrix* m = nullptr;
  if (a.matrix == "multi") {
    m = &an.targets.apdf.multi;
  } else {
    for (const auto& s : an.targets.apdf.singles) {
      if (s.attribute() == a.matrix) m = &s;
    }
  }
  if (m == nullptr) {
    throw ValidationError("unknown matrix '" + a.matrix +
                          "' (expected semantic, popularity or multi)");
  }
  auto out = OpenOutput(a.output);
  char buf[32];
  for (size_t r = 0; r < m->size(); ++r) {
    for (size_t c = 0; c < m->size(); ++c) {
      std::snprintf(buf, sizeof(buf), "%.17g", (*m)(r, c));
      out << (c ? "," : "") << buf;
    }
    out << "\n";
  }
  out.close();
  manifest.AddOutput(a.output);
  manifest.extra()["record_id"] = record->question_id;
  manifest.Write(ManifestPath(common.manifest, a.output));
  return 0;
}

void PrintError(std::string_view category, int code, const std::string& message) {
  Json j;
  j["error"] = {{"category", category}, {"exit_code", code}, {"message", message}};
  std::cerr << Dump(j) << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-attribute preference ranking toolkit"};
  app.set_version_flag("--version", APDFRANK_VERSION);
  app.require_subcommand(1);
  app.fallthrough();

  Common common;
  app.add_option("--workers", common.workers, "Worker threads (default: hardware concurrency)")
      ->envname("APDFRANK_WORKERS")
      ->check(CLI::PositiveNumber);
  app.add_option("--manifest", common.manifest,
                 "Run-manifest path (default: <output>.manifest.json)");

  IngestArgs ingest;
  auto* ingest_cmd = app.add_subcommand("ingest", "Posts.xml dump -> filtered JSON-Lines records");
  ingest_cmd->add_option("--input", ingest.input, "Posts.xml dump")->required();
  ingest_cmd->add_option("--output", ingest.output, "Records JSON-Lines")->required();
  ingest_cmd->add_option("--report", ingest.report, "Rejection counters (key=value)");
  ingest_cmd->add_flag("--keep-unaccepted", ingest.keep_unaccepted,
                       "Skip the accepted-answer filter");
  ingest_cmd->add_flag("--keep-without-code", ingest.keep_without_code,
                       "Skip the code-block filter");
  ingest_cmd->add_option("--min-pool-size", ingest.filter.min_pool_size)->capture_default_str();
  ingest_cmd->add_option("--max-pool-size", ingest.filter.max_pool_size, "0 = no limit")
      ->capture_default_str();
  ingest_cmd->add_option("--min-vote-gap", ingest.filter.min_vote_gap)->capture_default_str();
  ingest_cmd->add_option("--min-votes-per-response", ingest.filter.min_votes_per_response)
      ->capture_default_str();
  ingest_cmd->add_option("--max-question-tokens", ingest.filter.max_question_tokens,
                         "0 = no limit")
      ->capture_default_str();
  ingest_cmd->add_option("--max-response-tokens", ingest.filter.max_response_tokens,
                         "0 = no limit")
      ->capture_default_str();
  ingest_cmd->add_option("--since", ingest.since, "Drop questions created before this time");
  AddAnalysisOptions(ingest_cmd, ingest.analysis);

  EmbedArgs embed;
  auto* embed_cmd = app.add_subcommand("embed", "Records -> hashed embeddings TSV");
  embed_cmd->add_option("--records", embed.records)->required();
  embed_cmd->add_option("--output", embed.output)->required();
  embed_cmd->add_option("--generations", embed.generations,
                        "Also embed generations (JSON-Lines record_id, text)");
  AddEmbedOptions(embed_cmd, embed.embed);

  RankArgs rank;
  auto* rank_cmd = app.add_subcommand("rank", "Dynamic ranking per record");
  auto* rank_records = rank_cmd->add_option("--records", rank.records);
  auto* rank_matrices = rank_cmd->add_option(
      "--matrices", rank.matrices,
      "JSON-Lines of precomputed {record_id, matrix, rank_of} instead of records");
  rank_records->excludes(rank_matrices);
  rank_cmd->add_option("--output", rank.output)->required();
  AddEmbedOptions(rank_cmd, rank.embed);
  AddAnalysisOptions(rank_cmd, rank.analysis);

  LossArgs loss;
  auto* loss_cmd = app.add_subcommand("loss", "Per-record losses from token log-probabilities");
  loss_cmd->add_option("--records", loss.records)->required();
  loss_cmd->add_option("--logprobs", loss.logprobs)->required();
  loss_cmd->add_option("--output", loss.output, "Per-record JSON-Lines")->required();
  loss_cmd->add_option("--summary", loss.summary, "Default: <output>.summary.json");
  loss_cmd->add_option("--alpha", loss.alpha)->envname("APDFRANK_ALPHA")->capture_default_str();
  loss_cmd->add_option("--mode", loss.mode, "literal or top_anchored")
      ->envname("APDFRANK_MODE")
      ->capture_default_str();
  loss_cmd->add_flag("--skip-degenerate", loss.skip_degenerate,
                     "Skip records whose reward weight is zero instead of failing");
  AddEmbedOptions(loss_cmd, loss.embed);
  AddAnalysisOptions(loss_cmd, loss.analysis);

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train-toy", "Train the byte bigram toy policy");
  train_cmd->add_option("--records", train.records);
  train_cmd->add_option("--synthetic", train.synthetic, "Generate N synthetic records instead");
  train_cmd->add_option("--synthetic-seed", train.synthetic_seed)->capture_default_str();
  train_cmd->add_option("--records-out", train.records_out,
                        "Write the training records (useful with --synthetic)");
  train_cmd->add_option("--output", train.output, "Policy checkpoint")->required();
  train_cmd->add_option("--trace", train.trace, "Per-step loss trace JSON-Lines");
  train_cmd->add_option("--generations", train.generations,
                        "Greedy generations of the final policy (JSON-Lines)");
  train_cmd->add_option("--logprobs-out", train.logprobs_out,
                        "Token log-probabilities of the final policy");
  train_cmd->add_option("--epochs", train.epochs)->capture_default_str();
  train_cmd->add_option("--lr", train.policy.learning_rate)->capture_default_str();
  train_cmd->add_option("--seed", train.policy.seed)
      ->envname("APDFRANK_SEED")
      ->capture_default_str();
  train_cmd->add_option("--buckets", train.policy.buckets)->capture_default_str();
  train_cmd->add_option("--init-scale", train.policy.init_scale)->capture_default_str();
  train_cmd->add_option("--alpha", train.alpha)->envname("APDFRANK_ALPHA")->capture_default_str();
  train_cmd->add_option("--mode", train.mode, "literal or top_anchored")
      ->envname("APDFRANK_MODE")
      ->capture_default_str();
  train_cmd->add_option("--checkpoint-every", train.checkpoint_every, "Steps; 0 disables")
      ->capture_default_str();
  train_cmd->add_option("--checkpoint-dir", train.checkpoint_dir);
  train_cmd->add_option("--checkpoint-log", train.checkpoint_log,
                        "JSON-Lines of mean loss and PrefHit@1 at each checkpoint");
  train_cmd->add_option("--gen-length", train.gen_length)->capture_default_str();
  AddEmbedOptions(train_cmd, train.embed);
  AddAnalysisOptions(train_cmd, train.analysis);

  EvalArgs eval;
  auto* eval_cmd = app.add_subcommand("eval", "Preference and accuracy metrics for generations");
  eval_cmd->add_option("--records", eval.records)->required();
  eval_cmd->add_option("--generations", eval.generations, "JSON-Lines record_id, text")
      ->required();
  eval_cmd->add_option("--output", eval.output, "EvalReport JSON")->required();
  eval_cmd->add_option("--text-output", eval.text_output, "Default: <output>.txt");
  eval_cmd->add_option("--k", eval.ks)->delimiter(',')->capture_default_str();
  eval_cmd->add_option("--normalizer", eval.normalizer, "half or by_k")
      ->capture_default_str();
  AddEmbedOptions(eval_cmd, eval.embed);

  HeatmapArgs heat;
  auto* heat_cmd = app.add_subcommand("export-heatmap", "One APDF matrix as headerless CSV");
  heat_cmd->add_option("--records", heat.records)->required();
  heat_cmd->add_option("--record-id", heat.record_id, "Default: first record");
  heat_cmd->add_option("--matrix", heat.matrix, "semantic, popularity or multi")
      ->capture_default_str();
  heat_cmd->add_option("--output", heat.output)->required();
  AddEmbedOptions(heat_cmd, heat.embed);
  AddAnalysisOptions(heat_cmd, heat.analysis);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    PrintError(CategoryName(ErrorCategory::kValidation),
               static_cast<int>(ErrorCategory::kValidation), e.what());
    return static_cast<int>(ErrorCategory::kValidation);
  }

  try {
    if (*ingest_cmd) return RunIngest(ingest_cmd, common, ingest);
    if (*embed_cmd) return RunEmbed(embed_cmd, common, embed);
    if (*rank_cmd) {
      if (rank.records.empty() && rank.matrices.empty()) {
        throw ValidationError("rank needs --records or --matrices");
      }
      return RunRank(rank_cmd, common, rank);
    }
    if (*loss_cmd) return RunLoss(loss_cmd, common, loss);
    if (*train_cmd) return RunTrain(train_cmd, common, train);
    if (*eval_cmd) return RunEval(eval_cmd, common, eval);
    if (*heat_cmd) return RunHeatmap(heat_cmd, common, heat);
  } catch (const Error& e) {
    const int code = static_cast<int>(e.category());
    PrintError(CategoryName(e.category()), code, e.what());
    return code;
  } catch (const std::filesystem::filesystem_error& e) {
    PrintError(CategoryName(ErrorCategory::kIo), static_cast<int>(ErrorCategory::kIo),
               e.what());
    return static_cast<int>(ErrorCategory::kIo);
  } catch (const std::exception& e) {
    PrintError("internal", kInternalExit, e.what());
    return kInternalExit;
  }
  return 0;
}
