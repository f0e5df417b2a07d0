#include "apdfrank/corpus.h"

#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <set>

#include "apdfrank/error.h"
#include "test_support.h"

namespace apdfrank {
namespace {

using testing::Fixture;

Timestamp T(const char* s) { return *ParseTimestamp(s); }

std::vector<std::string> Ids(const std::vector<RawEntry>& entries) {
  std::vector<std::string> ids;
  for (const auto& e : entries) ids.push_back(e.question_id);
  return ids;
}

TEST(Timestamp, ParseAndFormat) {
  const Timestamp t = T("2023-03-01T10:00:00.250");
  EXPECT_EQ(FormatTimestamp(t), "2023-03-01T10:00:00.250Z");
  EXPECT_EQ(T("2023-03-01T10:00:00.25Z"), t);
  EXPECT_EQ(T("2023-03-01 10:00:00.250"), t);
  EXPECT_EQ(*ParseTimestamp(FormatTimestamp(t)), t);
  EXPECT_FALSE(ParseTimestamp("2023-13-01T10:00:00"));
  EXPECT_FALSE(ParseTimestamp("yesterday"));
}

TEST(ParseDump, TwoQuestionsFiveAnswers) {
  ParseStats stats;
  const auto entries = ParseDump(Fixture("two_questions.xml"), &stats);
  ASSERT_EQ(entries.size(), 2u);
  EXPECT_EQ(entries[0].question_id, "1");
  EXPECT_EQ(entries[0].answers.size(), 3u);
  EXPECT_EQ(entries[1].answers.size(), 2u);
  EXPECT_EQ(entries[0].accepted_answer_id, "3");
  EXPECT_TRUE(entries[0].has_code_block);
  EXPECT_FALSE(entries[1].has_code_block);
  EXPECT_EQ(entries[1].answers[1].score, -1);
  EXPECT_EQ(stats.questions, 2u);
  EXPECT_EQ(stats.answers, 5u);
  EXPECT_EQ(stats.skipped_rows, 0u);
  EXPECT_TRUE(stats.warnings.empty());
}

TEST(ParseDump, EmptyFile) {
  ParseStats stats;
  EXPECT_TRUE(ParseDump(Fixture("empty.xml"), &stats).empty());
  EXPECT_TRUE(stats.warnings.empty());
  EXPECT_TRUE(ParseDumpString("  \n").empty());
}

TEST(ParseDump, MissingCreationDateSkipsRow) {
  ParseStats stats;
  const auto entries = ParseDump(Fixture("missing_creation_date.xml"), &stats);
  ASSERT_EQ(entries.size(), 1u);
  EXPECT_EQ(entries[0].answers.size(), 2u);
  EXPECT_EQ(stats.skipped_rows, 1u);
  ASSERT_EQ(stats.warnings.size(), 1u);
  EXPECT_NE(stats.warnings[0].find("CreationDate"), std::string::npos);
  EXPECT_NE(stats.warnings[0].find("line 5"), std::string::npos) << stats.warnings[0];
}

TEST(ParseDump, MalformedXmlReportsLine) {
  try {
    ParseDump(Fixture("malformed.xml"));
    FAIL() << "expected a parse error";
  } catch (const ValidationError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("malformed XML"), std::string::npos) << msg;
    EXPECT_NE(msg.find("malformed.xml:5:"), std::string::npos) << msg;
  }
}

TEST(ParseDump, MissingFile) {
  EXPECT_THROW(ParseDump(Fixture("no_such_dump.xml")), IoError);
}

TEST(ParseDump, OrphansAndOtherPostTypes) {
  ParseStats stats;
  const auto entries = ParseDumpString(
      R"(<posts>
  <row Id="1" PostTypeId="1" CreationDate="2023-01-01T00:00:00" Score="0" Body="q" />
  <row Id="2" PostTypeId="2" ParentId="9" CreationDate="2023-01-01T00:00:00" Score="0" Body="a" />
  <row Id="3" PostTypeId="5" CreationDate="2023-01-01T00:00:00" Score="0" Body="wiki" />
</posts>)",
      &stats);
  ASSERT_EQ(entries.size(), 1u);
  EXPECT_TRUE(entries[0].answers.empty());
  EXPECT_EQ(stats.orphan_answers, 1u);
  EXPECT_EQ(stats.skipped_rows, 0u);
}

TEST(Filters, AcceptedAndCodeCounts) {
  const auto entries = ParseDump(Fixture("filter_ten.xml"));
  ASSERT_EQ(entries.size(), 10u);
  EXPECT_EQ(FilterAccepted(entries).size(), 6u);
  EXPECT_EQ(FilterCodeBlock(entries).size(), 4u);
  for (const auto& e : FilterAccepted(entries)) {
    EXPECT_EQ(std::count_if(e.answers.begin(), e.answers.end(),
                            [&](const RawAnswer& a) { return a.id == *e.accepted_answer_id; }),
              1);
  }
}

TEST(Filters, MonotoneAndOrderIndependent) {
  const auto entries = ParseDump(Fixture("filter_ten.xml"));
  const auto all = Ids(entries);
  const std::set<std::string> all_set(all.begin(), all.end());
  const auto ac = Ids(FilterCodeBlock(FilterAccepted(entries)));
  const auto ca = Ids(FilterAccepted(FilterCodeBlock(entries)));
  EXPECT_EQ(ac, ca);
  EXPECT_EQ(ac, (std::vector<std::string>{"1", "4"}));
  for (const auto& id : ac) EXPECT_TRUE(all_set.contains(id));
}

TEST(Filters, CodeBlockDetector) {
  EXPECT_TRUE(ContainsCodeBlock("<p>see</p><pre><code>x</code></pre>"));
  EXPECT_TRUE(ContainsCodeBlock("inline <CODE>y</CODE>"));
  EXPECT_TRUE(ContainsCodeBlock("```\nfenced\n```"));
  EXPECT_FALSE(ContainsCodeBlock("<p>just prose</p>"));
}

TEST(CleanHtml, Examples) {
  EXPECT_EQ(CleanHtml("<p>hi</p>"), "hi");
  EXPECT_EQ(CleanHtml(""), "");
  EXPECT_EQ(CleanHtml("<pre><code>x&lt;1</code></pre>"), "x<1");
}

TEST(CleanHtml, EntitiesAndWhitespace) {
  EXPECT_EQ(CleanHtml("a &amp; b &quot;c&quot; &#39;d&#39; &#x41;"), "a & b \"c\" 'd' A");
  EXPECT_EQ(CleanHtml("<p>one   two\t three</p>"), "one two three");
  EXPECT_EQ(CleanHtml("<p>first</p><p>second</p>"), "first\n\nsecond");
  EXPECT_EQ(CleanHtml("x &unknown; y"), "x &unknown; y");
  EXPECT_EQ(CleanHtml("<!-- note -->kept"), "kept");
}

TEST(CleanHtml, UnbalancedTags) {
  EXPECT_EQ(CleanHtml("a < b and <b>bold"), "a < b and bold");
  EXPECT_EQ(CleanHtml("trailing <"), "trailing <");
  EXPECT_EQ(CleanHtml("</div>text<span"), "text<span");
}

TEST(CleanHtml, CodeKeptVerbatim) {
  const std::string code = "int main() {\n    return  1 &lt;&lt; 2;\t// x\n}\n";
  const std::string expected = "int main() {\n    return  1 << 2;\t// x\n}\n";
  const std::string cleaned =
      CleanHtml("<p>Look   at:</p>\n\n<pre><code>" + code + "</code></pre><p>done</p>");
  EXPECT_NE(cleaned.find(expected), std::string::npos) << cleaned;
  EXPECT_EQ(cleaned.rfind("Look at:", 0), 0u);
  EXPECT_EQ(CleanHtml("use <code>a  =  b</code> here"), "use a  =  b here");
}

TEST(CleanEntries, DropsEmptyAnswers) {
  auto entries = ParseDumpString(R"(<posts>
  <row Id="1" PostTypeId="1" CreationDate="2023-01-01T00:00:00" Score="0" Title="T &amp;amp; U" Body="&lt;p&gt;body&lt;/p&gt;" />
  <row Id="2" PostTypeId="2" ParentId="1" CreationDate="2023-01-01T00:00:00" Score="0" Body="&lt;p&gt; &lt;/p&gt;" />
  <row Id="3" PostTypeId="2" ParentId="1" CreationDate="2023-01-01T00:00:00" Score="0" Body="&lt;b&gt;ok&lt;/b&gt;" />
</posts>)");
  entries = CleanEntries(std::move(entries));
  ASSERT_EQ(entries.size(), 1u);
  EXPECT_EQ(entries[0].title, "T & U");
  EXPECT_EQ(entries[0].body, "body");
  ASSERT_EQ(entries[0].answers.size(), 1u);
  EXPECT_EQ(entries[0].answers[0].body, "ok");
}

RawEntry Entry(const std::string& id, std::vector<int64_t> votes) {
  RawEntry e;
  e.question_id = id;
  e.title = "title " + id;
  e.body = "body text";
  e.created_at = T("2023-01-01T00:00:00");
  for (size_t i = 0; i < votes.size(); ++i) {
    e.answers.push_back({.id = id + "-" + std::to_string(i),
                         .body = "answer " + std::to_string(i),
                         .score = votes[i],
                         .created_at = e.created_at + std::chrono::hours(i + 1)});
  }
  return e;
}

TEST(QualityFilters, PoolSizeAndVoteGap) {
  FilterConfig cfg;
  cfg.min_pool_size = 3;
  RejectionCounters counters;
  EXPECT_TRUE(ApplyQualityFilters({Entry("a", {1, 2})}, cfg, &counters).empty());
  EXPECT_EQ(counters.counts["min_pool_size"], 1u);

  FilterConfig gap;
  gap.min_vote_gap = 5;
  EXPECT_EQ(ApplyQualityFilters({Entry("b", {10, 2})}, gap).size(), 1u);
  EXPECT_TRUE(ApplyQualityFilters({Entry("c", {10, 7})}, gap).empty());
}

TEST(QualityFilters, AllZeroIsIdentity) {
  FilterConfig zero;
  zero.min_pool_size = 0;
  const std::vector<RawEntry> in = {Entry("a", {1}), Entry("b", {3, 3}), Entry("c", {0, 9, 4})};
  const auto out = ApplyQualityFilters(in, zero);
  ASSERT_EQ(out.size(), 3u);
  for (size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(out[i].question_id, in[i].question_id);
    EXPECT_EQ(out[i].pool_size(), in[i].answers.size());
  }
  EXPECT_EQ(out[0].question_text, "title a\n\nbody text");
}

TEST(QualityFilters, TokenLimitsSinceAndVotes) {
  FilterConfig cfg;
  cfg.max_question_tokens = 3;
  EXPECT_EQ(ApplyQualityFilters({Entry("a", {1, 2})}, cfg).size(), 0u);  // 4 tokens
  cfg.max_question_tokens = 4;
  EXPECT_EQ(ApplyQualityFilters({Entry("a", {1, 2})}, cfg).size(), 1u);
  cfg.max_response_tokens = 1;
  EXPECT_EQ(ApplyQualityFilters({Entry("a", {1, 2})}, cfg).size(), 0u);

  FilterConfig since;
  since.since = T("2023-06-01T00:00:00");
  EXPECT_TRUE(ApplyQualityFilters({Entry("a", {1, 2})}, since).empty());

  FilterConfig votes;
  votes.min_votes_per_response = 2;
  EXPECT_TRUE(ApplyQualityFilters({Entry("a", {1, 5})}, votes).empty());
  EXPECT_EQ(ApplyQualityFilters({Entry("a", {2, 5})}, votes).size(), 1u);
}

TEST(QualityFilters, NegativeScoresClampAndAcceptedFlag) {
  RawEntry e = Entry("a", {-3, 4});
  e.accepted_answer_id = "a-1";
  const auto out = ApplyQualityFilters({e}, {});
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].candidates[0].votes, 0);
  EXPECT_TRUE(out[0].candidates[1].accepted);
  EXPECT_FALSE(out[0].candidates[0].accepted);
}

TEST(QualityFilters, RejectsNegativeThresholds) {
  FilterConfig bad;
  bad.min_vote_gap = -1;
  EXPECT_THROW(ApplyQualityFilters({}, bad), ValidationError);
}

TEST(RejectionCounters, Report) {
  RejectionCounters c;
  c.accepted = 3;
  c.counts["min_vote_gap"] = 2;
  c.counts["empty_pool"] = 1;
  EXPECT_EQ(c.Report(), "accepted=3\nrejected.empty_pool=1\nrejected.min_vote_gap=2\n");
}

QARecord Pool(std::vector<int64_t> votes, int accepted = -1) {
  QARecord r;
  r.question_id = "q";
  r.question_text = "question";
  r.question_created_at = T("2023-01-01T00:00:00");
  for (size_t i = 0; i < votes.size(); ++i) {
    r.candidates.push_back({.id = "c" + std::to_string(i),
                            .content = "text",
                            .votes = votes[i],
                            .created_at = r.question_created_at + std::chrono::hours(i + 1),
                            .accepted = static_cast<int>(i) == accepted});
  }
  return r;
}

TEST(GoldRanking, Examples) {
  EXPECT_EQ(*AssignGoldRanking(Pool({4}), {}).gold_ranking, (std::vector<size_t>{0}));
  EXPECT_EQ(*AssignGoldRanking(Pool({5, 9, 1}, 2), {}).gold_ranking,
            (std::vector<size_t>{2, 1, 0}));
  QARecord tie = Pool({7, 7});
  tie.candidates[0].created_at = tie.question_created_at + std::chrono::hours(5);
  EXPECT_EQ(*AssignGoldRanking(tie, {}).gold_ranking, (std::vector<size_t>{1, 0}));
}

TEST(GoldRanking, DecayReordersOldPopularAnswers) {
  QARecord r = Pool({10, 8});
  r.candidates[0].created_at = T("2020-01-01T00:00:00");
  r.candidates[1].created_at = T("2023-12-01T00:00:00");
  DecayConfig decay;
  decay.enabled = true;
  decay.reference_time = T("2024-01-01T00:00:00");
  EXPECT_EQ(*AssignGoldRanking(r, decay).gold_ranking, (std::vector<size_t>{1, 0}));
  EXPECT_EQ(*AssignGoldRanking(r, {}).gold_ranking, (std::vector<size_t>{0, 1}));
}

TEST(GoldRanking, AlwaysPermutationWithAcceptedFirst) {
  std::mt19937_64 rng(10);
  for (int t = 0; t < 300; ++t) {
    const size_t m = 1 + rng() % 7;
    std::vector<int64_t> votes(m);
    for (auto& v : votes) v = static_cast<int64_t>(rng() % 5);
    const int accepted = static_cast<int>(rng() % (m + 1)) - 1;
    const QARecord r = AssignGoldRanking(Pool(votes, accepted), {});
    const auto& g = *r.gold_ranking;
    EXPECT_EQ(std::set<size_t>(g.begin(), g.end()).size(), m);
    if (accepted >= 0) EXPECT_EQ(g.front(), static_cast<size_t>(accepted));
    ValidateRecord(r);
  }
}

TEST(ValidateRecord, Invariants) {
  QARecord dup = Pool({1, 2});
  dup.candidates[1].id = "c0";
  EXPECT_THROW(ValidateRecord(dup), ValidationError);
  QARecord two_acc = Pool({1, 2}, 0);
  two_acc.candidates[1].accepted = true;
  EXPECT_THROW(ValidateRecord(two_acc), ValidationError);
  QARecord bad_gold = Pool({1, 2});
  bad_gold.gold_ranking = std::vector<size_t>{0, 0};
  EXPECT_THROW(ValidateRecord(bad_gold), ValidationError);
  QARecord neg = Pool({1, 2});
  neg.candidates[0].votes = -1;
  EXPECT_THROW(ValidateRecord(neg), ValidationError);
  QARecord empty = Pool({});
  EXPECT_THROW(ValidateRecord(empty), ValidationError);
}

QARecord RandomRecord(std::mt19937_64& rng, size_t index) {
  static const std::vector<std::string> words = {"alpha", "β-test", "x<y", "\"quoted\"",
                                                 "line\nbreak", "tab\there", "日本語", "{}"};
  auto text = [&](size_t n) {
    std::string s;
    for (size_t i = 0; i < n; ++i) s += (i ? " " : "") + words[rng() % words.size()];
    return s;
  };
  QARecord r;
  r.question_id = "rec-" + std::to_string(index);
  r.question_text = text(1 + rng() % 6);
  r.question_created_at = Timestamp(std::chrono::milliseconds(1600000000000LL + rng() % 100000000000LL));
  const size_t m = 1 + rng() % 6;
  const int accepted = static_cast<int>(rng() % (m + 1)) - 1;
  for (size_t i = 0; i < m; ++i) {
    r.candidates.push_back(
        {.id = "a" + std::to_string(i),
         .content = text(1 + rng() % 8),
         .votes = static_cast<int64_t>(rng() % 1000),
         .created_at = Timestamp(std::chrono::milliseconds(1600000000000LL + rng() % 100000000000LL)),
         .accepted = static_cast<int>(i) == accepted});
  }
  if (rng() % 2) r = AssignGoldRanking(std::move(r), {});
  return r;
}

TEST(Persistence, RoundTripRandomRecords) {
  testing::TempDir dir;
  std::mt19937_64 rng(1234);
  std::vector<QARecord> records;
  for (size_t i = 0; i < 100; ++i) records.push_back(RandomRecord(rng, i));
  WriteRecords(dir.File("r.jsonl"), records);
  EXPECT_EQ(ReadRecords(dir.File("r.jsonl")), records);
}

TEST(Persistence, EmptyListAndKeyOrder) {
  testing::TempDir dir;
  WriteRecords(dir.File("e.jsonl"), {});
  EXPECT_EQ(testing::ReadText(dir.File("e.jsonl")), "");
  EXPECT_TRUE(ReadRecords(dir.File("e.jsonl")).empty());

  QARecord r = AssignGoldRanking(Pool({3, 1}, 0), {});
  const std::string line = RecordToJsonLine(r);
  size_t last = 0;
  for (const char* key : {"\"question_id\"", "\"question_text\"", "\"question_created_at\"",
                          "\"candidates\"", "\"id\"", "\"content\"", "\"votes\"",
                          "\"created_at\"", "\"accepted\"", "\"gold_ranking\""}) {
    const size_t at = line.find(key, last);
    ASSERT_NE(at, std::string::npos) << key;
    last = at;
  }
  EXPECT_EQ(line.find('\n'), std::string::npos);
}

TEST(Persistence, MissingCandidatesNamesLine) {
  try {
    ReadRecords(Fixture("records_missing_candidates.jsonl"));
    FAIL() << "expected a schema error";
  } catch (const ValidationError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("line 2"), std::string::npos) << msg;
    EXPECT_NE(msg.find("candidates"), std::string::npos) << msg;
  }
  EXPECT_THROW(ReadRecords(Fixture("absent.jsonl")), IoError);
}

TEST(CountTokens, Whitespace) {
  EXPECT_EQ(CountTokens(""), 0u);
  EXPECT_EQ(CountTokens("  a\tb\n c  "), 3u);
}

}  // namespace
}  // namespace apdfrank
