#ifndef APDFRANK_CORPUS_H_
#define APDFRANK_CORPUS_H_

// Community-QA corpus: dump ingestion, the filtering pipeline, HTML cleaning,
// gold labels and JSON-Lines persistence.

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "apdfrank/apdf.h"
#include "apdfrank/timestamp.h"

namespace apdfrank {

struct ResponseCandidate {
  std::string id;
  std::string content;
  int64_t votes = 0;
  Timestamp created_at{};
  bool accepted = false;

  bool operator==(const ResponseCandidate&) const = default;
};

struct QARecord {
  std::string question_id;
  std::string question_text;
  Timestamp question_created_at{};
  std::vector<ResponseCandidate> candidates;
  // Candidate indices, best first.
  std::optional<std::vector<size_t>> gold_ranking;

  size_t pool_size() const { return candidates.size(); }
  bool operator==(const QARecord&) const = default;
};

// Throws ValidationError describing the first violated invariant.
void ValidateRecord(const QARecord& record);

// Zero on a max_* field means "no limit"; zero on a min_* field is vacuous.
struct FilterConfig {
  int64_t min_pool_size = 2;
  int64_t max_pool_size = 0;
  int64_t min_vote_gap = 0;
  int64_t min_votes_per_response = 0;
  int64_t max_question_tokens = 0;
  int64_t max_response_tokens = 0;
  std::optional<Timestamp> since;
  bool require_code_block = false;
};

void ValidateFilterConfig(const FilterConfig& cfg);

// One question with its answers as they come out of the dump. Bodies are raw
// HTML until CleanEntries runs.
struct RawAnswer {
  std::string id;
  std::string body;
  int64_t score = 0;
  Timestamp created_at{};
};

struct RawEntry {
  std::string question_id;
  std::string title;
  std::string body;
  Timestamp created_at{};
  std::optional<std::string> accepted_answer_id;
  // Detected on the raw HTML; survives cleaning.
  bool has_code_block = false;
  std::vector<RawAnswer> answers;
};

struct ParseStats {
  size_t rows = 0;
  size_t questions = 0;
  size_t answers = 0;
  size_t skipped_rows = 0;   // missing/invalid required attribute
  size_t orphan_answers = 0; // ParentId not found among questions
  std::vector<std::string> warnings;
};

// Streams a StackExchange Posts.xml dump. Entries are delivered in question
// order of appearance once the whole file has been joined. Throws IoError if
// the file cannot be opened and ValidationError (with line number) on
// malformed XML.
ParseStats ParseDump(const std::string& path,
                     const std::function<void(RawEntry&&)>& sink);
std::vector<RawEntry> ParseDump(const std::string& path,
                                ParseStats* stats = nullptr);
// Same, over an in-memory document.
std::vector<RawEntry> ParseDumpString(std::string_view xml,
                                      ParseStats* stats = nullptr);

bool ContainsCodeBlock(std::string_view html);

// Keeps entries whose accepted answer is present in the pool.
std::vector<RawEntry> FilterAccepted(std::vector<RawEntry> entries);
std::vector<RawEntry> FilterCodeBlock(std::vector<RawEntry> entries);

// Strips tags, decodes entities, keeps text inside <code>/<pre> verbatim.
std::string CleanHtml(std::string_view html);

// Applies CleanHtml to titles, bodies and answers. Answers that are empty
// after cleaning are dropped from their pool.
std::vector<RawEntry> CleanEntries(std::vector<RawEntry> entries);

size_t CountTokens(std::string_view text);

struct RejectionCounters {
  std::map<std::string, size_t> counts;
  size_t accepted = 0;

  // "key=value" lines, keys sorted.
  std::string Report() const;
};

// Converts surviving entries to QARecords. Negative scores clamp to 0 votes.
std::vector<QARecord> ApplyQualityFilters(const std::vector<RawEntry>& entries,
                                          const FilterConfig& cfg,
                                          RejectionCounters* counters = nullptr);

// Accepted candidate first, then decayed votes descending, then earlier
// created_at, then lower index.
QARecord AssignGoldRanking(QARecord record, const DecayConfig& decay);

// JSON-Lines, one record per line, keys in the order:
// question_id, question_text, question_created_at, candidates
// [id, content, votes, created_at, accepted], gold_ranking.
std::string RecordToJsonLine(const QARecord& record);
QARecord RecordFromJsonLine(std::string_view line, size_t line_number);

void WriteRecords(const std::string& path, const std::vector<QARecord>& records);
std::vector<QARecord> ReadRecords(const std::string& path);

}  // namespace apdfrank

#endif  // APDFRANK_CORPUS_H_
