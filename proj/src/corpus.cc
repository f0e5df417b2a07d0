#include "apdfrank/corpus.h"

#include <expat.h>

#include <algorithm>
#include <cctype>
#include <cstring>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "apdfrank/error.h"

namespace apdfrank {

void ValidateRecord(const QARecord& record) {
  const std::string where = "record '" + record.question_id + "': ";
  if (record.candidates.empty()) {
    throw ValidationError(where + "empty candidate pool");
  }
  std::set<std::string> ids;
  size_t accepted = 0;
  for (const ResponseCandidate& c : record.candidates) {
    if (!ids.insert(c.id).second) {
      throw ValidationError(where + "duplicate candidate id '" + c.id + "'");
    }
    if (c.votes < 0) {
      throw ValidationError(where + "candidate '" + c.id + "' has negative votes");
    }
    if (c.content.empty()) {
      throw ValidationError(where + "candidate '" + c.id + "' has empty content");
    }
    if (c.accepted) ++accepted;
  }
  if (accepted > 1) {
    throw ValidationError(where + "more than one accepted candidate");
  }
  if (record.gold_ranking) {
    const auto& g = *record.gold_ranking;
    std::vector<bool> seen(record.candidates.size(), false);
    bool ok = g.size() == record.candidates.size();
    for (size_t v : g) {
      if (!ok) break;
      if (v >= seen.size() || seen[v]) ok = false;
      else seen[v] = true;
    }
    if (!ok) throw ValidationError(where + "gold_ranking is not a permutation");
  }
}

void ValidateFilterConfig(const FilterConfig& cfg) {
  if (cfg.min_pool_size < 0 || cfg.max_pool_size < 0 || cfg.min_vote_gap < 0 ||
      cfg.min_votes_per_response < 0 || cfg.max_question_tokens < 0 ||
      cfg.max_response_tokens < 0) {
    throw ValidationError("filter thresholds must be >= 0");
  }
  if (cfg.max_pool_size != 0 && cfg.max_pool_size < cfg.min_pool_size) {
    throw ValidationError("max_pool_size is below min_pool_size");
  }
}

// --- Dump parsing -----------------------------------------------------------

namespace {

struct DumpParser {
  ParseStats stats;
  std::vector<RawEntry> questions;
  std::unordered_map<std::string, size_t> question_index;
  std::vector<std::pair<std::string, RawAnswer>> answers;  // (parent, answer)
  XML_Parser parser = nullptr;

  static void OnStart(void* data, const XML_Char* name, const XML_Char** atts) {
    auto* self = static_cast<DumpParser*>(data);
    if (std::strcmp(name, "row") != 0) return;
    std::unordered_map<std::string, std::string> attrs;
    for (size_t i = 0; atts[i] != nullptr; i += 2) attrs[atts[i]] = atts[i + 1];
    self->OnRow(attrs);
  }

  void Warn(const std::string& message) {
    ++stats.skipped_rows;
    stats.warnings.push_back(
        "line " + std::to_string(XML_GetCurrentLineNumber(parser)) + ": " +
        message);
  }

  void OnRow(const std::unordered_map<std::string, std::string>& attrs) {
    ++stats.rows;
    auto get = [&](const char* key) -> const std::string* {
      auto it = attrs.find(key);
      return it == attrs.end() ? nullptr : &it->second;
    };
    const std::string* id = get("Id");
    const std::string* type = get("PostTypeId");
    if (id == nullptr || type == nullptr) {
      Warn("row missing Id or PostTypeId");
      return;
    }
    if (*type != "1" && *type != "2") return;  // wiki, tag excerpts, ...

    for (const char* key : {"CreationDate", "Score", "Body"}) {
      if (get(key) == nullptr) {
        Warn("post " + *id + " missing " + key);
        return;
      }
    }
    if (*type == "2" && get("ParentId") == nullptr) {
      Warn("answer " + *id + " missing ParentId");
      return;
    }
    const auto created = ParseTimestamp(*get("CreationDate"));
    if (!created) {
      Warn("post " + *id + " has invalid CreationDate");
      return;
    }
    int64_t score = 0;
    try {
      size_t used = 0;
      score = std::stoll(*get("Score"), &used);
      if (used != get("Score")->size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      Warn("post " + *id + " has invalid Score");
      return;
    }

    if (*type == "1") {
      RawEntry q;
      q.question_id = *id;
      if (const auto* t = get("Title")) q.title = *t;
      q.body = *get("Body");
      q.created_at = *created;
      if (const auto* a = get("AcceptedAnswerId")) q.accepted_answer_id = *a;
      q.has_code_block = ContainsCodeBlock(q.body);
      if (question_index.count(q.question_id) != 0) {
        Warn("duplicate question id " + q.question_id);
        return;
      }
      question_index[q.question_id] = questions.size();
      questions.push_back(std::move(q));
      ++stats.questions;
    } else {
      RawAnswer a;
      a.id = *id;
      a.body = *get("Body");
      a.score = score;
      a.created_at = *created;
      answers.emplace_back(*get("ParentId"), std::move(a));
      ++stats.answers;
    }
  }

  std::vector<RawEntry> Join() {
    for (auto& [parent, answer] : answers) {
      auto it = question_index.find(parent);
      if (it == question_index.end()) {
        ++stats.orphan_answers;
        continue;
      }
      questions[it->second].answers.push_back(std::move(answer));
    }
    answers.clear();
    return std::move(questions);
  }
};

class ExpatHandle {
 public:
  ExpatHandle() : parser_(XML_ParserCreate("UTF-8")) {}
  ~ExpatHandle() { XML_ParserFree(parser_); }
  ExpatHandle(const ExpatHandle&) = delete;
  ExpatHandle& operator=(const ExpatHandle&) = delete;
  XML_Parser get() const { return parser_; }

 private:
  XML_Parser parser_;
};

void FeedOrThrow(XML_Parser parser, const char* data, size_t size, bool final,
                 const std::string& source) {
  if (XML_Parse(parser, data, static_cast<int>(size), final ? 1 : 0) ==
      XML_STATUS_ERROR) {
    throw ValidationError(
        source + ":" + std::to_string(XML_GetCurrentLineNumber(parser)) +
        ": malformed XML: " + XML_ErrorString(XML_GetErrorCode(parser)));
  }
}

bool IsBlank(std::string_view s) {
  return std::all_of(s.begin(), s.end(),
                     [](unsigned char c) { return std::isspace(c) != 0; });
}

}  // namespace

ParseStats ParseDump(const std::string& path,
                     const std::function<void(RawEntry&&)>& sink) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open dump: " + path);

  DumpParser state;
  ExpatHandle expat;
  state.parser = expat.get();
  XML_SetUserData(expat.get(), &state);
  XML_SetStartElementHandler(expat.get(), &DumpParser::OnStart);

  std::vector<char> buffer(1 << 16);
  bool saw_content = false;
  std::string pending;  // leading whitespace held back until content shows up
  while (in) {
    in.read(buffer.data(), static_cast<std::streamsize>(buffer.size()));
    const size_t got = static_cast<size_t>(in.gcount());
    if (got == 0) break;
    std::string_view chunk(buffer.data(), got);
    if (!saw_content) {
      if (IsBlank(chunk)) {
        pending.append(chunk);
        continue;
      }
      saw_content = true;
      if (!pending.empty()) FeedOrThrow(expat.get(), pending.data(), pending.size(), false, path);
    }
    FeedOrThrow(expat.get(), chunk.data(), chunk.size(), false, path);
  }
  if (in.bad()) throw IoError("read failed: " + path);
  if (!saw_content) return state.stats;  // empty dump
  FeedOrThrow(expat.get(), nullptr, 0, true, path);

  for (RawEntry& e : state.Join()) sink(std::move(e));
  return state.stats;
}

std::vector<RawEntry> ParseDump(const std::string& path, ParseStats* stats) {
  std::vector<RawEntry> out;
  ParseStats s = ParseDump(path, [&](RawEntry&& e) { out.push_back(std::move(e)); });
  if (stats != nullptr) *stats = std::move(s);
  return out;
}

std::vector<RawEntry> ParseDumpString(std::string_view xml, ParseStats* stats) {
  DumpParser state;
  if (IsBlank(xml)) {
    if (stats != nullptr) *stats = state.stats;
    return {};
  }
  ExpatHandle expat;
  state.parser = expat.get();
  XML_SetUserData(expat.get(), &state);
  XML_SetStartElementHandler(expat.get(), &DumpParser::OnStart);
  FeedOrThrow(expat.get(), xml.data(), xml.size(), true, "<string>");
  std::vector<RawEntry> out = state.Join();
  if (stats != nullptr) *stats = std::move(state.stats);
  return out;
}

// --- Filters ----------------------------------------------------------------

bool ContainsCodeBlock(std::string_view html) {
  std::string lower(html);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return lower.find("<code") != std::string::npos ||
         lower.find("```") != std::string::npos;
}

std::vector<RawEntry> FilterAccepted(std::vector<RawEntry> entries) {
  std::vector<RawEntry> out;
  for (RawEntry& e : entries) {
    if (!e.accepted_answer_id) continue;
    const bool present =
        std::any_of(e.answers.begin(), e.answers.end(),
                    [&](const RawAnswer& a) { return a.id == *e.accepted_answer_id; });
    if (present) out.push_back(std::move(e));
  }
  return out;
}

std::vector<RawEntry> FilterCodeBlock(std::vector<RawEntry> entries) {
  std::vector<RawEntry> out;
  for (RawEntry& e : entries) {
    if (e.has_code_block) out.push_back(std::move(e));
  }
  return out;
}

// --- HTML cleaning ----------------------------------------------------------

namespace {

void AppendUtf8(uint32_t cp, std::string& out) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

// Decodes the entity starting at text[pos] == '&'. Returns the number of
// bytes consumed, or 0 if this is not a recognized entity.
size_t DecodeEntity(std::string_view text, size_t pos, std::string& out) {
  const size_t semi = text.find(';', pos);
  if (semi == std::string_view::npos || semi - pos > 10) return 0;
  const std::string_view name = text.substr(pos + 1, semi - pos - 1);
  if (name.empty()) return 0;
  if (name[0] == '#') {
    uint32_t cp = 0;
    const bool hex = name.size() > 1 && (name[1] == 'x' || name[1] == 'X');
    const std::string_view digits = name.substr(hex ? 2 : 1);
    if (digits.empty()) return 0;
    for (char c : digits) {
      int v;
      if (c >= '0' && c <= '9') v = c - '0';
      else if (hex && c >= 'a' && c <= 'f') v = c - 'a' + 10;
      else if (hex && c >= 'A' && c <= 'F') v = c - 'A' + 10;
      else return 0;
      cp = cp * (hex ? 16 : 10) + static_cast<uint32_t>(v);
      if (cp > 0x10FFFF) return 0;
    }
    AppendUtf8(cp, out);
    return semi - pos + 1;
  }
  static const std::pair<std::string_view, std::string_view> kNamed[] = {
      {"amp", "&"},  {"lt", "<"},   {"gt", ">"},
      {"quot", "\""}, {"apos", "'"}, {"nbsp", " "},
  };
  for (const auto& [n, v] : kNamed) {
    if (name == n) {
      out.append(v);
      return semi - pos + 1;
    }
  }
  return 0;
}

bool IsBlockTag(std::string_view tag) {
  static const std::set<std::string_view> kBlock = {
      "p",  "div", "br", "li", "ul", "ol", "pre", "h1", "h2", "h3", "h4",
      "h5", "h6",  "hr", "blockquote", "tr", "table", "dl", "dt", "dd"};
  return kBlock.count(tag) != 0;
}

bool IsSpace(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

}  // namespace

std::string CleanHtml(std::string_view html) {
  // Text plus a per-byte "inside code" mask; only non-code whitespace is
  // normalized afterwards.
  std::string text;
  std::vector<bool> code_mask;
  int code_depth = 0;

  auto emit = [&](std::string_view s) {
    text.append(s);
    code_mask.insert(code_mask.end(), s.size(), code_depth > 0);
  };

  size_t i = 0;
  while (i < html.size()) {
    const char c = html[i];
    if (c == '<') {
      if (html.substr(i, 4) == "<!--") {
        const size_t end = html.find("-->", i + 4);
        i = end == std::string_view::npos ? html.size() : end + 3;
        continue;
      }
      const size_t close = html.find('>', i + 1);
      const bool looks_like_tag =
          close != std::string_view::npos && i + 1 < html.size() &&
          (std::isalpha(static_cast<unsigned char>(html[i + 1])) ||
           html[i + 1] == '/' || html[i + 1] == '!');
      if (!looks_like_tag) {
        emit("<");
        ++i;
        continue;
      }
      std::string_view inner = html.substr(i + 1, close - i - 1);
      const bool closing = !inner.empty() && inner.front() == '/';
      if (closing) inner.remove_prefix(1);
      size_t n = 0;
      while (n < inner.size() && std::isalnum(static_cast<unsigned char>(inner[n]))) ++n;
      std::string tag(inner.substr(0, n));
      std::transform(tag.begin(), tag.end(), tag.begin(),
                     [](unsigned char ch) { return std::tolower(ch); });
      const bool code_tag = tag == "code" || tag == "pre";
      const bool self_closing = !inner.empty() && inner.back() == '/';
      if (code_tag && !self_closing) {
        if (closing) {
          code_depth = std::max(0, code_depth - 1);
          if (tag == "pre") emit("\n");
        } else {
          if (tag == "pre") emit("\n");
          ++code_depth;
        }
      } else if (IsBlockTag(tag)) {
        emit("\n");
      }
      i = close + 1;
      continue;
    }
    if (c == '&') {
      std::string decoded;
      const size_t used = DecodeEntity(html, i, decoded);
      if (used != 0) {
        emit(decoded);
        i += used;
        continue;
      }
    }
    text.push_back(c);
    code_mask.push_back(code_depth > 0);
    ++i;
  }

  // Collapse prose whitespace: a run with 2+ newlines becomes a blank line,
  // one newline stays, anything else becomes one space.
  std::string out;
  std::vector<bool> out_mask;
  for (size_t k = 0; k < text.size();) {
    if (code_mask[k] || !IsSpace(text[k])) {
      out.push_back(text[k]);
      out_mask.push_back(code_mask[k]);
      ++k;
      continue;
    }
    size_t newlines = 0, end = k;
    while (end < text.size() && !code_mask[end] && IsSpace(text[end])) {
      if (text[end] == '\n') ++newlines;
      ++end;
    }
    const std::string_view repl = newlines >= 2 ? "\n\n" : newlines == 1 ? "\n" : " ";
    out.append(repl);
    out_mask.insert(out_mask.end(), repl.size(), false);
    k = end;
  }
  size_t begin = 0, end = out.size();
  while (begin < end && !out_mask[begin] && IsSpace(out[begin])) ++begin;
  while (end > begin && !out_mask[end - 1] && IsSpace(out[end - 1])) --end;
  return out.substr(begin, end - begin);
}

std::vector<RawEntry> CleanEntries(std::vector<RawEntry> entries) {
  for (RawEntry& e : entries) {
    e.title = CleanHtml(e.title);
    e.body = CleanHtml(e.body);
    std::vector<RawAnswer> kept;
    for (RawAnswer& a : e.answers) {
      a.body = CleanHtml(a.body);
      if (!a.body.empty()) kept.push_back(std::move(a));
    }
    e.answers = std::move(kept);
  }
  return entries;
}

size_t CountTokens(std::string_view text) {
  size_t count = 0;
  bool in_token = false;
  for (char c : text) {
    if (IsSpace(c)) {
      in_token = false;
    } else if (!in_token) {
      in_token = true;
      ++count;
    }
  }
  return count;
}

std::string RejectionCounters::Report() const {
  std::ostringstream out;
  out << "accepted=" << accepted << "\n";
  for (const auto& [key, value] : counts) out << "rejected." << key << "=" << value << "\n";
  return out.str();
}

std::vector<QARecord> ApplyQualityFilters(const std::vector<RawEntry>& entries,
                                          const FilterConfig& cfg,
                                          RejectionCounters* counters) {
  ValidateFilterConfig(cfg);
  RejectionCounters local;
  RejectionCounters& c = counters != nullptr ? *counters : local;
  std::vector<QARecord> out;

  for (const RawEntry& e : entries) {
    QARecord r;
    r.question_id = e.question_id;
    r.question_text = e.title.empty() ? e.body
                      : e.body.empty() ? e.title
                                       : e.title + "\n\n" + e.body;
    r.question_created_at = e.created_at;
    for (const RawAnswer& a : e.answers) {
      r.candidates.push_back({.id = a.id,
                              .content = a.body,
                              .votes = std::max<int64_t>(a.score, 0),
                              .created_at = a.created_at,
                              .accepted = e.accepted_answer_id == a.id});
    }

    auto reject = [&](const char* why) {
      ++c.counts[why];
      return true;
    };
    const int64_t m = static_cast<int64_t>(r.candidates.size());
    int64_t lo = 0, hi = 0;
    if (m > 0) {
      const auto [mn, mx] = std::minmax_element(
          r.candidates.begin(), r.candidates.end(),
          [](const auto& a, const auto& b) { return a.votes < b.votes; });
      lo = mn->votes;
      hi = mx->votes;
    }
    bool rejected = false;
    if (m == 0) {
      rejected = reject("empty_pool");
    } else if (cfg.since && e.created_at < *cfg.since) {
      rejected = reject("since");
    } else if (cfg.require_code_block && !e.has_code_block) {
      rejected = reject("require_code_block");
    } else if (m < cfg.min_pool_size) {
      rejected = reject("min_pool_size");
    } else if (cfg.max_pool_size != 0 && m > cfg.max_pool_size) {
      rejected = reject("max_pool_size");
    } else if (hi - lo < cfg.min_vote_gap) {
      rejected = reject("min_vote_gap");
    } else if (lo < cfg.min_votes_per_response) {
      rejected = reject("min_votes_per_response");
    } else if (cfg.max_question_tokens != 0 &&
               static_cast<int64_t>(CountTokens(r.question_text)) >
                   cfg.max_question_tokens) {
      rejected = reject("max_question_tokens");
    } else if (cfg.max_response_tokens != 0 &&
               std::any_of(r.candidates.begin(), r.candidates.end(),
                           [&](const ResponseCandidate& rc) {
                             return static_cast<int64_t>(CountTokens(rc.content)) >
                                    cfg.max_response_tokens;
                           })) {
      rejected = reject("max_response_tokens");
    }
    if (rejected) continue;
    ValidateRecord(r);
    ++c.accepted;
    out.push_back(std::move(r));
  }
  return out;
}

QARecord AssignGoldRanking(QARecord record, const DecayConfig& decay) {
  const size_t m = record.candidates.size();
  if (m == 0) throw ValidationError("gold ranking of an empty pool");
  std::vector<double> decayed(m);
  for (size_t i = 0; i < m; ++i) {
    const auto& c = record.candidates[i];
    decayed[i] = DecayedPopularity(static_cast<double>(c.votes), c.created_at, decay);
  }
  std::vector<size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    const auto& ca = record.candidates[a];
    const auto& cb = record.candidates[b];
    if (ca.accepted != cb.accepted) return ca.accepted;
    if (decayed[a] != decayed[b]) return decayed[a] > decayed[b];
    if (ca.created_at != cb.created_at) return ca.created_at < cb.created_at;
    return a < b;
  });
  record.gold_ranking = std::move(order);
  return record;
}

// --- JSON-Lines persistence -------------------------------------------------

std::string RecordToJsonLine(const QARecord& record) {
  nlohmann::ordered_json j;
  j["question_id"] = record.question_id;
  j["question_text"] = record.question_text;
  j["question_created_at"] = FormatTimestamp(record.question_created_at);
  nlohmann::ordered_json cands = nlohmann::ordered_json::array();
  for (const ResponseCandidate& c : record.candidates) {
    nlohmann::ordered_json cj;
    cj["id"] = c.id;
    cj["content"] = c.content;
    cj["votes"] = c.votes;
    cj["created_at"] = FormatTimestamp(c.created_at);
    cj["accepted"] = c.accepted;
    cands.push_back(std::move(cj));
  }
  j["candidates"] = std::move(cands);
  if (record.gold_ranking) {
    j["gold_ranking"] = *record.gold_ranking;
  } else {
    j["gold_ranking"] = nullptr;
  }
  return j.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
}

namespace {

const nlohmann::json& Require(const nlohmann::json& obj, const char* key,
                              const std::string& where) {
  if (!obj.is_object() || !obj.contains(key)) {
    throw ValidationError(where + "missing key '" + key + "'");
  }
  return obj.at(key);
}

std::string RequireString(const nlohmann::json& obj, const char* key,
                          const std::string& where) {
  const auto& v = Require(obj, key, where);
  if (!v.is_string()) throw ValidationError(where + "'" + key + "' must be a string");
  return v.get<std::string>();
}

Timestamp RequireTimestamp(const nlohmann::json& obj, const char* key,
                           const std::string& where) {
  const std::string s = RequireString(obj, key, where);
  const auto t = ParseTimestamp(s);
  if (!t) throw ValidationError(where + "'" + key + "' is not a timestamp: " + s);
  return *t;
}

}  // namespace

QARecord RecordFromJsonLine(std::string_view line, size_t line_number) {
  const std::string where = "line " + std::to_string(line_number) + ": ";
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(where + "invalid JSON: " + e.what());
  }
  if (!j.is_object()) throw ValidationError(where + "expected a JSON object");

  QARecord r;
  r.question_id = RequireString(j, "question_id", where);
  r.question_text = RequireString(j, "question_text", where);
  r.question_created_at = RequireTimestamp(j, "question_created_at", where);
  const auto& cands = Require(j, "candidates", where);
  if (!cands.is_array()) throw ValidationError(where + "'candidates' must be an array");
  for (const auto& cj : cands) {
    ResponseCandidate c;
    c.id = RequireString(cj, "id", where);
    c.content = RequireString(cj, "content", where);
    const auto& votes = Require(cj, "votes", where);
    if (!votes.is_number_integer()) {
      throw ValidationError(where + "'votes' must be an integer");
    }
    c.votes = votes.get<int64_t>();
    c.created_at = RequireTimestamp(cj, "created_at", where);
    const auto& acc = Require(cj, "accepted", where);
    if (!acc.is_boolean()) throw ValidationError(where + "'accepted' must be a boolean");
    c.accepted = acc.get<bool>();
    r.candidates.push_back(std::move(c));
  }
  if (j.contains("gold_ranking") && !j["gold_ranking"].is_null()) {
    const auto& g = j["gold_ranking"];
    if (!g.is_array()) throw ValidationError(where + "'gold_ranking' must be an array");
    std::vector<size_t> gold;
    for (const auto& v : g) {
      if (!v.is_number_unsigned()) {
        throw ValidationError(where + "'gold_ranking' entries must be non-negative integers");
      }
      gold.push_back(v.get<size_t>());
    }
    r.gold_ranking = std::move(gold);
  }
  try {
    ValidateRecord(r);
  } catch (const ValidationError& e) {
    throw ValidationError(where + e.what());
  }
  return r;
}

void WriteRecords(const std::string& path, const std::vector<QARecord>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write records: " + path);
  for (const QARecord& r : records) out << RecordToJsonLine(r) << '\n';
  if (!out) throw IoError("write failed: " + path);
}

std::vector<QARecord> ReadRecords(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open records: " + path);
  std::vector<QARecord> records;
  std::string line;
  size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.empty()) continue;
    try {
      records.push_back(RecordFromJsonLine(line, line_number));
    } catch (const ValidationError& e) {
      throw ValidationError(path + ": " + e.what());
    }
  }
  if (in.bad()) throw IoError("read failed: " + path);
  return records;
}

}  // namespace apdfrank
