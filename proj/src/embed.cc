#include "apdfrank/embed.h"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "apdfrank/error.h"

namespace apdfrank {

namespace {

uint64_t Fnv1a(std::string_view bytes) {
  uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  // Final avalanche so the low bits used for bucketing mix the whole gram.
  h ^= h >> 33;
  h *= 0xff51afd7ed558ccdULL;
  h ^= h >> 33;
  return h;
}

void NormalizeInPlace(std::vector<double>& v) {
  double sq = 0.0;
  for (double x : v) sq += x * x;
  if (sq == 0.0) return;
  const double inv = 1.0 / std::sqrt(sq);
  for (double& x : v) x *= inv;
}

}  // namespace

double EmbeddingVector::norm() const {
  double sq = 0.0;
  for (double x : values) sq += x * x;
  return std::sqrt(sq);
}

bool EmbeddingVector::is_zero() const {
  for (double x : values) {
    if (x != 0.0) return false;
  }
  return true;
}

EmbeddingVector HashedNgramEmbed(std::string_view text, size_t dim, size_t n) {
  if (dim < 8) throw ValidationError("embedding dim must be >= 8");
  if (n < 1) throw ValidationError("n-gram order must be >= 1");
  EmbeddingVector out{std::vector<double>(dim, 0.0)};
  if (text.empty()) return out;

  auto add = [&](std::string_view gram) {
    const uint64_t h = Fnv1a(gram);
    const double sign = (h >> 63) ? -1.0 : 1.0;
    out.values[h % dim] += sign;
  };
  if (text.size() < n) {
    add(text);
  } else {
    for (size_t i = 0; i + n <= text.size(); ++i) add(text.substr(i, n));
  }
  NormalizeInPlace(out.values);
  return out;
}

HashedNgramEmbedder::HashedNgramEmbedder(size_t dim, size_t n)
    : dim_(dim), n_(n) {
  if (dim < 8) throw ValidationError("embedding dim must be >= 8");
  if (n < 1) throw ValidationError("n-gram order must be >= 1");
}

std::string HashedNgramEmbedder::name() const {
  return "hashed-ngram(d=" + std::to_string(dim_) + ",n=" +
         std::to_string(n_) + ")";
}

LookupEmbedder::LookupEmbedder(std::map<std::string, EmbeddingVector> table,
                               size_t dim)
    : table_(table.begin(), table.end()), dim_(dim) {
  for (const auto& [id, v] : table_) {
    if (v.dim() != dim_) {
      throw ValidationError("embedding '" + id + "' has dimension " +
                            std::to_string(v.dim()) + ", expected " +
                            std::to_string(dim_));
    }
  }
}

EmbeddingVector LookupEmbedder::Embed(std::string_view id) const {
  auto it = table_.find(id);
  if (it == table_.end()) {
    throw ValidationError("no external embedding for id '" + std::string(id) +
                          "'");
  }
  return it->second;
}

bool LookupEmbedder::contains(std::string_view id) const {
  return table_.find(id) != table_.end();
}

std::map<std::string, EmbeddingVector> LoadExternalEmbeddings(
    const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open embeddings file: " + path);

  std::map<std::string, EmbeddingVector> table;
  size_t dim = 0;
  std::string line;
  size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const size_t tab = line.find('\t');
    if (tab == std::string::npos || tab == 0) {
      throw ValidationError(path + ":" + std::to_string(line_number) +
                            ": expected 'id<TAB>values'");
    }
    std::string id = line.substr(0, tab);
    std::istringstream values(line.substr(tab + 1));
    EmbeddingVector v;
    std::string token;
    while (values >> token) {
      char* end = nullptr;
      const double x = std::strtod(token.c_str(), &end);
      if (end == token.c_str() || *end != '\0' || !std::isfinite(x)) {
        throw ValidationError(path + ":" + std::to_string(line_number) +
                              ": bad value '" + token + "'");
      }
      v.values.push_back(x);
    }
    if (v.values.empty()) {
      throw ValidationError(path + ":" + std::to_string(line_number) +
                            ": no values for id '" + id + "'");
    }
    if (dim == 0) {
      dim = v.dim();
    } else if (v.dim() != dim) {
      throw ValidationError(path + ":" + std::to_string(line_number) +
                            ": dimension mismatch for id '" + id + "' (" +
                            std::to_string(v.dim()) + " vs " +
                            std::to_string(dim) + ")");
    }
    NormalizeInPlace(v.values);
    if (!table.emplace(id, std::move(v)).second) {
      throw ValidationError(path + ":" + std::to_string(line_number) +
                            ": duplicate id '" + id + "'");
    }
  }
  return table;
}

void WriteEmbeddings(
    const std::string& path,
    const std::vector<std::pair<std::string, EmbeddingVector>>& rows) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write embeddings file: " + path);
  char buf[32];
  for (const auto& [id, v] : rows) {
    out << id << '\t';
    for (size_t i = 0; i < v.values.size(); ++i) {
      std::snprintf(buf, sizeof(buf), "%.17g", v.values[i]);
      if (i) out << ' ';
      out << buf;
    }
    out << '\n';
  }
  if (!out) throw IoError("write failed: " + path);
}

double Cosine(const EmbeddingVector& a, const EmbeddingVector& b) {
  if (a.dim() != b.dim()) {
    throw ValidationError("cosine of vectors with dims " +
                          std::to_string(a.dim()) + " and " +
                          std::to_string(b.dim()));
  }
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (size_t i = 0; i < a.values.size(); ++i) {
    dot += a.values[i] * b.values[i];
    na += a.values[i] * a.values[i];
    nb += b.values[i] * b.values[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  const double c = dot / (std::sqrt(na) * std::sqrt(nb));
  return std::clamp(c, -1.0, 1.0);
}

}  // namespace apdfrank
