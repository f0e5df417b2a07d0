#ifndef APDFRANK_EMBED_H_
#define APDFRANK_EMBED_H_

#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace apdfrank {

struct EmbeddingVector {
  std::vector<double> values;

  size_t dim() const { return values.size(); }
  double norm() const;
  bool is_zero() const;
  bool operator==(const EmbeddingVector&) const = default;
};

// Text -> fixed-length vector. Implementations are immutable after
// construction and must be deterministic.
class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual EmbeddingVector Embed(std::string_view text) const = 0;
  virtual size_t dim() const = 0;
  virtual std::string name() const = 0;
};

// Character n-grams hashed into `dim` buckets with a sign bit, then
// L2-normalized. Texts shorter than n contribute their whole string as a
// single gram.
EmbeddingVector HashedNgramEmbed(std::string_view text, size_t dim = 256,
                                 size_t n = 3);

class HashedNgramEmbedder : public Embedder {
 public:
  explicit HashedNgramEmbedder(size_t dim = 256, size_t n = 3);

  EmbeddingVector Embed(std::string_view text) const override {
    return HashedNgramEmbed(text, dim_, n_);
  }
  size_t dim() const override { return dim_; }
  std::string name() const override;

 private:
  size_t dim_;
  size_t n_;
};

// Vectors keyed by id, e.g. precomputed by an external encoder. Lookups of
// unknown ids throw ValidationError.
class LookupEmbedder : public Embedder {
 public:
  LookupEmbedder(std::map<std::string, EmbeddingVector> table, size_t dim);

  EmbeddingVector Embed(std::string_view id) const override;
  size_t dim() const override { return dim_; }
  std::string name() const override { return "external"; }
  bool contains(std::string_view id) const;

 private:
  std::map<std::string, EmbeddingVector, std::less<>> table_;
  size_t dim_;
};

// Reads "id<TAB>v1 v2 ... vd" lines (values separated by tabs or spaces).
// Vectors are L2-normalized on load. Throws ValidationError on dimension
// mismatch or duplicate ids, IoError if the file cannot be read.
std::map<std::string, EmbeddingVector> LoadExternalEmbeddings(
    const std::string& path);

void WriteEmbeddings(const std::string& path,
                     const std::vector<std::pair<std::string, EmbeddingVector>>&
                         rows);

// 0 when either side is all-zero. Throws ValidationError on dim mismatch.
double Cosine(const EmbeddingVector& a, const EmbeddingVector& b);

}  // namespace apdfrank

#endif  // APDFRANK_EMBED_H_
