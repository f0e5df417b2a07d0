#include "apdfrank/embed.h"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "apdfrank/error.h"
#include "test_support.h"

namespace apdfrank {
namespace {

using testing::Fixture;

TEST(HashedNgram, EmptyTextIsZero) {
  const EmbeddingVector v = HashedNgramEmbed("", 64, 3);
  EXPECT_EQ(v.dim(), 64u);
  EXPECT_TRUE(v.is_zero());
}

TEST(HashedNgram, DeterministicAndUnitNorm) {
  for (std::string_view text : {"fn main()", "x", "hello world, hello again"}) {
    const auto a = HashedNgramEmbed(text);
    const auto b = HashedNgramEmbed(text);
    EXPECT_EQ(a, b);
    EXPECT_NEAR(a.norm(), 1.0, 1e-12);
  }
  const HashedNgramEmbedder e(128, 2);
  EXPECT_EQ(e.Embed("abc"), HashedNgramEmbed("abc", 128, 2));
  EXPECT_EQ(e.dim(), 128u);
}

TEST(HashedNgram, SelfSimilarityIsOne) {
  EXPECT_NEAR(Cosine(HashedNgramEmbed("fn main()"), HashedNgramEmbed("fn main()")), 1.0, 1e-12);
}

TEST(HashedNgram, RejectsBadConfig) {
  EXPECT_THROW(HashedNgramEmbed("abc", 4, 3), ValidationError);
  EXPECT_THROW(HashedNgramEmbed("abc", 16, 0), ValidationError);
}

TEST(Cosine, BasicValues) {
  const EmbeddingVector v{{0.6, 0.8}};
  const EmbeddingVector neg{{-0.6, -0.8}};
  EXPECT_NEAR(Cosine(v, v), 1.0, 1e-15);
  EXPECT_NEAR(Cosine(v, neg), -1.0, 1e-15);
  EXPECT_EQ(Cosine(EmbeddingVector{{1.0, 0.0}}, EmbeddingVector{{0.0, 1.0}}), 0.0);
}

TEST(Cosine, ZeroVectorGivesZero) {
  EXPECT_EQ(Cosine(EmbeddingVector{{0.0, 0.0}}, EmbeddingVector{{1.0, 0.0}}), 0.0);
}

TEST(Cosine, DimensionMismatchThrows) {
  EXPECT_THROW(Cosine(EmbeddingVector{{1.0}}, EmbeddingVector{{1.0, 0.0}}), ValidationError);
}

TEST(Cosine, BoundedSymmetricScaleInvariant) {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> n(0.0, 10.0);
  std::uniform_real_distribution<double> lambda(1e-3, 1e3);
  for (int trial = 0; trial < 1000; ++trial) {
    EmbeddingVector a, b;
    for (int i = 0; i < 8; ++i) {
      a.values.push_back(n(rng));
      b.values.push_back(n(rng));
    }
    const double c = Cosine(a, b);
    EXPECT_LE(std::abs(c), 1.0 + 1e-12);
    EXPECT_EQ(c, Cosine(b, a));
    EmbeddingVector scaled = a;
    const double l = lambda(rng);
    for (double& x : scaled.values) x *= l;
    EXPECT_NEAR(Cosine(scaled, b), c, 1e-12);
  }
}

TEST(ExternalEmbeddings, LoadsAndNormalizes) {
  const auto table = LoadExternalEmbeddings(Fixture("embeddings_three.tsv"));
  ASSERT_EQ(table.size(), 3u);
  for (const auto& [id, v] : table) {
    EXPECT_EQ(v.dim(), 4u);
    EXPECT_NEAR(v.norm(), 1.0, 1e-12);
  }
  EXPECT_NEAR(table.at("b").values[0], 0.6, 1e-15);
  EXPECT_NEAR(table.at("b").values[1], 0.8, 1e-15);
}

TEST(ExternalEmbeddings, DuplicateIdNamed) {
  try {
    LoadExternalEmbeddings(Fixture("embeddings_duplicate.tsv"));
    FAIL() << "expected a duplicate-id error";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("duplicate id 'a'"), std::string::npos) << e.what();
  }
}

TEST(ExternalEmbeddings, DimensionMismatch) {
  EXPECT_THROW(LoadExternalEmbeddings(Fixture("embeddings_mismatch.tsv")), ValidationError);
}

TEST(ExternalEmbeddings, EmptyFileAndMissingFile) {
  testing::TempDir dir;
  testing::WriteText(dir.File("e.tsv"), "");
  EXPECT_TRUE(LoadExternalEmbeddings(dir.File("e.tsv")).empty());
  EXPECT_THROW(LoadExternalEmbeddings(dir.File("nope.tsv")), IoError);
}

TEST(ExternalEmbeddings, WriteReadRoundTrip) {
  testing::TempDir dir;
  std::vector<std::pair<std::string, EmbeddingVector>> rows = {
      {"q", HashedNgramEmbed("question text", 32)},
      {"q/a1", HashedNgramEmbed("an answer", 32)}};
  WriteEmbeddings(dir.File("r.tsv"), rows);
  const auto back = LoadExternalEmbeddings(dir.File("r.tsv"));
  ASSERT_EQ(back.size(), 2u);
  for (const auto& [id, v] : rows) {
    for (size_t i = 0; i < v.dim(); ++i) EXPECT_NEAR(back.at(id).values[i], v.values[i], 1e-15);
  }
}

TEST(LookupEmbedder, UnknownIdThrows) {
  LookupEmbedder lookup(LoadExternalEmbeddings(Fixture("embeddings_three.tsv")), 4);
  EXPECT_TRUE(lookup.contains("a"));
  EXPECT_FALSE(lookup.contains("z"));
  EXPECT_THROW(lookup.Embed("z"), ValidationError);
}

}  // namespace
}  // namespace apdfrank
