#include <gtest/gtest.h>

#include <set>
#include <vector>

#include "maskcl/genome.hpp"
#include "maskcl/random.hpp"
#include "test_support.hpp"

using namespace maskcl;

TEST(PairIndex, FirstPairIsZero) { EXPECT_EQ(pair_index(0, 1, 4), 0u); }

TEST(PairIndex, MatchesRowMajorEnumeration) {
  // Oracle: walk the upper triangle row by row with a running counter.
  for (std::size_t n : {2u, 4u, 7u, 21u}) {
    std::size_t counter = 0;
    for (std::size_t a = 0; a < n; ++a) {
      for (std::size_t b = a + 1; b < n; ++b) {
        EXPECT_EQ(pair_index(a, b, n), counter);
        EXPECT_EQ(pair_of(counter, n), Edge(a, b));
        ++counter;
      }
    }
    EXPECT_EQ(counter, gene_count(n));
  }
  EXPECT_EQ(pair_index(2, 3, 4), 5u);
}

TEST(PairIndex, RejectsNonForwardPairs) {
  EXPECT_THROW(pair_index(1, 1, 4), Error);
  EXPECT_THROW(pair_index(3, 2, 4), Error);
  EXPECT_THROW(pair_index(0, 4, 4), Error);
  try {
    pair_index(2, 1, 4);
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::InvalidPair);
  }
}

TEST(GeneCount, ReproducesDatasetDimensions) {
  EXPECT_EQ(gene_count(21), 210u);
  EXPECT_EQ(gene_count(50), 1225u);
  EXPECT_EQ(gene_count(116), 6670u);
  EXPECT_EQ(gene_count(4), 6u);
  EXPECT_EQ(gene_count(1), 0u);
}

TEST(Decode, AllZeroIsEmpty) {
  const auto g = decode(EdgeGenome(5));
  EXPECT_EQ(g.n, 5u);
  EXPECT_TRUE(g.edges.empty());
}

TEST(Decode, AllOnesIsFullForwardDag) {
  const auto g = decode(EdgeGenome::ones(4));
  EXPECT_EQ(g.edges.size(), 6u);
  EXPECT_TRUE(is_acyclic(g.edges, 4));
}

TEST(Decode, SelectedBits) {
  EdgeGenome genome(4);
  genome.set(0, true);
  genome.set(5, true);
  const auto g = decode(genome);
  EXPECT_EQ(g.edges, (std::vector<Edge>{{0, 1}, {2, 3}}));
}

TEST(Encode, RejectsDuplicatesAndBackwardEdges) {
  EXPECT_THROW(encode(KcGraph{3, {{0, 1}, {0, 1}}}), Error);
  EXPECT_THROW(encode(KcGraph{3, {{2, 1}}}), Error);
}

TEST(Shd, Examples) {
  const auto g = EdgeGenome::from_string("101100", 4);
  EXPECT_EQ(shd(g, g), 0u);
  EXPECT_EQ(shd(g, g.complement()), 6u);
  EXPECT_EQ(shd(EdgeGenome::from_string("000000", 4), EdgeGenome::from_string("100010", 4)), 2u);
}

TEST(Shd, LengthMismatchIsDimensionError) {
  try {
    shd(EdgeGenome(4), EdgeGenome(5));
    FAIL() << "expected a dimension error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Dimension);
  }
}

TEST(IsAcyclic, Examples) {
  EXPECT_TRUE(is_acyclic({}, 3));
  EXPECT_FALSE(is_acyclic({{0, 1}, {1, 2}, {2, 0}}, 3));
  EXPECT_TRUE(is_acyclic({{0, 1}, {0, 2}, {1, 2}}, 3));
  EXPECT_FALSE(is_acyclic({{1, 1}}, 2));
  EXPECT_TRUE(is_acyclic({{2, 0}, {1, 0}}, 3));
}

TEST(GenomeString, RejectsWrongLengthAndCharacters) {
  EXPECT_THROW(EdgeGenome::from_string("10", 4), Error);
  EXPECT_THROW(EdgeGenome::from_string("10x000", 4), Error);
}

TEST(GenomeJson, GraphAndGenomeForms) {
  const auto genome = EdgeGenome::from_string("100001", 4);
  const auto gj = graph_to_json(decode(genome));
  EXPECT_EQ(gj.dump(), R"({"edges":[[0,1],[2,3]],"n":4})");
  EXPECT_EQ(encode(graph_from_json(gj)), genome);
  EXPECT_EQ(genome_to_json(genome).dump(), R"({"bits":"100001","n":4})");
  EXPECT_EQ(genome_from_json(genome_to_json(genome)), genome);
}

TEST(GenomeJson, BackwardEdgeIsValidationError) {
  const auto j = nlohmann::json::parse(R"({"n": 4, "edges": [[3, 2]]})");
  try {
    graph_from_json(j);
    FAIL() << "expected a validation error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Validation);
  }
}

// Properties over random genomes.

TEST(GenomeProperties, DecodeEncodeIsIdentityAndAcyclic) {
  Rng rng(11);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 2 + rng.below(30);
    const auto g = test::random_genome(n, rng.uniform(), rng);
    const auto graph = decode(g);
    EXPECT_EQ(encode(graph), g);
    EXPECT_TRUE(is_acyclic(graph.edges, n));
    EXPECT_EQ(graph.edges.size(), g.popcount());
  }
}

TEST(GenomeProperties, PairIndexIsBijective) {
  for (std::size_t n : {3u, 10u, 50u}) {
    std::set<std::size_t> seen;
    for (std::size_t a = 0; a < n; ++a) {
      for (std::size_t b = a + 1; b < n; ++b) seen.insert(pair_index(a, b, n));
    }
    EXPECT_EQ(seen.size(), gene_count(n));
    EXPECT_EQ(*seen.rbegin(), gene_count(n) - 1);
  }
}

TEST(GenomeProperties, ShdIsAMetric) {
  Rng rng(12);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 2 + rng.below(25);
    const auto x = test::random_genome(n, 0.3, rng);
    const auto y = test::random_genome(n, 0.3, rng);
    const auto z = test::random_genome(n, 0.3, rng);
    EXPECT_EQ(shd(x, y), shd(y, x));
    EXPECT_EQ(shd(x, y) == 0, x == y);
    EXPECT_LE(shd(x, z), shd(x, y) + shd(y, z));
    EXPECT_EQ(shd(x, y), test::hamming(x.to_string(), y.to_string()));
  }
}
