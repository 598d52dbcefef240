#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "maskcl/dataset.hpp"
#include "test_support.hpp"

using namespace maskcl;

TEST(GenerateDag, DensityExtremes) {
  Rng rng(1);
  EXPECT_TRUE(generate_dag(10, 0.0, rng).edges.empty());
  const auto full = generate_dag(21, 1.0, rng);
  EXPECT_EQ(full.edges.size(), 210u);
  EXPECT_TRUE(is_acyclic(full.edges, 21));
}

TEST(GenerateDag, SeededEdgeCountIsReproducible) {
  // Expected count is 0.15 * 105 = 15.75; the observed count is pinned per seed.
  Rng a(2024), b(2024);
  const auto g1 = generate_dag(15, 0.15, a);
  const auto g2 = generate_dag(15, 0.15, b);
  EXPECT_EQ(g1.edges, g2.edges);
  EXPECT_EQ(g1.edges.size(), 14u);
}

TEST(GenerateDag, RejectsBadDensity) {
  Rng rng(1);
  EXPECT_THROW(generate_dag(5, 1.5, rng), Error);
}

TEST(GenerateDag, AlwaysAcyclic) {
  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + rng.below(40);
    const auto g = generate_dag(n, rng.uniform(), rng);
    EXPECT_TRUE(is_acyclic(g.edges, n));
  }
}

namespace {

SyntheticSpec noiseless(std::size_t n, std::size_t learners) {
  SyntheticSpec s;
  s.n = n;
  s.learners = learners;
  s.p_slip = 0.0;
  s.noise = 0.0;
  return s;
}

}  // namespace

TEST(SimulateResponses, EverybodyMastersEverything) {
  auto spec = noiseless(6, 50);
  spec.p_root = 1.0;
  spec.p_learn = 1.0;
  Rng rng(5);
  const auto r = simulate_responses(generate_dag(6, 0.4, rng), spec, rng);
  for (std::size_t l = 0; l < 50; ++l) {
    for (std::size_t k = 0; k < 6; ++k) EXPECT_TRUE(r.mastered(l, k));
  }
}

TEST(SimulateResponses, NoRootsMeansNobodyMastersAnything) {
  // A chain makes every non-root KC depend on the root.
  auto spec = noiseless(5, 50);
  spec.p_root = 0.0;
  const KcGraph chain{5, {{0, 1}, {1, 2}, {2, 3}, {3, 4}}};
  Rng rng(6);
  const auto r = simulate_responses(chain, spec, rng);
  for (std::size_t l = 0; l < 50; ++l) {
    for (std::size_t k = 0; k < 5; ++k) EXPECT_FALSE(r.mastered(l, k));
  }
}

TEST(SimulateResponses, LearnProbabilityMonteCarlo) {
  auto spec = noiseless(2, 10000);
  spec.p_root = 1.0;
  spec.p_learn = 0.8;
  Rng rng(7);
  const auto r = simulate_responses(KcGraph{2, {{0, 1}}}, spec, rng);
  std::size_t count = 0;
  for (std::size_t l = 0; l < spec.learners; ++l) count += r.mastered(l, 1);
  EXPECT_NEAR(static_cast<double>(count) / 10000.0, 0.8, 0.02);
}

TEST(SimulateResponses, NoiselessMasteryImpliesAncestors) {
  Rng rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 3 + rng.below(10);
    auto spec = noiseless(n, 300);
    spec.p_root = rng.uniform();
    spec.p_learn = rng.uniform();
    const auto dag = generate_dag(n, 0.3, rng);
    const auto reach = test::reachability(n, dag.edges);
    const auto r = simulate_responses(dag, spec, rng);
    for (std::size_t l = 0; l < spec.learners; ++l) {
      for (std::size_t k = 0; k < n; ++k) {
        if (!r.mastered(l, k)) continue;
        for (std::size_t a = 0; a < n; ++a) {
          if (reach[a][k]) {
            EXPECT_TRUE(r.mastered(l, a)) << "learner " << l << " kc " << k << " ancestor " << a;
          }
        }
      }
    }
  }
}

TEST(SimulateResponses, RejectsInvalidSpec) {
  auto spec = noiseless(3, 10);
  spec.p_learn = 1.2;
  Rng rng(9);
  EXPECT_THROW(simulate_responses(KcGraph{3, {}}, spec, rng), Error);
  spec = noiseless(3, 0);
  EXPECT_THROW(simulate_responses(KcGraph{3, {}}, spec, rng), Error);
}

TEST(Presets, DimensionsFollowTheLadder) {
  EXPECT_EQ(gene_count(preset("tiny").n), 6u);
  EXPECT_EQ(gene_count(preset("small").n), 105u);
  EXPECT_EQ(gene_count(preset("medium").n), 210u);
  EXPECT_EQ(gene_count(preset("large").n), 1225u);
  EXPECT_THROW(preset("huge"), Error);
}

TEST(DatasetBundle, RoundTripKeepsSpecAndSeed) {
  test::TempDir dir("bundle");
  auto spec = preset("tiny");
  spec.seed = 42;
  const auto ds = generate_dataset("tiny", spec);
  save_dataset(ds, dir.path / "b");
  const auto loaded = load_dataset(dir.path / "b");
  EXPECT_EQ(loaded, ds);
  ASSERT_TRUE(loaded.spec.has_value());
  EXPECT_EQ(loaded.spec->seed, 42u);
  EXPECT_EQ(loaded.seed, 42u);
}

TEST(DatasetBundle, GenerationIsDeterministic) {
  auto spec = preset("small");
  spec.seed = 7;
  EXPECT_EQ(generate_dataset("a", spec), generate_dataset("a", spec));
}

TEST(DatasetBundle, NonBinaryResponseCellIsValidationError) {
  test::TempDir dir("badcell");
  const auto ds = generate_dataset("tiny", preset("tiny"));
  save_dataset(ds, dir.path);
  std::ofstream(dir.path / "responses.csv") << "learner,kc_0,kc_1,kc_2,kc_3\n0,1,0,1,0\n1,0,7,0,0\n";
  try {
    load_dataset(dir.path);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Validation);
    EXPECT_NE(std::string(e.what()).find("row 3"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("kc_1"), std::string::npos);
  }
}

TEST(DatasetBundle, BackwardTruthEdgeIsOrderViolation) {
  test::TempDir dir("backward");
  save_dataset(generate_dataset("tiny", preset("tiny")), dir.path);
  std::ofstream(dir.path / "truth.json") << R"({"n": 4, "edges": [[3, 2]]})";
  try {
    load_dataset(dir.path);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Validation);
    EXPECT_NE(std::string(e.what()).find("order"), std::string::npos);
  }
}

TEST(DatasetBundle, DimensionMismatchIsValidationError) {
  test::TempDir dir("dims");
  save_dataset(generate_dataset("tiny", preset("tiny")), dir.path);
  std::ofstream(dir.path / "truth.json") << R"({"n": 5, "edges": [[0, 1]]})";
  try {
    load_dataset(dir.path);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Validation);
  }
}

TEST(DatasetBundle, MissingDirectoryIsIoError) {
  try {
    load_dataset("/nonexistent/maskcl/bundle");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Io);
  }
}
