#pragma once

// Synthetic KC datasets and on-disk bundles.
//
// A bundle is a directory holding
//   meta.json       name, n, optional generator spec, seed
//   truth.json      optional ground-truth graph
//   responses.csv   optional learner x KC mastery matrix

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "maskcl/error.hpp"
#include "maskcl/fitness.hpp"
#include "maskcl/genome.hpp"
#include "maskcl/random.hpp"

namespace maskcl {

struct SyntheticSpec {
  std::size_t n = 15;
  double density = 0.15;
  std::size_t learners = 1000;
  double p_root = 0.6;
  double p_learn = 0.8;
  double p_slip = 0.02;
  double noise = 0.01;
  std::uint64_t seed = 0;

  friend bool operator==(const SyntheticSpec&, const SyntheticSpec&) = default;

  void validate() const {
    auto prob = [](double p, const char* name) {
      if (!(p >= 0.0 && p <= 1.0)) throw Error(ErrorKind::Validation, std::string(name) + " must lie in [0, 1]");
    };
    prob(density, "density");
    prob(p_root, "p_root");
    prob(p_learn, "p_learn");
    prob(p_slip, "p_slip");
    prob(noise, "noise");
    if (n < 2) throw Error(ErrorKind::Validation, "n must be at least 2");
    if (learners < 1) throw Error(ErrorKind::Validation, "learner count must be at least 1");
  }
};

inline void to_json(nlohmann::json& j, const SyntheticSpec& s) {
  j = {{"n", s.n},           {"density", s.density}, {"learners", s.learners},
       {"p_root", s.p_root}, {"p_learn", s.p_learn}, {"p_slip", s.p_slip},
       {"noise", s.noise},   {"seed", s.seed}};
}

inline void from_json(const nlohmann::json& j, SyntheticSpec& s) {
  j.at("n").get_to(s.n);
  j.at("density").get_to(s.density);
  j.at("learners").get_to(s.learners);
  j.at("p_root").get_to(s.p_root);
  j.at("p_learn").get_to(s.p_learn);
  j.at("p_slip").get_to(s.p_slip);
  j.at("noise").get_to(s.noise);
  j.at("seed").get_to(s.seed);
}

/// Named presets laddered on problem dimension: tiny (D=6), small (D=105),
/// medium (D=210), large (D=1225).
inline SyntheticSpec preset(const std::string& name) {
  SyntheticSpec s;
  if (name == "tiny") {
    s.n = 4;
    s.density = 0.5;
    s.learners = 200;
  } else if (name == "small") {
    s.n = 15;
    s.density = 0.15;
    s.learners = 1000;
  } else if (name == "medium") {
    s.n = 21;
    s.density = 0.15;
    s.learners = 2000;
  } else if (name == "large") {
    s.n = 50;
    s.density = 0.1;
    s.learners = 2000;
  } else {
    throw Error(ErrorKind::Validation, "unknown preset \"" + name + "\" (tiny, small, medium, large)");
  }
  return s;
}

struct Dataset {
  std::string name;
  std::size_t n = 0;
  std::optional<EdgeGenome> truth;
  std::optional<ResponseMatrix> responses;
  std::optional<SyntheticSpec> spec;
  std::uint64_t seed = 0;

  friend bool operator==(const Dataset&, const Dataset&) = default;

  void validate() const {
    if (!truth && !responses) {
      throw Error(ErrorKind::Validation, "dataset \"" + name + "\" has neither ground truth nor responses");
    }
    if (truth && truth->nodes() != n) {
      throw Error(ErrorKind::Validation, "ground truth has n=" + std::to_string(truth->nodes()) +
                                             ", dataset declares n=" + std::to_string(n));
    }
    if (responses && responses->kcs() != n) {
      throw Error(ErrorKind::Validation, "responses have " + std::to_string(responses->kcs()) +
                                             " KC columns, dataset declares n=" + std::to_string(n));
    }
  }
};

/// Each forward pair gets an edge independently with probability density.
inline KcGraph generate_dag(std::size_t n, double density, Rng& rng) {
  if (!(density >= 0.0 && density <= 1.0)) throw Error(ErrorKind::Validation, "density must lie in [0, 1]");
  EdgeGenome genome(n);
  for (std::size_t j = 0; j < genome.size(); ++j) {
    if (rng.bernoulli(density)) genome.set(j, true);
  }
  return decode(genome);
}

/// Noisy conjunctive-prerequisite mastery model. Learner l draws from its own
/// sub-stream seeded from one base draw of rng, so rows are independent of
/// the order in which they are simulated.
inline ResponseMatrix simulate_responses(const KcGraph& graph, const SyntheticSpec& spec, Rng& rng) {
  spec.validate();
  if (graph.n != spec.n) throw Error(ErrorKind::Validation, "graph and spec disagree on n");
  const auto parents = graph.parents();
  const std::uint64_t base = rng.next();
  ResponseMatrix responses(spec.learners, graph.n);
  std::vector<bool> mastered(graph.n);
  for (std::size_t l = 0; l < spec.learners; ++l) {
    Rng learner_rng(mix_seed(base + l));
    for (std::size_t k = 0; k < graph.n; ++k) {
      double p = spec.p_root;
      if (!parents[k].empty()) {
        bool ready = true;
        for (auto parent : parents[k]) ready = ready && mastered[parent];
        p = ready ? spec.p_learn : spec.p_slip;
      }
      mastered[k] = learner_rng.bernoulli(p);
    }
    for (std::size_t k = 0; k < graph.n; ++k) {
      bool observed = mastered[k];
      if (learner_rng.bernoulli(spec.noise)) observed = !observed;
      responses.set(l, k, observed);
    }
  }
  return responses;
}

/// Ground-truth DAG plus simulated responses, both drawn from spec.seed.
inline Dataset generate_dataset(const std::string& name, const SyntheticSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  const KcGraph graph = generate_dag(spec.n, spec.density, rng);
  Dataset ds;
  ds.name = name;
  ds.n = spec.n;
  ds.truth = encode(graph);
  ds.responses = simulate_responses(graph, spec, rng);
  ds.spec = spec;
  ds.seed = spec.seed;
  return ds;
}

namespace detail {

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot read " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

/// Writes via a temporary sibling and rename, so readers never see a partial file.
inline void write_text(const std::filesystem::path& path, const std::string& text) {
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
    out << text;
    if (!out) throw Error(ErrorKind::Io, "short write to " + path.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error(ErrorKind::Io, "cannot rename into " + path.string() + ": " + ec.message());
}

inline nlohmann::json parse_json_file(const std::filesystem::path& path) {
  try {
    return nlohmann::json::parse(read_text(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorKind::Format, path.string() + ": " + e.what());
  }
}

inline void ensure_directory(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) {
    throw Error(ErrorKind::Io, "cannot create directory " + dir.string());
  }
}

}  // namespace detail

inline void save_dataset(const Dataset& ds, const std::filesystem::path& dir) {
  ds.validate();
  detail::ensure_directory(dir);
  nlohmann::json meta = {{"name", ds.name}, {"n", ds.n}, {"seed", ds.seed}};
  meta["spec"] = ds.spec ? nlohmann::json(*ds.spec) : nlohmann::json(nullptr);
  detail::write_text(dir / "meta.json", meta.dump(2) + "\n");

  std::error_code ec;
  if (ds.truth) {
    detail::write_text(dir / "truth.json", graph_to_json(decode(*ds.truth)).dump() + "\n");
  } else {
    std::filesystem::remove(dir / "truth.json", ec);
  }
  if (ds.responses) {
    std::ostringstream csv;
    write_responses_csv(csv, *ds.responses);
    detail::write_text(dir / "responses.csv", csv.str());
  } else {
    std::filesystem::remove(dir / "responses.csv", ec);
  }
}

inline Dataset load_dataset(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw Error(ErrorKind::Io, "no dataset bundle at " + dir.string());
  const auto meta = detail::parse_json_file(dir / "meta.json");
  Dataset ds;
  try {
    ds.name = meta.at("name").get<std::string>();
    ds.n = meta.at("n").get<std::size_t>();
    ds.seed = meta.at("seed").get<std::uint64_t>();
    if (meta.contains("spec") && !meta["spec"].is_null()) ds.spec = meta["spec"].get<SyntheticSpec>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Format, (dir / "meta.json").string() + ": " + e.what());
  }
  if (std::filesystem::exists(dir / "truth.json")) {
    const auto graph = graph_from_json(detail::parse_json_file(dir / "truth.json"));
    ds.truth = encode(graph);
  }
  if (std::filesystem::exists(dir / "responses.csv")) {
    std::ifstream in(dir / "responses.csv", std::ios::binary);
    if (!in) throw Error(ErrorKind::Io, "cannot read " + (dir / "responses.csv").string());
    ds.responses = read_responses_csv(in);
  }
  ds.validate();
  return ds;
}

}  // namespace maskcl
