#pragma once

// Edge genomes over the upper triangle of a KC adjacency matrix.
//
// Nodes are KCs in dataset declaration order. A genome holds one bit per
// ordered pair (a, b) with a < b; a set bit means "a is a prerequisite of b".
// Because every edge points forward in the fixed order, any genome decodes to
// a DAG and no repair step is needed.

#include <algorithm>
#include <bit>
#include <cstddef>
#include <cstdint>
#include <queue>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "maskcl/error.hpp"

namespace maskcl {

using Edge = std::pair<std::size_t, std::size_t>;

/// Number of genes for n nodes: n(n-1)/2.
constexpr std::size_t gene_count(std::size_t n) { return n < 2 ? 0 : n * (n - 1) / 2; }

/// Row-major index of forward pair (a, b) in the upper triangle.
constexpr std::size_t pair_index(std::size_t a, std::size_t b, std::size_t n) {
  if (a >= b || b >= n) {
    throw Error(ErrorKind::InvalidPair, "pair (" + std::to_string(a) + ", " + std::to_string(b) +
                                            ") is not a forward pair for n=" + std::to_string(n));
  }
  return a * n - a * (a + 1) / 2 + (b - a - 1);
}

/// Inverse of pair_index.
constexpr Edge pair_of(std::size_t index, std::size_t n) {
  if (index >= gene_count(n)) {
    throw Error(ErrorKind::InvalidPair, "gene index " + std::to_string(index) + " out of range");
  }
  std::size_t a = 0;
  std::size_t row = n - 1;  // genes in row a
  while (index >= row) {
    index -= row;
    ++a;
    --row;
  }
  return {a, a + 1 + index};
}

/// Fixed-length bit vector, one gene per forward pair. Bits past size() in
/// the last word are always zero so word-wise comparisons are exact.
class EdgeGenome {
 public:
  EdgeGenome() = default;

  explicit EdgeGenome(std::size_t n) : n_(n), size_(gene_count(n)), words_((size_ + 63) / 64, 0) {}

  static EdgeGenome ones(std::size_t n) {
    EdgeGenome g(n);
    for (std::size_t j = 0; j < g.size(); ++j) g.set(j, true);
    return g;
  }

  /// Parses a '0'/'1' string of length n(n-1)/2.
  static EdgeGenome from_string(std::string_view bits, std::size_t n) {
    EdgeGenome g(n);
    if (bits.size() != g.size()) {
      throw Error(ErrorKind::Dimension, "bit string has length " + std::to_string(bits.size()) +
                                            ", expected " + std::to_string(g.size()));
    }
    for (std::size_t j = 0; j < bits.size(); ++j) {
      if (bits[j] == '1') {
        g.set(j, true);
      } else if (bits[j] != '0') {
        throw Error(ErrorKind::Format, "non-binary character at bit " + std::to_string(j));
      }
    }
    return g;
  }

  std::size_t nodes() const noexcept { return n_; }
  std::size_t size() const noexcept { return size_; }

  bool test(std::size_t j) const { return (words_[j >> 6] >> (j & 63)) & 1U; }

  void set(std::size_t j, bool value) {
    const std::uint64_t mask = std::uint64_t{1} << (j & 63);
    if (value) {
      words_[j >> 6] |= mask;
    } else {
      words_[j >> 6] &= ~mask;
    }
  }

  void flip(std::size_t j) { words_[j >> 6] ^= std::uint64_t{1} << (j & 63); }

  bool has_edge(std::size_t a, std::size_t b) const { return test(pair_index(a, b, n_)); }
  void set_edge(std::size_t a, std::size_t b, bool value) { set(pair_index(a, b, n_), value); }

  std::size_t popcount() const {
    std::size_t total = 0;
    for (auto w : words_) total += static_cast<std::size_t>(std::popcount(w));
    return total;
  }

  EdgeGenome complement() const {
    EdgeGenome g(n_);
    for (std::size_t j = 0; j < size_; ++j) g.set(j, !test(j));
    return g;
  }

  std::string to_string() const {
    std::string s(size_, '0');
    for (std::size_t j = 0; j < size_; ++j) {
      if (test(j)) s[j] = '1';
    }
    return s;
  }

  const std::vector<std::uint64_t>& words() const noexcept { return words_; }

  friend bool operator==(const EdgeGenome&, const EdgeGenome&) = default;

 private:
  std::size_t n_ = 0;
  std::size_t size_ = 0;
  std::vector<std::uint64_t> words_;
};

/// Structural Hamming distance: number of genes where the genomes differ.
inline std::size_t shd(const EdgeGenome& g1, const EdgeGenome& g2) {
  if (g1.size() != g2.size()) {
    throw Error(ErrorKind::Dimension, "genome lengths differ (" + std::to_string(g1.size()) + " vs " +
                                          std::to_string(g2.size()) + ")");
  }
  std::size_t distance = 0;
  for (std::size_t w = 0; w < g1.words().size(); ++w) {
    distance += static_cast<std::size_t>(std::popcount(g1.words()[w] ^ g2.words()[w]));
  }
  return distance;
}

/// A KC graph whose edges all point forward in the node order.
struct KcGraph {
  std::size_t n = 0;
  std::vector<Edge> edges;  // sorted by pair_index

  friend bool operator==(const KcGraph&, const KcGraph&) = default;

  std::vector<std::vector<std::size_t>> parents() const {
    std::vector<std::vector<std::size_t>> result(n);
    for (const auto& [a, b] : edges) result[b].push_back(a);
    return result;
  }
};

inline KcGraph decode(const EdgeGenome& genome) {
  KcGraph graph{genome.nodes(), {}};
  std::size_t j = 0;
  for (std::size_t a = 0; a < graph.n; ++a) {
    for (std::size_t b = a + 1; b < graph.n; ++b, ++j) {
      if (genome.test(j)) graph.edges.emplace_back(a, b);
    }
  }
  return graph;
}

/// Validates that every edge is a forward, in-range, unique pair.
inline EdgeGenome encode(const KcGraph& graph) {
  EdgeGenome genome(graph.n);
  for (const auto& [a, b] : graph.edges) {
    const std::size_t j = pair_index(a, b, graph.n);
    if (genome.test(j)) {
      throw Error(ErrorKind::Validation,
                  "duplicate edge (" + std::to_string(a) + ", " + std::to_string(b) + ")");
    }
    genome.set(j, true);
  }
  return genome;
}

/// Kahn's algorithm over an arbitrary directed edge list.
inline bool is_acyclic(const std::vector<Edge>& edges, std::size_t n) {
  std::vector<std::size_t> indegree(n, 0);
  std::vector<std::vector<std::size_t>> out(n);
  for (const auto& [from, to] : edges) {
    if (from >= n || to >= n) {
      throw Error(ErrorKind::Validation, "edge endpoint out of range for n=" + std::to_string(n));
    }
    out[from].push_back(to);
    ++indegree[to];
  }
  std::queue<std::size_t> ready;
  for (std::size_t v = 0; v < n; ++v) {
    if (indegree[v] == 0) ready.push(v);
  }
  std::size_t visited = 0;
  while (!ready.empty()) {
    const std::size_t v = ready.front();
    ready.pop();
    ++visited;
    for (auto w : out[v]) {
      if (--indegree[w] == 0) ready.push(w);
    }
  }
  return visited == n;
}

// JSON forms: graph {"n", "edges": [[a,b],...]}, genome {"n", "bits": "0101..."}.

inline nlohmann::json graph_to_json(const KcGraph& graph) {
  nlohmann::json edges = nlohmann::json::array();
  for (const auto& [a, b] : graph.edges) edges.push_back({a, b});
  return {{"n", graph.n}, {"edges", edges}};
}

inline KcGraph graph_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("n") || !j.contains("edges") || !j["n"].is_number_unsigned() ||
      !j["edges"].is_array()) {
    throw Error(ErrorKind::Format, "graph JSON needs unsigned \"n\" and array \"edges\"");
  }
  KcGraph graph{j["n"].get<std::size_t>(), {}};
  std::size_t k = 0;
  for (const auto& e : j["edges"]) {
    if (!e.is_array() || e.size() != 2 || !e[0].is_number_unsigned() || !e[1].is_number_unsigned()) {
      throw Error(ErrorKind::Format, "edges[" + std::to_string(k) + "] is not a pair of node ids");
    }
    const auto a = e[0].get<std::size_t>();
    const auto b = e[1].get<std::size_t>();
    if (a >= graph.n || b >= graph.n) {
      throw Error(ErrorKind::Validation, "edges[" + std::to_string(k) + "] node id out of range");
    }
    if (a >= b) {
      throw Error(ErrorKind::Validation, "edges[" + std::to_string(k) + "] = (" + std::to_string(a) +
                                             ", " + std::to_string(b) +
                                             ") violates the node order (requires a < b)");
    }
    graph.edges.emplace_back(a, b);
    ++k;
  }
  // Canonical order; also rejects duplicates.
  return decode(encode(graph));
}

inline nlohmann::json genome_to_json(const EdgeGenome& genome) {
  return {{"n", genome.nodes()}, {"bits", genome.to_string()}};
}

inline EdgeGenome genome_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("n") || !j.contains("bits") || !j["n"].is_number_unsigned() ||
      !j["bits"].is_string()) {
    throw Error(ErrorKind::Format, "genome JSON needs unsigned \"n\" and string \"bits\"");
  }
  return EdgeGenome::from_string(j["bits"].get<std::string>(), j["n"].get<std::size_t>());
}

}  // namespace maskcl
