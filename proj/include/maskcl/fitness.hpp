#pragma once

// Loss backends. Both reduce to a normalized structural Hamming distance
// against a target genome:
//   recovery     - target is a known ground-truth graph;
//   consistency  - target is derived from learner response data by
//                  thresholding a per-pair prerequisite-consistency statistic.

#include <cstddef>
#include <cstdint>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "maskcl/error.hpp"
#include "maskcl/genome.hpp"

namespace maskcl {

/// L learners x n KCs binary mastery matrix, row-major.
class ResponseMatrix {
 public:
  ResponseMatrix() = default;

  ResponseMatrix(std::size_t learners, std::size_t kcs)
      : learners_(learners), kcs_(kcs), cells_(learners * kcs, 0) {
    if (learners < 1) throw Error(ErrorKind::Validation, "response matrix needs at least one learner");
    if (kcs < 2) throw Error(ErrorKind::Validation, "response matrix needs at least two KCs");
  }

  std::size_t learners() const noexcept { return learners_; }
  std::size_t kcs() const noexcept { return kcs_; }

  bool mastered(std::size_t learner, std::size_t kc) const { return cells_[learner * kcs_ + kc] != 0; }
  void set(std::size_t learner, std::size_t kc, bool value) {
    cells_[learner * kcs_ + kc] = value ? 1 : 0;
  }

  friend bool operator==(const ResponseMatrix&, const ResponseMatrix&) = default;

 private:
  std::size_t learners_ = 0;
  std::size_t kcs_ = 0;
  std::vector<std::uint8_t> cells_;
};

/// Support S and violation count V for candidate prerequisite a of b.
struct PairSupport {
  std::size_t support = 0;     // learners who mastered b
  std::size_t violations = 0;  // ... and did not master a
};

inline PairSupport pair_support(const ResponseMatrix& responses, std::size_t a, std::size_t b) {
  if (a >= b || b >= responses.kcs()) {
    throw Error(ErrorKind::InvalidPair, "consistency needs a < b < n");
  }
  PairSupport s;
  for (std::size_t l = 0; l < responses.learners(); ++l) {
    if (responses.mastered(l, b)) {
      ++s.support;
      if (!responses.mastered(l, a)) ++s.violations;
    }
  }
  return s;
}

/// c(a, b) = 1 - V / max(S, 1); 1 when nobody mastered b.
inline double edge_consistency(const ResponseMatrix& responses, std::size_t a, std::size_t b) {
  const auto s = pair_support(responses, a, b);
  if (s.support == 0) return 1.0;
  return 1.0 - static_cast<double>(s.violations) / static_cast<double>(s.support);
}

struct TargetOptions {
  double tau = 0.9;
  std::size_t min_support = 5;
};

inline EdgeGenome derive_target(const ResponseMatrix& responses, const TargetOptions& options = {}) {
  if (!(options.tau > 0.0 && options.tau <= 1.0)) {
    throw Error(ErrorKind::Config, "tau must lie in (0, 1]");
  }
  const std::size_t n = responses.kcs();
  EdgeGenome target(n);
  std::size_t j = 0;
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = a + 1; b < n; ++b, ++j) {
      const auto s = pair_support(responses, a, b);
      if (s.support < options.min_support || s.support == 0) continue;
      const double c = 1.0 - static_cast<double>(s.violations) / static_cast<double>(s.support);
      if (c >= options.tau) target.set(j, true);
    }
  }
  return target;
}

enum class FitnessKind { EdgeRecovery, PrerequisiteConsistency };

inline const char* to_string(FitnessKind kind) {
  return kind == FitnessKind::EdgeRecovery ? "recovery" : "consistency";
}

/// Immutable loss function. Pure; safe to share across evaluator threads.
class FitnessBackend {
 public:
  static FitnessBackend recovery(EdgeGenome truth) {
    return FitnessBackend(FitnessKind::EdgeRecovery, std::move(truth));
  }

  static FitnessBackend consistency(const ResponseMatrix& responses, const TargetOptions& options = {}) {
    return FitnessBackend(FitnessKind::PrerequisiteConsistency, derive_target(responses, options));
  }

  FitnessKind kind() const noexcept { return kind_; }
  const EdgeGenome& target() const noexcept { return target_; }
  std::size_t dimension() const noexcept { return target_.size(); }

  /// loss = shd(genome, target) / D, in [0, 1].
  double loss(const EdgeGenome& genome) const {
    if (genome.size() != target_.size()) {
      throw Error(ErrorKind::Dimension, "genome has " + std::to_string(genome.size()) +
                                            " genes, backend expects " + std::to_string(target_.size()));
    }
    if (target_.size() == 0) return 0.0;
    return static_cast<double>(shd(genome, target_)) / static_cast<double>(target_.size());
  }

 private:
  FitnessBackend(FitnessKind kind, EdgeGenome target) : kind_(kind), target_(std::move(target)) {}

  FitnessKind kind_;
  EdgeGenome target_;
};

/// Function-evaluation accounting against a budget.
class EvaluationCounter {
 public:
  EvaluationCounter() = default;
  explicit EvaluationCounter(std::uint64_t max_fe) : max_fe_(max_fe) {}

  std::uint64_t fe() const noexcept { return fe_; }
  std::uint64_t max_fe() const noexcept { return max_fe_; }

  void add(std::uint64_t evaluations) noexcept { fe_ += evaluations; }

 private:
  std::uint64_t fe_ = 0;
  std::uint64_t max_fe_ = 0;
};

/// Single evaluation: returns the loss and counts one FE.
inline double evaluate(const EdgeGenome& genome, const FitnessBackend& backend, EvaluationCounter& counter) {
  const double loss = backend.loss(genome);
  counter.add(1);
  return loss;
}

// CSV: header `learner,kc_0,...,kc_{n-1}`, one row per learner, binary cells.

inline void write_responses_csv(std::ostream& out, const ResponseMatrix& responses) {
  out << "learner";
  for (std::size_t k = 0; k < responses.kcs(); ++k) out << ",kc_" << k;
  out << '\n';
  for (std::size_t l = 0; l < responses.learners(); ++l) {
    out << l;
    for (std::size_t k = 0; k < responses.kcs(); ++k) out << ',' << (responses.mastered(l, k) ? '1' : '0');
    out << '\n';
  }
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

inline void strip_cr(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

}  // namespace detail

inline ResponseMatrix read_responses_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::Format, "responses CSV is empty");
  detail::strip_cr(line);
  const auto header = detail::split_csv_line(line);
  if (header.empty() || header[0] != "learner") {
    throw Error(ErrorKind::Format, "responses CSV line 1: first column must be \"learner\"");
  }
  const std::size_t n = header.size() - 1;
  for (std::size_t k = 0; k < n; ++k) {
    if (header[k + 1] != "kc_" + std::to_string(k)) {
      throw Error(ErrorKind::Format, "responses CSV line 1: column " + std::to_string(k + 2) +
                                         " must be \"kc_" + std::to_string(k) + "\"");
    }
  }
  std::vector<std::vector<bool>> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    detail::strip_cr(line);
    if (line.empty()) continue;
    const auto fields = detail::split_csv_line(line);
    if (fields.size() != n + 1) {
      throw Error(ErrorKind::Format, "responses CSV line " + std::to_string(line_no) + ": expected " +
                                         std::to_string(n + 1) + " fields, found " +
                                         std::to_string(fields.size()));
    }
    std::vector<bool> row(n);
    for (std::size_t k = 0; k < n; ++k) {
      const auto& cell = fields[k + 1];
      if (cell != "0" && cell != "1") {
        throw Error(ErrorKind::Validation, "responses CSV row " + std::to_string(line_no) + ", column kc_" +
                                               std::to_string(k) + ": non-binary cell \"" + cell + "\"");
      }
      row[k] = cell == "1";
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw Error(ErrorKind::Validation, "responses CSV has no learner rows");
  ResponseMatrix responses(rows.size(), n);
  for (std::size_t l = 0; l < rows.size(); ++l) {
    for (std::size_t k = 0; k < n; ++k) responses.set(l, k, rows[l][k]);
  }
  return responses;
}

}  // namespace maskcl
