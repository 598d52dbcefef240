#pragma once

// Multi-sub-population differential evolution over edge genomes with
// bidirectional edge feedback.
//
// One generation:
//   1. binary DE produces N offspring, each remembering its parent;
//   2. offspring are evaluated and sorted by loss;
//   3. the best round(AP*N) form the superior sub-population, the rest the
//      exploratory one, split at its median into a better half (PFO) and a
//      worse half (NFO);
//   4. edges newly added by PFO members are counted as good, those added by
//      NFO members as bad; score s[e] = NF*good[e] - PF*bad[e];
//   5. every exploratory member gains edge e with probability s[e]/|EX| when
//      s[e] > 0 and loses it with probability -s[e]/|EX| when s[e] < 0;
//   6. changed members are re-evaluated, parents and offspring are merged and
//      the best N survive (the other N are the eliminated sub-population);
//   7. the agent controller updates AP, PF, NF for the next generation.
// The loop runs until the evaluations spent in the loop reach max_fe.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "maskcl/agents.hpp"
#include "maskcl/error.hpp"
#include "maskcl/fitness.hpp"
#include "maskcl/genome.hpp"
#include "maskcl/random.hpp"

namespace maskcl {

/// Engine inputs. Losses are always minimized.
struct EngineConfig {
  std::size_t population = 20;
  std::uint64_t max_fe = 10000;
  AgentParameters initial;  // AP = 0.4, PF = 0.6, NF = 0.4
  AgentBounds bounds;
  double de_scale = 0.5;   // probability of transferring a donor difference bit
  double crossover = 0.9;  // binomial crossover rate
  // Initial edge density. Binary DE cannot set a gene that no member
  // carries, so a sparse start leaves genes permanently unreachable
  // (probability (1 - p_init)^N per gene); 0.5 balances both values.
  double p_init = 0.5;
  std::uint64_t seed = 0;

  void validate() const {
    if (population < 4) throw Error(ErrorKind::Config, "population must be at least 4 for DE donors");
    if (max_fe < population) throw Error(ErrorKind::Config, "max_fe must be at least the population size");
    if (!(bounds.ap.lo > 0.0 && bounds.ap.lo <= bounds.ap.hi && bounds.ap.hi < 1.0)) {
      throw Error(ErrorKind::Config, "AP bounds must satisfy 0 < lo <= hi < 1");
    }
    for (const Bounds* b : {&bounds.pf, &bounds.nf}) {
      if (!(b->lo >= 0.0 && b->lo <= b->hi)) throw Error(ErrorKind::Config, "PF/NF bounds must satisfy 0 <= lo <= hi");
    }
    if (!bounds.ap.contains(initial.ap)) throw Error(ErrorKind::Config, "AP outside its bounds");
    if (!bounds.pf.contains(initial.pf)) throw Error(ErrorKind::Config, "PF outside its bounds");
    if (!bounds.nf.contains(initial.nf)) throw Error(ErrorKind::Config, "NF outside its bounds");
    if (!(de_scale > 0.0 && de_scale <= 1.0)) throw Error(ErrorKind::Config, "DE scale must lie in (0, 1]");
    if (!(crossover >= 0.0 && crossover <= 1.0)) throw Error(ErrorKind::Config, "crossover rate must lie in [0, 1]");
    if (!(p_init >= 0.0 && p_init <= 1.0)) throw Error(ErrorKind::Config, "p_init must lie in [0, 1]");
  }
};

struct Individual {
  EdgeGenome genome;
  std::optional<double> loss;
  std::optional<EdgeGenome> parent;  // set on offspring for one generation
};

struct Population {
  std::vector<Individual> members;
  std::uint64_t generation = 0;

  std::size_t size() const noexcept { return members.size(); }
};

/// Evaluates every unevaluated member; the counter is advanced once by the
/// number of evaluations performed. Returns that number.
inline std::size_t evaluate_pending(Population& pop, const FitnessBackend& backend, EvaluationCounter& counter) {
  std::size_t evaluated = 0;
  for (auto& m : pop.members) {
    if (!m.loss) {
      m.loss = backend.loss(m.genome);
      ++evaluated;
    }
  }
  counter.add(evaluated);
  return evaluated;
}

inline Population initialize(const EngineConfig& config, std::size_t nodes, const FitnessBackend& backend,
                             EvaluationCounter& counter, Rng& rng) {
  Population pop;
  pop.members.reserve(config.population);
  for (std::size_t i = 0; i < config.population; ++i) {
    Individual ind{EdgeGenome(nodes), std::nullopt, std::nullopt};
    for (std::size_t j = 0; j < ind.genome.size(); ++j) {
      if (rng.bernoulli(config.p_init)) ind.genome.set(j, true);
    }
    pop.members.push_back(std::move(ind));
  }
  evaluate_pending(pop, backend, counter);
  return pop;
}

/// One binary DE trial vector. Per gene: with probability CR (or at the
/// forced index) the gene becomes r1 XOR (r2 XOR r3, each difference bit
/// transferred with probability scale); otherwise it keeps the parent value.
inline EdgeGenome de_trial(const EdgeGenome& parent, const EdgeGenome& r1, const EdgeGenome& r2,
                           const EdgeGenome& r3, double scale, double crossover, Rng& rng) {
  EdgeGenome trial = parent;
  if (parent.size() == 0) return trial;
  const std::size_t forced = rng.below(parent.size());
  for (std::size_t j = 0; j < parent.size(); ++j) {
    if (rng.uniform() < crossover || j == forced) {
      bool gene = r1.test(j);
      if (r2.test(j) != r3.test(j) && rng.uniform() < scale) gene = !gene;
      trial.set(j, gene);
    }
  }
  return trial;
}

inline Population de_variation(const Population& pop, const EngineConfig& config, Rng& rng) {
  const std::size_t n = pop.size();
  if (n < 4) throw Error(ErrorKind::Config, "DE needs at least 4 individuals");
  Population offspring;
  offspring.generation = pop.generation + 1;
  offspring.members.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t r[3];
    for (std::size_t k = 0; k < 3; ++k) {
      std::size_t c;
      do {
        c = static_cast<std::size_t>(rng.below(n));
      } while (c == i || std::find(r, r + k, c) != r + k);
      r[k] = c;
    }
    const auto& parent = pop.members[i].genome;
    offspring.members.push_back({de_trial(parent, pop.members[r[0]].genome, pop.members[r[1]].genome,
                                          pop.members[r[2]].genome, config.de_scale, config.crossover, rng),
                                 std::nullopt, parent});
  }
  return offspring;
}

enum class SubPopulation { Superior, ExploratoryPositive, ExploratoryNegative };

struct PartitionLabels {
  std::vector<SubPopulation> tags;  // per member index
  std::vector<std::size_t> order;   // member indices sorted by loss, stable
  std::size_t superior = 0;
  std::size_t positive = 0;
  std::size_t negative = 0;

  std::size_t exploratory() const noexcept { return positive + negative; }
};

/// Indices sorted by ascending loss; ties keep index order.
inline std::vector<std::size_t> sort_by_loss(const Population& pop) {
  for (std::size_t i = 0; i < pop.size(); ++i) {
    if (!pop.members[i].loss) {
      throw Error(ErrorKind::State, "member " + std::to_string(i) + " has not been evaluated");
    }
  }
  std::vector<std::size_t> order(pop.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return *pop.members[a].loss < *pop.members[b].loss; });
  return order;
}

inline std::size_t superior_count(double ap, std::size_t n) {
  return std::min(n, static_cast<std::size_t>(std::lround(ap * static_cast<double>(n))));
}

inline PartitionLabels partition(const Population& offspring, double ap) {
  PartitionLabels labels;
  labels.order = sort_by_loss(offspring);
  const std::size_t n = offspring.size();
  labels.superior = superior_count(ap, n);
  const std::size_t ex = n - labels.superior;
  labels.positive = (ex + 1) / 2;
  labels.negative = ex - labels.positive;
  labels.tags.resize(n);
  for (std::size_t rank = 0; rank < n; ++rank) {
    SubPopulation tag = SubPopulation::Superior;
    if (rank >= labels.superior) {
      tag = rank < labels.superior + labels.positive ? SubPopulation::ExploratoryPositive
                                                     : SubPopulation::ExploratoryNegative;
    }
    labels.tags[labels.order[rank]] = tag;
  }
  return labels;
}

/// Per-gene tallies of edges newly added by exploratory offspring.
struct CountOnes {
  std::vector<std::uint32_t> good;  // added by PFO members
  std::vector<std::uint32_t> bad;   // added by NFO members
  std::vector<double> score;        // NF*good - PF*bad
};

inline CountOnes accumulate_feedback(const PartitionLabels& labels, const Population& offspring, double pf,
                                     double nf) {
  CountOnes counts;
  const std::size_t d = offspring.members.empty() ? 0 : offspring.members.front().genome.size();
  counts.good.assign(d, 0);
  counts.bad.assign(d, 0);
  counts.score.assign(d, 0.0);
  for (std::size_t i = 0; i < offspring.size(); ++i) {
    const auto tag = labels.tags[i];
    if (tag == SubPopulation::Superior) continue;
    const auto& m = offspring.members[i];
    if (!m.parent) throw Error(ErrorKind::State, "exploratory member " + std::to_string(i) + " has no parent genome");
    auto& tally = tag == SubPopulation::ExploratoryPositive ? counts.good : counts.bad;
    for (std::size_t e = 0; e < d; ++e) {
      if (m.genome.test(e) && !m.parent->test(e)) ++tally[e];
    }
  }
  for (std::size_t e = 0; e < d; ++e) {
    counts.score[e] = nf * static_cast<double>(counts.good[e]) - pf * static_cast<double>(counts.bad[e]);
  }
  return counts;
}

/// Applies the feedback scores to exploratory members. Members whose genome
/// changes lose their cached loss. RNG is consumed only for genes with a
/// nonzero score, in member-index then gene order.
inline Population feedback_refine(const PartitionLabels& labels, const Population& offspring,
                                  const CountOnes& counts, Rng& rng) {
  Population refined = offspring;
  const std::size_t ex = labels.exploratory();
  if (ex == 0) return refined;
  const double norm = static_cast<double>(ex);
  for (std::size_t i = 0; i < refined.size(); ++i) {
    if (labels.tags[i] == SubPopulation::Superior) continue;
    auto& m = refined.members[i];
    bool changed = false;
    for (std::size_t e = 0; e < counts.score.size(); ++e) {
      const double s = counts.score[e];
      if (s == 0.0) continue;
      const double p = std::min(1.0, std::abs(s) / norm);
      if (rng.uniform() < p) {
        const bool target = s > 0.0;
        if (m.genome.test(e) != target) {
          m.genome.set(e, target);
          changed = true;
        }
      }
    }
    if (changed) m.loss.reset();
  }
  return refined;
}

struct Selection {
  Population next;
  std::vector<Individual> eliminated;
};

/// Keeps the best N of parents + offspring. Ties favour parents, then lower
/// index. Survivors drop their parent genome.
inline Selection survivor_select(const Population& parents, const Population& offspring) {
  Population merged;
  merged.members.reserve(parents.size() + offspring.size());
  merged.members.insert(merged.members.end(), parents.members.begin(), parents.members.end());
  merged.members.insert(merged.members.end(), offspring.members.begin(), offspring.members.end());
  const auto order = sort_by_loss(merged);
  Selection sel;
  sel.next.generation = offspring.generation;
  const std::size_t keep = parents.size();
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    auto ind = merged.members[order[rank]];
    if (rank < keep) {
      ind.parent.reset();
      sel.next.members.push_back(std::move(ind));
    } else {
      sel.eliminated.push_back(std::move(ind));
    }
  }
  return sel;
}

inline double median_loss(const Population& pop) {
  std::vector<double> losses;
  losses.reserve(pop.size());
  for (const auto& m : pop.members) losses.push_back(m.loss.value_or(1.0));
  std::sort(losses.begin(), losses.end());
  if (losses.empty()) return 0.0;
  const std::size_t mid = losses.size() / 2;
  return losses.size() % 2 == 1 ? losses[mid] : 0.5 * (losses[mid - 1] + losses[mid]);
}

struct TraceRow {
  std::uint64_t generation = 0;
  std::uint64_t fe = 0;  // total evaluations so far, initialization included
  double best_loss = 0.0;
  double median_loss = 0.0;
  double ap = 0.0;  // parameters in effect during this generation
  double pf = 0.0;
  double nf = 0.0;

  friend bool operator==(const TraceRow&, const TraceRow&) = default;
};

struct RunResult {
  EdgeGenome best;
  double best_loss = 1.0;
  std::vector<TraceRow> trace;
  std::vector<DecisionRecord> decisions;
  std::uint64_t total_fe = 0;
  std::uint64_t generations = 0;
  AgentParameters final_parameters;
};

/// Per-generation snapshot for observers.
struct GenerationReport {
  std::uint64_t generation = 0;
  AgentParameters parameters;  // in effect during this generation
  PartitionLabels labels;
  std::size_t reevaluated = 0;
  std::uint64_t fe = 0;
  std::size_t population_size = 0;
  double best_loss = 0.0;
};

struct RunHooks {
  std::function<void(const GenerationReport&)> on_generation;
};

inline RunResult run(const EngineConfig& config, const FitnessBackend& backend, AgentController& controller,
                     const RunHooks& hooks = {}) {
  config.validate();
  Rng rng(config.seed);
  EvaluationCounter counter(config.max_fe);
  const std::size_t nodes = backend.target().nodes();

  Population pop = initialize(config, nodes, backend, counter, rng);
  const std::uint64_t initial_fe = counter.fe();
  AgentParameters params = config.initial;

  RunResult result;
  auto best_of = [](const Population& p) { return *p.members[sort_by_loss(p).front()].loss; };
  double previous_best = best_of(pop);
  result.trace.push_back({0, counter.fe(), previous_best, median_loss(pop), params.ap, params.pf, params.nf});

  while (counter.fe() - initial_fe < config.max_fe) {
    Population offspring = de_variation(pop, config, rng);
    evaluate_pending(offspring, backend, counter);
    const PartitionLabels labels = partition(offspring, params.ap);
    const CountOnes counts = accumulate_feedback(labels, offspring, params.pf, params.nf);
    Population refined = feedback_refine(labels, offspring, counts, rng);
    const std::size_t reevaluated = evaluate_pending(refined, backend, counter);
    Selection sel = survivor_select(pop, refined);
    pop = std::move(sel.next);

    const double current_best = best_of(pop);
    result.trace.push_back(
        {pop.generation, counter.fe(), current_best, median_loss(pop), params.ap, params.pf, params.nf});
    if (hooks.on_generation) {
      hooks.on_generation({pop.generation, params, labels, reevaluated, counter.fe(), pop.size(), current_best});
    }

    const AgentParameters proposed =
        controller.step(pop.generation, previous_best, current_best, params, config.bounds);
    params.ap = config.bounds.ap.clamp(proposed.ap);
    params.pf = config.bounds.pf.clamp(proposed.pf);
    params.nf = config.bounds.nf.clamp(proposed.nf);
    previous_best = current_best;
  }

  const auto& best = pop.members[sort_by_loss(pop).front()];
  result.best = best.genome;
  result.best_loss = *best.loss;
  result.decisions = controller.log();
  result.total_fe = counter.fe();
  result.generations = pop.generation;
  result.final_parameters = params;
  return result;
}

}  // namespace maskcl
