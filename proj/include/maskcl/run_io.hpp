#pragma once

// Run artifacts and JSON configuration.
//
// A learn run writes into one directory:
//   result.json       best genome/graph, loss, FE, final parameters, trace
//   convergence.csv   generation,fe,best_loss,median_loss,ap,pf,nf
//   decisions.jsonl   one agent decision per line
//   best_graph.json   best genome decoded to {"n", "edges"}
// None of these carry wall-clock fields, so identical runs are byte-identical.

#include <charconv>
#include <filesystem>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "maskcl/agents.hpp"
#include "maskcl/dataset.hpp"
#include "maskcl/engine.hpp"
#include "maskcl/fitness.hpp"

namespace maskcl {

/// Shortest round-trip decimal form.
inline std::string format_number(double v) {
  char buf[64];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc{}) return std::to_string(v);
  return std::string(buf, end);
}

// ---------------------------------------------------------------------------
// Fitness selection

enum class FitnessChoice { Auto, Recovery, Consistency };

struct FitnessConfig {
  FitnessChoice kind = FitnessChoice::Auto;
  TargetOptions target;
};

inline FitnessChoice parse_fitness_choice(const std::string& s) {
  if (s == "auto") return FitnessChoice::Auto;
  if (s == "recovery") return FitnessChoice::Recovery;
  if (s == "consistency") return FitnessChoice::Consistency;
  throw Error(ErrorKind::Validation, "unknown fitness \"" + s + "\" (auto, recovery, consistency)");
}

inline const char* to_string(FitnessChoice c) {
  switch (c) {
    case FitnessChoice::Auto: return "auto";
    case FitnessChoice::Recovery: return "recovery";
    case FitnessChoice::Consistency: return "consistency";
  }
  return "?";
}

/// Auto picks recovery when ground truth is present, consistency otherwise.
inline FitnessBackend make_backend(const Dataset& ds, const FitnessConfig& cfg) {
  FitnessChoice kind = cfg.kind;
  if (kind == FitnessChoice::Auto) kind = ds.truth ? FitnessChoice::Recovery : FitnessChoice::Consistency;
  if (kind == FitnessChoice::Recovery) {
    if (!ds.truth) throw Error(ErrorKind::Config, "recovery fitness needs a dataset with ground truth");
    return FitnessBackend::recovery(*ds.truth);
  }
  if (!ds.responses) throw Error(ErrorKind::Config, "consistency fitness needs a dataset with responses");
  return FitnessBackend::consistency(*ds.responses, cfg.target);
}

// ---------------------------------------------------------------------------
// Config JSON (every key optional; missing keys keep their defaults)

namespace detail {

template <typename T>
void maybe(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) j.at(key).get_to(out);
}

inline void maybe_bounds(const nlohmann::json& j, const char* key, Bounds& out) {
  if (!j.contains(key)) return;
  const auto& b = j.at(key);
  if (!b.is_array() || b.size() != 2) throw Error(ErrorKind::Format, std::string(key) + " must be [lo, hi]");
  out = {b[0].get<double>(), b[1].get<double>()};
}

}  // namespace detail

inline void apply_engine_json(const nlohmann::json& j, EngineConfig& c) {
  try {
    detail::maybe(j, "population", c.population);
    detail::maybe(j, "max_fe", c.max_fe);
    detail::maybe(j, "ap", c.initial.ap);
    detail::maybe(j, "pf", c.initial.pf);
    detail::maybe(j, "nf", c.initial.nf);
    detail::maybe_bounds(j, "ap_bounds", c.bounds.ap);
    detail::maybe_bounds(j, "pf_bounds", c.bounds.pf);
    detail::maybe_bounds(j, "nf_bounds", c.bounds.nf);
    detail::maybe(j, "de_scale", c.de_scale);
    detail::maybe(j, "crossover", c.crossover);
    detail::maybe(j, "p_init", c.p_init);
    detail::maybe(j, "seed", c.seed);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Format, std::string("engine config: ") + e.what());
  }
}

inline nlohmann::json engine_to_json(const EngineConfig& c) {
  return {{"population", c.population},
          {"max_fe", c.max_fe},
          {"ap", c.initial.ap},
          {"pf", c.initial.pf},
          {"nf", c.initial.nf},
          {"ap_bounds", {c.bounds.ap.lo, c.bounds.ap.hi}},
          {"pf_bounds", {c.bounds.pf.lo, c.bounds.pf.hi}},
          {"nf_bounds", {c.bounds.nf.lo, c.bounds.nf.hi}},
          {"de_scale", c.de_scale},
          {"crossover", c.crossover},
          {"p_init", c.p_init},
          {"seed", c.seed}};
}

inline void apply_controller_json(const nlohmann::json& j, ControllerConfig& c) {
  try {
    if (j.contains("backend")) c.backend = parse_backend(j.at("backend").get<std::string>());
    if (j.contains("agents")) {
      const auto& a = j.at("agents");
      detail::maybe(a, "game", c.game_enabled);
      detail::maybe(a, "pfa", c.pfa_enabled);
      detail::maybe(a, "nfa", c.nfa_enabled);
    }
    if (j.contains("llm")) {
      const auto& l = j.at("llm");
      detail::maybe(l, "endpoint", c.llm.endpoint);
      detail::maybe(l, "model", c.llm.model);
      detail::maybe(l, "api_key_env", c.llm.api_key_env);
      detail::maybe(l, "timeout_seconds", c.llm.timeout_seconds);
      detail::maybe(l, "max_retries", c.llm.max_retries);
      detail::maybe(l, "temperature", c.llm.temperature);
    }
    if (j.contains("rule")) {
      detail::maybe(j.at("rule"), "step", c.rule.step);
      detail::maybe(j.at("rule"), "epsilon", c.rule.epsilon);
    }
    detail::maybe(j, "history_window", c.history_window);
    if (j.contains("prompts")) {
      const auto& p = j.at("prompts");
      detail::maybe(p, "game", c.prompt_paths[0]);
      detail::maybe(p, "pfa", c.prompt_paths[1]);
      detail::maybe(p, "nfa", c.prompt_paths[2]);
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Format, std::string("controller config: ") + e.what());
  }
}

inline nlohmann::json controller_to_json(const ControllerConfig& c) {
  return {{"backend", to_string(c.backend)},
          {"agents", {{"game", c.game_enabled}, {"pfa", c.pfa_enabled}, {"nfa", c.nfa_enabled}}},
          {"llm",
           {{"endpoint", c.llm.endpoint},
            {"model", c.llm.model},
            {"api_key_env", c.llm.api_key_env},
            {"timeout_seconds", c.llm.timeout_seconds},
            {"max_retries", c.llm.max_retries},
            {"temperature", c.llm.temperature}}},
          {"rule", {{"step", c.rule.step}, {"epsilon", c.rule.epsilon}}},
          {"history_window", c.history_window}};
}

inline void apply_fitness_json(const nlohmann::json& j, FitnessConfig& c) {
  try {
    if (j.contains("kind")) c.kind = parse_fitness_choice(j.at("kind").get<std::string>());
    detail::maybe(j, "tau", c.target.tau);
    detail::maybe(j, "min_support", c.target.min_support);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Format, std::string("fitness config: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Run artifacts

inline std::string convergence_csv(const RunResult& r) {
  std::ostringstream out;
  out << "generation,fe,best_loss,median_loss,ap,pf,nf\n";
  for (const auto& t : r.trace) {
    out << t.generation << ',' << t.fe << ',' << format_number(t.best_loss) << ','
        << format_number(t.median_loss) << ',' << format_number(t.ap) << ',' << format_number(t.pf) << ','
        << format_number(t.nf) << '\n';
  }
  return out.str();
}

inline std::string decisions_jsonl(const RunResult& r) {
  std::string out;
  for (const auto& d : r.decisions) out += to_json(d).dump() + "\n";
  return out;
}

inline nlohmann::json result_to_json(const RunResult& r, const EngineConfig& engine, const ControllerConfig& controller,
                                     const FitnessBackend& backend, const std::string& dataset_name) {
  nlohmann::json trace = nlohmann::json::array();
  for (const auto& t : r.trace) {
    trace.push_back({{"generation", t.generation},
                     {"fe", t.fe},
                     {"best_loss", t.best_loss},
                     {"median_loss", t.median_loss},
                     {"ap", t.ap},
                     {"pf", t.pf},
                     {"nf", t.nf}});
  }
  return {{"dataset", dataset_name},
          {"fitness", to_string(backend.kind())},
          {"dimension", backend.dimension()},
          {"best_loss", r.best_loss},
          {"best_genome", genome_to_json(r.best)},
          {"total_fe", r.total_fe},
          {"generations", r.generations},
          {"final_parameters", {{"ap", r.final_parameters.ap}, {"pf", r.final_parameters.pf}, {"nf", r.final_parameters.nf}}},
          {"decision_count", r.decisions.size()},
          {"engine", engine_to_json(engine)},
          {"controller", controller_to_json(controller)},
          {"trace", trace}};
}

inline void write_run_artifacts(const std::filesystem::path& dir, const RunResult& r, const EngineConfig& engine,
                                const ControllerConfig& controller, const FitnessBackend& backend,
                                const std::string& dataset_name) {
  detail::ensure_directory(dir);
  detail::write_text(dir / "result.json", result_to_json(r, engine, controller, backend, dataset_name).dump(2) + "\n");
  detail::write_text(dir / "convergence.csv", convergence_csv(r));
  detail::write_text(dir / "decisions.jsonl", decisions_jsonl(r));
  detail::write_text(dir / "best_graph.json", graph_to_json(decode(r.best)).dump() + "\n");
}

}  // namespace maskcl
