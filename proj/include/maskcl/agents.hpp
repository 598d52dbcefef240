#pragma once

// Three-agent parameter controller.
//
// At the end of every generation the Game Agent proposes the ambient
// pressure AP, the Positive Feedback Agent proposes PF and the Negative
// Feedback Agent proposes NF, in that order. Proposals take effect in the
// next generation. Each agent is backed by an LLM (one chat-completion
// request returning {"decision": number, "reasoning": string}), by a
// deterministic rule table, or is switched off and holds its parameter.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <deque>
#include <fstream>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "maskcl/error.hpp"

namespace maskcl {

enum class AgentRole { Game, PositiveFeedback, NegativeFeedback };

inline constexpr std::array<AgentRole, 3> kAgentOrder = {AgentRole::Game, AgentRole::PositiveFeedback,
                                                         AgentRole::NegativeFeedback};

inline const char* to_string(AgentRole role) {
  switch (role) {
    case AgentRole::Game: return "GAME";
    case AgentRole::PositiveFeedback: return "PFA";
    case AgentRole::NegativeFeedback: return "NFA";
  }
  return "?";
}

/// Name of the parameter each agent controls.
inline const char* parameter_name(AgentRole role) {
  switch (role) {
    case AgentRole::Game: return "AP";
    case AgentRole::PositiveFeedback: return "PF";
    case AgentRole::NegativeFeedback: return "NF";
  }
  return "?";
}

struct Bounds {
  double lo = 0.0;
  double hi = 1.0;

  double clamp(double v) const { return std::clamp(v, lo, hi); }
  bool contains(double v) const { return v >= lo && v <= hi; }

  friend bool operator==(const Bounds&, const Bounds&) = default;
};

struct HistoryEntry {
  std::uint64_t generation = 0;
  double loss = 0.0;
  double param = 0.0;
};

struct AgentObservation {
  AgentRole agent = AgentRole::Game;
  std::uint64_t generation = 0;
  double loss_current = 0.0;
  double loss_previous = 0.0;
  double delta_loss = 0.0;  // loss_previous - loss_current; positive means improving
  double param_current = 0.0;
  Bounds param_bounds;
  std::vector<HistoryEntry> history;  // oldest first
};

enum class DecisionSource { Llm, Rule, Fallback };

inline const char* to_string(DecisionSource s) {
  switch (s) {
    case DecisionSource::Llm: return "llm";
    case DecisionSource::Rule: return "rule";
    case DecisionSource::Fallback: return "fallback";
  }
  return "?";
}

struct AgentDecision {
  double value = 0.0;
  std::string reasoning;
  DecisionSource source = DecisionSource::Rule;
};

/// One decision-log line: what the agent saw and what it decided.
struct DecisionRecord {
  AgentObservation observation;
  AgentDecision decision;
  bool frozen = false;
  std::vector<std::string> warnings;
  std::vector<std::string> raw_responses;  // kept only for failed LLM attempts
};

struct RulePolicy {
  double step = 0.05;
  double epsilon = 1e-3;
};

enum class ControllerBackend { Llm, Rule, Off };

inline const char* to_string(ControllerBackend b) {
  switch (b) {
    case ControllerBackend::Llm: return "llm";
    case ControllerBackend::Rule: return "rule";
    case ControllerBackend::Off: return "off";
  }
  return "?";
}

inline ControllerBackend parse_backend(std::string_view s) {
  if (s == "llm") return ControllerBackend::Llm;
  if (s == "rule") return ControllerBackend::Rule;
  if (s == "off") return ControllerBackend::Off;
  throw Error(ErrorKind::Validation, "unknown agent backend \"" + std::string(s) + "\" (llm, rule, off)");
}

struct LlmSettings {
  std::string endpoint = "http://127.0.0.1:8000/v1/chat/completions";
  std::string model = "gpt-4o";
  std::string api_key_env = "MASKCL_LLM_API_KEY";
  double timeout_seconds = 30.0;
  // Upper bound on requests per decision, first attempt included.
  int max_retries = 2;
  double temperature = 0.0;
};

struct ControllerConfig {
  ControllerBackend backend = ControllerBackend::Rule;
  bool game_enabled = true;
  bool pfa_enabled = true;
  bool nfa_enabled = true;
  LlmSettings llm;
  RulePolicy rule;
  std::size_t history_window = 5;
  // Empty path means the built-in template for that agent.
  std::array<std::string, 3> prompt_paths;

  bool enabled(AgentRole role) const {
    switch (role) {
      case AgentRole::Game: return game_enabled;
      case AgentRole::PositiveFeedback: return pfa_enabled;
      case AgentRole::NegativeFeedback: return nfa_enabled;
    }
    return false;
  }

  void validate() const {
    if (!(llm.timeout_seconds > 0.0)) throw Error(ErrorKind::Config, "LLM timeout must be positive");
    if (llm.max_retries < 1) throw Error(ErrorKind::Config, "LLM max_retries must be at least 1");
    if (!(rule.step >= 0.0) || !(rule.epsilon >= 0.0)) {
      throw Error(ErrorKind::Config, "rule step and epsilon must be non-negative");
    }
  }
};

// ---------------------------------------------------------------------------
// Rule backend

inline AgentDecision rule_decide(const AgentObservation& obs, const RulePolicy& policy = {}) {
  const bool improving = obs.delta_loss > policy.epsilon;
  double value = obs.param_current;
  std::string reasoning;
  switch (obs.agent) {
    case AgentRole::Game:
      value += improving ? policy.step : -policy.step;
      reasoning = improving ? "loss improved; exploit more" : "loss stagnated; explore more";
      break;
    case AgentRole::PositiveFeedback:
    case AgentRole::NegativeFeedback:
      if (!improving) value += policy.step;
      reasoning = improving ? "loss improved; keep feedback strength" : "loss stagnated; strengthen feedback";
      break;
  }
  return {obs.param_bounds.clamp(value), std::move(reasoning), DecisionSource::Rule};
}

// ---------------------------------------------------------------------------
// LLM response parsing

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

/// Removes one surrounding ``` fence (with optional language tag).
inline std::string_view strip_fence(std::string_view s) {
  s = trim(s);
  if (s.size() < 6 || s.substr(0, 3) != "```" || s.substr(s.size() - 3) != "```") return s;
  s = s.substr(3, s.size() - 6);
  const auto newline = s.find('\n');
  if (newline != std::string_view::npos) {
    const auto tag = trim(s.substr(0, newline));
    if (tag.find('{') == std::string_view::npos) s = s.substr(newline + 1);
  }
  return trim(s);
}

}  // namespace detail

/// Accepts exactly one JSON object with a numeric "decision" and a string
/// "reasoning", optionally wrapped in a code fence.
inline AgentDecision parse_decision(std::string_view raw) {
  const auto body = detail::strip_fence(raw);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(body.begin(), body.end());
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorKind::Parse, std::string("decision is not a single JSON value: ") + e.what());
  }
  if (!j.is_object()) throw Error(ErrorKind::Parse, "decision must be a JSON object");
  if (!j.contains("decision") || !j["decision"].is_number()) {
    throw Error(ErrorKind::Parse, "\"decision\" must be present and numeric");
  }
  if (!j.contains("reasoning") || !j["reasoning"].is_string()) {
    throw Error(ErrorKind::Parse, "\"reasoning\" must be present and a string");
  }
  const double value = j["decision"].get<double>();
  if (!std::isfinite(value)) throw Error(ErrorKind::Parse, "\"decision\" is not finite");
  return {value, j["reasoning"].get<std::string>(), DecisionSource::Llm};
}

// ---------------------------------------------------------------------------
// Prompt templates

inline std::string default_prompt(AgentRole role) {
  static const char* const kCommon =
      "Generation: {{generation}}\n"
      "Best loss this generation: {{loss_current}}\n"
      "Best loss last generation: {{loss_previous}}\n"
      "Loss change (previous - current, positive is better): {{delta_loss}}\n"
      "Current {{param_name}}: {{param_current}}\n"
      "Allowed range: {{param_bounds}}\n"
      "Recent history (generation, loss, {{param_name}}):\n{{history}}\n\n"
      "Reply with a single JSON object and nothing else:\n"
      "{\"decision\": <new {{param_name}} value>, \"reasoning\": \"<one sentence>\"}\n";
  switch (role) {
    case AgentRole::Game:
      return std::string(
                 "You are the Game Agent ({{agent}}) steering an evolutionary search that learns the "
                 "edges of a knowledge-component prerequisite graph by minimizing a loss.\n"
                 "You set the ambient pressure AP: the fraction of each generation's offspring kept as the "
                 "superior sub-population. Higher AP exploits the current best structures; lower AP leaves "
                 "more individuals to the exploratory sub-population.\n"
                 "Decide whether and how much to change AP based on how much the loss changed.\n\n") +
             kCommon;
    case AgentRole::PositiveFeedback:
      return std::string(
                 "You are the Positive Feedback Agent ({{agent}}) in an evolutionary search that learns "
                 "the edges of a knowledge-component prerequisite graph by minimizing a loss.\n"
                 "You set the positive factor PF, which scales how strongly edges newly added by the "
                 "worse exploratory individuals (edges associated with increased loss) are deleted across "
                 "the exploratory population. PF = 0 disables this channel.\n"
                 "Decide whether and how much to change PF based on how much the loss changed.\n\n") +
             kCommon;
    case AgentRole::NegativeFeedback:
      return std::string(
                 "You are the Negative Feedback Agent ({{agent}}) in an evolutionary search that learns "
                 "the edges of a knowledge-component prerequisite graph by minimizing a loss.\n"
                 "You set the negative factor NF, which scales how strongly edges newly added by the "
                 "better exploratory individuals (edges associated with decreased loss) are added across "
                 "the exploratory population. NF = 0 disables this channel.\n"
                 "Decide whether and how much to change NF based on how much the loss changed.\n\n") +
             kCommon;
  }
  return kCommon;
}

namespace detail {

inline std::string number(double v) { return nlohmann::json(v).dump(); }

inline std::string field_value(const AgentObservation& obs, std::string_view name) {
  if (name == "agent") return to_string(obs.agent);
  if (name == "param_name") return parameter_name(obs.agent);
  if (name == "generation") return std::to_string(obs.generation);
  if (name == "loss_current") return number(obs.loss_current);
  if (name == "loss_previous") return number(obs.loss_previous);
  if (name == "delta_loss") return number(obs.delta_loss);
  if (name == "param_current") return number(obs.param_current);
  if (name == "param_bounds") return "[" + number(obs.param_bounds.lo) + ", " + number(obs.param_bounds.hi) + "]";
  if (name == "param_lo") return number(obs.param_bounds.lo);
  if (name == "param_hi") return number(obs.param_bounds.hi);
  if (name == "history") {
    if (obs.history.empty()) return "(none)";
    std::string out;
    for (const auto& h : obs.history) {
      if (!out.empty()) out += '\n';
      out += "(" + std::to_string(h.generation) + ", " + number(h.loss) + ", " + number(h.param) + ")";
    }
    return out;
  }
  throw Error(ErrorKind::Format, "unknown template placeholder {{" + std::string(name) + "}}");
}

}  // namespace detail

/// Substitutes every {{field}} with the observation's value.
inline std::string render_prompt(std::string_view tmpl, const AgentObservation& obs) {
  std::string out;
  std::size_t pos = 0;
  while (true) {
    const auto open = tmpl.find("{{", pos);
    if (open == std::string_view::npos) {
      out.append(tmpl.substr(pos));
      break;
    }
    const auto close = tmpl.find("}}", open + 2);
    if (close == std::string_view::npos) throw Error(ErrorKind::Format, "unterminated {{ in prompt template");
    out.append(tmpl.substr(pos, open - pos));
    out += detail::field_value(obs, detail::trim(tmpl.substr(open + 2, close - open - 2)));
    pos = close + 2;
  }
  return out;
}

// ---------------------------------------------------------------------------
// LLM backend

/// Thrown by transports on timeouts, connection failures and non-2xx replies.
class TransportError : public std::runtime_error {
 public:
  explicit TransportError(const std::string& what) : std::runtime_error(what) {}
};

/// Sends one prompt, returns the assistant's text.
class ChatTransport {
 public:
  virtual ~ChatTransport() = default;
  virtual std::string complete(const std::string& prompt) = 0;
};

/// Attempts up to settings.max_retries requests; on exhausting them the rule
/// table decides and the result is tagged as a fallback.
inline DecisionRecord llm_decide(const AgentObservation& obs, const LlmSettings& settings,
                                 ChatTransport& transport, std::string_view prompt_template,
                                 const RulePolicy& policy = {}) {
  DecisionRecord record;
  record.observation = obs;
  std::string prompt;
  try {
    prompt = render_prompt(prompt_template, obs);
  } catch (const Error& e) {
    record.warnings.emplace_back(e.what());
  }
  if (!prompt.empty()) {
    for (int attempt = 1; attempt <= settings.max_retries; ++attempt) {
      std::string raw;
      try {
        raw = transport.complete(prompt);
        AgentDecision decision = parse_decision(raw);
        if (!obs.param_bounds.contains(decision.value)) {
          record.warnings.push_back("decision " + detail::number(decision.value) + " outside " +
                                    detail::field_value(obs, "param_bounds") + "; clamped");
          decision.value = obs.param_bounds.clamp(decision.value);
        }
        record.decision = std::move(decision);
        return record;
      } catch (const TransportError& e) {
        record.warnings.push_back("attempt " + std::to_string(attempt) + ": transport: " + e.what());
      } catch (const Error& e) {
        record.warnings.push_back("attempt " + std::to_string(attempt) + ": " + e.what());
        record.raw_responses.push_back(raw);
      }
    }
  }
  record.decision = rule_decide(obs, policy);
  record.decision.source = DecisionSource::Fallback;
  return record;
}

// ---------------------------------------------------------------------------
// Controller

/// Current values of the three agent-controlled parameters.
struct AgentParameters {
  double ap = 0.4;
  double pf = 0.6;
  double nf = 0.4;

  double get(AgentRole role) const {
    switch (role) {
      case AgentRole::Game: return ap;
      case AgentRole::PositiveFeedback: return pf;
      case AgentRole::NegativeFeedback: return nf;
    }
    return 0.0;
  }
  void set(AgentRole role, double v) {
    switch (role) {
      case AgentRole::Game: ap = v; break;
      case AgentRole::PositiveFeedback: pf = v; break;
      case AgentRole::NegativeFeedback: nf = v; break;
    }
  }

  friend bool operator==(const AgentParameters&, const AgentParameters&) = default;
};

struct AgentBounds {
  Bounds ap{0.1, 0.9};
  Bounds pf{0.0, 1.5};
  Bounds nf{0.0, 1.5};

  const Bounds& get(AgentRole role) const {
    switch (role) {
      case AgentRole::Game: return ap;
      case AgentRole::PositiveFeedback: return pf;
      case AgentRole::NegativeFeedback: return nf;
    }
    return ap;
  }
};

class AgentController {
 public:
  explicit AgentController(ControllerConfig config, std::unique_ptr<ChatTransport> transport = nullptr)
      : config_(std::move(config)), transport_(std::move(transport)) {
    config_.validate();
    if (config_.backend == ControllerBackend::Llm && !transport_) {
      throw Error(ErrorKind::Config, "LLM backend selected without a chat transport");
    }
    for (std::size_t i = 0; i < kAgentOrder.size(); ++i) {
      const auto& path = config_.prompt_paths[i];
      templates_[i] = path.empty() ? default_prompt(kAgentOrder[i]) : read_template(path);
    }
  }

  const ControllerConfig& config() const noexcept { return config_; }
  const std::vector<DecisionRecord>& log() const noexcept { return log_; }

  /// Decides one agent's parameter and appends the record to the log.
  const DecisionRecord& decide(const AgentObservation& obs) {
    DecisionRecord record;
    if (config_.backend == ControllerBackend::Off || !config_.enabled(obs.agent)) {
      record.observation = obs;
      record.decision = {obs.param_current, "agent disabled; parameter frozen", DecisionSource::Rule};
      record.frozen = true;
    } else if (config_.backend == ControllerBackend::Rule) {
      record.observation = obs;
      record.decision = rule_decide(obs, config_.rule);
    } else {
      record = llm_decide(obs, config_.llm, *transport_, templates_[index(obs.agent)], config_.rule);
    }
    record.decision.value = obs.param_bounds.clamp(record.decision.value);
    log_.push_back(std::move(record));
    return log_.back();
  }

  /// Runs GAME, PFA, NFA in order for one generation and returns the
  /// parameters for the next one.
  AgentParameters step(std::uint64_t generation, double loss_previous, double loss_current,
                       const AgentParameters& current, const AgentBounds& bounds) {
    AgentParameters next = current;
    for (AgentRole role : kAgentOrder) {
      auto& hist = history_[index(role)];
      AgentObservation obs;
      obs.agent = role;
      obs.generation = generation;
      obs.loss_current = loss_current;
      obs.loss_previous = loss_previous;
      obs.delta_loss = loss_previous - loss_current;
      obs.param_bounds = bounds.get(role);
      obs.param_current = obs.param_bounds.clamp(current.get(role));
      obs.history.assign(hist.begin(), hist.end());
      next.set(role, decide(obs).decision.value);
      hist.push_back({generation, loss_current, obs.param_current});
      while (hist.size() > config_.history_window) hist.pop_front();
    }
    return next;
  }

 private:
  static std::size_t index(AgentRole role) { return static_cast<std::size_t>(role); }

  static std::string read_template(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::Io, "cannot read prompt template " + path);
    std::ostringstream text;
    text << in.rdbuf();
    return text.str();
  }

  ControllerConfig config_;
  std::unique_ptr<ChatTransport> transport_;
  std::array<std::string, 3> templates_;
  std::array<std::deque<HistoryEntry>, 3> history_;
  std::vector<DecisionRecord> log_;
};

// ---------------------------------------------------------------------------
// Decision log, one JSON object per line

inline nlohmann::json to_json(const DecisionRecord& r) {
  nlohmann::json history = nlohmann::json::array();
  for (const auto& h : r.observation.history) history.push_back({h.generation, h.loss, h.param});
  nlohmann::json j = {
      {"generation", r.observation.generation},
      {"agent", to_string(r.observation.agent)},
      {"parameter", parameter_name(r.observation.agent)},
      {"observation",
       {{"loss_current", r.observation.loss_current},
        {"loss_previous", r.observation.loss_previous},
        {"delta_loss", r.observation.delta_loss},
        {"param_current", r.observation.param_current},
        {"param_bounds", {r.observation.param_bounds.lo, r.observation.param_bounds.hi}},
        {"history", history}}},
      {"value", r.decision.value},
      {"reasoning", r.decision.reasoning},
      {"source", to_string(r.decision.source)},
      {"frozen", r.frozen},
  };
  if (!r.warnings.empty()) j["warnings"] = r.warnings;
  if (!r.raw_responses.empty()) j["raw_responses"] = r.raw_responses;
  return j;
}

}  // namespace maskcl
