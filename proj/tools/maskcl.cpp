// maskcl: generate datasets, learn KC graphs, run benchmarks and ablations.
//
// Exit codes: 0 success, 2 validation/configuration, 3 I/O, 4 run failure.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "maskcl/maskcl.hpp"

namespace fs = std::filesystem;
using namespace maskcl;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitIo = 3;
constexpr int kExitRun = 4;

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Io: return kExitIo;
    case ErrorKind::State: return kExitRun;
    default: return kExitValidation;
  }
}

struct GlobalOptions {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::string> config;
};

struct EngineFlags {
  std::optional<std::size_t> population;
  std::optional<std::uint64_t> max_fe;
  std::optional<double> ap, pf, nf, de_scale, crossover, p_init;
  std::optional<std::string> fitness;
  std::optional<double> tau;
  std::optional<std::size_t> min_support;
  std::optional<std::string> backend;
  std::vector<std::string> disabled_agents;
  std::optional<std::string> llm_endpoint, llm_model, llm_key_env, prompt_dir;
  std::optional<double> llm_timeout;
  std::optional<int> llm_retries;

  void attach(CLI::App* cmd) {
    cmd->add_option("--population", population, "Population size N");
    cmd->add_option("--max-fe", max_fe, "Function-evaluation budget");
    cmd->add_option("--ap", ap, "Initial ambient pressure");
    cmd->add_option("--pf", pf, "Initial positive factor");
    cmd->add_option("--nf", nf, "Initial negative factor");
    cmd->add_option("--de-scale", de_scale, "DE difference-transfer probability");
    cmd->add_option("--crossover", crossover, "DE crossover rate");
    cmd->add_option("--p-init", p_init, "Initial edge density");
    cmd->add_option("--fitness", fitness, "auto, recovery or consistency")
        ->check(CLI::IsMember({"auto", "recovery", "consistency"}));
    cmd->add_option("--tau", tau, "Consistency threshold for the derived target");
    cmd->add_option("--min-support", min_support, "Minimum support for the derived target");
    cmd->add_option("--agent-backend", backend, "llm, rule or off")->check(CLI::IsMember({"llm", "rule", "off"}));
    cmd->add_option("--disable-agent", disabled_agents, "Disable an agent (game, pfa, nfa); repeatable")
        ->check(CLI::IsMember({"game", "pfa", "nfa"}));
    cmd->add_option("--llm-endpoint", llm_endpoint, "Chat-completion endpoint URL");
    cmd->add_option("--llm-model", llm_model, "Model name sent to the endpoint");
    cmd->add_option("--llm-key-env", llm_key_env, "Environment variable holding the API token");
    cmd->add_option("--llm-timeout", llm_timeout, "Per-request timeout in seconds");
    cmd->add_option("--llm-retries", llm_retries, "Maximum requests per decision");
    cmd->add_option("--prompt-dir", prompt_dir, "Directory with game.txt, pfa.txt, nfa.txt templates");
  }

  void apply(EngineConfig& e, ControllerConfig& c, FitnessConfig& f) const {
    if (population) e.population = *population;
    if (max_fe) e.max_fe = *max_fe;
    if (ap) e.initial.ap = *ap;
    if (pf) e.initial.pf = *pf;
    if (nf) e.initial.nf = *nf;
    if (de_scale) e.de_scale = *de_scale;
    if (crossover) e.crossover = *crossover;
    if (p_init) e.p_init = *p_init;
    if (fitness) f.kind = parse_fitness_choice(*fitness);
    if (tau) f.target.tau = *tau;
    if (min_support) f.target.min_support = *min_support;
    if (backend) c.backend = parse_backend(*backend);
    for (const auto& a : disabled_agents) {
      if (a == "game") c.game_enabled = false;
      if (a == "pfa") c.pfa_enabled = false;
      if (a == "nfa") c.nfa_enabled = false;
    }
    if (llm_endpoint) c.llm.endpoint = *llm_endpoint;
    if (llm_model) c.llm.model = *llm_model;
    if (llm_key_env) c.llm.api_key_env = *llm_key_env;
    if (llm_timeout) c.llm.timeout_seconds = *llm_timeout;
    if (llm_retries) c.llm.max_retries = *llm_retries;
    if (prompt_dir) {
      const fs::path dir = *prompt_dir;
      c.prompt_paths = {(dir / "game.txt").string(), (dir / "pfa.txt").string(), (dir / "nfa.txt").string()};
    }
  }
};

/// Loads {"engine", "controller", "fitness"} from --config when given.
void load_config_file(const GlobalOptions& g, EngineConfig& e, ControllerConfig& c, FitnessConfig& f) {
  if (!g.config) return;
  const auto j = detail::parse_json_file(*g.config);
  if (j.contains("engine")) apply_engine_json(j["engine"], e);
  if (j.contains("controller")) apply_controller_json(j["controller"], c);
  if (j.contains("fitness")) apply_fitness_json(j["fitness"], f);
}

void require_llm_token(const ControllerConfig& c) {
  if (c.backend != ControllerBackend::Llm) return;
  if (std::getenv(c.llm.api_key_env.c_str()) == nullptr) {
    throw Error(ErrorKind::Validation, "--agent-backend llm needs the API token in $" + c.llm.api_key_env);
  }
}

// --- generate ---------------------------------------------------------------

struct GenerateFlags {
  std::string preset = "small";
  std::optional<std::string> name;
  std::optional<std::size_t> n, learners;
  std::optional<double> density, p_root, p_learn, p_slip, noise;
};

int cmd_generate(const GlobalOptions& g, const GenerateFlags& f) {
  SyntheticSpec spec = preset(f.preset);
  const bool custom = f.n || f.density;
  if (f.n) spec.n = *f.n;
  if (f.density) spec.density = *f.density;
  if (f.learners) spec.learners = *f.learners;
  if (f.p_root) spec.p_root = *f.p_root;
  if (f.p_learn) spec.p_learn = *f.p_learn;
  if (f.p_slip) spec.p_slip = *f.p_slip;
  if (f.noise) spec.noise = *f.noise;
  spec.seed = g.seed.value_or(0);
  const std::string name = f.name.value_or(custom ? "custom-n" + std::to_string(spec.n) : f.preset);
  const fs::path out = g.out.value_or("dataset-" + name + "-" + std::to_string(spec.seed));

  const Dataset ds = generate_dataset(name, spec);
  save_dataset(ds, out);
  std::cout << out.string() << "\n"
            << "name " << ds.name << "  n " << ds.n << "  D " << gene_count(ds.n) << "  edges "
            << ds.truth->popcount() << "  learners " << ds.responses->learners() << "\n";
  return kExitOk;
}

// --- learn ------------------------------------------------------------------

int cmd_learn(const GlobalOptions& g, const std::string& dataset_path, const EngineFlags& flags) {
  EngineConfig engine;
  ControllerConfig controller;
  FitnessConfig fitness;
  load_config_file(g, engine, controller, fitness);
  flags.apply(engine, controller, fitness);
  if (g.seed) engine.seed = *g.seed;
  engine.validate();
  controller.validate();
  require_llm_token(controller);

  const Dataset ds = load_dataset(dataset_path);
  const FitnessBackend backend = make_backend(ds, fitness);
  AgentController agents = make_controller(controller);
  const RunResult result = run(engine, backend, agents);

  const fs::path out = g.out.value_or("run");
  write_run_artifacts(out, result, engine, controller, backend, ds.name);
  std::cout << "final loss " << format_number(result.best_loss) << "  (fitness " << to_string(backend.kind())
            << ", D " << backend.dimension() << ", FE " << result.total_fe << ", generations "
            << result.generations << ")\n"
            << "artifacts in " << out.string() << "\n";
  return kExitOk;
}

// --- benchmark / ablate -----------------------------------------------------

int report_benchmark(const BenchmarkPlan& plan, const BenchmarkReport& report) {
  write_benchmark_summary(plan, report);
  verify_summary(plan, report);
  std::cout << summary_text(plan, report);
  if (report.failures > 0) {
    for (const auto& c : report.cells) {
      if (!c.ok) std::cerr << "cell " << c.dataset << "/" << to_string(c.variant) << "/" << c.seed << ": " << c.error << "\n";
    }
    return kExitRun;
  }
  return kExitOk;
}

int cmd_benchmark(const GlobalOptions& g, const std::string& plan_path, std::optional<std::size_t> jobs) {
  const auto j = detail::parse_json_file(plan_path);
  BenchmarkPlan plan = plan_from_json(j, fs::path(plan_path).parent_path());
  if (g.config) {
    FitnessConfig fitness = plan.fitness;
    load_config_file(g, plan.engine, plan.controller, fitness);
    plan.fitness = fitness;
  }
  if (g.out) plan.output_dir = *g.out;
  if (jobs) plan.jobs = *jobs;
  plan.validate();
  require_llm_token(plan.controller);
  const auto report = run_benchmark(plan, &std::cerr);
  return report_benchmark(plan, report);
}

int cmd_ablate(const GlobalOptions& g, const std::string& dataset_path, std::size_t seed_count,
               std::optional<std::size_t> jobs, const EngineFlags& flags) {
  BenchmarkPlan plan;
  load_config_file(g, plan.engine, plan.controller, plan.fitness);
  flags.apply(plan.engine, plan.controller, plan.fitness);
  plan.datasets = {dataset_path};
  plan.variants = ablation_variants();
  const std::uint64_t base = g.seed.value_or(0);
  for (std::size_t s = 0; s < seed_count; ++s) plan.seeds.push_back(base + s);
  plan.output_dir = g.out.value_or("ablation");
  if (jobs) plan.jobs = *jobs;
  plan.validate();
  require_llm_token(plan.controller);

  const auto report = run_benchmark(plan, &std::cerr);
  const int status = report_benchmark(plan, report);
  if (status != kExitOk) return status;
  const auto entries = ablation_entries(report);
  const std::string text = ablation_text(report.rows.front().dataset, entries);
  detail::write_text(fs::path(plan.output_dir) / "ablation.txt", text);
  detail::write_text(fs::path(plan.output_dir) / "ablation.csv", ablation_csv(entries));
  std::cout << "\n" << text;
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-agent differential evolution for knowledge-component graph structure learning"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalOptions global;
  app.add_option("--seed", global.seed, "RNG seed");
  app.add_option("--out", global.out, "Output path");
  app.add_option("--config", global.config, "JSON config file with engine/controller/fitness sections");

  GenerateFlags gen;
  auto* generate = app.add_subcommand("generate", "Generate a synthetic dataset bundle");
  generate->add_option("--preset", gen.preset, "tiny, small, medium or large")
      ->check(CLI::IsMember({"tiny", "small", "medium", "large"}));
  generate->add_option("--name", gen.name, "Dataset name");
  generate->add_option("--n", gen.n, "KC count (overrides the preset)");
  generate->add_option("--density", gen.density, "Edge probability per forward pair");
  generate->add_option("--learners", gen.learners, "Number of simulated learners");
  generate->add_option("--p-root", gen.p_root, "Mastery probability of parentless KCs");
  generate->add_option("--p-learn", gen.p_learn, "Mastery probability with all prerequisites mastered");
  generate->add_option("--p-slip", gen.p_slip, "Mastery probability with a prerequisite missing");
  generate->add_option("--noise", gen.noise, "Independent bit-flip probability");

  std::string learn_dataset;
  EngineFlags learn_flags;
  auto* learn = app.add_subcommand("learn", "Learn a KC graph from a dataset bundle");
  learn->add_option("dataset", learn_dataset, "Dataset bundle directory")->required();
  learn_flags.attach(learn);

  std::string plan_path;
  std::optional<std::size_t> bench_jobs;
  auto* benchmark = app.add_subcommand("benchmark", "Run a benchmark plan");
  benchmark->add_option("plan", plan_path, "Plan JSON file")->required();
  benchmark->add_option("--jobs", bench_jobs, "Parallel worker slots");

  std::string ablate_dataset;
  std::size_t ablate_seeds = 10;
  std::optional<std::size_t> ablate_jobs;
  EngineFlags ablate_flags;
  auto* ablate = app.add_subcommand("ablate", "Five-variant agent ablation on one dataset");
  ablate->add_option("dataset", ablate_dataset, "Dataset bundle directory")->required();
  ablate->add_option("--seeds", ablate_seeds, "Number of paired seeds, starting at --seed");
  ablate->add_option("--jobs", ablate_jobs, "Parallel worker slots");
  ablate_flags.attach(ablate);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (*generate) return cmd_generate(global, gen);
    if (*learn) return cmd_learn(global, learn_dataset, learn_flags);
    if (*benchmark) return cmd_benchmark(global, plan_path, bench_jobs);
    if (*ablate) return cmd_ablate(global, ablate_dataset, ablate_seeds, ablate_jobs, ablate_flags);
  } catch (const Error& e) {
    std::cerr << "maskcl: " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "maskcl: " << e.what() << "\n";
    return kExitRun;
  }
  return kExitOk;
}
