#pragma once

// Benchmark harness: runs every (dataset x variant x seed) cell, aggregates
// final losses per (dataset, variant) and writes
//   <out>/<dataset>/<variant>/seed-<s>/   per-cell run artifacts
//   <out>/cells.csv                       one final loss per cell (boxplot-ready)
//   <out>/summary.csv, summary.txt        mean, SD, median, IQR, sign counts
// The summary is recomputed from the per-cell result.json files before it is
// reported; a mismatch is an error.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <iomanip>
#include <map>
#include <memory>
#include <mutex>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "maskcl/agents.hpp"
#include "maskcl/dataset.hpp"
#include "maskcl/engine.hpp"
#include "maskcl/llm_client.hpp"
#include "maskcl/run_io.hpp"

namespace maskcl {

enum class Variant { Full, NoGame, NoPositive, NoNegative, NoAgents, PlainDe };

inline const char* to_string(Variant v) {
  switch (v) {
    case Variant::Full: return "full";
    case Variant::NoGame: return "-GA";
    case Variant::NoPositive: return "-PFA";
    case Variant::NoNegative: return "-NFA";
    case Variant::NoAgents: return "-MAS";
    case Variant::PlainDe: return "plain-DE";
  }
  return "?";
}

inline Variant parse_variant(const std::string& s) {
  for (Variant v : {Variant::Full, Variant::NoGame, Variant::NoPositive, Variant::NoNegative, Variant::NoAgents,
                    Variant::PlainDe}) {
    if (s == to_string(v)) return v;
  }
  throw Error(ErrorKind::Validation, "unknown variant \"" + s + "\" (full, -GA, -PFA, -NFA, -MAS, plain-DE)");
}

/// Ablations switch agents off (their parameter stays at the configured
/// initial value). plain-DE also zeroes PF and NF, which disables feedback.
inline void apply_variant(Variant v, EngineConfig& engine, ControllerConfig& controller) {
  switch (v) {
    case Variant::Full: break;
    case Variant::NoGame: controller.game_enabled = false; break;
    case Variant::NoPositive: controller.pfa_enabled = false; break;
    case Variant::NoNegative: controller.nfa_enabled = false; break;
    case Variant::NoAgents: controller.backend = ControllerBackend::Off; break;
    case Variant::PlainDe:
      controller.backend = ControllerBackend::Off;
      engine.initial.pf = 0.0;
      engine.initial.nf = 0.0;
      engine.bounds.pf.lo = 0.0;
      engine.bounds.nf.lo = 0.0;
      break;
  }
}

/// Builds the controller, with an HTTP transport for the LLM backend.
inline AgentController make_controller(const ControllerConfig& cfg) {
  std::unique_ptr<ChatTransport> transport;
  if (cfg.backend == ControllerBackend::Llm) transport = std::make_unique<HttpChatTransport>(cfg.llm);
  return AgentController(cfg, std::move(transport));
}

struct BenchmarkPlan {
  std::vector<std::string> datasets;  // bundle directories
  std::vector<Variant> variants;      // the first one is the reference for sign counts
  std::vector<std::uint64_t> seeds;
  EngineConfig engine;
  ControllerConfig controller;
  FitnessConfig fitness;
  std::string output_dir = "bench";
  std::size_t jobs = 1;

  void validate() const {
    if (datasets.empty()) throw Error(ErrorKind::Validation, "plan lists no datasets");
    if (variants.empty()) throw Error(ErrorKind::Validation, "plan lists no variants");
    if (seeds.size() < 3) throw Error(ErrorKind::Validation, "plan needs at least 3 seeds");
    if (jobs < 1) throw Error(ErrorKind::Validation, "jobs must be at least 1");
    engine.validate();
    controller.validate();
  }
};

/// Plan JSON: {"datasets": [...], "variants": [...], "seeds": [...],
/// "engine": {...}, "controller": {...}, "fitness": {...}, "output_dir": "...", "jobs": n}.
/// Relative dataset paths resolve against base_dir.
inline BenchmarkPlan plan_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {}) {
  BenchmarkPlan plan;
  try {
    if (!j.is_object()) throw Error(ErrorKind::Validation, "plan must be a JSON object");
    for (const auto& d : j.value("datasets", nlohmann::json::array())) {
      std::filesystem::path p = d.get<std::string>();
      plan.datasets.push_back((p.is_relative() && !base_dir.empty() ? base_dir / p : p).string());
    }
    for (const auto& v : j.value("variants", nlohmann::json::array())) plan.variants.push_back(parse_variant(v.get<std::string>()));
    for (const auto& s : j.value("seeds", nlohmann::json::array())) plan.seeds.push_back(s.get<std::uint64_t>());
    if (j.contains("engine")) apply_engine_json(j["engine"], plan.engine);
    if (j.contains("controller")) apply_controller_json(j["controller"], plan.controller);
    if (j.contains("fitness")) apply_fitness_json(j["fitness"], plan.fitness);
    if (j.contains("output_dir")) plan.output_dir = j["output_dir"].get<std::string>();
    if (j.contains("jobs")) plan.jobs = j["jobs"].get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Format, std::string("plan: ") + e.what());
  }
  plan.validate();
  return plan;
}

// ---------------------------------------------------------------------------
// Statistics

struct LossStats {
  std::size_t count = 0;
  double mean = 0.0;
  double sd = 0.0;  // sample SD (n - 1); 0 for a single value
  double median = 0.0;
  double q1 = 0.0;
  double q3 = 0.0;
  double min = 0.0;
  double max = 0.0;

  double iqr() const { return q3 - q1; }
};

/// Linear-interpolation quantile of sorted data.
inline double quantile(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) return 0.0;
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

inline LossStats summarize(std::vector<double> values) {
  LossStats s;
  s.count = values.size();
  if (values.empty()) return s;
  std::sort(values.begin(), values.end());
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.sd = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  s.median = quantile(values, 0.5);
  s.q1 = quantile(values, 0.25);
  s.q3 = quantile(values, 0.75);
  s.min = values.front();
  s.max = values.back();
  return s;
}

struct SignCount {
  std::size_t better = 0;  // variant loss < reference loss
  std::size_t equal = 0;
  std::size_t worse = 0;
};

// ---------------------------------------------------------------------------
// Running

struct CellResult {
  std::string dataset;  // dataset name from meta.json
  Variant variant = Variant::Full;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  double best_loss = 0.0;
  std::uint64_t total_fe = 0;
  std::filesystem::path dir;
};

struct SummaryRow {
  std::string dataset;
  Variant variant = Variant::Full;
  LossStats stats;
  SignCount vs_reference;  // paired by seed against the plan's first variant
  bool best_in_row = false;
};

struct BenchmarkReport {
  std::vector<CellResult> cells;  // dataset-major, then variant, then seed
  std::vector<SummaryRow> rows;
  std::size_t failures = 0;
};

inline std::filesystem::path cell_dir(const std::filesystem::path& out, const std::string& dataset, Variant v,
                                      std::uint64_t seed) {
  return out / dataset / to_string(v) / ("seed-" + std::to_string(seed));
}

namespace detail {

inline std::vector<SummaryRow> aggregate(const BenchmarkPlan& plan, const std::vector<CellResult>& cells) {
  std::vector<SummaryRow> rows;
  std::map<std::string, std::size_t> first_row;
  for (std::size_t d = 0; d < plan.datasets.size(); ++d) {
    const std::size_t base = d * plan.variants.size() * plan.seeds.size();
    const std::string& name = cells[base].dataset;
    const std::size_t row_start = rows.size();
    for (std::size_t v = 0; v < plan.variants.size(); ++v) {
      SummaryRow row;
      row.dataset = name;
      row.variant = plan.variants[v];
      std::vector<double> losses;
      for (std::size_t s = 0; s < plan.seeds.size(); ++s) {
        const auto& cell = cells[base + v * plan.seeds.size() + s];
        const auto& ref = cells[base + s];
        if (!cell.ok) continue;
        losses.push_back(cell.best_loss);
        if (!ref.ok) continue;
        if (cell.best_loss < ref.best_loss) {
          ++row.vs_reference.better;
        } else if (cell.best_loss == ref.best_loss) {
          ++row.vs_reference.equal;
        } else {
          ++row.vs_reference.worse;
        }
      }
      row.stats = summarize(std::move(losses));
      rows.push_back(row);
    }
    double best = 2.0;
    for (std::size_t r = row_start; r < rows.size(); ++r) {
      if (rows[r].stats.count > 0) best = std::min(best, rows[r].stats.mean);
    }
    for (std::size_t r = row_start; r < rows.size(); ++r) {
      rows[r].best_in_row = rows[r].stats.count > 0 && rows[r].stats.mean == best;
    }
  }
  return rows;
}

}  // namespace detail

/// Runs every cell (in parallel when plan.jobs > 1) and writes per-cell artifacts.
inline BenchmarkReport run_benchmark(const BenchmarkPlan& plan, std::ostream* progress = nullptr) {
  plan.validate();
  const std::filesystem::path out = plan.output_dir;
  detail::ensure_directory(out);

  struct Prepared {
    std::string name;
    std::optional<FitnessBackend> backend;
    std::string error;
  };
  std::vector<Prepared> prepared;
  for (const auto& path : plan.datasets) {
    Prepared p;
    p.name = std::filesystem::path(path).filename().string();
    try {
      const Dataset ds = load_dataset(path);
      p.name = ds.name;
      p.backend = make_backend(ds, plan.fitness);
    } catch (const std::exception& e) {
      p.error = e.what();
    }
    prepared.push_back(std::move(p));
  }

  BenchmarkReport report;
  for (std::size_t d = 0; d < plan.datasets.size(); ++d) {
    for (Variant v : plan.variants) {
      for (std::uint64_t seed : plan.seeds) {
        CellResult cell;
        cell.dataset = prepared[d].name;
        cell.variant = v;
        cell.seed = seed;
        cell.dir = cell_dir(out, cell.dataset, v, seed);
        report.cells.push_back(std::move(cell));
      }
    }
  }

  std::mutex progress_mutex;
  std::atomic<std::size_t> next{0};
  const std::size_t cells_per_dataset = plan.variants.size() * plan.seeds.size();
  auto worker = [&] {
    for (std::size_t i = next++; i < report.cells.size(); i = next++) {
      auto& cell = report.cells[i];
      const auto& prep = prepared[i / cells_per_dataset];
      try {
        if (!prep.backend) throw Error(ErrorKind::Validation, prep.error);
        EngineConfig engine = plan.engine;
        ControllerConfig controller = plan.controller;
        engine.seed = cell.seed;
        apply_variant(cell.variant, engine, controller);
        AgentController agents = make_controller(controller);
        const RunResult result = run(engine, *prep.backend, agents);
        write_run_artifacts(cell.dir, result, engine, controller, *prep.backend, cell.dataset);
        cell.best_loss = result.best_loss;
        cell.total_fe = result.total_fe;
        cell.ok = true;
      } catch (const std::exception& e) {
        cell.error = e.what();
      }
      if (progress) {
        std::lock_guard lock(progress_mutex);
        *progress << "[" << (i + 1) << "/" << report.cells.size() << "] " << cell.dataset << " "
                  << to_string(cell.variant) << " seed " << cell.seed << ": "
                  << (cell.ok ? "loss " + format_number(cell.best_loss) : "FAILED " + cell.error) << "\n";
      }
    }
  };
  const std::size_t jobs = std::min(plan.jobs, report.cells.size());
  if (jobs <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < jobs; ++t) pool.emplace_back(worker);
  }

  for (const auto& c : report.cells) report.failures += c.ok ? 0 : 1;
  report.rows = detail::aggregate(plan, report.cells);
  return report;
}

/// Re-reads every successful cell's result.json and recomputes the summary;
/// throws if any statistic differs from the report.
inline void verify_summary(const BenchmarkPlan& plan, const BenchmarkReport& report) {
  std::vector<CellResult> reread = report.cells;
  for (auto& cell : reread) {
    if (!cell.ok) continue;
    const auto j = detail::parse_json_file(cell.dir / "result.json");
    cell.best_loss = j.at("best_loss").get<double>();
  }
  const auto rows = detail::aggregate(plan, reread);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto& a = rows[r].stats;
    const auto& b = report.rows[r].stats;
    if (a.count != b.count || a.mean != b.mean || a.sd != b.sd || a.median != b.median || a.q1 != b.q1 ||
        a.q3 != b.q3) {
      throw Error(ErrorKind::State, "summary for " + rows[r].dataset + "/" + to_string(rows[r].variant) +
                                        " does not recompute from its result files");
    }
  }
}

inline std::string cells_csv(const BenchmarkReport& report) {
  std::ostringstream out;
  out << "dataset,variant,seed,status,best_loss,total_fe\n";
  for (const auto& c : report.cells) {
    out << c.dataset << ',' << to_string(c.variant) << ',' << c.seed << ',' << (c.ok ? "ok" : "failed") << ','
        << (c.ok ? format_number(c.best_loss) : "") << ',' << (c.ok ? std::to_string(c.total_fe) : "") << '\n';
  }
  return out.str();
}

inline std::string summary_csv(const BenchmarkReport& report) {
  std::ostringstream out;
  out << "dataset,variant,runs,mean,sd,median,q1,q3,min,max,better,equal,worse,best\n";
  for (const auto& r : report.rows) {
    const auto& s = r.stats;
    out << r.dataset << ',' << to_string(r.variant) << ',' << s.count << ',' << format_number(s.mean) << ','
        << format_number(s.sd) << ',' << format_number(s.median) << ',' << format_number(s.q1) << ','
        << format_number(s.q3) << ',' << format_number(s.min) << ',' << format_number(s.max) << ','
        << r.vs_reference.better << ',' << r.vs_reference.equal << ',' << r.vs_reference.worse << ','
        << (r.best_in_row ? 1 : 0) << '\n';
  }
  return out.str();
}

inline std::string scientific(double v, int digits = 2) {
  std::ostringstream s;
  s << std::scientific << std::setprecision(digits) << v;
  return s.str();
}

/// Mean (SD) per dataset and variant; '*' marks the best mean in each row.
/// Sign counts (+/=/-) compare each variant with the first, paired by seed.
inline std::string summary_text(const BenchmarkPlan& plan, const BenchmarkReport& report) {
  std::ostringstream out;
  out << std::left << std::setw(14) << "dataset";
  for (Variant v : plan.variants) out << std::setw(30) << to_string(v);
  out << '\n';
  const std::size_t nv = plan.variants.size();
  for (std::size_t r = 0; r < report.rows.size(); r += nv) {
    out << std::setw(14) << report.rows[r].dataset;
    for (std::size_t v = 0; v < nv; ++v) {
      const auto& row = report.rows[r + v];
      std::string cell = scientific(row.stats.mean) + " (" + scientific(row.stats.sd) + ")";
      if (v > 0) {
        cell += " " + std::to_string(row.vs_reference.better) + "/" + std::to_string(row.vs_reference.equal) + "/" +
                std::to_string(row.vs_reference.worse);
      }
      if (row.best_in_row) cell += " *";
      out << std::setw(30) << cell;
    }
    out << '\n';
  }
  out << "cells: " << report.cells.size() << ", failed: " << report.failures << "\n";
  out << "sign counts are +/=/- of each variant against " << to_string(plan.variants.front())
      << " (+ means lower loss)\n";
  return out.str();
}

inline void write_benchmark_summary(const BenchmarkPlan& plan, const BenchmarkReport& report) {
  const std::filesystem::path out = plan.output_dir;
  detail::write_text(out / "cells.csv", cells_csv(report));
  detail::write_text(out / "summary.csv", summary_csv(report));
  detail::write_text(out / "summary.txt", summary_text(plan, report));
}

// ---------------------------------------------------------------------------
// Ablation table

inline const std::vector<Variant>& ablation_variants() {
  static const std::vector<Variant> v = {Variant::Full, Variant::NoGame, Variant::NoPositive, Variant::NoNegative,
                                         Variant::NoAgents};
  return v;
}

struct AblationEntry {
  Variant variant = Variant::Full;
  LossStats stats;
  double delta_percent = 0.0;  // (mean - mean_full) * 100, percentage points of loss
  SignCount vs_full;
};

/// Uses the first dataset of a report produced with ablation_variants().
inline std::vector<AblationEntry> ablation_entries(const BenchmarkReport& report) {
  std::vector<AblationEntry> entries;
  const SummaryRow* full = nullptr;
  for (const auto& r : report.rows) {
    if (r.dataset != report.rows.front().dataset) break;
    if (r.variant == Variant::Full) full = &r;
  }
  if (!full) throw Error(ErrorKind::State, "ablation report has no full variant");
  for (const auto& r : report.rows) {
    if (r.dataset != full->dataset) break;
    entries.push_back({r.variant, r.stats, (r.stats.mean - full->stats.mean) * 100.0, r.vs_reference});
  }
  return entries;
}

inline std::string ablation_text(const std::string& dataset, const std::vector<AblationEntry>& entries) {
  std::ostringstream out;
  out << "ablation on " << dataset << "\n";
  out << std::left << std::setw(12) << "variant" << std::setw(12) << "mean" << std::setw(12) << "sd"
      << std::setw(12) << "median" << std::setw(12) << "dloss" << "vs full (+/=/-)\n";
  for (const auto& e : entries) {
    std::ostringstream delta;
    if (e.variant == Variant::Full) {
      delta << "-";
    } else {
      delta << (e.delta_percent >= 0 ? "+" : "") << std::fixed << std::setprecision(2) << e.delta_percent << "%";
    }
    out << std::setw(12) << to_string(e.variant) << std::setw(12) << scientific(e.stats.mean) << std::setw(12)
        << scientific(e.stats.sd) << std::setw(12) << scientific(e.stats.median) << std::setw(12) << delta.str()
        << e.vs_full.better << "/" << e.vs_full.equal << "/" << e.vs_full.worse << "\n";
  }
  return out.str();
}

inline std::string ablation_csv(const std::vector<AblationEntry>& entries) {
  std::ostringstream out;
  out << "variant,runs,mean,sd,median,delta_loss_percent,better,equal,worse\n";
  for (const auto& e : entries) {
    out << to_string(e.variant) << ',' << e.stats.count << ',' << format_number(e.stats.mean) << ','
        << format_number(e.stats.sd) << ',' << format_number(e.stats.median) << ','
        << format_number(e.delta_percent) << ',' << e.vs_full.better << ',' << e.vs_full.equal << ','
        << e.vs_full.worse << '\n';
  }
  return out.str();
}

}  // namespace maskcl
