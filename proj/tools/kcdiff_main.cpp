// kcdiff: dataset generation, key configurations, training, planning, benchmarking.
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "kcdiff/config.hpp"
#include "kcdiff/dataset.hpp"
#include "kcdiff/eval.hpp"
#include "kcdiff/keyconfig.hpp"
#include "kcdiff/training.hpp"

namespace fs = std::filesystem;
using namespace kcdiff;

namespace {

enum class LogLevel { Quiet = 0, Info = 1, Debug = 2 };

LogLevel log_level() {
  static const LogLevel level = [] {
    const char* v = std::getenv("KCDIFF_LOG");
    if (v == nullptr) return LogLevel::Info;
    const std::string s(v);
    if (s == "quiet" || s == "0" || s == "error") return LogLevel::Quiet;
    if (s == "debug" || s == "2") return LogLevel::Debug;
    return LogLevel::Info;
  }();
  return level;
}

void log(LogLevel level, const std::string& msg) {
  if (level <= log_level()) std::cerr << "[kcdiff] " << msg << '\n';
}

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  int workers = 1;
  std::string out;
};

RunConfig load_config(const Common& c) {
  RunConfig cfg = c.config.empty() ? RunConfig{} : load_run_config(c.config);
  return cfg;
}

std::uint64_t require_seed(const Common& c, const char* cmd) {
  if (!c.seed) throw UsageError(std::string(cmd) + " requires --seed");
  return *c.seed;
}

void require_out(const Common& c, const char* cmd) {
  if (c.out.empty()) throw UsageError(std::string(cmd) + " requires --out");
}

std::vector<int> parse_int_list(const std::string& s) {
  std::vector<int> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (item.empty()) continue;
    std::size_t pos = 0;
    const int v = std::stoi(item, &pos);
    if (pos != item.size()) throw UsageError("not an integer list: '" + s + "'");
    out.push_back(v);
  }
  if (out.empty()) throw UsageError("empty integer list");
  return out;
}

std::vector<std::string> parse_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

KeyConfigSet load_keys(const std::string& path, const ArmModel& arm) {
  if (path.empty()) throw UsageError("--keys is required");
  return keyconfig_from_json(read_json_file(path), arm);
}

// ---- subcommands ----

struct GenDataArgs {
  Common c;
  std::optional<int> level;
  int count = 0;
};

int cmd_gen_data(const GenDataArgs& a) {
  RunConfig cfg = load_config(a.c);
  const std::uint64_t seed = require_seed(a.c, "gen-data");
  require_out(a.c, "gen-data");
  if (a.level) cfg.domain.level = *a.level;
  if (a.count <= 0) throw UsageError("gen-data requires --count > 0");
  cfg.validate();
  log(LogLevel::Info, "generating " + std::to_string(a.count) + " level-" +
                          std::to_string(cfg.domain.level) + " problems");
  const BuildSummary s = build_dataset(cfg.domain, a.count, a.c.out, seed, a.c.workers);
  log(LogLevel::Info, "wrote " + std::to_string(s.successes) + " records (" +
                          std::to_string(s.failures) + " failed) to " + a.c.out);
  std::cout << to_json(s).dump() << '\n';
  return 0;
}

struct KeyconfigArgs {
  Common c;
  std::string data;
  std::string annotated;
};

int cmd_keyconfig(const KeyconfigArgs& a) {
  const RunConfig cfg = load_config(a.c);
  require_out(a.c, "keyconfig");
  if (a.data.empty()) throw UsageError("keyconfig requires --data");
  cfg.validate();
  const DatasetFile data = load_dataset(a.data);
  Rng rng(a.c.seed.value_or(0));
  const KeyConfigSet keys = select_key_configurations(data.records, cfg.domain.arm, cfg.keyconfig, rng);
  write_text_file(a.c.out, to_json(keys).dump(1) + "\n");
  log(LogLevel::Info, "selected " + std::to_string(keys.size()) + " key configurations");
  if (!a.annotated.empty()) {
    annotate_phi(a.data, keys, cfg.domain.arm, a.annotated);
    log(LogLevel::Info, "annotated dataset written to " + a.annotated);
  }
  return 0;
}

struct TrainArgs {
  Common c;
  std::string data;
  std::string keys;
  std::optional<int> max_steps;
  std::optional<int> epochs;
};

int cmd_train(const TrainArgs& a) {
  RunConfig cfg = load_config(a.c);
  cfg.train.seed = require_seed(a.c, "train");
  require_out(a.c, "train");
  if (a.data.empty()) throw UsageError("train requires --data");
  if (a.max_steps) cfg.train.max_steps = *a.max_steps;
  if (a.epochs) cfg.train.epochs = *a.epochs;
  cfg.validate();
  const KeyConfigSet keys = load_keys(a.keys, cfg.domain.arm);
  const DatasetFile data = load_dataset(a.data);
  const fs::path dir(a.c.out);
  fs::create_directories(dir);
  write_text_file(dir / "config.json", to_json(cfg).dump(1) + "\n");

  const NoiseSchedule schedule = make_schedule(cfg.schedule, cfg.model.n_train_steps);
  const auto start = std::chrono::steady_clock::now();
  const TrainResult result = train(data.records, keys, cfg.train, schedule, cfg.model, cfg.domain.arm,
                                   [&](const TrainState& s) {
                                     const fs::path p = dir / ("checkpoint_step" + std::to_string(s.step) + ".bin");
                                     save_checkpoint(s, p);
                                     log(LogLevel::Debug, "checkpoint " + p.string());
                                   });
  save_checkpoint(result.state, dir / "checkpoint.bin");
  std::ostringstream loss;
  write_loss_csv(loss, result.steps);
  write_text_file(dir / "loss.csv", loss.str());
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::ostringstream msg;
  msg << "trained " << result.state.step << " steps in " << secs << " s";
  if (!result.epoch_means.empty()) msg << ", final epoch L_diff " << result.epoch_means.back().diffusion;
  log(LogLevel::Info, msg.str());
  return 0;
}

struct ModelBundle {
  TrainState state;
  KeyConfigSet keys;
  NoiseSchedule schedule;
};

ModelBundle load_bundle(const std::string& checkpoint, const std::string& keys_path, const ArmModel& arm) {
  if (checkpoint.empty()) throw UsageError("--checkpoint is required");
  TrainState state = load_checkpoint(checkpoint);
  KeyConfigSet keys = load_keys(keys_path, arm);
  NoiseSchedule schedule = make_schedule(state.schedule, state.model.config().n_train_steps);
  return {std::move(state), std::move(keys), std::move(schedule)};
}

struct SamplingOverrides {
  std::optional<int> batch;
  bool guidance = false;
};

void apply_overrides(RunConfig& cfg, const SamplingOverrides& o) {
  if (o.batch) cfg.sampler.batch_size = *o.batch;
  if (o.guidance) cfg.guidance.enabled = true;
}

struct PlanArgs {
  Common c;
  SamplingOverrides s;
  std::string checkpoint;
  std::string keys;
  std::string problem;
  std::optional<int> level;
  std::optional<int> budget;
  std::string method = "diffusion_trajopt";
};

int cmd_plan(const PlanArgs& a) {
  RunConfig cfg = load_config(a.c);
  require_out(a.c, "plan");
  apply_overrides(cfg, a.s);
  if (a.level) cfg.domain.level = *a.level;
  cfg.validate();
  const std::uint64_t seed = a.c.seed.value_or(0);

  PlanningProblem problem;
  if (!a.problem.empty()) {
    const Json j = read_json_file(a.problem);
    problem.q_s = configuration_from_json(j.at("q_s"));
    problem.q_g = configuration_from_json(j.at("q_g"));
    problem.env = environment_from_json(j.at("env"));
  } else {
    std::optional<PlanningProblem> p = draw_problem(cfg.domain, seed, 0);
    if (!p) throw std::runtime_error("could not sample a planning problem");
    problem = std::move(*p);
  }

  MethodContext ctx = make_method_context(cfg);
  std::optional<ModelBundle> bundle;
  if (a.method == "diffusion_trajopt" || a.method == "diffusion") {
    bundle.emplace(load_bundle(a.checkpoint, a.keys, cfg.domain.arm));
    ctx.keys = &bundle->keys;
    ctx.model = &bundle->state;
    ctx.schedule = bundle->schedule;
  }
  const int budget = a.budget.value_or(cfg.trajopt.iterations);
  const std::vector<int> budgets{budget};
  const MethodRun run = run_method(a.method, problem, ctx, budgets, derive_seed(seed, 1));
  const TrajectoryMetrics& m = run.metrics.back();
  const Json out{{"method", a.method},
                 {"budget", run.budgets.back()},
                 {"problem", {{"q_s", to_json(problem.q_s)}, {"q_g", to_json(problem.q_g)}, {"env", to_json(problem.env)}}},
                 {"tau", to_json(run.trajectories.back())},
                 {"metrics",
                  {{"success", m.success},
                   {"collision_rate", m.collision_rate},
                   {"penetration_depth", m.penetration_depth}}},
                 {"config", to_json(cfg)}};
  write_text_file(a.c.out, out.dump(1) + "\n");
  log(LogLevel::Info, std::string("plan ") + (m.success ? "succeeded" : "failed") + ", wrote " + a.c.out);
  return 0;
}

struct EvalArgs {
  Common c;
  SamplingOverrides s;
  std::string checkpoint;
  std::string keys;
  std::string levels;
  std::string budget_grid;
  std::string methods;
  std::optional<int> count;
  bool timings = false;
};

int cmd_eval(const EvalArgs& a) {
  RunConfig cfg = load_config(a.c);
  const std::uint64_t seed = require_seed(a.c, "eval");
  require_out(a.c, "eval");
  apply_overrides(cfg, a.s);
  if (!a.levels.empty()) cfg.eval.levels = parse_int_list(a.levels);
  if (!a.budget_grid.empty()) cfg.eval.budgets = parse_int_list(a.budget_grid);
  if (!a.methods.empty()) cfg.eval.methods = parse_list(a.methods);
  if (a.count) cfg.eval.n_problems = *a.count;
  cfg.validate();

  MethodContext ctx = make_method_context(cfg);
  std::optional<ModelBundle> bundle;
  bool needs_model = false;
  for (const std::string& m : cfg.eval.methods) needs_model |= m == "diffusion_trajopt" || m == "diffusion";
  if (needs_model) {
    bundle.emplace(load_bundle(a.checkpoint, a.keys, cfg.domain.arm));
    ctx.keys = &bundle->keys;
    ctx.model = &bundle->state;
    ctx.schedule = bundle->schedule;
  }
  BenchmarkConfig bc;
  bc.methods = cfg.eval.methods;
  bc.levels = cfg.eval.levels;
  bc.n_problems = cfg.eval.n_problems;
  bc.budgets = cfg.eval.budgets;
  bc.seed = seed;
  bc.workers = a.c.workers;
  bc.record_timings = a.timings;

  const fs::path dir(a.c.out);
  fs::create_directories(dir);
  write_text_file(dir / "config.json", to_json(cfg).dump(1) + "\n");
  const BenchmarkResult result = run_benchmark(cfg.domain, ctx, bc);
  write_benchmark_outputs(result, dir);
  for (const BenchmarkRow& r : result.rows) {
    std::ostringstream s;
    s << r.method << " level " << r.level << " budget " << r.budget << ": success " << r.success_rate;
    log(LogLevel::Debug, s.str());
  }
  log(LogLevel::Info, "wrote " + std::to_string(result.rows.size()) + " rows to " + (dir / "benchmark.csv").string());
  return 0;
}

void add_common(CLI::App* cmd, Common& c, bool with_workers) {
  cmd->add_option("--config", c.config, "JSON run configuration");
  cmd->add_option("--seed", c.seed, "master seed");
  cmd->add_option("--out", c.out, "output path");
  if (with_workers) cmd->add_option("--workers", c.workers, "worker threads (1 = deterministic reference)")->check(CLI::PositiveNumber);
}

void print_error(const std::string& kind, const std::string& message) {
  const Json j{{"error", kind}, {"message", message}};
  std::cerr << j.dump() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"kcdiff: key-configuration conditioned diffusion motion planning"};
  app.require_subcommand(1);

  GenDataArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "generate a dataset of solved planning problems");
  add_common(gen_cmd, gen.c, true);
  gen_cmd->add_option("--level", gen.level, "environment level 1-4");
  gen_cmd->add_option("--count", gen.count, "number of problems to attempt");

  KeyconfigArgs kc;
  auto* kc_cmd = app.add_subcommand("keyconfig", "select key configurations and annotate a dataset");
  add_common(kc_cmd, kc.c, false);
  kc_cmd->add_option("--data", kc.data, "input dataset (JSON Lines)");
  kc_cmd->add_option("--annotated", kc.annotated, "write the dataset with environment fingerprints here");

  TrainArgs tr;
  auto* tr_cmd = app.add_subcommand("train", "train the denoiser");
  add_common(tr_cmd, tr.c, false);
  tr_cmd->add_option("--data", tr.data, "annotated dataset");
  tr_cmd->add_option("--keys", tr.keys, "key configuration file");
  tr_cmd->add_option("--max-steps", tr.max_steps, "cap on optimizer steps");
  tr_cmd->add_option("--epochs", tr.epochs, "number of epochs");

  PlanArgs pl;
  auto* pl_cmd = app.add_subcommand("plan", "plan one problem");
  add_common(pl_cmd, pl.c, false);
  pl_cmd->add_option("--checkpoint", pl.checkpoint, "trained model");
  pl_cmd->add_option("--keys", pl.keys, "key configuration file");
  pl_cmd->add_option("--problem", pl.problem, "problem JSON {q_s, q_g, env}; sampled when omitted");
  pl_cmd->add_option("--level", pl.level, "level for a sampled problem");
  pl_cmd->add_option("--budget", pl.budget, "optimizer iterations");
  pl_cmd->add_option("--method", pl.method, "method id");
  pl_cmd->add_option("--batch", pl.s.batch, "diffusion batch size");
  pl_cmd->add_flag("--guidance", pl.s.guidance, "enable cost guidance during sampling");

  EvalArgs ev;
  auto* ev_cmd = app.add_subcommand("eval", "run the benchmark");
  add_common(ev_cmd, ev.c, true);
  ev_cmd->add_option("--checkpoint", ev.checkpoint, "trained model");
  ev_cmd->add_option("--keys", ev.keys, "key configuration file");
  ev_cmd->add_option("--level", ev.levels, "comma-separated levels");
  ev_cmd->add_option("--budget-grid", ev.budget_grid, "comma-separated optimizer budgets");
  ev_cmd->add_option("--methods", ev.methods, "comma-separated method ids");
  ev_cmd->add_option("--count", ev.count, "problems per level");
  ev_cmd->add_option("--batch", ev.s.batch, "diffusion batch size");
  ev_cmd->add_flag("--guidance", ev.s.guidance, "enable cost guidance during sampling");
  ev_cmd->add_flag("--timings", ev.timings, "record wall-clock columns (output no longer reproducible)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    print_error("usage", e.what());
    return 2;
  }

  try {
    if (*gen_cmd) return cmd_gen_data(gen);
    if (*kc_cmd) return cmd_keyconfig(kc);
    if (*tr_cmd) return cmd_train(tr);
    if (*pl_cmd) return cmd_plan(pl);
    if (*ev_cmd) return cmd_eval(ev);
  } catch (const UsageError& e) {
    print_error("usage", e.what());
    return 2;
  } catch (const BudgetExhausted& e) {
    print_error("budget_exhausted", e.what());
    return 1;
  } catch (const std::invalid_argument& e) {
    print_error("invalid_argument", e.what());
    return 1;
  } catch (const std::exception& e) {
    print_error("runtime", e.what());
    return 1;
  }
  return 0;
}
