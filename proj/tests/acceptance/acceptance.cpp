// Acceptance suite: one PASS/FAIL line per criterion.
//   acceptance --cli <kcdiff binary> --workdir <scratch dir> [--only 1,3,7]

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "kcdiff/config.hpp"
#include "kcdiff/dataset.hpp"
#include "kcdiff/denoiser.hpp"
#include "kcdiff/diffusion.hpp"
#include "kcdiff/eval.hpp"
#include "kcdiff/keyconfig.hpp"
#include "kcdiff/planners.hpp"
#include "kcdiff/training.hpp"
#include "kcdiff/trajopt.hpp"
#include "test_support.hpp"

namespace fs = std::filesystem;
using namespace kcdiff;
using kcdiff::testing::cluttered_env;
using kcdiff::testing::random_config;
using kcdiff::testing::rel_error;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void check(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [violated: " << what << "]";
    }
  }
};

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(4);
  s << v;
  return s.str();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Trajectory perturbed_line(const ArmModel& arm, Rng& rng, int T, double amp) {
  Trajectory tau = straight_line(random_config(arm, rng), random_config(arm, rng), T);
  for (int t = 1; t + 1 < T; ++t) {
    for (int j = 0; j < arm.dof(); ++j) tau(t, j) += uniform(rng, -amp, amp);
  }
  return tau;
}

// Shared state between criteria 3, 6 and 7.
struct Shared {
  fs::path workdir;
  std::string cli;
  std::optional<DatasetFile> level2;
  double level2_build_s = 0.0;
};

// ---------------------------------------------------------------------------
// Settings of the end-to-end experiment.

constexpr int kDatasetRequest = 540;
constexpr int kMinRecords = 500;
constexpr std::uint64_t kDataSeed = 1;
constexpr int kHeldOut = 100;

Json experiment_config() {
  return Json::parse(R"({
    "domain": {"level": 2},
    "keyconfig": {"K": 64},
    "model": {"horizon": 48, "dof": 3, "n_keys": 64, "n_train_steps": 256, "patch_size": 4,
              "hidden_width": 64, "n_blocks": 2, "n_heads": 4, "cond_embed_dim": 64,
              "freq_bands": 6, "ffn_mult": 2},
    "schedule": "cosine",
    "train": {"batch_size": 32, "epochs": 1000000, "max_steps": 6000, "lr": 0.001},
    "sampler": {"n_infer_steps": 32, "batch_size": 8},
    "eval": {"trajopt_seeds": 8}
  })");
}

const DatasetFile& level2_dataset(Shared& sh) {
  if (!sh.level2) {
    const RunConfig cfg = run_config_from_json(experiment_config());
    const fs::path path = sh.workdir / "level2.jsonl";
    const auto t0 = Clock::now();
    build_dataset(cfg.domain, kDatasetRequest, path, kDataSeed, 1);
    sh.level2_build_s = seconds_since(t0);
    sh.level2 = load_dataset(path);
  }
  return *sh.level2;
}

// ---------------------------------------------------------------------------

Outcome criterion1(Shared&) {
  Outcome o;
  const auto t0 = Clock::now();
  const NoiseSchedule s = make_schedule(ScheduleKind::Cosine, 256);
  Rng rng(101);
  double worst_rt = 0.0;
  double worst_ddim = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const Trajectory x0 = standard_normal(rng, 48, 3);
    const Trajectory eps = standard_normal(rng, 48, 3);
    const int t = 1 + static_cast<int>(std::floor(uniform(rng, 0.0, 256.0))) % 256;
    const Trajectory xt = q_sample(x0, t, eps, s);
    const Trajectory v = v_target(x0, eps, t, s);
    worst_rt = std::max(worst_rt, (x0_from_v(xt, v, t, s) - x0).cwiseAbs().maxCoeff());
    worst_rt = std::max(worst_rt, (eps_from_v(xt, v, t, s) - eps).cwiseAbs().maxCoeff());
    // Closed-form interpolant: with the exact v the deterministic DDIM step
    // lands on sqrt(ab_prev) x0 + sqrt(1 - ab_prev) eps.
    const int t_prev = static_cast<int>(std::floor(uniform(rng, 0.0, static_cast<double>(t))));
    Rng unused(0);
    const Trajectory next = ddim_step(xt, v, t, t_prev, 0.0, s, unused);
    const Trajectory expect = std::sqrt(s.ab(t_prev)) * x0 + std::sqrt(1.0 - s.ab(t_prev)) * eps;
    worst_ddim = std::max(worst_ddim, (next - expect).cwiseAbs().maxCoeff());
  }
  const double secs = seconds_since(t0);
  o.detail << "round-trip max err " << fmt(worst_rt) << ", ddim max err " << fmt(worst_ddim) << ", " << fmt(secs) << " s";
  o.check(worst_rt < 1e-12, "round trip < 1e-12");
  o.check(worst_ddim < 1e-10, "ddim interpolant < 1e-10");
  o.check(secs < 5.0, "runtime < 5 s");
  return o;
}

// ---------------------------------------------------------------------------

double trajopt_gradient_check() {
  const ArmModel arm = ArmModel::planar_default();
  Rng rng(202);
  TrajOptParams p;
  double worst = 0.0;
  for (int i = 0; i < 20; ++i) {
    const Environment env = cluttered_env(2000 + i, 4);
    const Trajectory tau = perturbed_line(arm, rng, 16, 0.3);
    const Trajectory g = cost_gradient(arm, env, tau, p);
    const double h = 1e-6;
    for (int t = 1; t + 1 < tau.rows(); ++t) {
      for (int j = 0; j < 3; ++j) {
        Trajectory tp = tau;
        Trajectory tm = tau;
        tp(t, j) += h;
        tm(t, j) -= h;
        const double num = (trajectory_cost(arm, env, tp, p).total - trajectory_cost(arm, env, tm, p).total) / (2 * h);
        worst = std::max(worst, rel_error(g(t, j), num, 1e-4));
      }
    }
  }
  return worst;
}

DenoiserConfig tiny_denoiser() {
  DenoiserConfig c;
  c.horizon = 8;
  c.dof = 3;
  c.n_keys = 5;
  c.n_train_steps = 32;
  c.patch_size = 2;
  c.hidden_width = 8;
  c.n_blocks = 2;
  c.n_heads = 2;
  c.cond_embed_dim = 6;
  c.freq_bands = 2;
  c.ffn_mult = 2;
  return c;
}

ModelCondition random_condition(const DenoiserConfig& c, Rng& rng, int step) {
  ModelCondition m;
  m.step = step;
  m.phi = Eigen::VectorXd(c.n_keys);
  for (int k = 0; k < c.n_keys; ++k) m.phi[k] = uniform(rng, 0, 1) < 0.5 ? 1.0 : 0.0;
  m.q_s = standard_normal(rng, c.dof, 1);
  m.q_g = standard_normal(rng, c.dof, 1);
  return m;
}

std::pair<double, int> denoiser_gradient_check() {
  const DenoiserConfig c = tiny_denoiser();
  Denoiser net(c);
  net.initialize(303, false);
  Rng rng(304);
  for (double& p : net.parameters()) {
    if (p == 0.0) p = 0.3 * uniform(rng, -1, 1);
  }
  std::vector<Trajectory> x;
  std::vector<ModelCondition> cond;
  std::vector<Trajectory> w;
  for (int b = 0; b < 2; ++b) {
    x.push_back(standard_normal(rng, c.horizon, c.dof));
    cond.push_back(random_condition(c, rng, 3 + 11 * b));
    w.push_back(standard_normal(rng, c.horizon, c.dof));
  }
  auto loss = [&]() {
    const auto y = net.forward(x, cond);
    double l = 0;
    for (std::size_t b = 0; b < y.size(); ++b) l += (y[b].array() * w[b].array()).sum();
    return l;
  };
  ForwardTape tape;
  net.forward(x, cond, tape);
  std::vector<double> grad(net.parameter_count(), 0.0);
  net.backward(tape, w, grad);
  std::vector<std::size_t> idx;
  for (const auto& v : net.tensors()) {
    const std::size_t n = static_cast<std::size_t>(v.rows) * v.cols;
    for (int k = 0; k < 10; ++k) idx.push_back(v.offset + static_cast<std::size_t>(uniform(rng, 0, 1) * n) % n);
  }
  std::sort(idx.begin(), idx.end());
  idx.erase(std::unique(idx.begin(), idx.end()), idx.end());
  auto params = net.parameters();
  double worst = 0;
  const double h = 1e-6;
  for (std::size_t i : idx) {
    const double keep = params[i];
    params[i] = keep + h;
    const double lp = loss();
    params[i] = keep - h;
    const double lm = loss();
    params[i] = keep;
    // Floor above the central-difference rounding noise, eps * |L| / h.
    worst = std::max(worst, rel_error(grad[i], (lp - lm) / (2 * h), 1e-5));
  }
  return {worst, static_cast<int>(idx.size())};
}

// d(w2 * L_coll(x0_hat(v)))/dv against central differences. Coordinates whose
// perturbation changes the set of active hinge terms (a kink within +-h) are
// skipped: there the one-sided derivatives differ and no finite difference is
// meaningful.
std::pair<double, int> collision_chain_check() {
  const ArmModel arm = ArmModel::planar_default();
  const NoiseSchedule sched = make_schedule(ScheduleKind::Cosine, 64);
  TrainConfig cfg;
  cfg.w_diff = 0.0;
  cfg.w_smooth = 0.0;
  const Normalizer norm(arm);
  const LossContext ctx{sched, cfg, arm, norm};
  Rng rng(505);
  double worst = 0.0;
  int checked = 0;
  const double h = 1e-6;
  for (int i = 0; i < 40; ++i) {
    const Environment env = cluttered_env(5000 + i, 4);
    const Trajectory x0 = norm.normalize(perturbed_line(arm, rng, 12, 0.2));
    const Trajectory eps = standard_normal(rng, 12, 3);
    const int t = 1 + i % 20;
    const Trajectory xt = q_sample(x0, t, eps, sched);
    const Trajectory v = v_target(x0, eps, t, sched);
    Trajectory dv;
    const LossTerms l = prediction_loss(v, xt, v, t, env, ctx, &dv);
    if (l.collision == 0.0) continue;
    for (int r = 0; r < v.rows(); ++r) {
      for (int j = 0; j < 3; ++j) {
        Trajectory vp = v;
        Trajectory vm = v;
        vp(r, j) += h;
        vm(r, j) -= h;
        const double fp = prediction_loss(vp, xt, v, t, env, ctx).total;
        const double fm = prediction_loss(vm, xt, v, t, env, ctx).total;
        // Kink test: both one-sided slopes must agree with the central one.
        const double left = (l.total - fm) / h;
        const double right = (fp - l.total) / h;
        if (std::abs(left - right) > 1e-3 * std::max(1.0, std::abs(left) + std::abs(right))) continue;
        worst = std::max(worst, rel_error(dv(r, j), (fp - fm) / (2 * h), 1e-6));
        ++checked;
      }
    }
  }
  return {worst, checked};
}

Outcome criterion2(Shared&) {
  Outcome o;
  const auto t0 = Clock::now();
  const double a = trajopt_gradient_check();
  const auto [b, nb] = denoiser_gradient_check();
  const auto [c, nc] = collision_chain_check();
  const double secs = seconds_since(t0);
  o.detail << "trajopt " << fmt(a) << ", denoiser " << fmt(b) << " over " << nb << " params, L_coll chain "
           << fmt(c) << " over " << nc << " coords, " << fmt(secs) << " s";
  o.check(a < 1e-4, "(a) < 1e-4");
  o.check(nb >= 200 && b < 1e-4, "(b) >= 200 params, < 1e-4");
  o.check(nc > 100 && c < 1e-3, "(c) < 1e-3");
  o.check(secs < 120.0, "runtime < 2 min");
  return o;
}

// ---------------------------------------------------------------------------

Outcome criterion3(Shared& sh) {
  Outcome o;
  const DatasetFile& data = level2_dataset(sh);
  const ArmModel arm = ArmModel::planar_default();
  const RunConfig cfg = run_config_from_json(experiment_config());
  const auto t0 = Clock::now();
  int violations = 0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(seed);
    const KeyConfigSet keys = select_key_configurations(data.records, arm, cfg.keyconfig, rng);
    const KeyConfigParams& p = keys.params;
    violations += static_cast<int>(keys.size()) != p.K;
    for (std::size_t i = 0; i < keys.size(); ++i) {
      bool from_data = false;
      for (const DatasetRecord& r : data.records) {
        for (int t = 0; t < r.tau.rows() && !from_data; ++t) {
          from_data = (r.tau.row(t).transpose().array() == keys.configs[i].array()).all();
        }
        if (from_data) break;
      }
      violations += !from_data;
      int hits = 0;
      for (const DatasetRecord& r : data.records) hits += in_collision(arm, r.problem.env, keys.configs[i]);
      const double pc = static_cast<double>(hits) / static_cast<double>(data.records.size());
      violations += !(pc > p.c && pc < 1.0 - p.c);
      const Vec2 ti = forward_kinematics(arm, keys.configs[i]).tip;
      for (std::size_t j = 0; j < i; ++j) {
        double dq = 0;
        for (int k = 0; k < arm.dof(); ++k) dq += std::pow(keys.configs[i][k] - keys.configs[j][k], 2);
        violations += !(std::sqrt(dq) > p.d_q_min);
        violations += !((ti - forward_kinematics(arm, keys.configs[j]).tip).norm() > p.d_x_min);
      }
    }
  }
  const double secs = seconds_since(t0);
  o.detail << data.records.size() << " records (built in " << fmt(sh.level2_build_s) << " s), K="
           << cfg.keyconfig.K << ", 5 seeds, " << violations << " violations, " << fmt(secs) << " s";
  o.check(static_cast<int>(data.records.size()) >= kMinRecords, "500-record dataset");
  o.check(violations == 0, "all predicates hold");
  o.check(secs < 60.0, "runtime < 1 min");
  return o;
}

// ---------------------------------------------------------------------------

bool dense_free(const ArmModel& arm, const Environment& env, const Path& path, double resolution) {
  for (std::size_t i = 0; i + 1 < path.size(); ++i) {
    const double span = (path[i + 1] - path[i]).cwiseAbs().maxCoeff();
    const int n = std::max(1, static_cast<int>(std::ceil(span / resolution)));
    for (int k = 0; k <= n; ++k) {
      if (in_collision(arm, env, path[i] + (path[i + 1] - path[i]) * (static_cast<double>(k) / n))) return false;
    }
  }
  return !path.empty() && !in_collision(arm, env, path.front());
}

Outcome criterion4(Shared&) {
  Outcome o;
  const ArmModel arm = ArmModel::planar_default();
  DomainConfig domain;
  domain.level = 3;
  RrtParams rp;
  int successes = 0;
  int revalidated = 0;
  for (std::uint64_t i = 0; successes < 100 && i < 400; ++i) {
    const std::optional<PlanningProblem> prob = draw_problem(domain, 404, i);
    if (!prob) continue;
    Rng rng(derive_seed(405, i));
    const PlanResult r = birrt_plan(*prob, arm, rp, rng);
    if (!r.ok()) continue;
    ++successes;
    const bool ends = r.path.front() == prob->q_s && r.path.back() == prob->q_g;
    revalidated += ends && dense_free(arm, prob->env, r.path, rp.check_resolution / 4);
  }
  int monotone = 0;
  int pinned = 0;
  Rng rng(406);
  TrajOptParams tp;
  tp.iterations = 50;
  for (int i = 0; i < 100; ++i) {
    const Environment env = cluttered_env(4000 + i, 2 + i % 3);
    const Trajectory seed = perturbed_line(arm, rng, 48, 0.3);
    const PlanningProblem prob{seed.row(0).transpose(), seed.row(47).transpose(), env};
    const OptimizeResult r = optimize(seed, prob, arm, tp);
    double prev = trajectory_cost(arm, env, seed, tp).total;
    bool ok = static_cast<int>(r.trace.size()) == tp.iterations;
    for (const CostBreakdown& c : r.trace) {
      ok &= c.total <= prev;
      prev = c.total;
    }
    monotone += ok;
    pinned += (r.tau.row(0).array() == seed.row(0).array()).all() && (r.tau.row(47).array() == seed.row(47).array()).all();
  }
  o.detail << "Bi-RRT " << revalidated << "/" << successes << " revalidated, optimize monotone " << monotone
           << "/100, endpoints pinned " << pinned << "/100";
  o.check(successes == 100 && revalidated == 100, "100/100 Bi-RRT successes revalidate");
  o.check(monotone == 100 && pinned == 100, "100/100 optimize runs");
  return o;
}

// ---------------------------------------------------------------------------

Outcome criterion5(Shared&) {
  Outcome o;
  const ArmModel arm = ArmModel::planar_default();
  const RunConfig cfg = run_config_from_json(experiment_config());
  // The contract is model-independent; random weights exercise every path.
  TrainState state(cfg.model);
  state.model.initialize(505, false);
  state.normalizer = Normalizer(arm);
  const NoiseSchedule sched = make_schedule(cfg.schedule, cfg.model.n_train_steps);
  const SamplingContext sctx{state.model, sched, state.normalizer, arm};
  KeyConfigSet keys;
  Rng krng(506);
  for (int k = 0; k < cfg.model.n_keys; ++k) keys.configs.push_back(random_config(arm, krng));
  keys.params.K = cfg.model.n_keys;

  GuidanceParams guided = cfg.guidance;
  guided.enabled = true;
  int iterations_checked = 0;
  int endpoint_violations = 0;
  int nondeterministic = 0;
  DomainConfig domain;
  domain.level = 3;
  for (std::uint64_t i = 0; i < 10; ++i) {
    const std::optional<PlanningProblem> prob = draw_problem(domain, 507, i);
    if (!prob) continue;
    const EnvRepresentation phi = env_representation(keys, arm, prob->env);
    const Configuration ns = state.normalizer.normalize(prob->q_s);
    const Configuration ng = state.normalizer.normalize(prob->q_g);
    for (const GuidanceParams& gp : {cfg.guidance, guided}) {
      const auto observe = [&](int, const std::vector<Trajectory>& batch) {
        ++iterations_checked;
        for (const Trajectory& x : batch) {
          const bool ok = (x.row(0).transpose().array() == ns.array()).all() &&
                          (x.row(x.rows() - 1).transpose().array() == ng.array()).all();
          endpoint_violations += !ok;
        }
      };
      const auto a = sample_batch(sctx, cfg.sampler, *prob, phi, gp, 600 + i, observe);
      const auto b = sample_batch(sctx, cfg.sampler, *prob, phi, gp, 600 + i);
      for (std::size_t k = 0; k < a.size(); ++k) {
        nondeterministic += !(a[k].array() == b[k].array()).all();
        endpoint_violations += !(a[k].row(0).transpose() == prob->q_s) || !(a[k].row(a[k].rows() - 1).transpose() == prob->q_g);
      }
    }
  }
  // Guidance gradient bounds, including a strongly amplified collision weight
  // so the clamp is exercised.
  double max_component = 0.0;
  double max_endpoint = 0.0;
  int clamped = 0;
  Rng grng(508);
  for (int i = 0; i < 50; ++i) {
    const Environment env = cluttered_env(5080 + i, 4);
    const Trajectory x = state.normalizer.normalize(perturbed_line(arm, grng, 48, 0.5));
    for (const double k_coll : {cfg.guidance.k_coll, 1e3}) {
      GuidanceParams gp = cfg.guidance;
      gp.k_coll = k_coll;
      const Trajectory g = guidance_gradient(x, arm, env, gp, state.normalizer);
      max_component = std::max(max_component, g.cwiseAbs().maxCoeff());
      max_endpoint = std::max({max_endpoint, g.row(0).cwiseAbs().maxCoeff(), g.row(g.rows() - 1).cwiseAbs().maxCoeff()});
      clamped += g.cwiseAbs().maxCoeff() == gp.g_max;
    }
  }
  // Guidance constants in the configuration echo written by every command.
  const Json echo = Json::parse(to_json(run_config_from_json(Json::object())).dump());
  const Json& g = echo.at("guidance");
  const bool constants = g.at("kernel_sigma") == 4.0 && g.at("d_max") == 0.1 && g.at("k_smooth") == 1e-9 &&
                         g.at("k_coll") == 1e-2 && g.at("g_max") == 1.0;
  o.detail << iterations_checked << " denoising iterations instrumented, " << endpoint_violations
           << " endpoint violations, " << nondeterministic << " nondeterministic samples, max |guidance| "
           << fmt(max_component) << " (clamp hit " << clamped << "x), endpoint rows " << fmt(max_endpoint)
           << ", echo " << g.dump();
  o.check(iterations_checked > 0 && endpoint_violations == 0, "endpoints after every iteration");
  o.check(nondeterministic == 0, "eta=0 bit-deterministic");
  o.check(max_component <= 1.0 && max_endpoint == 0.0, "guidance <= g_max, zero at endpoints");
  o.check(constants, "guidance constants in the config echo");
  return o;
}

// ---------------------------------------------------------------------------

KeyConfigSet experiment_keys(Shared& sh, const RunConfig& cfg) {
  const DatasetFile& data = level2_dataset(sh);
  Rng rng(0);
  return select_key_configurations(data.records, cfg.domain.arm, cfg.keyconfig, rng);
}

std::vector<DatasetRecord> annotated(const std::vector<DatasetRecord>& records, const KeyConfigSet& keys,
                                     const ArmModel& arm) {
  std::vector<DatasetRecord> out = records;
  for (DatasetRecord& r : out) r.phi = env_representation(keys, arm, r.problem.env);
  return out;
}

// Mean L_diff over a fixed probe set: every record at every timestep with fixed
// noise, i.e. the training objective's expectation over t ~ U{1..N}.
double probe_diffusion_loss(const Denoiser& model, const std::vector<DatasetRecord>& records,
                            const NoiseSchedule& sched, const LossContext& ctx) {
  const std::vector<TrainingExample> ex = make_examples(records, ctx.normalizer);
  Rng rng(606);
  double sum = 0.0;
  int n = 0;
  const int N = sched.n_train_steps;
  for (int t = 1; t <= N; ++t) {
    std::vector<int> steps(ex.size(), t);
    std::vector<Trajectory> noise;
    for (std::size_t b = 0; b < ex.size(); ++b) noise.push_back(standard_normal(rng, ex[0].x0.rows(), ex[0].x0.cols()));
    sum += batch_loss(model, ex, steps, noise, ctx).diffusion;
    ++n;
  }
  return sum / n;
}

Outcome criterion6(Shared& sh) {
  Outcome o;
  RunConfig cfg = run_config_from_json(experiment_config());
  const KeyConfigSet keys = experiment_keys(sh, cfg);
  const std::vector<DatasetRecord> ten = annotated(
      std::vector<DatasetRecord>(level2_dataset(sh).records.begin(), level2_dataset(sh).records.begin() + 10), keys,
      cfg.domain.arm);
  // Memorising 10 trajectories to the precision the low-noise timesteps demand
  // needs more depth and a decayed learning rate than the end-to-end model.
  cfg.model.n_blocks = 4;
  cfg.train.batch_size = 10;
  cfg.train.max_steps = 2000;
  cfg.train.lr = 4e-3;
  cfg.train.lr_schedule = "cosine";
  cfg.train.warmup_steps = 200;
  cfg.train.seed = 66;
  const NoiseSchedule sched = make_schedule(cfg.schedule, cfg.model.n_train_steps);
  const auto t0 = Clock::now();
  const TrainResult r = train(ten, keys, cfg.train, sched, cfg.model, cfg.domain.arm);
  const double secs = seconds_since(t0);
  const LossContext ctx{sched, cfg.train, cfg.domain.arm, r.state.normalizer};
  TrainState initial(cfg.model);
  initial.model.initialize(derive_seed(cfg.train.seed, 0));
  const double before = probe_diffusion_loss(initial.model, ten, sched, ctx);
  const double after = probe_diffusion_loss(r.state.model, ten, sched, ctx);
  o.detail << "probe mean L_diff " << fmt(before) << " -> " << fmt(after) << " (" << fmt(before / after)
           << "x) after " << r.state.step << " steps, weights " << cfg.train.w_diff << "/" << cfg.train.w_coll << "/"
           << cfg.train.w_smooth << ", " << fmt(secs) << " s";
  o.check(r.state.step <= 2000, "within 2000 steps");
  o.check(before >= 10.0 * after, "L_diff drops >= 10x");
  o.check(secs <= 300.0, "runtime <= 5 min");
  return o;
}

// ---------------------------------------------------------------------------

struct ExperimentNumbers {
  double pipeline = 0, trajopt = 0;
  double diffusion_pen = 0, straight_pen = 0;
  double raw_full = 0, raw_ablation = 0;
};

Outcome criterion7(Shared& sh) {
  Outcome o;
  const auto t0 = Clock::now();
  const RunConfig cfg = run_config_from_json(experiment_config());
  const DatasetFile& data = level2_dataset(sh);
  const KeyConfigSet keys = experiment_keys(sh, cfg);
  const std::vector<DatasetRecord> records = annotated(data.records, keys, cfg.domain.arm);
  const NoiseSchedule sched = make_schedule(cfg.schedule, cfg.model.n_train_steps);

  TrainConfig full = cfg.train;
  full.seed = 77;
  auto tt = Clock::now();
  const TrainResult full_model = train(records, keys, full, sched, cfg.model, cfg.domain.arm);
  const double full_s = seconds_since(tt);
  TrainConfig ablation = full;
  ablation.w_coll = 0.0;
  ablation.w_smooth = 0.0;
  tt = Clock::now();
  const TrainResult ablation_model = train(records, keys, ablation, sched, cfg.model, cfg.domain.arm);
  const double ablation_s = seconds_since(tt);

  MethodContext ctx = make_method_context(cfg);
  ctx.keys = &keys;
  ctx.schedule = sched;
  MethodContext actx = ctx;
  ctx.model = &full_model.state;
  actx.model = &ablation_model.state;

  // Held-out problems never share a seed stream with the training data.
  const std::vector<PlanningProblem> problems = benchmark_problems(cfg.domain, 2, kHeldOut, 7000);
  ExperimentNumbers n;
  const std::vector<int> k50{50};
  const std::vector<int> k0{0};
  tt = Clock::now();
  for (std::size_t i = 0; i < problems.size(); ++i) {
    const PlanningProblem& p = problems[i];
    const std::uint64_t seed = derive_seed(7100, i);
    n.pipeline += run_method("diffusion_trajopt", p, ctx, k50, seed).metrics[0].success;
    n.trajopt += run_method("trajopt", p, ctx, k50, seed).metrics[0].success;
    const MethodRun diff = run_method("diffusion", p, ctx, k0, seed);
    n.diffusion_pen += diff.metrics[0].penetration_depth;
    n.straight_pen += run_method("straight_line", p, ctx, k0, seed).metrics[0].penetration_depth;
    const MethodRun abl = run_method("diffusion", p, actx, k0, seed);
    for (const Trajectory& c : diff.candidates) n.raw_full += evaluate_trajectory(ctx.arm, p.env, c, ctx.eval_n_sub).penetration_depth;
    for (const Trajectory& c : abl.candidates) n.raw_ablation += evaluate_trajectory(ctx.arm, p.env, c, ctx.eval_n_sub).penetration_depth;
  }
  const double eval_s = seconds_since(tt);
  const double np = static_cast<double>(problems.size());
  const double nraw = np * cfg.sampler.batch_size;
  const double pipeline = 100.0 * n.pipeline / np;
  const double trajopt = 100.0 * n.trajopt / np;
  const double total_s = seconds_since(t0) + sh.level2_build_s;
  o.detail << records.size() << " records; (a) diffusion+trajopt " << fmt(pipeline) << "% vs TrajOpt-only " << fmt(trajopt)
           << "%; (b) diffusion-only penetration " << fmt(n.diffusion_pen / np) << " vs straight line "
           << fmt(n.straight_pen / np) << "; (c) raw-sample penetration ablation " << fmt(n.raw_ablation / nraw)
           << " vs full " << fmt(n.raw_full / nraw) << "; train " << fmt(full_s) << " s + " << fmt(ablation_s)
           << " s, eval " << fmt(eval_s) << " s, total " << fmt(total_s) << " s";
  o.check(static_cast<int>(records.size()) >= kMinRecords, ">= 500 records");
  o.check(static_cast<int>(problems.size()) == kHeldOut, "100 held-out problems");
  o.check(pipeline >= trajopt + 5.0, "(a) diffusion+trajopt >= TrajOpt-only + 5 points");
  o.check(n.diffusion_pen < n.straight_pen, "(b) diffusion-only < straight line penetration");
  o.check(n.raw_ablation >= n.raw_full, "(c) ablation raw penetration >= full");
  o.check(full_s <= 900.0 && ablation_s <= 900.0, "training <= 15 min");
  o.check(total_s <= 1800.0, "total <= 30 min");
  return o;
}

// ---------------------------------------------------------------------------

int run_cli(const Shared& sh, const std::string& args) {
  const std::string cmd = "KCDIFF_LOG=quiet \"" + sh.cli + "\" " + args + " > /dev/null";
  return std::system(cmd.c_str());
}

Outcome criterion8(Shared& sh) {
  Outcome o;
  const fs::path dir = sh.workdir / "determinism";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const fs::path config = dir / "config.json";
  write_text_file(config, R"({
    "domain": {"level": 3, "build": {"horizon": 32}},
    "keyconfig": {"K": 8},
    "model": {"horizon": 32, "dof": 3, "n_keys": 8, "n_train_steps": 64, "patch_size": 4,
              "hidden_width": 16, "n_blocks": 1, "n_heads": 2, "cond_embed_dim": 16,
              "freq_bands": 3, "ffn_mult": 2},
    "train": {"batch_size": 8, "epochs": 1000},
    "sampler": {"n_infer_steps": 8, "batch_size": 4},
    "eval": {"methods": ["diffusion_trajopt", "diffusion", "trajopt", "birrt", "straight_line"],
             "levels": [3], "n_problems": 4, "budgets": [0, 10]}
  })");
  const std::string cfg = "--config \"" + config.string() + "\" ";
  const auto p = [&](const std::string& name) { return "\"" + (dir / name).string() + "\""; };
  int failures = 0;
  for (const char* run : {"a", "b"}) {
    const std::string r(run);
    failures += run_cli(sh, "gen-data " + cfg + "--seed 8 --count 24 --workers 1 --out " + p("data_" + r + ".jsonl")) != 0;
  }
  failures += run_cli(sh, "keyconfig " + cfg + "--seed 9 --data " + p("data_a.jsonl") + " --annotated " +
                              p("annotated.jsonl") + " --out " + p("keys.json")) != 0;
  for (const char* run : {"a", "b"}) {
    const std::string r(run);
    failures += run_cli(sh, "train " + cfg + "--seed 10 --max-steps 60 --data " + p("annotated.jsonl") + " --keys " +
                                p("keys.json") + " --out " + p("train_" + r)) != 0;
  }
  for (const char* run : {"a", "b"}) {
    const std::string r(run);
    failures += run_cli(sh, "eval " + cfg + "--seed 11 --workers 1 --checkpoint " + p("train_a/checkpoint.bin") +
                                " --keys " + p("keys.json") + " --out " + p("eval_" + r)) != 0;
  }
  const std::vector<std::pair<std::string, std::string>> pairs{
      {"data_a.jsonl", "data_b.jsonl"},
      {"train_a/checkpoint.bin", "train_b/checkpoint.bin"},
      {"train_a/loss.csv", "train_b/loss.csv"},
      {"train_a/config.json", "train_b/config.json"},
      {"eval_a/benchmark.csv", "eval_b/benchmark.csv"},
      {"eval_a/problems.csv", "eval_b/problems.csv"},
      {"eval_a/success_level3.svg", "eval_b/success_level3.svg"},
      {"eval_a/config.json", "eval_b/config.json"}};
  int identical = 0;
  for (const auto& [a, b] : pairs) {
    const bool exists = fs::exists(dir / a) && fs::exists(dir / b);
    const bool same = exists && fs::file_size(dir / a) > 0 && slurp(dir / a) == slurp(dir / b);
    identical += same;
    if (!same) o.detail << " differs: " << a << ";";
  }
  o.detail << " " << identical << "/" << pairs.size() << " artifact pairs byte-identical, " << failures
           << " command failures";
  o.check(failures == 0, "all commands succeed");
  o.check(identical == static_cast<int>(pairs.size()), "byte-identical outputs");
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance suite"};
  Shared sh;
  std::string workdir;
  std::vector<int> only;
  app.add_option("--cli", sh.cli, "path to the kcdiff binary")->required();
  app.add_option("--workdir", workdir, "scratch directory")->required();
  app.add_option("--only", only, "run only these criteria")->delimiter(',');
  CLI11_PARSE(app, argc, argv);
  sh.workdir = workdir;
  fs::create_directories(sh.workdir);

  const std::vector<std::function<Outcome(Shared&)>> criteria{criterion1, criterion2, criterion3, criterion4,
                                                              criterion5, criterion6, criterion7, criterion8};
  const std::set<int> selected(only.begin(), only.end());
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!selected.empty() && !selected.count(id)) continue;
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = criteria[i](sh);
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << " exception: " << e.what();
    }
    failed += !o.pass;
    std::cout << "criterion " << id << ": " << (o.pass ? "PASS" : "FAIL") << " (" << fmt(seconds_since(t0))
              << " s) " << o.detail.str() << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
