#include "kcdiff/config.hpp"

#include <stdexcept>

namespace kcdiff {

Json to_json(const TrajOptParams& p) {
  return {{"d_safe", p.d_safe},           {"lambda", p.lambda},
          {"iterations", p.iterations},   {"learning_rate", p.learning_rate},
          {"decay", p.decay},             {"max_halvings", p.max_halvings},
          {"n_sub", p.n_sub}};
}

TrajOptParams trajopt_params_from_json(const Json& j, TrajOptParams p) {
  p.d_safe = j.value("d_safe", p.d_safe);
  p.lambda = j.value("lambda", p.lambda);
  p.iterations = j.value("iterations", p.iterations);
  p.learning_rate = j.value("learning_rate", p.learning_rate);
  p.decay = j.value("decay", p.decay);
  p.max_halvings = j.value("max_halvings", p.max_halvings);
  p.n_sub = j.value("n_sub", p.n_sub);
  return p;
}

Json to_json(const RrtParams& p) {
  return {{"step_size", p.step_size},
          {"goal_bias", p.goal_bias},
          {"max_iterations", p.max_iterations},
          {"check_resolution", p.check_resolution},
          {"timeout", p.timeout}};
}

RrtParams rrt_params_from_json(const Json& j, RrtParams p) {
  p.step_size = j.value("step_size", p.step_size);
  p.goal_bias = j.value("goal_bias", p.goal_bias);
  p.max_iterations = j.value("max_iterations", p.max_iterations);
  p.check_resolution = j.value("check_resolution", p.check_resolution);
  p.timeout = j.value("timeout", p.timeout);
  return p;
}

Json to_json(const KeyConfigParams& p) {
  return {{"d_q_min", p.d_q_min}, {"d_x_min", p.d_x_min}, {"c", p.c}, {"K", p.K},
          {"max_attempts", p.max_attempts}};
}

KeyConfigParams keyconfig_params_from_json(const Json& j) {
  KeyConfigParams p;
  p.d_q_min = j.value("d_q_min", p.d_q_min);
  p.d_x_min = j.value("d_x_min", p.d_x_min);
  p.c = j.value("c", p.c);
  p.K = j.value("K", p.K);
  p.max_attempts = j.value("max_attempts", p.max_attempts);
  return p;
}

void RunConfig::validate() const {
  domain.arm.validate();
  level_spec(domain.level);
  keyconfig.validate();
  model.validate();
  train.validate();
  sampler.validate(model.n_train_steps);
  guidance.validate();
  if (model.n_keys != keyconfig.K) throw std::invalid_argument("model.n_keys must equal keyconfig.K");
  if (model.horizon != domain.build.horizon) {
    throw std::invalid_argument("model.horizon must equal domain.build.horizon");
  }
  if (model.dof != domain.arm.dof()) throw std::invalid_argument("model.dof must equal the arm dof");
  for (const std::string& m : eval.methods) {
    if (!is_known_method(m)) throw std::invalid_argument("unknown method id '" + m + "'");
  }
  for (int level : eval.levels) level_spec(level);
  if (eval.n_problems <= 0) throw std::invalid_argument("eval.n_problems must be > 0");
  if (eval.budgets.empty()) throw std::invalid_argument("eval.budgets is empty");
}

Json to_json(const RunConfig& c) {
  return {{"domain", to_json(c.domain)},
          {"keyconfig", to_json(c.keyconfig)},
          {"model", to_json(c.model)},
          {"schedule", to_string(c.schedule)},
          {"train", to_json(c.train)},
          {"sampler", to_json(c.sampler)},
          {"guidance", to_json(c.guidance)},
          {"trajopt", to_json(c.trajopt)},
          {"eval",
           {{"methods", c.eval.methods},
            {"levels", c.eval.levels},
            {"n_problems", c.eval.n_problems},
            {"budgets", c.eval.budgets},
            {"trajopt_seeds", c.eval.trajopt_seeds},
            {"perturb_scale", c.eval.perturb_scale},
            {"rrt_iterations_per_budget", c.eval.rrt_iterations_per_budget},
            {"rrt_shortcut_iterations", c.eval.rrt_shortcut_iterations}}}};
}

RunConfig run_config_from_json(const Json& j) {
  if (!j.is_object()) throw std::invalid_argument("config must be a JSON object");
  RunConfig c;
  c.domain = domain_from_json(j.value("domain", Json::object()));
  if (j.contains("keyconfig")) c.keyconfig = keyconfig_params_from_json(j.at("keyconfig"));
  if (j.contains("model")) {
    c.model = denoiser_config_from_json(j.at("model"));
  } else {
    c.model.dof = c.domain.arm.dof();
    c.model.horizon = c.domain.build.horizon;
    c.model.n_keys = c.keyconfig.K;
  }
  if (j.contains("schedule")) c.schedule = schedule_kind_from_string(j.at("schedule").get<std::string>());
  if (j.contains("train")) c.train = train_config_from_json(j.at("train"));
  if (j.contains("sampler")) c.sampler = sampler_from_json(j.at("sampler"));
  if (j.contains("guidance")) c.guidance = guidance_from_json(j.at("guidance"));
  if (j.contains("trajopt")) c.trajopt = trajopt_params_from_json(j.at("trajopt"));
  if (j.contains("eval")) {
    const Json& e = j.at("eval");
    c.eval.methods = e.value("methods", c.eval.methods);
    c.eval.levels = e.value("levels", c.eval.levels);
    c.eval.n_problems = e.value("n_problems", c.eval.n_problems);
    c.eval.budgets = e.value("budgets", c.eval.budgets);
    c.eval.trajopt_seeds = e.value("trajopt_seeds", c.eval.trajopt_seeds);
    c.eval.perturb_scale = e.value("perturb_scale", c.eval.perturb_scale);
    c.eval.rrt_iterations_per_budget = e.value("rrt_iterations_per_budget", c.eval.rrt_iterations_per_budget);
    c.eval.rrt_shortcut_iterations = e.value("rrt_shortcut_iterations", c.eval.rrt_shortcut_iterations);
  }
  return c;
}

MethodContext make_method_context(const RunConfig& cfg) {
  MethodContext ctx;
  ctx.arm = cfg.domain.arm;
  ctx.sampler = cfg.sampler;
  ctx.guidance = cfg.guidance;
  ctx.trajopt = cfg.trajopt;
  ctx.rrt = cfg.domain.build.rrt;
  ctx.horizon = cfg.domain.build.horizon;
  ctx.trajopt_seeds = cfg.eval.trajopt_seeds;
  ctx.perturb_scale = cfg.eval.perturb_scale;
  ctx.rrt_iterations_per_budget = cfg.eval.rrt_iterations_per_budget;
  ctx.rrt_shortcut_iterations = cfg.eval.rrt_shortcut_iterations;
  return ctx;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  const Json j = read_json_file(path);
  try {
    return run_config_from_json(j);
  } catch (const std::exception& e) {
    throw std::runtime_error("invalid config '" + path.string() + "': " + e.what());
  }
}

}  // namespace kcdiff
