#pragma once

#include <filesystem>
#include <string>

#include "kcdiff/dataset.hpp"
#include "kcdiff/denoiser.hpp"
#include "kcdiff/diffusion.hpp"
#include "kcdiff/eval.hpp"
#include "kcdiff/io.hpp"
#include "kcdiff/keyconfig.hpp"
#include "kcdiff/planners.hpp"
#include "kcdiff/training.hpp"
#include "kcdiff/trajopt.hpp"

namespace kcdiff {

Json to_json(const TrajOptParams& p);
TrajOptParams trajopt_params_from_json(const Json& j, TrajOptParams defaults = {});
Json to_json(const RrtParams& p);
RrtParams rrt_params_from_json(const Json& j, RrtParams defaults = {});
Json to_json(const KeyConfigParams& p);
KeyConfigParams keyconfig_params_from_json(const Json& j);

/// Evaluation settings that are not per-method context.
struct EvalSettings {
  std::vector<std::string> methods{"diffusion_trajopt", "trajopt", "birrt", "diffusion"};
  std::vector<int> levels{1, 2, 3, 4};
  int n_problems = 100;
  std::vector<int> budgets{0, 10, 25, 50, 100, 200};
  int trajopt_seeds = 8;
  double perturb_scale = 0.3;
  int rrt_iterations_per_budget = 10;
  int rrt_shortcut_iterations = 50;
};

/// Everything one pipeline run needs; every section is optional in the file.
struct RunConfig {
  DomainConfig domain;
  KeyConfigParams keyconfig;
  DenoiserConfig model;
  ScheduleKind schedule = ScheduleKind::Cosine;
  TrainConfig train;
  SamplerConfig sampler;
  GuidanceParams guidance;
  TrajOptParams trajopt;
  EvalSettings eval;

  void validate() const;
};

Json to_json(const RunConfig& c);
RunConfig run_config_from_json(const Json& j);

/// Method context for the non-model fields of cfg; keys, model and schedule are left unset.
MethodContext make_method_context(const RunConfig& cfg);

/// Throws std::runtime_error naming the path when the file is missing or malformed.
RunConfig load_run_config(const std::filesystem::path& path);

}  // namespace kcdiff
