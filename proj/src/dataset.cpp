#include "kcdiff/dataset.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "kcdiff/config.hpp"
#include "kcdiff/parallel.hpp"

namespace kcdiff {

namespace {

constexpr const char* kDatasetKind = "kcdiff-dataset";
constexpr int kDatasetVersion = 1;

Configuration uniform_configuration(const ArmModel& arm, Rng& rng) {
  Configuration q(arm.dof());
  for (int i = 0; i < arm.dof(); ++i) {
    q[i] = uniform(rng, arm.joint_limits[i].lo, arm.joint_limits[i].hi);
  }
  return q;
}

bool inside(const Box& b, const Vec2& p) {
  return p.x() >= b.min.x() && p.x() <= b.max.x() && p.y() >= b.min.y() && p.y() <= b.max.y();
}

Json box_to_json(const Box& b) {
  return {{"min", {b.min.x(), b.min.y()}}, {"max", {b.max.x(), b.max.y()}}};
}

Box box_from_json(const Json& j) {
  return {Vec2(j.at("min")[0].get<double>(), j.at("min")[1].get<double>()),
          Vec2(j.at("max")[0].get<double>(), j.at("max")[1].get<double>())};
}

}  // namespace

void LevelSpec::validate() const {
  if (level < 1 || level > 4) throw std::invalid_argument("level must be 1..4");
  if (min_objects < 0 || max_objects < min_objects) throw std::invalid_argument("bad object range");
  if (level == 1 && max_objects != 0) throw std::invalid_argument("level 1 has no objects");
  if (!(min_size > 0.0 && max_size >= min_size)) throw std::invalid_argument("bad size range");
}

LevelSpec level_spec(int level) {
  switch (level) {
    case 1: return {1, 0, 0, 0.03, 0.06};
    case 2: return {2, 1, 1, 0.03, 0.06};
    case 3: return {3, 2, 2, 0.03, 0.06};
    case 4: return {4, 3, 4, 0.03, 0.06};
    default: throw std::invalid_argument("level must be 1..4");
  }
}

std::vector<Obstacle> ShelfLayout::fixtures() const {
  std::vector<Obstacle> out;
  const double half = 0.5 * board_thickness;
  for (double y : board_centers) {
    out.push_back(Box{Vec2(x_front, y - half), Vec2(x_back, y + half)});
  }
  out.push_back(Box{Vec2(x_back, board_centers.front() - half),
                    Vec2(x_back + wall_thickness, board_centers.back() + half)});
  return out;
}

std::vector<Box> ShelfLayout::slots() const {
  std::vector<Box> out;
  const double half = 0.5 * board_thickness;
  for (std::size_t i = 0; i + 1 < board_centers.size(); ++i) {
    out.push_back(Box{Vec2(x_front, board_centers[i] + half), Vec2(x_back, board_centers[i + 1] - half)});
  }
  return out;
}

Environment generate_environment(const LevelSpec& spec, const ShelfLayout& shelf, Rng& rng) {
  spec.validate();
  Environment env;
  env.fixtures = shelf.fixtures();
  std::uniform_int_distribution<int> count(spec.min_objects, spec.max_objects);
  std::bernoulli_distribution is_circle(0.5);
  for (const Box& slot : shelf.slots()) {
    const int n = count(rng);
    for (int k = 0; k < n; ++k) {
      const double size = uniform(rng, spec.min_size, spec.max_size);
      const double max_size = std::min(0.5 * (slot.max.y() - slot.min.y()), 0.5 * (slot.max.x() - slot.min.x()));
      const double s = std::min(size, max_size);
      const Vec2 center(uniform(rng, slot.min.x() + s, slot.max.x() - s),
                        uniform(rng, slot.min.y() + s, slot.max.y() - s));
      if (is_circle(rng)) {
        env.objects.push_back(Circle{center, s});
      } else {
        const double aspect = uniform(rng, 0.6, 1.0);
        const Vec2 half = aspect < 0.8 ? Vec2(s, s * aspect) : Vec2(s * aspect, s);
        env.objects.push_back(Box{center - half, center + half});
      }
    }
  }
  env.validate();
  return env;
}

std::optional<PlanningProblem> sample_problem(const Environment& env, const ArmModel& arm,
                                              const ProblemSampling& sampling, Rng& rng) {
  std::bernoulli_distribution use_region(sampling.tip_regions.empty() ? 0.0 : sampling.region_fraction);
  int tries = 0;
  auto draw_endpoint = [&]() -> std::optional<Configuration> {
    const bool region = use_region(rng);
    std::optional<std::size_t> which;
    if (region) {
      std::uniform_int_distribution<std::size_t> pick(0, sampling.tip_regions.size() - 1);
      which = pick(rng);
    }
    while (tries < sampling.max_tries) {
      ++tries;
      Configuration q = uniform_configuration(arm, rng);
      if (which && !inside(sampling.tip_regions[*which], forward_kinematics(arm, q).tip)) continue;
      if (in_collision(arm, env, q)) continue;
      return q;
    }
    return std::nullopt;
  };
  while (tries < sampling.max_tries) {
    const std::optional<Configuration> q_s = draw_endpoint();
    if (!q_s) break;
    const std::optional<Configuration> q_g = draw_endpoint();
    if (!q_g) break;
    if (cspace_distance(*q_s, *q_g) < sampling.min_separation) continue;
    return PlanningProblem{*q_s, *q_g, env};
  }
  return std::nullopt;
}

bool trajectory_free(const ArmModel& arm, const Environment& env, const Trajectory& tau,
                     double resolution) {
  if (tau.rows() == 1) return !in_collision(arm, env, tau.row(0).transpose());
  for (Eigen::Index t = 0; t + 1 < tau.rows(); ++t) {
    if (!segment_free(arm, env, tau.row(t).transpose(), tau.row(t + 1).transpose(), resolution)) {
      return false;
    }
  }
  return true;
}

std::optional<DatasetRecord> generate_record(const PlanningProblem& problem, const ArmModel& arm,
                                             const RecordBuildConfig& cfg, Rng& rng) {
  const PlanResult plan = birrt_plan(problem, arm, cfg.rrt, rng);
  if (!plan.ok()) return std::nullopt;
  const Path smooth = shortcut(plan.path, arm, problem.env, cfg.shortcut_iterations,
                               cfg.rrt.check_resolution, rng);
  const Trajectory seed = resample_to_horizon(smooth, cfg.horizon);
  const OptimizeResult opt = optimize(seed, problem, arm, cfg.trajopt);
  DatasetRecord record{problem, opt.tau, std::nullopt};
  if (!validate_record(record, arm, cfg.horizon, cfg.check_resolution)) return std::nullopt;
  return record;
}

bool validate_record(const DatasetRecord& r, const ArmModel& arm, int horizon, double resolution) {
  if (r.tau.rows() != horizon || r.tau.cols() != arm.dof()) return false;
  if (r.tau.row(0).transpose() != r.problem.q_s) return false;
  if (r.tau.row(horizon - 1).transpose() != r.problem.q_g) return false;
  return trajectory_free(arm, r.problem.env, r.tau, resolution);
}

Json to_json(const DomainConfig& d) {
  Json regions = Json::array();
  for (const Box& b : d.sampling.tip_regions) regions.push_back(box_to_json(b));
  const RecordBuildConfig& b = d.build;
  return {{"arm", to_json(d.arm)},
          {"level", d.level},
          {"shelf",
           {{"x_front", d.shelf.x_front}, {"x_back", d.shelf.x_back},
            {"board_thickness", d.shelf.board_thickness}, {"board_centers", d.shelf.board_centers},
            {"wall_thickness", d.shelf.wall_thickness}}},
          {"sampling",
           {{"min_separation", d.sampling.min_separation}, {"max_tries", d.sampling.max_tries},
            {"region_fraction", d.sampling.region_fraction}, {"tip_regions", regions}}},
          {"build",
           {{"rrt", to_json(b.rrt)},
            {"shortcut_iterations", b.shortcut_iterations},
            {"trajopt", to_json(b.trajopt)},
            {"horizon", b.horizon},
            {"check_resolution", b.check_resolution}}}};
}

DomainConfig domain_from_json(const Json& j) {
  DomainConfig d;
  if (j.contains("arm")) d.arm = arm_from_json(j.at("arm"));
  d.level = j.value("level", d.level);
  if (j.contains("shelf")) {
    const Json& s = j.at("shelf");
    d.shelf.x_front = s.value("x_front", d.shelf.x_front);
    d.shelf.x_back = s.value("x_back", d.shelf.x_back);
    d.shelf.board_thickness = s.value("board_thickness", d.shelf.board_thickness);
    d.shelf.board_centers = s.value("board_centers", d.shelf.board_centers);
    d.shelf.wall_thickness = s.value("wall_thickness", d.shelf.wall_thickness);
  }
  d.sampling.tip_regions = d.shelf.slots();
  if (j.contains("sampling")) {
    const Json& s = j.at("sampling");
    d.sampling.min_separation = s.value("min_separation", d.sampling.min_separation);
    d.sampling.max_tries = s.value("max_tries", d.sampling.max_tries);
    d.sampling.region_fraction = s.value("region_fraction", d.sampling.region_fraction);
    if (s.contains("tip_regions")) {
      d.sampling.tip_regions.clear();
      for (const Json& b : s.at("tip_regions")) d.sampling.tip_regions.push_back(box_from_json(b));
    }
  }
  if (j.contains("build")) {
    const Json& b = j.at("build");
    RecordBuildConfig& c = d.build;
    if (b.contains("rrt")) c.rrt = rrt_params_from_json(b.at("rrt"), c.rrt);
    c.shortcut_iterations = b.value("shortcut_iterations", c.shortcut_iterations);
    if (b.contains("trajopt")) c.trajopt = trajopt_params_from_json(b.at("trajopt"), c.trajopt);
    c.horizon = b.value("horizon", c.horizon);
    c.check_resolution = b.value("check_resolution", c.check_resolution);
  }
  return d;
}

std::optional<PlanningProblem> draw_problem(const DomainConfig& domain, std::uint64_t seed,
                                            std::uint64_t index) {
  Rng rng(derive_seed(seed, index));
  const Environment env = generate_environment(level_spec(domain.level), domain.shelf, rng);
  return sample_problem(env, domain.arm, domain.sampling, rng);
}

Json to_json(const BuildSummary& s) {
  Json levels = Json::object();
  for (const auto& [level, n] : s.per_level) levels[std::to_string(level)] = n;
  return {{"requested", s.requested}, {"successes", s.successes}, {"failures", s.failures},
          {"per_level", levels}};
}

BuildSummary build_dataset(const DomainConfig& domain, int n_records,
                           const std::filesystem::path& out, std::uint64_t seed, int workers) {
  if (n_records < 0) throw std::invalid_argument("record count must be >= 0");
  std::vector<std::optional<DatasetRecord>> records(static_cast<std::size_t>(n_records));
  parallel_for(records.size(), workers, [&](std::size_t i) {
    const std::optional<PlanningProblem> problem = draw_problem(domain, seed, i);
    if (!problem) return;
    Rng rng(derive_seed(derive_seed(seed, i), 1));
    records[i] = generate_record(*problem, domain.arm, domain.build, rng);
  });

  BuildSummary summary;
  summary.requested = n_records;
  DatasetFile file;
  file.header = {{"kind", kDatasetKind},
                 {"version", kDatasetVersion},
                 {"seed", seed},
                 {"requested", n_records},
                 {"domain", to_json(domain)}};
  for (std::optional<DatasetRecord>& r : records) {
    if (r) {
      ++summary.successes;
      file.records.push_back(std::move(*r));
    } else {
      ++summary.failures;
    }
  }
  summary.per_level[domain.level] = summary.successes;
  save_dataset(file, out);
  return summary;
}

DatasetFile load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset '" + path.string() + "'");
  DatasetFile file;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    Json j;
    try {
      j = Json::parse(line);
    } catch (const Json::parse_error& e) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
    if (j.contains("kind")) {
      if (j.at("kind") != kDatasetKind) throw std::runtime_error("not a kcdiff dataset file");
      file.header = std::move(j);
      continue;
    }
    file.records.push_back(record_from_json(j));
  }
  return file;
}

void save_dataset(const DatasetFile& data, const std::filesystem::path& path) {
  std::ostringstream text;
  Json header = data.header;
  if (header.is_null()) header = {{"kind", kDatasetKind}, {"version", kDatasetVersion}};
  text << header.dump() << '\n';
  for (const DatasetRecord& r : data.records) text << to_json(r).dump() << '\n';
  write_text_file(path, text.str());
}

void annotate_phi(const std::filesystem::path& in, const KeyConfigSet& keys, const ArmModel& arm,
                  const std::filesystem::path& out) {
  DatasetFile file = load_dataset(in);
  for (DatasetRecord& r : file.records) r.phi = env_representation(keys, arm, r.problem.env);
  file.header["n_keys"] = keys.size();
  save_dataset(file, out);
}

}  // namespace kcdiff
