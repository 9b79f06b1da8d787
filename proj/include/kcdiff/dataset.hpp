#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "kcdiff/io.hpp"
#include "kcdiff/keyconfig.hpp"
#include "kcdiff/planners.hpp"
#include "kcdiff/problem.hpp"
#include "kcdiff/random.hpp"
#include "kcdiff/trajopt.hpp"

namespace kcdiff {

/// Object clutter per shelf slot for one difficulty level.
struct LevelSpec {
  int level = 1;
  int min_objects = 0;       // per slot
  int max_objects = 0;
  double min_size = 0.03;    // circle radius or box half-extent, meters
  double max_size = 0.06;

  void validate() const;
};

/// Levels 1-4: empty, 1, 2 and 3-4 objects per slot.
LevelSpec level_spec(int level);

/// Planar shelf: four horizontal boards and a back wall in front of the arm.
struct ShelfLayout {
  double x_front = 0.55;
  double x_back = 1.05;
  double board_thickness = 0.04;
  std::vector<double> board_centers{-0.54, -0.18, 0.18, 0.54};
  double wall_thickness = 0.05;

  [[nodiscard]] std::vector<Obstacle> fixtures() const;
  /// Free cells between consecutive boards.
  [[nodiscard]] std::vector<Box> slots() const;
};

Environment generate_environment(const LevelSpec& spec, const ShelfLayout& shelf, Rng& rng);

struct ProblemSampling {
  double min_separation = 1.0;  // radians
  int max_tries = 20000;
  /// Probability that an endpoint is drawn with its tip inside one of tip_regions.
  double region_fraction = 0.75;
  std::vector<Box> tip_regions;
};

std::optional<PlanningProblem> sample_problem(const Environment& env, const ArmModel& arm,
                                              const ProblemSampling& sampling, Rng& rng);

struct RecordBuildConfig {
  RrtParams rrt;
  int shortcut_iterations = 200;
  TrajOptParams trajopt{.iterations = 100};
  int horizon = 48;
  double check_resolution = 0.02;  // radians, dense validation
};

/// Dense collision check of consecutive waypoints at `resolution`.
bool trajectory_free(const ArmModel& arm, const Environment& env, const Trajectory& tau,
                     double resolution);

/// Bi-RRT, shortcut, resample to the horizon, then optimize. Empty when any
/// stage fails or the result is not densely collision-free.
std::optional<DatasetRecord> generate_record(const PlanningProblem& problem, const ArmModel& arm,
                                             const RecordBuildConfig& cfg, Rng& rng);

/// Audits the record invariants (endpoints, horizon, dense collision freedom).
bool validate_record(const DatasetRecord& r, const ArmModel& arm, int horizon, double resolution);

struct DomainConfig {
  ArmModel arm = ArmModel::planar_default();
  ShelfLayout shelf;
  int level = 2;
  ProblemSampling sampling{.tip_regions = ShelfLayout{}.slots()};
  RecordBuildConfig build;
};

Json to_json(const DomainConfig& d);
DomainConfig domain_from_json(const Json& j);

/// Environment and problem drawn for dataset index i under `seed`.
std::optional<PlanningProblem> draw_problem(const DomainConfig& domain, std::uint64_t seed,
                                            std::uint64_t index);

struct BuildSummary {
  int requested = 0;
  int successes = 0;
  int failures = 0;
  std::map<int, int> per_level;
};

Json to_json(const BuildSummary& s);

/// Attempts n_records problems and writes the successful records as JSON
/// Lines after a header line. Records are ordered by index.
BuildSummary build_dataset(const DomainConfig& domain, int n_records,
                           const std::filesystem::path& out, std::uint64_t seed, int workers = 1);

struct DatasetFile {
  Json header;
  std::vector<DatasetRecord> records;
};

DatasetFile load_dataset(const std::filesystem::path& path);
void save_dataset(const DatasetFile& data, const std::filesystem::path& path);

/// Recompute every record's phi from the keys. Input and output may be the same path.
void annotate_phi(const std::filesystem::path& in, const KeyConfigSet& keys, const ArmModel& arm,
                  const std::filesystem::path& out);

}  // namespace kcdiff
