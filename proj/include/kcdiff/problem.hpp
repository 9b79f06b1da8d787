#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "kcdiff/world.hpp"

namespace kcdiff {

struct PlanningProblem {
  Configuration q_s;
  Configuration q_g;
  Environment env;
};

/// Binary collision fingerprint of an environment at the key configurations.
struct EnvRepresentation {
  std::vector<std::uint8_t> bits;

  [[nodiscard]] std::size_t size() const { return bits.size(); }
  /// Compact "0101..." form used in dataset files and logs.
  [[nodiscard]] std::string to_string() const;
  static EnvRepresentation from_string(const std::string& s);
  [[nodiscard]] Eigen::VectorXd as_vector() const;
  bool operator==(const EnvRepresentation&) const = default;
};

struct DatasetRecord {
  PlanningProblem problem;
  Trajectory tau;
  std::optional<EnvRepresentation> phi;
};

/// Per-joint affine map of the joint limits onto [-1, 1].
class Normalizer {
 public:
  Normalizer() = default;
  explicit Normalizer(const ArmModel& arm);
  Normalizer(Eigen::VectorXd center, Eigen::VectorXd half_range)
      : center_(std::move(center)), half_range_(std::move(half_range)) {}

  [[nodiscard]] Configuration normalize(const Configuration& q) const;
  [[nodiscard]] Configuration denormalize(const Configuration& x) const;
  [[nodiscard]] Trajectory normalize(const Trajectory& tau) const;
  [[nodiscard]] Trajectory denormalize(const Trajectory& x) const;

  [[nodiscard]] const Eigen::VectorXd& center() const { return center_; }
  [[nodiscard]] const Eigen::VectorXd& half_range() const { return half_range_; }

 private:
  Eigen::VectorXd center_;
  Eigen::VectorXd half_range_;
};

}  // namespace kcdiff
