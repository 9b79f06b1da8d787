#pragma once

#include <Eigen/Core>

#include <span>
#include <variant>
#include <vector>

namespace kcdiff {

using Vec2 = Eigen::Vector2d;
/// Joint-angle vector of dimension d (radians).
using Configuration = Eigen::VectorXd;
/// Fixed-horizon trajectory, one waypoint per row (T x d).
using Trajectory = Eigen::MatrixXd;

struct JointLimit {
  double lo;
  double hi;
};

/// Planar serial arm: revolute joints, capsule links.
struct ArmModel {
  std::vector<double> link_lengths;
  double link_radius = 0.04;
  Vec2 base = Vec2::Zero();
  std::vector<JointLimit> joint_limits;

  [[nodiscard]] int dof() const { return static_cast<int>(link_lengths.size()); }
  [[nodiscard]] double reach() const;
  [[nodiscard]] bool within_limits(const Configuration& q) const;
  /// Throws std::invalid_argument when any invariant is broken.
  void validate() const;

  /// Three links (0.5, 0.4, 0.3) m, radius 0.04 m, limits +-(pi - 0.05).
  static ArmModel planar_default();
};

struct Capsule {
  Vec2 a;
  Vec2 b;
  double radius;
};

struct Circle {
  Vec2 center;
  double radius;
};

/// Axis-aligned box.
struct Box {
  Vec2 min;
  Vec2 max;
};

using Obstacle = std::variant<Circle, Box>;

struct Environment {
  std::vector<Obstacle> fixtures;
  std::vector<Obstacle> objects;
  Box bounds{Vec2(-1.5, -1.5), Vec2(1.5, 1.5)};

  [[nodiscard]] std::size_t obstacle_count() const { return fixtures.size() + objects.size(); }
  /// Fixtures first, then objects.
  [[nodiscard]] const Obstacle& obstacle(std::size_t i) const {
    return i < fixtures.size() ? fixtures[i] : objects[i - fixtures.size()];
  }
  void validate() const;
};

struct ArmPose {
  std::vector<Vec2> joints;  // d + 1 points, joints[0] = base, joints[d] = tip
  std::vector<Capsule> links;
  Vec2 tip;
};

/// Throws std::invalid_argument on dimension mismatch.
ArmPose forward_kinematics(const ArmModel& arm, const Configuration& q);

double signed_distance(const Capsule& c, const Obstacle& o);
double signed_distance(const Capsule& c1, const Capsule& c2);

/// Minimum signed distance over link-obstacle pairs and non-adjacent link pairs.
double signed_clearance(const ArmModel& arm, const Environment& env, const Configuration& q);

bool in_collision(const ArmModel& arm, const Environment& env, const Configuration& q);

/// Minimum clearance over n_sub + 1 configurations evenly interpolated from q_a to q_b.
double swept_clearance(const ArmModel& arm, const Environment& env, const Configuration& q_a,
                       const Configuration& q_b, int n_sub);

/// Signed distance together with its derivative w.r.t. the segment endpoints.
struct SegmentDistance {
  double value = 0.0;
  Vec2 grad_a = Vec2::Zero();
  Vec2 grad_b = Vec2::Zero();
};

SegmentDistance signed_distance_with_gradient(const Capsule& c, const Obstacle& o);

struct SegmentPairDistance {
  double value = 0.0;
  Vec2 grad_a1 = Vec2::Zero();
  Vec2 grad_b1 = Vec2::Zero();
  Vec2 grad_a2 = Vec2::Zero();
  Vec2 grad_b2 = Vec2::Zero();
};

SegmentPairDistance signed_distance_with_gradient(const Capsule& c1, const Capsule& c2);

/// Sum over all clearance pairs of max(0, margin - sd). When `grad` is non-null
/// the derivative of that sum w.r.t. q is accumulated into it (scaled by `weight`).
/// The hinge kink itself contributes a zero subgradient.
double clearance_hinge(const ArmModel& arm, const Environment& env, const Configuration& q,
                       double margin, Eigen::VectorXd* grad = nullptr, double weight = 1.0);

/// Number of pairs that enter signed_clearance and clearance_hinge.
int clearance_pair_count(const ArmModel& arm, const Environment& env);

}  // namespace kcdiff
