#include "kcdiff/world.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

namespace kcdiff {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Vec2 perp(const Vec2& v) { return {-v.y(), v.x()}; }

double cross(const Vec2& u, const Vec2& v) { return u.x() * v.y() - u.y() * v.x(); }

// Closest-point parameter of p on segment [a, b].
double closest_param(const Vec2& p, const Vec2& a, const Vec2& b) {
  const Vec2 ab = b - a;
  const double len2 = ab.squaredNorm();
  if (len2 <= 0.0) return 0.0;
  return std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
}

// Distance from p to segment [a, b] with derivatives w.r.t. p, a and b.
struct PointSegment {
  double dist;
  Vec2 grad_p;
  Vec2 grad_a;
  Vec2 grad_b;
};

PointSegment point_segment(const Vec2& p, const Vec2& a, const Vec2& b) {
  const double s = closest_param(p, a, b);
  const Vec2 closest = a + s * (b - a);
  const Vec2 diff = p - closest;
  const double dist = diff.norm();
  PointSegment out{dist, Vec2::Zero(), Vec2::Zero(), Vec2::Zero()};
  if (dist > 0.0) {
    const Vec2 n = diff / dist;
    out.grad_p = n;
    out.grad_a = -(1.0 - s) * n;
    out.grad_b = -s * n;
  }
  return out;
}

// Signed distance from a point to a box and its spatial gradient.
std::pair<double, Vec2> point_box(const Vec2& p, const Box& box) {
  const Vec2 center = 0.5 * (box.min + box.max);
  const Vec2 half = 0.5 * (box.max - box.min);
  const Vec2 rel = p - center;
  const Vec2 q = rel.cwiseAbs() - half;
  const Vec2 sign(rel.x() >= 0.0 ? 1.0 : -1.0, rel.y() >= 0.0 ? 1.0 : -1.0);
  if (q.x() > 0.0 || q.y() > 0.0) {
    const Vec2 outside = q.cwiseMax(0.0);
    const double d = outside.norm();
    return {d, outside.cwiseProduct(sign) / d};
  }
  if (q.x() >= q.y()) return {q.x(), Vec2(sign.x(), 0.0)};
  return {q.y(), Vec2(0.0, sign.y())};
}

// Liang-Barsky clip of a + s (b - a), s in [0, 1], against the box.
bool clip_segment(const Vec2& a, const Vec2& b, const Box& box, double& s0, double& s1) {
  s0 = 0.0;
  s1 = 1.0;
  const Vec2 d = b - a;
  const std::array<double, 4> p{-d.x(), d.x(), -d.y(), d.y()};
  const std::array<double, 4> q{a.x() - box.min.x(), box.max.x() - a.x(), a.y() - box.min.y(),
                                box.max.y() - a.y()};
  for (int i = 0; i < 4; ++i) {
    if (p[i] == 0.0) {
      if (q[i] < 0.0) return false;
      continue;
    }
    const double r = q[i] / p[i];
    if (p[i] < 0.0) {
      s0 = std::max(s0, r);
    } else {
      s1 = std::min(s1, r);
    }
    if (s0 > s1) return false;
  }
  return true;
}

SegmentDistance segment_circle(const Vec2& a, const Vec2& b, const Circle& c) {
  const PointSegment ps = point_segment(c.center, a, b);
  return {ps.dist - c.radius, ps.grad_a, ps.grad_b};
}

SegmentDistance segment_box(const Vec2& a, const Vec2& b, const Box& box) {
  double s0 = 0.0;
  double s1 = 1.0;
  if (!clip_segment(a, b, box, s0, s1)) {
    SegmentDistance best{kInf, Vec2::Zero(), Vec2::Zero()};
    const auto [da, ga] = point_box(a, box);
    if (da < best.value) best = {da, ga, Vec2::Zero()};
    const auto [db, gb] = point_box(b, box);
    if (db < best.value) best = {db, Vec2::Zero(), gb};
    const std::array<Vec2, 4> corners{box.min, Vec2(box.max.x(), box.min.y()), box.max,
                                      Vec2(box.min.x(), box.max.y())};
    for (const Vec2& corner : corners) {
      const PointSegment ps = point_segment(corner, a, b);
      if (ps.dist < best.value) best = {ps.dist, ps.grad_a, ps.grad_b};
    }
    return best;
  }

  // Interior: the box SDF along the segment is max of four face functions,
  // each linear in s; its minimum sits on an interval end or a face crossing.
  const std::array<Vec2, 4> normals{Vec2(1, 0), Vec2(-1, 0), Vec2(0, 1), Vec2(0, -1)};
  const std::array<double, 4> offsets{-box.max.x(), box.min.x(), -box.max.y(), box.min.y()};
  std::array<double, 4> fa{};
  std::array<double, 4> slope{};
  const Vec2 d = b - a;
  for (int k = 0; k < 4; ++k) {
    fa[k] = normals[k].dot(a) + offsets[k];
    slope[k] = normals[k].dot(d);
  }
  auto g = [&](double s) {
    double m = -kInf;
    for (int k = 0; k < 4; ++k) m = std::max(m, fa[k] + s * slope[k]);
    return m;
  };
  double best_s = s0;
  double best_v = g(s0);
  auto consider = [&](double s) {
    if (s < s0 || s > s1) return;
    const double v = g(s);
    if (v < best_v) {
      best_v = v;
      best_s = s;
    }
  };
  consider(s1);
  for (int j = 0; j < 4; ++j) {
    for (int k = j + 1; k < 4; ++k) {
      const double ds = slope[j] - slope[k];
      if (ds != 0.0) consider((fa[k] - fa[j]) / ds);
    }
  }

  // Subgradient: a single active face, or the convex combination of two
  // crossing faces whose slopes cancel.
  const double tol = 1e-12 * (1.0 + std::abs(best_v));
  int first = -1;
  int second = -1;
  for (int k = 0; k < 4; ++k) {
    if (std::abs(fa[k] + best_s * slope[k] - best_v) <= tol) {
      if (first < 0) {
        first = k;
      } else if (second < 0 && slope[k] * slope[first] < 0.0) {
        second = k;
      }
    }
  }
  Vec2 n = normals[first];
  if (second >= 0 && best_s > 0.0 && best_s < 1.0) {
    const double lambda = slope[second] / (slope[second] - slope[first]);
    n = lambda * normals[first] + (1.0 - lambda) * normals[second];
  }
  return {best_v, (1.0 - best_s) * n, best_s * n};
}

bool segments_cross(const Vec2& a1, const Vec2& b1, const Vec2& a2, const Vec2& b2) {
  const double o1 = cross(b1 - a1, a2 - a1);
  const double o2 = cross(b1 - a1, b2 - a1);
  const double o3 = cross(b2 - a2, a1 - a2);
  const double o4 = cross(b2 - a2, b1 - a2);
  return ((o1 > 0.0 && o2 < 0.0) || (o1 < 0.0 && o2 > 0.0)) &&
         ((o3 > 0.0 && o4 < 0.0) || (o3 < 0.0 && o4 > 0.0));
}

// Map endpoint derivatives of link `link` onto joint-angle derivatives.
void accumulate_link_gradient(const ArmPose& pose, int link, const Vec2& grad_a,
                              const Vec2& grad_b, double scale, Eigen::VectorXd& grad) {
  const Vec2& pa = pose.joints[link];
  const Vec2& pb = pose.joints[link + 1];
  for (int k = 0; k <= link; ++k) {
    const Vec2& pivot = pose.joints[k];
    double g = grad_b.dot(perp(pb - pivot));
    if (k < link) g += grad_a.dot(perp(pa - pivot));
    grad[k] += scale * g;
  }
}

}  // namespace

double ArmModel::reach() const {
  double r = 0.0;
  for (double l : link_lengths) r += l;
  return r;
}

bool ArmModel::within_limits(const Configuration& q) const {
  if (q.size() != dof()) return false;
  for (int i = 0; i < dof(); ++i) {
    if (q[i] < joint_limits[i].lo || q[i] > joint_limits[i].hi) return false;
  }
  return true;
}

void ArmModel::validate() const {
  if (link_lengths.empty()) throw std::invalid_argument("arm has no links");
  if (joint_limits.size() != link_lengths.size()) {
    throw std::invalid_argument("arm joint_limits size differs from link count");
  }
  for (double l : link_lengths) {
    if (!(l > 0.0)) throw std::invalid_argument("arm link length must be positive");
  }
  if (!(link_radius > 0.0)) throw std::invalid_argument("arm link radius must be positive");
  for (const JointLimit& lim : joint_limits) {
    if (!(lim.lo < lim.hi)) throw std::invalid_argument("arm joint limit lo must be < hi");
  }
}

ArmModel ArmModel::planar_default() {
  constexpr double kLim = std::numbers::pi - 0.05;
  return ArmModel{{0.5, 0.4, 0.3}, 0.04, Vec2::Zero(), {{-kLim, kLim}, {-kLim, kLim}, {-kLim, kLim}}};
}

void Environment::validate() const {
  if (!(bounds.min.x() < bounds.max.x() && bounds.min.y() < bounds.max.y())) {
    throw std::invalid_argument("environment bounds are empty");
  }
  auto inside = [&](const Vec2& lo, const Vec2& hi) {
    return lo.x() >= bounds.min.x() && lo.y() >= bounds.min.y() && hi.x() <= bounds.max.x() &&
           hi.y() <= bounds.max.y();
  };
  for (std::size_t i = 0; i < obstacle_count(); ++i) {
    const Obstacle& o = obstacle(i);
    if (const auto* c = std::get_if<Circle>(&o)) {
      if (!(c->radius > 0.0)) throw std::invalid_argument("circle radius must be positive");
      const Vec2 r(c->radius, c->radius);
      if (!inside(c->center - r, c->center + r)) {
        throw std::invalid_argument("circle outside environment bounds");
      }
    } else {
      const Box& b = std::get<Box>(o);
      if (!(b.min.x() < b.max.x() && b.min.y() < b.max.y())) {
        throw std::invalid_argument("box min must be < max");
      }
      if (!inside(b.min, b.max)) throw std::invalid_argument("box outside environment bounds");
    }
  }
}

ArmPose forward_kinematics(const ArmModel& arm, const Configuration& q) {
  const int d = arm.dof();
  if (q.size() != d) {
    throw std::invalid_argument("configuration has dimension " + std::to_string(q.size()) +
                                ", arm expects " + std::to_string(d));
  }
  ArmPose pose;
  pose.joints.reserve(d + 1);
  pose.links.reserve(d);
  pose.joints.push_back(arm.base);
  double angle = 0.0;
  for (int i = 0; i < d; ++i) {
    angle += q[i];
    const Vec2 next =
        pose.joints.back() + arm.link_lengths[i] * Vec2(std::cos(angle), std::sin(angle));
    pose.links.push_back({pose.joints.back(), next, arm.link_radius});
    pose.joints.push_back(next);
  }
  pose.tip = pose.joints.back();
  return pose;
}

SegmentDistance signed_distance_with_gradient(const Capsule& c, const Obstacle& o) {
  SegmentDistance sd = std::holds_alternative<Circle>(o)
                           ? segment_circle(c.a, c.b, std::get<Circle>(o))
                           : segment_box(c.a, c.b, std::get<Box>(o));
  sd.value -= c.radius;
  return sd;
}

SegmentPairDistance signed_distance_with_gradient(const Capsule& c1, const Capsule& c2) {
  // Endpoint-to-segment candidates; crossing axes flip the sign so the
  // value stays continuous and still points toward separation.
  SegmentPairDistance best;
  best.value = kInf;
  auto take = [&](const PointSegment& ps, int which_point) {
    if (ps.dist >= best.value) return;
    best = SegmentPairDistance{};
    best.value = ps.dist;
    switch (which_point) {
      case 0: best.grad_a1 = ps.grad_p; best.grad_a2 = ps.grad_a; best.grad_b2 = ps.grad_b; break;
      case 1: best.grad_b1 = ps.grad_p; best.grad_a2 = ps.grad_a; best.grad_b2 = ps.grad_b; break;
      case 2: best.grad_a2 = ps.grad_p; best.grad_a1 = ps.grad_a; best.grad_b1 = ps.grad_b; break;
      default: best.grad_b2 = ps.grad_p; best.grad_a1 = ps.grad_a; best.grad_b1 = ps.grad_b; break;
    }
  };
  take(point_segment(c1.a, c2.a, c2.b), 0);
  take(point_segment(c1.b, c2.a, c2.b), 1);
  take(point_segment(c2.a, c1.a, c1.b), 2);
  take(point_segment(c2.b, c1.a, c1.b), 3);
  if (segments_cross(c1.a, c1.b, c2.a, c2.b)) {
    best.value = -best.value;
    best.grad_a1 = -best.grad_a1;
    best.grad_b1 = -best.grad_b1;
    best.grad_a2 = -best.grad_a2;
    best.grad_b2 = -best.grad_b2;
  }
  best.value -= c1.radius + c2.radius;
  return best;
}

double signed_distance(const Capsule& c, const Obstacle& o) {
  return signed_distance_with_gradient(c, o).value;
}

double signed_distance(const Capsule& c1, const Capsule& c2) {
  return signed_distance_with_gradient(c1, c2).value;
}

int clearance_pair_count(const ArmModel& arm, const Environment& env) {
  const int d = arm.dof();
  const int self_pairs = d >= 3 ? (d - 1) * (d - 2) / 2 : 0;
  return d * static_cast<int>(env.obstacle_count()) + self_pairs;
}

double signed_clearance(const ArmModel& arm, const Environment& env, const Configuration& q) {
  const ArmPose pose = forward_kinematics(arm, q);
  double best = kInf;
  for (const Capsule& link : pose.links) {
    for (const Obstacle& o : env.fixtures) best = std::min(best, signed_distance(link, o));
    for (const Obstacle& o : env.objects) best = std::min(best, signed_distance(link, o));
  }
  const int d = arm.dof();
  for (int i = 0; i < d; ++i) {
    for (int j = i + 2; j < d; ++j) {
      best = std::min(best, signed_distance(pose.links[i], pose.links[j]));
    }
  }
  return best;
}

bool in_collision(const ArmModel& arm, const Environment& env, const Configuration& q) {
  return signed_clearance(arm, env, q) < 0.0;
}

double swept_clearance(const ArmModel& arm, const Environment& env, const Configuration& q_a,
                       const Configuration& q_b, int n_sub) {
  if (n_sub < 1) throw std::invalid_argument("swept_clearance needs n_sub >= 1");
  double best = kInf;
  for (int j = 0; j <= n_sub; ++j) {
    const double alpha = static_cast<double>(j) / n_sub;
    const Configuration q = (1.0 - alpha) * q_a + alpha * q_b;
    best = std::min(best, signed_clearance(arm, env, q));
  }
  return best;
}

double clearance_hinge(const ArmModel& arm, const Environment& env, const Configuration& q,
                       double margin, Eigen::VectorXd* grad, double weight) {
  const ArmPose pose = forward_kinematics(arm, q);
  const int d = arm.dof();
  double cost = 0.0;
  for (int i = 0; i < d; ++i) {
    for (std::size_t o = 0; o < env.obstacle_count(); ++o) {
      const SegmentDistance sd = signed_distance_with_gradient(pose.links[i], env.obstacle(o));
      const double h = margin - sd.value;
      if (h <= 0.0) continue;
      cost += h;
      if (grad) accumulate_link_gradient(pose, i, sd.grad_a, sd.grad_b, -weight, *grad);
    }
  }
  for (int i = 0; i < d; ++i) {
    for (int j = i + 2; j < d; ++j) {
      const SegmentPairDistance sd = signed_distance_with_gradient(pose.links[i], pose.links[j]);
      const double h = margin - sd.value;
      if (h <= 0.0) continue;
      cost += h;
      if (grad) {
        accumulate_link_gradient(pose, i, sd.grad_a1, sd.grad_b1, -weight, *grad);
        accumulate_link_gradient(pose, j, sd.grad_a2, sd.grad_b2, -weight, *grad);
      }
    }
  }
  return cost;
}

}  // namespace kcdiff
