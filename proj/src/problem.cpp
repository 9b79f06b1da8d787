#include <stdexcept>

#include "kcdiff/problem.hpp"

namespace kcdiff {

std::string EnvRepresentation::to_string() const {
  std::string s;
  s.reserve(bits.size());
  for (std::uint8_t b : bits) s.push_back(b ? '1' : '0');
  return s;
}

EnvRepresentation EnvRepresentation::from_string(const std::string& s) {
  EnvRepresentation phi;
  phi.bits.reserve(s.size());
  for (char ch : s) {
    if (ch != '0' && ch != '1') throw std::invalid_argument("phi string must contain only 0/1");
    phi.bits.push_back(ch == '1' ? 1 : 0);
  }
  return phi;
}

Eigen::VectorXd EnvRepresentation::as_vector() const {
  Eigen::VectorXd v(static_cast<Eigen::Index>(bits.size()));
  for (std::size_t i = 0; i < bits.size(); ++i) v[static_cast<Eigen::Index>(i)] = bits[i];
  return v;
}

Normalizer::Normalizer(const ArmModel& arm)
    : center_(arm.dof()), half_range_(arm.dof()) {
  for (int i = 0; i < arm.dof(); ++i) {
    center_[i] = 0.5 * (arm.joint_limits[i].lo + arm.joint_limits[i].hi);
    half_range_[i] = 0.5 * (arm.joint_limits[i].hi - arm.joint_limits[i].lo);
  }
}

Configuration Normalizer::normalize(const Configuration& q) const {
  return (q - center_).cwiseQuotient(half_range_);
}

Configuration Normalizer::denormalize(const Configuration& x) const {
  return x.cwiseProduct(half_range_) + center_;
}

Trajectory Normalizer::normalize(const Trajectory& tau) const {
  Trajectory out(tau.rows(), tau.cols());
  for (Eigen::Index r = 0; r < tau.rows(); ++r) {
    out.row(r) = normalize(Configuration(tau.row(r).transpose())).transpose();
  }
  return out;
}

Trajectory Normalizer::denormalize(const Trajectory& x) const {
  Trajectory out(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    out.row(r) = denormalize(Configuration(x.row(r).transpose())).transpose();
  }
  return out;
}

}  // namespace kcdiff
