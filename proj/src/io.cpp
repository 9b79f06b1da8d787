#include <fstream>
#include <stdexcept>

#include "kcdiff/io.hpp"

namespace kcdiff {

namespace {

Json vec2_json(const Vec2& v) { return Json::array({v.x(), v.y()}); }

Vec2 vec2_from(const Json& j) {
  if (!j.is_array() || j.size() != 2) throw std::invalid_argument("expected [x, y]");
  return {j[0].get<double>(), j[1].get<double>()};
}

Json box_json(const Box& b) { return {{"min", vec2_json(b.min)}, {"max", vec2_json(b.max)}}; }

Box box_from(const Json& j) { return {vec2_from(j.at("min")), vec2_from(j.at("max"))}; }

}  // namespace

Json to_json(const Configuration& q) {
  Json j = Json::array();
  for (Eigen::Index i = 0; i < q.size(); ++i) j.push_back(q[i]);
  return j;
}

Configuration configuration_from_json(const Json& j) {
  if (!j.is_array()) throw std::invalid_argument("configuration must be a JSON array");
  Configuration q(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) q[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  return q;
}

Json to_json(const Trajectory& tau) {
  Json j = Json::array();
  for (Eigen::Index r = 0; r < tau.rows(); ++r) {
    j.push_back(to_json(Configuration(tau.row(r).transpose())));
  }
  return j;
}

Trajectory trajectory_from_json(const Json& j) {
  if (!j.is_array() || j.empty()) throw std::invalid_argument("trajectory must be a non-empty array");
  const auto d = static_cast<Eigen::Index>(j[0].size());
  Trajectory tau(static_cast<Eigen::Index>(j.size()), d);
  for (std::size_t r = 0; r < j.size(); ++r) {
    const Configuration q = configuration_from_json(j[r]);
    if (q.size() != d) throw std::invalid_argument("trajectory rows differ in dimension");
    tau.row(static_cast<Eigen::Index>(r)) = q.transpose();
  }
  return tau;
}

Json to_json(const Obstacle& o) {
  if (const auto* c = std::get_if<Circle>(&o)) {
    return {{"kind", "circle"}, {"center", vec2_json(c->center)}, {"radius", c->radius}};
  }
  const Box& b = std::get<Box>(o);
  return {{"kind", "box"}, {"min", vec2_json(b.min)}, {"max", vec2_json(b.max)}};
}

Obstacle obstacle_from_json(const Json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "circle") return Circle{vec2_from(j.at("center")), j.at("radius").get<double>()};
  if (kind == "box") return box_from(j);
  throw std::invalid_argument("unknown obstacle kind '" + kind + "'");
}

Json to_json(const Environment& env) {
  Json fixtures = Json::array();
  for (const Obstacle& o : env.fixtures) fixtures.push_back(to_json(o));
  Json objects = Json::array();
  for (const Obstacle& o : env.objects) objects.push_back(to_json(o));
  return {{"fixtures", fixtures}, {"objects", objects}, {"bounds", box_json(env.bounds)}};
}

Environment environment_from_json(const Json& j) {
  Environment env;
  for (const Json& o : j.at("fixtures")) env.fixtures.push_back(obstacle_from_json(o));
  for (const Json& o : j.at("objects")) env.objects.push_back(obstacle_from_json(o));
  env.bounds = box_from(j.at("bounds"));
  env.validate();
  return env;
}

Json to_json(const ArmModel& arm) {
  Json limits = Json::array();
  for (const JointLimit& l : arm.joint_limits) limits.push_back(Json::array({l.lo, l.hi}));
  return {{"link_lengths", arm.link_lengths},
          {"link_radius", arm.link_radius},
          {"base", vec2_json(arm.base)},
          {"joint_limits", limits}};
}

ArmModel arm_from_json(const Json& j) {
  ArmModel arm;
  arm.link_lengths = j.at("link_lengths").get<std::vector<double>>();
  arm.link_radius = j.at("link_radius").get<double>();
  arm.base = vec2_from(j.at("base"));
  for (const Json& l : j.at("joint_limits")) {
    arm.joint_limits.push_back({l.at(0).get<double>(), l.at(1).get<double>()});
  }
  arm.validate();
  return arm;
}

Json to_json(const DatasetRecord& r) {
  Json j = {{"q_s", to_json(r.problem.q_s)},
            {"q_g", to_json(r.problem.q_g)},
            {"tau", to_json(r.tau)},
            {"env", to_json(r.problem.env)}};
  if (r.phi) j["phi"] = r.phi->to_string();
  return j;
}

DatasetRecord record_from_json(const Json& j) {
  DatasetRecord r;
  r.problem.q_s = configuration_from_json(j.at("q_s"));
  r.problem.q_g = configuration_from_json(j.at("q_g"));
  r.problem.env = environment_from_json(j.at("env"));
  r.tau = trajectory_from_json(j.at("tau"));
  if (j.contains("phi")) r.phi = EnvRepresentation::from_string(j.at("phi").get<std::string>());
  return r;
}

Json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw std::runtime_error("invalid JSON in '" + path.string() + "': " + e.what());
  }
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << text;
}

}  // namespace kcdiff
