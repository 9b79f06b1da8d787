#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "kcdiff/training.hpp"

namespace kcdiff {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes little-endian");

namespace {

constexpr char kMagic[8] = {'K', 'C', 'D', 'I', 'F', 'F', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

template <class T>
void write_pod(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T read_pod(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw std::runtime_error("truncated checkpoint");
  return v;
}

void write_array(std::ostream& out, std::span<const double> a) {
  out.write(reinterpret_cast<const char*>(a.data()), static_cast<std::streamsize>(a.size_bytes()));
}

void read_array(std::istream& in, std::span<double> a) {
  in.read(reinterpret_cast<char*>(a.data()), static_cast<std::streamsize>(a.size_bytes()));
  if (!in) throw std::runtime_error("truncated checkpoint");
}

}  // namespace

TrainState::TrainState(const DenoiserConfig& cfg)
    : model(cfg), adam_m(model.parameter_count(), 0.0), adam_v(model.parameter_count(), 0.0) {}

void adam_update(TrainState& s, std::span<const double> g, double lr, double beta1, double beta2,
                 double eps) {
  auto params = s.model.parameters();
  if (g.size() != params.size()) throw std::invalid_argument("gradient size mismatch");
  ++s.step;
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(s.step));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(s.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    s.adam_m[i] = beta1 * s.adam_m[i] + (1.0 - beta1) * g[i];
    s.adam_v[i] = beta2 * s.adam_v[i] + (1.0 - beta2) * g[i] * g[i];
    const double m_hat = s.adam_m[i] / c1;
    const double v_hat = s.adam_v[i] / c2;
    params[i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
  }
}

void save_checkpoint(const TrainState& s, const std::filesystem::path& path) {
  const std::size_t n = s.model.parameter_count();
  const auto d = static_cast<std::size_t>(s.normalizer.center().size());
  const Json header = {
      {"config", to_json(s.model.config())},
      {"schedule", to_string(s.schedule)},
      {"step", s.step},
      {"arrays",
       {{{"name", "params"}, {"length", n}},
        {{"name", "adam_m"}, {"length", n}},
        {{"name", "adam_v"}, {"length", n}},
        {{"name", "normalizer_center"}, {"length", d}},
        {{"name", "normalizer_half_range"}, {"length", d}}}}};
  const std::string text = header.dump();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint '" + path.string() + "'");
  out.write(kMagic, sizeof(kMagic));
  write_pod(out, kVersion);
  write_pod(out, static_cast<std::uint64_t>(text.size()));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  write_array(out, s.model.parameters());
  write_array(out, s.adam_m);
  write_array(out, s.adam_v);
  write_array(out, std::span<const double>(s.normalizer.center().data(), d));
  write_array(out, std::span<const double>(s.normalizer.half_range().data(), d));
  if (!out) throw std::runtime_error("failed writing checkpoint '" + path.string() + "'");
}

TrainState load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint '" + path.string() + "'");
  char magic[sizeof(kMagic)];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw std::runtime_error("'" + path.string() + "' is not a checkpoint");
  }
  const auto version = read_pod<std::uint32_t>(in);
  if (version != kVersion) throw std::runtime_error("unsupported checkpoint version");
  const auto header_len = read_pod<std::uint64_t>(in);
  std::string text(header_len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(header_len));
  if (!in) throw std::runtime_error("truncated checkpoint header");
  const Json header = Json::parse(text);

  TrainState s(denoiser_config_from_json(header.at("config")));
  s.schedule = schedule_kind_from_string(header.at("schedule").get<std::string>());
  s.step = header.at("step").get<std::int64_t>();
  const std::size_t n = s.model.parameter_count();
  const Json& arrays = header.at("arrays");
  if (arrays.size() != 5 || arrays[0].at("length").get<std::size_t>() != n) {
    throw std::runtime_error("checkpoint arrays do not match the model config");
  }
  read_array(in, s.model.parameters());
  read_array(in, s.adam_m);
  read_array(in, s.adam_v);
  const auto d = arrays[3].at("length").get<Eigen::Index>();
  Eigen::VectorXd center(d);
  Eigen::VectorXd half(d);
  read_array(in, std::span<double>(center.data(), static_cast<std::size_t>(d)));
  read_array(in, std::span<double>(half.data(), static_cast<std::size_t>(d)));
  s.normalizer = Normalizer(center, half);
  return s;
}

}  // namespace kcdiff
