#include "kcdiff/denoiser.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

namespace kcdiff {

namespace {

using Mat = Eigen::MatrixXd;
using RowVec = Eigen::RowVectorXd;

constexpr double kLnEps = 1e-6;

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

Mat silu(const Mat& x) {
  return x.unaryExpr([](double v) { return v * sigmoid(v); });
}

// d silu / dx
Mat silu_grad(const Mat& x) {
  return x.unaryExpr([](double v) {
    const double s = sigmoid(v);
    return s * (1.0 + v * (1.0 - s));
  });
}

constexpr double kGeluC = 0.7978845608028654;  // sqrt(2 / pi)

Mat gelu(const Mat& x) {
  return x.unaryExpr([](double v) {
    return 0.5 * v * (1.0 + std::tanh(kGeluC * (v + 0.044715 * v * v * v)));
  });
}

Mat gelu_grad(const Mat& x) {
  return x.unaryExpr([](double v) {
    const double th = std::tanh(kGeluC * (v + 0.044715 * v * v * v));
    return 0.5 * (1.0 + th) + 0.5 * v * (1.0 - th * th) * kGeluC * (1.0 + 3.0 * 0.044715 * v * v);
  });
}

// Row-wise normalization; returns xhat and fills rstd.
Mat layer_norm_rows(const Mat& x, Eigen::VectorXd& rstd) {
  const double n = static_cast<double>(x.cols());
  Mat xhat(x.rows(), x.cols());
  rstd.resize(x.rows());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double mean = x.row(r).sum() / n;
    const RowVec centered = x.row(r).array() - mean;
    const double var = centered.squaredNorm() / n;
    rstd[r] = 1.0 / std::sqrt(var + kLnEps);
    xhat.row(r) = centered * rstd[r];
  }
  return xhat;
}

Mat layer_norm_backward(const Mat& dxhat, const Mat& xhat, const Eigen::VectorXd& rstd) {
  const double n = static_cast<double>(xhat.cols());
  Mat dx(dxhat.rows(), dxhat.cols());
  for (Eigen::Index r = 0; r < dxhat.rows(); ++r) {
    const double mean_d = dxhat.row(r).sum() / n;
    const double mean_dx = dxhat.row(r).dot(xhat.row(r)) / n;
    dx.row(r) = rstd[r] * (dxhat.row(r).array() - mean_d - xhat.row(r).array() * mean_dx).matrix();
  }
  return dx;
}

void add_bias(Mat& y, const Eigen::Map<const Mat>& b) { y.rowwise() += b.row(0); }

// (1 + scale) * xhat + shift with per-sample rows broadcast over tokens.
Mat modulate(const Mat& xhat, const Mat& shift, const Mat& scale, int tokens) {
  Mat out(xhat.rows(), xhat.cols());
  for (Eigen::Index b = 0; b < shift.rows(); ++b) {
    const RowVec s = RowVec::Ones(xhat.cols()) + scale.row(b);
    for (int j = 0; j < tokens; ++j) {
      const Eigen::Index r = b * tokens + j;
      out.row(r) = xhat.row(r).cwiseProduct(s) + shift.row(b);
    }
  }
  return out;
}

// Rows scaled per sample.
Mat gate(const Mat& y, const Mat& gamma, int tokens) {
  Mat out(y.rows(), y.cols());
  for (Eigen::Index b = 0; b < gamma.rows(); ++b) {
    for (int j = 0; j < tokens; ++j) {
      const Eigen::Index r = b * tokens + j;
      out.row(r) = y.row(r).cwiseProduct(gamma.row(b));
    }
  }
  return out;
}

// Sum over each sample's token rows.
Mat per_sample_sum(const Mat& x, int batch, int tokens) {
  Mat out = Mat::Zero(batch, x.cols());
  for (int b = 0; b < batch; ++b) out.row(b) = x.middleRows(b * tokens, tokens).colwise().sum();
  return out;
}

void accumulate_linear(Eigen::Map<Mat> dw, Eigen::Map<Mat> db, const Mat& input, const Mat& dy) {
  dw.noalias() += input.transpose() * dy;
  db.row(0) += dy.colwise().sum();
}

Mat sinusoidal_positions(int tokens, int width) {
  Mat pos(tokens, width);
  for (int j = 0; j < tokens; ++j) {
    for (int i = 0; i < width; i += 2) {
      const double freq = std::pow(10000.0, -static_cast<double>(i) / width);
      pos(j, i) = std::sin(j * freq);
      if (i + 1 < width) pos(j, i + 1) = std::cos(j * freq);
    }
  }
  return pos;
}

}  // namespace

void DenoiserConfig::validate() const {
  if (horizon < 2 || dof < 1 || n_keys < 0) throw std::invalid_argument("bad denoiser shape");
  if (patch_size < 1 || horizon % patch_size != 0) {
    throw std::invalid_argument("patch_size must divide the horizon");
  }
  if (n_heads < 1 || hidden_width % n_heads != 0) {
    throw std::invalid_argument("hidden_width must be divisible by n_heads");
  }
  if (n_blocks < 0 || cond_embed_dim < 1 || freq_bands < 1 || ffn_mult < 1 || n_train_steps < 1) {
    throw std::invalid_argument("bad denoiser sizes");
  }
}

Json to_json(const DenoiserConfig& c) {
  return {{"horizon", c.horizon},         {"dof", c.dof},
          {"n_keys", c.n_keys},           {"n_train_steps", c.n_train_steps},
          {"patch_size", c.patch_size},   {"hidden_width", c.hidden_width},
          {"n_blocks", c.n_blocks},       {"n_heads", c.n_heads},
          {"cond_embed_dim", c.cond_embed_dim}, {"freq_bands", c.freq_bands},
          {"ffn_mult", c.ffn_mult}};
}

DenoiserConfig denoiser_config_from_json(const Json& j) {
  DenoiserConfig c;
  c.horizon = j.value("horizon", c.horizon);
  c.dof = j.value("dof", c.dof);
  c.n_keys = j.value("n_keys", c.n_keys);
  c.n_train_steps = j.value("n_train_steps", c.n_train_steps);
  c.patch_size = j.value("patch_size", c.patch_size);
  c.hidden_width = j.value("hidden_width", c.hidden_width);
  c.n_blocks = j.value("n_blocks", c.n_blocks);
  c.n_heads = j.value("n_heads", c.n_heads);
  c.cond_embed_dim = j.value("cond_embed_dim", c.cond_embed_dim);
  c.freq_bands = j.value("freq_bands", c.freq_bands);
  c.ffn_mult = j.value("ffn_mult", c.ffn_mult);
  c.validate();
  return c;
}

Eigen::MatrixXd patchify(const Trajectory& tau, int patch_size) {
  if (patch_size < 1 || tau.rows() % patch_size != 0) {
    throw std::invalid_argument("patch size must divide the horizon");
  }
  const Eigen::Index d = tau.cols();
  Eigen::MatrixXd tokens(tau.rows() / patch_size, patch_size * d);
  for (Eigen::Index r = 0; r < tau.rows(); ++r) {
    tokens.block(r / patch_size, (r % patch_size) * d, 1, d) = tau.row(r);
  }
  return tokens;
}

Trajectory unpatchify(const Eigen::MatrixXd& tokens, int patch_size, int dof) {
  if (tokens.cols() != patch_size * dof) throw std::invalid_argument("token width mismatch");
  Trajectory tau(tokens.rows() * patch_size, dof);
  for (Eigen::Index r = 0; r < tau.rows(); ++r) {
    tau.row(r) = tokens.block(r / patch_size, (r % patch_size) * dof, 1, dof);
  }
  return tau;
}

Eigen::VectorXd freq_embed(const Eigen::VectorXd& x, int bands) {
  Eigen::VectorXd out(2 * bands * x.size());
  Eigen::Index k = 0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    double freq = std::numbers::pi;
    for (int b = 0; b < bands; ++b, freq *= 2.0) {
      out[k++] = std::sin(freq * x[i]);
      out[k++] = std::cos(freq * x[i]);
    }
  }
  return out;
}

Eigen::MatrixXd layer_norm(const Eigen::MatrixXd& x) {
  Eigen::VectorXd rstd;
  return layer_norm_rows(x, rstd);
}

Denoiser::Denoiser(DenoiserConfig cfg) : cfg_(cfg) {
  cfg_.validate();
  const int H = cfg_.hidden_width;
  const int C = cfg_.cond_embed_dim;
  add_tensor("patch.w1", cfg_.token_dim(), H);
  add_tensor("patch.b1", 1, H);
  add_tensor("patch.w2", H, H);
  add_tensor("patch.b2", 1, H);
  add_tensor("cond.w1", cfg_.cond_input_dim(), C);
  add_tensor("cond.b1", 1, C);
  add_tensor("cond.w2", C, C);
  add_tensor("cond.b2", 1, C);
  for (int l = 0; l < cfg_.n_blocks; ++l) {
    const std::string p = "block" + std::to_string(l) + ".";
    add_tensor(p + "mod.w", C, 6 * H);
    add_tensor(p + "mod.b", 1, 6 * H);
    add_tensor(p + "qkv.w", H, 3 * H);
    add_tensor(p + "qkv.b", 1, 3 * H);
    add_tensor(p + "proj.w", H, H);
    add_tensor(p + "proj.b", 1, H);
    add_tensor(p + "ffn.w1", H, cfg_.ffn_mult * H);
    add_tensor(p + "ffn.b1", 1, cfg_.ffn_mult * H);
    add_tensor(p + "ffn.w2", cfg_.ffn_mult * H, H);
    add_tensor(p + "ffn.b2", 1, H);
  }
  add_tensor("final.mod.w", C, 2 * H);
  add_tensor("final.mod.b", 1, 2 * H);
  add_tensor("final.out.w", H, cfg_.token_dim());
  add_tensor("final.out.b", 1, cfg_.token_dim());
  pos_embed_ = sinusoidal_positions(cfg_.n_tokens(), H);
}

void Denoiser::add_tensor(const std::string& name, int rows, int cols) {
  index_[name] = views_.size();
  views_.push_back({name, params_.size(), rows, cols});
  params_.resize(params_.size() + static_cast<std::size_t>(rows) * cols, 0.0);
}

const Denoiser::TensorView& Denoiser::view(const std::string& name) const {
  const auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("no tensor named '" + name + "'");
  return views_[it->second];
}

Eigen::Map<Eigen::MatrixXd> Denoiser::tensor(const std::string& name) {
  const TensorView& v = view(name);
  return {params_.data() + v.offset, v.rows, v.cols};
}

Eigen::Map<const Eigen::MatrixXd> Denoiser::tensor(const std::string& name) const {
  return cview(name);
}

Eigen::Map<const Eigen::MatrixXd> Denoiser::cview(const std::string& name) const {
  const TensorView& v = view(name);
  return {params_.data() + v.offset, v.rows, v.cols};
}

Eigen::Map<Eigen::MatrixXd> Denoiser::gview(std::span<double> grad, const std::string& name) const {
  const TensorView& v = view(name);
  return {grad.data() + v.offset, v.rows, v.cols};
}

void Denoiser::initialize(std::uint64_t seed, bool zero_gates) {
  std::mt19937_64 rng(seed);
  for (const TensorView& v : views_) {
    double* data = params_.data() + v.offset;
    const std::size_t n = static_cast<std::size_t>(v.rows) * v.cols;
    const bool is_bias = v.rows == 1;
    const bool gated = v.name.ends_with("mod.w") || v.name.ends_with("mod.b") ||
                       v.name.starts_with("final.out");
    if (is_bias || (zero_gates && gated)) {
      std::fill(data, data + n, 0.0);
      continue;
    }
    const double limit = std::sqrt(6.0 / (v.rows + v.cols));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (std::size_t i = 0; i < n; ++i) data[i] = dist(rng);
  }
}

Eigen::MatrixXd Denoiser::cond_inputs(std::span<const ModelCondition> cond) const {
  Mat in(static_cast<Eigen::Index>(cond.size()), cfg_.cond_input_dim());
  const int fb = cfg_.freq_bands;
  for (std::size_t b = 0; b < cond.size(); ++b) {
    const ModelCondition& c = cond[b];
    if (c.phi.size() != cfg_.n_keys || c.q_s.size() != cfg_.dof || c.q_g.size() != cfg_.dof) {
      throw std::invalid_argument("conditioning shape does not match the denoiser config");
    }
    Eigen::VectorXd step(1);
    step[0] = static_cast<double>(c.step) / cfg_.n_train_steps;
    Eigen::VectorXd row(cfg_.cond_input_dim());
    row << freq_embed(step, fb), c.phi, freq_embed(c.q_s, fb), freq_embed(c.q_g, fb);
    in.row(static_cast<Eigen::Index>(b)) = row.transpose();
  }
  return in;
}

Eigen::VectorXd Denoiser::cond_embed(const ModelCondition& c) const {
  const Mat in = cond_inputs(std::span<const ModelCondition>(&c, 1));
  Mat u1 = in * cview("cond.w1");
  add_bias(u1, cview("cond.b1"));
  Mat out = silu(u1) * cview("cond.w2");
  add_bias(out, cview("cond.b2"));
  return out.row(0).transpose();
}

void Denoiser::block_forward(int l, const Mat& h, const Mat& cond_silu, int batch,
                             ForwardTape::Block& t) const {
  const std::string p = "block" + std::to_string(l) + ".";
  const int H = cfg_.hidden_width;
  const int P = cfg_.n_tokens();
  const int heads = cfg_.n_heads;
  const int dh = H / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  t.h_in = h;
  t.mod = cond_silu * cview(p + "mod.w");
  add_bias(t.mod, cview(p + "mod.b"));
  const auto gamma1 = t.mod.middleCols(0, H);
  const auto g1 = t.mod.middleCols(H, H);
  const auto b1 = t.mod.middleCols(2 * H, H);
  const auto g2 = t.mod.middleCols(4 * H, H);
  const auto b2 = t.mod.middleCols(5 * H, H);

  t.xhat1 = layer_norm_rows(h, t.rstd1);
  t.m1 = modulate(t.xhat1, b1, g1, P);
  t.qkv = t.m1 * cview(p + "qkv.w");
  add_bias(t.qkv, cview(p + "qkv.b"));
  t.attn_out.resize(h.rows(), H);
  t.probs.resize(static_cast<std::size_t>(batch) * heads);
  for (int b = 0; b < batch; ++b) {
    for (int hd = 0; hd < heads; ++hd) {
      const auto q = t.qkv.block(b * P, hd * dh, P, dh);
      const auto k = t.qkv.block(b * P, H + hd * dh, P, dh);
      const auto v = t.qkv.block(b * P, 2 * H + hd * dh, P, dh);
      Mat s = scale * (q * k.transpose());
      for (Eigen::Index r = 0; r < s.rows(); ++r) {
        const double mx = s.row(r).maxCoeff();
        s.row(r) = (s.row(r).array() - mx).exp();
        s.row(r) /= s.row(r).sum();
      }
      t.attn_out.block(b * P, hd * dh, P, dh) = s * v;
      t.probs[static_cast<std::size_t>(b) * heads + hd] = std::move(s);
    }
  }
  t.y1 = t.attn_out * cview(p + "proj.w");
  add_bias(t.y1, cview(p + "proj.b"));
  t.h2 = h + gate(t.y1, gamma1, P);

  t.xhat2 = layer_norm_rows(t.h2, t.rstd2);
  t.m2 = modulate(t.xhat2, b2, g2, P);
  t.f1 = t.m2 * cview(p + "ffn.w1");
  add_bias(t.f1, cview(p + "ffn.b1"));
  t.f1a = gelu(t.f1);
  t.y2 = t.f1a * cview(p + "ffn.w2");
  add_bias(t.y2, cview(p + "ffn.b2"));
}

Eigen::MatrixXd Denoiser::adaln_block(int block, const Eigen::MatrixXd& tokens,
                                      const Eigen::VectorXd& cond) const {
  if (block < 0 || block >= cfg_.n_blocks) throw std::out_of_range("block index");
  ForwardTape::Block t;
  const Mat cs = silu(Mat(cond.transpose()));
  block_forward(block, tokens, cs, 1, t);
  return t.h2 + gate(t.y2, t.mod.middleCols(3 * cfg_.hidden_width, cfg_.hidden_width),
                     cfg_.n_tokens());
}

std::vector<Trajectory> Denoiser::forward(std::span<const Trajectory> x,
                                          std::span<const ModelCondition> cond) const {
  ForwardTape tape;
  return forward(x, cond, tape);
}

std::vector<Trajectory> Denoiser::forward(std::span<const Trajectory> x,
                                          std::span<const ModelCondition> cond,
                                          ForwardTape& t) const {
  if (x.size() != cond.size()) throw std::invalid_argument("batch and conditioning sizes differ");
  const int B = static_cast<int>(x.size());
  const int P = cfg_.n_tokens();
  const int H = cfg_.hidden_width;
  t.batch = B;

  t.tokens_in.resize(static_cast<Eigen::Index>(B) * P, cfg_.token_dim());
  for (int b = 0; b < B; ++b) {
    if (x[b].rows() != cfg_.horizon || x[b].cols() != cfg_.dof) {
      throw std::invalid_argument("trajectory shape does not match the denoiser config");
    }
    t.tokens_in.middleRows(b * P, P) = patchify(x[b], cfg_.patch_size);
  }
  t.z1 = t.tokens_in * cview("patch.w1");
  add_bias(t.z1, cview("patch.b1"));
  t.a1 = silu(t.z1);
  Mat h = t.a1 * cview("patch.w2");
  add_bias(h, cview("patch.b2"));
  for (int b = 0; b < B; ++b) h.middleRows(b * P, P) += pos_embed_;

  t.cond_in = cond_inputs(cond);
  t.u1 = t.cond_in * cview("cond.w1");
  add_bias(t.u1, cview("cond.b1"));
  t.u1a = silu(t.u1);
  t.cond = t.u1a * cview("cond.w2");
  add_bias(t.cond, cview("cond.b2"));
  t.cond_silu = silu(t.cond);

  t.blocks.resize(cfg_.n_blocks);
  for (int l = 0; l < cfg_.n_blocks; ++l) {
    ForwardTape::Block& blk = t.blocks[l];
    block_forward(l, h, t.cond_silu, B, blk);
    h = blk.h2 + gate(blk.y2, blk.mod.middleCols(3 * H, H), P);
  }

  t.h_final = h;
  t.fmod = t.cond_silu * cview("final.mod.w");
  add_bias(t.fmod, cview("final.mod.b"));
  t.xhat_f = layer_norm_rows(h, t.rstd_f);
  t.m_f = modulate(t.xhat_f, t.fmod.leftCols(H), t.fmod.rightCols(H), P);
  Mat out = t.m_f * cview("final.out.w");
  add_bias(out, cview("final.out.b"));

  std::vector<Trajectory> result;
  result.reserve(B);
  for (int b = 0; b < B; ++b) {
    result.push_back(unpatchify(out.middleRows(b * P, P), cfg_.patch_size, cfg_.dof));
  }
  return result;
}

void Denoiser::backward(const ForwardTape& t, std::span<const Trajectory> grad_out,
                        std::span<double> grad) const {
  if (grad.size() != params_.size()) throw std::invalid_argument("gradient buffer size mismatch");
  const int B = t.batch;
  if (static_cast<int>(grad_out.size()) != B) throw std::invalid_argument("grad_out batch size");
  const int P = cfg_.n_tokens();
  const int H = cfg_.hidden_width;
  const int heads = cfg_.n_heads;
  const int dh = H / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  Mat d_out(static_cast<Eigen::Index>(B) * P, cfg_.token_dim());
  for (int b = 0; b < B; ++b) d_out.middleRows(b * P, P) = patchify(grad_out[b], cfg_.patch_size);

  // Final modulated projection.
  accumulate_linear(gview(grad, "final.out.w"), gview(grad, "final.out.b"), t.m_f, d_out);
  const Mat d_mf = d_out * cview("final.out.w").transpose();
  Mat d_fmod(B, 2 * H);
  d_fmod.leftCols(H) = per_sample_sum(d_mf, B, P);
  d_fmod.rightCols(H) = per_sample_sum(d_mf.cwiseProduct(t.xhat_f), B, P);
  Mat d_h = layer_norm_backward(
      modulate(d_mf, Mat::Zero(B, H), t.fmod.rightCols(H), P), t.xhat_f, t.rstd_f);
  accumulate_linear(gview(grad, "final.mod.w"), gview(grad, "final.mod.b"), t.cond_silu, d_fmod);
  Mat d_cond_silu = d_fmod * cview("final.mod.w").transpose();

  for (int l = cfg_.n_blocks - 1; l >= 0; --l) {
    const ForwardTape::Block& k = t.blocks[l];
    const std::string p = "block" + std::to_string(l) + ".";
    const Mat zero = Mat::Zero(B, H);
    Mat d_mod(B, 6 * H);

    // out = h2 + gamma2 * y2
    d_mod.middleCols(3 * H, H) = per_sample_sum(d_h.cwiseProduct(k.y2), B, P);
    const Mat d_y2 = gate(d_h, k.mod.middleCols(3 * H, H), P);
    accumulate_linear(gview(grad, p + "ffn.w2"), gview(grad, p + "ffn.b2"), k.f1a, d_y2);
    const Mat d_f1 = (d_y2 * cview(p + "ffn.w2").transpose()).cwiseProduct(gelu_grad(k.f1));
    accumulate_linear(gview(grad, p + "ffn.w1"), gview(grad, p + "ffn.b1"), k.m2, d_f1);
    const Mat d_m2 = d_f1 * cview(p + "ffn.w1").transpose();
    d_mod.middleCols(4 * H, H) = per_sample_sum(d_m2.cwiseProduct(k.xhat2), B, P);
    d_mod.middleCols(5 * H, H) = per_sample_sum(d_m2, B, P);
    Mat d_h2 = d_h + layer_norm_backward(modulate(d_m2, zero, k.mod.middleCols(4 * H, H), P),
                                         k.xhat2, k.rstd2);

    // h2 = h + gamma1 * y1
    d_mod.middleCols(0, H) = per_sample_sum(d_h2.cwiseProduct(k.y1), B, P);
    const Mat d_y1 = gate(d_h2, k.mod.middleCols(0, H), P);
    accumulate_linear(gview(grad, p + "proj.w"), gview(grad, p + "proj.b"), k.attn_out, d_y1);
    const Mat d_attn = d_y1 * cview(p + "proj.w").transpose();

    Mat d_qkv(d_attn.rows(), 3 * H);
    for (int b = 0; b < B; ++b) {
      for (int hd = 0; hd < heads; ++hd) {
        const Mat& a = k.probs[static_cast<std::size_t>(b) * heads + hd];
        const auto q = k.qkv.block(b * P, hd * dh, P, dh);
        const auto kk = k.qkv.block(b * P, H + hd * dh, P, dh);
        const auto v = k.qkv.block(b * P, 2 * H + hd * dh, P, dh);
        const auto d_o = d_attn.block(b * P, hd * dh, P, dh);
        const Mat d_a = d_o * v.transpose();
        d_qkv.block(b * P, 2 * H + hd * dh, P, dh) = a.transpose() * d_o;
        Mat d_s = a.cwiseProduct(d_a);
        const Eigen::VectorXd row_dot = d_s.rowwise().sum();
        d_s -= a.cwiseProduct(row_dot.replicate(1, P));
        d_s *= scale;
        d_qkv.block(b * P, hd * dh, P, dh) = d_s * kk;
        d_qkv.block(b * P, H + hd * dh, P, dh) = d_s.transpose() * q;
      }
    }
    accumulate_linear(gview(grad, p + "qkv.w"), gview(grad, p + "qkv.b"), k.m1, d_qkv);
    const Mat d_m1 = d_qkv * cview(p + "qkv.w").transpose();
    d_mod.middleCols(H, H) = per_sample_sum(d_m1.cwiseProduct(k.xhat1), B, P);
    d_mod.middleCols(2 * H, H) = per_sample_sum(d_m1, B, P);
    d_h = d_h2 + layer_norm_backward(modulate(d_m1, zero, k.mod.middleCols(H, H), P), k.xhat1,
                                     k.rstd1);

    accumulate_linear(gview(grad, p + "mod.w"), gview(grad, p + "mod.b"), t.cond_silu, d_mod);
    d_cond_silu.noalias() += d_mod * cview(p + "mod.w").transpose();
  }

  // Patch embedding MLP.
  accumulate_linear(gview(grad, "patch.w2"), gview(grad, "patch.b2"), t.a1, d_h);
  const Mat d_z1 = (d_h * cview("patch.w2").transpose()).cwiseProduct(silu_grad(t.z1));
  accumulate_linear(gview(grad, "patch.w1"), gview(grad, "patch.b1"), t.tokens_in, d_z1);

  // Conditioning MLP.
  const Mat d_cond = d_cond_silu.cwiseProduct(silu_grad(t.cond));
  accumulate_linear(gview(grad, "cond.w2"), gview(grad, "cond.b2"), t.u1a, d_cond);
  const Mat d_u1 = (d_cond * cview("cond.w2").transpose()).cwiseProduct(silu_grad(t.u1));
  accumulate_linear(gview(grad, "cond.w1"), gview(grad, "cond.b1"), t.cond_in, d_u1);
}

}  // namespace kcdiff
