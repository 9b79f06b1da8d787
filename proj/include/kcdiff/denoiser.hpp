#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Core>

#include "kcdiff/io.hpp"
#include "kcdiff/world.hpp"

namespace kcdiff {

struct DenoiserConfig {
  int horizon = 48;        // T
  int dof = 3;             // d
  int n_keys = 64;         // K, length of the environment fingerprint
  int n_train_steps = 256; // N, scales the diffusion-step embedding
  int patch_size = 4;
  int hidden_width = 128;
  int n_blocks = 4;
  int n_heads = 4;
  int cond_embed_dim = 128;
  int freq_bands = 8;
  int ffn_mult = 4;

  void validate() const;
  [[nodiscard]] int n_tokens() const { return horizon / patch_size; }
  [[nodiscard]] int token_dim() const { return patch_size * dof; }
  [[nodiscard]] int cond_input_dim() const { return 2 * freq_bands * (1 + 2 * dof) + n_keys; }
};

Json to_json(const DenoiserConfig& cfg);
DenoiserConfig denoiser_config_from_json(const Json& j);

/// Groups of p consecutive waypoints flattened into one row each.
Eigen::MatrixXd patchify(const Trajectory& tau, int patch_size);
Trajectory unpatchify(const Eigen::MatrixXd& tokens, int patch_size, int dof);

/// sin/cos of every component at frequencies pi * 2^k, k < bands.
/// Layout: component-major, then band, then (sin, cos).
Eigen::VectorXd freq_embed(const Eigen::VectorXd& x, int bands);

/// Conditioning for one trajectory; endpoints in normalized coordinates.
struct ModelCondition {
  int step = 0;
  Eigen::VectorXd phi;
  Eigen::VectorXd q_s;
  Eigen::VectorXd q_g;
};

/// Stored activations of one batched forward pass.
struct ForwardTape {
  struct Block {
    Eigen::MatrixXd h_in, xhat1, m1, qkv, attn_out, y1, h2, xhat2, m2, f1, f1a, y2, mod;
    Eigen::VectorXd rstd1, rstd2;
    std::vector<Eigen::MatrixXd> probs;  // batch-major, then head
  };
  int batch = 0;
  Eigen::MatrixXd tokens_in, z1, a1;
  Eigen::MatrixXd cond_in, u1, u1a, cond, cond_silu;
  std::vector<Block> blocks;
  Eigen::MatrixXd h_final, xhat_f, m_f, fmod;
  Eigen::VectorXd rstd_f;
};

/// Conditional v-prediction transformer: patch tokens, AdaLN-modulated
/// attention and feed-forward blocks, modulated output projection.
class Denoiser {
 public:
  struct TensorView {
    std::string name;
    std::size_t offset;
    int rows;
    int cols;
  };

  explicit Denoiser(DenoiserConfig cfg);

  [[nodiscard]] const DenoiserConfig& config() const { return cfg_; }
  [[nodiscard]] std::size_t parameter_count() const { return params_.size(); }
  [[nodiscard]] std::span<double> parameters() { return params_; }
  [[nodiscard]] std::span<const double> parameters() const { return params_; }
  [[nodiscard]] const std::vector<TensorView>& tensors() const { return views_; }

  /// Xavier-uniform weights, zero biases. With zero_gates the modulation maps
  /// and the output projection start at zero, so every block is the identity.
  void initialize(std::uint64_t seed, bool zero_gates = true);

  Eigen::Map<Eigen::MatrixXd> tensor(const std::string& name);
  [[nodiscard]] Eigen::Map<const Eigen::MatrixXd> tensor(const std::string& name) const;

  /// Conditioning vector (before the SiLU feeding the modulation maps).
  [[nodiscard]] Eigen::VectorXd cond_embed(const ModelCondition& c) const;

  /// One block on a single sample's tokens (n_tokens x hidden_width).
  [[nodiscard]] Eigen::MatrixXd adaln_block(int block, const Eigen::MatrixXd& tokens,
                                            const Eigen::VectorXd& cond) const;

  [[nodiscard]] std::vector<Trajectory> forward(std::span<const Trajectory> x,
                                                std::span<const ModelCondition> cond) const;
  std::vector<Trajectory> forward(std::span<const Trajectory> x,
                                  std::span<const ModelCondition> cond, ForwardTape& tape) const;

  /// Accumulates d(loss)/d(params) into grad given d(loss)/d(output).
  void backward(const ForwardTape& tape, std::span<const Trajectory> grad_out,
                std::span<double> grad) const;

 private:
  [[nodiscard]] const TensorView& view(const std::string& name) const;
  [[nodiscard]] Eigen::Map<const Eigen::MatrixXd> cview(const std::string& name) const;
  [[nodiscard]] Eigen::Map<Eigen::MatrixXd> gview(std::span<double> grad, const std::string& name) const;
  void add_tensor(const std::string& name, int rows, int cols);
  [[nodiscard]] Eigen::MatrixXd cond_inputs(std::span<const ModelCondition> cond) const;
  void block_forward(int l, const Eigen::MatrixXd& h, const Eigen::MatrixXd& cond_silu, int batch,
                     ForwardTape::Block& out) const;

  DenoiserConfig cfg_;
  std::vector<double> params_;
  std::vector<TensorView> views_;
  std::unordered_map<std::string, std::size_t> index_;
  Eigen::MatrixXd pos_embed_;
};

/// x + gamma * (sublayer((1 + g) * LN(x) + b)) applied row-wise; gamma, g, b are row vectors.
template <class Sublayer>
Eigen::MatrixXd adaln_residual(const Eigen::MatrixXd& x, const Eigen::RowVectorXd& gamma,
                               const Eigen::RowVectorXd& g, const Eigen::RowVectorXd& b,
                               Sublayer&& sublayer);

/// Row-wise layer normalization without affine parameters (eps = 1e-6).
Eigen::MatrixXd layer_norm(const Eigen::MatrixXd& x);

template <class Sublayer>
Eigen::MatrixXd adaln_residual(const Eigen::MatrixXd& x, const Eigen::RowVectorXd& gamma,
                               const Eigen::RowVectorXd& g, const Eigen::RowVectorXd& b,
                               Sublayer&& sublayer) {
  Eigen::MatrixXd m = layer_norm(x);
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    m.row(r) = m.row(r).cwiseProduct(Eigen::RowVectorXd::Ones(g.size()) + g) + b;
  }
  Eigen::MatrixXd y = sublayer(m);
  for (Eigen::Index r = 0; r < y.rows(); ++r) y.row(r) = y.row(r).cwiseProduct(gamma);
  return x + y;
}

}  // namespace kcdiff
