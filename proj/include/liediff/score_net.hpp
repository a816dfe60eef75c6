#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "liediff/lie.hpp"
#include "liediff/rng.hpp"
#include "liediff/scores.hpp"

namespace liediff
{

enum class Conditioning
{
  Fourier,
  ScaleBias
};

std::string_view to_string(Conditioning c);
Conditioning parse_conditioning(std::string_view text);

/// Architecture hyperparameters. `sigmas` is the training noise schedule; the
/// head divides its output by sigma_i so the last linear layer works at unit
/// scale for every noise level.
struct NetConfig
{
  ParamMode mode = ParamMode::SO3;
  int width = 256;
  int blocks = 1;
  int pose_freqs = 4;
  int time_freqs = 6;
  int embed_dim = 64;
  int num_shapes = 1;
  Conditioning conditioning = Conditioning::Fourier;
  std::vector<double> sigmas;

  int num_levels() const { return static_cast<int>(sigmas.size()); }
  int tangent_dim() const { return liediff::tangent_dim(mode); }
  int pose_features() const { return 2 * pose_freqs * tangent_dim(); }
  int cond_dim() const { return 2 * time_freqs + embed_dim; }
};

/// Weights of one conditioning layer: A(c) = Wa c + ba, B(c) = Wb c + bb, and
/// the linear layer W, b that consumes the conditioned features.
struct ConditionedLayer
{
  Eigen::MatrixXd Wa, ba, Wb, bb, W, b;
};

struct NetBlock
{
  ConditionedLayer cond;
  Eigen::MatrixXd W2, b2;
};

/// Learnable weights. Column vectors are stored as n x 1 matrices so every
/// tensor can be visited uniformly.
struct ScoreNetParams
{
  NetConfig config;
  Eigen::MatrixXd W_in, b_in;
  Eigen::MatrixXd embed;  // embed_dim x num_shapes
  std::vector<NetBlock> blocks;
  Eigen::MatrixXd W_out, b_out;

  /// Calls f(name, tensor) on every learnable tensor in a fixed order.
  template <typename Self, typename F>
  static void visit(Self& self, F&& f)
  {
    f("W_in", self.W_in);
    f("b_in", self.b_in);
    f("embed", self.embed);
    for (std::size_t k = 0; k < self.blocks.size(); ++k)
    {
      auto& blk = self.blocks[k];
      const std::string p = "block" + std::to_string(k) + ".";
      f(p + "Wa", blk.cond.Wa);
      f(p + "ba", blk.cond.ba);
      f(p + "Wb", blk.cond.Wb);
      f(p + "bb", blk.cond.bb);
      f(p + "W1", blk.cond.W);
      f(p + "b1", blk.cond.b);
      f(p + "W2", blk.W2);
      f(p + "b2", blk.b2);
    }
    f("W_out", self.W_out);
    f("b_out", self.b_out);
  }
  template <typename F>
  void for_each(F&& f) { visit(*this, std::forward<F>(f)); }
  template <typename F>
  void for_each(F&& f) const { visit(*this, std::forward<F>(f)); }

  std::size_t parameter_count() const;
  /// Same shapes, all entries zero.
  ScoreNetParams zeros_like() const;
  bool all_finite() const;
};

/// Glorot-uniform weights, zero biases.
ScoreNetParams init_params(const NetConfig& config, Rng& rng);

/// sin(2^k pi v), cos(2^k pi v) for k < n_freq, grouped per input component.
Eigen::VectorXd positional_encode(const Eigen::VectorXd& v, int n_freq);

/// sum_j W_ij (A_j(c) cos(pi x_j) + B_j(c) sin(pi x_j)); no bias.
Eigen::VectorXd fourier_layer(const Eigen::VectorXd& x, const Eigen::VectorXd& c, const ConditionedLayer& layer);
/// Jacobian of fourier_layer with respect to x.
Eigen::MatrixXd fourier_layer_dx(const Eigen::VectorXd& x, const Eigen::VectorXd& c, const ConditionedLayer& layer);

/// A(c) * x + B(c), elementwise.
Eigen::VectorXd scale_bias_layer(const Eigen::VectorXd& x, const Eigen::VectorXd& c, const ConditionedLayer& layer);
Eigen::MatrixXd scale_bias_layer_dx(const Eigen::VectorXd& x, const Eigen::VectorXd& c,
                                    const ConditionedLayer& layer);

/// Condition vector for (noise level, shape): [positional(i / (L-1)), embed[shape]].
Eigen::VectorXd condition_vector(const ScoreNetParams& params, int noise_index, int shape_id);

/// A batch of network inputs; column n of `x` is one tangent vector.
struct NetBatch
{
  Eigen::MatrixXd x;
  std::vector<int> levels;
  std::vector<int> shapes;

  int size() const { return static_cast<int>(x.cols()); }
};

/// Batched forward pass; returns one score per column.
Eigen::MatrixXd net_forward_batch(const ScoreNetParams& params, const NetBatch& batch);

ScoreVector net_forward(const ScoreNetParams& params, const Tangent& x, int noise_index, int shape_id);

struct LossAndGrads
{
  double loss = 0.0;
  ScoreNetParams grads;
};

/// loss = mean_n 0.5 * w_n * |s_theta(x_n) - target_n|^2 and its exact gradient.
/// Empty `weights` means w_n = 1.
LossAndGrads net_backward(const ScoreNetParams& params, const NetBatch& batch, const Eigen::MatrixXd& targets,
                          const std::vector<double>& weights = {});

// --- checkpoint container ------------------------------------------------

struct AdamState;

void write_checkpoint(std::ostream& out, const ScoreNetParams& params, const AdamState* adam = nullptr);
ScoreNetParams read_checkpoint(std::istream& in, AdamState* adam = nullptr);
void save_checkpoint(const std::string& path, const ScoreNetParams& params, const AdamState* adam = nullptr);
ScoreNetParams load_checkpoint(const std::string& path, AdamState* adam = nullptr);

}  // namespace liediff
