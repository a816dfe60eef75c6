#pragma once

#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "liediff/distributions.hpp"
#include "liediff/lie.hpp"
#include "liediff/rng.hpp"
#include "liediff/score_net.hpp"
#include "liediff/scores.hpp"
#include "liediff/symsol.hpp"

namespace liediff
{

/// Ascending noise levels with their Langevin step sizes.
struct NoiseSchedule
{
  std::vector<double> sigmas;
  std::vector<double> eps_steps;

  int size() const { return static_cast<int>(sigmas.size()); }
  double sigma_min() const { return sigmas.front(); }
  double sigma_max() const { return sigmas.back(); }
};

constexpr double kDefaultEps0 = 0.5;

/// sigma_i linear from sigma_min to sigma_max; eps_i = eps0 sigma_i^2 / sigma_max^2.
NoiseSchedule make_schedule(double sigma_min, double sigma_max, int levels, double eps0 = kDefaultEps0);

/// 0.5 |pred - target|^2
double dsm_loss(const ScoreVector& pred, const ScoreVector& target);

// --- Adam ------------------------------------------------------------------

struct AdamState
{
  /// Moments in ScoreNetParams::visit order.
  std::vector<Eigen::MatrixXd> m, v;
  long step = 0;

  static AdamState for_params(const ScoreNetParams& params);
};

struct AdamHyper
{
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

void adam_step(ScoreNetParams& params, const ScoreNetParams& grads, AdamState& state, double lr,
               const AdamHyper& hyper = {});

// --- training --------------------------------------------------------------

enum class ScoreKind
{
  Surrogate,
  True
};

std::string_view to_string(ScoreKind kind);
ScoreKind parse_score_kind(std::string_view text);

enum class LossWeighting
{
  /// lambda(sigma) = sigma^2
  SigmaSquared,
  Uniform
};

struct TrainConfig
{
  ParamMode mode = ParamMode::SO3;
  int levels = 100;
  double sigma_min = 1e-4;
  double sigma_max = 1.0;
  int batch_size = 32;
  /// Noisy samples per datum, all at that datum's noise level.
  int fan_out = 32;
  long total_steps = 10000;
  double lr_initial = 1e-3;
  double lr_final = 1e-4;
  std::uint64_t seed = 0;
  /// SE3 only; SO3 and R3SO3 always regress onto -z / sigma^2.
  ScoreKind score_kind = ScoreKind::Surrogate;
  LossWeighting weighting = LossWeighting::SigmaSquared;
  /// >= 0 pins every draw to that noise index.
  int fixed_level = -1;

  int width = 256;
  int blocks = 1;
  int pose_freqs = 4;
  int time_freqs = 6;
  int embed_dim = 64;
  Conditioning conditioning = Conditioning::Fourier;

  void validate() const;
  NetConfig net_config(int num_shapes) const;
};

/// Constant for the first half, then exponential decay to lr_final.
double learning_rate(const TrainConfig& config, long step);

struct TrainProgress
{
  long step = 0;
  double loss = 0.0;
  double lr = 0.0;
};

struct TrainCallbacks
{
  long log_every = 0;
  std::function<void(const TrainProgress&)> on_log;
  long checkpoint_every = 0;
  std::function<void(long step, const ScoreNetParams&, const AdamState&)> on_checkpoint;
};

class TrainingDiverged : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

/// One training datum: a pose in its observation frame plus the shape id.
struct TrainDatum
{
  int shape_id = 0;
  RigidTransform pose;
};

/// DSM training. The RNG stream used is derived from config.seed; `init`
/// resumes from existing parameters and optimizer state.
ScoreNetParams train(const TrainConfig& config, const std::vector<TrainDatum>& data, int num_shapes,
                     const TrainCallbacks& callbacks = {}, const ScoreNetParams* init = nullptr,
                     AdamState* adam = nullptr);

/// Regression targets for one perturbed datum: returns the score target for
/// y = x Exp(z), using the wrapped tangent Log(x^-1 y).
ScoreVector dsm_target(const Tangent& z_eff, double sigma, ParamMode mode, ScoreKind kind);

/// Network input coordinates of a pose: Log(R) for SO3, (T, Log(R)) for R3SO3
/// and (R^T T, Log(R)) for SE3, whose tangent translations live in the body frame.
Tangent net_input(const RigidTransform& pose, ParamMode mode);

// --- sampling --------------------------------------------------------------

/// Scores for a batch of states at one noise level. Column n is the score of
/// states[n].
using BatchScoreFn = std::function<Eigen::MatrixXd(const std::vector<RigidTransform>& states, double sigma)>;

struct SamplerConfig
{
  int substeps = 1;
  /// Langevin updates per noise level.
  int inner_steps = 1;
  /// Final noise-free denoising step X <- X Exp(sigma^2 s(X, sigma)) at the
  /// smallest level whose Langevin noise is not negligible (the second level).
  bool polish = true;
  bool add_noise = true;
};

/// Geodesic random walk from sigma_max down to sigma_min. Without `init`
/// each chain starts at Exp(z), z ~ N(0, sigma_max^2 I).
std::vector<RigidTransform> sample_batch(const BatchScoreFn& score, const NoiseSchedule& schedule, ParamMode mode,
                                         int count, Rng& rng, const SamplerConfig& config = {},
                                         const std::vector<RigidTransform>* init = nullptr);

/// Score function backed by a trained network. Each sampling sigma is mapped
/// to the nearest trained noise level.
BatchScoreFn net_score_fn(const ScoreNetParams& params, int shape_id);

/// Exact score of the noised unimodal target N_G(center, sigma_star^2),
/// approximated as N_G(center, sigma_star^2 + sigma^2).
BatchScoreFn analytic_score_fn(const RigidTransform& center, double sigma_star, ParamMode mode);

RigidTransform sample(const ScoreNetParams& params, int shape_id, const NoiseSchedule& schedule, ParamMode mode,
                      int substeps, Rng& rng, const std::optional<RigidTransform>& init = std::nullopt);

}  // namespace liediff
