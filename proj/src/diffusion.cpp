#include "liediff/diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace liediff
{

namespace
{

constexpr double kCutMargin = 1e-6;

Rng step_stream(std::uint64_t seed, long step)
{
  return Rng(seed + 0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(step + 1));
}

int nearest_level(const std::vector<double>& sigmas, double sigma)
{
  const auto it = std::lower_bound(sigmas.begin(), sigmas.end(), sigma);
  if (it == sigmas.begin())
    return 0;
  if (it == sigmas.end())
    return static_cast<int>(sigmas.size()) - 1;
  const auto prev = it - 1;
  return static_cast<int>((sigma - *prev <= *it - sigma) ? prev - sigmas.begin() : it - sigmas.begin());
}

}  // namespace

NoiseSchedule make_schedule(double sigma_min, double sigma_max, int levels, double eps0)
{
  if (!(sigma_min > 0.0) || !(sigma_min < sigma_max) || !std::isfinite(sigma_max))
    throw std::invalid_argument("make_schedule: need 0 < sigma_min < sigma_max");
  if (levels < 2)
    throw std::invalid_argument("make_schedule: need at least two levels");
  if (!(eps0 > 0.0) || !std::isfinite(eps0))
    throw std::invalid_argument("make_schedule: eps0 must be positive");
  NoiseSchedule s;
  s.sigmas.resize(levels);
  s.eps_steps.resize(levels);
  for (int i = 0; i < levels; ++i)
    s.sigmas[i] = sigma_min + (sigma_max - sigma_min) * i / (levels - 1);
  s.sigmas.back() = sigma_max;
  for (int i = 0; i < levels; ++i)
    s.eps_steps[i] = eps0 * s.sigmas[i] * s.sigmas[i] / (sigma_max * sigma_max);
  return s;
}

double dsm_loss(const ScoreVector& pred, const ScoreVector& target)
{
  if (pred.size() != target.size())
    throw std::invalid_argument("dsm_loss: dimension mismatch");
  return 0.5 * (pred - target).squaredNorm();
}

AdamState AdamState::for_params(const ScoreNetParams& params)
{
  AdamState s;
  params.for_each([&](const std::string&, const Eigen::MatrixXd& t) {
    s.m.push_back(Eigen::MatrixXd::Zero(t.rows(), t.cols()));
    s.v.push_back(Eigen::MatrixXd::Zero(t.rows(), t.cols()));
  });
  return s;
}

void adam_step(ScoreNetParams& params, const ScoreNetParams& grads, AdamState& state, double lr,
               const AdamHyper& h)
{
  std::vector<const Eigen::MatrixXd*> g;
  grads.for_each([&](const std::string&, const Eigen::MatrixXd& t) { g.push_back(&t); });
  if (state.m.empty())
    state = AdamState::for_params(params);
  if (g.size() != state.m.size())
    throw std::invalid_argument("adam_step: gradient/state layout mismatch");

  ++state.step;
  const double bc1 = 1.0 - std::pow(h.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(h.beta2, static_cast<double>(state.step));
  std::size_t k = 0;
  params.for_each([&](const std::string& name, Eigen::MatrixXd& p) {
    const Eigen::MatrixXd& gk = *g[k];
    if (gk.rows() != p.rows() || gk.cols() != p.cols())
      throw std::invalid_argument("adam_step: shape mismatch for " + name);
    state.m[k] = h.beta1 * state.m[k] + (1.0 - h.beta1) * gk;
    state.v[k] = h.beta2 * state.v[k] + (1.0 - h.beta2) * gk.cwiseProduct(gk);
    p.array() -= lr * (state.m[k].array() / bc1) / ((state.v[k].array() / bc2).sqrt() + h.eps);
    ++k;
  });
}

std::string_view to_string(ScoreKind kind) { return kind == ScoreKind::Surrogate ? "surrogate" : "true"; }

ScoreKind parse_score_kind(std::string_view text)
{
  if (text == "surrogate")
    return ScoreKind::Surrogate;
  if (text == "true")
    return ScoreKind::True;
  throw std::invalid_argument("unknown score kind '" + std::string(text) + "'");
}

void TrainConfig::validate() const
{
  if (levels < 2)
    throw std::invalid_argument("train: levels must be >= 2");
  if (!(sigma_min > 0.0 && sigma_min < sigma_max))
    throw std::invalid_argument("train: need 0 < sigma_min < sigma_max");
  if (batch_size < 1 || fan_out < 1 || total_steps < 0)
    throw std::invalid_argument("train: batch_size, fan_out must be positive and total_steps non-negative");
  if (!(lr_initial > 0.0) || !(lr_final > 0.0))
    throw std::invalid_argument("train: learning rates must be positive");
  if (fixed_level >= levels)
    throw std::invalid_argument("train: fixed_level out of range");
}

NetConfig TrainConfig::net_config(int num_shapes) const
{
  NetConfig c;
  c.mode = mode;
  c.width = width;
  c.blocks = blocks;
  c.pose_freqs = pose_freqs;
  c.time_freqs = time_freqs;
  c.embed_dim = embed_dim;
  c.num_shapes = num_shapes;
  c.conditioning = conditioning;
  c.sigmas = make_schedule(sigma_min, sigma_max, levels).sigmas;
  return c;
}

double learning_rate(const TrainConfig& c, long step)
{
  const long half = c.total_steps / 2;
  if (step < half || c.total_steps - half <= 0)
    return c.lr_initial;
  const double frac = static_cast<double>(step - half) / static_cast<double>(c.total_steps - half);
  return c.lr_initial * std::pow(c.lr_final / c.lr_initial, frac);
}

ScoreVector dsm_target(const Tangent& z_eff, double sigma, ParamMode mode, ScoreKind kind)
{
  if (mode != ParamMode::SE3)
    return score_simplified(z_eff, sigma, mode);
  return kind == ScoreKind::Surrogate ? score_surrogate(z_eff, sigma) : score_true_se3(z_eff, sigma);
}

Tangent net_input(const RigidTransform& pose, ParamMode mode)
{
  const Vec3 phi = so3_log(pose.rot);
  if (mode == ParamMode::SO3)
    return phi;
  Tangent x(6);
  if (mode == ParamMode::SE3)
    x << pose.rot.inverse() * pose.trans, phi;
  else
    x << pose.trans, phi;
  return x;
}

ScoreNetParams train(const TrainConfig& config, const std::vector<TrainDatum>& data, int num_shapes,
                     const TrainCallbacks& callbacks, const ScoreNetParams* init, AdamState* adam)
{
  config.validate();
  if (data.empty())
    throw std::invalid_argument("train: empty dataset");
  for (const TrainDatum& d : data)
    if (d.shape_id < 0 || d.shape_id >= num_shapes)
      throw std::invalid_argument("train: shape id out of range");

  const ParamMode mode = config.mode;
  const int D = tangent_dim(mode);
  const std::vector<double> sigmas = make_schedule(config.sigma_min, config.sigma_max, config.levels).sigmas;

  ScoreNetParams params;
  if (init)
  {
    params = *init;
    if (params.config.mode != mode || params.config.num_levels() != config.levels ||
        params.config.num_shapes != num_shapes)
      throw std::invalid_argument("train: initial parameters do not match the configuration");
  }
  else
  {
    Rng init_rng(config.seed);
    params = init_params(config.net_config(num_shapes), init_rng);
  }
  AdamState local;
  AdamState& state = adam ? *adam : local;
  if (state.m.empty())
    state = AdamState::for_params(params);

  const int N = config.batch_size * config.fan_out;
  NetBatch batch{Eigen::MatrixXd(D, N), std::vector<int>(N), std::vector<int>(N)};
  Eigen::MatrixXd targets(D, N);
  std::vector<double> weights(N);

  for (long step = state.step; step < config.total_steps; ++step)
  {
    Rng rng = step_stream(config.seed, step);
    int col = 0;
    for (int b = 0; b < config.batch_size; ++b)
    {
      const TrainDatum& d = data[rng.below(data.size())];
      const int level = config.fixed_level >= 0 ? config.fixed_level : static_cast<int>(rng.below(config.levels));
      const double sigma = sigmas[level];
      const RigidTransform x_inv = inverse(d.pose, mode);
      for (int f = 0; f < config.fan_out; ++f, ++col)
      {
        PerturbedSample ps;
        Tangent z_eff;
        do
        {
          ps = concentrated_sample(d.pose, sigma, mode, rng);
          z_eff = group_log(compose(x_inv, ps.pose, mode), mode);
        } while (!(z_eff.tail<3>().norm() < M_PI - kCutMargin));
        batch.x.col(col) = net_input(ps.pose, mode);
        batch.levels[col] = level;
        batch.shapes[col] = d.shape_id;
        targets.col(col) = dsm_target(z_eff, sigma, mode, config.score_kind);
        weights[col] = config.weighting == LossWeighting::SigmaSquared ? sigma * sigma : 1.0;
      }
    }

    const double lr = learning_rate(config, step);
    LossAndGrads lg = net_backward(params, batch, targets, weights);
    if (!std::isfinite(lg.loss) || !lg.grads.all_finite())
    {
      std::ostringstream msg;
      msg << "training diverged at step " << step << ": loss=" << lg.loss << " lr=" << lr
          << " params_finite=" << (params.all_finite() ? "yes" : "no");
      throw TrainingDiverged(msg.str());
    }
    adam_step(params, lg.grads, state, lr);

    const long done = step + 1;
    if (callbacks.on_log && callbacks.log_every > 0 && (done % callbacks.log_every == 0 || done == config.total_steps))
      callbacks.on_log({done, lg.loss, lr});
    if (callbacks.on_checkpoint && callbacks.checkpoint_every > 0 &&
        (done % callbacks.checkpoint_every == 0 || done == config.total_steps))
      callbacks.on_checkpoint(done, params, state);
  }
  return params;
}

std::vector<RigidTransform> sample_batch(const BatchScoreFn& score, const NoiseSchedule& schedule, ParamMode mode,
                                         int count, Rng& rng, const SamplerConfig& config,
                                         const std::vector<RigidTransform>* init)
{
  if (config.substeps < 1 || config.inner_steps < 1)
    throw std::invalid_argument("sample: substeps and inner_steps must be >= 1");
  if (schedule.size() < 1)
    throw std::invalid_argument("sample: empty schedule");
  const int D = tangent_dim(mode);

  std::vector<RigidTransform> states;
  if (init)
  {
    if (static_cast<int>(init->size()) != count)
      throw std::invalid_argument("sample: init size does not match count");
    states = *init;
  }
  else
  {
    states.reserve(count);
    for (int n = 0; n < count; ++n)
      states.push_back(group_exp(schedule.sigma_max() * rng.normal_vec(D), mode));
  }

  auto advance = [&](double sigma, double eps, bool noisy) {
    const Eigen::MatrixXd s = score(states, sigma);
    if (s.rows() != D || s.cols() != count)
      throw std::runtime_error("sample: score function returned the wrong shape");
    for (int n = 0; n < count; ++n)
    {
      Tangent step = eps * s.col(n);
      if (noisy)
        step += std::sqrt(2.0 * eps) * rng.normal_vec(D);
      if (!step.allFinite())
        throw std::runtime_error("sample: non-finite update at sigma=" + std::to_string(sigma));
      states[n] = compose(states[n], group_exp(step, mode), mode);
    }
  };

  for (int i = schedule.size() - 1; i >= 0; --i)
  {
    const double eps = schedule.eps_steps[i] / config.substeps;
    for (int m = 0; m < config.inner_steps; ++m)
      for (int k = 0; k < config.substeps; ++k)
        advance(schedule.sigmas[i], eps, config.add_noise);
  }
  if (config.polish)
  {
    const double sigma = schedule.sigmas[std::min(1, schedule.size() - 1)];
    advance(sigma, sigma * sigma, false);
  }
  return states;
}

BatchScoreFn net_score_fn(const ScoreNetParams& params, int shape_id)
{
  if (shape_id < 0 || shape_id >= params.config.num_shapes)
    throw std::invalid_argument("net_score_fn: shape id out of range");
  return [&params, shape_id](const std::vector<RigidTransform>& states, double sigma) {
    const ParamMode mode = params.config.mode;
    const int n = static_cast<int>(states.size());
    NetBatch batch{Eigen::MatrixXd(tangent_dim(mode), n), std::vector<int>(n, nearest_level(params.config.sigmas, sigma)),
                   std::vector<int>(n, shape_id)};
    for (int k = 0; k < n; ++k)
      batch.x.col(k) = net_input(states[k], mode);
    return net_forward_batch(params, batch);
  };
}

BatchScoreFn analytic_score_fn(const RigidTransform& center, double sigma_star, ParamMode mode)
{
  if (!(sigma_star > 0.0))
    throw std::invalid_argument("analytic_score_fn: sigma_star must be positive");
  return [center, sigma_star, mode](const std::vector<RigidTransform>& states, double sigma) {
    const double s_eff = std::sqrt(sigma_star * sigma_star + sigma * sigma);
    const RigidTransform c_inv = inverse(center, mode);
    Eigen::MatrixXd out(tangent_dim(mode), static_cast<Eigen::Index>(states.size()));
    for (std::size_t k = 0; k < states.size(); ++k)
    {
      const Tangent z = group_log(compose(c_inv, states[k], mode), mode);
      if (z.tail<3>().norm() < M_PI - kCutMargin)
        out.col(k) = score_closed(states[k], center, s_eff, mode);
      else
        out.col(k) = score_surrogate(z, s_eff);
    }
    return out;
  };
}

RigidTransform sample(const ScoreNetParams& params, int shape_id, const NoiseSchedule& schedule, ParamMode mode,
                      int substeps, Rng& rng, const std::optional<RigidTransform>& init)
{
  if (mode != params.config.mode)
    throw std::invalid_argument("sample: mode does not match the model");
  SamplerConfig cfg;
  cfg.substeps = substeps;
  std::vector<RigidTransform> start;
  if (init)
    start.push_back(*init);
  return sample_batch(net_score_fn(params, shape_id), schedule, mode, 1, rng, cfg, init ? &start : nullptr).front();
}

}  // namespace liediff
