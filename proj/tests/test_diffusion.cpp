#include <doctest.h>

#include <sstream>

#include "liediff/diffusion.hpp"

using namespace liediff;

namespace
{

std::string checkpoint_bytes(const ScoreNetParams& p)
{
  std::ostringstream s;
  write_checkpoint(s, p);
  return s.str();
}

TrainConfig toy_config()
{
  TrainConfig c;
  c.mode = ParamMode::SO3;
  c.levels = 2;
  c.sigma_min = 0.5;
  c.sigma_max = 1.0;
  c.fixed_level = 0;
  c.batch_size = 4;
  c.fan_out = 16;
  c.total_steps = 2000;
  c.lr_initial = 2e-3;
  c.lr_final = 2e-4;
  c.width = 64;
  c.embed_dim = 8;
  c.seed = 42;
  return c;
}

double geodesic_norm(const RigidTransform& a, const RigidTransform& b, ParamMode m)
{
  return group_log(compose(inverse(a, m), b, m), m).norm();
}

}  // namespace

TEST_CASE("noise schedule")
{
  const NoiseSchedule s = make_schedule(1e-4, 1.0, 100);
  REQUIRE(s.size() == 100);
  CHECK(s.sigmas.front() == 1e-4);
  CHECK(s.sigmas.back() == 1.0);
  const double d = (1.0 - 1e-4) / 99;
  for (int i = 1; i < 100; ++i)
  {
    CHECK(s.sigmas[i] - s.sigmas[i - 1] == doctest::Approx(d).epsilon(1e-9));
    CHECK(s.sigmas[i] > s.sigmas[i - 1]);
  }
  for (int i = 0; i < 100; i += 7)
    for (int j = 0; j < 100; j += 11)
      CHECK(s.eps_steps[i] / s.eps_steps[j] == doctest::Approx(s.sigmas[i] * s.sigmas[i] / (s.sigmas[j] * s.sigmas[j])).epsilon(1e-12));
  CHECK(s.eps_steps.back() == kDefaultEps0);

  const NoiseSchedule two = make_schedule(0.1, 0.7, 2, 0.3);
  CHECK(two.sigmas == std::vector<double>{0.1, 0.7});
  CHECK(two.eps_steps.back() == doctest::Approx(0.3).epsilon(1e-15));

  CHECK_THROWS_AS(make_schedule(0.0, 1.0, 10), std::invalid_argument);
  CHECK_THROWS_AS(make_schedule(1.0, 0.5, 10), std::invalid_argument);
  CHECK_THROWS_AS(make_schedule(0.1, 1.0, 1), std::invalid_argument);
}

TEST_CASE("dsm loss")
{
  Tangent t = Tangent::Ones(6);
  CHECK(dsm_loss(t, t) == 0.0);
  CHECK(dsm_loss(Tangent::Zero(6), t) == 3.0);
  Tangent p(3), q(3);
  p << 0.1, -0.4, 2.0;
  q << 1.0, 0.3, -0.5;
  CHECK(dsm_loss(p, q) == dsm_loss(q, p));
  CHECK_THROWS_AS(dsm_loss(Tangent::Zero(3), Tangent::Zero(6)), std::invalid_argument);
}

TEST_CASE("adam")
{
  Rng rng(1);
  NetConfig c;
  c.width = 8;
  c.embed_dim = 4;
  c.sigmas = {0.1, 1.0};
  ScoreNetParams p = init_params(c, rng);
  const ScoreNetParams start = p;

  AdamState st = AdamState::for_params(p);
  adam_step(p, p.zeros_like(), st, 1e-2);
  CHECK(checkpoint_bytes(p) == checkpoint_bytes(start));
  CHECK(st.step == 1);

  ScoreNetParams g = p.zeros_like();
  g.W_out(0, 0) = 3.7;
  g.b_out(1, 0) = -1e-3;
  AdamState s1 = AdamState::for_params(p), s2 = s1;
  ScoreNetParams p1 = start, p2 = start;
  adam_step(p1, g, s1, 1e-2);
  adam_step(p2, g, s2, 1e-2);
  CHECK(checkpoint_bytes(p1) == checkpoint_bytes(p2));
  CHECK(p1.W_out(0, 0) - start.W_out(0, 0) == doctest::Approx(-1e-2).epsilon(1e-6));
  CHECK(p1.b_out(1, 0) - start.b_out(1, 0) == doctest::Approx(1e-2).epsilon(1e-4));
  CHECK(p1.W_out(1, 1) == start.W_out(1, 1));
}

TEST_CASE("learning rate schedule")
{
  TrainConfig c;
  c.total_steps = 1000;
  c.lr_initial = 1e-3;
  c.lr_final = 1e-4;
  CHECK(learning_rate(c, 0) == 1e-3);
  CHECK(learning_rate(c, 499) == 1e-3);
  CHECK(learning_rate(c, 500) == 1e-3);
  CHECK(learning_rate(c, 750) == doctest::Approx(std::sqrt(1e-7)));
  CHECK(learning_rate(c, 1000) == doctest::Approx(1e-4));
  for (long s = 501; s < 1000; ++s)
    CHECK(learning_rate(c, s) < learning_rate(c, s - 1));
}

TEST_CASE("net input coordinates")
{
  const RigidTransform x{so3_exp(Vec3(0, 0, M_PI / 2)), Vec3(1, 0, 0)};
  CHECK(net_input(x, ParamMode::SO3).size() == 3);
  const Tangent r3 = net_input(x, ParamMode::R3SO3);
  CHECK((r3.head<3>() - Vec3(1, 0, 0)).norm() == 0.0);
  const Tangent se3 = net_input(x, ParamMode::SE3);
  CHECK((se3.head<3>() - Vec3(0, -1, 0)).norm() < 1e-15);
  CHECK((se3.tail<3>() - Vec3(0, 0, M_PI / 2)).norm() < 1e-15);
}

TEST_CASE("dsm targets")
{
  Tangent z(6);
  z << 0.5, 0.2, -0.3, 0.4, -0.1, 0.6;
  CHECK((dsm_target(z, 0.5, ParamMode::SE3, ScoreKind::Surrogate) - score_surrogate(z, 0.5)).norm() == 0.0);
  CHECK((dsm_target(z, 0.5, ParamMode::SE3, ScoreKind::True) - score_true_se3(z, 0.5)).norm() == 0.0);
  CHECK((dsm_target(z, 0.5, ParamMode::R3SO3, ScoreKind::True) - score_simplified(z, 0.5, ParamMode::R3SO3)).norm() == 0.0);
  CHECK(parse_score_kind("true") == ScoreKind::True);
  CHECK(parse_score_kind("surrogate") == ScoreKind::Surrogate);
  CHECK_THROWS_AS(parse_score_kind("auto"), std::invalid_argument);
}

TEST_CASE("training: point-mass toy")
{
  const TrainConfig c = toy_config();
  const std::vector<TrainDatum> data{{0, RigidTransform{}}};
  std::vector<TrainProgress> log;
  TrainCallbacks cb;
  cb.log_every = 1;
  cb.on_log = [&](const TrainProgress& p) { log.push_back(p); };
  const ScoreNetParams p = train(c, data, 1, cb);
  REQUIRE(log.size() == 2000);
  double head = 0, tail = 0;
  for (int k = 0; k < 20; ++k)
  {
    head += log[k].loss;
    tail += log[log.size() - 1 - k].loss;
  }
  CHECK(head >= 10 * tail);

  Rng rng(99);
  double dot = 0, na = 0, nb = 0;
  for (int k = 0; k < 200; ++k)
  {
    const Vec3 z = 0.5 * rng.normal3();
    if (z.norm() > 2.5)
      continue;
    const ScoreVector pred = net_forward(p, net_input({so3_exp(z), Vec3::Zero()}, ParamMode::SO3), 0, 0);
    const Vec3 target = -so3_log(so3_exp(z)) / 0.25;
    dot += pred.dot(target);
    na += pred.squaredNorm();
    nb += target.squaredNorm();
  }
  CHECK(dot / std::sqrt(na * nb) > 0.99);
}

TEST_CASE("training: zero steps, determinism and resume")
{
  TrainConfig c = toy_config();
  c.fixed_level = -1;
  c.total_steps = 0;
  const std::vector<TrainDatum> data{{0, RigidTransform{so3_exp(Vec3(0.1, 0.2, 0.3)), Vec3::Zero()}},
                                     {1, RigidTransform{}}};
  Rng init_rng(c.seed);
  CHECK(checkpoint_bytes(train(c, data, 2)) == checkpoint_bytes(init_params(c.net_config(2), init_rng)));

  c.total_steps = 60;
  const std::string a = checkpoint_bytes(train(c, data, 2));
  CHECK(a == checkpoint_bytes(train(c, data, 2)));
  c.seed = 43;
  CHECK(a != checkpoint_bytes(train(c, data, 2)));
  c.seed = 42;

  ScoreNetParams mid;
  AdamState mid_adam;
  TrainCallbacks cb;
  cb.checkpoint_every = 30;
  cb.on_checkpoint = [&](long step, const ScoreNetParams& p, const AdamState& s) {
    if (step == 30)
    {
      mid = p;
      mid_adam = s;
    }
  };
  train(c, data, 2, cb);
  REQUIRE(mid_adam.step == 30);
  CHECK(checkpoint_bytes(train(c, data, 2, {}, &mid, &mid_adam)) == a);

  CHECK_THROWS_AS(train(c, {}, 2), std::invalid_argument);
  CHECK_THROWS_AS(train(c, {{5, RigidTransform{}}}, 2), std::invalid_argument);
  c.fixed_level = 9;
  CHECK_THROWS_AS(train(c, data, 2), std::invalid_argument);
}

TEST_CASE("training diverges loudly")
{
  TrainConfig c = toy_config();
  c.total_steps = 50;
  c.lr_initial = 1e300;
  c.lr_final = 1e300;
  const std::vector<TrainDatum> data{{0, RigidTransform{}}};
  CHECK_THROWS_AS(train(c, data, 1), TrainingDiverged);
}

TEST_CASE("sampler fixed point")
{
  Rng rng(3);
  std::vector<RigidTransform> init;
  for (int k = 0; k < 5; ++k)
    init.push_back({rng.uniform_rotation(), rng.normal3()});
  const BatchScoreFn zero = [](const std::vector<RigidTransform>& s, double) {
    return Eigen::MatrixXd::Zero(6, static_cast<Eigen::Index>(s.size()));
  };
  SamplerConfig cfg;
  cfg.add_noise = false;
  cfg.substeps = 3;
  const auto out = sample_batch(zero, make_schedule(1e-4, 1.0, 20), ParamMode::SE3, 5, rng, cfg, &init);
  for (int k = 0; k < 5; ++k)
  {
    CHECK(angle_between(out[k].rot, init[k].rot) < 1e-15);
    CHECK((out[k].trans - init[k].trans).norm() == 0.0);
  }
  cfg.substeps = 0;
  CHECK_THROWS_AS(sample_batch(zero, make_schedule(1e-4, 1.0, 20), ParamMode::SE3, 5, rng, cfg, &init),
                  std::invalid_argument);
}

TEST_CASE("sampler with the analytic score")
{
  const double sigma_star = 0.2;
  const NoiseSchedule sched = make_schedule(1e-4, 1.0, 100);
  for (ParamMode m : {ParamMode::SO3, ParamMode::SE3})
  {
    CAPTURE(std::string(to_string(m)));
    Rng rng(11);
    const RigidTransform center{rng.uniform_rotation(), m == ParamMode::SO3 ? Vec3::Zero() : Vec3(0.5, -0.3, 0.8)};
    std::vector<double> mean(2, 0.0);
    for (int sub : {1, 4})
    {
      SamplerConfig cfg;
      cfg.substeps = sub;
      const auto out = sample_batch(analytic_score_fn(center, sigma_star, m), sched, m, 1000, rng, cfg);
      double d = 0.0;
      for (const auto& x : out)
        d += geodesic_norm(center, x, m);
      mean[sub == 1 ? 0 : 1] = d / 1000;
    }
    CHECK(mean[0] < 3 * sigma_star);
    CHECK(mean[1] < 3 * sigma_star);
    CHECK(mean[1] <= mean[0] + 1e-2);
  }
}

TEST_CASE("sampling is deterministic")
{
  const RigidTransform center{so3_exp(Vec3(0.3, 0.2, 0.1)), Vec3::Zero()};
  const NoiseSchedule sched = make_schedule(1e-4, 1.0, 30);
  Rng a(5), b(5);
  const auto x = sample_batch(analytic_score_fn(center, 0.2, ParamMode::SO3), sched, ParamMode::SO3, 20, a);
  const auto y = sample_batch(analytic_score_fn(center, 0.2, ParamMode::SO3), sched, ParamMode::SO3, 20, b);
  for (int k = 0; k < 20; ++k)
    CHECK((x[k].rot.coeffs_wxyz().array() == y[k].rot.coeffs_wxyz().array()).all());
}
