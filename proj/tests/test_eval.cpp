#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "liediff/eval.hpp"

using namespace liediff;

namespace
{

constexpr double kDeg = 180.0 / M_PI;

// Minimum over the full discrete set, enumerated directly.
double brute_force(const SymmetrySpec& spec, const Rotation& gt, const Rotation& pred)
{
  double best = INFINITY;
  for (const Rotation& s : spec.discrete)
  {
    const Mat3 rel = pred.matrix().transpose() * (gt * s).matrix();
    best = std::min(best, std::acos(std::clamp(0.5 * (rel.trace() - 1.0), -1.0, 1.0)));
  }
  return best * kDeg;
}

}  // namespace

TEST_CASE("rotation spread")
{
  Rng rng(1);
  const SymmetrySpec tet = symmetry_group(Shape::Tet);
  const Rotation gt = rng.uniform_rotation();

  std::vector<Rotation> on_modes;
  for (const Rotation& s : tet.discrete)
    on_modes.push_back(gt * s);
  CHECK(rotation_spread(on_modes, gt, tet) < 1e-6);

  const SymmetrySpec trivial{Shape::Tet, {Rotation()}, {}};
  const std::vector<Rotation> half{gt, gt, gt * Rotation::about_axis(Vec3::UnitY(), 4.0 / kDeg),
                                   gt * Rotation::about_axis(Vec3::UnitZ(), 4.0 / kDeg)};
  CHECK(rotation_spread(half, gt, trivial) == doctest::Approx(2.0).epsilon(1e-9));

  std::vector<Rotation> preds, gts;
  double oracle_mean = 0.0;
  for (int i = 0; i < 200; ++i)
  {
    preds.push_back(rng.uniform_rotation());
    gts.push_back(rng.uniform_rotation());
    oracle_mean += brute_force(tet, gts.back(), preds.back()) / 200;
  }
  CHECK(rotation_spread(preds, gts, tet) == doctest::Approx(oracle_mean).epsilon(1e-9));

  std::vector<Rotation> shifted;
  for (const Rotation& g : gts)
    shifted.push_back(g * tet.discrete[5]);
  CHECK(rotation_spread(preds, shifted, tet) == doctest::Approx(oracle_mean).epsilon(1e-9));
  CHECK(rotation_spread(gts, gts, tet) < 1e-6);

  CHECK_THROWS_AS(rotation_spread({}, gt, tet), std::invalid_argument);
  CHECK_THROWS_AS(rotation_spread(preds, std::vector<Rotation>{gt}, tet), std::invalid_argument);
}

TEST_CASE("translation error")
{
  const std::vector<Vec3> gts{{0, 0, 0}, {1, 2, 3}, {-1, 0.5, 0}};
  CHECK(translation_error(gts, gts) == 0.0);
  std::vector<Vec3> off;
  for (const Vec3& g : gts)
    off.push_back(g + Vec3(0.3, 0, 0));
  CHECK(translation_error(off, gts) == doctest::Approx(0.3).epsilon(1e-12));

  Rng rng(2);
  std::vector<Vec3> a, b;
  double oracle = 0.0;
  for (int i = 0; i < 100; ++i)
  {
    a.push_back(rng.normal3());
    b.push_back(rng.normal3());
    const double dx = a[i].x() - b[i].x(), dy = a[i].y() - b[i].y(), dz = a[i].z() - b[i].z();
    oracle += std::sqrt(dx * dx + dy * dy + dz * dz) / 100;
  }
  CHECK(translation_error(a, b) == doctest::Approx(oracle).epsilon(1e-12));
  CHECK(translation_error(a, Vec3::Zero()) > 0.0);
}

TEST_CASE("mode coverage")
{
  Rng rng(3);
  const SymmetrySpec tet = symmetry_group(Shape::Tet);
  const Rotation gt = rng.uniform_rotation();

  std::vector<Rotation> uniform;
  for (int i = 0; i < 1200; ++i)
    uniform.push_back(gt * tet.discrete[i % 12] * so3_exp(0.05 * rng.normal3()));
  const auto cov = mode_coverage(uniform, gt, tet);
  REQUIRE(cov.size() == 12);
  double sum = 0.0;
  for (double f : cov)
  {
    CHECK(f == doctest::Approx(1.0 / 12).epsilon(1e-12));
    sum += f;
  }
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));

  const std::vector<Rotation> one(50, gt * tet.discrete[3]);
  const auto single = mode_coverage(one, gt, tet);
  for (std::size_t k = 0; k < 12; ++k)
    CHECK(single[k] == (k == 3 ? 1.0 : 0.0));

  // Relabeling the ground truth by a symmetry permutes the histogram.
  std::vector<Rotation> random;
  for (int i = 0; i < 300; ++i)
    random.push_back(rng.uniform_rotation());
  std::vector<double> a = mode_coverage(random, gt, tet), b = mode_coverage(random, gt * tet.discrete[7], tet);
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  CHECK(a == b);

  CHECK_THROWS_AS(mode_coverage(random, gt, symmetry_group(Shape::Cone)), std::invalid_argument);
}

TEST_CASE("euler decomposition")
{
  const EulerZYX id = euler_zyx(Rotation());
  CHECK(id.lon == 0.0);
  CHECK(id.lat == 0.0);
  CHECK(id.roll == 0.0);
  CHECK_FALSE(id.gimbal);

  const EulerZYX yaw = euler_zyx(Rotation::about_axis(Vec3::UnitZ(), 1.0));
  CHECK(yaw.lon == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(std::abs(yaw.lat) < 1e-15);
  CHECK(std::abs(yaw.roll) < 1e-15);

  Rng rng(4);
  for (int i = 0; i < 2000; ++i)
  {
    const Rotation r = rng.uniform_rotation();
    const EulerZYX e = euler_zyx(r);
    if (std::abs(e.lat) < M_PI / 2 - 1e-3)
      CHECK(angle_between(from_euler_zyx(e.lon, e.lat, e.roll), r) < 1e-9);
  }
  CHECK(euler_zyx(Rotation::about_axis(Vec3::UnitY(), M_PI / 2)).gimbal);
}

TEST_CASE("mollweide export")
{
  Rng rng(5);
  std::vector<Rotation> rots{Rotation(), Rotation::about_axis(Vec3::UnitZ(), 1.0)};
  for (int i = 0; i < 10; ++i)
    rots.push_back(rng.uniform_rotation());
  std::ostringstream out;
  CHECK(mollweide_export(rots, out) == rots.size());
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == "lon,lat,roll,gimbal_flag");
  std::size_t rows = 0;
  while (std::getline(in, line))
  {
    double lon, lat, roll;
    int flag;
    REQUIRE(std::sscanf(line.c_str(), "%lf,%lf,%lf,%d", &lon, &lat, &roll, &flag) == 4);
    CHECK(angle_between(from_euler_zyx(lon, lat, roll), rots[rows]) < 1e-9);
    ++rows;
  }
  CHECK(rows == rots.size());
  CHECK(out.str().find('\r') == std::string::npos);

  CHECK_THROWS_AS(mollweide_export(rots, std::string("/nonexistent-dir/x.csv")), std::runtime_error);
}

TEST_CASE("evaluate a model end to end")
{
  const Dataset data = gen_dataset({Shape::Tet, Shape::Cone}, 20, -1.0, 1.0, ParamMode::SE3, 6);
  const std::vector<TrainDatum> obs = observation_data(data);
  REQUIRE(obs.size() == data.samples.size());
  for (std::size_t k = 0; k < obs.size(); ++k)
  {
    CHECK(obs[k].shape_id == data.samples[k].shape_id);
    CHECK(obs[k].pose.trans.norm() == 0.0);
  }

  TrainConfig tc;
  tc.mode = ParamMode::SE3;
  tc.total_steps = 20;
  tc.width = 16;
  tc.embed_dim = 4;
  tc.batch_size = 4;
  tc.fan_out = 4;
  tc.levels = 10;
  const ScoreNetParams p = train(tc, obs, 2);

  EvalOptions opt;
  opt.samples = 24;
  opt.gts = 3;
  opt.schedule = make_schedule(tc.sigma_min, tc.sigma_max, tc.levels);
  opt.seed = 1;
  const EvalReport r = evaluate_model(p, data, opt);
  REQUIRE(r.shapes.size() == 2);
  CHECK(r.shapes[0].count == 24);
  CHECK(r.shapes[0].coverage.size() == 12);
  CHECK(r.shapes[1].coverage.empty());
  double sum = 0.0;
  for (double f : r.shapes[0].coverage)
    sum += f;
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(r.shapes[0].spread_deg >= 0.0);

  const EvalReport again = evaluate_model(p, data, opt);
  CHECK(again.shapes[1].spread_deg == r.shapes[1].spread_deg);

  std::ostringstream rep;
  write_report(rep, r);
  std::istringstream lines(rep.str());
  std::string first;
  std::getline(lines, first);
  const auto j = nlohmann::json::parse(first);
  CHECK(j.at("shape") == "tet");
  CHECK(j.contains("min_coverage"));

  opt.samples = 0;
  CHECK_THROWS_AS(evaluate_model(p, data, opt), std::invalid_argument);
}
