#include "liediff/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>

#include <nlohmann/json.hpp>

namespace liediff
{

namespace
{

constexpr double kGimbalMargin = 1e-3;

void require_nonempty(std::size_t n, const char* who)
{
  if (n == 0)
    throw std::invalid_argument(std::string(who) + ": need at least one prediction");
}

}  // namespace

double rotation_spread(const std::vector<Rotation>& predictions, const std::vector<Rotation>& gts,
                       const SymmetrySpec& spec)
{
  require_nonempty(predictions.size(), "rotation_spread");
  if (predictions.size() != gts.size())
    throw std::invalid_argument("rotation_spread: predictions and ground truths differ in count");
  double sum = 0.0;
  for (std::size_t n = 0; n < predictions.size(); ++n)
    sum += equivalent_distance(spec, gts[n], predictions[n]);
  return sum / static_cast<double>(predictions.size());
}

double rotation_spread(const std::vector<Rotation>& predictions, const Rotation& gt, const SymmetrySpec& spec)
{
  return rotation_spread(predictions, std::vector<Rotation>(predictions.size(), gt), spec);
}

double translation_error(const std::vector<Vec3>& predictions, const std::vector<Vec3>& gts)
{
  require_nonempty(predictions.size(), "translation_error");
  if (predictions.size() != gts.size())
    throw std::invalid_argument("translation_error: predictions and ground truths differ in count");
  double sum = 0.0;
  for (std::size_t n = 0; n < predictions.size(); ++n)
    sum += (predictions[n] - gts[n]).norm();
  return sum / static_cast<double>(predictions.size());
}

double translation_error(const std::vector<Vec3>& predictions, const Vec3& gt)
{
  return translation_error(predictions, std::vector<Vec3>(predictions.size(), gt));
}

std::vector<double> mode_coverage(const std::vector<Rotation>& predictions, const Rotation& gt,
                                  const SymmetrySpec& spec)
{
  require_nonempty(predictions.size(), "mode_coverage");
  if (!spec.is_discrete())
    throw std::invalid_argument("mode_coverage: unsupported for continuous symmetries");
  std::vector<double> hist(spec.discrete.size(), 0.0);
  for (const Rotation& p : predictions)
    hist[nearest_mode(spec, gt, p).first] += 1.0;
  for (double& h : hist)
    h /= static_cast<double>(predictions.size());
  return hist;
}

void write_report(std::ostream& out, const EvalReport& report)
{
  for (const ShapeReport& s : report.shapes)
  {
    nlohmann::json j = {{"shape", std::string(to_string(s.shape))},
                        {"count", s.count},
                        {"spread_deg", s.spread_deg},
                        {"trans_err", s.trans_err}};
    if (!s.coverage.empty())
    {
      j["coverage"] = s.coverage;
      j["min_coverage"] = *std::min_element(s.coverage.begin(), s.coverage.end());
    }
    out << j.dump() << '\n';
  }
}

std::vector<TrainDatum> observation_data(const Dataset& data)
{
  std::vector<SymmetrySpec> specs;
  for (Shape s : data.shapes)
    specs.push_back(symmetry_group(s));
  std::vector<TrainDatum> out;
  out.reserve(data.samples.size());
  for (const PoseSample& p : data.samples)
    out.push_back({p.shape_id, to_observation(specs.at(p.shape_id), p.pose, data.mode)});
  return out;
}

EvalReport evaluate_model(const ScoreNetParams& params, const Dataset& data, const EvalOptions& opt)
{
  if (opt.samples < 1 || opt.gts < 1)
    throw std::invalid_argument("evaluate_model: samples and gts must be positive");
  if (params.config.mode != data.mode)
    throw std::invalid_argument("evaluate_model: model mode does not match the dataset");
  if (static_cast<int>(data.shapes.size()) > params.config.num_shapes)
    throw std::invalid_argument("evaluate_model: dataset has more shapes than the model");
  const ParamMode mode = data.mode;
  Rng root(opt.seed);
  EvalReport report;
  for (std::size_t s = 0; s < data.shapes.size(); ++s)
  {
    Rng rng = root.split();
    const SymmetrySpec spec = symmetry_group(data.shapes[s]);
    std::vector<RigidTransform> gts;
    for (const PoseSample& p : data.samples)
      if (p.shape_id == static_cast<int>(s) && static_cast<int>(gts.size()) < opt.gts)
        gts.push_back(p.pose);
    if (gts.empty())
      continue;

    const auto local = sample_batch(net_score_fn(params, static_cast<int>(s)), opt.schedule, mode, opt.samples, rng,
                                    opt.sampler);
    std::vector<Rotation> pred_rot, gt_rot;
    std::vector<Vec3> pred_t, gt_t;
    std::vector<double> coverage(spec.discrete.size(), 0.0);
    for (std::size_t n = 0; n < local.size(); ++n)
    {
      const RigidTransform& gt = gts[n % gts.size()];
      const RigidTransform world = compose(observation_frame(spec, gt), local[n], mode);
      pred_rot.push_back(world.rot);
      gt_rot.push_back(gt.rot);
      pred_t.push_back(world.trans);
      gt_t.push_back(gt.trans);
      if (spec.is_discrete())
        coverage[nearest_mode(spec, gt.rot, world.rot).first] += 1.0 / static_cast<double>(local.size());
    }
    ShapeReport r;
    r.shape = data.shapes[s];
    r.count = local.size();
    r.spread_deg = rotation_spread(pred_rot, gt_rot, spec);
    r.trans_err = translation_error(pred_t, gt_t);
    if (spec.is_discrete())
      r.coverage = std::move(coverage);
    report.shapes.push_back(std::move(r));
  }
  return report;
}

EulerZYX euler_zyx(const Rotation& r)
{
  const Mat3 m = r.matrix();
  EulerZYX e;
  const double s = std::clamp(-m(2, 0), -1.0, 1.0);
  e.lat = std::asin(s);
  e.gimbal = std::abs(e.lat) > M_PI / 2 - kGimbalMargin;
  e.lon = std::atan2(m(1, 0), m(0, 0));
  e.roll = std::atan2(m(2, 1), m(2, 2));
  return e;
}

Rotation from_euler_zyx(double yaw, double pitch, double roll)
{
  return Rotation::about_axis(Vec3::UnitZ(), yaw) * Rotation::about_axis(Vec3::UnitY(), pitch) *
         Rotation::about_axis(Vec3::UnitX(), roll);
}

std::size_t mollweide_export(const std::vector<Rotation>& rotations, std::ostream& out)
{
  out << "lon,lat,roll,gimbal_flag\n";
  char buf[96];
  for (const Rotation& r : rotations)
  {
    const EulerZYX e = euler_zyx(r);
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g,%d\n", e.lon, e.lat, e.roll, e.gimbal ? 1 : 0);
    out << buf;
  }
  if (!out)
    throw std::runtime_error("mollweide_export: write failed");
  return rotations.size();
}

std::size_t mollweide_export(const std::vector<Rotation>& rotations, const std::string& path)
{
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw std::runtime_error("cannot open '" + path + "' for writing");
  return mollweide_export(rotations, out);
}

}  // namespace liediff
