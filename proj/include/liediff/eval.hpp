#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "liediff/diffusion.hpp"
#include "liediff/lie.hpp"
#include "liediff/symsol.hpp"

namespace liediff
{

/// Mean equivalent_distance in degrees; predictions[n] is scored against gts[n].
double rotation_spread(const std::vector<Rotation>& predictions, const std::vector<Rotation>& gts,
                       const SymmetrySpec& spec);
double rotation_spread(const std::vector<Rotation>& predictions, const Rotation& gt, const SymmetrySpec& spec);

/// Mean Euclidean distance between paired translations.
double translation_error(const std::vector<Vec3>& predictions, const std::vector<Vec3>& gts);
double translation_error(const std::vector<Vec3>& predictions, const Vec3& gt);

/// Fraction of predictions nearest each element of spec.discrete.
std::vector<double> mode_coverage(const std::vector<Rotation>& predictions, const Rotation& gt,
                                  const SymmetrySpec& spec);

struct ShapeReport
{
  Shape shape = Shape::Tet;
  std::size_t count = 0;
  double spread_deg = 0.0;
  double trans_err = 0.0;
  /// Empty for continuous symmetries.
  std::vector<double> coverage;
};

struct EvalReport
{
  std::vector<ShapeReport> shapes;
};

/// One JSON object per shape.
void write_report(std::ostream& out, const EvalReport& report);

struct EvalOptions
{
  /// Samples drawn per shape, spread round-robin over the ground truths.
  int samples = 1000;
  /// Ground-truth poses per shape (the first ones of that shape in the dataset).
  int gts = 10;
  NoiseSchedule schedule;
  SamplerConfig sampler;
  std::uint64_t seed = 0;
};

/// Samples the model in each ground truth's observation frame, maps the
/// samples back to world coordinates and scores them.
EvalReport evaluate_model(const ScoreNetParams& params, const Dataset& data, const EvalOptions& options);

/// Ground-truth poses re-expressed in their observation frames.
std::vector<TrainDatum> observation_data(const Dataset& data);

struct EulerZYX
{
  double lon = 0.0;   // yaw
  double lat = 0.0;   // pitch
  double roll = 0.0;
  bool gimbal = false;
};

EulerZYX euler_zyx(const Rotation& r);
Rotation from_euler_zyx(double yaw, double pitch, double roll);

/// CSV rows `lon,lat,roll,gimbal_flag`; returns the number of data rows.
std::size_t mollweide_export(const std::vector<Rotation>& rotations, std::ostream& out);
std::size_t mollweide_export(const std::vector<Rotation>& rotations, const std::string& path);

}  // namespace liediff
