#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "liediff/lie.hpp"
#include "liediff/rng.hpp"

namespace liediff
{

enum class Shape
{
  Tet,
  Cube,
  Icosa,
  Cone,
  Cyl
};

std::string_view to_string(Shape shape);
Shape parse_shape(std::string_view text);
/// Comma-separated list, e.g. "tet,cube".
std::vector<Shape> parse_shape_list(std::string_view text);

/// A circle of symmetries {flip * R(axis, theta) : theta in [0, 2 pi)}.
struct ContinuousComponent
{
  Vec3 axis = Vec3::UnitZ();
  Rotation flip;
};

struct SymmetrySpec
{
  Shape shape = Shape::Tet;
  /// Closed finite group; always contains the identity first.
  std::vector<Rotation> discrete;
  std::vector<ContinuousComponent> continuous;

  bool is_discrete() const { return continuous.empty(); }
};

SymmetrySpec symmetry_group(Shape shape);

/// Closure of a generator set under composition (and hence inverse). Throws if
/// the set grows past `limit` elements.
std::vector<Rotation> close_group(const std::vector<Rotation>& generators, std::size_t limit = 1000);

struct PoseSample
{
  int shape_id = 0;
  RigidTransform pose;
  ParamMode mode = ParamMode::SO3;
};

struct Dataset
{
  ParamMode mode = ParamMode::SO3;
  std::uint64_t seed = 0;
  double translation_lo = -1.0;
  double translation_hi = 1.0;
  std::vector<Shape> shapes;
  int n_per_shape = 0;
  std::vector<PoseSample> samples;
};

/// Haar-uniform rotations and per-axis uniform translations. Each shape draws
/// from its own child stream; samples are concatenated in shape order. In SO3
/// mode translations are drawn (to keep streams aligned) and then zeroed.
Dataset gen_dataset(const std::vector<Shape>& shapes, int n_per_shape, double translation_lo, double translation_hi,
                    ParamMode mode, std::uint64_t seed);

void write_dataset(std::ostream& out, const Dataset& data);
Dataset read_dataset(std::istream& in);
void save_dataset(const std::string& path, const Dataset& data);
Dataset load_dataset(const std::string& path);

/// The member of {pose * S : S in the symmetry set} closest to `target`.
Rotation closest_equivalent(const SymmetrySpec& spec, const Rotation& target, const Rotation& pose);

/// min_S angle(pred, gt * S), in degrees.
double equivalent_distance(const SymmetrySpec& spec, const Rotation& gt, const Rotation& pred);

/// Index into spec.discrete of the symmetry S minimizing angle(pred, gt * S),
/// and that angle in radians.
std::pair<int, double> nearest_mode(const SymmetrySpec& spec, const Rotation& gt, const Rotation& pred);

/// Observation frame of a ground-truth pose: the symmetric equivalent of the
/// rotation nearest the identity, with the ground-truth translation.
RigidTransform observation_frame(const SymmetrySpec& spec, const RigidTransform& gt);

/// Pose expressed in its observation frame; the rotation part is a symmetry
/// element and the translation is zero.
RigidTransform to_observation(const SymmetrySpec& spec, const RigidTransform& gt, ParamMode mode);

}  // namespace liediff
