#pragma once

#include <cstdint>
#include <random>

#include "liediff/lie.hpp"

namespace liediff
{

/// Seedable, splittable random stream. Normal and uniform variates are
/// derived from raw 64-bit output by fixed transforms so that streams are
/// reproducible across standard library implementations.
class Rng
{
public:
  explicit Rng(std::uint64_t seed);

  /// Child stream whose state is derived from this stream's next output.
  Rng split();

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform in [0, 1).
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);
  double normal();

  Vec3 normal3();
  Eigen::VectorXd normal_vec(int n);
  /// Haar-uniform rotation (normalized 4-D Gaussian).
  Rotation uniform_rotation();

private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace liediff
