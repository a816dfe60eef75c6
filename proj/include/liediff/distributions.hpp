#pragma once

#include <vector>

#include "liediff/lie.hpp"
#include "liediff/rng.hpp"

namespace liediff
{

// ---------------------------------------------------------------------------
// Concentrated Gaussian N_G(X, sigma^2 I): z ~ N(0, sigma^2 I) in the tangent
// space, pushed to the group by Y = X Exp(z).
// ---------------------------------------------------------------------------

struct PerturbedSample
{
  RigidTransform pose;
  /// The tangent draw that produced `pose`.
  Tangent z;
};

PerturbedSample concentrated_sample(const RigidTransform& x, double sigma, ParamMode mode, Rng& rng);

/// log N_G(y; x, sigma^2 I) with the Euclidean normalizer sqrt((2 pi)^k sigma^(2k)),
/// k = tangent dimension. The normalizer is only accurate in the concentrated
/// regime (sigma well below 1). Throws SingularityError when the rotation part
/// of x^-1 y is within 1e-6 of the cut locus.
double concentrated_logprob(const RigidTransform& y, const RigidTransform& x, double sigma,
                            ParamMode mode);

// ---------------------------------------------------------------------------
// IG_SO(3): isotropic Gaussian (heat kernel) on SO(3), as a density over the
// rotation angle. Integrate against (1 - cos phi) / pi to obtain probabilities.
// ---------------------------------------------------------------------------

enum class Igso3Method
{
  TruncatedSeries,
  ClosedApprox
};

constexpr int kIgso3SeriesTerms = 2000;
constexpr int kIgso3TableSize = 1024;

/// f_eps(phi) for phi in (0, pi).
double igso3_density(double phi, double eps, Igso3Method method);

/// Angle CDF on a uniform grid over [0, pi], inverted by linear interpolation.
class Igso3Table
{
public:
  explicit Igso3Table(double eps, int steps = kIgso3TableSize);

  double eps() const { return eps_; }
  /// Grid points kept after removing CDF plateaus; strictly increasing.
  const std::vector<double>& grid() const { return grid_; }
  const std::vector<double>& cdf() const { return cdf_; }
  /// True when eps is too small for the grid to resolve the angle law; the
  /// sampler then draws from the tangent Gaussian with sigma = sqrt(2 eps).
  bool gaussian_fallback() const { return fallback_; }

  double inverse_cdf(double u) const;
  Rotation sample(Rng& rng) const;

private:
  double eps_;
  bool fallback_ = false;
  std::vector<double> grid_;
  std::vector<double> cdf_;
};

/// Draws from IG_SO(3) using a per-eps table cache.
Rotation igso3_sample(double eps, Rng& rng);

}  // namespace liediff
