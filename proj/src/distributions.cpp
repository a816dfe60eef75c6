#include "liediff/distributions.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>

namespace liediff
{

namespace
{

void require_sigma(double sigma)
{
  if (!(sigma > 0.0) || !std::isfinite(sigma))
    throw std::invalid_argument("sigma must be positive and finite");
}

double series_density(double phi, double eps)
{
  const double denom = std::sin(0.5 * phi);
  double sum = 0.0;
  for (int l = 0; l <= kIgso3SeriesTerms; ++l)
  {
    const double n = 2.0 * l + 1.0;
    const double decay = std::exp(-eps * l * (l + 1.0));
    if (n * n * decay < 1e-12)
      break;
    sum += n * decay * std::sin(0.5 * n * phi);
  }
  return sum / denom;
}

// Three-image Poisson form of the heat kernel; accurate for eps below ~1.
double approx_density(double phi, double eps)
{
  const double images = std::exp(-M_PI * M_PI / eps) *
                        ((phi - 2.0 * M_PI) * std::exp(M_PI * phi / eps) +
                         (phi + 2.0 * M_PI) * std::exp(-M_PI * phi / eps));
  return std::sqrt(M_PI) * std::pow(eps, -1.5) * std::exp(eps / 4.0 - 0.25 * phi * phi / eps) *
         (phi - images) / (2.0 * std::sin(0.5 * phi));
}

}  // namespace

PerturbedSample concentrated_sample(const RigidTransform& x, double sigma, ParamMode mode, Rng& rng)
{
  require_sigma(sigma);
  Tangent z = sigma * rng.normal_vec(tangent_dim(mode));
  return {compose(x, group_exp(z, mode), mode), std::move(z)};
}

double concentrated_logprob(const RigidTransform& y, const RigidTransform& x, double sigma,
                            ParamMode mode)
{
  require_sigma(sigma);
  const Tangent z = group_log(compose(inverse(x, mode), y, mode), mode);
  const double angle = z.tail<3>().norm();
  if (!(angle < M_PI - 1e-6))
    throw SingularityError("concentrated_logprob: relative rotation at the cut locus");
  const double k = static_cast<double>(z.size());
  return -0.5 * z.squaredNorm() / (sigma * sigma) - 0.5 * k * std::log(2.0 * M_PI * sigma * sigma);
}

double igso3_density(double phi, double eps, Igso3Method method)
{
  if (!(phi > 0.0 && phi < M_PI))
    throw std::invalid_argument("igso3_density: phi must lie in (0, pi)");
  if (!(eps > 0.0))
    throw std::invalid_argument("igso3_density: eps must be positive");
  return method == Igso3Method::TruncatedSeries ? series_density(phi, eps) : approx_density(phi, eps);
}

Igso3Table::Igso3Table(double eps, int steps) : eps_(eps)
{
  if (!(eps > 0.0))
    throw std::invalid_argument("Igso3Table: eps must be positive");
  if (steps < 2)
    throw std::invalid_argument("Igso3Table: need at least two grid points");

  const double h = M_PI / (steps - 1);
  // Below this the angle law (scale sqrt(2 eps)) spans fewer than ~4 cells.
  if (std::sqrt(2.0 * eps) < 4.0 * h)
  {
    fallback_ = true;
    return;
  }

  std::vector<double> x(steps), pdf(steps, 0.0);
  for (int i = 0; i < steps; ++i)
  {
    x[i] = i * h;
    if (i == 0)
      continue;
    const double phi = x[i];
    const double f = eps >= 1.0 ? series_density(phi, eps) : approx_density(phi, eps);
    pdf[i] = std::max(0.0, (1.0 - std::cos(phi)) / M_PI * f);
  }
  std::vector<double> cum(steps, 0.0);
  for (int i = 1; i < steps; ++i)
    cum[i] = cum[i - 1] + 0.5 * h * (pdf[i - 1] + pdf[i]);
  const double total = cum.back();
  if (!(total > 0.0) || !std::isfinite(total))
  {
    fallback_ = true;
    return;
  }
  for (int i = 0; i < steps; ++i)
  {
    const double c = i + 1 == steps ? 1.0 : cum[i] / total;
    if (!cdf_.empty() && c <= cdf_.back())
      continue;
    grid_.push_back(x[i]);
    cdf_.push_back(c);
  }
}

double Igso3Table::inverse_cdf(double u) const
{
  if (fallback_)
    throw std::logic_error("Igso3Table::inverse_cdf: table uses the Gaussian fallback");
  if (u <= cdf_.front())
    return grid_.front();
  if (u >= cdf_.back())
    return grid_.back();
  const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
  const auto hi = static_cast<std::size_t>(it - cdf_.begin());
  const std::size_t lo = hi - 1;
  const double t = (u - cdf_[lo]) / (cdf_[hi] - cdf_[lo]);
  return grid_[lo] + t * (grid_[hi] - grid_[lo]);
}

Rotation Igso3Table::sample(Rng& rng) const
{
  if (fallback_)
    return so3_exp(std::sqrt(2.0 * eps_) * rng.normal3());
  const double angle = inverse_cdf(rng.uniform());
  Vec3 axis = rng.normal3();
  while (axis.norm() < 1e-12)
    axis = rng.normal3();
  return so3_exp(axis.normalized() * angle);
}

Rotation igso3_sample(double eps, Rng& rng)
{
  static std::mutex mutex;
  static std::map<double, std::shared_ptr<const Igso3Table>> cache;
  std::shared_ptr<const Igso3Table> table;
  {
    std::lock_guard lock(mutex);
    auto& slot = cache[eps];
    if (!slot)
      slot = std::make_shared<const Igso3Table>(eps);
    table = slot;
  }
  return table->sample(rng);
}

}  // namespace liediff
