#include "liediff/scores.hpp"

#include <cmath>

#include "liediff/distributions.hpp"

namespace liediff
{

namespace
{
void require_sigma(double sigma)
{
  if (!(sigma > 0.0) || !std::isfinite(sigma))
    throw std::invalid_argument("sigma must be positive and finite");
}
}  // namespace

ScoreVector score_closed(const RigidTransform& y, const RigidTransform& x, double sigma, ParamMode mode)
{
  require_sigma(sigma);
  const Tangent z = group_log(compose(inverse(x, mode), y, mode), mode);
  if (mode == ParamMode::SE3)
    return -se3_jacobian_inv(z, Se3InvKind::RightInvTranspose) * z / (sigma * sigma);
  const Eigen::MatrixXd jr_inv = group_jacobian(z, mode, JacobianKind::RightInv);
  return -jr_inv.transpose() * z / (sigma * sigma);
}

ScoreVector score_simplified(const Tangent& z, double sigma, ParamMode mode)
{
  require_sigma(sigma);
  if (mode == ParamMode::SE3)
    throw std::invalid_argument("score_simplified: SE3 has no Jl = Jr^T simplification");
  if (z.size() != tangent_dim(mode))
    throw std::invalid_argument("score_simplified: tangent dimension mismatch");
  return -z / (sigma * sigma);
}

ScoreVector score_surrogate(const Tangent& z, double sigma)
{
  require_sigma(sigma);
  return -z / (sigma * sigma);
}

ScoreVector score_true_se3(const Tangent& z, double sigma)
{
  require_sigma(sigma);
  if (z.size() != 6)
    throw std::invalid_argument("score_true_se3: expected a 6-vector");
  const Vec6 tau = z;
  return -se3_jacobian_inv(tau, Se3InvKind::RightInvTranspose) * tau / (sigma * sigma);
}

ScoreVector score_numerical(const RigidTransform& y, const RigidTransform& x, double sigma, ParamMode mode,
                            double h)
{
  if (!(h >= 1e-7 && h <= 1e-3))
    throw std::invalid_argument("score_numerical: step must lie in [1e-7, 1e-3]");
  const int n = tangent_dim(mode);
  ScoreVector g(n);
  for (int i = 0; i < n; ++i)
  {
    Tangent e = Tangent::Zero(n);
    e[i] = h;
    const double up = concentrated_logprob(compose(y, group_exp(e, mode), mode), x, sigma, mode);
    const double down = concentrated_logprob(compose(y, group_exp(-e, mode), mode), x, sigma, mode);
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

}  // namespace liediff
