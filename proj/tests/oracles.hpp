#pragma once

// Independent reference computations used by the unit and acceptance tests.

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

namespace oracle
{

inline Eigen::Matrix3d skew(const Eigen::Vector3d& v)
{
  Eigen::Matrix3d m;
  m << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
  return m;
}

/// se(3) adjoint in (rho, phi) ordering.
inline Eigen::Matrix<double, 6, 6> ad_se3(const Eigen::Vector3d& rho, const Eigen::Vector3d& phi)
{
  Eigen::Matrix<double, 6, 6> a = Eigen::Matrix<double, 6, 6>::Zero();
  a.topLeftCorner<3, 3>() = skew(phi);
  a.topRightCorner<3, 3>() = skew(rho);
  a.bottomRightCorner<3, 3>() = skew(phi);
  return a;
}

/// Gauss-Legendre nodes and weights mapped to [a, b].
inline void gauss_legendre(int n, double a, double b, std::vector<double>& x, std::vector<double>& w)
{
  x.assign(n, 0.0);
  w.assign(n, 0.0);
  for (int i = 0; i < n; ++i)
  {
    double t = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    double dp = 1.0;
    for (int it = 0; it < 100; ++it)
    {
      double p0 = 1.0, p1 = t;
      for (int k = 2; k <= n; ++k)
      {
        const double p2 = ((2.0 * k - 1.0) * t * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (t * p1 - p0) / (t * t - 1.0);
      const double dt = p1 / dp;
      t -= dt;
      if (std::abs(dt) < 1e-16)
        break;
    }
    x[i] = a + 0.5 * (b - a) * (1.0 - t);
    w[i] = (b - a) / ((1.0 - t * t) * dp * dp);
  }
}

/// int_0^1 expm(s A) ds by 32-point Gauss-Legendre.
inline Eigen::MatrixXd integral_expm(const Eigen::MatrixXd& a)
{
  std::vector<double> x, w;
  gauss_legendre(32, 0.0, 1.0, x, w);
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(a.rows(), a.cols());
  for (std::size_t k = 0; k < x.size(); ++k)
    acc += w[k] * Eigen::MatrixXd((x[k] * a).exp());
  return acc;
}

/// Left Jacobian of SO(3) from its integral definition.
inline Eigen::Matrix3d so3_left_jacobian(const Eigen::Vector3d& phi) { return integral_expm(skew(phi)); }

/// Left Jacobian of SE(3) from its integral definition.
inline Eigen::Matrix<double, 6, 6> se3_left_jacobian(const Eigen::Vector3d& rho, const Eigen::Vector3d& phi)
{
  return integral_expm(ad_se3(rho, phi));
}

/// Coupling block Q as the top-right block of the SE(3) left Jacobian.
inline Eigen::Matrix3d q_block(const Eigen::Vector3d& rho, const Eigen::Vector3d& phi)
{
  return se3_left_jacobian(rho, phi).topRightCorner<3, 3>();
}

/// Adaptive Simpson quadrature.
inline double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double tol, int depth = 40)
{
  std::function<double(double, double, double, double, double, double, int)> rec =
      [&](double a0, double b0, double fa, double fm, double fb, double whole, int d) {
        const double m = 0.5 * (a0 + b0);
        const double lm = 0.5 * (a0 + m), rm = 0.5 * (m + b0);
        const double flm = f(lm), frm = f(rm);
        const double left = (m - a0) / 6.0 * (fa + 4.0 * flm + fm);
        const double right = (b0 - m) / 6.0 * (fm + 4.0 * frm + fb);
        if (d <= 0 || std::abs(left + right - whole) <= 15.0 * tol)
          return left + right + (left + right - whole) / 15.0;
        return rec(a0, m, fa, flm, fm, left, d - 1) + rec(m, b0, fm, frm, fb, right, d - 1);
      };
  const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
  return rec(a, b, fa, fm, fb, (b - a) / 6.0 * (fa + 4.0 * fm + fb), depth);
}

/// Two-sided KS statistic of a sample against a CDF.
inline double ks_statistic(std::vector<double> v, const std::function<double(double)>& cdf)
{
  std::sort(v.begin(), v.end());
  const double n = static_cast<double>(v.size());
  double d = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i)
  {
    const double f = cdf(v[i]);
    d = std::max({d, f - i / n, (i + 1) / n - f});
  }
  return d;
}

inline double normal_cdf(double x, double sigma) { return 0.5 * std::erfc(-x / (sigma * std::sqrt(2.0))); }

/// CDF of the Haar-uniform rotation angle: (phi - sin phi) / pi.
inline double uniform_angle_cdf(double phi) { return (phi - std::sin(phi)) / M_PI; }

/// Mean of the chi distribution with k degrees of freedom, scaled by sigma.
inline double chi_mean(int k, double sigma)
{
  return sigma * std::sqrt(2.0) * std::exp(std::lgamma((k + 1) / 2.0) - std::lgamma(k / 2.0));
}

/// Relative error with a floor on the denominator.
inline double rel_err(double a, double b, double floor = 1e-8)
{
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

}  // namespace oracle
