#include "liediff/verify.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include <nlohmann/json.hpp>
#include <unsupported/Eigen/MatrixFunctions>

#include "liediff/distributions.hpp"
#include "liediff/rng.hpp"
#include "liediff/scores.hpp"

namespace liediff
{

namespace
{

constexpr int kCases = 1000;
constexpr int kScoreCases = 200;

Vec3 random_vec(Rng& rng, double lo, double hi)
{
  Vec3 d = rng.normal3();
  return d.normalized() * rng.uniform(lo, hi);
}

Tangent random_tangent(Rng& rng, ParamMode mode, double max_angle, double max_rho = 2.0)
{
  const Vec3 phi = random_vec(rng, 0.0, max_angle);
  if (mode == ParamMode::SO3)
    return phi;
  Tangent t(6);
  t << random_vec(rng, 0.0, max_rho), phi;
  return t;
}

RigidTransform random_pose(Rng& rng, ParamMode mode)
{
  RigidTransform x{rng.uniform_rotation(), Vec3::Zero()};
  if (mode != ParamMode::SO3)
    x.trans = random_vec(rng, 0.0, 2.0);
  return x;
}

double pose_error(const RigidTransform& a, const RigidTransform& b)
{
  return angle_between(a.rot, b.rot) + (a.trans - b.trans).norm();
}

// Gauss-Legendre nodes and weights on [0, 1].
std::pair<std::vector<double>, std::vector<double>> gauss_legendre(int n)
{
  std::vector<double> x(n), w(n);
  for (int i = 0; i < n; ++i)
  {
    double t = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
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
    x[i] = 0.5 * (1.0 - t);
    w[i] = 1.0 / ((1.0 - t * t) * dp * dp);
  }
  return {x, w};
}

// Integral over s in [0, 1] of expm(s * A).
Eigen::MatrixXd integral_expm(const Eigen::MatrixXd& a)
{
  static const auto gl = gauss_legendre(24);
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(a.rows(), a.cols());
  for (std::size_t k = 0; k < gl.first.size(); ++k)
    acc += gl.second[k] * Eigen::MatrixXd((gl.first[k] * a).exp());
  return acc;
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double ks_normal(std::vector<double> v, double sigma)
{
  std::sort(v.begin(), v.end());
  const double n = static_cast<double>(v.size());
  double d = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i)
  {
    const double f = normal_cdf(v[i] / sigma);
    d = std::max({d, f - i / n, (i + 1) / n - f});
  }
  return d;
}

double simpson(const std::function<double(double)>& f, double a, double b, int intervals)
{
  const double h = (b - a) / intervals;
  double s = f(a) + f(b);
  for (int i = 1; i < intervals; ++i)
    s += (i % 2 ? 4.0 : 2.0) * f(a + i * h);
  return s * h / 3.0;
}

class Suite
{
public:
  Suite(std::uint64_t seed, const VerifyFaults& faults) : seed_(seed), faults_(faults) {}

  Mat3 left(const Vec3& phi) const
  {
    return so3_jacobian(phi, faults_.so3_left_is_right ? JacobianKind::Right : JacobianKind::Left);
  }
  Mat3 left_inv(const Vec3& phi) const
  {
    return so3_jacobian(phi, faults_.so3_left_is_right ? JacobianKind::RightInv : JacobianKind::LeftInv);
  }

  // Fresh stream per property so rows do not depend on each other's draws.
  Rng stream(int k) const { return Rng(seed_ * 1000003ULL + static_cast<std::uint64_t>(k)); }

  void add(VerifyReport& r, std::string name, double value, double threshold, bool lower_bound = false) const
  {
    const bool pass = std::isfinite(value) && (lower_bound ? value > threshold : value < threshold);
    r.rows.push_back({std::move(name), value, threshold, lower_bound, pass});
  }

  double eigenvector(ParamMode mode, Rng rng) const
  {
    double err = 0.0;
    for (int n = 0; n < kCases; ++n)
    {
      const Tangent z = random_tangent(rng, mode, 3.0);
      Eigen::MatrixXd jl, jr;
      if (mode == ParamMode::SO3)
      {
        jl = left(z);
        jr = so3_jacobian(z, JacobianKind::Right);
      }
      else
      {
        jl = group_jacobian(z, mode, JacobianKind::Left);
        jr = group_jacobian(z, mode, JacobianKind::Right);
      }
      err = std::max({err, (jl * z - z).norm(), (jr * z - z).norm()});
    }
    return err;
  }

  double transpose_relation(Rng rng) const
  {
    double err = 0.0;
    for (int n = 0; n < kCases; ++n)
    {
      const Vec3 z = random_vec(rng, 0.0, 3.0);
      const Mat3 jr = so3_jacobian(z, JacobianKind::Right);
      const Mat3 jr_inv = so3_jacobian(z, JacobianKind::RightInv);
      err = std::max({err, (left(z) - jr.transpose()).cwiseAbs().maxCoeff(),
                      (left_inv(z) - jr_inv.transpose()).cwiseAbs().maxCoeff()});
    }
    return err;
  }

  double se3_violation(Rng rng) const
  {
    double gap = std::numeric_limits<double>::infinity();
    for (int n = 0; n < kCases; ++n)
    {
      Vec6 z;
      z << random_vec(rng, 0.1, 2.0), random_vec(rng, 0.1, 2.0);
      const Mat6 a = se3_jacobian_inv(z, Se3InvKind::RightInvTranspose);
      const Mat6 b = se3_jacobian_inv(z, Se3InvKind::LeftInv);
      gap = std::min(gap, (a - b).norm());
    }
    return gap;
  }

  double q_reflection(Rng rng) const
  {
    double err = 0.0;
    for (int n = 0; n < kCases; ++n)
    {
      const Vec3 rho = random_vec(rng, 0.0, 2.0);
      const Vec3 phi = random_vec(rng, 0.0, 3.0);
      err = std::max(err, (se3_q_matrix(-rho, -phi).transpose() - se3_q_matrix(rho, phi)).cwiseAbs().maxCoeff());
    }
    return err;
  }

  double roundtrip(ParamMode mode, Rng rng) const
  {
    double err = 0.0;
    for (int n = 0; n < kCases; ++n)
    {
      const Tangent z = random_tangent(rng, mode, M_PI - 1e-3);
      const Tangent back = group_log(group_exp(z, mode), mode);
      err = std::max(err, (back - z).cwiseAbs().maxCoeff());
      const RigidTransform x = group_exp(z, mode);
      err = std::max(err, pose_error(group_exp(group_log(x, mode), mode), x));
    }
    return err;
  }

  double jacobian_inverse(Rng rng) const
  {
    double err = 0.0;
    for (int n = 0; n < kCases; ++n)
    {
      const Vec3 z = random_vec(rng, 1e-6, 3.0);
      err = std::max(err, (left(z) * left_inv(z) - Mat3::Identity()).cwiseAbs().maxCoeff());
      Vec6 t;
      t << random_vec(rng, 0.0, 2.0), z;
      err = std::max(err, (se3_jacobian(t, JacobianKind::Left) * se3_jacobian_inv(t, Se3InvKind::LeftInv) -
                           Mat6::Identity()).cwiseAbs().maxCoeff());
    }
    return err;
  }

  double group_axioms(Rng rng) const
  {
    double err = 0.0;
    for (ParamMode mode : {ParamMode::SO3, ParamMode::R3SO3, ParamMode::SE3})
      for (int n = 0; n < kCases; ++n)
      {
        const RigidTransform a = random_pose(rng, mode), b = random_pose(rng, mode), c = random_pose(rng, mode);
        err = std::max(err, pose_error(compose(compose(a, b, mode), c, mode), compose(a, compose(b, c, mode), mode)));
        err = std::max(err, pose_error(compose(a, RigidTransform::identity(), mode), a));
        err = std::max(err, pose_error(compose(a, inverse(a, mode), mode), RigidTransform::identity()));
      }
    return err;
  }

  double quadrature(Rng rng) const
  {
    double err = 0.0;
    for (int n = 0; n < 50; ++n)
    {
      const Vec3 phi = random_vec(rng, 0.0, 3.0);
      const Vec3 rho = random_vec(rng, 0.0, 2.0);
      err = std::max(err, (left(phi) - integral_expm(hat(phi))).cwiseAbs().maxCoeff());
      Eigen::MatrixXd ad = Eigen::MatrixXd::Zero(6, 6);
      ad.topLeftCorner(3, 3) = hat(phi);
      ad.topRightCorner(3, 3) = hat(rho);
      ad.bottomRightCorner(3, 3) = hat(phi);
      Vec6 t;
      t << rho, phi;
      err = std::max(err, (Eigen::MatrixXd(se3_jacobian(t, JacobianKind::Left)) - integral_expm(ad)).cwiseAbs().maxCoeff());
    }
    return err;
  }

  double score_simplified_equiv(Rng rng) const
  {
    double err = 0.0;
    for (ParamMode mode : {ParamMode::SO3, ParamMode::R3SO3})
      for (int n = 0; n < kCases; ++n)
      {
        const RigidTransform x = random_pose(rng, mode);
        const Tangent z = random_tangent(rng, mode, 3.0);
        const double sigma = rng.uniform(0.05, 1.0);
        const RigidTransform y = compose(x, group_exp(z, mode), mode);
        const Tangent z_eff = group_log(compose(inverse(x, mode), y, mode), mode);
        err = std::max(err, (score_closed(y, x, sigma, mode) - score_simplified(z_eff, sigma, mode)).cwiseAbs().maxCoeff() * sigma * sigma);
      }
    return err;
  }

  double score_true_equiv(Rng rng) const
  {
    double err = 0.0;
    const ParamMode mode = ParamMode::SE3;
    for (int n = 0; n < kCases; ++n)
    {
      const RigidTransform x = random_pose(rng, mode);
      const Tangent z = random_tangent(rng, mode, 3.0);
      const double sigma = rng.uniform(0.05, 1.0);
      const RigidTransform y = compose(x, group_exp(z, mode), mode);
      const Tangent z_eff = group_log(compose(inverse(x, mode), y, mode), mode);
      err = std::max(err, (score_closed(y, x, sigma, mode) - score_true_se3(z_eff, sigma)).cwiseAbs().maxCoeff() * sigma * sigma);
    }
    return err;
  }

  double score_numerical_oracle(Rng rng) const
  {
    double err = 0.0;
    for (ParamMode mode : {ParamMode::SO3, ParamMode::R3SO3, ParamMode::SE3})
      for (int n = 0; n < kScoreCases; ++n)
      {
        const RigidTransform x = random_pose(rng, mode);
        const Tangent z = random_tangent(rng, mode, 2.5);
        const double sigma = rng.uniform(0.2, 1.0);
        const RigidTransform y = compose(x, group_exp(z, mode), mode);
        const ScoreVector a = score_closed(y, x, sigma, mode);
        const ScoreVector b = score_numerical(y, x, sigma, mode);
        err = std::max(err, (a - b).norm() / std::max(a.norm(), 1e-12));
      }
    return err;
  }

  static double igso3_normalization()
  {
    double err = 0.0;
    for (double eps : {0.05, 0.5})
    {
      const double total = simpson(
          [eps](double phi) {
            if (phi <= 0.0 || phi >= M_PI)
              return 0.0;
            return igso3_density(phi, eps, Igso3Method::TruncatedSeries) * (1.0 - std::cos(phi)) / M_PI;
          },
          0.0, M_PI, 20000);
      err = std::max(err, std::abs(total - 1.0));
    }
    return err;
  }

  static double igso3_methods()
  {
    double err = 0.0;
    for (double phi = 0.05; phi <= 3.0 + 1e-12; phi += 0.01)
    {
      const double s = igso3_density(phi, 0.5, Igso3Method::TruncatedSeries);
      const double a = igso3_density(phi, 0.5, Igso3Method::ClosedApprox);
      err = std::max(err, std::abs(s - a) / s);
    }
    return err;
  }

  static double concentrated_ks(Rng rng)
  {
    const double sigma = 0.3;
    const int draws = 100000;
    const ParamMode mode = ParamMode::SE3;
    const RigidTransform x = random_pose(rng, mode);
    const RigidTransform x_inv = inverse(x, mode);
    std::vector<std::vector<double>> axes(6, std::vector<double>(draws));
    for (int n = 0; n < draws; ++n)
    {
      const PerturbedSample s = concentrated_sample(x, sigma, mode, rng);
      const Tangent z = group_log(compose(x_inv, s.pose, mode), mode);
      for (int k = 0; k < 6; ++k)
        axes[k][n] = z[k];
    }
    double d = 0.0;
    for (auto& a : axes)
      d = std::max(d, ks_normal(std::move(a), sigma));
    return d;
  }

private:
  std::uint64_t seed_;
  VerifyFaults faults_;
};

}  // namespace

std::size_t VerifyReport::failures() const
{
  return static_cast<std::size_t>(std::count_if(rows.begin(), rows.end(), [](const VerifyRow& r) { return !r.pass; }));
}

VerifyReport verify_suite(std::uint64_t seed, const VerifyFaults& faults)
{
  const Suite s(seed, faults);
  VerifyReport r;
  s.add(r, "eigenvector_so3", s.eigenvector(ParamMode::SO3, s.stream(1)), 1e-9);
  s.add(r, "eigenvector_r3so3", s.eigenvector(ParamMode::R3SO3, s.stream(2)), 1e-9);
  s.add(r, "eigenvector_se3", s.eigenvector(ParamMode::SE3, s.stream(3)), 1e-9);
  s.add(r, "so3_transpose_relation", s.transpose_relation(s.stream(4)), 1e-10);
  s.add(r, "se3_transpose_violation", s.se3_violation(s.stream(5)), 1e-6, true);
  s.add(r, "q_matrix_reflection", s.q_reflection(s.stream(6)), 1e-10);
  s.add(r, "roundtrip_so3", s.roundtrip(ParamMode::SO3, s.stream(7)), 1e-9);
  s.add(r, "roundtrip_r3so3", s.roundtrip(ParamMode::R3SO3, s.stream(8)), 1e-9);
  s.add(r, "roundtrip_se3", s.roundtrip(ParamMode::SE3, s.stream(9)), 1e-9);
  s.add(r, "jacobian_inverse", s.jacobian_inverse(s.stream(10)), 1e-9);
  s.add(r, "group_axioms", s.group_axioms(s.stream(11)), 1e-10);
  s.add(r, "jacobian_quadrature", s.quadrature(s.stream(12)), 1e-6);
  s.add(r, "score_simplified_equiv", s.score_simplified_equiv(s.stream(13)), 1e-10);
  s.add(r, "score_true_se3_equiv", s.score_true_equiv(s.stream(14)), 1e-10);
  s.add(r, "score_numerical_oracle", s.score_numerical_oracle(s.stream(15)), 1e-4);
  s.add(r, "igso3_normalization", Suite::igso3_normalization(), 1e-3);
  s.add(r, "igso3_series_vs_approx", Suite::igso3_methods(), 1e-2);
  s.add(r, "concentrated_gaussian_ks", Suite::concentrated_ks(s.stream(18)), 0.02);
  return r;
}

void write_verify_report(std::ostream& out, const VerifyReport& report)
{
  for (const VerifyRow& row : report.rows)
  {
    nlohmann::json j = {{"property", row.property},
                        {"value", row.value},
                        {"threshold", row.threshold},
                        {"requires", row.lower_bound ? "greater" : "less"},
                        {"pass", row.pass}};
    out << j.dump() << '\n';
  }
}

}  // namespace liediff
