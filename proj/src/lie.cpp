#include "liediff/lie.hpp"

#include <cmath>

namespace liediff
{

namespace
{

constexpr double kSmallAngle = 1e-4;
// Q coefficients cancel to O(theta^5); below this they use series.
constexpr double kSmallAngleQ = 1e-2;
constexpr double kCutMargin = 1e-6;

Eigen::Quaterniond canonical(Eigen::Quaterniond q)
{
  q.normalize();
  bool flip = q.w() < 0.0;
  if (q.w() == 0.0)
  {
    if (q.x() != 0.0)
      flip = q.x() < 0.0;
    else if (q.y() != 0.0)
      flip = q.y() < 0.0;
    else
      flip = q.z() < 0.0;
  }
  if (flip)
    q.coeffs() = -q.coeffs();
  return q;
}

void require_finite(const Eigen::Ref<const Eigen::VectorXd>& v, const char* what)
{
  if (!v.allFinite())
    throw std::invalid_argument(std::string(what) + ": non-finite input");
}

void require_dim(const Tangent& tau, ParamMode mode)
{
  if (tau.size() != tangent_dim(mode))
    throw std::invalid_argument("tangent dimension " + std::to_string(tau.size()) +
                                " does not match mode " + std::string(to_string(mode)));
}

// Coefficients of I + a K + b K^2 (left Jacobian).
struct JacCoeffs
{
  double a;
  double b;
};

JacCoeffs jacobian_coeffs(double theta)
{
  if (theta < kSmallAngle)
  {
    const double t2 = theta * theta;
    return {0.5 - t2 / 24.0 + t2 * t2 / 720.0, 1.0 / 6.0 - t2 / 120.0 + t2 * t2 / 5040.0};
  }
  const double s = std::sin(0.5 * theta);
  const double t2 = theta * theta;
  return {2.0 * s * s / t2, (theta - std::sin(theta)) / (t2 * theta)};
}

// Coefficient c of I -/+ K/2 + c K^2 (inverse Jacobians).
double inverse_coeff(double theta)
{
  if (theta < kSmallAngle)
  {
    const double t2 = theta * theta;
    return 1.0 / 12.0 + t2 / 720.0 + t2 * t2 / 30240.0;
  }
  const double half = 0.5 * theta;
  return 1.0 / (theta * theta) - std::cos(half) / (2.0 * theta * std::sin(half));
}

void require_inside_cut(double theta)
{
  if (!(theta < M_PI - kCutMargin))
    throw SingularityError("inverse Jacobian requested at rotation angle " + std::to_string(theta) +
                           " (limit pi - 1e-6)");
}

Vec3 rho_of(const Vec6& tau) { return tau.head<3>(); }
Vec3 phi_of(const Vec6& tau) { return tau.tail<3>(); }

}  // namespace

std::string_view to_string(ParamMode mode)
{
  switch (mode)
  {
    case ParamMode::SO3:
      return "SO3";
    case ParamMode::R3SO3:
      return "R3SO3";
    case ParamMode::SE3:
      return "SE3";
  }
  return "?";
}

ParamMode parse_mode(std::string_view text)
{
  if (text == "SO3" || text == "so3")
    return ParamMode::SO3;
  if (text == "R3SO3" || text == "r3so3")
    return ParamMode::R3SO3;
  if (text == "SE3" || text == "se3")
    return ParamMode::SE3;
  throw std::invalid_argument("unknown parametrization mode '" + std::string(text) + "'");
}

int tangent_dim(ParamMode mode) { return mode == ParamMode::SO3 ? 3 : 6; }

// --- Rotation -------------------------------------------------------------

Rotation::Rotation(const Eigen::Quaterniond& q) : q_(canonical(q)) {}

Rotation Rotation::from_quaternion(double w, double x, double y, double z)
{
  const Eigen::Vector4d v(w, x, y, z);
  require_finite(v, "Rotation::from_quaternion");
  if (v.norm() == 0.0)
    throw std::invalid_argument("Rotation::from_quaternion: zero quaternion");
  return Rotation(Eigen::Quaterniond(w, x, y, z));
}

Rotation Rotation::from_matrix(const Mat3& m)
{
  require_finite(m.reshaped(), "Rotation::from_matrix");
  // Eigen picks the largest of (trace, diagonal) before dividing, which is
  // the branch that stays well conditioned at angle pi.
  return Rotation(Eigen::Quaterniond(m));
}

Rotation Rotation::about_axis(const Vec3& axis, double angle)
{
  require_finite(axis, "Rotation::about_axis");
  const double n = axis.norm();
  if (n == 0.0)
    throw std::invalid_argument("Rotation::about_axis: zero axis");
  return so3_exp(axis / n * angle);
}

Rotation Rotation::inverse() const { return Rotation(q_.conjugate()); }

Rotation Rotation::operator*(const Rotation& other) const { return Rotation(q_ * other.q_); }

double angle_between(const Rotation& a, const Rotation& b)
{
  const Eigen::Quaterniond d = a.quaternion().conjugate() * b.quaternion();
  return 2.0 * std::atan2(d.vec().norm(), std::abs(d.w()));
}

// --- SO(3) ---------------------------------------------------------------

Mat3 hat(const Vec3& v)
{
  Mat3 m;
  m << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
       -v.y(), v.x(), 0.0;
  return m;
}

Rotation so3_exp(const Vec3& phi)
{
  require_finite(phi, "so3_exp");
  const double theta = phi.norm();
  const double half = 0.5 * theta;
  double k;
  if (theta < kSmallAngle)
  {
    const double t2 = theta * theta;
    k = 0.5 - t2 / 48.0 + t2 * t2 / 3840.0;
  }
  else
  {
    k = std::sin(half) / theta;
  }
  const Vec3 v = k * phi;
  return Rotation::from_quaternion(std::cos(half), v.x(), v.y(), v.z());
}

Vec3 so3_log(const Rotation& r)
{
  const double w = r.w();
  const Vec3 v(r.x(), r.y(), r.z());
  const double n = v.norm();
  double k;
  if (n < 1e-8)
  {
    // 2 atan(n / w) / n to third order; w is ~1 here.
    const double ratio2 = (n / w) * (n / w);
    k = 2.0 / w * (1.0 - ratio2 / 3.0);
  }
  else
  {
    k = 2.0 * std::atan2(n, w) / n;
  }
  return k * v;
}

Mat3 so3_jacobian(const Vec3& phi, JacobianKind kind)
{
  require_finite(phi, "so3_jacobian");
  const double theta = phi.norm();
  const Mat3 K = hat(phi);
  const Mat3 K2 = K * K;
  switch (kind)
  {
    case JacobianKind::Left:
    {
      const auto c = jacobian_coeffs(theta);
      return Mat3::Identity() + c.a * K + c.b * K2;
    }
    case JacobianKind::Right:
    {
      const auto c = jacobian_coeffs(theta);
      return Mat3::Identity() - c.a * K + c.b * K2;
    }
    case JacobianKind::LeftInv:
      require_inside_cut(theta);
      return Mat3::Identity() - 0.5 * K + inverse_coeff(theta) * K2;
    case JacobianKind::RightInv:
      require_inside_cut(theta);
      return Mat3::Identity() + 0.5 * K + inverse_coeff(theta) * K2;
  }
  throw std::invalid_argument("so3_jacobian: bad kind");
}

namespace detail
{
Mat3 left_jacobian_inv_unchecked(const Vec3& phi)
{
  const double theta = phi.norm();
  const Mat3 K = hat(phi);
  return Mat3::Identity() - 0.5 * K + inverse_coeff(theta) * K * K;
}
}  // namespace detail

// --- SE(3) ---------------------------------------------------------------

Mat3 se3_q_matrix(const Vec3& rho, const Vec3& phi)
{
  require_finite(rho, "se3_q_matrix");
  require_finite(phi, "se3_q_matrix");
  const double theta = phi.norm();
  const double t2 = theta * theta;
  double c1, c2, c3;
  if (theta < kSmallAngleQ)
  {
    const double t4 = t2 * t2;
    c1 = 1.0 / 6.0 - t2 / 120.0 + t4 / 5040.0;
    c2 = 1.0 / 24.0 - t2 / 720.0 + t4 / 40320.0;
    c3 = 1.0 / 120.0 - t2 / 2520.0 + t4 / 120960.0;
  }
  else
  {
    const double s = std::sin(theta);
    const double c = std::cos(theta);
    c1 = (theta - s) / (t2 * theta);
    c2 = (t2 + 2.0 * c - 2.0) / (2.0 * t2 * t2);
    c3 = (2.0 * theta - 3.0 * s + theta * c) / (2.0 * t2 * t2 * theta);
  }
  const Mat3 P = hat(phi);
  const Mat3 R = hat(rho);
  const Mat3 PR = P * R;
  const Mat3 RP = R * P;
  const Mat3 PRP = PR * P;
  const Mat3 PP = P * P;
  return 0.5 * R + c1 * (PR + RP + PRP) + c2 * (PP * R + R * PP - 3.0 * PRP) +
         c3 * (PRP * P + PP * RP);
}

Mat6 se3_jacobian(const Vec6& tau, JacobianKind kind)
{
  require_finite(tau, "se3_jacobian");
  switch (kind)
  {
    case JacobianKind::Left:
    {
      Mat6 J = Mat6::Zero();
      const Mat3 Jl = so3_jacobian(phi_of(tau), JacobianKind::Left);
      J.topLeftCorner<3, 3>() = Jl;
      J.bottomRightCorner<3, 3>() = Jl;
      J.topRightCorner<3, 3>() = se3_q_matrix(rho_of(tau), phi_of(tau));
      return J;
    }
    case JacobianKind::Right:
      return se3_jacobian(-tau, JacobianKind::Left);
    case JacobianKind::LeftInv:
      return se3_jacobian_inv(tau, Se3InvKind::LeftInv);
    case JacobianKind::RightInv:
      return se3_jacobian_inv(-tau, Se3InvKind::LeftInv);
  }
  throw std::invalid_argument("se3_jacobian: bad kind");
}

Mat6 se3_jacobian_inv(const Vec6& tau, Se3InvKind kind)
{
  require_finite(tau, "se3_jacobian_inv");
  const Vec3 rho = rho_of(tau);
  const Vec3 phi = phi_of(tau);
  const Mat3 Jinv = so3_jacobian(phi, JacobianKind::LeftInv);
  const Mat3 Z = -Jinv * se3_q_matrix(rho, phi) * Jinv;
  Mat6 J = Mat6::Zero();
  J.topLeftCorner<3, 3>() = Jinv;
  J.bottomRightCorner<3, 3>() = Jinv;
  if (kind == Se3InvKind::LeftInv)
    J.topRightCorner<3, 3>() = Z;
  else
    J.bottomLeftCorner<3, 3>() = Z;
  return J;
}

Eigen::MatrixXd group_jacobian(const Tangent& tau, ParamMode mode, JacobianKind kind)
{
  require_dim(tau, mode);
  switch (mode)
  {
    case ParamMode::SO3:
      return so3_jacobian(tau.head<3>(), kind);
    case ParamMode::R3SO3:
    {
      Eigen::MatrixXd J = Eigen::MatrixXd::Identity(6, 6);
      J.bottomRightCorner<3, 3>() = so3_jacobian(tau.tail<3>(), kind);
      return J;
    }
    case ParamMode::SE3:
      return se3_jacobian(tau.head<6>(), kind);
  }
  throw std::invalid_argument("group_jacobian: bad mode");
}

// --- group maps -----------------------------------------------------------

RigidTransform group_exp(const Tangent& tau, ParamMode mode)
{
  require_dim(tau, mode);
  require_finite(tau, "group_exp");
  RigidTransform out;
  switch (mode)
  {
    case ParamMode::SO3:
      out.rot = so3_exp(tau.head<3>());
      break;
    case ParamMode::R3SO3:
      out.rot = so3_exp(tau.tail<3>());
      out.trans = tau.head<3>();
      break;
    case ParamMode::SE3:
    {
      const Vec3 phi = tau.tail<3>();
      out.rot = so3_exp(phi);
      out.trans = so3_jacobian(phi, JacobianKind::Left) * tau.head<3>();
      break;
    }
  }
  return out;
}

Tangent group_log(const RigidTransform& x, ParamMode mode)
{
  require_finite(x.trans, "group_log");
  const Vec3 phi = so3_log(x.rot);
  if (mode == ParamMode::SO3)
    return phi;
  Tangent tau(6);
  tau.tail<3>() = phi;
  if (mode == ParamMode::R3SO3)
    tau.head<3>() = x.trans;
  else
    tau.head<3>() = detail::left_jacobian_inv_unchecked(phi) * x.trans;
  return tau;
}

RigidTransform compose(const RigidTransform& x, const RigidTransform& y, ParamMode mode)
{
  RigidTransform out;
  out.rot = x.rot * y.rot;
  switch (mode)
  {
    case ParamMode::SO3:
      break;
    case ParamMode::R3SO3:
      out.trans = x.trans + y.trans;
      break;
    case ParamMode::SE3:
      out.trans = x.trans + x.rot * y.trans;
      break;
  }
  return out;
}

RigidTransform inverse(const RigidTransform& x, ParamMode mode)
{
  RigidTransform out;
  out.rot = x.rot.inverse();
  switch (mode)
  {
    case ParamMode::SO3:
      break;
    case ParamMode::R3SO3:
      out.trans = -x.trans;
      break;
    case ParamMode::SE3:
      out.trans = -(out.rot * x.trans);
      break;
  }
  return out;
}

}  // namespace liediff
