#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

#include <Eigen/Dense>
#include <Eigen/Geometry>

namespace liediff
{

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat6 = Eigen::Matrix<double, 6, 6>;

/// Tangent-space coordinates. Three entries (phi) for SO3, six entries
/// ordered (rho, phi) for R3SO3 and SE3.
using Tangent = Eigen::VectorXd;

/// Raised when an inverse Jacobian is requested at or beyond the cut locus.
class SingularityError : public std::domain_error
{
public:
  using std::domain_error::domain_error;
};

/// Group parametrization. One RigidTransform value serves R3SO3 and SE3;
/// the mode decides which exp/log/compose rule applies.
enum class ParamMode
{
  SO3,
  R3SO3,
  SE3
};

std::string_view to_string(ParamMode mode);
ParamMode parse_mode(std::string_view text);
int tangent_dim(ParamMode mode);

/// Unit quaternion rotation with canonical sign (w >= 0; if w == 0 the
/// first nonzero of x, y, z is positive).
class Rotation
{
public:
  Rotation() = default;

  static Rotation from_quaternion(double w, double x, double y, double z);
  static Rotation from_matrix(const Mat3& m);
  static Rotation about_axis(const Vec3& axis, double angle);

  double w() const { return q_.w(); }
  double x() const { return q_.x(); }
  double y() const { return q_.y(); }
  double z() const { return q_.z(); }
  Eigen::Vector4d coeffs_wxyz() const { return {q_.w(), q_.x(), q_.y(), q_.z()}; }
  const Eigen::Quaterniond& quaternion() const { return q_; }

  Mat3 matrix() const { return q_.toRotationMatrix(); }
  Rotation inverse() const;

  Rotation operator*(const Rotation& other) const;
  Vec3 operator*(const Vec3& v) const { return q_ * v; }

private:
  explicit Rotation(const Eigen::Quaterniond& q);

  Eigen::Quaterniond q_ = Eigen::Quaterniond::Identity();
};

/// Geodesic angle in radians between two rotations, in [0, pi].
double angle_between(const Rotation& a, const Rotation& b);

struct RigidTransform
{
  Rotation rot;
  Vec3 trans = Vec3::Zero();

  static RigidTransform identity() { return {}; }
};

Mat3 hat(const Vec3& v);

Rotation so3_exp(const Vec3& phi);
Vec3 so3_log(const Rotation& r);

RigidTransform group_exp(const Tangent& tau, ParamMode mode);
Tangent group_log(const RigidTransform& x, ParamMode mode);

/// x * y under the mode's composition rule.
RigidTransform compose(const RigidTransform& x, const RigidTransform& y, ParamMode mode);
RigidTransform inverse(const RigidTransform& x, ParamMode mode);

enum class JacobianKind
{
  Left,
  Right,
  LeftInv,
  RightInv
};

/// Closed-form SO(3) Jacobians. Inverse kinds refuse |phi| >= pi - 1e-6.
Mat3 so3_jacobian(const Vec3& phi, JacobianKind kind);

/// Translation/rotation coupling block of the SE(3) left Jacobian.
Mat3 se3_q_matrix(const Vec3& rho, const Vec3& phi);

/// SE(3) Jacobians in (rho, phi) ordering.
Mat6 se3_jacobian(const Vec6& tau, JacobianKind kind);

enum class Se3InvKind
{
  LeftInv,
  RightInvTranspose
};

/// left_inv:            [[Jl^-1(phi), Z], [0, Jl^-1(phi)]]
/// right_inv_transpose: [[Jl^-1(phi), 0], [Z, Jl^-1(phi)]]
/// with Z = -Jl^-1(phi) Q(rho, phi) Jl^-1(phi).
Mat6 se3_jacobian_inv(const Vec6& tau, Se3InvKind kind);

/// Jacobian of the given kind for any mode; 3x3 for SO3, 6x6 otherwise.
Eigen::MatrixXd group_jacobian(const Tangent& tau, ParamMode mode, JacobianKind kind);

namespace detail
{
/// Jl^-1(phi) without the cut-locus guard; finite for |phi| < 2 pi.
Mat3 left_jacobian_inv_unchecked(const Vec3& phi);
}  // namespace detail

}  // namespace liediff
