#pragma once

#include "liediff/lie.hpp"

namespace liediff
{

/// Stein score in tangent coordinates at the evaluation point.
using ScoreVector = Eigen::VectorXd;

/// -(1/sigma^2) Jr^-T(z) z with z = Log(x^-1 y), using the mode's Jacobian.
ScoreVector score_closed(const RigidTransform& y, const RigidTransform& x, double sigma, ParamMode mode);

/// -z / sigma^2. Only valid where Jl = Jr^T (SO3 and R3SO3).
ScoreVector score_simplified(const Tangent& z, double sigma, ParamMode mode);

/// -z / sigma^2 for any mode; the SE(3) training target that skips Jacobians.
ScoreVector score_surrogate(const Tangent& z, double sigma);

/// -(1/sigma^2) [[Jl^-1(phi), 0], [Z(rho, phi), Jl^-1(phi)]] z.
ScoreVector score_true_se3(const Tangent& z, double sigma);

constexpr double kDefaultScoreStep = 1e-5;

/// Central differences of concentrated_logprob along y Exp(+-h e_i).
ScoreVector score_numerical(const RigidTransform& y, const RigidTransform& x, double sigma, ParamMode mode,
                            double h = kDefaultScoreStep);

}  // namespace liediff
