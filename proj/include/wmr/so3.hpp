#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace wmr {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

namespace so3 {

/// Below this rotation angle the closed forms are replaced by their Taylor series.
inline constexpr double kSmallAngle = 1e-6;
/// Within this distance of pi, so3_log recovers the axis from the columns of R + I.
inline constexpr double kNearPi = 1e-7;

Mat3 hat(const Vec3& v);

/// (M32 - M23, M13 - M31, M21 - M12). Equals 2v when M = hat(v).
Vec3 vee_antisym(const Mat3& m);

/// Rodrigues formula.
Mat3 exp(const Vec3& v);

/// Canonical rotation vector with norm in [0, pi].
Vec3 log(const Mat3& r);

/// Left Jacobian of exp: exp(v + d) ~= exp(J_l(v) d) exp(v).
Mat3 left_jacobian(const Vec3& v);
Mat3 left_jacobian_inverse(const Vec3& v);

bool is_rotation(const Mat3& r, double tol = 1e-9);

/// Nearest rotation in Frobenius norm (SVD polar factor).
Mat3 project(const Mat3& m);

}  // namespace so3
}  // namespace wmr
