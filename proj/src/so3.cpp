#include "wmr/so3.hpp"

#include <cmath>
#include <numbers>

#include <Eigen/SVD>

namespace wmr::so3 {

Mat3 hat(const Vec3& v) {
  Mat3 m;
  m << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
       -v.y(), v.x(), 0.0;
  return m;
}

Vec3 vee_antisym(const Mat3& m) {
  return {m(2, 1) - m(1, 2), m(0, 2) - m(2, 0), m(1, 0) - m(0, 1)};
}

Mat3 exp(const Vec3& v) {
  const double theta2 = v.squaredNorm();
  const double theta = std::sqrt(theta2);
  const Mat3 k = hat(v);
  double a, b;
  if (theta < kSmallAngle) {
    a = 1.0 - theta2 / 6.0;
    b = 0.5 - theta2 / 24.0;
  } else {
    a = std::sin(theta) / theta;
    b = (1.0 - std::cos(theta)) / theta2;
  }
  return Mat3::Identity() + a * k + b * k * k;
}

Vec3 log(const Mat3& r) {
  const Vec3 s = vee_antisym(r);  // 2 sin(theta) axis
  const double sin_theta = 0.5 * s.norm();
  const double cos_theta = 0.5 * (r.trace() - 1.0);
  const double theta = std::atan2(sin_theta, cos_theta);

  if (theta < kSmallAngle) {
    // theta / (2 sin theta) ~= 1/2 + theta^2 / 12
    return (0.5 + theta * theta / 12.0) * s;
  }
  if (std::numbers::pi - theta < kNearPi) {
    // R + I = 2 a a^T + sin(theta) hat(a) -> any column with large norm is parallel to a.
    const Mat3 rp = r + Mat3::Identity();
    int best = 0;
    for (int c = 1; c < 3; ++c) {
      if (rp.col(c).squaredNorm() > rp.col(best).squaredNorm()) best = c;
    }
    Vec3 axis = rp.col(best).normalized();
    if (s.squaredNorm() > 0.0) {
      if (axis.dot(s) < 0.0) axis = -axis;
    } else {
      int big = 0;
      axis.cwiseAbs().maxCoeff(&big);
      if (axis[big] < 0.0) axis = -axis;
    }
    return theta * axis;
  }
  return (theta / (2.0 * sin_theta)) * s;
}

Mat3 left_jacobian(const Vec3& v) {
  const double theta2 = v.squaredNorm();
  const double theta = std::sqrt(theta2);
  const Mat3 k = hat(v);
  double a, b;
  if (theta < kSmallAngle) {
    a = 0.5 - theta2 / 24.0;
    b = 1.0 / 6.0 - theta2 / 120.0;
  } else {
    a = (1.0 - std::cos(theta)) / theta2;
    b = (theta - std::sin(theta)) / (theta2 * theta);
  }
  return Mat3::Identity() + a * k + b * k * k;
}

Mat3 left_jacobian_inverse(const Vec3& v) {
  const double theta2 = v.squaredNorm();
  const double theta = std::sqrt(theta2);
  const Mat3 k = hat(v);
  double b;
  if (theta < kSmallAngle) {
    b = 1.0 / 12.0 + theta2 / 720.0;
  } else {
    b = 1.0 / theta2 - (1.0 + std::cos(theta)) / (2.0 * theta * std::sin(theta));
  }
  return Mat3::Identity() - 0.5 * k + b * k * k;
}

bool is_rotation(const Mat3& r, double tol) {
  if (!r.allFinite()) return false;
  return (r * r.transpose() - Mat3::Identity()).cwiseAbs().maxCoeff() < tol &&
         std::abs(r.determinant() - 1.0) < tol;
}

Mat3 project(const Mat3& m) {
  Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 u = svd.matrixU();
  const Mat3 v = svd.matrixV();
  if ((u * v.transpose()).determinant() < 0.0) u.col(2) = -u.col(2);
  return u * v.transpose();
}

}  // namespace wmr::so3
