// Copyright Contributors to the posecast project
// SPDX-License-Identifier: Apache-2.0
//
// Elementary 3D math shared by the template, renderer and loss code. Every
// routine is templated on the scalar so the same code runs on plain doubles
// and on forward-mode derivative scalars.
#pragma once

#include <algorithm>
#include <cmath>
#include <type_traits>

#include <Eigen/Core>
#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/AutoDiff>

#include "posecast/error.hpp"

namespace posecast {

template <typename T>
using Vec3 = Eigen::Matrix<T, 3, 1>;
template <typename T>
using Mat3 = Eigen::Matrix<T, 3, 3>;

using Vec3d = Vec3<double>;
using Mat3d = Mat3<double>;

/// Forward-mode scalar carrying a dynamic gradient vector.
using ADScalar = Eigen::AutoDiffScalar<Eigen::VectorXd>;

inline double value_of(double x) { return x; }
template <typename D>
double value_of(const Eigen::AutoDiffScalar<D>& x) {
  return x.value();
}

template <typename Derived>
Eigen::Matrix<double, Derived::RowsAtCompileTime, Derived::ColsAtCompileTime>
values_of(const Eigen::MatrixBase<Derived>& m) {
  return m.unaryExpr([](const auto& s) { return value_of(s); });
}

inline constexpr double kSmallAngle = 1e-8;

template <typename T>
Mat3<T> skew(const Vec3<T>& v) {
  Mat3<T> k;
  k << T(0), -v.z(), v.y(),
       v.z(), T(0), -v.x(),
       -v.y(), v.x(), T(0);
  return k;
}

/// Euclidean norm with a zero subgradient at the origin, so derivative
/// scalars stay finite at r = 0.
template <typename T>
T safe_norm(const Vec3<T>& v) {
  using std::sqrt;
  const T sq = v.squaredNorm();
  if (value_of(sq) == 0.0) return T(0.0) * sq;
  return sqrt(sq);
}

/// Axis-angle to rotation matrix. Below kSmallAngle the second-order series
/// I + K + K^2/2 is used, which keeps derivatives finite at the origin.
template <typename T>
Mat3<T> rodrigues(const Vec3<T>& r) {
  using std::cos;
  using std::sin;
  using std::sqrt;
  const Mat3<T> k = skew(r);
  const Mat3<T> k2 = k * k;
  const T theta_sq = r.squaredNorm();
  Mat3<T> rot = Mat3<T>::Identity();
  if (std::sqrt(value_of(theta_sq)) < kSmallAngle) {
    rot += k + T(0.5) * k2;
    return rot;
  }
  const T theta = sqrt(theta_sq);
  rot += (sin(theta) / theta) * k + ((T(1.0) - cos(theta)) / theta_sq) * k2;
  return rot;
}

/// H = R(r) * diag(s).
template <typename T>
Mat3<T> compose_affine(const Vec3<T>& r, const Vec3<T>& s) {
  for (int i = 0; i < 3; ++i) {
    if (!(value_of(s[i]) > 0.0)) {
      raise(ErrorCode::NonPositiveScale,
            "scale component " + std::to_string(i) + " = " +
                std::to_string(value_of(s[i])));
    }
  }
  return rodrigues(r) * s.asDiagonal();
}

/// Closed-form 3x3 inverse through the adjugate; usable with any scalar.
template <typename T>
Mat3<T> inverse3(const Mat3<T>& m) {
  Mat3<T> adj;
  adj(0, 0) = m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1);
  adj(0, 1) = m(0, 2) * m(2, 1) - m(0, 1) * m(2, 2);
  adj(0, 2) = m(0, 1) * m(1, 2) - m(0, 2) * m(1, 1);
  adj(1, 0) = m(1, 2) * m(2, 0) - m(1, 0) * m(2, 2);
  adj(1, 1) = m(0, 0) * m(2, 2) - m(0, 2) * m(2, 0);
  adj(1, 2) = m(0, 2) * m(1, 0) - m(0, 0) * m(1, 2);
  adj(2, 0) = m(1, 0) * m(2, 1) - m(1, 1) * m(2, 0);
  adj(2, 1) = m(0, 1) * m(2, 0) - m(0, 0) * m(2, 1);
  adj(2, 2) = m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0);
  const T det = m(0, 0) * adj(0, 0) + m(0, 1) * adj(1, 0) + m(0, 2) * adj(2, 0);
  return adj / det;
}

template <typename T>
T determinant3(const Mat3<T>& m) {
  return m(0, 0) * (m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1)) -
         m(0, 1) * (m(1, 0) * m(2, 2) - m(1, 2) * m(2, 0)) +
         m(0, 2) * (m(1, 0) * m(2, 1) - m(1, 1) * m(2, 0));
}

/// One body part: an ellipsoidal Gaussian with a constant base colour.
/// Colours belong to the fixed template and are never differentiated.
template <typename T>
struct GaussianPart {
  Vec3<T> mean = Vec3<T>::Zero();
  Mat3<T> covariance = Mat3<T>::Identity();
  Vec3d base_colour = Vec3d::Zero();

  bool operator==(const GaussianPart& o) const {
    return mean == o.mean && covariance == o.covariance && base_colour == o.base_colour;
  }
};

using GaussianPartd = GaussianPart<double>;

/// Throws InvalidArgument unless covariance is symmetric (1e-12),
/// positive-definite and the colour lies in [0,1]^3.
void validate(const GaussianPartd& g);

inline constexpr double kSingularDet = 1e-12;

/// mean' = H mean + t, covariance' = H covariance H^T.
template <typename T>
GaussianPart<T> transform_gaussian(const GaussianPart<T>& g, const Mat3<T>& h,
                                   const Vec3<T>& t) {
  using std::abs;
  const T det = determinant3(h);
  if (!(std::abs(value_of(det)) > kSingularDet)) {
    raise(ErrorCode::SingularTransform,
          "|det H| = " + std::to_string(std::abs(value_of(det))));
  }
  GaussianPart<T> out;
  out.mean = h * g.mean + t;
  out.covariance = h * g.covariance * h.transpose();
  out.base_colour = g.base_colour;
  return out;
}

/// exp(-1/2 (x - mean)^T covariance^-1 (x - mean)); peak value 1 at the mean.
template <typename T>
T occupancy_at(const GaussianPart<T>& g, const Vec3<T>& x) {
  using std::exp;
  const Vec3<T> d = x - g.mean;
  const T m = d.dot(inverse3(g.covariance) * d);
  return exp(T(-0.5) * m);
}

/// Geodesic angle between two rotations, angle(a^T b), in [0, pi].
double geodesic_angle(const Mat3d& a, const Mat3d& b);

}  // namespace posecast
