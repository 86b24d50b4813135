#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <array>

namespace anchorfit {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

constexpr double kPi = 3.14159265358979323846;

// Rigid (or uniformly scaled rigid) map x -> linear * x + translation.
struct AffineTransform {
  Mat3 linear = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  Vec3 apply(const Vec3& p) const { return linear * p + translation; }

  // this ∘ other (apply `other` first).
  AffineTransform compose(const AffineTransform& other) const {
    return {linear * other.linear, linear * other.translation + translation};
  }

  static AffineTransform identity() { return {}; }
};

Mat3 skew(const Vec3& v);

// Rodrigues rotation from an axis-angle vector (axis * angle, radians).
Mat3 axis_angle_to_matrix(const Vec3& aa);

// Wraps the encoded angle into (-pi, pi]; the rotation is unchanged.
Vec3 canonicalize_axis_angle(const Vec3& aa);

// dR/d(aa_i) for i = 0..2. Series expansion below norm 1e-7.
std::array<Mat3, 3> axis_angle_jacobian(const Vec3& aa);

// Chain-rule contraction: given dL/dR, returns dL/d(aa).
Vec3 axis_angle_backprop(const Vec3& aa, const Mat3& r_bar);

struct Capsule {
  Vec3 a = Vec3::Zero();
  Vec3 b = Vec3::Zero();
  double radius = 0.0;
};

struct SegmentClosest {
  double t = 0.0;   // barycentric parameter of the closest point on [a, b]
  Vec3 point = Vec3::Zero();
  double distance = 0.0;
};

SegmentClosest closest_point_on_segment(const Vec3& a, const Vec3& b,
                                        const Vec3& p);

// Negative inside the capsule.
double capsule_signed_distance(const Capsule& c, const Vec3& p);

struct SegmentPairClosest {
  double s = 0.0;  // parameter on the first segment
  double t = 0.0;  // parameter on the second segment
  Vec3 point_a = Vec3::Zero();
  Vec3 point_b = Vec3::Zero();
  double distance = 0.0;
};

SegmentPairClosest segment_segment_closest(const Vec3& a1, const Vec3& b1,
                                           const Vec3& a2, const Vec3& b2);

bool is_finite(const Vec3& v);

}  // namespace anchorfit
