#include "anchorfit/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace anchorfit {

Mat3 skew(const Vec3& v) {
  Mat3 m;
  m << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
  return m;
}

Mat3 axis_angle_to_matrix(const Vec3& aa) {
  const double angle = aa.norm();
  double k1, k2;
  if (angle < 1e-12) {
    k1 = 1.0;
    k2 = 0.5;
  } else {
    // (1 - cos a) / a^2 written as 2 sin^2(a/2) / a^2 to avoid cancellation.
    const double half_sin = std::sin(0.5 * angle);
    k1 = std::sin(angle) / angle;
    k2 = 2.0 * half_sin * half_sin / (angle * angle);
  }
  const Mat3 w = skew(aa);
  return Mat3::Identity() + k1 * w + k2 * (w * w);
}

Vec3 canonicalize_axis_angle(const Vec3& aa) {
  const double angle = aa.norm();
  if (angle <= kPi) return aa;
  // Wrap into (-pi, pi]; a negative wrapped angle flips the axis.
  double wrapped = std::fmod(angle + kPi, 2.0 * kPi);
  if (wrapped < 0) wrapped += 2.0 * kPi;
  wrapped -= kPi;
  return aa * (wrapped / angle);
}

std::array<Mat3, 3> axis_angle_jacobian(const Vec3& aa) {
  std::array<Mat3, 3> jac;
  const double angle = aa.norm();
  if (angle < 1e-7) {
    // R ~ I + [aa]x + 0.5 [aa]x^2; differentiate term by term.
    for (int i = 0; i < 3; ++i) {
      Vec3 e = Vec3::Zero();
      e[i] = 1.0;
      jac[i] = skew(e) +
               0.5 * (e * aa.transpose() + aa * e.transpose() -
                      2.0 * aa[i] * Mat3::Identity());
    }
    return jac;
  }
  const Mat3 r = axis_angle_to_matrix(aa);
  const Mat3 w = skew(aa);
  const double inv_sq = 1.0 / (angle * angle);
  const Mat3 i_minus_r = Mat3::Identity() - r;
  for (int i = 0; i < 3; ++i) {
    Vec3 e = Vec3::Zero();
    e[i] = 1.0;
    jac[i] = (aa[i] * w + skew(aa.cross(i_minus_r * e))) * inv_sq * r;
  }
  return jac;
}

Vec3 axis_angle_backprop(const Vec3& aa, const Mat3& r_bar) {
  const auto jac = axis_angle_jacobian(aa);
  Vec3 g;
  for (int i = 0; i < 3; ++i) g[i] = r_bar.cwiseProduct(jac[i]).sum();
  return g;
}

SegmentClosest closest_point_on_segment(const Vec3& a, const Vec3& b,
                                        const Vec3& p) {
  SegmentClosest out;
  const Vec3 ab = b - a;
  const double denom = ab.squaredNorm();
  double t = denom > 0 ? (p - a).dot(ab) / denom : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  out.t = t;
  out.point = a + t * ab;
  out.distance = (p - out.point).norm();
  return out;
}

double capsule_signed_distance(const Capsule& c, const Vec3& p) {
  return closest_point_on_segment(c.a, c.b, p).distance - c.radius;
}

SegmentPairClosest segment_segment_closest(const Vec3& a1, const Vec3& b1,
                                           const Vec3& a2, const Vec3& b2) {
  // Ericson, Real-Time Collision Detection, 5.1.9.
  const Vec3 d1 = b1 - a1;
  const Vec3 d2 = b2 - a2;
  const Vec3 r = a1 - a2;
  const double la = d1.squaredNorm();
  const double lb = d2.squaredNorm();
  const double f = d2.dot(r);
  double s, t;
  const double eps = 1e-30;
  if (la <= eps && lb <= eps) {
    s = t = 0.0;
  } else if (la <= eps) {
    s = 0.0;
    t = std::clamp(f / lb, 0.0, 1.0);
  } else {
    const double c = d1.dot(r);
    if (lb <= eps) {
      t = 0.0;
      s = std::clamp(-c / la, 0.0, 1.0);
    } else {
      const double b = d1.dot(d2);
      const double denom = la * lb - b * b;
      s = denom > eps ? std::clamp((b * f - c * lb) / denom, 0.0, 1.0) : 0.0;
      t = (b * s + f) / lb;
      if (t < 0.0) {
        t = 0.0;
        s = std::clamp(-c / la, 0.0, 1.0);
      } else if (t > 1.0) {
        t = 1.0;
        s = std::clamp((b - c) / la, 0.0, 1.0);
      }
    }
  }
  SegmentPairClosest out;
  out.s = s;
  out.t = t;
  out.point_a = a1 + s * d1;
  out.point_b = a2 + t * d2;
  out.distance = (out.point_a - out.point_b).norm();
  return out;
}

bool is_finite(const Vec3& v) {
  return std::isfinite(v.x()) && std::isfinite(v.y()) && std::isfinite(v.z());
}

}  // namespace anchorfit
