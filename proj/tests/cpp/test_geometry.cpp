#include "anchorfit/geometry.hpp"
#include "anchorfit/rng.hpp"
#include "test_util.hpp"

#include <doctest.h>

using namespace anchorfit;

TEST_CASE("axis-angle rotation matches known values") {
  CHECK(axis_angle_to_matrix(Vec3::Zero()).isApprox(Mat3::Identity(), 1e-15));

  const Mat3 rz = axis_angle_to_matrix(Vec3(0, 0, kPi / 2));
  CHECK((rz * Vec3(1, 0, 0) - Vec3(0, 1, 0)).norm() < 1e-15);

  const Mat3 rx = axis_angle_to_matrix(Vec3(kPi / 2, 0, 0));
  CHECK((rx * Vec3(0, 1, 0) - Vec3(0, 0, 1)).norm() < 1e-15);
}

TEST_CASE("axis-angle matrices are orthonormal across magnitudes") {
  Rng rng(3);
  for (double mag : {1e-9, 1e-7, 1e-4, 0.3, 1.5, kPi - 1e-6}) {
    const Vec3 aa = mag * test::random_unit(rng);
    const Mat3 r = axis_angle_to_matrix(aa);
    CHECK((r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-13);
    CHECK(r.determinant() == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("canonicalize_axis_angle preserves the rotation") {
  Rng rng(7);
  for (int i = 0; i < 50; ++i) {
    const Vec3 aa = test::random_unit(rng) * rng.uniform(0.0, 4.0 * kPi);
    const Vec3 canon = canonicalize_axis_angle(aa);
    CHECK(canon.norm() <= kPi + 1e-12);
    CHECK((axis_angle_to_matrix(aa) - axis_angle_to_matrix(canon))
              .cwiseAbs()
              .maxCoeff() < 1e-12);
  }
}

TEST_CASE("axis-angle jacobian matches finite differences") {
  Rng rng(11);
  const double h = 1e-6;
  for (double mag : {0.0, 1e-9, 1e-8, 1e-6, 1e-3, 0.5, 2.0, kPi - 1e-3}) {
    const Vec3 aa = mag == 0.0 ? Vec3::Zero() : Vec3(mag * test::random_unit(rng));
    const auto jac = axis_angle_jacobian(aa);
    for (int i = 0; i < 3; ++i) {
      Vec3 dp = aa, dm = aa;
      dp[i] += h;
      dm[i] -= h;
      const Mat3 fd =
          (axis_angle_to_matrix(dp) - axis_angle_to_matrix(dm)) / (2 * h);
      CHECK((jac[i] - fd).cwiseAbs().maxCoeff() < 5e-9);
    }
  }
}

TEST_CASE("axis_angle_backprop contracts the jacobian") {
  Rng rng(13);
  const Vec3 aa = 0.8 * test::random_unit(rng);
  Mat3 bar;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) bar(r, c) = rng.uniform(-1, 1);
  const Vec3 g = axis_angle_backprop(aa, bar);
  const auto jac = axis_angle_jacobian(aa);
  for (int i = 0; i < 3; ++i)
    CHECK(g[i] == doctest::Approx(bar.cwiseProduct(jac[i]).sum()).epsilon(1e-14));
}

TEST_CASE("capsule signed distance") {
  const Capsule c{Vec3(0, 0, 0), Vec3(1, 0, 0), 0.25};
  CHECK(capsule_signed_distance(c, Vec3(0.5, 0.4, 0)) ==
        doctest::Approx(0.15).epsilon(1e-12));
  CHECK(capsule_signed_distance(c, Vec3(0.5, 0.1, 0)) ==
        doctest::Approx(-0.15).epsilon(1e-12));
  // Beyond the endpoint the distance is to the cap sphere.
  CHECK(capsule_signed_distance(c, Vec3(1.5, 0, 0)) ==
        doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("segment-segment distance agrees with sampling") {
  Rng rng(17);
  for (int trial = 0; trial < 40; ++trial) {
    const Vec3 a1 = test::random_vec(rng, 1), b1 = test::random_vec(rng, 1);
    const Vec3 a2 = test::random_vec(rng, 1), b2 = test::random_vec(rng, 1);
    const auto closest = segment_segment_closest(a1, b1, a2, b2);
    double best = 1e300;
    const int n = 60;
    for (int i = 0; i <= n; ++i) {
      for (int j = 0; j <= n; ++j) {
        const Vec3 p = a1 + (b1 - a1) * (double(i) / n);
        const Vec3 q = a2 + (b2 - a2) * (double(j) / n);
        best = std::min(best, (p - q).norm());
      }
    }
    CHECK(closest.distance <= best + 1e-9);
    // The sampled minimum overshoots by at most half a step per segment.
    const double slack = ((b1 - a1).norm() + (b2 - a2).norm()) / (2.0 * n);
    CHECK(closest.distance >= best - slack);
    CHECK((closest.point_a - closest.point_b).norm() ==
          doctest::Approx(closest.distance).epsilon(1e-12));
  }
}
