#include "anchorfit/body_model.hpp"
#include "anchorfit/errors.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <algorithm>
#include <numeric>

using namespace anchorfit;

namespace {

BodyModel chain3() {
  BodyModel m;
  m.tree.parent = {-1, 0, 1};
  m.tree.rest_offset = {Vec3(0, 0, 0), Vec3(0, 1, 0), Vec3(0, 1, 0)};
  m.tree.joint_name = {"a", "b", "c"};
  m.bone_radii = {0, 0.1, 0.1};
  m.template_vertices = {Vec3(0, 0, 0), Vec3(0, 1, 0), Vec3(0, 2, 0)};
  m.faces = {{0, 1, 2}};
  m.skin_weights = {{{0, 1.0}}, {{1, 1.0}}, {{2, 1.0}}};
  m.keypoint_map = {{0, 0}, {1, 1}, {2, 2}};
  m.validate();
  return m;
}

}  // namespace

TEST_CASE("fk identity pose accumulates rest offsets") {
  const BodyModel m = chain3();
  const HumanState s = HumanState::rest(m);
  const auto fk = forward_kinematics(m, s);
  CHECK(fk.joint_positions[0] == Vec3(0, 0, 0));
  CHECK(fk.joint_positions[1] == Vec3(0, 1, 0));
  CHECK(fk.joint_positions[2] == Vec3(0, 2, 0));
}

TEST_CASE("fk root rotation pi about z negates x and y") {
  Rng rng(5);
  const BodyModel m = test::random_rig(rng, 6, 12);
  HumanState s = HumanState::rest(m);
  const auto base = forward_kinematics(m, s);
  s.root_rotation = Vec3(0, 0, kPi);
  const auto rotated = forward_kinematics(m, s);
  for (int k = 0; k < m.tree.joint_count(); ++k) {
    CHECK(rotated.joint_positions[k].x() ==
          doctest::Approx(-base.joint_positions[k].x()).epsilon(1e-12));
    CHECK(rotated.joint_positions[k].y() ==
          doctest::Approx(-base.joint_positions[k].y()).epsilon(1e-12));
    CHECK(rotated.joint_positions[k].z() ==
          doctest::Approx(base.joint_positions[k].z()).epsilon(1e-12));
  }
}

TEST_CASE("fk three-joint chain against an explicit matrix chain") {
  const BodyModel m = chain3();
  HumanState s = HumanState::rest(m);
  s.joint_rotations[1] = Vec3(kPi / 2, 0, 0);

  const auto fk = forward_kinematics(m, s);
  CHECK((fk.joint_positions[2] - Vec3(0, 1, 1)).norm() < 1e-14);

  // Oracle: joint k position from the product of homogeneous local matrices.
  s.root_rotation = Vec3(0.3, -0.2, 0.5);
  s.root_translation = Vec3(0.7, -1.1, 0.4);
  s.scale = 1.7;
  s.joint_rotations[0] = Vec3(0.1, 0.2, -0.3);
  s.joint_rotations[2] = Vec3(-0.4, 0.1, 0.2);
  const auto fk2 = forward_kinematics(m, s);

  Eigen::Matrix4d global = test::homogeneous(
      s.scale * axis_angle_to_matrix(s.root_rotation), s.root_translation);
  Eigen::Matrix4d acc = Eigen::Matrix4d::Identity();
  for (int k = 0; k < 3; ++k) {
    acc = acc * test::homogeneous(Mat3::Identity(), m.tree.rest_offset[k]) *
          test::homogeneous(axis_angle_to_matrix(s.joint_rotations[k]),
                            Vec3::Zero());
    const Eigen::Vector4d p = global * acc * Eigen::Vector4d(0, 0, 0, 1);
    CHECK((fk2.joint_positions[k] - p.head<3>()).norm() < 1e-12);
  }
}

TEST_CASE("skinning reduces to the global transform for root-bound vertices") {
  BodyModel m = chain3();
  m.skin_weights = {{{0, 1.0}}, {{0, 1.0}}, {{0, 1.0}}};
  HumanState s = HumanState::rest(m);
  s.scale = 2.0;
  s.root_rotation = Vec3(0, kPi / 2, 0);
  s.root_translation = Vec3(1, 2, 3);
  const auto fk = forward_kinematics(m, s);
  const auto posed = skin_vertices(m, fk, s);
  const Mat3 r = axis_angle_to_matrix(s.root_rotation);
  for (int v = 0; v < m.vertex_count(); ++v) {
    const Vec3 expected =
        s.scale * (r * m.template_vertices[v]) + s.root_translation;
    CHECK((posed[v] - expected).norm() < 1e-12);
  }
}

TEST_CASE("half-half skinning splits a unit translation") {
  BodyModel m = chain3();
  m.template_vertices = {Vec3(0, 0.5, 0)};
  m.skin_weights = {{{0, 0.5}, {1, 0.5}}};
  m.faces = {{0, 0, 0}};
  m.contact_candidates = {0};
  // Identity pose gives identity skinning transforms; fake a translated
  // transform for joint 1 by translating its parent-relative offset.
  HumanState s = HumanState::rest(m);
  auto fk = forward_kinematics(m, s);
  fk.joint_transforms[1].translation += Vec3(1, 0, 0);
  const auto posed = skin_vertices(m, fk, s);
  CHECK((posed[0] - Vec3(0.5, 0.5, 0)).norm() < 1e-15);
}

TEST_CASE("skinning matches a dense homogeneous-matrix oracle") {
  Rng rng(23);
  for (int trial = 0; trial < 10; ++trial) {
    const BodyModel m = test::random_rig(rng, 3, 10, 2);
    const HumanState s = test::random_state(rng, m);
    const auto fk = forward_kinematics(m, s);
    const auto posed = skin_vertices(m, fk, s);

    // Dense oracle: T_k = G * A_k * rest_k^{-1} as 4x4 products.
    const auto rest = rest_joint_positions(m.tree);
    std::vector<Eigen::Matrix4d> body(m.tree.joint_count());
    for (int k = 0; k < m.tree.joint_count(); ++k) {
      const Eigen::Matrix4d local =
          test::homogeneous(Mat3::Identity(), m.tree.rest_offset[k]) *
          test::homogeneous(axis_angle_to_matrix(s.joint_rotations[k]),
                            Vec3::Zero());
      body[k] = k == 0 ? local : body[m.tree.parent[k]] * local;
    }
    const Eigen::Matrix4d global = test::homogeneous(
        s.scale * axis_angle_to_matrix(s.root_rotation), s.root_translation);
    for (int v = 0; v < m.vertex_count(); ++v) {
      Vec3 shaped = m.template_vertices[v];
      for (int c = 0; c < m.shape_count(); ++c)
        shaped += s.shape_coeffs[c] * m.shape_dirs[c][v];
      Eigen::Vector4d out = Eigen::Vector4d::Zero();
      for (const auto& iw : m.skin_weights[v]) {
        const Eigen::Matrix4d t =
            global * body[iw.joint] *
            test::homogeneous(Mat3::Identity(), rest[iw.joint]).inverse();
        out += iw.weight * (t * Eigen::Vector4d(shaped.x(), shaped.y(),
                                                shaped.z(), 1.0));
      }
      CHECK((posed[v] - out.head<3>()).norm() < 1e-9);
    }
  }
}

TEST_CASE("capsule proxies: one per bone, scaled radii and distances") {
  const BodyModel m = chain3();
  HumanState s = HumanState::rest(m);
  auto fk = forward_kinematics(m, s);
  auto capsules = capsule_proxies(m, fk.joint_positions, s.scale);
  CHECK(capsules.size() == 2);

  BodyModel two;
  two.tree.parent = {-1, 0};
  two.tree.rest_offset = {Vec3::Zero(), Vec3(0, 1, 0)};
  two.tree.joint_name = {"a", "b"};
  two.bone_radii = {0, 0.2};
  two.template_vertices = {Vec3::Zero(), Vec3(0, 1, 0), Vec3(1, 0, 0)};
  two.faces = {{0, 1, 2}};
  two.skin_weights = {{{0, 1.0}}, {{1, 1.0}}, {{0, 1.0}}};
  two.keypoint_map = {{0, 0}};
  two.validate();
  HumanState ts = HumanState::rest(two);
  auto fk1 = forward_kinematics(two, ts);
  auto caps1 = capsule_proxies(two, fk1.joint_positions, ts.scale);
  CHECK(caps1.size() == 1);

  ts.scale = 2.0;
  auto fk2 = forward_kinematics(two, ts);
  auto caps2 = capsule_proxies(two, fk2.joint_positions, ts.scale);
  CHECK(caps2[0].radius == doctest::Approx(0.4));
  CHECK((caps2[0].b - caps2[0].a).norm() ==
        doctest::Approx(2.0 * (caps1[0].b - caps1[0].a).norm()));

  // Signed distance from a point at lateral distance d within the span.
  CHECK(capsule_signed_distance(caps1[0], Vec3(0.15, 0.5, 0)) ==
        doctest::Approx(0.15 - 0.2).epsilon(1e-12));
}

TEST_CASE("fk determinism is bitwise") {
  Rng rng(31);
  const BodyModel m = test::random_rig(rng, 7, 20);
  const HumanState s = test::random_state(rng, m);
  const auto a = forward_kinematics(m, s);
  const auto b = forward_kinematics(m, s);
  for (int k = 0; k < m.tree.joint_count(); ++k) {
    CHECK(a.joint_positions[k] == b.joint_positions[k]);
    CHECK(a.joint_transforms[k].linear == b.joint_transforms[k].linear);
  }
}

TEST_CASE("global rotation composes rigidly about the root pivot") {
  Rng rng(37);
  const BodyModel m = test::random_rig(rng, 6, 12);
  HumanState s = test::random_state(rng, m);
  s.root_rotation = Vec3::Zero();
  const auto base = forward_kinematics(m, s);

  const Vec3 aa = 0.8 * test::random_unit(rng);
  HumanState rotated = s;
  rotated.root_rotation = aa;
  const auto moved = forward_kinematics(m, rotated);
  const Mat3 r = axis_angle_to_matrix(aa);
  for (int k = 0; k < m.tree.joint_count(); ++k) {
    const Vec3 expected = r * (base.joint_positions[k] - s.root_translation) +
                          s.root_translation;
    CHECK((moved.joint_positions[k] - expected).norm() < 1e-9);
  }
}

TEST_CASE("scale homogeneity of joint-to-root distances") {
  Rng rng(41);
  const BodyModel m = test::random_rig(rng, 6, 12);
  HumanState s = test::random_state(rng, m);
  const auto base = forward_kinematics(m, s);
  HumanState scaled = s;
  const double c = 2.5;
  scaled.scale = s.scale * c;
  const auto big = forward_kinematics(m, scaled);
  for (int k = 1; k < m.tree.joint_count(); ++k) {
    const double d0 = (base.joint_positions[k] - base.joint_positions[0]).norm();
    const double d1 = (big.joint_positions[k] - big.joint_positions[0]).norm();
    CHECK(d1 == doctest::Approx(c * d0).epsilon(1e-9));
  }
}

TEST_CASE("partition of unity: identity transforms reproduce the template") {
  Rng rng(43);
  const BodyModel m = test::random_rig(rng, 5, 16);
  const HumanState s = HumanState::rest(m);
  auto fk = forward_kinematics(m, s);
  for (auto& t : fk.joint_transforms) t = AffineTransform::identity();
  const auto posed = skin_vertices(m, fk, s);
  // Convex blending of identical points is exact up to one rounding step.
  for (int v = 0; v < m.vertex_count(); ++v)
    CHECK((posed[v] - m.template_vertices[v]).norm() < 1e-15);
}

TEST_CASE("fk is invariant under sibling relabeling") {
  // Star rig: root with three children in one order, then permuted.
  BodyModel a;
  a.tree.parent = {-1, 0, 0, 0};
  a.tree.rest_offset = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0),
                        Vec3(0, 0, 1)};
  a.tree.joint_name = {"r", "x", "y", "z"};
  a.bone_radii = {0, 0.1, 0.1, 0.1};
  a.template_vertices = {Vec3(0.1, 0, 0), Vec3(0, 0.1, 0), Vec3(0, 0, 0.1)};
  a.faces = {{0, 1, 2}};
  a.skin_weights = {{{1, 1.0}}, {{2, 1.0}}, {{3, 1.0}}};
  a.keypoint_map = {{0, 0}};
  a.validate();

  BodyModel b = a;  // children permuted: z, x, y
  const int perm[4] = {0, 3, 1, 2};  // joint k in `a` becomes perm[k] in `b`
  for (int k = 1; k < 4; ++k) {
    b.tree.rest_offset[perm[k]] = a.tree.rest_offset[k];
    b.tree.joint_name[perm[k]] = a.tree.joint_name[k];
    b.bone_radii[perm[k]] = a.bone_radii[k];
  }
  for (int v = 0; v < 3; ++v)
    b.skin_weights[v] = {{perm[a.skin_weights[v][0].joint], 1.0}};

  Rng rng(47);
  HumanState sa = test::random_state(rng, a);
  HumanState sb = sa;
  for (int k = 0; k < 4; ++k)
    sb.joint_rotations[perm[k]] = sa.joint_rotations[k];

  const auto fka = forward_kinematics(a, sa);
  const auto fkb = forward_kinematics(b, sb);
  for (int k = 0; k < 4; ++k)
    CHECK(fka.joint_positions[k] == fkb.joint_positions[perm[k]]);
  const auto pa = skin_vertices(a, fka, sa);
  const auto pb = skin_vertices(b, fkb, sb);
  for (int v = 0; v < 3; ++v) CHECK(pa[v] == pb[v]);
}

TEST_CASE("fk input validation") {
  const BodyModel m = chain3();
  HumanState s = HumanState::rest(m);
  s.joint_rotations.pop_back();
  CHECK_THROWS_AS(forward_kinematics(m, s), ContractViolationError);

  HumanState bad = HumanState::rest(m);
  bad.root_translation = Vec3(std::nan(""), 0, 0);
  CHECK_THROWS_AS(forward_kinematics(m, bad), InvalidInputError);

  BodyModel broken = chain3();
  broken.skin_weights[1] = {{1, 0.7}};
  HumanState ok = HumanState::rest(m);
  const auto fk = forward_kinematics(m, ok);
  CHECK_THROWS_AS(skin_vertices(broken, fk, ok), Error);
}
