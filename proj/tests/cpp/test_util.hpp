#pragma once

#include "anchorfit/body_model.hpp"
#include "anchorfit/rng.hpp"
#include "anchorfit/synthetic.hpp"

#include <vector>

namespace anchorfit::test {

inline Vec3 random_unit(Rng& rng) {
  Vec3 v;
  do {
    v = Vec3(rng.gaussian(), rng.gaussian(), rng.gaussian());
  } while (v.norm() < 1e-6);
  return v.normalized();
}

inline Vec3 random_vec(Rng& rng, double amp) {
  return Vec3(rng.uniform(-amp, amp), rng.uniform(-amp, amp),
              rng.uniform(-amp, amp));
}

// Small random chain/tree rig with a handful of skinned vertices; generic
// enough for property tests, cheap enough to run hundreds of times.
inline BodyModel random_rig(Rng& rng, int joints = 5, int vertices = 24,
                            int shapes = 0) {
  BodyModel model;
  model.tree.parent.push_back(-1);
  model.tree.rest_offset.push_back(random_vec(rng, 0.2));
  model.tree.joint_name.push_back("j0");
  model.bone_radii.push_back(0.0);
  for (int k = 1; k < joints; ++k) {
    model.tree.parent.push_back(rng.index(k));
    model.tree.rest_offset.push_back(random_vec(rng, 0.5));
    model.tree.joint_name.push_back("j" + std::to_string(k));
    model.bone_radii.push_back(rng.uniform(0.02, 0.1));
  }
  for (int v = 0; v < vertices; ++v) {
    model.template_vertices.push_back(random_vec(rng, 0.8));
    const int j1 = rng.index(joints);
    const int j2 = rng.index(joints);
    const double w = rng.uniform(0.2, 0.8);
    if (j1 == j2)
      model.skin_weights.push_back({{j1, 1.0}});
    else
      model.skin_weights.push_back({{j1, w}, {j2, 1.0 - w}});
  }
  for (int f = 0; f + 2 < vertices; f += 3)
    model.faces.push_back({f, f + 1, f + 2});
  for (int v = 0; v < vertices; v += 3) model.contact_candidates.push_back(v);
  const int mapped = std::min(joints, 6);
  for (int d = 0; d < mapped; ++d) model.keypoint_map.emplace_back(d, d);
  for (int c = 0; c < shapes; ++c) {
    std::vector<Vec3> dirs;
    for (int v = 0; v < vertices; ++v) dirs.push_back(random_vec(rng, 0.05));
    model.shape_dirs.push_back(std::move(dirs));
  }
  model.validate();
  return model;
}

inline HumanState random_state(Rng& rng, const BodyModel& model,
                               double rot_amp = 0.6) {
  HumanState s = HumanState::rest(model);
  s.scale = rng.uniform(0.7, 1.4);
  s.root_rotation = rot_amp * random_unit(rng) * rng.uniform();
  s.root_translation = random_vec(rng, 1.0);
  for (auto& r : s.joint_rotations) r = rot_amp * random_unit(rng) * rng.uniform();
  for (int c = 0; c < s.shape_coeffs.size(); ++c)
    s.shape_coeffs[c] = rng.uniform(-1.0, 1.0);
  return s;
}

// Axis-angle to 4x4 homogeneous rotation, used by matrix-chain oracles.
inline Eigen::Matrix4d homogeneous(const Mat3& r, const Vec3& t) {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.topLeftCorner<3, 3>() = r;
  m.topRightCorner<3, 1>() = t;
  return m;
}

}  // namespace anchorfit::test
