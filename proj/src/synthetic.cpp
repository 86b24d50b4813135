#include "anchorfit/synthetic.hpp"

#include "anchorfit/errors.hpp"
#include "anchorfit/rng.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

namespace anchorfit {

namespace {

// ---------------------------------------------------------------------------
// rig18 construction
// ---------------------------------------------------------------------------

struct RigJointSpec {
  const char* name;
  int parent;
  Vec3 offset;
  double mesh_radius;  // tube radius; capsule radius is 8 mm thinner
  int rings;           // sampling density along the bone tube
  int sides;           // circumferential density
};

const RigJointSpec kRig18Joints[] = {
    {"pelvis", -1, {0.00, 0.95, 0.00}, 0.000, 0, 0},
    {"spine", 0, {0.00, 0.22, 0.00}, 0.093, 4, 12},
    {"neck", 1, {0.00, 0.26, 0.00}, 0.088, 4, 12},
    {"head", 2, {0.00, 0.15, 0.015}, 0.065, 3, 12},
    {"l_shoulder", 2, {0.20, 0.02, 0.00}, 0.048, 3, 12},
    {"l_elbow", 4, {0.26, 0.00, 0.00}, 0.047, 5, 12},
    {"l_wrist", 5, {0.25, 0.00, 0.00}, 0.043, 6, 12},
    {"r_shoulder", 2, {-0.20, 0.02, 0.00}, 0.048, 3, 12},
    {"r_elbow", 7, {-0.26, 0.00, 0.00}, 0.047, 5, 12},
    {"r_wrist", 8, {-0.25, 0.00, 0.00}, 0.043, 6, 12},
    {"l_hip", 0, {0.14, -0.08, 0.00}, 0.058, 4, 12},
    {"l_knee", 10, {0.00, -0.40, 0.00}, 0.068, 9, 16},
    {"l_ankle", 11, {0.00, -0.40, 0.00}, 0.058, 8, 12},
    {"r_hip", 0, {-0.14, -0.08, 0.00}, 0.058, 4, 12},
    {"r_knee", 13, {0.00, -0.40, 0.00}, 0.068, 9, 16},
    {"r_ankle", 14, {0.00, -0.40, 0.00}, 0.058, 8, 12},
    {"l_toe", 12, {0.00, -0.05, 0.12}, 0.048, 3, 12},
    {"r_toe", 15, {0.00, -0.05, 0.12}, 0.048, 3, 12},
};

constexpr double kCapsuleShrink = 0.008;

// Joints whose tube (bone ending at that joint) provides contact candidates.
// Hand contact goes through the flat palm paddles instead of the forearm
// tubes, so grasped objects see planar candidate patches.
const int kCandidateBones[] = {10, 11, 13, 14, 12, 15, 1};
// Leaf bones get a closed distal cap (hands, head, toes).
const int kCapBones[] = {3, 6, 9, 16, 17};

// Palm paddles: thin boxes bound to the elbow frames, extending past the
// wrist along the forearm, top face flush with the forearm tube crest.
constexpr double kPalmForward = 0.07;
constexpr double kPalmLift = 0.052;  // palm top clears the forearm capsule
constexpr double kPalmBack = -0.04;  // rest-frame z; away from the chest when
                                     // the forearms cross in front of the body
const Vec3 kPalmHalf(0.085, 0.012, 0.060);

void append_tube(BodyModel& model, int child_joint, const Vec3& a,
                 const Vec3& b, double radius, int ring_count, int sides,
                 bool distal_cap, bool candidate) {
  const int bind = model.tree.parent[child_joint];
  const Vec3 axis = b - a;
  const double len = axis.norm();
  const Vec3 dir = axis / len;
  Vec3 u = dir.cross(Vec3(0, 0, 1));
  if (u.norm() < 1e-6) u = dir.cross(Vec3(1, 0, 0));
  u.normalize();
  const Vec3 w = dir.cross(u);

  std::vector<double> ts;
  ring_count = std::max(2, ring_count);
  for (int i = 0; i < ring_count; ++i)
    ts.push_back(static_cast<double>(i) / (ring_count - 1));

  std::vector<std::vector<int>> rings;
  for (double t : ts) {
    std::vector<int> ring;
    const Vec3 center = a + t * axis;
    for (int k = 0; k < sides; ++k) {
      const double theta = 2.0 * kPi * k / sides;
      const int idx = model.vertex_count();
      model.template_vertices.push_back(
          center + radius * (std::cos(theta) * u + std::sin(theta) * w));
      model.skin_weights.push_back({{bind, 1.0}});
      if (candidate) model.contact_candidates.push_back(idx);
      ring.push_back(idx);
    }
    rings.push_back(std::move(ring));
  }
  for (size_t r = 0; r + 1 < rings.size(); ++r) {
    for (int k = 0; k < sides; ++k) {
      const int k2 = (k + 1) % sides;
      const int a0 = rings[r][k], a1 = rings[r][k2];
      const int b0 = rings[r + 1][k], b1 = rings[r + 1][k2];
      model.faces.push_back({a0, b1, b0});
      model.faces.push_back({a0, a1, b1});
    }
  }
  if (distal_cap) {
    const int apex = model.vertex_count();
    model.template_vertices.push_back(b + 0.9 * radius * dir);
    model.skin_weights.push_back({{bind, 1.0}});
    if (candidate) model.contact_candidates.push_back(apex);
    const auto& last = rings.back();
    for (int k = 0; k < sides; ++k)
      model.faces.push_back({last[k], last[(k + 1) % sides], apex});
  }
}

void append_box(BodyModel& model, int bind_joint, const Vec3& center,
                const Vec3& half, const Eigen::Vector3i& divisions,
                bool candidate) {
  const Mesh box = make_box_grid(center, half, divisions);
  const int base = model.vertex_count();
  for (const auto& v : box.vertices) {
    const int idx = model.vertex_count();
    model.template_vertices.push_back(v);
    model.skin_weights.push_back({{bind_joint, 1.0}});
    if (candidate) model.contact_candidates.push_back(idx);
  }
  for (const auto& f : box.faces)
    model.faces.push_back({f[0] + base, f[1] + base, f[2] + base});
}

}  // namespace

BodyModel default_rig() {
  BodyModel model;
  for (const auto& j : kRig18Joints) {
    model.tree.parent.push_back(j.parent);
    model.tree.rest_offset.push_back(j.offset);
    model.tree.joint_name.push_back(j.name);
    model.bone_radii.push_back(
        j.parent < 0 ? 0.0 : std::max(0.02, j.mesh_radius - kCapsuleShrink));
  }
  const auto rest = rest_joint_positions(model.tree);
  const std::set<int> cap_bones(std::begin(kCapBones), std::end(kCapBones));
  const std::set<int> candidate_bones(std::begin(kCandidateBones),
                                      std::end(kCandidateBones));
  for (int k = 1; k < model.tree.joint_count(); ++k) {
    append_tube(model, k, rest[model.tree.parent[k]], rest[k],
                kRig18Joints[k].mesh_radius, kRig18Joints[k].rings,
                kRig18Joints[k].sides, cap_bones.count(k) > 0,
                candidate_bones.count(k) > 0);
  }
  // Palms, bound like the forearms to the elbow frames.
  const Eigen::Vector3i palm_div(10, 1, 7);
  append_box(model, 5,
             rest[6] + Vec3(kPalmForward, kPalmLift, kPalmBack), kPalmHalf,
             palm_div, true);
  append_box(model, 8,
             rest[9] + Vec3(-kPalmForward, kPalmLift, kPalmBack), kPalmHalf,
             palm_div, true);
  // Detector slot -> joint. Slots 14..17 (eyes/ears) are unmapped.
  model.keypoint_map = {{0, 3},  {1, 2},   {2, 7},   {3, 8},  {4, 9},
                        {5, 4},  {6, 5},   {7, 6},   {8, 13}, {9, 14},
                        {10, 15}, {11, 10}, {12, 11}, {13, 12}};
  model.validate();
  return model;
}

Mesh make_box_grid(const Vec3& center, const Vec3& half_extents,
                   const Eigen::Vector3i& divisions) {
  Mesh mesh;
  // axis = face normal axis, sign = which side; (ua, va) span the face.
  const int face_axes[6][3] = {{0, 1, 2}, {0, 1, 2}, {1, 0, 2},
                               {1, 0, 2}, {2, 0, 1}, {2, 0, 1}};
  for (int f = 0; f < 6; ++f) {
    const int axis = face_axes[f][0];
    const int ua = face_axes[f][1];
    const int va = face_axes[f][2];
    const int nu = std::max(1, divisions[ua]);
    const int nv = std::max(1, divisions[va]);
    const double sign = (f % 2 == 0) ? 1.0 : -1.0;
    const int base = static_cast<int>(mesh.vertices.size());
    for (int i = 0; i <= nu; ++i) {
      for (int j = 0; j <= nv; ++j) {
        Vec3 p = center;
        p[axis] += sign * half_extents[axis];
        p[ua] += (-1.0 + 2.0 * i / nu) * half_extents[ua];
        p[va] += (-1.0 + 2.0 * j / nv) * half_extents[va];
        mesh.vertices.push_back(p);
      }
    }
    for (int i = 0; i < nu; ++i) {
      for (int j = 0; j < nv; ++j) {
        const int v00 = base + i * (nv + 1) + j;
        const int v01 = v00 + 1;
        const int v10 = v00 + (nv + 1);
        const int v11 = v10 + 1;
        // Wind so the face normal points along sign * axis.
        const Vec3 e1 = mesh.vertices[v10] - mesh.vertices[v00];
        const Vec3 e2 = mesh.vertices[v01] - mesh.vertices[v00];
        Vec3 normal = e1.cross(e2);
        if (normal[axis] * sign > 0) {
          mesh.faces.push_back({v00, v10, v01});
          mesh.faces.push_back({v01, v10, v11});
        } else {
          mesh.faces.push_back({v00, v01, v10});
          mesh.faces.push_back({v10, v01, v11});
        }
      }
    }
  }
  return mesh;
}

Mesh make_box_grid(const Vec3& center, const Vec3& half_extents,
                   int divisions) {
  return make_box_grid(center, half_extents,
                       Eigen::Vector3i(divisions, divisions, divisions));
}

namespace {

// ---------------------------------------------------------------------------
// scenario motion programs
// ---------------------------------------------------------------------------

int joint_id(const BodyModel& model, const std::string& name) {
  for (int k = 0; k < model.tree.joint_count(); ++k)
    if (model.tree.joint_name[k] == name) return k;
  throw ScenarioError("rig has no joint named " + name);
}

struct ScenarioBuild {
  std::vector<FrameState> truth;
  std::shared_ptr<const Mesh> object_mesh;
};

HumanState base_state(const BodyModel& model) {
  return HumanState::rest(model);
}

double phase(int f, int frames) {
  return 2.0 * kPi * static_cast<double>(f) / std::max(1, frames);
}

ScenarioBuild build_carry_box(const BodyModel& model, int frames) {
  const int l_sho = joint_id(model, "l_shoulder");
  const int l_elb = joint_id(model, "l_elbow");
  const int r_sho = joint_id(model, "r_shoulder");
  const int r_elb = joint_id(model, "r_elbow");
  const int l_hip = joint_id(model, "l_hip");
  const int r_hip = joint_id(model, "r_hip");
  const int l_knee = joint_id(model, "l_knee");
  const int r_knee = joint_id(model, "r_knee");

  // Forearms crossed in front of the chest so both palm pads lie axis
  // aligned and overlap into one flat tray under the box.
  HumanState pose = base_state(model);
  pose.joint_rotations[l_sho] = Vec3(0, -kPi / 4.0, 0);
  pose.joint_rotations[l_elb] = Vec3(0, -0.75 * kPi, 0);
  pose.joint_rotations[r_sho] = Vec3(0, kPi / 4.0, 0);
  pose.joint_rotations[r_elb] = Vec3(0, 0.75 * kPi, 0);

  // Box resting on the palm tray: arms stay fixed relative to the root, so
  // the object follows the root transform exactly (rigid grasp).
  const double palm_top = 1.45 + kPalmLift + kPalmHalf.y();
  // Crossed forearms put the tray at the elbows' depth; the palms' rest
  // offset pushes it further out in front of the chest.
  const double tray_z = 0.26 * std::sin(kPi / 4.0) - kPalmBack;
  const Vec3 box_half(0.13, 0.07, 0.055);
  const Vec3 box_center(0.0, palm_top + 0.004 + box_half.y(), tray_z);
  auto mesh = std::make_shared<Mesh>(
      make_box_grid(box_center, box_half, Eigen::Vector3i(10, 5, 4)));

  ScenarioBuild out;
  out.object_mesh = mesh;
  for (int f = 0; f < frames; ++f) {
    const double p = phase(f, frames);
    FrameState fs;
    fs.human = pose;
    fs.human.root_rotation = Vec3(0, 0.12 * std::sin(p), 0);
    fs.human.root_translation =
        Vec3(0.02 * std::sin(p), 0.015 * std::sin(2.0 * p), 0.015 * std::sin(p + 0.7));
    fs.human.joint_rotations[l_hip] += Vec3(-0.10 * std::sin(p), 0, 0);
    fs.human.joint_rotations[r_hip] += Vec3(0.10 * std::sin(p), 0, 0);
    fs.human.joint_rotations[l_knee] += Vec3(0.12 * (1.0 - std::cos(p)) * 0.5, 0, 0);
    fs.human.joint_rotations[r_knee] += Vec3(0.12 * (1.0 + std::cos(p)) * 0.5, 0, 0);
    fs.object.emplace();
    fs.object->rotation = fs.human.root_rotation;
    fs.object->translation = fs.human.root_translation;
    fs.object->mesh = mesh;
    out.truth.push_back(std::move(fs));
  }
  return out;
}

ScenarioBuild build_sit_still(const BodyModel& model, int frames) {
  const int spine = joint_id(model, "spine");
  const int neck = joint_id(model, "neck");
  const int l_sho = joint_id(model, "l_shoulder");
  const int r_sho = joint_id(model, "r_shoulder");
  const int l_elb = joint_id(model, "l_elbow");
  const int r_elb = joint_id(model, "r_elbow");

  HumanState pose = base_state(model);
  pose.joint_rotations[joint_id(model, "l_hip")] = Vec3(-kPi / 2.0, 0, 0);
  pose.joint_rotations[joint_id(model, "r_hip")] = Vec3(-kPi / 2.0, 0, 0);
  pose.joint_rotations[joint_id(model, "l_knee")] = Vec3(kPi / 2.0, 0, 0);
  pose.joint_rotations[joint_id(model, "r_knee")] = Vec3(kPi / 2.0, 0, 0);
  pose.joint_rotations[l_sho] = Vec3(0, 0, -(kPi / 2.0 - 0.15));
  pose.joint_rotations[r_sho] = Vec3(0, 0, kPi / 2.0 - 0.15);
  pose.joint_rotations[l_elb] = Vec3(0, -0.3, 0);
  pose.joint_rotations[r_elb] = Vec3(0, 0.3, 0);
  pose.root_translation = Vec3(0, -0.348, 0);

  const Vec3 seat_half(0.28, 0.225, 0.19);
  const Vec3 seat_center(0.0, 0.225, 0.15);
  auto mesh = std::make_shared<Mesh>(
      make_box_grid(seat_center, seat_half, Eigen::Vector3i(10, 5, 9)));

  ScenarioBuild out;
  out.object_mesh = mesh;
  for (int f = 0; f < frames; ++f) {
    const double p = phase(f, frames);
    FrameState fs;
    fs.human = pose;
    fs.human.joint_rotations[spine] += Vec3(0, 0, 0.06 * std::sin(p));
    fs.human.joint_rotations[neck] += Vec3(0.08 * std::sin(p + 1.0), 0, 0);
    fs.human.joint_rotations[l_sho] += Vec3(0.05 * std::sin(p), 0, 0);
    fs.human.joint_rotations[r_sho] += Vec3(0.05 * std::sin(p + kPi), 0, 0);
    fs.object.emplace();
    fs.object->mesh = mesh;
    out.truth.push_back(std::move(fs));
  }
  return out;
}

ScenarioBuild build_mop_sweep(const BodyModel& model, int frames) {
  const int l_sho = joint_id(model, "l_shoulder");
  const int l_elb = joint_id(model, "l_elbow");
  const int l_wri = joint_id(model, "l_wrist");
  const int r_sho = joint_id(model, "r_shoulder");
  const int r_elb = joint_id(model, "r_elbow");
  const int r_wri = joint_id(model, "r_wrist");
  const int l_hip = joint_id(model, "l_hip");
  const int r_hip = joint_id(model, "r_hip");

  const auto rest = rest_joint_positions(model.tree);
  HumanState pose = base_state(model);

  // Both arms swing forward-inward about +y until the palms face each other
  // across the body midline, pressing opposite faces of the shaft.
  const double sho_yaw = 75.0 * kPi / 180.0;
  const double elb_yaw = 51.2 * kPi / 180.0;
  pose.joint_rotations[l_sho] = Vec3(0, -sho_yaw, 0);
  pose.joint_rotations[l_elb] = Vec3(0, -elb_yaw, 0);
  pose.joint_rotations[r_sho] = Vec3(0, sho_yaw, 0);
  pose.joint_rotations[r_elb] = Vec3(0, elb_yaw, 0);

  const FKResult fk = forward_kinematics(model, pose);
  const Vec3 palm_front_l_rest =
      rest[l_wri] + Vec3(kPalmForward + kPalmHalf.x(), kPalmLift, kPalmBack);
  const Vec3 palm_front_r_rest =
      rest[r_wri] + Vec3(-(kPalmForward + kPalmHalf.x()), kPalmLift, kPalmBack);
  const Vec3 palm_l = fk.joint_transforms[l_elb].apply(palm_front_l_rest);
  const Vec3 palm_r = fk.joint_transforms[r_elb].apply(palm_front_r_rest);
  const Vec3 normal_l = fk.joint_transforms[l_elb].linear * Vec3(1, 0, 0);
  const Vec3 normal_r = fk.joint_transforms[r_elb].linear * Vec3(-1, 0, 0);

  // Square shaft turned 45 degrees so each palm is antiparallel to one of
  // the two near faces; the axis splits the gap between the palms.
  const double shaft_half = 0.025;
  const Vec3 axis_point = 0.5 * ((palm_l + (shaft_half + 0.004) * normal_l) +
                                 (palm_r + (shaft_half + 0.004) * normal_r));
  const Vec3 shaft_dir = Vec3(0, -0.966, 0.259).normalized();
  const Vec3 top = axis_point - 0.35 * shaft_dir;
  const Vec3 bottom = top + ((0.10 - top.y()) / shaft_dir.y()) * shaft_dir;

  Mesh shaft;
  {
    const double len = (bottom - top).norm();
    Mesh local = make_box_grid(Vec3(0, -len / 2.0, 0),
                               Vec3(shaft_half, len / 2.0, shaft_half),
                               Eigen::Vector3i(2, 36, 2));
    const Vec3 up = -shaft_dir;
    Vec3 u = -normal_l + normal_l.dot(shaft_dir) * shaft_dir;
    u.normalize();
    Mat3 r;
    r.col(0) = u;
    r.col(1) = up;
    r.col(2) = u.cross(up);
    for (auto& v : local.vertices) v = r * v + top;
    shaft = std::move(local);
  }
  Mesh head = make_box_grid(bottom + Vec3(0, -0.02, 0.03),
                            Vec3(0.16, 0.03, 0.06), Eigen::Vector3i(5, 1, 2));
  const int shaft_verts = static_cast<int>(shaft.vertices.size());
  for (auto& f : head.faces)
    shaft.faces.push_back({f[0] + shaft_verts, f[1] + shaft_verts, f[2] + shaft_verts});
  shaft.vertices.insert(shaft.vertices.end(), head.vertices.begin(),
                        head.vertices.end());
  auto mesh = std::make_shared<Mesh>(std::move(shaft));

  ScenarioBuild out;
  out.object_mesh = mesh;
  for (int f = 0; f < frames; ++f) {
    const double p = phase(f, frames);
    FrameState fs;
    fs.human = pose;
    fs.human.root_rotation = Vec3(0, 0.75 * std::sin(p), 0);
    fs.human.root_translation = Vec3(0.14 * std::sin(p), 0, 0.05 * std::sin(2.0 * p));
    fs.human.joint_rotations[l_hip] += Vec3(-0.05 * std::sin(p), 0, 0);
    fs.human.joint_rotations[r_hip] += Vec3(0.05 * std::sin(p), 0, 0);
    fs.object.emplace();
    fs.object->rotation = fs.human.root_rotation;
    fs.object->translation = fs.human.root_translation;
    fs.object->mesh = mesh;
    out.truth.push_back(std::move(fs));
  }
  return out;
}

ScenarioBuild build_hold(const BodyModel& model, int frames) {
  // Identity pose, constant frames, object far from the body: every term of
  // the tracking objective is exactly stationary at the truth.
  auto mesh = std::make_shared<Mesh>(
      make_box_grid(Vec3(1.5, 0.25, 0.8), Vec3(0.2, 0.2, 0.2), 4));
  ScenarioBuild out;
  out.object_mesh = mesh;
  for (int f = 0; f < frames; ++f) {
    FrameState fs;
    fs.human = base_state(model);
    fs.object.emplace();
    fs.object->mesh = mesh;
    out.truth.push_back(std::move(fs));
  }
  return out;
}

ScenarioBuild build_scenario(const BodyModel& model,
                             const SyntheticScenario& scenario) {
  if (scenario.name == "carry-box") return build_carry_box(model, scenario.frames);
  if (scenario.name == "sit-still") return build_sit_still(model, scenario.frames);
  if (scenario.name == "mop-sweep") return build_mop_sweep(model, scenario.frames);
  if (scenario.name == "hold") return build_hold(model, scenario.frames);
  throw InvalidInputError("unknown scenario: " + scenario.name);
}

Vec3 joints_centroid(const BodyModel& model, const HumanState& state) {
  const FKResult fk = forward_kinematics(model, state);
  Vec3 c = Vec3::Zero();
  for (const auto& p : fk.joint_positions) c += p;
  return c / static_cast<double>(fk.joint_positions.size());
}

KeypointFrame detector_frame(const BodyModel& model,
                             std::span<const Vec3> joints, const Camera& cam,
                             int view_id, double noise_sigma,
                             double occlusion_rate, Rng& rng, int frame_index) {
  int slots = 0;
  for (const auto& [det, joint] : model.keypoint_map)
    slots = std::max(slots, det + 1);
  slots = std::max(slots, 18);  // detector layout always carries 18 slots

  KeypointFrame out;
  out.view_id = view_id;
  out.points.assign(slots, Vec2::Zero());
  out.confidence.assign(slots, 0.0);
  for (const auto& [det, joint] : model.keypoint_map) {
    // Fixed draw order keeps the stream deterministic whatever the outcome.
    const double occl = rng.uniform();
    const double n1 = rng.gaussian();
    const double n2 = rng.gaussian();
    Vec2 uv;
    try {
      uv = project(cam, joints[joint]);
    } catch (const BehindCameraError&) {
      throw ScenarioError("joint " + model.tree.joint_name[joint] +
                          " behind camera in frame " +
                          std::to_string(frame_index) + " view " +
                          std::to_string(view_id));
    }
    if (occl < occlusion_rate) continue;  // dropped keypoint
    out.points[det] = uv + noise_sigma * Vec2(n1, n2);
    out.confidence[det] = 1.0;
  }
  return out;
}

}  // namespace

void SyntheticScenario::validate() const {
  if (frames < 1) throw InvalidConfigError("scenario frames must be >= 1");
  if (!(noise_sigma >= 0.0))
    throw InvalidConfigError("noise_sigma must be >= 0");
  if (!(occlusion_rate >= 0.0 && occlusion_rate < 1.0))
    throw InvalidConfigError("occlusion_rate must lie in [0, 1)");
  if (static_view_count < 1 || !(camera_radius > 0.0))
    throw InvalidConfigError("scenario camera setup is invalid");
}

std::vector<Camera> default_static_ring(const Vec3& target, int count,
                                        double radius) {
  std::vector<Camera> cams;
  for (int i = 0; i < count; ++i) {
    const double angle = 2.0 * kPi * i / count;
    const Vec3 eye = target + radius * Vec3(std::sin(angle), 0, std::cos(angle));
    cams.push_back(
        make_look_at_camera(eye, target, Vec2(1000, 1000), 1000, 1000));
  }
  return cams;
}

Camera default_motion_camera(const Vec3& target, double radius) {
  return make_look_at_camera(target + Vec3(0, 0, radius), target,
                             Vec2(1000, 1000), 1000, 1000);
}

GeneratedScenario generate(const BodyModel& model,
                           const SyntheticScenario& scenario,
                           const ContactParams& contact_params) {
  scenario.validate();
  contact_params.validate();
  model.validate();

  GeneratedScenario out;
  auto build = build_scenario(model, scenario);
  out.truth = std::move(build.truth);
  out.object_mesh = build.object_mesh;

  const Vec3 center = joints_centroid(model, out.truth[0].human);
  out.static_cameras = default_static_ring(center, scenario.static_view_count,
                                           scenario.camera_radius);
  out.motion_camera = default_motion_camera(center, scenario.camera_radius);

  Rng rng(scenario.seed);

  // Static stage: frame-0 pose seen from the ring.
  const FKResult fk0 = forward_kinematics(model, out.truth[0].human);
  for (size_t v = 0; v < out.static_cameras.size(); ++v)
    out.static_keypoints.push_back(detector_frame(
        model, fk0.joint_positions, out.static_cameras[v], static_cast<int>(v),
        scenario.noise_sigma, scenario.occlusion_rate, rng, 0));

  // Motion stage: every frame seen from the single frontal camera.
  for (int f = 0; f < scenario.frames; ++f) {
    const FKResult fk = forward_kinematics(model, out.truth[f].human);
    out.motion_keypoints.push_back(
        detector_frame(model, fk.joint_positions, out.motion_camera, 0,
                       scenario.noise_sigma, scenario.occlusion_rate, rng, f));
  }

  // Contacts from the frame-0 composition, held fixed for all frames.
  out.object_samples = sample_object_surface(
      *out.object_mesh, contact_params.n_samples, contact_params.seed_index);
  const auto posed_vertices = skin_vertices(model, fk0, out.truth[0].human);
  const auto posed_normals =
      vertex_normals(Mesh{posed_vertices, model.faces});
  const auto candidates =
      gather_candidates(model, posed_vertices, posed_normals);
  const auto posed = pose_samples(*out.truth[0].object, out.object_samples);
  const double sigma_dist =
      LossWeights::defaults_for(model).gm_sigma_dist;
  out.contacts =
      extract_contacts(posed, candidates, contact_params.tau_n,
                       contact_params.tau_d, sigma_dist, contact_params.gate);
  return out;
}

MetricsRecord evaluate(const BodyModel& model,
                       const SurfaceSamples& rest_samples,
                       const ContactPairSet& contacts, const Camera& camera,
                       std::span<const FrameState> recovered,
                       std::span<const FrameState> truth) {
  if (recovered.size() != truth.size())
    throw InvalidInputError("evaluate: frame counts differ");
  if (recovered.empty()) throw InvalidInputError("evaluate: no frames");

  MetricsRecord record;
  const int joints = model.tree.joint_count();
  std::vector<std::vector<Vec3>> rec_joints(recovered.size());
  std::vector<Eigen::VectorXd> rec_params, tru_params;

  for (size_t f = 0; f < recovered.size(); ++f) {
    FrameMetrics m;
    const FKResult fk_rec = forward_kinematics(model, recovered[f].human);
    const FKResult fk_tru = forward_kinematics(model, truth[f].human);
    rec_joints[f] = fk_rec.joint_positions;

    double err = 0.0, err_aligned = 0.0, reproj = 0.0;
    const Vec3 root_offset =
        fk_rec.joint_positions[0] - fk_tru.joint_positions[0];
    for (int k = 0; k < joints; ++k) {
      const Vec3 d = fk_rec.joint_positions[k] - fk_tru.joint_positions[k];
      err += d.norm();
      err_aligned += (d - root_offset).norm();
    }
    m.joint_error = err / joints;
    m.joint_error_root_aligned = err_aligned / joints;

    for (const auto& [det, joint] : model.keypoint_map) {
      (void)det;
      reproj += (project_clamped(camera, fk_rec.joint_positions[joint]) -
                 project_clamped(camera, fk_tru.joint_positions[joint]))
                    .norm();
    }
    m.reprojection_error = reproj / model.keypoint_map.size();

    if (recovered[f].object.has_value()) {
      std::vector<Vec3> posed_samples;
      transform_points(*recovered[f].object, rest_samples.points,
                       posed_samples);
      if (!contacts.empty()) {
        const auto posed_vertices =
            skin_vertices(model, fk_rec, recovered[f].human);
        double dist = 0.0;
        for (const auto& [i, j] : contacts.pairs)
          dist += (posed_vertices[j] - posed_samples[i]).norm();
        m.contact_distance = dist / contacts.pairs.size();
      }
      const auto capsules = capsule_proxies(model, fk_rec.joint_positions,
                                            recovered[f].human.scale);
      int inside = 0;
      double depth_sum = 0.0;
      for (const auto& p : posed_samples) {
        double best = -std::numeric_limits<double>::infinity();
        for (const auto& c : capsules)
          best = std::max(best, c.radius - closest_point_on_segment(c.a, c.b, p).distance);
        if (best > 0.0) {
          ++inside;
          depth_sum += best;
        }
      }
      m.penetration_fraction =
          static_cast<double>(inside) / rest_samples.count();
      m.penetration_depth = inside > 0 ? depth_sum / inside : 0.0;
    }
    record.frames.push_back(m);
    rec_params.push_back(frame_parameters(recovered[f], model));
    tru_params.push_back(frame_parameters(truth[f], model));
  }

  auto& mean = record.mean;
  for (const auto& m : record.frames) {
    mean.joint_error += m.joint_error;
    mean.joint_error_root_aligned += m.joint_error_root_aligned;
    mean.reprojection_error += m.reprojection_error;
    mean.contact_distance += m.contact_distance;
    mean.penetration_fraction += m.penetration_fraction;
    mean.penetration_depth += m.penetration_depth;
  }
  const double n = static_cast<double>(record.frames.size());
  mean.joint_error /= n;
  mean.joint_error_root_aligned /= n;
  mean.reprojection_error /= n;
  mean.contact_distance /= n;
  mean.penetration_fraction /= n;
  mean.penetration_depth /= n;

  auto jitter_of_params = [](const std::vector<Eigen::VectorXd>& ps) {
    if (ps.size() < 3) return 0.0;
    double sum = 0.0;
    for (size_t f = 1; f + 1 < ps.size(); ++f)
      sum += (ps[f + 1] - 2.0 * ps[f] + ps[f - 1]).norm();
    return sum / static_cast<double>(ps.size() - 2);
  };
  auto jitter_of_joints = [&](bool use_truth) {
    if (recovered.size() < 3) return 0.0;
    double sum = 0.0;
    int count = 0;
    std::vector<std::vector<Vec3>> tru_list;
    if (use_truth)
      for (const auto& t : truth)
        tru_list.push_back(forward_kinematics(model, t.human).joint_positions);
    const auto& js = use_truth ? tru_list : rec_joints;
    for (size_t f = 1; f + 1 < js.size(); ++f) {
      for (int k = 0; k < joints; ++k) {
        sum += (js[f + 1][k] - 2.0 * js[f][k] + js[f - 1][k]).norm();
        ++count;
      }
    }
    return sum / count;
  };
  record.jitter_params = jitter_of_params(rec_params);
  record.jitter_params_truth = jitter_of_params(tru_params);
  record.jitter_joints = jitter_of_joints(false);
  record.jitter_joints_truth = jitter_of_joints(true);
  return record;
}

}  // namespace anchorfit
