#include "anchorfit/body_model.hpp"

#include "anchorfit/errors.hpp"

#include <cmath>
#include <set>
#include <string>

namespace anchorfit {

void Mesh::validate() const {
  const int n = static_cast<int>(vertices.size());
  for (const auto& v : vertices)
    if (!is_finite(v)) throw InvalidInputError("mesh vertex is not finite");
  for (const auto& f : faces)
    for (int idx : f)
      if (idx < 0 || idx >= n)
        throw InvalidInputError("mesh face index out of range: " +
                                std::to_string(idx));
}

void KinematicTree::validate() const {
  const int n = joint_count();
  if (n < 2) throw InvalidInputError("kinematic tree needs at least 2 joints");
  if (rest_offset.size() != parent.size() || joint_name.size() != parent.size())
    throw InvalidInputError("kinematic tree arrays disagree in length");
  if (parent[0] != -1)
    throw InvalidInputError("joint 0 must be the root (parent -1)");
  for (int k = 1; k < n; ++k) {
    if (parent[k] < 0 || parent[k] >= k)
      throw InvalidInputError(
          "joints must be in topological order (parent < child), joint " +
          std::to_string(k));
  }
  for (const auto& o : rest_offset)
    if (!is_finite(o)) throw InvalidInputError("rest offset is not finite");
}

void BodyModel::validate() const {
  tree.validate();
  const int n_verts = vertex_count();
  const int n_joints = tree.joint_count();
  if (static_cast<int>(skin_weights.size()) != n_verts)
    throw InvalidInputError("skin_weights size must match vertex count");
  for (int v = 0; v < n_verts; ++v) {
    double sum = 0.0;
    for (const auto& iw : skin_weights[v]) {
      if (iw.joint < 0 || iw.joint >= n_joints)
        throw InvalidInputError("skin weight joint index out of range");
      if (iw.weight < 0.0)
        throw InvalidInputError("skin weights must be nonnegative");
      sum += iw.weight;
    }
    if (std::abs(sum - 1.0) > 1e-6)
      throw InvalidInputError("skin weights of vertex " + std::to_string(v) +
                              " sum to " + std::to_string(sum));
  }
  for (const auto& f : faces)
    for (int idx : f)
      if (idx < 0 || idx >= n_verts)
        throw InvalidInputError("face index out of range");
  for (const auto& c : shape_dirs)
    if (static_cast<int>(c.size()) != n_verts)
      throw InvalidInputError("shape_dirs must have one entry per vertex");
  for (int idx : contact_candidates)
    if (idx < 0 || idx >= n_verts)
      throw InvalidInputError("contact candidate index out of range");
  if (keypoint_map.size() > 18)
    throw InvalidInputError("keypoint_map has more than 18 entries");
  std::set<int> seen;
  for (const auto& [det, joint] : keypoint_map) {
    if (det < 0 || !seen.insert(det).second)
      throw InvalidInputError("keypoint_map detector indices must be distinct");
    if (joint < 0 || joint >= n_joints)
      throw InvalidInputError("keypoint_map joint index out of range");
  }
  if (static_cast<int>(bone_radii.size()) != n_joints)
    throw InvalidInputError("bone_radii must have one entry per joint");
}

Mesh BodyModel::template_mesh() const { return Mesh{template_vertices, faces}; }

double BodyModel::template_height() const {
  if (template_vertices.empty()) return 0.0;
  double lo = template_vertices[0].y(), hi = lo;
  for (const auto& v : template_vertices) {
    lo = std::min(lo, v.y());
    hi = std::max(hi, v.y());
  }
  return hi - lo;
}

HumanState HumanState::rest(const BodyModel& model) {
  HumanState s;
  s.joint_rotations.assign(model.tree.joint_count(), Vec3::Zero());
  s.shape_coeffs = Eigen::VectorXd::Zero(model.shape_count());
  return s;
}

void HumanState::validate(const BodyModel& model) const {
  if (!(scale > 0.0)) throw InvalidInputError("scale must be positive");
  if (!std::isfinite(scale) || !is_finite(root_rotation) ||
      !is_finite(root_translation))
    throw InvalidInputError("human state has non-finite parameters");
  if (static_cast<int>(joint_rotations.size()) != model.tree.joint_count())
    throw ContractViolationError("joint_rotations length must match the rig");
  for (const auto& r : joint_rotations) {
    if (!is_finite(r))
      throw InvalidInputError("joint rotation is not finite");
    if (r.norm() > kPi + 1e-6)
      throw InvalidInputError("axis-angle norm exceeds pi (not canonical)");
  }
  if (root_rotation.norm() > kPi + 1e-6)
    throw InvalidInputError("root rotation norm exceeds pi (not canonical)");
  if (shape_coeffs.size() != model.shape_count())
    throw ContractViolationError("shape_coeffs length must match the rig");
}

void HumanState::canonicalize() {
  root_rotation = canonicalize_axis_angle(root_rotation);
  for (auto& r : joint_rotations) r = canonicalize_axis_angle(r);
}

std::vector<Vec3> rest_joint_positions(const KinematicTree& tree) {
  std::vector<Vec3> pos(tree.joint_count());
  pos[0] = tree.rest_offset[0];
  for (int k = 1; k < tree.joint_count(); ++k)
    pos[k] = pos[tree.parent[k]] + tree.rest_offset[k];
  return pos;
}

FKResult forward_kinematics(const BodyModel& model, const HumanState& state) {
  state.validate(model);
  const auto& tree = model.tree;
  const int n = tree.joint_count();

  FKResult out;
  out.body_rotation.resize(n);
  out.body_position.resize(n);
  out.rest_position = rest_joint_positions(tree);
  out.joint_positions.resize(n);
  out.joint_transforms.resize(n);
  out.root_rotation = axis_angle_to_matrix(state.root_rotation);

  out.body_rotation[0] = axis_angle_to_matrix(state.joint_rotations[0]);
  out.body_position[0] = tree.rest_offset[0];
  for (int k = 1; k < n; ++k) {
    const int p = tree.parent[k];
    out.body_rotation[k] =
        out.body_rotation[p] * axis_angle_to_matrix(state.joint_rotations[k]);
    out.body_position[k] =
        out.body_rotation[p] * tree.rest_offset[k] + out.body_position[p];
  }

  const Mat3 world_linear = state.scale * out.root_rotation;
  for (int k = 0; k < n; ++k) {
    out.joint_positions[k] =
        world_linear * out.body_position[k] + state.root_translation;
    // Skinning map: rotate about the rest joint, then the global transform.
    AffineTransform t;
    t.linear = world_linear * out.body_rotation[k];
    t.translation =
        world_linear * (out.body_position[k] -
                        out.body_rotation[k] * out.rest_position[k]) +
        state.root_translation;
    out.joint_transforms[k] = t;
  }
  return out;
}

namespace {

Vec3 shaped_vertex(const BodyModel& model, const HumanState& state, int v) {
  Vec3 p = model.template_vertices[v];
  for (int c = 0; c < model.shape_count(); ++c)
    p += state.shape_coeffs[c] * model.shape_dirs[c][v];
  return p;
}

Vec3 skin_one(const BodyModel& model, const FKResult& fk,
              const HumanState& state, int v) {
  const Vec3 rest = shaped_vertex(model, state, v);
  Vec3 out = Vec3::Zero();
  double weight_sum = 0.0;
  for (const auto& iw : model.skin_weights[v]) {
    out += iw.weight * fk.joint_transforms[iw.joint].apply(rest);
    weight_sum += iw.weight;
  }
  if (std::abs(weight_sum - 1.0) > 1e-6)
    throw ContractViolationError("skin weights of vertex " +
                                 std::to_string(v) + " are not normalized");
  return out;
}

}  // namespace

std::vector<Vec3> skin_vertices(const BodyModel& model, const FKResult& fk,
                                const HumanState& state) {
  std::vector<Vec3> out(model.vertex_count());
  for (int v = 0; v < model.vertex_count(); ++v)
    out[v] = skin_one(model, fk, state, v);
  return out;
}

void skin_vertex_subset(const BodyModel& model, const FKResult& fk,
                        const HumanState& state, std::span<const int> vertices,
                        std::vector<Vec3>& out) {
  out.resize(vertices.size());
  for (size_t i = 0; i < vertices.size(); ++i)
    out[i] = skin_one(model, fk, state, vertices[i]);
}

std::vector<Capsule> capsule_proxies(const BodyModel& model,
                                     std::span<const Vec3> joint_positions,
                                     double scale) {
  const auto& tree = model.tree;
  if (joint_positions.size() != static_cast<size_t>(tree.joint_count()))
    throw ContractViolationError("joint positions must match the rig");
  std::vector<Capsule> capsules;
  capsules.reserve(tree.joint_count() - 1);
  for (int k = 1; k < tree.joint_count(); ++k) {
    Capsule c;
    c.a = joint_positions[tree.parent[k]];
    c.b = joint_positions[k];
    c.radius = model.bone_radii[k] * scale;
    capsules.push_back(c);
  }
  return capsules;
}

std::vector<std::pair<int, int>> non_adjacent_bone_pairs(
    const KinematicTree& tree) {
  // Bone k spans joints {parent[k], k}; adjacency = sharing a joint.
  std::vector<std::pair<int, int>> pairs;
  for (int i = 1; i < tree.joint_count(); ++i) {
    for (int j = i + 1; j < tree.joint_count(); ++j) {
      const int pi = tree.parent[i], pj = tree.parent[j];
      if (i == pj || j == pi || pi == pj) continue;
      pairs.emplace_back(i, j);
    }
  }
  return pairs;
}

}  // namespace anchorfit
