#pragma once

#include "anchorfit/geometry.hpp"
#include "anchorfit/mesh.hpp"

#include <span>
#include <string>
#include <utility>
#include <vector>

namespace anchorfit {

// Joint hierarchy. Joint 0 is the single root (parent == -1); every other
// joint's parent index is strictly smaller than its own, so arrays are
// already in topological order.
struct KinematicTree {
  std::vector<int> parent;
  std::vector<Vec3> rest_offset;  // child position in the parent frame
  std::vector<std::string> joint_name;

  int joint_count() const { return static_cast<int>(parent.size()); }
  void validate() const;
};

struct VertexInfluence {
  int joint = 0;
  double weight = 0.0;
};

struct BodyModel {
  KinematicTree tree;
  std::vector<Vec3> template_vertices;
  std::vector<std::array<int, 3>> faces;
  std::vector<std::vector<VertexInfluence>> skin_weights;  // per vertex
  // shape_dirs[c][v] is the vertex-v displacement of shape coefficient c.
  std::vector<std::vector<Vec3>> shape_dirs;
  std::vector<int> contact_candidates;            // vertex indices
  std::vector<std::pair<int, int>> keypoint_map;  // detector index -> joint
  std::vector<double> bone_radii;                 // per joint; [0] unused

  int vertex_count() const { return static_cast<int>(template_vertices.size()); }
  int shape_count() const { return static_cast<int>(shape_dirs.size()); }
  void validate() const;

  Mesh template_mesh() const;
  // Vertical extent of the template mesh; scale-relative defaults hang off it.
  double template_height() const;
};

// Per-frame human pose parameters. Rotations are axis-angle, radians.
struct HumanState {
  double scale = 1.0;
  Vec3 root_rotation = Vec3::Zero();
  Vec3 root_translation = Vec3::Zero();
  std::vector<Vec3> joint_rotations;
  Eigen::VectorXd shape_coeffs;

  static HumanState rest(const BodyModel& model);
  void validate(const BodyModel& model) const;
  void canonicalize();
};

struct FKResult {
  std::vector<Vec3> joint_positions;               // world space
  std::vector<AffineTransform> joint_transforms;   // skinning maps, rest -> world
  // Intermediates consumed by the gradient code.
  std::vector<Mat3> body_rotation;  // cumulative rotation per joint, body frame
  std::vector<Vec3> body_position;  // joint position in the body frame
  std::vector<Vec3> rest_position;  // joint position at rest (identity pose)
  Mat3 root_rotation = Mat3::Identity();
};

// Joint positions at the identity pose (cumulative rest offsets).
std::vector<Vec3> rest_joint_positions(const KinematicTree& tree);

FKResult forward_kinematics(const BodyModel& model, const HumanState& state);

// Linear blend skinning against the transforms from forward_kinematics.
std::vector<Vec3> skin_vertices(const BodyModel& model, const FKResult& fk,
                                const HumanState& state);

// Skins only the requested vertex indices (into `out`, same order).
void skin_vertex_subset(const BodyModel& model, const FKResult& fk,
                        const HumanState& state, std::span<const int> vertices,
                        std::vector<Vec3>& out);

// One capsule per parent->child bone; radius = bone_radii[child] * scale.
std::vector<Capsule> capsule_proxies(const BodyModel& model,
                                     std::span<const Vec3> joint_positions,
                                     double scale);

// Bone pairs (identified by child joint) that share no joint; used by the
// self-penetration penalty.
std::vector<std::pair<int, int>> non_adjacent_bone_pairs(const KinematicTree& tree);

}  // namespace anchorfit
