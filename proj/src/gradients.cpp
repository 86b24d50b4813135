#include "anchorfit/gradients.hpp"

#include "anchorfit/errors.hpp"
#include "anchorfit/parallel.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <string>

namespace anchorfit {

const char* param_block_name(ParamBlock block) {
  switch (block) {
    case ParamBlock::HumanRootRot: return "human_root_rot";
    case ParamBlock::HumanRootTrans: return "human_root_trans";
    case ParamBlock::HumanJointRots: return "human_joint_rots";
    case ParamBlock::HumanScale: return "human_scale";
    case ParamBlock::HumanShape: return "human_shape";
    case ParamBlock::ObjectRot: return "object_rot";
    case ParamBlock::ObjectTrans: return "object_trans";
  }
  return "?";
}

int ParamLayout::per_frame_size() const {
  return 3 + 3 + 3 * joint_count + 1 + shape_count + (has_object ? 6 : 0);
}

const BlockDesc& ParamLayout::find(int frame, ParamBlock block) const {
  for (const auto& b : blocks)
    if (b.frame == frame && b.block == block) return b;
  throw ContractViolationError("layout block not found");
}

int ParamLayout::unfrozen_count() const {
  int n = 0;
  for (const auto& b : blocks)
    if (!b.frozen) n += b.length - b.frozen_prefix;
  return n;
}

namespace {

ParamLayout build_layout(const BodyModel& model, int frames, bool with_object,
                         bool scale_free) {
  ParamLayout layout;
  layout.frame_count = frames;
  layout.joint_count = model.tree.joint_count();
  layout.shape_count = model.shape_count();
  layout.has_object = with_object;
  int at = 0;
  auto push = [&](int f, ParamBlock block, int len, bool frozen,
                  int frozen_prefix = 0) {
    layout.blocks.push_back({f, block, at, len, frozen, frozen_prefix});
    at += len;
  };
  for (int f = 0; f < frames; ++f) {
    push(f, ParamBlock::HumanRootRot, 3, false);
    push(f, ParamBlock::HumanRootTrans, 3, false);
    // The root joint's own rotation stays frozen: rotating it is exactly
    // the global rotation about the root pivot.
    push(f, ParamBlock::HumanJointRots, 3 * layout.joint_count, false, 3);
    push(f, ParamBlock::HumanScale, 1, !scale_free);
    push(f, ParamBlock::HumanShape, layout.shape_count, true);
    if (with_object) {
      push(f, ParamBlock::ObjectRot, 3, false);
      push(f, ParamBlock::ObjectTrans, 3, false);
    }
  }
  layout.total_size = at;
  return layout;
}

}  // namespace

ParamLayout ParamLayout::motion(const BodyModel& model, int frames) {
  return build_layout(model, frames, /*with_object=*/true, /*scale_free=*/false);
}

ParamLayout ParamLayout::static_stage(const BodyModel& model) {
  return build_layout(model, 1, /*with_object=*/false, /*scale_free=*/true);
}

void ParamVector::validate() const {
  if (values.size() != layout.total_size ||
      frozen.size() != static_cast<size_t>(layout.total_size))
    throw ContractViolationError("parameter vector does not match its layout");
}

ParamVector pack(const ParamLayout& layout, std::span<const FrameState> frames) {
  if (static_cast<int>(frames.size()) != layout.frame_count)
    throw ContractViolationError("pack: frame count mismatch");
  ParamVector out;
  out.layout = layout;
  out.values.resize(layout.total_size);
  out.frozen.assign(layout.total_size, 0);
  for (const auto& b : layout.blocks) {
    const FrameState& fs = frames[b.frame];
    auto seg = out.values.segment(b.offset, b.length);
    switch (b.block) {
      case ParamBlock::HumanRootRot: seg = fs.human.root_rotation; break;
      case ParamBlock::HumanRootTrans: seg = fs.human.root_translation; break;
      case ParamBlock::HumanJointRots: {
        if (static_cast<int>(fs.human.joint_rotations.size()) !=
            layout.joint_count)
          throw ContractViolationError("pack: joint rotation count mismatch");
        for (int j = 0; j < layout.joint_count; ++j)
          seg.segment<3>(3 * j) = fs.human.joint_rotations[j];
        break;
      }
      case ParamBlock::HumanScale: seg[0] = fs.human.scale; break;
      case ParamBlock::HumanShape: {
        if (fs.human.shape_coeffs.size() != layout.shape_count)
          throw ContractViolationError("pack: shape coefficient count mismatch");
        seg = fs.human.shape_coeffs;
        break;
      }
      case ParamBlock::ObjectRot:
        if (!fs.object) throw ContractViolationError("pack: missing object");
        seg = fs.object->rotation;
        break;
      case ParamBlock::ObjectTrans:
        if (!fs.object) throw ContractViolationError("pack: missing object");
        seg = fs.object->translation;
        break;
    }
    if (b.frozen)
      std::fill(out.frozen.begin() + b.offset,
                out.frozen.begin() + b.offset + b.length, uint8_t{1});
    else if (b.frozen_prefix > 0)
      std::fill(out.frozen.begin() + b.offset,
                out.frozen.begin() + b.offset + b.frozen_prefix, uint8_t{1});
  }
  return out;
}

namespace {

FrameState unpack_frame(const ParamVector& params, int frame,
                        std::shared_ptr<const Mesh> mesh) {
  const ParamLayout& layout = params.layout;
  FrameState fs;
  fs.human.joint_rotations.resize(layout.joint_count);
  fs.human.shape_coeffs.resize(layout.shape_count);
  if (layout.has_object) fs.object.emplace();
  for (const auto& b : layout.blocks) {
    if (b.frame != frame) continue;
    const auto seg = params.values.segment(b.offset, b.length);
    switch (b.block) {
      case ParamBlock::HumanRootRot: fs.human.root_rotation = seg; break;
      case ParamBlock::HumanRootTrans: fs.human.root_translation = seg; break;
      case ParamBlock::HumanJointRots:
        for (int j = 0; j < layout.joint_count; ++j)
          fs.human.joint_rotations[j] = seg.segment<3>(3 * j);
        break;
      case ParamBlock::HumanScale: fs.human.scale = seg[0]; break;
      case ParamBlock::HumanShape: fs.human.shape_coeffs = seg; break;
      case ParamBlock::ObjectRot: fs.object->rotation = seg; break;
      case ParamBlock::ObjectTrans: fs.object->translation = seg; break;
    }
  }
  if (fs.object) fs.object->mesh = std::move(mesh);
  return fs;
}

}  // namespace

std::vector<FrameState> unpack(const ParamVector& params,
                               std::shared_ptr<const Mesh> mesh) {
  params.validate();
  std::vector<FrameState> frames;
  frames.reserve(params.layout.frame_count);
  for (int f = 0; f < params.layout.frame_count; ++f)
    frames.push_back(unpack_frame(params, f, mesh));
  return frames;
}

void canonicalize_rotations(ParamVector& params) {
  for (const auto& b : params.layout.blocks) {
    if (b.frozen) continue;
    const bool rot_block = b.block == ParamBlock::HumanRootRot ||
                           b.block == ParamBlock::HumanJointRots ||
                           b.block == ParamBlock::ObjectRot;
    if (!rot_block) continue;
    for (int at = 0; at < b.length; at += 3) {
      const Vec3 aa = params.values.segment<3>(b.offset + at);
      if (aa.norm() > kPi)
        params.values.segment<3>(b.offset + at) = canonicalize_axis_angle(aa);
    }
  }
}

void project_to_valid(ParamVector& params) {
  canonicalize_rotations(params);
  for (const auto& b : params.layout.blocks) {
    if (b.frozen || b.block != ParamBlock::HumanScale) continue;
    for (int k = 0; k < b.length; ++k)
      params.values[b.offset + k] = std::max(params.values[b.offset + k], 1e-6);
  }
}

double smoothness_from_packed(const ParamVector& params) {
  const int frames = params.layout.frame_count;
  if (frames < 3) return 0.0;
  const int stride = params.layout.per_frame_size();
  double sum = 0.0;
  for (int f = 1; f + 1 < frames; ++f) {
    sum += (params.values.segment((f + 1) * stride, stride) -
            2.0 * params.values.segment(f * stride, stride) +
            params.values.segment((f - 1) * stride, stride))
               .squaredNorm();
  }
  return sum / static_cast<double>(frames - 2);
}

namespace {

// Per-frame gradient accumulators, written into the flat vector at the end.
struct FrameGradient {
  Vec3 root_rot = Vec3::Zero();
  Vec3 root_trans = Vec3::Zero();
  double scale = 0.0;
  std::vector<Vec3> joint_rot;
  Vec3 object_rot = Vec3::Zero();
  Vec3 object_trans = Vec3::Zero();

  explicit FrameGradient(int joints) : joint_rot(joints, Vec3::Zero()) {}
};

Vec3 shaped_vertex(const BodyModel& model, const HumanState& state, int v) {
  Vec3 p = model.template_vertices[v];
  for (int c = 0; c < model.shape_count(); ++c)
    p += state.shape_coeffs[c] * model.shape_dirs[c][v];
  return p;
}

// Pulls adjoints of world joint positions and world skinned vertices back to
// {root rotation, root translation, scale, joint rotations}.
//
// World map: y = W * x_body + t with W = scale * R(root_rotation).
// FK: R^A_k = R^A_parent * R(theta_k), j_k = R^A_parent * off_k + j_parent.
// Skinned body point: b_v = sum_k w_k (R^A_k (v~ - rest_k) + j_k).
void backprop_frame(const BodyModel& model, const HumanState& state,
                    const FKResult& fk, std::span<const Vec3> posed_vertices,
                    std::span<const Vec3> joint_adjoints,
                    std::span<const std::pair<int, Vec3>> vertex_adjoints,
                    double scale_extra, FrameGradient& out) {
  const int joints = model.tree.joint_count();
  const Mat3 w_linear = state.scale * fk.root_rotation;
  const Mat3 w_t = w_linear.transpose();

  Mat3 w_bar = Mat3::Zero();
  Vec3 t_bar = Vec3::Zero();
  std::vector<Mat3> rot_bar(joints, Mat3::Zero());
  std::vector<Vec3> pos_bar(joints, Vec3::Zero());

  for (int k = 0; k < joints; ++k) {
    const Vec3& adj = joint_adjoints[k];
    if (adj.isZero(0.0)) continue;
    t_bar += adj;
    w_bar += adj * fk.body_position[k].transpose();
    pos_bar[k] += w_t * adj;
  }

  const double inv_scale = 1.0 / state.scale;
  const Mat3 root_t = fk.root_rotation.transpose();
  for (const auto& [v, adj] : vertex_adjoints) {
    t_bar += adj;
    const Vec3 b_v =
        inv_scale * (root_t * (posed_vertices[v] - state.root_translation));
    w_bar += adj * b_v.transpose();
    const Vec3 b_bar = w_t * adj;
    const Vec3 shaped = shaped_vertex(model, state, v);
    for (const auto& iw : model.skin_weights[v]) {
      rot_bar[iw.joint] +=
          (iw.weight * b_bar) *
          (shaped - fk.rest_position[iw.joint]).transpose();
      pos_bar[iw.joint] += iw.weight * b_bar;
    }
  }

  // FK backward, leaves to root.
  for (int k = joints - 1; k >= 1; --k) {
    const int p = model.tree.parent[k];
    const Mat3 local = axis_angle_to_matrix(state.joint_rotations[k]);
    const Mat3 local_bar = fk.body_rotation[p].transpose() * rot_bar[k];
    out.joint_rot[k] +=
        axis_angle_backprop(state.joint_rotations[k], local_bar);
    rot_bar[p] += rot_bar[k] * local.transpose() +
                  pos_bar[k] * model.tree.rest_offset[k].transpose();
    pos_bar[p] += pos_bar[k];
  }
  out.joint_rot[0] +=
      axis_angle_backprop(state.joint_rotations[0], rot_bar[0]);

  out.scale += w_bar.cwiseProduct(fk.root_rotation).sum() + scale_extra;
  out.root_rot +=
      axis_angle_backprop(state.root_rotation, state.scale * w_bar);
  out.root_trans += t_bar;
}

struct ObjectAdjoint {
  Mat3 rot_bar = Mat3::Zero();
  Vec3 trans_bar = Vec3::Zero();
};

// One frame of the tracking objective: forward pieces plus adjoint seeds for
// every term except smoothness (which lives on the packed vector).
void motion_frame_gradient(const TrackingProblem& problem,
                           const FrameState& frame, int frame_index,
                           FrameGradient& out) {
  const BodyModel& model = *problem.model;
  const LossWeights& w = problem.weights;
  const int joints = model.tree.joint_count();
  const double frames = static_cast<double>(problem.frame_count());

  const FKResult fk = forward_kinematics(model, frame.human);
  const auto posed_vertices = skin_vertices(model, fk, frame.human);
  std::vector<Vec3> posed_samples;
  transform_points(*frame.object, problem.object_samples.points, posed_samples);
  const auto capsules =
      capsule_proxies(model, fk.joint_positions, frame.human.scale);

  std::vector<Vec3> joint_adj(joints, Vec3::Zero());
  std::vector<std::pair<int, Vec3>> vertex_adj;
  std::vector<Vec3> sample_adj(posed_samples.size(), Vec3::Zero());
  double scale_extra = 0.0;

  // Body keypoints: lambda_j / (L*N) * sum_i w_i rho(|uv - kp|).
  {
    const auto& view = problem.keypoints[frame_index];
    const int n = static_cast<int>(model.keypoint_map.size());
    const double coeff = w.lambda_j / (frames * n);
    const double sq_sigma = w.gm_sigma_align * w.gm_sigma_align;
    for (const auto& [det, joint] : model.keypoint_map) {
      const double conf = view.confidence[det];
      if (conf <= 0.0) continue;
      Eigen::Matrix<double, 2, 3> jac;
      const Vec2 uv =
          project_clamped(problem.camera, fk.joint_positions[joint], &jac);
      const Vec2 r = uv - view.points[det];
      const double q = r.squaredNorm();
      const double denom = sq_sigma + q;
      const double drho_dq = sq_sigma / (denom * denom);
      const Vec2 uv_bar = (coeff * conf * drho_dq * 2.0) * r;
      joint_adj[joint] += jac.transpose() * uv_bar;
    }
  }

  // Contact pairs: lambda_c / (L*|C|) * sum |p_h - p_o|^2.
  if (!problem.contacts.empty()) {
    const double coeff =
        w.lambda_c / (frames * problem.contacts.pairs.size());
    for (const auto& [i, j] : problem.contacts.pairs) {
      const Vec3 d = posed_vertices[j] - posed_samples[i];
      vertex_adj.emplace_back(j, (2.0 * coeff) * d);
      sample_adj[i] -= (2.0 * coeff) * d;
    }
  }

  // Penetration: lambda_pen / (L*N_o) * sum max(0, depth)^2 with
  // depth = max_k (radius_k - dist_k).
  {
    const double coeff =
        w.lambda_pen / (frames * posed_samples.size());
    for (size_t s = 0; s < posed_samples.size(); ++s) {
      double best = -std::numeric_limits<double>::infinity();
      int best_k = -1;
      for (size_t k = 0; k < capsules.size(); ++k) {
        const Capsule& c = capsules[k];
        const double floor = std::max(best, 0.0);
        const double thresh = c.radius - floor;
        if (!(thresh > 0.0)) continue;
        const Vec3 ab = c.b - c.a;
        const double denom = ab.squaredNorm();
        double t = denom > 0 ? (posed_samples[s] - c.a).dot(ab) / denom : 0.0;
        t = t < 0.0 ? 0.0 : (t > 1.0 ? 1.0 : t);
        const double sq = (posed_samples[s] - (c.a + t * ab)).squaredNorm();
        if (sq < thresh * thresh) {
          const double depth = c.radius - std::sqrt(sq);
          if (depth > best) {
            best = depth;
            best_k = static_cast<int>(k);
          }
        }
      }
      if (best_k < 0 || !(best > 0.0)) continue;
      const Capsule& c = capsules[best_k];
      const auto closest =
          closest_point_on_segment(c.a, c.b, posed_samples[s]);
      if (closest.distance < 1e-12) continue;  // on-axis, measure zero
      const Vec3 u = (posed_samples[s] - closest.point) / closest.distance;
      const double g = coeff * 2.0 * best;  // d(penalty)/d(depth)
      sample_adj[s] += g * (-u);
      const int child = best_k + 1;  // capsule k spans parent(child)->child
      joint_adj[model.tree.parent[child]] += g * (1.0 - closest.t) * u;
      joint_adj[child] += g * closest.t * u;
      scale_extra += g * model.bone_radii[child];
    }
  }

  // Self penetration: lambda_reg * self_pen_weight / (L*P) * sum overlap^2.
  {
    const auto bone_pairs = non_adjacent_bone_pairs(model.tree);
    if (!bone_pairs.empty()) {
      const double coeff = w.lambda_reg * w.self_pen_weight /
                           (frames * bone_pairs.size());
      for (const auto& [bi, bj] : bone_pairs) {
        const Capsule& a = capsules[bi - 1];
        const Capsule& b = capsules[bj - 1];
        const auto close = segment_segment_closest(a.a, a.b, b.a, b.b);
        const double overlap = a.radius + b.radius - close.distance;
        if (!(overlap > 0.0) || close.distance < 1e-12) continue;
        const Vec3 u = (close.point_a - close.point_b) / close.distance;
        const double g = coeff * 2.0 * overlap;  // d(penalty)/d(overlap)
        // d(overlap)/d(dist) = -1.
        joint_adj[model.tree.parent[bi]] += g * -(1.0 - close.s) * u;
        joint_adj[bi] += g * -close.s * u;
        joint_adj[model.tree.parent[bj]] += g * (1.0 - close.t) * u;
        joint_adj[bj] += g * close.t * u;
        scale_extra += g * (model.bone_radii[bi] + model.bone_radii[bj]);
      }
    }
  }

  // Pose prior: lambda_reg * pose_prior_weight / (L*J) * sum |theta|^2.
  {
    const double coeff =
        w.lambda_reg * w.pose_prior_weight / (frames * joints);
    for (int j = 0; j < joints; ++j)
      out.joint_rot[j] += (2.0 * coeff) * frame.human.joint_rotations[j];
  }

  backprop_frame(model, frame.human, fk, posed_vertices, joint_adj, vertex_adj,
                 scale_extra, out);

  // Object pose: samples x_i = R(rot) q_i + trans.
  ObjectAdjoint obj;
  for (size_t s = 0; s < sample_adj.size(); ++s) {
    if (sample_adj[s].isZero(0.0)) continue;
    obj.trans_bar += sample_adj[s];
    obj.rot_bar +=
        sample_adj[s] * problem.object_samples.points[s].transpose();
  }
  out.object_rot += axis_angle_backprop(frame.object->rotation, obj.rot_bar);
  out.object_trans += obj.trans_bar;
}

void scatter_frame_gradient(const ParamLayout& layout, int frame,
                            const FrameGradient& fg, Eigen::VectorXd& grad) {
  for (const auto& b : layout.blocks) {
    if (b.frame != frame) continue;
    auto seg = grad.segment(b.offset, b.length);
    switch (b.block) {
      case ParamBlock::HumanRootRot: seg += fg.root_rot; break;
      case ParamBlock::HumanRootTrans: seg += fg.root_trans; break;
      case ParamBlock::HumanJointRots:
        for (size_t j = 0; j < fg.joint_rot.size(); ++j)
          seg.segment<3>(3 * j) += fg.joint_rot[j];
        break;
      case ParamBlock::HumanScale: seg[0] += fg.scale; break;
      case ParamBlock::HumanShape: break;  // frozen by construction
      case ParamBlock::ObjectRot: seg += fg.object_rot; break;
      case ParamBlock::ObjectTrans: seg += fg.object_trans; break;
    }
  }
}

void add_smoothness_gradient(const ParamVector& params, double coeff,
                             Eigen::VectorXd& grad) {
  const int frames = params.layout.frame_count;
  if (frames < 3) return;
  const int stride = params.layout.per_frame_size();
  const double denom = static_cast<double>(frames - 2);
  for (int f = 1; f + 1 < frames; ++f) {
    const Eigen::VectorXd d =
        params.values.segment((f + 1) * stride, stride) -
        2.0 * params.values.segment(f * stride, stride) +
        params.values.segment((f - 1) * stride, stride);
    const Eigen::VectorXd g = (2.0 * coeff / denom) * d;
    grad.segment((f + 1) * stride, stride) += g;
    grad.segment(f * stride, stride) -= 2.0 * g;
    grad.segment((f - 1) * stride, stride) += g;
  }
}

void apply_frozen_mask(const ParamVector& params, Eigen::VectorXd& grad) {
  for (int i = 0; i < params.values.size(); ++i)
    if (params.frozen[i]) grad[i] = 0.0;
}

}  // namespace

LossBreakdown eval_total_with_grad(const TrackingProblem& problem,
                                   const ParamVector& params,
                                   Eigen::VectorXd* grad) {
  params.validate();
  if (params.layout.frame_count != problem.frame_count() ||
      !params.layout.has_object)
    throw ContractViolationError("parameter layout does not fit the problem");
  const auto frames = unpack(params, problem.object_mesh);
  const LossBreakdown breakdown = total_loss(problem, frames);
  if (!std::isfinite(breakdown.total))
    throw InvalidInputError("objective is not finite at the given parameters");

  if (grad) {
    grad->setZero(params.layout.total_size);
    const int joints = params.layout.joint_count;
    for (int f = 0; f < problem.frame_count(); ++f) {
      FrameGradient fg(joints);
      motion_frame_gradient(problem, frames[f], f, fg);
      scatter_frame_gradient(params.layout, f, fg, *grad);
    }
    add_smoothness_gradient(
        params, problem.weights.lambda_reg * problem.weights.smooth_weight,
        *grad);
    apply_frozen_mask(params, *grad);
    for (int i = 0; i < grad->size(); ++i) {
      if (std::isfinite((*grad)[i])) continue;
      for (const auto& b : params.layout.blocks)
        if (i >= b.offset && i < b.offset + b.length)
          throw InvalidInputError(
              std::string("non-finite gradient in block ") +
              param_block_name(b.block) + " of frame " +
              std::to_string(b.frame));
      throw InvalidInputError("non-finite gradient entry");
    }
  }
  return breakdown;
}

Eigen::VectorXd grad_total(const TrackingProblem& problem,
                           const ParamVector& params) {
  Eigen::VectorXd grad;
  eval_total_with_grad(problem, params, &grad);
  return grad;
}

double eval_static_with_grad(const StaticProblem& problem,
                             const ParamVector& params,
                             Eigen::VectorXd* grad) {
  params.validate();
  problem.validate();
  if (params.layout.frame_count != 1 || params.layout.has_object)
    throw ContractViolationError("static stage expects a 1-frame human layout");
  const auto frames = unpack(params, nullptr);
  const HumanState& human = frames[0].human;
  const double value = static_objective(problem, human);
  if (!std::isfinite(value))
    throw InvalidInputError("objective is not finite at the given parameters");
  if (!grad) return value;

  grad->setZero(params.layout.total_size);
  const BodyModel& model = *problem.model;
  const int joints = model.tree.joint_count();
  const FKResult fk = forward_kinematics(model, human);

  std::vector<Vec3> joint_adj(joints, Vec3::Zero());
  const double sq_sigma =
      problem.weights.gm_sigma_align * problem.weights.gm_sigma_align;
  for (size_t view_idx = 0; view_idx < problem.views.size(); ++view_idx) {
    const auto& view = problem.views[view_idx];
    const auto& camera = problem.cameras[view_idx];
    for (const auto& [det, joint] : model.keypoint_map) {
      if (view.confidence[det] <= 0.0) continue;
      Eigen::Matrix<double, 2, 3> jac;
      const Vec2 uv =
          project_clamped(camera, fk.joint_positions[joint], &jac);
      const Vec2 r = uv - view.points[det];
      const double denom = sq_sigma + r.squaredNorm();
      const Vec2 uv_bar = (sq_sigma / (denom * denom) * 2.0) * r;
      joint_adj[joint] += jac.transpose() * uv_bar;
    }
  }

  FrameGradient fg(joints);
  const double prior_coeff = problem.weights.pose_prior_weight / joints;
  for (int j = 0; j < joints; ++j)
    fg.joint_rot[j] += (2.0 * prior_coeff) * human.joint_rotations[j];
  backprop_frame(model, human, fk, {}, joint_adj, {}, 0.0, fg);
  scatter_frame_gradient(params.layout, 0, fg, *grad);
  apply_frozen_mask(params, *grad);
  return value;
}

FDReport compare_gradients(const ParamVector& params,
                           const Eigen::VectorXd& analytic,
                           const Eigen::VectorXd& numeric) {
  FDReport report;
  for (const auto& b : params.layout.blocks) {
    if (b.frozen) continue;
    for (int k = 0; k < b.length; ++k) {
      const int i = b.offset + k;
      if (params.frozen[i]) continue;
      FDEntry e;
      e.index = i;
      e.frame = b.frame;
      e.block = b.block;
      e.offset_in_block = k;
      e.analytic = analytic[i];
      e.numeric = numeric[i];
      e.abs_err = std::abs(e.analytic - e.numeric);
      report.max_abs_err = std::max(report.max_abs_err, e.abs_err);
      if (std::abs(e.numeric) >= 1e-8) {
        e.rel_err = e.abs_err / std::abs(e.numeric);
        if (e.rel_err > report.max_rel_err) {
          report.max_rel_err = e.rel_err;
          report.worst_index = i;
        }
      } else {
        e.rel_err = 0.0;
        report.max_small_abs_err =
            std::max(report.max_small_abs_err, e.abs_err);
      }
      report.entries.push_back(e);
    }
  }
  std::sort(report.entries.begin(), report.entries.end(),
            [](const FDEntry& a, const FDEntry& b) {
              if (a.rel_err != b.rel_err) return a.rel_err > b.rel_err;
              return a.abs_err > b.abs_err;
            });
  return report;
}

bool FDReport::passes(double rel_tol) const {
  return max_rel_err < rel_tol && max_small_abs_err <= 1e-7;
}

FDReport finite_difference_check(const TrackingProblem& problem,
                                 const ParamVector& params, double h) {
  if (!(h > 0.0)) throw InvalidConfigError("finite difference step must be > 0");
  const auto t0 = std::chrono::steady_clock::now();
  Eigen::VectorXd analytic;
  eval_total_with_grad(problem, params, &analytic);

  const int joints_total = params.layout.total_size;
  const int frame_count = params.layout.frame_count;
  const int joint_count = params.layout.joint_count;

  // Base frame terms; probes replace exactly one frame's terms, which is
  // bitwise-identical to re-evaluating every frame (unperturbed frames
  // recompute to the same bits).
  const auto base_frames = unpack(params, problem.object_mesh);
  std::vector<FrameTerms> base_terms(frame_count);
  for (int f = 0; f < frame_count; ++f)
    base_terms[f] = compute_frame_terms(problem, base_frames[f], f);

  auto total_at = [&](ParamVector& probe, int touched_frame,
                      std::vector<FrameTerms>& terms) {
    terms[touched_frame] = compute_frame_terms(
        problem, unpack_frame(probe, touched_frame, problem.object_mesh),
        touched_frame);
    const double smooth = smoothness_from_packed(probe);
    const LossBreakdown b =
        assemble_total(terms, smooth, problem.weights, joint_count);
    return b.total;
  };

  Eigen::VectorXd numeric = Eigen::VectorXd::Zero(joints_total);
  std::vector<int> probe_indices;
  probe_indices.reserve(joints_total);
  for (int i = 0; i < joints_total; ++i)
    if (!params.frozen[i]) probe_indices.push_back(i);

  // Entries are independent and each writes its own slot, so splitting them
  // across workers cannot change the result.
  const int workers =
      std::min<int>(worker_thread_count(),
                    std::max<int>(1, static_cast<int>(probe_indices.size())));
  std::vector<ParamVector> scratch_params(workers, params);
  std::vector<std::vector<FrameTerms>> scratch_terms(workers, base_terms);
  const int stride = params.layout.per_frame_size();
  parallel_for(workers, [&](int w) {
    ParamVector& probe = scratch_params[w];
    std::vector<FrameTerms>& terms = scratch_terms[w];
    for (size_t p = w; p < probe_indices.size(); p += workers) {
      const int i = probe_indices[p];
      const int frame = i / stride;
      const double saved = probe.values[i];
      probe.values[i] = saved + h;
      const double plus = total_at(probe, frame, terms);
      probe.values[i] = saved - h;
      const double minus = total_at(probe, frame, terms);
      probe.values[i] = saved;
      terms[frame] = base_terms[frame];
      numeric[i] = (plus - minus) / (2.0 * h);
    }
  });

  FDReport report = compare_gradients(params, analytic, numeric);
  report.runtime_sec =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  return report;
}

FDReport finite_difference_check(const StaticProblem& problem,
                                 const ParamVector& params, double h) {
  if (!(h > 0.0)) throw InvalidConfigError("finite difference step must be > 0");
  const auto t0 = std::chrono::steady_clock::now();
  Eigen::VectorXd analytic;
  eval_static_with_grad(problem, params, &analytic);

  Eigen::VectorXd numeric = Eigen::VectorXd::Zero(params.layout.total_size);
  ParamVector probe = params;
  for (const auto& b : params.layout.blocks) {
    if (b.frozen) continue;
    for (int k = 0; k < b.length; ++k) {
      const int i = b.offset + k;
      if (params.frozen[i]) continue;
      const double saved = probe.values[i];
      probe.values[i] = saved + h;
      const double plus =
          static_objective(problem, unpack(probe, nullptr)[0].human);
      probe.values[i] = saved - h;
      const double minus =
          static_objective(problem, unpack(probe, nullptr)[0].human);
      probe.values[i] = saved;
      numeric[i] = (plus - minus) / (2.0 * h);
    }
  }
  FDReport report = compare_gradients(params, analytic, numeric);
  report.runtime_sec =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  return report;
}

}  // namespace anchorfit
