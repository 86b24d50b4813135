#include "anchorfit/losses.hpp"

#include "anchorfit/errors.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace anchorfit {

void LossWeights::validate() const {
  const double all[] = {lambda_j,      lambda_c,        lambda_pen,
                        lambda_reg,    smooth_weight,   self_pen_weight,
                        pose_prior_weight};
  for (double v : all)
    if (!(v >= 0.0) || !std::isfinite(v))
      throw InvalidConfigError("loss weights must be finite and nonnegative");
  if (!(gm_sigma_align > 0.0) || !(gm_sigma_dist > 0.0))
    throw InvalidConfigError("Geman-McClure sigma values must be positive");
}

LossWeights LossWeights::defaults_for(const BodyModel& model) {
  LossWeights w;
  const double height = model.template_height();
  if (height > 0.0) w.gm_sigma_dist = 0.05 * height;
  return w;
}

double recompose_total(const LossBreakdown& b, const LossWeights& w) {
  return w.lambda_j * b.body + w.lambda_c * b.contact +
         w.lambda_pen * b.penetration + w.lambda_reg * b.regularization;
}

void TrackingProblem::validate() const {
  if (!model) throw ContractViolationError("tracking problem has no model");
  model->validate();
  if (!object_mesh || object_mesh->empty())
    throw InvalidInputError("tracking problem requires an object mesh");
  object_samples.validate();
  camera.validate();
  if (keypoints.empty())
    throw InvalidInputError("tracking problem needs at least one frame");
  for (const auto& f : keypoints) f.validate();
  contacts.validate(object_samples.count(), model->vertex_count());
  weights.validate();
}

void StaticProblem::validate() const {
  if (!model) throw ContractViolationError("static problem has no model");
  model->validate();
  if (cameras.size() != views.size())
    throw InvalidInputError("static problem cameras/views lengths differ");
  if (cameras.empty())
    throw UnderconstrainedInputError("static problem has no views");
  for (const auto& c : cameras) c.validate();
  for (const auto& v : views) v.validate();
  weights.validate();
}

double geman_mcclure(double residual, double sigma) {
  if (!(sigma > 0.0)) throw InvalidConfigError("geman_mcclure: sigma <= 0");
  return geman_mcclure_sq(residual * residual, sigma * sigma);
}

double geman_mcclure_sq(double squared_residual, double squared_sigma) {
  return squared_residual / (squared_sigma + squared_residual);
}

namespace {

void check_view_against_map(const BodyModel& model, const KeypointFrame& view) {
  for (const auto& [det, joint] : model.keypoint_map) {
    (void)joint;
    if (det >= static_cast<int>(view.points.size()))
      throw ContractViolationError(
          "keypoint frame too short for the rig's keypoint map (needs index " +
          std::to_string(det) + ")");
  }
}

// Robust reprojection term for one view given world joint positions.
double view_alignment(const BodyModel& model,
                      std::span<const Vec3> joint_positions,
                      const Camera& camera, const KeypointFrame& view,
                      double sigma, bool weighted, bool* any_confident) {
  check_view_against_map(model, view);
  const double sq_sigma = sigma * sigma;
  double sum = 0.0;
  for (const auto& [det, joint] : model.keypoint_map) {
    const double conf = view.confidence[det];
    if (conf <= 0.0) continue;
    if (any_confident) *any_confident = true;
    const Vec2 uv = project_clamped(camera, joint_positions[joint]);
    const double rho =
        geman_mcclure_sq((uv - view.points[det]).squaredNorm(), sq_sigma);
    sum += weighted ? conf * rho : rho;
  }
  return sum;
}

}  // namespace

double static_alignment_loss(const BodyModel& model, const HumanState& human,
                             std::span<const Camera> cameras,
                             std::span<const KeypointFrame> views,
                             const LossWeights& weights) {
  if (cameras.size() != views.size())
    throw ContractViolationError("cameras/views lengths differ");
  weights.validate();
  const FKResult fk = forward_kinematics(model, human);
  double sum = 0.0;
  bool any_confident = false;
  for (size_t i = 0; i < cameras.size(); ++i)
    sum += view_alignment(model, fk.joint_positions, cameras[i], views[i],
                          weights.gm_sigma_align, /*weighted=*/false,
                          &any_confident);
  if (!any_confident)
    throw UnderconstrainedInputError(
        "no view has any confident keypoint; alignment is unconstrained");
  return sum;
}

double body_keypoint_loss(const BodyModel& model, const HumanState& human,
                          const Camera& camera, const KeypointFrame& frame,
                          const LossWeights& weights) {
  const int n = static_cast<int>(model.keypoint_map.size());
  if (n == 0)
    throw InvalidInputError("body_keypoint_loss: rig maps no keypoints");
  weights.validate();
  const FKResult fk = forward_kinematics(model, human);
  const double sum =
      view_alignment(model, fk.joint_positions, camera, frame,
                     weights.gm_sigma_align, /*weighted=*/true, nullptr);
  return sum / n;
}

double contact_loss(std::span<const Vec3> human_vertices_world,
                    std::span<const Vec3> object_samples_world,
                    const ContactPairSet& contacts, bool* empty_warning) {
  if (empty_warning) *empty_warning = contacts.empty();
  if (contacts.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& [i, j] : contacts.pairs) {
    if (i < 0 || i >= static_cast<int>(object_samples_world.size()) || j < 0 ||
        j >= static_cast<int>(human_vertices_world.size()))
      throw ContractViolationError("contact pair index out of range");
    sum += (human_vertices_world[j] - object_samples_world[i]).squaredNorm();
  }
  return sum / static_cast<double>(contacts.pairs.size());
}

namespace {

// Greatest penetration depth of p into the capsule union (<= 0 if outside).
// Skips capsules that cannot beat max(best, 0); the skipped ones can only
// change the sign-irrelevant negative part of the max.
double union_depth(std::span<const Capsule> capsules, const Vec3& p,
                   int* argmax) {
  double best = -std::numeric_limits<double>::infinity();
  if (argmax) *argmax = -1;
  for (size_t k = 0; k < capsules.size(); ++k) {
    const Capsule& c = capsules[k];
    const double floor = std::max(best, 0.0);
    const double thresh = c.radius - floor;  // need dist < thresh to matter
    if (!(thresh > 0.0)) continue;
    const Vec3 ab = c.b - c.a;
    const double denom = ab.squaredNorm();
    double t = denom > 0 ? (p - c.a).dot(ab) / denom : 0.0;
    t = t < 0.0 ? 0.0 : (t > 1.0 ? 1.0 : t);
    const double sq = (p - (c.a + t * ab)).squaredNorm();
    if (sq < thresh * thresh) {
      const double depth = c.radius - std::sqrt(sq);
      if (depth > best) {
        best = depth;
        if (argmax) *argmax = static_cast<int>(k);
      }
    }
  }
  return best;
}

}  // namespace

double penetration_loss(std::span<const Vec3> object_samples_world,
                        std::span<const Capsule> capsules) {
  if (object_samples_world.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& p : object_samples_world) {
    const double depth = union_depth(capsules, p, nullptr);
    if (depth > 0.0) sum += depth * depth;
  }
  return sum / static_cast<double>(object_samples_world.size());
}

double self_penetration_penalty(
    std::span<const Capsule> capsules,
    std::span<const std::pair<int, int>> bone_pairs) {
  if (bone_pairs.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& [bi, bj] : bone_pairs) {
    const Capsule& a = capsules[bi - 1];  // capsule k belongs to child joint k+1
    const Capsule& b = capsules[bj - 1];
    const double reach = a.radius + b.radius;
    const auto close = segment_segment_closest(a.a, a.b, b.a, b.b);
    const double overlap = reach - close.distance;
    if (overlap > 0.0) sum += overlap * overlap;
  }
  return sum / static_cast<double>(bone_pairs.size());
}

double pose_magnitude(const HumanState& human) {
  double sum = 0.0;
  for (const auto& r : human.joint_rotations) sum += r.squaredNorm();
  return sum;
}

Eigen::VectorXd frame_parameters(const FrameState& frame,
                                 const BodyModel& model) {
  const int joints = model.tree.joint_count();
  const int shapes = model.shape_count();
  const bool with_object = frame.object.has_value();
  const int size = 3 + 3 + 3 * joints + 1 + shapes + (with_object ? 6 : 0);
  Eigen::VectorXd x(size);
  int at = 0;
  x.segment<3>(at) = frame.human.root_rotation; at += 3;
  x.segment<3>(at) = frame.human.root_translation; at += 3;
  for (int j = 0; j < joints; ++j) {
    x.segment<3>(at) = frame.human.joint_rotations[j];
    at += 3;
  }
  x[at++] = frame.human.scale;
  x.segment(at, shapes) = frame.human.shape_coeffs; at += shapes;
  if (with_object) {
    x.segment<3>(at) = frame.object->rotation; at += 3;
    x.segment<3>(at) = frame.object->translation; at += 3;
  }
  return x;
}

double smoothness_term(std::span<const FrameState> window,
                       const BodyModel& model) {
  const int frames = static_cast<int>(window.size());
  if (frames < 3) return 0.0;
  std::vector<Eigen::VectorXd> params;
  params.reserve(frames);
  for (const auto& f : window) params.push_back(frame_parameters(f, model));
  const auto size = params[0].size();
  for (const auto& p : params)
    if (p.size() != size)
      throw ContractViolationError("window frames have differing layouts");
  double sum = 0.0;
  for (int f = 1; f + 1 < frames; ++f)
    sum += (params[f + 1] - 2.0 * params[f] + params[f - 1]).squaredNorm();
  return sum / static_cast<double>(frames - 2);
}

namespace {

struct RegComponents {
  double self_penetration = 0.0;
  double pose_magnitude = 0.0;
};

RegComponents frame_reg_components(
    const FrameState& frame, const BodyModel& model,
    std::span<const std::pair<int, int>> bone_pairs) {
  RegComponents out;
  const FKResult fk = forward_kinematics(model, frame.human);
  const auto capsules =
      capsule_proxies(model, fk.joint_positions, frame.human.scale);
  out.self_penetration = self_penetration_penalty(capsules, bone_pairs);
  out.pose_magnitude = pose_magnitude(frame.human);
  return out;
}

double reg_from_components(double smoothness, std::span<const double> self_pen,
                           std::span<const double> pose_mag,
                           const LossWeights& w, int joint_count) {
  double sp_sum = 0.0, pm_sum = 0.0;
  for (double v : self_pen) sp_sum += v;
  for (double v : pose_mag) pm_sum += v;
  const double frames = static_cast<double>(self_pen.size());
  return w.smooth_weight * smoothness +
         w.self_pen_weight * (sp_sum / frames) +
         w.pose_prior_weight * (pm_sum / (frames * joint_count));
}

}  // namespace

double regularization_loss(std::span<const FrameState> window,
                           const BodyModel& model, const LossWeights& weights) {
  if (window.empty())
    throw ContractViolationError("regularization window must be non-empty");
  weights.validate();
  const auto bone_pairs = non_adjacent_bone_pairs(model.tree);
  std::vector<double> self_pen(window.size()), pose_mag(window.size());
  for (size_t f = 0; f < window.size(); ++f) {
    const auto rc = frame_reg_components(window[f], model, bone_pairs);
    self_pen[f] = rc.self_penetration;
    pose_mag[f] = rc.pose_magnitude;
  }
  const double smooth = smoothness_term(window, model);
  return reg_from_components(smooth, self_pen, pose_mag, weights,
                             model.tree.joint_count());
}

FrameTerms compute_frame_terms(const TrackingProblem& problem,
                               const FrameState& frame, int frame_index) {
  const BodyModel& model = *problem.model;
  if (!frame.object.has_value())
    throw ContractViolationError("tracking frames require an object state");

  FrameTerms terms;
  const FKResult fk = forward_kinematics(model, frame.human);

  terms.body = body_keypoint_loss(model, frame.human, problem.camera,
                                  problem.keypoints[frame_index],
                                  problem.weights);

  std::vector<Vec3> posed_samples;
  transform_points(*frame.object, problem.object_samples.points, posed_samples);

  const auto posed_vertices = skin_vertices(model, fk, frame.human);
  terms.contact =
      contact_loss(posed_vertices, posed_samples, problem.contacts, nullptr);

  const auto capsules =
      capsule_proxies(model, fk.joint_positions, frame.human.scale);
  terms.penetration = penetration_loss(posed_samples, capsules);

  const auto bone_pairs = non_adjacent_bone_pairs(model.tree);
  terms.self_penetration = self_penetration_penalty(capsules, bone_pairs);
  terms.pose_magnitude = pose_magnitude(frame.human);
  return terms;
}

LossBreakdown assemble_total(std::span<const FrameTerms> terms,
                             double smoothness, const LossWeights& weights,
                             int joint_count) {
  const double frames = static_cast<double>(terms.size());
  double body = 0.0, contact = 0.0, pen = 0.0;
  std::vector<double> self_pen(terms.size()), pose_mag(terms.size());
  for (size_t f = 0; f < terms.size(); ++f) {
    body += terms[f].body;
    contact += terms[f].contact;
    pen += terms[f].penetration;
    self_pen[f] = terms[f].self_penetration;
    pose_mag[f] = terms[f].pose_magnitude;
  }
  LossBreakdown b;
  b.body = body / frames;
  b.contact = contact / frames;
  b.penetration = pen / frames;
  b.regularization =
      reg_from_components(smoothness, self_pen, pose_mag, weights, joint_count);
  b.total = recompose_total(b, weights);
  return b;
}

LossBreakdown total_loss(const TrackingProblem& problem,
                         std::span<const FrameState> frames) {
  problem.validate();
  if (static_cast<int>(frames.size()) != problem.frame_count())
    throw ContractViolationError("frame count does not match keypoint frames");
  std::vector<FrameTerms> terms(frames.size());
  for (size_t f = 0; f < frames.size(); ++f)
    terms[f] = compute_frame_terms(problem, frames[f], static_cast<int>(f));
  const double smooth = smoothness_term(frames, *problem.model);
  return assemble_total(terms, smooth, problem.weights,
                        problem.model->tree.joint_count());
}

double static_objective(const StaticProblem& problem, const HumanState& human) {
  const double align = static_alignment_loss(
      *problem.model, human, problem.cameras, problem.views, problem.weights);
  const double prior = problem.weights.pose_prior_weight *
                       (pose_magnitude(human) /
                        problem.model->tree.joint_count());
  return align + prior;
}

}  // namespace anchorfit
