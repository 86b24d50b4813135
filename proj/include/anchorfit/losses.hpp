#pragma once

#include "anchorfit/body_model.hpp"
#include "anchorfit/contact.hpp"
#include "anchorfit/scene.hpp"

#include <optional>
#include <span>
#include <vector>

namespace anchorfit {

struct LossWeights {
  double lambda_j = 1.0;
  double lambda_c = 10.0;
  double lambda_pen = 5.0;
  double lambda_reg = 1.0;
  double gm_sigma_align = 0.02;  // normalized-image units
  double gm_sigma_dist = 0.05;   // world units
  double smooth_weight = 1.0;
  double self_pen_weight = 0.1;
  double pose_prior_weight = 1e-3;

  void validate() const;
  // Same defaults with gm_sigma_dist resolved to 5% of the rig's height.
  static LossWeights defaults_for(const BodyModel& model);
};

struct LossBreakdown {
  double body = 0.0;
  double contact = 0.0;
  double penetration = 0.0;
  double regularization = 0.0;
  double total = 0.0;
};

// total = lj*body + lc*contact + lp*pen + lr*reg, evaluated exactly in this
// order; the self-consistency invariant is bitwise.
double recompose_total(const LossBreakdown& b, const LossWeights& w);

struct FrameState {
  HumanState human;
  std::optional<ObjectState> object;
};

// Everything the per-frame tracking objective needs, fixed across frames.
struct TrackingProblem {
  const BodyModel* model = nullptr;
  std::shared_ptr<const Mesh> object_mesh;
  SurfaceSamples object_samples;          // rest pose
  Camera camera;
  std::vector<KeypointFrame> keypoints;   // one per frame
  ContactPairSet contacts;
  LossWeights weights;

  int frame_count() const { return static_cast<int>(keypoints.size()); }
  void validate() const;
};

// Multi-view single-frame alignment inputs.
struct StaticProblem {
  const BodyModel* model = nullptr;
  std::vector<Camera> cameras;
  std::vector<KeypointFrame> views;  // one per camera
  LossWeights weights;

  void validate() const;
};

// Bounded robustifier rho(e) = e^2 / (sigma^2 + e^2).
double geman_mcclure(double residual, double sigma);
// Same value from squared inputs; smooth in the 2D residual at zero.
double geman_mcclure_sq(double squared_residual, double squared_sigma);

// Multi-view robust reprojection sum over mapped joints (skips
// zero-confidence keypoints, no confidence weighting, no normalization).
double static_alignment_loss(const BodyModel& model, const HumanState& human,
                             std::span<const Camera> cameras,
                             std::span<const KeypointFrame> views,
                             const LossWeights& weights);

// Single-view confidence-weighted mean of robust reprojection errors; the
// mean is over all mapped keypoints including zero-confidence ones.
double body_keypoint_loss(const BodyModel& model, const HumanState& human,
                          const Camera& camera, const KeypointFrame& frame,
                          const LossWeights& weights);

// Mean squared distance over contact pairs; 0 (with warning flag) when the
// pair set is empty.
double contact_loss(std::span<const Vec3> human_vertices_world,
                    std::span<const Vec3> object_samples_world,
                    const ContactPairSet& contacts,
                    bool* empty_warning = nullptr);

// Mean squared penetration depth of object samples into the capsule union.
double penetration_loss(std::span<const Vec3> object_samples_world,
                        std::span<const Capsule> capsules);

// Mean squared capsule-capsule overlap over non-adjacent bone pairs.
double self_penetration_penalty(std::span<const Capsule> capsules,
                                std::span<const std::pair<int, int>> bone_pairs);

// Sum of squared joint-rotation norms for one state (pose prior numerator).
double pose_magnitude(const HumanState& human);

// smooth * mean squared second difference of all per-frame parameters
// + self_pen * mean capsule overlap penalty + pose_prior * mean squared
// joint rotation magnitude. Windows shorter than 3 have zero smoothness.
double regularization_loss(std::span<const FrameState> window,
                           const BodyModel& model, const LossWeights& weights);

// Per-frame pieces of the tracking objective, cached by the FD checker.
struct FrameTerms {
  double body = 0.0;
  double contact = 0.0;
  double penetration = 0.0;
  double self_penetration = 0.0;
  double pose_magnitude = 0.0;
};

FrameTerms compute_frame_terms(const TrackingProblem& problem,
                               const FrameState& frame, int frame_index);

// Canonical per-frame parameter vector: root rotation, root translation,
// joint rotations, scale, shape, then object rotation/translation when an
// object is present. The packed optimizer layout follows the same order.
Eigen::VectorXd frame_parameters(const FrameState& frame,
                                 const BodyModel& model);

// Mean squared second difference of the per-frame parameter curves.
double smoothness_term(std::span<const FrameState> window,
                       const BodyModel& model);

// Assembles the Eq-style weighted total from per-frame pieces. Shared by
// total_loss and the finite-difference checker so both sum in the same order.
LossBreakdown assemble_total(std::span<const FrameTerms> terms,
                             double smoothness, const LossWeights& weights,
                             int joint_count);

// Full tracking objective over a window of frames.
LossBreakdown total_loss(const TrackingProblem& problem,
                         std::span<const FrameState> frames);

// Static stage objective: alignment + pose_prior_weight * mean pose magnitude.
double static_objective(const StaticProblem& problem, const HumanState& human);

}  // namespace anchorfit
