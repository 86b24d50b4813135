#pragma once

#include "anchorfit/contact.hpp"
#include "anchorfit/losses.hpp"

#include <cstdint>
#include <string>

namespace anchorfit {

// Bundled 18-joint humanoid rig mirroring the detector's keypoint layout
// (14 of the 18 detector slots are mapped; eye/ear slots have no joints).
// The same content ships as data/rig18.json.
BodyModel default_rig();

// Scenario description. The motion program is selected by name:
//   "carry-box"  box carried on both forearms, root sway + leg motion
//   "sit-still"  seated on a block, upper-body sway
//   "mop-sweep"  two-handed grip on a tilted handle, sweeping root motion
//   "hold"       identity pose, constant frames, object out of reach
//                (every term stationary; used for closure checks)
struct SyntheticScenario {
  std::string name = "carry-box";
  int frames = 30;
  double noise_sigma = 0.0;      // normalized-image units
  double occlusion_rate = 0.0;   // per keypoint per view
  uint64_t seed = 1;
  int static_view_count = 4;
  double camera_radius = 3.0;

  void validate() const;
};

struct GeneratedScenario {
  std::vector<FrameState> truth;
  std::vector<Camera> static_cameras;        // ring around the frame-0 pose
  Camera motion_camera;                      // single frontal view
  std::vector<KeypointFrame> static_keypoints;  // frame 0, one per camera
  std::vector<KeypointFrame> motion_keypoints;  // one per frame
  std::shared_ptr<const Mesh> object_mesh;
  SurfaceSamples object_samples;             // rest-pose samples
  ContactPairSet contacts;                   // extracted from frame 0
};

// Deterministic per seed. Keypoints are exact projections of the truth plus
// Gaussian noise; occluded keypoints get confidence 0. Contacts come from
// the frame-0 geometry with the given parameters.
GeneratedScenario generate(const BodyModel& model,
                           const SyntheticScenario& scenario,
                           const ContactParams& contact_params);

struct FrameMetrics {
  double joint_error = 0.0;               // world units, mean over joints
  double joint_error_root_aligned = 0.0;  // after subtracting the root offset
  double reprojection_error = 0.0;        // normalized, vs truth projections
  double contact_distance = 0.0;          // mean over pairs, recovered scene
  double penetration_fraction = 0.0;      // samples inside capsules
  double penetration_depth = 0.0;         // mean depth of penetrating samples
};

struct MetricsRecord {
  std::vector<FrameMetrics> frames;
  FrameMetrics mean;
  double jitter_params = 0.0;        // mean norm of parameter second diffs
  double jitter_joints = 0.0;        // mean norm of joint position second diffs
  double jitter_params_truth = 0.0;
  double jitter_joints_truth = 0.0;
};

MetricsRecord evaluate(const BodyModel& model,
                       const SurfaceSamples& rest_samples,
                       const ContactPairSet& contacts, const Camera& camera,
                       std::span<const FrameState> recovered,
                       std::span<const FrameState> truth);

// Ring of cameras on a horizontal circle, all looking at `target`.
std::vector<Camera> default_static_ring(const Vec3& target, int count,
                                        double radius);

Camera default_motion_camera(const Vec3& target, double radius);

// Subdivided axis-aligned box; faces are unwelded so every vertex normal is
// the exact face normal. The per-axis division counts set the grid density
// of the faces spanning those axes.
Mesh make_box_grid(const Vec3& center, const Vec3& half_extents,
                   const Eigen::Vector3i& divisions);
Mesh make_box_grid(const Vec3& center, const Vec3& half_extents,
                   int divisions);

}  // namespace anchorfit
