#include "anchorfit/errors.hpp"
#include "anchorfit/optimizer.hpp"
#include "anchorfit/synthetic.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <set>

using namespace anchorfit;

namespace {

TrackingProblem problem_from(const BodyModel& model,
                             const GeneratedScenario& scenario) {
  TrackingProblem problem;
  problem.model = &model;
  problem.object_mesh = scenario.object_mesh;
  problem.object_samples = scenario.object_samples;
  problem.camera = scenario.motion_camera;
  problem.keypoints = scenario.motion_keypoints;
  problem.contacts = scenario.contacts;
  problem.weights = LossWeights::defaults_for(model);
  return problem;
}

}  // namespace

TEST_CASE("noise-free generation reproduces exact projections") {
  const BodyModel model = default_rig();
  SyntheticScenario spec;
  spec.name = "carry-box";
  spec.frames = 4;
  const GeneratedScenario data = generate(model, spec, ContactParams{});
  for (int f = 0; f < 4; ++f) {
    const auto fk = forward_kinematics(model, data.truth[f].human);
    const auto& frame = data.motion_keypoints[f];
    for (const auto& [det, joint] : model.keypoint_map) {
      CHECK(frame.confidence[det] == 1.0);
      const Vec2 uv = project(data.motion_camera, fk.joint_positions[joint]);
      CHECK((frame.points[det] - uv).norm() == 0.0);
    }
  }
}

TEST_CASE("occlusion rate matches its binomial expectation") {
  const BodyModel model = default_rig();
  SyntheticScenario spec;
  spec.name = "carry-box";
  spec.frames = 40;
  spec.occlusion_rate = 0.3;
  spec.seed = 12;
  const GeneratedScenario data = generate(model, spec, ContactParams{});
  int dropped = 0, total = 0;
  for (const auto& frame : data.motion_keypoints) {
    for (const auto& [det, joint] : model.keypoint_map) {
      (void)joint;
      ++total;
      if (frame.confidence[det] == 0.0) ++dropped;
    }
  }
  const double p = 0.3;
  const double sigma = std::sqrt(total * p * (1 - p));
  CHECK(std::abs(dropped - total * p) < 3.0 * sigma);
}

TEST_CASE("generation is deterministic per seed") {
  const BodyModel model = default_rig();
  SyntheticScenario spec;
  spec.name = "mop-sweep";
  spec.frames = 6;
  spec.noise_sigma = 0.01;
  spec.occlusion_rate = 0.2;
  spec.seed = 77;
  const GeneratedScenario a = generate(model, spec, ContactParams{});
  const GeneratedScenario b = generate(model, spec, ContactParams{});
  REQUIRE(a.motion_keypoints.size() == b.motion_keypoints.size());
  for (size_t f = 0; f < a.motion_keypoints.size(); ++f) {
    CHECK(a.motion_keypoints[f].points == b.motion_keypoints[f].points);
    CHECK(a.motion_keypoints[f].confidence == b.motion_keypoints[f].confidence);
  }
  CHECK(a.contacts.pairs == b.contacts.pairs);
}

TEST_CASE("bundled scenarios produce non-empty contacts on valid geometry") {
  const BodyModel model = default_rig();
  for (const char* name : {"carry-box", "sit-still", "mop-sweep"}) {
    SyntheticScenario spec;
    spec.name = name;
    spec.frames = 2;
    const GeneratedScenario data = generate(model, spec, ContactParams{});
    INFO("scenario ", std::string(name));
    CHECK(!data.contacts.pairs.empty());
    data.contacts.validate(data.object_samples.count(), model.vertex_count());
    // Ground truth should be penetration-free.
    const auto fk = forward_kinematics(model, data.truth[0].human);
    const auto caps =
        capsule_proxies(model, fk.joint_positions, data.truth[0].human.scale);
    std::vector<Vec3> posed;
    transform_points(*data.truth[0].object, data.object_samples.points, posed);
    CHECK(penetration_loss(posed, caps) == 0.0);
  }
}

TEST_CASE("contact sets are stable under rigid motion of the whole scene") {
  const BodyModel model = default_rig();
  for (const char* name : {"carry-box", "sit-still", "mop-sweep"}) {
    SyntheticScenario spec;
    spec.name = name;
    spec.frames = 1;
    const GeneratedScenario data = generate(model, spec, ContactParams{});

    // Re-extract after moving human and object together.
    const Vec3 yaw(0, 0.35, 0);
    const Vec3 shift(0.4, 0.1, -0.7);
    FrameState moved = data.truth[0];
    // Compose (yaw, shift) on top of the frame-0 pose for both bodies; the
    // scenarios start from an identity root rotation.
    REQUIRE(moved.human.root_rotation.norm() == 0.0);
    REQUIRE(moved.object->rotation.norm() == 0.0);
    const Mat3 r = axis_angle_to_matrix(yaw);
    moved.human.root_rotation = yaw;
    moved.human.root_translation = r * moved.human.root_translation + shift;
    moved.object->rotation = yaw;
    moved.object->translation = r * moved.object->translation + shift;

    const auto fk = forward_kinematics(model, moved.human);
    const auto posed_vertices = skin_vertices(model, fk, moved.human);
    const auto posed_normals =
        vertex_normals(Mesh{posed_vertices, model.faces});
    const auto candidates =
        gather_candidates(model, posed_vertices, posed_normals);
    const auto posed = pose_samples(*moved.object, data.object_samples);
    const double sigma = LossWeights::defaults_for(model).gm_sigma_dist;
    const auto moved_set =
        extract_contacts(posed, candidates, 0.3, 0.25, sigma);
    INFO("scenario ", std::string(name));
    CHECK(moved_set.pairs == data.contacts.pairs);
  }
}

TEST_CASE("evaluate: zeros at truth and exact translation offsets") {
  const BodyModel model = default_rig();
  SyntheticScenario spec;
  spec.name = "carry-box";
  spec.frames = 5;
  const GeneratedScenario data = generate(model, spec, ContactParams{});

  const auto at_truth = evaluate(model, data.object_samples, data.contacts,
                                 data.motion_camera, data.truth, data.truth);
  CHECK(at_truth.mean.joint_error == 0.0);
  CHECK(at_truth.mean.joint_error_root_aligned == 0.0);
  CHECK(at_truth.mean.reprojection_error == 0.0);

  std::vector<FrameState> shifted = data.truth;
  for (auto& f : shifted) f.human.root_translation += Vec3(0.1, 0, 0);
  const auto off = evaluate(model, data.object_samples, data.contacts,
                            data.motion_camera, shifted, data.truth);
  CHECK(off.mean.joint_error == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(off.mean.joint_error_root_aligned < 1e-12);

  Rng rng(5);
  std::vector<FrameState> perturbed = data.truth;
  const double delta = 0.07;
  for (auto& f : perturbed)
    f.human.root_translation += Vec3(rng.uniform(-delta, delta),
                                     rng.uniform(-delta, delta),
                                     rng.uniform(-delta, delta));
  const auto rnd = evaluate(model, data.object_samples, data.contacts,
                            data.motion_camera, perturbed, data.truth);
  CHECK(rnd.mean.joint_error >= 0.0);
  CHECK(rnd.mean.joint_error <= delta * std::sqrt(3.0) + 1e-12);

  std::vector<FrameState> four(data.truth.begin(), data.truth.end() - 1);
  CHECK_THROWS_AS(evaluate(model, data.object_samples, data.contacts,
                           data.motion_camera, four, data.truth),
                  InvalidInputError);
}

TEST_CASE("oracle closure: fitting from truth on clean data stays at truth") {
  const BodyModel model = default_rig();
  SyntheticScenario spec;
  spec.name = "hold";
  spec.frames = 5;
  spec.noise_sigma = 0.0;
  spec.occlusion_rate = 0.0;
  const GeneratedScenario data = generate(model, spec, ContactParams{});
  TrackingProblem problem = problem_from(model, data);
  AdamConfig config;
  config.iterations_motion = 300;

  const auto result = fit_motion(problem, data.truth[0], config);
  const auto metrics = evaluate(model, data.object_samples, data.contacts,
                                problem.camera, result.frames, data.truth);
  CHECK(metrics.mean.joint_error < 1e-6);
  CHECK(metrics.mean.joint_error_root_aligned < 1e-6);
  CHECK(metrics.mean.reprojection_error < 1e-6);
  CHECK(metrics.mean.contact_distance < 1e-6);
  CHECK(metrics.mean.penetration_fraction < 1e-6);
  CHECK(metrics.jitter_params < 1e-6);
  CHECK(metrics.jitter_joints < 1e-6);
}

TEST_CASE("unknown scenarios and degenerate cameras are reported") {
  const BodyModel model = default_rig();
  SyntheticScenario bad;
  bad.name = "juggling";
  CHECK_THROWS_AS(generate(model, bad, ContactParams{}), InvalidInputError);

  SyntheticScenario close;
  close.name = "carry-box";
  close.frames = 1;
  close.camera_radius = 0.05;  // inside the body: joints behind the camera
  CHECK_THROWS_AS(generate(model, close, ContactParams{}), ScenarioError);
}

TEST_CASE("the bundled rig is a valid model with 14 mapped keypoints") {
  const BodyModel model = default_rig();
  model.validate();
  CHECK(model.tree.joint_count() == 18);
  CHECK(model.keypoint_map.size() == 14);
  std::set<int> detector_slots;
  for (const auto& [det, joint] : model.keypoint_map) {
    detector_slots.insert(det);
    CHECK(joint >= 0);
    CHECK(joint < 18);
  }
  CHECK(detector_slots.size() == 14);
  CHECK(model.template_height() > 1.5);
  CHECK(model.template_height() < 2.0);
  CHECK(!model.contact_candidates.empty());

  // Rest pose is self-penetration free so zero-pose configurations are
  // exactly stationary for the self-penetration term.
  const HumanState rest = HumanState::rest(model);
  const auto fk = forward_kinematics(model, rest);
  const auto caps = capsule_proxies(model, fk.joint_positions, 1.0);
  CHECK(self_penetration_penalty(caps, non_adjacent_bone_pairs(model.tree)) ==
        0.0);
}
