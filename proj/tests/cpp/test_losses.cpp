#include "anchorfit/errors.hpp"
#include "anchorfit/losses.hpp"
#include "anchorfit/synthetic.hpp"
#include "test_util.hpp"

#include <doctest.h>

using namespace anchorfit;

TEST_CASE("geman-mcclure value table") {
  const double sigma = 0.05;
  CHECK(geman_mcclure(0.0, sigma) == 0.0);
  CHECK(geman_mcclure(sigma, sigma) == 0.5);
  CHECK(geman_mcclure(10 * sigma, sigma) == doctest::Approx(100.0 / 101.0).epsilon(1e-15));
  CHECK_THROWS_AS(geman_mcclure(1.0, 0.0), InvalidConfigError);
  CHECK_THROWS_AS(geman_mcclure(1.0, -1.0), InvalidConfigError);
}

TEST_CASE("geman-mcclure is monotone and bounded") {
  Rng rng(3);
  double prev = -1.0;
  for (double e = 0.0; e < 2.0; e += 0.01) {
    const double rho = geman_mcclure(e, 0.05);
    CHECK(rho >= 0.0);
    CHECK(rho < 1.0);
    CHECK(rho > prev);
    prev = rho;
  }
}

namespace {

struct StaticFixture {
  BodyModel model;
  HumanState state;
  std::vector<Camera> cameras;
  std::vector<KeypointFrame> views;
  LossWeights weights;

  explicit StaticFixture(uint64_t seed, int n_views = 4) {
    Rng rng(seed);
    model = test::random_rig(rng, 6, 12);
    state = test::random_state(rng, model, 0.4);
    const auto fk = forward_kinematics(model, state);
    Vec3 center = Vec3::Zero();
    for (const auto& p : fk.joint_positions) center += p;
    center /= fk.joint_positions.size();
    cameras = default_static_ring(center, n_views, 3.0);
    for (size_t v = 0; v < cameras.size(); ++v) {
      KeypointFrame frame;
      frame.view_id = static_cast<int>(v);
      frame.points.assign(model.keypoint_map.size(), Vec2::Zero());
      frame.confidence.assign(model.keypoint_map.size(), 1.0);
      for (const auto& [det, joint] : model.keypoint_map)
        frame.points[det] = project(cameras[v], fk.joint_positions[joint]);
      views.push_back(frame);
    }
  }
};

}  // namespace

TEST_CASE("static alignment: self-projected keypoints give zero loss") {
  StaticFixture fx(7);
  CHECK(static_alignment_loss(fx.model, fx.state, fx.cameras, fx.views,
                              fx.weights) < 1e-20);
}

TEST_CASE("static alignment: single keypoint offset by sigma gives 0.5") {
  StaticFixture fx(11, 1);
  for (auto& c : fx.views[0].confidence) c = 0.0;
  fx.views[0].confidence[fx.model.keypoint_map[0].first] = 1.0;
  fx.views[0].points[fx.model.keypoint_map[0].first].x() +=
      fx.weights.gm_sigma_align;
  CHECK(static_alignment_loss(fx.model, fx.state, fx.cameras, fx.views,
                              fx.weights) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("static alignment: underconstrained when nothing is confident") {
  StaticFixture fx(13);
  for (auto& v : fx.views)
    for (auto& c : v.confidence) c = 0.0;
  CHECK_THROWS_AS(static_alignment_loss(fx.model, fx.state, fx.cameras,
                                        fx.views, fx.weights),
                  UnderconstrainedInputError);
}

TEST_CASE("static alignment equals a naive scalar loop") {
  Rng rng(17);
  StaticFixture fx(19);
  // Perturb the pose and add noise so residuals are non-trivial.
  HumanState other = fx.state;
  for (auto& r : other.joint_rotations) r += 0.1 * test::random_unit(rng);
  double naive = 0.0;
  const auto fk = forward_kinematics(fx.model, other);
  for (size_t v = 0; v < fx.views.size(); ++v) {
    for (const auto& [det, joint] : fx.model.keypoint_map) {
      if (fx.views[v].confidence[det] <= 0.0) continue;
      const Vec2 uv = project_clamped(fx.cameras[v], fk.joint_positions[joint]);
      const double e = (uv - fx.views[v].points[det]).norm();
      naive += (e * e) / (fx.weights.gm_sigma_align * fx.weights.gm_sigma_align + e * e);
    }
  }
  const double loss = static_alignment_loss(fx.model, other, fx.cameras,
                                            fx.views, fx.weights);
  CHECK(loss == doctest::Approx(naive).epsilon(1e-12));
}

TEST_CASE("body keypoint loss: zero confidence and the (0 + 0.5)/N table") {
  StaticFixture fx(23, 1);
  KeypointFrame frame = fx.views[0];
  for (auto& c : frame.confidence) c = 0.0;
  CHECK(body_keypoint_loss(fx.model, fx.state, fx.cameras[0], frame,
                           fx.weights) == 0.0);

  // Two confident keypoints: one exact, one offset by sigma.
  BodyModel two = fx.model;
  two.keypoint_map = {fx.model.keypoint_map[0], fx.model.keypoint_map[1]};
  KeypointFrame pair = fx.views[0];
  pair.confidence.assign(pair.confidence.size(), 0.0);
  pair.confidence[two.keypoint_map[0].first] = 1.0;
  pair.confidence[two.keypoint_map[1].first] = 1.0;
  pair.points[two.keypoint_map[1].first].y() += fx.weights.gm_sigma_align;
  CHECK(body_keypoint_loss(two, fx.state, fx.cameras[0], pair, fx.weights) ==
        doctest::Approx(0.25).epsilon(1e-15));
}

TEST_CASE("body keypoint loss equals a naive weighted loop") {
  Rng rng(29);
  StaticFixture fx(31, 1);
  KeypointFrame frame = fx.views[0];
  for (size_t i = 0; i < frame.points.size(); ++i) {
    frame.points[i] += 0.01 * Vec2(rng.gaussian(), rng.gaussian());
    frame.confidence[i] = rng.uniform();
  }
  const auto fk = forward_kinematics(fx.model, fx.state);
  double naive = 0.0;
  for (const auto& [det, joint] : fx.model.keypoint_map) {
    const double w = frame.confidence[det];
    if (w <= 0.0) continue;
    const Vec2 uv = project_clamped(fx.cameras[0], fk.joint_positions[joint]);
    const double e = (uv - frame.points[det]).norm();
    naive += w * (e * e) /
             (fx.weights.gm_sigma_align * fx.weights.gm_sigma_align + e * e);
  }
  naive /= fx.model.keypoint_map.size();
  CHECK(body_keypoint_loss(fx.model, fx.state, fx.cameras[0], frame,
                           fx.weights) == doctest::Approx(naive).epsilon(1e-12));
}

TEST_CASE("contact loss: coincident, single pair, naive oracle, empty") {
  std::vector<Vec3> human = {Vec3(1, 1, 1)};
  std::vector<Vec3> object = {Vec3(1, 1, 1)};
  ContactPairSet set;
  set.pairs = {{0, 0}};
  CHECK(contact_loss(human, object, set) == 0.0);

  object[0] = Vec3(1, 1, 1.3);
  CHECK(contact_loss(human, object, set) == doctest::Approx(0.09).epsilon(1e-15));

  Rng rng(37);
  std::vector<Vec3> h50, o50;
  ContactPairSet pairs;
  for (int i = 0; i < 50; ++i) {
    h50.push_back(test::random_vec(rng, 1));
    o50.push_back(test::random_vec(rng, 1));
    pairs.pairs.emplace_back(i, i);
  }
  double naive = 0.0;
  for (int i = 0; i < 50; ++i) naive += (h50[i] - o50[i]).squaredNorm();
  naive /= 50.0;
  CHECK(contact_loss(h50, o50, pairs) == doctest::Approx(naive).epsilon(1e-14));

  bool warn = false;
  CHECK(contact_loss(h50, o50, ContactPairSet{}, &warn) == 0.0);
  CHECK(warn);
}

TEST_CASE("contact loss is invariant under simultaneous rigid motion") {
  Rng rng(41);
  std::vector<Vec3> h, o;
  ContactPairSet set;
  for (int i = 0; i < 20; ++i) {
    h.push_back(test::random_vec(rng, 1));
    o.push_back(test::random_vec(rng, 1));
    set.pairs.emplace_back(i, i);
  }
  const double base = contact_loss(h, o, set);
  const Mat3 r = axis_angle_to_matrix(0.9 * test::random_unit(rng));
  const Vec3 t = test::random_vec(rng, 3.0);
  for (auto& p : h) p = r * p + t;
  for (auto& p : o) p = r * p + t;
  CHECK(contact_loss(h, o, set) == doctest::Approx(base).epsilon(1e-9));
}

TEST_CASE("penetration loss: outside, on-axis and brute-force oracle") {
  std::vector<Capsule> capsules = {{Vec3(0, 0, 0), Vec3(1, 0, 0), 0.2},
                                   {Vec3(0, 1, 0), Vec3(1, 1, 0), 0.15}};
  std::vector<Vec3> outside = {Vec3(0.5, 0.5, 0), Vec3(2, 2, 2)};
  CHECK(penetration_loss(outside, capsules) == 0.0);

  std::vector<Vec3> on_axis = {Vec3(0.5, 0, 0), Vec3(5, 5, 5)};
  CHECK(penetration_loss(on_axis, capsules) ==
        doctest::Approx(0.2 * 0.2 / 2.0).epsilon(1e-14));

  Rng rng(43);
  std::vector<Capsule> caps;
  for (int i = 0; i < 6; ++i)
    caps.push_back({test::random_vec(rng, 0.6), test::random_vec(rng, 0.6),
                    rng.uniform(0.05, 0.3)});
  std::vector<Vec3> samples;
  for (int i = 0; i < 120; ++i) samples.push_back(test::random_vec(rng, 0.8));
  double naive = 0.0;
  int strictly_inside = 0;
  for (const auto& p : samples) {
    double sd = 1e300;
    for (const auto& c : caps) sd = std::min(sd, capsule_signed_distance(c, p));
    if (sd < 0) {
      naive += sd * sd;
      ++strictly_inside;
    }
  }
  naive /= samples.size();
  const double loss = penetration_loss(samples, caps);
  CHECK(loss == doctest::Approx(naive).epsilon(1e-12));
  CHECK((loss > 0.0) == (strictly_inside > 0));
}

TEST_CASE("regularization: constants, linear ramps and a naive oracle") {
  Rng rng(47);
  const BodyModel model = test::random_rig(rng, 5, 12);
  LossWeights weights;

  FrameState constant;
  constant.human = HumanState::rest(model);
  std::vector<FrameState> window(4, constant);
  CHECK(regularization_loss(window, model, weights) == 0.0);

  // Linear ramps in every parameter: second differences vanish; only the
  // pose prior term remains.
  std::vector<FrameState> ramp;
  for (int f = 0; f < 5; ++f) {
    FrameState fs;
    fs.human = HumanState::rest(model);
    fs.human.root_translation = Vec3(0.1 * f, -0.2 * f, 0.05 * f);
    fs.human.root_rotation = Vec3(0.01 * f, 0, 0.02 * f);
    ramp.push_back(fs);
  }
  LossWeights smooth_only = weights;
  smooth_only.self_pen_weight = 0.0;
  smooth_only.pose_prior_weight = 0.0;
  CHECK(regularization_loss(ramp, model, smooth_only) < 1e-25);

  // Random 5-frame window vs a naive reimplementation.
  std::vector<FrameState> random_window;
  for (int f = 0; f < 5; ++f) {
    FrameState fs;
    fs.human = test::random_state(rng, model, 0.3);
    fs.human.scale = 1.0;
    random_window.push_back(fs);
  }
  const double value = regularization_loss(random_window, model, weights);

  double smooth = 0.0;
  for (int f = 1; f + 1 < 5; ++f) {
    const Eigen::VectorXd d =
        frame_parameters(random_window[f + 1], model) -
        2.0 * frame_parameters(random_window[f], model) +
        frame_parameters(random_window[f - 1], model);
    smooth += d.squaredNorm();
  }
  smooth /= 3.0;
  double self_pen = 0.0, pose = 0.0;
  const auto bone_pairs = non_adjacent_bone_pairs(model.tree);
  for (const auto& fs : random_window) {
    const auto fk = forward_kinematics(model, fs.human);
    const auto caps = capsule_proxies(model, fk.joint_positions, fs.human.scale);
    self_pen += self_penetration_penalty(caps, bone_pairs);
    pose += pose_magnitude(fs.human);
  }
  const double naive =
      weights.smooth_weight * smooth +
      weights.self_pen_weight * (self_pen / 5.0) +
      weights.pose_prior_weight * (pose / (5.0 * model.tree.joint_count()));
  CHECK(value == doctest::Approx(naive).epsilon(1e-12));
}

namespace {

TrackingProblem tiny_problem(GeneratedScenario& scenario, const BodyModel& model,
                             int frames) {
  SyntheticScenario spec;
  spec.name = "carry-box";
  spec.frames = frames;
  spec.noise_sigma = 0.01;
  spec.seed = 5;
  scenario = generate(model, spec, ContactParams{});
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

TEST_CASE("total loss: zero weights, single-term projection, recomposition") {
  const BodyModel model = default_rig();
  GeneratedScenario scenario;
  TrackingProblem problem = tiny_problem(scenario, model, 3);

  LossWeights zero;
  zero.lambda_j = zero.lambda_c = zero.lambda_pen = zero.lambda_reg = 0.0;
  TrackingProblem zeroed = problem;
  zeroed.weights = zero;
  const LossBreakdown none = total_loss(zeroed, scenario.truth);
  CHECK(none.total == 0.0);

  LossWeights only_body = zero;
  only_body.lambda_j = 1.0;
  TrackingProblem body_only = problem;
  body_only.weights = only_body;
  const LossBreakdown body = total_loss(body_only, scenario.truth);
  double mean_body = 0.0;
  for (int f = 0; f < 3; ++f)
    mean_body += body_keypoint_loss(model, scenario.truth[f].human,
                                    problem.camera, problem.keypoints[f],
                                    only_body);
  CHECK(body.total == mean_body / 3.0);

  // Recomposition is exact for arbitrary weights.
  Rng rng(53);
  TrackingProblem weighted = problem;
  weighted.weights.lambda_j = rng.uniform(0, 2);
  weighted.weights.lambda_c = rng.uniform(0, 2);
  weighted.weights.lambda_pen = rng.uniform(0, 2);
  weighted.weights.lambda_reg = rng.uniform(0, 2);
  const LossBreakdown b = total_loss(weighted, scenario.truth);
  CHECK(b.total == recompose_total(b, weighted.weights));
  CHECK(std::isfinite(b.body));
  CHECK(std::isfinite(b.contact));
  CHECK(std::isfinite(b.penetration));
  CHECK(std::isfinite(b.regularization));
}

TEST_CASE("breakdown terms match the public per-term losses bitwise") {
  const BodyModel model = default_rig();
  GeneratedScenario scenario;
  TrackingProblem problem = tiny_problem(scenario, model, 4);
  const LossBreakdown b = total_loss(problem, scenario.truth);

  double body = 0.0, contact = 0.0, pen = 0.0;
  for (int f = 0; f < 4; ++f) {
    const auto& fs = scenario.truth[f];
    body += body_keypoint_loss(model, fs.human, problem.camera,
                               problem.keypoints[f], problem.weights);
    const auto fk = forward_kinematics(model, fs.human);
    std::vector<Vec3> posed_samples;
    transform_points(*fs.object, problem.object_samples.points, posed_samples);
    contact += contact_loss(skin_vertices(model, fk, fs.human), posed_samples,
                            problem.contacts);
    pen += penetration_loss(posed_samples,
                            capsule_proxies(model, fk.joint_positions,
                                            fs.human.scale));
  }
  CHECK(b.body == body / 4.0);
  CHECK(b.contact == contact / 4.0);
  CHECK(b.penetration == pen / 4.0);
  CHECK(b.regularization ==
        regularization_loss(scenario.truth, model, problem.weights));
}
