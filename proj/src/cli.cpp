#include "anchorfit/cli.hpp"

#include "anchorfit/conformance.hpp"
#include "anchorfit/errors.hpp"
#include "anchorfit/io.hpp"
#include "anchorfit/optimizer.hpp"
#include "anchorfit/synthetic.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>

namespace anchorfit {

namespace {

namespace fs = std::filesystem;

struct CommonOptions {
  std::string config_path;
  std::string rig, cameras, keypoints, contacts, object, init, truth, params;
  std::string out;
  bool write_meshes = false;
  bool deterministic = true;
};

void add_common_paths(CLI::App* cmd, CommonOptions& opt) {
  cmd->add_option("--config", opt.config_path, "run configuration file");
  cmd->add_option("--rig", opt.rig, "rig file (overrides config)");
  cmd->add_option("--cameras", opt.cameras, "camera file");
  cmd->add_option("--keypoints", opt.keypoints, "keypoint file");
  cmd->add_option("--contacts", opt.contacts, "contact pair file");
  cmd->add_option("--object", opt.object, "object mesh (OBJ)");
  cmd->add_option("--init", opt.init, "initial parameter sequence");
  cmd->add_option("--truth", opt.truth, "ground-truth parameter sequence");
  cmd->add_option("--out", opt.out, "output directory");
  // Reductions are always fixed-order in this implementation; the flag is
  // part of the CLI surface and defaults to on.
  cmd->add_flag("--deterministic,!--no-deterministic", opt.deterministic,
                "force fixed-order reductions (default on)");
}

io::RunConfig resolve_config(const CommonOptions& opt,
                             const std::string& expected_stage) {
  io::RunConfig config;
  if (!opt.config_path.empty()) config = io::load_config(opt.config_path);
  if (!config.stage.empty() && !expected_stage.empty() &&
      config.stage != expected_stage)
    throw InvalidConfigError("config stage \"" + config.stage +
                             "\" does not match this subcommand");
  auto override_path = [](std::string& dst, const std::string& src) {
    if (!src.empty()) dst = src;
  };
  override_path(config.paths.rig, opt.rig);
  override_path(config.paths.cameras, opt.cameras);
  override_path(config.paths.keypoints, opt.keypoints);
  override_path(config.paths.contacts, opt.contacts);
  override_path(config.paths.object, opt.object);
  override_path(config.paths.init, opt.init);
  override_path(config.paths.truth, opt.truth);
  override_path(config.paths.output_dir, opt.out);
  return config;
}

std::string need(const std::string& value, const char* what) {
  if (value.empty())
    throw InvalidConfigError(std::string("missing required path: ") + what);
  if (!fs::exists(value))
    throw InvalidConfigError(std::string(what) + " path does not exist: " + value);
  return value;
}

fs::path ensure_out_dir(const io::RunConfig& config) {
  if (config.paths.output_dir.empty())
    throw InvalidConfigError("missing required path: output_dir");
  fs::create_directories(config.paths.output_dir);
  return config.paths.output_dir;
}

BodyModel load_rig_with_sigma(io::RunConfig& config) {
  BodyModel model = io::load_rig(need(config.paths.rig, "rig"));
  if (!config.sigma_dist_given)
    config.weights.gm_sigma_dist = LossWeights::defaults_for(model).gm_sigma_dist;
  return model;
}

// view_id of each keypoint view selects its camera.
std::vector<Camera> cameras_for_views(const std::vector<Camera>& cameras,
                                      const std::vector<KeypointFrame>& views) {
  std::vector<Camera> out;
  for (const auto& v : views) {
    if (v.view_id < 0 || v.view_id >= static_cast<int>(cameras.size()))
      throw InvalidInputError("keypoint view_id " + std::to_string(v.view_id) +
                              " has no camera");
    out.push_back(cameras[v.view_id]);
  }
  return out;
}

int run_fit_static(const CommonOptions& opt) {
  io::RunConfig config = resolve_config(opt, "static");
  BodyModel model = load_rig_with_sigma(config);
  const auto cameras = io::load_cameras(need(config.paths.cameras, "cameras"));
  const auto keyframes =
      io::load_keypoints(need(config.paths.keypoints, "keypoints"));
  if (keyframes.empty() || keyframes[0].empty())
    throw InvalidInputError("static keypoint file has no views");
  const auto& views = keyframes[0];
  const auto view_cameras = cameras_for_views(cameras, views);
  const fs::path out = ensure_out_dir(config);

  std::optional<FrameState> init_frame;
  if (!config.paths.init.empty()) {
    auto init_frames = io::load_params(need(config.paths.init, "init"));
    init_frame = init_frames[0];
    if (static_cast<int>(init_frame->human.joint_rotations.size()) !=
        model.tree.joint_count())
      throw InvalidInputError("init pose does not match the rig");
    if (init_frame->human.shape_coeffs.size() == 0 && model.shape_count() > 0)
      init_frame->human.shape_coeffs = Eigen::VectorXd::Zero(model.shape_count());
  }

  StaticFitResult result =
      init_frame.has_value()
          ? fit_static(model, view_cameras, views, init_frame->human,
                       config.weights, config.adam)
          : fit_static(model, view_cameras, views, config.weights, config.adam);

  FrameState out_frame;
  out_frame.human = result.state;
  if (init_frame.has_value()) out_frame.object = init_frame->object;
  io::save_params(out / "params.json", {&out_frame, 1});
  io::save_trace_csv(out / "metrics.csv", result.trace);
  if (opt.write_meshes) {
    const FKResult fk = forward_kinematics(model, result.state);
    io::save_obj(out / "human.obj",
                 Mesh{skin_vertices(model, fk, result.state), model.faces});
  }
  std::printf("fit-static: final loss %.6g after %zu iterations (%s), %.2f s\n",
              result.final_loss, result.trace.entries.size(),
              termination_name(result.trace.termination),
              result.trace.wall_time_sec);
  return 0;
}

int run_fit_motion(const CommonOptions& opt) {
  io::RunConfig config = resolve_config(opt, "motion");
  BodyModel model = load_rig_with_sigma(config);
  const auto cameras = io::load_cameras(need(config.paths.cameras, "cameras"));
  const auto keyframes =
      io::load_keypoints(need(config.paths.keypoints, "keypoints"));
  if (keyframes.empty())
    throw InvalidInputError("keypoint file has no frames");
  auto mesh = std::make_shared<Mesh>(
      io::load_obj(need(config.paths.object, "object")));
  auto init_frames = io::load_params(need(config.paths.init, "init"));
  if (!init_frames[0].object.has_value())
    throw InvalidInputError("init file frame 0 has no object pose");
  const fs::path out = ensure_out_dir(config);

  TrackingProblem problem;
  problem.model = &model;
  problem.object_mesh = mesh;
  problem.object_samples = sample_object_surface(
      *mesh, config.contact.n_samples, config.contact.seed_index);
  problem.weights = config.weights;
  for (const auto& frame_views : keyframes) {
    if (frame_views.size() != 1)
      throw InvalidInputError("motion keypoints must carry one view per frame");
    problem.keypoints.push_back(frame_views[0]);
  }
  problem.camera = cameras_for_views(cameras, {problem.keypoints[0]})[0];
  problem.contacts = io::load_contacts(need(config.paths.contacts, "contacts"));
  problem.contacts.validate(problem.object_samples.count(),
                            model.vertex_count());

  FrameState init = init_frames[0];
  init.object->mesh = mesh;
  if (init.human.shape_coeffs.size() == 0 && model.shape_count() > 0)
    init.human.shape_coeffs = Eigen::VectorXd::Zero(model.shape_count());

  MotionFitResult result = fit_motion(problem, init, config.adam);
  io::save_params(out / "params.json", result.frames);
  io::save_trace_csv(out / "metrics.csv", result.trace);
  if (opt.write_meshes) {
    for (size_t f = 0; f < result.frames.size(); ++f) {
      char name[64];
      std::snprintf(name, sizeof(name), "human_%04zu.obj", f);
      const FKResult fk = forward_kinematics(model, result.frames[f].human);
      io::save_obj(out / name,
                   Mesh{skin_vertices(model, fk, result.frames[f].human),
                        model.faces});
      std::snprintf(name, sizeof(name), "object_%04zu.obj", f);
      io::save_obj(out / name,
                   Mesh{transform_object(*result.frames[f].object), mesh->faces});
    }
  }
  std::printf(
      "fit-motion: final loss %.6g over %d frames (%s), %.2f s\n",
      result.final_loss.total, problem.frame_count(),
      termination_name(result.trace.termination), result.trace.wall_time_sec);
  return 0;
}

int run_extract_contacts(const CommonOptions& opt) {
  io::RunConfig config = resolve_config(opt, "");
  BodyModel model = load_rig_with_sigma(config);
  auto mesh = std::make_shared<Mesh>(
      io::load_obj(need(config.paths.object, "object")));
  auto frames = io::load_params(need(config.paths.init, "init"));
  if (!frames[0].object.has_value())
    throw InvalidInputError("init file frame 0 has no object pose");
  const fs::path out = ensure_out_dir(config);

  FrameState frame = frames[0];
  frame.object->mesh = mesh;
  if (frame.human.shape_coeffs.size() == 0 && model.shape_count() > 0)
    frame.human.shape_coeffs = Eigen::VectorXd::Zero(model.shape_count());

  const auto samples = sample_object_surface(*mesh, config.contact.n_samples,
                                             config.contact.seed_index);
  const FKResult fk = forward_kinematics(model, frame.human);
  const auto posed_vertices = skin_vertices(model, fk, frame.human);
  const auto posed_normals = vertex_normals(Mesh{posed_vertices, model.faces});
  const auto candidates =
      gather_candidates(model, posed_vertices, posed_normals);
  const auto posed = pose_samples(*frame.object, samples);
  const ContactPairSet contacts = extract_contacts(
      posed, candidates, config.contact.tau_n, config.contact.tau_d,
      config.weights.gm_sigma_dist, config.contact.gate);

  io::save_contacts(out / "contacts.json", contacts);
  std::vector<io::ContactDiagnostic> rows;
  for (const auto& [i, j] : contacts.pairs) {
    io::ContactDiagnostic row;
    row.sample = i;
    row.vertex = j;
    row.distance = (posed.points[i] - posed_vertices[j]).norm();
    const double dot = posed.normals[i].dot(posed_normals[j]);
    row.normal_gate =
        config.contact.gate == NormalGate::Antiparallel ? 1.0 + dot : 1.0 - dot;
    row.rho_distance = geman_mcclure(row.distance, config.weights.gm_sigma_dist);
    rows.push_back(row);
  }
  io::save_contact_diagnostics(out / "contacts_diagnostics.csv", rows);
  std::printf("extract-contacts: %zu valid pairs from %d samples\n",
              contacts.pairs.size(), samples.count());
  return 0;
}

struct SynthOptions {
  std::string scenario = "carry-box";
  int frames = 30;
  double noise = 0.0;
  double occlusion = 0.0;
  uint64_t seed = 1;
  int views = 4;
  double radius = 3.0;
};

int run_synth(const CommonOptions& opt, const SynthOptions& synth) {
  io::RunConfig config = resolve_config(opt, "");
  if (config.paths.output_dir.empty())
    throw InvalidConfigError("missing required path: output_dir");

  BodyModel model;
  if (!config.paths.rig.empty())
    model = io::load_rig(need(config.paths.rig, "rig"));
  else
    model = default_rig();
  if (!config.sigma_dist_given)
    config.weights.gm_sigma_dist = LossWeights::defaults_for(model).gm_sigma_dist;

  SyntheticScenario scenario;
  scenario.name = synth.scenario;
  scenario.frames = synth.frames;
  scenario.noise_sigma = synth.noise;
  scenario.occlusion_rate = synth.occlusion;
  scenario.seed = synth.seed;
  scenario.static_view_count = synth.views;
  scenario.camera_radius = synth.radius;

  const GeneratedScenario data = generate(model, scenario, config.contact);
  const fs::path out = ensure_out_dir(config);

  io::save_rig(out / "rig.json", model);
  io::save_cameras(out / "cameras_static.json", data.static_cameras);
  io::save_cameras(out / "cameras_motion.json", {&data.motion_camera, 1});
  io::save_keypoints(out / "keypoints_static.json", {&data.static_keypoints, 1});
  std::vector<std::vector<KeypointFrame>> motion_frames;
  for (const auto& kf : data.motion_keypoints) motion_frames.push_back({kf});
  io::save_keypoints(out / "keypoints_motion.json", motion_frames);
  io::save_obj(out / "object.obj", *data.object_mesh);
  io::save_params(out / "truth.json", data.truth);
  io::save_params(out / "init.json", {&data.truth[0], 1});
  io::save_contacts(out / "contacts.json", data.contacts);

  std::printf("synth: %s, %d frames, %zu contact pairs, wrote %s\n",
              scenario.name.c_str(), scenario.frames, data.contacts.pairs.size(),
              out.string().c_str());
  return 0;
}

int run_eval(const CommonOptions& opt) {
  io::RunConfig config = resolve_config(opt, "");
  BodyModel model = load_rig_with_sigma(config);
  auto mesh = std::make_shared<Mesh>(
      io::load_obj(need(config.paths.object, "object")));
  const auto cameras = io::load_cameras(need(config.paths.cameras, "cameras"));
  const auto contacts = io::load_contacts(need(config.paths.contacts, "contacts"));
  if (opt.params.empty())
    throw InvalidConfigError("eval needs --params (the recovered sequence)");
  auto recovered = io::load_params(need(opt.params, "params"));
  auto truth = io::load_params(need(config.paths.truth, "truth"));
  const fs::path out = ensure_out_dir(config);

  for (auto& f : recovered) {
    if (f.object.has_value()) f.object->mesh = mesh;
    if (f.human.shape_coeffs.size() == 0 && model.shape_count() > 0)
      f.human.shape_coeffs = Eigen::VectorXd::Zero(model.shape_count());
  }
  for (auto& f : truth) {
    if (f.object.has_value()) f.object->mesh = mesh;
    if (f.human.shape_coeffs.size() == 0 && model.shape_count() > 0)
      f.human.shape_coeffs = Eigen::VectorXd::Zero(model.shape_count());
  }

  const auto samples = sample_object_surface(*mesh, config.contact.n_samples,
                                             config.contact.seed_index);
  contacts.validate(samples.count(), model.vertex_count());
  const MetricsRecord record =
      evaluate(model, samples, contacts, cameras[0], recovered, truth);
  io::save_metrics(out / "metrics.json", out / "metrics.csv", record);
  std::printf(
      "eval: joint error %.6g (root-aligned %.6g), reproj %.6g, contact %.6g, "
      "pen %.4g%%\n",
      record.mean.joint_error, record.mean.joint_error_root_aligned,
      record.mean.reprojection_error, record.mean.contact_distance,
      100.0 * record.mean.penetration_fraction);
  return 0;
}

struct CheckGradOptions {
  int configs = 100;
  double tol = 1e-4;
  double step = 1e-5;
  int frames = 30;
  int samples = 256;
  uint64_t seed = 7;
  std::string scenario = "carry-box";
};

int run_check_grad(const CommonOptions& opt, const CheckGradOptions& cg) {
  io::RunConfig config = resolve_config(opt, "");
  BodyModel model;
  if (!config.paths.rig.empty())
    model = io::load_rig(need(config.paths.rig, "rig"));
  else
    model = default_rig();

  GradConformanceOptions opts;
  opts.configurations = cg.configs;
  opts.frames = cg.frames;
  opts.object_samples = cg.samples;
  opts.step = cg.step;
  opts.seed = cg.seed;
  opts.scenario = cg.scenario;

  const GradConformanceResult result = run_grad_conformance(model, opts);
  std::printf(
      "check-grad: %d configs, max rel err %.3g (config %d, %s[%d] frame %d), "
      "max abs err %.3g, small-entry abs err %.3g, %d redraws, %.1f s\n",
      cg.configs, result.max_rel_err, result.worst_config,
      param_block_name(result.worst_entry.block),
      result.worst_entry.offset_in_block, result.worst_entry.frame,
      result.max_abs_err, result.max_small_abs_err, result.rejected_configs,
      result.runtime_sec);
  if (!result.passes(cg.tol)) {
    std::printf("check-grad: FAILED tolerance %.3g\n", cg.tol);
    return 2;
  }
  std::printf("check-grad: OK (tolerance %.3g)\n", cg.tol);
  return 0;
}

}  // namespace

int cli_dispatch(int argc, const char* const* argv) {
  CLI::App app{"articulated human-object fitting from 2D keypoints"};
  app.require_subcommand(1);

  CommonOptions common;
  SynthOptions synth;
  CheckGradOptions cg;

  auto* fit_static_cmd =
      app.add_subcommand("fit-static", "multi-view static body alignment");
  add_common_paths(fit_static_cmd, common);
  fit_static_cmd->add_flag("--write-meshes", common.write_meshes,
                           "export the fitted mesh as OBJ");

  auto* fit_motion_cmd =
      app.add_subcommand("fit-motion", "track a keypoint sequence");
  add_common_paths(fit_motion_cmd, common);
  fit_motion_cmd->add_flag("--write-meshes", common.write_meshes,
                           "export posed meshes per frame");

  auto* extract_cmd = app.add_subcommand(
      "extract-contacts", "extract contact pairs from a static composition");
  add_common_paths(extract_cmd, common);

  auto* synth_cmd =
      app.add_subcommand("synth", "generate a synthetic scenario");
  add_common_paths(synth_cmd, common);
  synth_cmd->add_option("--scenario", synth.scenario,
                        "carry-box | sit-still | mop-sweep | hold");
  synth_cmd->add_option("--frames", synth.frames, "sequence length");
  synth_cmd->add_option("--noise", synth.noise, "keypoint noise sigma");
  synth_cmd->add_option("--occlusion", synth.occlusion, "keypoint drop rate");
  synth_cmd->add_option("--seed", synth.seed, "random seed");
  synth_cmd->add_option("--views", synth.views, "static camera count");
  synth_cmd->add_option("--radius", synth.radius, "camera ring radius");

  auto* eval_cmd =
      app.add_subcommand("eval", "compare a recovered sequence against truth");
  add_common_paths(eval_cmd, common);
  eval_cmd->add_option("--params", common.params, "recovered parameter file");

  auto* check_cmd =
      app.add_subcommand("check-grad", "finite-difference gradient conformance");
  add_common_paths(check_cmd, common);
  check_cmd->add_option("--configs", cg.configs, "number of random configs");
  check_cmd->add_option("--tol", cg.tol, "relative error tolerance");
  check_cmd->add_option("--step", cg.step, "finite difference step");
  check_cmd->add_option("--frames", cg.frames, "frames in the test problem");
  check_cmd->add_option("--samples", cg.samples, "object sample count");
  check_cmd->add_option("--seed", cg.seed, "random seed");
  check_cmd->add_option("--scenario", cg.scenario, "scenario name");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (fit_static_cmd->parsed()) return run_fit_static(common);
    if (fit_motion_cmd->parsed()) return run_fit_motion(common);
    if (extract_cmd->parsed()) return run_extract_contacts(common);
    if (synth_cmd->parsed()) return run_synth(common, synth);
    if (eval_cmd->parsed()) return run_eval(common);
    if (check_cmd->parsed()) return run_check_grad(common, cg);
  } catch (const DivergenceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}

}  // namespace anchorfit
