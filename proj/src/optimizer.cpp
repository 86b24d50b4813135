#include "anchorfit/optimizer.hpp"

#include "anchorfit/errors.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <string>

namespace anchorfit {

void AdamConfig::validate() const {
  if (!(learning_rate > 0.0))
    throw InvalidConfigError("learning_rate must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
    throw InvalidConfigError("Adam betas must lie in [0, 1)");
  if (!(eps > 0.0)) throw InvalidConfigError("Adam eps must be positive");
  if (iterations_static < 1 || iterations_motion < 1)
    throw InvalidConfigError("iteration counts must be >= 1");
  if (!(convergence_tol >= 0.0))
    throw InvalidConfigError("convergence_tol must be >= 0");
}

const char* termination_name(Termination t) {
  switch (t) {
    case Termination::MaxIterations: return "max-iters";
    case Termination::Converged: return "converged";
    case Termination::Diverged: return "diverged";
  }
  return "?";
}

void adam_step(Eigen::VectorXd& params, const Eigen::VectorXd& grad,
               AdamState& state, const AdamConfig& config, int step_index,
               std::span<const uint8_t> frozen) {
  if (params.size() != grad.size())
    throw ContractViolationError("adam_step: params/grad size mismatch");
  if (step_index < 1)
    throw ContractViolationError("adam_step: step index must be >= 1");
  if (!grad.allFinite())
    throw DivergenceError("adam_step: non-finite gradient", {});
  if (state.m.size() != params.size()) {
    state.m = Eigen::VectorXd::Zero(params.size());
    state.v = Eigen::VectorXd::Zero(params.size());
  }
  const double b1 = config.beta1, b2 = config.beta2;
  const double c1 = 1.0 - std::pow(b1, step_index);
  const double c2 = 1.0 - std::pow(b2, step_index);
  for (int i = 0; i < params.size(); ++i) {
    if (!frozen.empty() && frozen[i]) continue;
    state.m[i] = b1 * state.m[i] + (1.0 - b1) * grad[i];
    state.v[i] = b2 * state.v[i] + (1.0 - b2) * grad[i] * grad[i];
    const double m_hat = state.m[i] / c1;
    const double v_hat = state.v[i] / c2;
    params[i] -= config.learning_rate * m_hat / (std::sqrt(v_hat) + config.eps);
  }
  state.step = step_index;
}

namespace {

using EvalFn = std::function<LossBreakdown(const ParamVector&, Eigen::VectorXd*)>;

struct LoopOutcome {
  double best_total = 0.0;
  LossBreakdown best_breakdown;
  Eigen::VectorXd best_values;
  Termination termination = Termination::MaxIterations;
};

// Evaluate-record-step loop. The loss at the current parameters is recorded
// each iteration before stepping, so entry 0 is the initial objective and the
// best-so-far is a true minimum over everything evaluated.
LoopOutcome run_adam_loop(ParamVector& params, const EvalFn& eval,
                          int iterations, const AdamConfig& config,
                          OptimizationTrace* trace, int iteration_offset) {
  LoopOutcome out;
  AdamState adam;
  Eigen::VectorXd grad;
  double initial = 0.0;
  double previous = 0.0;
  int flat_streak = 0;
  bool have_best = false;

  for (int t = 1; t <= iterations; ++t) {
    const LossBreakdown breakdown = eval(params, &grad);
    const double total = breakdown.total;
    if (t == 1) initial = total;

    if (trace) trace->entries.push_back({iteration_offset + t - 1, breakdown});
    if (!std::isfinite(total) ||
        total > 1e6 * std::max(std::abs(initial), 1e-12)) {
      OptimizationTrace partial;
      if (trace) partial = *trace;
      throw DivergenceError(
          "objective diverged (" + std::to_string(total) + " from initial " +
              std::to_string(initial) + ")",
          std::move(partial));
    }

    if (!have_best || total < out.best_total) {
      out.best_total = total;
      out.best_breakdown = breakdown;
      out.best_values = params.values;
      have_best = true;
    }

    if (t > 1) {
      const double rel =
          std::abs(total - previous) / std::max(std::abs(previous), 1e-12);
      flat_streak = rel < config.convergence_tol ? flat_streak + 1 : 0;
      if (flat_streak >= 50) {
        out.termination = Termination::Converged;
        previous = total;
        break;
      }
    }
    previous = total;

    adam_step(params.values, grad, adam, config, t, params.frozen);
    project_to_valid(params);
  }
  return out;
}

int confident_mapped_keypoints(const BodyModel& model,
                               const KeypointFrame& view) {
  int n = 0;
  for (const auto& [det, joint] : model.keypoint_map) {
    (void)joint;
    if (det < static_cast<int>(view.confidence.size()) &&
        view.confidence[det] > 0.0)
      ++n;
  }
  return n;
}

}  // namespace

HumanState default_static_init(const BodyModel& model,
                               std::span<const Camera> cameras,
                               std::span<const KeypointFrame> views) {
  HumanState init = HumanState::rest(model);
  if (cameras.empty()) return init;
  const Camera& cam0 = cameras[0];
  const Vec3 c0 = cam0.center();
  const Vec3 f0 = cam0.forward();

  // Median depth of midpoint-triangulated keypoints; 3 units if single view.
  std::vector<double> depths;
  if (cameras.size() >= 2) {
    for (const auto& [det, joint] : model.keypoint_map) {
      (void)joint;
      std::vector<std::pair<Vec3, Vec3>> rays;  // origin, direction
      for (size_t v = 0; v < views.size() && rays.size() < 2; ++v) {
        if (det >= static_cast<int>(views[v].points.size()) ||
            views[v].confidence[det] <= 0.0)
          continue;
        const Camera& cam = cameras[v];
        const Vec2 uv = views[v].points[det];
        const Vec3 dir_cam((uv.x() * cam.width - cam.principal.x()) / cam.focal.x(),
                           (uv.y() * cam.height - cam.principal.y()) / cam.focal.y(),
                           1.0);
        rays.emplace_back(cam.center(),
                          (cam.extrinsic.linear.transpose() * dir_cam).normalized());
      }
      if (rays.size() < 2) continue;
      const auto& [o1, d1] = rays[0];
      const auto& [o2, d2] = rays[1];
      const double b = d1.dot(d2);
      const double denom = 1.0 - b * b;
      if (denom < 1e-12) continue;
      const Vec3 r = o1 - o2;
      const double s = (b * d2.dot(r) - d1.dot(r)) / denom;
      const double u = (d2.dot(r) - b * d1.dot(r)) / denom;
      const Vec3 mid = 0.5 * ((o1 + s * d1) + (o2 + u * d2));
      const double depth = (mid - c0).dot(f0);
      if (std::isfinite(depth) && depth > kDepthMin) depths.push_back(depth);
    }
  }
  double depth = 3.0;
  if (!depths.empty()) {
    std::sort(depths.begin(), depths.end());
    depth = depths[depths.size() / 2];
  }

  const auto rest = rest_joint_positions(model.tree);
  Vec3 centroid = Vec3::Zero();
  for (const auto& p : rest) centroid += p;
  centroid /= static_cast<double>(rest.size());

  const double yaw = std::atan2(-f0.x(), -f0.z());
  init.root_rotation = Vec3(0, yaw, 0);
  const Mat3 r = axis_angle_to_matrix(init.root_rotation);
  init.root_translation = (c0 + depth * f0) - r * centroid;
  return init;
}

StaticFitResult fit_static(const BodyModel& model,
                           std::span<const Camera> cameras,
                           std::span<const KeypointFrame> views,
                           const HumanState& init, const LossWeights& weights,
                           const AdamConfig& config) {
  config.validate();
  StaticProblem problem;
  problem.model = &model;
  problem.cameras.assign(cameras.begin(), cameras.end());
  problem.views.assign(views.begin(), views.end());
  problem.weights = weights;
  problem.validate();
  init.validate(model);

  bool constrained = false;
  for (const auto& view : views)
    if (confident_mapped_keypoints(model, view) >= 4) constrained = true;
  if (!constrained)
    throw UnderconstrainedInputError(
        "static fit needs at least one view with >= 4 confident keypoints");

  const auto t0 = std::chrono::steady_clock::now();
  const ParamLayout layout = ParamLayout::static_stage(model);
  FrameState fs;
  fs.human = init;
  ParamVector params = pack(layout, {&fs, 1});

  const int joints = model.tree.joint_count();
  const EvalFn eval = [&](const ParamVector& p,
                          Eigen::VectorXd* grad) -> LossBreakdown {
    const double value = eval_static_with_grad(problem, p, grad);
    const HumanState h = unpack(p, nullptr)[0].human;
    LossBreakdown b;
    b.regularization =
        weights.pose_prior_weight * (pose_magnitude(h) / joints);
    b.body = static_alignment_loss(model, h, problem.cameras, problem.views,
                                   weights);
    b.total = value;
    return b;
  };

  StaticFitResult result;
  auto outcome = run_adam_loop(params, eval, config.iterations_static, config,
                               &result.trace, 0);
  result.trace.termination = outcome.termination;
  result.trace.final_params = outcome.best_values;
  result.trace.wall_time_sec =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();

  ParamVector best = params;
  best.values = outcome.best_values;
  result.state = unpack(best, nullptr)[0].human;
  result.final_loss = outcome.best_total;
  return result;
}

StaticFitResult fit_static(const BodyModel& model,
                           std::span<const Camera> cameras,
                           std::span<const KeypointFrame> views,
                           const LossWeights& weights,
                           const AdamConfig& config) {
  return fit_static(model, cameras, views,
                    default_static_init(model, cameras, views), weights,
                    config);
}

MotionFitResult fit_motion(const TrackingProblem& problem,
                           const FrameState& static_init,
                           const AdamConfig& config) {
  config.validate();
  problem.validate();
  static_init.human.validate(*problem.model);
  if (!static_init.object.has_value())
    throw ContractViolationError(
        "fit_motion needs the static object pose as part of the init");
  static_init.object->validate(/*require_mesh=*/false);

  const auto t0 = std::chrono::steady_clock::now();
  const BodyModel& model = *problem.model;
  const int frames = problem.frame_count();

  // Phase A: sequential warm-started single-frame fits, 60% of the budget.
  const int budget_a = (6 * config.iterations_motion) / 10;
  const int per_frame_iters = budget_a / frames;
  const int phase_b_iters = config.iterations_motion - per_frame_iters * frames;

  std::vector<FrameState> fitted(frames);
  FrameState warm = static_init;
  warm.object->mesh = problem.object_mesh;
  const ParamLayout single_layout = ParamLayout::motion(model, 1);
  for (int f = 0; f < frames; ++f) {
    FrameState start = (f == 0) ? warm : fitted[f - 1];
    if (per_frame_iters > 0) {
      TrackingProblem single = problem;
      single.keypoints = {problem.keypoints[f]};
      ParamVector params = pack(single_layout, {&start, 1});
      const EvalFn eval = [&](const ParamVector& p,
                              Eigen::VectorXd* grad) -> LossBreakdown {
        return eval_total_with_grad(single, p, grad);
      };
      auto outcome =
          run_adam_loop(params, eval, per_frame_iters, config, nullptr, 0);
      ParamVector best = params;
      best.values = outcome.best_values;
      fitted[f] = unpack(best, problem.object_mesh)[0];
    } else {
      fitted[f] = start;
    }
  }

  // Phase B: joint refinement of all frames under the full objective.
  const ParamLayout layout = ParamLayout::motion(model, frames);
  ParamVector params = pack(layout, fitted);
  const EvalFn eval = [&](const ParamVector& p,
                          Eigen::VectorXd* grad) -> LossBreakdown {
    return eval_total_with_grad(problem, p, grad);
  };

  MotionFitResult result;
  auto outcome =
      run_adam_loop(params, eval, phase_b_iters, config, &result.trace, 0);
  result.trace.termination = outcome.termination;
  result.trace.final_params = outcome.best_values;
  result.trace.wall_time_sec =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();

  ParamVector best = params;
  best.values = outcome.best_values;
  result.frames = unpack(best, problem.object_mesh);
  result.final_loss = outcome.best_breakdown;
  return result;
}

}  // namespace anchorfit
