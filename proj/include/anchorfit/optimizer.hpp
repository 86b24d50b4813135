#pragma once

#include "anchorfit/errors.hpp"
#include "anchorfit/gradients.hpp"

#include <cstdint>
#include <span>

namespace anchorfit {

struct AdamConfig {
  double learning_rate = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int iterations_static = 3000;
  int iterations_motion = 1000;
  double convergence_tol = 1e-7;
  uint64_t seed = 0;

  void validate() const;
};

struct AdamState {
  Eigen::VectorXd m;
  Eigen::VectorXd v;
  int step = 0;
};

// Canonical bias-corrected Adam update. Frozen entries are untouched.
// `step_index` is 1-based.
void adam_step(Eigen::VectorXd& params, const Eigen::VectorXd& grad,
               AdamState& state, const AdamConfig& config, int step_index,
               std::span<const uint8_t> frozen);

enum class Termination { MaxIterations, Converged, Diverged };

const char* termination_name(Termination t);

struct TraceEntry {
  int iteration = 0;
  LossBreakdown loss;
};

struct OptimizationTrace {
  std::vector<TraceEntry> entries;
  double wall_time_sec = 0.0;
  Termination termination = Termination::MaxIterations;
  Eigen::VectorXd final_params;
};

// Thrown when the objective exceeds 1e6x its initial value or turns
// non-finite; carries the trace up to the abort.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, OptimizationTrace trace)
      : Error(what), trace_(std::move(trace)) {}
  const OptimizationTrace& trace() const { return trace_; }

 private:
  OptimizationTrace trace_;
};

struct StaticFitResult {
  HumanState state;
  OptimizationTrace trace;
  double final_loss = 0.0;
};

// Multi-view static alignment over {scale, root pose, joint rotations}.
// Requires at least one view with >= 4 confident mapped keypoints.
StaticFitResult fit_static(const BodyModel& model,
                           std::span<const Camera> cameras,
                           std::span<const KeypointFrame> views,
                           const HumanState& init, const LossWeights& weights,
                           const AdamConfig& config);

// Same, with the default initialization (zero pose, unit scale, root facing
// the first camera at the median triangulated keypoint depth).
StaticFitResult fit_static(const BodyModel& model,
                           std::span<const Camera> cameras,
                           std::span<const KeypointFrame> views,
                           const LossWeights& weights,
                           const AdamConfig& config);

HumanState default_static_init(const BodyModel& model,
                               std::span<const Camera> cameras,
                               std::span<const KeypointFrame> views);

struct MotionFitResult {
  std::vector<FrameState> frames;
  OptimizationTrace trace;
  LossBreakdown final_loss;
};

// Two-phase tracking: sequential warm-started per-frame fits (60% of the
// iteration budget, no smoothness), then joint refinement of all frames
// under the full objective. Scale, shape and the object mesh stay frozen at
// their static-stage values.
MotionFitResult fit_motion(const TrackingProblem& problem,
                           const FrameState& static_init,
                           const AdamConfig& config);

}  // namespace anchorfit
