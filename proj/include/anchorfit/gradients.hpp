#pragma once

#include "anchorfit/losses.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <span>
#include <vector>

namespace anchorfit {

enum class ParamBlock {
  HumanRootRot,
  HumanRootTrans,
  HumanJointRots,
  HumanScale,
  HumanShape,
  ObjectRot,
  ObjectTrans,
};

const char* param_block_name(ParamBlock block);

struct BlockDesc {
  int frame = 0;
  ParamBlock block = ParamBlock::HumanRootRot;
  int offset = 0;  // into the flat vector
  int length = 0;
  bool frozen = false;
  // Entries [0, frozen_prefix) of the block are frozen even when the block
  // itself is live; used for the root joint rotation, which is an exact
  // gauge duplicate of the global rotation.
  int frozen_prefix = 0;
};

// Flat parameter schema. Blocks are laid out frame-major and contiguous, in
// the same per-frame order as frame_parameters().
struct ParamLayout {
  std::vector<BlockDesc> blocks;
  int total_size = 0;
  int frame_count = 0;
  int joint_count = 0;
  int shape_count = 0;
  bool has_object = false;

  int per_frame_size() const;
  const BlockDesc& find(int frame, ParamBlock block) const;
  int unfrozen_count() const;

  // Motion layout: root pose + joint rotations + object pose free per frame,
  // scale and shape carried but frozen.
  static ParamLayout motion(const BodyModel& model, int frames);
  // Static layout: one frame, no object, scale free, shape frozen.
  static ParamLayout static_stage(const BodyModel& model);
};

struct ParamVector {
  ParamLayout layout;
  Eigen::VectorXd values;
  std::vector<uint8_t> frozen;  // per entry

  void validate() const;
};

ParamVector pack(const ParamLayout& layout, std::span<const FrameState> frames);

// Rebuilds frame states from the vector. `mesh` is attached to object states
// when the layout carries an object.
std::vector<FrameState> unpack(const ParamVector& params,
                               std::shared_ptr<const Mesh> mesh);

// Wraps every axis-angle block back into norm <= pi (rotation-preserving).
void canonicalize_rotations(ParamVector& params);

// Projects an optimizer iterate back onto the valid chart: canonical
// rotations plus a small positive floor for unfrozen scale entries.
void project_to_valid(ParamVector& params);

// Full tracking objective and its exact gradient. The breakdown is computed
// through the same code path as total_loss; the gradient is the analytic
// chain rule through FK, skinning, projection and every loss term. Frozen
// entries receive exactly zero.
LossBreakdown eval_total_with_grad(const TrackingProblem& problem,
                                   const ParamVector& params,
                                   Eigen::VectorXd* grad);

Eigen::VectorXd grad_total(const TrackingProblem& problem,
                           const ParamVector& params);

// Static stage objective (alignment + pose prior) and gradient.
double eval_static_with_grad(const StaticProblem& problem,
                             const ParamVector& params, Eigen::VectorXd* grad);

// Smoothness of the packed parameter curves; bitwise-identical to
// smoothness_term() on the unpacked states.
double smoothness_from_packed(const ParamVector& params);

struct FDEntry {
  int index = -1;
  int frame = 0;
  ParamBlock block = ParamBlock::HumanRootRot;
  int offset_in_block = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double abs_err = 0.0;
  double rel_err = 0.0;  // |a-n| / |n|, only meaningful when |n| >= 1e-8
};

struct FDReport {
  std::vector<FDEntry> entries;  // sorted by descending relative error
  double max_abs_err = 0.0;
  double max_rel_err = 0.0;       // over entries with |numeric| >= 1e-8
  double max_small_abs_err = 0.0; // over entries with |numeric| < 1e-8
  int worst_index = -1;
  double runtime_sec = 0.0;

  // Relative tolerance for the main regime; small-|fd| entries are held to
  // an absolute 1e-7.
  bool passes(double rel_tol) const;
};

// Central differences per unfrozen entry against the analytic gradient.
// Unchanged frame terms are memoized, which is bitwise-identical to a naive
// full re-evaluation of the objective at every probe.
FDReport finite_difference_check(const TrackingProblem& problem,
                                 const ParamVector& params, double h);

FDReport finite_difference_check(const StaticProblem& problem,
                                 const ParamVector& params, double h);

// Comparison rule shared by both checkers; exposed for tests.
FDReport compare_gradients(const ParamVector& params,
                           const Eigen::VectorXd& analytic,
                           const Eigen::VectorXd& numeric);

}  // namespace anchorfit
