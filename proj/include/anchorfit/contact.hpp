#pragma once

#include "anchorfit/body_model.hpp"
#include "anchorfit/mesh.hpp"
#include "anchorfit/scene.hpp"

#include <span>
#include <utility>
#include <vector>

namespace anchorfit {

// Representative object surface points with outward unit normals.
struct SurfaceSamples {
  std::vector<Vec3> points;
  std::vector<Vec3> normals;
  std::vector<int> source_vertex;

  int count() const { return static_cast<int>(points.size()); }
  void validate() const;
};

// Validated (object sample, human vertex) pairs. The human index is the
// global rig vertex id, so the set is self-contained across stages.
struct ContactPairSet {
  std::vector<std::pair<int, int>> pairs;
  double tau_n = 0.3;
  double tau_d = 0.25;

  bool empty() const { return pairs.empty(); }
  void validate(int sample_count, int vertex_count) const;
};

// Which sign convention the normal gate uses. `Antiparallel` scores
// opposed normals as 0 (gate = 1 + dot); `Printed` is the flipped variant
// (gate = 1 - dot), kept selectable for comparison.
enum class NormalGate { Antiparallel, Printed };

struct ContactParams {
  int n_samples = 256;
  double tau_n = 0.3;
  double tau_d = 0.25;
  int seed_index = 0;
  NormalGate gate = NormalGate::Antiparallel;

  void validate() const;
};

// Greedy max-min subset selection. First element is seed_index; ties break
// toward the lowest index; fully deterministic.
std::vector<int> farthest_point_sampling(std::span<const Vec3> points, int n,
                                         int seed_index);

// Area-weighted vertex normals. Vertices whose incident faces are all
// degenerate get an exact zero vector as a "no normal" flag.
std::vector<Vec3> vertex_normals(const Mesh& mesh);

// FPS over the mesh vertices that have a usable normal.
SurfaceSamples sample_object_surface(const Mesh& mesh, int n_samples,
                                     int seed_index);

// Human-side contact candidates in the current pose.
struct ContactCandidates {
  std::vector<Vec3> positions;
  std::vector<Vec3> normals;       // zero vector = unusable
  std::vector<int> vertex_index;   // global rig vertex ids
};

ContactCandidates gather_candidates(const BodyModel& model,
                                    std::span<const Vec3> posed_vertices,
                                    std::span<const Vec3> posed_normals);

// For every left point, the index of the closest right point (exhaustive,
// exact; ties toward the lowest index).
std::vector<std::pair<int, int>> nearest_pairs(
    std::span<const Vec3> object_points, std::span<const Vec3> candidate_points);

// Nearest-neighbor pairing filtered by the normal gate and the robust
// proximity gate rho(distance; gm_sigma_dist) < tau_d.
ContactPairSet extract_contacts(const SurfaceSamples& posed_samples,
                                const ContactCandidates& posed_candidates,
                                double tau_n, double tau_d,
                                double gm_sigma_dist,
                                NormalGate gate = NormalGate::Antiparallel);

// Samples posed by an object state (points transformed, normals rotated).
SurfaceSamples pose_samples(const ObjectState& state,
                            const SurfaceSamples& rest_samples);

}  // namespace anchorfit
