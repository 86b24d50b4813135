#include "anchorfit/contact.hpp"

#include "anchorfit/errors.hpp"
#include "anchorfit/losses.hpp"

#include <cmath>
#include <limits>
#include <set>
#include <string>

namespace anchorfit {

void SurfaceSamples::validate() const {
  if (points.size() != normals.size() || points.size() != source_vertex.size())
    throw InvalidInputError("surface sample arrays disagree in length");
  for (const auto& n : normals)
    if (std::abs(n.norm() - 1.0) > 1e-6)
      throw InvalidInputError("surface sample normal is not unit length");
}

void ContactPairSet::validate(int sample_count, int vertex_count) const {
  std::set<int> seen;
  for (const auto& [i, j] : pairs) {
    if (i < 0 || i >= sample_count)
      throw InvalidInputError("contact pair sample index out of range");
    if (j < 0 || j >= vertex_count)
      throw InvalidInputError("contact pair vertex index out of range");
    if (!seen.insert(i).second)
      throw InvalidInputError("contact pairs must be unique per object sample");
  }
}

void ContactParams::validate() const {
  if (n_samples < 1) throw InvalidConfigError("n_samples must be >= 1");
  if (!(tau_n >= 0.0 && tau_n <= 4.0))
    throw InvalidConfigError("tau_n must lie in [0, 4]");
  if (!(tau_d > 0.0 && tau_d < 1.0))
    throw InvalidConfigError("tau_d must lie in (0, 1)");
  if (seed_index < 0) throw InvalidConfigError("seed_index must be >= 0");
}

std::vector<int> farthest_point_sampling(std::span<const Vec3> points, int n,
                                         int seed_index) {
  const int count = static_cast<int>(points.size());
  if (n < 1 || n > count)
    throw InvalidInputError("farthest_point_sampling: n out of range");
  if (seed_index < 0 || seed_index >= count)
    throw InvalidInputError("farthest_point_sampling: seed index out of range");

  std::vector<int> selected;
  selected.reserve(n);
  selected.push_back(seed_index);
  std::vector<double> min_sq(count, std::numeric_limits<double>::infinity());
  int last = seed_index;
  while (static_cast<int>(selected.size()) < n) {
    int best = -1;
    double best_sq = -1.0;
    for (int i = 0; i < count; ++i) {
      const double d = (points[i] - points[last]).squaredNorm();
      if (d < min_sq[i]) min_sq[i] = d;
      if (min_sq[i] > best_sq) {  // strict: ties keep the lowest index
        best_sq = min_sq[i];
        best = i;
      }
    }
    selected.push_back(best);
    last = best;
  }
  return selected;
}

std::vector<Vec3> vertex_normals(const Mesh& mesh) {
  if (mesh.empty()) throw InvalidInputError("vertex_normals: empty mesh");
  mesh.validate();
  std::vector<Vec3> accum(mesh.vertices.size(), Vec3::Zero());
  for (const auto& f : mesh.faces) {
    const Vec3 e1 = mesh.vertices[f[1]] - mesh.vertices[f[0]];
    const Vec3 e2 = mesh.vertices[f[2]] - mesh.vertices[f[0]];
    const Vec3 area_normal = 0.5 * e1.cross(e2);  // area-weighted
    for (int idx : f) accum[idx] += area_normal;
  }
  for (auto& n : accum) {
    const double len = n.norm();
    if (len < 1e-12)
      n = Vec3::Zero();  // degenerate star, flagged
    else
      n /= len;
  }
  return accum;
}

SurfaceSamples sample_object_surface(const Mesh& mesh, int n_samples,
                                     int seed_index) {
  const auto normals = vertex_normals(mesh);
  std::vector<int> usable;
  usable.reserve(mesh.vertices.size());
  for (size_t v = 0; v < mesh.vertices.size(); ++v)
    if (normals[v].norm() > 0.5) usable.push_back(static_cast<int>(v));
  if (usable.empty())
    throw InvalidInputError("object mesh has no vertices with usable normals");
  std::vector<Vec3> pool(usable.size());
  for (size_t i = 0; i < usable.size(); ++i) pool[i] = mesh.vertices[usable[i]];

  const int n = std::min<int>(n_samples, static_cast<int>(pool.size()));
  const auto picked = farthest_point_sampling(pool, n, seed_index);

  SurfaceSamples out;
  out.points.reserve(n);
  out.normals.reserve(n);
  out.source_vertex.reserve(n);
  for (int local : picked) {
    const int v = usable[local];
    out.points.push_back(mesh.vertices[v]);
    out.normals.push_back(normals[v]);
    out.source_vertex.push_back(v);
  }
  return out;
}

ContactCandidates gather_candidates(const BodyModel& model,
                                    std::span<const Vec3> posed_vertices,
                                    std::span<const Vec3> posed_normals) {
  if (posed_vertices.size() != static_cast<size_t>(model.vertex_count()) ||
      posed_normals.size() != static_cast<size_t>(model.vertex_count()))
    throw ContractViolationError(
        "gather_candidates expects full posed vertex/normal arrays");
  ContactCandidates out;
  out.positions.reserve(model.contact_candidates.size());
  for (int v : model.contact_candidates) {
    out.positions.push_back(posed_vertices[v]);
    out.normals.push_back(posed_normals[v]);
    out.vertex_index.push_back(v);
  }
  return out;
}

std::vector<std::pair<int, int>> nearest_pairs(
    std::span<const Vec3> object_points,
    std::span<const Vec3> candidate_points) {
  if (object_points.empty())
    throw InvalidInputError("nearest_pairs: empty object point set");
  if (candidate_points.empty())
    throw InvalidInputError("nearest_pairs: empty candidate set");
  std::vector<std::pair<int, int>> pairs;
  pairs.reserve(object_points.size());
  for (size_t i = 0; i < object_points.size(); ++i) {
    int best = 0;
    double best_sq = (object_points[i] - candidate_points[0]).squaredNorm();
    for (size_t j = 1; j < candidate_points.size(); ++j) {
      const double d = (object_points[i] - candidate_points[j]).squaredNorm();
      if (d < best_sq) {
        best_sq = d;
        best = static_cast<int>(j);
      }
    }
    pairs.emplace_back(static_cast<int>(i), best);
  }
  return pairs;
}

ContactPairSet extract_contacts(const SurfaceSamples& posed_samples,
                                const ContactCandidates& posed_candidates,
                                double tau_n, double tau_d,
                                double gm_sigma_dist, NormalGate gate) {
  if (!(tau_n >= 0.0 && tau_n <= 4.0))
    throw InvalidConfigError("tau_n must lie in [0, 4]");
  if (!(tau_d > 0.0 && tau_d < 1.0))
    throw InvalidConfigError("tau_d must lie in (0, 1)");
  if (!(gm_sigma_dist > 0.0))
    throw InvalidConfigError("gm_sigma_dist must be positive");
  posed_samples.validate();

  ContactPairSet out;
  out.tau_n = tau_n;
  out.tau_d = tau_d;
  const auto pairs =
      nearest_pairs(posed_samples.points, posed_candidates.positions);
  for (const auto& [i, j] : pairs) {
    const Vec3& nh = posed_candidates.normals[j];
    if (nh.norm() < 0.5) continue;  // flagged zero normal
    const double dot = posed_samples.normals[i].dot(nh);
    const double gate_value = gate == NormalGate::Antiparallel ? 1.0 + dot
                                                               : 1.0 - dot;
    if (!(gate_value < tau_n)) continue;
    const double dist =
        (posed_samples.points[i] - posed_candidates.positions[j]).norm();
    if (!(geman_mcclure(dist, gm_sigma_dist) < tau_d)) continue;
    out.pairs.emplace_back(i, posed_candidates.vertex_index[j]);
  }
  return out;
}

SurfaceSamples pose_samples(const ObjectState& state,
                            const SurfaceSamples& rest_samples) {
  SurfaceSamples out;
  transform_points(state, rest_samples.points, out.points);
  rotate_normals(state, rest_samples.normals, out.normals);
  out.source_vertex = rest_samples.source_vertex;
  return out;
}

}  // namespace anchorfit
