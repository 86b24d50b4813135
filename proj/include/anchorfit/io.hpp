#pragma once

#include "anchorfit/contact.hpp"
#include "anchorfit/losses.hpp"
#include "anchorfit/optimizer.hpp"
#include "anchorfit/synthetic.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace anchorfit::io {

// All structured-text documents are JSON with a top-level format_version
// (currently 1). Parsing is strict: unknown keys are fatal, every numeric
// field is range-checked, and errors carry document + field paths.
inline constexpr int kFormatVersion = 1;

BodyModel load_rig(const std::filesystem::path& path);
void save_rig(const std::filesystem::path& path, const BodyModel& model);

std::vector<Camera> load_cameras(const std::filesystem::path& path);
void save_cameras(const std::filesystem::path& path,
                  std::span<const Camera> cameras);

// frames[i] is the list of views for frame i.
std::vector<std::vector<KeypointFrame>> load_keypoints(
    const std::filesystem::path& path);
void save_keypoints(const std::filesystem::path& path,
                    std::span<const std::vector<KeypointFrame>> frames);

ContactPairSet load_contacts(const std::filesystem::path& path);
void save_contacts(const std::filesystem::path& path,
                   const ContactPairSet& contacts);

// Parameter sequences. Object meshes are not stored here; loaded object
// states carry a null mesh until one is attached.
std::vector<FrameState> load_params(const std::filesystem::path& path);
void save_params(const std::filesystem::path& path,
                 std::span<const FrameState> frames);

Mesh load_obj(const std::filesystem::path& path);
void save_obj(const std::filesystem::path& path, const Mesh& mesh);

struct RunConfig {
  std::string stage;  // "", "static" or "motion"
  struct Paths {
    std::string rig, cameras, keypoints, contacts, object, init, truth,
        output_dir;
  } paths;
  LossWeights weights;
  bool sigma_dist_given = false;  // else resolved from the rig height
  ContactParams contact;
  AdamConfig adam;
};

RunConfig load_config(const std::filesystem::path& path);
void save_config(const std::filesystem::path& path, const RunConfig& config);

void save_trace_csv(const std::filesystem::path& path,
                    const OptimizationTrace& trace);

void save_metrics(const std::filesystem::path& json_path,
                  const std::filesystem::path& csv_path,
                  const MetricsRecord& record);

// Per-pair contact diagnostics (distance and normal gate value).
struct ContactDiagnostic {
  int sample = 0;
  int vertex = 0;
  double distance = 0.0;
  double normal_gate = 0.0;
  double rho_distance = 0.0;
};
void save_contact_diagnostics(const std::filesystem::path& path,
                              std::span<const ContactDiagnostic> rows);

}  // namespace anchorfit::io
