#include "anchorfit/cli.hpp"
#include "anchorfit/io.hpp"
#include "anchorfit/synthetic.hpp"

#include <doctest.h>

#include <filesystem>
#include <unistd.h>
#include <fstream>
#include <string>
#include <vector>

using namespace anchorfit;
namespace fs = std::filesystem;

namespace {

int run(const std::vector<std::string>& args) {
  std::vector<const char*> argv;
  argv.push_back("anchorfit");
  for (const auto& a : args) argv.push_back(a.c_str());
  return cli_dispatch(static_cast<int>(argv.size()), argv.data());
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("anchorfit_cli_" + std::to_string(::getpid()) + "_" +
            std::to_string(counter++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  static inline int counter = 0;
};

void write_motion_config(const fs::path& dir, const fs::path& out,
                         int iterations = 300) {
  std::ofstream cfg(dir / "config.json");
  cfg << R"({
  "format_version": 1,
  "stage": "motion",
  "paths": {
    "rig": "rig.json",
    "cameras": "cameras_motion.json",
    "keypoints": "keypoints_motion.json",
    "contacts": "contacts.json",
    "object": "object.obj",
    "init": "init.json",
    "truth": "truth.json",
    "output_dir": ")" << out.generic_string() << R"("
  },
  "adam": {"iterations_motion": )" << iterations << R"(}
})";
}

}  // namespace

TEST_CASE("cli: synth -> fit-motion -> eval end to end") {
  TempDir dir;
  const auto scene = dir.path / "scene";
  CHECK(run({"synth", "--scenario", "carry-box", "--frames", "5", "--noise",
             "0.005", "--seed", "2", "--out", scene.string()}) == 0);
  for (const char* file :
       {"rig.json", "cameras_static.json", "cameras_motion.json",
        "keypoints_static.json", "keypoints_motion.json", "object.obj",
        "truth.json", "init.json", "contacts.json"})
    CHECK(fs::exists(scene / file));

  write_motion_config(scene, scene / "fit");
  CHECK(run({"fit-motion", "--config", (scene / "config.json").string()}) == 0);
  CHECK(fs::exists(scene / "fit" / "params.json"));
  CHECK(fs::exists(scene / "fit" / "metrics.csv"));

  CHECK(run({"eval", "--config", (scene / "config.json").string(), "--params",
             (scene / "fit" / "params.json").string(), "--out",
             (scene / "fit").string()}) == 0);
  CHECK(fs::exists(scene / "fit" / "metrics.json"));

  // Outputs re-load through the same schemas.
  CHECK(io::load_params(scene / "fit" / "params.json").size() == 5);
  io::load_rig(scene / "rig.json");
  io::load_cameras(scene / "cameras_motion.json");
  io::load_keypoints(scene / "keypoints_motion.json");
  io::load_contacts(scene / "contacts.json");
}

TEST_CASE("cli: fit-static and extract-contacts run from files") {
  TempDir dir;
  const auto scene = dir.path / "scene";
  REQUIRE(run({"synth", "--scenario", "sit-still", "--frames", "2", "--out",
               scene.string(), "--seed", "8"}) == 0);
  {
    std::ofstream cfg(scene / "static.json");
    cfg << R"({"format_version": 1, "stage": "static",
      "paths": {"rig": "rig.json", "cameras": "cameras_static.json",
                "keypoints": "keypoints_static.json",
                "output_dir": "static_fit"},
      "adam": {"iterations_static": 200}})";
  }
  CHECK(run({"fit-static", "--config", (scene / "static.json").string(),
             "--write-meshes"}) == 0);
  CHECK(fs::exists(scene / "static_fit" / "params.json"));
  CHECK(fs::exists(scene / "static_fit" / "human.obj"));

  {
    std::ofstream cfg(scene / "extract.json");
    cfg << R"({"format_version": 1,
      "paths": {"rig": "rig.json", "object": "object.obj",
                "init": "init.json", "output_dir": "contacts_out"}})";
  }
  CHECK(run({"extract-contacts", "--config", (scene / "extract.json").string()}) == 0);
  CHECK(fs::exists(scene / "contacts_out" / "contacts.json"));
  CHECK(fs::exists(scene / "contacts_out" / "contacts_diagnostics.csv"));
  // The re-extracted pairs match what synth shipped.
  const auto a = io::load_contacts(scene / "contacts.json");
  const auto b = io::load_contacts(scene / "contacts_out" / "contacts.json");
  CHECK(a.pairs == b.pairs);
}

TEST_CASE("cli: validation failures exit 1 with the offending path") {
  TempDir dir;
  CHECK(run({"fit-motion", "--rig", (dir.path / "nope.json").string()}) == 1);
  CHECK(run({"definitely-not-a-subcommand"}) == 1);
  CHECK(run({"synth", "--scenario", "carry-box"}) == 1);  // no output dir
  CHECK(run({}) == 1);
}

TEST_CASE("cli: runaway fits exit 2 with a divergence message") {
  TempDir dir;
  const auto scene = dir.path / "scene";
  REQUIRE(run({"synth", "--scenario", "carry-box", "--frames", "2", "--out",
               scene.string(), "--seed", "5"}) == 0);
  {
    std::ofstream cfg(scene / "config.json");
    cfg << R"({"format_version": 1, "stage": "motion",
      "paths": {"rig": "rig.json", "cameras": "cameras_motion.json",
                "keypoints": "keypoints_motion.json", "contacts": "contacts.json",
                "object": "object.obj", "init": "init.json",
                "output_dir": "fit"},
      "adam": {"learning_rate": 1e7, "iterations_motion": 60}})";
  }
  CHECK(run({"fit-motion", "--config", (scene / "config.json").string()}) == 2);
}

TEST_CASE("cli: check-grad exits 2 above tolerance") {
  CHECK(run({"check-grad", "--configs", "1", "--frames", "2", "--samples",
             "32", "--tol", "1e-12"}) == 2);
  CHECK(run({"check-grad", "--configs", "1", "--frames", "2", "--samples",
             "32"}) == 0);
}

TEST_CASE("cli: stage mismatch is rejected") {
  TempDir dir;
  const auto scene = dir.path / "scene";
  REQUIRE(run({"synth", "--scenario", "hold", "--frames", "2", "--out",
               scene.string()}) == 0);
  write_motion_config(scene, scene / "fit", 50);
  CHECK(run({"fit-static", "--config", (scene / "config.json").string()}) == 1);
}
