#include "anchorfit/cli.hpp"
#include "anchorfit/contact.hpp"
#include "anchorfit/io.hpp"
#include "anchorfit/losses.hpp"
#include "anchorfit/optimizer.hpp"
#include "anchorfit/synthetic.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <string>
#include <vector>

namespace py = pybind11;
using namespace anchorfit;

namespace {

Eigen::MatrixX3d to_matrix(const std::vector<Vec3>& rows) {
  Eigen::MatrixX3d m(rows.size(), 3);
  for (size_t i = 0; i < rows.size(); ++i) m.row(i) = rows[i];
  return m;
}

std::vector<Vec3> to_points(const Eigen::Ref<const Eigen::MatrixX3d>& m) {
  std::vector<Vec3> out(m.rows());
  for (Eigen::Index i = 0; i < m.rows(); ++i) out[i] = m.row(i);
  return out;
}

Eigen::MatrixX3i faces_matrix(const std::vector<std::array<int, 3>>& faces) {
  Eigen::MatrixX3i m(faces.size(), 3);
  for (size_t i = 0; i < faces.size(); ++i)
    m.row(i) << faces[i][0], faces[i][1], faces[i][2];
  return m;
}

Mesh mesh_from_arrays(const Eigen::Ref<const Eigen::MatrixX3d>& vertices,
                      const Eigen::Ref<const Eigen::MatrixX3i>& faces) {
  Mesh mesh;
  mesh.vertices = to_points(vertices);
  mesh.faces.resize(faces.rows());
  for (Eigen::Index i = 0; i < faces.rows(); ++i)
    mesh.faces[i] = {faces(i, 0), faces(i, 1), faces(i, 2)};
  return mesh;
}

}  // namespace

PYBIND11_MODULE(_anchorfit, m) {
  m.doc() = "Articulated body + rigid object fitting to 2D keypoints";

  py::register_exception<Error>(m, "AnchorfitError");

  py::class_<BodyModel>(m, "BodyModel")
      .def_property_readonly(
          "joint_count", [](const BodyModel& b) { return b.tree.joint_count(); })
      .def_property_readonly("vertex_count", &BodyModel::vertex_count)
      .def_property_readonly(
          "joint_names", [](const BodyModel& b) { return b.tree.joint_name; })
      .def_property_readonly(
          "joint_parents", [](const BodyModel& b) { return b.tree.parent; })
      .def_property_readonly(
          "template_vertices",
          [](const BodyModel& b) { return to_matrix(b.template_vertices); })
      .def_property_readonly(
          "faces", [](const BodyModel& b) { return faces_matrix(b.faces); })
      .def_property_readonly(
          "keypoint_map", [](const BodyModel& b) { return b.keypoint_map; })
      .def_property_readonly(
          "contact_candidates",
          [](const BodyModel& b) { return b.contact_candidates; })
      .def_property_readonly("height", &BodyModel::template_height);

  py::class_<HumanState>(m, "HumanState")
      .def(py::init([](const BodyModel& model) { return HumanState::rest(model); }),
           py::arg("model"))
      .def_readwrite("scale", &HumanState::scale)
      .def_readwrite("root_rotation", &HumanState::root_rotation)
      .def_readwrite("root_translation", &HumanState::root_translation)
      .def_property(
          "joint_rotations",
          [](const HumanState& s) { return to_matrix(s.joint_rotations); },
          [](HumanState& s, const Eigen::Ref<const Eigen::MatrixX3d>& m) {
            s.joint_rotations = to_points(m);
          });

  py::class_<Camera>(m, "Camera")
      .def(py::init([](const Vec3& eye, const Vec3& target, double focal,
                       int width, int height) {
             return make_look_at_camera(eye, target, Vec2(focal, focal), width,
                                        height);
           }),
           py::arg("eye"), py::arg("target"), py::arg("focal") = 1000.0,
           py::arg("width") = 1000, py::arg("height") = 1000)
      .def_property_readonly("center", &Camera::center)
      .def_property_readonly("forward", &Camera::forward);

  m.def("default_rig", &default_rig, "Bundled 18-joint humanoid rig");
  m.def(
      "load_rig", [](const std::string& path) { return io::load_rig(path); },
      py::arg("path"));

  m.def(
      "forward_kinematics",
      [](const BodyModel& model, const HumanState& state) {
        const FKResult fk = forward_kinematics(model, state);
        const int n = model.tree.joint_count();
        Eigen::MatrixXd transforms(n, 12);
        for (int k = 0; k < n; ++k) {
          for (int r = 0; r < 3; ++r) {
            for (int c = 0; c < 3; ++c)
              transforms(k, 4 * r + c) = fk.joint_transforms[k].linear(r, c);
            transforms(k, 4 * r + 3) = fk.joint_transforms[k].translation[r];
          }
        }
        return py::make_tuple(to_matrix(fk.joint_positions), transforms);
      },
      py::arg("model"), py::arg("state"),
      "Returns (joint_positions (J,3), skinning transforms (J,12) row-major 3x4)");

  m.def(
      "skin_vertices",
      [](const BodyModel& model, const HumanState& state) {
        const FKResult fk = forward_kinematics(model, state);
        return to_matrix(skin_vertices(model, fk, state));
      },
      py::arg("model"), py::arg("state"));

  m.def(
      "capsule_proxies",
      [](const BodyModel& model, const HumanState& state) {
        const FKResult fk = forward_kinematics(model, state);
        const auto capsules =
            capsule_proxies(model, fk.joint_positions, state.scale);
        Eigen::MatrixXd out(capsules.size(), 7);
        for (size_t i = 0; i < capsules.size(); ++i)
          out.row(i) << capsules[i].a.transpose(), capsules[i].b.transpose(),
              capsules[i].radius;
        return out;
      },
      py::arg("model"), py::arg("state"),
      "One row per bone: [ax, ay, az, bx, by, bz, radius]");

  m.def(
      "project",
      [](const Camera& cam, const Eigen::Ref<const Eigen::MatrixX3d>& pts) {
        Eigen::MatrixX2d out(pts.rows(), 2);
        for (Eigen::Index i = 0; i < pts.rows(); ++i)
          out.row(i) = project(cam, pts.row(i));
        return out;
      },
      py::arg("camera"), py::arg("points"),
      "Exact pinhole projection to normalized image coordinates");

  m.def(
      "project_clamped",
      [](const Camera& cam, const Eigen::Ref<const Eigen::MatrixX3d>& pts) {
        Eigen::MatrixX2d out(pts.rows(), 2);
        for (Eigen::Index i = 0; i < pts.rows(); ++i)
          out.row(i) = project_clamped(cam, pts.row(i));
        return out;
      },
      py::arg("camera"), py::arg("points"));

  m.def("geman_mcclure", &geman_mcclure, py::arg("residual"), py::arg("sigma"));

  m.def(
      "farthest_point_sampling",
      [](const Eigen::Ref<const Eigen::MatrixX3d>& pts, int n, int seed_index) {
        return farthest_point_sampling(to_points(pts), n, seed_index);
      },
      py::arg("points"), py::arg("n"), py::arg("seed_index") = 0);

  m.def(
      "vertex_normals",
      [](const Eigen::Ref<const Eigen::MatrixX3d>& vertices,
         const Eigen::Ref<const Eigen::MatrixX3i>& faces) {
        return to_matrix(vertex_normals(mesh_from_arrays(vertices, faces)));
      },
      py::arg("vertices"), py::arg("faces"));

  m.def(
      "extract_contacts",
      [](const BodyModel& model, const HumanState& human,
         const Eigen::Ref<const Eigen::MatrixX3d>& object_vertices,
         const Eigen::Ref<const Eigen::MatrixX3i>& object_faces, int n_samples,
         double tau_n, double tau_d, double gm_sigma_dist, bool printed_gate) {
        const Mesh mesh = mesh_from_arrays(object_vertices, object_faces);
        const auto samples = sample_object_surface(mesh, n_samples, 0);
        const FKResult fk = forward_kinematics(model, human);
        const auto posed_vertices = skin_vertices(model, fk, human);
        const auto posed_normals =
            vertex_normals(Mesh{posed_vertices, model.faces});
        const auto cands =
            gather_candidates(model, posed_vertices, posed_normals);
        const auto set = extract_contacts(
            samples, cands, tau_n, tau_d, gm_sigma_dist,
            printed_gate ? NormalGate::Printed : NormalGate::Antiparallel);
        Eigen::MatrixX2i pairs(set.pairs.size(), 2);
        for (size_t i = 0; i < set.pairs.size(); ++i)
          pairs.row(i) << set.pairs[i].first, set.pairs[i].second;
        return pairs;
      },
      py::arg("model"), py::arg("human"), py::arg("object_vertices"),
      py::arg("object_faces"), py::arg("n_samples") = 256,
      py::arg("tau_n") = 0.3, py::arg("tau_d") = 0.25,
      py::arg("gm_sigma_dist") = 0.05, py::arg("printed_gate") = false,
      "Contact pairs (sample index, rig vertex index) for an object mesh "
      "posed at identity against the given human pose");

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::vector<const char*> argv;
        argv.push_back("anchorfit");
        for (const auto& a : args) argv.push_back(a.c_str());
        return cli_dispatch(static_cast<int>(argv.size()), argv.data());
      },
      py::arg("args"),
      "Runs a CLI invocation in-process; returns the exit code");
}
