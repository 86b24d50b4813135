#include "anchorfit/scene.hpp"

#include "anchorfit/errors.hpp"

#include <cmath>
#include <string>

namespace anchorfit {

double smooth_depth(double z) {
  const double x = z - kDepthMin;
  const double bx = kDepthClampBeta * x;
  double softplus;
  if (bx > 0)
    softplus = x + std::log1p(std::exp(-bx)) / kDepthClampBeta;
  else
    softplus = std::log1p(std::exp(bx)) / kDepthClampBeta;
  return kDepthMin + softplus;
}

double smooth_depth_derivative(double z) {
  const double bx = kDepthClampBeta * (z - kDepthMin);
  if (bx >= 0) {
    const double e = std::exp(-bx);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(bx);
  return e / (1.0 + e);
}

void ObjectState::validate(bool require_mesh) const {
  if (!is_finite(rotation) || !is_finite(translation))
    throw InvalidInputError("object state has non-finite parameters");
  if (rotation.norm() > kPi + 1e-6)
    throw InvalidInputError("object rotation norm exceeds pi (not canonical)");
  if (require_mesh) {
    if (!mesh || mesh->empty())
      throw InvalidInputError("object state requires a non-empty mesh");
    mesh->validate();
  }
}

void Camera::validate() const {
  if (!(focal.x() > 0) || !(focal.y() > 0))
    throw InvalidInputError("camera focal lengths must be positive");
  if (width <= 0 || height <= 0)
    throw InvalidInputError("camera image size must be positive");
  const Mat3 should_be_identity =
      extrinsic.linear.transpose() * extrinsic.linear - Mat3::Identity();
  if (should_be_identity.cwiseAbs().maxCoeff() > 1e-9)
    throw InvalidInputError("camera extrinsic rotation is not orthonormal");
  if (!is_finite(extrinsic.translation))
    throw InvalidInputError("camera extrinsic translation is not finite");
}

Vec3 Camera::center() const {
  return -(extrinsic.linear.transpose() * extrinsic.translation);
}

Vec3 Camera::forward() const {
  return extrinsic.linear.transpose() * Vec3(0, 0, 1);
}

void KeypointFrame::validate() const {
  if (points.size() != confidence.size())
    throw InvalidInputError("keypoint points/confidence lengths differ");
  for (const auto& p : points)
    if (!std::isfinite(p.x()) || !std::isfinite(p.y()))
      throw InvalidInputError("keypoint coordinate is not finite");
  for (double c : confidence)
    if (!(c >= 0.0 && c <= 1.0))
      throw InvalidInputError("keypoint confidence outside [0,1]: " +
                              std::to_string(c));
}

Vec2 project(const Camera& camera, const Vec3& point) {
  const Vec3 q = camera.extrinsic.apply(point);
  if (!(q.z() > kDepthMin))
    throw BehindCameraError("point at camera depth " + std::to_string(q.z()));
  return {(camera.focal.x() * q.x() / q.z() + camera.principal.x()) / camera.width,
          (camera.focal.y() * q.y() / q.z() + camera.principal.y()) / camera.height};
}

Vec2 project_clamped(const Camera& camera, const Vec3& point,
                     Eigen::Matrix<double, 2, 3>* jacobian) {
  const Vec3 q = camera.extrinsic.apply(point);
  const double z = smooth_depth(q.z());
  const Vec2 uv{
      (camera.focal.x() * q.x() / z + camera.principal.x()) / camera.width,
      (camera.focal.y() * q.y() / z + camera.principal.y()) / camera.height};
  if (jacobian) {
    const double dz = smooth_depth_derivative(q.z());
    Eigen::Matrix<double, 2, 3> d_uv_dq;
    const double ax = camera.focal.x() / camera.width;
    const double ay = camera.focal.y() / camera.height;
    d_uv_dq << ax / z, 0.0, -ax * q.x() / (z * z) * dz,
               0.0, ay / z, -ay * q.y() / (z * z) * dz;
    *jacobian = d_uv_dq * camera.extrinsic.linear;
  }
  return uv;
}

Vec3 transform_point(const ObjectState& state, const Vec3& p) {
  return axis_angle_to_matrix(state.rotation) * p + state.translation;
}

std::vector<Vec3> transform_object(const ObjectState& state) {
  state.validate();
  std::vector<Vec3> out;
  transform_points(state, state.mesh->vertices, out);
  return out;
}

void transform_points(const ObjectState& state, std::span<const Vec3> points,
                      std::vector<Vec3>& out) {
  const Mat3 r = axis_angle_to_matrix(state.rotation);
  out.resize(points.size());
  for (size_t i = 0; i < points.size(); ++i)
    out[i] = r * points[i] + state.translation;
}

void rotate_normals(const ObjectState& state, std::span<const Vec3> normals,
                    std::vector<Vec3>& out) {
  const Mat3 r = axis_angle_to_matrix(state.rotation);
  out.resize(normals.size());
  for (size_t i = 0; i < normals.size(); ++i) out[i] = r * normals[i];
}

Camera make_look_at_camera(const Vec3& eye, const Vec3& target,
                           const Vec2& focal, int width, int height) {
  Vec3 fwd = target - eye;
  if (fwd.norm() < 1e-12)
    throw InvalidInputError("look-at camera: eye equals target");
  fwd.normalize();
  Vec3 up(0, 1, 0);
  if (std::abs(fwd.dot(up)) > 0.999) up = Vec3(0, 0, 1);
  // Rows [right, down, forward]: an origin camera looking along +z gets the
  // identity extrinsic, so +x in the world is +u in the image.
  Vec3 right = up.cross(fwd).normalized();
  const Vec3 down = fwd.cross(right);

  Camera cam;
  cam.focal = focal;
  cam.width = width;
  cam.height = height;
  cam.principal = Vec2(width * 0.5, height * 0.5);
  Mat3 r;
  r.row(0) = right.transpose();
  r.row(1) = down.transpose();
  r.row(2) = fwd.transpose();
  cam.extrinsic.linear = r;
  cam.extrinsic.translation = -(r * eye);
  return cam;
}

}  // namespace anchorfit
