#pragma once

#include "anchorfit/geometry.hpp"
#include "anchorfit/mesh.hpp"

#include <memory>
#include <span>
#include <vector>

namespace anchorfit {

// Depth treatment shared by the exact and the clamped projection: points
// closer than kDepthMin are errors for the exact path and smoothly clamped
// (shifted softplus) for the differentiated path. The clamp is exactly the
// identity in double precision once z - kDepthMin > ~25 / kDepthClampBeta.
constexpr double kDepthMin = 1e-4;
constexpr double kDepthClampBeta = 2000.0;

double smooth_depth(double z);
double smooth_depth_derivative(double z);

// Rigid object pose. The mesh is shared, never copied per frame.
struct ObjectState {
  Vec3 rotation = Vec3::Zero();     // axis-angle, radians
  Vec3 translation = Vec3::Zero();  // world units
  std::shared_ptr<const Mesh> mesh;

  void validate(bool require_mesh = true) const;
};

struct Camera {
  Vec2 focal = Vec2(1000, 1000);      // fx, fy in pixels
  Vec2 principal = Vec2(500, 500);    // cx, cy in pixels
  int width = 1000;
  int height = 1000;
  AffineTransform extrinsic;          // world -> camera

  void validate() const;
  Vec3 center() const;   // camera position in world space
  Vec3 forward() const;  // optical axis in world space
};

// One detector output for one view: 2D points normalized to [0,1] by the
// image dimensions plus per-point confidences; confidence 0 = undetected.
struct KeypointFrame {
  int view_id = 0;
  std::vector<Vec2> points;
  std::vector<double> confidence;

  void validate() const;
};

// Exact pinhole projection into normalized image coordinates.
// Throws BehindCameraError when the camera-frame depth is <= kDepthMin.
Vec2 project(const Camera& camera, const Vec3& point);

// Projection with the smooth depth clamp; finite value and gradient
// everywhere. `jacobian`, when given, receives d(uv)/d(point).
Vec2 project_clamped(const Camera& camera, const Vec3& point,
                     Eigen::Matrix<double, 2, 3>* jacobian = nullptr);

Vec3 transform_point(const ObjectState& state, const Vec3& p);

// Posed copy of the object's mesh vertices.
std::vector<Vec3> transform_object(const ObjectState& state);

void transform_points(const ObjectState& state, std::span<const Vec3> points,
                      std::vector<Vec3>& out);

void rotate_normals(const ObjectState& state, std::span<const Vec3> normals,
                    std::vector<Vec3>& out);

// Simple look-at constructor (world -> camera extrinsic), +y up.
Camera make_look_at_camera(const Vec3& eye, const Vec3& target,
                           const Vec2& focal, int width, int height);

}  // namespace anchorfit
