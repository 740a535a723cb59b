#pragma once

#include <Eigen/Dense>
#include <cstdint>

namespace voxsl {

// Rigid transform mapping points from a local frame into the world frame.
struct Pose {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();     // world <- local
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();      // local origin in world

  static Pose identity() { return Pose{}; }
  static Pose from_matrix(const Eigen::Matrix4d& m);
  Eigen::Matrix4d matrix() const;

  Eigen::Vector3d to_world(const Eigen::Vector3d& p_local) const {
    return rotation * p_local + translation;
  }
  Eigen::Vector3d to_local(const Eigen::Vector3d& p_world) const {
    return rotation.transpose() * (p_world - translation);
  }

  bool is_rigid(double tol = 1e-9) const;
};

// Pinhole camera. Looks along -z in its own frame; pixel centers are at
// half-integer offsets, i.e. pixel (row, col) maps through (col + 0.5, row + 0.5).
struct CameraModel {
  double fx = 0, fy = 0;
  double cx = 0, cy = 0;
  int width = 0, height = 0;
  Pose pose;  // world <- camera

  void validate() const;  // throws std::invalid_argument on bad intrinsics
};

// The projector is an inverse camera: same pinhole model, emitting patterns
// instead of integrating light. Its pose lives inside `intrinsics`.
struct ProjectorModel {
  CameraModel intrinsics;
  double baseline_mm = 0;  // informational; |t_projector - t_camera|

  const Pose& pose() const { return intrinsics.pose; }
  Pose& pose() { return intrinsics.pose; }

  // Checks rigidity and that baseline_mm matches the camera-projector
  // center distance to 1e-6 relative.
  void validate(const CameraModel& cam) const;
};

// Near-plane frustum description backing the NDC warp. With the far plane
// at infinity the frustum maps to the cube [-1,1]^3 and NDC depth is affine
// in inverse metric depth.
struct NdcFrame {
  double near = 0;  // mm, > 0
  double r = 0;     // frustum half-extent at the near plane along x (mm)
  double t = 0;     // frustum half-extent at the near plane along y (mm)
};

struct Ray {
  Eigen::Vector3d origin;     // world, mm
  Eigen::Vector3d direction;  // world, unit length
  int row = 0, col = 0;       // generating camera pixel
};

// Result of re-projecting a world point into pattern pixel coordinates.
// Points behind the projector plane are flagged rather than thrown: rays
// legitimately exit the projector frustum.
struct PatternPoint {
  double u = 0, v = 0;   // continuous pattern coords, half-integer centers
  double depth = 0;      // distance along the projector viewing axis (mm)
  bool in_view = false;  // false when the point is behind the projector
};

NdcFrame ndc_frame_from_camera(const CameraModel& cam, double near);

// Perspective warp camera-frame -> NDC with the far plane at infinity:
//   x* = -n x / (r z),  y* = -n y / (t z),  z* = 1 + 2n / z.
// Requires z < 0 (in front of the camera); z <= -n lands inside the cube.
Eigen::Vector3d world_to_ndc(const Eigen::Vector3d& p, const NdcFrame& frame);

// Exact inverse of world_to_ndc on z* in [-1, 1).
Eigen::Vector3d ndc_to_world(const Eigen::Vector3d& q, const NdcFrame& frame);

Ray camera_ray(int row, int col, const CameraModel& cam);

PatternPoint project_to_pattern(const Eigen::Vector3d& x_world, const ProjectorModel& proj);

}  // namespace voxsl
