#include "voxsl/camera.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace voxsl {

Pose Pose::from_matrix(const Eigen::Matrix4d& m) {
  Pose p;
  p.rotation = m.block<3, 3>(0, 0);
  p.translation = m.block<3, 1>(0, 3);
  return p;
}

Eigen::Matrix4d Pose::matrix() const {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.block<3, 3>(0, 0) = rotation;
  m.block<3, 1>(0, 3) = translation;
  return m;
}

bool Pose::is_rigid(double tol) const {
  const Eigen::Matrix3d rtr = rotation.transpose() * rotation;
  if ((rtr - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() > tol) return false;
  return std::abs(rotation.determinant() - 1.0) <= tol;
}

void CameraModel::validate() const {
  if (!(fx > 0) || !(fy > 0))
    throw std::invalid_argument("camera: focal lengths must be positive");
  if (width <= 0 || height <= 0)
    throw std::invalid_argument("camera: image size must be positive");
  if (!(cx > 0 && cx < width) || !(cy > 0 && cy < height))
    throw std::invalid_argument("camera: principal point must lie inside the image");
}

void ProjectorModel::validate(const CameraModel& cam) const {
  intrinsics.validate();
  if (!pose().is_rigid(1e-6))
    throw std::invalid_argument("projector: pose is not a rigid transform");
  const double dist = (pose().translation - cam.pose.translation).norm();
  const double scale = std::max(1.0, std::abs(baseline_mm));
  if (std::abs(dist - baseline_mm) > 1e-6 * scale)
    throw std::invalid_argument(
        "projector: baseline_mm does not match camera-projector distance (" +
        std::to_string(dist) + " vs " + std::to_string(baseline_mm) + ")");
}

NdcFrame ndc_frame_from_camera(const CameraModel& cam, double near) {
  if (!(near > 0)) throw std::invalid_argument("ndc_frame_from_camera: near must be > 0");
  cam.validate();
  NdcFrame frame;
  frame.near = near;
  frame.r = near * cam.cx / cam.fx;
  frame.t = near * cam.cy / cam.fy;
  return frame;
}

Eigen::Vector3d world_to_ndc(const Eigen::Vector3d& p, const NdcFrame& frame) {
  if (p.z() >= 0)
    throw std::domain_error("world_to_ndc: point is behind or at the camera plane");
  const double n = frame.near;
  return {-n * p.x() / (frame.r * p.z()),
          -n * p.y() / (frame.t * p.z()),
          1.0 + 2.0 * n / p.z()};
}

Eigen::Vector3d ndc_to_world(const Eigen::Vector3d& q, const NdcFrame& frame) {
  if (q.z() >= 1.0)
    throw std::domain_error("ndc_to_world: z* >= 1 is at or beyond infinity");
  const double n = frame.near;
  const double inv = 1.0 / (1.0 - q.z());
  return {2.0 * frame.r * q.x() * inv,
          2.0 * frame.t * q.y() * inv,
          2.0 * n / (q.z() - 1.0)};
}

Ray camera_ray(int row, int col, const CameraModel& cam) {
  if (row < 0 || row >= cam.height || col < 0 || col >= cam.width)
    throw std::invalid_argument("camera_ray: pixel outside image bounds");
  Eigen::Vector3d dir_cam((col + 0.5 - cam.cx) / cam.fx,
                          (row + 0.5 - cam.cy) / cam.fy,
                          -1.0);
  dir_cam.normalize();
  Ray ray;
  ray.origin = cam.pose.translation;
  ray.direction = cam.pose.rotation * dir_cam;
  ray.row = row;
  ray.col = col;
  return ray;
}

PatternPoint project_to_pattern(const Eigen::Vector3d& x_world, const ProjectorModel& proj) {
  const Eigen::Vector3d p = proj.pose().to_local(x_world);
  PatternPoint out;
  out.depth = -p.z();  // projector looks along -z in its own frame
  if (out.depth <= 0) {
    out.in_view = false;
    return out;
  }
  const CameraModel& in = proj.intrinsics;
  out.u = in.fx * p.x() / out.depth + in.cx;
  out.v = in.fy * p.y() / out.depth + in.cy;
  out.in_view = true;
  return out;
}

}  // namespace voxsl
