#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include <Eigen/Core>

#include "ergowatch/error.hpp"
#include "ergowatch/frame.hpp"
#include "ergowatch/mlkit.hpp"

namespace ergowatch::pose {

inline constexpr std::size_t kRigidCount = landmarks::kRigid.size();

struct CameraIntrinsics {
    double fx = 640.0;
    double fy = 640.0;
    double cx = 320.0;
    double cy = 240.0;

    void validate() const;
};

/// 3D coordinates of the rigid landmarks in model units, ordered as
/// landmarks::kRigid. Landmark 67 is the origin.
struct RigidTemplate {
    std::array<Eigen::Vector3d, kRigidCount> points{};
    double interocular = 63.0;

    void validate() const;
    /// Generic adult face in millimetres.
    static RigidTemplate canonical();
};

RigidTemplate template_from_json(std::string_view text);
std::string to_json(const RigidTemplate& tmpl);

/// Rigid head pose relative to the camera. rotation is axis-angle (radians).
struct Pose {
    Eigen::Vector3d rotation = Eigen::Vector3d::Zero();
    Eigen::Vector3d translation{0.0, 0.0, 600.0};
    double reprojection_error = 0.0;

    Eigen::Matrix3d rotation_matrix() const;
};

struct Euler {
    double yaw = 0.0;    // about camera y
    double pitch = 0.0;  // about camera x
    double roll = 0.0;   // about camera z
};

/// R = Rz(roll) · Ry(yaw) · Rx(pitch), angles in radians.
Eigen::Matrix3d euler_to_matrix(const Euler& e);
Euler matrix_to_euler(const Eigen::Matrix3d& r);
Eigen::Vector3d matrix_to_axis_angle(const Eigen::Matrix3d& r);
Eigen::Matrix3d axis_angle_to_matrix(const Eigen::Vector3d& r);
Pose pose_from_euler(const Euler& e, const Eigen::Vector3d& translation);

class ProjectionError : public Error {
public:
    using Error::Error;
};

class NoConvergence : public Error {
public:
    NoConvergence(const std::string& what, Pose best) : Error(what), best_(best) {}
    const Pose& best() const noexcept { return best_; }

private:
    Pose best_;
};

Point2 project_point(const Eigen::Vector3d& p, const Pose& pose, const CameraIntrinsics& A);
std::array<Point2, kRigidCount> project(const RigidTemplate& tmpl, const Pose& pose, const CameraIntrinsics& A);

/// RMS pixel distance between `points` and the projection of the template.
double reprojection_rms(std::span<const Point2, kRigidCount> points, const RigidTemplate& tmpl, const Pose& pose,
                        const CameraIntrinsics& A);

/// Minimises RMS reprojection error with damped Gauss-Newton over
/// (axis-angle, translation). Without `init`, starts from a 3x3 yaw/pitch grid
/// and keeps the best converged result.
Pose solve_pnp(std::span<const Point2, kRigidCount> points, const RigidTemplate& tmpl, const CameraIntrinsics& A,
               const std::optional<Pose>& init = std::nullopt);

/// Rigid landmarks of a frame in template order.
std::array<Point2, kRigidCount> rigid_points(const LandmarkFrame& frame);

/// (rotation, translation / interocular).
Eigen::VectorXd pose_features(const Pose& pose, const RigidTemplate& tmpl);

enum class PoseClass { away = 1, correct = 2, too_close = 3, askew_left = 4, askew_right = 5 };

inline constexpr std::array<PoseClass, 5> kPoseClasses{PoseClass::away, PoseClass::correct, PoseClass::too_close,
                                                       PoseClass::askew_left, PoseClass::askew_right};

inline int index_of(PoseClass c) { return static_cast<int>(c) - 1; }
std::string_view code(PoseClass c);         // "C1".."C5"
std::string_view description(PoseClass c);  // human label
PoseClass pose_class_from_code(std::string_view code);

/// One-vs-rest argmax over the 6-dim pose features; labels are 1..5.
PoseClass classify_pose(const mlkit::MulticlassModel& model, const Eigen::VectorXd& features);

}  // namespace ergowatch::pose
