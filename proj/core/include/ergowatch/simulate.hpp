#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "ergowatch/frame.hpp"
#include "ergowatch/pose.hpp"

namespace ergowatch::sim {

/// Head pose in script units: degrees and template units.
struct PoseParams {
    double yaw = 0.0;
    double pitch = 0.0;
    double roll = 0.0;
    Eigen::Vector3d translation{0.0, 0.0, 600.0};

    pose::Pose to_pose() const;
};

struct PoseSegment {
    double start = 0.0;
    double end = 0.0;
    pose::PoseClass label = pose::PoseClass::correct;
    PoseParams from;
    std::optional<PoseParams> to;  // linear motion across the segment when set
};

struct Interval {
    double start = 0.0;
    double end = 0.0;
};

/// Scripted session; events double as ground truth.
struct StreamScript {
    double duration = 10.0;
    double fps = 30.0;
    PoseParams default_pose;
    pose::PoseClass default_label = pose::PoseClass::correct;
    std::vector<PoseSegment> poses;
    std::vector<double> blinks;          // closure onset times
    std::vector<Interval> yawns;         // mouth-open intervals (any length)
    std::vector<Interval> absences;      // user away: tracked = false
    std::vector<Interval> tracking_loss; // tracker drifted: degraded frames, tracked = true
    std::vector<double> jitter_sigma{1.0};  // one value for all landmarks, or 76
    int blink_frames = 4;
    double mouth_open = 25.0;  // lower-lip drop when open, template units
    double patch_noise = 10.0; // per-frame uniform offset of each eye patch level, ±

    void validate() const;
    std::size_t frame_count() const;
};

StreamScript script_from_json(std::string_view text);
std::string to_json(const StreamScript& script);

struct FrameSpan {
    std::size_t first = 0;  // inclusive
    std::size_t last = 0;   // exclusive
};

struct PoseSpan {
    FrameSpan span;
    pose::PoseClass label = pose::PoseClass::correct;
};

struct GroundTruth {
    double fps = 30.0;
    std::size_t frame_count = 0;
    std::vector<std::size_t> blinks;  // onset frames where the face is tracked
    std::vector<FrameSpan> yawns;
    std::vector<PoseSpan> poses;  // complete coverage, default pose included
    std::vector<FrameSpan> absences;
    std::vector<FrameSpan> tracking_loss;
};

std::string to_json(const GroundTruth& truth);
GroundTruth ground_truth_from_json(std::string_view text);

/// Generic 3D face for all 76 landmarks (template units, origin at 67);
/// rigid entries come from the supplied template.
std::array<Eigen::Vector3d, kLandmarkCount> face_model(const pose::RigidTemplate& tmpl);

/// Moves the lower-lip landmarks down by `amount` (weighted toward the center).
void open_mouth(std::array<Eigen::Vector3d, kLandmarkCount>& face, double amount);

/// Exact projection of every landmark.
std::array<Point2, kLandmarkCount> project_face(const std::array<Eigen::Vector3d, kLandmarkCount>& face,
                                                const pose::Pose& pose, const pose::CameraIntrinsics& A);

inline constexpr int kEyePatchSize = 16;
inline constexpr double kOpenEyeLevel = 60.0;
inline constexpr double kClosedEyeLevel = 180.0;

/// Uniform 16×16 patch at `level` per channel.
EyePatch make_eye_patch(Point2 center, double level);

/// Tracker drift: landmarks collapse toward their centroid (plus 4 px
/// noise) and template responses drop below 0.3.
void degrade(LandmarkFrame& frame, const std::array<Point2, kLandmarkCount>& clean, std::mt19937_64& rng);

/// Frame generator. Frames are produced in order, one per call to next().
class Simulator {
public:
    Simulator(StreamScript script, pose::RigidTemplate tmpl, pose::CameraIntrinsics intrinsics, std::uint64_t seed);

    std::size_t frame_count() const noexcept { return frame_count_; }
    std::size_t position() const noexcept { return index_; }
    bool done() const noexcept { return index_ >= frame_count_; }

    LandmarkFrame next();

    /// Noise-free landmark positions of the frame last returned by next().
    const std::array<Point2, kLandmarkCount>& clean_points() const noexcept { return clean_; }

    double time_of(std::size_t frame) const { return static_cast<double>(frame) / script_.fps; }
    pose::Pose pose_at(double t) const;
    pose::PoseClass label_at(double t) const;
    bool absent_at(std::size_t frame) const;
    bool lost_at(std::size_t frame) const;
    bool eye_closed_at(std::size_t frame) const;
    bool mouth_open_at(double t) const;

    GroundTruth ground_truth() const;

    const StreamScript& script() const noexcept { return script_; }

private:
    StreamScript script_;
    pose::RigidTemplate tmpl_;
    pose::CameraIntrinsics intrinsics_;
    std::array<Eigen::Vector3d, kLandmarkCount> face_;
    std::array<double, kLandmarkCount> sigma_{};
    std::vector<std::size_t> blink_frames_;
    std::size_t frame_count_;
    std::size_t index_ = 0;
    std::mt19937_64 rng_;
    std::array<Point2, kLandmarkCount> clean_{};
};

std::pair<std::vector<LandmarkFrame>, GroundTruth> simulate(const StreamScript& script, const pose::RigidTemplate& tmpl,
                                                             const pose::CameraIntrinsics& intrinsics,
                                                             std::uint64_t seed);

/// Frame containing time t: round(t · fps).
std::size_t frame_at(double t, double fps);
/// Frames k with start <= k/fps < end.
FrameSpan frames_in(const Interval& iv, double fps);

}  // namespace ergowatch::sim
