#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Core>

#include "ergowatch/features.hpp"
#include "ergowatch/mlkit.hpp"
#include "ergowatch/pose.hpp"
#include "ergowatch/simulate.hpp"

namespace ergowatch::training {

/// Random head pose drawn from the class's training range.
sim::PoseParams sample_pose(pose::PoseClass c, std::mt19937_64& rng);

/// Representative pose for scripted scenarios.
sim::PoseParams scenario_pose(pose::PoseClass c);

struct TrainOptions {
    std::size_t samples_per_class = 200;
    std::uint64_t seed = 7;
    double noise_sigma = 1.0;  // landmark jitter, pixels
    mlkit::SvmOptions svm{0.001, 40, 1, true, {}};
};

struct Dataset {
    std::vector<Eigen::VectorXd> x;
    std::vector<int> y;
    // Training sub-class; differs from y only where one label covers
    // disjoint regions (away: head turned left or right).
    std::vector<int> group;
};

/// Sub-class id of a head turned away to negative yaw; mapped back to C1.
inline constexpr int kAwayNegativeYaw = 0;

/// 228-dim re-init features; +1 tracked frames, -1 drifted frames.
Dataset gate_dataset(const pose::RigidTemplate& tmpl, const pose::CameraIntrinsics& A, const TrainOptions& options);
/// 6-dim pose features from noisy PnP solves; labels are class numbers 1..5.
/// The trained ensemble carries two C1 scorers, one per turn direction.
Dataset pose_dataset(const pose::RigidTemplate& tmpl, const pose::CameraIntrinsics& A, const TrainOptions& options);
/// 38-dim mouth features; +1 open (yawn-wide), -1 closed or slightly parted.
Dataset mouth_dataset(const pose::RigidTemplate& tmpl, const pose::CameraIntrinsics& A, const TrainOptions& options,
                      bool raw_coordinates = false);

mlkit::LinearModel train_gate(const pose::RigidTemplate& tmpl, const pose::CameraIntrinsics& A,
                              const TrainOptions& options = {});
mlkit::MulticlassModel train_pose(const pose::RigidTemplate& tmpl, const pose::CameraIntrinsics& A,
                                  const TrainOptions& options = {});
features::MouthModel train_mouth(const pose::RigidTemplate& tmpl, const pose::CameraIntrinsics& A,
                                 const TrainOptions& options = {}, bool raw_coordinates = false);

}  // namespace ergowatch::training
