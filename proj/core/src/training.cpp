#include "ergowatch/training.hpp"

#include "ergowatch/error.hpp"
#include "ergowatch/trackfix.hpp"

namespace ergowatch::training {

namespace {

double uniform(std::mt19937_64& rng, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

// Tracked-looking frame: exact projection plus Gaussian jitter.
LandmarkFrame noisy_frame(const std::array<Point2, kLandmarkCount>& clean, double sigma, double d,
                          std::mt19937_64& rng) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    LandmarkFrame f;
    f.d = d;
    for (std::size_t i = 0; i < kLandmarkCount; ++i) {
        const double nx = gauss(rng);
        const double ny = gauss(rng);
        f.points[i] = {clean[i].x + sigma * nx, clean[i].y + sigma * ny};
        f.responses[i] = uniform(rng, 0.85, 1.0);
    }
    return f;
}

pose::PoseClass any_class(std::mt19937_64& rng) {
    return pose::kPoseClasses[static_cast<std::size_t>(rng() % pose::kPoseClasses.size())];
}

}  // namespace

sim::PoseParams sample_pose(pose::PoseClass c, std::mt19937_64& rng) {
    sim::PoseParams p;
    p.yaw = uniform(rng, -10.0, 10.0);
    p.pitch = uniform(rng, -10.0, 10.0);
    p.roll = uniform(rng, -8.0, 8.0);
    double tz = uniform(rng, 520.0, 700.0);
    switch (c) {
    case pose::PoseClass::away: {
        const double side = uniform(rng, 0.0, 1.0) < 0.5 ? -1.0 : 1.0;
        p.yaw = side * uniform(rng, 40.0, 60.0);
        break;
    }
    case pose::PoseClass::correct: break;
    case pose::PoseClass::too_close: tz = uniform(rng, 280.0, 400.0); break;
    case pose::PoseClass::askew_left: p.roll = uniform(rng, 18.0, 32.0); break;
    case pose::PoseClass::askew_right: p.roll = uniform(rng, -32.0, -18.0); break;
    }
    p.translation = {uniform(rng, -0.06, 0.06) * tz, uniform(rng, -0.05, 0.05) * tz, tz};
    return p;
}

sim::PoseParams scenario_pose(pose::PoseClass c) {
    sim::PoseParams p;
    switch (c) {
    case pose::PoseClass::away: p.yaw = 50.0; break;
    case pose::PoseClass::correct: break;
    case pose::PoseClass::too_close: p.translation.z() = 340.0; break;
    case pose::PoseClass::askew_left: p.roll = 25.0; break;
    case pose::PoseClass::askew_right: p.roll = -25.0; break;
    }
    return p;
}

Dataset gate_dataset(const pose::RigidTemplate& tmpl, const pose::CameraIntrinsics& A, const TrainOptions& options) {
    std::mt19937_64 rng(options.seed);
    const auto face = sim::face_model(tmpl);
    Dataset ds;
    const std::size_t n = options.samples_per_class * 2;
    for (std::size_t i = 0; i < n; ++i) {
        const sim::PoseParams p = sample_pose(any_class(rng), rng);
        const auto clean = sim::project_face(face, p.to_pose(), A);
        LandmarkFrame f = noisy_frame(clean, options.noise_sigma, p.translation.z(), rng);
        const bool lost = i % 2 == 1;
        if (lost) sim::degrade(f, clean, rng);
        ds.x.push_back(trackfix::reinit_feature(f));
        ds.y.push_back(lost ? -1 : 1);
        ds.group.push_back(ds.y.back());
    }
    return ds;
}

Dataset pose_dataset(const pose::RigidTemplate& tmpl, const pose::CameraIntrinsics& A, const TrainOptions& options) {
    std::mt19937_64 rng(options.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Dataset ds;
    for (std::size_t i = 0; i < options.samples_per_class; ++i) {
        for (pose::PoseClass c : pose::kPoseClasses) {
            const sim::PoseParams p = sample_pose(c, rng);
            auto pts = pose::project(tmpl, p.to_pose(), A);
            for (auto& q : pts) {
                const double nx = gauss(rng);
                const double ny = gauss(rng);
                q.x += options.noise_sigma * nx;
                q.y += options.noise_sigma * ny;
            }
            pose::Pose est;
            try {
                est = pose::solve_pnp(pts, tmpl, A);
            } catch (const pose::NoConvergence& e) {
                est = e.best();
            }
            ds.x.push_back(pose::pose_features(est, tmpl));
            ds.y.push_back(static_cast<int>(c));
            ds.group.push_back(c == pose::PoseClass::away && p.yaw < 0.0 ? kAwayNegativeYaw : static_cast<int>(c));
        }
    }
    return ds;
}

Dataset mouth_dataset(const pose::RigidTemplate& tmpl, const pose::CameraIntrinsics& A, const TrainOptions& options,
                      bool raw_coordinates) {
    std::mt19937_64 rng(options.seed);
    const auto face = sim::face_model(tmpl);
    Dataset ds;
    const std::size_t n = options.samples_per_class * 2;
    for (std::size_t i = 0; i < n; ++i) {
        const sim::PoseParams p = sample_pose(any_class(rng), rng);
        const bool open = i % 2 == 0;
        auto shaped = face;
        sim::open_mouth(shaped, open ? uniform(rng, 15.0, 30.0) : uniform(rng, 0.0, 4.0));
        const auto clean = sim::project_face(shaped, p.to_pose(), A);
        const LandmarkFrame f = noisy_frame(clean, options.noise_sigma, p.translation.z(), rng);
        ds.x.push_back(features::mouth_feature(f, raw_coordinates));
        ds.y.push_back(open ? 1 : -1);
        ds.group.push_back(ds.y.back());
    }
    return ds;
}

mlkit::LinearModel train_gate(const pose::RigidTemplate& tmpl, const pose::CameraIntrinsics& A,
                              const TrainOptions& options) {
    const Dataset ds = gate_dataset(tmpl, A, options);
    return mlkit::train_linear_svm(ds.x, ds.y, options.svm);
}

mlkit::MulticlassModel train_pose(const pose::RigidTemplate& tmpl, const pose::CameraIntrinsics& A,
                                  const TrainOptions& options) {
    const Dataset ds = pose_dataset(tmpl, A, options);
    mlkit::MulticlassModel m = mlkit::train_one_vs_rest(ds.x, ds.group, options.svm);
    for (int& label : m.labels)
        if (label == kAwayNegativeYaw) label = static_cast<int>(pose::PoseClass::away);
    return m;
}

features::MouthModel train_mouth(const pose::RigidTemplate& tmpl, const pose::CameraIntrinsics& A,
                                 const TrainOptions& options, bool raw_coordinates) {
    const Dataset ds = mouth_dataset(tmpl, A, options, raw_coordinates);
    return {mlkit::train_linear_svm(ds.x, ds.y, options.svm), raw_coordinates};
}

}  // namespace ergowatch::training
