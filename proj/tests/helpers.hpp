#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cmath>
#include <random>

#include "ergowatch/frame.hpp"
#include "ergowatch/pose.hpp"
#include "ergowatch/simulate.hpp"

namespace testing {

inline ergowatch::LandmarkFrame frame_at(double t, double fps = 30.0) {
    ergowatch::LandmarkFrame f;
    f.t = t;
    f.fps = fps;
    f.d = 600.0;
    for (std::size_t i = 0; i < ergowatch::kLandmarkCount; ++i)
        f.points[i] = {100.0 + 3.0 * static_cast<double>(i), 200.0 + static_cast<double>(i % 7)};
    return f;
}

/// Non-canonical template so no test leans on the shipped values.
inline ergowatch::pose::RigidTemplate test_template(std::uint64_t seed = 5) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> jitter(-2.0, 2.0);
    auto t = ergowatch::pose::RigidTemplate::canonical();
    for (std::size_t i = 0; i + 1 < t.points.size(); ++i)
        t.points[i] += Eigen::Vector3d(jitter(rng), jitter(rng), jitter(rng));
    t.interocular = 60.0;
    return t;
}

inline double angle_between(const Eigen::Matrix3d& a, const Eigen::Matrix3d& b) {
    const double c = std::clamp(((a.transpose() * b).trace() - 1.0) / 2.0, -1.0, 1.0);
    return std::acos(c);
}

/// Distance in units in the last place between two finite doubles of the same sign.
inline std::uint64_t ulp_distance(double a, double b) {
    if (a == b) return 0;
    if ((a < 0) != (b < 0)) return UINT64_MAX;
    const auto ia = std::bit_cast<std::int64_t>(std::abs(a));
    const auto ib = std::bit_cast<std::int64_t>(std::abs(b));
    return static_cast<std::uint64_t>(ia > ib ? ia - ib : ib - ia);
}

}  // namespace testing
