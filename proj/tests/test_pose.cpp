#include <algorithm>
#include <cmath>
#include <random>

#include <Eigen/Geometry>

#include "doctest.h"
#include "ergowatch/error.hpp"
#include "ergowatch/pose.hpp"
#include "ergowatch/training.hpp"
#include "helpers.hpp"

using namespace ergowatch;
using namespace ergowatch::pose;

namespace {

constexpr double kDeg = 3.14159265358979323846 / 180.0;

// Forward model written independently of the library: Eigen's AngleAxis
// for the rotation and a pinhole divide.
std::array<Point2, kRigidCount> oracle_project(const RigidTemplate& t, const Eigen::Matrix3d& R,
                                               const Eigen::Vector3d& tr, const CameraIntrinsics& A) {
    std::array<Point2, kRigidCount> out{};
    for (std::size_t i = 0; i < kRigidCount; ++i) {
        const Eigen::Vector3d p = R * t.points[i] + tr;
        out[i] = {A.fx * p.x() / p.z() + A.cx, A.fy * p.y() / p.z() + A.cy};
    }
    return out;
}

Eigen::Matrix3d oracle_rotation(double yaw, double pitch, double roll) {
    return (Eigen::AngleAxisd(roll, Eigen::Vector3d::UnitZ()) * Eigen::AngleAxisd(yaw, Eigen::Vector3d::UnitY()) *
            Eigen::AngleAxisd(pitch, Eigen::Vector3d::UnitX()))
        .toRotationMatrix();
}

RigidTemplate random_template(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-30.0, 30.0);
    RigidTemplate t;
    for (std::size_t i = 0; i + 1 < kRigidCount; ++i) t.points[i] = {u(rng), u(rng), 0.5 * u(rng)};
    t.points[kRigidCount - 1] = Eigen::Vector3d::Zero();
    return t;
}

}  // namespace

TEST_CASE("origin projects to the principal point") {
    const CameraIntrinsics A;
    Pose p;
    p.translation = {0.0, 0.0, 500.0};
    const auto q = project_point(Eigen::Vector3d::Zero(), p, A);
    CHECK(q.x == A.cx);
    CHECK(q.y == A.cy);
}

TEST_CASE("doubling depth halves centered offsets") {
    const auto t = testing::test_template();
    const CameraIntrinsics A;
    Pose near;
    near.translation = {0.0, 0.0, 400.0};
    Pose far = near;
    far.translation.z() = 800.0;
    const auto a = project(t, near, A);
    const auto b = project(t, far, A);
    for (std::size_t i = 0; i < kRigidCount; ++i) {
        // Holds exactly only for points at the origin depth plane; others
        // differ by their own Z. Compare through the oracle instead.
        const Eigen::Vector3d p = t.points[i];
        CHECK(a[i].x - A.cx == doctest::Approx(A.fx * p.x() / (p.z() + 400.0)));
        CHECK(b[i].x - A.cx == doctest::Approx(A.fx * p.x() / (p.z() + 800.0)));
    }
    const double flat = A.fx * 10.0 / 400.0;
    CHECK(project_point({10.0, 0.0, 0.0}, far, A).x - A.cx == doctest::Approx(flat / 2.0));
}

TEST_CASE("projection behind the camera is an error") {
    Pose p;
    p.translation = {0.0, 0.0, 5.0};
    CHECK_THROWS_AS(project_point({0.0, 0.0, -10.0}, p, CameraIntrinsics{}), ProjectionError);
}

TEST_CASE("library projection matches the independent oracle") {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> ang(-30.0, 30.0);
    const auto t = testing::test_template();
    const CameraIntrinsics A{700.0, 690.0, 330.0, 250.0};
    for (int k = 0; k < 50; ++k) {
        const double yaw = ang(rng) * kDeg, pitch = ang(rng) * kDeg, roll = 0.5 * ang(rng) * kDeg;
        const Eigen::Vector3d tr(ang(rng), ang(rng), 500.0 + 5.0 * ang(rng));
        const auto mine = project(t, pose_from_euler({yaw, pitch, roll}, tr), A);
        const auto ref = oracle_project(t, oracle_rotation(yaw, pitch, roll), tr, A);
        for (std::size_t i = 0; i < kRigidCount; ++i) {
            CHECK(mine[i].x == doctest::Approx(ref[i].x).epsilon(1e-12));
            CHECK(mine[i].y == doctest::Approx(ref[i].y).epsilon(1e-12));
        }
    }
}

TEST_CASE("identity pose is recovered with negligible error") {
    const auto t = testing::test_template();
    const CameraIntrinsics A;
    Pose truth;
    truth.translation = {0.0, 0.0, 600.0};
    const auto pts = project(t, truth, A);
    const Pose est = solve_pnp(pts, t, A);
    CHECK(est.rotation.norm() < 1e-8);
    CHECK((est.translation - truth.translation).norm() < 1e-6);
    CHECK(est.reprojection_error < 1e-8);
}

TEST_CASE("noiseless round trip on random poses and random templates") {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::uniform_real_distribution<double> tz(300.0, 800.0);
    const CameraIntrinsics A;
    for (int k = 0; k < 100; ++k) {
        const RigidTemplate t = k % 2 ? testing::test_template(k) : random_template(rng);
        const double yaw = 30.0 * u(rng) * kDeg, pitch = 30.0 * u(rng) * kDeg, roll = 15.0 * u(rng) * kDeg;
        const Eigen::Vector3d tr(40.0 * u(rng), 40.0 * u(rng), tz(rng));
        const Eigen::Matrix3d R = oracle_rotation(yaw, pitch, roll);
        const auto pts = oracle_project(t, R, tr, A);
        const Pose est = solve_pnp(pts, t, A);
        CHECK(testing::angle_between(est.rotation_matrix(), R) < 1e-4);
        CHECK((est.translation - tr).norm() < 1e-3);
        CHECK(est.reprojection_error < 1e-6);
        // project ∘ solve reproduces the input.
        const auto again = project(t, est, A);
        for (std::size_t i = 0; i < kRigidCount; ++i) {
            CHECK(std::abs(again[i].x - pts[i].x) < 1e-6);
            CHECK(std::abs(again[i].y - pts[i].y) < 1e-6);
        }
        const Eigen::Matrix3d Rm = est.rotation_matrix();
        CHECK((Rm.transpose() * Rm - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() < 1e-10);
        CHECK(std::abs(Rm.determinant() - 1.0) < 1e-10);
        CHECK(est.rotation.norm() <= 3.14159265358979323846);
        CHECK(est.translation.z() > 0.0);
    }
}

TEST_CASE("warm start from the previous pose converges to the same answer") {
    const auto t = testing::test_template();
    const CameraIntrinsics A;
    const Pose truth = pose_from_euler({10 * kDeg, -5 * kDeg, 3 * kDeg}, {5.0, -3.0, 580.0});
    const auto pts = project(t, truth, A);
    const Pose init = pose_from_euler({8 * kDeg, -4 * kDeg, 2 * kDeg}, {0.0, 0.0, 600.0});
    const Pose est = solve_pnp(pts, t, A, init);
    CHECK(testing::angle_between(est.rotation_matrix(), truth.rotation_matrix()) < 1e-8);
    CHECK(est.reprojection_error < 1e-8);
}

TEST_CASE("0.5 px noise keeps the median rotation error under 2 degrees") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::normal_distribution<double> g(0.0, 0.5);
    const auto t = testing::test_template();
    const CameraIntrinsics A;
    std::vector<double> errors;
    for (int k = 0; k < 100; ++k) {
        const Pose truth = pose_from_euler({30 * u(rng) * kDeg, 30 * u(rng) * kDeg, 15 * u(rng) * kDeg},
                                           {20.0 * u(rng), 20.0 * u(rng), 550.0 + 250.0 * u(rng)});
        auto pts = project(t, truth, A);
        for (auto& p : pts) {
            p.x += g(rng);
            p.y += g(rng);
        }
        Pose est;
        try {
            est = solve_pnp(pts, t, A);
        } catch (const NoConvergence& e) {
            est = e.best();
        }
        errors.push_back(testing::angle_between(est.rotation_matrix(), truth.rotation_matrix()));
    }
    std::nth_element(errors.begin(), errors.begin() + 50, errors.end());
    CHECK(errors[50] < 2.0 * kDeg);
}

TEST_CASE("shifting the principal point and the image points leaves the pose unchanged") {
    const auto t = testing::test_template();
    const CameraIntrinsics A;
    const Pose truth = pose_from_euler({12 * kDeg, 7 * kDeg, -4 * kDeg}, {10.0, 5.0, 620.0});
    auto pts = project(t, truth, A);
    const Pose a = solve_pnp(pts, t, A);
    CameraIntrinsics B = A;
    B.cx += 37.0;
    B.cy -= 11.0;
    for (auto& p : pts) {
        p.x += 37.0;
        p.y -= 11.0;
    }
    const Pose b = solve_pnp(pts, t, B);
    CHECK((a.rotation - b.rotation).norm() < 1e-8);
    CHECK((a.translation - b.translation).norm() < 1e-6);
}

TEST_CASE("euler, axis-angle and matrix conversions agree") {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int k = 0; k < 50; ++k) {
        const Euler e{1.2 * u(rng), 1.2 * u(rng), 1.2 * u(rng)};
        const Eigen::Matrix3d R = euler_to_matrix(e);
        CHECK((R - oracle_rotation(e.yaw, e.pitch, e.roll)).cwiseAbs().maxCoeff() < 1e-12);
        const Euler back = matrix_to_euler(R);
        CHECK(back.yaw == doctest::Approx(e.yaw).epsilon(1e-9));
        CHECK(back.pitch == doctest::Approx(e.pitch).epsilon(1e-9));
        CHECK(back.roll == doctest::Approx(e.roll).epsilon(1e-9));
        CHECK((axis_angle_to_matrix(matrix_to_axis_angle(R)) - R).cwiseAbs().maxCoeff() < 1e-10);
    }
}

TEST_CASE("pose features: identity layout and yaw sign symmetry") {
    RigidTemplate t = testing::test_template();
    Pose p;
    p.translation = {0.0, 0.0, 600.0};
    const auto f = pose_features(p, t);
    REQUIRE(f.size() == 6);
    for (int i = 0; i < 5; ++i) CHECK(f[i] == 0.0);
    CHECK(f[5] == doctest::Approx(600.0 / t.interocular));

    const auto plus = pose_features(pose_from_euler({20 * kDeg, 0, 0}, {0, 0, 600}), t);
    const auto minus = pose_features(pose_from_euler({-20 * kDeg, 0, 0}, {0, 0, 600}), t);
    CHECK(plus[1] == doctest::Approx(-minus[1]));
    CHECK(std::abs(plus[1]) > 0.3);
    CHECK(plus[0] == doctest::Approx(minus[0]));
    CHECK(plus[2] == doctest::Approx(minus[2]));
    for (int i = 3; i < 6; ++i) CHECK(plus[i] == minus[i]);
    CHECK((pose_features(p, t) - f).norm() == 0.0);
}

TEST_CASE("template validation and file formats") {
    auto t = RigidTemplate::canonical();
    CHECK_NOTHROW(t.validate());
    auto moved = t;
    moved.points[kRigidCount - 1] = {1.0, 0.0, 0.0};
    CHECK_THROWS_AS(moved.validate(), SchemaError);
    auto flat = t;
    for (auto& p : flat.points) p.z() = 0.0;
    CHECK_THROWS_AS(flat.validate(), SchemaError);

    const auto back = template_from_json(to_json(t));
    CHECK(back.points == t.points);
    CHECK(back.interocular == t.interocular);
    std::string list = "[";
    for (std::size_t i = 0; i < kRigidCount; ++i) {
        const auto& p = t.points[i];
        list += (i ? "," : "") + std::string("{\"id\":") + std::to_string(landmarks::kRigid[i]) +
                ",\"X\":" + std::to_string(p.x()) + ",\"Y\":" + std::to_string(p.y()) + ",\"Z\":" + std::to_string(p.z()) + "}";
    }
    list += "]";
    const auto listed = template_from_json(list);
    CHECK(listed.points[3].x() == doctest::Approx(t.points[3].x()));
    CHECK_THROWS_AS(template_from_json("[{\"id\": 38, \"X\": 0, \"Y\": 0, \"Z\": 0}]"), SchemaError);
}

TEST_CASE("intrinsics must have positive focal lengths") {
    CHECK_THROWS_AS((CameraIntrinsics{0.0, 640.0, 320.0, 240.0}.validate()), ConfigError);
    CHECK_NOTHROW(CameraIntrinsics{}.validate());
}

TEST_CASE("pose class codes") {
    for (auto c : kPoseClasses) CHECK(pose_class_from_code(code(c)) == c);
    CHECK(code(PoseClass::too_close) == "C3");
    CHECK(description(PoseClass::too_close) == "too close to the screen");
    CHECK_THROWS_AS(pose_class_from_code("C9"), SchemaError);
}

TEST_CASE("trained classifier recognises scripted poses") {
    const auto t = testing::test_template();
    const CameraIntrinsics A;
    const auto model = training::train_pose(t, A, {});
    std::mt19937_64 rng(5);
    std::normal_distribution<double> g(0.0, 1.0);
    for (auto c : kPoseClasses) {
        for (int k = 0; k < 10; ++k) {
            auto pts = project(t, training::scenario_pose(c).to_pose(), A);
            for (auto& p : pts) {
                p.x += g(rng);
                p.y += g(rng);
            }
            const Pose est = solve_pnp(pts, t, A);
            CHECK(classify_pose(model, pose_features(est, t)) == c);
        }
    }
    CHECK_THROWS_AS(classify_pose(mlkit::MulticlassModel{}, Eigen::VectorXd::Zero(6)), UntrainedError);
}
