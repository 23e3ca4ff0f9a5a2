#include "ergowatch/pose.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <Eigen/Cholesky>
#include <Eigen/Geometry>
#include <Eigen/SVD>

#include "json_util.hpp"

namespace ergowatch::pose {

using nlohmann::json;

void CameraIntrinsics::validate() const {
    if (!(fx > 0.0) || !(fy > 0.0) || !std::isfinite(fx) || !std::isfinite(fy))
        throw ConfigError("camera intrinsics need fx, fy > 0");
    if (!std::isfinite(cx) || !std::isfinite(cy)) throw ConfigError("camera principal point must be finite");
}

void RigidTemplate::validate() const {
    const auto origin = static_cast<std::size_t>(
        std::find(landmarks::kRigid.begin(), landmarks::kRigid.end(), landmarks::kPoseOrigin) - landmarks::kRigid.begin());
    if (points[origin] != Eigen::Vector3d::Zero()) throw SchemaError("template point 67 must be the origin (0, 0, 0)");
    if (!(interocular > 0.0)) throw SchemaError("template interocular distance must be > 0");
    Eigen::Matrix<double, kRigidCount, 3> m;
    Eigen::Vector3d mean = Eigen::Vector3d::Zero();
    for (const auto& p : points) {
        if (!p.allFinite()) throw SchemaError("template coordinates must be finite");
        mean += p;
    }
    mean /= static_cast<double>(kRigidCount);
    for (std::size_t i = 0; i < kRigidCount; ++i) m.row(static_cast<Eigen::Index>(i)) = (points[i] - mean).transpose();
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
    const auto& s = svd.singularValues();
    if (!(s[2] > 1e-9 * s[0])) throw SchemaError("template points are coplanar or degenerate");
}

RigidTemplate RigidTemplate::canonical() {
    // Millimetres; x to the image right, y down, z away from the camera.
    RigidTemplate t;
    t.points = {{
        {0.0, -46.0, -12.0},   // 38 nasion
        {-10.0, -32.0, -14.0}, // 39 left bridge
        {-16.0, -16.0, -8.0},  // 40 left side wall
        {-21.0, -3.0, 0.0},    // 41 left ala
        {0.0, -11.0, -30.0},   // 42 pronasale
        {21.0, -3.0, 0.0},     // 43 right ala
        {16.0, -16.0, -8.0},   // 44 right side wall
        {-9.0, 1.0, -8.0},     // 46 left nostril
        {9.0, 1.0, -8.0},      // 47 right nostril
        {0.0, 0.0, 0.0},       // 67 subnasale (origin)
    }};
    t.interocular = 63.0;
    return t;
}

RigidTemplate template_from_json(std::string_view text) {
    json j = detail::parse_json(text, "template");
    RigidTemplate t;
    const json* list = &j;
    if (j.is_object()) {
        if (j.contains("interocular")) t.interocular = j.at("interocular").get<double>();
        if (!j.contains("points")) throw SchemaError("template object needs 'points'");
        list = &j.at("points");
    }
    if (!list->is_array()) throw SchemaError("template must be a list of {id, X, Y, Z}");
    std::array<bool, kRigidCount> seen{};
    try {
        for (const auto& e : *list) {
            const int id = e.at("id").get<int>();
            const auto it = std::find(landmarks::kRigid.begin(), landmarks::kRigid.end(), id);
            if (it == landmarks::kRigid.end()) throw SchemaError("template id " + std::to_string(id) + " is not rigid");
            const auto k = static_cast<std::size_t>(it - landmarks::kRigid.begin());
            if (seen[k]) throw SchemaError("duplicate template id " + std::to_string(id));
            seen[k] = true;
            t.points[k] = {e.at("X").get<double>(), e.at("Y").get<double>(), e.at("Z").get<double>()};
        }
    } catch (const json::exception& e) {
        throw SchemaError(std::string("template: ") + e.what());
    }
    if (!std::all_of(seen.begin(), seen.end(), [](bool b) { return b; }))
        throw SchemaError("template must list all 10 rigid landmarks");
    t.validate();
    return t;
}

std::string to_json(const RigidTemplate& tmpl) {
    json pts = json::array();
    for (std::size_t i = 0; i < kRigidCount; ++i) {
        const auto& p = tmpl.points[i];
        pts.push_back({{"id", landmarks::kRigid[i]}, {"X", p.x()}, {"Y", p.y()}, {"Z", p.z()}});
    }
    return json{{"interocular", tmpl.interocular}, {"points", std::move(pts)}}.dump(2);
}

Eigen::Matrix3d axis_angle_to_matrix(const Eigen::Vector3d& r) {
    const double angle = r.norm();
    if (angle < 1e-300) return Eigen::Matrix3d::Identity();
    return Eigen::AngleAxisd(angle, r / angle).toRotationMatrix();
}

Eigen::Vector3d matrix_to_axis_angle(const Eigen::Matrix3d& r) {
    const Eigen::AngleAxisd aa(Eigen::Quaterniond(r).normalized());
    double angle = aa.angle();
    Eigen::Vector3d axis = aa.axis();
    if (angle > std::numbers::pi) {
        angle = 2.0 * std::numbers::pi - angle;
        axis = -axis;
    }
    return axis * angle;
}

Eigen::Matrix3d Pose::rotation_matrix() const { return axis_angle_to_matrix(rotation); }

Eigen::Matrix3d euler_to_matrix(const Euler& e) {
    return (Eigen::AngleAxisd(e.roll, Eigen::Vector3d::UnitZ()) * Eigen::AngleAxisd(e.yaw, Eigen::Vector3d::UnitY()) *
            Eigen::AngleAxisd(e.pitch, Eigen::Vector3d::UnitX()))
        .toRotationMatrix();
}

Euler matrix_to_euler(const Eigen::Matrix3d& r) {
    Euler e;
    e.yaw = std::atan2(-r(2, 0), std::hypot(r(0, 0), r(1, 0)));
    e.pitch = std::atan2(r(2, 1), r(2, 2));
    e.roll = std::atan2(r(1, 0), r(0, 0));
    return e;
}

Pose pose_from_euler(const Euler& e, const Eigen::Vector3d& translation) {
    Pose p;
    p.rotation = matrix_to_axis_angle(euler_to_matrix(e));
    p.translation = translation;
    return p;
}

namespace {

Point2 project_camera(const Eigen::Vector3d& pc, const CameraIntrinsics& A) {
    return {A.fx * pc.x() / pc.z() + A.cx, A.fy * pc.y() / pc.z() + A.cy};
}

struct Candidate {
    Eigen::Quaterniond q;
    Eigen::Vector3d t;
    double cost = std::numeric_limits<double>::infinity();  // sum of squared residuals
};

// Returns +inf when any point falls behind the camera.
double cost_of(std::span<const Point2, kRigidCount> obs, const RigidTemplate& tmpl, const Eigen::Matrix3d& R,
               const Eigen::Vector3d& t, const CameraIntrinsics& A) {
    double c = 0.0;
    for (std::size_t i = 0; i < kRigidCount; ++i) {
        const Eigen::Vector3d pc = R * tmpl.points[i] + t;
        if (!(pc.z() > 0.0)) return std::numeric_limits<double>::infinity();
        const Point2 p = project_camera(pc, A);
        c += (p.x - obs[i].x) * (p.x - obs[i].x) + (p.y - obs[i].y) * (p.y - obs[i].y);
    }
    return c;
}

struct SolveResult {
    Candidate best;
    double initial_cost = 0.0;
};

constexpr int kMaxIterations = 100;
constexpr double kStepTolerance = 1e-10;

SolveResult refine(std::span<const Point2, kRigidCount> obs, const RigidTemplate& tmpl, const CameraIntrinsics& A,
                   Candidate cur) {
    Eigen::Matrix3d R = cur.q.toRotationMatrix();
    cur.cost = cost_of(obs, tmpl, R, cur.t, A);
    SolveResult res{cur, cur.cost};
    if (!std::isfinite(cur.cost)) return res;

    double damping = 1e-4;
    Eigen::Matrix<double, 2 * kRigidCount, 6> J;
    Eigen::Matrix<double, 2 * kRigidCount, 1> r;
    for (int iter = 0; iter < kMaxIterations && cur.cost > 0.0; ++iter) {
        for (std::size_t i = 0; i < kRigidCount; ++i) {
            const Eigen::Vector3d rp = R * tmpl.points[i];
            const Eigen::Vector3d pc = rp + cur.t;
            const double iz = 1.0 / pc.z();
            const Point2 p = project_camera(pc, A);
            const auto row = static_cast<Eigen::Index>(2 * i);
            r(row) = p.x - obs[i].x;
            r(row + 1) = p.y - obs[i].y;
            Eigen::Matrix<double, 2, 3> dproj;
            dproj << A.fx * iz, 0.0, -A.fx * pc.x() * iz * iz, 0.0, A.fy * iz, -A.fy * pc.y() * iz * iz;
            // d(exp([δ]x) R p)/dδ = -[R p]x
            Eigen::Matrix3d skew;
            skew << 0.0, -rp.z(), rp.y(), rp.z(), 0.0, -rp.x(), -rp.y(), rp.x(), 0.0;
            J.block<2, 3>(row, 0) = -dproj * skew;
            J.block<2, 3>(row, 3) = dproj;
        }
        const Eigen::Matrix<double, 6, 6> H = J.transpose() * J;
        const Eigen::Matrix<double, 6, 1> g = J.transpose() * r;

        bool accepted = false;
        double step_norm = 0.0;
        while (damping < 1e12) {
            Eigen::Matrix<double, 6, 6> Hd = H;
            Hd.diagonal() += damping * H.diagonal().cwiseMax(1e-12);
            const Eigen::Matrix<double, 6, 1> step = -Hd.ldlt().solve(g);
            step_norm = step.norm();
            const Eigen::Vector3d dr = step.head<3>();
            const double angle = dr.norm();
            Eigen::Quaterniond dq = angle > 0.0 ? Eigen::Quaterniond(Eigen::AngleAxisd(angle, dr / angle))
                                                : Eigen::Quaterniond::Identity();
            Candidate next{(dq * cur.q).normalized(), cur.t + step.tail<3>(), 0.0};
            const Eigen::Matrix3d Rn = next.q.toRotationMatrix();
            next.cost = cost_of(obs, tmpl, Rn, next.t, A);
            if (next.cost <= cur.cost) {
                cur = next;
                R = Rn;
                damping = std::max(damping * 0.1, 1e-12);
                accepted = true;
                break;
            }
            if (step_norm < kStepTolerance) break;
            damping *= 10.0;
        }
        if (!accepted || step_norm < kStepTolerance) break;
    }
    res.best = cur;
    return res;
}

Pose to_pose(const Candidate& c) {
    Pose p;
    p.rotation = matrix_to_axis_angle(c.q.toRotationMatrix());
    p.translation = c.t;
    p.reprojection_error = std::sqrt(c.cost / static_cast<double>(kRigidCount));
    return p;
}

}  // namespace

Point2 project_point(const Eigen::Vector3d& p, const Pose& pose, const CameraIntrinsics& A) {
    const Eigen::Vector3d pc = pose.rotation_matrix() * p + pose.translation;
    if (!(pc.z() > 0.0)) throw ProjectionError("point has nonpositive depth under the pose");
    return project_camera(pc, A);
}

std::array<Point2, kRigidCount> project(const RigidTemplate& tmpl, const Pose& pose, const CameraIntrinsics& A) {
    const Eigen::Matrix3d R = pose.rotation_matrix();
    std::array<Point2, kRigidCount> out{};
    for (std::size_t i = 0; i < kRigidCount; ++i) {
        const Eigen::Vector3d pc = R * tmpl.points[i] + pose.translation;
        if (!(pc.z() > 0.0)) throw ProjectionError("template point has nonpositive depth under the pose");
        out[i] = project_camera(pc, A);
    }
    return out;
}

double reprojection_rms(std::span<const Point2, kRigidCount> points, const RigidTemplate& tmpl, const Pose& pose,
                        const CameraIntrinsics& A) {
    const double c = cost_of(points, tmpl, pose.rotation_matrix(), pose.translation, A);
    return std::sqrt(c / static_cast<double>(kRigidCount));
}

Pose solve_pnp(std::span<const Point2, kRigidCount> points, const RigidTemplate& tmpl, const CameraIntrinsics& A,
               const std::optional<Pose>& init) {
    A.validate();
    for (const auto& p : points)
        if (!std::isfinite(p.x) || !std::isfinite(p.y)) throw DimensionError("image points must be finite");

    std::vector<Candidate> starts;
    if (init) {
        starts.push_back({Eigen::Quaterniond(init->rotation_matrix()), init->translation, 0.0});
    } else {
        Eigen::Vector3d c3 = Eigen::Vector3d::Zero();
        for (const auto& p : tmpl.points) c3 += p;
        c3 /= static_cast<double>(kRigidCount);
        double rho3 = 0.0;
        for (const auto& p : tmpl.points) rho3 += (p - c3).head<2>().squaredNorm();
        rho3 = std::sqrt(rho3 / static_cast<double>(kRigidCount));

        double u = 0.0, v = 0.0;
        for (const auto& p : points) {
            u += p.x;
            v += p.y;
        }
        u /= static_cast<double>(kRigidCount);
        v /= static_cast<double>(kRigidCount);
        double rho2 = 0.0;
        for (const auto& p : points) rho2 += ((p.x - u) * (p.x - u)) / (A.fx * A.fx) + ((p.y - v) * (p.y - v)) / (A.fy * A.fy);
        rho2 = std::sqrt(rho2 / static_cast<double>(kRigidCount));
        const double tz = rho2 > 0.0 ? rho3 / rho2 : 1.0;
        const Eigen::Vector3d centroid((u - A.cx) * tz / A.fx, (v - A.cy) * tz / A.fy, tz);

        constexpr double deg = std::numbers::pi / 180.0;
        for (double yaw : {0.0, -45.0, 45.0}) {
            for (double pitch : {0.0, -45.0, 45.0}) {
                const Eigen::Matrix3d R = euler_to_matrix({yaw * deg, pitch * deg, 0.0});
                starts.push_back({Eigen::Quaterniond(R), centroid - R * c3, 0.0});
            }
        }
    }

    std::optional<SolveResult> best;
    for (const auto& s : starts) {
        SolveResult res = refine(points, tmpl, A, s);
        if (!best || res.best.cost < best->best.cost) best = res;
    }
    if (!std::isfinite(best->best.cost))
        throw NoConvergence("no initialization keeps the template in front of the camera", to_pose(best->best));
    if (best->initial_cost > 0.0 && !(best->best.cost < best->initial_cost))
        throw NoConvergence("reprojection error did not decrease", to_pose(best->best));
    return to_pose(best->best);
}

std::array<Point2, kRigidCount> rigid_points(const LandmarkFrame& frame) {
    std::array<Point2, kRigidCount> out{};
    for (std::size_t i = 0; i < kRigidCount; ++i) out[i] = frame.points[static_cast<std::size_t>(landmarks::kRigid[i])];
    return out;
}

Eigen::VectorXd pose_features(const Pose& pose, const RigidTemplate& tmpl) {
    Eigen::VectorXd f(6);
    f << pose.rotation, pose.translation / tmpl.interocular;
    return f;
}

std::string_view code(PoseClass c) {
    switch (c) {
        case PoseClass::away: return "C1";
        case PoseClass::correct: return "C2";
        case PoseClass::too_close: return "C3";
        case PoseClass::askew_left: return "C4";
        case PoseClass::askew_right: return "C5";
    }
    return "C?";
}

std::string_view description(PoseClass c) {
    switch (c) {
        case PoseClass::away: return "not looking at or not in front of the computer";
        case PoseClass::correct: return "correct pose";
        case PoseClass::too_close: return "too close to the screen";
        case PoseClass::askew_left: return "head askew to the left";
        case PoseClass::askew_right: return "head askew to the right";
    }
    return "unknown";
}

PoseClass pose_class_from_code(std::string_view text) {
    for (PoseClass c : kPoseClasses)
        if (code(c) == text) return c;
    throw SchemaError("unknown pose class '" + std::string(text) + "'");
}

PoseClass classify_pose(const mlkit::MulticlassModel& model, const Eigen::VectorXd& features) {
    if (model.empty()) throw UntrainedError("pose classifier is untrained");
    const int label = model.predict(features);
    if (label < 1 || label > 5) throw SchemaError("pose classifier produced label outside 1..5");
    return static_cast<PoseClass>(label);
}

}  // namespace ergowatch::pose
