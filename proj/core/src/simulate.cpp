#include "ergowatch/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "ergowatch/error.hpp"
#include "json_util.hpp"

namespace ergowatch::sim {

using nlohmann::json;

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

void check_intervals(const std::vector<Interval>& list, double duration, const char* name) {
    std::vector<Interval> sorted = list;
    std::sort(sorted.begin(), sorted.end(), [](const Interval& a, const Interval& b) { return a.start < b.start; });
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        const auto& iv = sorted[i];
        if (!(iv.start < iv.end)) throw SchemaError(std::string(name) + ": interval start must precede end");
        if (iv.start < 0.0 || iv.end > duration + 1e-9)
            throw SchemaError(std::string(name) + ": interval outside [0, duration]");
        if (i > 0 && iv.start < sorted[i - 1].end) throw SchemaError(std::string(name) + ": intervals overlap");
    }
}

bool inside_any(const std::vector<Interval>& list, double t) {
    return std::any_of(list.begin(), list.end(), [t](const Interval& iv) { return t >= iv.start && t < iv.end; });
}

}  // namespace

pose::Pose PoseParams::to_pose() const {
    return pose::pose_from_euler({yaw * kDeg, pitch * kDeg, roll * kDeg}, translation);
}

std::size_t StreamScript::frame_count() const {
    return static_cast<std::size_t>(std::floor(duration * fps + 1e-9));
}

void StreamScript::validate() const {
    if (!(duration > 0.0) || !std::isfinite(duration)) throw SchemaError("script duration must be > 0");
    if (!(fps > 0.0) || !std::isfinite(fps)) throw SchemaError("script fps must be > 0");
    if (blink_frames < 1) throw SchemaError("blink_frames must be >= 1");
    if (!(patch_noise >= 0.0 && patch_noise <= 60.0)) throw SchemaError("patch_noise must lie in [0, 60]");
    if (!(jitter_sigma.size() == 1 || jitter_sigma.size() == kLandmarkCount))
        throw SchemaError("jitter_sigma needs 1 or 76 entries");
    for (double s : jitter_sigma)
        if (!(s >= 0.0)) throw SchemaError("jitter_sigma must be >= 0");
    check_intervals(yawns, duration, "yawns");
    check_intervals(absences, duration, "absences");
    check_intervals(tracking_loss, duration, "tracking_loss");
    std::vector<Interval> segs;
    for (const auto& s : poses) segs.push_back({s.start, s.end});
    check_intervals(segs, duration, "poses");
    std::vector<Interval> closures;
    for (double b : blinks) {
        if (!(b >= 0.0 && b < duration)) throw SchemaError("blink time outside [0, duration)");
        closures.push_back({b, b + blink_frames / fps});
    }
    check_intervals(closures, duration + static_cast<double>(blink_frames) / fps, "blinks");
}

namespace {

json pose_params_json(const PoseParams& p) {
    return {{"yaw", p.yaw}, {"pitch", p.pitch}, {"roll", p.roll},
            {"t", {p.translation.x(), p.translation.y(), p.translation.z()}}};
}

PoseParams pose_params_from(const json& j) {
    PoseParams p;
    p.yaw = j.value("yaw", 0.0);
    p.pitch = j.value("pitch", 0.0);
    p.roll = j.value("roll", 0.0);
    if (j.contains("t")) {
        const auto t = j.at("t").get<std::vector<double>>();
        if (t.size() != 3) throw SchemaError("pose translation 't' needs 3 entries");
        p.translation = {t[0], t[1], t[2]};
    }
    return p;
}

json intervals_json(const std::vector<Interval>& list) {
    json a = json::array();
    for (const auto& iv : list) a.push_back({iv.start, iv.end});
    return a;
}

std::vector<Interval> intervals_from(const json& j, const char* key) {
    std::vector<Interval> out;
    if (!j.contains(key)) return out;
    for (const auto& e : j.at(key)) {
        const auto v = e.get<std::vector<double>>();
        if (v.size() != 2) throw SchemaError(std::string(key) + ": interval must be [start, end]");
        out.push_back({v[0], v[1]});
    }
    return out;
}

json spans_json(const std::vector<FrameSpan>& list) {
    json a = json::array();
    for (const auto& s : list) a.push_back({s.first, s.last});
    return a;
}

std::vector<FrameSpan> spans_from(const json& j, const char* key) {
    std::vector<FrameSpan> out;
    for (const auto& e : j.at(key)) {
        const auto v = e.get<std::vector<std::size_t>>();
        if (v.size() != 2) throw SchemaError(std::string(key) + ": span must be [first, last)");
        out.push_back({v[0], v[1]});
    }
    return out;
}

}  // namespace

StreamScript script_from_json(std::string_view text) {
    json j = detail::parse_json(text, "stream script");
    StreamScript s;
    try {
        s.duration = j.at("duration").get<double>();
        s.fps = j.value("fps", s.fps);
        if (j.contains("default_pose")) s.default_pose = pose_params_from(j.at("default_pose"));
        if (j.contains("default_label")) s.default_label = pose::pose_class_from_code(j.at("default_label").get<std::string>());
        if (j.contains("poses")) {
            for (const auto& e : j.at("poses")) {
                PoseSegment seg;
                seg.start = e.at("start").get<double>();
                seg.end = e.at("end").get<double>();
                seg.label = pose::pose_class_from_code(e.at("label").get<std::string>());
                seg.from = pose_params_from(e.at("pose"));
                if (e.contains("pose_end")) seg.to = pose_params_from(e.at("pose_end"));
                s.poses.push_back(seg);
            }
        }
        if (j.contains("blinks")) s.blinks = j.at("blinks").get<std::vector<double>>();
        s.yawns = intervals_from(j, "yawns");
        s.absences = intervals_from(j, "absences");
        s.tracking_loss = intervals_from(j, "tracking_loss");
        if (j.contains("jitter_sigma")) {
            const auto& js = j.at("jitter_sigma");
            s.jitter_sigma = js.is_array() ? js.get<std::vector<double>>() : std::vector<double>{js.get<double>()};
        }
        s.blink_frames = j.value("blink_frames", s.blink_frames);
        s.mouth_open = j.value("mouth_open", s.mouth_open);
        s.patch_noise = j.value("patch_noise", s.patch_noise);
    } catch (const json::exception& e) {
        throw SchemaError(std::string("stream script: ") + e.what());
    }
    s.validate();
    return s;
}

std::string to_json(const StreamScript& s) {
    json poses = json::array();
    for (const auto& seg : s.poses) {
        json e = {{"start", seg.start}, {"end", seg.end}, {"label", pose::code(seg.label)},
                  {"pose", pose_params_json(seg.from)}};
        if (seg.to) e["pose_end"] = pose_params_json(*seg.to);
        poses.push_back(std::move(e));
    }
    json j = {{"duration", s.duration},
              {"fps", s.fps},
              {"default_pose", pose_params_json(s.default_pose)},
              {"default_label", pose::code(s.default_label)},
              {"poses", std::move(poses)},
              {"blinks", s.blinks},
              {"yawns", intervals_json(s.yawns)},
              {"absences", intervals_json(s.absences)},
              {"tracking_loss", intervals_json(s.tracking_loss)},
              {"jitter_sigma", s.jitter_sigma},
              {"blink_frames", s.blink_frames},
              {"mouth_open", s.mouth_open},
              {"patch_noise", s.patch_noise}};
    return j.dump(2);
}

std::string to_json(const GroundTruth& g) {
    json poses = json::array();
    for (const auto& p : g.poses) poses.push_back({{"first", p.span.first}, {"last", p.span.last}, {"class", pose::code(p.label)}});
    json j = {{"fps", g.fps},
              {"frame_count", g.frame_count},
              {"blinks", g.blinks},
              {"yawns", spans_json(g.yawns)},
              {"poses", std::move(poses)},
              {"absences", spans_json(g.absences)},
              {"tracking_loss", spans_json(g.tracking_loss)}};
    return j.dump(2);
}

GroundTruth ground_truth_from_json(std::string_view text) {
    json j = detail::parse_json(text, "ground truth");
    GroundTruth g;
    try {
        g.fps = j.at("fps").get<double>();
        g.frame_count = j.at("frame_count").get<std::size_t>();
        g.blinks = j.at("blinks").get<std::vector<std::size_t>>();
        g.yawns = spans_from(j, "yawns");
        g.absences = spans_from(j, "absences");
        g.tracking_loss = j.contains("tracking_loss") ? spans_from(j, "tracking_loss") : std::vector<FrameSpan>{};
        for (const auto& p : j.at("poses"))
            g.poses.push_back({{p.at("first").get<std::size_t>(), p.at("last").get<std::size_t>()},
                               pose::pose_class_from_code(p.at("class").get<std::string>())});
    } catch (const json::exception& e) {
        throw SchemaError(std::string("ground truth: ") + e.what());
    }
    return g;
}

std::array<Eigen::Vector3d, kLandmarkCount> face_model(const pose::RigidTemplate& tmpl) {
    std::array<Eigen::Vector3d, kLandmarkCount> f{};
    // chin 0-14
    for (int k = 0; k <= 14; ++k) {
        const double phi = std::numbers::pi * k / 14.0;
        f[static_cast<std::size_t>(k)] = {-70.0 * std::cos(phi), -5.0 + 85.0 * std::sin(phi), 5.0 + 45.0 * (1.0 - std::sin(phi))};
    }
    // brows 15-20, 21-26
    for (int k = 0; k < 6; ++k) {
        const double s = k / 5.0;
        const double x = 18.0 + 40.0 * s;
        const double y = -62.0 - 6.0 * std::sin(std::numbers::pi * s);
        f[static_cast<std::size_t>(20 - k)] = {-x, y, -5.0 + 0.15 * x};
        f[static_cast<std::size_t>(21 + k)] = {x, y, -5.0 + 0.15 * x};
    }
    // eyes: 27-31 (+68-71) left, 32-36 (+72-75) right; 31 and 36 are pupils
    for (int side = 0; side < 2; ++side) {
        const double sx = side == 0 ? -1.0 : 1.0;
        const std::size_t base = side == 0 ? 27 : 32;
        const std::size_t extra = side == 0 ? 68 : 72;
        f[base + 0] = {sx * 47.0, -45.0, 4.0};
        f[base + 1] = {sx * 31.5, -51.0, -1.0};
        f[base + 2] = {sx * 16.0, -45.0, 2.0};
        f[base + 3] = {sx * 31.5, -40.0, -1.0};
        f[base + 4] = {sx * 31.5, -45.0, 0.0};
        f[extra + 0] = {sx * 39.0, -49.5, 0.0};
        f[extra + 1] = {sx * 24.0, -49.5, 0.0};
        f[extra + 2] = {sx * 24.0, -41.0, 0.0};
        f[extra + 3] = {sx * 39.0, -41.0, 0.0};
    }
    f[37] = {0.0, -56.0, -6.0};
    f[45] = {0.0, -2.0, -14.0};
    // mouth outer 48-59 around (0, 30), inner 60-66
    for (int k = 0; k < 12; ++k) {
        const double a = 2.0 * std::numbers::pi * k / 12.0;
        const double x = -26.0 * std::cos(a);
        f[static_cast<std::size_t>(48 + k)] = {x, 30.0 - 9.0 * std::sin(a), -6.0 + 0.015 * x * x};
    }
    f[60] = {-12.0, 29.0, -5.0};
    f[61] = {0.0, 28.5, -7.0};
    f[62] = {12.0, 29.0, -5.0};
    f[63] = {12.0, 31.0, -5.0};
    f[64] = {0.0, 31.5, -7.0};
    f[65] = {-12.0, 31.0, -5.0};
    f[66] = {0.0, 30.0, -5.0};
    for (std::size_t i = 0; i < pose::kRigidCount; ++i)
        f[static_cast<std::size_t>(landmarks::kRigid[i])] = tmpl.points[i];
    return f;
}

void open_mouth(std::array<Eigen::Vector3d, kLandmarkCount>& face, double amount) {
    auto drop = [&](std::size_t i, double w) { face[i].y() += amount * w; };
    for (std::size_t i = 55; i <= 59; ++i) drop(i, std::max(0.2, 1.0 - std::pow(face[i].x() / 26.0, 2)));
    for (std::size_t i = 63; i <= 65; ++i) drop(i, std::max(0.2, 1.0 - std::pow(face[i].x() / 26.0, 2)));
    drop(66, 0.5);
    for (std::size_t k = 4; k <= 10; ++k) {
        const double phi = std::numbers::pi * static_cast<double>(k) / 14.0;
        drop(k, 0.6 * std::pow(std::sin(phi), 4));
    }
}

std::array<Point2, kLandmarkCount> project_face(const std::array<Eigen::Vector3d, kLandmarkCount>& face,
                                                const pose::Pose& p, const pose::CameraIntrinsics& A) {
    const Eigen::Matrix3d R = p.rotation_matrix();
    std::array<Point2, kLandmarkCount> out{};
    for (std::size_t i = 0; i < kLandmarkCount; ++i) {
        const Eigen::Vector3d pc = R * face[i] + p.translation;
        if (!(pc.z() > 0.0)) throw pose::ProjectionError("face landmark behind the camera");
        out[i] = {A.fx * pc.x() / pc.z() + A.cx, A.fy * pc.y() / pc.z() + A.cy};
    }
    return out;
}

EyePatch make_eye_patch(Point2 center, double level) {
    EyePatch p;
    p.center = center;
    p.width = kEyePatchSize;
    p.height = kEyePatchSize;
    const auto v = static_cast<std::uint8_t>(std::clamp(std::lround(level), 0L, 255L));
    p.pixels.assign(static_cast<std::size_t>(kEyePatchSize * kEyePatchSize), Rgb{v, v, v});
    return p;
}

std::size_t frame_at(double t, double fps) { return static_cast<std::size_t>(std::llround(t * fps)); }

FrameSpan frames_in(const Interval& iv, double fps) {
    auto first_at = [fps](double t) { return static_cast<std::size_t>(std::max(0.0, std::ceil(t * fps - 1e-9))); };
    return {first_at(iv.start), first_at(iv.end)};
}

Simulator::Simulator(StreamScript script, pose::RigidTemplate tmpl, pose::CameraIntrinsics intrinsics,
                     std::uint64_t seed)
    : script_(std::move(script)), tmpl_(tmpl), intrinsics_(intrinsics), rng_(seed) {
    script_.validate();
    tmpl_.validate();
    intrinsics_.validate();
    face_ = face_model(tmpl_);
    for (std::size_t i = 0; i < kLandmarkCount; ++i)
        sigma_[i] = script_.jitter_sigma.size() == 1 ? script_.jitter_sigma[0] : script_.jitter_sigma[i];
    for (double b : script_.blinks) blink_frames_.push_back(frame_at(b, script_.fps));
    std::sort(blink_frames_.begin(), blink_frames_.end());
    std::sort(script_.poses.begin(), script_.poses.end(),
              [](const PoseSegment& a, const PoseSegment& b) { return a.start < b.start; });
    frame_count_ = script_.frame_count();
}

pose::Pose Simulator::pose_at(double t) const {
    for (const auto& seg : script_.poses) {
        if (t < seg.start || t >= seg.end) continue;
        if (!seg.to) return seg.from.to_pose();
        const double s = (t - seg.start) / (seg.end - seg.start);
        PoseParams p;
        p.yaw = seg.from.yaw + s * (seg.to->yaw - seg.from.yaw);
        p.pitch = seg.from.pitch + s * (seg.to->pitch - seg.from.pitch);
        p.roll = seg.from.roll + s * (seg.to->roll - seg.from.roll);
        p.translation = seg.from.translation + s * (seg.to->translation - seg.from.translation);
        return p.to_pose();
    }
    return script_.default_pose.to_pose();
}

pose::PoseClass Simulator::label_at(double t) const {
    for (const auto& seg : script_.poses)
        if (t >= seg.start && t < seg.end) return seg.label;
    return script_.default_label;
}

bool Simulator::absent_at(std::size_t frame) const { return inside_any(script_.absences, time_of(frame)); }
bool Simulator::lost_at(std::size_t frame) const { return inside_any(script_.tracking_loss, time_of(frame)); }
bool Simulator::mouth_open_at(double t) const { return inside_any(script_.yawns, t); }

bool Simulator::eye_closed_at(std::size_t frame) const {
    auto it = std::upper_bound(blink_frames_.begin(), blink_frames_.end(), frame);
    if (it == blink_frames_.begin()) return false;
    --it;
    return frame < *it + static_cast<std::size_t>(script_.blink_frames);
}

void degrade(LandmarkFrame& frame, const std::array<Point2, kLandmarkCount>& clean, std::mt19937_64& rng) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    double cx = 0.0, cy = 0.0;
    for (const auto& q : clean) {
        cx += q.x;
        cy += q.y;
    }
    cx /= static_cast<double>(kLandmarkCount);
    cy /= static_cast<double>(kLandmarkCount);
    for (std::size_t i = 0; i < kLandmarkCount; ++i) {
        const double nx = gauss(rng);
        const double ny = gauss(rng);
        frame.points[i] = {cx + 0.2 * (clean[i].x - cx) + 4.0 * nx, cy + 0.2 * (clean[i].y - cy) + 4.0 * ny};
        frame.responses[i] = 0.3 * unit(rng);
    }
    frame.eyes.reset();
}

LandmarkFrame Simulator::next() {
    if (done()) throw Error("simulator exhausted");
    const std::size_t k = index_++;
    const double t = time_of(k);
    const pose::Pose p = pose_at(t);

    auto face = face_;
    if (mouth_open_at(t)) open_mouth(face, script_.mouth_open);
    clean_ = project_face(face, p, intrinsics_);

    LandmarkFrame frame;
    frame.t = t;
    frame.fps = script_.fps;
    frame.d = p.translation.z();

    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (std::size_t i = 0; i < kLandmarkCount; ++i) {
        const double nx = gauss(rng_);
        const double ny = gauss(rng_);
        frame.points[i] = {clean_[i].x + sigma_[i] * nx, clean_[i].y + sigma_[i] * ny};
    }

    const bool absent = absent_at(k);
    if (absent || lost_at(k)) {
        degrade(frame, clean_, rng_);
        frame.tracked = !absent;
        return frame;
    }

    for (auto& r : frame.responses) r = 0.85 + 0.15 * unit(rng_);
    const double base = eye_closed_at(k) ? kClosedEyeLevel : kOpenEyeLevel;
    const double noise = script_.patch_noise;
    const double left = base + noise * (2.0 * unit(rng_) - 1.0);
    const double right = base + noise * (2.0 * unit(rng_) - 1.0);
    frame.eyes = EyePair{make_eye_patch(frame.points[landmarks::kLeftPupil], left),
                         make_eye_patch(frame.points[landmarks::kRightPupil], right)};
    return frame;
}

GroundTruth Simulator::ground_truth() const {
    GroundTruth g;
    g.fps = script_.fps;
    g.frame_count = frame_count_;
    const double fps = script_.fps;
    auto clamp_span = [&](FrameSpan s) {
        s.first = std::min(s.first, frame_count_);
        s.last = std::min(s.last, frame_count_);
        return s;
    };
    for (std::size_t b : blink_frames_)
        if (b < frame_count_ && !absent_at(b) && !lost_at(b)) g.blinks.push_back(b);
    for (const auto& iv : script_.yawns) g.yawns.push_back(clamp_span(frames_in(iv, fps)));
    for (const auto& iv : script_.absences) g.absences.push_back(clamp_span(frames_in(iv, fps)));
    for (const auto& iv : script_.tracking_loss) g.tracking_loss.push_back(clamp_span(frames_in(iv, fps)));
    std::sort(g.yawns.begin(), g.yawns.end(), [](auto& a, auto& b) { return a.first < b.first; });
    std::sort(g.absences.begin(), g.absences.end(), [](auto& a, auto& b) { return a.first < b.first; });

    std::size_t cursor = 0;
    for (const auto& seg : script_.poses) {
        const FrameSpan s = clamp_span(frames_in({seg.start, seg.end}, fps));
        if (s.first > cursor) g.poses.push_back({{cursor, s.first}, script_.default_label});
        if (s.last > s.first) g.poses.push_back({s, seg.label});
        cursor = std::max(cursor, s.last);
    }
    if (cursor < frame_count_) g.poses.push_back({{cursor, frame_count_}, script_.default_label});
    return g;
}

std::pair<std::vector<LandmarkFrame>, GroundTruth> simulate(const StreamScript& script, const pose::RigidTemplate& tmpl,
                                                             const pose::CameraIntrinsics& intrinsics,
                                                             std::uint64_t seed) {
    Simulator s(script, tmpl, intrinsics, seed);
    std::vector<LandmarkFrame> frames;
    frames.reserve(s.frame_count());
    while (!s.done()) frames.push_back(s.next());
    return {std::move(frames), s.ground_truth()};
}

}  // namespace ergowatch::sim
