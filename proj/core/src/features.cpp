#include "ergowatch/features.hpp"

#include <algorithm>
#include <cmath>

#include "ergowatch/error.hpp"
#include "json_util.hpp"

namespace ergowatch::features {

using nlohmann::json;

EyeDetector::EyeDetector(double frame_rate, const BlinkParams& params) : params_(params), r_f_(frame_rate) {
    if (!(frame_rate > 0.0)) throw ConfigError("frame rate must be > 0");
    if (!(params.c_t > 0.0)) throw ConfigError("C_t must be > 0");
    if (!(params.w_i > 0.0) || !(params.h_i > 0.0)) throw ConfigError("w_i and h_i must be > 0");
}

double patch_mean_color(const EyePatch& patch, int w_p, int h_p) {
    w_p = std::clamp(w_p, 1, patch.width);
    h_p = std::clamp(h_p, 1, patch.height);
    const int c0 = (patch.width - w_p) / 2;
    const int r0 = (patch.height - h_p) / 2;
    double sum = 0.0;
    for (int r = r0; r < r0 + h_p; ++r) {
        for (int c = c0; c < c0 + w_p; ++c) {
            const Rgb& p = patch.at(r, c);
            sum += static_cast<double>(p.r) + p.g + p.b;
        }
    }
    return sum / static_cast<double>(w_p * h_p);
}

EyeStateResult EyeDetector::update(const EyePatch* patch, double d) {
    EyeStateResult out;
    if (patch == nullptr || patch->pixels.empty()) {
        out.data_gap = true;
        return out;
    }
    if (!(d > 0.0)) throw SchemaError("face distance must be > 0");
    const int w_p = std::max(1, static_cast<int>(std::lround(params_.w_i / d)));
    const int h_p = std::max(1, static_cast<int>(std::lround(params_.h_i / d)));
    const double c = patch_mean_color(*patch, w_p, h_p);

    ++frame_count_;
    ec_ = (ec_ * r_f_ + c) / (r_f_ + 1.0);
    var_c_ = (var_c_ * r_f_ + (c - ec_) * (c - ec_)) / (r_f_ + 1.0);
    out.mean_color = c;
    out.normalized = var_c_ > 0.0 ? (c - ec_) / std::sqrt(var_c_) : 0.0;

    if (static_cast<double>(frame_count_) <= r_f_) return out;  // initialization, no outcome
    out.state = out.normalized < params_.c_t ? EyeState::open : EyeState::closed;
    return out;
}

bool detect_blink(EyeState prev, EyeState next) { return prev == EyeState::open && next == EyeState::closed; }

std::string_view to_string(BlinkEvent::Eye eye) {
    switch (eye) {
        case BlinkEvent::Eye::left: return "left";
        case BlinkEvent::Eye::right: return "right";
        case BlinkEvent::Eye::both: return "both";
    }
    return "both";
}

BlinkDetector::BlinkDetector(double frame_rate, const BlinkParams& params)
    : params_(params), left_(frame_rate, params), right_(frame_rate, params) {}

std::optional<BlinkEvent> BlinkDetector::update(std::size_t frame, double t, const std::optional<EyePair>& eyes,
                                                double d) {
    if (!eyes) return std::nullopt;
    const EyeStateResult l = left_.update(&eyes->left, d);
    const EyeStateResult r = right_.update(&eyes->right, d);
    const bool left_closed = detect_blink(prev_left_, l.state);
    const bool right_closed = detect_blink(prev_right_, r.state);
    if (l.state != EyeState::indeterminate) prev_left_ = l.state;
    if (r.state != EyeState::indeterminate) prev_right_ = r.state;
    if (!left_closed && !right_closed) return std::nullopt;

    if (last_blink_frame_ && frame - *last_blink_frame_ <= static_cast<std::size_t>(params_.refractory_frames))
        return std::nullopt;
    last_blink_frame_ = frame;
    BlinkEvent ev;
    ev.frame = frame;
    ev.t = t;
    ev.eye = left_closed && right_closed ? BlinkEvent::Eye::both
             : left_closed               ? BlinkEvent::Eye::left
                                         : BlinkEvent::Eye::right;
    return ev;
}

Eigen::VectorXd mouth_feature(const LandmarkFrame& frame, bool raw_coordinates) {
    Eigen::VectorXd f(static_cast<Eigen::Index>(kMouthFeatureDim));
    double cx = 0.0, cy = 0.0;
    for (int i = landmarks::kMouthFirst; i <= landmarks::kMouthLast; ++i) {
        cx += frame.points[static_cast<std::size_t>(i)].x;
        cy += frame.points[static_cast<std::size_t>(i)].y;
    }
    cx /= landmarks::kMouthCount;
    cy /= landmarks::kMouthCount;
    const Point2& pl = frame.points[landmarks::kLeftPupil];
    const Point2& pr = frame.points[landmarks::kRightPupil];
    double scale = std::hypot(pl.x - pr.x, pl.y - pr.y);
    if (!(scale > 1e-9)) scale = 1.0;
    for (int i = 0; i < landmarks::kMouthCount; ++i) {
        const Point2& p = frame.points[static_cast<std::size_t>(landmarks::kMouthFirst + i)];
        if (raw_coordinates) {
            f[2 * i] = p.x;
            f[2 * i + 1] = p.y;
        } else {
            f[2 * i] = (p.x - cx) / scale;
            f[2 * i + 1] = (p.y - cy) / scale;
        }
    }
    return f;
}

MouthState classify_mouth(const MouthModel& model, const LandmarkFrame& frame) {
    if (model.model.empty()) throw UntrainedError("mouth classifier is untrained");
    const auto p = mlkit::predict(model.model, mouth_feature(frame, model.raw_coordinates));
    return p.score > 0.0 ? MouthState::open : MouthState::closed;
}

YawnDetector::YawnDetector(double t_t) : t_t_(t_t) {
    if (!(t_t > 0.0)) throw ConfigError("t_t must be > 0");
}

std::optional<YawnEvent> YawnDetector::update(MouthState mouth, double t) {
    if (mouth == MouthState::closed) {
        reset();
        return std::nullopt;
    }
    if (!open_since_) open_since_ = t;
    const double open_for = t - *open_since_;
    // Frame times are k / fps, so allow rounding slack on the boundary.
    if (!latched_ && open_for >= t_t_ - 1e-9) {
        latched_ = true;
        return YawnEvent{t, open_for};
    }
    return std::nullopt;
}

void YawnDetector::reset() noexcept {
    open_since_.reset();
    latched_ = false;
}

std::string to_json(const MouthModel& model) {
    json j = json::parse(mlkit::to_json(model.model));
    j["raw_coordinates"] = model.raw_coordinates;
    return j.dump(2);
}

MouthModel mouth_model_from_json(std::string_view text) {
    MouthModel m;
    m.model = mlkit::linear_model_from_json(text);
    if (m.model.dim() != kMouthFeatureDim) throw SchemaError("mouth model must have dimension 38");
    json j = detail::parse_json(text, "mouth model");
    m.raw_coordinates = j.value("raw_coordinates", false);
    return m;
}

}  // namespace ergowatch::features
