#include "ergowatch/trackfix.hpp"

#include <cmath>

#include "ergowatch/error.hpp"
#include "json_util.hpp"

namespace ergowatch::trackfix {

using nlohmann::json;

void JitterModel::set_alpha(double a) {
    if (!(a > 0.0 && a <= kMaxDensity))
        throw SchemaError("jitter alpha must lie in (0, 1/sqrt(2*pi)]");
    alpha = a;
    // φ(x) = α  ⇔  x = ±sqrt(-2 ln(α sqrt(2π)))
    const double arg = -2.0 * std::log(a / kMaxDensity);
    x2 = arg > 0.0 ? std::sqrt(arg) : 0.0;
    x1 = -x2;
    in_band_mass = mlkit::std_normal(x2).cdf - mlkit::std_normal(x1).cdf;
}

JitterModel learn_jitter(std::span<const LandmarkFrame> still_frames, double alpha) {
    if (still_frames.empty()) throw SchemaError("jitter learning needs frames");
    const double fps = still_frames.front().fps;
    const auto needed = static_cast<std::size_t>(std::ceil(0.5 * fps - 1e-9));
    if (still_frames.size() < std::max<std::size_t>(needed, 2))
        throw SchemaError("jitter learning needs at least " + std::to_string(std::max<std::size_t>(needed, 2)) +
                          " still frames (0.5 s), got " + std::to_string(still_frames.size()));
    JitterModel model;
    model.set_alpha(alpha);

    const std::size_t m = still_frames.size() - 1;
    for (std::size_t i = 0; i < kLandmarkCount; ++i) {
        double sum = 0.0;
        for (std::size_t k = 1; k <= m; ++k) {
            const Point2& a = still_frames[k].points[i];
            const Point2& b = still_frames[k - 1].points[i];
            sum += std::hypot(a.x - b.x, a.y - b.y);
        }
        const double mu = sum / static_cast<double>(m);
        double ss = 0.0;
        for (std::size_t k = 1; k <= m; ++k) {
            const Point2& a = still_frames[k].points[i];
            const Point2& b = still_frames[k - 1].points[i];
            const double dev = std::hypot(a.x - b.x, a.y - b.y) - mu;
            ss += dev * dev;
        }
        model.mu[i] = mu;
        model.var[i] = ss / static_cast<double>(m);
    }
    return model;
}

OffsetClass classify_offset(const JitterModel& model, std::size_t landmark, double offset) {
    if (landmark >= kLandmarkCount) throw DimensionError("landmark index out of range");
    const double mu = model.mu[landmark];
    const double var = model.var[landmark];
    if (var <= 0.0) return offset == mu ? OffsetClass::jitter : OffsetClass::movement;
    const double z = (offset - mu) / std::sqrt(var);
    return (z >= model.x1 && z <= model.x2) ? OffsetClass::jitter : OffsetClass::movement;
}

std::string to_json(const JitterModel& model) {
    return json{{"format_version", 1}, {"mu", model.mu}, {"var", model.var}, {"alpha", model.alpha}}.dump(2);
}

JitterModel jitter_model_from_json(std::string_view text) {
    json j = detail::parse_json(text, "jitter model");
    JitterModel model;
    try {
        const auto mu = j.at("mu").get<std::vector<double>>();
        const auto var = j.at("var").get<std::vector<double>>();
        if (mu.size() != kLandmarkCount || var.size() != kLandmarkCount)
            throw SchemaError("jitter model needs 76 mu and 76 var entries");
        for (std::size_t i = 0; i < kLandmarkCount; ++i) {
            if (!(var[i] >= 0.0)) throw SchemaError("jitter variance must be >= 0");
            model.mu[i] = mu[i];
            model.var[i] = var[i];
        }
        model.set_alpha(j.at("alpha").get<double>());
    } catch (const json::exception& e) {
        throw SchemaError(std::string("jitter model: ") + e.what());
    }
    return model;
}

Eigen::VectorXd reinit_feature(const LandmarkFrame& frame) {
    double cx = 0.0, cy = 0.0;
    for (const auto& p : frame.points) {
        cx += p.x;
        cy += p.y;
    }
    cx /= static_cast<double>(kLandmarkCount);
    cy /= static_cast<double>(kLandmarkCount);
    Eigen::VectorXd f(static_cast<Eigen::Index>(kReinitFeatureDim));
    for (std::size_t i = 0; i < kLandmarkCount; ++i) {
        const auto k = static_cast<Eigen::Index>(3 * i);
        f[k] = frame.responses[i];
        f[k + 1] = frame.points[i].x - cx;
        f[k + 2] = frame.points[i].y - cy;
    }
    return f;
}

TrackState::TrackState(JitterModel model, FilterOptions options) : model_(model), options_(options) {
    if (options_.average_window < 1) options_.average_window = 1;
}

void TrackState::reset(const LandmarkFrame& anchor) {
    previous_ = anchor;
    run_length_.fill(1);
    last_classes_.fill(OffsetClass::jitter);
}

void TrackState::reset_to_mean(std::span<const LandmarkFrame> still_frames) {
    if (still_frames.empty()) throw SchemaError("cannot anchor on an empty sequence");
    LandmarkFrame anchor = still_frames.back();
    for (std::size_t i = 0; i < kLandmarkCount; ++i) {
        double x = 0.0, y = 0.0;
        for (const auto& f : still_frames) {
            x += f.points[i].x;
            y += f.points[i].y;
        }
        anchor.points[i] = {x / static_cast<double>(still_frames.size()), y / static_cast<double>(still_frames.size())};
    }
    reset(anchor);
    run_length_.fill(static_cast<int>(std::min<std::size_t>(still_frames.size(), static_cast<std::size_t>(options_.average_window))));
}

LandmarkFrame TrackState::filter_frame(const LandmarkFrame& frame) {
    if (!previous_) {
        reset(frame);
        return frame;
    }
    LandmarkFrame out = frame;
    for (std::size_t i = 0; i < kLandmarkCount; ++i) {
        const Point2& prev = previous_->points[i];
        const Point2& raw = frame.points[i];
        const double offset = std::hypot(raw.x - prev.x, raw.y - prev.y);
        const OffsetClass cls = classify_offset(model_, i, offset);
        last_classes_[i] = cls;
        if (cls == OffsetClass::movement) {
            run_length_[i] = 1;
            continue;
        }
        if (options_.mode == Suppression::hold) {
            out.points[i] = prev;
        } else {
            run_length_[i] = std::min(run_length_[i] + 1, options_.average_window);
            const double w = 1.0 / run_length_[i];
            out.points[i] = {prev.x + w * (raw.x - prev.x), prev.y + w * (raw.y - prev.y)};
        }
    }
    previous_ = out;
    return out;
}

GateStatus TrackState::gate(const Eigen::VectorXd& feature) const {
    if (!gate_trained()) throw UntrainedError("tracking gate is untrained");
    return mlkit::predict(*gate_, feature).score < 0.0 ? GateStatus::lost : GateStatus::tracked;
}

GateStatus TrackState::update_gate(const LandmarkFrame& frame) {
    const GateStatus raw = gate(reinit_feature(frame));
    status_ = (frame.tracked && raw == GateStatus::tracked) ? GateStatus::tracked : GateStatus::lost;
    return status_;
}

}  // namespace ergowatch::trackfix
