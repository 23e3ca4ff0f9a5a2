#include "ergowatch/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "ergowatch/error.hpp"
#include "ergowatch/training.hpp"
#include "json_util.hpp"

namespace ergowatch {

using nlohmann::json;

namespace {

std::string_view recommendation_text(recommend::Consequence c) {
    switch (c) {
    case recommend::Consequence::take_break: return "Take a break";
    case recommend::Consequence::raise_alarm: return "Signs of fatigue: stop and rest";
    case recommend::Consequence::adjust_posture: return "Adjust your posture";
    case recommend::Consequence::keep_working: return "Keep working";
    }
    return "";
}

std::vector<double> to_vector(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

json recommendation_json(const ActiveRecommendation& r) {
    return {{"id", r.id},
            {"action", recommend::to_string(r.action)},
            {"text", recommendation_text(r.action)},
            {"f", r.f},
            {"rule", r.rule},
            {"since", r.since}};
}

session::SessionParams session_params(const PipelineConfig& c) {
    session::SessionParams p;
    p.period_length = c.period_length;
    p.work_alarm_minutes = c.work_alarm_minutes;
    p.bad_pose_alarm_minutes = c.bad_pose_alarm_minutes;
    return p;
}

features::BlinkParams blink_params(const PipelineConfig& c) {
    features::BlinkParams p;
    p.c_t = c.c_t;
    p.w_i = c.w_i;
    p.h_i = c.h_i;
    return p;
}

recommend::RuleSet configured(recommend::RuleSet rules, const PipelineConfig& c) {
    rules.alpha = c.adaptation_alpha;
    rules.batch_size = static_cast<std::size_t>(c.feedback_batch);
    rules.validate();
    return rules;
}

constexpr double kColdResolvePixels = 5.0;

}  // namespace

std::string_view to_string(FeedbackResult::Status s) {
    switch (s) {
    case FeedbackResult::Status::accepted: return "accepted";
    case FeedbackResult::Status::duplicate: return "duplicate";
    case FeedbackResult::Status::rejected: return "rejected";
    }
    return "";
}

std::string to_json(const StatusSnapshot& s) {
    json j = {{"schema_version", kSchemaVersion},
              {"t", s.t},
              {"frames", s.frames},
              {"tracked", s.tracked},
              {"pose", {{"class", pose::code(s.pose)}, {"label", pose::description(s.pose)}}},
              {"blink_rate", s.blink_rate},
              {"yawns_period", s.yawns_period},
              {"f", s.f},
              {"recommendation", s.recommendation ? recommendation_json(*s.recommendation) : json(nullptr)},
              {"weights", s.weights},
              {"periods_completed", s.periods_completed},
              {"events", s.event_count},
              {"finished", s.finished}};
    return j.dump();
}

std::string to_json(const Event& e) { return e.json; }

Pipeline::Pipeline(const PipelineConfig& config, PipelineModels models, pose::RigidTemplate tmpl,
                   recommend::RuleSet rules)
    : config_(config),
      tmpl_(tmpl),
      models_(std::move(models)),
      blinks_(30.0, blink_params(config)),
      yawns_(config.t_t),
      learner_(configured(std::move(rules), config)),
      session_(session_params(config)) {
    tmpl_.validate();
    config_.intrinsics.validate();
    filter_options_.mode = config_.suppression == "hold" ? trackfix::Suppression::hold : trackfix::Suppression::average;
    if (!models_.gate.empty()) gate_state_.set_gate_model(models_.gate);
    if (models_.jitter) {
        jitter_ = *models_.jitter;
        track_ = trackfix::TrackState(*jitter_, filter_options_);
    }
}

Pipeline Pipeline::from_config(const PipelineConfig& config) {
    config.validate();
    const pose::RigidTemplate tmpl = config.template_path.empty()
                                         ? pose::RigidTemplate::canonical()
                                         : pose::template_from_json(detail::read_file(config.template_path));
    recommend::RuleSet rules = config.rules.empty() ? recommend::RuleSet::defaults()
                                                    : recommend::rule_set_from_json(detail::read_file(config.rules));
    training::TrainOptions opts;
    opts.seed = config.seed;
    PipelineModels models;
    models.gate = config.gate_model.empty() ? training::train_gate(tmpl, config.intrinsics, opts)
                                            : mlkit::linear_model_from_json(detail::read_file(config.gate_model));
    models.pose = config.pose_model.empty() ? training::train_pose(tmpl, config.intrinsics, opts)
                                            : mlkit::multiclass_model_from_json(detail::read_file(config.pose_model));
    models.mouth = config.mouth_model.empty()
                       ? training::train_mouth(tmpl, config.intrinsics, opts, config.mouth_raw)
                       : features::mouth_model_from_json(detail::read_file(config.mouth_model));
    if (!config.jitter_model.empty())
        models.jitter = trackfix::jitter_model_from_json(detail::read_file(config.jitter_model));
    return Pipeline(config, std::move(models), tmpl, std::move(rules));
}

void Pipeline::emit(double t, const std::string& type, std::string body) {
    json j = json::parse(body);
    j["seq"] = events_.size();
    j["type"] = type;
    j["t"] = t;
    events_.push_back({events_.size(), t, type, j.dump()});
}

void Pipeline::process(const LandmarkFrame& frame) {
    if (finished_) throw Error("pipeline already finished");
    validate(frame);
    if (frame_index_ == 0) blinks_ = features::BlinkDetector(frame.fps, blink_params(config_));
    const double t = frame.t;
    const double dt = 1.0 / frame.fps;
    t_ = t;
    t_end_ = t + dt;

    const trackfix::GateStatus gate = gate_state_.gate_trained()
                                          ? gate_state_.update_gate(frame)
                                          : (frame.tracked ? trackfix::GateStatus::tracked : trackfix::GateStatus::lost);
    const bool present = gate == trackfix::GateStatus::tracked;
    if (frame_index_ == 0 ? !present : present != tracked_)
        emit(t, "tracking", json{{"status", present ? "tracked" : "lost"}, {"frame", frame_index_}}.dump());

    if (present) {
        LandmarkFrame filtered = frame;
        if (!jitter_) {
            warmup_.push_back(frame);
            const auto need = static_cast<std::size_t>(std::max(2.0, std::ceil(0.5 * frame.fps)));
            if (warmup_.size() >= need) {
                jitter_ = trackfix::learn_jitter(warmup_, config_.jitter_alpha);
                track_ = trackfix::TrackState(*jitter_, filter_options_);
                track_.reset_to_mean(warmup_);
                need_anchor_ = false;
                warmup_.clear();
            }
        } else {
            if (need_anchor_ || !tracked_) track_.reset(frame);
            need_anchor_ = false;
            filtered = track_.filter_frame(frame);
        }

        const auto pts = pose::rigid_points(filtered);
        std::optional<pose::Pose> estimate;
        auto solve = [&](const std::optional<pose::Pose>& init) -> std::optional<pose::Pose> {
            try {
                return pose::solve_pnp(pts, tmpl_, config_.intrinsics, init);
            } catch (const pose::NoConvergence& e) {
                return e.best();
            } catch (const Error&) {
                return std::nullopt;
            }
        };
        if (tracked_ && last_pose_) estimate = solve(last_pose_);
        if (!estimate || estimate->reprojection_error > kColdResolvePixels) {
            auto cold = solve(std::nullopt);
            if (cold && (!estimate || cold->reprojection_error < estimate->reprojection_error)) estimate = cold;
        }
        if (estimate) {
            last_pose_ = estimate;
            pose_class_ = pose::classify_pose(models_.pose, pose::pose_features(*estimate, tmpl_));
        }
        last_filtered_ = filtered;

        if (auto blink = blinks_.update(frame_index_, t, frame.eyes, frame.d)) {
            blink_times_.push_back(t);
            session_.blink(t);
            emit(t, "blink", json{{"frame", blink->frame}, {"eye", features::to_string(blink->eye)}}.dump());
        }
        const auto mouth = features::classify_mouth(models_.mouth, filtered);
        if (auto yawn = yawns_.update(mouth, t)) {
            session_.yawn(t);
            emit(t, "yawn", json{{"duration", yawn->duration}}.dump());
        }
    } else {
        pose_class_ = pose::PoseClass::away;
        blinks_.update(frame_index_, t, std::nullopt, frame.d);
        yawns_.reset();
        need_anchor_ = true;
    }
    tracked_ = present;

    for (const auto& alarm : session_.observe({t, dt, present, pose_class_}))
        emit(alarm.t, "alarm", json{{"kind", session::to_string(alarm.kind)}, {"minutes", alarm.minutes}}.dump());
    const auto& periods = session_.periods();
    for (; periods_seen_ < periods.size(); ++periods_seen_) {
        const auto& p = periods[periods_seen_];
        emit(t, "period",
             json{{"index", p.index}, {"status", session::to_string(p.status)}, {"blinks", p.blinks}, {"yawns", p.yawns}}
                 .dump());
    }

    update_recommendation(t);
    ++frame_index_;
}

recommend::FeatureSnapshot Pipeline::feature_snapshot(double t) const {
    const auto recent = std::count_if(blink_times_.begin(), blink_times_.end(), [t](double b) { return b > t - 60.0; });
    recommend::FeatureSnapshot s;
    s.emplace(recommend::feature_id::work_minutes, session_.timers().work_minutes());
    s.emplace(recommend::feature_id::bad_pose_minutes, session_.timers().bad_pose_minutes());
    s.emplace(recommend::feature_id::yawns_period, session_.current_yawns());
    s.emplace(recommend::feature_id::bad_pose_fraction, session_.last_bad_pose_fraction());
    s.emplace(recommend::feature_id::blink_rate, static_cast<double>(recent));
    return s;
}

void Pipeline::update_recommendation(double t) {
    while (!blink_times_.empty() && blink_times_.front() <= t - 60.0) blink_times_.pop_front();
    const auto& rules = learner_.rules();
    theta_ = recommend::eval_premises(rules, feature_snapshot(t));
    const auto xi = recommend::normalized_strengths(theta_);
    std::optional<recommend::Recommendation> rec;
    if (xi) {
        f_ = rules.weights().dot(*xi);
        rec = recommend::decide(rules, f_, *xi);
    } else {
        f_ = 0.0;
    }
    if (rec && rec->alert) {
        if (!active_ || active_->action != rec->action) {
            ActiveRecommendation a;
            a.id = next_recommendation_id_++;
            a.action = rec->action;
            a.rule = rec->dominant_rule ? rules.rules[*rec->dominant_rule].name : "";
            a.since = t;
            a.f = f_;
            active_ = a;
            emit(t, "recommendation", json{{"recommendation", recommendation_json(a)}}.dump());
        }
        active_->f = f_;
    } else if (active_) {
        emit(t, "recommendation", json{{"recommendation", nullptr}, {"cleared", active_->id}}.dump());
        active_.reset();
    }
}

void Pipeline::finish() {
    if (finished_) return;
    finished_ = true;
    if (frame_index_ == 0) return;
    session_.close(t_end_);
    const auto& periods = session_.periods();
    for (; periods_seen_ < periods.size(); ++periods_seen_) {
        const auto& p = periods[periods_seen_];
        emit(t_end_, "period",
             json{{"index", p.index}, {"status", session::to_string(p.status)}, {"blinks", p.blinks}, {"yawns", p.yawns}}
                 .dump());
    }
}

FeedbackResult Pipeline::feedback(recommend::FeedbackAction action, std::optional<std::uint64_t> recommendation_id) {
    FeedbackResult r;
    if (recommendation_id && answered_.count(*recommendation_id)) {
        r.status = FeedbackResult::Status::duplicate;
        r.reason = "feedback for this recommendation was already recorded";
        r.weights = to_vector(learner_.rules().weights());
        return r;
    }
    if (!active_ || (recommendation_id && *recommendation_id != active_->id)) {
        r.outcome = learner_.feedback(action, theta_, t_, false);
        r.status = FeedbackResult::Status::rejected;
        r.reason = active_ ? "recommendation is no longer active" : "no active recommendation";
        r.weights = to_vector(learner_.rules().weights());
        return r;
    }
    r.outcome = learner_.feedback(action, theta_, t_, true);
    r.status = FeedbackResult::Status::accepted;
    answered_.insert(active_->id);
    if (r.outcome.sample) samples_.push_back(*r.outcome.sample);
    r.weights = to_vector(learner_.rules().weights());
    json body = {{"action", recommend::to_string(action)},
                 {"recommendation_id", active_->id},
                 {"refit", r.outcome.refit},
                 {"weights", r.weights}};
    if (r.outcome.b_star) body["b_star"] = to_vector(*r.outcome.b_star);
    emit(t_, "feedback", body.dump());
    if (r.outcome.refit) update_recommendation(t_);
    return r;
}

StatusSnapshot Pipeline::status() const {
    StatusSnapshot s;
    s.t = t_;
    s.frames = frame_index_;
    s.tracked = tracked_;
    s.pose = pose_class_;
    s.blink_rate = static_cast<double>(
        std::count_if(blink_times_.begin(), blink_times_.end(), [this](double b) { return b > t_ - 60.0; }));
    s.yawns_period = session_.current_yawns();
    s.f = f_;
    s.recommendation = active_;
    s.weights = to_vector(learner_.rules().weights());
    s.periods_completed = session_.periods().size();
    s.event_count = events_.size();
    s.finished = finished_;
    return s;
}

std::string Pipeline::event_log() const {
    std::string out;
    for (const auto& e : events_) {
        out += e.json;
        out += '\n';
    }
    return out;
}

}  // namespace ergowatch
