#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "ergowatch/config.hpp"
#include "ergowatch/features.hpp"
#include "ergowatch/frame.hpp"
#include "ergowatch/mlkit.hpp"
#include "ergowatch/pose.hpp"
#include "ergowatch/recommend.hpp"
#include "ergowatch/session.hpp"
#include "ergowatch/trackfix.hpp"

namespace ergowatch {

inline constexpr int kSchemaVersion = 1;

/// One line of the event log. `json` is the complete serialized record.
struct Event {
    std::size_t seq = 0;
    double t = 0.0;
    std::string type;  // blink, yawn, recommendation, alarm, period, tracking, feedback
    std::string json;
};

struct PipelineModels {
    mlkit::LinearModel gate;  // empty → trust the frame's tracked flag
    mlkit::MulticlassModel pose;
    features::MouthModel mouth;
    std::optional<trackfix::JitterModel> jitter;  // learned online when absent
};

struct ActiveRecommendation {
    std::uint64_t id = 0;
    recommend::Consequence action = recommend::Consequence::keep_working;
    double f = 0.0;
    std::string rule;
    double since = 0.0;
};

/// Immutable view of the pipeline after a frame.
struct StatusSnapshot {
    double t = 0.0;
    std::size_t frames = 0;
    bool tracked = false;
    pose::PoseClass pose = pose::PoseClass::away;
    double blink_rate = 0.0;  // blinks in the last 60 s, per minute
    int yawns_period = 0;
    double f = 0.0;
    std::optional<ActiveRecommendation> recommendation;
    std::vector<double> weights;
    std::size_t periods_completed = 0;
    std::size_t event_count = 0;
    bool finished = false;
};

std::string to_json(const StatusSnapshot& status);
std::string to_json(const Event& event);

struct FeedbackResult {
    enum class Status { accepted, duplicate, rejected };
    Status status = Status::rejected;
    std::string reason;
    recommend::FeedbackOutcome outcome;
    std::vector<double> weights;
};

std::string_view to_string(FeedbackResult::Status s);

/// Single-threaded orchestration: trackfix → pose → features → recommend →
/// session, one frame at a time.
class Pipeline {
public:
    Pipeline(const PipelineConfig& config, PipelineModels models, pose::RigidTemplate tmpl, recommend::RuleSet rules);

    /// Loads the template, rules and models named by the config; empty model
    /// paths train the built-in models from the simulator.
    static Pipeline from_config(const PipelineConfig& config);

    void process(const LandmarkFrame& frame);
    /// Closes the open period; no frames may follow.
    void finish();

    /// Explicit feedback on the active recommendation. A recommendation_id
    /// that was already used is acknowledged as a duplicate.
    FeedbackResult feedback(recommend::FeedbackAction action, std::optional<std::uint64_t> recommendation_id = {});

    StatusSnapshot status() const;
    const std::vector<Event>& events() const noexcept { return events_; }
    /// Chronological JSON lines.
    std::string event_log() const;
    session::SessionReport report() const { return session_.report(); }
    const std::vector<recommend::FeedbackSample>& feedback_samples() const noexcept { return samples_; }
    const recommend::RuleSet& rules() const noexcept { return learner_.rules(); }

    // Diagnostics.
    const std::optional<LandmarkFrame>& last_filtered() const noexcept { return last_filtered_; }
    const std::optional<pose::Pose>& last_pose() const noexcept { return last_pose_; }
    const std::optional<trackfix::JitterModel>& jitter_model() const noexcept { return jitter_; }
    const session::Session& session() const noexcept { return session_; }
    bool finished() const noexcept { return finished_; }

private:
    void emit(double t, const std::string& type, std::string body);
    void update_recommendation(double t);
    recommend::FeatureSnapshot feature_snapshot(double t) const;

    PipelineConfig config_;
    pose::RigidTemplate tmpl_;
    PipelineModels models_;
    trackfix::FilterOptions filter_options_;
    std::optional<trackfix::JitterModel> jitter_;
    trackfix::TrackState track_;
    trackfix::TrackState gate_state_;
    std::vector<LandmarkFrame> warmup_;
    bool need_anchor_ = true;
    features::BlinkDetector blinks_;
    features::YawnDetector yawns_;
    recommend::FeedbackLearner learner_;
    session::Session session_;

    std::size_t frame_index_ = 0;
    double t_ = 0.0;
    double t_end_ = 0.0;
    bool tracked_ = false;
    bool finished_ = false;
    pose::PoseClass pose_class_ = pose::PoseClass::away;
    std::optional<LandmarkFrame> last_filtered_;
    std::optional<pose::Pose> last_pose_;
    std::deque<double> blink_times_;
    recommend::PremiseScores theta_;
    double f_ = 0.0;
    std::optional<ActiveRecommendation> active_;
    std::uint64_t next_recommendation_id_ = 1;
    std::set<std::uint64_t> answered_;
    std::vector<recommend::FeedbackSample> samples_;
    std::vector<Event> events_;
    std::size_t periods_seen_ = 0;
};

}  // namespace ergowatch
