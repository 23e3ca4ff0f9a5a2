#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ergowatch/pose.hpp"

namespace ergowatch::session {

enum class StatusLabel { absent, normal, bad_pose, potential_fatigue };

std::string_view to_string(StatusLabel s);
StatusLabel status_from_string(std::string_view s);

struct SessionParams {
    double period_length = 600.0;    // seconds
    double absent_below = 0.2;       // presentFraction threshold
    int fatigue_yawns = 3;           // absolute yawn count
    double fatigue_ratio = 2.0;      // relative to trailing mean
    int fatigue_ratio_min_yawns = 2; // relative rule needs at least this many
    std::size_t trailing_periods = 3;
    double bad_pose_above = 0.5;     // non-C2 share
    double bad_pose_alarm_minutes = 10.0;
    double work_alarm_minutes = 30.0;
    double break_reset_seconds = 60.0;
    double good_pose_reset_seconds = 10.0;
};

/// Per-frame input to the aggregation: dt is the frame's time weight (1/fps).
struct FrameObservation {
    double t = 0.0;
    double dt = 0.0;
    bool present = false;
    pose::PoseClass pose = pose::PoseClass::away;
};

struct PeriodStats {
    std::size_t index = 0;
    double start = 0.0;
    double end = 0.0;
    int blinks = 0;
    int yawns = 0;
    std::array<double, 5> pose_proportion{};  // C1..C5, sums to 1 when present
    double present_fraction = 0.0;
    StatusLabel status = StatusLabel::absent;

    double non_correct_fraction() const noexcept { return present_fraction > 0.0 ? 1.0 - pose_proportion[1] : 0.0; }
};

class PeriodAccumulator {
public:
    PeriodAccumulator(std::size_t index, double start, double length);

    void add(const FrameObservation& obs);
    void add_blink() noexcept { ++blinks_; }
    void add_yawn() noexcept { ++yawns_; }

    std::size_t index() const noexcept { return index_; }
    double start() const noexcept { return start_; }
    int yawns() const noexcept { return yawns_; }
    int blinks() const noexcept { return blinks_; }

    /// Status is left as absent; predict_status assigns it. `covered` caps
    /// the period length when the session ends inside it.
    PeriodStats stats(std::optional<double> covered = std::nullopt) const;

private:
    std::size_t index_;
    double start_;
    double length_;
    double present_time_ = 0.0;
    std::array<double, 5> pose_time_{};
    int blinks_ = 0;
    int yawns_ = 0;
};

/// One-shot aggregation of a period's frames and event times.
PeriodStats accumulate(std::size_t index, double start, double length, std::span<const FrameObservation> frames,
                       std::span<const double> blink_times, std::span<const double> yawn_times,
                       std::span<const PeriodStats> history = {}, const SessionParams& params = {});

/// Priority absent > potential-fatigue > bad-pose > normal.
StatusLabel predict_status(const PeriodStats& stats, std::span<const PeriodStats> history,
                           const SessionParams& params = {});

struct Alarm {
    enum class Kind { bad_pose, continuous_work };
    Kind kind = Kind::continuous_work;
    double t = 0.0;
    double minutes = 0.0;  // timer value when fired
};

std::string_view to_string(Alarm::Kind k);

/// Continuous-work and continuous-bad-pose timers that span period bounds.
class AlarmTimers {
public:
    explicit AlarmTimers(const SessionParams& params = {}) : params_(params) {}

    std::vector<Alarm> update(const FrameObservation& obs);

    double work_minutes() const noexcept { return work_s_ / 60.0; }
    double bad_pose_minutes() const noexcept { return bad_s_ / 60.0; }

private:
    SessionParams params_;
    double work_s_ = 0.0;
    double bad_s_ = 0.0;
    double absent_run_s_ = 0.0;
    double good_run_s_ = 0.0;
    bool work_fired_ = false;
    bool bad_fired_ = false;
};

inline std::vector<Alarm> check_alarms(AlarmTimers& timers, const FrameObservation& obs) { return timers.update(obs); }

struct SessionReport {
    double period_length = 600.0;
    std::vector<PeriodStats> periods;
    std::vector<Alarm> alarms;
};

/// Live accumulation: frames must arrive in time order; events belong to the
/// period containing their timestamp (half-open periods from session start).
class Session {
public:
    explicit Session(const SessionParams& params = {});

    std::vector<Alarm> observe(const FrameObservation& obs);
    void blink(double t);
    void yawn(double t);
    /// Finalizes the open period; t_end marks the end of the last frame.
    void close(double t_end);

    const SessionParams& params() const noexcept { return params_; }
    const std::vector<PeriodStats>& periods() const noexcept { return periods_; }
    const std::vector<Alarm>& alarms() const noexcept { return alarms_; }
    const AlarmTimers& timers() const noexcept { return timers_; }
    int current_yawns() const noexcept { return current_ ? current_->yawns() : 0; }
    /// Non-C2 share of the last completed period (0 before any).
    double last_bad_pose_fraction() const noexcept;
    SessionReport report() const;

private:
    void roll_to(double t);
    void finalize_current(std::optional<double> covered);

    SessionParams params_;
    std::optional<double> origin_;
    std::optional<PeriodAccumulator> current_;
    std::vector<PeriodStats> periods_;
    std::vector<Alarm> alarms_;
    AlarmTimers timers_;
    bool closed_ = false;
};

std::string report_json(const SessionReport& report);
std::string report_csv(const SessionReport& report);
/// Fixed-width text rendering of the two report panels.
std::string report_text(const SessionReport& report);
SessionReport report_from_json(std::string_view text);

/// Writes report.json and report.csv into `dir` (created if missing).
void render_report(const SessionReport& report, const std::filesystem::path& dir);

}  // namespace ergowatch::session
