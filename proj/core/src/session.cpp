#include "ergowatch/session.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "ergowatch/error.hpp"
#include "json_util.hpp"

namespace ergowatch::session {

using nlohmann::json;

std::string_view to_string(StatusLabel s) {
    switch (s) {
        case StatusLabel::absent: return "absent";
        case StatusLabel::normal: return "normal";
        case StatusLabel::bad_pose: return "bad-pose";
        case StatusLabel::potential_fatigue: return "potential-fatigue";
    }
    return "absent";
}

StatusLabel status_from_string(std::string_view s) {
    for (auto l : {StatusLabel::absent, StatusLabel::normal, StatusLabel::bad_pose, StatusLabel::potential_fatigue})
        if (to_string(l) == s) return l;
    throw SchemaError("unknown status '" + std::string(s) + "'");
}

std::string_view to_string(Alarm::Kind k) { return k == Alarm::Kind::bad_pose ? "bad-pose" : "continuous-work"; }

PeriodAccumulator::PeriodAccumulator(std::size_t index, double start, double length)
    : index_(index), start_(start), length_(length) {}

void PeriodAccumulator::add(const FrameObservation& obs) {
    if (!obs.present) return;
    present_time_ += obs.dt;
    pose_time_[static_cast<std::size_t>(pose::index_of(obs.pose))] += obs.dt;
}

PeriodStats PeriodAccumulator::stats(std::optional<double> covered) const {
    PeriodStats s;
    s.index = index_;
    s.start = start_;
    const double length = covered ? std::clamp(*covered, 0.0, length_) : length_;
    s.end = start_ + length_;
    s.blinks = blinks_;
    s.yawns = yawns_;
    if (present_time_ > 0.0) {
        for (std::size_t c = 0; c < 5; ++c) s.pose_proportion[c] = pose_time_[c] / present_time_;
        s.present_fraction = length > 0.0 ? std::min(1.0, present_time_ / length) : 0.0;
    }
    s.status = StatusLabel::absent;
    return s;
}

PeriodStats accumulate(std::size_t index, double start, double length, std::span<const FrameObservation> frames,
                       std::span<const double> blink_times, std::span<const double> yawn_times,
                       std::span<const PeriodStats> history, const SessionParams& params) {
    PeriodAccumulator acc(index, start, length);
    auto inside = [&](double t) { return t >= start && t < start + length; };
    for (const auto& f : frames)
        if (inside(f.t)) acc.add(f);
    for (double t : blink_times)
        if (inside(t)) acc.add_blink();
    for (double t : yawn_times)
        if (inside(t)) acc.add_yawn();
    PeriodStats s = acc.stats();
    s.status = predict_status(s, history, params);
    return s;
}

StatusLabel predict_status(const PeriodStats& stats, std::span<const PeriodStats> history, const SessionParams& params) {
    if (stats.present_fraction < params.absent_below) return StatusLabel::absent;
    if (stats.yawns >= params.fatigue_yawns) return StatusLabel::potential_fatigue;
    if (!history.empty() && stats.yawns >= params.fatigue_ratio_min_yawns) {
        const std::size_t n = std::min(params.trailing_periods, history.size());
        double mean = 0.0;
        for (std::size_t k = history.size() - n; k < history.size(); ++k) mean += history[k].yawns;
        mean /= static_cast<double>(n);
        if (stats.yawns >= params.fatigue_ratio * mean) return StatusLabel::potential_fatigue;
    }
    if (stats.non_correct_fraction() > params.bad_pose_above) return StatusLabel::bad_pose;
    return StatusLabel::normal;
}

std::vector<Alarm> AlarmTimers::update(const FrameObservation& obs) {
    std::vector<Alarm> fired;
    if (!obs.present) {
        absent_run_s_ += obs.dt;
        good_run_s_ = 0.0;
        if (absent_run_s_ >= params_.break_reset_seconds) {
            work_s_ = 0.0;
            bad_s_ = 0.0;
            work_fired_ = false;
            bad_fired_ = false;
        }
        return fired;
    }
    absent_run_s_ = 0.0;
    work_s_ += obs.dt;
    if (obs.pose == pose::PoseClass::correct) {
        good_run_s_ += obs.dt;
        if (good_run_s_ >= params_.good_pose_reset_seconds) {
            bad_s_ = 0.0;
            bad_fired_ = false;
        }
    } else {
        good_run_s_ = 0.0;
        bad_s_ += obs.dt;
    }
    if (!work_fired_ && work_minutes() > params_.work_alarm_minutes) {
        work_fired_ = true;
        fired.push_back({Alarm::Kind::continuous_work, obs.t, work_minutes()});
    }
    if (!bad_fired_ && bad_pose_minutes() > params_.bad_pose_alarm_minutes) {
        bad_fired_ = true;
        fired.push_back({Alarm::Kind::bad_pose, obs.t, bad_pose_minutes()});
    }
    return fired;
}

Session::Session(const SessionParams& params) : params_(params), timers_(params) {
    if (!(params.period_length > 0.0)) throw ConfigError("period length must be > 0");
}

void Session::roll_to(double t) {
    if (closed_) throw Error("session already closed");
    if (!origin_) {
        origin_ = t;
        current_.emplace(0, t, params_.period_length);
    }
    const double rel = t - *origin_;
    const auto idx = static_cast<std::size_t>(std::max(0.0, std::floor(rel / params_.period_length)));
    while (current_->index() < idx) {
        const std::size_t next = current_->index() + 1;
        finalize_current(std::nullopt);
        current_.emplace(next, *origin_ + static_cast<double>(next) * params_.period_length, params_.period_length);
    }
}

void Session::finalize_current(std::optional<double> covered) {
    PeriodStats s = current_->stats(covered);
    s.status = predict_status(s, periods_, params_);
    periods_.push_back(s);
}

std::vector<Alarm> Session::observe(const FrameObservation& obs) {
    roll_to(obs.t);
    current_->add(obs);
    auto fired = timers_.update(obs);
    alarms_.insert(alarms_.end(), fired.begin(), fired.end());
    return fired;
}

void Session::blink(double t) {
    roll_to(t);
    current_->add_blink();
}

void Session::yawn(double t) {
    roll_to(t);
    current_->add_yawn();
}

void Session::close(double t_end) {
    if (closed_ || !current_) {
        closed_ = true;
        return;
    }
    roll_to(std::max(t_end - 1e-9, current_->start()));
    finalize_current(t_end - current_->start());
    current_.reset();
    closed_ = true;
}

double Session::last_bad_pose_fraction() const noexcept {
    return periods_.empty() ? 0.0 : periods_.back().non_correct_fraction();
}

SessionReport Session::report() const { return {params_.period_length, periods_, alarms_}; }

namespace {

json period_json(const PeriodStats& p) {
    json props = json::object();
    for (pose::PoseClass c : pose::kPoseClasses)
        props[std::string(pose::code(c))] = p.pose_proportion[static_cast<std::size_t>(pose::index_of(c))];
    return {{"index", p.index}, {"start", p.start}, {"end", p.end}, {"blinks", p.blinks}, {"yawns", p.yawns},
            {"pose_proportion", std::move(props)}, {"present_fraction", p.present_fraction},
            {"status", to_string(p.status)}};
}

std::string clock(double seconds) {
    const auto s = static_cast<long long>(std::llround(seconds));
    char buf[32];
    std::snprintf(buf, sizeof buf, "%02lld:%02lld:%02lld", s / 3600, (s / 60) % 60, s % 60);
    return buf;
}

}  // namespace

std::string report_json(const SessionReport& report) {
    json periods = json::array();
    for (const auto& p : report.periods) periods.push_back(period_json(p));
    json alarms = json::array();
    for (const auto& a : report.alarms) alarms.push_back({{"kind", to_string(a.kind)}, {"t", a.t}, {"minutes", a.minutes}});
    int blinks = 0, yawns = 0;
    for (const auto& p : report.periods) {
        blinks += p.blinks;
        yawns += p.yawns;
    }
    json j = {{"schema_version", 1},
              {"period_length", report.period_length},
              {"periods", std::move(periods)},
              {"alarms", std::move(alarms)},
              {"totals", {{"blinks", blinks}, {"yawns", yawns}, {"periods", report.periods.size()}}}};
    return j.dump(2) + "\n";
}

std::string report_csv(const SessionReport& report) {
    std::string out = "start,blink,yawn,c1,c2,c3,c4,c5,status\n";
    char buf[256];
    for (const auto& p : report.periods) {
        const auto& q = p.pose_proportion;
        std::snprintf(buf, sizeof buf, "%.3f,%d,%d,%.6f,%.6f,%.6f,%.6f,%.6f,", p.start, p.blinks, p.yawns, q[0], q[1],
                      q[2], q[3], q[4]);
        out += buf;
        out += to_string(p.status);
        out += '\n';
    }
    return out;
}

std::string report_text(const SessionReport& report) {
    std::string out;
    char buf[256];
    out += "pose proportion per period\n";
    out += "  start       C1    C2    C3    C4    C5   present\n";
    for (const auto& p : report.periods) {
        const auto& q = p.pose_proportion;
        std::snprintf(buf, sizeof buf, "  %s  %5.2f %5.2f %5.2f %5.2f %5.2f   %5.2f\n", clock(p.start).c_str(), q[0],
                      q[1], q[2], q[3], q[4], p.present_fraction);
        out += buf;
    }
    out += "\nstatus, blinks and yawns per period\n";
    out += "  start     blinks yawns  status\n";
    for (const auto& p : report.periods) {
        std::snprintf(buf, sizeof buf, "  %s  %6d %5d  %s\n", clock(p.start).c_str(), p.blinks, p.yawns,
                      std::string(to_string(p.status)).c_str());
        out += buf;
    }
    if (!report.alarms.empty()) {
        out += "\nalarms\n";
        for (const auto& a : report.alarms) {
            std::snprintf(buf, sizeof buf, "  %s  %-16s %.1f min\n", clock(a.t).c_str(),
                          std::string(to_string(a.kind)).c_str(), a.minutes);
            out += buf;
        }
    }
    return out;
}

SessionReport report_from_json(std::string_view text) {
    json j = detail::parse_json(text, "report");
    SessionReport r;
    try {
        r.period_length = j.at("period_length").get<double>();
        for (const auto& p : j.at("periods")) {
            PeriodStats s;
            s.index = p.at("index").get<std::size_t>();
            s.start = p.at("start").get<double>();
            s.end = p.at("end").get<double>();
            s.blinks = p.at("blinks").get<int>();
            s.yawns = p.at("yawns").get<int>();
            for (pose::PoseClass c : pose::kPoseClasses)
                s.pose_proportion[static_cast<std::size_t>(pose::index_of(c))] =
                    p.at("pose_proportion").at(std::string(pose::code(c))).get<double>();
            s.present_fraction = p.at("present_fraction").get<double>();
            s.status = status_from_string(p.at("status").get<std::string>());
            r.periods.push_back(s);
        }
        for (const auto& a : j.at("alarms")) {
            Alarm al;
            al.kind = a.at("kind").get<std::string>() == "bad-pose" ? Alarm::Kind::bad_pose : Alarm::Kind::continuous_work;
            al.t = a.at("t").get<double>();
            al.minutes = a.at("minutes").get<double>();
            r.alarms.push_back(al);
        }
    } catch (const json::exception& e) {
        throw SchemaError(std::string("report: ") + e.what());
    }
    return r;
}

void render_report(const SessionReport& report, const std::filesystem::path& dir) {
    if (report.periods.empty()) throw Error("report needs at least one period");
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create report directory '" + dir.string() + "': " + ec.message());
    detail::write_file(dir / "report.json", report_json(report));
    detail::write_file(dir / "report.csv", report_csv(report));
}

}  // namespace ergowatch::session
