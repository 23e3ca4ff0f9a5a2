#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <vector>

#include "doctest.h"
#include "ergowatch/error.hpp"
#include "ergowatch/session.hpp"

using namespace ergowatch;
using namespace ergowatch::session;
using pose::PoseClass;

namespace {

std::vector<FrameObservation> frames(double start, double end, PoseClass c, bool present = true, double fps = 30.0) {
    std::vector<FrameObservation> out;
    const auto n = static_cast<long>(std::llround((end - start) * fps));
    for (long k = 0; k < n; ++k) out.push_back({start + static_cast<double>(k) / fps, 1.0 / fps, present, c});
    return out;
}

PeriodStats present_stats(int yawns, double correct_share = 1.0) {
    PeriodStats s;
    s.present_fraction = 1.0;
    s.yawns = yawns;
    s.pose_proportion = {0.0, correct_share, 1.0 - correct_share, 0.0, 0.0};
    return s;
}

}  // namespace

TEST_CASE("empty period is absent with zero counts") {
    const auto s = accumulate(0, 0.0, 600.0, {}, {}, {});
    CHECK(s.status == StatusLabel::absent);
    CHECK(s.blinks == 0);
    CHECK(s.yawns == 0);
    CHECK(s.present_fraction == 0.0);
}

TEST_CASE("counts and time-weighted proportions") {
    auto obs = frames(0.0, 360.0, PoseClass::correct);
    const auto c3 = frames(360.0, 600.0, PoseClass::too_close);
    obs.insert(obs.end(), c3.begin(), c3.end());
    std::vector<double> blinks;
    for (int i = 0; i < 12; ++i) blinks.push_back(10.0 + 45.0 * i);
    blinks.push_back(600.0);  // belongs to the next period
    const std::vector<double> yawns{300.0, 700.0};
    const auto s = accumulate(0, 0.0, 600.0, obs, blinks, yawns);
    CHECK(s.blinks == 12);
    CHECK(s.yawns == 1);
    CHECK(s.pose_proportion[1] == doctest::Approx(0.6));
    CHECK(s.pose_proportion[2] == doctest::Approx(0.4));
    double sum = 0.0;
    for (double p : s.pose_proportion) {
        CHECK(p >= 0.0);
        sum += p;
    }
    CHECK(std::abs(sum - 1.0) < 1e-9);
    CHECK(s.present_fraction == doctest::Approx(1.0));
    CHECK(s.status == StatusLabel::normal);
}

TEST_CASE("status examples and priority") {
    PeriodStats absent;
    CHECK(predict_status(absent, {}) == StatusLabel::absent);
    CHECK(predict_status(present_stats(5), {}) == StatusLabel::potential_fatigue);
    CHECK(predict_status(present_stats(0, 0.2), {}) == StatusLabel::bad_pose);
    CHECK(predict_status(present_stats(0, 0.5), {}) == StatusLabel::normal);
    CHECK(predict_status(present_stats(3, 0.1), {}) == StatusLabel::potential_fatigue);
    auto barely = present_stats(9);
    barely.present_fraction = 0.19;
    CHECK(predict_status(barely, {}) == StatusLabel::absent);

    const std::vector<PeriodStats> calm{present_stats(1), present_stats(0), present_stats(1)};
    CHECK(predict_status(present_stats(2), calm) == StatusLabel::potential_fatigue);
    const std::vector<PeriodStats> quiet{present_stats(0), present_stats(0), present_stats(0)};
    CHECK(predict_status(present_stats(1), quiet) == StatusLabel::normal);
    const std::vector<PeriodStats> busy{present_stats(2), present_stats(2), present_stats(2)};
    CHECK(predict_status(present_stats(2), busy) == StatusLabel::normal);
}

TEST_CASE("alarm timers") {
    SUBCASE("11 min of C4 raises the bad-pose alarm") {
        AlarmTimers timers;
        std::vector<Alarm> all;
        for (const auto& o : frames(0.0, 660.0, PoseClass::askew_left)) {
            auto a = timers.update(o);
            all.insert(all.end(), a.begin(), a.end());
        }
        REQUIRE(all.size() == 1);
        CHECK(all[0].kind == Alarm::Kind::bad_pose);
        CHECK(all[0].t == doctest::Approx(600.0).epsilon(0.001));
    }
    SUBCASE("29 min of work raises nothing") {
        AlarmTimers timers;
        int n = 0;
        for (const auto& o : frames(0.0, 29 * 60.0, PoseClass::correct)) n += static_cast<int>(timers.update(o).size());
        CHECK(n == 0);
        CHECK(timers.work_minutes() == doctest::Approx(29.0));
    }
    SUBCASE("a break resets the work timer") {
        AlarmTimers timers;
        int n = 0;
        for (const auto& o : frames(0.0, 20 * 60.0, PoseClass::correct)) n += static_cast<int>(timers.update(o).size());
        for (const auto& o : frames(1200.0, 1290.0, PoseClass::correct, false)) n += static_cast<int>(timers.update(o).size());
        CHECK(timers.work_minutes() == 0.0);
        for (const auto& o : frames(1290.0, 1290.0 + 20 * 60.0, PoseClass::correct)) n += static_cast<int>(timers.update(o).size());
        CHECK(n == 0);
    }
    SUBCASE("a short gap does not reset, and 31 min fires once") {
        AlarmTimers timers;
        std::vector<Alarm> all;
        auto feed = [&](const std::vector<FrameObservation>& v) {
            for (const auto& o : v) {
                auto a = timers.update(o);
                all.insert(all.end(), a.begin(), a.end());
            }
        };
        feed(frames(0.0, 900.0, PoseClass::correct));
        feed(frames(900.0, 930.0, PoseClass::correct, false));
        feed(frames(930.0, 2000.0, PoseClass::correct));
        REQUIRE(all.size() == 1);
        CHECK(all[0].kind == Alarm::Kind::continuous_work);
        CHECK(all[0].minutes > 30.0);
    }
    SUBCASE("10 s of correct pose resets the bad-pose timer") {
        AlarmTimers timers;
        for (const auto& o : frames(0.0, 300.0, PoseClass::away)) timers.update(o);
        for (const auto& o : frames(300.0, 305.0, PoseClass::correct)) timers.update(o);
        CHECK(timers.bad_pose_minutes() == doctest::Approx(5.0));
        for (const auto& o : frames(305.0, 312.0, PoseClass::correct)) timers.update(o);
        CHECK(timers.bad_pose_minutes() == 0.0);
    }
}

TEST_CASE("live session splits half-open periods and conserves events") {
    Session s;
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(0.0, 3600.0);
    std::vector<double> blink_times;
    for (int i = 0; i < 500; ++i) blink_times.push_back(u(rng));
    std::sort(blink_times.begin(), blink_times.end());
    blink_times.push_back(600.0);
    blink_times.push_back(1200.0);
    std::sort(blink_times.begin(), blink_times.end());
    std::size_t next = 0;
    for (const auto& o : frames(0.0, 3600.0, PoseClass::correct, true, 10.0)) {
        while (next < blink_times.size() && blink_times[next] <= o.t) s.blink(blink_times[next++]);
        s.observe(o);
    }
    while (next < blink_times.size()) s.blink(blink_times[next++]);
    s.close(3600.0);
    REQUIRE(s.periods().size() == 6);
    int total = 0;
    for (std::size_t k = 0; k < 6; ++k) {
        const auto& p = s.periods()[k];
        CHECK(p.index == k);
        CHECK(p.start == doctest::Approx(600.0 * k));
        const auto expected = std::count_if(blink_times.begin(), blink_times.end(),
                                            [&](double t) { return t >= p.start && t < p.start + 600.0; });
        CHECK(p.blinks == expected);
        total += p.blinks;
    }
    CHECK(total == static_cast<int>(blink_times.size()));
    CHECK_THROWS(s.observe({4000.0, 0.1, true, PoseClass::correct}));
}

TEST_CASE("partial trailing period uses covered length") {
    Session s;
    for (const auto& o : frames(0.0, 900.0, PoseClass::correct)) s.observe(o);
    s.close(900.0);
    REQUIRE(s.periods().size() == 2);
    CHECK(s.periods()[1].present_fraction == doctest::Approx(1.0));
    CHECK(s.periods()[1].status == StatusLabel::normal);
}

TEST_CASE("absent periods in a live session") {
    Session s;
    for (const auto& o : frames(0.0, 600.0, PoseClass::correct)) s.observe(o);
    for (const auto& o : frames(600.0, 1200.0, PoseClass::correct, false)) s.observe(o);
    for (const auto& o : frames(1200.0, 1800.0, PoseClass::too_close)) s.observe(o);
    s.close(1800.0);
    REQUIRE(s.periods().size() == 3);
    CHECK(s.periods()[0].status == StatusLabel::normal);
    CHECK(s.periods()[1].status == StatusLabel::absent);
    CHECK(s.periods()[2].status == StatusLabel::bad_pose);
    CHECK(s.last_bad_pose_fraction() == doctest::Approx(1.0));
}

TEST_CASE("report rendering") {
    Session one;
    for (const auto& o : frames(0.0, 60.0, PoseClass::correct)) one.observe(o);
    one.blink(5.0);
    one.close(60.0);
    const auto r = one.report();
    CHECK(r.periods.size() == 1);
    const auto csv = report_csv(r);
    CHECK(csv.rfind("start,blink,yawn,c1,c2,c3,c4,c5,status\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 2);
    CHECK(csv.find("0.000,1,0,0.000000,1.000000,0.000000,0.000000,0.000000,normal") != std::string::npos);

    const auto back = report_from_json(report_json(r));
    REQUIRE(back.periods.size() == 1);
    CHECK(back.periods[0].blinks == 1);
    CHECK(back.periods[0].status == StatusLabel::normal);
    CHECK(report_json(back) == report_json(r));
    CHECK(report_text(r).find("normal") != std::string::npos);

    const auto dir = std::filesystem::temp_directory_path() / "ergowatch_session_report";
    std::filesystem::remove_all(dir);
    render_report(r, dir);
    CHECK(std::filesystem::exists(dir / "report.json"));
    std::ifstream in(dir / "report.csv");
    std::stringstream ss;
    ss << in.rdbuf();
    CHECK(ss.str() == csv);
    std::filesystem::remove_all(dir);

    CHECK_THROWS_AS(render_report(SessionReport{}, dir), Error);
    CHECK_THROWS_AS(Session(SessionParams{0.0}), ConfigError);
}
