#include <algorithm>
#include <sstream>

#include "doctest.h"
#include "ergowatch/error.hpp"
#include "ergowatch/pipeline.hpp"
#include "ergowatch/simulate.hpp"
#include "ergowatch/training.hpp"
#include "helpers.hpp"
#include "json.hpp"

using namespace ergowatch;
using nlohmann::json;
using pose::PoseClass;

namespace {

const pose::RigidTemplate& tmpl() {
    static const auto t = testing::test_template(9);
    return t;
}

const PipelineModels& models() {
    static const PipelineModels m = [] {
        PipelineModels out;
        const pose::CameraIntrinsics A;
        out.gate = training::train_gate(tmpl(), A);
        out.pose = training::train_pose(tmpl(), A);
        out.mouth = training::train_mouth(tmpl(), A);
        return out;
    }();
    return m;
}

Pipeline make_pipeline(const PipelineConfig& config = {}, recommend::RuleSet rules = recommend::RuleSet::defaults()) {
    return Pipeline(config, models(), tmpl(), std::move(rules));
}

sim::PoseSegment segment(double start, double end, PoseClass c) {
    return {start, end, c, training::scenario_pose(c), std::nullopt};
}

std::vector<json> events_of(const Pipeline& p, std::string_view type) {
    std::vector<json> out;
    for (const auto& e : p.events())
        if (e.type == type) out.push_back(json::parse(e.json));
    return out;
}

void run_all(Pipeline& p, const std::vector<LandmarkFrame>& frames) {
    for (const auto& f : frames) p.process(f);
    p.finish();
}

}  // namespace

TEST_CASE("one scripted period: counts and pose proportions match ground truth") {
    sim::StreamScript script;
    script.duration = 600.0;
    for (int k = 0; k < 12; ++k) script.blinks.push_back(20.0 + 45.0 * k);
    script.yawns = {{300.0, 303.0}};
    script.poses = {segment(360.0, 600.0, PoseClass::too_close)};
    const auto [frames, truth] = sim::simulate(script, tmpl(), {}, 21);
    REQUIRE(truth.blinks.size() == 12);

    auto p = make_pipeline();
    run_all(p, frames);
    const auto report = p.report();
    REQUIRE(report.periods.size() == 1);
    const auto& period = report.periods[0];
    CHECK(period.blinks == 12);
    CHECK(period.yawns == 1);
    CHECK(period.pose_proportion[1] == doctest::Approx(0.6).epsilon(0.05 / 0.6));
    CHECK(period.pose_proportion[2] == doctest::Approx(0.4).epsilon(0.05 / 0.4));
    CHECK(period.present_fraction == doctest::Approx(1.0).epsilon(0.01));

    const auto blinks = events_of(p, "blink");
    REQUIRE(blinks.size() == truth.blinks.size());
    for (std::size_t i = 0; i < blinks.size(); ++i) {
        const auto frame = blinks[i]["frame"].get<std::size_t>();
        CHECK(frame >= truth.blinks[i]);
        CHECK(frame <= truth.blinks[i] + 1);
    }
    const auto yawns = events_of(p, "yawn");
    REQUIRE(yawns.size() == 1);
    CHECK(yawns[0]["t"].get<double>() == doctest::Approx(301.5).epsilon(0.001));
}

TEST_CASE("absence and tracking loss are excluded from presence") {
    sim::StreamScript script;
    script.duration = 60.0;
    script.absences = {{20.0, 30.0}};
    script.tracking_loss = {{40.0, 45.0}};
    const auto [frames, truth] = sim::simulate(script, tmpl(), {}, 22);
    auto p = make_pipeline();
    run_all(p, frames);
    const auto tracking = events_of(p, "tracking");
    REQUIRE(tracking.size() == 4);
    const double expected[] = {20.0, 30.0, 40.0, 45.0};
    const char* states[] = {"lost", "tracked", "lost", "tracked"};
    for (int i = 0; i < 4; ++i) {
        CHECK(tracking[static_cast<std::size_t>(i)]["status"] == states[i]);
        CHECK(std::abs(tracking[static_cast<std::size_t>(i)]["t"].get<double>() - expected[i]) <= 2.0 / 30.0);
    }
    const auto& period = p.report().periods.at(0);
    CHECK(period.present_fraction == doctest::Approx(45.0 / 60.0).epsilon(0.01));
}

TEST_CASE("event log is chronological with consecutive sequence numbers") {
    sim::StreamScript script;
    script.duration = 90.0;
    script.blinks = {5.0, 15.0, 25.0, 35.0};
    script.yawns = {{50.0, 53.0}};
    script.absences = {{60.0, 70.0}};
    const auto [frames, truth] = sim::simulate(script, tmpl(), {}, 23);
    PipelineConfig config;
    config.period_length = 30.0;
    auto p = make_pipeline(config);
    run_all(p, frames);
    std::istringstream log(p.event_log());
    std::string line;
    std::size_t seq = 0;
    double t = -1.0;
    while (std::getline(log, line)) {
        const auto j = json::parse(line);
        CHECK(j["seq"].get<std::size_t>() == seq++);
        CHECK(j["t"].get<double>() >= t);
        t = j["t"].get<double>();
        CHECK(j.contains("type"));
    }
    CHECK(seq == p.events().size());
    CHECK(events_of(p, "period").size() == 3);
    CHECK(events_of(p, "blink").size() == 4);
    CHECK(events_of(p, "yawn").size() == 1);
    CHECK_THROWS_AS(p.process(frames.back()), Error);
}

TEST_CASE("identical inputs give byte-identical logs and reports") {
    sim::StreamScript script;
    script.duration = 120.0;
    script.blinks = {4.0, 9.5, 30.0, 70.0};
    script.yawns = {{40.0, 43.0}};
    script.poses = {segment(60.0, 100.0, PoseClass::askew_left)};
    const auto [frames, truth] = sim::simulate(script, tmpl(), {}, 24);
    auto a = make_pipeline();
    auto b = make_pipeline();
    run_all(a, frames);
    run_all(b, frames);
    CHECK(a.event_log() == b.event_log());
    CHECK(session::report_json(a.report()) == session::report_json(b.report()));
}

TEST_CASE("feedback on the active recommendation") {
    recommend::RuleSet rules;
    rules.rules = {
        {"quick-break", {{recommend::MembershipKind::ramp_up, {0.01, 0.02}, "work_minutes"}}, 1.0,
         recommend::Consequence::take_break},
        {"rest", {{recommend::MembershipKind::ramp_down, {0.01, 0.02}, "work_minutes"}}, -1.0,
         recommend::Consequence::keep_working},
    };
    PipelineConfig config;
    config.feedback_batch = 1;
    auto p = make_pipeline(config, rules);
    sim::StreamScript script;
    script.duration = 10.0;
    sim::Simulator source(script, tmpl(), {}, 25);
    auto step = [&](int n) {
        for (int i = 0; i < n && !source.done(); ++i) p.process(source.next());
    };

    step(10);
    CHECK_FALSE(p.status().recommendation);
    auto r = p.feedback(recommend::FeedbackAction::like);
    CHECK(r.status == FeedbackResult::Status::rejected);
    CHECK(r.reason == "no active recommendation");

    step(60);
    const auto active = p.status().recommendation;
    REQUIRE(active);
    CHECK(active->action == recommend::Consequence::take_break);
    CHECK(active->rule == "quick-break");
    CHECK(p.status().f == doctest::Approx(1.0));

    CHECK(p.feedback(recommend::FeedbackAction::dislike, active->id + 7).status == FeedbackResult::Status::rejected);
    r = p.feedback(recommend::FeedbackAction::dislike, active->id);
    CHECK(r.status == FeedbackResult::Status::accepted);
    CHECK(r.outcome.refit);
    CHECK(r.weights[0] < 1.0);
    CHECK(p.feedback(recommend::FeedbackAction::dislike, active->id).status == FeedbackResult::Status::duplicate);
    CHECK(p.feedback_samples().size() == 1);
    CHECK(p.feedback_samples()[0].y == -1);

    int rounds = 0;
    while (p.status().recommendation && rounds < 20) {
        CHECK(p.feedback(recommend::FeedbackAction::dislike).status == FeedbackResult::Status::accepted);
        ++rounds;
    }
    CHECK_FALSE(p.status().recommendation);
    CHECK(p.status().weights[0] < 0.0);
    CHECK(events_of(p, "feedback").size() == p.feedback_samples().size());
    const auto recs = events_of(p, "recommendation");
    REQUIRE(recs.size() == 2);
    CHECK(recs[0]["recommendation"]["action"] == "take-break");
    CHECK(recs[1]["recommendation"].is_null());
    CHECK(recs[1]["cleared"] == active->id);
}

TEST_CASE("status snapshot json") {
    auto p = make_pipeline();
    sim::StreamScript script;
    script.duration = 3.0;
    script.blinks = {2.0};
    const auto [frames, truth] = sim::simulate(script, tmpl(), {}, 26);
    for (const auto& f : frames) p.process(f);
    const auto j = json::parse(to_json(p.status()));
    CHECK(j["schema_version"] == kSchemaVersion);
    CHECK(j["frames"] == frames.size());
    CHECK(j["tracked"] == true);
    CHECK(j["pose"]["class"] == "C2");
    CHECK(j["blink_rate"] == 1.0);
    CHECK(j["yawns_period"] == 0);
    CHECK(j["recommendation"].is_null());
    CHECK(j["weights"].size() == 5);
    CHECK(j["finished"] == false);
}

TEST_CASE("from_config rejects a missing template and names the path") {
    PipelineConfig config;
    config.template_path = "/nonexistent/face.json";
    try {
        Pipeline::from_config(config);
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("/nonexistent/face.json") != std::string::npos);
    }
}
