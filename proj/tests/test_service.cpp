#include <atomic>
#include <sstream>
#include <thread>

#include "doctest.h"
#include "ergowatch/pipeline.hpp"
#include "ergowatch/simulate.hpp"
#include "ergowatch/training.hpp"
#include "helpers.hpp"
#include "httplib.h"
#include "json.hpp"
#include "service.hpp"

using namespace ergowatch;
using nlohmann::json;

namespace {

const PipelineModels& models() {
    static const PipelineModels m = [] {
        PipelineModels out;
        const auto t = testing::test_template();
        const pose::CameraIntrinsics A;
        out.gate = training::train_gate(t, A);
        out.pose = training::train_pose(t, A);
        out.mouth = training::train_mouth(t, A);
        return out;
    }();
    return m;
}

recommend::RuleSet quick_rules() {
    recommend::RuleSet rules;
    rules.rules = {
        {"quick-break", {{recommend::MembershipKind::ramp_up, {0.01, 0.02}, "work_minutes"}}, 1.0,
         recommend::Consequence::take_break},
        {"rest", {{recommend::MembershipKind::ramp_down, {0.01, 0.02}, "work_minutes"}}, -1.0,
         recommend::Consequence::keep_working},
    };
    return rules;
}

service::FrameSource simulated(double duration, std::uint64_t seed) {
    sim::StreamScript script;
    script.duration = duration;
    for (double t = 2.0; t < duration - 1.0; t += 2.5) script.blinks.push_back(t);
    auto simulator = std::make_shared<sim::Simulator>(script, testing::test_template(), pose::CameraIntrinsics{}, seed);
    return [simulator]() -> std::optional<LandmarkFrame> {
        if (simulator->done()) return std::nullopt;
        return simulator->next();
    };
}

Pipeline make_pipeline(recommend::RuleSet rules = recommend::RuleSet::defaults()) {
    PipelineConfig config;
    config.feedback_batch = 1;
    return Pipeline(config, models(), testing::test_template(), std::move(rules));
}

}  // namespace

TEST_CASE("handlers before, during and after the stream") {
    std::ostringstream log;
    service::Service svc(make_pipeline(quick_rules()), simulated(20.0, 1), {"127.0.0.1", 0, 0.0, &log});
    auto status = json::parse(svc.get_status().body);
    CHECK(status["frames"] == 0);
    CHECK(status["recommendation"].is_null());
    CHECK(svc.post_feedback(R"({"action":"like"})").status == 409);
    CHECK(svc.post_feedback("not json").status == 400);
    CHECK(svc.post_feedback(R"({"action":"meh"})").status == 400);
    CHECK(svc.post_feedback(R"({"action":"like","recommendation_id":-3})").status == 400);

    svc.start(false);
    REQUIRE(svc.wait_drained(60.0));
    status = json::parse(svc.get_status().body);
    CHECK(status["frames"] == 600);
    CHECK(status["finished"] == true);
    REQUIRE(status["recommendation"].is_object());
    const auto id = status["recommendation"]["id"].get<std::uint64_t>();
    CHECK(status["recommendation"]["action"] == "take-break");
    CHECK(status["recommendation"]["text"] == "Take a break");

    const auto report = json::parse(svc.get_report().body);
    CHECK(report["finished"] == true);
    CHECK(report["periods"].size() == 1);
    CHECK(report["periods"][0]["blinks"] == 7);

    const auto all = json::parse(svc.get_events(0).body);
    const auto n = all["cursor"].get<std::size_t>();
    CHECK(all["events"].size() == n);
    const auto tail = json::parse(svc.get_events(n - 2).body);
    CHECK(tail["events"].size() == 2);
    CHECK(tail["events"][0]["seq"] == n - 2);
    CHECK(json::parse(svc.get_events(n + 5).body)["events"].empty());

    const std::string body = R"({"action":"dislike","recommendation_id":)" + std::to_string(id) + "}";
    auto r = svc.post_feedback(body);
    CHECK(r.status == 200);
    auto j = json::parse(r.body);
    CHECK(j["status"] == "accepted");
    CHECK(j["refit"] == true);
    CHECK(j["sample"]["y"] == -1);
    CHECK(j["weights"][0].get<double>() < 1.0);
    r = svc.post_feedback(body);
    CHECK(r.status == 200);
    CHECK(json::parse(r.body)["status"] == "duplicate");
    CHECK(svc.post_feedback(R"({"action":"like","recommendation_id":99})").status == 409);
    svc.stop();

    std::istringstream lines(log.str());
    std::string line;
    int logged = 0;
    while (std::getline(lines, line)) {
        CHECK(json::parse(line)["source"] == "explicit");
        ++logged;
    }
    CHECK(logged == 1);
}

TEST_CASE("http endpoints on an ephemeral port") {
    service::Service svc(make_pipeline(), simulated(30.0, 2), {"127.0.0.1", 0, 4.0, nullptr});
    svc.start(true);
    REQUIRE(svc.port() > 0);
    httplib::Client client("127.0.0.1", svc.port());
    client.set_read_timeout(10, 0);

    // Concurrent readers while the worker advances: snapshots never go back
    // in time and each one is internally consistent.
    std::atomic<bool> bad{false};
    std::vector<std::thread> readers;
    for (int k = 0; k < 3; ++k)
        readers.emplace_back([&] {
            httplib::Client c("127.0.0.1", svc.port());
            std::size_t last_frames = 0;
            for (int i = 0; i < 40; ++i) {
                auto res = c.Get("/status");
                if (!res || res->status != 200) {
                    bad = true;
                    return;
                }
                const auto s = json::parse(res->body);
                const auto frames = s["frames"].get<std::size_t>();
                if (frames < last_frames || s["blink_rate"].get<double>() < 0.0) bad = true;
                last_frames = frames;
                std::this_thread::sleep_for(std::chrono::milliseconds(5));
            }
        });
    for (auto& t : readers) t.join();
    CHECK_FALSE(bad.load());

    auto res = client.Get("/status");
    REQUIRE(res);
    CHECK(res->status == 200);
    CHECK(res->get_header_value("Content-Type") == "application/json");
    CHECK(res->get_header_value("Access-Control-Allow-Origin") == "*");
    CHECK(json::parse(res->body)["schema_version"] == kSchemaVersion);

    res = client.Get("/events?since=0");
    REQUIRE(res);
    const auto events = json::parse(res->body);
    CHECK(events["events"].is_array());
    CHECK(client.Get("/events?since=abc")->status == 400);

    res = client.Get("/report");
    REQUIRE(res);
    CHECK(json::parse(res->body).contains("periods"));

    res = client.Post("/feedback", R"({"action":"like"})", "application/json");
    REQUIRE(res);
    CHECK(res->status == 409);
    CHECK(json::parse(res->body)["status"] == "rejected");
    res = client.Post("/feedback", "{}", "application/json");
    REQUIRE(res);
    CHECK(res->status == 400);
    CHECK(client.Options("/feedback")->status == 204);
    svc.stop();
}
