#include "service.hpp"

#include <chrono>
#include <iostream>

#include "ergowatch/error.hpp"
#include "ergowatch/session.hpp"
#include "httplib.h"
#include "json.hpp"

namespace ergowatch::service {

using nlohmann::json;

namespace {

std::string error_body(const std::string& status, const std::string& reason) {
    return json{{"schema_version", kSchemaVersion}, {"status", status}, {"reason", reason}}.dump();
}

}  // namespace

Service::Service(Pipeline pipeline, FrameSource source, ServiceOptions options)
    : pipeline_(std::move(pipeline)), source_(std::move(source)), options_(std::move(options)) {
    publish(true);
}

Service::~Service() { stop(); }

void Service::start(bool listen) {
    {
        std::lock_guard lock(queue_mutex_);
        started_ = true;
    }
    worker_ = std::thread([this] { run_worker(); });
    if (!listen) return;
    server_ = std::make_unique<httplib::Server>();
    auto reply = [](httplib::Response& res, const Response& r) {
        res.status = r.status;
        res.set_content(r.body, "application/json");
        res.set_header("Access-Control-Allow-Origin", "*");
    };
    server_->Get("/status", [this, reply](const httplib::Request&, httplib::Response& res) { reply(res, get_status()); });
    server_->Get("/report", [this, reply](const httplib::Request&, httplib::Response& res) { reply(res, get_report()); });
    server_->Get("/events", [this, reply](const httplib::Request& req, httplib::Response& res) {
        std::size_t since = 0;
        if (req.has_param("since")) {
            try {
                since = std::stoul(req.get_param_value("since"));
            } catch (const std::exception&) {
                reply(res, {400, error_body("invalid", "since must be a non-negative integer")});
                return;
            }
        }
        reply(res, get_events(since));
    });
    server_->Post("/feedback", [this, reply](const httplib::Request& req, httplib::Response& res) {
        reply(res, post_feedback(req.body));
    });
    server_->Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) {
        res.set_header("Access-Control-Allow-Origin", "*");
        res.set_header("Access-Control-Allow-Headers", "Content-Type");
        res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
        res.status = 204;
    });
    if (options_.port == 0) {
        bound_port_ = server_->bind_to_any_port(options_.host);
    } else if (server_->bind_to_port(options_.host, options_.port)) {
        bound_port_ = options_.port;
    } else {
        bound_port_ = -1;
    }
    if (bound_port_ <= 0) {
        stop();
        throw IoError("cannot bind " + options_.host + ":" + std::to_string(options_.port));
    }
    http_ = std::thread([this] { server_->listen_after_bind(); });
}

void Service::stop() {
    {
        std::lock_guard lock(queue_mutex_);
        stopping_ = true;
    }
    queue_cv_.notify_all();
    if (server_) server_->stop();
    if (http_.joinable()) http_.join();
    if (worker_.joinable()) worker_.join();
}

bool Service::drained() const {
    std::lock_guard lock(snapshot_mutex_);
    return published_->finished;
}

bool Service::wait_drained(double timeout_seconds) const {
    std::unique_lock lock(snapshot_mutex_);
    return drained_cv_.wait_for(lock, std::chrono::duration<double>(timeout_seconds),
                                [this] { return published_->finished; });
}

void Service::publish(bool force_report) {
    auto next = std::make_shared<Published>();
    const StatusSnapshot status = pipeline_.status();
    next->status = to_json(status);
    next->periods = status.periods_completed;
    next->finished = status.finished;
    std::shared_ptr<const Published> previous;
    {
        std::lock_guard lock(snapshot_mutex_);
        previous = published_;
    }
    if (force_report || !previous || previous->periods != next->periods || next->finished != previous->finished)
        next->report = session::report_json(pipeline_.report());
    else
        next->report = previous->report;

    const auto& events = pipeline_.events();
    std::vector<std::string> fresh;
    for (std::size_t i = events_published_; i < events.size(); ++i) fresh.push_back(events[i].json);
    events_published_ = events.size();
    {
        std::lock_guard lock(snapshot_mutex_);
        published_ = std::move(next);
        for (auto& e : fresh) events_.push_back(std::move(e));
    }
    drained_cv_.notify_all();
}

void Service::drain_feedback() {
    std::deque<std::unique_ptr<FeedbackRequest>> pending;
    {
        std::lock_guard lock(queue_mutex_);
        pending.swap(queue_);
    }
    if (pending.empty()) return;
    for (auto& req : pending) {
        FeedbackResult r = pipeline_.feedback(req->action, req->id);
        if (r.status == FeedbackResult::Status::accepted && r.outcome.sample) {
            const std::string line = recommend::to_json_line(*r.outcome.sample);
            std::clog << "feedback " << line << '\n';
            if (options_.log) *options_.log << line << '\n' << std::flush;
        } else if (r.status == FeedbackResult::Status::rejected) {
            std::clog << "feedback rejected: " << r.reason << '\n';
        }
        req->reply.set_value(std::move(r));
    }
    publish(false);
}

void Service::run_worker() {
    using clock = std::chrono::steady_clock;
    const auto wall_start = clock::now();
    std::optional<double> t0;
    bool eof = false;
    while (true) {
        {
            std::lock_guard lock(queue_mutex_);
            if (stopping_) break;
        }
        drain_feedback();
        if (eof) {
            std::unique_lock lock(queue_mutex_);
            queue_cv_.wait(lock, [this] { return stopping_ || !queue_.empty(); });
            continue;
        }
        std::optional<LandmarkFrame> frame;
        try {
            frame = source_();
        } catch (const Error& e) {
            std::clog << "stream error: " << e.what() << '\n';
            frame.reset();
        }
        if (!frame) {
            pipeline_.finish();
            publish(true);
            eof = true;
            continue;
        }
        if (options_.speed > 0.0) {
            if (!t0) t0 = frame->t;
            const auto due = wall_start + std::chrono::duration_cast<clock::duration>(
                                              std::chrono::duration<double>((frame->t - *t0) / options_.speed));
            std::unique_lock lock(queue_mutex_);
            queue_cv_.wait_until(lock, due, [this] { return stopping_ || !queue_.empty(); });
            if (stopping_) break;
            if (!queue_.empty() && clock::now() < due) {
                lock.unlock();
                drain_feedback();
                lock.lock();
                queue_cv_.wait_until(lock, due, [this] { return stopping_; });
                if (stopping_) break;
            }
        }
        pipeline_.process(*frame);
        publish(false);
    }
}

Response Service::get_status() const {
    std::lock_guard lock(snapshot_mutex_);
    return {200, published_->status};
}

Response Service::get_report() const {
    std::shared_ptr<const Published> p;
    {
        std::lock_guard lock(snapshot_mutex_);
        p = published_;
    }
    json j = json::parse(p->report);
    j["finished"] = p->finished;
    return {200, j.dump()};
}

Response Service::get_events(std::size_t since) const {
    std::string body = "{\"schema_version\":" + std::to_string(kSchemaVersion) + ",\"events\":[";
    std::size_t cursor = 0;
    {
        std::lock_guard lock(snapshot_mutex_);
        cursor = events_.size();
        for (std::size_t i = since; i < events_.size(); ++i) {
            if (i > since) body += ',';
            body += events_[i];
        }
    }
    body += "],\"cursor\":" + std::to_string(cursor) + "}";
    return {200, body};
}

Response Service::post_feedback(const std::string& body) {
    json j = json::parse(body, nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("action") || !j["action"].is_string())
        return {400, error_body("invalid", "body must be {\"action\": \"like\" | \"dislike\"}")};
    auto req = std::make_unique<FeedbackRequest>();
    try {
        req->action = recommend::feedback_action_from_string(j["action"].get<std::string>());
    } catch (const SchemaError& e) {
        return {400, error_body("invalid", e.what())};
    }
    if (j.contains("recommendation_id") && !j["recommendation_id"].is_null()) {
        if (!j["recommendation_id"].is_number_unsigned())
            return {400, error_body("invalid", "recommendation_id must be a non-negative integer")};
        req->id = j["recommendation_id"].get<std::uint64_t>();
    }
    auto reply = req->reply.get_future();
    {
        std::lock_guard lock(queue_mutex_);
        if (stopping_) return {503, error_body("unavailable", "service is stopping")};
        if (!started_) return {409, error_body("rejected", "no active recommendation")};
        queue_.push_back(std::move(req));
    }
    queue_cv_.notify_all();
    if (reply.wait_for(std::chrono::seconds(10)) != std::future_status::ready)
        return {503, error_body("unavailable", "pipeline did not answer")};
    const FeedbackResult r = reply.get();
    json out = {{"schema_version", kSchemaVersion},
                {"status", to_string(r.status)},
                {"weights", r.weights},
                {"refit", r.outcome.refit}};
    if (!r.reason.empty()) out["reason"] = r.reason;
    if (r.outcome.sample) out["sample"] = json::parse(recommend::to_json_line(*r.outcome.sample));
    return {r.status == FeedbackResult::Status::rejected ? 409 : 200, out.dump()};
}

}  // namespace ergowatch::service
