#pragma once

#include <condition_variable>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <future>
#include <memory>
#include <mutex>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include "ergowatch/frame.hpp"
#include "ergowatch/pipeline.hpp"

namespace httplib {
class Server;
}

namespace ergowatch::service {

/// Returns the next frame, or nullopt at end of stream.
using FrameSource = std::function<std::optional<LandmarkFrame>()>;

struct ServiceOptions {
    std::string host = "127.0.0.1";
    int port = 8080;      // 0 → any free port
    double speed = 1.0;   // replay speed relative to frame time; 0 → unthrottled
    std::ostream* log = nullptr;  // feedback samples as JSON lines
};

struct Response {
    int status = 200;
    std::string body;
};

/// One worker thread owns the pipeline. HTTP handlers read published
/// snapshots and hand feedback to the worker through a queue.
class Service {
public:
    Service(Pipeline pipeline, FrameSource source, ServiceOptions options = {});
    ~Service();

    Service(const Service&) = delete;
    Service& operator=(const Service&) = delete;

    /// Starts the worker and, when listen is set, the HTTP server.
    void start(bool listen = true);
    void stop();
    int port() const noexcept { return bound_port_; }
    /// True once the stream has ended and the session is closed.
    bool drained() const;
    /// Blocks until drained() or the timeout elapses.
    bool wait_drained(double timeout_seconds) const;

    Response get_status() const;
    Response get_report() const;
    Response get_events(std::size_t since) const;
    Response post_feedback(const std::string& body);

private:
    struct Published {
        std::string status;
        std::string report;
        std::size_t periods = 0;
        bool finished = false;
    };
    struct FeedbackRequest {
        recommend::FeedbackAction action;
        std::optional<std::uint64_t> id;
        std::promise<FeedbackResult> reply;
    };

    void run_worker();
    void publish(bool force_report);
    void drain_feedback();

    Pipeline pipeline_;
    FrameSource source_;
    ServiceOptions options_;
    std::unique_ptr<httplib::Server> server_;
    std::thread worker_;
    std::thread http_;
    int bound_port_ = 0;

    mutable std::mutex snapshot_mutex_;
    mutable std::condition_variable drained_cv_;
    std::shared_ptr<const Published> published_;
    std::vector<std::string> events_;
    std::size_t events_published_ = 0;

    std::mutex queue_mutex_;
    std::condition_variable queue_cv_;
    std::deque<std::unique_ptr<FeedbackRequest>> queue_;
    bool started_ = false;
    bool stopping_ = false;
};

}  // namespace ergowatch::service
