#include "cli.hpp"

#include <atomic>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <thread>

#include "CLI11.hpp"
#include "ergowatch/config.hpp"
#include "ergowatch/error.hpp"
#include "ergowatch/frame.hpp"
#include "ergowatch/pipeline.hpp"
#include "ergowatch/session.hpp"
#include "ergowatch/simulate.hpp"
#include "ergowatch/training.hpp"
#include "service.hpp"

namespace ergowatch::cli {

namespace fs = std::filesystem;

namespace {

std::atomic<bool> g_interrupted{false};

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void spill(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    out << text;
    if (!out) throw IoError("write failed for '" + path.string() + "'");
}

struct ConfigArgs {
    std::string path;
    std::map<std::string, std::string> overrides;

    void attach(CLI::App& app) {
        app.add_option("--config", path, "Pipeline config JSON");
        for (const auto& name : config_field_names())
            app.add_option_function<std::string>(
                "--" + name, [this, name](const std::string& v) { overrides[name] = v; }, "Override config field");
    }

    PipelineConfig resolve() const {
        PipelineConfig c = path.empty() ? PipelineConfig{} : load_config(path);
        for (const auto& [k, v] : overrides) apply_override(c, k, v);
        c.validate();
        return c;
    }
};

pose::RigidTemplate load_template(const PipelineConfig& c) {
    return c.template_path.empty() ? pose::RigidTemplate::canonical()
                                   : pose::template_from_json(slurp(c.template_path));
}

}  // namespace

int run(int argc, char** argv) {
    CLI::App app{"ergowatch: landmark-stream fatigue and posture monitor"};
    app.require_subcommand(1);

    // simulate
    ConfigArgs sim_cfg;
    std::string script_path, sim_out, truth_out;
    std::uint64_t sim_seed = 1;
    auto* simulate = app.add_subcommand("simulate", "Generate a landmark stream and its ground truth from a script");
    simulate->add_option("--script", script_path, "Stream script JSON")->required();
    simulate->add_option("--out", sim_out, "Output stream (JSON lines)")->required();
    simulate->add_option("--truth", truth_out, "Output ground truth JSON");
    simulate->add_option("--sim-seed", sim_seed, "Simulator noise seed");
    sim_cfg.attach(*simulate);

    // run
    ConfigArgs run_cfg;
    std::string run_input, report_dir, events_out;
    auto* run_cmd = app.add_subcommand("run", "Process a stream and write the event log and report");
    run_cmd->add_option("--input", run_input, "Input stream (JSON lines)")->required();
    run_cmd->add_option("--report", report_dir, "Report output directory")->required();
    run_cmd->add_option("--events", events_out, "Event log path (default <report>/events.jsonl)");
    run_cfg.attach(*run_cmd);

    // serve
    ConfigArgs serve_cfg;
    std::string serve_input, serve_host = "127.0.0.1", feedback_log;
    double speed = 1.0;
    auto* serve = app.add_subcommand("serve", "Replay a stream and expose the HTTP service");
    serve->add_option("--input", serve_input, "Input stream (JSON lines)")->required();
    serve->add_option("--speed", speed, "Replay speed; 0 replays as fast as possible");
    serve->add_option("--host", serve_host, "Bind address");
    serve->add_option("--feedback-log", feedback_log, "Append accepted feedback samples here");
    serve_cfg.attach(*serve);

    // train-*
    struct TrainArgs {
        ConfigArgs cfg;
        std::string out;
        std::size_t samples = 200;
        bool raw = false;
    };
    TrainArgs tg, tp, tm;
    auto add_train = [&](const char* name, const char* help, TrainArgs& a) {
        auto* sub = app.add_subcommand(name, help);
        sub->add_option("--out", a.out, "Model output JSON")->required();
        sub->add_option("--samples", a.samples, "Simulated samples per class");
        a.cfg.attach(*sub);
        return sub;
    };
    auto* train_gate = add_train("train-gate", "Train the tracking gate SVM on simulated frames", tg);
    auto* train_pose = add_train("train-pose", "Train the 5-class pose SVM on simulated frames", tp);
    auto* train_mouth = add_train("train-mouth", "Train the mouth open/closed SVM on simulated frames", tm);
    train_mouth->add_flag("--raw", tm.raw, "Use raw image coordinates as features");

    // report
    std::string report_in, format = "text";
    auto* report = app.add_subcommand("report", "Render a saved report");
    report->add_option("--input", report_in, "report.json")->required();
    report->add_option("--format", format, "text, csv or json")->check(CLI::IsMember({"text", "csv", "json"}));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (*simulate) {
            const PipelineConfig c = sim_cfg.resolve();
            const sim::StreamScript script = sim::script_from_json(slurp(script_path));
            sim::Simulator s(script, load_template(c), c.intrinsics, sim_seed);
            if (fs::path(sim_out).has_parent_path()) fs::create_directories(fs::path(sim_out).parent_path());
            std::ofstream out(sim_out, std::ios::binary | std::ios::trunc);
            if (!out) throw IoError("cannot write '" + sim_out + "'");
            while (!s.done()) out << serialize_frame(s.next()) << '\n';
            if (!out) throw IoError("write failed for '" + sim_out + "'");
            if (!truth_out.empty()) spill(truth_out, sim::to_json(s.ground_truth()) + "\n");
            std::cout << "wrote " << s.frame_count() << " frames to " << sim_out << '\n';
            return 0;
        }
        if (*run_cmd) {
            const PipelineConfig c = run_cfg.resolve();
            Pipeline p = Pipeline::from_config(c);
            std::ifstream in(run_input, std::ios::binary);
            if (!in) throw IoError("cannot open '" + run_input + "'");
            FrameReader reader(in);
            while (auto f = reader.next()) p.process(*f);
            p.finish();
            const auto rep = p.report();
            session::render_report(rep, report_dir);
            spill(events_out.empty() ? fs::path(report_dir) / "events.jsonl" : fs::path(events_out), p.event_log());
            std::cout << session::report_text(rep);
            return 0;
        }
        if (*serve) {
            const PipelineConfig c = serve_cfg.resolve();
            auto in = std::make_shared<std::ifstream>(serve_input, std::ios::binary);
            if (!*in) throw IoError("cannot open '" + serve_input + "'");
            auto reader = std::make_shared<FrameReader>(*in);
            std::ofstream log;
            if (!feedback_log.empty()) {
                log.open(feedback_log, std::ios::app);
                if (!log) throw IoError("cannot write '" + feedback_log + "'");
            }
            service::ServiceOptions opts;
            opts.host = serve_host;
            opts.port = c.port;
            opts.speed = speed;
            opts.log = feedback_log.empty() ? nullptr : &log;
            service::Service svc(Pipeline::from_config(c), [in, reader] { return reader->next(); }, opts);
            svc.start();
            std::cout << "serving on http://" << serve_host << ':' << svc.port() << '\n' << std::flush;
            std::signal(SIGINT, [](int) { g_interrupted = true; });
            std::signal(SIGTERM, [](int) { g_interrupted = true; });
            while (!g_interrupted) std::this_thread::sleep_for(std::chrono::milliseconds(100));
            svc.stop();
            return 0;
        }
        for (const auto& [sub, args] : {std::pair{train_gate, &tg}, std::pair{train_pose, &tp}, std::pair{train_mouth, &tm}}) {
            if (!*sub) continue;
            const PipelineConfig c = args->cfg.resolve();
            const auto tmpl = load_template(c);
            training::TrainOptions opts;
            opts.seed = c.seed;
            opts.samples_per_class = args->samples;
            std::string model;
            if (sub == train_gate) model = mlkit::to_json(training::train_gate(tmpl, c.intrinsics, opts));
            else if (sub == train_pose) model = mlkit::to_json(training::train_pose(tmpl, c.intrinsics, opts));
            else model = features::to_json(training::train_mouth(tmpl, c.intrinsics, opts, args->raw || c.mouth_raw));
            spill(args->out, model + "\n");
            std::cout << "wrote " << args->out << '\n';
            return 0;
        }
        if (*report) {
            const auto rep = session::report_from_json(slurp(report_in));
            if (format == "json") std::cout << session::report_json(rep);
            else if (format == "csv") std::cout << session::report_csv(rep);
            else std::cout << session::report_text(rep);
            return 0;
        }
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}

}  // namespace ergowatch::cli
