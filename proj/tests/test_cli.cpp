#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"
#include "doctest.h"
#include "ergowatch/config.hpp"
#include "ergowatch/simulate.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Captured {
    int code = 0;
    std::string out;
    std::string err;
};

Captured cli(std::vector<std::string> args) {
    args.insert(args.begin(), "ergowatch");
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    std::ostringstream out, err;
    auto* old_out = std::cout.rdbuf(out.rdbuf());
    auto* old_err = std::cerr.rdbuf(err.rdbuf());
    Captured c;
    c.code = ergowatch::cli::run(static_cast<int>(argv.size()), argv.data());
    std::cout.rdbuf(old_out);
    std::cerr.rdbuf(old_err);
    c.out = out.str();
    c.err = err.str();
    return c;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("ergowatch_cli_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

const fs::path kData = ERGOWATCH_DATA_DIR;

}  // namespace

TEST_CASE("missing template exits 2 and names the path") {
    const auto r = cli({"run", "--input", "x.jsonl", "--report", "out", "--template", "/no/such/face.json"});
    CHECK(r.code == 2);
    CHECK(r.err.find("/no/such/face.json") != std::string::npos);
}

TEST_CASE("missing config file and bad overrides exit 2") {
    auto r = cli({"run", "--input", "x.jsonl", "--report", "out", "--config", "/no/such/config.json"});
    CHECK(r.code == 2);
    CHECK(r.err.find("/no/such/config.json") != std::string::npos);
    r = cli({"run", "--input", "x.jsonl", "--report", "out", "--c_t", "abc"});
    CHECK(r.code == 2);
    CHECK(r.err.find("c_t") != std::string::npos);
    r = cli({"run", "--input", "x.jsonl", "--report", "out", "--suppression", "median"});
    CHECK(r.code == 2);
    r = cli({"run", "--input", "x.jsonl", "--report", "out", "--mouth_raw", "maybe"});
    CHECK(r.code == 2);
}

TEST_CASE("every config field has a flag and the shipped config loads") {
    const auto c = ergowatch::load_config(kData / "config.json");
    CHECK(fs::path(c.template_path) == (kData / "template.json").lexically_normal());
    CHECK_NOTHROW(c.validate());
    const auto r = cli({"run", "--help"});
    CHECK(r.code == 0);
    for (const auto& name : ergowatch::config_field_names()) CHECK(r.out.find("--" + name) != std::string::npos);
}

TEST_CASE("simulate then run: report totals match ground truth") {
    const auto dir = scratch("roundtrip");
    ergowatch::sim::StreamScript script;
    script.duration = 240.0;
    for (double t = 3.0; t < 235.0; t += 3.7) script.blinks.push_back(t);
    script.yawns = {{60.0, 63.0}, {130.0, 132.0}, {200.0, 200.8}};
    script.absences = {{150.0, 170.0}};
    script.blinks.erase(std::remove_if(script.blinks.begin(), script.blinks.end(),
                                       [](double t) { return t > 149.0 && t < 171.0; }),
                        script.blinks.end());
    {
        std::ofstream f(dir / "script.json");
        f << ergowatch::sim::to_json(script);
    }
    auto r = cli({"simulate", "--script", (dir / "script.json").string(), "--out", (dir / "stream.jsonl").string(),
                  "--truth", (dir / "truth.json").string(), "--sim-seed", "3"});
    REQUIRE(r.code == 0);
    const auto truth = ergowatch::sim::ground_truth_from_json(slurp(dir / "truth.json"));
    CHECK(truth.frame_count == 7200);

    r = cli({"run", "--config", (kData / "config.json").string(), "--input", (dir / "stream.jsonl").string(),
             "--report", (dir / "report").string(), "--period_length", "120"});
    REQUIRE(r.code == 0);
    CHECK(r.out.find("status, blinks and yawns per period") != std::string::npos);
    const auto report = json::parse(slurp(dir / "report" / "report.json"));
    CHECK(report["periods"].size() == 2);
    CHECK(report["totals"]["blinks"] == truth.blinks.size());
    CHECK(report["totals"]["yawns"] == 2);
    CHECK(fs::exists(dir / "report" / "report.csv"));

    const auto log = slurp(dir / "report" / "events.jsonl");
    std::istringstream lines(log);
    std::string line;
    std::size_t blinks = 0;
    while (std::getline(lines, line))
        if (json::parse(line)["type"] == "blink") ++blinks;
    CHECK(blinks == truth.blinks.size());

    const auto again = dir / "again";
    r = cli({"run", "--config", (kData / "config.json").string(), "--input", (dir / "stream.jsonl").string(),
             "--report", again.string(), "--period_length", "120"});
    REQUIRE(r.code == 0);
    CHECK(slurp(again / "events.jsonl") == log);
    CHECK(slurp(again / "report.json") == slurp(dir / "report" / "report.json"));

    r = cli({"report", "--input", (dir / "report" / "report.json").string(), "--format", "csv"});
    CHECK(r.code == 0);
    CHECK(r.out == slurp(dir / "report" / "report.csv"));
    r = cli({"report", "--input", (dir / "report" / "report.json").string(), "--format", "json"});
    CHECK(r.out == slurp(dir / "report" / "report.json"));
    fs::remove_all(dir);
}

TEST_CASE("train subcommands write loadable models that run accepts") {
    const auto dir = scratch("train");
    REQUIRE(cli({"train-gate", "--out", (dir / "gate.json").string(), "--samples", "60"}).code == 0);
    REQUIRE(cli({"train-pose", "--out", (dir / "pose.json").string(), "--samples", "60"}).code == 0);
    REQUIRE(cli({"train-mouth", "--out", (dir / "mouth.json").string(), "--samples", "60", "--raw"}).code == 0);
    CHECK(json::parse(slurp(dir / "mouth.json"))["raw_coordinates"] == true);

    ergowatch::sim::StreamScript script;
    script.duration = 20.0;
    script.blinks = {3.0, 8.0, 14.0};
    {
        std::ofstream f(dir / "script.json");
        f << ergowatch::sim::to_json(script);
    }
    REQUIRE(cli({"simulate", "--script", (dir / "script.json").string(), "--out", (dir / "s.jsonl").string()}).code == 0);
    const auto r = cli({"run", "--input", (dir / "s.jsonl").string(), "--report", (dir / "rep").string(),
                        "--gate_model", (dir / "gate.json").string(), "--pose_model", (dir / "pose.json").string(),
                        "--mouth_model", (dir / "mouth.json").string()});
    CHECK(r.code == 0);
    CHECK(json::parse(slurp(dir / "rep" / "report.json"))["totals"]["blinks"] == 3);
    fs::remove_all(dir);
}

TEST_CASE("malformed stream exits 1 with the line number") {
    const auto dir = scratch("bad");
    {
        std::ofstream f(dir / "bad.jsonl");
        f << "{\"t\": 0, \"fps\": 30, \"d\": 600, \"points\": [[1,2]]}\n";
    }
    const auto r = cli({"run", "--input", (dir / "bad.jsonl").string(), "--report", (dir / "rep").string()});
    CHECK(r.code == 1);
    CHECK(r.err.find("line 1") != std::string::npos);
    fs::remove_all(dir);
}
