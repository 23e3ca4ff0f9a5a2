#include "ergowatch/config.hpp"

#include <charconv>
#include <cmath>
#include <functional>

#include "ergowatch/error.hpp"
#include "json_util.hpp"

namespace ergowatch {

using nlohmann::json;

namespace {

enum class Kind { real, integer, unsigned_integer, boolean, text, path };

struct Field {
    std::string name;
    Kind kind;
    std::function<json(const PipelineConfig&)> get;
    std::function<void(PipelineConfig&, const json&)> set;
};

template <class T>
Field field(std::string name, Kind kind, T PipelineConfig::*member) {
    return {std::move(name), kind, [member](const PipelineConfig& c) { return json(c.*member); },
            [member](PipelineConfig& c, const json& v) { c.*member = v.get<T>(); }};
}

template <class T>
Field intrinsic(std::string name, T pose::CameraIntrinsics::*member) {
    return {std::move(name), Kind::real, [member](const PipelineConfig& c) { return json(c.intrinsics.*member); },
            [member](PipelineConfig& c, const json& v) { c.intrinsics.*member = v.get<T>(); }};
}

const std::vector<Field>& fields() {
    static const std::vector<Field> table = {
        intrinsic("fx", &pose::CameraIntrinsics::fx),
        intrinsic("fy", &pose::CameraIntrinsics::fy),
        intrinsic("cx", &pose::CameraIntrinsics::cx),
        intrinsic("cy", &pose::CameraIntrinsics::cy),
        field("template", Kind::path, &PipelineConfig::template_path),
        field("jitter_alpha", Kind::real, &PipelineConfig::jitter_alpha),
        field("jitter_model", Kind::path, &PipelineConfig::jitter_model),
        field("suppression", Kind::text, &PipelineConfig::suppression),
        field("c_t", Kind::real, &PipelineConfig::c_t),
        field("w_i", Kind::real, &PipelineConfig::w_i),
        field("h_i", Kind::real, &PipelineConfig::h_i),
        field("t_t", Kind::real, &PipelineConfig::t_t),
        field("rules", Kind::path, &PipelineConfig::rules),
        field("adaptation_alpha", Kind::real, &PipelineConfig::adaptation_alpha),
        field("feedback_batch", Kind::integer, &PipelineConfig::feedback_batch),
        field("period_length", Kind::real, &PipelineConfig::period_length),
        field("work_alarm_minutes", Kind::real, &PipelineConfig::work_alarm_minutes),
        field("bad_pose_alarm_minutes", Kind::real, &PipelineConfig::bad_pose_alarm_minutes),
        field("gate_model", Kind::path, &PipelineConfig::gate_model),
        field("pose_model", Kind::path, &PipelineConfig::pose_model),
        field("mouth_model", Kind::path, &PipelineConfig::mouth_model),
        field("mouth_raw", Kind::boolean, &PipelineConfig::mouth_raw),
        field("port", Kind::integer, &PipelineConfig::port),
        field("seed", Kind::unsigned_integer, &PipelineConfig::seed),
    };
    return table;
}

const Field& find_field(std::string_view name) {
    for (const auto& f : fields())
        if (f.name == name) return f;
    throw ConfigError("unknown config field '" + std::string(name) + "'");
}

template <class T>
T parse_number(std::string_view field, std::string_view text) {
    T v{};
    const auto* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, v);
    if (ec != std::errc() || ptr != end)
        throw ConfigError("config field '" + std::string(field) + "': cannot parse '" + std::string(text) + "'");
    return v;
}

void require_positive(double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(std::string("config field '") + name + "' must be > 0");
}

void require_path(const std::string& path, const char* name) {
    if (path.empty()) return;
    std::error_code ec;
    if (!std::filesystem::exists(path, ec))
        throw ConfigError(std::string("config field '") + name + "': file not found: " + path);
}

}  // namespace

void PipelineConfig::validate() const {
    try {
        intrinsics.validate();
    } catch (const Error& e) {
        throw ConfigError(std::string("intrinsics: ") + e.what());
    }
    require_positive(jitter_alpha, "jitter_alpha");
    if (jitter_alpha > 0.39894228040143267794) throw ConfigError("config field 'jitter_alpha' must be <= 1/sqrt(2*pi)");
    require_positive(c_t, "c_t");
    require_positive(w_i, "w_i");
    require_positive(h_i, "h_i");
    require_positive(t_t, "t_t");
    require_positive(period_length, "period_length");
    require_positive(work_alarm_minutes, "work_alarm_minutes");
    require_positive(bad_pose_alarm_minutes, "bad_pose_alarm_minutes");
    if (!(adaptation_alpha >= 0.0 && adaptation_alpha <= 1.0))
        throw ConfigError("config field 'adaptation_alpha' must lie in [0, 1]");
    if (feedback_batch < 0) throw ConfigError("config field 'feedback_batch' must be >= 0");
    if (port < 0 || port > 65535) throw ConfigError("config field 'port' must lie in [0, 65535]");
    if (suppression != "average" && suppression != "hold")
        throw ConfigError("config field 'suppression' must be 'average' or 'hold'");
    require_path(template_path, "template");
    require_path(jitter_model, "jitter_model");
    require_path(rules, "rules");
    require_path(gate_model, "gate_model");
    require_path(pose_model, "pose_model");
    require_path(mouth_model, "mouth_model");
}

const std::vector<std::string>& config_field_names() {
    static const std::vector<std::string> names = [] {
        std::vector<std::string> out;
        for (const auto& f : fields()) out.push_back(f.name);
        return out;
    }();
    return names;
}

void apply_override(PipelineConfig& config, std::string_view name, std::string_view value) {
    const Field& f = find_field(name);
    switch (f.kind) {
    case Kind::real: f.set(config, json(parse_number<double>(name, value))); break;
    case Kind::integer: f.set(config, json(parse_number<int>(name, value))); break;
    case Kind::unsigned_integer: f.set(config, json(parse_number<std::uint64_t>(name, value))); break;
    case Kind::boolean:
        if (value == "true" || value == "1") f.set(config, json(true));
        else if (value == "false" || value == "0") f.set(config, json(false));
        else throw ConfigError("config field '" + std::string(name) + "': expected true or false, got '" + std::string(value) + "'");
        break;
    case Kind::text:
    case Kind::path: f.set(config, json(std::string(value))); break;
    }
}

PipelineConfig config_from_json(std::string_view text, const std::filesystem::path& base_dir) {
    json j;
    try {
        j = detail::parse_json(text, "config");
    } catch (const ParseError& e) {
        throw ConfigError(e.what());
    }
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    PipelineConfig c;
    for (const auto& [key, value] : j.items()) {
        const Field& f = find_field(key);
        try {
            json v = value;
            if (f.kind == Kind::path && v.is_string() && !v.get<std::string>().empty() && !base_dir.empty()) {
                std::filesystem::path p(v.get<std::string>());
                if (p.is_relative()) v = (base_dir / p).lexically_normal().string();
            }
            f.set(c, v);
        } catch (const json::exception& e) {
            throw ConfigError("config field '" + key + "': " + e.what());
        }
    }
    return c;
}

PipelineConfig load_config(const std::filesystem::path& path) {
    std::string text;
    try {
        text = detail::read_file(path);
    } catch (const IoError&) {
        throw ConfigError("config file not found: " + path.string());
    }
    return config_from_json(text, path.parent_path());
}

std::string to_json(const PipelineConfig& config) {
    json j = json::object();
    for (const auto& f : fields()) j[f.name] = f.get(config);
    return j.dump(2);
}

}  // namespace ergowatch
