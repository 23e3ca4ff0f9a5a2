#include "ergowatch/frame.hpp"

#include <cmath>
#include <istream>

#include "ergowatch/error.hpp"
#include "json.hpp"

namespace ergowatch {

using nlohmann::json;

namespace {

double number(const json& j, const char* key) {
    auto it = j.find(key);
    if (it == j.end()) throw SchemaError(std::string("missing field '") + key + "'");
    if (!it->is_number()) throw SchemaError(std::string("field '") + key + "' must be a number");
    return it->get<double>();
}

Point2 point(const json& j) {
    if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
        throw SchemaError("point must be [x, y]");
    return {j[0].get<double>(), j[1].get<double>()};
}

EyePatch parse_patch(const json& j, const char* side) {
    if (!j.is_object()) throw SchemaError(std::string("eyes.") + side + " must be an object");
    EyePatch patch;
    patch.center = {number(j, "cx"), number(j, "cy")};
    auto px = j.find("px");
    if (px == j.end() || !px->is_array() || px->empty())
        throw SchemaError(std::string("eyes.") + side + ".px must be a non-empty array of rows");
    patch.height = static_cast<int>(px->size());
    patch.width = static_cast<int>((*px)[0].size());
    if (patch.width < 1) throw SchemaError("eye patch rows must be non-empty");
    patch.pixels.reserve(static_cast<std::size_t>(patch.width * patch.height));
    for (const auto& row : *px) {
        if (!row.is_array() || static_cast<int>(row.size()) != patch.width)
            throw SchemaError("eye patch grid must be rectangular");
        for (const auto& rgb : row) {
            if (!rgb.is_array() || rgb.size() != 3) throw SchemaError("eye pixel must be [r, g, b]");
            std::array<std::uint8_t, 3> c{};
            for (std::size_t k = 0; k < 3; ++k) {
                if (!rgb[k].is_number()) throw SchemaError("eye pixel channel must be a number");
                const double v = rgb[k].get<double>();
                if (!(v >= 0.0 && v <= 255.0)) throw SchemaError("eye pixel channel outside [0, 255]");
                c[k] = static_cast<std::uint8_t>(std::lround(v));
            }
            patch.pixels.push_back({c[0], c[1], c[2]});
        }
    }
    return patch;
}

json patch_json(const EyePatch& patch) {
    json rows = json::array();
    for (int r = 0; r < patch.height; ++r) {
        json row = json::array();
        for (int c = 0; c < patch.width; ++c) {
            const Rgb& p = patch.at(r, c);
            row.push_back({p.r, p.g, p.b});
        }
        rows.push_back(std::move(row));
    }
    return {{"cx", patch.center.x}, {"cy", patch.center.y}, {"px", std::move(rows)}};
}

}  // namespace

void validate(const LandmarkFrame& frame) {
    if (!(frame.fps > 0.0) || !std::isfinite(frame.fps)) throw SchemaError("fps must be > 0");
    if (!(frame.d > 0.0) || !std::isfinite(frame.d)) throw SchemaError("d must be > 0");
    if (!std::isfinite(frame.t)) throw SchemaError("t must be finite");
    for (const auto& p : frame.points)
        if (!std::isfinite(p.x) || !std::isfinite(p.y)) throw SchemaError("points must be finite");
    for (double r : frame.responses)
        if (!(r >= 0.0 && r <= 1.0)) throw SchemaError("responses must lie in [0, 1]");
    if (frame.eyes) {
        for (const EyePatch* p : {&frame.eyes->left, &frame.eyes->right}) {
            if (p->width < 1 || p->height < 1 ||
                p->pixels.size() != static_cast<std::size_t>(p->width * p->height))
                throw SchemaError("eye patch grid must be rectangular with H, W >= 1");
        }
    }
}

LandmarkFrame parse_frame(std::string_view line, std::size_t line_no) {
    json j = json::parse(line.begin(), line.end(), nullptr, false);
    if (j.is_discarded()) throw ParseError(line_no, "malformed JSON record");
    if (!j.is_object()) throw ParseError(line_no, "frame record must be a JSON object");

    try {
        LandmarkFrame frame;
        frame.t = number(j, "t");
        frame.fps = number(j, "fps");
        frame.d = number(j, "d");

        auto pts = j.find("points");
        if (pts == j.end() || !pts->is_array()) throw SchemaError("missing 'points' array");
        if (pts->size() != kLandmarkCount)
            throw SchemaError("expected 76 points, got " + std::to_string(pts->size()));
        for (std::size_t i = 0; i < kLandmarkCount; ++i) frame.points[i] = point((*pts)[i]);

        if (auto r = j.find("responses"); r != j.end() && !r->is_null()) {
            if (!r->is_array() || r->size() != kLandmarkCount)
                throw SchemaError("'responses' must hold 76 numbers");
            for (std::size_t i = 0; i < kLandmarkCount; ++i) {
                if (!(*r)[i].is_number()) throw SchemaError("'responses' must hold 76 numbers");
                frame.responses[i] = (*r)[i].get<double>();
            }
        }
        if (auto tr = j.find("tracked"); tr != j.end() && !tr->is_null()) {
            if (!tr->is_boolean()) throw SchemaError("'tracked' must be a boolean");
            frame.tracked = tr->get<bool>();
        }
        if (auto e = j.find("eyes"); e != j.end() && !e->is_null()) {
            if (!e->is_object() || !e->contains("left") || !e->contains("right"))
                throw SchemaError("'eyes' must hold 'left' and 'right'");
            frame.eyes = EyePair{parse_patch((*e)["left"], "left"), parse_patch((*e)["right"], "right")};
        }
        validate(frame);
        return frame;
    } catch (const SchemaError& err) {
        if (line_no) throw SchemaError("line " + std::to_string(line_no) + ": " + err.what());
        throw;
    }
}

std::string serialize_frame(const LandmarkFrame& frame) {
    json pts = json::array();
    for (const auto& p : frame.points) pts.push_back({p.x, p.y});
    json j = {{"t", frame.t},
              {"fps", frame.fps},
              {"d", frame.d},
              {"points", std::move(pts)},
              {"responses", frame.responses},
              {"tracked", frame.tracked}};
    if (frame.eyes) j["eyes"] = {{"left", patch_json(frame.eyes->left)}, {"right", patch_json(frame.eyes->right)}};
    return j.dump();
}

std::optional<LandmarkFrame> FrameReader::next() {
    std::string text;
    while (std::getline(*in_, text)) {
        ++line_;
        if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
        LandmarkFrame frame = parse_frame(text, line_);
        if (last_t_ && !(frame.t > *last_t_))
            throw SchemaError("line " + std::to_string(line_) + ": timestamps must be strictly increasing");
        last_t_ = frame.t;
        return frame;
    }
    return std::nullopt;
}

std::vector<LandmarkFrame> read_frames(std::istream& in) {
    FrameReader reader(in);
    std::vector<LandmarkFrame> frames;
    while (auto f = reader.next()) frames.push_back(std::move(*f));
    return frames;
}

}  // namespace ergowatch
