#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ergowatch {

inline constexpr std::size_t kLandmarkCount = 76;

// 0-based landmark numbering (MUCT-style 76-point layout).
namespace landmarks {
inline constexpr std::array<int, 10> kRigid{38, 39, 40, 41, 42, 43, 44, 46, 47, 67};
inline constexpr int kPoseOrigin = 67;
inline constexpr int kMouthFirst = 48;
inline constexpr int kMouthLast = 66;
inline constexpr int kMouthCount = kMouthLast - kMouthFirst + 1;
inline constexpr int kLeftPupil = 31;
inline constexpr int kRightPupil = 36;
}  // namespace landmarks

struct Point2 {
    double x = 0.0;
    double y = 0.0;

    friend bool operator==(const Point2&, const Point2&) = default;
};

struct Rgb {
    std::uint8_t r = 0;
    std::uint8_t g = 0;
    std::uint8_t b = 0;

    friend bool operator==(const Rgb&, const Rgb&) = default;
};

/// Colour raster around one eyeball landmark, stored row-major.
struct EyePatch {
    Point2 center;
    int width = 0;
    int height = 0;
    std::vector<Rgb> pixels;

    const Rgb& at(int row, int col) const { return pixels[static_cast<std::size_t>(row * width + col)]; }
    Rgb& at(int row, int col) { return pixels[static_cast<std::size_t>(row * width + col)]; }

    friend bool operator==(const EyePatch&, const EyePatch&) = default;
};

struct EyePair {
    EyePatch left;
    EyePatch right;

    friend bool operator==(const EyePair&, const EyePair&) = default;
};

/// One timestamped tracker output. Immutable once built by a reader or simulator.
struct LandmarkFrame {
    double t = 0.0;
    double fps = 30.0;
    double d = 1.0;
    std::array<Point2, kLandmarkCount> points{};
    std::array<double, kLandmarkCount> responses{};
    bool tracked = true;
    std::optional<EyePair> eyes;

    LandmarkFrame() { responses.fill(1.0); }

    friend bool operator==(const LandmarkFrame&, const LandmarkFrame&) = default;
};

/// Throws SchemaError when an invariant of LandmarkFrame is violated.
void validate(const LandmarkFrame& frame);

/// Parses one JSONL frame record. Missing optional fields take their defaults
/// (responses 1.0, tracked true, no eyes).
LandmarkFrame parse_frame(std::string_view line, std::size_t line_no = 0);

std::string serialize_frame(const LandmarkFrame& frame);

/// Streams frames from a JSONL source, skipping blank lines and enforcing
/// strictly increasing timestamps.
class FrameReader {
public:
    explicit FrameReader(std::istream& in) : in_(&in) {}

    std::optional<LandmarkFrame> next();
    std::size_t line() const noexcept { return line_; }

private:
    std::istream* in_;
    std::size_t line_ = 0;
    std::optional<double> last_t_;
};

std::vector<LandmarkFrame> read_frames(std::istream& in);

}  // namespace ergowatch
