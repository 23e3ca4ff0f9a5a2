#pragma once

#include <cstddef>
#include <optional>
#include <string>

#include <Eigen/Core>

#include "ergowatch/frame.hpp"
#include "ergowatch/mlkit.hpp"

namespace ergowatch::features {

enum class EyeState { closed = 0, open = 1, indeterminate = 2 };

struct BlinkParams {
    double c_t = 2.5;      // threshold on the normalized patch colour
    double w_i = 4800.0;   // patch width index; w_p = round(w_i / d)
    double h_i = 4800.0;
    int refractory_frames = 2;
};

struct EyeStateResult {
    EyeState state = EyeState::indeterminate;
    bool data_gap = false;
    double mean_color = 0.0;  // C̄
    double normalized = 0.0;  // C̄*
};

/// Self-adaptive eye-state detector for one eye. Running statistics are
/// order dependent; advance strictly in frame order.
class EyeDetector {
public:
    EyeDetector(double frame_rate, const BlinkParams& params);

    EyeStateResult update(const EyePatch* patch, double d);

    double mean() const noexcept { return ec_; }
    double variance() const noexcept { return var_c_; }
    std::size_t frame_count() const noexcept { return frame_count_; }
    double frame_rate() const noexcept { return r_f_; }

private:
    BlinkParams params_;
    double r_f_;
    double ec_ = 0.0;
    double var_c_ = 0.0;
    std::size_t frame_count_ = 0;
};

/// Mean of (r + g + b) over a centered w_p × h_p crop of the patch.
double patch_mean_color(const EyePatch& patch, int w_p, int h_p);

/// True on an open → closed transition between determinate states.
bool detect_blink(EyeState prev, EyeState next);

struct BlinkEvent {
    enum class Eye { left, right, both };
    std::size_t frame = 0;
    double t = 0.0;
    Eye eye = Eye::both;
};

std::string_view to_string(BlinkEvent::Eye eye);

/// Both eyes plus the blink rule. A frame where either eye closes yields at
/// most one event; closings within `refractory_frames` of the previous blink
/// are merged into it.
class BlinkDetector {
public:
    BlinkDetector(double frame_rate, const BlinkParams& params);

    std::optional<BlinkEvent> update(std::size_t frame, double t, const std::optional<EyePair>& eyes, double d);

    const EyeDetector& left() const noexcept { return left_; }
    const EyeDetector& right() const noexcept { return right_; }
    EyeState last_left() const noexcept { return prev_left_; }
    EyeState last_right() const noexcept { return prev_right_; }

private:
    BlinkParams params_;
    EyeDetector left_;
    EyeDetector right_;
    EyeState prev_left_ = EyeState::indeterminate;
    EyeState prev_right_ = EyeState::indeterminate;
    std::optional<std::size_t> last_blink_frame_;
};

inline constexpr std::size_t kMouthFeatureDim = 2 * landmarks::kMouthCount;  // 38

enum class MouthState { closed, open };

/// Linear open/closed classifier over mouth landmarks. Positive score = open.
struct MouthModel {
    mlkit::LinearModel model;
    // Raw image coordinates instead of centered, interocular-scaled ones.
    bool raw_coordinates = false;
};

Eigen::VectorXd mouth_feature(const LandmarkFrame& frame, bool raw_coordinates = false);

MouthState classify_mouth(const MouthModel& model, const LandmarkFrame& frame);

/// Report encoding: closed → 1.00, open → 2.00.
inline double report_value(MouthState s) { return s == MouthState::open ? 2.0 : 1.0; }

struct YawnEvent {
    double t = 0.0;         // detection time
    double duration = 0.0;  // open time at detection
};

class YawnDetector {
public:
    explicit YawnDetector(double t_t = 1.5);

    std::optional<YawnEvent> update(MouthState mouth, double t);
    /// Clears any open interval (used across tracking gaps).
    void reset() noexcept;

    double threshold() const noexcept { return t_t_; }
    std::optional<double> open_since() const noexcept { return open_since_; }

private:
    double t_t_;
    std::optional<double> open_since_;
    bool latched_ = false;
};

std::string to_json(const MouthModel& model);
MouthModel mouth_model_from_json(std::string_view text);

}  // namespace ergowatch::features
