#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include <Eigen/Core>

#include "ergowatch/frame.hpp"
#include "ergowatch/mlkit.hpp"

namespace ergowatch::trackfix {

inline constexpr std::size_t kReinitFeatureDim = 3 * kLandmarkCount;  // 228

/// Per-landmark Gaussian on inter-frame offsets plus the density threshold
/// that splits jitter from facial movement.
struct JitterModel {
    std::array<double, kLandmarkCount> mu{};
    std::array<double, kLandmarkCount> var{};  // mean squared deviation, pixels²
    double alpha = 0.05;
    double x1 = 0.0;
    double x2 = 0.0;
    // Φ(x2) − Φ(x1): probability mass of the jitter band.
    double in_band_mass = 0.0;

    double pe() const noexcept { return in_band_mass; }

    /// Fills alpha, x1, x2 and in_band_mass. Throws SchemaError unless
    /// 0 < alpha <= 1/sqrt(2π).
    void set_alpha(double a);
};

inline constexpr double kMaxDensity = 0.39894228040143267794;

JitterModel learn_jitter(std::span<const LandmarkFrame> still_frames, double alpha);

enum class OffsetClass { jitter, movement };

OffsetClass classify_offset(const JitterModel& model, std::size_t landmark, double offset);

std::string to_json(const JitterModel& model);
JitterModel jitter_model_from_json(std::string_view text);

/// (response, dx, dy) per landmark, relative to the landmark mass center.
Eigen::VectorXd reinit_feature(const LandmarkFrame& frame);

enum class GateStatus { tracked, lost };

enum class Suppression {
    hold,    // jitter keeps the previous filtered point
    average  // jitter keeps a running mean of raw points since the last movement
};

struct FilterOptions {
    Suppression mode = Suppression::average;
    int average_window = 30;  // frames; the mean becomes an EMA past this count
};

/// Single-writer tracking state: jitter suppression plus the lost/tracked
/// gate latch.
class TrackState {
public:
    TrackState() = default;
    TrackState(JitterModel model, FilterOptions options = {});

    /// Starts filtering from `anchor` (the previous filtered frame).
    void reset(const LandmarkFrame& anchor);
    /// Anchors on the mean landmark positions of a still sequence.
    void reset_to_mean(std::span<const LandmarkFrame> still_frames);

    bool has_previous() const noexcept { return previous_.has_value(); }
    const LandmarkFrame& previous() const { return *previous_; }
    const JitterModel& jitter_model() const noexcept { return model_; }
    const std::array<OffsetClass, kLandmarkCount>& last_classes() const noexcept { return last_classes_; }

    LandmarkFrame filter_frame(const LandmarkFrame& frame);

    void set_gate_model(mlkit::LinearModel model) { gate_ = std::move(model); }
    bool gate_trained() const noexcept { return gate_.has_value() && !gate_->empty(); }
    GateStatus status() const noexcept { return status_; }

    /// Raw gate decision: lost when the model score is negative.
    GateStatus gate(const Eigen::VectorXd& feature) const;

    /// Gate with latch: once lost, stays lost until a frame arrives whose
    /// tracked flag is set and that the gate scores as tracked.
    GateStatus update_gate(const LandmarkFrame& frame);

private:
    JitterModel model_;
    FilterOptions options_;
    std::optional<LandmarkFrame> previous_;
    std::array<int, kLandmarkCount> run_length_{};
    std::array<OffsetClass, kLandmarkCount> last_classes_{};
    std::optional<mlkit::LinearModel> gate_;
    GateStatus status_ = GateStatus::tracked;
};

}  // namespace ergowatch::trackfix
