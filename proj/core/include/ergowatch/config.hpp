#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "ergowatch/pose.hpp"

namespace ergowatch {

/// Runtime configuration. Empty model paths mean "train the built-in model
/// from the simulator with `seed`"; an empty template or rules path selects
/// the canonical template or the default rule set.
struct PipelineConfig {
    pose::CameraIntrinsics intrinsics;
    std::string template_path;
    double jitter_alpha = 0.05;
    std::string jitter_model;  // learned from the first still half second when empty
    std::string suppression = "average";
    double c_t = 2.5;
    double w_i = 4800.0;
    double h_i = 4800.0;
    double t_t = 1.5;
    std::string rules;
    double adaptation_alpha = 0.2;
    int feedback_batch = 0;  // 0 → number of rules
    double period_length = 600.0;
    double work_alarm_minutes = 30.0;
    double bad_pose_alarm_minutes = 10.0;
    std::string gate_model;
    std::string pose_model;
    std::string mouth_model;
    bool mouth_raw = false;  // built-in mouth model on raw image coordinates
    int port = 8080;
    std::uint64_t seed = 7;

    /// Thresholds positive, suppression known, every non-empty path exists.
    /// Throws ConfigError naming the offending field or path.
    void validate() const;
};

/// Names accepted by apply_override / config JSON, in declaration order.
const std::vector<std::string>& config_field_names();

/// Sets one field from its textual value. Throws ConfigError on an unknown
/// field or an unparsable value.
void apply_override(PipelineConfig& config, std::string_view field, std::string_view value);

PipelineConfig config_from_json(std::string_view text, const std::filesystem::path& base_dir = {});
/// Reads `path`; relative paths inside the file resolve against its directory.
PipelineConfig load_config(const std::filesystem::path& path);
std::string to_json(const PipelineConfig& config);

}  // namespace ergowatch
