#pragma once

#include <cstddef>
#include <deque>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace ergowatch::recommend {

enum class MembershipKind { ramp_up, ramp_down, trapezoid };

/// Premise confidence as a function of one named feature. Ramps take two
/// breakpoints (a, b); trapezoids take four (a, b, c, d).
struct MembershipFn {
    MembershipKind kind = MembershipKind::ramp_up;
    std::vector<double> breakpoints;
    std::string feature;

    double evaluate(double x) const;
    void validate() const;
};

enum class Consequence { take_break, raise_alarm, keep_working, adjust_posture };

std::string_view to_string(Consequence c);
Consequence consequence_from_string(std::string_view s);

struct Rule {
    std::string name;
    std::vector<MembershipFn> premises;
    double weight = 1.0;
    Consequence consequence = Consequence::take_break;
};

struct RuleSet {
    std::vector<Rule> rules;
    double alpha = 0.2;       // adaptation rate
    double ridge = 1e-3;
    double threshold = 0.0;   // f >= threshold emits a recommendation
    std::size_t batch_size = 0;  // 0 → number of rules
    std::size_t window = 50;     // feedback samples kept for refits

    std::size_t size() const noexcept { return rules.size(); }
    std::size_t effective_batch() const noexcept { return batch_size ? batch_size : rules.size(); }
    Eigen::VectorXd weights() const;
    void set_weights(const Eigen::VectorXd& b);
    void validate() const;

    /// Crisp expert rules as ramps of ±33% around their thresholds, plus a
    /// bad-pose-proportion rule and a keep-working rule.
    static RuleSet defaults();
};

std::string to_json(const RuleSet& rules);
RuleSet rule_set_from_json(std::string_view text);

// Feature ids used by the default rules.
namespace feature_id {
inline constexpr std::string_view work_minutes = "work_minutes";
inline constexpr std::string_view bad_pose_minutes = "bad_pose_minutes";
inline constexpr std::string_view yawns_period = "yawns_period";
inline constexpr std::string_view bad_pose_fraction = "bad_pose_fraction";
inline constexpr std::string_view blink_rate = "blink_rate";
}  // namespace feature_id

using FeatureSnapshot = std::map<std::string, double, std::less<>>;
/// θ: one row per rule, one entry per premise of that rule.
using PremiseScores = std::vector<std::vector<double>>;

PremiseScores eval_premises(const RuleSet& rules, const FeatureSnapshot& features);

/// μ_i = Π_j θ_ij.
Eigen::VectorXd firing_strengths(const PremiseScores& theta);

/// ξ = μ / Σμ; nullopt when every μ_i is zero.
std::optional<Eigen::VectorXd> normalized_strengths(const PremiseScores& theta);

/// f = bᵀξ; nullopt when no rule is active.
std::optional<double> infer(const RuleSet& rules, const PremiseScores& theta);

struct FeedbackSample {
    PremiseScores theta;
    int y = -1;  // +1 endorse the break/alert direction, -1 reject it
    double t = 0.0;
    std::string source = "explicit";
};

std::string to_json_line(const FeedbackSample& sample);

/// Batch least squares on ξ rows: b* = argmin |Ξb − y|² + ridge |b|².
Eigen::VectorXd train_b(const std::vector<FeedbackSample>& samples, std::size_t rule_count, double ridge);

/// (1 − α) b_prev + α b_star.
Eigen::VectorXd adapt(const Eigen::VectorXd& b_prev, const Eigen::VectorXd& b_star, double alpha);

struct Recommendation {
    Consequence action = Consequence::keep_working;
    double f = 0.0;
    bool alert = false;  // false → keep working, nothing shown
    std::optional<std::size_t> dominant_rule;
};

/// f >= threshold → consequence of the max-ξ rule among rules whose weight is
/// at or above the threshold; otherwise keep working.
Recommendation decide(const RuleSet& rules, double f, const Eigen::VectorXd& xi);

enum class FeedbackAction { like, dislike };

std::string_view to_string(FeedbackAction a);
FeedbackAction feedback_action_from_string(std::string_view s);

struct FeedbackOutcome {
    bool accepted = false;
    bool refit = false;
    std::optional<FeedbackSample> sample;
    std::optional<Eigen::VectorXd> b_star;
};

/// Explicit-feedback loop: buffers samples and, every `effective_batch()`
/// accepted samples, refits b* over the window and blends it in.
class FeedbackLearner {
public:
    explicit FeedbackLearner(RuleSet rules);

    const RuleSet& rules() const noexcept { return rules_; }
    const std::deque<FeedbackSample>& buffer() const noexcept { return buffer_; }

    FeedbackOutcome feedback(FeedbackAction action, const PremiseScores& context, double t, bool recommendation_active);

private:
    RuleSet rules_;
    std::deque<FeedbackSample> buffer_;
    std::size_t since_refit_ = 0;
};

}  // namespace ergowatch::recommend
