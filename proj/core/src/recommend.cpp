#include "ergowatch/recommend.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>

#include "ergowatch/error.hpp"
#include "ergowatch/mlkit.hpp"
#include "json_util.hpp"

namespace ergowatch::recommend {

using nlohmann::json;

double MembershipFn::evaluate(double x) const {
    const auto& p = breakpoints;
    double v = 0.0;
    switch (kind) {
        case MembershipKind::ramp_up:
            v = x <= p[0] ? 0.0 : x >= p[1] ? 1.0 : (x - p[0]) / (p[1] - p[0]);
            break;
        case MembershipKind::ramp_down:
            v = x <= p[0] ? 1.0 : x >= p[1] ? 0.0 : (p[1] - x) / (p[1] - p[0]);
            break;
        case MembershipKind::trapezoid:
            if (x <= p[0] || x >= p[3]) v = 0.0;
            else if (x < p[1]) v = (x - p[0]) / (p[1] - p[0]);
            else if (x <= p[2]) v = 1.0;
            else v = (p[3] - x) / (p[3] - p[2]);
            break;
    }
    return std::clamp(v, 0.0, 1.0);
}

void MembershipFn::validate() const {
    const std::size_t need = kind == MembershipKind::trapezoid ? 4 : 2;
    if (breakpoints.size() != need)
        throw SchemaError("membership on '" + feature + "' needs " + std::to_string(need) + " breakpoints");
    for (std::size_t i = 1; i < need; ++i)
        if (!(breakpoints[i] > breakpoints[i - 1]))
            throw SchemaError("membership breakpoints on '" + feature + "' must be strictly increasing");
    if (feature.empty()) throw SchemaError("membership needs a source feature id");
}

std::string_view to_string(Consequence c) {
    switch (c) {
        case Consequence::take_break: return "take-break";
        case Consequence::raise_alarm: return "raise-alarm";
        case Consequence::keep_working: return "keep-working";
        case Consequence::adjust_posture: return "adjust-posture";
    }
    return "keep-working";
}

Consequence consequence_from_string(std::string_view s) {
    for (Consequence c : {Consequence::take_break, Consequence::raise_alarm, Consequence::keep_working,
                          Consequence::adjust_posture})
        if (to_string(c) == s) return c;
    throw SchemaError("unknown consequence '" + std::string(s) + "'");
}

Eigen::VectorXd RuleSet::weights() const {
    Eigen::VectorXd b(static_cast<Eigen::Index>(rules.size()));
    for (std::size_t i = 0; i < rules.size(); ++i) b[static_cast<Eigen::Index>(i)] = rules[i].weight;
    return b;
}

void RuleSet::set_weights(const Eigen::VectorXd& b) {
    if (static_cast<std::size_t>(b.size()) != rules.size()) throw DimensionError("weight vector length != rule count");
    for (std::size_t i = 0; i < rules.size(); ++i) rules[i].weight = b[static_cast<Eigen::Index>(i)];
}

void RuleSet::validate() const {
    if (rules.empty()) throw SchemaError("rule set needs at least one rule");
    for (const auto& r : rules) {
        if (r.premises.empty()) throw SchemaError("rule '" + r.name + "' needs at least one premise");
        for (const auto& m : r.premises) m.validate();
        if (!std::isfinite(r.weight)) throw SchemaError("rule weights must be finite");
    }
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw SchemaError("adaptation alpha must lie in [0, 1]");
    if (!(ridge >= 0.0)) throw SchemaError("ridge must be >= 0");
    if (window < 1) throw SchemaError("feedback window must be >= 1");
}

RuleSet RuleSet::defaults() {
    constexpr double lo = 2.0 / 3.0;
    constexpr double hi = 4.0 / 3.0;
    auto up = [](std::string_view f, double c) {
        return MembershipFn{MembershipKind::ramp_up, {c * lo, c * hi}, std::string(f)};
    };
    auto down = [](std::string_view f, double c) {
        return MembershipFn{MembershipKind::ramp_down, {c * lo, c * hi}, std::string(f)};
    };
    RuleSet rs;
    rs.rules = {
        {"long-work", {up(feature_id::work_minutes, 30.0)}, 1.0, Consequence::take_break},
        {"bad-pose", {up(feature_id::bad_pose_minutes, 10.0)}, 1.0, Consequence::raise_alarm},
        {"yawning", {up(feature_id::yawns_period, 5.0)}, 1.0, Consequence::take_break},
        {"posture-share", {up(feature_id::bad_pose_fraction, 0.5)}, 1.0, Consequence::adjust_posture},
        {"fresh",
         {down(feature_id::work_minutes, 30.0), down(feature_id::bad_pose_minutes, 10.0),
          down(feature_id::yawns_period, 5.0), down(feature_id::bad_pose_fraction, 0.5)},
         -1.0,
         Consequence::keep_working},
    };
    return rs;
}

namespace {

std::string_view kind_name(MembershipKind k) {
    switch (k) {
        case MembershipKind::ramp_up: return "ramp-up";
        case MembershipKind::ramp_down: return "ramp-down";
        case MembershipKind::trapezoid: return "trapezoid";
    }
    return "ramp-up";
}

MembershipKind kind_from(std::string_view s) {
    for (auto k : {MembershipKind::ramp_up, MembershipKind::ramp_down, MembershipKind::trapezoid})
        if (kind_name(k) == s) return k;
    throw SchemaError("unknown membership kind '" + std::string(s) + "'");
}

}  // namespace

std::string to_json(const RuleSet& rs) {
    json rules = json::array();
    for (const auto& r : rs.rules) {
        json premises = json::array();
        for (const auto& m : r.premises)
            premises.push_back({{"kind", kind_name(m.kind)}, {"breakpoints", m.breakpoints}, {"feature", m.feature}});
        rules.push_back({{"name", r.name}, {"premises", std::move(premises)}, {"weight", r.weight},
                         {"consequence", to_string(r.consequence)}});
    }
    return json{{"format_version", 1}, {"rules", std::move(rules)}, {"alpha", rs.alpha}, {"ridge", rs.ridge},
                {"threshold", rs.threshold}, {"batch_size", rs.batch_size}, {"window", rs.window}}
        .dump(2);
}

RuleSet rule_set_from_json(std::string_view text) {
    json j = detail::parse_json(text, "rule set");
    RuleSet rs;
    try {
        if (j.value("format_version", 0) != 1) throw SchemaError("unsupported rule set format_version");
        for (const auto& r : j.at("rules")) {
            Rule rule;
            rule.name = r.value("name", std::string{});
            rule.weight = r.at("weight").get<double>();
            rule.consequence = consequence_from_string(r.at("consequence").get<std::string>());
            for (const auto& m : r.at("premises"))
                rule.premises.push_back({kind_from(m.at("kind").get<std::string>()),
                                         m.at("breakpoints").get<std::vector<double>>(),
                                         m.at("feature").get<std::string>()});
            rs.rules.push_back(std::move(rule));
        }
        rs.alpha = j.value("alpha", rs.alpha);
        rs.ridge = j.value("ridge", rs.ridge);
        rs.threshold = j.value("threshold", rs.threshold);
        rs.batch_size = j.value("batch_size", rs.batch_size);
        rs.window = j.value("window", rs.window);
    } catch (const json::exception& e) {
        throw SchemaError(std::string("rule set: ") + e.what());
    }
    rs.validate();
    return rs;
}

PremiseScores eval_premises(const RuleSet& rules, const FeatureSnapshot& features) {
    PremiseScores theta;
    theta.reserve(rules.rules.size());
    for (const auto& r : rules.rules) {
        std::vector<double> row;
        row.reserve(r.premises.size());
        for (const auto& m : r.premises) {
            auto it = features.find(m.feature);
            if (it == features.end()) throw SchemaError("feature snapshot lacks '" + m.feature + "'");
            row.push_back(m.evaluate(it->second));
        }
        theta.push_back(std::move(row));
    }
    return theta;
}

Eigen::VectorXd firing_strengths(const PremiseScores& theta) {
    Eigen::VectorXd mu(static_cast<Eigen::Index>(theta.size()));
    for (std::size_t i = 0; i < theta.size(); ++i) {
        double p = 1.0;
        for (double v : theta[i]) p *= v;
        mu[static_cast<Eigen::Index>(i)] = p;
    }
    return mu;
}

std::optional<Eigen::VectorXd> normalized_strengths(const PremiseScores& theta) {
    Eigen::VectorXd mu = firing_strengths(theta);
    const double total = mu.sum();
    if (!(total > 0.0)) return std::nullopt;
    return mu / total;
}

std::optional<double> infer(const RuleSet& rules, const PremiseScores& theta) {
    if (theta.size() != rules.rules.size()) throw DimensionError("θ row count != rule count");
    auto xi = normalized_strengths(theta);
    if (!xi) return std::nullopt;
    return rules.weights().dot(*xi);
}

std::string to_json_line(const FeedbackSample& s) {
    return json{{"theta", s.theta}, {"y", s.y}, {"t", s.t}, {"source", s.source}}.dump();
}

Eigen::VectorXd train_b(const std::vector<FeedbackSample>& samples, std::size_t rule_count, double ridge) {
    std::vector<Eigen::VectorXd> rows;
    std::vector<double> ys;
    for (const auto& s : samples) {
        if (s.theta.size() != rule_count) throw DimensionError("feedback θ row count != rule count");
        if (s.y != 1 && s.y != -1) throw SchemaError("feedback target must be ±1");
        auto xi = normalized_strengths(s.theta);
        if (!xi) continue;  // no active rule: carries no information about b
        rows.push_back(std::move(*xi));
        ys.push_back(s.y);
    }
    if (rows.empty()) throw RankError("no feedback sample activates any rule");
    Eigen::MatrixXd xi(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rule_count));
    Eigen::VectorXd y(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        xi.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
        y[static_cast<Eigen::Index>(i)] = ys[i];
    }
    return mlkit::least_squares(xi, y, ridge);
}

Eigen::VectorXd adapt(const Eigen::VectorXd& b_prev, const Eigen::VectorXd& b_star, double alpha) {
    if (b_prev.size() != b_star.size()) throw DimensionError("adapt: weight vectors differ in length");
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw DimensionError("adapt: alpha must lie in [0, 1]");
    return (1.0 - alpha) * b_prev + alpha * b_star;
}

Recommendation decide(const RuleSet& rules, double f, const Eigen::VectorXd& xi) {
    Recommendation rec;
    rec.f = f;
    if (!(f >= rules.threshold)) return rec;
    std::optional<std::size_t> best;
    for (std::size_t i = 0; i < rules.rules.size() && i < static_cast<std::size_t>(xi.size()); ++i) {
        if (rules.rules[i].weight < rules.threshold) continue;
        const auto k = static_cast<Eigen::Index>(i);
        if (!best || xi[k] > xi[static_cast<Eigen::Index>(*best)]) best = i;
    }
    if (!best) return rec;
    rec.alert = rules.rules[*best].consequence != Consequence::keep_working;
    rec.action = rules.rules[*best].consequence;
    rec.dominant_rule = best;
    return rec;
}

std::string_view to_string(FeedbackAction a) { return a == FeedbackAction::like ? "like" : "dislike"; }

FeedbackAction feedback_action_from_string(std::string_view s) {
    if (s == "like") return FeedbackAction::like;
    if (s == "dislike") return FeedbackAction::dislike;
    throw SchemaError("feedback action must be 'like' or 'dislike'");
}

FeedbackLearner::FeedbackLearner(RuleSet rules) : rules_(std::move(rules)) { rules_.validate(); }

FeedbackOutcome FeedbackLearner::feedback(FeedbackAction action, const PremiseScores& context, double t,
                                          bool recommendation_active) {
    FeedbackOutcome out;
    if (!recommendation_active) {
        std::clog << "warning: feedback '" << to_string(action) << "' ignored: no active recommendation\n";
        return out;
    }
    if (context.size() != rules_.size()) throw DimensionError("feedback context θ row count != rule count");
    FeedbackSample sample{context, action == FeedbackAction::like ? 1 : -1, t, "explicit"};
    buffer_.push_back(sample);
    while (buffer_.size() > rules_.window) buffer_.pop_front();
    out.accepted = true;
    out.sample = std::move(sample);

    if (++since_refit_ < rules_.effective_batch()) return out;
    since_refit_ = 0;
    const std::vector<FeedbackSample> window(buffer_.begin(), buffer_.end());
    Eigen::VectorXd b_star;
    try {
        b_star = train_b(window, rules_.size(), rules_.ridge);
    } catch (const RankError& e) {
        std::clog << "warning: feedback refit skipped: " << e.what() << '\n';
        return out;
    }
    rules_.set_weights(adapt(rules_.weights(), b_star, rules_.alpha));
    out.refit = true;
    out.b_star = std::move(b_star);
    return out;
}

}  // namespace ergowatch::recommend
