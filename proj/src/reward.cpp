#include "chartlab/reward.hpp"

#include <cmath>

namespace chartlab::reward {

void RewardConfig::validate() const {
    if (!(tau > 0.0) || !(tau < 1.0)) throw ConfigError("tau must be in (0,1)");
    if (zero_guard < 0.0) throw ConfigError("zero_guard must be >= 0");
    if (weight_accuracy < 0.0 || weight_format < 0.0) throw ConfigError("reward weights must be >= 0");
    if (weight_accuracy == 0.0 && weight_format == 0.0)
        throw ConfigError("at least one reward weight must be positive");
}

int accuracy_reward(const std::optional<double>& prediction, double ground_truth,
                    const RewardConfig& config) {
    if (!prediction.has_value() || !std::isfinite(*prediction)) return 0;
    const double err = std::abs(*prediction - ground_truth);
    if (std::abs(ground_truth) < config.zero_guard) return err <= config.tau ? 1 : 0;
    return err / std::abs(ground_truth) <= config.tau ? 1 : 0;
}

int format_reward(const std::string& text) {
    const auto parsed = resp::parse(text);
    if (!parsed.ok()) return 0;
    return resp::validate_grammar(*parsed.tokens) ? 1 : 0;
}

RewardBreakdown score_response(const env::ChartTask& task, const resp::Response& response,
                               const RewardConfig& config) {
    RewardBreakdown out;
    out.format = format_reward(response.text);
    std::optional<double> prediction;
    if (const auto program = resp::extract_program(response.tokens))
        prediction = env::execute_program(task.table, *program);
    out.accuracy = accuracy_reward(prediction, task.ground_truth, config);
    out.total = config.weight_accuracy * out.accuracy + config.weight_format * out.format;
    return out;
}

}  // namespace chartlab::reward
