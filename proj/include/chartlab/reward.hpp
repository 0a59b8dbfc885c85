#pragma once

#include <optional>
#include <string>

#include "chartlab/chart_env.hpp"
#include "chartlab/response.hpp"

namespace chartlab::reward {

struct RewardConfig {
    double tau = 0.05;          // relative precision threshold
    double zero_guard = 1e-9;   // below this |v_g|, tau is applied as an absolute tolerance
    double weight_accuracy = 1.0;
    double weight_format = 1.0;

    void validate() const;
};

struct RewardBreakdown {
    int accuracy = 0;
    int format = 0;
    double total = 0.0;
};

// 1 iff the prediction is a real within relative error tau of the ground
// truth (absolute tolerance below the zero guard); malformed scores 0.
int accuracy_reward(const std::optional<double>& prediction, double ground_truth,
                    const RewardConfig& config);

// 1 iff the text parses and matches the response template exactly.
int format_reward(const std::string& text);

RewardBreakdown score_response(const env::ChartTask& task, const resp::Response& response,
                               const RewardConfig& config);

}  // namespace chartlab::reward
