#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "json.hpp"

#include "chartlab/chart_env.hpp"
#include "chartlab/policy.hpp"
#include "chartlab/reward.hpp"

namespace chartlab::grpo {

struct TrainConfig {
    int group_size = 8;       // responses sampled per task
    double clip_eps = 0.2;    // importance-ratio clip band half-width
    double kl_beta = 0.04;    // weight of the KL anchor to the reference policy
    double lr = 1e-3;
    int steps = 0;
    int tasks_per_step = 4;   // gradient accumulation across tasks within a step
    std::uint64_t seed = 0;
    reward::RewardConfig reward;
    bool structural_masking = true;
    double format_prior = 8.0;  // used only when structural_masking is off
    double temperature = 1.0;
    // adam.eps well above machine tiny keeps near-zero gradients (saturated
    // groups where only the KL pull remains) from being rescaled into
    // full-size parameter steps
    policy::AdamConfig adam{0.9, 0.999, 1e-5};

    void validate() const;
    policy::MaskOptions mask_options() const;
};

nlohmann::json train_config_to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const nlohmann::json& j);

// One task's group of sampled responses with everything the loss needs.
struct GroupSample {
    std::string task_id;
    std::vector<policy::Rollout> rollouts;             // per-step logprobs are under the snapshot
    std::vector<reward::RewardBreakdown> rewards;
    std::vector<double> advantages;
    std::vector<std::vector<double>> ref_logprobs;     // under the frozen reference policy
};

struct StepMetrics {
    int step = 0;
    double mean_accuracy_reward = 0.0;
    double mean_format_reward = 0.0;
    double mean_total_reward = 0.0;
    double mean_kl = 0.0;
    double loss = 0.0;
    double clip_fraction = 0.0;
    double wall_time_ms = 0.0;
};

// Group-standardized rewards: (r_i - mean) / population std, with groups whose
// std falls below 1e-8 mapped to all-zero advantages.
std::vector<double> compute_advantages(const std::vector<double>& rewards);

// Token-averaged nonnegative KL estimator exp(d) - d - 1, d = ref - cur.
double kl_estimate(const std::vector<double>& cur_logprobs, const std::vector<double>& ref_logprobs);

// min(ratio * A, clamp(ratio, 1-eps, 1+eps) * A)
double clipped_term(double ratio, double advantage, double clip_eps);

struct GrpoLossResult {
    double loss = 0.0;                                  // negated objective
    std::vector<std::vector<double>> per_token_grads;   // d loss / d cur_logprob[i][t]
    double mean_kl = 0.0;                               // response-averaged estimator
    std::int64_t clipped_tokens = 0;
    std::int64_t total_tokens = 0;

    double clip_fraction() const {
        return total_tokens == 0 ? 0.0 : static_cast<double>(clipped_tokens) / total_tokens;
    }
};

// Clipped surrogate with KL regularization for one group. Response-level
// advantages broadcast to every token; per-token importance ratios against the
// rollout snapshot. Throws TrainingError on non-finite ratios.
GrpoLossResult grpo_loss(const GroupSample& group,
                         const std::vector<std::vector<double>>& cur_logprobs,
                         const TrainConfig& config);

// Exact token-level categorical KL(cur || ref) averaged over positions of the
// given sequence; cross-validates the sampled estimator in tests.
double exact_sequence_kl(const policy::PolicyParams& cur, const policy::PolicyParams& ref,
                         const std::vector<double>& features, std::span<const resp::Token> tokens,
                         const policy::MaskOptions& opts);

// Mutable training state; checkpointable and resumable mid-run.
struct TrainRun {
    policy::PolicyParams params;
    policy::PolicyParams ref;  // frozen at run start
    policy::AdamState adam;
    int next_step = 0;
};

TrainRun make_run(const TrainConfig& config, policy::PolicyParams init);

using StepCallback = std::function<void(const StepMetrics&, const TrainRun&)>;

// Runs `steps` optimization steps (config.steps when steps < 0), appending to
// run.next_step. Deterministic in (config, corpus, run state): each step seeds
// its own RNG from (config.seed, step), so resumed runs match uninterrupted
// ones exactly.
std::vector<StepMetrics> train(const TrainConfig& config, const std::vector<env::ChartTask>& corpus,
                               TrainRun& run, int steps = -1, const StepCallback& on_step = {});

std::string metrics_csv_header();
std::string metrics_csv_row(const StepMetrics& m);
void write_metrics_csv(const std::string& path, const std::vector<StepMetrics>& metrics);
std::vector<StepMetrics> read_metrics_csv(const std::string& path);

}  // namespace chartlab::grpo
