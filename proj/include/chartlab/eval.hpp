#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "chartlab/chart_env.hpp"
#include "chartlab/policy.hpp"
#include "chartlab/reward.hpp"

namespace chartlab::eval {

struct CategoryStat {
    int n = 0;
    int correct = 0;

    double accuracy() const { return n == 0 ? 0.0 : static_cast<double>(correct) / n; }
};

struct EvalReport {
    int n = 0;
    int correct = 0;
    double accuracy = 0.0;
    std::map<std::string, CategoryStat> by_category;  // keyed by query kind
    std::optional<double> baseline_accuracy;
    std::optional<double> relative_delta;  // fraction, not percent
    std::optional<double> p_value;

    nlohmann::json to_json() const;
};

// Greedy decoding per task; a task is correct iff its extracted answer passes
// the accuracy reward. Pure function of its arguments.
EvalReport evaluate(const policy::PolicyParams& params, const std::vector<env::ChartTask>& tasks,
                    const reward::RewardConfig& config, const policy::MaskOptions& opts = {});

// (treatment - baseline) / baseline; throws ConfigError when baseline <= 0.
double relative_delta(double baseline, double treatment);

// Pooled two-sided z-test for equality of two proportions. The normal tail is
// evaluated via erfc (|error| well under 1e-10 over the relevant range).
double two_proportion_test(int correct_a, int n_a, int correct_b, int n_b);

// Attaches the comparison columns (baseline accuracy, relative delta when the
// baseline is nonzero, p-value) to a treatment report.
void attach_baseline(EvalReport& report, const EvalReport& baseline);

// Evaluates the same policy on each perturbed variant of the base corpus.
// Tasks a perturbation cannot apply to are skipped, so per-kind n may be
// smaller than the base corpus. The unperturbed evaluation is reported under
// the key "normal".
std::map<std::string, EvalReport> robustness_sweep(const policy::PolicyParams& params,
                                                   const std::vector<env::ChartTask>& base_tasks,
                                                   const std::vector<env::PerturbationKind>& kinds,
                                                   std::uint64_t seed, const reward::RewardConfig& config,
                                                   const policy::MaskOptions& opts = {});

}  // namespace chartlab::eval
