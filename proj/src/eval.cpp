#include "chartlab/eval.hpp"

#include <cmath>

#include "chartlab/rng.hpp"

namespace chartlab::eval {

nlohmann::json EvalReport::to_json() const {
    nlohmann::json by_cat = nlohmann::json::object();
    for (const auto& [key, stat] : by_category)
        by_cat[key] = {{"n", stat.n}, {"correct", stat.correct}, {"accuracy", stat.accuracy()}};
    nlohmann::json j{{"n", n}, {"correct", correct}, {"accuracy", accuracy}, {"by_category", by_cat}};
    if (baseline_accuracy) j["baseline_accuracy"] = *baseline_accuracy;
    if (relative_delta) j["relative_delta"] = *relative_delta;
    if (p_value) j["p_value"] = *p_value;
    return j;
}

EvalReport evaluate(const policy::PolicyParams& params, const std::vector<env::ChartTask>& tasks,
                    const reward::RewardConfig& config, const policy::MaskOptions& opts) {
    if (tasks.empty()) throw ConfigError("evaluation corpus is empty");
    EvalReport report;
    for (const env::ChartTask& task : tasks) {
        const policy::Rollout ro = policy::greedy_decode(params, task, opts);
        std::optional<double> prediction;
        if (const auto program = resp::extract_program(ro.tokens))
            prediction = env::execute_program(task.table, *program);
        const int ok = reward::accuracy_reward(prediction, task.ground_truth, config);
        report.n += 1;
        report.correct += ok;
        CategoryStat& stat = report.by_category[env::to_string(task.query.kind)];
        stat.n += 1;
        stat.correct += ok;
    }
    report.accuracy = static_cast<double>(report.correct) / report.n;
    return report;
}

double relative_delta(double baseline, double treatment) {
    if (!(baseline > 0.0)) throw ConfigError("relative delta undefined for a non-positive baseline");
    return (treatment - baseline) / baseline;
}

double two_proportion_test(int correct_a, int n_a, int correct_b, int n_b) {
    if (n_a < 1 || n_b < 1) throw ConfigError("both samples must be nonempty");
    if (correct_a < 0 || correct_a > n_a || correct_b < 0 || correct_b > n_b)
        throw ConfigError("correct counts must lie within sample sizes");
    const double pa = static_cast<double>(correct_a) / n_a;
    const double pb = static_cast<double>(correct_b) / n_b;
    const double pooled = static_cast<double>(correct_a + correct_b) / (n_a + n_b);
    const double se = std::sqrt(pooled * (1.0 - pooled) * (1.0 / n_a + 1.0 / n_b));
    if (se == 0.0) return 1.0;  // pooled proportion 0 or 1 forces equal proportions
    const double z = (pa - pb) / se;
    // two-sided tail of the standard normal: P(|Z| >= |z|) = erfc(|z| / sqrt(2))
    return std::erfc(std::abs(z) / std::sqrt(2.0));
}

void attach_baseline(EvalReport& report, const EvalReport& baseline) {
    report.baseline_accuracy = baseline.accuracy;
    report.relative_delta = baseline.accuracy > 0.0
                                ? std::optional<double>(relative_delta(baseline.accuracy, report.accuracy))
                                : std::nullopt;
    report.p_value = two_proportion_test(report.correct, report.n, baseline.correct, baseline.n);
}

std::map<std::string, EvalReport> robustness_sweep(const policy::PolicyParams& params,
                                                   const std::vector<env::ChartTask>& base_tasks,
                                                   const std::vector<env::PerturbationKind>& kinds,
                                                   std::uint64_t seed, const reward::RewardConfig& config,
                                                   const policy::MaskOptions& opts) {
    std::map<std::string, EvalReport> out;
    out["normal"] = evaluate(params, base_tasks, config, opts);
    for (env::PerturbationKind kind : kinds) {
        std::vector<env::ChartTask> perturbed;
        for (std::size_t i = 0; i < base_tasks.size(); ++i) {
            try {
                perturbed.push_back(
                    env::perturb_task(base_tasks[i], kind, mix_seed(seed, static_cast<std::uint64_t>(kind), i)));
            } catch (const UnsupportedPerturbation&) {
                // this task shape cannot express the perturbation; skip it
            }
        }
        if (!perturbed.empty()) out[env::to_string(kind)] = evaluate(params, perturbed, config, opts);
    }
    return out;
}

}  // namespace chartlab::eval
