#include "chartlab/grpo.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

#include "chartlab/rng.hpp"

namespace chartlab::grpo {

namespace {
constexpr std::uint64_t kStepTag = 0x53544550ULL;  // per-step RNG stream tag
}

void TrainConfig::validate() const {
    if (group_size < 2) throw ConfigError("group_size must be >= 2");
    if (!(clip_eps > 0.0) || !(clip_eps < 1.0)) throw ConfigError("clip_eps must be in (0,1)");
    if (kl_beta < 0.0) throw ConfigError("kl_beta must be >= 0");
    if (!(lr >= 0.0)) throw ConfigError("lr must be >= 0");
    if (steps < 0) throw ConfigError("steps must be >= 0");
    if (tasks_per_step < 1) throw ConfigError("tasks_per_step must be >= 1");
    if (!(temperature > 0.0)) throw ConfigError("temperature must be > 0");
    reward.validate();
}

policy::MaskOptions TrainConfig::mask_options() const {
    return {structural_masking, structural_masking ? 0.0 : format_prior, temperature};
}

nlohmann::json train_config_to_json(const TrainConfig& cfg) {
    return {{"group_size", cfg.group_size},
            {"clip_eps", cfg.clip_eps},
            {"kl_beta", cfg.kl_beta},
            {"lr", cfg.lr},
            {"steps", cfg.steps},
            {"tasks_per_step", cfg.tasks_per_step},
            {"seed", cfg.seed},
            {"reward",
             {{"tau", cfg.reward.tau},
              {"zero_guard", cfg.reward.zero_guard},
              {"weight_accuracy", cfg.reward.weight_accuracy},
              {"weight_format", cfg.reward.weight_format}}},
            {"structural_masking", cfg.structural_masking},
            {"format_prior", cfg.format_prior},
            {"temperature", cfg.temperature},
            {"adam", {{"beta1", cfg.adam.beta1}, {"beta2", cfg.adam.beta2}, {"eps", cfg.adam.eps}}}};
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
    TrainConfig cfg;
    cfg.group_size = j.at("group_size").get<int>();
    cfg.clip_eps = j.at("clip_eps").get<double>();
    cfg.kl_beta = j.at("kl_beta").get<double>();
    cfg.lr = j.at("lr").get<double>();
    cfg.steps = j.at("steps").get<int>();
    cfg.tasks_per_step = j.at("tasks_per_step").get<int>();
    cfg.seed = j.at("seed").get<std::uint64_t>();
    const auto& r = j.at("reward");
    cfg.reward.tau = r.at("tau").get<double>();
    cfg.reward.zero_guard = r.at("zero_guard").get<double>();
    cfg.reward.weight_accuracy = r.at("weight_accuracy").get<double>();
    cfg.reward.weight_format = r.at("weight_format").get<double>();
    cfg.structural_masking = j.at("structural_masking").get<bool>();
    cfg.format_prior = j.at("format_prior").get<double>();
    cfg.temperature = j.at("temperature").get<double>();
    const auto& adam = j.at("adam");
    cfg.adam.beta1 = adam.at("beta1").get<double>();
    cfg.adam.beta2 = adam.at("beta2").get<double>();
    cfg.adam.eps = adam.at("eps").get<double>();
    return cfg;
}

std::vector<double> compute_advantages(const std::vector<double>& rewards) {
    const std::size_t n = rewards.size();
    if (n < 2) throw ConfigError("advantage normalization needs a group of at least 2");
    double mean = 0.0;
    for (double r : rewards) mean += r;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double r : rewards) var += (r - mean) * (r - mean);
    var /= static_cast<double>(n);
    const double sd = std::sqrt(var);
    std::vector<double> adv(n, 0.0);
    if (sd < 1e-8) return adv;  // degenerate group: no learning signal
    for (std::size_t i = 0; i < n; ++i) adv[i] = (rewards[i] - mean) / sd;
    return adv;
}

double kl_estimate(const std::vector<double>& cur_logprobs, const std::vector<double>& ref_logprobs) {
    if (cur_logprobs.size() != ref_logprobs.size())
        throw ConfigError("KL estimator needs equal-length log-prob vectors");
    if (cur_logprobs.empty()) return 0.0;
    double acc = 0.0;
    for (std::size_t t = 0; t < cur_logprobs.size(); ++t) {
        const double d = ref_logprobs[t] - cur_logprobs[t];
        acc += std::exp(d) - d - 1.0;
    }
    return acc / static_cast<double>(cur_logprobs.size());
}

double clipped_term(double ratio, double advantage, double clip_eps) {
    const double clipped = std::clamp(ratio, 1.0 - clip_eps, 1.0 + clip_eps);
    return std::min(ratio * advantage, clipped * advantage);
}

GrpoLossResult grpo_loss(const GroupSample& group,
                         const std::vector<std::vector<double>>& cur_logprobs,
                         const TrainConfig& config) {
    const std::size_t n = group.rollouts.size();
    if (group.advantages.size() != n || group.ref_logprobs.size() != n || cur_logprobs.size() != n)
        throw ConfigError("group sample fields have inconsistent sizes");

    GrpoLossResult out;
    out.per_token_grads.resize(n);
    double surrogate_sum = 0.0;
    double kl_sum = 0.0;

    for (std::size_t i = 0; i < n; ++i) {
        const auto& old_lp = group.rollouts[i].per_step_logprobs;
        const auto& cur_lp = cur_logprobs[i];
        const auto& ref_lp = group.ref_logprobs[i];
        const std::size_t T = old_lp.size();
        if (cur_lp.size() != T || ref_lp.size() != T)
            throw ConfigError("log-prob vectors disagree on response length");
        const double A = group.advantages[i];
        const double inv_nt = 1.0 / (static_cast<double>(n) * static_cast<double>(T));
        auto& grads = out.per_token_grads[i];
        grads.assign(T, 0.0);

        double token_sum = 0.0;
        for (std::size_t t = 0; t < T; ++t) {
            const double ratio = std::exp(cur_lp[t] - old_lp[t]);
            if (!std::isfinite(ratio))
                throw TrainingError("non-finite importance ratio on task " + group.task_id +
                                    " response " + std::to_string(i) + " token " + std::to_string(t));
            const double clipped = std::clamp(ratio, 1.0 - config.clip_eps, 1.0 + config.clip_eps);
            const double term = std::min(ratio * A, clipped * A);
            token_sum += term;
            out.total_tokens += 1;
            if (A != 0.0 && ratio * A > clipped * A) out.clipped_tokens += 1;
            // the unclipped branch is the min whenever ratio*A <= clipped*A;
            // only there does the surrogate depend on the current policy
            const bool active = ratio * A <= clipped * A;
            double g = active ? -A * ratio * inv_nt : 0.0;
            g += config.kl_beta * (1.0 - std::exp(ref_lp[t] - cur_lp[t])) * inv_nt;
            grads[t] = g;
        }
        surrogate_sum += token_sum / static_cast<double>(T);
        kl_sum += kl_estimate(cur_lp, ref_lp);
    }

    out.mean_kl = kl_sum / static_cast<double>(n);
    const double objective = surrogate_sum / static_cast<double>(n) - config.kl_beta * out.mean_kl;
    out.loss = -objective;
    return out;
}

double exact_sequence_kl(const policy::PolicyParams& cur, const policy::PolicyParams& ref,
                         const std::vector<double>& features, std::span<const resp::Token> tokens,
                         const policy::MaskOptions& opts) {
    if (tokens.empty()) return 0.0;
    double acc = 0.0;
    std::vector<resp::Token> prefix;
    for (std::size_t pos = 0; pos < tokens.size(); ++pos) {
        const auto lp_cur = policy::step_logits(cur, features, prefix, static_cast<int>(pos), opts);
        const auto lp_ref = policy::step_logits(ref, features, prefix, static_cast<int>(pos), opts);
        double kl = 0.0;
        for (std::size_t j = 0; j < lp_cur.size(); ++j) {
            if (!std::isfinite(lp_cur[j])) continue;
            kl += std::exp(lp_cur[j]) * (lp_cur[j] - lp_ref[j]);
        }
        acc += kl;
        prefix.push_back(tokens[pos]);
    }
    return acc / static_cast<double>(tokens.size());
}

TrainRun make_run(const TrainConfig& config, policy::PolicyParams init) {
    config.validate();
    TrainRun run;
    run.ref = init;
    run.adam = policy::AdamState::zeros(init.cfg);
    run.params = std::move(init);
    return run;
}

namespace {

void check_advantage_invariant(const std::vector<double>& adv) {
    bool all_zero = true;
    for (double a : adv)
        if (a != 0.0) all_zero = false;
    if (all_zero) return;
    double mean = 0.0;
    for (double a : adv) mean += a;
    mean /= static_cast<double>(adv.size());
    double var = 0.0;
    for (double a : adv) var += (a - mean) * (a - mean);
    var /= static_cast<double>(adv.size());
    if (std::abs(mean) > 1e-9 || std::abs(std::sqrt(var) - 1.0) > 1e-9)
        throw TrainingError("advantage normalization invariant violated");
}

}  // namespace

std::vector<StepMetrics> train(const TrainConfig& config, const std::vector<env::ChartTask>& corpus,
                               TrainRun& run, int steps, const StepCallback& on_step) {
    config.validate();
    if (corpus.empty()) throw ConfigError("training corpus is empty");
    const int n_steps = steps < 0 ? config.steps : steps;
    const policy::MaskOptions opts = config.mask_options();
    const int N = config.group_size;

    std::vector<StepMetrics> metrics;
    metrics.reserve(static_cast<std::size_t>(n_steps));

    for (int k = 0; k < n_steps; ++k) {
        const auto t0 = std::chrono::steady_clock::now();
        const int step = run.next_step;
        Rng rng(mix_seed(config.seed, kStepTag, static_cast<std::uint64_t>(step)));

        policy::Tensors grads = policy::Tensors::zeros(run.params.cfg);
        StepMetrics m;
        m.step = step;
        double loss_sum = 0.0, kl_sum = 0.0;
        std::int64_t clipped = 0, total_tokens = 0;
        const int n_resp = config.tasks_per_step * N;

        for (int task_i = 0; task_i < config.tasks_per_step; ++task_i) {
            const env::ChartTask& task = corpus[rng.uniform_below(corpus.size())];
            GroupSample group;
            group.task_id = task.task_id;
            std::vector<std::vector<double>> cur_lp;
            std::vector<double> totals;
            for (int i = 0; i < N; ++i) {
                // the snapshot policy equals the current params until the
                // end-of-step update, so the rollout's own log-probs are the
                // snapshot log-probs and a teacher-forced replay gives the
                // current ones
                policy::Rollout ro = policy::sample_response(run.params, task, rng, opts);
                const resp::Response response = resp::make_response(ro.tokens);
                const reward::RewardBreakdown rb = reward::score_response(task, response, config.reward);
                cur_lp.push_back(
                    policy::sequence_logprob(run.params, ro.features, ro.tokens, opts).per_step);
                group.ref_logprobs.push_back(
                    policy::sequence_logprob(run.ref, ro.features, ro.tokens, opts).per_step);
                group.rollouts.push_back(std::move(ro));
                group.rewards.push_back(rb);
                totals.push_back(rb.total);
                m.mean_accuracy_reward += rb.accuracy;
                m.mean_format_reward += rb.format;
                m.mean_total_reward += rb.total;
            }
            group.advantages = compute_advantages(totals);
            check_advantage_invariant(group.advantages);

            const GrpoLossResult res = grpo_loss(group, cur_lp, config);
            loss_sum += res.loss;
            kl_sum += res.mean_kl;
            clipped += res.clipped_tokens;
            total_tokens += res.total_tokens;
            for (int i = 0; i < N; ++i) {
                const policy::Tensors g =
                    policy::backward(run.params, group.rollouts[i].features, group.rollouts[i].tokens,
                                     res.per_token_grads[i], opts);
                policy::accumulate(grads, g, 1.0 / config.tasks_per_step);
            }
        }

        policy::apply_update(run.params, grads, run.adam, config.lr, config.adam);
        run.next_step += 1;

        m.mean_accuracy_reward /= n_resp;
        m.mean_format_reward /= n_resp;
        m.mean_total_reward /= n_resp;
        m.mean_kl = kl_sum / config.tasks_per_step;
        m.loss = loss_sum / config.tasks_per_step;
        m.clip_fraction = total_tokens == 0 ? 0.0 : static_cast<double>(clipped) / total_tokens;
        m.wall_time_ms =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
        metrics.push_back(m);
        if (on_step) on_step(m, run);
    }
    return metrics;
}

std::string metrics_csv_header() {
    return "step,mean_accuracy_reward,mean_format_reward,mean_total_reward,mean_kl,loss,"
           "clip_fraction,wall_time_ms";
}

std::string metrics_csv_row(const StepMetrics& m) {
    std::string row = std::to_string(m.step);
    for (double v : {m.mean_accuracy_reward, m.mean_format_reward, m.mean_total_reward, m.mean_kl,
                     m.loss, m.clip_fraction, m.wall_time_ms}) {
        row += ',';
        row += format_double(v);
    }
    return row;
}

void write_metrics_csv(const std::string& path, const std::vector<StepMetrics>& metrics) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write metrics CSV: " + path);
    out << metrics_csv_header() << '\n';
    for (const auto& m : metrics) out << metrics_csv_row(m) << '\n';
    if (!out) throw IoError("metrics CSV write failed: " + path);
}

std::vector<StepMetrics> read_metrics_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open metrics CSV: " + path);
    std::string line;
    if (!std::getline(in, line)) throw IoError("empty metrics CSV: " + path);
    if (line != metrics_csv_header()) throw IoError("unexpected metrics CSV columns in " + path);
    std::vector<StepMetrics> out;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::vector<double> vals;
        while (std::getline(ss, cell, ',')) vals.push_back(std::stod(cell));
        if (vals.size() != 8) throw IoError("bad metrics CSV row in " + path);
        StepMetrics m;
        m.step = static_cast<int>(vals[0]);
        m.mean_accuracy_reward = vals[1];
        m.mean_format_reward = vals[2];
        m.mean_total_reward = vals[3];
        m.mean_kl = vals[4];
        m.loss = vals[5];
        m.clip_fraction = vals[6];
        m.wall_time_ms = vals[7];
        out.push_back(m);
    }
    return out;
}

}  // namespace chartlab::grpo
