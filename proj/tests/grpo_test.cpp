#include "chartlab/grpo.hpp"

#include <cmath>
#include <filesystem>
#include <numeric>

#include "doctest.h"

#include "chartlab/rng.hpp"
#include "chartlab/sft.hpp"

using namespace chartlab;

namespace {

std::vector<env::ChartTask> tiny_corpus(int n, env::Difficulty d, std::uint64_t seed0 = 5000) {
    std::vector<env::ChartTask> tasks;
    for (int i = 0; i < n; ++i) tasks.push_back(env::generate_task(seed0 + i, d, {}));
    return tasks;
}

grpo::TrainConfig fast_config() {
    grpo::TrainConfig cfg;
    cfg.steps = 10;
    cfg.seed = 3;
    return cfg;
}

// Independent scalar re-implementation of the group objective used to
// cross-check grpo_loss.
double reference_loss(const grpo::GroupSample& group,
                      const std::vector<std::vector<double>>& cur, const grpo::TrainConfig& cfg) {
    const std::size_t n = group.rollouts.size();
    double surrogate = 0.0, kl = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const auto& old_lp = group.rollouts[i].per_step_logprobs;
        const auto& ref_lp = group.ref_logprobs[i];
        const std::size_t T = old_lp.size();
        double clip_sum = 0.0, kl_sum = 0.0;
        for (std::size_t t = 0; t < T; ++t) {
            const double ratio = std::exp(cur[i][t] - old_lp[t]);
            const double clipped = std::clamp(ratio, 1.0 - cfg.clip_eps, 1.0 + cfg.clip_eps);
            clip_sum += std::min(ratio * group.advantages[i], clipped * group.advantages[i]);
            const double d = ref_lp[t] - cur[i][t];
            kl_sum += std::exp(d) - d - 1.0;
        }
        surrogate += clip_sum / static_cast<double>(T);
        kl += kl_sum / static_cast<double>(T);
    }
    const double objective =
        surrogate / static_cast<double>(n) - cfg.kl_beta * kl / static_cast<double>(n);
    return -objective;
}

grpo::GroupSample synthetic_group(Rng& rng, int n, int max_len) {
    grpo::GroupSample g;
    g.task_id = "fixture";
    std::vector<double> rewards;
    for (int i = 0; i < n; ++i) {
        const int T = 1 + static_cast<int>(rng.uniform_below(max_len));
        policy::Rollout r;
        for (int t = 0; t < T; ++t) r.per_step_logprobs.push_back(-0.1 - 2.0 * rng.uniform());
        std::vector<double> ref;
        for (int t = 0; t < T; ++t)
            ref.push_back(r.per_step_logprobs[t] + (rng.uniform() - 0.5) * 0.4);
        g.rollouts.push_back(std::move(r));
        g.ref_logprobs.push_back(std::move(ref));
        rewards.push_back(std::floor(rng.uniform() * 3.0));
    }
    g.advantages = grpo::compute_advantages(rewards);
    return g;
}

}  // namespace

TEST_SUITE_BEGIN("grpo");

TEST_CASE("advantages match the direct formula on 10k random groups") {
    Rng rng(2024);
    for (int trial = 0; trial < 10000; ++trial) {
        const int n = 2 + static_cast<int>(rng.uniform_below(15));
        std::vector<double> rewards;
        for (int i = 0; i < n; ++i) rewards.push_back(std::floor(rng.uniform() * 4.0) * 0.5);
        const auto adv = grpo::compute_advantages(rewards);
        REQUIRE(adv.size() == rewards.size());

        const double mean = std::accumulate(rewards.begin(), rewards.end(), 0.0) / n;
        double var = 0.0;
        for (double r : rewards) var += (r - mean) * (r - mean);
        const double stddev = std::sqrt(var / n);  // population std

        if (stddev < 1e-8) {
            for (double a : adv) REQUIRE(a == 0.0);
            continue;
        }
        double amean = 0.0, avar = 0.0;
        for (std::size_t i = 0; i < adv.size(); ++i) {
            REQUIRE(adv[i] == doctest::Approx((rewards[i] - mean) / stddev).epsilon(1e-9));
            amean += adv[i];
        }
        amean /= n;
        for (double a : adv) avar += (a - amean) * (a - amean);
        REQUIRE(std::abs(amean) <= 1e-9);
        REQUIRE(std::abs(std::sqrt(avar / n) - 1.0) <= 1e-9);
    }
}

TEST_CASE("kl estimator closed forms and nonnegativity") {
    CHECK(grpo::kl_estimate({-1.0, -2.0}, {-1.0, -2.0}) == 0.0);

    // per-token log-ratio ln 2 everywhere
    const std::vector<double> cur{-1.0, -3.0, -2.5};
    std::vector<double> ref;
    for (double c : cur) ref.push_back(c + std::log(2.0));
    const double expected = 2.0 - std::log(2.0) - 1.0;
    CHECK(grpo::kl_estimate(cur, ref) == doctest::Approx(expected).epsilon(1e-12));
    CHECK(grpo::kl_estimate(cur, ref) == doctest::Approx(0.3069).epsilon(1e-3));

    Rng rng(8);
    for (int i = 0; i < 1000; ++i) {
        std::vector<double> a, b;
        const int T = 1 + static_cast<int>(rng.uniform_below(10));
        for (int t = 0; t < T; ++t) {
            a.push_back(-3.0 * rng.uniform());
            b.push_back(-3.0 * rng.uniform());
        }
        CHECK(grpo::kl_estimate(a, b) >= 0.0);
    }
}

TEST_CASE("clipped surrogate term worked examples") {
    CHECK(grpo::clipped_term(1.0, 2.0, 0.2) == doctest::Approx(2.0));
    CHECK(grpo::clipped_term(1.5, 1.0, 0.2) == doctest::Approx(1.2));
    CHECK(grpo::clipped_term(0.5, -1.0, 0.2) == doctest::Approx(-0.8));
}

TEST_CASE("grpo_loss matches an independent re-implementation") {
    const auto cfg = fast_config();
    Rng rng(55);
    for (int trial = 0; trial < 200; ++trial) {
        const auto group = synthetic_group(rng, 8, 12);
        // off-policy current logprobs: perturb the snapshot
        std::vector<std::vector<double>> cur;
        for (const auto& r : group.rollouts) {
            std::vector<double> lp;
            for (double v : r.per_step_logprobs) lp.push_back(v + (rng.uniform() - 0.5) * 0.3);
            cur.push_back(std::move(lp));
        }
        const auto res = grpo::grpo_loss(group, cur, cfg);
        CHECK(res.loss == doctest::Approx(reference_loss(group, cur, cfg)).epsilon(1e-9));
        CHECK(res.clip_fraction() >= 0.0);
        CHECK(res.clip_fraction() <= 1.0);
    }
}

TEST_CASE("on-policy pass has unit ratios and zero clipping") {
    Rng rng(66);
    const auto cfg = fast_config();
    const auto group = synthetic_group(rng, 8, 12);
    std::vector<std::vector<double>> cur;
    for (const auto& r : group.rollouts) cur.push_back(r.per_step_logprobs);

    const auto res = grpo::grpo_loss(group, cur, cfg);
    CHECK(res.clipped_tokens == 0);
    CHECK(res.clip_fraction() == 0.0);

    // ratios 1 and zero-mean advantages: the surrogate reduces to -mean(A);
    // with cur == old the KL term is whatever the ref offsets give
    double mean_adv = 0.0;
    for (double a : group.advantages) mean_adv += a;
    mean_adv /= static_cast<double>(group.advantages.size());
    double mean_kl = 0.0;
    for (std::size_t i = 0; i < cur.size(); ++i)
        mean_kl += grpo::kl_estimate(cur[i], group.ref_logprobs[i]);
    mean_kl /= static_cast<double>(cur.size());
    CHECK(res.loss == doctest::Approx(-mean_adv + cfg.kl_beta * mean_kl).epsilon(1e-9));
    CHECK(res.mean_kl == doctest::Approx(mean_kl).epsilon(1e-9));
}

TEST_CASE("single response, single token, no KL reduces to minus the advantage") {
    grpo::GroupSample g;
    policy::Rollout r;
    r.per_step_logprobs = {-0.5};
    g.rollouts.push_back(r);
    g.ref_logprobs.push_back({-0.5});
    g.advantages = {0.7};
    grpo::TrainConfig cfg;
    cfg.kl_beta = 0.0;
    const auto res = grpo::grpo_loss(g, {{-0.45}}, cfg);  // ratio ~1.05, inside the band
    CHECK(res.loss == doctest::Approx(-std::exp(0.05) * 0.7).epsilon(1e-12));
}

TEST_CASE("grpo_loss gradients match finite differences of the loss") {
    Rng rng(77);
    const auto cfg = fast_config();
    const auto group = synthetic_group(rng, 6, 8);
    std::vector<std::vector<double>> cur;
    for (const auto& r : group.rollouts) {
        std::vector<double> lp;
        for (double v : r.per_step_logprobs) lp.push_back(v + (rng.uniform() - 0.5) * 0.3);
        cur.push_back(std::move(lp));
    }
    const auto res = grpo::grpo_loss(group, cur, cfg);
    const double h = 1e-7;
    for (std::size_t i = 0; i < cur.size(); ++i)
        for (std::size_t t = 0; t < cur[i].size(); ++t) {
            auto up = cur, dn = cur;
            up[i][t] += h;
            dn[i][t] -= h;
            const double fd =
                (grpo::grpo_loss(group, up, cfg).loss - grpo::grpo_loss(group, dn, cfg).loss) /
                (2.0 * h);
            CHECK(res.per_token_grads[i][t] == doctest::Approx(fd).epsilon(1e-5));
        }
}

TEST_CASE("non-finite ratios raise a training error") {
    grpo::GroupSample g;
    policy::Rollout r;
    r.per_step_logprobs = {-1000.0};
    g.rollouts.push_back(r);
    g.ref_logprobs.push_back({-1.0});
    g.advantages = {1.0};
    CHECK_THROWS_AS(grpo::grpo_loss(g, {{1000.0}}, grpo::TrainConfig{}), TrainingError);
}

TEST_CASE("identical rewards give zero advantages and a KL-only pull") {
    const auto adv = grpo::compute_advantages({2.0, 2.0, 2.0, 2.0});
    for (double a : adv) CHECK(a == 0.0);
}

TEST_CASE("exact sequence KL is zero for identical policies and positive otherwise") {
    policy::NetConfig small;
    small.embed_dim = 6;
    small.hidden_dim = 8;
    small.pos_dim = 4;
    const auto a = policy::init_params(1, 1.0, small);
    const auto b = policy::init_params(2, 1.0, small);
    const auto task = env::generate_task(17, env::Difficulty::hard, {});
    const auto features = env::featurize(task);
    const auto tokens = resp::tokens_for_program(env::canonical_program(task.query));
    const policy::MaskOptions opts{true, 0.0, 1.0};

    CHECK(grpo::exact_sequence_kl(a, a, features, tokens, opts) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(grpo::exact_sequence_kl(a, b, features, tokens, opts) > 0.0);
}

TEST_CASE("sampled KL estimator agrees with the exact categorical KL in expectation") {
    policy::NetConfig small;
    small.embed_dim = 6;
    small.hidden_dim = 8;
    small.pos_dim = 4;
    const auto cur = policy::init_params(4, 0.8, small);
    const auto ref = policy::init_params(9, 0.8, small);
    const auto task = env::generate_task(23, env::Difficulty::hard, {});
    const auto features = env::featurize(task);
    const policy::MaskOptions opts{true, 0.0, 1.0};

    Rng rng(12);
    double sum = 0.0, sum_sq = 0.0, exact_sum = 0.0;
    const int trials = 400;
    for (int i = 0; i < trials; ++i) {
        const auto rollout = policy::sample_response(cur, task, rng, opts);
        const auto ref_lp = policy::sequence_logprob(ref, features, rollout.tokens, opts);
        const double est = grpo::kl_estimate(rollout.per_step_logprobs, ref_lp.per_step);
        sum += est;
        sum_sq += est * est;
        exact_sum += grpo::exact_sequence_kl(cur, ref, features, rollout.tokens, opts);
    }
    const double mean = sum / trials;
    const double exact = exact_sum / trials;
    const double se = std::sqrt((sum_sq / trials - mean * mean) / trials);
    // token-averaged estimator vs token-averaged exact KL along the same
    // trajectories: agreement within five standard errors
    CHECK(std::abs(mean - exact) <= 5.0 * se + 1e-6);
}

TEST_CASE("training is deterministic and metrics round-trip through csv") {
    namespace fs = std::filesystem;
    const auto corpus = tiny_corpus(6, env::Difficulty::easy);
    auto cfg = fast_config();

    auto make = [&] {
        grpo::TrainRun run = grpo::make_run(cfg, policy::init_params(cfg.seed, 1.0));
        const auto metrics = grpo::train(cfg, corpus, run);
        return std::pair{std::move(run), metrics};
    };
    auto [run_a, metrics_a] = make();
    auto [run_b, metrics_b] = make();

    REQUIRE(metrics_a.size() == 10);
    CHECK(policy::params_digest(run_a.params) == policy::params_digest(run_b.params));
    for (std::size_t i = 0; i < metrics_a.size(); ++i) {
        CHECK(grpo::metrics_csv_row(metrics_a[i]).substr(0, grpo::metrics_csv_row(metrics_a[i]).rfind(',')) ==
              grpo::metrics_csv_row(metrics_b[i]).substr(0, grpo::metrics_csv_row(metrics_b[i]).rfind(',')));
    }

    const fs::path path = fs::temp_directory_path() / "chartlab_metrics_test.csv";
    grpo::write_metrics_csv(path.string(), metrics_a);
    const auto back = grpo::read_metrics_csv(path.string());
    REQUIRE(back.size() == metrics_a.size());
    for (std::size_t i = 0; i < back.size(); ++i) {
        CHECK(back[i].step == metrics_a[i].step);
        CHECK(back[i].mean_accuracy_reward == metrics_a[i].mean_accuracy_reward);
        CHECK(back[i].loss == metrics_a[i].loss);
        CHECK(back[i].mean_kl == metrics_a[i].mean_kl);
    }
    fs::remove(path);
}

TEST_CASE("resumed training reproduces the uninterrupted run") {
    const auto corpus = tiny_corpus(5, env::Difficulty::easy);
    auto cfg = fast_config();
    cfg.steps = 8;

    grpo::TrainRun full = grpo::make_run(cfg, policy::init_params(cfg.seed, 1.0));
    const auto metrics_full = grpo::train(cfg, corpus, full);

    grpo::TrainRun split = grpo::make_run(cfg, policy::init_params(cfg.seed, 1.0));
    const auto first = grpo::train(cfg, corpus, split, 3);
    const auto second = grpo::train(cfg, corpus, split, 5);

    CHECK(policy::params_digest(full.params) == policy::params_digest(split.params));
    CHECK(full.next_step == split.next_step);
    REQUIRE(first.size() + second.size() == metrics_full.size());
    for (std::size_t i = 0; i < second.size(); ++i) {
        const auto& a = metrics_full[first.size() + i];
        const auto& b = second[i];
        CHECK(a.step == b.step);
        CHECK(a.loss == b.loss);
        CHECK(a.mean_accuracy_reward == b.mean_accuracy_reward);
        CHECK(a.mean_kl == b.mean_kl);
    }
}

TEST_CASE("train config validation and json round-trip") {
    grpo::TrainConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    cfg.group_size = 1;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = {};
    cfg.clip_eps = -0.1;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);

    grpo::TrainConfig full;
    full.steps = 77;
    full.seed = 9;
    full.structural_masking = false;
    full.format_prior = 6.5;
    const auto back = grpo::train_config_from_json(grpo::train_config_to_json(full));
    CHECK(grpo::train_config_to_json(back) == grpo::train_config_to_json(full));
}

TEST_SUITE_END();
