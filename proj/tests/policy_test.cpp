#include "chartlab/policy.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"

#include "chartlab/rng.hpp"

using namespace chartlab;

namespace {

policy::NetConfig small_config() {
    policy::NetConfig cfg;
    cfg.embed_dim = 6;
    cfg.hidden_dim = 8;
    cfg.pos_dim = 4;
    return cfg;
}

double weighted_logprob(const policy::PolicyParams& params, const std::vector<double>& features,
                        const std::vector<resp::Token>& tokens, const std::vector<double>& coefs,
                        const policy::MaskOptions& opts) {
    const auto lp = policy::sequence_logprob(params, features, tokens, opts);
    double total = 0.0;
    for (std::size_t t = 0; t < tokens.size(); ++t) total += coefs[t] * lp.per_step[t];
    return total;
}

// Central-difference gradient check on a subset of coordinates per tensor.
// Returns the maximum relative error observed.
double gradcheck_instance(std::uint64_t seed, const policy::MaskOptions& opts, int coords_per_tensor) {
    const auto task = env::generate_task(seed, seed % 2 ? env::Difficulty::hard : env::Difficulty::easy, {});
    const auto features = env::featurize(task);
    policy::PolicyParams params = policy::init_params(seed + 1, 0.7, small_config());
    Rng rng(seed + 2);
    const auto rollout = policy::sample_response(params, task, rng, opts);

    std::vector<double> coefs(rollout.tokens.size());
    for (double& c : coefs) c = (rng.uniform() - 0.5) * 2.0;

    const policy::Tensors grads =
        policy::backward(params, features, rollout.tokens, coefs, opts);

    const double h = 1e-5;
    double max_rel = 0.0;
    auto grad_arrays = grads.arrays();
    auto param_arrays = params.t.arrays();
    for (std::size_t a = 0; a < param_arrays.size(); ++a) {
        std::vector<double>& w = *param_arrays[a];
        const std::vector<double>& g = *grad_arrays[a];
        for (int k = 0; k < coords_per_tensor; ++k) {
            const std::size_t i = rng.uniform_below(w.size());
            const double orig = w[i];
            w[i] = orig + h;
            const double up = weighted_logprob(params, features, rollout.tokens, coefs, opts);
            w[i] = orig - h;
            const double dn = weighted_logprob(params, features, rollout.tokens, coefs, opts);
            w[i] = orig;
            const double fd = (up - dn) / (2.0 * h);
            const double rel = std::abs(fd - g[i]) / std::max({1.0, std::abs(fd), std::abs(g[i])});
            max_rel = std::max(max_rel, rel);
        }
    }
    return max_rel;
}

}  // namespace

TEST_SUITE_BEGIN("policy");

TEST_CASE("backward matches central finite differences") {
    policy::MaskOptions masked{true, 0.0, 1.0};
    policy::MaskOptions prior{false, 4.0, 1.0};
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        CAPTURE(seed);
        CHECK(gradcheck_instance(seed, masked, 25) <= 1e-4);
        CHECK(gradcheck_instance(seed + 100, prior, 25) <= 1e-4);
    }
}

TEST_CASE("init_params is deterministic and respects the scale") {
    const auto a = policy::init_params(42, 1.0, small_config());
    const auto b = policy::init_params(42, 1.0, small_config());
    CHECK(policy::params_digest(a) == policy::params_digest(b));
    const auto c = policy::init_params(43, 1.0, small_config());
    CHECK(policy::params_digest(a) != policy::params_digest(c));

    const auto tiny = policy::init_params(42, 1e-3, small_config());
    double norm_a = 0.0, norm_tiny = 0.0;
    for (double v : a.t.w1) norm_a += v * v;
    for (double v : tiny.t.w1) norm_tiny += v * v;
    CHECK(norm_tiny < norm_a * 1e-3);

    // biases and the skip path start at zero
    for (double v : a.t.b1) CHECK(v == 0.0);
    for (double v : a.t.w_skip) CHECK(v == 0.0);
}

TEST_CASE("structural masking zeroes impossible tokens") {
    const auto task = env::generate_task(9, env::Difficulty::hard, {});
    const auto features = env::featurize(task);
    const auto params = policy::init_params(1, 1.0, small_config());
    const policy::MaskOptions opts{true, 0.0, 1.0};

    const auto logits = policy::step_logits(params, features, {}, 0, opts);
    REQUIRE(static_cast<int>(logits.size()) == resp::kVocabSize);
    // only the opening tag is possible at position 0
    for (int t = 0; t < resp::kVocabSize; ++t) {
        if (t == static_cast<int>(resp::Token::think_open))
            CHECK(std::isfinite(logits[t]));
        else
            CHECK(logits[t] == -std::numeric_limits<double>::infinity());
    }
}

TEST_CASE("masked sampling always yields grammar-valid responses") {
    const policy::MaskOptions opts{true, 0.0, 1.0};
    const auto params = policy::init_params(5, 1.0, small_config());
    Rng rng(17);
    for (int i = 0; i < 200; ++i) {
        const auto task = env::generate_task(i, env::Difficulty::hard, {});
        const auto rollout = policy::sample_response(params, task, rng, opts);
        CHECK(resp::validate_grammar(rollout.tokens));
        CHECK(rollout.per_step_logprobs.size() == rollout.tokens.size());
        for (double lp : rollout.per_step_logprobs) CHECK(lp <= 0.0);
    }
}

TEST_CASE("unmasked sampling can produce invalid sequences but stays bounded") {
    const policy::MaskOptions opts{false, 0.0, 1.0};
    const auto params = policy::init_params(5, 1.0, small_config());
    Rng rng(18);
    int invalid = 0;
    for (int i = 0; i < 200; ++i) {
        const auto task = env::generate_task(i, env::Difficulty::easy, {});
        const auto rollout = policy::sample_response(params, task, rng, opts);
        CHECK(rollout.tokens.size() <= static_cast<std::size_t>(resp::kMaxLen));
        invalid += resp::validate_grammar(rollout.tokens) ? 0 : 1;
    }
    CHECK(invalid > 0);  // an untrained unmasked policy is not format-compliant
}

TEST_CASE("sampling is deterministic given the rng stream") {
    const auto task = env::generate_task(2, env::Difficulty::hard, {});
    const auto params = policy::init_params(3, 1.0, small_config());
    const policy::MaskOptions opts{false, 4.0, 1.0};
    Rng r1(11), r2(11);
    const auto a = policy::sample_response(params, task, r1, opts);
    const auto b = policy::sample_response(params, task, r2, opts);
    CHECK(a.tokens == b.tokens);
    CHECK(a.per_step_logprobs == b.per_step_logprobs);
}

TEST_CASE("sequence_logprob reproduces the rollout's cached logprobs") {
    const auto params = policy::init_params(21, 1.0, small_config());
    const policy::MaskOptions opts{false, 4.0, 1.0};
    Rng rng(4);
    for (int i = 0; i < 50; ++i) {
        const auto task = env::generate_task(1000 + i, env::Difficulty::hard, {});
        const auto rollout = policy::sample_response(params, task, rng, opts);
        const auto lp = policy::sequence_logprob(params, rollout.features, rollout.tokens, opts);
        REQUIRE(lp.per_step.size() == rollout.per_step_logprobs.size());
        double total = 0.0;
        for (std::size_t t = 0; t < lp.per_step.size(); ++t) {
            CHECK(lp.per_step[t] == doctest::Approx(rollout.per_step_logprobs[t]).epsilon(1e-12));
            total += lp.per_step[t];
        }
        CHECK(lp.total == doctest::Approx(total).epsilon(1e-12));
    }
}

TEST_CASE("greedy decode is deterministic and grammar-valid under masking") {
    const auto params = policy::init_params(8, 1.0, small_config());
    const policy::MaskOptions opts{true, 0.0, 1.0};
    const auto task = env::generate_task(77, env::Difficulty::hard, {});
    const auto a = policy::greedy_decode(params, task, opts);
    const auto b = policy::greedy_decode(params, task, opts);
    CHECK(a.tokens == b.tokens);
    CHECK(resp::validate_grammar(a.tokens));
}

TEST_CASE("temperature rescales the distribution sharpness") {
    const auto task = env::generate_task(31, env::Difficulty::hard, {});
    const auto features = env::featurize(task);
    const auto params = policy::init_params(9, 1.0, small_config());
    const std::vector<resp::Token> prefix{resp::Token::think_open};
    const auto cold = policy::step_logits(params, features, prefix, 1, {true, 0.0, 0.5});
    const auto warm = policy::step_logits(params, features, prefix, 1, {true, 0.0, 2.0});
    // log-prob gaps between any two allowed tokens scale with 1/temperature
    int ref = -1;
    for (int t = 0; t < resp::kVocabSize; ++t) {
        if (!std::isfinite(cold[t])) {
            CHECK(!std::isfinite(warm[t]));
            continue;
        }
        if (ref < 0) {
            ref = t;
            continue;
        }
        CHECK(cold[t] - cold[ref] ==
              doctest::Approx(4.0 * (warm[t] - warm[ref])).epsilon(1e-9));
    }
}

TEST_CASE("adam update moves parameters and rejects non-finite gradients") {
    auto params = policy::init_params(1, 1.0, small_config());
    auto adam = policy::AdamState::zeros(params.cfg);
    auto grads = policy::Tensors::zeros(params.cfg);
    grads.w1[0] = 1.0;
    const double before = params.t.w1[0];
    policy::apply_update(params, grads, adam, 1e-2);
    CHECK(params.t.w1[0] != before);
    CHECK(adam.step == 1);

    grads.w1[0] = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(policy::apply_update(params, grads, adam, 1e-2), TrainingError);
}

TEST_CASE("accumulate adds scaled gradients") {
    auto a = policy::Tensors::zeros(small_config());
    auto b = policy::Tensors::zeros(small_config());
    b.w2[3] = 2.0;
    policy::accumulate(a, b, 0.5);
    CHECK(a.w2[3] == 1.0);
    policy::accumulate(a, b);
    CHECK(a.w2[3] == 3.0);
}

TEST_CASE("checkpoints round-trip exactly") {
    namespace fs = std::filesystem;
    const fs::path path = fs::temp_directory_path() / "chartlab_ckpt_test.json";

    policy::Checkpoint ckpt;
    ckpt.params = policy::init_params(4, 1.0, small_config());
    ckpt.adam = policy::AdamState::zeros(ckpt.params.cfg);
    ckpt.adam.step = 17;
    ckpt.adam.m.w1[5] = 0.25;
    ckpt.meta = {{"note", "fixture"}};

    policy::save_checkpoint(path.string(), ckpt);
    const auto back = policy::load_checkpoint(path.string());
    CHECK(policy::params_digest(back.params) == policy::params_digest(ckpt.params));
    CHECK(back.adam.step == 17);
    CHECK(back.adam.m.w1[5] == 0.25);
    CHECK(back.meta.at("note") == "fixture");
    CHECK(back.params.cfg == ckpt.params.cfg);
    fs::remove(path);
}

TEST_CASE("loading rejects a foreign vocabulary manifest") {
    namespace fs = std::filesystem;
    const fs::path path = fs::temp_directory_path() / "chartlab_ckpt_tamper.json";

    policy::Checkpoint ckpt;
    ckpt.params = policy::init_params(4, 1.0, small_config());
    ckpt.adam = policy::AdamState::zeros(ckpt.params.cfg);
    policy::save_checkpoint(path.string(), ckpt);

    auto j = nlohmann::json::parse(std::ifstream(path));
    j["vocab"]["tokens"][0]["symbol"] = "<other>";
    std::ofstream(path) << j.dump();
    CHECK_THROWS(policy::load_checkpoint(path.string()));
    fs::remove(path);
}

TEST_SUITE_END();
