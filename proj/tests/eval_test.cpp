#include "chartlab/eval.hpp"

#include <cmath>

#include "doctest.h"

#include "chartlab/sft.hpp"

using namespace chartlab;

namespace {

std::vector<env::ChartTask> corpus_of(int n, std::uint64_t seed0, env::Difficulty d) {
    std::vector<env::ChartTask> tasks;
    for (int i = 0; i < n; ++i) tasks.push_back(env::generate_task(seed0 + i, d, {}));
    return tasks;
}

// A policy trained to reproduce the oracle traces on the given corpus; used
// as a known-accurate subject for the evaluation harness.
policy::PolicyParams memorized_policy(const std::vector<env::ChartTask>& corpus) {
    policy::NetConfig small;
    small.embed_dim = 8;
    small.hidden_dim = 16;
    auto params = policy::init_params(3, 1.0, small);
    sft::SftConfig cfg;
    cfg.epochs = 60;
    cfg.batch_size = 4;
    cfg.seed = 5;
    sft::sft_train(params, corpus, sft::generate_traces(corpus, sft::TraceSource::oracle_canonical),
                   cfg);
    return params;
}

}  // namespace

TEST_SUITE_BEGIN("eval");

TEST_CASE("evaluate scores a memorized policy perfectly and an untrained one poorly") {
    const auto corpus = corpus_of(6, 700, env::Difficulty::hard);
    const reward::RewardConfig rcfg;

    const auto trained = memorized_policy(corpus);
    const auto report = eval::evaluate(trained, corpus, rcfg);
    CHECK(report.n == 6);
    CHECK(report.correct == 6);
    CHECK(report.accuracy == 1.0);

    int by_kind_n = 0;
    for (const auto& [kind, stat] : report.by_category) {
        by_kind_n += stat.n;
        CHECK(stat.correct == stat.n);
    }
    CHECK(by_kind_n == report.n);

    policy::NetConfig small;
    small.embed_dim = 8;
    small.hidden_dim = 16;
    const auto untrained = policy::init_params(99, 1.0, small);
    const auto base = eval::evaluate(untrained, corpus, rcfg);
    CHECK(base.accuracy < report.accuracy);
}

TEST_CASE("evaluation is a pure function of its inputs") {
    const auto corpus = corpus_of(10, 800, env::Difficulty::hard);
    policy::NetConfig small;
    small.embed_dim = 8;
    small.hidden_dim = 16;
    const auto params = policy::init_params(1, 1.0, small);
    const auto a = eval::evaluate(params, corpus, {});
    const auto b = eval::evaluate(params, corpus, {});
    CHECK(a.to_json() == b.to_json());
}

TEST_CASE("relative delta reproduces the reference improvement figures") {
    // 35.2 -> 41.1 is a +16.8% relative improvement (reported as +16.7%)
    CHECK(eval::relative_delta(35.2, 41.1) * 100.0 == doctest::Approx(16.76).epsilon(1e-3));
    CHECK(std::abs(eval::relative_delta(35.2, 41.1) * 100.0 - 16.7) < 0.1);
    // 36.4 -> 40.6 is +11.5%
    CHECK(eval::relative_delta(36.4, 40.6) * 100.0 == doctest::Approx(11.538).epsilon(1e-3));
    CHECK(std::abs(eval::relative_delta(36.4, 40.6) * 100.0 - 11.5) < 0.1);

    CHECK(eval::relative_delta(2.0, 1.0) == doctest::Approx(-0.5));
    CHECK_THROWS_AS(eval::relative_delta(0.0, 1.0), ConfigError);
    CHECK_THROWS_AS(eval::relative_delta(-1.0, 1.0), ConfigError);
}

TEST_CASE("two proportion z-test matches a high-precision oracle") {
    // oracle values computed with 30-digit arithmetic from the pooled
    // two-proportion z statistic and the normal tail via erfc
    CHECK(eval::two_proportion_test(820, 2000, 704, 2000) ==
          doctest::Approx(1.58877294380135e-4).epsilon(1e-8));
    CHECK(eval::two_proportion_test(50, 100, 40, 100) ==
          doctest::Approx(0.155218489684684).epsilon(1e-8));
    CHECK(eval::two_proportion_test(450, 500, 100, 500) ==
          doctest::Approx(0.0).scale(1.0).epsilon(1e-12));  // astronomically significant

    SUBCASE("equal proportions give p = 1") {
        CHECK(eval::two_proportion_test(30, 100, 30, 100) == doctest::Approx(1.0));
        CHECK(eval::two_proportion_test(0, 50, 0, 75) == doctest::Approx(1.0));
    }
    SUBCASE("the test is symmetric in its arguments") {
        CHECK(eval::two_proportion_test(40, 100, 25, 100) ==
              doctest::Approx(eval::two_proportion_test(25, 100, 40, 100)).epsilon(1e-12));
    }
}

TEST_CASE("attach_baseline fills the comparison columns") {
    eval::EvalReport treatment;
    treatment.n = 500;
    treatment.correct = 350;
    treatment.accuracy = 0.7;
    eval::EvalReport baseline;
    baseline.n = 500;
    baseline.correct = 250;
    baseline.accuracy = 0.5;

    eval::attach_baseline(treatment, baseline);
    REQUIRE(treatment.baseline_accuracy.has_value());
    CHECK(*treatment.baseline_accuracy == 0.5);
    REQUIRE(treatment.relative_delta.has_value());
    CHECK(*treatment.relative_delta == doctest::Approx(0.4));
    REQUIRE(treatment.p_value.has_value());
    CHECK(*treatment.p_value ==
          doctest::Approx(eval::two_proportion_test(350, 500, 250, 500)).epsilon(1e-12));

    SUBCASE("zero baseline skips the relative delta but keeps the p-value") {
        eval::EvalReport zero;
        zero.n = 500;
        zero.correct = 0;
        zero.accuracy = 0.0;
        eval::EvalReport t2 = treatment;
        eval::attach_baseline(t2, zero);
        CHECK(!t2.relative_delta.has_value());
        CHECK(t2.p_value.has_value());
    }
}

TEST_CASE("report json carries totals and per-kind breakdowns") {
    const auto corpus = corpus_of(5, 900, env::Difficulty::hard);
    const auto params = memorized_policy(corpus);
    const auto report = eval::evaluate(params, corpus, {});
    const auto j = report.to_json();
    CHECK(j.at("n").get<int>() == 5);
    CHECK(j.at("accuracy").get<double>() == 1.0);
    CHECK(j.contains("by_category"));
}

TEST_CASE("robustness sweep evaluates every requested perturbation") {
    const auto corpus = corpus_of(8, 950, env::Difficulty::hard);
    const auto params = memorized_policy(corpus);
    const std::vector<env::PerturbationKind> kinds{env::PerturbationKind::series_reorder,
                                                   env::PerturbationKind::value_rescale};
    const auto sweep = eval::robustness_sweep(params, corpus, kinds, 42, {});
    REQUIRE(sweep.count("normal") == 1);
    CHECK(sweep.at("normal").n == 8);
    for (const auto kind : kinds) {
        REQUIRE(sweep.count(env::to_string(kind)) == 1);
        CHECK(sweep.at(env::to_string(kind)).n <= 8);
    }
}

TEST_SUITE_END();
