#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "chartlab/chart_env.hpp"
#include "chartlab/policy.hpp"

namespace chartlab::sft {

enum class TraceSource {
    oracle_canonical,  // full multi-step reasoning trace from the oracle program
    answer_only,       // degenerate thinking block: a single SELECT of the answer cell
};

std::string to_string(TraceSource s);
TraceSource trace_source_from_string(const std::string& s);

struct Trace {
    std::string task_id;
    std::vector<resp::Token> tokens;
    TraceSource source = TraceSource::oracle_canonical;
};

// One trace per task, in corpus order; deterministic.
std::vector<Trace> generate_traces(const std::vector<env::ChartTask>& corpus, TraceSource mode);

void write_traces(const std::string& path, const std::vector<Trace>& traces);
std::vector<Trace> read_traces(const std::string& path);

struct SftConfig {
    int epochs = 30;
    int batch_size = 16;
    double lr = 1e-3;
    std::uint64_t seed = 0;
    bool structural_masking = true;
    double format_prior = 8.0;  // used only when structural_masking is off
    double temperature = 1.0;

    void validate() const;
    policy::MaskOptions mask_options() const;
};

// Teacher-forced cross-entropy over trace tokens, minibatch updates with the
// shared Adam machinery. Traces must be index-aligned with `corpus` (the
// layout generate_traces produces). Returns the mean per-token negative
// log-likelihood per epoch. Deterministic given config.seed.
std::vector<double> sft_train(policy::PolicyParams& params, const std::vector<env::ChartTask>& corpus,
                              const std::vector<Trace>& traces, const SftConfig& config);

}  // namespace chartlab::sft
