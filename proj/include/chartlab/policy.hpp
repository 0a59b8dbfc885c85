#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

#include "chartlab/chart_env.hpp"
#include "chartlab/response.hpp"
#include "chartlab/rng.hpp"

namespace chartlab::policy {

// Width of the slot-gated input block: copies of the argument one-hot groups
// (series 4, first category 8, second category 8, rank 4) that are exposed
// only at the decoding position where the grammar expects that argument, plus
// a copy of the query-kind one-hot exposed once two SELECTs have completed.
// The gating makes every mapping the tasks demand linear in the input, so the
// skip path can learn them directly.
inline constexpr int kGateDim = env::kMaxSeries + 2 * env::kMaxCategories + 4 + env::kNumQueryKinds;

// One-hot copies of the previous token and the position complement the learned
// embedding and the sin/cos encoding: token-to-token transitions and
// position-specific behavior become linear in fixed inputs instead of bilinear
// in trainable ones, which the direct skip path exploits.
inline constexpr int kPrevOneHotDim = resp::kVocabSize;
inline constexpr int kPosOneHotDim = resp::kMaxLen;

// Query-kind x position interaction block. Keeping each kind's positional
// preferences on its own coordinates stops gradient traffic for one kind from
// dragging the shared positional weights of the others.
inline constexpr int kKindPosDim = env::kNumQueryKinds * resp::kMaxLen;

struct NetConfig {
    int vocab = resp::kVocabSize;
    int embed_dim = 16;
    int hidden_dim = 64;
    int feature_dim = env::kFeatureDim;
    int pos_dim = 8;  // sin/cos pairs, must be even

    int input_dim() const {
        return embed_dim + feature_dim + pos_dim + kGateDim + kPrevOneHotDim + kPosOneHotDim +
               kKindPosDim;
    }
    bool operator==(const NetConfig&) const = default;
};

// All trainable tensors, row-major. The embedding has vocab+1 rows; the
// extra row is the BOS input used before any token has been emitted.
// w_skip is a direct input->logits path: the query/argument encodings are
// one-hot, so the mappings the tasks demand are mostly linear, and the skip
// path lets them be learned at linear-model speed alongside the MLP.
struct Tensors {
    std::vector<double> embedding;  // (vocab+1) x E
    std::vector<double> w1, b1;     // H x input_dim, H
    std::vector<double> w2, b2;     // H x H, H
    std::vector<double> w_out, b_out;  // vocab x H, vocab
    std::vector<double> w_skip;     // vocab x input_dim

    static Tensors zeros(const NetConfig& cfg);
    std::vector<std::vector<double>*> arrays();
    std::vector<const std::vector<double>*> arrays() const;
    std::size_t total_size() const;
    bool all_finite() const;
};

struct PolicyParams {
    NetConfig cfg;
    Tensors t;
    int version = 1;
};

// Controls how the categorical head turns net outputs into a distribution.
// With structural masking on, grammatically impossible tokens get -inf
// logits. With masking off, format_prior is added to the logits of the
// structurally possible tokens instead -- a fixed template prior standing in
// for the instruction-tuned base model's partial format adherence; format
// compliance still has to be learned and amplified by training.
struct MaskOptions {
    bool structural_masking = true;
    double format_prior = 0.0;
    double temperature = 1.0;
};

struct Rollout {
    std::vector<resp::Token> tokens;
    std::vector<double> per_step_logprobs;  // log pi(token_t | prefix, task), each <= 0
    std::vector<double> features;           // cached featurize(task)
};

struct SeqLogProb {
    double total = 0.0;
    std::vector<double> per_step;
};

// Weights ~ N(0, (scale/sqrt(fan_in))^2), biases zero, embedding ~ N(0, scale^2).
PolicyParams init_params(std::uint64_t seed, double scale, const NetConfig& cfg = {});

// Post-mask logits at one position (length == vocab; -inf marks masked).
std::vector<double> step_logits(const PolicyParams& params, const std::vector<double>& features,
                                std::span<const resp::Token> prefix, int position,
                                const MaskOptions& opts);

Rollout sample_response(const PolicyParams& params, const env::ChartTask& task, Rng& rng,
                        const MaskOptions& opts);
Rollout greedy_decode(const PolicyParams& params, const env::ChartTask& task, const MaskOptions& opts);

SeqLogProb sequence_logprob(const PolicyParams& params, const std::vector<double>& features,
                            std::span<const resp::Token> tokens, const MaskOptions& opts);
SeqLogProb sequence_logprob(const PolicyParams& params, const env::ChartTask& task,
                            std::span<const resp::Token> tokens, const MaskOptions& opts);

// Exact reverse-mode gradients of sum_t per_token_grads[t] * log pi(token_t).
// Steps whose token is structurally masked contribute exactly zero.
Tensors backward(const PolicyParams& params, const std::vector<double>& features,
                 std::span<const resp::Token> tokens, std::span<const double> per_token_grads,
                 const MaskOptions& opts);

void accumulate(Tensors& into, const Tensors& grads, double scale = 1.0);

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamState {
    Tensors m, v;
    std::int64_t step = 0;

    static AdamState zeros(const NetConfig& cfg);
};

// Throws TrainingError on non-finite gradients.
void apply_update(PolicyParams& params, const Tensors& grads, AdamState& state, double lr,
                  const AdamConfig& adam = {});

std::uint64_t params_digest(const PolicyParams& params);

nlohmann::json tensors_to_json(const Tensors& t);
Tensors tensors_from_json(const nlohmann::json& j, const NetConfig& cfg);
nlohmann::json net_config_to_json(const NetConfig& cfg);
NetConfig net_config_from_json(const nlohmann::json& j);

struct Checkpoint {
    PolicyParams params;
    AdamState adam;
    nlohmann::json meta;  // train/reward config, reference params, resume cursor
};

// Versioned JSON checkpoint embedding the vocabulary manifest; load refuses
// checkpoints whose manifest does not match this build.
void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace chartlab::policy
