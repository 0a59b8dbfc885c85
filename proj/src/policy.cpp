#include "chartlab/policy.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

namespace chartlab::policy {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void positional_encoding(int position, int pos_dim, double* out) {
    for (int i = 0; i < pos_dim / 2; ++i) {
        const double freq = std::pow(10000.0, -2.0 * i / pos_dim);
        out[2 * i] = std::sin(position * freq);
        out[2 * i + 1] = std::cos(position * freq);
    }
}

// Per-step forward activations for backward().
struct StepForward {
    std::vector<double> x, h1, h2, net_logits, probs;  // probs over the masked distribution
    int prev_row = 0;  // embedding row used as input
};

// Gain applied to the structural one-hot input blocks. The optimizer moves
// each weight at a rate capped by the learning rate, so the speed at which a
// logit gap can open is proportional to the magnitude of the active inputs;
// the gain buys faster consolidation without touching the optimizer.
constexpr double kControlGain = 1.0;
constexpr double kKindPosGain = 1.0;

// The decoding-time automaton the policy masks (or priors) against admits an
// operation only once its operands exist, unlike the looser template grammar
// the format reward checks.
constexpr bool kDiscipline = true;

// Strength of the argument-pointing prior: the gated argument one-hots feed
// the matching argument-token logits through this fixed gain, so exploration
// starts out pointed at the cells the question references. Without it the
// two-SELECT kinds (diff/ratio) never see a first success: their reward
// groups stay all-zero and group-standardized advantages give no gradient.
constexpr double kArgPointingPrior = 3.0;

bool is_series_token(resp::Token t) { return t >= resp::Token::s0 && t <= resp::Token::s3; }

// Fills the slot-gated block: the argument one-hot group matching what the
// grammar expects next, and the query-kind one-hot once a second SELECT has
// completed (where the pending combiner, not the first operation, must be
// chosen). Everything else stays zero.
void fill_gates(const std::vector<double>& features, std::span<const resp::Token> prefix, double* g) {
    std::fill(g, g + kGateDim, 0.0);
    if (prefix.empty()) return;
    int selects = 0;
    for (resp::Token t : prefix) selects += (t == resp::Token::select) ? 1 : 0;
    const resp::Token last = prefix.back();
    constexpr int kCatAGate = env::kMaxSeries;
    constexpr int kCatBGate = kCatAGate + env::kMaxCategories;
    constexpr int kRankGate = kCatBGate + env::kMaxCategories;
    constexpr int kKindGate = kRankGate + 4;
    if (last == resp::Token::select) {
        for (int i = 0; i < env::kMaxSeries; ++i) g[i] = features[env::kFeatureSeriesOffset + i];
    } else if (is_series_token(last)) {
        if (selects <= 1)
            for (int i = 0; i < env::kMaxCategories; ++i)
                g[kCatAGate + i] = features[env::kFeatureCatAOffset + i];
        else
            for (int i = 0; i < env::kMaxCategories; ++i)
                g[kCatBGate + i] = features[env::kFeatureCatBOffset + i];
    } else if (last == resp::Token::rank_k) {
        for (int i = 0; i < 4; ++i) g[kRankGate + i] = features[env::kFeatureRankOffset + i];
    }
    if (selects >= 2)
        for (int i = 0; i < env::kNumQueryKinds; ++i)
            g[kKindGate + i] = features[env::kFeatureKindOffset + i];
}

void build_input(const PolicyParams& p, const std::vector<double>& features,
                 std::span<const resp::Token> prefix, int position, std::vector<double>& x) {
    const NetConfig& cfg = p.cfg;
    x.resize(cfg.input_dim());
    const int prev_row = prefix.empty() ? cfg.vocab : static_cast<int>(prefix.back());
    const double* emb = p.t.embedding.data() + static_cast<std::size_t>(prev_row) * cfg.embed_dim;
    std::copy(emb, emb + cfg.embed_dim, x.begin());
    std::copy(features.begin(), features.end(), x.begin() + cfg.embed_dim);
    positional_encoding(position, cfg.pos_dim, x.data() + cfg.embed_dim + cfg.feature_dim);
    double* g = x.data() + cfg.embed_dim + cfg.feature_dim + cfg.pos_dim;
    fill_gates(features, prefix, g);
    for (int i = 0; i < kGateDim; ++i) g[i] *= kControlGain;
    g += kGateDim;
    std::fill(g, g + kPrevOneHotDim + kPosOneHotDim + kKindPosDim, 0.0);
    if (!prefix.empty()) g[static_cast<int>(prefix.back())] = kControlGain;
    if (position >= 0 && position < kPosOneHotDim) {
        g[kPrevOneHotDim + position] = kControlGain;
        double* kp = g + kPrevOneHotDim + kPosOneHotDim;
        for (int k = 0; k < env::kNumQueryKinds; ++k)
            kp[k * kPosOneHotDim + position] = kKindPosGain * features[env::kFeatureKindOffset + k];
    }
}

void matvec(const std::vector<double>& w, const std::vector<double>& b, const std::vector<double>& x,
            std::vector<double>& out) {
    const std::size_t rows = b.size();
    const std::size_t cols = x.size();
    out.resize(rows);
    for (std::size_t i = 0; i < rows; ++i) {
        const double* row = w.data() + i * cols;
        double acc = b[i];
        for (std::size_t j = 0; j < cols; ++j) acc += row[j] * x[j];
        out[i] = acc;
    }
}

}  // namespace

Tensors Tensors::zeros(const NetConfig& cfg) {
    Tensors t;
    t.embedding.assign(static_cast<std::size_t>(cfg.vocab + 1) * cfg.embed_dim, 0.0);
    t.w1.assign(static_cast<std::size_t>(cfg.hidden_dim) * cfg.input_dim(), 0.0);
    t.b1.assign(cfg.hidden_dim, 0.0);
    t.w2.assign(static_cast<std::size_t>(cfg.hidden_dim) * cfg.hidden_dim, 0.0);
    t.b2.assign(cfg.hidden_dim, 0.0);
    t.w_out.assign(static_cast<std::size_t>(cfg.vocab) * cfg.hidden_dim, 0.0);
    t.b_out.assign(cfg.vocab, 0.0);
    t.w_skip.assign(static_cast<std::size_t>(cfg.vocab) * cfg.input_dim(), 0.0);
    return t;
}

std::vector<std::vector<double>*> Tensors::arrays() {
    return {&embedding, &w1, &b1, &w2, &b2, &w_out, &b_out, &w_skip};
}

std::vector<const std::vector<double>*> Tensors::arrays() const {
    return {&embedding, &w1, &b1, &w2, &b2, &w_out, &b_out, &w_skip};
}

std::size_t Tensors::total_size() const {
    std::size_t n = 0;
    for (const auto* a : arrays()) n += a->size();
    return n;
}

bool Tensors::all_finite() const {
    for (const auto* a : arrays())
        for (double v : *a)
            if (!std::isfinite(v)) return false;
    return true;
}

PolicyParams init_params(std::uint64_t seed, double scale, const NetConfig& cfg) {
    if (!(scale > 0.0)) throw ConfigError("init scale must be positive");
    PolicyParams p;
    p.cfg = cfg;
    p.t = Tensors::zeros(cfg);
    Rng rng(mix_seed(seed, 0x504f4c49ULL));
    for (double& v : p.t.embedding) v = scale * rng.normal();
    const double s1 = scale / std::sqrt(static_cast<double>(cfg.input_dim()));
    for (double& v : p.t.w1) v = s1 * rng.normal();
    const double s2 = scale / std::sqrt(static_cast<double>(cfg.hidden_dim));
    for (double& v : p.t.w2) v = s2 * rng.normal();
    for (double& v : p.t.w_out) v = s2 * rng.normal();
    return p;
}

namespace {

std::array<bool, resp::kVocabSize> allowed_after(std::span<const resp::Token> prefix) {
    resp::GrammarState st(kDiscipline);
    for (resp::Token t : prefix) st.advance(t);
    return st.allowed();
}

int prev_row_for(const NetConfig& cfg, std::span<const resp::Token> prefix) {
    return prefix.empty() ? cfg.vocab : static_cast<int>(prefix.back());
}

struct StepDist {
    std::vector<double> logprobs;  // effective log-probs, -inf for masked
    StepForward fwd;               // activations for backward
};

void step_distribution(const PolicyParams& p, const std::vector<double>& features,
                       std::span<const resp::Token> prefix, int position,
                       const std::array<bool, resp::kVocabSize>& allowed, const MaskOptions& opts,
                       StepDist& d, bool keep_acts) {
    StepForward& f = d.fwd;
    f.prev_row = prev_row_for(p.cfg, prefix);
    build_input(p, features, prefix, position, f.x);
    matvec(p.t.w1, p.t.b1, f.x, f.h1);
    for (double& v : f.h1) v = std::tanh(v);
    matvec(p.t.w2, p.t.b2, f.h1, f.h2);
    for (double& v : f.h2) v = std::tanh(v);
    matvec(p.t.w_out, p.t.b_out, f.h2, f.net_logits);
    {  // direct input->logits skip path
        const std::size_t in = f.x.size();
        for (int j = 0; j < p.cfg.vocab; ++j) {
            const double* row = p.t.w_skip.data() + static_cast<std::size_t>(j) * in;
            double acc = 0.0;
            for (std::size_t i = 0; i < in; ++i) acc += row[i] * f.x[i];
            f.net_logits[j] += acc;
        }
    }

    // Argument-pointing prior: the gated argument one-hots also feed the
    // matching token logits through a fixed gain, so exploration starts out
    // pointed at the cells the question references -- the argument-slot
    // analog of the format prior's partial template adherence. The offset is
    // parameter-independent, so the gradient formulas are unchanged.
    std::vector<double> pointing(p.cfg.vocab, 0.0);
    if (kArgPointingPrior != 0.0) {
        const double* g = f.x.data() + p.cfg.embed_dim + p.cfg.feature_dim + p.cfg.pos_dim;
        const double scale = kArgPointingPrior / kControlGain;
        for (int i = 0; i < env::kMaxSeries; ++i)
            pointing[static_cast<int>(resp::Token::s0) + i] = scale * g[i];
        for (int i = 0; i < env::kMaxCategories; ++i)
            pointing[static_cast<int>(resp::Token::c0) + i] =
                scale * (g[env::kMaxSeries + i] + g[env::kMaxSeries + env::kMaxCategories + i]);
        for (int i = 0; i < 4; ++i)
            pointing[static_cast<int>(resp::Token::k1) + i] =
                scale * g[env::kMaxSeries + 2 * env::kMaxCategories + i];
    }

    const int V = p.cfg.vocab;
    d.logprobs.assign(V, kNegInf);
    std::vector<double> eff(V, kNegInf);
    double maxv = kNegInf;
    for (int j = 0; j < V; ++j) {
        double e = (f.net_logits[j] + pointing[j]) / opts.temperature;
        if (opts.structural_masking) {
            if (!allowed[j]) continue;
        } else if (allowed[j]) {
            e += opts.format_prior;
        }
        eff[j] = e;
        maxv = std::max(maxv, e);
    }
    double z = 0.0;
    for (int j = 0; j < V; ++j)
        if (eff[j] != kNegInf) z += std::exp(eff[j] - maxv);
    const double logz = std::log(z) + maxv;
    f.probs.assign(V, 0.0);
    for (int j = 0; j < V; ++j) {
        if (eff[j] == kNegInf) continue;
        d.logprobs[j] = eff[j] - logz;
        f.probs[j] = std::exp(d.logprobs[j]);
    }
    if (!keep_acts) {
        f.x.clear();
        f.h1.clear();
        f.h2.clear();
        f.net_logits.clear();
    }
}

}  // namespace

std::vector<double> step_logits(const PolicyParams& params, const std::vector<double>& features,
                                std::span<const resp::Token> prefix, int position,
                                const MaskOptions& opts) {
    if (position >= resp::kMaxLen) throw ConfigError("position beyond max response length");
    const auto allowed = allowed_after(prefix);
    StepDist d;
    step_distribution(params, features, prefix, position, allowed, opts, d,
                      false);
    // Effective logits and log-probabilities differ by a constant; expose the
    // normalized log-probabilities, which is what callers consume.
    return d.logprobs;
}

Rollout sample_response(const PolicyParams& params, const env::ChartTask& task, Rng& rng,
                        const MaskOptions& opts) {
    Rollout r;
    r.features = env::featurize(task);
    resp::GrammarState st(kDiscipline);
    for (int pos = 0; pos < resp::kMaxLen; ++pos) {
        StepDist d;
        step_distribution(params, r.features, r.tokens, pos, st.allowed(), opts,
                          d, false);
        const double u = rng.uniform();
        double acc = 0.0;
        int choice = -1;
        for (int j = 0; j < params.cfg.vocab; ++j) {
            acc += d.fwd.probs[j];
            if (u < acc) {
                choice = j;
                break;
            }
        }
        if (choice < 0) {  // numerical tail; pick the last token with mass
            for (int j = params.cfg.vocab - 1; j >= 0; --j)
                if (d.fwd.probs[j] > 0.0) {
                    choice = j;
                    break;
                }
        }
        const auto tok = static_cast<resp::Token>(choice);
        r.tokens.push_back(tok);
        r.per_step_logprobs.push_back(d.logprobs[choice]);
        st.advance(tok);
        if (tok == resp::Token::eos) break;
    }
    return r;
}

Rollout greedy_decode(const PolicyParams& params, const env::ChartTask& task, const MaskOptions& opts) {
    Rollout r;
    r.features = env::featurize(task);
    resp::GrammarState st(kDiscipline);
    for (int pos = 0; pos < resp::kMaxLen; ++pos) {
        StepDist d;
        step_distribution(params, r.features, r.tokens, pos, st.allowed(), opts,
                          d, false);
        int choice = 0;
        double best = kNegInf;
        for (int j = 0; j < params.cfg.vocab; ++j) {
            if (d.logprobs[j] > best) {
                best = d.logprobs[j];
                choice = j;
            }
        }
        const auto tok = static_cast<resp::Token>(choice);
        r.tokens.push_back(tok);
        r.per_step_logprobs.push_back(d.logprobs[choice]);
        st.advance(tok);
        if (tok == resp::Token::eos) break;
    }
    return r;
}

SeqLogProb sequence_logprob(const PolicyParams& params, const std::vector<double>& features,
                            std::span<const resp::Token> tokens, const MaskOptions& opts) {
    if (tokens.size() > static_cast<std::size_t>(resp::kMaxLen))
        throw ConfigError("token sequence exceeds max response length");
    SeqLogProb out;
    resp::GrammarState st(kDiscipline);
    std::vector<resp::Token> prefix;
    for (std::size_t pos = 0; pos < tokens.size(); ++pos) {
        StepDist d;
        step_distribution(params, features, prefix, static_cast<int>(pos),
                          st.allowed(), opts, d, false);
        out.per_step.push_back(d.logprobs[static_cast<int>(tokens[pos])]);
        prefix.push_back(tokens[pos]);
        st.advance(tokens[pos]);
    }
    out.total = 0.0;
    for (double lp : out.per_step) out.total += lp;
    return out;
}

SeqLogProb sequence_logprob(const PolicyParams& params, const env::ChartTask& task,
                            std::span<const resp::Token> tokens, const MaskOptions& opts) {
    return sequence_logprob(params, env::featurize(task), tokens, opts);
}

Tensors backward(const PolicyParams& params, const std::vector<double>& features,
                 std::span<const resp::Token> tokens, std::span<const double> per_token_grads,
                 const MaskOptions& opts) {
    if (tokens.size() != per_token_grads.size()) throw ConfigError("grad/token length mismatch");
    const NetConfig& cfg = params.cfg;
    Tensors g = Tensors::zeros(cfg);
    const int V = cfg.vocab;
    const int H = cfg.hidden_dim;
    const int In = cfg.input_dim();

    resp::GrammarState st(kDiscipline);
    std::vector<resp::Token> prefix;
    std::vector<double> dlogits(V), dh2(H), da2(H), dh1(H), da1(H);

    for (std::size_t pos = 0; pos < tokens.size(); ++pos) {
        const int tok = static_cast<int>(tokens[pos]);
        const double gcoef = per_token_grads[pos];
        // with masking on, a structurally impossible token has probability
        // zero regardless of params, so its gradient is identically zero
        const bool masked_out = opts.structural_masking && !st.allowed()[tok];
        StepDist d;
        if (gcoef != 0.0 && !masked_out) {
            step_distribution(params, features, prefix, static_cast<int>(pos),
                              st.allowed(), opts, d, true);
            const StepForward& f = d.fwd;
            // d log pi(tok) / d net_logit_j = (delta - p_j) / temperature
            for (int j = 0; j < V; ++j)
                dlogits[j] = gcoef * (((j == tok) ? 1.0 : 0.0) - f.probs[j]) / opts.temperature;

            for (int i = 0; i < H; ++i) {
                double acc = 0.0;
                for (int j = 0; j < V; ++j) acc += params.t.w_out[static_cast<std::size_t>(j) * H + i] * dlogits[j];
                dh2[i] = acc;
            }
            for (int j = 0; j < V; ++j) {
                const double dj = dlogits[j];
                if (dj == 0.0) continue;
                double* row = g.w_out.data() + static_cast<std::size_t>(j) * H;
                for (int i = 0; i < H; ++i) row[i] += dj * f.h2[i];
                g.b_out[j] += dj;
            }
            for (int i = 0; i < H; ++i) da2[i] = dh2[i] * (1.0 - f.h2[i] * f.h2[i]);
            for (int i = 0; i < H; ++i) {
                double acc = 0.0;
                for (int k = 0; k < H; ++k) acc += params.t.w2[static_cast<std::size_t>(k) * H + i] * da2[k];
                dh1[i] = acc;
            }
            for (int k = 0; k < H; ++k) {
                const double dk = da2[k];
                if (dk == 0.0) continue;
                double* row = g.w2.data() + static_cast<std::size_t>(k) * H;
                for (int i = 0; i < H; ++i) row[i] += dk * f.h1[i];
                g.b2[k] += dk;
            }
            for (int i = 0; i < H; ++i) da1[i] = dh1[i] * (1.0 - f.h1[i] * f.h1[i]);
            for (int k = 0; k < H; ++k) {
                const double dk = da1[k];
                if (dk == 0.0) continue;
                double* row = g.w1.data() + static_cast<std::size_t>(k) * In;
                for (int i = 0; i < In; ++i) row[i] += dk * f.x[i];
                g.b1[k] += dk;
            }
            for (int j = 0; j < V; ++j) {
                const double dj = dlogits[j];
                if (dj == 0.0) continue;
                double* row = g.w_skip.data() + static_cast<std::size_t>(j) * In;
                for (int i = 0; i < In; ++i) row[i] += dj * f.x[i];
            }
            // input gradient -> embedding row of the previous token, through
            // both the first layer and the skip path
            double* emb_row = g.embedding.data() + static_cast<std::size_t>(f.prev_row) * cfg.embed_dim;
            for (int e = 0; e < cfg.embed_dim; ++e) {
                double acc = 0.0;
                for (int k = 0; k < H; ++k) acc += da1[k] * params.t.w1[static_cast<std::size_t>(k) * In + e];
                for (int j = 0; j < V; ++j) acc += dlogits[j] * params.t.w_skip[static_cast<std::size_t>(j) * In + e];
                emb_row[e] += acc;
            }
        }
        prefix.push_back(tokens[pos]);
        st.advance(tokens[pos]);
    }
    return g;
}

void accumulate(Tensors& into, const Tensors& grads, double scale) {
    auto dst = into.arrays();
    auto src = grads.arrays();
    for (std::size_t a = 0; a < dst.size(); ++a) {
        auto& d = *dst[a];
        const auto& s = *src[a];
        for (std::size_t i = 0; i < d.size(); ++i) d[i] += scale * s[i];
    }
}

AdamState AdamState::zeros(const NetConfig& cfg) {
    AdamState s;
    s.m = Tensors::zeros(cfg);
    s.v = Tensors::zeros(cfg);
    return s;
}

void apply_update(PolicyParams& params, const Tensors& grads, AdamState& state, double lr,
                  const AdamConfig& adam) {
    if (!grads.all_finite()) throw TrainingError("non-finite gradients; update rejected");
    state.step += 1;
    const double bc1 = 1.0 - std::pow(adam.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(adam.beta2, static_cast<double>(state.step));
    auto pa = params.t.arrays();
    auto ga = grads.arrays();
    auto ma = state.m.arrays();
    auto va = state.v.arrays();
    for (std::size_t a = 0; a < pa.size(); ++a) {
        auto& p = *pa[a];
        const auto& g = *ga[a];
        auto& m = *ma[a];
        auto& v = *va[a];
        for (std::size_t i = 0; i < p.size(); ++i) {
            m[i] = adam.beta1 * m[i] + (1.0 - adam.beta1) * g[i];
            v[i] = adam.beta2 * v[i] + (1.0 - adam.beta2) * g[i] * g[i];
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            p[i] -= lr * mhat / (std::sqrt(vhat) + adam.eps);
        }
    }
}

std::uint64_t params_digest(const PolicyParams& params) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto* a : params.t.arrays())
        h = fnv1a(a->data(), a->size() * sizeof(double), h);
    return h;
}

nlohmann::json tensors_to_json(const Tensors& t) {
    return {{"embedding", t.embedding}, {"w1", t.w1}, {"b1", t.b1}, {"w2", t.w2},
            {"b2", t.b2},               {"w_out", t.w_out}, {"b_out", t.b_out},
            {"w_skip", t.w_skip}};
}

Tensors tensors_from_json(const nlohmann::json& j, const NetConfig& cfg) {
    Tensors t = Tensors::zeros(cfg);
    t.embedding = j.at("embedding").get<std::vector<double>>();
    t.w1 = j.at("w1").get<std::vector<double>>();
    t.b1 = j.at("b1").get<std::vector<double>>();
    t.w2 = j.at("w2").get<std::vector<double>>();
    t.b2 = j.at("b2").get<std::vector<double>>();
    t.w_out = j.at("w_out").get<std::vector<double>>();
    t.b_out = j.at("b_out").get<std::vector<double>>();
    t.w_skip = j.at("w_skip").get<std::vector<double>>();
    const Tensors ref = Tensors::zeros(cfg);
    auto ta = t.arrays();
    auto ra = ref.arrays();
    for (std::size_t a = 0; a < ta.size(); ++a)
        if (ta[a]->size() != ra[a]->size()) throw IoError("tensor shape mismatch in checkpoint");
    return t;
}

nlohmann::json net_config_to_json(const NetConfig& cfg) {
    return {{"vocab", cfg.vocab},         {"embed_dim", cfg.embed_dim}, {"hidden_dim", cfg.hidden_dim},
            {"feature_dim", cfg.feature_dim}, {"pos_dim", cfg.pos_dim}};
}

NetConfig net_config_from_json(const nlohmann::json& j) {
    NetConfig cfg;
    cfg.vocab = j.at("vocab").get<int>();
    cfg.embed_dim = j.at("embed_dim").get<int>();
    cfg.hidden_dim = j.at("hidden_dim").get<int>();
    cfg.feature_dim = j.at("feature_dim").get<int>();
    cfg.pos_dim = j.at("pos_dim").get<int>();
    return cfg;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
    nlohmann::json j;
    j["format_version"] = 1;
    j["code_version"] = std::string(kVersion);
    j["vocab"] = resp::vocab_manifest();
    j["net_config"] = net_config_to_json(ckpt.params.cfg);
    j["params_version"] = ckpt.params.version;
    j["params"] = tensors_to_json(ckpt.params.t);
    j["adam"] = {{"m", tensors_to_json(ckpt.adam.m)},
                 {"v", tensors_to_json(ckpt.adam.v)},
                 {"step", ckpt.adam.step}};
    j["meta"] = ckpt.meta;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write checkpoint: " + path);
    out << j.dump();
    if (!out) throw IoError("checkpoint write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint: " + path);
    nlohmann::json j = nlohmann::json::parse(in);
    if (j.at("vocab") != resp::vocab_manifest())
        throw ConfigError("vocabulary manifest mismatch between checkpoint and this build");
    Checkpoint ckpt;
    ckpt.params.cfg = net_config_from_json(j.at("net_config"));
    ckpt.params.version = j.at("params_version").get<int>();
    ckpt.params.t = tensors_from_json(j.at("params"), ckpt.params.cfg);
    ckpt.adam.m = tensors_from_json(j.at("adam").at("m"), ckpt.params.cfg);
    ckpt.adam.v = tensors_from_json(j.at("adam").at("v"), ckpt.params.cfg);
    ckpt.adam.step = j.at("adam").at("step").get<std::int64_t>();
    ckpt.meta = j.at("meta");
    return ckpt;
}

}  // namespace chartlab::policy
