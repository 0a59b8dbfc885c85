#include "chartlab/sft.hpp"

#include <fstream>

#include "chartlab/rng.hpp"

namespace chartlab::sft {

namespace {
constexpr std::uint64_t kEpochTag = 0x45504f43ULL;  // per-epoch RNG stream tag
}

std::string to_string(TraceSource s) {
    return s == TraceSource::oracle_canonical ? "oracle_canonical" : "answer_only";
}

TraceSource trace_source_from_string(const std::string& s) {
    if (s == "oracle_canonical") return TraceSource::oracle_canonical;
    if (s == "answer_only") return TraceSource::answer_only;
    throw ConfigError("unknown trace source: " + s);
}

std::vector<Trace> generate_traces(const std::vector<env::ChartTask>& corpus, TraceSource mode) {
    std::vector<Trace> traces;
    traces.reserve(corpus.size());
    for (const env::ChartTask& task : corpus) {
        Trace tr;
        tr.task_id = task.task_id;
        tr.source = mode;
        if (mode == TraceSource::oracle_canonical) {
            tr.tokens = resp::tokens_for_program(env::canonical_program(task.query));
        } else {
            // answer-only target: point straight at a cell holding the answer,
            // or fall back to the first cell when no single cell does
            int s = 0, c = 0;
            bool found = false;
            for (int i = 0; i < task.table.num_series() && !found; ++i)
                for (int j = 0; j < task.table.num_categories() && !found; ++j)
                    if (task.table.values[i][j] == task.ground_truth) {
                        s = i;
                        c = j;
                        found = true;
                    }
            tr.tokens = resp::tokens_for_program(
                std::vector<env::DslOp>{{env::OpKind::select, s, c}, {env::OpKind::emit}});
        }
        traces.push_back(std::move(tr));
    }
    return traces;
}

void write_traces(const std::string& path, const std::vector<Trace>& traces) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write traces: " + path);
    for (const Trace& tr : traces) {
        nlohmann::json tokens = nlohmann::json::array();
        for (resp::Token t : tr.tokens) tokens.push_back(resp::token_symbol(t));
        nlohmann::json j{{"task_id", tr.task_id}, {"tokens", tokens}, {"source", to_string(tr.source)}};
        out << j.dump() << '\n';
    }
    if (!out) throw IoError("trace write failed: " + path);
}

std::vector<Trace> read_traces(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open traces: " + path);
    std::vector<Trace> traces;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const nlohmann::json j = nlohmann::json::parse(line);
        Trace tr;
        tr.task_id = j.at("task_id").get<std::string>();
        tr.source = trace_source_from_string(j.at("source").get<std::string>());
        for (const auto& sym : j.at("tokens")) {
            const auto tok = resp::token_from_symbol(sym.get<std::string>());
            if (!tok) throw IoError("unknown token symbol in trace file: " + sym.get<std::string>());
            tr.tokens.push_back(*tok);
        }
        traces.push_back(std::move(tr));
    }
    return traces;
}

void SftConfig::validate() const {
    if (epochs < 0) throw ConfigError("epochs must be >= 0");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (!(lr >= 0.0)) throw ConfigError("lr must be >= 0");
    if (!(temperature > 0.0)) throw ConfigError("temperature must be > 0");
}

policy::MaskOptions SftConfig::mask_options() const {
    return {structural_masking, structural_masking ? 0.0 : format_prior, temperature};
}

std::vector<double> sft_train(policy::PolicyParams& params, const std::vector<env::ChartTask>& corpus,
                              const std::vector<Trace>& traces, const SftConfig& config) {
    config.validate();
    if (traces.empty()) throw ConfigError("trace corpus is empty");
    if (traces.size() != corpus.size())
        throw ConfigError("traces and corpus must be index-aligned");
    for (std::size_t i = 0; i < traces.size(); ++i)
        if (traces[i].task_id != corpus[i].task_id)
            throw ConfigError("trace/task alignment mismatch at index " + std::to_string(i));

    const policy::MaskOptions opts = config.mask_options();
    std::vector<std::vector<double>> features;
    features.reserve(corpus.size());
    for (const env::ChartTask& task : corpus) features.push_back(env::featurize(task));

    policy::AdamState adam = policy::AdamState::zeros(params.cfg);
    std::vector<double> loss_curve;
    std::vector<std::size_t> order(traces.size());

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        Rng rng(mix_seed(config.seed, kEpochTag, static_cast<std::uint64_t>(epoch)));
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        rng.shuffle(order);

        double epoch_nll = 0.0;
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            const std::size_t end = std::min(order.size(), start + config.batch_size);
            const double batch = static_cast<double>(end - start);
            policy::Tensors grads = policy::Tensors::zeros(params.cfg);
            for (std::size_t b = start; b < end; ++b) {
                const Trace& tr = traces[order[b]];
                const auto& feats = features[order[b]];
                const double T = static_cast<double>(tr.tokens.size());
                epoch_nll += -policy::sequence_logprob(params, feats, tr.tokens, opts).total / T;
                const std::vector<double> coefs(tr.tokens.size(), -1.0 / (batch * T));
                policy::accumulate(grads, policy::backward(params, feats, tr.tokens, coefs, opts));
            }
            policy::apply_update(params, grads, adam, config.lr);
        }
        loss_curve.push_back(epoch_nll / static_cast<double>(traces.size()));
    }
    return loss_curve;
}

}  // namespace chartlab::sft
