// chartlab: reproducible experiment runner for the chart-QA RL laboratory.
//
// Subcommands: gen-data (synthetic corpora), train (GRPO or supervised
// baselines), eval (held-out reports, baseline comparison, robustness
// sweeps), grade (batch reward scoring), export-curves (CSV/SVG figures).

#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>

#include "CLI11.hpp"

#include "chartlab/chart_env.hpp"
#include "chartlab/eval.hpp"
#include "chartlab/grpo.hpp"
#include "chartlab/policy.hpp"
#include "chartlab/reward.hpp"
#include "chartlab/rng.hpp"
#include "chartlab/runio.hpp"
#include "chartlab/sft.hpp"

namespace fs = std::filesystem;
using namespace chartlab;

namespace {

void refuse_existing(const fs::path& path, bool force) {
    if (!force && fs::exists(path))
        throw ConfigError(path.string() + " already exists (pass --force to overwrite)");
}

std::vector<env::ChartTask> generate_corpus(std::uint64_t seed, env::Difficulty difficulty, int count,
                                            const env::EnvConfig& env_cfg, std::uint64_t stream,
                                            std::set<std::string>& used_ids) {
    std::vector<env::ChartTask> tasks;
    tasks.reserve(static_cast<std::size_t>(count));
    std::uint64_t attempt = 0;
    for (int i = 0; i < count; ++i) {
        while (true) {
            const std::uint64_t task_seed =
                mix_seed(seed, stream, static_cast<std::uint64_t>(i), attempt++);
            env::ChartTask task = env::generate_task(task_seed, difficulty, env_cfg);
            if (used_ids.insert(task.task_id).second) {
                tasks.push_back(std::move(task));
                break;
            }
        }
    }
    return tasks;
}

std::vector<env::ChartTask> subsample(std::vector<env::ChartTask> corpus, int k, std::uint64_t seed) {
    if (k <= 0 || static_cast<std::size_t>(k) >= corpus.size()) return corpus;
    std::vector<std::size_t> order(corpus.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(mix_seed(seed, 0x53554253ULL));
    rng.shuffle(order);
    std::vector<env::ChartTask> out;
    out.reserve(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) out.push_back(std::move(corpus[order[static_cast<std::size_t>(i)]]));
    return out;
}

nlohmann::json mask_to_json(const policy::MaskOptions& m) {
    return {{"structural_masking", m.structural_masking},
            {"format_prior", m.format_prior},
            {"temperature", m.temperature}};
}

policy::MaskOptions mask_from_json(const nlohmann::json& j) {
    return {j.at("structural_masking").get<bool>(), j.at("format_prior").get<double>(),
            j.at("temperature").get<double>()};
}

policy::MaskOptions checkpoint_mask(const policy::Checkpoint& ckpt) {
    if (ckpt.meta.contains("mask")) return mask_from_json(ckpt.meta.at("mask"));
    return {};
}

struct GenDataArgs {
    std::uint64_t seed = 0;
    std::string out_dir = "data";
    std::string difficulty;
    int count = 0;
    std::string out;
    bool force = false;
};

int cmd_gen_data(const GenDataArgs& a) {
    runio::RunManifest manifest;
    manifest.command = "gen-data";
    manifest.started_at = runio::iso8601_now();
    manifest.run_id = "gen-" + to_hex(a.seed);
    const env::EnvConfig env_cfg;
    std::set<std::string> ids;

    struct Plan {
        std::string name;
        env::Difficulty difficulty;
        int count;
    };
    std::vector<Plan> plans;
    if (!a.difficulty.empty()) {
        if (a.count <= 0) throw ConfigError("--count must be positive");
        const std::string name = a.out.empty() ? (a.difficulty + ".jsonl") : a.out;
        plans.push_back({name, env::difficulty_from_string(a.difficulty), a.count});
    } else {
        plans = {{"hard_train.jsonl", env::Difficulty::hard, 448},
                 {"easy_train.jsonl", env::Difficulty::easy, 6200},
                 {"hard_eval.jsonl", env::Difficulty::hard, 500}};
    }

    fs::create_directories(a.out_dir);
    for (const Plan& plan : plans) {
        const fs::path path = fs::path(a.out_dir) / plan.name;
        refuse_existing(path, a.force);
    }
    for (const Plan& plan : plans) {
        const fs::path path = fs::path(a.out_dir) / plan.name;
        const auto tasks =
            generate_corpus(a.seed, plan.difficulty, plan.count, env_cfg, fnv1a(plan.name), ids);
        env::write_corpus(path.string(), tasks);
        manifest.corpus_checksums[path.string()] = runio::file_checksum(path.string());
        std::cout << "wrote " << path.string() << " (" << tasks.size() << " tasks)\n";
    }
    manifest.config = {{"seed", a.seed},
                       {"out_dir", a.out_dir},
                       {"difficulty", a.difficulty},
                       {"count", a.count}};
    manifest.finished_at = runio::iso8601_now();
    runio::write_json_file((fs::path(a.out_dir) / "gen_manifest.json").string(), manifest.to_json());
    return 0;
}

struct TrainArgs {
    std::string corpus;
    std::string method = "rl";
    std::string out_dir = "run";
    std::uint64_t seed = 0;
    int steps = 600;
    int group_size = 8;
    double clip_eps = 0.2;
    double kl_beta = 0.04;
    double tau = 0.05;
    double lr = 1e-3;
    int tasks_per_step = 4;
    bool structural_masking = true;
    double format_prior = 8.0;
    double temperature = 1.0;
    int train_samples = 0;
    double adam_eps = 1e-5;
    double init_scale = 1.0;
    int epochs = 30;
    int batch_size = 16;
    int workers = 1;
    std::string resume;
    bool force = false;
};

int cmd_train(const TrainArgs& a) {
    if (a.workers < 1) throw ConfigError("--workers must be >= 1");
    auto corpus = subsample(env::read_corpus(a.corpus), a.train_samples, a.seed);
    fs::create_directories(a.out_dir);
    const fs::path ckpt_path = fs::path(a.out_dir) / "checkpoint.json";
    const fs::path manifest_path = fs::path(a.out_dir) / "manifest.json";
    if (a.resume.empty()) refuse_existing(ckpt_path, a.force);

    runio::RunManifest manifest;
    manifest.command = "train";
    manifest.run_id = a.method + "-" + to_hex(mix_seed(a.seed, fnv1a(a.method)));
    manifest.started_at = runio::iso8601_now();
    manifest.corpus_checksums[a.corpus] = runio::file_checksum(a.corpus);

    if (a.method == "rl") {
        grpo::TrainConfig cfg;
        cfg.group_size = a.group_size;
        cfg.clip_eps = a.clip_eps;
        cfg.kl_beta = a.kl_beta;
        cfg.lr = a.lr;
        cfg.steps = a.steps;
        cfg.tasks_per_step = a.tasks_per_step;
        cfg.seed = a.seed;
        cfg.reward.tau = a.tau;
        cfg.structural_masking = a.structural_masking;
        cfg.format_prior = a.format_prior;
        cfg.temperature = a.temperature;
        cfg.adam.eps = a.adam_eps;
        cfg.validate();
        manifest.config = train_config_to_json(cfg);

        grpo::TrainRun run;
        std::vector<grpo::StepMetrics> metrics;
        const fs::path metrics_path = fs::path(a.out_dir) / "metrics.csv";
        if (!a.resume.empty()) {
            const policy::Checkpoint ckpt = policy::load_checkpoint(a.resume);
            cfg = grpo::train_config_from_json(ckpt.meta.at("train_config"));
            cfg.steps = a.steps;  // total step target; resume runs the remainder
            run.params = ckpt.params;
            run.ref.cfg = ckpt.params.cfg;
            run.ref.t = policy::tensors_from_json(ckpt.meta.at("ref"), ckpt.params.cfg);
            run.adam = ckpt.adam;
            run.next_step = ckpt.meta.at("next_step").get<int>();
            if (fs::exists(metrics_path)) {
                for (const auto& m : grpo::read_metrics_csv(metrics_path.string()))
                    if (m.step < run.next_step) metrics.push_back(m);
            }
            manifest.config = train_config_to_json(cfg);
        } else {
            run = grpo::make_run(cfg, policy::init_params(a.seed, a.init_scale));
        }

        const int remaining = cfg.steps - run.next_step;
        if (remaining < 0) throw ConfigError("checkpoint is already past --steps");
        const auto fresh = grpo::train(cfg, corpus, run, remaining);
        metrics.insert(metrics.end(), fresh.begin(), fresh.end());
        grpo::write_metrics_csv(metrics_path.string(), metrics);

        policy::Checkpoint ckpt;
        ckpt.params = run.params;
        ckpt.adam = run.adam;
        manifest.finished_at = runio::iso8601_now();
        ckpt.meta = {{"method", "rl"},
                     {"train_config", train_config_to_json(cfg)},
                     {"next_step", run.next_step},
                     {"ref", policy::tensors_to_json(run.ref.t)},
                     {"mask", mask_to_json(cfg.mask_options())},
                     {"manifest", manifest.to_json()}};
        policy::save_checkpoint(ckpt_path.string(), ckpt);
    } else if (a.method == "sft" || a.method == "cot-sft") {
        const auto mode =
            a.method == "cot-sft" ? sft::TraceSource::oracle_canonical : sft::TraceSource::answer_only;
        const auto traces = sft::generate_traces(corpus, mode);
        sft::write_traces((fs::path(a.out_dir) / "traces.jsonl").string(), traces);

        sft::SftConfig cfg;
        cfg.epochs = a.epochs;
        cfg.batch_size = a.batch_size;
        cfg.lr = a.lr;
        cfg.seed = a.seed;
        cfg.structural_masking = a.structural_masking;
        cfg.format_prior = a.format_prior;
        cfg.temperature = a.temperature;
        cfg.validate();
        manifest.config = {{"epochs", cfg.epochs},       {"batch_size", cfg.batch_size},
                           {"lr", cfg.lr},               {"seed", cfg.seed},
                           {"structural_masking", cfg.structural_masking},
                           {"format_prior", cfg.format_prior},
                           {"temperature", cfg.temperature},
                           {"trace_source", sft::to_string(mode)}};

        policy::PolicyParams params = policy::init_params(a.seed, a.init_scale);
        const auto curve = sft::sft_train(params, corpus, traces, cfg);
        {
            std::ofstream out(fs::path(a.out_dir) / "loss_curve.csv", std::ios::binary);
            out << "epoch,loss\n";
            for (std::size_t e = 0; e < curve.size(); ++e)
                out << e << ',' << format_double(curve[e]) << '\n';
            if (!out) throw IoError("cannot write loss curve");
        }

        policy::Checkpoint ckpt;
        ckpt.params = params;
        ckpt.adam = policy::AdamState::zeros(params.cfg);
        manifest.finished_at = runio::iso8601_now();
        ckpt.meta = {{"method", a.method},
                     {"mask", mask_to_json(cfg.mask_options())},
                     {"manifest", manifest.to_json()}};
        policy::save_checkpoint(ckpt_path.string(), ckpt);
    } else {
        throw ConfigError("unknown --method '" + a.method + "' (expected rl, sft, or cot-sft)");
    }

    runio::write_json_file(manifest_path.string(), manifest.to_json());
    std::cout << "wrote " << ckpt_path.string() << "\n";
    return 0;
}

struct EvalArgs {
    std::string checkpoint;
    std::string corpus;
    std::string out = "report.json";
    std::string out_csv;
    std::string baseline;
    bool robustness = false;
    std::uint64_t seed = 0;
    double tau = 0.05;
    bool force = false;
};

int cmd_eval(const EvalArgs& a) {
    refuse_existing(a.out, a.force);
    const policy::Checkpoint ckpt = policy::load_checkpoint(a.checkpoint);
    const auto tasks = env::read_corpus(a.corpus);
    reward::RewardConfig reward_cfg;
    reward_cfg.tau = a.tau;
    reward_cfg.validate();

    eval::EvalReport report = eval::evaluate(ckpt.params, tasks, reward_cfg, checkpoint_mask(ckpt));
    nlohmann::json out;
    if (!a.baseline.empty()) {
        const policy::Checkpoint base = policy::load_checkpoint(a.baseline);
        const eval::EvalReport base_report =
            eval::evaluate(base.params, tasks, reward_cfg, checkpoint_mask(base));
        eval::attach_baseline(report, base_report);
        out["baseline_report"] = base_report.to_json();
    }
    out["report"] = report.to_json();
    out["significance_test"] = "two-sided pooled two-proportion z-test";
    out["config"] = {{"checkpoint", a.checkpoint}, {"corpus", a.corpus},
                     {"tau", a.tau},               {"seed", a.seed},
                     {"corpus_checksum", runio::file_checksum(a.corpus)}};

    if (a.robustness) {
        const std::vector<env::PerturbationKind> kinds{
            env::PerturbationKind::series_reorder,  env::PerturbationKind::category_reorder,
            env::PerturbationKind::value_rescale,   env::PerturbationKind::label_rename,
            env::PerturbationKind::axis_transpose,  env::PerturbationKind::distractor_series};
        nlohmann::json grid = nlohmann::json::object();
        for (const auto& [name, rep] :
             eval::robustness_sweep(ckpt.params, tasks, kinds, a.seed, reward_cfg, checkpoint_mask(ckpt)))
            grid[name] = rep.to_json();
        out["robustness"] = grid;
    }

    runio::write_json_file(a.out, out);
    if (!a.out_csv.empty()) {
        std::ofstream csv(a.out_csv, std::ios::binary);
        csv << "category,n,correct,accuracy\n";
        csv << "overall," << report.n << ',' << report.correct << ',' << format_double(report.accuracy)
            << '\n';
        for (const auto& [key, stat] : report.by_category)
            csv << key << ',' << stat.n << ',' << stat.correct << ',' << format_double(stat.accuracy())
                << '\n';
        if (!csv) throw IoError("cannot write " + a.out_csv);
    }
    std::cout << "accuracy " << report.accuracy << " on " << report.n << " tasks\n";
    return 0;
}

struct GradeArgs {
    std::string corpus;
    std::string responses;
    std::string out = "grades.jsonl";
    double tau = 0.05;
    bool force = false;
};

int cmd_grade(const GradeArgs& a) {
    refuse_existing(a.out, a.force);
    std::map<std::string, env::ChartTask> by_id;
    for (auto& task : env::read_corpus(a.corpus)) by_id.emplace(task.task_id, std::move(task));
    reward::RewardConfig cfg;
    cfg.tau = a.tau;
    cfg.validate();

    std::ifstream in(a.responses, std::ios::binary);
    if (!in) throw IoError("cannot open responses: " + a.responses);
    std::ofstream out(a.out, std::ios::binary);
    if (!out) throw IoError("cannot write grades: " + a.out);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const nlohmann::json j = nlohmann::json::parse(line);
        const std::string task_id = j.at("task_id").get<std::string>();
        const auto it = by_id.find(task_id);
        if (it == by_id.end()) throw ConfigError("response references unknown task_id " + task_id);
        resp::Response response;
        response.text = j.at("response_text").get<std::string>();
        if (const auto parsed = resp::parse(response.text); parsed.ok()) {
            response.tokens = *parsed.tokens;
            response.program = resp::extract_program(response.tokens);
        }
        const reward::RewardBreakdown rb = reward::score_response(it->second, response, cfg);
        out << nlohmann::json{{"task_id", task_id},
                              {"accuracy", rb.accuracy},
                              {"format", rb.format},
                              {"total", rb.total}}
                   .dump()
            << '\n';
    }
    if (!out) throw IoError("grade write failed: " + a.out);
    return 0;
}

struct CurvesArgs {
    std::vector<std::string> inputs;
    std::vector<std::string> labels;
    std::string out_dir = "curves";
    int window = 20;
    bool force = false;
};

int cmd_export_curves(const CurvesArgs& a) {
    if (a.inputs.empty()) throw ConfigError("at least one metrics CSV is required");
    if (!a.labels.empty() && a.labels.size() != a.inputs.size())
        throw ConfigError("--labels must match the number of inputs");

    struct Run {
        std::string label;
        std::vector<grpo::StepMetrics> metrics;
    };
    std::vector<Run> runs;
    for (std::size_t i = 0; i < a.inputs.size(); ++i) {
        Run run;
        run.label = a.labels.empty() ? fs::path(a.inputs[i]).stem().string() : a.labels[i];
        run.metrics = grpo::read_metrics_csv(a.inputs[i]);
        runs.push_back(std::move(run));
    }

    const std::vector<std::pair<std::string, double grpo::StepMetrics::*>> metric_fields{
        {"mean_accuracy_reward", &grpo::StepMetrics::mean_accuracy_reward},
        {"mean_format_reward", &grpo::StepMetrics::mean_format_reward},
        {"mean_total_reward", &grpo::StepMetrics::mean_total_reward},
        {"mean_kl", &grpo::StepMetrics::mean_kl},
        {"loss", &grpo::StepMetrics::loss},
        {"clip_fraction", &grpo::StepMetrics::clip_fraction}};

    fs::create_directories(a.out_dir);
    // smoothed per-run per-metric values
    std::vector<std::map<std::string, std::vector<double>>> smoothed(runs.size());
    std::size_t max_rows = 0;
    for (std::size_t r = 0; r < runs.size(); ++r) {
        max_rows = std::max(max_rows, runs[r].metrics.size());
        for (const auto& [name, field] : metric_fields) {
            std::vector<double> raw;
            raw.reserve(runs[r].metrics.size());
            for (const auto& m : runs[r].metrics) raw.push_back(m.*field);
            smoothed[r][name] = runio::rolling_mean(raw, a.window);
        }
    }

    const fs::path combined = fs::path(a.out_dir) / "combined.csv";
    refuse_existing(combined, a.force);
    {
        std::ofstream out(combined, std::ios::binary);
        out << "step";
        for (const auto& run : runs)
            for (const auto& [name, field] : metric_fields) out << ',' << run.label << '_' << name;
        out << '\n';
        for (std::size_t row = 0; row < max_rows; ++row) {
            out << row;
            for (std::size_t r = 0; r < runs.size(); ++r)
                for (const auto& [name, field] : metric_fields) {
                    out << ',';
                    if (row < smoothed[r][name].size()) out << format_double(smoothed[r][name][row]);
                }
            out << '\n';
        }
        if (!out) throw IoError("cannot write " + combined.string());
    }

    for (const auto& [name, field] : metric_fields) {
        std::vector<runio::CurveSeries> series;
        for (std::size_t r = 0; r < runs.size(); ++r) {
            runio::CurveSeries s;
            s.label = runs[r].label;
            for (std::size_t row = 0; row < runs[r].metrics.size(); ++row) {
                s.x.push_back(static_cast<double>(runs[r].metrics[row].step));
                s.y.push_back(smoothed[r][name][row]);
            }
            series.push_back(std::move(s));
        }
        runio::write_svg_chart((fs::path(a.out_dir) / (name + ".svg")).string(), name, series);
    }
    std::cout << "wrote " << combined.string() << " and " << metric_fields.size() << " charts\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Desk-scale RL laboratory on synthetic chart question answering"};
    app.require_subcommand(1);

    GenDataArgs gen;
    auto* gen_cmd = app.add_subcommand("gen-data", "Generate synthetic task corpora");
    gen_cmd->add_option("--seed", gen.seed);
    gen_cmd->add_option("--out-dir", gen.out_dir);
    gen_cmd->add_option("--difficulty", gen.difficulty)->check(CLI::IsMember({"easy", "hard"}));
    gen_cmd->add_option("--count", gen.count);
    gen_cmd->add_option("--out", gen.out, "Output file name (single-corpus mode)");
    gen_cmd->add_flag("--force", gen.force);

    TrainArgs tr;
    auto* train_cmd = app.add_subcommand("train", "Train a policy with RL or a supervised baseline");
    train_cmd->add_option("--corpus", tr.corpus)->required();
    train_cmd->add_option("--method", tr.method)->check(CLI::IsMember({"rl", "sft", "cot-sft"}));
    train_cmd->add_option("--out-dir", tr.out_dir);
    train_cmd->add_option("--seed", tr.seed);
    train_cmd->add_option("--steps", tr.steps);
    train_cmd->add_option("--group-size", tr.group_size);
    train_cmd->add_option("--clip-eps", tr.clip_eps);
    train_cmd->add_option("--kl-beta", tr.kl_beta);
    train_cmd->add_option("--tau", tr.tau);
    train_cmd->add_option("--lr", tr.lr);
    train_cmd->add_option("--tasks-per-step", tr.tasks_per_step);
    train_cmd->add_option("--structural-masking", tr.structural_masking);
    train_cmd->add_option("--format-prior", tr.format_prior);
    train_cmd->add_option("--temperature", tr.temperature);
    train_cmd->add_option("--train-samples", tr.train_samples);
    train_cmd->add_option("--adam-eps", tr.adam_eps);
    train_cmd->add_option("--init-scale", tr.init_scale);
    train_cmd->add_option("--epochs", tr.epochs);
    train_cmd->add_option("--batch-size", tr.batch_size);
    train_cmd->add_option("--workers", tr.workers);
    train_cmd->add_option("--resume", tr.resume, "Checkpoint to resume from");
    train_cmd->add_flag("--force", tr.force);

    EvalArgs ev;
    auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on a task corpus");
    eval_cmd->add_option("--checkpoint", ev.checkpoint)->required();
    eval_cmd->add_option("--corpus", ev.corpus)->required();
    eval_cmd->add_option("--out", ev.out);
    eval_cmd->add_option("--out-csv", ev.out_csv);
    eval_cmd->add_option("--baseline", ev.baseline, "Baseline checkpoint for comparison columns");
    eval_cmd->add_flag("--robustness", ev.robustness);
    eval_cmd->add_option("--seed", ev.seed);
    eval_cmd->add_option("--tau", ev.tau);
    eval_cmd->add_flag("--force", ev.force);

    GradeArgs gr;
    auto* grade_cmd = app.add_subcommand("grade", "Batch-score response texts against tasks");
    grade_cmd->add_option("--corpus", gr.corpus)->required();
    grade_cmd->add_option("--responses", gr.responses)->required();
    grade_cmd->add_option("--out", gr.out);
    grade_cmd->add_option("--tau", gr.tau);
    grade_cmd->add_flag("--force", gr.force);

    CurvesArgs cu;
    auto* curves_cmd = app.add_subcommand("export-curves", "Merge metrics CSVs into figures");
    curves_cmd->add_option("inputs", cu.inputs, "Metrics CSV files")->required();
    curves_cmd->add_option("--labels", cu.labels)->delimiter(',');
    curves_cmd->add_option("--out-dir", cu.out_dir);
    curves_cmd->add_option("--window", cu.window);
    curves_cmd->add_flag("--force", cu.force);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*gen_cmd) return cmd_gen_data(gen);
        if (*train_cmd) return cmd_train(tr);
        if (*eval_cmd) return cmd_eval(ev);
        if (*grade_cmd) return cmd_grade(gr);
        if (*curves_cmd) return cmd_export_curves(cu);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
