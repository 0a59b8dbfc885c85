#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "chartlab/common.hpp"

namespace chartlab::env {

enum class ChartKind { bar, grouped_bar, line, scatter };

enum class QueryKind {
    extract_cell,
    argmax_value,
    argmin_value,
    rank_k_then_read,
    diff_two_cells,
    ratio_two_cells,
    sum_series,
    mean_series,
    cross_series_compare,
};
inline constexpr int kNumQueryKinds = 9;

enum class PerturbationKind {
    series_reorder,
    category_reorder,
    value_rescale,
    label_rename,
    axis_transpose,
    distractor_series,
};
inline constexpr int kNumPerturbationKinds = 6;

enum class Difficulty { easy, hard };

inline constexpr int kMaxSeries = 4;
inline constexpr int kMaxCategories = 8;

struct ChartTable {
    ChartKind kind = ChartKind::bar;
    std::vector<std::string> series_labels;
    std::vector<std::string> category_labels;
    std::vector<std::vector<double>> values;  // [series][category]

    int num_series() const { return static_cast<int>(series_labels.size()); }
    int num_categories() const { return static_cast<int>(category_labels.size()); }

    // Throws ConfigError when a type invariant is violated.
    void validate() const;
};

// Argument layout per kind:
//   extract_cell:          [series, category]
//   argmax/argmin_value:   [series, companion_series]
//   rank_k_then_read:      [series, k, companion_series]
//   diff/ratio_two_cells:  [series, category_a, category_b]
//   sum/mean_series:       [series]
//   cross_series_compare:  [series, category, companion_series]
// Companion series is always (series + 1) mod num_series so the canonical
// READ_PAIRED program stays expressible.
struct Query {
    QueryKind kind = QueryKind::extract_cell;
    std::vector<int> args;
    std::string text;
};

struct ChartTask {
    std::string task_id;
    ChartTable table;
    Query query;
    double ground_truth = 0.0;
    Difficulty difficulty = Difficulty::easy;
    std::optional<PerturbationKind> perturbation;
};

struct EnvConfig {
    int min_series = 1;
    int max_series = 4;
    int min_categories = 2;
    int max_categories = 8;

    void validate() const;
};

// Chart-operation DSL executed over a table. SELECT establishes the cursor;
// row ops read the cursor row; READ_PAIRED reads the next series at the
// cursor column.
enum class OpKind { select, argmax_row, argmin_row, rank_k, read_paired, diff, ratio, sum_row, mean_row, emit };

struct DslOp {
    OpKind kind = OpKind::emit;
    int a = 0;  // select: series; rank_k: k
    int b = 0;  // select: category

    bool operator==(const DslOp&) const = default;
};

ChartTask generate_task(std::uint64_t seed, Difficulty difficulty, const EnvConfig& config);

// Pure exact arithmetic over table values; query args must be valid.
double oracle_answer(const ChartTable& table, const Query& query);

// Throws ConfigError when args reference invalid indices.
void validate_query(const ChartTable& table, const Query& query);

// Never throws for malformed programs; nullopt is the malformed value.
std::optional<double> execute_program(const ChartTable& table, std::span<const DslOp> program);

// Shortest DSL program computing oracle_answer; ends with emit.
std::vector<DslOp> canonical_program(const Query& query);

ChartTask perturb_task(const ChartTask& task, PerturbationKind kind, std::uint64_t seed);

// value_rescale with an explicit factor; perturb_task draws the factor.
ChartTask rescale_task(const ChartTask& task, double factor);

// Fixed-width encoding: 4x8 value block normalized by the per-task max,
// 4x8 presence mask, query-kind one-hot, argument ordinals normalized by
// their ranges, the same arguments as one-hot groups (subject series, two
// category slots, rank k), normalized table shape. Labels are deliberately
// excluded. The offsets are exported because the policy wires argument
// groups to grammar slots.
inline constexpr int kFeatureKindOffset = kMaxSeries * kMaxCategories * 2;
inline constexpr int kFeatureArgScalarOffset = kFeatureKindOffset + kNumQueryKinds;
inline constexpr int kFeatureSeriesOffset = kFeatureArgScalarOffset + 4;
inline constexpr int kFeatureCatAOffset = kFeatureSeriesOffset + kMaxSeries;
inline constexpr int kFeatureCatBOffset = kFeatureCatAOffset + kMaxCategories;
inline constexpr int kFeatureRankOffset = kFeatureCatBOffset + kMaxCategories;
inline constexpr int kFeatureShapeOffset = kFeatureRankOffset + 4;
inline constexpr int kFeatureDim = kFeatureShapeOffset + 2;

std::vector<double> featurize(const ChartTask& task);

std::string to_string(ChartKind k);
std::string to_string(QueryKind k);
std::string to_string(PerturbationKind k);
std::string to_string(Difficulty d);
QueryKind query_kind_from_string(const std::string& s);
PerturbationKind perturbation_from_string(const std::string& s);
Difficulty difficulty_from_string(const std::string& s);

nlohmann::json task_to_json(const ChartTask& task);
ChartTask task_from_json(const nlohmann::json& j);

void write_corpus(const std::string& path, const std::vector<ChartTask>& tasks);
std::vector<ChartTask> read_corpus(const std::string& path);

}  // namespace chartlab::env
