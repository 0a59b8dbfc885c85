#include "chartlab/chart_env.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "chartlab/rng.hpp"

namespace chartlab::env {

namespace {

const char* kSeriesPool[] = {"North", "South", "East", "West", "Alpha", "Beta", "Gamma", "Delta"};
const char* kCategoryPool[] = {"Jan", "Feb", "Mar", "Apr", "May", "Jun",
                               "Jul", "Aug", "Sep", "Oct", "Nov", "Dec"};
const char* kOrdinal[] = {"first", "second", "third", "fourth"};

bool is_paired_kind(QueryKind k) {
    switch (k) {
        case QueryKind::argmax_value:
        case QueryKind::argmin_value:
        case QueryKind::rank_k_then_read:
        case QueryKind::cross_series_compare:
            return true;
        default:
            return false;
    }
}

// Descending sort of one row; ties broken by lowest column index.
std::vector<int> rank_order(const std::vector<double>& row) {
    std::vector<int> idx(row.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return row[a] > row[b]; });
    return idx;
}

std::string query_text(const ChartTable& t, QueryKind kind, const std::vector<int>& args) {
    const auto& sl = t.series_labels;
    const auto& cl = t.category_labels;
    std::ostringstream os;
    switch (kind) {
        case QueryKind::extract_cell:
            os << "What is the " << sl[args[0]] << " value at " << cl[args[1]] << "?";
            break;
        case QueryKind::argmax_value:
            os << "What is the " << sl[args[1]] << " value for the item where " << sl[args[0]]
               << " is highest?";
            break;
        case QueryKind::argmin_value:
            os << "What is the " << sl[args[1]] << " value for the item where " << sl[args[0]]
               << " is lowest?";
            break;
        case QueryKind::rank_k_then_read:
            os << "Provide the " << sl[args[2]] << " value of the item with the "
               << kOrdinal[args[1] - 1] << " highest " << sl[args[0]] << " value.";
            break;
        case QueryKind::diff_two_cells:
            os << "How much larger is " << sl[args[0]] << " at " << cl[args[1]] << " than at "
               << cl[args[2]] << "?";
            break;
        case QueryKind::ratio_two_cells:
            os << "What is the ratio of " << sl[args[0]] << " at " << cl[args[1]] << " to its value at "
               << cl[args[2]] << "?";
            break;
        case QueryKind::sum_series:
            os << "What is the total of " << sl[args[0]] << " across all categories?";
            break;
        case QueryKind::mean_series:
            os << "What is the average of " << sl[args[0]] << " across all categories?";
            break;
        case QueryKind::cross_series_compare:
            os << "How much larger is " << sl[args[0]] << " than " << sl[args[2]] << " at "
               << cl[args[1]] << "?";
            break;
    }
    return os.str();
}

std::vector<std::string> pick_labels(Rng& rng, const char* const* pool, int pool_size, int n) {
    std::vector<int> idx(pool_size);
    std::iota(idx.begin(), idx.end(), 0);
    rng.shuffle(idx);
    std::vector<std::string> out;
    out.reserve(n);
    for (int i = 0; i < n; ++i) out.push_back(pool[idx[i]]);
    return out;
}

double one_decimal_value(Rng& rng) {
    return static_cast<double>(rng.uniform_int(0, 9999)) / 10.0;
}

}  // namespace

void ChartTable::validate() const {
    const int s = num_series();
    const int c = num_categories();
    if (s < 1 || s > kMaxSeries) throw ConfigError("num_series out of range [1,4]: " + std::to_string(s));
    if (c < 2 || c > kMaxCategories)
        throw ConfigError("num_categories out of range [2,8]: " + std::to_string(c));
    if (static_cast<int>(values.size()) != s) throw ConfigError("values row count != num_series");
    for (const auto& row : values) {
        if (static_cast<int>(row.size()) != c) throw ConfigError("values array is not rectangular");
        for (double v : row) {
            if (!std::isfinite(v)) throw ConfigError("non-finite table value");
        }
    }
    for (int i = 0; i < s; ++i)
        for (int j = i + 1; j < s; ++j)
            if (series_labels[i] == series_labels[j]) throw ConfigError("duplicate series label");
    for (int i = 0; i < c; ++i)
        for (int j = i + 1; j < c; ++j)
            if (category_labels[i] == category_labels[j]) throw ConfigError("duplicate category label");
}

void EnvConfig::validate() const {
    if (min_series < 1 || max_series > kMaxSeries || min_series > max_series)
        throw ConfigError("EnvConfig series bounds invalid");
    if (min_categories < 2 || max_categories > kMaxCategories || min_categories > max_categories)
        throw ConfigError("EnvConfig category bounds invalid");
}

void validate_query(const ChartTable& table, const Query& query) {
    const int s = table.num_series();
    const int c = table.num_categories();
    auto need = [&](std::size_t n) {
        if (query.args.size() != n) throw ConfigError("query arg count mismatch");
    };
    auto series_ok = [&](int i) {
        if (i < 0 || i >= s) throw ConfigError("series index out of range");
    };
    auto cat_ok = [&](int i) {
        if (i < 0 || i >= c) throw ConfigError("category index out of range");
    };
    auto companion_ok = [&](int series, int comp) {
        series_ok(comp);
        if (s < 2) throw ConfigError("paired query requires >= 2 series");
        if (comp != (series + 1) % s) throw ConfigError("companion must be (series+1) mod num_series");
    };
    switch (query.kind) {
        case QueryKind::extract_cell:
            need(2);
            series_ok(query.args[0]);
            cat_ok(query.args[1]);
            break;
        case QueryKind::argmax_value:
        case QueryKind::argmin_value:
            need(2);
            series_ok(query.args[0]);
            companion_ok(query.args[0], query.args[1]);
            break;
        case QueryKind::rank_k_then_read:
            need(3);
            series_ok(query.args[0]);
            if (query.args[1] < 1 || query.args[1] > std::min(4, c)) throw ConfigError("rank k out of range");
            companion_ok(query.args[0], query.args[2]);
            break;
        case QueryKind::diff_two_cells:
        case QueryKind::ratio_two_cells:
            need(3);
            series_ok(query.args[0]);
            cat_ok(query.args[1]);
            cat_ok(query.args[2]);
            break;
        case QueryKind::sum_series:
        case QueryKind::mean_series:
            need(1);
            series_ok(query.args[0]);
            break;
        case QueryKind::cross_series_compare:
            need(3);
            series_ok(query.args[0]);
            cat_ok(query.args[1]);
            companion_ok(query.args[0], query.args[2]);
            break;
    }
}

double oracle_answer(const ChartTable& table, const Query& query) {
    validate_query(table, query);
    const auto& v = table.values;
    const auto& a = query.args;
    switch (query.kind) {
        case QueryKind::extract_cell:
            return v[a[0]][a[1]];
        case QueryKind::argmax_value: {
            const auto order = rank_order(v[a[0]]);
            return v[a[1]][order.front()];
        }
        case QueryKind::argmin_value: {
            const auto order = rank_order(v[a[0]]);
            return v[a[1]][order.back()];
        }
        case QueryKind::rank_k_then_read: {
            const auto order = rank_order(v[a[0]]);
            return v[a[2]][order[a[1] - 1]];
        }
        case QueryKind::diff_two_cells:
            return v[a[0]][a[1]] - v[a[0]][a[2]];
        case QueryKind::ratio_two_cells:
            return v[a[0]][a[1]] / v[a[0]][a[2]];
        case QueryKind::sum_series: {
            double s = 0.0;
            for (double x : v[a[0]]) s += x;
            return s;
        }
        case QueryKind::mean_series: {
            double s = 0.0;
            for (double x : v[a[0]]) s += x;
            return s / static_cast<double>(v[a[0]].size());
        }
        case QueryKind::cross_series_compare:
            return v[a[0]][a[1]] - v[a[2]][a[1]];
    }
    throw ConfigError("unknown query kind");
}

std::optional<double> execute_program(const ChartTable& table, std::span<const DslOp> program) {
    const int ns = table.num_series();
    const int nc = table.num_categories();
    std::vector<double> stack;
    // the read cursor starts at the table origin, so row operations are
    // meaningful without a preceding SELECT
    int cur_row = 0;
    int cur_col = 0;

    for (const DslOp& op : program) {
        switch (op.kind) {
            case OpKind::select:
                if (op.a < 0 || op.a >= ns || op.b < 0 || op.b >= nc) return std::nullopt;
                cur_row = op.a;
                cur_col = op.b;
                stack.push_back(table.values[op.a][op.b]);
                break;
            case OpKind::argmax_row:
            case OpKind::argmin_row: {
                const auto order = rank_order(table.values[cur_row]);
                cur_col = (op.kind == OpKind::argmax_row) ? order.front() : order.back();
                stack.push_back(table.values[cur_row][cur_col]);
                break;
            }
            case OpKind::rank_k: {
                if (op.a < 1 || op.a > nc) return std::nullopt;
                const auto order = rank_order(table.values[cur_row]);
                cur_col = order[op.a - 1];
                stack.push_back(table.values[cur_row][cur_col]);
                break;
            }
            case OpKind::read_paired: {
                if (ns < 2) return std::nullopt;
                const int other = (cur_row + 1) % ns;
                stack.push_back(table.values[other][cur_col]);
                break;
            }
            case OpKind::diff:
            case OpKind::ratio: {
                if (stack.size() < 2) return std::nullopt;
                const double b = stack.back();
                stack.pop_back();
                const double a = stack.back();
                stack.pop_back();
                if (op.kind == OpKind::ratio) {
                    if (b == 0.0) return std::nullopt;
                    stack.push_back(a / b);
                } else {
                    stack.push_back(a - b);
                }
                break;
            }
            case OpKind::sum_row:
            case OpKind::mean_row: {
                double s = 0.0;
                for (double x : table.values[cur_row]) s += x;
                if (op.kind == OpKind::mean_row) s /= static_cast<double>(nc);
                stack.push_back(s);
                break;
            }
            case OpKind::emit:
                if (stack.empty()) return std::nullopt;
                return stack.back();
        }
    }
    return std::nullopt;  // missing emit
}

std::vector<DslOp> canonical_program(const Query& query) {
    const auto& a = query.args;
    switch (query.kind) {
        case QueryKind::extract_cell:
            return {{OpKind::select, a[0], a[1]}, {OpKind::emit}};
        case QueryKind::argmax_value:
            return {{OpKind::select, a[0], 0}, {OpKind::argmax_row}, {OpKind::read_paired}, {OpKind::emit}};
        case QueryKind::argmin_value:
            return {{OpKind::select, a[0], 0}, {OpKind::argmin_row}, {OpKind::read_paired}, {OpKind::emit}};
        case QueryKind::rank_k_then_read:
            return {{OpKind::select, a[0], 0}, {OpKind::rank_k, a[1]}, {OpKind::read_paired}, {OpKind::emit}};
        case QueryKind::diff_two_cells:
            return {{OpKind::select, a[0], a[1]}, {OpKind::select, a[0], a[2]}, {OpKind::diff}, {OpKind::emit}};
        case QueryKind::ratio_two_cells:
            return {{OpKind::select, a[0], a[1]}, {OpKind::select, a[0], a[2]}, {OpKind::ratio}, {OpKind::emit}};
        case QueryKind::sum_series:
            return {{OpKind::select, a[0], 0}, {OpKind::sum_row}, {OpKind::emit}};
        case QueryKind::mean_series:
            return {{OpKind::select, a[0], 0}, {OpKind::mean_row}, {OpKind::emit}};
        case QueryKind::cross_series_compare:
            return {{OpKind::select, a[0], a[1]}, {OpKind::read_paired}, {OpKind::diff}, {OpKind::emit}};
    }
    throw ConfigError("unknown query kind");
}

ChartTask generate_task(std::uint64_t seed, Difficulty difficulty, const EnvConfig& config) {
    config.validate();
    Rng rng(mix_seed(seed, static_cast<std::uint64_t>(difficulty), 0x43484152ULL));

    QueryKind kind = QueryKind::extract_cell;
    if (difficulty == Difficulty::hard) {
        // all multi-step kinds, uniformly
        kind = static_cast<QueryKind>(rng.uniform_int(1, kNumQueryKinds - 1));
    }

    int ns = static_cast<int>(rng.uniform_int(config.min_series, config.max_series));
    if (is_paired_kind(kind)) ns = 2;
    const int nc = static_cast<int>(rng.uniform_int(config.min_categories, config.max_categories));

    ChartTable table;
    table.kind = static_cast<ChartKind>(rng.uniform_int(0, 3));
    table.series_labels = pick_labels(rng, kSeriesPool, 8, ns);
    table.category_labels = pick_labels(rng, kCategoryPool, 12, nc);
    table.values.assign(ns, std::vector<double>(nc));
    for (auto& row : table.values)
        for (auto& x : row) x = one_decimal_value(rng);

    Query query;
    query.kind = kind;
    const int s = static_cast<int>(rng.uniform_below(ns));
    switch (kind) {
        case QueryKind::extract_cell:
            query.args = {s, static_cast<int>(rng.uniform_below(nc))};
            break;
        case QueryKind::argmax_value:
        case QueryKind::argmin_value:
            query.args = {s, (s + 1) % ns};
            break;
        case QueryKind::rank_k_then_read:
            query.args = {s, static_cast<int>(rng.uniform_int(2, std::min(4, nc))), (s + 1) % ns};
            break;
        case QueryKind::diff_two_cells:
        case QueryKind::ratio_two_cells: {
            const int c1 = static_cast<int>(rng.uniform_below(nc));
            int c2 = static_cast<int>(rng.uniform_below(nc - 1));
            if (c2 >= c1) ++c2;
            query.args = {s, c1, c2};
            if (kind == QueryKind::ratio_two_cells && table.values[s][c2] < 1.0) {
                table.values[s][c2] += 1.0;  // keep the denominator away from zero
            }
            break;
        }
        case QueryKind::sum_series:
        case QueryKind::mean_series:
            query.args = {s};
            break;
        case QueryKind::cross_series_compare:
            query.args = {s, static_cast<int>(rng.uniform_below(nc)), (s + 1) % ns};
            break;
    }
    query.text = query_text(table, kind, query.args);

    ChartTask task;
    {
        std::ostringstream id;
        id << to_string(difficulty) << "-";
        id << std::hex;
        id.width(16);
        id.fill('0');
        id << seed;
        task.task_id = id.str();
    }
    task.table = std::move(table);
    task.query = std::move(query);
    task.difficulty = difficulty;
    task.table.validate();
    task.ground_truth = oracle_answer(task.table, task.query);
    return task;
}

namespace {

// Remap query args after a permutation of one axis. new_index[i] is where old
// index i ended up.
std::vector<int> inverse_perm(const std::vector<int>& perm) {
    std::vector<int> inv(perm.size());
    for (std::size_t i = 0; i < perm.size(); ++i) inv[perm[i]] = static_cast<int>(i);
    return inv;
}

ChartTask finish_perturbed(ChartTask task, PerturbationKind kind) {
    task.perturbation = kind;
    task.task_id += "-" + to_string(kind);
    task.query.text = query_text(task.table, task.query.kind, task.query.args);
    task.table.validate();
    task.ground_truth = oracle_answer(task.table, task.query);
    return task;
}

}  // namespace

ChartTask rescale_task(const ChartTask& task, double factor) {
    if (!(factor > 0.0)) throw ConfigError("rescale factor must be positive");
    ChartTask out = task;
    for (auto& row : out.table.values)
        for (auto& x : row) x *= factor;
    return finish_perturbed(std::move(out), PerturbationKind::value_rescale);
}

ChartTask perturb_task(const ChartTask& task, PerturbationKind kind, std::uint64_t seed) {
    if (task.perturbation.has_value()) throw ConfigError("task already perturbed");
    Rng rng(mix_seed(fnv1a(task.task_id), static_cast<std::uint64_t>(kind), seed));
    const int ns = task.table.num_series();
    const int nc = task.table.num_categories();

    switch (kind) {
        case PerturbationKind::series_reorder: {
            ChartTask out = task;
            std::vector<int> perm(ns);
            std::iota(perm.begin(), perm.end(), 0);
            rng.shuffle(perm);
            ChartTable& t = out.table;
            ChartTable src = task.table;
            for (int i = 0; i < ns; ++i) {
                t.values[i] = src.values[perm[i]];
                t.series_labels[i] = src.series_labels[perm[i]];
            }
            const auto inv = inverse_perm(perm);
            auto& a = out.query.args;
            a[0] = inv[a[0]];
            switch (out.query.kind) {
                case QueryKind::argmax_value:
                case QueryKind::argmin_value:
                    a[1] = (a[0] + 1) % ns;
                    break;
                case QueryKind::rank_k_then_read:
                case QueryKind::cross_series_compare:
                    a[2] = (a[0] + 1) % ns;
                    break;
                default:
                    break;
            }
            return finish_perturbed(std::move(out), kind);
        }
        case PerturbationKind::category_reorder: {
            ChartTask out = task;
            std::vector<int> perm(nc);
            std::iota(perm.begin(), perm.end(), 0);
            rng.shuffle(perm);
            ChartTable src = task.table;
            for (int j = 0; j < nc; ++j) {
                out.table.category_labels[j] = src.category_labels[perm[j]];
                for (int i = 0; i < ns; ++i) out.table.values[i][j] = src.values[i][perm[j]];
            }
            const auto inv = inverse_perm(perm);
            auto& a = out.query.args;
            switch (out.query.kind) {
                case QueryKind::extract_cell:
                    a[1] = inv[a[1]];
                    break;
                case QueryKind::diff_two_cells:
                case QueryKind::ratio_two_cells:
                    a[1] = inv[a[1]];
                    a[2] = inv[a[2]];
                    break;
                case QueryKind::cross_series_compare:
                    a[1] = inv[a[1]];
                    break;
                default:
                    break;
            }
            return finish_perturbed(std::move(out), kind);
        }
        case PerturbationKind::value_rescale: {
            double vmax = 0.0;
            for (const auto& row : task.table.values)
                for (double x : row) vmax = std::max(vmax, std::abs(x));
            double hi = 2.0;
            if (vmax > 0.0) hi = std::min(hi, 999.9 / vmax);
            const double lo = std::min(0.5, hi);
            const double factor = lo + (hi - lo) * rng.uniform();
            return rescale_task(task, factor);
        }
        case PerturbationKind::label_rename: {
            ChartTask out = task;
            const std::uint64_t tag = rng.next_u64() % 1000;
            for (auto& l : out.table.series_labels) l += "_" + std::to_string(tag);
            for (auto& l : out.table.category_labels) l += "_" + std::to_string(tag);
            return finish_perturbed(std::move(out), kind);
        }
        case PerturbationKind::axis_transpose: {
            if (task.query.kind != QueryKind::extract_cell)
                throw UnsupportedPerturbation("axis_transpose supported for extract_cell queries only");
            if (ns < 2 || nc > kMaxSeries)
                throw UnsupportedPerturbation("axis_transpose incompatible with table shape");
            ChartTask out = task;
            ChartTable t;
            t.kind = task.table.kind;
            t.series_labels = task.table.category_labels;
            t.category_labels = task.table.series_labels;
            t.values.assign(nc, std::vector<double>(ns));
            for (int i = 0; i < ns; ++i)
                for (int j = 0; j < nc; ++j) t.values[j][i] = task.table.values[i][j];
            out.table = std::move(t);
            std::swap(out.query.args[0], out.query.args[1]);
            return finish_perturbed(std::move(out), kind);
        }
        case PerturbationKind::distractor_series: {
            switch (task.query.kind) {
                case QueryKind::extract_cell:
                case QueryKind::sum_series:
                case QueryKind::mean_series:
                case QueryKind::diff_two_cells:
                case QueryKind::ratio_two_cells:
                    break;
                default:
                    throw UnsupportedPerturbation("distractor_series would change the companion series");
            }
            if (ns >= kMaxSeries) throw UnsupportedPerturbation("table already at max series");
            ChartTask out = task;
            std::vector<double> row(nc);
            for (auto& x : row) x = one_decimal_value(rng);
            out.table.values.push_back(std::move(row));
            std::string label = "Distractor";
            while (std::find(out.table.series_labels.begin(), out.table.series_labels.end(), label) !=
                   out.table.series_labels.end())
                label += "X";
            out.table.series_labels.push_back(label);
            return finish_perturbed(std::move(out), kind);
        }
    }
    throw ConfigError("unknown perturbation kind");
}

std::vector<double> featurize(const ChartTask& task) {
    std::vector<double> f(kFeatureDim, 0.0);
    const ChartTable& t = task.table;
    const int ns = t.num_series();
    const int nc = t.num_categories();

    double vmax = 0.0;
    for (const auto& row : t.values)
        for (double x : row) vmax = std::max(vmax, std::abs(x));

    constexpr int kCells = kMaxSeries * kMaxCategories;
    for (int i = 0; i < ns; ++i) {
        for (int j = 0; j < nc; ++j) {
            const int cell = i * kMaxCategories + j;
            f[cell] = (vmax > 0.0) ? t.values[i][j] / vmax : 0.0;
            f[kCells + cell] = 1.0;
        }
    }

    f[kFeatureKindOffset + static_cast<int>(task.query.kind)] = 1.0;

    // arguments, both as normalized ordinals and as one-hot groups; unused
    // slots stay all-zero. Companion-series arguments are omitted: they are
    // always (series + 1) mod num_series and carry no information beyond the
    // subject series.
    const auto& a = task.query.args;
    auto set_series = [&](int s) {
        f[kFeatureArgScalarOffset + 0] = static_cast<double>(s) / kMaxSeries;
        f[kFeatureSeriesOffset + s] = 1.0;
    };
    auto set_cat_a = [&](int c) {
        f[kFeatureArgScalarOffset + 1] = static_cast<double>(c) / kMaxCategories;
        f[kFeatureCatAOffset + c] = 1.0;
    };
    auto set_cat_b = [&](int c) {
        f[kFeatureArgScalarOffset + 2] = static_cast<double>(c) / kMaxCategories;
        f[kFeatureCatBOffset + c] = 1.0;
    };
    auto set_rank = [&](int k) {
        f[kFeatureArgScalarOffset + 3] = static_cast<double>(k) / 4.0;
        f[kFeatureRankOffset + k - 1] = 1.0;
    };
    set_series(a[0]);
    switch (task.query.kind) {
        case QueryKind::extract_cell:
        case QueryKind::cross_series_compare:
            set_cat_a(a[1]);
            break;
        case QueryKind::rank_k_then_read:
            set_rank(a[1]);
            break;
        case QueryKind::diff_two_cells:
        case QueryKind::ratio_two_cells:
            set_cat_a(a[1]);
            set_cat_b(a[2]);
            break;
        case QueryKind::argmax_value:
        case QueryKind::argmin_value:
        case QueryKind::sum_series:
        case QueryKind::mean_series:
            break;
    }
    f[kFeatureShapeOffset + 0] = static_cast<double>(ns) / kMaxSeries;
    f[kFeatureShapeOffset + 1] = static_cast<double>(nc) / kMaxCategories;
    return f;
}

std::string to_string(ChartKind k) {
    switch (k) {
        case ChartKind::bar: return "bar";
        case ChartKind::grouped_bar: return "grouped_bar";
        case ChartKind::line: return "line";
        case ChartKind::scatter: return "scatter";
    }
    return "?";
}

std::string to_string(QueryKind k) {
    switch (k) {
        case QueryKind::extract_cell: return "extract_cell";
        case QueryKind::argmax_value: return "argmax_value";
        case QueryKind::argmin_value: return "argmin_value";
        case QueryKind::rank_k_then_read: return "rank_k_then_read";
        case QueryKind::diff_two_cells: return "diff_two_cells";
        case QueryKind::ratio_two_cells: return "ratio_two_cells";
        case QueryKind::sum_series: return "sum_series";
        case QueryKind::mean_series: return "mean_series";
        case QueryKind::cross_series_compare: return "cross_series_compare";
    }
    return "?";
}

std::string to_string(PerturbationKind k) {
    switch (k) {
        case PerturbationKind::series_reorder: return "series_reorder";
        case PerturbationKind::category_reorder: return "category_reorder";
        case PerturbationKind::value_rescale: return "value_rescale";
        case PerturbationKind::label_rename: return "label_rename";
        case PerturbationKind::axis_transpose: return "axis_transpose";
        case PerturbationKind::distractor_series: return "distractor_series";
    }
    return "?";
}

std::string to_string(Difficulty d) { return d == Difficulty::easy ? "easy" : "hard"; }

namespace {
template <typename E>
E enum_from_string(const std::string& s, E last, std::string (*name)(E), const char* what) {
    for (int i = 0; i <= static_cast<int>(last); ++i) {
        const E e = static_cast<E>(i);
        if (name(e) == s) return e;
    }
    throw ConfigError(std::string("unknown ") + what + ": " + s);
}
}  // namespace

QueryKind query_kind_from_string(const std::string& s) {
    return enum_from_string<QueryKind>(s, QueryKind::cross_series_compare, &to_string, "query kind");
}

PerturbationKind perturbation_from_string(const std::string& s) {
    return enum_from_string<PerturbationKind>(s, PerturbationKind::distractor_series, &to_string,
                                              "perturbation kind");
}

Difficulty difficulty_from_string(const std::string& s) {
    if (s == "easy") return Difficulty::easy;
    if (s == "hard") return Difficulty::hard;
    throw ConfigError("unknown difficulty: " + s);
}

nlohmann::json task_to_json(const ChartTask& task) {
    nlohmann::json j;
    j["task_id"] = task.task_id;
    j["chart_kind"] = to_string(task.table.kind);
    j["series_labels"] = task.table.series_labels;
    j["category_labels"] = task.table.category_labels;
    std::vector<double> flat;
    flat.reserve(task.table.values.size() * task.table.values[0].size());
    for (const auto& row : task.table.values)
        for (double x : row) flat.push_back(x);
    j["values"] = flat;
    j["query"] = {{"kind", to_string(task.query.kind)}, {"args", task.query.args}, {"text", task.query.text}};
    j["ground_truth"] = task.ground_truth;
    j["difficulty"] = to_string(task.difficulty);
    if (task.perturbation)
        j["perturbation"] = to_string(*task.perturbation);
    else
        j["perturbation"] = nullptr;
    return j;
}

ChartTask task_from_json(const nlohmann::json& j) {
    ChartTask task;
    task.task_id = j.at("task_id").get<std::string>();
    const std::string ck = j.at("chart_kind").get<std::string>();
    for (int i = 0; i < 4; ++i)
        if (to_string(static_cast<ChartKind>(i)) == ck) task.table.kind = static_cast<ChartKind>(i);
    task.table.series_labels = j.at("series_labels").get<std::vector<std::string>>();
    task.table.category_labels = j.at("category_labels").get<std::vector<std::string>>();
    const auto flat = j.at("values").get<std::vector<double>>();
    const int ns = static_cast<int>(task.table.series_labels.size());
    const int nc = static_cast<int>(task.table.category_labels.size());
    if (static_cast<int>(flat.size()) != ns * nc) throw IoError("values length mismatch in task JSON");
    task.table.values.assign(ns, std::vector<double>(nc));
    for (int i = 0; i < ns; ++i)
        for (int c = 0; c < nc; ++c) task.table.values[i][c] = flat[i * nc + c];
    const auto& q = j.at("query");
    task.query.kind = query_kind_from_string(q.at("kind").get<std::string>());
    task.query.args = q.at("args").get<std::vector<int>>();
    task.query.text = q.at("text").get<std::string>();
    task.ground_truth = j.at("ground_truth").get<double>();
    task.difficulty = difficulty_from_string(j.at("difficulty").get<std::string>());
    if (!j.at("perturbation").is_null())
        task.perturbation = perturbation_from_string(j.at("perturbation").get<std::string>());
    task.table.validate();
    return task;
}

void write_corpus(const std::string& path, const std::vector<ChartTask>& tasks) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path);
    for (const auto& t : tasks) out << task_to_json(t).dump() << "\n";
    if (!out) throw IoError("write failed: " + path);
}

std::vector<ChartTask> read_corpus(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open corpus: " + path);
    std::vector<ChartTask> tasks;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        tasks.push_back(task_from_json(nlohmann::json::parse(line)));
    }
    return tasks;
}

}  // namespace chartlab::env
