#include "betula/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>

#include "betula/rng.hpp"
#include "betula/serialization.hpp"

namespace betula {

namespace {

double now_seconds() {
    return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch()).count();
}

LabeledPoints shuffled(const LabeledPoints& data, std::uint64_t seed) {
    const std::size_t n = data.size();
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    Rng rng = Rng::child(seed, 0x0bf1);
    for (std::size_t i = n; i > 1; --i) {
        const std::size_t j = rng.uniform_below(i);
        std::swap(order[i - 1], order[j]);
    }
    LabeledPoints out;
    out.dim = data.dim;
    out.coords.resize(data.coords.size());
    out.labels.resize(data.labels.size());
    for (std::size_t i = 0; i < n; ++i) {
        std::copy_n(data.coords.begin() + static_cast<std::ptrdiff_t>(order[i] * data.dim), data.dim,
                    out.coords.begin() + static_cast<std::ptrdiff_t>(i * data.dim));
        if (!data.labels.empty()) out.labels[i] = data.labels[order[i]];
    }
    return out;
}

template <class Tree>
std::pair<RunResult, MixtureModel> run_tree_pipeline(const LabeledPoints& ordered, const LabeledPoints& original,
                                                     const RunConfig& config, std::uint64_t rep_seed,
                                                     ModelKind kind) {
    RunResult result;
    TreeConfig tree_config = config.tree;
    tree_config.single_precision = config.precision == Precision::Single;

    const double t0 = now_seconds();
    Tree tree(ordered.dim, tree_config);
    for (std::size_t i = 0; i < ordered.size(); ++i) tree.insert(ordered.point(i));
    result.build_seconds = now_seconds() - t0;

    const auto features = tree.leaf_features();
    EmOptions options{config.k, config.max_iter, config.tol, rep_seed};
    MixtureModel model;
    if constexpr (std::is_same_v<Tree, BirchTree>) {
        (void)kind;  // classic features carry a scalar spread: spherical only
        model = fit_features(features, options);
    } else {
        model = fit_features(features, kind, options);
    }
    result.total_seconds = now_seconds() - t0;

    result.leaf_entries = tree.leaf_entry_count();
    result.rebuilds = tree.rebuild_count();
    result.cancellation_flags = tree.cancellation_flags() + model.cancellation_flags;
    result.iterations = model.iterations;
    result.variance_clamps = model.variance_clamps;
    result.reseeds = model.reseeds;

    const Likelihood ll = log_likelihood(model, original.coords);
    result.ll_total = ll.total;
    result.ll_per_point = ll.per_point;
    return {std::move(result), std::move(model)};
}

std::pair<RunResult, MixtureModel> run_points_pipeline(const LabeledPoints& ordered, const LabeledPoints& original,
                                                       const RunConfig& config, std::uint64_t rep_seed,
                                                       ModelKind kind, VarianceBackend backend) {
    RunResult result;
    EmOptions options{config.k, config.max_iter, config.tol, rep_seed};
    const double t0 = now_seconds();
    MixtureModel model = fit_points(ordered.coords, ordered.dim, {}, kind, backend, options);
    result.total_seconds = now_seconds() - t0;
    result.cancellation_flags = model.cancellation_flags;
    result.iterations = model.iterations;
    result.variance_clamps = model.variance_clamps;
    result.reseeds = model.reseeds;
    const Likelihood ll = log_likelihood(model, original.coords);
    result.ll_total = ll.total;
    result.ll_per_point = ll.per_point;
    return {std::move(result), std::move(model)};
}

void append_result_row(std::string& out, std::string_view label, const RunResult& r) {
    out += label;
    out += ',';
    out += format_double(r.ll_total);
    out += ',';
    out += format_double(r.ll_per_point);
    out += ',';
    out += format_double(r.build_seconds);
    out += ',';
    out += format_double(r.total_seconds);
    out += ',';
    out += format_double(static_cast<double>(r.leaf_entries));
    out += ',';
    out += format_double(static_cast<double>(r.rebuilds));
    out += ',';
    out += format_double(static_cast<double>(r.cancellation_flags));
    out += ',';
    out += format_double(static_cast<double>(r.iterations));
    out += ',';
    out += format_double(static_cast<double>(r.variance_clamps));
    out += ',';
    out += format_double(static_cast<double>(r.reseeds));
    out += '\n';
}

SweepCell make_cell(std::vector<RunResult> runs) {
    SweepCell cell;
    cell.runs = std::move(runs);
    for (const RunResult& r : cell.runs) {
        cell.mean_ll_per_point += r.ll_per_point;
        cell.total_flags += r.cancellation_flags;
    }
    cell.mean_ll_per_point /= static_cast<double>(cell.runs.size());
    return cell;
}

}  // namespace

Algo parse_algo(std::string_view text) {
    if (text == "textbook-igmm") return Algo::TextbookIgmm;
    if (text == "stable-igmm") return Algo::StableIgmm;
    if (text == "stable-dgmm") return Algo::StableDgmm;
    if (text == "birch-igmm") return Algo::BirchIgmm;
    if (text == "betula-igmm") return Algo::BetulaIgmm;
    if (text == "betula-dgmm") return Algo::BetulaDgmm;
    throw std::invalid_argument("unknown algorithm: " + std::string(text));
}

std::string_view to_string(Algo algo) {
    switch (algo) {
        case Algo::TextbookIgmm: return "textbook-igmm";
        case Algo::StableIgmm: return "stable-igmm";
        case Algo::StableDgmm: return "stable-dgmm";
        case Algo::BirchIgmm: return "birch-igmm";
        case Algo::BetulaIgmm: return "betula-igmm";
        case Algo::BetulaDgmm: return "betula-dgmm";
    }
    return "?";
}

const std::vector<Algo>& all_algos() {
    static const std::vector<Algo> algos{Algo::TextbookIgmm, Algo::StableIgmm,  Algo::StableDgmm,
                                         Algo::BirchIgmm,    Algo::BetulaIgmm, Algo::BetulaDgmm};
    return algos;
}

bool algo_uses_tree(Algo algo) {
    return algo == Algo::BirchIgmm || algo == Algo::BetulaIgmm || algo == Algo::BetulaDgmm;
}

Precision parse_precision(std::string_view text) {
    if (text == "double") return Precision::Double;
    if (text == "single") return Precision::Single;
    throw std::invalid_argument("unknown precision: " + std::string(text) + " (expected single|double)");
}

void RunConfig::validate() const {
    if (k < 1) throw std::invalid_argument("RunConfig: k must be at least 1");
    if (reps < 1) throw std::invalid_argument("RunConfig: repetitions must be at least 1");
    if (!algo_uses_tree(algo) && tree_params_set)
        throw std::invalid_argument("RunConfig: tree options are not applicable to raw-data algorithms");
    tree.validate();
}

std::pair<RunResult, MixtureModel> run_once(const LabeledPoints& data, const RunConfig& config,
                                            std::uint64_t rep_seed) {
    config.validate();
    if (data.size() == 0) throw std::invalid_argument("run_once: empty dataset");
    const LabeledPoints ordered = config.shuffle ? shuffled(data, rep_seed) : data;
    switch (config.algo) {
        case Algo::TextbookIgmm:
            return run_points_pipeline(ordered, data, config, rep_seed, ModelKind::Spherical,
                                       VarianceBackend::Textbook);
        case Algo::StableIgmm:
            return run_points_pipeline(ordered, data, config, rep_seed, ModelKind::Spherical,
                                       VarianceBackend::Stable);
        case Algo::StableDgmm:
            return run_points_pipeline(ordered, data, config, rep_seed, ModelKind::Diagonal,
                                       VarianceBackend::Stable);
        case Algo::BirchIgmm:
            return run_tree_pipeline<BirchTree>(ordered, data, config, rep_seed, ModelKind::Spherical);
        case Algo::BetulaIgmm:
            return run_tree_pipeline<BetulaTree>(ordered, data, config, rep_seed, ModelKind::Spherical);
        case Algo::BetulaDgmm:
            return run_tree_pipeline<BetulaTree>(ordered, data, config, rep_seed, ModelKind::Diagonal);
    }
    throw std::logic_error("run_once: unknown algorithm");
}

RunResult ExperimentReport::mean_row() const {
    RunResult m;
    const double n = static_cast<double>(runs.size());
    double iters = 0.0, flags = 0.0, clamps = 0.0, reseeds = 0.0, leaves = 0.0, rebuilds = 0.0;
    for (const RunResult& r : runs) {
        m.ll_total += r.ll_total / n;
        m.ll_per_point += r.ll_per_point / n;
        m.build_seconds += r.build_seconds / n;
        m.total_seconds += r.total_seconds / n;
        leaves += static_cast<double>(r.leaf_entries) / n;
        rebuilds += static_cast<double>(r.rebuilds) / n;
        flags += static_cast<double>(r.cancellation_flags) / n;
        iters += static_cast<double>(r.iterations) / n;
        clamps += static_cast<double>(r.variance_clamps) / n;
        reseeds += static_cast<double>(r.reseeds) / n;
    }
    m.leaf_entries = static_cast<std::size_t>(std::llround(leaves));
    m.rebuilds = static_cast<std::size_t>(std::llround(rebuilds));
    m.cancellation_flags = static_cast<std::uint64_t>(std::llround(flags));
    m.iterations = static_cast<int>(std::llround(iters));
    m.variance_clamps = static_cast<std::uint64_t>(std::llround(clamps));
    m.reseeds = static_cast<std::uint64_t>(std::llround(reseeds));
    return m;
}

std::string ExperimentReport::to_csv() const {
    std::string out =
        "rep,ll_total,ll_per_point,build_seconds,total_seconds,leaf_entries,rebuilds,"
        "cancellation_flags,iterations,variance_clamps,reseeds\n";
    for (std::size_t i = 0; i < runs.size(); ++i) append_result_row(out, std::to_string(i + 1), runs[i]);
    append_result_row(out, "mean", mean_row());
    return out;
}

ExperimentReport run_repeated(const LabeledPoints& data, const RunConfig& config) {
    config.validate();
    ExperimentReport report;
    report.runs.reserve(static_cast<std::size_t>(config.reps));
    for (int rep = 0; rep < config.reps; ++rep)
        report.runs.push_back(run_once(data, config, config.seed + static_cast<std::uint64_t>(rep)).first);
    return report;
}

std::string StabilitySweep::to_csv() const {
    std::string out = "shift";
    for (Algo a : algos) {
        out += ',';
        out += to_string(a);
    }
    out += '\n';
    for (std::size_t s = 0; s < shifts.size(); ++s) {
        out += format_double(shifts[s]);
        for (const SweepCell& cell : cells[s]) {
            out += ',';
            out += format_double(cell.mean_ll_per_point);
        }
        out += '\n';
    }
    return out;
}

StabilitySweep run_stability_sweep(const StabilitySweepOptions& options) {
    if (options.shifts.empty() || options.algos.empty())
        throw std::invalid_argument("stability sweep: shifts and algorithms must be nonempty");
    StabilitySweep sweep;
    sweep.shifts = options.shifts;
    sweep.algos = options.algos;
    sweep.cells.resize(options.shifts.size());
    for (std::size_t s = 0; s < options.shifts.size(); ++s) {
        std::vector<std::vector<RunResult>> per_algo(options.algos.size());
        for (int rep = 0; rep < options.reps; ++rep) {
            const std::uint64_t rep_seed = options.seed + static_cast<std::uint64_t>(rep);
            ShiftSpec spec;
            spec.points_per_cluster = options.points_per_cluster;
            spec.shift = options.shifts[s];
            spec.mode = options.mode;
            spec.seed = rep_seed;
            const LabeledPoints data = gen_shift(spec);
            for (std::size_t a = 0; a < options.algos.size(); ++a) {
                RunConfig config;
                config.algo = options.algos[a];
                config.k = options.k;
                config.tree = options.tree;
                config.precision = options.precision;
                config.max_iter = options.max_iter;
                config.tol = options.tol;
                per_algo[a].push_back(run_once(data, config, rep_seed).first);
            }
        }
        for (auto& runs : per_algo) sweep.cells[s].push_back(make_cell(std::move(runs)));
    }
    return sweep;
}

std::string_view to_string(QualityDataset d) { return d == QualityDataset::Grid ? "grid" : "random"; }

std::string QualitySweep::to_csv() const {
    std::string out = "dataset,multiplier";
    for (Algo a : algos) {
        out += ',';
        out += to_string(a);
    }
    out += '\n';
    for (const Row& row : rows) {
        out += to_string(row.dataset);
        out += ',';
        out += format_double(row.multiplier);
        for (const SweepCell& cell : row.cells) {
            out += ',';
            out += format_double(cell.mean_ll_per_point);
        }
        out += '\n';
    }
    return out;
}

QualitySweep run_quality_sweep(const QualitySweepOptions& options) {
    QualitySweep sweep;
    sweep.algos = options.algos;
    for (QualityDataset dataset : options.datasets) {
        for (double multiplier : options.multipliers) {
            QualitySweep::Row row;
            row.dataset = dataset;
            row.multiplier = multiplier;
            std::vector<std::vector<RunResult>> per_algo(options.algos.size());
            for (int rep = 0; rep < options.reps; ++rep) {
                const std::uint64_t rep_seed = options.seed + static_cast<std::uint64_t>(rep);
                LabeledPoints data;
                if (dataset == QualityDataset::Grid) {
                    GridSpec spec;
                    spec.multiplier = multiplier;
                    spec.seed = rep_seed;
                    data = gen_grid(spec);
                } else {
                    RandomSpec spec;
                    spec.multiplier = multiplier;
                    spec.seed = rep_seed;
                    data = gen_random(spec);
                }
                for (std::size_t a = 0; a < options.algos.size(); ++a) {
                    RunConfig config;
                    config.algo = options.algos[a];
                    config.k = options.k;
                    config.tree = options.tree;
                    config.precision = options.precision;
                    config.max_iter = options.max_iter;
                    config.tol = options.tol;
                    per_algo[a].push_back(run_once(data, config, rep_seed).first);
                }
            }
            for (auto& runs : per_algo) row.cells.push_back(make_cell(std::move(runs)));
            sweep.rows.push_back(std::move(row));
        }
    }
    return sweep;
}

std::string ScalingSweep::to_csv() const {
    std::string out =
        "size,max_leaves,algo,build_median,build_mean,total_median,total_mean,leaf_entries_mean,"
        "ll_per_point_mean\n";
    for (const Row& r : rows) {
        out += std::to_string(r.size);
        out += ',';
        out += std::to_string(r.max_leaves);
        out += ',';
        out += to_string(r.algo);
        out += ',';
        out += format_double(r.build_median);
        out += ',';
        out += format_double(r.build_mean);
        out += ',';
        out += format_double(r.total_median);
        out += ',';
        out += format_double(r.total_mean);
        out += ',';
        out += format_double(r.leaf_entries_mean);
        out += ',';
        out += format_double(r.ll_per_point_mean);
        out += '\n';
    }
    return out;
}

ScalingSweep run_scaling_sweep(const ScalingSweepOptions& options) {
    ScalingSweep sweep;
    for (std::size_t size : options.sizes) {
        // the random dataset averages 10000 points per cluster at
        // multiplier 1, i.e. about a million points in total
        const double multiplier = static_cast<double>(size) / 1e6;
        for (std::size_t max_leaves : options.max_leaves) {
            std::vector<std::vector<RunResult>> per_algo(options.algos.size());
            for (int rep = 0; rep < options.reps; ++rep) {
                const std::uint64_t rep_seed = options.seed + static_cast<std::uint64_t>(rep);
                RandomSpec spec;
                spec.multiplier = multiplier;
                spec.seed = rep_seed;
                const LabeledPoints data = gen_random(spec);
                for (std::size_t a = 0; a < options.algos.size(); ++a) {
                    RunConfig config;
                    config.algo = options.algos[a];
                    config.k = options.k;
                    config.tree = options.tree;
                    config.tree.max_leaf_entries = max_leaves;
                    config.precision = options.precision;
                    config.max_iter = options.max_iter;
                    config.tol = options.tol;
                    per_algo[a].push_back(run_once(data, config, rep_seed).first);
                }
            }
            for (std::size_t a = 0; a < options.algos.size(); ++a) {
                ScalingSweep::Row row;
                row.size = size;
                row.max_leaves = max_leaves;
                row.algo = options.algos[a];
                std::vector<double> builds, totals;
                for (const RunResult& r : per_algo[a]) {
                    builds.push_back(r.build_seconds);
                    totals.push_back(r.total_seconds);
                    row.build_mean += r.build_seconds;
                    row.total_mean += r.total_seconds;
                    row.leaf_entries_mean += static_cast<double>(r.leaf_entries);
                    row.ll_per_point_mean += r.ll_per_point;
                }
                const double n = static_cast<double>(per_algo[a].size());
                row.build_mean /= n;
                row.total_mean /= n;
                row.leaf_entries_mean /= n;
                row.ll_per_point_mean /= n;
                row.build_median = median(builds);
                row.total_median = median(totals);
                sweep.rows.push_back(std::move(row));
            }
        }
    }
    return sweep;
}

double median(std::vector<double> values) {
    if (values.empty()) throw std::invalid_argument("median: empty input");
    std::sort(values.begin(), values.end());
    const std::size_t mid = values.size() / 2;
    return values.size() % 2 ? values[mid] : 0.5 * (values[mid - 1] + values[mid]);
}

}  // namespace betula
