#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "betula/cf_tree.hpp"
#include "betula/datagen.hpp"
#include "betula/gmm.hpp"

namespace betula {

// The six clustering pipelines under comparison. "textbook" and "stable"
// run EM on the raw points (one-pass moments vs incremental updates);
// "birch" and "betula" first aggregate into the respective CF-tree and run
// EM on the leaf features.
enum class Algo {
    TextbookIgmm,
    StableIgmm,
    StableDgmm,
    BirchIgmm,
    BetulaIgmm,
    BetulaDgmm,
};

Algo parse_algo(std::string_view text);
std::string_view to_string(Algo algo);
const std::vector<Algo>& all_algos();
bool algo_uses_tree(Algo algo);

enum class Precision { Double, Single };
Precision parse_precision(std::string_view text);

struct RunConfig {
    Algo algo = Algo::BetulaIgmm;
    int k = 100;
    TreeConfig tree;
    Precision precision = Precision::Double;  // CF storage precision for tree algorithms
    int max_iter = 100;
    double tol = 1e-7;
    std::uint64_t seed = 1;
    int reps = 1;
    bool shuffle = true;           // permute the input order per repetition
    bool tree_params_set = false;  // set by the CLI when tree flags were given explicitly

    void validate() const;
};

struct RunResult {
    double ll_total = 0.0;
    double ll_per_point = 0.0;
    double build_seconds = 0.0;  // tree construction only; 0 for raw-data algorithms
    double total_seconds = 0.0;  // build + fit
    std::size_t leaf_entries = 0;
    std::size_t rebuilds = 0;
    std::uint64_t cancellation_flags = 0;
    int iterations = 0;
    std::uint64_t variance_clamps = 0;
    std::uint64_t reseeds = 0;
};

// One full pipeline run; the returned model is the fitted mixture and the
// result row carries the metrics. The log-likelihood is evaluated on the
// unshuffled input points.
std::pair<RunResult, MixtureModel> run_once(const LabeledPoints& data, const RunConfig& config,
                                            std::uint64_t rep_seed);

// Repetitions with seeds config.seed, config.seed+1, ... over fixed data.
struct ExperimentReport {
    std::vector<RunResult> runs;
    RunResult mean_row() const;
    // rep,ll_total,ll_per_point,build_seconds,total_seconds,leaf_entries,
    // rebuilds,cancellation_flags,iterations,variance_clamps,reseeds
    // with a final "mean" row.
    std::string to_csv() const;
};

ExperimentReport run_repeated(const LabeledPoints& data, const RunConfig& config);

// --- stability sweep ---------------------------------------------------

struct StabilitySweepOptions {
    std::vector<double> shifts;
    std::vector<Algo> algos = all_algos();
    std::size_t points_per_cluster = 15000;
    ShiftSpec::Mode mode = ShiftSpec::Mode::Separation;
    int k = 2;
    TreeConfig tree;
    Precision precision = Precision::Double;
    int max_iter = 100;
    double tol = 1e-7;
    std::uint64_t seed = 1;
    int reps = 1;
};

struct SweepCell {
    std::vector<RunResult> runs;
    double mean_ll_per_point = 0.0;
    std::uint64_t total_flags = 0;
};

struct StabilitySweep {
    std::vector<double> shifts;
    std::vector<Algo> algos;
    std::vector<std::vector<SweepCell>> cells;  // [shift][algo]
    std::string to_csv() const;                 // rows: shift; columns: algorithms
};

// Generates the shift dataset per (shift, repetition), runs every
// configured algorithm on the same draws, and records per-point
// log-likelihoods. Degenerate runs keep their flags; they do not abort
// the sweep.
StabilitySweep run_stability_sweep(const StabilitySweepOptions& options);

// --- quality sweep -------------------------------------------------------

enum class QualityDataset { Grid, Random };
std::string_view to_string(QualityDataset d);

struct QualitySweepOptions {
    std::vector<QualityDataset> datasets{QualityDataset::Grid, QualityDataset::Random};
    std::vector<double> multipliers{0.05, 0.1, 0.2};
    std::vector<Algo> algos = all_algos();
    int k = 100;
    TreeConfig tree;
    Precision precision = Precision::Double;
    int max_iter = 100;
    double tol = 1e-7;
    std::uint64_t seed = 1;
    int reps = 1;
};

struct QualitySweep {
    struct Row {
        QualityDataset dataset;
        double multiplier;
        std::vector<SweepCell> cells;  // per algorithm
    };
    std::vector<Algo> algos;
    std::vector<Row> rows;
    std::string to_csv() const;  // dataset,multiplier,<one column per algorithm>
};

QualitySweep run_quality_sweep(const QualitySweepOptions& options);

// --- scaling sweep -------------------------------------------------------

struct ScalingSweepOptions {
    std::vector<std::size_t> sizes{100000};       // total points, random dataset scaled to fit
    std::vector<std::size_t> max_leaves{5000};
    std::vector<Algo> algos = all_algos();
    int k = 100;
    TreeConfig tree;
    Precision precision = Precision::Double;
    int max_iter = 100;
    double tol = 1e-7;
    std::uint64_t seed = 1;
    int reps = 3;
};

struct ScalingSweep {
    struct Row {
        std::size_t size = 0;
        std::size_t max_leaves = 0;
        Algo algo = Algo::BetulaIgmm;
        double build_median = 0.0, build_mean = 0.0;
        double total_median = 0.0, total_mean = 0.0;
        double leaf_entries_mean = 0.0;
        double ll_per_point_mean = 0.0;
    };
    std::vector<Row> rows;
    std::string to_csv() const;
};

ScalingSweep run_scaling_sweep(const ScalingSweepOptions& options);

double median(std::vector<double> values);

}  // namespace betula
