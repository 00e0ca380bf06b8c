// Command-line front end: dataset generation, tree building/inspection,
// mixture fitting, and the three experiment sweeps.

#include <cstdio>
#include <exception>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "betula/csv.hpp"
#include "betula/harness.hpp"
#include "betula/serialization.hpp"

namespace {

using namespace betula;

struct DataOptions {
    std::string input_csv;
    std::string dataset;  // shift | grid | random
    double shift = 0.0;
    std::string shift_mode = "separation";
    std::size_t points_per_cluster = 0;  // 0: dataset default (shift 15000, grid 10000)
    double multiplier = 0.1;
};

void add_data_options(CLI::App* cmd, DataOptions& opt) {
    cmd->add_option("--input", opt.input_csv, "input points CSV (alternative to --dataset)");
    cmd->add_option("--dataset", opt.dataset, "generator: shift|grid|random")
        ->check(CLI::IsMember({"shift", "grid", "random"}));
    cmd->add_option("--shift", opt.shift, "cluster separation for the shift dataset");
    cmd->add_option("--shift-mode", opt.shift_mode, "separation|offset")
        ->check(CLI::IsMember({"separation", "offset"}));
    cmd->add_option("--points-per-cluster", opt.points_per_cluster, "points per cluster (shift/grid)");
    cmd->add_option("--multiplier", opt.multiplier, "dataset size multiplier (grid/random)");
}

LabeledPoints load_data(const DataOptions& opt, std::uint64_t seed) {
    if (!opt.input_csv.empty()) return read_points_csv(opt.input_csv);
    if (opt.dataset == "shift") {
        ShiftSpec spec;
        if (opt.points_per_cluster) spec.points_per_cluster = opt.points_per_cluster;
        spec.shift = opt.shift;
        spec.mode = opt.shift_mode == "offset" ? ShiftSpec::Mode::Offset : ShiftSpec::Mode::Separation;
        spec.seed = seed;
        return gen_shift(spec);
    }
    if (opt.dataset == "grid") {
        GridSpec spec;
        if (opt.points_per_cluster) spec.points_per_cluster = opt.points_per_cluster;
        spec.multiplier = opt.multiplier;
        spec.seed = seed;
        return gen_grid(spec);
    }
    if (opt.dataset == "random") {
        RandomSpec spec;
        spec.multiplier = opt.multiplier;
        spec.seed = seed;
        return gen_random(spec);
    }
    throw CLI::ValidationError("either --input or --dataset is required");
}

void emit(const std::string& out_path, const std::string& content) {
    if (out_path.empty())
        std::cout << content;
    else
        write_file(out_path, content);
}

std::vector<Algo> parse_algo_list(const std::vector<std::string>& names) {
    if (names.empty()) return all_algos();
    std::vector<Algo> algos;
    for (const auto& n : names) algos.push_back(parse_algo(n));
    return algos;
}

nlohmann::json model_to_json(const MixtureModel& model, const RunResult& result) {
    nlohmann::json j;
    j["kind"] = model.kind == ModelKind::Spherical ? "igmm" : "dgmm";
    j["dim"] = model.dim;
    j["iterations"] = result.iterations;
    j["ll_total"] = result.ll_total;
    j["ll_per_point"] = result.ll_per_point;
    j["build_seconds"] = result.build_seconds;
    j["total_seconds"] = result.total_seconds;
    j["leaf_entries"] = result.leaf_entries;
    j["rebuilds"] = result.rebuilds;
    j["cancellation_flags"] = result.cancellation_flags;
    j["variance_clamps"] = result.variance_clamps;
    j["reseeds"] = result.reseeds;
    j["components"] = nlohmann::json::array();
    for (const auto& g : model.components)
        j["components"].push_back({{"weight", g.weight}, {"mean", g.mean}, {"variance", g.variance}});
    return j;
}

struct TreeFlags {
    std::string distance = "d4";
    std::string absorption = "r";
    int branching = 7;
    int leaf_capacity = 7;
    std::size_t max_leaves = 5000;
    double threshold = 0.0;
};

std::vector<CLI::Option*> add_tree_options(CLI::App* cmd, TreeFlags& t) {
    std::vector<CLI::Option*> opts;
    opts.push_back(cmd->add_option("--distance", t.distance, "d0|d1|d2|d3|d4 (default d4)"));
    opts.push_back(cmd->add_option("--absorption", t.absorption, "r|d|e (default r)"));
    opts.push_back(cmd->add_option("--branching", t.branching, "inner node fan-out"));
    opts.push_back(cmd->add_option("--leaf-capacity", t.leaf_capacity, "features per leaf"));
    opts.push_back(cmd->add_option("--max-leaves", t.max_leaves, "leaf entry cap before rebuild"));
    opts.push_back(cmd->add_option("--threshold", t.threshold, "initial absorption threshold"));
    return opts;
}

TreeConfig to_tree_config(const TreeFlags& t, Precision precision) {
    TreeConfig cfg;
    cfg.distance = parse_distance_kind(t.distance);
    cfg.absorption = parse_absorption_kind(t.absorption);
    cfg.branching_factor = t.branching;
    cfg.leaf_capacity = t.leaf_capacity;
    cfg.max_leaf_entries = t.max_leaves;
    cfg.initial_threshold = t.threshold;
    cfg.single_precision = precision == Precision::Single;
    return cfg;
}

int run(int argc, char** argv) {
    CLI::App app{"CF-tree clustering with stable and classic feature algebra"};
    app.require_subcommand(1);

    // ---- gen ------------------------------------------------------------
    auto* gen = app.add_subcommand("gen", "generate a synthetic dataset as CSV");
    DataOptions gen_data;
    std::string gen_out;
    std::uint64_t gen_seed = 1;
    add_data_options(gen, gen_data);
    gen->add_option("--seed", gen_seed, "generator seed");
    gen->add_option("--out", gen_out, "output CSV path (default stdout)");
    gen->callback([&] {
        if (gen_data.dataset.empty()) throw CLI::ValidationError("gen requires --dataset");
        emit(gen_out, points_to_csv(load_data(gen_data, gen_seed)));
    });

    // ---- tree -----------------------------------------------------------
    auto* tree_cmd = app.add_subcommand("tree", "build a CF-tree and report stats");
    DataOptions tree_data;
    TreeFlags tree_flags;
    std::string tree_form = "betula", tree_precision = "double", tree_dump, tree_out;
    std::uint64_t tree_seed = 1;
    add_data_options(tree_cmd, tree_data);
    add_tree_options(tree_cmd, tree_flags);
    tree_cmd->add_option("--form", tree_form, "birch|betula feature algebra");
    tree_cmd->add_option("--precision", tree_precision, "single|double CF storage");
    tree_cmd->add_option("--seed", tree_seed, "generator seed");
    tree_cmd->add_option("--dump", tree_dump, "write the full tree dump to this path");
    tree_cmd->add_option("--out", tree_out, "stats output path (default stdout)");
    tree_cmd->callback([&] {
        const LabeledPoints data = load_data(tree_data, tree_seed);
        const TreeConfig cfg = to_tree_config(tree_flags, parse_precision(tree_precision));
        TreeStats stats;
        std::string dump;
        if (parse_metric_form(tree_form) == MetricForm::Birch) {
            BirchTree tree(data.dim, cfg);
            for (std::size_t i = 0; i < data.size(); ++i) tree.insert(data.point(i));
            stats = tree.stats();
            if (!tree_dump.empty()) dump = tree.dump();
        } else {
            BetulaTree tree(data.dim, cfg);
            for (std::size_t i = 0; i < data.size(); ++i) tree.insert(data.point(i));
            stats = tree.stats();
            if (!tree_dump.empty()) dump = tree.dump();
        }
        if (!tree_dump.empty()) write_file(tree_dump, dump);
        std::string out = "height,node_count,leaf_entries,rebuilds,threshold,cancellation_flags\n";
        out += std::to_string(stats.height) + "," + std::to_string(stats.node_count) + "," +
               std::to_string(stats.leaf_entries) + "," + std::to_string(stats.rebuilds) + "," +
               format_double(stats.threshold) + "," + std::to_string(stats.cancellation_flags) + "\n";
        emit(tree_out, out);
    });

    // ---- fit ------------------------------------------------------------
    auto* fit = app.add_subcommand("fit", "cluster and report the mixture model");
    DataOptions fit_data;
    TreeFlags fit_flags;
    std::string fit_algo = "betula-igmm", fit_precision = "double", fit_out, fit_format = "csv", fit_trace;
    int fit_k = 100, fit_max_iter = 100, fit_reps = 1;
    double fit_tol = 1e-7;
    std::uint64_t fit_seed = 1;
    add_data_options(fit, fit_data);
    const auto fit_tree_opts = add_tree_options(fit, fit_flags);
    fit->add_option("--algo", fit_algo,
                    "textbook-igmm|stable-igmm|stable-dgmm|birch-igmm|betula-igmm|betula-dgmm");
    fit->add_option("--k", fit_k, "mixture components");
    fit->add_option("--max-iter", fit_max_iter, "EM iteration cap (default 100)");
    fit->add_option("--tol", fit_tol, "EM improvement tolerance");
    fit->add_option("--seed", fit_seed, "seed (generator, init, shuffle)");
    fit->add_option("--reps", fit_reps, "repetitions with seeds seed..seed+reps-1");
    fit->add_option("--precision", fit_precision, "single|double CF storage");
    fit->add_option("--out", fit_out, "output path (default stdout)");
    fit->add_option("--format", fit_format, "csv|json")->check(CLI::IsMember({"csv", "json"}));
    fit->add_option("--trace", fit_trace, "write the EM objective trace CSV here");
    fit->callback([&] {
        RunConfig config;
        config.algo = parse_algo(fit_algo);
        config.k = fit_k;
        config.precision = parse_precision(fit_precision);
        config.max_iter = fit_max_iter;
        config.tol = fit_tol;
        config.seed = fit_seed;
        config.reps = fit_reps;
        config.tree = to_tree_config(fit_flags, config.precision);
        for (const CLI::Option* o : fit_tree_opts) config.tree_params_set |= o->count() > 0;
        const LabeledPoints data = load_data(fit_data, fit_seed);

        if (fit_reps > 1) {
            const ExperimentReport report = run_repeated(data, config);
            emit(fit_out, report.to_csv());
            return;
        }
        const auto [result, model] = run_once(data, config, fit_seed);
        if (!fit_trace.empty()) write_file(fit_trace, trace_csv(model));
        if (fit_format == "json") {
            emit(fit_out, model_to_json(model, result).dump(2) + "\n");
        } else {
            std::string out;
            out += "ll_total," + format_double(result.ll_total) + "\n";
            out += "ll_per_point," + format_double(result.ll_per_point) + "\n";
            out += "iterations," + std::to_string(result.iterations) + "\n";
            out += "cancellation_flags," + std::to_string(result.cancellation_flags) + "\n";
            out += to_text(model);
            emit(fit_out, out);
        }
    });

    // ---- sweep-stability --------------------------------------------------
    auto* stab = app.add_subcommand("sweep-stability", "log-likelihood vs cluster separation");
    StabilitySweepOptions stab_opt;
    std::vector<std::string> stab_algos;
    std::string stab_precision = "double", stab_out, stab_mode = "separation";
    TreeFlags stab_tree;
    stab->add_option("--shifts", stab_opt.shifts, "separations to sweep")->required();
    stab->add_option("--algos", stab_algos, "algorithms (default all six)");
    stab->add_option("--points-per-cluster", stab_opt.points_per_cluster, "points per cluster");
    stab->add_option("--shift-mode", stab_mode, "separation|offset")
        ->check(CLI::IsMember({"separation", "offset"}));
    stab->add_option("--k", stab_opt.k, "mixture components (default 2)");
    stab->add_option("--reps", stab_opt.reps, "repetitions per cell");
    stab->add_option("--seed", stab_opt.seed, "base seed");
    stab->add_option("--max-iter", stab_opt.max_iter, "EM iteration cap");
    stab->add_option("--precision", stab_precision, "single|double CF storage");
    add_tree_options(stab, stab_tree);
    stab->add_option("--out", stab_out, "output CSV path (default stdout)");
    stab->callback([&] {
        stab_opt.algos = parse_algo_list(stab_algos);
        stab_opt.precision = parse_precision(stab_precision);
        stab_opt.mode = stab_mode == "offset" ? ShiftSpec::Mode::Offset : ShiftSpec::Mode::Separation;
        stab_opt.tree = to_tree_config(stab_tree, stab_opt.precision);
        emit(stab_out, run_stability_sweep(stab_opt).to_csv());
    });

    // ---- sweep-quality ----------------------------------------------------
    auto* qual = app.add_subcommand("sweep-quality", "fit quality across dataset sizes");
    QualitySweepOptions qual_opt;
    std::vector<std::string> qual_algos, qual_datasets{"grid", "random"};
    std::string qual_precision = "double", qual_out;
    TreeFlags qual_tree;
    qual->add_option("--datasets", qual_datasets, "grid and/or random");
    qual->add_option("--multipliers", qual_opt.multipliers, "size multipliers");
    qual->add_option("--algos", qual_algos, "algorithms (default all six)");
    qual->add_option("--k", qual_opt.k, "mixture components (default 100)");
    qual->add_option("--reps", qual_opt.reps, "repetitions per cell");
    qual->add_option("--seed", qual_opt.seed, "base seed");
    qual->add_option("--max-iter", qual_opt.max_iter, "EM iteration cap");
    qual->add_option("--precision", qual_precision, "single|double CF storage");
    add_tree_options(qual, qual_tree);
    qual->add_option("--out", qual_out, "output CSV path (default stdout)");
    qual->callback([&] {
        qual_opt.algos = parse_algo_list(qual_algos);
        qual_opt.precision = parse_precision(qual_precision);
        qual_opt.tree = to_tree_config(qual_tree, qual_opt.precision);
        qual_opt.datasets.clear();
        for (const auto& d : qual_datasets) {
            if (d == "grid")
                qual_opt.datasets.push_back(QualityDataset::Grid);
            else if (d == "random")
                qual_opt.datasets.push_back(QualityDataset::Random);
            else
                throw CLI::ValidationError("unknown dataset: " + d);
        }
        emit(qual_out, run_quality_sweep(qual_opt).to_csv());
    });

    // ---- sweep-scaling ------------------------------------------------------
    auto* scal = app.add_subcommand("sweep-scaling", "build and total time across sizes");
    ScalingSweepOptions scal_opt;
    std::vector<std::string> scal_algos;
    std::string scal_precision = "double", scal_out;
    TreeFlags scal_tree;
    scal->add_option("--sizes", scal_opt.sizes, "total point counts");
    scal->add_option("--max-leaves-list", scal_opt.max_leaves, "leaf entry caps to sweep");
    scal->add_option("--algos", scal_algos, "algorithms (default all six)");
    scal->add_option("--k", scal_opt.k, "mixture components (default 100)");
    scal->add_option("--reps", scal_opt.reps, "repetitions (median reported)");
    scal->add_option("--seed", scal_opt.seed, "base seed");
    scal->add_option("--max-iter", scal_opt.max_iter, "EM iteration cap");
    scal->add_option("--precision", scal_precision, "single|double CF storage");
    add_tree_options(scal, scal_tree);
    scal->add_option("--out", scal_out, "output CSV path (default stdout)");
    scal->callback([&] {
        scal_opt.algos = parse_algo_list(scal_algos);
        scal_opt.precision = parse_precision(scal_precision);
        scal_opt.tree = to_tree_config(scal_tree, scal_opt.precision);
        emit(scal_out, run_scaling_sweep(scal_opt).to_csv());
    });

    CLI11_PARSE(app, argc, argv);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
