#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "betula/cluster_features.hpp"

namespace betula {

enum class ModelKind { Spherical, Diagonal };
enum class VarianceBackend { Textbook, Stable };

struct GaussianComponent {
    double weight = 0.0;
    std::vector<double> mean;
    std::vector<double> variance;  // one entry for spherical models, d entries for diagonal
};

struct MixtureModel {
    ModelKind kind = ModelKind::Spherical;
    std::size_t dim = 0;
    std::vector<GaussianComponent> components;
    int iterations = 0;
    double final_log_likelihood = 0.0;  // training objective at the returned parameters
    double training_weight = 0.0;       // total input weight, for per-point traces
    std::vector<double> trace;          // training objective after each evaluation pass
    std::uint64_t cancellation_flags = 0;  // unstable-route spreads that evaluated <= 0
    std::uint64_t variance_clamps = 0;     // variances raised to the floor
    std::uint64_t reseeds = 0;             // empty components restarted
};

struct EmOptions {
    int k = 1;
    int max_iter = 100;
    double tol = 1e-7;       // stop when the objective improves by less than this
    std::uint64_t seed = 1;
};

// Weighted kmeans++ over flat locations (n x dim, row-major): the first
// index is drawn proportional to weight, each further one proportional to
// weight times squared Euclidean distance to the nearest chosen location.
// Deterministic for a given seed. When every remaining candidate sits on a
// chosen location (zero mass), the draw falls back to weight-proportional
// sampling over the unchosen ones so that k distinct indices always exist.
std::vector<std::size_t> kmeanspp_indices(std::span<const double> locations, std::size_t dim,
                                          std::span<const double> weights, int k, std::uint64_t seed);

// Convenience wrapper over feature means/weights, returning mean vectors.
std::vector<std::vector<double>> kmeanspp_init(const std::vector<BetulaFeature>& inputs, int k,
                                               std::uint64_t seed);

// EM over stable cluster features. Responsibilities integrate the feature's
// own Gaussian against each component: r ~ pi_c * N(mu_f | mean_c,
// var_c + var_f), with var_f = S/n per dimension (their mean for spherical
// models). The M-step accumulates means and variances through the stable
// merge updates, feeding each feature's internal deviations back in.
MixtureModel fit_features(const std::vector<BetulaFeature>& inputs, ModelKind kind, const EmOptions& options);

// EM over classic features, spherical only: every moment, including each
// feature's internal variance and the per-component variances, is derived
// from (N, LS, SS) through E[X^2] - E[X]^2, so the known cancellation is
// reproduced rather than repaired. Flags count the non-positive spreads.
MixtureModel fit_features(const std::vector<BirchFeature>& inputs, const EmOptions& options);

// Classic per-point EM. The backend selects how component variances are
// accumulated: Textbook via one-pass E[X^2] - E[X]^2 moments, Stable via
// the same weighted incremental updates the feature path uses. An empty
// weights span means unit weights.
MixtureModel fit_points(std::span<const double> coords, std::size_t dim, std::span<const double> weights,
                        ModelKind kind, VarianceBackend backend, const EmOptions& options);

struct Likelihood {
    double total = 0.0;
    double per_point = 0.0;
};

// Sum of log mixture densities over raw points, evaluated with log-sum-exp.
Likelihood log_likelihood(const MixtureModel& model, std::span<const double> coords);

// Posterior component probabilities for one location, optionally with a
// per-dimension internal variance added to each component's (diagnostics
// and tests; the fitting loops use a fused version of the same maths).
std::vector<double> responsibilities(const MixtureModel& model, std::span<const double> x,
                                     std::span<const double> internal_variance = {});

// One line per component: pi;mean_1,...,mean_d;var...
std::string to_text(const MixtureModel& model);
// Objective trace as CSV: iteration,total,per_point.
std::string trace_csv(const MixtureModel& model);

}  // namespace betula
