#include "betula/gmm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <stdexcept>

#include "betula/rng.hpp"
#include "betula/serialization.hpp"
#include "betula/vec_ops.hpp"

namespace betula {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;  // log(2*pi)

// Components whose variance collapses are clamped here. An absolute floor:
// it must stay below any legitimate component variance no matter how far
// the data sits from the origin, and it only has to keep densities finite
// on degenerate (constant) input.
constexpr double kVarianceFloor = 1e-30;

// A component whose responsibility mass falls below this share of the
// total weight is treated as empty and reseeded.
constexpr double kEmptyShare = 1e-12;

enum class MStepRoute {
    Merge,           // weighted incremental mean/deviation updates
    Moments,         // one-pass E[X^2] - E[X]^2 on raw coordinates
    ClassicMoments,  // one-pass moments on (N, LS, SS) aggregates
};

struct EmData {
    std::size_t n = 0;
    std::size_t d = 0;
    std::vector<double> locations;  // n*d means (or raw points)
    std::vector<double> weights;    // n
    std::vector<double> fvar;       // n*d internal variances; empty means all zero
    std::vector<double> fvar_sph;   // n spherical internal variances; empty means all zero
    std::vector<double> ls;         // n*d linear sums, classic route only
    std::vector<double> ss;         // n scalar square sums, classic route only
    bool has_internal_variance = false;
};

struct EmState {
    int k = 0;
    std::size_t d = 0;
    ModelKind kind = ModelKind::Spherical;
    std::vector<double> log_pi;    // k
    std::vector<double> means;     // k*d
    std::vector<double> vars;      // k (spherical) or k*d (diagonal)
};

class EmEngine {
public:
    EmEngine(const EmData& data, ModelKind kind, MStepRoute route, const EmOptions& options)
        : data_(data), kind_(kind), route_(route), options_(options) {
        if (data_.n == 0) throw std::invalid_argument("em: inputs must be nonempty");
        if (options_.k < 1) throw std::invalid_argument("em: k must be at least 1");
        if (options_.max_iter < 1) throw std::invalid_argument("em: max_iter must be at least 1");
        for (double w : data_.weights)
            if (!(w > 0.0)) throw std::invalid_argument("em: input weights must be positive");
        if (route_ == MStepRoute::ClassicMoments && kind_ != ModelKind::Spherical)
            throw std::invalid_argument("em: classic features only support the spherical model");
        total_weight_ = std::accumulate(data_.weights.begin(), data_.weights.end(), 0.0);
    }

    MixtureModel run() {
        init();
        const std::size_t k = static_cast<std::size_t>(options_.k);
        input_ll_.assign(data_.n, 0.0);

        // The feature-level E step responsibilities come from the
        // variance-convolved densities while the M step maximizes the
        // point-level statistics, so the very last update can overshoot
        // (the tolerance rule then stops the run). Keeping the previous
        // iterate lets us return the best evaluated parameters; every
        // step before the final one improves by at least `tol`.
        double prev_ll = -std::numeric_limits<double>::infinity();
        EmState prev_state;
        bool rolled_back = false;
        int m_steps = 0;
        while (true) {
            const double ll = e_step_accumulate();
            trace_.push_back(ll);
            const bool converged = m_steps > 0 && ll - prev_ll < options_.tol;
            if (converged || m_steps == options_.max_iter) {
                if (m_steps > 0 && ll < prev_ll) {
                    state_ = prev_state;
                    rolled_back = true;
                }
                break;
            }
            prev_ll = ll;
            prev_state = state_;
            m_step();
            ++m_steps;
        }

        MixtureModel model;
        model.kind = kind_;
        model.dim = data_.d;
        model.iterations = rolled_back ? m_steps - 1 : m_steps;
        model.final_log_likelihood = rolled_back ? prev_ll : trace_.back();
        model.training_weight = total_weight_;
        model.trace = std::move(trace_);
        model.cancellation_flags = cancellation_flags_;
        model.variance_clamps = variance_clamps_;
        model.reseeds = reseeds_;
        model.components.resize(k);
        const std::size_t vd = kind_ == ModelKind::Spherical ? 1 : data_.d;
        for (std::size_t c = 0; c < k; ++c) {
            GaussianComponent& g = model.components[c];
            g.weight = std::exp(state_.log_pi[c]);
            g.mean.assign(state_.means.begin() + static_cast<std::ptrdiff_t>(c * data_.d),
                          state_.means.begin() + static_cast<std::ptrdiff_t>((c + 1) * data_.d));
            g.variance.assign(state_.vars.begin() + static_cast<std::ptrdiff_t>(c * vd),
                              state_.vars.begin() + static_cast<std::ptrdiff_t>((c + 1) * vd));
        }
        // pi values were normalized in weight space; renormalize the exp'd
        // copies so the reported weights sum to 1 to the last bit.
        double pi_sum = 0.0;
        for (const auto& g : model.components) pi_sum += g.weight;
        for (auto& g : model.components) g.weight /= pi_sum;
        return model;
    }

private:
    // --- initialization ------------------------------------------------

    void init() {
        const std::size_t k = static_cast<std::size_t>(options_.k);
        if (k > data_.n) throw std::invalid_argument("em: k exceeds the number of inputs");

        global_var_.assign(data_.d, 0.0);
        compute_global_variance();

        const auto seeds =
            kmeanspp_indices(data_.locations, data_.d, data_.weights, options_.k, options_.seed);

        state_.k = options_.k;
        state_.d = data_.d;
        state_.kind = kind_;
        state_.log_pi.assign(k, -std::log(static_cast<double>(k)));
        state_.means.resize(k * data_.d);
        for (std::size_t c = 0; c < k; ++c)
            std::copy_n(data_.locations.begin() + static_cast<std::ptrdiff_t>(seeds[c] * data_.d), data_.d,
                        state_.means.begin() + static_cast<std::ptrdiff_t>(c * data_.d));

        if (kind_ == ModelKind::Spherical) {
            double mean_var = 0.0;
            for (double v : global_var_) mean_var += v;
            mean_var = std::max(mean_var / static_cast<double>(data_.d), kVarianceFloor);
            state_.vars.assign(k, mean_var);
        } else {
            state_.vars.resize(k * data_.d);
            for (std::size_t c = 0; c < k; ++c)
                for (std::size_t j = 0; j < data_.d; ++j)
                    state_.vars[c * data_.d + j] = std::max(global_var_[j], kVarianceFloor);
        }
    }

    // Stable single pass over all inputs, internal variances included.
    void compute_global_variance() {
        double w_acc = 0.0;
        std::vector<double> mean_acc(data_.d, 0.0);
        std::vector<double> s_acc(data_.d, 0.0);
        for (std::size_t i = 0; i < data_.n; ++i) {
            const double w = data_.weights[i];
            const double* x = &data_.locations[i * data_.d];
            const double w_new = w_acc + w;
            const double ratio = w / w_new;
            for (std::size_t j = 0; j < data_.d; ++j) {
                const double old_mean = mean_acc[j];
                const double new_mean = old_mean + ratio * (x[j] - old_mean);
                mean_acc[j] = new_mean;
                double s = w * (old_mean - x[j]) * (new_mean - x[j]);
                if (!data_.fvar.empty()) s += w * data_.fvar[i * data_.d + j];
                s_acc[j] += s;
            }
            w_acc = w_new;
        }
        for (std::size_t j = 0; j < data_.d; ++j) global_var_[j] = std::max(s_acc[j] / w_acc, 0.0);
    }

    // --- E step ---------------------------------------------------------

    // Fused E pass: evaluates the objective at the current parameters and
    // accumulates the sufficient statistics for the following M step.
    // Returns the weighted objective sum_i w_i log sum_c pi_c N_c(x_i).
    double e_step_accumulate() {
        const std::size_t k = static_cast<std::size_t>(options_.k);
        const std::size_t d = data_.d;

        reset_accumulators();

        // Per-component constants; only valid without internal variances.
        std::vector<double> log_norm(k), inv2v;
        const bool fast = !data_.has_internal_variance;
        if (fast) {
            if (kind_ == ModelKind::Spherical) {
                inv2v.resize(k);
                for (std::size_t c = 0; c < k; ++c) {
                    const double v = state_.vars[c];
                    log_norm[c] = state_.log_pi[c] - 0.5 * static_cast<double>(d) * (kLog2Pi + std::log(v));
                    inv2v[c] = 0.5 / v;
                }
            } else {
                inv2v.resize(k * d);
                for (std::size_t c = 0; c < k; ++c) {
                    double acc = 0.0;
                    for (std::size_t j = 0; j < d; ++j) {
                        const double v = state_.vars[c * d + j];
                        acc += kLog2Pi + std::log(v);
                        inv2v[c * d + j] = 0.5 / v;
                    }
                    log_norm[c] = state_.log_pi[c] - 0.5 * acc;
                }
            }
        }

        std::vector<double> lp(k), ex(k);
        KahanSum objective;
        for (std::size_t i = 0; i < data_.n; ++i) {
            const double* x = &data_.locations[i * d];
            if (fast) {
                if (kind_ == ModelKind::Spherical) {
                    for (std::size_t c = 0; c < k; ++c) {
                        double sqd = 0.0;
                        const double* m = &state_.means[c * d];
                        for (std::size_t j = 0; j < d; ++j) {
                            const double diff = x[j] - m[j];
                            sqd += diff * diff;
                        }
                        lp[c] = log_norm[c] - sqd * inv2v[c];
                    }
                } else {
                    for (std::size_t c = 0; c < k; ++c) {
                        double acc = 0.0;
                        const double* m = &state_.means[c * d];
                        const double* iv = &inv2v[c * d];
                        for (std::size_t j = 0; j < d; ++j) {
                            const double diff = x[j] - m[j];
                            acc += diff * diff * iv[j];
                        }
                        lp[c] = log_norm[c] - acc;
                    }
                }
            } else {
                component_log_densities(i, lp.data());
            }

            double max_lp = lp[0];
            for (std::size_t c = 1; c < k; ++c) max_lp = std::max(max_lp, lp[c]);
            double sum = 0.0;
            for (std::size_t c = 0; c < k; ++c) {
                ex[c] = std::exp(lp[c] - max_lp);
                sum += ex[c];
            }
            const double lse = max_lp + std::log(sum);
            input_ll_[i] = lse;
            objective.add(data_.weights[i] * lse);

            const double w = data_.weights[i];
            for (std::size_t c = 0; c < k; ++c) {
                const double rw = ex[c] / sum * w;
                if (rw > 0.0) accumulate(c, i, rw);
            }
        }
        return objective.value();
    }

    // General per-input densities with the input's own variance added to
    // each component's.
    void component_log_densities(std::size_t i, double* lp) const {
        const std::size_t k = static_cast<std::size_t>(options_.k);
        const std::size_t d = data_.d;
        const double* x = &data_.locations[i * d];
        if (kind_ == ModelKind::Spherical) {
            const double fv = data_.fvar_sph.empty() ? 0.0 : data_.fvar_sph[i];
            for (std::size_t c = 0; c < k; ++c) {
                const double v = state_.vars[c] + fv;
                double sqd = 0.0;
                const double* m = &state_.means[c * d];
                for (std::size_t j = 0; j < d; ++j) {
                    const double diff = x[j] - m[j];
                    sqd += diff * diff;
                }
                lp[c] = state_.log_pi[c] - 0.5 * (static_cast<double>(d) * (kLog2Pi + std::log(v)) + sqd / v);
            }
        } else {
            const double* fv = data_.fvar.empty() ? nullptr : &data_.fvar[i * d];
            for (std::size_t c = 0; c < k; ++c) {
                double acc = 0.0;
                const double* m = &state_.means[c * d];
                for (std::size_t j = 0; j < d; ++j) {
                    const double v = state_.vars[c * d + j] + (fv ? fv[j] : 0.0);
                    const double diff = x[j] - m[j];
                    acc += kLog2Pi + std::log(v) + diff * diff / v;
                }
                lp[c] = state_.log_pi[c] - 0.5 * acc;
            }
        }
    }

    // --- M step accumulators ---------------------------------------------

    void reset_accumulators() {
        const std::size_t k = static_cast<std::size_t>(options_.k);
        const std::size_t d = data_.d;
        acc_w_.assign(k, 0.0);
        switch (route_) {
            case MStepRoute::Merge:
                acc_mean_.assign(k * d, 0.0);
                acc_s_.assign(k * d, 0.0);
                break;
            case MStepRoute::Moments:
                acc_mean_.assign(k * d, 0.0);  // running weighted sums
                acc_s_.assign(k * d, 0.0);     // running weighted square sums
                break;
            case MStepRoute::ClassicMoments:
                acc_mean_.assign(k * d, 0.0);  // linear sums
                acc_s_.assign(k, 0.0);         // scalar square sums
                break;
        }
    }

    void accumulate(std::size_t c, std::size_t i, double rw) {
        const std::size_t d = data_.d;
        const double* x = &data_.locations[i * d];
        switch (route_) {
            case MStepRoute::Merge: {
                const double w_new = acc_w_[c] + rw;
                const double ratio = rw / w_new;
                double* mean = &acc_mean_[c * d];
                double* s = &acc_s_[c * d];
                const double* fv = data_.fvar.empty() ? nullptr : &data_.fvar[i * d];
                for (std::size_t j = 0; j < d; ++j) {
                    const double old_mean = mean[j];
                    const double new_mean = old_mean + ratio * (x[j] - old_mean);
                    mean[j] = new_mean;
                    double add = rw * (old_mean - x[j]) * (new_mean - x[j]);
                    if (fv) add += rw * fv[j];
                    s[j] += add;
                }
                acc_w_[c] = w_new;
                break;
            }
            case MStepRoute::Moments: {
                double* sum = &acc_mean_[c * d];
                double* sumsq = &acc_s_[c * d];
                for (std::size_t j = 0; j < d; ++j) {
                    sum[j] += rw * x[j];
                    sumsq[j] += rw * x[j] * x[j];
                }
                acc_w_[c] += rw;
                break;
            }
            case MStepRoute::ClassicMoments: {
                // rw is responsibility * N_f; scale the raw sums by the
                // responsibility share rather than re-deriving them.
                const double r = rw / data_.weights[i];
                double* lsum = &acc_mean_[c * d];
                const double* ls = &data_.ls[i * d];
                for (std::size_t j = 0; j < d; ++j) lsum[j] += r * ls[j];
                acc_s_[c] += r * data_.ss[i];
                acc_w_[c] += rw;
                break;
            }
        }
    }

    // --- M step ----------------------------------------------------------

    void m_step() {
        const std::size_t k = static_cast<std::size_t>(options_.k);

        std::vector<std::size_t> empty;
        for (std::size_t c = 0; c < k; ++c)
            if (!(acc_w_[c] > kEmptyShare * total_weight_)) empty.push_back(c);

        for (std::size_t c = 0; c < k; ++c) {
            if (std::find(empty.begin(), empty.end(), c) != empty.end()) continue;
            finalize_component(c);
        }
        if (!empty.empty()) reseed(empty);

        double w_total = 0.0;
        for (std::size_t c = 0; c < k; ++c) w_total += acc_w_[c];
        for (std::size_t c = 0; c < k; ++c) state_.log_pi[c] = std::log(acc_w_[c] / w_total);
    }

    void finalize_component(std::size_t c) {
        const std::size_t d = data_.d;
        const double w = acc_w_[c];
        switch (route_) {
            case MStepRoute::Merge: {
                std::copy_n(acc_mean_.begin() + static_cast<std::ptrdiff_t>(c * d), d,
                            state_.means.begin() + static_cast<std::ptrdiff_t>(c * d));
                if (kind_ == ModelKind::Spherical) {
                    double s = 0.0;
                    for (std::size_t j = 0; j < d; ++j) s += acc_s_[c * d + j];
                    state_.vars[c] = floor_variance(s / (w * static_cast<double>(d)), false);
                } else {
                    for (std::size_t j = 0; j < d; ++j)
                        state_.vars[c * d + j] = floor_variance(acc_s_[c * d + j] / w, false);
                }
                break;
            }
            case MStepRoute::Moments: {
                double mean_sq = 0.0;
                for (std::size_t j = 0; j < d; ++j) {
                    const double m = acc_mean_[c * d + j] / w;
                    state_.means[c * d + j] = m;
                    mean_sq += m * m;
                }
                if (kind_ == ModelKind::Spherical) {
                    double ex2 = 0.0;
                    for (std::size_t j = 0; j < d; ++j) ex2 += acc_s_[c * d + j];
                    state_.vars[c] = floor_variance((ex2 / w - mean_sq) / static_cast<double>(d), true);
                } else {
                    for (std::size_t j = 0; j < d; ++j) {
                        const double m = state_.means[c * d + j];
                        state_.vars[c * d + j] = floor_variance(acc_s_[c * d + j] / w - m * m, true);
                    }
                }
                break;
            }
            case MStepRoute::ClassicMoments: {
                double mean_sq = 0.0;
                for (std::size_t j = 0; j < d; ++j) {
                    const double m = acc_mean_[c * d + j] / w;
                    state_.means[c * d + j] = m;
                    mean_sq += m * m;
                }
                state_.vars[c] = floor_variance((acc_s_[c] / w - mean_sq) / static_cast<double>(d), true);
                break;
            }
        }
    }

    double floor_variance(double raw, bool unstable_route) {
        if (unstable_route && raw <= 0.0) ++cancellation_flags_;
        if (raw < kVarianceFloor) {
            ++variance_clamps_;
            return kVarianceFloor;
        }
        return raw;
    }

    // Deterministic restart: each empty component moves onto the worst-fit
    // unclaimed input, takes the global spread, and a uniform share of the
    // weight mass.
    void reseed(const std::vector<std::size_t>& empty) {
        const std::size_t d = data_.d;
        std::vector<std::size_t> order(data_.n);
        std::iota(order.begin(), order.end(), 0);
        std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(std::min(empty.size(), data_.n)),
                          order.end(), [&](std::size_t a, std::size_t b) {
                              if (input_ll_[a] != input_ll_[b]) return input_ll_[a] < input_ll_[b];
                              return a < b;
                          });
        for (std::size_t e = 0; e < empty.size(); ++e) {
            const std::size_t c = empty[e];
            const std::size_t i = order[e % data_.n];
            std::copy_n(data_.locations.begin() + static_cast<std::ptrdiff_t>(i * d), d,
                        state_.means.begin() + static_cast<std::ptrdiff_t>(c * d));
            if (kind_ == ModelKind::Spherical) {
                double mean_var = 0.0;
                for (double v : global_var_) mean_var += v;
                state_.vars[c] = std::max(mean_var / static_cast<double>(d), kVarianceFloor);
            } else {
                for (std::size_t j = 0; j < d; ++j)
                    state_.vars[c * d + j] = std::max(global_var_[j], kVarianceFloor);
            }
            acc_w_[c] = total_weight_ / static_cast<double>(data_.n);
            ++reseeds_;
        }
    }

    const EmData& data_;
    ModelKind kind_;
    MStepRoute route_;
    EmOptions options_;

    EmState state_;
    double total_weight_ = 0.0;
    std::vector<double> global_var_;
    std::vector<double> input_ll_;
    std::vector<double> acc_w_, acc_mean_, acc_s_;
    std::vector<double> trace_;
    std::uint64_t cancellation_flags_ = 0;
    std::uint64_t variance_clamps_ = 0;
    std::uint64_t reseeds_ = 0;
};

}  // namespace

std::vector<std::size_t> kmeanspp_indices(std::span<const double> locations, std::size_t dim,
                                          std::span<const double> weights, int k, std::uint64_t seed) {
    const std::size_t n = weights.size();
    if (dim == 0 || locations.size() != n * dim)
        throw std::invalid_argument("kmeanspp: locations/weights size mismatch");
    if (k < 1 || static_cast<std::size_t>(k) > n)
        throw std::invalid_argument("kmeanspp: k must be in [1, number of inputs]");
    for (double w : weights)
        if (!(w > 0.0)) throw std::invalid_argument("kmeanspp: weights must be positive");

    Rng rng(seed);
    std::vector<std::size_t> chosen;
    chosen.reserve(static_cast<std::size_t>(k));
    std::vector<bool> is_chosen(n, false);
    std::vector<double> min_d2(n, std::numeric_limits<double>::infinity());
    std::vector<double> cumulative(n);

    auto draw = [&](auto&& mass_of) -> std::size_t {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            total += mass_of(i);
            cumulative[i] = total;
        }
        if (!(total > 0.0)) return n;  // nothing drawable under this mass
        const double u = rng.uniform01() * total;
        std::size_t idx =
            static_cast<std::size_t>(std::upper_bound(cumulative.begin(), cumulative.end(), u) - cumulative.begin());
        if (idx >= n) idx = n - 1;
        // Rounding can land on a zero-mass slot; step to the next live one.
        while (idx < n && mass_of(idx) <= 0.0) ++idx;
        if (idx >= n) {
            idx = n - 1;
            while (idx > 0 && mass_of(idx) <= 0.0) --idx;
        }
        return idx;
    };

    while (chosen.size() < static_cast<std::size_t>(k)) {
        std::size_t next;
        if (chosen.empty()) {
            next = draw([&](std::size_t i) { return weights[i]; });
        } else {
            next = draw([&](std::size_t i) { return is_chosen[i] ? 0.0 : weights[i] * min_d2[i]; });
            if (next == n)  // all remaining mass vanished (duplicate locations)
                next = draw([&](std::size_t i) { return is_chosen[i] ? 0.0 : weights[i]; });
        }
        is_chosen[next] = true;
        chosen.push_back(next);
        const double* cx = &locations[next * dim];
        for (std::size_t i = 0; i < n; ++i) {
            double sqd = 0.0;
            const double* x = &locations[i * dim];
            for (std::size_t j = 0; j < dim; ++j) {
                const double diff = x[j] - cx[j];
                sqd += diff * diff;
            }
            min_d2[i] = std::min(min_d2[i], sqd);
        }
    }
    return chosen;
}

std::vector<std::vector<double>> kmeanspp_init(const std::vector<BetulaFeature>& inputs, int k,
                                               std::uint64_t seed) {
    if (inputs.empty()) throw std::invalid_argument("kmeanspp: inputs must be nonempty");
    const std::size_t d = inputs.front().dim();
    std::vector<double> locations(inputs.size() * d);
    std::vector<double> weights(inputs.size());
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        if (inputs[i].dim() != d) throw std::invalid_argument("kmeanspp: dimensionality mismatch");
        std::copy_n(inputs[i].mean.begin(), d, locations.begin() + static_cast<std::ptrdiff_t>(i * d));
        weights[i] = inputs[i].weight;
    }
    const auto idx = kmeanspp_indices(locations, d, weights, k, seed);
    std::vector<std::vector<double>> centers;
    centers.reserve(idx.size());
    for (std::size_t i : idx) centers.push_back(inputs[i].mean);
    return centers;
}

MixtureModel fit_features(const std::vector<BetulaFeature>& inputs, ModelKind kind, const EmOptions& options) {
    if (inputs.empty()) throw std::invalid_argument("fit_features: inputs must be nonempty");
    const std::size_t d = inputs.front().dim();
    EmData data;
    data.n = inputs.size();
    data.d = d;
    data.locations.resize(data.n * d);
    data.weights.resize(data.n);
    data.fvar.resize(data.n * d);
    data.fvar_sph.resize(data.n);
    for (std::size_t i = 0; i < data.n; ++i) {
        const BetulaFeature& f = inputs[i];
        if (f.dim() != d) throw std::invalid_argument("fit_features: dimensionality mismatch");
        if (!(f.weight > 0.0)) throw std::invalid_argument("fit_features: features must be nonempty");
        std::copy_n(f.mean.begin(), d, data.locations.begin() + static_cast<std::ptrdiff_t>(i * d));
        data.weights[i] = f.weight;
        double sph = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            const double v = f.sq_dev[j] / f.weight;
            data.fvar[i * d + j] = v;
            sph += v;
            if (v > 0.0) data.has_internal_variance = true;
        }
        data.fvar_sph[i] = sph / static_cast<double>(d);
    }
    return EmEngine(data, kind, MStepRoute::Merge, options).run();
}

MixtureModel fit_features(const std::vector<BirchFeature>& inputs, const EmOptions& options) {
    if (inputs.empty()) throw std::invalid_argument("fit_features: inputs must be nonempty");
    const std::size_t d = inputs.front().dim();
    EmData data;
    data.n = inputs.size();
    data.d = d;
    data.locations.resize(data.n * d);
    data.weights.resize(data.n);
    data.fvar.resize(data.n * d);
    data.fvar_sph.resize(data.n);
    data.ls.resize(data.n * d);
    data.ss.resize(data.n);
    std::uint64_t conversion_flags = 0;
    for (std::size_t i = 0; i < data.n; ++i) {
        const BirchFeature& f = inputs[i];
        if (f.dim() != d) throw std::invalid_argument("fit_features: dimensionality mismatch");
        if (f.count <= 0) throw std::invalid_argument("fit_features: features must be nonempty");
        const double n = static_cast<double>(f.count);
        for (std::size_t j = 0; j < d; ++j) {
            data.ls[i * d + j] = f.linear_sum[j];
            data.locations[i * d + j] = f.linear_sum[j] / n;
        }
        data.ss[i] = f.sum_squares;
        data.weights[i] = n;
        const auto var = f.variance();
        if (var.cancellation) ++conversion_flags;
        const double sph = std::max(var.value, 0.0) / static_cast<double>(d);
        data.fvar_sph[i] = sph;
        for (std::size_t j = 0; j < d; ++j) data.fvar[i * d + j] = sph;
        if (sph > 0.0) data.has_internal_variance = true;
    }
    MixtureModel model = EmEngine(data, ModelKind::Spherical, MStepRoute::ClassicMoments, options).run();
    model.cancellation_flags += conversion_flags;
    return model;
}

MixtureModel fit_points(std::span<const double> coords, std::size_t dim, std::span<const double> weights,
                        ModelKind kind, VarianceBackend backend, const EmOptions& options) {
    if (dim == 0 || coords.size() % dim != 0) throw std::invalid_argument("fit_points: bad coordinate layout");
    const std::size_t n = coords.size() / dim;
    if (!weights.empty() && weights.size() != n)
        throw std::invalid_argument("fit_points: weights size mismatch");
    if (!all_finite(coords)) throw std::invalid_argument("fit_points: non-finite coordinate");
    EmData data;
    data.n = n;
    data.d = dim;
    data.locations.assign(coords.begin(), coords.end());
    if (weights.empty())
        data.weights.assign(n, 1.0);
    else
        data.weights.assign(weights.begin(), weights.end());
    const MStepRoute route = backend == VarianceBackend::Stable ? MStepRoute::Merge : MStepRoute::Moments;
    return EmEngine(data, kind, route, options).run();
}

Likelihood log_likelihood(const MixtureModel& model, std::span<const double> coords) {
    const std::size_t d = model.dim;
    if (d == 0 || coords.size() % d != 0) throw std::invalid_argument("log_likelihood: bad coordinate layout");
    const std::size_t n = coords.size() / d;
    const std::size_t k = model.components.size();

    std::vector<double> log_norm(k), inv2v;
    const bool spherical = model.kind == ModelKind::Spherical;
    if (spherical) {
        inv2v.resize(k);
        for (std::size_t c = 0; c < k; ++c) {
            const double v = model.components[c].variance[0];
            log_norm[c] =
                std::log(model.components[c].weight) - 0.5 * static_cast<double>(d) * (kLog2Pi + std::log(v));
            inv2v[c] = 0.5 / v;
        }
    } else {
        inv2v.resize(k * d);
        for (std::size_t c = 0; c < k; ++c) {
            double acc = 0.0;
            for (std::size_t j = 0; j < d; ++j) {
                const double v = model.components[c].variance[j];
                acc += kLog2Pi + std::log(v);
                inv2v[c * d + j] = 0.5 / v;
            }
            log_norm[c] = std::log(model.components[c].weight) - 0.5 * acc;
        }
    }

    std::vector<double> lp(k);
    KahanSum total;
    for (std::size_t i = 0; i < n; ++i) {
        const double* x = &coords[i * d];
        for (std::size_t c = 0; c < k; ++c) {
            const double* m = model.components[c].mean.data();
            double acc = 0.0;
            if (spherical) {
                for (std::size_t j = 0; j < d; ++j) {
                    const double diff = x[j] - m[j];
                    acc += diff * diff;
                }
                acc *= inv2v[c];
            } else {
                for (std::size_t j = 0; j < d; ++j) {
                    const double diff = x[j] - m[j];
                    acc += diff * diff * inv2v[c * d + j];
                }
            }
            lp[c] = log_norm[c] - acc;
        }
        double max_lp = lp[0];
        for (std::size_t c = 1; c < k; ++c) max_lp = std::max(max_lp, lp[c]);
        double sum = 0.0;
        for (std::size_t c = 0; c < k; ++c) sum += std::exp(lp[c] - max_lp);
        total.add(max_lp + std::log(sum));
    }
    Likelihood out;
    out.total = total.value();
    out.per_point = n ? out.total / static_cast<double>(n) : 0.0;
    return out;
}

std::vector<double> responsibilities(const MixtureModel& model, std::span<const double> x,
                                     std::span<const double> internal_variance) {
    const std::size_t d = model.dim;
    if (x.size() != d) throw std::invalid_argument("responsibilities: dimensionality mismatch");
    if (!internal_variance.empty() && internal_variance.size() != d)
        throw std::invalid_argument("responsibilities: internal variance dimensionality mismatch");
    const std::size_t k = model.components.size();

    double internal_sph = 0.0;
    if (!internal_variance.empty()) {
        for (double v : internal_variance) internal_sph += v;
        internal_sph /= static_cast<double>(d);
    }

    std::vector<double> lp(k);
    for (std::size_t c = 0; c < k; ++c) {
        const GaussianComponent& g = model.components[c];
        double acc = 0.0;
        if (model.kind == ModelKind::Spherical) {
            const double v = g.variance[0] + internal_sph;
            double sqd = 0.0;
            for (std::size_t j = 0; j < d; ++j) {
                const double diff = x[j] - g.mean[j];
                sqd += diff * diff;
            }
            acc = static_cast<double>(d) * (kLog2Pi + std::log(v)) + sqd / v;
        } else {
            for (std::size_t j = 0; j < d; ++j) {
                const double v = g.variance[j] + (internal_variance.empty() ? 0.0 : internal_variance[j]);
                const double diff = x[j] - g.mean[j];
                acc += kLog2Pi + std::log(v) + diff * diff / v;
            }
        }
        lp[c] = std::log(g.weight) - 0.5 * acc;
    }
    double max_lp = lp[0];
    for (std::size_t c = 1; c < k; ++c) max_lp = std::max(max_lp, lp[c]);
    double sum = 0.0;
    std::vector<double> r(k);
    for (std::size_t c = 0; c < k; ++c) {
        r[c] = std::exp(lp[c] - max_lp);
        sum += r[c];
    }
    for (double& v : r) v /= sum;
    return r;
}

std::string to_text(const MixtureModel& model) {
    std::string out;
    for (const GaussianComponent& g : model.components) {
        out += format_double(g.weight);
        out += ';';
        for (std::size_t j = 0; j < g.mean.size(); ++j) {
            if (j) out += ',';
            out += format_double(g.mean[j]);
        }
        out += ';';
        for (std::size_t j = 0; j < g.variance.size(); ++j) {
            if (j) out += ',';
            out += format_double(g.variance[j]);
        }
        out += '\n';
    }
    return out;
}

std::string trace_csv(const MixtureModel& model) {
    std::string out = "iteration,total,per_point\n";
    for (std::size_t i = 0; i < model.trace.size(); ++i) {
        out += std::to_string(i);
        out += ',';
        out += format_double(model.trace[i]);
        out += ',';
        out += format_double(model.training_weight > 0.0 ? model.trace[i] / model.training_weight : 0.0);
        out += '\n';
    }
    return out;
}

}  // namespace betula
