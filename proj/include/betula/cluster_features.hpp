#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "betula/vec_ops.hpp"

namespace betula {

/// Classic clustering feature: point count N, per-dimension linear sum LS,
/// and the scalar sum of squared coordinate values SS. Additive under set
/// union. Deriving spread statistics from it uses E[X^2] - E[X]^2, which
/// cancels catastrophically once coordinates are large relative to the
/// spread; see variance().
struct BirchFeature {
    std::int64_t count = 0;
    std::vector<double> linear_sum;
    double sum_squares = 0.0;

    BirchFeature() = default;
    explicit BirchFeature(std::size_t dim) : linear_sum(dim, 0.0) {}

    static BirchFeature from_point(std::span<const double> x, std::int64_t w = 1) {
        require_finite(x, "BirchFeature::from_point");
        if (w <= 0) throw std::invalid_argument("BirchFeature::from_point: weight must be positive");
        BirchFeature f(x.size());
        f.count = w;
        for (std::size_t i = 0; i < x.size(); ++i) f.linear_sum[i] = static_cast<double>(w) * x[i];
        f.sum_squares = static_cast<double>(w) * sq_norm(x);
        return f;
    }

    std::size_t dim() const { return linear_sum.size(); }
    bool empty() const { return count == 0; }

    std::vector<double> center() const {
        if (count <= 0) throw std::domain_error("BirchFeature::center: empty feature");
        std::vector<double> c(linear_sum);
        for (double& v : c) v /= static_cast<double>(count);
        return c;
    }

    // In-place accumulate: componentwise sums. Merging an empty feature is a
    // bitwise no-op in either direction.
    void add(const BirchFeature& other) {
        if (other.count == 0) return;
        if (count == 0) {
            *this = other;
            return;
        }
        if (dim() != other.dim()) throw std::invalid_argument("BirchFeature::add: dimensionality mismatch");
        count += other.count;
        for (std::size_t i = 0; i < linear_sum.size(); ++i) linear_sum[i] += other.linear_sum[i];
        sum_squares += other.sum_squares;
    }

    struct Variance {
        double value;       // (1/N)*SS - ||LS/N||^2, returned unclamped
        bool cancellation;  // see note below
    };

    // Spread statistic via the one-pass identity. The raw value is returned
    // so that instability stays observable. For a multi-point feature a
    // non-positive result means either constant data or lost significant
    // digits; the summary cannot tell the two apart, so both set the flag.
    Variance variance() const {
        if (count <= 0) throw std::domain_error("BirchFeature::variance: empty feature");
        const double n = static_cast<double>(count);
        double mean_sq = 0.0;
        for (double v : linear_sum) {
            const double m = v / n;
            mean_sq += m * m;
        }
        const double raw = sum_squares / n - mean_sq;
        return {raw, count >= 2 && raw <= 0.0};
    }

    void round_to_single() {
        for (double& v : linear_sum) v = static_cast<double>(static_cast<float>(v));
        sum_squares = static_cast<double>(static_cast<float>(sum_squares));
    }
};

inline BirchFeature merge(const BirchFeature& a, const BirchFeature& b) {
    BirchFeature out = a;
    out.add(b);
    return out;
}

/// Replacement clustering feature: total weight n, mean vector, and the
/// per-dimension weighted sum of squared deviations from the mean. The
/// merge updates work on deviations only, so no large squares are ever
/// subtracted and the summary stays accurate far from the origin.
struct BetulaFeature {
    double weight = 0.0;
    std::vector<double> mean;
    std::vector<double> sq_dev;

    BetulaFeature() = default;
    explicit BetulaFeature(std::size_t dim) : mean(dim, 0.0), sq_dev(dim, 0.0) {}

    // A single point has zero deviation from its own mean.
    static BetulaFeature from_point(std::span<const double> x, double w = 1.0) {
        require_finite(x, "BetulaFeature::from_point");
        if (!(w > 0.0) || !std::isfinite(w))
            throw std::invalid_argument("BetulaFeature::from_point: weight must be positive and finite");
        BetulaFeature f(x.size());
        f.weight = w;
        f.mean.assign(x.begin(), x.end());
        return f;
    }

    std::size_t dim() const { return mean.size(); }
    bool empty() const { return weight == 0.0; }

    // Scalar total of the squared deviations (sum over dimensions).
    double sq_dev_total() const {
        double s = 0.0;
        for (double v : sq_dev) s += v;
        return s;
    }

    std::vector<double> variance() const {
        if (!(weight > 0.0)) throw std::domain_error("BetulaFeature::variance: empty feature");
        std::vector<double> v(sq_dev);
        for (double& x : v) x /= weight;
        return v;
    }

    // In-place accumulate:
    //   n_ab = n_a + n_b
    //   mu_ab = mu_a + (n_b/n_ab) (mu_b - mu_a)
    //   S_ab = S_a + S_b + n_b (mu_a - mu_b) (mu_ab - mu_b)   per dimension
    // Empty operands are identities (handled explicitly: the mean update
    // divides by n_ab). Rounding can leave a squared-deviation component a
    // hair below zero; residue within 1e-9 * n_ab * ||mu_ab||^2 is clamped
    // to 0, anything larger indicates corrupted inputs and throws.
    void add(const BetulaFeature& other) {
        if (other.weight == 0.0) return;
        if (weight == 0.0) {
            *this = other;
            return;
        }
        if (dim() != other.dim()) throw std::invalid_argument("BetulaFeature::add: dimensionality mismatch");
        const double n_ab = weight + other.weight;
        const double ratio = other.weight / n_ab;
        double mean_sq = 0.0;
        for (std::size_t i = 0; i < mean.size(); ++i) {
            const double mu_a = mean[i];
            const double mu_b = other.mean[i];
            const double mu_ab = mu_a + ratio * (mu_b - mu_a);
            mean[i] = mu_ab;
            sq_dev[i] += other.sq_dev[i] + other.weight * (mu_a - mu_b) * (mu_ab - mu_b);
            mean_sq += mu_ab * mu_ab;
        }
        const double tolerance = 1e-9 * n_ab * mean_sq;
        for (double& s : sq_dev) {
            if (s < 0.0) {
                if (s >= -tolerance)
                    s = 0.0;
                else
                    throw std::runtime_error("BetulaFeature::add: squared deviation went negative beyond rounding residue");
            }
        }
        weight = n_ab;
    }

    void round_to_single() {
        weight = static_cast<double>(static_cast<float>(weight));
        for (double& v : mean) v = static_cast<double>(static_cast<float>(v));
        for (double& v : sq_dev) v = static_cast<double>(static_cast<float>(v));
    }
};

inline BetulaFeature merge(const BetulaFeature& a, const BetulaFeature& b) {
    BetulaFeature out = a;
    out.add(b);
    return out;
}

}  // namespace betula
