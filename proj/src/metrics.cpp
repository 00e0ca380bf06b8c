#include "betula/metrics.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace betula {

namespace {

void require_nonempty(double n, const char* measure) {
    if (!(n > 0.0)) throw std::domain_error(std::string(measure) + ": feature must be nonempty");
}

void require_same_dim(std::size_t a, std::size_t b, const char* measure) {
    if (a != b) throw std::invalid_argument(std::string(measure) + ": dimensionality mismatch");
}

// Clamp-and-flag for the cancellation-prone radicands. `spread_bearing`
// is false for single-point inputs, whose radicand is legitimately zero.
MetricValue sqrt_clamped(double radicand, bool spread_bearing) {
    if (radicand <= 0.0) return {0.0, spread_bearing};
    return {std::sqrt(radicand), false};
}

}  // namespace

MetricValue distance(DistanceKind kind, const BetulaFeature& a, const BetulaFeature& b) {
    require_same_dim(a.dim(), b.dim(), "distance");
    const double n_a = a.weight;
    const double n_b = b.weight;
    switch (kind) {
        case DistanceKind::D0:
            require_nonempty(n_a, "d0");
            require_nonempty(n_b, "d0");
            return {std::sqrt(sq_dist(a.mean, b.mean)), false};
        case DistanceKind::D1:
            require_nonempty(n_a, "d1");
            require_nonempty(n_b, "d1");
            return {l1_dist(a.mean, b.mean), false};
        case DistanceKind::D2: {
            require_nonempty(n_a, "d2");
            require_nonempty(n_b, "d2");
            const double v = a.sq_dev_total() / n_a + b.sq_dev_total() / n_b + sq_dist(a.mean, b.mean);
            return {std::sqrt(v), false};
        }
        case DistanceKind::D3: {
            require_nonempty(n_a, "d3");
            require_nonempty(n_b, "d3");
            const double n_ab = n_a + n_b;
            if (!(n_ab > 1.0)) throw std::domain_error("d3: combined weight must exceed 1");
            const double v = 2.0 * (n_ab * (a.sq_dev_total() + b.sq_dev_total()) + n_a * n_b * sq_dist(a.mean, b.mean)) /
                             (n_ab * (n_ab - 1.0));
            return {std::sqrt(v), false};
        }
        case DistanceKind::D4: {
            require_nonempty(n_a, "d4");
            require_nonempty(n_b, "d4");
            const double n_ab = n_a + n_b;
            return {std::sqrt(n_a * n_b / n_ab * sq_dist(a.mean, b.mean)), false};
        }
    }
    throw std::logic_error("distance: unknown kind");
}

MetricValue distance(DistanceKind kind, const BirchFeature& a, const BirchFeature& b) {
    require_same_dim(a.dim(), b.dim(), "distance");
    const double n_a = static_cast<double>(a.count);
    const double n_b = static_cast<double>(b.count);
    switch (kind) {
        case DistanceKind::D0:
        case DistanceKind::D1: {
            require_nonempty(n_a, kind == DistanceKind::D0 ? "d0" : "d1");
            require_nonempty(n_b, kind == DistanceKind::D0 ? "d0" : "d1");
            double acc = 0.0;
            for (std::size_t i = 0; i < a.dim(); ++i) {
                const double d = a.linear_sum[i] / n_a - b.linear_sum[i] / n_b;
                acc += kind == DistanceKind::D0 ? d * d : std::fabs(d);
            }
            return {kind == DistanceKind::D0 ? std::sqrt(acc) : acc, false};
        }
        case DistanceKind::D2: {
            require_nonempty(n_a, "d2");
            require_nonempty(n_b, "d2");
            const double radicand =
                (n_b * a.sum_squares + n_a * b.sum_squares - 2.0 * dot(a.linear_sum, b.linear_sum)) / (n_a * n_b);
            return sqrt_clamped(radicand, a.count + b.count >= 2);
        }
        case DistanceKind::D3: {
            require_nonempty(n_a, "d3");
            require_nonempty(n_b, "d3");
            const double n_ab = n_a + n_b;
            if (!(n_ab > 1.0)) throw std::domain_error("d3: combined count must exceed 1");
            double sum_sq = 0.0;
            for (std::size_t i = 0; i < a.dim(); ++i) {
                const double s = a.linear_sum[i] + b.linear_sum[i];
                sum_sq += s * s;
            }
            const double radicand = 2.0 * (a.sum_squares + b.sum_squares - sum_sq / n_ab) / (n_ab - 1.0);
            return sqrt_clamped(radicand, true);
        }
        case DistanceKind::D4: {
            require_nonempty(n_a, "d4");
            require_nonempty(n_b, "d4");
            const double n_ab = n_a + n_b;
            double sum_sq = 0.0;
            for (std::size_t i = 0; i < a.dim(); ++i) {
                const double s = a.linear_sum[i] + b.linear_sum[i];
                sum_sq += s * s;
            }
            const double radicand = sq_norm(a.linear_sum) / n_a + sq_norm(b.linear_sum) / n_b - sum_sq / n_ab;
            return sqrt_clamped(radicand, a.count + b.count >= 2);
        }
    }
    throw std::logic_error("distance: unknown kind");
}

MetricValue absorption(AbsorptionKind kind, const BetulaFeature& a, const BetulaFeature& b) {
    require_same_dim(a.dim(), b.dim(), "absorption");
    switch (kind) {
        case AbsorptionKind::Radius: {
            require_nonempty(a.weight, "radius");
            require_nonempty(b.weight, "radius");
            const double n_ab = a.weight + b.weight;
            const double v =
                (a.sq_dev_total() + b.sq_dev_total() + a.weight * b.weight / n_ab * sq_dist(a.mean, b.mean)) / n_ab;
            return {std::sqrt(v), false};
        }
        case AbsorptionKind::Diameter:
            return distance(DistanceKind::D3, a, b);
        case AbsorptionKind::CenterDistance:
            return distance(DistanceKind::D0, a, b);
    }
    throw std::logic_error("absorption: unknown kind");
}

MetricValue absorption(AbsorptionKind kind, const BirchFeature& merged) {
    const double n = static_cast<double>(merged.count);
    switch (kind) {
        case AbsorptionKind::Radius: {
            require_nonempty(n, "radius");
            const double radicand = (merged.sum_squares - sq_norm(merged.linear_sum) / n) / n;
            return sqrt_clamped(radicand, merged.count >= 2);
        }
        case AbsorptionKind::Diameter: {
            if (merged.count < 2) throw std::domain_error("diameter: merged count must be at least 2");
            const double radicand = 2.0 * (merged.sum_squares - sq_norm(merged.linear_sum) / n) / (n - 1.0);
            return sqrt_clamped(radicand, true);
        }
        case AbsorptionKind::CenterDistance:
            throw std::domain_error("center-distance absorption needs the feature pair, not the merged feature");
    }
    throw std::logic_error("absorption: unknown kind");
}

MetricValue absorption(AbsorptionKind kind, const BirchFeature& a, const BirchFeature& b) {
    if (kind == AbsorptionKind::CenterDistance) return distance(DistanceKind::D0, a, b);
    require_nonempty(static_cast<double>(a.count), "absorption");
    require_nonempty(static_cast<double>(b.count), "absorption");
    return absorption(kind, merge(a, b));
}

DistanceKind parse_distance_kind(std::string_view text) {
    if (text == "d0") return DistanceKind::D0;
    if (text == "d1") return DistanceKind::D1;
    if (text == "d2") return DistanceKind::D2;
    if (text == "d3") return DistanceKind::D3;
    if (text == "d4") return DistanceKind::D4;
    throw std::invalid_argument("unknown distance kind: " + std::string(text) + " (expected d0..d4)");
}

AbsorptionKind parse_absorption_kind(std::string_view text) {
    if (text == "r") return AbsorptionKind::Radius;
    if (text == "d") return AbsorptionKind::Diameter;
    if (text == "e") return AbsorptionKind::CenterDistance;
    throw std::invalid_argument("unknown absorption kind: " + std::string(text) + " (expected r|d|e)");
}

MetricForm parse_metric_form(std::string_view text) {
    if (text == "birch") return MetricForm::Birch;
    if (text == "betula") return MetricForm::Betula;
    throw std::invalid_argument("unknown metric form: " + std::string(text) + " (expected birch|betula)");
}

std::string_view to_string(DistanceKind kind) {
    switch (kind) {
        case DistanceKind::D0: return "d0";
        case DistanceKind::D1: return "d1";
        case DistanceKind::D2: return "d2";
        case DistanceKind::D3: return "d3";
        case DistanceKind::D4: return "d4";
    }
    return "?";
}

std::string_view to_string(AbsorptionKind kind) {
    switch (kind) {
        case AbsorptionKind::Radius: return "r";
        case AbsorptionKind::Diameter: return "d";
        case AbsorptionKind::CenterDistance: return "e";
    }
    return "?";
}

std::string_view to_string(MetricForm form) {
    return form == MetricForm::Birch ? "birch" : "betula";
}

}  // namespace betula
