#pragma once

#include <string>
#include <string_view>

#include "betula/cluster_features.hpp"

namespace betula {

enum class DistanceKind { D0, D1, D2, D3, D4 };

enum class AbsorptionKind {
    Radius,          // average distance to the merged center
    Diameter,        // average pairwise distance in the merged set; identical to D3
    CenterDistance,  // Euclidean distance between the two centers
};

enum class MetricForm { Birch, Betula };

// Every metric call returns its value plus a per-call diagnostic. For the
// BirchFeature forms, `cancellation` reports a radicand that evaluated <= 0
// where a spread-carrying input (two or more points) makes a positive value
// expected; the value is clamped to 0 so callers never see NaN. Constant
// inputs legitimately reach 0 and also set the flag -- the summaries cannot
// distinguish the two cases. BetulaFeature forms only sum nonnegative terms
// and never set the flag.
struct MetricValue {
    double value = 0.0;
    bool cancellation = false;
};

// Distances between two features, stable form:
//   D0 = ||mu_a - mu_b||
//   D1 = ||mu_a - mu_b||_1
//   D2 = sqrt(S_a/n_a + S_b/n_b + ||mu_a - mu_b||^2)
//   D3 = sqrt(2 (n_ab (S_a + S_b) + n_a n_b ||mu_a - mu_b||^2) / (n_ab (n_ab - 1)))
//   D4 = sqrt(n_a n_b / n_ab) ||mu_a - mu_b||
// with S the scalar total of squared deviations. Requires both features
// nonempty; D3 additionally requires n_ab > 1.
MetricValue distance(DistanceKind kind, const BetulaFeature& a, const BetulaFeature& b);

// Distances in the original one-pass algebra on (N, LS, SS). D2-D4 subtract
// nearly equal squares and may cancel; negative radicands clamp to 0 with
// the flag set.
MetricValue distance(DistanceKind kind, const BirchFeature& a, const BirchFeature& b);

// Absorption criteria on a pair of stable features:
//   Radius   = sqrt((S_a + S_b + (n_a n_b / n_ab) ||mu_a - mu_b||^2) / n_ab)
//   Diameter = D3(a, b), shared code path
//   CenterDistance = D0(a, b)
MetricValue absorption(AbsorptionKind kind, const BetulaFeature& a, const BetulaFeature& b);

// Absorption on an already-merged classic feature, matching the original
// architecture. CenterDistance needs the pair and is a domain error here;
// use the pair overload below.
MetricValue absorption(AbsorptionKind kind, const BirchFeature& merged);

// Pair-level convenience: virtually merges for Radius/Diameter, evaluates
// the center distance directly for CenterDistance.
MetricValue absorption(AbsorptionKind kind, const BirchFeature& a, const BirchFeature& b);

DistanceKind parse_distance_kind(std::string_view text);    // "d0".."d4"
AbsorptionKind parse_absorption_kind(std::string_view text);  // "r" | "d" | "e"
MetricForm parse_metric_form(std::string_view text);          // "birch" | "betula"

std::string_view to_string(DistanceKind kind);
std::string_view to_string(AbsorptionKind kind);
std::string_view to_string(MetricForm form);

}  // namespace betula
