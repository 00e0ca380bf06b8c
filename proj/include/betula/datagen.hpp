#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

namespace betula {

struct LabeledPoints {
    std::size_t dim = 0;
    std::vector<double> coords;       // n x dim, row-major
    std::vector<std::int32_t> labels;  // generating cluster per point

    std::size_t size() const { return dim ? coords.size() / dim : 0; }
    std::span<const double> point(std::size_t i) const { return {coords.data() + i * dim, dim}; }
};

// Two Gaussian clusters in R^3 with fixed per-axis standard deviations
// (4/3, 1, 3/4). `shift` places them either symmetrically at +-shift/2 on
// the first axis (Separation, the default: the x-axis of the stability
// sweep) or as a rigid offset (shift, shift, shift) with a fixed gap of 10
// on the first axis (Offset). The noise stream depends only on the seed,
// so runs at different shifts see identically-shaped clouds.
struct ShiftSpec {
    std::size_t points_per_cluster = 15000;
    double shift = 0.0;
    enum class Mode { Separation, Offset } mode = Mode::Separation;
    std::uint64_t seed = 1;
};

inline constexpr std::array<double, 3> kShiftSigmas{4.0 / 3.0, 1.0, 0.75};

// 10x10 lattice of clusters with spacing 5 (means exactly {0,5,...,45}^2).
// Per-cluster, per-attribute variances are drawn from N(1, 0.25) (0.25 read
// as the standard deviation of the draw) and clamped to at least 0.01.
struct GridSpec {
    std::size_t points_per_cluster = 10000;
    double multiplier = 1.0;
    std::uint64_t seed = 1;
};

// 100 clusters in a 50x50 area, means scattered by Halton sampling in
// bases (2, 3); variances drawn from N(1, 0.15), sizes uniform in
// [5000, 15000] before the multiplier.
struct RandomSpec {
    double multiplier = 1.0;
    std::uint64_t seed = 1;
};

LabeledPoints gen_shift(const ShiftSpec& spec);
LabeledPoints gen_grid(const GridSpec& spec);
LabeledPoints gen_random(const RandomSpec& spec);

// Radical-inverse of `index` in the given base; in [0, 1).
double halton(std::uint64_t index, std::uint32_t base);

}  // namespace betula
