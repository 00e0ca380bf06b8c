#include "betula/datagen.hpp"

#include <cmath>
#include <stdexcept>

#include "betula/rng.hpp"

namespace betula {

namespace {

// Appends one Gaussian cluster; its rng is derived from (seed, label) so
// clusters are independent of each other and of global draw order.
void append_cluster(LabeledPoints& out, std::int32_t label, std::span<const double> center,
                    std::span<const double> sigma, std::size_t count, std::uint64_t seed) {
    Rng rng = Rng::child(seed, static_cast<std::uint64_t>(label));
    for (std::size_t p = 0; p < count; ++p) {
        for (std::size_t j = 0; j < out.dim; ++j) out.coords.push_back(center[j] + sigma[j] * rng.normal());
        out.labels.push_back(label);
    }
}

std::size_t scaled(std::size_t base, double multiplier) {
    const double v = static_cast<double>(base) * multiplier;
    return v < 1.0 ? 1 : static_cast<std::size_t>(std::llround(v));
}

}  // namespace

LabeledPoints gen_shift(const ShiftSpec& spec) {
    if (!(spec.shift >= 0.0)) throw std::invalid_argument("gen_shift: shift must be >= 0");
    LabeledPoints out;
    out.dim = 3;
    out.coords.reserve(2 * spec.points_per_cluster * 3);
    out.labels.reserve(2 * spec.points_per_cluster);

    std::array<double, 3> c0{}, c1{};
    if (spec.mode == ShiftSpec::Mode::Separation) {
        c0 = {-spec.shift / 2.0, 0.0, 0.0};
        c1 = {spec.shift / 2.0, 0.0, 0.0};
    } else {
        c0 = {spec.shift, spec.shift, spec.shift};
        c1 = {spec.shift + 10.0, spec.shift, spec.shift};
    }
    append_cluster(out, 0, c0, kShiftSigmas, spec.points_per_cluster, spec.seed);
    append_cluster(out, 1, c1, kShiftSigmas, spec.points_per_cluster, spec.seed);
    return out;
}

LabeledPoints gen_grid(const GridSpec& spec) {
    LabeledPoints out;
    out.dim = 2;
    const std::size_t per_cluster = scaled(spec.points_per_cluster, spec.multiplier);
    out.coords.reserve(100 * per_cluster * 2);
    out.labels.reserve(100 * per_cluster);

    std::int32_t label = 0;
    for (int gx = 0; gx < 10; ++gx) {
        for (int gy = 0; gy < 10; ++gy, ++label) {
            // variance draws come first in the cluster's stream
            Rng rng = Rng::child(spec.seed, static_cast<std::uint64_t>(label));
            std::array<double, 2> sigma{};
            for (double& s : sigma) {
                const double variance = std::max(1.0 + 0.25 * rng.normal(), 0.01);
                s = std::sqrt(variance);
            }
            const std::array<double, 2> center{5.0 * gx, 5.0 * gy};
            for (std::size_t p = 0; p < per_cluster; ++p) {
                out.coords.push_back(center[0] + sigma[0] * rng.normal());
                out.coords.push_back(center[1] + sigma[1] * rng.normal());
                out.labels.push_back(label);
            }
        }
    }
    return out;
}

LabeledPoints gen_random(const RandomSpec& spec) {
    LabeledPoints out;
    out.dim = 2;

    // Cluster sizes come from the master stream; coordinates from child
    // streams, as in the other generators.
    Rng master(spec.seed);
    std::array<std::size_t, 100> sizes{};
    for (std::size_t& s : sizes) s = scaled(5000 + master.uniform_below(10001), spec.multiplier);

    for (std::int32_t label = 0; label < 100; ++label) {
        // index 0 of the radical inverse is the origin; start at 1
        const std::array<double, 2> center{50.0 * halton(static_cast<std::uint64_t>(label) + 1, 2),
                                           50.0 * halton(static_cast<std::uint64_t>(label) + 1, 3)};
        Rng rng = Rng::child(spec.seed, static_cast<std::uint64_t>(label));
        std::array<double, 2> sigma{};
        for (double& s : sigma) {
            const double variance = std::max(1.0 + 0.15 * rng.normal(), 0.01);
            s = std::sqrt(variance);
        }
        for (std::size_t p = 0; p < sizes[static_cast<std::size_t>(label)]; ++p) {
            out.coords.push_back(center[0] + sigma[0] * rng.normal());
            out.coords.push_back(center[1] + sigma[1] * rng.normal());
            out.labels.push_back(label);
        }
    }
    return out;
}

double halton(std::uint64_t index, std::uint32_t base) {
    if (base < 2) throw std::invalid_argument("halton: base must be >= 2");
    double f = 1.0;
    double r = 0.0;
    while (index > 0) {
        f /= static_cast<double>(base);
        r += f * static_cast<double>(index % base);
        index /= base;
    }
    return r;
}

}  // namespace betula
