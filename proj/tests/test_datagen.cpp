#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <map>

#include "betula/cluster_features.hpp"
#include "betula/csv.hpp"
#include "betula/datagen.hpp"
#include "oracles.hpp"

using namespace betula;

namespace {

// per-label sample mean and variance
struct ClusterStats {
    std::size_t count = 0;
    std::vector<double> mean;
    std::vector<double> var;
};

std::map<std::int32_t, ClusterStats> per_cluster(const LabeledPoints& data) {
    std::map<std::int32_t, oracle::Points> groups;
    for (std::size_t i = 0; i < data.size(); ++i) {
        auto& g = groups[data.labels[i]];
        g.dim = data.dim;
        g.pts.emplace_back(data.point(i).begin(), data.point(i).end());
    }
    std::map<std::int32_t, ClusterStats> out;
    for (auto& [label, pts] : groups) {
        ClusterStats s;
        s.count = pts.pts.size();
        s.mean = oracle::mean(pts);
        s.var = oracle::sse(pts);
        for (double& v : s.var) v /= static_cast<double>(s.count);
        out[label] = s;
    }
    return out;
}

}  // namespace

TEST_CASE("radical inverse values") {
    CHECK(halton(0, 2) == 0.0);
    CHECK(halton(1, 2) == 0.5);
    CHECK(halton(2, 2) == 0.25);
    CHECK(halton(3, 2) == 0.75);
    CHECK(halton(1, 3) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    CHECK(halton(2, 3) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
    CHECK(halton(4, 2) == 0.125);
    CHECK_THROWS_AS(halton(1, 1), std::invalid_argument);
    for (std::uint64_t i = 0; i < 1000; ++i) {
        const double v = halton(i, 5);
        CHECK(v >= 0.0);
        CHECK(v < 1.0);
    }
}

TEST_CASE("shift dataset shape and statistics") {
    ShiftSpec spec;
    spec.points_per_cluster = 1000;
    spec.shift = 0.0;
    spec.seed = 5;
    const LabeledPoints data = gen_shift(spec);
    CHECK(data.dim == 3);
    CHECK(data.size() == 2000);

    const auto stats = per_cluster(data);
    REQUIRE(stats.size() == 2);
    for (const auto& [label, s] : stats) {
        CHECK(s.count == 1000);
        for (std::size_t j = 0; j < 3; ++j) {
            const double sigma = kShiftSigmas[j];
            CHECK(std::fabs(s.mean[j]) <= 4.0 * sigma / std::sqrt(1000.0));  // center is the origin
            CHECK(std::fabs(std::sqrt(s.var[j]) - sigma) <= 0.1 * sigma);
        }
    }
}

TEST_CASE("shift dataset translates the identical noise stream") {
    ShiftSpec base;
    base.points_per_cluster = 2000;
    base.shift = 0.0;
    base.seed = 11;
    ShiftSpec far = base;
    far.shift = 1e8;

    const LabeledPoints a = gen_shift(base);
    const LabeledPoints b = gen_shift(far);
    const auto sa = per_cluster(a);
    const auto sb = per_cluster(b);
    for (std::int32_t label : {0, 1}) {
        for (std::size_t j = 0; j < 3; ++j)
            CHECK(oracle::rel_err(sb.at(label).var[j], sa.at(label).var[j]) <= 1e-6);
        // centers moved to -shift/2 and +shift/2 on the first axis
        const double expected = label == 0 ? -5e7 : 5e7;
        CHECK(std::fabs(sb.at(label).mean[0] - expected) <= 1.0);
    }

    ShiftSpec offset_mode = base;
    offset_mode.shift = 100.0;
    offset_mode.mode = ShiftSpec::Mode::Offset;
    const auto so = per_cluster(gen_shift(offset_mode));
    CHECK(std::fabs(so.at(0).mean[0] - 100.0) <= 0.2);
    CHECK(std::fabs(so.at(1).mean[0] - 110.0) <= 0.2);
    CHECK(std::fabs(so.at(1).mean[1] - 100.0) <= 0.2);

    ShiftSpec tiny = base;
    tiny.points_per_cluster = 1;
    CHECK(gen_shift(tiny).size() == 2);
}

TEST_CASE("generation is deterministic per seed") {
    ShiftSpec spec;
    spec.points_per_cluster = 500;
    spec.shift = 3.0;
    spec.seed = 77;
    const LabeledPoints a = gen_shift(spec);
    const LabeledPoints b = gen_shift(spec);
    CHECK(a.coords == b.coords);
    CHECK(a.labels == b.labels);
    CHECK(points_to_csv(a) == points_to_csv(b));

    spec.seed = 78;
    CHECK(gen_shift(spec).coords != a.coords);

    GridSpec grid;
    grid.multiplier = 0.02;
    grid.seed = 3;
    CHECK(points_to_csv(gen_grid(grid)) == points_to_csv(gen_grid(grid)));

    RandomSpec rnd;
    rnd.multiplier = 0.01;
    rnd.seed = 3;
    CHECK(points_to_csv(gen_random(rnd)) == points_to_csv(gen_random(rnd)));
}

TEST_CASE("grid dataset lattice and sizes") {
    GridSpec spec;
    spec.multiplier = 0.01;  // 100 points per cluster
    spec.seed = 9;
    const LabeledPoints data = gen_grid(spec);
    CHECK(data.dim == 2);
    CHECK(data.size() == 100 * 100);

    const auto stats = per_cluster(data);
    REQUIRE(stats.size() == 100);
    for (const auto& [label, s] : stats) {
        CHECK(s.count == 100);
        const double cx = 5.0 * (label / 10);
        const double cy = 5.0 * (label % 10);
        // loose 5-sigma mean bound; per-axis sigma is at most ~1.9
        CHECK(std::fabs(s.mean[0] - cx) <= 1.0);
        CHECK(std::fabs(s.mean[1] - cy) <= 1.0);
    }
}

TEST_CASE("grid cluster variances track their draws") {
    GridSpec spec;
    spec.multiplier = 0.1;  // 1000 points per cluster
    spec.seed = 21;
    const auto stats = per_cluster(gen_grid(spec));
    double mean_var = 0.0;
    for (const auto& [label, s] : stats) {
        for (double v : s.var) {
            CHECK(v > 0.005);  // draws are clamped at 0.01
            CHECK(v < 2.5);    // N(1, 0.25) tail plus estimation noise
            mean_var += v;
        }
    }
    mean_var /= 200.0;
    CHECK(std::fabs(mean_var - 1.0) <= 0.15);
}

TEST_CASE("random dataset geometry") {
    RandomSpec spec;
    spec.multiplier = 0.01;
    spec.seed = 13;
    const LabeledPoints data = gen_random(spec);
    CHECK(data.dim == 2);

    const auto stats = per_cluster(data);
    REQUIRE(stats.size() == 100);
    for (const auto& [label, s] : stats) {
        CHECK(s.count >= 50);   // 5000 x 0.01
        CHECK(s.count <= 150);  // 15000 x 0.01
        CHECK(s.mean[0] >= -1.0);
        CHECK(s.mean[0] <= 51.0);
        CHECK(s.mean[1] >= -1.0);
        CHECK(s.mean[1] <= 51.0);
    }

    // first cluster sits at the first radical-inverse pair (1/2, 1/3) * 50
    CHECK(std::fabs(stats.at(0).mean[0] - 25.0) <= 0.75);
    CHECK(std::fabs(stats.at(0).mean[1] - 50.0 / 3.0) <= 0.75);
}

TEST_CASE("size multiplier scales every cluster") {
    RandomSpec small;
    small.multiplier = 0.01;
    small.seed = 2;
    RandomSpec large = small;
    large.multiplier = 0.02;
    const auto a = per_cluster(gen_random(small));
    const auto b = per_cluster(gen_random(large));
    for (const auto& [label, s] : a) {
        const double ratio = static_cast<double>(b.at(label).count) / static_cast<double>(s.count);
        CHECK(ratio >= 1.8);
        CHECK(ratio <= 2.2);
    }
}
