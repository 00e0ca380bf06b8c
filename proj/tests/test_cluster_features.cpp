#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <array>
#include <cmath>
#include <vector>

#include "betula/cluster_features.hpp"
#include "betula/rng.hpp"
#include "oracles.hpp"

using namespace betula;

namespace {

BetulaFeature lift_all(const oracle::Points& p) {
    BetulaFeature acc;
    for (std::size_t i = 0; i < p.pts.size(); ++i) acc.add(BetulaFeature::from_point(p.pts[i], p.weight(i)));
    return acc;
}

oracle::Points random_points(Rng& rng, std::size_t dim, std::size_t n, double range) {
    oracle::Points p;
    p.dim = dim;
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> x(dim);
        for (double& v : x) v = (rng.uniform01() * 2.0 - 1.0) * range;
        p.pts.push_back(std::move(x));
    }
    return p;
}

}  // namespace

TEST_CASE("point lifting") {
    const std::array<double, 2> p34{3.0, 4.0};
    const BetulaFeature f = BetulaFeature::from_point(p34, 1.0);
    CHECK(f.weight == 1.0);
    CHECK(f.mean == std::vector<double>{3.0, 4.0});
    CHECK(f.sq_dev == std::vector<double>{0.0, 0.0});

    const std::array<double, 2> zero{0.0, 0.0};
    const BetulaFeature g = BetulaFeature::from_point(zero, 2.5);
    CHECK(g.weight == 2.5);
    CHECK(g.mean == std::vector<double>{0.0, 0.0});
    CHECK(g.sq_dev == std::vector<double>{0.0, 0.0});

    const std::array<double, 1> big{1e8};
    const BetulaFeature h = BetulaFeature::from_point(big, 1.0);
    CHECK(h.mean == std::vector<double>{1e8});
    CHECK(h.sq_dev == std::vector<double>{0.0});

    const std::array<double, 2> bad{1.0, std::numeric_limits<double>::infinity()};
    CHECK_THROWS_AS(BetulaFeature::from_point(bad, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(BetulaFeature::from_point(p34, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(BetulaFeature::from_point(p34, -1.0), std::invalid_argument);
}

TEST_CASE("classic point lifting") {
    const std::array<double, 2> p34{3.0, 4.0};
    const BirchFeature f = BirchFeature::from_point(p34);
    CHECK(f.count == 1);
    CHECK(f.linear_sum == std::vector<double>{3.0, 4.0});
    CHECK(f.sum_squares == 25.0);

    const std::array<double, 2> zero{0.0, 0.0};
    CHECK(BirchFeature::from_point(zero).sum_squares == 0.0);

    const std::array<double, 1> big{1e8};
    CHECK(BirchFeature::from_point(big).sum_squares == 1e16);

    const std::array<double, 1> bad{std::nan("")};
    CHECK_THROWS_AS(BirchFeature::from_point(bad), std::invalid_argument);
}

TEST_CASE("merge matches the two-pass oracle on a small set") {
    // {(0,0), (2,0)} then {(4,0)}
    oracle::Points pa;
    pa.dim = 2;
    pa.pts = {{0.0, 0.0}, {2.0, 0.0}};
    oracle::Points pb;
    pb.dim = 2;
    pb.pts = {{4.0, 0.0}};

    const BetulaFeature a = lift_all(pa);
    CHECK(a.weight == 2.0);
    CHECK(a.mean == std::vector<double>{1.0, 0.0});
    CHECK(a.sq_dev == std::vector<double>{2.0, 0.0});

    const BetulaFeature ab = merge(a, lift_all(pb));
    const auto m = oracle::mean(oracle::concat(pa, pb));
    const auto s = oracle::sse(oracle::concat(pa, pb));
    CHECK(m == std::vector<double>{2.0, 0.0});
    CHECK(s == std::vector<double>{8.0, 0.0});
    CHECK(ab.weight == 3.0);
    CHECK(ab.mean[0] == doctest::Approx(m[0]).epsilon(1e-12));
    CHECK(ab.sq_dev[0] == doctest::Approx(s[0]).epsilon(1e-12));
    CHECK(ab.sq_dev[1] == 0.0);
}

TEST_CASE("merge with the empty feature is bitwise identity") {
    BetulaFeature empty;
    BetulaFeature f;
    f.weight = 5.0;
    f.mean = {7.0};
    f.sq_dev = {3.0};

    const BetulaFeature left = merge(empty, f);
    CHECK(left.weight == 5.0);
    CHECK(left.mean == f.mean);
    CHECK(left.sq_dev == f.sq_dev);

    const BetulaFeature right = merge(f, empty);
    CHECK(right.weight == 5.0);
    CHECK(right.mean == f.mean);
    CHECK(right.sq_dev == f.sq_dev);
}

TEST_CASE("merge survives the large-offset stress pair") {
    const std::array<double, 1> x0{1e8};
    const std::array<double, 1> x1{1e8 + 1};
    const BetulaFeature ab = merge(BetulaFeature::from_point(x0, 1.0), BetulaFeature::from_point(x1, 1.0));
    CHECK(ab.weight == 2.0);
    CHECK(ab.mean[0] == 1e8 + 0.5);
    CHECK(ab.sq_dev[0] == 0.5);
}

TEST_CASE("classic merge is componentwise sums") {
    const std::array<double, 2> p34{3.0, 4.0};
    const std::array<double, 2> p10{1.0, 0.0};
    const BirchFeature ab = merge(BirchFeature::from_point(p34), BirchFeature::from_point(p10));
    CHECK(ab.count == 2);
    CHECK(ab.linear_sum == std::vector<double>{4.0, 4.0});
    CHECK(ab.sum_squares == 26.0);

    BirchFeature x = ab;
    x.add(BirchFeature{});
    CHECK(x.count == 2);
    CHECK(x.linear_sum == ab.linear_sum);

    // points {(0,0),(2,0)} plus {(4,0)}
    BirchFeature a(2);
    a.count = 2;
    a.linear_sum = {2.0, 0.0};
    a.sum_squares = 4.0;
    const std::array<double, 2> p40{4.0, 0.0};
    const BirchFeature sum = merge(a, BirchFeature::from_point(p40));
    CHECK(sum.count == 3);
    CHECK(sum.linear_sum == std::vector<double>{6.0, 0.0});
    CHECK(sum.sum_squares == 20.0);
}

TEST_CASE("dimensionality mismatch is a structural error") {
    const std::array<double, 2> p2{1.0, 2.0};
    const std::array<double, 3> p3{1.0, 2.0, 3.0};
    BetulaFeature a = BetulaFeature::from_point(p2, 1.0);
    CHECK_THROWS_AS(a.add(BetulaFeature::from_point(p3, 1.0)), std::invalid_argument);
    BirchFeature b = BirchFeature::from_point(p2);
    CHECK_THROWS_AS(b.add(BirchFeature::from_point(p3)), std::invalid_argument);
}

TEST_CASE("variance accessors") {
    BetulaFeature f;
    f.weight = 3.0;
    f.mean = {2.0, 0.0};
    f.sq_dev = {8.0, 0.0};
    const auto v = f.variance();
    CHECK(v[0] == doctest::Approx(8.0 / 3.0).epsilon(1e-15));
    CHECK(v[1] == 0.0);

    const std::array<double, 2> x{5.0, -3.0};
    CHECK(BetulaFeature::from_point(x, 1.0).variance() == std::vector<double>{0.0, 0.0});

    BetulaFeature stress;
    stress.weight = 2.0;
    stress.mean = {1e8 + 0.5};
    stress.sq_dev = {0.5};
    CHECK(stress.variance()[0] == 0.25);

    CHECK_THROWS_AS(BetulaFeature{}.variance(), std::domain_error);
    CHECK_THROWS_AS(BirchFeature{}.variance(), std::domain_error);
}

TEST_CASE("classic variance in the stable regime") {
    const std::array<double, 2> p34{3.0, 4.0};
    const auto single = BirchFeature::from_point(p34).variance();
    CHECK(single.value == 0.0);
    CHECK_FALSE(single.cancellation);  // one point: zero spread is exact

    BirchFeature two(1);  // points {1, 3}
    two.count = 2;
    two.linear_sum = {4.0};
    two.sum_squares = 10.0;
    const auto v = two.variance();
    CHECK(v.value == doctest::Approx(1.0).epsilon(1e-15));
    CHECK_FALSE(v.cancellation);
}

TEST_CASE("cancellation witness: classic form collapses, stable form does not") {
    // two points {c, c+1}; true variance 0.25 regardless of c
    for (double c : {1e8, 1e9, 1e10, 1e12}) {
        const std::array<double, 1> x0{c};
        const std::array<double, 1> x1{c + 1};
        const BirchFeature birch = merge(BirchFeature::from_point(x0), BirchFeature::from_point(x1));
        const auto bad = birch.variance();
        CHECK(bad.value <= 0.0);
        CHECK(bad.cancellation);

        const BetulaFeature ok = merge(BetulaFeature::from_point(x0, 1.0), BetulaFeature::from_point(x1, 1.0));
        CHECK(std::fabs(ok.variance()[0] - 0.25) <= 1e-12);
    }
}

TEST_CASE("additivity over random multisets") {
    Rng rng(20240601);
    for (int trial = 0; trial < 40; ++trial) {
        const std::size_t dim = 1 + static_cast<std::size_t>(rng.uniform_below(4));
        const std::size_t na = 1 + static_cast<std::size_t>(rng.uniform_below(60));
        const std::size_t nb = 1 + static_cast<std::size_t>(rng.uniform_below(60));
        const oracle::Points pa = random_points(rng, dim, na, 1e6);
        const oracle::Points pb = random_points(rng, dim, nb, 1e6);

        const BetulaFeature merged = merge(lift_all(pa), lift_all(pb));
        const BetulaFeature sequential = lift_all(oracle::concat(pa, pb));

        for (std::size_t j = 0; j < dim; ++j) {
            CHECK(oracle::rel_err(merged.mean[j], sequential.mean[j]) <= 1e-12);
            CHECK(oracle::rel_err(merged.sq_dev[j], sequential.sq_dev[j]) <= 1e-9);
        }
    }
}

TEST_CASE("variance matches the two-pass oracle on large random sets") {
    Rng rng(7);
    for (int trial = 0; trial < 5; ++trial) {
        const std::size_t n = 1000 + static_cast<std::size_t>(rng.uniform_below(9000));
        const oracle::Points p = random_points(rng, 3, n, 1000.0);
        const BetulaFeature f = lift_all(p);
        const auto expected = oracle::sse(p);
        const auto got = f.variance();
        for (std::size_t j = 0; j < 3; ++j)
            CHECK(oracle::rel_err(got[j], expected[j] / static_cast<double>(n)) <= 1e-9);
    }
}

TEST_CASE("merge order does not matter beyond rounding") {
    Rng rng(99);
    const oracle::Points p = random_points(rng, 2, 200, 100.0);
    std::vector<std::size_t> order(p.pts.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    std::vector<BetulaFeature> results;
    for (int round = 0; round < 10; ++round) {
        for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.uniform_below(i)]);
        BetulaFeature acc;
        for (std::size_t i : order) acc.add(BetulaFeature::from_point(p.pts[i], 1.0));
        results.push_back(acc);
    }
    for (std::size_t r = 1; r < results.size(); ++r) {
        for (std::size_t j = 0; j < 2; ++j) {
            CHECK(oracle::rel_err(results[r].mean[j], results[0].mean[j]) <= 1e-10);
            CHECK(oracle::rel_err(results[r].sq_dev[j], results[0].sq_dev[j]) <= 1e-8);
        }
    }
}

TEST_CASE("weighted lifting behaves like repeated points") {
    const std::array<double, 1> a{2.0};
    const std::array<double, 1> b{6.0};
    BetulaFeature w = BetulaFeature::from_point(a, 3.0);
    w.add(BetulaFeature::from_point(b, 1.0));

    oracle::Points p;
    p.dim = 1;
    p.pts = {{2.0}, {2.0}, {2.0}, {6.0}};
    CHECK(w.weight == 4.0);
    CHECK(w.mean[0] == doctest::Approx(oracle::mean(p)[0]).epsilon(1e-14));
    CHECK(w.sq_dev[0] == doctest::Approx(oracle::sse(p)[0]).epsilon(1e-14));
}

TEST_CASE("squared deviations far below zero are rejected") {
    BetulaFeature poisoned;
    poisoned.weight = 2.0;
    poisoned.mean = {1.0};
    poisoned.sq_dev = {-5.0};  // corrupt by construction
    BetulaFeature other;
    other.weight = 1.0;
    other.mean = {1.0};
    other.sq_dev = {0.0};
    CHECK_THROWS_AS(poisoned.add(other), std::runtime_error);
}

TEST_CASE("single precision rounding keeps invariants") {
    const std::array<double, 2> x{3.1415926535897931, 2.7182818284590451};
    BetulaFeature f = BetulaFeature::from_point(x, 1.0);
    f.add(BetulaFeature::from_point(std::array<double, 2>{1.0, -2.0}, 1.0));
    f.round_to_single();
    for (double v : f.sq_dev) CHECK(v >= 0.0);
    CHECK(static_cast<double>(static_cast<float>(f.mean[0])) == f.mean[0]);
}
