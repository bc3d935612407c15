#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "cvtomo/linalg.hpp"
#include "cvtomo/rng.hpp"

using namespace cvtomo;

TEST_CASE("prng streams are reproducible and seed-separated") {
    prng a(42), b(42), c(43);
    bool all_equal = true, any_diff = false;
    for (int i = 0; i < 1000; ++i) {
        const auto x = a.next_u64();
        all_equal = all_equal && (x == b.next_u64());
        any_diff = any_diff || (x != c.next_u64());
    }
    CHECK(all_equal);
    CHECK(any_diff);

    CHECK(stream_seed(7, 0) != stream_seed(7, 1));
    CHECK(stream_seed(7, 0) != stream_seed(8, 0));
    CHECK(stream_seed(7, 5) == stream_seed(7, 5));
}

TEST_CASE("normal transform has the right first moments") {
    prng g(20240817);
    const int n = 200000;
    double s = 0, s2 = 0, s3 = 0;
    for (int i = 0; i < n; ++i) {
        const double x = g.normal();
        s += x;
        s2 += x * x;
        s3 += x * x * x;
    }
    // 5 sigma tolerances on the empirical moments.
    CHECK(std::abs(s / n) < 5.0 / std::sqrt(double(n)));
    CHECK(std::abs(s2 / n - 1.0) < 5.0 * std::sqrt(2.0 / n));
    CHECK(std::abs(s3 / n) < 5.0 * std::sqrt(15.0 / n));
}

TEST_CASE("exponential transform has unit mean and variance") {
    prng g(5);
    const int n = 200000;
    double s = 0, s2 = 0;
    for (int i = 0; i < n; ++i) {
        const double x = g.exponential();
        CHECK(x >= 0.0);
        s += x;
        s2 += x * x;
    }
    const double mean = s / n;
    const double var = s2 / n - mean * mean;
    CHECK(std::abs(mean - 1.0) < 5.0 / std::sqrt(double(n)));
    CHECK(std::abs(var - 1.0) < 5.0 * std::sqrt(8.0 / n));
}

TEST_CASE("median handles odd, even and degenerate inputs") {
    CHECK(median({3.0}) == 3.0);
    CHECK(median({5.0, 1.0, 9.0}) == 5.0);
    CHECK(median({4.0, 1.0, 2.0, 8.0}) == 3.0);
    CHECK(median({2.0, 2.0, 2.0, 2.0}) == 2.0);
    CHECK_THROWS_AS(median({}), numerical_error);
}

TEST_CASE("loglog_slope recovers exact power laws") {
    std::vector<double> xs, ys, zs;
    for (int i = 1; i <= 20; ++i) {
        const double x = std::pow(10.0, 0.25 * i);
        xs.push_back(x);
        ys.push_back(3.0 * std::pow(x, -0.5));
        zs.push_back(0.1 * x * x);
    }
    CHECK_THAT(loglog_slope(xs, ys), Catch::Matchers::WithinAbs(-0.5, 1e-12));
    CHECK_THAT(loglog_slope(xs, zs), Catch::Matchers::WithinAbs(2.0, 1e-12));
    CHECK_THROWS_AS(loglog_slope({1.0}, {1.0}), numerical_error);
}

TEST_CASE("matrix norms agree on a known example") {
    Mat a(2, 2);
    a << 3, 0, 0, -4;
    CHECK_THAT(op_norm(a), Catch::Matchers::WithinAbs(4.0, 1e-12));
    CHECK_THAT(trace_norm(a), Catch::Matchers::WithinAbs(7.0, 1e-12));
    CHECK_THAT(hs_norm(a), Catch::Matchers::WithinAbs(5.0, 1e-12));
    CHECK_THAT(condition_number(Mat::Identity(4, 4)),
               Catch::Matchers::WithinAbs(1.0, 1e-12));
}
