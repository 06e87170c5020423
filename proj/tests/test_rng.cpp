#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "ratelab/rng.hpp"

using namespace ratelab;

TEST_CASE("derive_seed separates streams and counters") {
    const auto a = derive_seed(42, "market");
    const auto b = derive_seed(42, "choice");
    const auto c = derive_seed(42, "market", 1);
    CHECK(a != b);
    CHECK(a != c);
    CHECK(derive_seed(42, "market") == a);  // stable
}

TEST_CASE("uniform01 stays in [0,1) and is seed-deterministic") {
    RngStream rng1(7), rng2(7);
    for (int i = 0; i < 1000; ++i) {
        const double u = rng1.uniform01();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
        CHECK(u == rng2.uniform01());
    }
}

TEST_CASE("uniform_index covers the range") {
    RngStream rng(11);
    std::vector<int> counts(5, 0);
    for (int i = 0; i < 5000; ++i) ++counts[rng.uniform_index(5)];
    for (int c : counts) CHECK(c > 800);
    CHECK_THROWS_AS(rng.uniform_index(0), std::invalid_argument);
}

TEST_CASE("normal moments") {
    RngStream rng(13);
    const int n = 200000;
    double sum = 0.0, sum_sq = 0.0;
    for (int i = 0; i < n; ++i) {
        const double x = rng.normal();
        sum += x;
        sum_sq += x * x;
    }
    CHECK(std::abs(sum / n) < 0.01);
    CHECK(std::abs(sum_sq / n - 1.0) < 0.02);
}

TEST_CASE("gamma matches its mean and variance") {
    RngStream rng(17);
    for (const double shape : {0.5, 1.0, 2.5, 9.0}) {
        const int n = 200000;
        double sum = 0.0, sum_sq = 0.0;
        for (int i = 0; i < n; ++i) {
            const double x = rng.gamma(shape);
            CHECK(x >= 0.0);
            sum += x;
            sum_sq += x * x;
        }
        const double mean = sum / n;
        const double var = sum_sq / n - mean * mean;
        CHECK(mean == doctest::Approx(shape).epsilon(0.02));
        CHECK(var == doctest::Approx(shape).epsilon(0.05));
    }
    CHECK_THROWS_AS(rng.gamma(0.0), std::invalid_argument);
}

TEST_CASE("beta sampler hits closed-form moments across regimes") {
    RngStream rng(19);
    const struct {
        double a, b;
    } cases[] = {{1, 1}, {2, 1}, {5, 5}, {0.5, 0.5}, {1.427, 0.592}, {14.27, 5.92}};
    for (const auto& c : cases) {
        const int n = 200000;
        double sum = 0.0;
        for (int i = 0; i < n; ++i) {
            const double x = rng.beta(c.a, c.b);
            CHECK(x > 0.0);
            CHECK(x < 1.0);
            sum += x;
        }
        CHECK(sum / n == doctest::Approx(c.a / (c.a + c.b)).epsilon(0.01));
    }
}

TEST_CASE("beta sampler survives the tiny-parameter floor") {
    // eta = 0.001 times the fitted prior on an unrated product.
    RngStream rng(23);
    const double a = 0.001427, b = 0.000592;
    const int n = 100000;
    double sum = 0.0;
    int high = 0;
    for (int i = 0; i < n; ++i) {
        const double x = rng.beta(a, b);
        REQUIRE(std::isfinite(x));
        CHECK(x > 0.0);
        CHECK(x < 1.0);
        sum += x;
        if (x > 0.5) ++high;
    }
    // Mass piles at the endpoints with P(high) ~ a/(a+b).
    CHECK(sum / n == doctest::Approx(a / (a + b)).epsilon(0.03));
    CHECK(static_cast<double>(high) / n == doctest::Approx(a / (a + b)).epsilon(0.03));
}

TEST_CASE("mixed tiny/large beta parameters stay finite") {
    RngStream rng(29);
    for (int i = 0; i < 10000; ++i) {
        const double x = rng.beta(0.001427, 5.0006);
        REQUIRE(std::isfinite(x));
        CHECK(x > 0.0);
        CHECK(x < 1.0);
        const double y = rng.beta(5.0014, 0.000592);
        REQUIRE(std::isfinite(y));
        CHECK(y > 0.0);
        CHECK(y < 1.0);
    }
}
