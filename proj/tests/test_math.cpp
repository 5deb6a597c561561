#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "stein/math.hpp"

using namespace stein;

TEST_CASE("pairwise sum matches compensated sum") {
    std::mt19937_64 gen(7);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<double> v(10'001);
    KahanSum ks;
    for (auto& x : v) {
        x = u(gen);
        ks.add(x);
    }
    REQUIRE(pairwise_sum(v) == Catch::Approx(ks.value()).margin(1e-12));
}

TEST_CASE("pairwise sum is an associativity-fixed reduction") {
    std::vector<double> v(1000);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::sin(static_cast<double>(i)) * 1e-3;
    double a = pairwise_sum(v);
    double b = pairwise_sum(v);
    REQUIRE(a == b);
}

TEST_CASE("kahan accumulates small terms against a large one") {
    KahanSum s;
    s.add(1e16);
    for (int i = 0; i < 10'000; ++i) s.add(1.0);
    s.add(-1e16);
    REQUIRE(s.value() == Catch::Approx(10'000.0).epsilon(1e-12));
}

TEST_CASE("powi handles integer exponents exactly") {
    REQUIRE(powi(2.0, 10) == 1024.0);
    REQUIRE(powi(-3.0, 3) == -27.0);
    REQUIRE(powi(5.0, 0) == 1.0);
    REQUIRE(powi(2.0, -2) == 0.25);
    REQUIRE(powi(0.0, 0) == 1.0);
}

TEST_CASE("standard error of a known vector") {
    std::vector<double> v{1.0, 2.0, 3.0, 4.0, 5.0};
    REQUIRE(mean(v) == Catch::Approx(3.0));
    // sample sd = sqrt(2.5), se = sd / sqrt(5)
    REQUIRE(standard_error(v) == Catch::Approx(std::sqrt(2.5 / 5.0)).epsilon(1e-12));
}

TEST_CASE("normal pdf/cdf reference values") {
    REQUIRE(normal_pdf(0.0) == Catch::Approx(0.39894228040143268).epsilon(1e-12));
    REQUIRE(normal_cdf(0.0) == Catch::Approx(0.5).margin(1e-15));
    REQUIRE(normal_cdf(1.959963984540054) == Catch::Approx(0.975).margin(1e-12));
}

TEST_CASE("normal quantile inverts the cdf") {
    for (double u : {1e-10, 1e-6, 0.01, 0.1, 0.3, 0.5, 0.7, 0.9, 0.99, 1.0 - 1e-6}) {
        double x = normal_quantile(u);
        REQUIRE(normal_cdf(x) == Catch::Approx(u).margin(1e-12));
    }
    REQUIRE(normal_quantile(0.5) == Catch::Approx(0.0).margin(1e-15));
    REQUIRE_THROWS_AS(normal_quantile(0.0), domain_error);
    REQUIRE_THROWS_AS(normal_quantile(1.0), domain_error);
}

TEST_CASE("monotone cubic interpolation") {
    std::vector<double> x{0.0, 1.0, 2.0, 3.0, 4.0};
    std::vector<double> y{0.0, 0.1, 2.0, 2.1, 5.0};
    MonotoneCubic interp(x, y);
    for (std::size_t i = 0; i < x.size(); ++i)
        REQUIRE(interp(x[i]) == Catch::Approx(y[i]).margin(1e-14));
    // monotone between knots
    double prev = interp(0.0);
    for (double t = 0.0; t <= 4.0; t += 0.001) {
        double v = interp(t);
        REQUIRE(v >= prev - 1e-12);
        prev = v;
    }
    // clamped outside
    REQUIRE(interp(-1.0) == y.front());
    REQUIRE(interp(9.0) == y.back());
    REQUIRE_THROWS_AS(MonotoneCubic({0.0, 0.0}, {1.0, 2.0}), domain_error);
}
