#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "kowcpi/rng.hpp"

using namespace kowcpi;

TEST_CASE("same seed reproduces the same draws") {
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i) {
        REQUIRE(a.uniform01() == b.uniform01());
        REQUIRE(a.normal() == b.normal());
    }
}

TEST_CASE("streams with different purposes are distinct") {
    Rng a = Rng::stream(7, "noise");
    Rng b = Rng::stream(7, "bootstrap");
    Rng c = Rng::stream(7, "noise", 1);
    bool all_equal = true;
    for (int i = 0; i < 16; ++i) {
        const auto x = a.next_u64();
        if (x != b.next_u64() || x != c.next_u64()) all_equal = false;
    }
    REQUIRE_FALSE(all_equal);
}

TEST_CASE("uniform01 stays in [0, 1)") {
    Rng rng(3);
    for (int i = 0; i < 10000; ++i) {
        const double u = rng.uniform01();
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
    }
}

TEST_CASE("normal draws have roughly standard moments") {
    Rng rng(11);
    const int n = 200000;
    double sum = 0.0, sq = 0.0;
    for (int i = 0; i < n; ++i) {
        const double x = rng.normal();
        sum += x;
        sq += x * x;
    }
    const double mean = sum / n;
    const double var = sq / n - mean * mean;
    REQUIRE(std::abs(mean) < 0.02);
    REQUIRE(std::abs(var - 1.0) < 0.03);
}
