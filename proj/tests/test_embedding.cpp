#include <catch2/catch_amalgamated.hpp>

#include <vector>

#include "kowcpi/embedding.hpp"
#include "kowcpi/rng.hpp"

using namespace kowcpi;

namespace {

ResidualHistory history_of(std::vector<double> values, std::size_t capacity) {
    ResidualHistory h(capacity);
    for (double v : values) h.push(v);
    return h;
}

} // namespace

TEST_CASE("push evicts the oldest entry once full") {
    auto h = history_of({1, 2, 3}, 3);
    h.push(4);
    REQUIRE(h.values() == std::vector<double>{2, 3, 4});
}

TEST_CASE("push below capacity keeps everything") {
    auto h = history_of({1, 2}, 3);
    REQUIRE_FALSE(h.full());
    h.push(4);
    REQUIRE(h.values() == std::vector<double>{1, 2, 4});
    REQUIRE(h.full());
}

TEST_CASE("capacity one holds only the newest value") {
    auto h = history_of({5}, 1);
    h.push(6);
    REQUIRE(h.values() == std::vector<double>{6});
}

TEST_CASE("after many pushes the history holds the last T values in order") {
    ResidualHistory h(7);
    for (int i = 0; i < 50; ++i) h.push(i);
    REQUIRE(h.size() == 7);
    for (std::size_t i = 0; i < 7; ++i) {
        REQUIRE(h.values()[i] == 43.0 + static_cast<double>(i));
    }
}

TEST_CASE("segments unroll the sliding-window index formulas") {
    // T=4, residuals (1,2,3,4), w=2: rows are (2,1),(3,2); responses 3,4;
    // query (4,3).
    const auto segments = build_segments(history_of({1, 2, 3, 4}, 4), 2);
    REQUIRE(segments.size() == 2);
    REQUIRE(segments.window == 2);
    REQUIRE(std::vector<double>(segments.predictor(0).begin(), segments.predictor(0).end()) ==
            std::vector<double>{2, 1});
    REQUIRE(std::vector<double>(segments.predictor(1).begin(), segments.predictor(1).end()) ==
            std::vector<double>{3, 2});
    REQUIRE(segments.responses == std::vector<double>{3, 4});
    REQUIRE(segments.query == std::vector<double>{4, 3});
}

TEST_CASE("window length one") {
    const auto segments = build_segments(history_of({1, 2, 3}, 3), 1);
    REQUIRE(segments.size() == 2);
    REQUIRE(segments.predictor(0)[0] == 1.0);
    REQUIRE(segments.predictor(1)[0] == 2.0);
    REQUIRE(segments.responses == std::vector<double>{2, 3});
    REQUIRE(segments.query == std::vector<double>{3});
}

TEST_CASE("window leaving fewer than two segments is rejected") {
    REQUIRE_THROWS_WITH(build_segments(history_of({1, 2, 3, 4}, 4), 3),
                        Catch::Matchers::ContainsSubstring("[1, 2]"));
    REQUIRE_THROWS_AS(build_segments(history_of({1, 2, 3, 4}, 4), 0), std::invalid_argument);
}

TEST_CASE("partial history is rejected") {
    ResidualHistory h(5);
    h.push(1.0);
    REQUIRE_THROWS_AS(build_segments(h, 1), std::invalid_argument);
}

TEST_CASE("segment invariants on random histories") {
    Rng rng(23);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t total = 4 + rng.uniform_index(60);
        const std::size_t window = 1 + rng.uniform_index(total - 3);
        ResidualHistory h(total);
        std::vector<double> raw(total);
        for (auto& v : raw) {
            v = rng.normal();
            h.push(v);
        }
        const auto segments = build_segments(h, window);
        REQUIRE(segments.size() == total - window);

        // responses[i] equals predictors[i+1]'s first coordinate.
        for (std::size_t i = 0; i + 1 < segments.size(); ++i) {
            REQUIRE(segments.responses[i] == segments.predictor(i + 1)[0]);
        }
        // The query is the most recent window, most recent first.
        for (std::size_t j = 0; j < window; ++j) {
            REQUIRE(segments.query[j] == raw[total - 1 - j]);
        }
        // Round-trip: the first window plus all responses rebuilds the
        // residual sequence.
        std::vector<double> rebuilt;
        for (std::size_t j = 0; j < window; ++j) {
            rebuilt.push_back(segments.predictor(0)[window - 1 - j]);
        }
        rebuilt.insert(rebuilt.end(), segments.responses.begin(), segments.responses.end());
        REQUIRE(rebuilt == raw);
    }
}
