#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <set>

#include "progressd/common.hpp"

using progressd::Error;
using progressd::Rng;

TEST_CASE("rng streams are reproducible from the seed") {
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i) REQUIRE(a.next_u64() == b.next_u64());

    Rng c(42), d(43);
    int diff = 0;
    for (int i = 0; i < 16; ++i) diff += c.next_u64() != d.next_u64();
    REQUIRE(diff > 0);
}

TEST_CASE("uniform01 stays in the half-open unit interval") {
    Rng rng(7);
    for (int i = 0; i < 10000; ++i) {
        double u = rng.uniform01();
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
    }
}

TEST_CASE("uniform sampling respects the requested range") {
    Rng rng(11);
    for (int i = 0; i < 1000; ++i) {
        double v = rng.uniform(-3.0, 5.5);
        REQUIRE(v >= -3.0);
        REQUIRE(v < 5.5);
    }
    for (int i = 0; i < 1000; ++i) {
        auto k = rng.uniform_index(7);
        REQUIRE(k < 7);
    }
    std::set<int> seen;
    for (int i = 0; i < 500; ++i) seen.insert(rng.uniform_int(2, 5));
    REQUIRE(seen == std::set<int>{2, 3, 4, 5});
}

TEST_CASE("bernoulli honors degenerate probabilities") {
    Rng rng(3);
    for (int i = 0; i < 200; ++i) REQUIRE_FALSE(rng.bernoulli(0.0));
    for (int i = 0; i < 200; ++i) REQUIRE(rng.bernoulli(1.0));
}

TEST_CASE("normal draws have sane bulk statistics") {
    Rng rng(19);
    double sum = 0.0, sum_sq = 0.0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        double z = rng.normal();
        sum += z;
        sum_sq += z * z;
    }
    double mean = sum / n;
    double var = sum_sq / n - mean * mean;
    REQUIRE(std::abs(mean) < 0.05);
    REQUIRE(std::abs(var - 1.0) < 0.05);
}

TEST_CASE("forked streams differ from the parent and from each other") {
    Rng parent(123);
    Rng f0 = parent.fork(0);
    Rng f0_again = Rng(123).fork(0);
    REQUIRE(f0.next_u64() == f0_again.next_u64());
    Rng g0 = parent.fork(0), g1 = parent.fork(1);
    int diff = 0;
    for (int i = 0; i < 16; ++i) diff += g0.next_u64() != g1.next_u64();
    REQUIRE(diff > 0);
}

TEST_CASE("check reports the formatted message") {
    REQUIRE_THROWS_MATCHES(progressd::check(false, "widget ", 7, " broke"), Error,
                           Catch::Matchers::MessageMatches(
                               Catch::Matchers::ContainsSubstring("widget 7 broke")));
    REQUIRE_NOTHROW(progressd::check(true, "unused"));
}

TEST_CASE("fnv1a64 matches the published reference vectors") {
    using progressd::fnv1a64;
    using progressd::fnv1a64_hex;
    // reference vectors from the FNV specification's test suite
    CHECK(fnv1a64(std::string("")) == 0xcbf29ce484222325ULL);
    CHECK(fnv1a64(std::string("a")) == 0xaf63dc4c8601ec8cULL);
    CHECK(fnv1a64(std::string("foobar")) == 0x85944171f73967e8ULL);
    CHECK(fnv1a64_hex("") == "cbf29ce484222325");
    CHECK(fnv1a64_hex("foobar") == "85944171f73967e8");
    // embedded NUL bytes participate in the hash
    std::string with_nul("a\0b", 3);
    CHECK(fnv1a64(with_nul) != fnv1a64(std::string("ab")));
    CHECK(fnv1a64(with_nul.data(), 3) == fnv1a64(with_nul));
}
