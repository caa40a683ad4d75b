#include <doctest.h>

#include <cmath>
#include <numeric>
#include <vector>

#include "sentinel/rng.hpp"

using namespace sentinel;

TEST_CASE("splitmix64 streams are reproducible") {
    SplitMix64 a(42);
    SplitMix64 b(42);
    for (int i = 0; i < 100; ++i) {
        CHECK(a.next() == b.next());
    }
    SplitMix64 c(43);
    bool any_diff = false;
    SplitMix64 a2(42);
    for (int i = 0; i < 10; ++i) {
        any_diff |= a2.next() != c.next();
    }
    CHECK(any_diff);
}

TEST_CASE("uniform doubles stay in range") {
    SplitMix64 rng(7);
    for (int i = 0; i < 10000; ++i) {
        const double u = rng.next_double();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
    }
}

TEST_CASE("normal draws have roughly standard moments") {
    SplitMix64 rng(11);
    const int n = 50000;
    double sum = 0.0;
    double sq = 0.0;
    for (int i = 0; i < n; ++i) {
        const double x = rng.next_normal();
        sum += x;
        sq += x * x;
    }
    const double mean = sum / n;
    const double var = sq / n - mean * mean;
    CHECK(std::abs(mean) < 0.02);
    CHECK(std::abs(var - 1.0) < 0.05);
}

TEST_CASE("fnv1a64 matches reference vectors") {
    // Published FNV-1a test values.
    CHECK(fnv1a64("") == 0xCBF29CE484222325ULL);
    CHECK(fnv1a64("a") == 0xAF63DC4C8601EC8CULL);
    CHECK(fnv1a64("foobar") == 0x85944171F73967E8ULL);
}

TEST_CASE("shuffle is a seeded permutation") {
    std::vector<int> v(20);
    std::iota(v.begin(), v.end(), 0);
    std::vector<int> w = v;
    SplitMix64 r1(5);
    SplitMix64 r2(5);
    shuffle_vec(v, r1);
    shuffle_vec(w, r2);
    CHECK(v == w);
    std::vector<int> sorted = v;
    std::sort(sorted.begin(), sorted.end());
    std::vector<int> expect(20);
    std::iota(expect.begin(), expect.end(), 0);
    CHECK(sorted == expect);
}
