#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "adkit/rng.hpp"

using namespace adkit;

TEST_CASE("rng streams are deterministic per seed") {
    Rng a(42), b(42), c(43);
    bool any_diff = false;
    for (int i = 0; i < 64; ++i) {
        const uint64_t x = a.next_u64();
        CHECK(x == b.next_u64());
        if (x != c.next_u64()) any_diff = true;
    }
    CHECK(any_diff);
}

TEST_CASE("next_double lies in [0,1)") {
    Rng rng(1);
    for (int i = 0; i < 1000; ++i) {
        const double x = rng.next_double();
        CHECK(x >= 0.0);
        CHECK(x < 1.0);
    }
}

TEST_CASE("next_below respects the bound and hits every value") {
    Rng rng(5);
    std::set<uint64_t> seen;
    for (int i = 0; i < 500; ++i) {
        const uint64_t x = rng.next_below(7);
        CHECK(x < 7);
        seen.insert(x);
    }
    CHECK(seen.size() == 7);
}

TEST_CASE("gaussian draws are finite with sane spread") {
    Rng rng(9);
    double sum = 0.0, sq = 0.0;
    const int n = 4000;
    for (int i = 0; i < n; ++i) {
        const double x = rng.next_gaussian();
        CHECK(std::isfinite(x));
        sum += x;
        sq += x * x;
    }
    CHECK(std::abs(sum / n) < 0.1);
    CHECK(std::abs(sq / n - 1.0) < 0.1);
}

TEST_CASE("shuffle permutes without losing elements") {
    Rng rng(17);
    std::vector<int> v(50);
    for (int i = 0; i < 50; ++i) v[i] = i;
    std::vector<int> shuffled = v;
    rng.shuffle(shuffled);
    CHECK(shuffled != v);  // 50! permutations; identity is effectively impossible
    std::vector<int> sorted = shuffled;
    std::sort(sorted.begin(), sorted.end());
    CHECK(sorted == v);

    Rng rng2(17);
    std::vector<int> again(50);
    for (int i = 0; i < 50; ++i) again[i] = i;
    rng2.shuffle(again);
    CHECK(again == shuffled);
}

TEST_CASE("fnv1a64 distinguishes content and order") {
    const char a[] = "abc", b[] = "acb";
    CHECK(fnv1a64(a, 3) == fnv1a64(a, 3));
    CHECK(fnv1a64(a, 3) != fnv1a64(b, 3));
    CHECK(hash_combine(1, 2) != hash_combine(2, 1));
}
