#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <set>
#include <vector>

#include "rodd/rng.hpp"

TEST_CASE("same seed replays the identical stream") {
    rodd::Rng a(42), b(42);
    for (int i = 0; i < 1000; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("derived seeds separate named streams") {
    const auto effects = rodd::derive_seed(7, "effects");
    const auto sampling = rodd::derive_seed(7, "sampling");
    const auto noise = rodd::derive_seed(7, "noise");
    CHECK(effects != sampling);
    CHECK(effects != noise);
    CHECK(sampling != noise);
    CHECK(rodd::derive_seed(7, "effects") == effects);
    CHECK(rodd::derive_seed(8, "effects") != effects);

    std::set<std::uint64_t> tree_seeds;
    for (std::uint64_t t = 0; t < 500; ++t) tree_seeds.insert(rodd::derive_seed(7, "tree", t));
    CHECK(tree_seeds.size() == 500);
}

TEST_CASE("uniform_int stays in bounds and hits every value") {
    rodd::Rng rng(11);
    std::set<std::int64_t> seen;
    for (int i = 0; i < 2000; ++i) {
        const auto v = rng.uniform_int(-3, 3);
        CHECK(v >= -3);
        CHECK(v <= 3);
        seen.insert(v);
    }
    CHECK(seen.size() == 7);

    CHECK(rng.uniform_int(5, 5) == 5);
}

TEST_CASE("uniform_real stays in the half-open unit interval") {
    rodd::Rng rng(13);
    for (int i = 0; i < 2000; ++i) {
        const double v = rng.uniform_real();
        CHECK(v >= 0.0);
        CHECK(v < 1.0);
    }
    for (int i = 0; i < 100; ++i) {
        const double v = rng.uniform_real(2.0, 5.0);
        CHECK(v >= 2.0);
        CHECK(v < 5.0);
    }
}

TEST_CASE("sample_indices draws k distinct indices") {
    rodd::Rng rng(17);
    for (int it = 0; it < 50; ++it) {
        const auto picks = rng.sample_indices(30, 8);
        REQUIRE(picks.size() == 8);
        std::set<std::size_t> distinct(picks.begin(), picks.end());
        CHECK(distinct.size() == 8);
        CHECK(*std::max_element(picks.begin(), picks.end()) < 30);
    }
    CHECK(rng.sample_indices(5, 10).size() == 5);  // k clamps to n
    CHECK(rng.sample_indices(5, 0).empty());
}

TEST_CASE("shuffle permutes without losing elements") {
    rodd::Rng rng(19);
    std::vector<int> values{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    auto shuffled = values;
    rng.shuffle(shuffled);
    CHECK(std::is_permutation(shuffled.begin(), shuffled.end(), values.begin()));
}

TEST_CASE("bounded draws are reproducible across instances") {
    rodd::Rng a(123), b(123);
    for (int i = 0; i < 500; ++i) CHECK(a.uniform_int(-10, 10) == b.uniform_int(-10, 10));
}
