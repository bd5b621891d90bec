#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <vector>

#include "sirwm/core.hpp"
#include "sirwm/rng.hpp"

using namespace sirwm;

TEST_CASE("vocab validation") {
    CHECK_THROWS_AS(Vocab(1), std::invalid_argument);
    CHECK_THROWS_AS(Vocab(0), std::invalid_argument);
    Vocab v(5);
    CHECK(v.name(3) == "tok3");
    CHECK_THROWS_AS(v.name(5), std::invalid_argument);
}

TEST_CASE("build_dim_map rejects degenerate sizes") {
    CHECK_THROWS_AS(build_dim_map(1, 10, 0), std::invalid_argument);
    CHECK_THROWS_AS(build_dim_map(10, 1, 0), std::invalid_argument);
    CHECK_THROWS_AS(build_dim_map(0, 0, 0), std::invalid_argument);
}

TEST_CASE("build_dim_map is deterministic") {
    auto a = build_dim_map(1000, 1000, 7);
    auto b = build_dim_map(1000, 1000, 7);
    CHECK(a.map == b.map);
    auto c = build_dim_map(1000, 1000, 8);
    CHECK(a.map != c.map);
}

TEST_CASE("build_dim_map bucket loads stay near uniform") {
    // brute-force count over the produced map; balls-in-bins tail bound at
    // 5000 balls into 1000 bins makes a load > 20 essentially impossible.
    auto dm = build_dim_map(5000, 1000, 7);
    std::vector<int> load(1000, 0);
    for (auto d : dm.map) load[static_cast<std::size_t>(d)]++;
    CHECK(*std::max_element(load.begin(), load.end()) <= 20);

    // chi-square sanity: expected 5 per bin, 999 dof; generous ceiling.
    double chi2 = 0.0;
    for (int l : load) chi2 += (l - 5.0) * (l - 5.0) / 5.0;
    CHECK(chi2 < 1200.0);
}

TEST_CASE("token_score reads the mapped dimension") {
    DimMap dm;
    dm.out_dim = 4;
    dm.seed = 0;
    dm.map = {2, 0, 1, 0, 3};

    WatermarkLogits zero;
    zero.values.assign(4, 0.0);
    CHECK(token_score(zero, dm, 1) == 0.0);

    WatermarkLogits wl;
    wl.values = {0.5, -0.25, 0.75, 1.0};
    CHECK(token_score(wl, dm, 3) == 0.5);  // token 3 -> dim 0
    CHECK(token_score(wl, dm, 0) == 0.75);
    CHECK_THROWS_AS(token_score(wl, dm, 5), std::invalid_argument);
    CHECK_THROWS_AS(token_score(wl, dm, -1), std::invalid_argument);
}

TEST_CASE("token_score matches independent recomputation") {
    rng::Stream s(99);
    auto dm = build_dim_map(200, 50, 11);
    WatermarkLogits wl;
    wl.values.resize(50);
    for (double& v : wl.values) v = 2.0 * s.next_unit() - 1.0;
    for (int trial = 0; trial < 100; ++trial) {
        const auto t = static_cast<TokenId>(s.next_below(200));
        const double expected = wl.values[static_cast<std::size_t>(dm.map[static_cast<std::size_t>(t)])];
        CHECK(token_score(wl, dm, t) == expected);
    }
}

TEST_CASE("tokens sharing a dimension share a score") {
    auto dm = build_dim_map(500, 20, 3);
    rng::Stream s(4);
    WatermarkLogits wl;
    wl.values.resize(20);
    for (double& v : wl.values) v = s.next_gaussian();
    std::map<std::int32_t, double> seen;
    for (TokenId t = 0; t < 500; ++t) {
        const auto d = dm.map[static_cast<std::size_t>(t)];
        const double sc = token_score(wl, dm, t);
        auto [it, fresh] = seen.emplace(d, sc);
        if (!fresh) CHECK(it->second == sc);
    }
}

TEST_CASE("embedding caches its norm") {
    Embedding e({3.0, 4.0});
    CHECK(e.norm == Catch::Approx(5.0));
    Embedding z({0.0, 0.0});
    CHECK(z.norm == 0.0);
    CHECK_THROWS_AS(cosine(e, z), std::invalid_argument);
    CHECK(cosine(e, e) == Catch::Approx(1.0));
}

TEST_CASE("counter rng basics") {
    // pure function of inputs
    CHECK(rng::hash3(1, 2, 3) == rng::hash3(1, 2, 3));
    CHECK(rng::hash3(1, 2, 3) != rng::hash3(1, 3, 2));

    // unit values live in (0,1)
    rng::Stream s(123);
    for (int i = 0; i < 1000; ++i) {
        const double u = s.next_unit();
        CHECK(u > 0.0);
        CHECK(u < 1.0);
    }

    // gaussian moments are roughly standard
    double sum = 0.0, sq = 0.0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        const double g = rng::to_gaussian(rng::hash2(42, static_cast<std::uint64_t>(i)));
        sum += g;
        sq += g * g;
    }
    CHECK(std::abs(sum / n) < 0.03);
    CHECK(std::abs(sq / n - 1.0) < 0.05);
}
