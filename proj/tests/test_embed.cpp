#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "sirwm/embed.hpp"
#include "sirwm/net.hpp"

using namespace sirwm;
namespace fs = std::filesystem;

namespace {

SyntheticSpec small_spec(double epsilon = 0.02) {
    SyntheticSpec spec;
    spec.seed = 7;
    spec.dim = 32;
    spec.vocab_size = 300;
    spec.l1_topics = 3;
    spec.l2_per_l1 = 2;
    spec.filler_count = 4;
    spec.epsilon = epsilon;
    spec.window = 32;
    return spec;
}

std::vector<TokenId> random_semantic_seq(const SyntheticSemantics& sem, int len,
                                         std::uint64_t seed) {
    rng::Stream s(seed);
    std::vector<TokenId> out;
    for (int i = 0; i < len; ++i) {
        out.push_back(static_cast<TokenId>(
            s.next_below(static_cast<std::uint64_t>(sem.spec().semantic_vocab()))));
    }
    return out;
}

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("sirwm_test_" + std::to_string(rng::hash2(
                    static_cast<std::uint64_t>(::getpid()),
                    reinterpret_cast<std::uintptr_t>(this))));
        fs::create_directories(path);
    }
    ~TempDir() { std::error_code ec; fs::remove_all(path, ec); }
};

}  // namespace

TEST_CASE("synthetic spec validation") {
    SyntheticSpec bad = small_spec();
    bad.dim = 1;
    CHECK_THROWS_AS(SyntheticSemantics(bad), std::invalid_argument);
    bad = small_spec();
    bad.window = 0;
    CHECK_THROWS_AS(SyntheticSemantics(bad), std::invalid_argument);
}

TEST_CASE("synthetic embeddings are deterministic and unit norm") {
    SyntheticSemantics a(small_spec());
    SyntheticSemantics b(small_spec());
    auto seq = TokenSeq(random_semantic_seq(a, 50, 3));
    auto ea = a.embed(seq);
    auto eb = b.embed(seq);
    CHECK(ea.values == eb.values);
    CHECK(ea.norm == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("single token embeds to its blended vector") {
    SyntheticSemantics sem(small_spec());
    const TokenId t = 17;
    auto e = sem.embed(TokenSeq({t}));
    const auto& v = sem.token_vector(t);
    REQUIRE(e.values.size() == v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        CHECK(e.values[i] == Catch::Approx(v[i]).margin(1e-12));
    }
}

TEST_CASE("empty context embeds to the seeded origin vector") {
    SyntheticSemantics sem(small_spec());
    auto e = sem.embed(TokenSeq{});
    CHECK(e.values == sem.origin_vector());
}

TEST_CASE("synonym members are near-parallel, exact at epsilon zero") {
    SyntheticSemantics noisy(small_spec(0.02));
    for (const auto& group : noisy.synonym_groups()) {
        REQUIRE(group.size() >= 2);
        Embedding a(noisy.token_vector(group[0]));
        Embedding b(noisy.token_vector(group[1]));
        CHECK(cosine(a, b) >= 0.99);
    }

    SyntheticSemantics exact(small_spec(0.0));
    auto seq = random_semantic_seq(exact, 60, 5);
    auto before = exact.embed(TokenSeq(seq));
    // swap every grouped token for a different member of its group
    auto swapped = seq;
    int swaps = 0;
    for (auto& t : swapped) {
        const int g = exact.group_of(t);
        if (g < 0) continue;
        const auto& members = exact.synonym_groups()[static_cast<std::size_t>(g)];
        for (TokenId m : members) {
            if (m != t) {
                t = m;
                ++swaps;
                break;
            }
        }
    }
    REQUIRE(swaps > 5);
    auto after = exact.embed(TokenSeq(swapped));
    CHECK(before.values == after.values);  // bitwise: shared base vectors
}

TEST_CASE("heavier random substitution moves the embedding further") {
    SyntheticSemantics sem(small_spec());
    rng::Stream s(99);
    int wins = 0;
    for (int trial = 0; trial < 100; ++trial) {
        auto seq = random_semantic_seq(sem, 100, 1000 + static_cast<std::uint64_t>(trial));
        auto perturb = [&](double ratio, std::uint64_t seed) {
            rng::Stream ps(seed);
            auto out = seq;
            const int n = static_cast<int>(std::lround(ratio * static_cast<double>(out.size())));
            for (int k = 0; k < n; ++k) {
                const auto pos = ps.next_below(out.size());
                out[pos] = static_cast<TokenId>(
                    ps.next_below(static_cast<std::uint64_t>(sem.spec().semantic_vocab())));
            }
            return out;
        };
        const auto base = sem.embed(TokenSeq(seq));
        const double c10 = cosine(base, sem.embed(TokenSeq(perturb(0.1, s.next()))));
        const double c50 = cosine(base, sem.embed(TokenSeq(perturb(0.5, s.next()))));
        if (c10 > c50) ++wins;
    }
    CHECK(wins >= 95);
}

TEST_CASE("appending one token obeys the window-mean locality bound") {
    SyntheticSemantics sem(small_spec());
    rng::Stream s(7);
    for (int trial = 0; trial < 50; ++trial) {
        const int len = 1 + static_cast<int>(s.next_below(80));
        auto seq = random_semantic_seq(sem, len, 2000 + static_cast<std::uint64_t>(trial));
        auto longer = seq;
        longer.push_back(static_cast<TokenId>(
            s.next_below(static_cast<std::uint64_t>(sem.spec().semantic_vocab()))));
        const auto m1 = sem.window_mean(TokenSeq(seq));
        const auto m2 = sem.window_mean(TokenSeq(longer));
        double d2 = 0.0;
        for (std::size_t i = 0; i < m1.size(); ++i) {
            d2 += (m1[i] - m2[i]) * (m1[i] - m2[i]);
        }
        const double bound = 2.0 / std::min<double>(sem.spec().window, len);
        CHECK(std::sqrt(d2) <= bound + 1e-12);
    }
}

TEST_CASE("filler tokens are invisible to the embedder") {
    SyntheticSemantics sem(small_spec());
    const TokenId filler = sem.spec().semantic_vocab();
    REQUIRE(sem.is_filler(filler));
    auto seq = random_semantic_seq(sem, 40, 11);
    auto with_fillers = std::vector<TokenId>{};
    for (TokenId t : seq) {
        with_fillers.push_back(t);
        with_fillers.push_back(filler);
    }
    auto a = sem.embed(TokenSeq(seq));
    auto b = sem.embed(TokenSeq(with_fillers));
    CHECK(a.values == b.values);
}

TEST_CASE("synthetic corpus has the intended similarity structure") {
    SyntheticSpec spec;  // full-size defaults
    spec.seed = 21;
    SyntheticSemantics sem(spec);
    auto corpus = make_synthetic_corpus(sem, 400, 5);
    REQUIRE(corpus.size() == 400);
    std::vector<Embedding> embs;
    for (const auto& r : corpus) embs.push_back(r.embedding);

    // Fig.-3(b)-style corpus mean similarity sits near 0.45
    const double mean = mean_pairwise_similarity(embs);
    INFO("corpus mean similarity " << mean);
    CHECK(mean > 0.35);
    CHECK(mean < 0.55);

    // near-duplicate slice provides high-similarity pairs
    int high = 0;
    for (std::size_t i = 1; i < embs.size(); ++i) {
        if (cosine(embs[i - 1], embs[i]) >= 0.95) ++high;
    }
    CHECK(high >= 20);

    // determinism
    auto again = make_synthetic_corpus(sem, 400, 5);
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        CHECK(again[i].embedding.values == corpus[i].embedding.values);
        CHECK(again[i].topic == corpus[i].topic);
    }
}

TEST_CASE("corpus file round trip") {
    TempDir tmp;
    const auto path = tmp.path / "corpus.jsonl";

    // empty file -> empty list
    { std::ofstream out(path); }
    CHECK(load_corpus(path).empty());

    SyntheticSemantics sem(small_spec());
    auto corpus = make_synthetic_corpus(sem, 25, 9);
    save_corpus(path, corpus);
    auto loaded = load_corpus(path);
    REQUIRE(loaded.size() == corpus.size());
    // one record survives with full f32 fidelity
    save_corpus(path, loaded);
    auto twice = load_corpus(path);
    for (std::size_t i = 0; i < loaded.size(); ++i) {
        CHECK(twice[i].embedding.values == loaded[i].embedding.values);
        CHECK(twice[i].id == loaded[i].id);
        CHECK(twice[i].topic == loaded[i].topic);
        CHECK(twice[i].text == loaded[i].text);
    }
}

TEST_CASE("corpus loader flags dimension drift with the record name") {
    TempDir tmp;
    const auto path = tmp.path / "bad.jsonl";
    {
        std::ofstream out(path);
        out << R"({"id":"a","topic":"0.0","embedding":[1.0,0.0]})" << "\n";
        out << R"({"id":"b","topic":"0.0","embedding":[1.0,0.0,0.0]})" << "\n";
    }
    try {
        load_corpus(path);
        FAIL("expected format error");
    } catch (const std::runtime_error& e) {
        const std::string msg = e.what();
        CHECK(msg.find("'b'") != std::string::npos);
    }
}

TEST_CASE("single record corpus loads") {
    TempDir tmp;
    const auto path = tmp.path / "one.jsonl";
    {
        std::ofstream out(path);
        out << R"({"id":"only","topic":"1.0","embedding":[0.5,0.25,-0.125]})" << "\n";
    }
    auto recs = load_corpus(path);
    REQUIRE(recs.size() == 1);
    CHECK(recs[0].id == "only");
    CHECK(recs[0].embedding.dim() == 3);
}

TEST_CASE("replay provider looks up stored sequences") {
    SyntheticSemantics sem(small_spec());
    auto corpus = make_synthetic_corpus(sem, 10, 13);
    FileReplayProvider replay(corpus);
    CHECK(replay.kind() == EmbeddingProvider::Kind::file);
    const auto tokens = parse_token_text(*corpus[3].text);
    auto e = replay.embed(TokenSeq(tokens));
    CHECK(e.values == corpus[3].embedding.values);
    CHECK_THROWS_AS(replay.embed(TokenSeq({1, 2, 3, 4, 5, 6, 7, 8, 9})), std::runtime_error);
}
