#pragma once

// Embedding providers. The synthetic provider gives a controllable stand-in
// for a sentence-embedding model: tokens carry unit base vectors organized
// into synonym groups and two-level topics, and a sequence embeds as the
// normalized mean of its trailing window. Corpus files are JSON Lines with
// one {"id", "topic", "embedding", "text"?} record per line (f32 values).

#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "sirwm/core.hpp"
#include "sirwm/rng.hpp"
#include "sirwm/util.hpp"

namespace sirwm {

class EmbeddingProvider {
  public:
    enum class Kind { file, http, synthetic };

    virtual ~EmbeddingProvider() = default;
    virtual Kind kind() const = 0;
    virtual int dim() const = 0;
    virtual bool deterministic() const = 0;
    virtual Embedding embed(const TokenSeq& tokens) const = 0;
};

inline Embedding embed(const EmbeddingProvider& provider, const TokenSeq& tokens) {
    return provider.embed(tokens);
}

// All providers see at most this many trailing tokens.
inline constexpr int kContextTruncation = 512;

struct SyntheticSpec {
    std::uint64_t seed = 1;
    int dim = 64;
    std::int32_t vocab_size = 1000;
    int l1_topics = 3;
    int l2_per_l1 = 2;
    int synonym_group_size = 4;
    double synonym_coverage = 0.6;  // fraction of semantic tokens in multi-member groups
    double epsilon = 0.02;          // per-member noise inside a group
    double topic_weight = 0.3;
    int window = 64;
    int filler_count = 8;  // trailing token ids invisible to the embedder
    // topic vector composition: normalize(a*shared + b*L1 + c*L2)
    double topic_shared = 0.60;
    double topic_l1 = 0.65;
    double topic_l2 = 0.45;

    int n_topics() const { return l1_topics * l2_per_l1; }
    std::int32_t semantic_vocab() const { return vocab_size - filler_count; }

    void validate() const {
        if (dim < 2) throw std::invalid_argument("synthetic: dim must be >= 2");
        if (vocab_size < 2) throw std::invalid_argument("synthetic: vocab too small");
        if (l1_topics < 1 || l2_per_l1 < 1) throw std::invalid_argument("synthetic: bad topics");
        if (window < 1) throw std::invalid_argument("synthetic: window must be >= 1");
        if (filler_count < 0 || semantic_vocab() < n_topics()) {
            throw std::invalid_argument("synthetic: vocab cannot cover topics");
        }
        if (epsilon < 0.0) throw std::invalid_argument("synthetic: epsilon must be >= 0");
        if (!(topic_weight >= 0.0 && topic_weight < 1.0)) {
            throw std::invalid_argument("synthetic: topic_weight must be in [0,1)");
        }
    }
};

namespace detail {

inline std::vector<double> random_unit(int dim, std::uint64_t key) {
    std::vector<double> v(static_cast<std::size_t>(dim));
    double n2 = 0.0;
    for (int i = 0; i < dim; ++i) {
        v[static_cast<std::size_t>(i)] =
            rng::to_gaussian(rng::hash3(key, 0x7ec7u, static_cast<std::uint64_t>(i)));
        n2 += v[static_cast<std::size_t>(i)] * v[static_cast<std::size_t>(i)];
    }
    const double inv = 1.0 / std::sqrt(n2);
    for (double& x : v) x *= inv;
    return v;
}

inline void normalize_in_place(std::vector<double>& v) {
    double n2 = 0.0;
    for (double x : v) n2 += x * x;
    if (n2 <= 0.0) throw std::runtime_error("cannot normalize zero vector");
    const double inv = 1.0 / std::sqrt(n2);
    for (double& x : v) x *= inv;
}

}  // namespace detail

class SyntheticSemantics : public EmbeddingProvider {
  public:
    explicit SyntheticSemantics(SyntheticSpec spec) : spec_(spec) {
        spec_.validate();
        build();
    }

    Kind kind() const override { return Kind::synthetic; }
    int dim() const override { return spec_.dim; }
    bool deterministic() const override { return true; }
    const SyntheticSpec& spec() const { return spec_; }

    bool is_filler(TokenId t) const { return t >= spec_.semantic_vocab() && t < spec_.vocab_size; }

    // L2-level topic index in [0, n_topics); -1 for fillers.
    int topic_of(TokenId t) const {
        check_token(t);
        if (is_filler(t)) return -1;
        return topic_of_[static_cast<std::size_t>(t)];
    }

    int l1_of_topic(int topic) const { return topic / spec_.l2_per_l1; }

    std::string topic_name(int topic) const {
        if (topic < 0) return "filler";
        return std::to_string(l1_of_topic(topic)) + "." + std::to_string(topic % spec_.l2_per_l1);
    }

    int topic_from_name(const std::string& name) const {
        const auto dot = name.find('.');
        if (dot == std::string::npos) throw std::invalid_argument("bad topic name: " + name);
        const int l1 = std::stoi(name.substr(0, dot));
        const int l2 = std::stoi(name.substr(dot + 1));
        return l1 * spec_.l2_per_l1 + l2;
    }

    // Semantic token ids belonging to one L2 topic (contiguous by construction).
    std::pair<TokenId, TokenId> topic_token_range(int topic) const {
        const auto sem = static_cast<std::int64_t>(spec_.semantic_vocab());
        const auto k = static_cast<std::int64_t>(spec_.n_topics());
        const auto lo = static_cast<TokenId>(sem * topic / k);
        const auto hi = static_cast<TokenId>(sem * (topic + 1) / k);
        return {lo, hi};
    }

    // Synonym lexicon: only groups with >= 2 members.
    const std::vector<std::vector<TokenId>>& synonym_groups() const { return groups_; }

    // Group index for a token, -1 if the token is not in a multi-member group.
    int group_of(TokenId t) const {
        check_token(t);
        return group_of_[static_cast<std::size_t>(t)];
    }

    const std::vector<double>& token_vector(TokenId t) const {
        check_token(t);
        return token_vec_[static_cast<std::size_t>(t)];
    }

    // Mean of trailing-window token vectors, before normalization. Filler
    // tokens are invisible: they neither contribute nor consume window slots.
    std::vector<double> window_mean(const TokenSeq& tokens) const {
        std::vector<TokenId> window;
        window.reserve(static_cast<std::size_t>(spec_.window));
        const auto& ts = tokens.tokens;
        const std::size_t truncated_begin =
            ts.size() > static_cast<std::size_t>(kContextTruncation)
                ? ts.size() - static_cast<std::size_t>(kContextTruncation)
                : 0;
        for (std::size_t i = ts.size(); i > truncated_begin; --i) {
            const TokenId t = ts[i - 1];
            check_token(t);
            if (is_filler(t)) continue;
            window.push_back(t);
            if (static_cast<int>(window.size()) == spec_.window) break;
        }
        if (window.empty()) return origin_;
        std::vector<double> mean(static_cast<std::size_t>(spec_.dim), 0.0);
        // window was collected newest-first; sum oldest-first for a fixed order
        for (auto it = window.rbegin(); it != window.rend(); ++it) {
            const auto& v = token_vec_[static_cast<std::size_t>(*it)];
            for (std::size_t d = 0; d < mean.size(); ++d) mean[d] += v[d];
        }
        const double inv = 1.0 / static_cast<double>(window.size());
        for (double& x : mean) x *= inv;
        return mean;
    }

    Embedding embed(const TokenSeq& tokens) const override {
        auto mean = window_mean(tokens);
        detail::normalize_in_place(mean);
        return Embedding(std::move(mean));
    }

    const std::vector<double>& origin_vector() const { return origin_; }

  private:
    void check_token(TokenId t) const {
        if (t < 0 || t >= spec_.vocab_size) {
            throw std::invalid_argument("synthetic: token id out of range");
        }
    }

    void build() {
        const std::int32_t sem = spec_.semantic_vocab();
        const int topics = spec_.n_topics();
        topic_of_.assign(static_cast<std::size_t>(spec_.vocab_size), -1);
        group_of_.assign(static_cast<std::size_t>(spec_.vocab_size), -1);
        token_vec_.assign(static_cast<std::size_t>(spec_.vocab_size), {});

        origin_ = detail::random_unit(spec_.dim, rng::hash2(spec_.seed, 0x0715u));
        const auto shared = detail::random_unit(spec_.dim, rng::hash2(spec_.seed, 0x517a12edu));

        std::vector<std::vector<double>> topic_vec(static_cast<std::size_t>(topics));
        for (int k = 0; k < topics; ++k) {
            const int l1 = k / spec_.l2_per_l1;
            const auto r1 = detail::random_unit(
                spec_.dim, rng::hash3(spec_.seed, 0x11u, static_cast<std::uint64_t>(l1)));
            const auto r2 = detail::random_unit(
                spec_.dim, rng::hash3(spec_.seed, 0x12u, static_cast<std::uint64_t>(k)));
            std::vector<double> tv(static_cast<std::size_t>(spec_.dim));
            for (std::size_t d = 0; d < tv.size(); ++d) {
                tv[d] = spec_.topic_shared * shared[d] + spec_.topic_l1 * r1[d] +
                        spec_.topic_l2 * r2[d];
            }
            detail::normalize_in_place(tv);
            topic_vec[static_cast<std::size_t>(k)] = std::move(tv);
        }

        for (TokenId t = 0; t < sem; ++t) {
            topic_of_[static_cast<std::size_t>(t)] = static_cast<int>(
                static_cast<std::int64_t>(t) * topics / sem);
        }

        // synonym groups: within each topic block, the leading coverage
        // fraction is carved into fixed-size groups; the rest are singletons
        int next_group_key = 0;
        for (int k = 0; k < topics; ++k) {
            auto [lo, hi] = topic_token_range(k);
            const auto block = hi - lo;
            const auto grouped =
                static_cast<TokenId>(static_cast<double>(block) * spec_.synonym_coverage);
            TokenId t = lo;
            while (t < lo + grouped) {
                const TokenId end = std::min<TokenId>(
                    t + static_cast<TokenId>(spec_.synonym_group_size), lo + grouped);
                const int key = next_group_key++;
                if (end - t >= 2) {
                    std::vector<TokenId> members;
                    for (TokenId m = t; m < end; ++m) {
                        group_of_[static_cast<std::size_t>(m)] =
                            static_cast<int>(groups_.size());
                        members.push_back(m);
                    }
                    groups_.push_back(std::move(members));
                }
                const auto base = detail::random_unit(
                    spec_.dim, rng::hash3(spec_.seed, 0x6000u, static_cast<std::uint64_t>(key)));
                for (TokenId m = t; m < end; ++m) make_token_vector(m, base, topic_vec);
                t = end;
            }
            for (; t < hi; ++t) {
                const auto base = detail::random_unit(
                    spec_.dim, rng::hash3(spec_.seed, 0x6001u, static_cast<std::uint64_t>(t)));
                make_token_vector(t, base, topic_vec);
            }
        }
        // fillers get vectors too (unused by the window mean)
        for (TokenId t = sem; t < spec_.vocab_size; ++t) {
            token_vec_[static_cast<std::size_t>(t)] = detail::random_unit(
                spec_.dim, rng::hash3(spec_.seed, 0xf111u, static_cast<std::uint64_t>(t)));
        }
    }

    void make_token_vector(TokenId t, const std::vector<double>& base,
                           const std::vector<std::vector<double>>& topic_vec) {
        std::vector<double> member = base;
        if (spec_.epsilon > 0.0) {
            const auto noise = detail::random_unit(
                spec_.dim, rng::hash3(spec_.seed, 0x4015eu, static_cast<std::uint64_t>(t)));
            for (std::size_t d = 0; d < member.size(); ++d) {
                member[d] += spec_.epsilon * noise[d];
            }
            detail::normalize_in_place(member);
        }
        const auto& tv = topic_vec[static_cast<std::size_t>(topic_of_[static_cast<std::size_t>(t)])];
        std::vector<double> v(member.size());
        for (std::size_t d = 0; d < v.size(); ++d) {
            v[d] = (1.0 - spec_.topic_weight) * member[d] + spec_.topic_weight * tv[d];
        }
        detail::normalize_in_place(v);
        token_vec_[static_cast<std::size_t>(t)] = std::move(v);
    }

    SyntheticSpec spec_;
    std::vector<int> topic_of_;
    std::vector<int> group_of_;
    std::vector<std::vector<TokenId>> groups_;
    std::vector<std::vector<double>> token_vec_;
    std::vector<double> origin_;
};

// ---------------------------------------------------------------------------
// Corpus files
// ---------------------------------------------------------------------------

struct CorpusRecord {
    std::string id;
    std::string topic;
    Embedding embedding;
    std::optional<std::string> text;  // space-separated token ids when present
};

inline std::vector<TokenId> parse_token_text(const std::string& text) {
    std::vector<TokenId> out;
    std::istringstream ss(text);
    long long v = 0;
    while (ss >> v) out.push_back(static_cast<TokenId>(v));
    return out;
}

inline std::string format_token_text(const std::vector<TokenId>& tokens) {
    std::ostringstream ss;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (i) ss << ' ';
        ss << tokens[i];
    }
    return ss.str();
}

inline std::vector<CorpusRecord> load_corpus(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("corpus: cannot open " + path.string());
    std::vector<CorpusRecord> out;
    std::string line;
    int line_no = 0;
    int dim = -1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw std::runtime_error("corpus: bad JSON at line " + std::to_string(line_no) +
                                     ": " + e.what());
        }
        CorpusRecord rec;
        try {
            rec.id = j.at("id").get<std::string>();
            rec.topic = j.value("topic", std::string{});
            std::vector<double> vals;
            for (const auto& v : j.at("embedding")) {
                // schema stores f32; snap so round trips are bit-stable
                vals.push_back(static_cast<double>(static_cast<float>(v.get<double>())));
            }
            rec.embedding = Embedding(std::move(vals));
            if (j.contains("text")) rec.text = j.at("text").get<std::string>();
        } catch (const nlohmann::json::exception& e) {
            throw std::runtime_error("corpus: bad record at line " + std::to_string(line_no) +
                                     ": " + e.what());
        }
        if (dim < 0) {
            dim = rec.embedding.dim();
        } else if (rec.embedding.dim() != dim) {
            throw std::runtime_error("corpus: record '" + rec.id + "' (line " +
                                     std::to_string(line_no) + ") has dimension " +
                                     std::to_string(rec.embedding.dim()) + ", expected " +
                                     std::to_string(dim));
        }
        out.push_back(std::move(rec));
    }
    return out;
}

inline std::string corpus_to_jsonl(const std::vector<CorpusRecord>& records) {
    std::ostringstream ss;
    for (const auto& rec : records) {
        nlohmann::json j;
        j["id"] = rec.id;
        j["topic"] = rec.topic;
        nlohmann::json emb = nlohmann::json::array();
        for (double v : rec.embedding.values) {
            emb.push_back(static_cast<double>(static_cast<float>(v)));
        }
        j["embedding"] = std::move(emb);
        if (rec.text) j["text"] = *rec.text;
        ss << j.dump() << '\n';
    }
    return ss.str();
}

inline void save_corpus(const std::filesystem::path& path,
                        const std::vector<CorpusRecord>& records, bool force = true) {
    atomic_write_file(path, corpus_to_jsonl(records), force);
}

struct CorpusGenOptions {
    int min_len = 32;
    int max_len = 128;
    double duplicate_fraction = 0.2;   // synonym-perturbed near-duplicates
    double duplicate_swap_ratio = 0.5; // fraction of eligible tokens swapped in a duplicate
    double cross_topic_fraction = 0.1; // tokens drawn from other topics
    bool store_text = true;
};

// Seeded corpus of embedded token sequences, round-robin across topics, with
// a slice of synonym-perturbed near-duplicates so high-similarity pairs exist.
inline std::vector<CorpusRecord> make_synthetic_corpus(const SyntheticSemantics& sem, int n,
                                                       std::uint64_t seed,
                                                       const CorpusGenOptions& opt = {}) {
    if (n < 0) throw std::invalid_argument("corpus size must be >= 0");
    std::vector<CorpusRecord> out;
    out.reserve(static_cast<std::size_t>(n));
    rng::Stream s(rng::hash2(seed, 0xc0f9u));
    const int topics = sem.spec().n_topics();
    std::vector<TokenId> prev_tokens;
    int prev_topic = 0;
    for (int i = 0; i < n; ++i) {
        CorpusRecord rec;
        rec.id = "r" + std::to_string(i);
        std::vector<TokenId> tokens;
        const bool duplicate = i > 0 && !prev_tokens.empty() &&
                               s.next_unit() < opt.duplicate_fraction;
        int topic;
        if (duplicate) {
            topic = prev_topic;
            tokens = prev_tokens;
            for (auto& t : tokens) {
                const int g = sem.group_of(t);
                if (g < 0 || s.next_unit() >= opt.duplicate_swap_ratio) continue;
                const auto& members = sem.synonym_groups()[static_cast<std::size_t>(g)];
                t = members[s.next_below(members.size())];
            }
        } else {
            topic = static_cast<int>(s.next_below(static_cast<std::uint64_t>(topics)));
            const int len = opt.min_len + static_cast<int>(s.next_below(
                static_cast<std::uint64_t>(opt.max_len - opt.min_len + 1)));
            auto [lo, hi] = sem.topic_token_range(topic);
            for (int k = 0; k < len; ++k) {
                if (s.next_unit() < opt.cross_topic_fraction) {
                    const int other = static_cast<int>(
                        s.next_below(static_cast<std::uint64_t>(topics)));
                    auto [olo, ohi] = sem.topic_token_range(other);
                    tokens.push_back(olo + static_cast<TokenId>(s.next_below(
                        static_cast<std::uint64_t>(ohi - olo))));
                } else {
                    tokens.push_back(lo + static_cast<TokenId>(s.next_below(
                        static_cast<std::uint64_t>(hi - lo))));
                }
            }
        }
        rec.topic = sem.topic_name(topic);
        rec.embedding = sem.embed(TokenSeq(tokens));
        if (opt.store_text) rec.text = format_token_text(tokens);
        prev_tokens = std::move(tokens);
        prev_topic = topic;
        out.push_back(std::move(rec));
    }
    return out;
}

// Replays stored embeddings keyed on the exact token sequence ("file" kind).
class FileReplayProvider : public EmbeddingProvider {
  public:
    explicit FileReplayProvider(const std::vector<CorpusRecord>& records) {
        if (records.empty()) throw std::invalid_argument("replay provider: empty corpus");
        dim_ = records[0].embedding.dim();
        for (const auto& rec : records) {
            if (!rec.text) {
                throw std::invalid_argument("replay provider: record '" + rec.id +
                                            "' has no tokens");
            }
            table_.emplace(*rec.text, rec.embedding);
        }
    }

    Kind kind() const override { return Kind::file; }
    int dim() const override { return dim_; }
    bool deterministic() const override { return true; }

    Embedding embed(const TokenSeq& tokens) const override {
        const auto key = format_token_text(tokens.tokens);
        const auto it = table_.find(key);
        if (it == table_.end()) {
            throw std::runtime_error("replay provider: no stored embedding for token sequence");
        }
        return it->second;
    }

  private:
    int dim_ = 0;
    std::map<std::string, Embedding> table_;
};

}  // namespace sirwm
