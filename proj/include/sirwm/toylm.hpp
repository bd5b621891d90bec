#pragma once

// Deterministic seeded toy language model. Logits for the next token are a
// pure function of (seed, previous token, candidate token): a hashed standard
// normal, optionally plus a same-topic affinity bonus, divided by the
// temperature. Entropy at tau = 1 is close to log |V|, which is what the
// watermark needs; text quality is a non-goal.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "sirwm/core.hpp"
#include "sirwm/rng.hpp"

namespace sirwm {

struct ToyLM {
    std::uint64_t seed = 0;
    std::int32_t vocab_size = 0;
    double temperature = 1.0;
    // Same-topic bonus added to the hashed normal; 0 disables. topic_of may
    // be empty (no topic structure); fillers carry topic -1 (never matched).
    double topic_affinity = 0.0;
    std::vector<int> topic_of;

    ToyLM(std::uint64_t s, std::int32_t v, double tau = 1.0) : seed(s), vocab_size(v),
                                                               temperature(tau) {
        if (v < 2) throw std::invalid_argument("toy lm: vocab too small");
        if (tau <= 0.0) throw std::invalid_argument("toy lm: temperature must be > 0");
    }
};

// Virtual start symbol used when the context is empty.
inline constexpr std::uint64_t kStartSymbol = 0xffffffffu;

inline std::vector<double> lm_logits(const ToyLM& lm, const TokenSeq& context) {
    const std::uint64_t prev = context.empty()
                                   ? kStartSymbol
                                   : static_cast<std::uint64_t>(context.tokens.back());
    std::vector<double> out(static_cast<std::size_t>(lm.vocab_size));
    const int prev_topic =
        (!lm.topic_of.empty() && prev != kStartSymbol)
            ? lm.topic_of[static_cast<std::size_t>(prev)]
            : -1;
    for (std::int32_t cand = 0; cand < lm.vocab_size; ++cand) {
        double z = rng::to_gaussian(rng::hash3(lm.seed, prev, static_cast<std::uint64_t>(cand)));
        if (lm.topic_affinity != 0.0 && prev_topic >= 0 &&
            lm.topic_of[static_cast<std::size_t>(cand)] == prev_topic) {
            z += lm.topic_affinity;
        }
        out[static_cast<std::size_t>(cand)] = z / lm.temperature;
    }
    return out;
}

inline std::vector<double> softmax(std::vector<double> logits) {
    const double mx = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (double& v : logits) {
        v = std::exp(v - mx);
        sum += v;
    }
    for (double& v : logits) v /= sum;
    return logits;
}

enum class DecodeKind { sample, greedy, beam };

struct DecodeMethod {
    DecodeKind kind = DecodeKind::sample;
    int beam_width = 4;

    static DecodeMethod sample() { return {DecodeKind::sample, 1}; }
    static DecodeMethod greedy() { return {DecodeKind::greedy, 1}; }
    static DecodeMethod beam(int width) {
        if (width < 1) throw std::invalid_argument("beam width must be >= 1");
        if (width > 8) throw std::invalid_argument("beam width capped at 8");
        return {DecodeKind::beam, width};
    }
};

inline TokenId argmax_token(const std::vector<double>& logits) {
    // lowest index wins ties
    std::size_t best = 0;
    for (std::size_t i = 1; i < logits.size(); ++i) {
        if (logits[i] > logits[best]) best = i;
    }
    return static_cast<TokenId>(best);
}

inline TokenId sample_token(const std::vector<double>& logits, std::uint64_t step_seed) {
    const auto probs = softmax(logits);
    const double u = rng::to_unit(rng::hash2(step_seed, 0x5a3fu));
    double acc = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        acc += probs[i];
        if (u < acc) return static_cast<TokenId>(i);
    }
    return static_cast<TokenId>(probs.size() - 1);
}

// Indices of the k largest logits, ordered best-first, ties by lower index.
inline std::vector<TokenId> top_k_tokens(const std::vector<double>& logits, int k) {
    if (k < 1) throw std::invalid_argument("top_k: k must be >= 1");
    std::vector<TokenId> idx(logits.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<TokenId>(i);
    const auto cmp = [&](TokenId a, TokenId b) {
        const double la = logits[static_cast<std::size_t>(a)];
        const double lb = logits[static_cast<std::size_t>(b)];
        if (la != lb) return la > lb;
        return a < b;
    };
    const auto kk = std::min<std::size_t>(static_cast<std::size_t>(k), idx.size());
    std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(kk), idx.end(), cmp);
    idx.resize(kk);
    return idx;
}

// Single-step decode; beam here means "best k candidates for expansion".
inline std::vector<TokenId> decode_step(const std::vector<double>& final_logits,
                                        const DecodeMethod& method, std::uint64_t step_seed = 0) {
    switch (method.kind) {
        case DecodeKind::sample: return {sample_token(final_logits, step_seed)};
        case DecodeKind::greedy: return {argmax_token(final_logits)};
        case DecodeKind::beam: return top_k_tokens(final_logits, method.beam_width);
    }
    throw std::invalid_argument("unknown decode kind");
}

}  // namespace sirwm
