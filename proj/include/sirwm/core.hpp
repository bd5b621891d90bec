#pragma once

// Shared domain types: vocabulary, token sequences, embeddings, watermark
// logit vectors, and the seeded vocabulary -> output-dimension projection.

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "sirwm/rng.hpp"

namespace sirwm {

using TokenId = std::int32_t;

struct Vocab {
    std::int32_t size = 0;
    std::vector<std::string> names;  // optional; empty means synthetic "tok<i>" names

    explicit Vocab(std::int32_t n, std::vector<std::string> token_names = {})
        : size(n), names(std::move(token_names)) {
        if (size < 2) {
            throw std::invalid_argument("vocab size must be >= 2");
        }
        if (!names.empty() && static_cast<std::int32_t>(names.size()) != size) {
            throw std::invalid_argument("token name list does not match vocab size");
        }
    }

    std::string name(TokenId t) const {
        if (t < 0 || t >= size) {
            throw std::invalid_argument("token id out of range");
        }
        if (!names.empty()) return names[static_cast<std::size_t>(t)];
        return "tok" + std::to_string(t);
    }
};

enum class Origin { generated, human, attacked };

struct TokenSeq {
    std::vector<TokenId> tokens;
    Origin origin = Origin::generated;

    TokenSeq() = default;
    explicit TokenSeq(std::vector<TokenId> t, Origin o = Origin::generated)
        : tokens(std::move(t)), origin(o) {}

    std::size_t size() const { return tokens.size(); }
    bool empty() const { return tokens.empty(); }
};

struct Embedding {
    std::vector<double> values;
    double norm = 0.0;  // cached Euclidean norm

    Embedding() = default;
    explicit Embedding(std::vector<double> v) : values(std::move(v)) {
        double s = 0.0;
        for (double x : values) s += x * x;
        norm = std::sqrt(s);
    }

    int dim() const { return static_cast<int>(values.size()); }
};

inline double cosine(const Embedding& a, const Embedding& b) {
    if (a.values.size() != b.values.size()) {
        throw std::invalid_argument("cosine: dimension mismatch");
    }
    if (a.norm <= 0.0 || b.norm <= 0.0) {
        throw std::invalid_argument("cosine: zero-norm embedding");
    }
    double dot = 0.0;
    for (std::size_t i = 0; i < a.values.size(); ++i) dot += a.values[i] * b.values[i];
    return dot / (a.norm * b.norm);
}

enum class TransformKind { raw, tanh_k2, linear, tanh10_linear, cubic };

inline const char* transform_name(TransformKind k) {
    switch (k) {
        case TransformKind::raw: return "raw";
        case TransformKind::tanh_k2: return "tanh_k2";
        case TransformKind::linear: return "linear";
        case TransformKind::tanh10_linear: return "tanh10_linear";
        case TransformKind::cubic: return "cubic";
    }
    throw std::invalid_argument("unknown transform kind");
}

inline TransformKind transform_from_name(const std::string& s) {
    if (s == "raw") return TransformKind::raw;
    if (s == "tanh_k2") return TransformKind::tanh_k2;
    if (s == "linear") return TransformKind::linear;
    if (s == "tanh10_linear") return TransformKind::tanh10_linear;
    if (s == "cubic") return TransformKind::cubic;
    throw std::invalid_argument("unknown transform kind: " + s);
}

struct WatermarkLogits {
    std::vector<double> values;
    TransformKind transform = TransformKind::raw;
};

// Seeded many-to-one projection of token ids onto the fixed output dimension.
// map[t] is a pure function of (seed, t, out_dim); collisions are expected.
struct DimMap {
    std::int32_t out_dim = 0;
    std::uint64_t seed = 0;
    std::vector<std::int32_t> map;

    std::int32_t vocab_size() const { return static_cast<std::int32_t>(map.size()); }
};

inline DimMap build_dim_map(std::int32_t vocab_size, std::int32_t out_dim, std::uint64_t seed) {
    if (vocab_size < 2 || out_dim < 2) {
        throw std::invalid_argument("build_dim_map: vocab_size and out_dim must be >= 2");
    }
    DimMap dm;
    dm.out_dim = out_dim;
    dm.seed = seed;
    dm.map.resize(static_cast<std::size_t>(vocab_size));
    for (std::int32_t t = 0; t < vocab_size; ++t) {
        dm.map[static_cast<std::size_t>(t)] = static_cast<std::int32_t>(
            rng::hash2(seed, static_cast<std::uint64_t>(t)) %
            static_cast<std::uint64_t>(out_dim));
    }
    return dm;
}

inline double token_score(const WatermarkLogits& wl, const DimMap& dmap, TokenId token) {
    if (token < 0 || token >= dmap.vocab_size()) {
        throw std::invalid_argument("token_score: token id out of range");
    }
    const auto dim = static_cast<std::size_t>(dmap.map[static_cast<std::size_t>(token)]);
    if (dim >= wl.values.size()) {
        throw std::invalid_argument("token_score: dimension map does not fit logit vector");
    }
    return wl.values[dim];
}

}  // namespace sirwm
