#pragma once

// HTTP embedding client. Protocol: POST /embed with {"texts": [...]},
// response {"embeddings": [[...], ...]}. Requests are batched (<= 64 texts),
// batches may be in flight concurrently, and order is restored by index.

#include <httplib.h>
#include <json.hpp>

#include <future>
#include <stdexcept>
#include <string>
#include <vector>

#include "sirwm/core.hpp"
#include "sirwm/embed.hpp"

namespace sirwm {

struct HttpEmbedOptions {
    int timeout_seconds = 30;
    int max_retries = 2;       // attempts = 1 + max_retries
    int batch_size = 64;
    int max_in_flight = 4;
};

namespace detail {

inline std::vector<Embedding> http_embed_one_batch(const std::string& endpoint,
                                                   const std::vector<std::string>& texts,
                                                   const HttpEmbedOptions& opt) {
    nlohmann::json body;
    body["texts"] = texts;
    const std::string payload = body.dump();

    std::string last_error;
    for (int attempt = 0; attempt <= opt.max_retries; ++attempt) {
        httplib::Client client(endpoint);
        client.set_connection_timeout(opt.timeout_seconds, 0);
        client.set_read_timeout(opt.timeout_seconds, 0);
        auto res = client.Post("/embed", payload, "application/json");
        if (!res) {
            last_error = "transport error: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status < 200 || res->status >= 300) {
            last_error = "http status " + std::to_string(res->status);
            continue;
        }
        try {
            auto j = nlohmann::json::parse(res->body);
            const auto& arr = j.at("embeddings");
            if (arr.size() != texts.size()) {
                throw std::runtime_error("embedding count mismatch");
            }
            std::vector<Embedding> out;
            out.reserve(arr.size());
            for (const auto& row : arr) {
                std::vector<double> vals;
                vals.reserve(row.size());
                for (const auto& v : row) vals.push_back(v.get<double>());
                out.emplace_back(std::move(vals));
            }
            return out;
        } catch (const std::exception& e) {
            last_error = std::string("malformed response: ") + e.what();
            continue;
        }
    }
    throw std::runtime_error("http_embed failed after " + std::to_string(opt.max_retries + 1) +
                             " attempts: " + last_error);
}

}  // namespace detail

inline std::vector<Embedding> http_embed(const std::string& endpoint,
                                         const std::vector<std::string>& texts,
                                         const HttpEmbedOptions& opt = {}) {
    if (texts.empty()) return {};
    const std::size_t batch = static_cast<std::size_t>(opt.batch_size);
    const std::size_t n_batches = (texts.size() + batch - 1) / batch;
    std::vector<std::vector<Embedding>> results(n_batches);

    std::size_t next = 0;
    while (next < n_batches) {
        const std::size_t wave = std::min<std::size_t>(
            static_cast<std::size_t>(opt.max_in_flight), n_batches - next);
        std::vector<std::future<std::vector<Embedding>>> inflight;
        for (std::size_t w = 0; w < wave; ++w) {
            const std::size_t b = next + w;
            const std::size_t lo = b * batch;
            const std::size_t hi = std::min(texts.size(), lo + batch);
            std::vector<std::string> chunk(texts.begin() + static_cast<std::ptrdiff_t>(lo),
                                           texts.begin() + static_cast<std::ptrdiff_t>(hi));
            inflight.push_back(std::async(std::launch::async, [endpoint, chunk, opt] {
                return detail::http_embed_one_batch(endpoint, chunk, opt);
            }));
        }
        for (std::size_t w = 0; w < wave; ++w) {
            results[next + w] = inflight[w].get();
        }
        next += wave;
    }

    std::vector<Embedding> out;
    out.reserve(texts.size());
    int dim = -1;
    for (auto& chunk : results) {
        for (auto& e : chunk) {
            if (dim < 0) {
                dim = e.dim();
            } else if (e.dim() != dim) {
                throw std::runtime_error("http_embed: dimension drift between batches");
            }
            out.push_back(std::move(e));
        }
    }
    return out;
}

// Token sequences are rendered as space-separated ids and truncated to the
// trailing context window before being sent.
class HttpEmbeddingProvider : public EmbeddingProvider {
  public:
    explicit HttpEmbeddingProvider(std::string endpoint, HttpEmbedOptions opt = {})
        : endpoint_(std::move(endpoint)), opt_(opt) {}

    Kind kind() const override { return Kind::http; }
    int dim() const override { return dim_; }
    bool deterministic() const override { return false; }

    Embedding embed(const TokenSeq& tokens) const override {
        std::vector<TokenId> tail = tokens.tokens;
        if (tail.size() > static_cast<std::size_t>(kContextTruncation)) {
            tail.erase(tail.begin(),
                       tail.end() - static_cast<std::ptrdiff_t>(kContextTruncation));
        }
        auto got = http_embed(endpoint_, {format_token_text(tail)}, opt_);
        if (got.size() != 1) throw std::runtime_error("http provider: expected one embedding");
        if (dim_ < 0) {
            dim_ = got[0].dim();
        } else if (got[0].dim() != dim_) {
            throw std::runtime_error("http provider: dimension drift between calls");
        }
        return std::move(got[0]);
    }

  private:
    std::string endpoint_;
    HttpEmbedOptions opt_;
    mutable int dim_ = -1;
};

}  // namespace sirwm
