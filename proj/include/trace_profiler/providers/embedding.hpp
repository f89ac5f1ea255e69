#pragma once

#include "trace_profiler/error.hpp"
#include "trace_profiler/providers/cache.hpp"
#include "trace_profiler/providers/chat.hpp"
#include "trace_profiler/providers/http.hpp"
#include "trace_profiler/unicode.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace trace_profiler::providers {

using Vector = std::vector<double>;

class EmbeddingProvider {
public:
    virtual ~EmbeddingProvider() = default;
    virtual std::string id() const = 0;
    virtual std::string model() const = 0;

    /// Longest input in characters the backend accepts; 0 means unlimited.
    virtual std::size_t max_input_chars() const { return 0; }

    /// One vector per text, order-aligned, constant dimension.
    std::vector<Vector> embed(const std::vector<std::string>& texts) {
        require(!texts.empty(), "embed: empty batch");
        for (const auto& t : texts) require(!t.empty(), "embed: empty text in batch");
        auto out = do_embed(texts);
        if (out.size() != texts.size())
            fail(ErrorCode::ProviderError, "embed: provider returned " + std::to_string(out.size()) +
                                               " vectors for " + std::to_string(texts.size()) + " texts");
        for (const auto& v : out)
            if (v.empty() || v.size() != out.front().size())
                fail(ErrorCode::ProviderError, "embed: inconsistent vector dimension");
        return out;
    }

protected:
    virtual std::vector<Vector> do_embed(const std::vector<std::string>& texts) = 0;
};

namespace detail {

inline uint64_t fnv1a(std::string_view s, uint64_t seed) {
    uint64_t h = 1469598103934665603ULL ^ seed;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

}  // namespace detail

/// Offline embedder: signed feature hashing of whitespace tokens and their
/// character trigrams into `dimension` buckets, L2-normalised. Pure function
/// of the text bytes and the seed.
class HashEmbedder final : public EmbeddingProvider {
public:
    explicit HashEmbedder(std::size_t dimension = 64, uint64_t seed = 0)
        : dimension_(dimension), seed_(seed) {
        require(dimension_ > 0, "HashEmbedder: dimension must be positive");
    }

    std::string id() const override { return "hash-embedder"; }
    std::string model() const override {
        return "fnv1a-d" + std::to_string(dimension_) + "-s" + std::to_string(seed_);
    }

    Vector embed_one(std::string_view text) const {
        Vector v(dimension_, 0.0);
        auto add = [&](std::string_view feature, double weight) {
            const uint64_t h = detail::fnv1a(feature, seed_);
            const double sign = (h >> 63) != 0 ? -1.0 : 1.0;
            v[static_cast<std::size_t>(h % dimension_)] += sign * weight;
        };
        std::size_t i = 0;
        while (i < text.size()) {
            while (i < text.size() && unicode::is_ascii_space(text[i])) ++i;
            std::size_t j = i;
            while (j < text.size() && !unicode::is_ascii_space(text[j])) ++j;
            if (j > i) {
                std::string token(text.substr(i, j - i));
                for (auto& c : token)
                    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
                add(token, 1.0);
                const std::string padded = "^" + token + "$";
                for (std::size_t k = 0; k + 3 <= padded.size(); ++k)
                    add(std::string_view(padded).substr(k, 3), 0.25);
            }
            i = j;
        }
        double norm = 0;
        for (double x : v) norm += x * x;
        norm = std::sqrt(norm);
        if (norm > 0)
            for (double& x : v) x /= norm;
        return v;
    }

protected:
    std::vector<Vector> do_embed(const std::vector<std::string>& texts) override {
        std::vector<Vector> out;
        out.reserve(texts.size());
        for (const auto& t : texts) out.push_back(embed_one(t));
        return out;
    }

private:
    std::size_t dimension_;
    uint64_t seed_;
};

inline std::vector<Vector> parse_vectors(const nlohmann::json& arr) {
    std::vector<Vector> out;
    for (const auto& row : arr) out.push_back(row.get<Vector>());
    return out;
}

/// OpenAI-compatible `/embeddings` client.
class OpenAiEmbeddingClient final : public EmbeddingProvider {
public:
    explicit OpenAiEmbeddingClient(Endpoint endpoint, std::size_t max_input_chars = 0)
        : http_(std::move(endpoint)), max_chars_(max_input_chars) {}

    std::string id() const override { return "openai-embed:" + http_.endpoint().base_url; }
    std::string model() const override { return http_.endpoint().model_id; }
    std::size_t max_input_chars() const override { return max_chars_; }

protected:
    std::vector<Vector> do_embed(const std::vector<std::string>& texts) override {
        const nlohmann::json body = {{"model", http_.endpoint().model_id}, {"input", texts}};
        const auto reply = http_.post("/embeddings", body);
        try {
            std::vector<Vector> out(texts.size());
            for (const auto& item : reply.at("data")) {
                const auto index = item.at("index").get<std::size_t>();
                if (index >= out.size()) fail(ErrorCode::ProviderError, "embedding index out of range");
                out[index] = item.at("embedding").get<Vector>();
            }
            return out;
        } catch (const nlohmann::json::exception& e) {
            fail(ErrorCode::ProviderError, std::string("unexpected embeddings reply: ") + e.what());
        }
    }

private:
    HttpJsonClient http_;
    std::size_t max_chars_;
};

class RetryingEmbedder final : public EmbeddingProvider {
public:
    RetryingEmbedder(std::shared_ptr<EmbeddingProvider> inner, RetryPolicy policy = {},
                     Sleeper sleeper = real_sleeper())
        : inner_(std::move(inner)), policy_(policy), sleep_(std::move(sleeper)) {}

    std::string id() const override { return inner_->id(); }
    std::string model() const override { return inner_->model(); }
    std::size_t max_input_chars() const override { return inner_->max_input_chars(); }

protected:
    std::vector<Vector> do_embed(const std::vector<std::string>& texts) override {
        return with_retries(policy_, sleep_, retries_, "embed", [&] { return inner_->embed(texts); });
    }

private:
    std::shared_ptr<EmbeddingProvider> inner_;
    RetryPolicy policy_;
    Sleeper sleep_;
    std::atomic<std::size_t> retries_{0};
};

/// Per-text cache in front of any embedder.
class CachedEmbedder final : public EmbeddingProvider {
public:
    CachedEmbedder(std::shared_ptr<EmbeddingProvider> inner, std::shared_ptr<ResponseCache> cache)
        : inner_(std::move(inner)), cache_(std::move(cache)) {}

    std::string id() const override { return inner_->id(); }
    std::string model() const override { return inner_->model(); }
    std::size_t max_input_chars() const override { return inner_->max_input_chars(); }

protected:
    std::vector<Vector> do_embed(const std::vector<std::string>& texts) override {
        std::vector<Vector> out(texts.size());
        std::vector<std::string> missing;
        std::vector<std::size_t> missing_at;
        std::vector<std::string> keys(texts.size());
        for (std::size_t i = 0; i < texts.size(); ++i) {
            keys[i] = ResponseCache::key_for(inner_->id(), inner_->model(), request(texts[i]));
            if (auto hit = cache_->get(keys[i])) {
                out[i] = nlohmann::json::parse(*hit).get<Vector>();
            } else {
                missing.push_back(texts[i]);
                missing_at.push_back(i);
            }
        }
        if (!missing.empty()) {
            auto fresh = inner_->embed(missing);
            for (std::size_t k = 0; k < missing.size(); ++k) {
                const auto i = missing_at[k];
                cache_->put(keys[i], request(texts[i]), nlohmann::json(fresh[k]).dump(), inner_->id());
                out[i] = std::move(fresh[k]);
            }
        }
        return out;
    }

private:
    static nlohmann::json request(const std::string& text) { return {{"embed", text}}; }

    std::shared_ptr<EmbeddingProvider> inner_;
    std::shared_ptr<ResponseCache> cache_;
};

}  // namespace trace_profiler::providers
