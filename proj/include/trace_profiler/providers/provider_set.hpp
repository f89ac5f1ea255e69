#pragma once

#include "trace_profiler/error.hpp"
#include "trace_profiler/providers/cache.hpp"
#include "trace_profiler/providers/chat.hpp"
#include "trace_profiler/providers/embedding.hpp"
#include "trace_profiler/providers/nlp.hpp"
#include "trace_profiler/providers/scoring.hpp"
#include "trace_profiler/providers/stub_chat.hpp"

#include <spdlog/spdlog.h>

#include <filesystem>
#include <memory>
#include <optional>

namespace trace_profiler::providers {

/// Every model-backed capability the pipelines draw on. A null member means
/// the capability is not configured.
struct ProviderSet {
    std::shared_ptr<ChatProvider> chat;
    std::shared_ptr<EmbeddingProvider> embedder;
    std::shared_ptr<LogLikelihoodProvider> scorer;
    std::shared_ptr<SentenceSegmenter> segmenter;
    std::shared_ptr<SyntaxProvider> syntax;
};

struct ProvidersConfig {
    bool offline = true;
    Endpoint chat;
    Endpoint embed;
    Endpoint scorer;
    Endpoint nlp;  // sidecar for segmentation, parse depth and (fallback) embeddings
    std::optional<std::filesystem::path> cache_dir;
    std::size_t embed_max_chars = 0;
    uint64_t seed = 0;
    double stub_vocab_size = 32000.0;
    RetryPolicy retry;
};

inline ProviderSet offline_providers(uint64_t seed = 0, double vocab_size = 32000.0) {
    return {make_offline_chat(), std::make_shared<HashEmbedder>(64, seed),
            std::make_shared<UniformScorer>(vocab_size), std::make_shared<PunctuationSegmenter>(),
            std::make_shared<LogDepthStub>()};
}

/// Stubs when offline; otherwise network clients wrapped in retries and, when
/// a cache directory is given, the response cache. Offline mode never builds
/// a network client, whatever endpoints are configured.
inline ProviderSet make_provider_set(const ProvidersConfig& cfg) {
    ProviderSet set;
    std::shared_ptr<ResponseCache> cache;
    if (cfg.cache_dir) cache = std::make_shared<ResponseCache>(*cfg.cache_dir);

    if (cfg.offline) {
        set = offline_providers(cfg.seed, cfg.stub_vocab_size);
        if (cache) {
            set.chat = std::make_shared<CachedChat>(set.chat, cache);
            set.embedder = std::make_shared<CachedEmbedder>(set.embedder, cache);
        }
        return set;
    }

    if (cfg.chat.configured()) {
        std::shared_ptr<ChatProvider> chat =
            std::make_shared<RetryingChat>(std::make_shared<OpenAiChatClient>(cfg.chat), cfg.retry);
        if (cache) chat = std::make_shared<CachedChat>(chat, cache);
        set.chat = chat;
    }

    std::shared_ptr<SidecarClient> sidecar;
    if (cfg.nlp.configured()) sidecar = std::make_shared<SidecarClient>(cfg.nlp, cfg.retry);

    std::shared_ptr<EmbeddingProvider> embedder;
    if (cfg.embed.configured())
        embedder = std::make_shared<RetryingEmbedder>(
            std::make_shared<OpenAiEmbeddingClient>(cfg.embed, cfg.embed_max_chars), cfg.retry);
    else if (sidecar)
        embedder = sidecar;
    if (embedder && cache) embedder = std::make_shared<CachedEmbedder>(embedder, cache);
    set.embedder = embedder;

    if (cfg.scorer.configured()) set.scorer = std::make_shared<CompletionsScorer>(cfg.scorer, cfg.retry);

    if (sidecar) {
        set.segmenter = sidecar;
        set.syntax = sidecar;
    } else {
        set.segmenter = std::make_shared<PunctuationSegmenter>();
    }
    return set;
}

}  // namespace trace_profiler::providers
