#pragma once

// Sentence segmentation and dependency-depth capabilities, their offline
// stubs, and the HTTP client for the NLP sidecar service.

#include "trace_profiler/corpus.hpp"
#include "trace_profiler/error.hpp"
#include "trace_profiler/providers/chat.hpp"
#include "trace_profiler/providers/embedding.hpp"
#include "trace_profiler/providers/http.hpp"
#include "trace_profiler/unicode.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace trace_profiler::providers {

struct SentenceList {
    std::vector<std::string> sentences;
};

class SentenceSegmenter {
public:
    virtual ~SentenceSegmenter() = default;
    virtual std::string id() const = 0;
    virtual SentenceList segment(std::string_view text) = 0;
};

class SyntaxProvider {
public:
    virtual ~SyntaxProvider() = default;
    virtual std::string id() const = 0;
    /// Depth of each sentence's dependency tree, root alone = 1.
    virtual std::vector<int> parse_depths(const std::vector<std::string>& sentences) = 0;
};

/// Splits after runs of `.`, `!` or `?` that are followed by whitespace or the
/// end of text. Sentences are trimmed, never empty, and verbatim substrings.
class PunctuationSegmenter final : public SentenceSegmenter {
public:
    std::string id() const override { return "punctuation-segmenter"; }

    SentenceList segment(std::string_view text) override { return split(text); }

    static SentenceList split(std::string_view text) {
        SentenceList out;
        auto flush = [&](std::size_t begin, std::size_t end) {
            auto s = unicode::trim(text.substr(begin, end - begin));
            if (!s.empty()) out.sentences.emplace_back(s);
        };
        std::size_t start = 0;
        std::size_t i = 0;
        while (i < text.size()) {
            const char c = text[i];
            if (c == '.' || c == '!' || c == '?') {
                std::size_t j = i;
                while (j < text.size() && (text[j] == '.' || text[j] == '!' || text[j] == '?')) ++j;
                if (j == text.size() || unicode::is_ascii_space(text[j])) {
                    flush(start, j);
                    start = j;
                }
                i = j;
            } else {
                ++i;
            }
        }
        flush(start, text.size());
        return out;
    }
};

/// 1 + max edge count from the root over all tokens. `heads[i]` is the parent
/// of token i, or -1 (or i itself) for the root.
inline int tree_depth(const std::vector<int>& heads) {
    require(!heads.empty(), "tree_depth: empty parse");
    const int n = static_cast<int>(heads.size());
    std::vector<int> depth(heads.size(), 0);  // 0 = unknown
    int roots = 0;
    for (int i = 0; i < n; ++i) {
        require(heads[i] >= -1 && heads[i] < n, "tree_depth: head index out of range");
        if (heads[i] == -1 || heads[i] == i) ++roots;
    }
    require(roots >= 1, "tree_depth: parse has no root");
    int best = 0;
    for (int i = 0; i < n; ++i) {
        std::vector<int> path;
        int node = i;
        while (depth[static_cast<std::size_t>(node)] == 0) {
            path.push_back(node);
            require(static_cast<int>(path.size()) <= n, "tree_depth: cycle in parse");
            const int head = heads[static_cast<std::size_t>(node)];
            if (head == -1 || head == node) break;
            node = head;
        }
        int d = depth[static_cast<std::size_t>(node)] == 0 ? 0 : depth[static_cast<std::size_t>(node)];
        for (auto it = path.rbegin(); it != path.rend(); ++it) {
            d += 1;
            depth[static_cast<std::size_t>(*it)] = d;
        }
        best = std::max(best, depth[static_cast<std::size_t>(i)]);
    }
    return best;
}

/// Offline depth: 1 + floor(log2(tokens + 1)) over whitespace tokens.
class LogDepthStub final : public SyntaxProvider {
public:
    std::string id() const override { return "log-depth-stub"; }

    static int depth_for(std::string_view sentence) {
        const auto tokens = WhitespaceTokenizer{}.count(sentence);
        return 1 + static_cast<int>(std::floor(std::log2(static_cast<double>(tokens) + 1.0)));
    }

    std::vector<int> parse_depths(const std::vector<std::string>& sentences) override {
        std::vector<int> out;
        out.reserve(sentences.size());
        for (const auto& s : sentences) out.push_back(depth_for(s));
        return out;
    }
};

struct ParseDepthResult {
    int depth = 1;
    int token_count = 1;
};

/// Client for the NLP sidecar:
///   POST /segment     {"text": str}            -> {"sentences": [str]}
///   POST /parse-depth {"sentences": [str]}     -> {"results": [{"depth", "token_count"}]}
///   POST /embed       {"texts": [str]}         -> {"vectors": [[num]], "model": str}
///   GET  /healthz                              -> {"ready": bool, "models": {...}}
class SidecarClient final : public SentenceSegmenter, public SyntaxProvider, public EmbeddingProvider {
public:
    explicit SidecarClient(Endpoint endpoint, RetryPolicy policy = {}, Sleeper sleeper = real_sleeper())
        : http_(std::move(endpoint)), policy_(policy), sleep_(std::move(sleeper)) {}

    std::string id() const override { return "nlp-sidecar:" + http_.endpoint().base_url; }
    std::string model() const override { return http_.endpoint().model_id; }

    SentenceList segment(std::string_view text) override {
        require(!text.empty(), "segment: empty text");
        const auto reply = call("/segment", {{"text", std::string(text)}});
        try {
            return {reply.at("sentences").get<std::vector<std::string>>()};
        } catch (const nlohmann::json::exception& e) {
            fail(ErrorCode::ProviderError, std::string("unexpected /segment reply: ") + e.what());
        }
    }

    std::vector<ParseDepthResult> parse(const std::vector<std::string>& sentences) {
        require(!sentences.empty(), "parse-depth: no sentences");
        const auto reply = call("/parse-depth", {{"sentences", sentences}});
        try {
            std::vector<ParseDepthResult> out;
            for (const auto& r : reply.at("results"))
                out.push_back({r.at("depth").get<int>(), r.at("token_count").get<int>()});
            if (out.size() != sentences.size())
                fail(ErrorCode::ProviderError, "parse-depth: result count mismatch");
            for (const auto& r : out)
                if (r.depth < 1) fail(ErrorCode::ProviderError, "parse-depth: depth < 1");
            return out;
        } catch (const nlohmann::json::exception& e) {
            fail(ErrorCode::ProviderError, std::string("unexpected /parse-depth reply: ") + e.what());
        }
    }

    std::vector<int> parse_depths(const std::vector<std::string>& sentences) override {
        std::vector<int> out;
        for (const auto& r : parse(sentences)) out.push_back(r.depth);
        return out;
    }

    nlohmann::json health() { return http_.get("/healthz"); }

protected:
    std::vector<Vector> do_embed(const std::vector<std::string>& texts) override {
        const auto reply = call("/embed", {{"texts", texts}});
        try {
            return parse_vectors(reply.at("vectors"));
        } catch (const nlohmann::json::exception& e) {
            fail(ErrorCode::ProviderError, std::string("unexpected /embed reply: ") + e.what());
        }
    }

private:
    nlohmann::json call(std::string_view path, const nlohmann::json& body) {
        return with_retries(policy_, sleep_, retries_, std::string(path),
                            [&] { return http_.post(path, body); });
    }

    HttpJsonClient http_;
    RetryPolicy policy_;
    Sleeper sleep_;
    std::atomic<std::size_t> retries_{0};
};

}  // namespace trace_profiler::providers
