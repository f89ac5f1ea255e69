#pragma once

// The six analytical metrics over reasoning traces and their corpus-level
// aggregation into a MetricProfile.

#include "trace_profiler/corpus.hpp"
#include "trace_profiler/error.hpp"
#include "trace_profiler/parallel.hpp"
#include "trace_profiler/providers/provider_set.hpp"
#include "trace_profiler/unicode.hpp"

#include <nlohmann/json.hpp>
#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

namespace trace_profiler::metrics {

using providers::Vector;

inline constexpr int kDeflateLevel = 6;

/// Size of the raw DEFLATE stream (no zlib/gzip container) at `level`.
inline std::size_t deflate_size(std::string_view data, int level = kDeflateLevel) {
    z_stream zs{};
    if (deflateInit2(&zs, level, Z_DEFLATED, -15, 8, Z_DEFAULT_STRATEGY) != Z_OK)
        fail(ErrorCode::Precondition, "deflateInit2 failed");
    std::vector<unsigned char> out(deflateBound(&zs, static_cast<uLong>(data.size())) + 16);
    zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(data.data()));
    zs.avail_in = static_cast<uInt>(data.size());
    zs.next_out = out.data();
    zs.avail_out = static_cast<uInt>(out.size());
    const int rc = deflate(&zs, Z_FINISH);
    const std::size_t produced = zs.total_out;
    deflateEnd(&zs);
    if (rc != Z_STREAM_END) fail(ErrorCode::Precondition, "deflate did not finish");
    return produced;
}

/// 1 - compressed/original over the UTF-8 bytes. Negative for tiny inputs.
inline double redundancy_ratio(std::string_view text) {
    if (text.empty()) fail(ErrorCode::EmptyText, "redundancy_ratio: empty text");
    return 1.0 - static_cast<double>(deflate_size(text)) / static_cast<double>(text.size());
}

struct CharacterCounts {
    std::size_t non_whitespace = 0;
    std::size_t alphanumeric = 0;
    std::size_t symbolic = 0;
};

inline CharacterCounts count_characters(std::string_view text) {
    CharacterCounts c;
    unicode::for_each_scalar(text, [&](char32_t ch) {
        if (unicode::is_space(ch)) return;
        ++c.non_whitespace;
        if (unicode::is_alnum(ch))
            ++c.alphanumeric;
        else
            ++c.symbolic;
    });
    return c;
}

/// Share of non-whitespace characters that are not letters or digits.
inline double symbolic_fraction(std::string_view text) {
    const auto c = count_characters(text);
    if (c.non_whitespace == 0) fail(ErrorCode::EmptyText, "symbolic_fraction: no non-whitespace characters");
    return static_cast<double>(c.symbolic) / static_cast<double>(c.non_whitespace);
}

inline double alphanumeric_fraction(std::string_view text) {
    const auto c = count_characters(text);
    if (c.non_whitespace == 0) fail(ErrorCode::EmptyText, "alphanumeric_fraction: no non-whitespace characters");
    return static_cast<double>(c.alphanumeric) / static_cast<double>(c.non_whitespace);
}

inline double cosine(const Vector& a, const Vector& b) {
    if (a.size() != b.size()) fail(ErrorCode::ProviderError, "cosine: dimension mismatch");
    double dot = 0, na = 0, nb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0 || nb == 0) fail(ErrorCode::ZeroVector, "cosine of a zero vector");
    return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

/// Splits text into k equal spans (by character) so that none exceeds
/// `max_chars`; returns the text unchanged when it fits or max_chars is 0.
inline std::vector<std::string> chunk_text(std::string_view text, std::size_t max_chars) {
    const auto bounds = unicode::scalar_boundaries(text);
    const std::size_t chars = bounds.size() - 1;
    if (max_chars == 0 || chars <= max_chars) return {std::string(text)};
    const std::size_t k = (chars + max_chars - 1) / max_chars;
    const std::size_t span = (chars + k - 1) / k;
    std::vector<std::string> out;
    for (std::size_t start = 0; start < chars; start += span) {
        const std::size_t end = std::min(chars, start + span);
        out.emplace_back(text.substr(bounds[start], bounds[end] - bounds[start]));
    }
    return out;
}

/// Embeds each text, chunking over-long texts and mean-pooling their chunks.
inline std::vector<Vector> embed_pooled(providers::EmbeddingProvider& embedder,
                                        const std::vector<std::string>& texts) {
    std::vector<std::string> batch;
    std::vector<std::pair<std::size_t, std::size_t>> ranges;
    for (const auto& t : texts) {
        auto chunks = chunk_text(t, embedder.max_input_chars());
        ranges.emplace_back(batch.size(), chunks.size());
        for (auto& c : chunks) batch.push_back(std::move(c));
    }
    const auto vectors = embedder.embed(batch);
    std::vector<Vector> out;
    out.reserve(texts.size());
    for (const auto& [first, count] : ranges) {
        Vector pooled(vectors[first].size(), 0.0);
        for (std::size_t k = 0; k < count; ++k)
            for (std::size_t d = 0; d < pooled.size(); ++d) pooled[d] += vectors[first + k][d];
        for (double& x : pooled) x /= static_cast<double>(count);
        out.push_back(std::move(pooled));
    }
    return out;
}

inline double semantic_alignment(std::string_view query, std::string_view reasoning,
                                 providers::EmbeddingProvider& embedder) {
    if (query.empty() || reasoning.empty())
        fail(ErrorCode::EmptyText, "semantic_alignment: query and reasoning must be non-empty");
    const auto v = embed_pooled(embedder, {std::string(query), std::string(reasoning)});
    return cosine(v[0], v[1]);
}

/// Mean cosine of consecutive sentence embeddings; nullopt below two sentences.
inline std::optional<double> semantic_flow(std::string_view reasoning, providers::SentenceSegmenter& segmenter,
                                           providers::EmbeddingProvider& embedder) {
    if (reasoning.empty()) fail(ErrorCode::EmptyText, "semantic_flow: empty reasoning");
    const auto sentences = segmenter.segment(reasoning).sentences;
    if (sentences.size() < 2) return std::nullopt;
    const auto v = embed_pooled(embedder, sentences);
    double sum = 0;
    for (std::size_t i = 0; i + 1 < v.size(); ++i) sum += cosine(v[i], v[i + 1]);
    return sum / static_cast<double>(v.size() - 1);
}

inline double syntactic_depth(std::string_view reasoning, providers::SentenceSegmenter& segmenter,
                              providers::SyntaxProvider& syntax) {
    const auto sentences = segmenter.segment(reasoning).sentences;
    if (sentences.empty()) fail(ErrorCode::EmptyText, "syntactic_depth: no sentences");
    const auto depths = syntax.parse_depths(sentences);
    if (depths.size() != sentences.size())
        fail(ErrorCode::ProviderError, "syntactic_depth: provider returned wrong number of depths");
    double sum = 0;
    for (int d : depths) {
        if (d < 1) fail(ErrorCode::ProviderError, "syntactic_depth: depth below 1");
        sum += d;
    }
    return sum / static_cast<double>(depths.size());
}

/// exp of the mean per-token negative log-likelihood.
inline double perplexity(std::string_view text, providers::LogLikelihoodProvider& scorer) {
    const auto nll = scorer.score(text);
    if (nll.empty()) fail(ErrorCode::EmptyTokenization, "perplexity: text produced no scored tokens");
    double sum = 0;
    for (double x : nll) {
        if (!std::isfinite(x) || x < 0) fail(ErrorCode::ProviderError, "perplexity: invalid token NLL");
        sum += x;
    }
    return std::exp(sum / static_cast<double>(nll.size()));
}

struct ExampleMetrics {
    std::string id;
    double redundancy_ratio = 0;
    double symbolic_fraction = 0;
    double semantic_alignment = 0;
    std::optional<double> semantic_flow;
    double syntactic_depth = 0;
    double perplexity = 0;
};

inline void check_capabilities(const providers::ProviderSet& p) {
    if (!p.embedder) fail(ErrorCode::ConfigError, "no embedding provider configured");
    if (!p.segmenter) fail(ErrorCode::ConfigError, "no sentence segmenter configured");
    if (!p.syntax) fail(ErrorCode::ConfigError, "no syntax provider configured");
    if (!p.scorer) fail(ErrorCode::ConfigError, "no log-likelihood scorer configured");
}

/// All six metrics on the reasoning trace; alignment also reads the query.
inline ExampleMetrics compute_example(const Example& ex, const providers::ProviderSet& p) {
    check_capabilities(p);
    ExampleMetrics m;
    m.id = ex.id;
    m.redundancy_ratio = redundancy_ratio(ex.reasoning);
    m.symbolic_fraction = symbolic_fraction(ex.reasoning);
    m.semantic_alignment = semantic_alignment(ex.query, ex.reasoning, *p.embedder);
    m.semantic_flow = semantic_flow(ex.reasoning, *p.segmenter, *p.embedder);
    m.syntactic_depth = syntactic_depth(ex.reasoning, *p.segmenter, *p.syntax);
    m.perplexity = perplexity(ex.reasoning, *p.scorer);
    return m;
}

struct ExampleFailure {
    std::string id;
    std::string message;
};

struct MetricProfile {
    double syntactic_depth = 0;
    std::optional<double> semantic_flow;
    double semantic_alignment = 0;
    double perplexity = 0;
    double redundancy_ratio = 0;
    double symbolic_fraction = 0;
    std::size_t n_examples = 0;         // examples with metrics
    std::size_t semantic_flow_skipped = 0;  // examples with fewer than two sentences
};

/// Per-example means. Values are summed in id order so the result does not
/// depend on the order of the input.
inline MetricProfile aggregate(std::vector<ExampleMetrics> rows) {
    if (rows.empty()) fail(ErrorCode::EmptyInput, "aggregate: no example metrics");
    std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
    MetricProfile p;
    p.n_examples = rows.size();
    double flow_sum = 0;
    std::size_t flow_n = 0;
    for (const auto& r : rows) {
        p.syntactic_depth += r.syntactic_depth;
        p.semantic_alignment += r.semantic_alignment;
        p.perplexity += r.perplexity;
        p.redundancy_ratio += r.redundancy_ratio;
        p.symbolic_fraction += r.symbolic_fraction;
        if (r.semantic_flow) {
            flow_sum += *r.semantic_flow;
            ++flow_n;
        }
    }
    const auto n = static_cast<double>(rows.size());
    p.syntactic_depth /= n;
    p.semantic_alignment /= n;
    p.perplexity /= n;
    p.redundancy_ratio /= n;
    p.symbolic_fraction /= n;
    if (flow_n > 0) p.semantic_flow = flow_sum / static_cast<double>(flow_n);
    p.semantic_flow_skipped = rows.size() - flow_n;
    return p;
}

struct ProfileResult {
    MetricProfile profile;
    std::vector<ExampleMetrics> per_example;  // corpus order, failed examples omitted
    std::vector<ExampleFailure> failures;
};

inline constexpr double kMaxFailureFraction = 0.10;

/// Profiles a corpus. Per-example failures are collected; the call fails
/// only when more than 10% of examples fail.
inline ProfileResult profile_corpus(const Corpus& corpus, const providers::ProviderSet& p,
                                    std::size_t workers = providers::kDefaultConcurrency) {
    if (corpus.empty()) fail(ErrorCode::EmptyCorpus, "profile_corpus: empty corpus");
    check_capabilities(p);
    std::vector<std::optional<ExampleMetrics>> rows(corpus.size());
    std::vector<std::optional<std::string>> errors(corpus.size());
    parallel_for(corpus.size(), workers, [&](std::size_t i) {
        try {
            rows[i] = compute_example(corpus.examples[i], p);
        } catch (const Error& e) {
            if (e.code() == ErrorCode::ConfigError) throw;
            errors[i] = e.what();
        }
    });
    ProfileResult result;
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        if (rows[i])
            result.per_example.push_back(std::move(*rows[i]));
        else
            result.failures.push_back({corpus.examples[i].id, *errors[i]});
    }
    if (static_cast<double>(result.failures.size()) > kMaxFailureFraction * static_cast<double>(corpus.size()))
        fail(ErrorCode::TooManyFailures, std::to_string(result.failures.size()) + " of " +
                                             std::to_string(corpus.size()) + " examples failed; first: " +
                                             result.failures.front().message);
    result.profile = aggregate(result.per_example);
    return result;
}

inline nlohmann::ordered_json to_json(const ExampleMetrics& m) {
    nlohmann::ordered_json j;
    j["id"] = m.id;
    j["redundancy_ratio"] = m.redundancy_ratio;
    j["symbolic_fraction"] = m.symbolic_fraction;
    j["semantic_alignment"] = m.semantic_alignment;
    j["semantic_flow"] = m.semantic_flow ? nlohmann::ordered_json(*m.semantic_flow) : nlohmann::ordered_json();
    j["syntactic_depth"] = m.syntactic_depth;
    j["perplexity"] = m.perplexity;
    return j;
}

inline nlohmann::ordered_json to_json(const MetricProfile& p) {
    nlohmann::ordered_json j;
    j["syntactic_depth"] = p.syntactic_depth;
    j["semantic_flow"] = p.semantic_flow ? nlohmann::ordered_json(*p.semantic_flow) : nlohmann::ordered_json();
    j["semantic_alignment"] = p.semantic_alignment;
    j["perplexity"] = p.perplexity;
    j["redundancy_ratio"] = p.redundancy_ratio;
    j["symbolic_fraction"] = p.symbolic_fraction;
    j["n_examples"] = p.n_examples;
    j["semantic_flow_skipped"] = p.semantic_flow_skipped;
    j["aggregation"] = "per-example mean";
    return j;
}

inline MetricProfile profile_from_json(const nlohmann::json& j) {
    MetricProfile p;
    p.syntactic_depth = j.at("syntactic_depth").get<double>();
    if (!j.at("semantic_flow").is_null()) p.semantic_flow = j.at("semantic_flow").get<double>();
    p.semantic_alignment = j.at("semantic_alignment").get<double>();
    p.perplexity = j.at("perplexity").get<double>();
    p.redundancy_ratio = j.at("redundancy_ratio").get<double>();
    p.symbolic_fraction = j.at("symbolic_fraction").get<double>();
    p.n_examples = j.value("n_examples", std::size_t{0});
    p.semantic_flow_skipped = j.value("semantic_flow_skipped", std::size_t{0});
    return p;
}

}  // namespace trace_profiler::metrics
