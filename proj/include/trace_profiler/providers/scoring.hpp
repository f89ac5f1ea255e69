#pragma once

#include "trace_profiler/corpus.hpp"
#include "trace_profiler/error.hpp"
#include "trace_profiler/providers/chat.hpp"
#include "trace_profiler/providers/http.hpp"

#include <cmath>
#include <memory>
#include <string>
#include <vector>

namespace trace_profiler::providers {

/// Per-token negative log-likelihoods (nats) of a text under a language model.
class LogLikelihoodProvider {
public:
    virtual ~LogLikelihoodProvider() = default;
    virtual std::string id() const = 0;
    virtual std::string model() const = 0;
    virtual std::vector<double> score(std::string_view text) = 0;
};

/// Every whitespace token has probability 1/vocab_size.
class UniformScorer final : public LogLikelihoodProvider {
public:
    explicit UniformScorer(double vocab_size = 32000.0) : vocab_(vocab_size) {
        require(vocab_ >= 1.0, "UniformScorer: vocabulary size must be >= 1");
    }

    std::string id() const override { return "uniform-scorer"; }
    std::string model() const override { return "uniform-v" + std::to_string(vocab_); }
    double vocab_size() const noexcept { return vocab_; }

    std::vector<double> score(std::string_view text) override {
        return std::vector<double>(WhitespaceTokenizer{}.count(text), std::log(vocab_));
    }

private:
    double vocab_;
};

/// Scores a prompt with an OpenAI-compatible `/completions` endpoint using
/// echo + logprobs (vLLM and llama.cpp servers support this). The first token
/// has no conditional probability and is skipped.
class CompletionsScorer final : public LogLikelihoodProvider {
public:
    explicit CompletionsScorer(Endpoint endpoint, RetryPolicy policy = {},
                               Sleeper sleeper = real_sleeper())
        : http_(std::move(endpoint)), policy_(policy), sleep_(std::move(sleeper)) {}

    std::string id() const override { return "completions-scorer:" + http_.endpoint().base_url; }
    std::string model() const override { return http_.endpoint().model_id; }

    std::vector<double> score(std::string_view text) override {
        const nlohmann::json body = {{"model", http_.endpoint().model_id},
                                     {"prompt", std::string(text)},
                                     {"max_tokens", 1},
                                     {"temperature", 0.0},
                                     {"echo", true},
                                     {"logprobs", 0}};
        const auto reply =
            with_retries(policy_, sleep_, retries_, "score", [&] { return http_.post("/completions", body); });
        try {
            const auto& lps = reply.at("choices").at(0).at("logprobs").at("token_logprobs");
            std::vector<double> nll;
            // echo returns prompt tokens plus the one generated token; drop the latter.
            const std::size_t prompt_tokens = lps.size() > 0 ? lps.size() - 1 : 0;
            for (std::size_t i = 0; i < prompt_tokens; ++i) {
                if (lps[i].is_null()) continue;
                nll.push_back(-lps[i].get<double>());
            }
            return nll;
        } catch (const nlohmann::json::exception& e) {
            fail(ErrorCode::ProviderError, std::string("unexpected completions reply: ") + e.what());
        }
    }

private:
    HttpJsonClient http_;
    RetryPolicy policy_;
    Sleeper sleep_;
    std::atomic<std::size_t> retries_{0};
};

}  // namespace trace_profiler::providers
