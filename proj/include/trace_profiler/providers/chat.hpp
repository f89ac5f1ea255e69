#pragma once

#include "trace_profiler/error.hpp"
#include "trace_profiler/providers/http.hpp"

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace trace_profiler::providers {

struct ChatMessage {
    std::string role;
    std::string content;
};

struct Decoding {
    double temperature = 0.0;
    std::optional<double> top_p;
    std::optional<int> max_tokens;
};

/// Decoding used when the fine-tuned models generated benchmark predictions.
/// Kept for reference; judging always runs at temperature 0.
struct GenerationDecoding {
    static constexpr double temperature = 0.6;
    static constexpr double top_p = 0.95;
    static constexpr int top_k = 20;
    static constexpr double min_p = 0.1;
    static constexpr double repetition_penalty = 1.2;
};

struct ChatRequest {
    std::vector<ChatMessage> messages;
    Decoding decoding;
    bool structured = false;  // ask for a JSON-object reply
    std::string task;         // routing label for stubs and logs, e.g. "atomize"
};

/// Canonical form used for cache keys. nlohmann::json objects are key-sorted,
/// so the dump is independent of construction order.
inline nlohmann::json canonical(const ChatRequest& req) {
    nlohmann::json messages = nlohmann::json::array();
    for (const auto& m : req.messages) messages.push_back({{"role", m.role}, {"content", m.content}});
    nlohmann::json decoding = {{"temperature", req.decoding.temperature}};
    if (req.decoding.top_p) decoding["top_p"] = *req.decoding.top_p;
    if (req.decoding.max_tokens) decoding["max_tokens"] = *req.decoding.max_tokens;
    return {{"messages", messages},
            {"decoding", decoding},
            {"structured", req.structured},
            {"task", req.task}};
}

class ChatProvider {
public:
    virtual ~ChatProvider() = default;
    virtual std::string id() const = 0;
    virtual std::string model() const = 0;
    /// Must be safe to call concurrently.
    virtual std::string complete(const ChatRequest& request) = 0;
};

/// OpenAI-compatible `/chat/completions` client.
class OpenAiChatClient final : public ChatProvider {
public:
    explicit OpenAiChatClient(Endpoint endpoint) : http_(std::move(endpoint)) {}

    std::string id() const override { return "openai-chat:" + http_.endpoint().base_url; }
    std::string model() const override { return http_.endpoint().model_id; }

    std::string complete(const ChatRequest& request) override {
        nlohmann::json body;
        body["model"] = http_.endpoint().model_id;
        body["messages"] = canonical(request)["messages"];
        body["temperature"] = request.decoding.temperature;
        if (request.decoding.top_p) body["top_p"] = *request.decoding.top_p;
        if (request.decoding.max_tokens) body["max_tokens"] = *request.decoding.max_tokens;
        if (request.structured) body["response_format"] = {{"type", "json_object"}};
        const auto reply = http_.post("/chat/completions", body);
        try {
            return reply.at("choices").at(0).at("message").at("content").get<std::string>();
        } catch (const nlohmann::json::exception& e) {
            fail(ErrorCode::ProviderError, std::string("unexpected chat reply shape: ") + e.what());
        }
    }

private:
    HttpJsonClient http_;
};

struct RetryPolicy {
    int max_retries = 5;
    std::chrono::milliseconds initial_backoff{500};
    double multiplier = 2.0;
    std::chrono::milliseconds max_backoff{30000};
};

using Sleeper = std::function<void(std::chrono::milliseconds)>;

inline Sleeper real_sleeper() {
    return [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

/// Retries transient failures (Timeout, RateLimited) with exponential backoff.
/// Anything left after the retry budget becomes PermanentProviderError.
template <typename Fn>
auto with_retries(const RetryPolicy& policy, const Sleeper& sleep, std::atomic<std::size_t>& retries,
                  std::string_view what, Fn&& fn) -> decltype(fn()) {
    auto backoff = policy.initial_backoff;
    for (int attempt = 0;; ++attempt) {
        try {
            return fn();
        } catch (const Error& e) {
            if (!e.transient()) throw;
            if (attempt >= policy.max_retries)
                fail(ErrorCode::PermanentProviderError,
                     std::string(what) + " failed after " + std::to_string(attempt + 1) +
                         " attempts: " + e.what());
            ++retries;
            spdlog::warn("{}: transient failure (attempt {}), retrying in {} ms: {}", what, attempt + 1,
                         backoff.count(), e.what());
            sleep(backoff);
            backoff = std::min(policy.max_backoff,
                               std::chrono::milliseconds(static_cast<long long>(
                                   static_cast<double>(backoff.count()) * policy.multiplier)));
        }
    }
}

class RetryingChat final : public ChatProvider {
public:
    RetryingChat(std::shared_ptr<ChatProvider> inner, RetryPolicy policy = {},
                 Sleeper sleeper = real_sleeper())
        : inner_(std::move(inner)), policy_(policy), sleep_(std::move(sleeper)) {}

    std::string id() const override { return inner_->id(); }
    std::string model() const override { return inner_->model(); }

    std::string complete(const ChatRequest& request) override {
        return with_retries(policy_, sleep_, retries_, "chat " + request.task,
                            [&] { return inner_->complete(request); });
    }

    std::size_t retries() const noexcept { return retries_.load(); }

private:
    std::shared_ptr<ChatProvider> inner_;
    RetryPolicy policy_;
    Sleeper sleep_;
    std::atomic<std::size_t> retries_{0};
};

}  // namespace trace_profiler::providers
