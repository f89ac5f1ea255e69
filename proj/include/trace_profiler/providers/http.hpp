#pragma once

// JSON-over-HTTP transport shared by every network-backed provider.

#include "trace_profiler/error.hpp"
#include "trace_profiler/parallel.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <atomic>
#include <chrono>
#include <regex>
#include <string>
#include <string_view>

namespace trace_profiler::providers {

struct Endpoint {
    std::string base_url;
    std::string api_key;
    std::string model_id;

    bool configured() const noexcept { return !base_url.empty(); }
};

/// Process-wide count of HTTP requests attempted. Offline runs must leave it at zero.
inline std::atomic<std::size_t>& network_operations() {
    static std::atomic<std::size_t> counter{0};
    return counter;
}

inline constexpr std::size_t kDefaultConcurrency = 8;

inline std::atomic<std::size_t>& request_concurrency() {
    static std::atomic<std::size_t> permits{kDefaultConcurrency};
    return permits;
}

/// Global limit on in-flight provider requests; sized from request_concurrency()
/// on first use.
inline Semaphore& request_limiter() {
    static Semaphore limiter(request_concurrency().load());
    return limiter;
}

class HttpJsonClient {
public:
    explicit HttpJsonClient(Endpoint endpoint,
                            std::chrono::seconds timeout = std::chrono::seconds(120))
        : endpoint_(std::move(endpoint)), timeout_(timeout) {
        static const std::regex url(R"((https?://[^/]+)(/.*)?)", std::regex::icase);
        std::smatch m;
        if (!std::regex_match(endpoint_.base_url, m, url))
            fail(ErrorCode::ConfigError, "invalid base_url \"" + endpoint_.base_url + "\"");
        origin_ = m[1].str();
        prefix_ = m[2].matched ? m[2].str() : "";
        while (!prefix_.empty() && prefix_.back() == '/') prefix_.pop_back();
    }

    const Endpoint& endpoint() const noexcept { return endpoint_; }

    nlohmann::json post(std::string_view path, const nlohmann::json& body) const {
        return send("POST", path, body.dump());
    }

    nlohmann::json get(std::string_view path) const { return send("GET", path, {}); }

private:
    nlohmann::json send(std::string_view method, std::string_view path, const std::string& body) const {
        SemaphoreGuard guard(request_limiter());
        ++network_operations();
        httplib::Client client(origin_);
        client.set_connection_timeout(timeout_);
        client.set_read_timeout(timeout_);
        client.set_write_timeout(timeout_);
        httplib::Headers headers;
        if (!endpoint_.api_key.empty())
            headers.emplace("Authorization", "Bearer " + endpoint_.api_key);
        const std::string target = prefix_ + std::string(path);
        auto result = method == "POST" ? client.Post(target, headers, body, "application/json")
                                       : client.Get(target, headers);
        if (!result) {
            fail(ErrorCode::Timeout, std::string(method) + " " + origin_ + target + " failed: " +
                                         httplib::to_string(result.error()));
        }
        const int status = result->status;
        if (status == 429) fail(ErrorCode::RateLimited, origin_ + target + " returned 429");
        if (status == 408 || status >= 500)
            fail(ErrorCode::Timeout, origin_ + target + " returned " + std::to_string(status));
        if (status < 200 || status >= 300)
            fail(ErrorCode::PermanentProviderError,
                 origin_ + target + " returned " + std::to_string(status) + ": " + result->body);
        try {
            return nlohmann::json::parse(result->body);
        } catch (const nlohmann::json::parse_error& e) {
            fail(ErrorCode::ProviderError, origin_ + target + " returned invalid JSON: " + e.what());
        }
    }

    Endpoint endpoint_;
    std::chrono::seconds timeout_;
    std::string origin_;
    std::string prefix_;
};

}  // namespace trace_profiler::providers
