#pragma once

// Content-addressed response cache: one canonical-JSON file per request,
// named by the SHA-256 of the canonical request.

#include "trace_profiler/error.hpp"
#include "trace_profiler/providers/chat.hpp"

#include <nlohmann/json.hpp>
#include <openssl/evp.h>
#include <spdlog/spdlog.h>

#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <thread>

namespace trace_profiler::providers {

inline std::string sha256_hex(std::string_view data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int length = 0;
    if (EVP_Digest(data.data(), data.size(), digest, &length, EVP_sha256(), nullptr) != 1)
        fail(ErrorCode::ProviderError, "SHA-256 digest failed");
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    out.reserve(length * 2);
    for (unsigned int i = 0; i < length; ++i) {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 0xF];
    }
    return out;
}

struct CacheEntry {
    std::string key;
    std::string value;
    std::string provider_id;
    std::string created_at;
};

struct CacheStats {
    std::size_t hits = 0;
    std::size_t misses = 0;
    std::size_t corrupt = 0;
};

class ResponseCache {
public:
    explicit ResponseCache(std::filesystem::path dir) : dir_(std::move(dir)) {
        std::filesystem::create_directories(dir_);
    }

    const std::filesystem::path& directory() const noexcept { return dir_; }

    /// Key over provider id, model id and the full canonical request.
    static std::string key_for(std::string_view provider_id, std::string_view model_id,
                               const nlohmann::json& request) {
        const nlohmann::json envelope = {
            {"provider", provider_id}, {"model", model_id}, {"request", request}};
        return sha256_hex(envelope.dump());
    }

    std::filesystem::path path_for(const std::string& key) const { return dir_ / (key + ".json"); }

    /// Returns the stored value, or nullopt on a miss. Entries failing the
    /// integrity check count as corrupt and behave as misses.
    std::optional<std::string> get(const std::string& key) {
        const auto path = path_for(key);
        if (!std::filesystem::exists(path)) {
            ++misses_;
            return std::nullopt;
        }
        try {
            auto entry = read_entry(path);
            if (entry.key != key) fail(ErrorCode::CacheCorrupt, "key mismatch in " + path.string());
            ++hits_;
            return std::move(entry.value);
        } catch (const Error& e) {
            if (e.code() != ErrorCode::CacheCorrupt) throw;
            spdlog::warn("cache entry {} is corrupt, treating as miss", path.filename().string());
            ++corrupt_;
            ++misses_;
            return std::nullopt;
        }
    }

    void put(const std::string& key, const nlohmann::json& request, const std::string& value,
             std::string_view provider_id) {
        nlohmann::json entry = {
            {"key", key},
            {"provider_id", provider_id},
            {"created_at", timestamp()},
            {"request", request},
            {"value", value},
            {"value_sha256", sha256_hex(value)},
        };
        const auto target = path_for(key);
        std::ostringstream tmp_name;
        tmp_name << key << ".tmp." << std::this_thread::get_id() << "." << ++sequence_;
        const auto tmp = dir_ / tmp_name.str();
        {
            std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
            if (!out) fail(ErrorCode::ProviderError, "cannot write cache file " + tmp.string());
            out << entry.dump(2) << '\n';
        }
        std::filesystem::rename(tmp, target);
    }

    CacheStats stats() const { return {hits_.load(), misses_.load(), corrupt_.load()}; }

    static CacheEntry read_entry(const std::filesystem::path& path) {
        std::ifstream in(path, std::ios::binary);
        std::stringstream buf;
        buf << in.rdbuf();
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(buf.str());
            CacheEntry entry{j.at("key").get<std::string>(), j.at("value").get<std::string>(),
                             j.at("provider_id").get<std::string>(),
                             j.at("created_at").get<std::string>()};
            if (sha256_hex(entry.value) != j.at("value_sha256").get<std::string>())
                fail(ErrorCode::CacheCorrupt, "checksum mismatch in " + path.string());
            return entry;
        } catch (const nlohmann::json::exception& e) {
            fail(ErrorCode::CacheCorrupt, path.string() + ": " + e.what());
        }
    }

private:
    static std::string timestamp() {
        const auto now = std::chrono::system_clock::now();
        const auto secs = std::chrono::duration_cast<std::chrono::seconds>(now.time_since_epoch());
        return std::to_string(secs.count());
    }

    std::filesystem::path dir_;
    std::atomic<std::size_t> hits_{0};
    std::atomic<std::size_t> misses_{0};
    std::atomic<std::size_t> corrupt_{0};
    std::atomic<std::size_t> sequence_{0};
};

class CachedChat final : public ChatProvider {
public:
    CachedChat(std::shared_ptr<ChatProvider> inner, std::shared_ptr<ResponseCache> cache)
        : inner_(std::move(inner)), cache_(std::move(cache)) {}

    std::string id() const override { return inner_->id(); }
    std::string model() const override { return inner_->model(); }

    std::string complete(const ChatRequest& request) override {
        const auto req = canonical(request);
        const auto key = ResponseCache::key_for(inner_->id(), inner_->model(), req);
        if (auto hit = cache_->get(key)) return *hit;
        auto reply = inner_->complete(request);
        cache_->put(key, req, reply, inner_->id());
        return reply;
    }

private:
    std::shared_ptr<ChatProvider> inner_;
    std::shared_ptr<ResponseCache> cache_;
};

}  // namespace trace_profiler::providers
