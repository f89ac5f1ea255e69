#pragma once

// Versioned prompt templates. Sources live in prompts/*.txt and are embedded
// at build time; each file has an optional header, then `=== system ===` and
// `=== user ===` sections with {{placeholder}} slots.

#include "trace_profiler/error.hpp"
#include "trace_profiler/prompt_sources.hpp"

#include <map>
#include <optional>
#include <string>
#include <string_view>

namespace trace_profiler::prompts {

struct PromptTemplate {
    std::string name;  // e.g. "step_judge.v1"
    std::string system;
    std::string user;

    static std::string substitute(std::string_view text, const std::map<std::string, std::string>& vars) {
        std::string out;
        std::size_t i = 0;
        while (i < text.size()) {
            const auto open = text.find("{{", i);
            if (open == std::string_view::npos) {
                out.append(text.substr(i));
                break;
            }
            const auto close = text.find("}}", open + 2);
            if (close == std::string_view::npos) {
                out.append(text.substr(i));
                break;
            }
            out.append(text.substr(i, open - i));
            const std::string key(text.substr(open + 2, close - open - 2));
            auto it = vars.find(key);
            if (it == vars.end())
                fail(ErrorCode::Precondition, "prompt placeholder {{" + key + "}} has no value");
            out += it->second;
            i = close + 2;
        }
        return out;
    }

    std::string render_system(const std::map<std::string, std::string>& vars) const {
        return substitute(system, vars);
    }
    std::string render_user(const std::map<std::string, std::string>& vars) const {
        return substitute(user, vars);
    }
};

namespace detail {

inline std::string section(std::string_view text, std::string_view marker) {
    const auto pos = text.find(marker);
    if (pos == std::string_view::npos) return {};
    auto begin = text.find('\n', pos);
    if (begin == std::string_view::npos) return {};
    ++begin;
    auto end = text.find("\n=== ", begin);
    auto body = text.substr(begin, end == std::string_view::npos ? std::string_view::npos : end - begin);
    while (!body.empty() && body.back() == '\n') body.remove_suffix(1);
    return std::string(body);
}

}  // namespace detail

inline PromptTemplate parse_template(std::string_view name, std::string_view text) {
    PromptTemplate t;
    t.name = std::string(name);
    t.system = detail::section(text, "=== system ===");
    t.user = detail::section(text, "=== user ===");
    if (t.user.empty()) fail(ErrorCode::ConfigError, "prompt " + t.name + " has no user section");
    return t;
}

/// Looks up an embedded template by file stem, e.g. "atomizer.v1".
inline const PromptTemplate& get(std::string_view name) {
    static const std::map<std::string, PromptTemplate, std::less<>> all = [] {
        std::map<std::string, PromptTemplate, std::less<>> m;
        for (const auto& src : embedded::kSources)
            m.emplace(std::string(src.name), parse_template(src.name, src.text));
        return m;
    }();
    auto it = all.find(name);
    if (it == all.end()) fail(ErrorCode::ConfigError, "unknown prompt template " + std::string(name));
    return it->second;
}

inline constexpr std::string_view kAtomizer = "atomizer.v1";
inline constexpr std::string_view kAtomizerRepair = "atomizer_repair.v1";
inline constexpr std::string_view kStepJudge = "step_judge.v1";
inline constexpr std::string_view kVerdictRepair = "verdict_repair.v1";
inline constexpr std::string_view kAnswerJudge = "answer_judge.v1";

/// Text between the first `<tag>\n` and the following `\n</tag>`, or nullopt.
inline std::optional<std::string> extract_section(std::string_view text, std::string_view tag) {
    const std::string open = "<" + std::string(tag) + ">\n";
    const std::string close = "\n</" + std::string(tag) + ">";
    const auto b = text.find(open);
    if (b == std::string_view::npos) return std::nullopt;
    const auto begin = b + open.size();
    const auto e = text.rfind(close);
    if (e == std::string_view::npos || e < begin) return std::nullopt;
    return std::string(text.substr(begin, e - begin));
}

}  // namespace trace_profiler::prompts
