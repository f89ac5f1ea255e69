#pragma once

// Reasoning corpora: loading, think-span parsing, length filtering, and
// per-variant character/token statistics.

#include "trace_profiler/error.hpp"
#include "trace_profiler/unicode.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <vector>

namespace trace_profiler {

enum class Domain { Math, Code, Science, Other };

inline constexpr std::array<Domain, 4> kAllDomains = {Domain::Math, Domain::Code, Domain::Science,
                                                      Domain::Other};

inline std::string_view to_string(Domain d) {
    switch (d) {
        case Domain::Math: return "math";
        case Domain::Code: return "code";
        case Domain::Science: return "science";
        case Domain::Other: return "other";
    }
    return "other";
}

inline std::optional<Domain> parse_domain(std::string_view s) {
    for (Domain d : kAllDomains)
        if (to_string(d) == s) return d;
    return std::nullopt;
}

struct Example {
    std::string id;
    Domain domain = Domain::Other;
    std::string query;
    std::string reasoning;
    std::string answer;
    std::map<std::string, std::string> meta;
};

struct Provenance {
    std::string source_path;
    std::chrono::system_clock::time_point loaded_at{};
};

struct Corpus {
    std::string name;
    std::vector<Example> examples;
    Provenance provenance;

    std::size_t size() const noexcept { return examples.size(); }
    bool empty() const noexcept { return examples.empty(); }
};

enum class Schema { Structured, Chat };

inline std::optional<Schema> parse_schema(std::string_view s) {
    if (s == "structured") return Schema::Structured;
    if (s == "chat") return Schema::Chat;
    return std::nullopt;
}

/// Token counting capability. count("") must be 0 and results deterministic.
class Tokenizer {
public:
    virtual ~Tokenizer() = default;
    virtual std::string id() const = 0;
    virtual std::size_t count(std::string_view text) const = 0;
};

/// Counts maximal runs of non-whitespace characters.
class WhitespaceTokenizer final : public Tokenizer {
public:
    std::string id() const override { return "whitespace"; }

    std::size_t count(std::string_view text) const override {
        std::size_t n = 0;
        bool in_token = false;
        unicode::for_each_scalar(text, [&](char32_t c) {
            const bool space = unicode::is_space(c);
            if (!space && !in_token) ++n;
            in_token = !space;
        });
        return n;
    }
};

struct ReasoningSplit {
    std::string reasoning;
    std::string answer;
};

inline constexpr std::string_view kThinkOpen = "<think>";
inline constexpr std::string_view kThinkClose = "</think>";

namespace detail {

inline std::size_t count_occurrences(std::string_view text, std::string_view needle) {
    std::size_t n = 0;
    for (auto pos = text.find(needle); pos != std::string_view::npos;
         pos = text.find(needle, pos + needle.size()))
        ++n;
    return n;
}

}  // namespace detail

/// Splits an assistant turn of the form `<think>R</think>A`.
inline ReasoningSplit split_reasoning(std::string_view text) {
    const auto opens = detail::count_occurrences(text, kThinkOpen);
    const auto closes = detail::count_occurrences(text, kThinkClose);
    if (opens == 0 && closes == 0) fail(ErrorCode::NoThinkSpan, "no <think> span in assistant text");
    if (opens != 1 || closes != 1)
        fail(ErrorCode::UnbalancedTags, "expected exactly one <think> and one </think>");
    const auto open = text.find(kThinkOpen);
    const auto close = text.find(kThinkClose);
    if (close < open) fail(ErrorCode::UnbalancedTags, "</think> precedes <think>");
    if (!unicode::is_blank(text.substr(0, open)))
        fail(ErrorCode::ContentBeforeThink, "non-whitespace text before <think>");

    const auto body_begin = open + kThinkOpen.size();
    ReasoningSplit out;
    out.reasoning = std::string(text.substr(body_begin, close - body_begin));
    out.answer = std::string(unicode::trim_left(text.substr(close + kThinkClose.size())));
    return out;
}

namespace detail {

inline std::string line_context(std::size_t line) { return "line " + std::to_string(line); }

inline const nlohmann::json& field(const nlohmann::json& obj, std::string_view name,
                                   std::size_t line) {
    auto it = obj.find(name);
    if (it == obj.end() || !it->is_string())
        fail(ErrorCode::MissingField, line_context(line) + ": missing string field \"" +
                                          std::string(name) + "\"");
    return *it;
}

inline Example parse_structured(const nlohmann::json& obj, std::size_t line) {
    Example ex;
    ex.id = field(obj, "id", line).get<std::string>();
    const auto domain = field(obj, "domain", line).get<std::string>();
    ex.query = field(obj, "query", line).get<std::string>();
    ex.reasoning = field(obj, "reasoning", line).get<std::string>();
    ex.answer = field(obj, "answer", line).get<std::string>();
    auto d = parse_domain(domain);
    if (!d) fail(ErrorCode::ParseError, line_context(line) + ": unknown domain \"" + domain + "\"");
    ex.domain = *d;
    if (auto it = obj.find("meta"); it != obj.end() && it->is_object()) {
        for (const auto& [k, v] : it->items())
            if (v.is_string()) ex.meta[k] = v.get<std::string>();
    }
    return ex;
}

inline Example parse_chat(const nlohmann::json& obj, std::size_t line) {
    Example ex;
    ex.id = field(obj, "id", line).get<std::string>();
    const auto domain = field(obj, "domain", line).get<std::string>();
    auto d = parse_domain(domain);
    if (!d) fail(ErrorCode::ParseError, line_context(line) + ": unknown domain \"" + domain + "\"");
    ex.domain = *d;

    auto messages = obj.find("messages");
    if (messages == obj.end() || !messages->is_array())
        fail(ErrorCode::MissingField, line_context(line) + ": missing array field \"messages\"");
    std::optional<std::string> user;
    std::optional<std::string> assistant;
    for (const auto& m : *messages) {
        if (!m.is_object() || !m.contains("role") || !m.contains("content")) continue;
        const auto role = m["role"].get<std::string>();
        if (role == "user" && !user) user = m["content"].get<std::string>();
        if (role == "assistant") assistant = m["content"].get<std::string>();
    }
    if (!user) fail(ErrorCode::MissingField, line_context(line) + ": no user message");
    if (!assistant) fail(ErrorCode::MissingField, line_context(line) + ": no assistant message");
    ex.query = *user;
    try {
        auto split = split_reasoning(*assistant);
        ex.reasoning = std::move(split.reasoning);
        ex.answer = std::move(split.answer);
    } catch (const Error& e) {
        throw Error(e.code(), line_context(line) + ": " + e.message());
    }
    return ex;
}

}  // namespace detail

/// Parses newline-delimited JSON records from a stream. Blank lines are skipped.
inline Corpus parse_corpus(std::istream& in, Schema schema, std::string name = {}) {
    Corpus corpus;
    corpus.name = std::move(name);
    std::unordered_set<std::string> seen;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (unicode::is_blank(line)) continue;
        nlohmann::json obj;
        try {
            obj = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            fail(ErrorCode::ParseError, detail::line_context(line_no) + ": " + e.what());
        }
        if (!obj.is_object())
            fail(ErrorCode::ParseError, detail::line_context(line_no) + ": record is not an object");
        Example ex = schema == Schema::Structured ? detail::parse_structured(obj, line_no)
                                                  : detail::parse_chat(obj, line_no);
        if (ex.id.empty()) fail(ErrorCode::MissingField, detail::line_context(line_no) + ": empty id");
        if (!seen.insert(ex.id).second)
            fail(ErrorCode::DuplicateId, detail::line_context(line_no) + ": duplicate id \"" + ex.id + "\"");
        corpus.examples.push_back(std::move(ex));
    }
    if (corpus.empty()) fail(ErrorCode::EmptyCorpus, "corpus has no records");
    return corpus;
}

inline Corpus load_corpus(const std::filesystem::path& path, Schema schema, std::string name = {}) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::ParseError, "cannot open corpus file " + path.string());
    if (name.empty()) name = path.stem().string();
    Corpus corpus = parse_corpus(in, schema, std::move(name));
    corpus.provenance = {path.string(), std::chrono::system_clock::now()};
    return corpus;
}

inline std::string serialize_example(const Example& ex) {
    nlohmann::ordered_json obj;
    obj["id"] = ex.id;
    obj["domain"] = std::string(to_string(ex.domain));
    obj["query"] = ex.query;
    obj["reasoning"] = ex.reasoning;
    obj["answer"] = ex.answer;
    if (!ex.meta.empty()) obj["meta"] = ex.meta;
    return obj.dump();
}

/// Structured-schema JSONL, one record per line, trailing newline.
inline std::string serialize_corpus(const Corpus& corpus) {
    std::string out;
    for (const auto& ex : corpus.examples) {
        out += serialize_example(ex);
        out += '\n';
    }
    return out;
}

inline void write_corpus(const Corpus& corpus, const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorCode::ParseError, "cannot write " + path.string());
    out << serialize_corpus(corpus);
}

/// query, reasoning and answer joined with single newlines.
inline std::string total_sequence(const Example& ex) {
    std::string s;
    s.reserve(ex.query.size() + ex.reasoning.size() + ex.answer.size() + 2);
    s += ex.query;
    s += '\n';
    s += ex.reasoning;
    s += '\n';
    s += ex.answer;
    return s;
}

struct CorpusStats {
    double avg_reasoning_tokens = 0.0;
    double avg_reasoning_chars = 0.0;
    double avg_total_tokens = 0.0;
    double avg_total_chars = 0.0;
    std::string tokenizer_id;
    std::size_t n_examples = 0;
    std::map<Domain, std::size_t> domain_histogram;
};

inline CorpusStats compute_stats(const Corpus& corpus, const Tokenizer& tokenizer) {
    if (corpus.empty()) fail(ErrorCode::EmptyCorpus, "cannot compute stats of an empty corpus");
    CorpusStats stats;
    stats.tokenizer_id = tokenizer.id();
    stats.n_examples = corpus.size();
    for (Domain d : kAllDomains) stats.domain_histogram[d] = 0;

    double reasoning_tokens = 0, reasoning_chars = 0, total_tokens = 0, total_chars = 0;
    for (const auto& ex : corpus.examples) {
        const auto total = total_sequence(ex);
        reasoning_tokens += static_cast<double>(tokenizer.count(ex.reasoning));
        reasoning_chars += static_cast<double>(unicode::scalar_count(ex.reasoning));
        total_tokens += static_cast<double>(tokenizer.count(total));
        total_chars += static_cast<double>(unicode::scalar_count(total));
        ++stats.domain_histogram[ex.domain];
    }
    const auto n = static_cast<double>(corpus.size());
    stats.avg_reasoning_tokens = reasoning_tokens / n;
    stats.avg_reasoning_chars = reasoning_chars / n;
    stats.avg_total_tokens = total_tokens / n;
    stats.avg_total_chars = total_chars / n;
    return stats;
}

inline nlohmann::ordered_json to_json(const CorpusStats& s) {
    nlohmann::ordered_json j;
    j["avg_reasoning_tokens"] = s.avg_reasoning_tokens;
    j["avg_reasoning_chars"] = s.avg_reasoning_chars;
    j["avg_total_tokens"] = s.avg_total_tokens;
    j["avg_total_chars"] = s.avg_total_chars;
    j["tokenizer_id"] = s.tokenizer_id;
    j["n_examples"] = s.n_examples;
    nlohmann::ordered_json hist;
    for (const auto& [d, c] : s.domain_histogram) hist[std::string(to_string(d))] = c;
    j["domain_histogram"] = hist;
    return j;
}

inline constexpr std::size_t kDefaultTokenLimit = 32768;

struct FilterResult {
    Corpus corpus;
    std::vector<std::string> removed;
};

/// Drops examples whose total sequence exceeds `limit` tokens, keeping order.
inline FilterResult filter_by_length(const Corpus& corpus, const Tokenizer& tokenizer,
                                     std::size_t limit = kDefaultTokenLimit) {
    require(limit > 0, "token limit must be positive");
    FilterResult result;
    result.corpus.name = corpus.name;
    result.corpus.provenance = corpus.provenance;
    for (const auto& ex : corpus.examples) {
        if (tokenizer.count(total_sequence(ex)) <= limit)
            result.corpus.examples.push_back(ex);
        else
            result.removed.push_back(ex.id);
    }
    if (result.corpus.empty())
        fail(ErrorCode::EmptyCorpus, "every example exceeds the token limit");
    return result;
}

}  // namespace trace_profiler
