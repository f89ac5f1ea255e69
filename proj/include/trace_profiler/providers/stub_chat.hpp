#pragma once

// Rule-table chat stub and the offline rule set that answers the atomizer,
// step-judge and answer-judge prompts deterministically.

#include "trace_profiler/error.hpp"
#include "trace_profiler/prompts.hpp"
#include "trace_profiler/providers/chat.hpp"
#include "trace_profiler/providers/nlp.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <functional>
#include <memory>
#include <regex>
#include <set>
#include <string>
#include <vector>

namespace trace_profiler::providers {

class RuleTableChat final : public ChatProvider {
public:
    struct Rule {
        std::string name;
        std::function<bool(const ChatRequest&)> matches;
        std::function<std::string(const ChatRequest&)> reply;
    };

    explicit RuleTableChat(std::vector<Rule> rules, std::string model = "rule-table-v1")
        : rules_(std::move(rules)), model_(std::move(model)) {}

    std::string id() const override { return "stub-chat"; }
    std::string model() const override { return model_; }

    std::string complete(const ChatRequest& request) override {
        ++calls_;
        for (const auto& rule : rules_)
            if (rule.matches(request)) return rule.reply(request);
        fail(ErrorCode::PermanentProviderError, "stub chat: no rule matches task \"" + request.task + "\"");
    }

    std::size_t calls() const noexcept { return calls_.load(); }

private:
    std::vector<Rule> rules_;
    std::string model_;
    std::atomic<std::size_t> calls_{0};
};

inline RuleTableChat::Rule task_rule(std::string task, std::function<std::string(const ChatRequest&)> reply) {
    return {task, [task](const ChatRequest& r) { return r.task == task; }, std::move(reply)};
}

/// First user message; repair turns keep the original context there.
inline const std::string& first_user_message(const ChatRequest& r) {
    for (const auto& m : r.messages)
        if (m.role == "user") return m.content;
    fail(ErrorCode::PermanentProviderError, "stub chat: request has no user message");
}

namespace offline {

/// Lowercased words of three or more characters, plus every number.
inline std::set<std::string> content_words(std::string_view text) {
    std::set<std::string> out;
    std::string cur;
    auto flush = [&] {
        const bool numeric = !cur.empty() && std::isdigit(static_cast<unsigned char>(cur[0]));
        if (cur.size() >= 3 || numeric) out.insert(cur);
        cur.clear();
    };
    for (unsigned char c : text) {
        if (std::isalnum(c) || c >= 0x80) {
            cur += static_cast<char>(std::tolower(c));
        } else {
            flush();
        }
    }
    flush();
    return out;
}

inline std::vector<std::string> numbers_in(std::string_view text) {
    static const std::regex number(R"(\d+(?:\.\d+)?)");
    std::vector<std::string> out;
    const std::string s(text);
    for (auto it = std::sregex_iterator(s.begin(), s.end(), number); it != std::sregex_iterator(); ++it)
        out.push_back(it->str());
    return out;
}

struct Equation {
    double lhs_a, lhs_b, rhs;
    char op;
    std::string result;
};

inline std::vector<Equation> equations_in(std::string_view text) {
    static const std::regex eq(
        R"((\d+(?:\.\d+)?)\s*(\+|-|\*|/|x|×)\s*(\d+(?:\.\d+)?)\s*=\s*(\d+(?:\.\d+)?))");
    std::vector<Equation> out;
    const std::string s(text);
    for (auto it = std::sregex_iterator(s.begin(), s.end(), eq); it != std::sregex_iterator(); ++it) {
        const auto& m = *it;
        const std::string op = m[2].str();
        out.push_back({std::stod(m[1].str()), std::stod(m[3].str()), std::stod(m[4].str()),
                       op == "×" ? 'x' : op[0], m[4].str()});
    }
    return out;
}

inline bool equation_holds(const Equation& e) {
    double value = 0;
    switch (e.op) {
        case '+': value = e.lhs_a + e.lhs_b; break;
        case '-': value = e.lhs_a - e.lhs_b; break;
        case '*':
        case 'x': value = e.lhs_a * e.lhs_b; break;
        case '/':
            if (e.lhs_b == 0) return false;
            value = e.lhs_a / e.lhs_b;
            break;
        default: return false;
    }
    return std::abs(value - e.rhs) <= 1e-3 * std::max(1.0, std::abs(value));
}

inline std::string normalized(std::string_view text) {
    std::string out;
    for (const auto& w : content_words(text)) out += w + " ";
    return out;
}

struct StepJudgement {
    bool factuality = true;
    bool validity = true;
    bool coherence = true;
    bool utility = true;
    std::string rationale;
};

/// Deterministic heuristics standing in for a judge model:
///  - validity: every `a op b = c` in the step is arithmetically right;
///  - factuality: numbers above 10 are grounded in the query, premises,
///    earlier steps, or are results computed in this step;
///  - coherence: the step shares a content word with the previous step
///    (the query for the first step);
///  - utility: the step does not repeat an earlier step and is not filler
///    (no number, no symbol, nothing shared with the query).
inline StepJudgement judge_step_heuristic(std::string_view query, std::string_view premises,
                                          const std::vector<std::string>& prior, std::string_view step) {
    StepJudgement j;
    std::vector<std::string> reasons;

    const auto eqs = equations_in(step);
    for (const auto& e : eqs)
        if (!equation_holds(e)) {
            j.validity = false;
            reasons.push_back("arithmetic error");
            break;
        }

    std::set<std::string> grounded;
    for (const auto& n : numbers_in(query)) grounded.insert(n);
    for (const auto& n : numbers_in(premises)) grounded.insert(n);
    for (const auto& p : prior)
        for (const auto& n : numbers_in(p)) grounded.insert(n);
    for (const auto& e : eqs) grounded.insert(e.result);
    for (const auto& n : numbers_in(step)) {
        if (std::stod(n) <= 10.0) continue;
        if (!grounded.count(n)) {
            j.factuality = false;
            reasons.push_back("ungrounded value " + n);
            break;
        }
    }

    const auto step_words = content_words(step);
    const auto anchor_words = content_words(prior.empty() ? query : std::string_view(prior.back()));
    bool shares = false;
    for (const auto& w : step_words)
        if (anchor_words.count(w)) {
            shares = true;
            break;
        }
    if (!shares) {
        j.coherence = false;
        reasons.push_back("no link to the preceding step");
    }

    const auto norm = normalized(step);
    for (const auto& p : prior)
        if (normalized(p) == norm) {
            j.utility = false;
            reasons.push_back("repeats an earlier step (reasoning loop)");
            break;
        }
    if (j.utility) {
        bool has_number = !numbers_in(step).empty();
        bool has_symbol = false;
        for (unsigned char c : step)
            if (std::string_view("=+-*/<>^()[]{}%").find(static_cast<char>(c)) != std::string_view::npos)
                has_symbol = true;
        const auto query_words = content_words(query);
        bool shares_query = false;
        for (const auto& w : step_words)
            if (query_words.count(w)) shares_query = true;
        if (!has_number && !has_symbol && !shares_query) {
            j.utility = false;
            reasons.push_back("filler without progress");
        }
    }

    if (reasons.empty()) {
        j.rationale = "All checks passed.";
    } else {
        j.rationale = "Flagged: ";
        for (std::size_t i = 0; i < reasons.size(); ++i) j.rationale += (i ? "; " : "") + reasons[i];
        j.rationale += ".";
    }
    return j;
}

inline std::vector<std::string> split_prior_steps(std::string_view block) {
    std::vector<std::string> out;
    static const std::string open = "<prior>";
    static const std::string close = "</prior>";
    std::size_t pos = 0;
    while ((pos = block.find(open, pos)) != std::string_view::npos) {
        const auto begin = pos + open.size();
        const auto end = block.find(close, begin);
        if (end == std::string_view::npos) break;
        out.emplace_back(block.substr(begin, end - begin));
        pos = end + close.size();
    }
    return out;
}

/// Final answer of a prediction with any think span removed, normalised.
inline std::string answer_key(std::string_view text) {
    if (auto close = text.rfind("</think>"); close != std::string_view::npos)
        text = text.substr(close + 8);
    std::string out;
    for (unsigned char c : text) {
        if (std::isspace(c)) continue;
        out += static_cast<char>(std::tolower(c));
    }
    while (!out.empty() && (out.back() == '.' || out.back() == '!')) out.pop_back();
    return out;
}

inline std::string atomize_reply(const ChatRequest& r) {
    const auto reasoning = prompts::extract_section(first_user_message(r), "reasoning");
    if (!reasoning) fail(ErrorCode::PermanentProviderError, "stub atomizer: no <reasoning> section");
    nlohmann::json steps = nlohmann::json::array();
    for (auto& s : PunctuationSegmenter::split(*reasoning).sentences) steps.push_back(std::move(s));
    return nlohmann::json{{"steps", steps}}.dump();
}

inline std::string judge_step_reply(const ChatRequest& r) {
    const auto& user = first_user_message(r);
    const auto query = prompts::extract_section(user, "query").value_or("");
    const auto premises = prompts::extract_section(user, "premises").value_or("");
    const auto prior = split_prior_steps(prompts::extract_section(user, "prior_steps").value_or(""));
    const auto step = prompts::extract_section(user, "step");
    if (!step) fail(ErrorCode::PermanentProviderError, "stub judge: no <step> section");
    const auto j = judge_step_heuristic(query, premises, prior, *step);
    return nlohmann::json{{"factuality", j.factuality},
                          {"validity", j.validity},
                          {"coherence", j.coherence},
                          {"utility", j.utility},
                          {"rationale", j.rationale}}
        .dump();
}

inline std::string judge_answer_reply(const ChatRequest& r) {
    const auto& user = first_user_message(r);
    const auto reference = prompts::extract_section(user, "reference").value_or("");
    const auto prediction = prompts::extract_section(user, "prediction").value_or("");
    const bool correct = !reference.empty() && answer_key(reference) == answer_key(prediction);
    return nlohmann::json{{"correct", correct},
                          {"rationale", correct ? "Final answer matches the reference."
                                                : "Final answer differs from the reference."}}
        .dump();
}

}  // namespace offline

inline std::vector<RuleTableChat::Rule> offline_rules() {
    return {task_rule("atomize", offline::atomize_reply),
            task_rule("judge_step", offline::judge_step_reply),
            task_rule("judge_answer", offline::judge_answer_reply)};
}

inline std::shared_ptr<RuleTableChat> make_offline_chat() {
    return std::make_shared<RuleTableChat>(offline_rules());
}

}  // namespace trace_profiler::providers
