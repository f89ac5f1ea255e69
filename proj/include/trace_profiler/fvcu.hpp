#pragma once

// Step-level reasoning review: an atomizer splits a trace into verbatim
// steps, a judge rates each step for Factuality, Validity, Coherence and
// Utility, and the verdicts aggregate into per-dimension pass percentages.

#include "trace_profiler/corpus.hpp"
#include "trace_profiler/error.hpp"
#include "trace_profiler/parallel.hpp"
#include "trace_profiler/prompts.hpp"
#include "trace_profiler/providers/chat.hpp"
#include "trace_profiler/providers/nlp.hpp"
#include "trace_profiler/unicode.hpp"

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include <map>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace trace_profiler::fvcu {

struct AtomicStep {
    std::size_t index = 0;
    std::string text;
    std::string source_example_id;
    std::size_t offset = 0;  // byte offset of `text` in the source reasoning
};

struct StepVerdict {
    std::string example_id;
    std::size_t step_index = 0;
    bool factuality = false;
    bool validity = false;
    bool coherence = false;
    bool utility = false;
    std::string rationale;
};

struct DimensionPercentages {
    double factuality = 0;
    double validity = 0;
    double coherence = 0;
    double utility = 0;
};

struct FvcuScores {
    double factuality_pct = 0;
    double validity_pct = 0;
    double coherence_pct = 0;
    double utility_pct = 0;
    std::size_t n_steps = 0;
    std::size_t n_examples = 0;
    DimensionPercentages example_weighted;  // mean of per-example percentages
};

/// Parses the first JSON object in a model reply, tolerating code fences
/// and surrounding prose.
inline std::optional<nlohmann::json> parse_json_object(std::string_view reply) {
    const auto open = reply.find('{');
    const auto close = reply.rfind('}');
    if (open == std::string_view::npos || close == std::string_view::npos || close < open) return std::nullopt;
    try {
        auto j = nlohmann::json::parse(reply.substr(open, close - open + 1));
        if (!j.is_object()) return std::nullopt;
        return j;
    } catch (const nlohmann::json::parse_error&) {
        return std::nullopt;
    }
}

// ---------------------------------------------------------------------------
// Atomizer

struct AtomizerOptions {
    double min_coverage = 0.90;  // share of non-whitespace source characters
    int repair_retries = 1;
};

struct Alignment {
    std::vector<AtomicStep> steps;
    std::vector<std::string> problems;  // empty when every step is verbatim and in order
    double coverage = 0;
};

inline std::size_t non_whitespace_chars(std::string_view s) {
    std::size_t n = 0;
    unicode::for_each_scalar(s, [&](char32_t c) {
        if (!unicode::is_space(c)) ++n;
    });
    return n;
}

/// Locates each step in `source`, in order and without overlap.
inline Alignment align_steps(std::string_view source, const std::vector<std::string>& texts,
                             const std::string& example_id) {
    Alignment a;
    std::size_t cursor = 0;
    std::size_t covered = 0;
    for (std::size_t i = 0; i < texts.size(); ++i) {
        const auto& t = texts[i];
        if (t.empty() || unicode::is_blank(t)) {
            a.problems.push_back("step " + std::to_string(i) + " is empty");
            continue;
        }
        const auto pos = source.find(t, cursor);
        if (pos == std::string_view::npos) {
            const bool elsewhere = source.find(t) != std::string_view::npos;
            a.problems.push_back("step " + std::to_string(i) + (elsewhere ? " is out of order or overlaps: "
                                                                          : " is not verbatim: ") +
                                 "\"" + t + "\"");
            continue;
        }
        a.steps.push_back({a.steps.size(), t, example_id, pos});
        covered += non_whitespace_chars(t);
        cursor = pos + t.size();
    }
    const auto total = non_whitespace_chars(source);
    a.coverage = total == 0 ? 0.0 : static_cast<double>(covered) / static_cast<double>(total);
    return a;
}

namespace detail {

inline std::optional<std::vector<std::string>> parse_steps(std::string_view reply) {
    auto j = parse_json_object(reply);
    if (!j || !j->contains("steps") || !(*j)["steps"].is_array()) return std::nullopt;
    std::vector<std::string> out;
    for (const auto& s : (*j)["steps"]) {
        if (!s.is_string()) return std::nullopt;
        out.push_back(s.get<std::string>());
    }
    return out;
}

}  // namespace detail

inline providers::ChatRequest atomizer_request(const Example& ex) {
    const auto& t = prompts::get(prompts::kAtomizer);
    const std::map<std::string, std::string> vars = {{"query", ex.query}, {"reasoning", ex.reasoning}};
    providers::ChatRequest req;
    req.task = "atomize";
    req.structured = true;
    req.decoding.temperature = 0.0;
    req.messages = {{"system", t.render_system(vars)}, {"user", t.render_user(vars)}};
    return req;
}

/// Splits the reasoning into verbatim atomic steps. A reply with non-verbatim
/// steps, unparsable JSON or too little coverage gets one repair turn.
inline std::vector<AtomicStep> atomize(const Example& ex, providers::ChatProvider& chat,
                                       const AtomizerOptions& options = {}) {
    require(!ex.reasoning.empty(), "atomize: empty reasoning for " + ex.id);
    auto req = atomizer_request(ex);
    ErrorCode last_code = ErrorCode::NonVerbatimStep;
    std::string last_problem;
    for (int attempt = 0; attempt <= options.repair_retries; ++attempt) {
        const auto reply = chat.complete(req);
        std::vector<std::string> problems;
        if (auto texts = detail::parse_steps(reply)) {
            auto a = align_steps(ex.reasoning, *texts, ex.id);
            if (a.problems.empty() && !a.steps.empty() && a.coverage >= options.min_coverage) return a.steps;
            problems = a.problems;
            if (a.problems.empty()) {
                last_code = ErrorCode::InsufficientCoverage;
                problems.push_back("steps cover only " + std::to_string(static_cast<int>(a.coverage * 100)) +
                                   "% of the trace");
            } else {
                last_code = ErrorCode::NonVerbatimStep;
            }
        } else {
            last_code = ErrorCode::MalformedVerdict;
            problems.push_back("reply is not a JSON object with a \"steps\" array of strings");
        }
        last_problem.clear();
        for (const auto& p : problems) last_problem += "- " + p + "\n";
        req.messages.push_back({"assistant", reply});
        req.messages.push_back(
            {"user", prompts::get(prompts::kAtomizerRepair).render_user({{"problems", last_problem}})});
    }
    fail(last_code, "atomize " + ex.id + ":\n" + last_problem);
}

// ---------------------------------------------------------------------------
// Judge

/// Declarative sentences of the problem statement; questions are dropped.
inline std::string extract_premises(std::string_view query) {
    std::string out;
    for (const auto& s : providers::PunctuationSegmenter::split(query).sentences) {
        if (!s.empty() && s.back() == '?') continue;
        out += "- " + s + "\n";
    }
    if (out.empty()) out = "- " + std::string(unicode::trim(query)) + "\n";
    out.pop_back();
    return out;
}

struct StepContext {
    std::string_view query;
    std::span<const AtomicStep> prior;
    std::string premises;
};

inline providers::ChatRequest judge_request(const AtomicStep& step, const StepContext& ctx) {
    std::string prior;
    for (const auto& p : ctx.prior) prior += "<prior>" + p.text + "</prior>\n";
    if (!prior.empty()) prior.pop_back();
    const auto& t = prompts::get(prompts::kStepJudge);
    const std::map<std::string, std::string> vars = {{"query", std::string(ctx.query)},
                                                     {"premises", ctx.premises},
                                                     {"prior_steps", prior},
                                                     {"index", std::to_string(step.index)},
                                                     {"step", step.text}};
    providers::ChatRequest req;
    req.task = "judge_step";
    req.structured = true;
    req.decoding.temperature = 0.0;
    req.messages = {{"system", t.render_system(vars)}, {"user", t.render_user(vars)}};
    return req;
}

/// Reads the four booleans and the rationale; returns a problem description
/// instead when the reply does not follow the contract.
inline std::variant<StepVerdict, std::string> parse_verdict(std::string_view reply) {
    auto j = parse_json_object(reply);
    if (!j) return std::string("reply is not a JSON object");
    StepVerdict v;
    for (auto [key, slot] : {std::pair{"factuality", &v.factuality}, std::pair{"validity", &v.validity},
                             std::pair{"coherence", &v.coherence}, std::pair{"utility", &v.utility}}) {
        if (!j->contains(key) || !(*j)[key].is_boolean())
            return std::string("missing boolean field \"") + key + "\"";
        *slot = (*j)[key].get<bool>();
    }
    if (!j->contains("rationale") || !(*j)["rationale"].is_string() ||
        unicode::is_blank((*j)["rationale"].get<std::string>()))
        return std::string("missing non-empty string field \"rationale\"");
    v.rationale = (*j)["rationale"].get<std::string>();
    return v;
}

inline StepVerdict judge_step(const AtomicStep& step, const StepContext& ctx, providers::ChatProvider& chat,
                              int max_retries = 2) {
    for (const auto& p : ctx.prior)
        require(p.source_example_id == step.source_example_id, "judge_step: context from another example");
    auto req = judge_request(step, ctx);
    std::string problem;
    for (int attempt = 0; attempt <= max_retries; ++attempt) {
        const auto reply = chat.complete(req);
        auto parsed = parse_verdict(reply);
        if (auto* v = std::get_if<StepVerdict>(&parsed)) {
            v->example_id = step.source_example_id;
            v->step_index = step.index;
            return *v;
        }
        problem = std::get<std::string>(parsed);
        spdlog::debug("judge_step {}#{}: malformed verdict ({})", step.source_example_id, step.index, problem);
        req.messages.push_back({"assistant", reply});
        req.messages.push_back({"user", prompts::get(prompts::kVerdictRepair).render_user({{"problem", problem}})});
    }
    fail(ErrorCode::MalformedVerdict, "judge_step " + step.source_example_id + "#" + std::to_string(step.index) +
                                          " after " + std::to_string(max_retries + 1) + " attempts: " + problem);
}

// ---------------------------------------------------------------------------
// Aggregation

/// Step-weighted pass percentages; example-weighted means as a side column.
inline FvcuScores aggregate_fvcu(std::span<const StepVerdict> verdicts) {
    if (verdicts.empty()) fail(ErrorCode::NoVerdicts, "aggregate_fvcu: no verdicts");
    struct Counts {
        std::size_t n = 0, f = 0, v = 0, c = 0, u = 0;
    };
    Counts all;
    std::map<std::string, Counts> per_example;
    for (const auto& s : verdicts) {
        for (Counts* k : {&all, &per_example[s.example_id]}) {
            ++k->n;
            k->f += s.factuality;
            k->v += s.validity;
            k->c += s.coherence;
            k->u += s.utility;
        }
    }
    auto pct = [](std::size_t pass, std::size_t n) {
        return 100.0 * static_cast<double>(pass) / static_cast<double>(n);
    };
    FvcuScores out;
    out.n_steps = all.n;
    out.n_examples = per_example.size();
    out.factuality_pct = pct(all.f, all.n);
    out.validity_pct = pct(all.v, all.n);
    out.coherence_pct = pct(all.c, all.n);
    out.utility_pct = pct(all.u, all.n);
    for (const auto& [id, k] : per_example) {
        out.example_weighted.factuality += pct(k.f, k.n);
        out.example_weighted.validity += pct(k.v, k.n);
        out.example_weighted.coherence += pct(k.c, k.n);
        out.example_weighted.utility += pct(k.u, k.n);
    }
    const auto m = static_cast<double>(per_example.size());
    out.example_weighted.factuality /= m;
    out.example_weighted.validity /= m;
    out.example_weighted.coherence /= m;
    out.example_weighted.utility /= m;
    return out;
}

// ---------------------------------------------------------------------------
// Pipeline

struct ExampleReview {
    std::string example_id;
    std::vector<AtomicStep> steps;
    std::vector<StepVerdict> verdicts;
};

struct ReviewFailure {
    std::string example_id;
    std::string message;
};

struct FvcuRun {
    std::vector<ExampleReview> reviews;  // corpus order
    std::vector<ReviewFailure> failures;
    FvcuScores scores;
};

struct PipelineOptions {
    AtomizerOptions atomizer;
    int judge_retries = 2;
    std::size_t workers = providers::kDefaultConcurrency;
    double max_failure_fraction = 0.10;
};

/// Reviews one example: atomize, then judge steps strictly in order.
inline ExampleReview review_example(const Example& ex, providers::ChatProvider& chat,
                                    const PipelineOptions& options = {}) {
    ExampleReview r;
    r.example_id = ex.id;
    r.steps = atomize(ex, chat, options.atomizer);
    const auto premises = extract_premises(ex.query);
    for (std::size_t i = 0; i < r.steps.size(); ++i) {
        StepContext ctx{ex.query, std::span<const AtomicStep>(r.steps.data(), i), premises};
        r.verdicts.push_back(judge_step(r.steps[i], ctx, chat, options.judge_retries));
    }
    return r;
}

/// Examples run concurrently; the result is independent of scheduling.
inline FvcuRun run_fvcu(const Corpus& corpus, providers::ChatProvider& chat, const PipelineOptions& options = {}) {
    if (corpus.empty()) fail(ErrorCode::EmptyCorpus, "run_fvcu: empty corpus");
    std::vector<std::optional<ExampleReview>> reviews(corpus.size());
    std::vector<std::string> errors(corpus.size());
    parallel_for(corpus.size(), options.workers, [&](std::size_t i) {
        try {
            reviews[i] = review_example(corpus.examples[i], chat, options);
        } catch (const Error& e) {
            if (e.code() == ErrorCode::ConfigError) throw;
            errors[i] = e.what();
        }
    });
    FvcuRun run;
    std::vector<StepVerdict> all;
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        if (reviews[i]) {
            all.insert(all.end(), reviews[i]->verdicts.begin(), reviews[i]->verdicts.end());
            run.reviews.push_back(std::move(*reviews[i]));
        } else {
            run.failures.push_back({corpus.examples[i].id, errors[i]});
        }
    }
    if (static_cast<double>(run.failures.size()) > options.max_failure_fraction * static_cast<double>(corpus.size()))
        fail(ErrorCode::TooManyFailures, std::to_string(run.failures.size()) + " of " +
                                             std::to_string(corpus.size()) +
                                             " examples failed review; first: " + run.failures.front().message);
    run.scores = aggregate_fvcu(all);
    return run;
}

/// One line per step: {"example_id","step_index","step_text","F","V","C","U","rationale"}.
inline std::string verdict_log(const FvcuRun& run) {
    std::string out;
    for (const auto& r : run.reviews) {
        for (std::size_t i = 0; i < r.verdicts.size(); ++i) {
            const auto& v = r.verdicts[i];
            nlohmann::ordered_json j;
            j["example_id"] = v.example_id;
            j["step_index"] = v.step_index;
            j["step_text"] = r.steps[i].text;
            j["F"] = v.factuality;
            j["V"] = v.validity;
            j["C"] = v.coherence;
            j["U"] = v.utility;
            j["rationale"] = v.rationale;
            out += j.dump() + "\n";
        }
    }
    return out;
}

inline nlohmann::ordered_json to_json(const FvcuScores& s) {
    nlohmann::ordered_json j;
    j["factuality_pct"] = s.factuality_pct;
    j["validity_pct"] = s.validity_pct;
    j["coherence_pct"] = s.coherence_pct;
    j["utility_pct"] = s.utility_pct;
    j["n_steps"] = s.n_steps;
    j["n_examples"] = s.n_examples;
    j["weighting"] = "step";
    nlohmann::ordered_json ew;
    ew["factuality_pct"] = s.example_weighted.factuality;
    ew["validity_pct"] = s.example_weighted.validity;
    ew["coherence_pct"] = s.example_weighted.coherence;
    ew["utility_pct"] = s.example_weighted.utility;
    j["example_weighted"] = ew;
    return j;
}

inline FvcuScores scores_from_json(const nlohmann::json& j) {
    FvcuScores s;
    s.factuality_pct = j.at("factuality_pct").get<double>();
    s.validity_pct = j.at("validity_pct").get<double>();
    s.coherence_pct = j.at("coherence_pct").get<double>();
    s.utility_pct = j.at("utility_pct").get<double>();
    s.n_steps = j.value("n_steps", std::size_t{0});
    s.n_examples = j.value("n_examples", std::size_t{0});
    if (j.contains("example_weighted")) {
        const auto& ew = j["example_weighted"];
        s.example_weighted = {ew.value("factuality_pct", 0.0), ew.value("validity_pct", 0.0),
                              ew.value("coherence_pct", 0.0), ew.value("utility_pct", 0.0)};
    }
    return s;
}

}  // namespace trace_profiler::fvcu
