#pragma once

// Benchmark scoring with an answer judge, accuracy arithmetic and the
// judge-vs-human agreement audit.

#include "trace_profiler/corpus.hpp"
#include "trace_profiler/error.hpp"
#include "trace_profiler/fvcu.hpp"
#include "trace_profiler/parallel.hpp"
#include "trace_profiler/prompts.hpp"
#include "trace_profiler/providers/chat.hpp"

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <tuple>
#include <vector>

namespace trace_profiler::evaluation {

inline constexpr std::string_view kBaselineVariant = "Original";
inline constexpr std::string_view kDomainBenchmark = "MoT-PL";
inline constexpr std::string_view kAverageLabel = "Avg";

struct PredictionRecord {
    std::string example_id;
    std::string benchmark;
    std::string model_variant;
    std::string query;
    std::string reference;
    std::string prediction;
    std::string model;             // base-model family, optional
    std::optional<Domain> domain;  // optional, used by the per-domain breakdown
};

namespace detail {

inline std::string required_string(const nlohmann::json& obj, const char* key, std::size_t line) {
    if (!obj.contains(key) || !obj[key].is_string())
        fail(ErrorCode::MissingField, fmt::format("line {}: missing string field \"{}\"", line, key));
    return obj[key].get<std::string>();
}

}  // namespace detail

inline std::vector<PredictionRecord> parse_predictions(std::istream& in) {
    std::vector<PredictionRecord> out;
    std::set<std::tuple<std::string, std::string, std::string, std::string>> seen;
    std::string text;
    std::size_t line = 0;
    while (std::getline(in, text)) {
        ++line;
        if (unicode::is_blank(text)) continue;
        nlohmann::json obj;
        try {
            obj = nlohmann::json::parse(text);
        } catch (const nlohmann::json::parse_error& e) {
            fail(ErrorCode::ParseError, fmt::format("line {}: {}", line, e.what()));
        }
        if (!obj.is_object()) fail(ErrorCode::ParseError, fmt::format("line {}: expected a JSON object", line));
        PredictionRecord r;
        r.example_id = detail::required_string(obj, "example_id", line);
        r.benchmark = detail::required_string(obj, "benchmark", line);
        r.model_variant = detail::required_string(obj, "model_variant", line);
        r.query = detail::required_string(obj, "query", line);
        r.reference = detail::required_string(obj, "reference", line);
        r.prediction = detail::required_string(obj, "prediction", line);
        if (obj.contains("model") && obj["model"].is_string()) r.model = obj["model"].get<std::string>();
        if (obj.contains("domain") && obj["domain"].is_string()) {
            r.domain = parse_domain(obj["domain"].get<std::string>());
            if (!r.domain) fail(ErrorCode::ParseError, fmt::format("line {}: unknown domain", line));
        }
        if (!seen.insert({r.model, r.example_id, r.benchmark, r.model_variant}).second)
            fail(ErrorCode::DuplicateId, fmt::format("line {}: duplicate prediction ({}, {}, {})", line,
                                                     r.example_id, r.benchmark, r.model_variant));
        out.push_back(std::move(r));
    }
    if (out.empty()) fail(ErrorCode::EmptyInput, "no prediction records");
    return out;
}

inline std::vector<PredictionRecord> load_predictions(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::ConfigError, "cannot open predictions file " + path.string());
    try {
        return parse_predictions(in);
    } catch (const Error& e) {
        fail(e.code(), path.string() + ": " + e.message());
    }
}

// ---------------------------------------------------------------------------
// Judging

inline providers::ChatRequest answer_judge_request(const PredictionRecord& rec) {
    const auto& t = prompts::get(prompts::kAnswerJudge);
    const std::map<std::string, std::string> vars = {
        {"query", rec.query}, {"reference", rec.reference}, {"prediction", rec.prediction}};
    providers::ChatRequest req;
    req.task = "judge_answer";
    req.structured = true;
    req.decoding.temperature = 0.0;
    req.messages = {{"system", t.render_system(vars)}, {"user", t.render_user(vars)}};
    return req;
}

/// The judge's binary decision. A reply without a boolean "correct" gets a
/// repair turn; `max_attempts` bounds the total number of replies read.
inline bool judge_prediction(const PredictionRecord& rec, providers::ChatProvider& chat, int max_attempts = 2) {
    require(!rec.query.empty() && !rec.reference.empty() && !rec.prediction.empty(),
            "judge_prediction: query, reference and prediction must be non-empty (" + rec.example_id + ")");
    auto req = answer_judge_request(rec);
    std::string problem;
    for (int attempt = 0; attempt < max_attempts; ++attempt) {
        const auto reply = chat.complete(req);
        const auto j = fvcu::parse_json_object(reply);
        if (j && j->contains("correct") && (*j)["correct"].is_boolean()) return (*j)["correct"].get<bool>();
        problem = j ? "missing boolean field \"correct\"" : "reply is not a JSON object";
        req.messages.push_back({"assistant", reply});
        req.messages.push_back({"user", prompts::get(prompts::kVerdictRepair).render_user({{"problem", problem}})});
    }
    fail(ErrorCode::MalformedVerdict, "judge_prediction " + rec.example_id + ": " + problem);
}

/// Judgments aligned with `records`.
inline std::vector<bool> judge_all(const std::vector<PredictionRecord>& records, providers::ChatProvider& chat,
                                   std::size_t workers = providers::kDefaultConcurrency) {
    std::vector<char> out(records.size());
    parallel_for(records.size(), workers, [&](std::size_t i) { out[i] = judge_prediction(records[i], chat); });
    return {out.begin(), out.end()};
}

// ---------------------------------------------------------------------------
// Arithmetic

inline double accuracy(const std::vector<bool>& judgments) {
    if (judgments.empty()) fail(ErrorCode::EmptyInput, "accuracy: no judgments");
    std::size_t correct = 0;
    for (bool b : judgments) correct += b;
    return static_cast<double>(correct) / static_cast<double>(judgments.size());
}

/// Percent change of `tuned` relative to `base`.
inline double relative_change(double base, double tuned) {
    if (base == 0.0) fail(ErrorCode::ZeroBaseline, "relative_change: baseline accuracy is zero");
    return 100.0 * (tuned - base) / base;
}

inline double macro_average(std::span<const double> scores) {
    if (scores.empty()) fail(ErrorCode::EmptyInput, "macro_average: no scores");
    double sum = 0;
    for (double s : scores) sum += s;
    return sum / static_cast<double>(scores.size());
}

struct BenchmarkResult {
    std::string model;
    std::string model_variant;
    std::string benchmark;
    double accuracy = 0;
    std::size_t n = 0;
    std::optional<double> relative_change_pct;
};

/// Column label combining the model family and the fine-tuning variant.
inline std::string variant_label(const BenchmarkResult& r) {
    return r.model.empty() ? r.model_variant : r.model + "/" + r.model_variant;
}

namespace detail {

using GroupKey = std::tuple<std::string, std::string, std::string>;  // model, variant, benchmark

inline std::vector<BenchmarkResult> tally(const std::map<GroupKey, std::pair<std::size_t, std::size_t>>& counts) {
    std::vector<BenchmarkResult> out;
    for (const auto& [key, c] : counts) {
        const auto& [model, variant, bench] = key;
        out.push_back({model, variant, bench, static_cast<double>(c.first) / static_cast<double>(c.second), c.second,
                       std::nullopt});
    }
    return out;
}

}  // namespace detail

/// Fills relative_change_pct from the baseline row with the same model and
/// benchmark, when one exists and is non-zero.
inline void attach_relative_change(std::vector<BenchmarkResult>& rows,
                                   std::string_view baseline = kBaselineVariant) {
    std::map<std::pair<std::string, std::string>, double> base;
    for (const auto& r : rows)
        if (r.model_variant == baseline) base[{r.model, r.benchmark}] = r.accuracy;
    for (auto& r : rows) {
        const auto it = base.find({r.model, r.benchmark});
        if (it != base.end() && it->second != 0.0) r.relative_change_pct = relative_change(it->second, r.accuracy);
    }
}

/// Adds one "Avg" row per (model, variant): macro-average accuracy over the
/// benchmarks and n summed.
inline void append_macro_rows(std::vector<BenchmarkResult>& rows) {
    std::map<std::pair<std::string, std::string>, std::vector<const BenchmarkResult*>> groups;
    for (const auto& r : rows)
        if (r.benchmark != kAverageLabel) groups[{r.model, r.model_variant}].push_back(&r);
    std::vector<BenchmarkResult> extra;
    for (const auto& [key, members] : groups) {
        std::vector<double> accs;
        std::size_t n = 0;
        for (const auto* m : members) {
            accs.push_back(m->accuracy);
            n += m->n;
        }
        extra.push_back({key.first, key.second, std::string(kAverageLabel), macro_average(accs), n, std::nullopt});
    }
    rows.insert(rows.end(), extra.begin(), extra.end());
}

/// Per (model, variant, benchmark) accuracy plus Avg rows and relative change.
inline std::vector<BenchmarkResult> compute_results(const std::vector<PredictionRecord>& records,
                                                    const std::vector<bool>& judgments,
                                                    std::string_view baseline = kBaselineVariant) {
    if (records.size() != judgments.size())
        fail(ErrorCode::LengthMismatch, "compute_results: records and judgments differ in length");
    if (records.empty()) fail(ErrorCode::EmptyInput, "compute_results: no records");
    std::map<detail::GroupKey, std::pair<std::size_t, std::size_t>> counts;
    for (std::size_t i = 0; i < records.size(); ++i) {
        auto& c = counts[{records[i].model, records[i].model_variant, records[i].benchmark}];
        c.first += judgments[i];
        ++c.second;
    }
    auto rows = detail::tally(counts);
    append_macro_rows(rows);
    attach_relative_change(rows, baseline);
    return rows;
}

/// Accuracy of one benchmark split by the examples' domain labels; the
/// domain name takes the benchmark column.
inline std::vector<BenchmarkResult> domain_breakdown(const std::vector<PredictionRecord>& records,
                                                     const std::vector<bool>& judgments,
                                                     std::string_view benchmark = kDomainBenchmark,
                                                     std::string_view baseline = kBaselineVariant) {
    if (records.size() != judgments.size())
        fail(ErrorCode::LengthMismatch, "domain_breakdown: records and judgments differ in length");
    std::map<detail::GroupKey, std::pair<std::size_t, std::size_t>> counts;
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& r = records[i];
        if (r.benchmark != benchmark || !r.domain) continue;
        auto& c = counts[{r.model, r.model_variant, std::string(to_string(*r.domain))}];
        c.first += judgments[i];
        ++c.second;
    }
    auto rows = detail::tally(counts);
    attach_relative_change(rows, baseline);
    return rows;
}

inline std::string results_csv(const std::vector<BenchmarkResult>& rows) {
    std::string out = "model_variant,benchmark,n,accuracy,relative_change_pct\n";
    for (const auto& r : rows) {
        out += fmt::format("{},{},{},{:.6f},", variant_label(r), r.benchmark, r.n, r.accuracy);
        if (r.relative_change_pct) out += fmt::format("{:.4f}", *r.relative_change_pct);
        out += "\n";
    }
    return out;
}

/// benchmark -> variant -> relative change, for one model family.
using PerformanceTable = std::map<std::string, std::map<std::string, double>>;

inline PerformanceTable performance_table(const std::vector<BenchmarkResult>& rows, std::string_view model,
                                          bool include_average = false,
                                          std::string_view baseline = kBaselineVariant) {
    PerformanceTable t;
    for (const auto& r : rows) {
        if (r.model != model || r.model_variant == baseline || !r.relative_change_pct) continue;
        if (!include_average && r.benchmark == kAverageLabel) continue;
        t[r.benchmark][r.model_variant] = *r.relative_change_pct;
    }
    return t;
}

// ---------------------------------------------------------------------------
// Audit

struct Confusion {
    std::size_t tt = 0;  // both raters true
    std::size_t tf = 0;  // first true, second false
    std::size_t ft = 0;
    std::size_t ff = 0;
};

struct AuditReport {
    double agreement = 0;
    std::optional<double> kappa;  // empty when chance agreement is 1
    double chance_agreement = 0;
    std::size_t n = 0;
    Confusion confusion;
};

inline AuditReport cohen_kappa(const std::vector<bool>& a, const std::vector<bool>& b) {
    if (a.size() != b.size())
        fail(ErrorCode::LengthMismatch,
             fmt::format("cohen_kappa: rater lists differ in length ({} vs {})", a.size(), b.size()));
    if (a.empty()) fail(ErrorCode::EmptyInput, "cohen_kappa: no ratings");
    AuditReport r;
    r.n = a.size();
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i] && b[i]) ++r.confusion.tt;
        else if (a[i]) ++r.confusion.tf;
        else if (b[i]) ++r.confusion.ft;
        else ++r.confusion.ff;
    }
    const double n = static_cast<double>(r.n);
    const auto& c = r.confusion;
    r.agreement = static_cast<double>(c.tt + c.ff) / n;
    const double a_true = static_cast<double>(c.tt + c.tf) / n;
    const double b_true = static_cast<double>(c.tt + c.ft) / n;
    r.chance_agreement = a_true * b_true + (1 - a_true) * (1 - b_true);
    if (r.chance_agreement < 1.0) r.kappa = (r.agreement - r.chance_agreement) / (1.0 - r.chance_agreement);
    return r;
}

/// Chance agreement implied by an observed agreement and a kappa value.
inline double implied_chance_agreement(double agreement, double kappa) {
    require(kappa != 1.0, "implied_chance_agreement: kappa must differ from 1");
    return (agreement - kappa) / (1.0 - kappa);
}

inline nlohmann::ordered_json to_json(const AuditReport& r) {
    nlohmann::ordered_json j;
    j["agreement"] = r.agreement;
    j["kappa"] = r.kappa ? nlohmann::ordered_json(*r.kappa) : nlohmann::ordered_json(nullptr);
    j["kappa_undefined"] = !r.kappa.has_value();
    j["chance_agreement"] = r.chance_agreement;
    j["n"] = r.n;
    j["confusion"] = {{"tt", r.confusion.tt}, {"tf", r.confusion.tf}, {"ft", r.confusion.ft}, {"ff", r.confusion.ff}};
    return j;
}

struct AuditLabels {
    std::vector<bool> human;
    std::vector<bool> judge;
};

/// JSONL with one {"example_id", "human", "judge"} object per line.
inline AuditLabels parse_audit_labels(std::istream& in) {
    AuditLabels out;
    std::string text;
    std::size_t line = 0;
    while (std::getline(in, text)) {
        ++line;
        if (unicode::is_blank(text)) continue;
        nlohmann::json obj;
        try {
            obj = nlohmann::json::parse(text);
        } catch (const nlohmann::json::parse_error& e) {
            fail(ErrorCode::ParseError, fmt::format("line {}: {}", line, e.what()));
        }
        for (const char* key : {"human", "judge"})
            if (!obj.contains(key) || !obj[key].is_boolean())
                fail(ErrorCode::MissingField, fmt::format("line {}: missing boolean field \"{}\"", line, key));
        out.human.push_back(obj["human"].get<bool>());
        out.judge.push_back(obj["judge"].get<bool>());
    }
    return out;
}

}  // namespace trace_profiler::evaluation
