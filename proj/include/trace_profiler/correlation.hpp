#pragma once

// Tie-aware Spearman correlation between dataset metrics and downstream
// performance across fine-tuning variants.

#include "trace_profiler/error.hpp"
#include "trace_profiler/evaluation.hpp"
#include "trace_profiler/fvcu.hpp"
#include "trace_profiler/metrics.hpp"

#include <fmt/format.h>
#include <fmt/ranges.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace trace_profiler::correlation {

/// Fractional ranks, rank 1 for the largest value; ties share the mean rank.
inline std::vector<double> average_ranks(std::span<const double> values) {
    const auto n = values.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return values[a] > values[b]; });
    std::vector<double> ranks(n);
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
        const double r = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
        i = j + 1;
    }
    return ranks;
}

inline double pearson(std::span<const double> x, std::span<const double> y) {
    const auto n = static_cast<double>(x.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0 || syy == 0) fail(ErrorCode::DegenerateSeries, "correlation undefined for a constant series");
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

struct SeriesPair {
    std::vector<std::string> labels;
    std::vector<double> xs;
    std::vector<double> ys;
};

inline double spearman(std::span<const double> xs, std::span<const double> ys) {
    if (xs.size() != ys.size())
        fail(ErrorCode::LengthMismatch, fmt::format("spearman: series lengths {} and {}", xs.size(), ys.size()));
    require(xs.size() >= 3, "spearman: at least 3 observations required");
    const auto rx = average_ranks(xs);
    const auto ry = average_ranks(ys);
    return pearson(rx, ry);
}

inline double spearman(const SeriesPair& p) {
    if (!p.labels.empty()) {
        require(p.labels.size() == p.xs.size(), "spearman: label count differs from series length");
        require(std::set<std::string>(p.labels.begin(), p.labels.end()).size() == p.labels.size(),
                "spearman: labels must be unique");
    }
    return spearman(p.xs, p.ys);
}

// ---------------------------------------------------------------------------
// Matrix

enum class Block { Analytical, ModelBased };

struct MetricInfo {
    std::string_view id;
    std::string_view display;
    Block block;
};

inline constexpr std::array<MetricInfo, 10> kKnownMetrics = {{
    {"redundancy_ratio", "Redundancy Ratio", Block::Analytical},
    {"semantic_alignment", "Semantic Alignment", Block::Analytical},
    {"semantic_flow", "Semantic Flow", Block::Analytical},
    {"symbolic_fraction", "Symbolic Fraction", Block::Analytical},
    {"syntactic_depth", "Syntactic Depth", Block::Analytical},
    {"perplexity", "Perplexity", Block::Analytical},
    {"validity", "Validity (V)", Block::ModelBased},
    {"factuality", "Factuality (F)", Block::ModelBased},
    {"coherence", "Coherence (C)", Block::ModelBased},
    {"utility", "Utility (U)", Block::ModelBased},
}};

inline MetricInfo metric_info(std::string_view id) {
    for (const auto& m : kKnownMetrics)
        if (m.id == id) return m;
    return {id, id, Block::Analytical};
}

/// Series keyed by name then variant; insertion order of names is kept.
using SeriesTable = std::vector<std::pair<std::string, std::map<std::string, double>>>;

struct CorrelationInput {
    std::string model;
    std::vector<std::string> variants;
    SeriesTable metrics;
    SeriesTable performance;  // benchmark -> variant -> relative change
};

struct Cell {
    std::optional<double> rho;  // empty when a series is constant
    std::size_t n = 0;
};

struct MatrixRow {
    std::string metric;
    std::string display;
    Block block = Block::Analytical;
    std::vector<Cell> cells;
    std::optional<double> avg;  // mean of the defined cells
};

struct CorrelationMatrix {
    std::string model;
    std::vector<std::string> variants;
    std::vector<std::string> benchmarks;
    std::vector<MatrixRow> rows;  // analytical rows first, then model-based
};

struct BuildOptions {
    bool include_perplexity = false;
};

namespace detail {

inline std::vector<double> aligned(const std::map<std::string, double>& series, const std::vector<std::string>& variants,
                                   const std::string& what) {
    std::set<std::string> expected(variants.begin(), variants.end());
    std::set<std::string> got;
    for (const auto& [k, v] : series) got.insert(k);
    if (got != expected) {
        std::string missing, extra;
        for (const auto& v : expected)
            if (!got.count(v)) missing += " " + v;
        for (const auto& v : got)
            if (!expected.count(v)) extra += " " + v;
        fail(ErrorCode::VariantMismatch,
             fmt::format("{}: variant sets differ (missing:{}; unexpected:{})", what, missing.empty() ? " none" : missing,
                         extra.empty() ? " none" : extra));
    }
    std::vector<double> out;
    for (const auto& v : variants) out.push_back(series.at(v));
    return out;
}

}  // namespace detail

inline CorrelationMatrix build_matrix(const CorrelationInput& in, const BuildOptions& options = {}) {
    if (in.variants.size() < 3)
        fail(ErrorCode::TooFewVariants,
             fmt::format("build_matrix: {} variants given, at least 3 required", in.variants.size()));
    if (std::set<std::string>(in.variants.begin(), in.variants.end()).size() != in.variants.size())
        fail(ErrorCode::VariantMismatch, "build_matrix: duplicate variant names");
    require(!in.performance.empty(), "build_matrix: no performance series");

    CorrelationMatrix m;
    m.model = in.model;
    m.variants = in.variants;
    std::vector<std::vector<double>> perf;
    for (const auto& [bench, series] : in.performance) {
        m.benchmarks.push_back(bench);
        perf.push_back(detail::aligned(series, in.variants, "performance \"" + bench + "\""));
    }

    std::vector<MatrixRow> analytical, model_based;
    std::set<std::string> seen;
    for (const auto& [name, series] : in.metrics) {
        if (name == "perplexity" && !options.include_perplexity) continue;
        if (!seen.insert(name).second) fail(ErrorCode::VariantMismatch, "build_matrix: duplicate metric " + name);
        const auto xs = detail::aligned(series, in.variants, "metric \"" + name + "\"");
        const auto info = metric_info(name);
        MatrixRow row{name, std::string(info.display), info.block, {}, std::nullopt};
        double sum = 0;
        std::size_t defined = 0;
        for (const auto& ys : perf) {
            Cell c;
            c.n = xs.size();
            try {
                c.rho = spearman(xs, ys);
                sum += *c.rho;
                ++defined;
            } catch (const Error& e) {
                if (e.code() != ErrorCode::DegenerateSeries) throw;
            }
            row.cells.push_back(c);
        }
        if (defined) row.avg = sum / static_cast<double>(defined);
        (info.block == Block::Analytical ? analytical : model_based).push_back(std::move(row));
    }
    m.rows = std::move(analytical);
    m.rows.insert(m.rows.end(), model_based.begin(), model_based.end());
    return m;
}

/// Input assembled from pipeline artifacts: one profile per variant, optional
/// FVCU scores, and the relative-change table of one model family.
inline CorrelationInput make_input(std::string model, const std::map<std::string, metrics::MetricProfile>& profiles,
                                   const std::map<std::string, fvcu::FvcuScores>& fvcu_scores,
                                   const evaluation::PerformanceTable& performance) {
    CorrelationInput in;
    in.model = std::move(model);
    for (const auto& [variant, p] : profiles) in.variants.push_back(variant);

    std::map<std::string, double> red, align, flow, sym, depth, ppl;
    bool flow_complete = true;
    for (const auto& [v, p] : profiles) {
        red[v] = p.redundancy_ratio;
        align[v] = p.semantic_alignment;
        sym[v] = p.symbolic_fraction;
        depth[v] = p.syntactic_depth;
        ppl[v] = p.perplexity;
        if (p.semantic_flow) flow[v] = *p.semantic_flow;
        else flow_complete = false;
    }
    in.metrics.emplace_back("redundancy_ratio", red);
    in.metrics.emplace_back("semantic_alignment", align);
    if (flow_complete) in.metrics.emplace_back("semantic_flow", flow);
    else spdlog::warn("semantic flow missing for some variant; row omitted");
    in.metrics.emplace_back("symbolic_fraction", sym);
    in.metrics.emplace_back("syntactic_depth", depth);
    in.metrics.emplace_back("perplexity", ppl);

    if (!fvcu_scores.empty()) {
        std::map<std::string, double> f, v, c, u;
        for (const auto& [name, s] : fvcu_scores) {
            f[name] = s.factuality_pct;
            v[name] = s.validity_pct;
            c[name] = s.coherence_pct;
            u[name] = s.utility_pct;
        }
        in.metrics.emplace_back("validity", v);
        in.metrics.emplace_back("factuality", f);
        in.metrics.emplace_back("coherence", c);
        in.metrics.emplace_back("utility", u);
    }
    for (const auto& [bench, series] : performance) in.performance.emplace_back(bench, series);
    return in;
}

// ---------------------------------------------------------------------------
// Fixture files: {"model", "variants", "metrics": {name: {variant: value}},
// "performance": {benchmark: {variant: value}}}. Key order is preserved.

inline SeriesTable series_table(const nlohmann::ordered_json& j, const std::string& what) {
    if (!j.is_object()) fail(ErrorCode::ParseError, "fixture: \"" + what + "\" must be an object");
    SeriesTable out;
    for (const auto& [name, series] : j.items()) {
        if (!series.is_object()) fail(ErrorCode::ParseError, "fixture: " + what + "." + name + " must be an object");
        std::map<std::string, double> m;
        for (const auto& [variant, value] : series.items()) {
            if (!value.is_number())
                fail(ErrorCode::ParseError, "fixture: " + what + "." + name + "." + variant + " must be a number");
            m[variant] = value.get<double>();
        }
        out.emplace_back(name, std::move(m));
    }
    return out;
}

inline CorrelationInput parse_fixture(const nlohmann::ordered_json& j) {
    for (const char* key : {"variants", "metrics", "performance"})
        if (!j.contains(key)) fail(ErrorCode::MissingField, std::string("fixture: missing \"") + key + "\"");
    CorrelationInput in;
    in.model = j.value("model", std::string{});
    for (const auto& v : j["variants"]) in.variants.push_back(v.get<std::string>());
    in.metrics = series_table(j["metrics"], "metrics");
    in.performance = series_table(j["performance"], "performance");
    return in;
}

inline CorrelationInput load_fixture(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::ConfigError, "cannot open fixture " + path.string());
    try {
        return parse_fixture(nlohmann::ordered_json::parse(in));
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::ParseError, path.string() + ": " + e.what());
    }
}

// ---------------------------------------------------------------------------
// Output

/// Two decimals, never "-0.00".
inline std::string format_rho(std::optional<double> rho) {
    if (!rho) return "undefined";
    auto s = fmt::format("{:.2f}", *rho);
    if (s == "-0.00") s = "0.00";
    return s;
}

inline std::string_view to_string(Block b) { return b == Block::Analytical ? "analytical" : "model_based"; }

/// Raw values with shortest round-trip formatting.
inline std::string matrix_csv(const CorrelationMatrix& m) {
    std::string out = "metric,block";
    for (const auto& b : m.benchmarks) out += "," + b;
    out += ",avg,n\n";
    for (const auto& r : m.rows) {
        out += r.metric + "," + std::string(to_string(r.block));
        for (const auto& c : r.cells) out += "," + (c.rho ? fmt::format("{}", *c.rho) : std::string("undefined"));
        out += "," + (r.avg ? fmt::format("{}", *r.avg) : std::string("undefined"));
        out += "," + std::to_string(r.cells.empty() ? 0 : r.cells.front().n) + "\n";
    }
    return out;
}

inline nlohmann::ordered_json to_json(const CorrelationMatrix& m) {
    nlohmann::ordered_json j;
    j["model"] = m.model;
    j["variants"] = m.variants;
    j["benchmarks"] = m.benchmarks;
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (const auto& r : m.rows) {
        nlohmann::ordered_json row;
        row["metric"] = r.metric;
        row["block"] = std::string(to_string(r.block));
        nlohmann::ordered_json cells = nlohmann::ordered_json::array();
        for (const auto& c : r.cells) cells.push_back(c.rho ? nlohmann::ordered_json(*c.rho) : nlohmann::ordered_json(nullptr));
        row["rho"] = cells;
        row["avg"] = r.avg ? nlohmann::ordered_json(*r.avg) : nlohmann::ordered_json(nullptr);
        rows.push_back(row);
    }
    j["rows"] = rows;
    return j;
}

namespace detail {

inline std::string md_row(const std::vector<std::string>& cells) {
    std::string s = "|";
    for (const auto& c : cells) s += " " + c + " |";
    return s + "\n";
}

inline std::string md_rule(std::size_t n) {
    std::string s = "|---|";
    for (std::size_t i = 1; i < n; ++i) s += "---:|";
    return s + "\n";
}

}  // namespace detail

inline std::string render_matrix(const CorrelationMatrix& m) {
    std::string out;
    std::vector<std::string> header{"Metric"};
    header.insert(header.end(), m.benchmarks.begin(), m.benchmarks.end());
    header.push_back("Avg.");
    bool undefined = false;
    for (Block block : {Block::Analytical, Block::ModelBased}) {
        std::vector<const MatrixRow*> rows;
        for (const auto& r : m.rows)
            if (r.block == block) rows.push_back(&r);
        if (rows.empty()) continue;
        out += block == Block::Analytical ? "\n*Analytical metrics*\n\n" : "\n*Model-based metrics*\n\n";
        out += detail::md_row(header) + detail::md_rule(header.size());
        for (const auto* r : rows) {
            std::vector<std::string> cells{r->display};
            for (const auto& c : r->cells) {
                cells.push_back(format_rho(c.rho));
                undefined |= !c.rho;
            }
            cells.push_back(format_rho(r->avg));
            out += detail::md_row(cells);
        }
    }
    out += fmt::format("\nn = {} variants per cell ({}).", m.variants.size(), fmt::join(m.variants, ", "));
    if (undefined) out += " \"undefined\" marks a constant series.";
    return out + "\n";
}

inline std::string render_correlation_section(const std::vector<CorrelationMatrix>& matrices) {
    std::string out = "## Rank correlation with downstream performance\n";
    for (const auto& m : matrices) {
        out += "\n### " + (m.model.empty() ? std::string("Model") : m.model) + "\n";
        out += render_matrix(m);
    }
    return out;
}

struct ReportInputs {
    std::string title = "Reasoning dataset profile";
    std::map<std::string, metrics::MetricProfile> profiles;  // by variant
    std::map<std::string, fvcu::FvcuScores> fvcu;            // by variant, optional
    std::vector<evaluation::BenchmarkResult> results;
    std::vector<evaluation::BenchmarkResult> domain_results;
    std::vector<CorrelationMatrix> matrices;
};

namespace detail {

inline std::string opt(const std::optional<double>& v, const char* spec) {
    return v ? fmt::format(fmt::runtime(spec), *v) : std::string("n/a");
}

/// Pivot of (model, variant) rows against benchmark columns.
inline std::string result_table(const std::vector<evaluation::BenchmarkResult>& rows, bool relative) {
    std::vector<std::string> benchmarks;
    std::map<std::pair<std::string, std::string>, std::map<std::string, std::string>> grid;
    std::vector<std::pair<std::string, std::string>> order;
    for (const auto& r : rows) {
        if (relative && !r.relative_change_pct) continue;
        if (relative && r.model_variant == evaluation::kBaselineVariant) continue;
        if (std::find(benchmarks.begin(), benchmarks.end(), r.benchmark) == benchmarks.end())
            benchmarks.push_back(r.benchmark);
        const std::pair key{r.model, r.model_variant};
        if (!grid.count(key)) order.push_back(key);
        grid[key][r.benchmark] = relative ? fmt::format("{:+.1f}%", *r.relative_change_pct)
                                          : fmt::format("{:.3f} (n={})", r.accuracy, r.n);
    }
    if (order.empty()) return "_No rows._\n";
    // Avg stays last.
    std::stable_partition(benchmarks.begin(), benchmarks.end(),
                          [](const std::string& b) { return b != evaluation::kAverageLabel; });
    std::vector<std::string> header{"Model variant"};
    header.insert(header.end(), benchmarks.begin(), benchmarks.end());
    std::string out = md_row(header) + md_rule(header.size());
    for (const auto& key : order) {
        std::vector<std::string> cells{key.first.empty() ? key.second : key.first + "/" + key.second};
        for (const auto& b : benchmarks) {
            const auto it = grid[key].find(b);
            cells.push_back(it == grid[key].end() ? "" : it->second);
        }
        out += md_row(cells);
    }
    return out;
}

}  // namespace detail

/// Deterministic Markdown report. Sections without inputs are left out.
inline std::string render_report(const ReportInputs& in) {
    std::string out = "# " + in.title + "\n";

    if (!in.profiles.empty()) {
        out += "\n## Analytical metrics\n\n";
        const std::vector<std::string> header{"Variant",    "Syntactic Depth", "Semantic Flow",     "Semantic Alignment",
                                              "Perplexity", "Redundancy Ratio", "Symbolic Fraction", "n"};
        out += detail::md_row(header) + detail::md_rule(header.size());
        for (const auto& [v, p] : in.profiles)
            out += detail::md_row(std::vector<std::string>{v, fmt::format("{:.2f}", p.syntactic_depth), detail::opt(p.semantic_flow, "{:.3f}"),
                                   fmt::format("{:.3f}", p.semantic_alignment), fmt::format("{:.2f}", p.perplexity),
                                   fmt::format("{:.3f}", p.redundancy_ratio), fmt::format("{:.3f}", p.symbolic_fraction),
                                   std::to_string(p.n_examples)});
    }

    if (!in.fvcu.empty()) {
        out += "\n## Model-based metrics\n\n";
        const std::vector<std::string> header{"Variant", "Factuality", "Validity", "Coherence", "Utility", "Steps",
                                              "Examples"};
        out += detail::md_row(header) + detail::md_rule(header.size());
        for (const auto& [v, s] : in.fvcu)
            out += detail::md_row(std::vector<std::string>{v, fmt::format("{:.1f}", s.factuality_pct), fmt::format("{:.1f}", s.validity_pct),
                                   fmt::format("{:.1f}", s.coherence_pct), fmt::format("{:.1f}", s.utility_pct),
                                   std::to_string(s.n_steps), std::to_string(s.n_examples)});
        out += "\nPercentages are step-weighted.\n";
    }

    if (!in.results.empty()) {
        out += "\n## Downstream accuracy\n\n" + detail::result_table(in.results, false);
        out += "\n## Relative change vs. " + std::string(evaluation::kBaselineVariant) + "\n\n" +
               detail::result_table(in.results, true);
    }
    if (!in.domain_results.empty()) {
        out += "\n## Accuracy by domain\n\n" + detail::result_table(in.domain_results, false);
        out += "\n" + detail::result_table(in.domain_results, true);
    }

    if (!in.matrices.empty()) out += "\n" + render_correlation_section(in.matrices);
    return out;
}

}  // namespace trace_profiler::correlation
