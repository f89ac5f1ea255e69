#pragma once

// Command-line front end. Each subcommand runs one pipeline stage and writes
// its artifacts under the configured output directory.

#include "trace_profiler/correlation.hpp"
#include "trace_profiler/corpus.hpp"
#include "trace_profiler/error.hpp"
#include "trace_profiler/evaluation.hpp"
#include "trace_profiler/fvcu.hpp"
#include "trace_profiler/metrics.hpp"
#include "trace_profiler/providers/provider_set.hpp"
#include "trace_profiler/sampling.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace trace_profiler::cli {

namespace fs = std::filesystem;

struct RunConfig {
    std::vector<std::pair<std::string, fs::path>> variants;  // name -> corpus, config order
    Schema schema = Schema::Structured;
    std::optional<fs::path> predictions;
    std::optional<fs::path> audit_labels;
    std::optional<fs::path> performance;  // precomputed relative changes
    std::string baseline_variant{evaluation::kBaselineVariant};
    std::string domain_benchmark{evaluation::kDomainBenchmark};
    fs::path output_dir = "out";
    uint64_t seed = 0;
    std::size_t fvcu_n = 1000;
    std::size_t eval_n = 900;
    std::size_t token_limit = kDefaultTokenLimit;
    std::size_t concurrency = providers::kDefaultConcurrency;
    bool include_perplexity = false;
    providers::ProvidersConfig providers;
};

namespace detail {

inline fs::path resolve(const fs::path& base, const std::string& p) {
    fs::path path(p);
    return path.is_absolute() ? path : base / path;
}

inline providers::Endpoint endpoint_from_json(const nlohmann::json& j) {
    providers::Endpoint e;
    e.base_url = j.value("base_url", std::string{});
    e.api_key = j.value("api_key", std::string{});
    e.model_id = j.value("model_id", std::string{});
    return e;
}

inline void env_override(providers::Endpoint& e, const std::string& cap) {
    auto get = [&](const char* suffix) -> std::optional<std::string> {
        const auto name = "TRACE_PROFILER_" + cap + "_" + suffix;
        if (const char* v = std::getenv(name.c_str())) return std::string(v);
        return std::nullopt;
    };
    if (auto v = get("BASE_URL")) e.base_url = *v;
    if (auto v = get("API_KEY")) e.api_key = *v;
    if (auto v = get("MODEL")) e.model_id = *v;
}

template <class T>
T positive(const nlohmann::json& j, const char* key, T fallback) {
    if (!j.contains(key)) return fallback;
    if (!j[key].is_number_integer() || j[key].get<long long>() < 1)
        fail(ErrorCode::ConfigError, fmt::format("config: \"{}\" must be an integer >= 1", key));
    return static_cast<T>(j[key].get<long long>());
}

}  // namespace detail

/// Parses a JSON config; relative paths are resolved against `base_dir`.
inline RunConfig parse_config(const nlohmann::ordered_json& j, const fs::path& base_dir) {
    if (!j.is_object()) fail(ErrorCode::ConfigError, "config: top level must be an object");
    RunConfig c;
    try {
        if (j.contains("variants")) {
            if (!j["variants"].is_object()) fail(ErrorCode::ConfigError, "config: \"variants\" must be an object");
            for (const auto& [name, path] : j["variants"].items())
                c.variants.emplace_back(name, detail::resolve(base_dir, path.get<std::string>()));
        }
        if (j.contains("schema")) {
            auto s = parse_schema(j["schema"].get<std::string>());
            if (!s) fail(ErrorCode::ConfigError, "config: schema must be \"structured\" or \"chat\"");
            c.schema = *s;
        }
        auto path_field = [&](const char* key) -> std::optional<fs::path> {
            if (!j.contains(key) || j[key].is_null()) return std::nullopt;
            return detail::resolve(base_dir, j[key].get<std::string>());
        };
        c.predictions = path_field("predictions");
        c.audit_labels = path_field("audit_labels");
        c.performance = path_field("performance");
        c.output_dir = path_field("output_dir").value_or(base_dir / "out");
        c.baseline_variant = j.value("baseline_variant", c.baseline_variant);
        c.domain_benchmark = j.value("domain_benchmark", c.domain_benchmark);
        c.seed = j.value("seed", uint64_t{0});
        c.fvcu_n = detail::positive(j, "fvcu_n", c.fvcu_n);
        c.eval_n = detail::positive(j, "eval_n", c.eval_n);
        c.token_limit = detail::positive(j, "token_limit", c.token_limit);
        c.concurrency = detail::positive(j, "concurrency", c.concurrency);
        c.include_perplexity = j.value("include_perplexity", false);

        auto& p = c.providers;
        p.offline = j.value("offline", true);
        p.seed = c.seed;
        if (auto cache = path_field("cache_dir")) p.cache_dir = *cache;
        if (j.contains("providers")) {
            const auto& pj = j["providers"];
            if (pj.contains("chat")) p.chat = detail::endpoint_from_json(pj["chat"]);
            if (pj.contains("embed")) p.embed = detail::endpoint_from_json(pj["embed"]);
            if (pj.contains("scorer")) p.scorer = detail::endpoint_from_json(pj["scorer"]);
            if (pj.contains("nlp")) p.nlp = detail::endpoint_from_json(pj["nlp"]);
            p.embed_max_chars = pj.value("embed_max_chars", std::size_t{0});
            p.stub_vocab_size = pj.value("stub_vocab_size", p.stub_vocab_size);
        }
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::ConfigError, std::string("config: ") + e.what());
    }
    return c;
}

inline RunConfig load_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::ConfigError, "cannot open config " + path.string());
    nlohmann::ordered_json j;
    try {
        j = nlohmann::ordered_json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        fail(ErrorCode::ConfigError, path.string() + ": " + e.what());
    }
    return parse_config(j, fs::absolute(path).parent_path());
}

inline void apply_env(RunConfig& c) {
    detail::env_override(c.providers.chat, "CHAT");
    detail::env_override(c.providers.embed, "EMBED");
    detail::env_override(c.providers.scorer, "SCORER");
    detail::env_override(c.providers.nlp, "NLP");
}

// ---------------------------------------------------------------------------
// Artifact helpers

inline void write_text(const fs::path& path, const std::string& text) {
    fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::ConfigError, "cannot write " + path.string());
    out << text;
}

inline std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::ConfigError, "cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline nlohmann::ordered_json read_json(const fs::path& path) {
    try {
        return nlohmann::ordered_json::parse(read_text(path));
    } catch (const nlohmann::json::parse_error& e) {
        fail(ErrorCode::ParseError, path.string() + ": " + e.what());
    }
}

inline std::string file_stem(std::string_view name) {
    std::string out;
    for (unsigned char c : name) out += std::isalnum(c) || c == '-' || c == '.' ? static_cast<char>(c) : '_';
    return out.empty() ? "default" : out;
}

inline nlohmann::ordered_json to_json(const evaluation::BenchmarkResult& r) {
    nlohmann::ordered_json j;
    j["model"] = r.model;
    j["model_variant"] = r.model_variant;
    j["benchmark"] = r.benchmark;
    j["n"] = r.n;
    j["accuracy"] = r.accuracy;
    j["relative_change_pct"] = r.relative_change_pct ? nlohmann::ordered_json(*r.relative_change_pct)
                                                     : nlohmann::ordered_json(nullptr);
    return j;
}

inline std::vector<evaluation::BenchmarkResult> results_from_json(const nlohmann::ordered_json& j) {
    std::vector<evaluation::BenchmarkResult> out;
    for (const auto& r : j) {
        evaluation::BenchmarkResult b;
        b.model = r.value("model", std::string{});
        b.model_variant = r.at("model_variant").get<std::string>();
        b.benchmark = r.at("benchmark").get<std::string>();
        b.n = r.at("n").get<std::size_t>();
        b.accuracy = r.at("accuracy").get<double>();
        if (r.contains("relative_change_pct") && !r["relative_change_pct"].is_null())
            b.relative_change_pct = r["relative_change_pct"].get<double>();
        out.push_back(b);
    }
    return out;
}

inline std::string results_json(const std::vector<evaluation::BenchmarkResult>& rows) {
    nlohmann::ordered_json j = nlohmann::ordered_json::array();
    for (const auto& r : rows) j.push_back(to_json(r));
    return j.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// Commands

struct Context {
    RunConfig config;
    std::ostream& out;
    std::vector<std::string> only_variants;

    fs::path dir(std::string_view sub) const { return config.output_dir / sub; }

    std::vector<std::pair<std::string, fs::path>> selected_variants() const {
        if (config.variants.empty()) fail(ErrorCode::ConfigError, "config lists no variants");
        if (only_variants.empty()) return config.variants;
        std::vector<std::pair<std::string, fs::path>> out;
        for (const auto& name : only_variants) {
            auto it = std::find_if(config.variants.begin(), config.variants.end(),
                                   [&](const auto& v) { return v.first == name; });
            if (it == config.variants.end()) fail(ErrorCode::ConfigError, "unknown variant " + name);
            out.push_back(*it);
        }
        return out;
    }

    Corpus load(const std::pair<std::string, fs::path>& v) const { return load_corpus(v.second, config.schema, v.first); }

    providers::ProviderSet providers() const {
        providers::request_concurrency() = config.concurrency;
        return providers::make_provider_set(config.providers);
    }
};

inline int cmd_stats(const Context& ctx) {
    WhitespaceTokenizer tok;
    for (const auto& v : ctx.selected_variants()) {
        const auto stats = compute_stats(ctx.load(v), tok);
        write_text(ctx.dir("profiles") / (file_stem(v.first) + ".stats.json"), to_json(stats).dump(2) + "\n");
        ctx.out << fmt::format("{}: {} examples, {:.1f} reasoning tokens on average\n", v.first, stats.n_examples,
                               stats.avg_reasoning_tokens);
    }
    return 0;
}

inline int cmd_profile(const Context& ctx) {
    const auto p = ctx.providers();
    metrics::check_capabilities(p);
    WhitespaceTokenizer tok;
    for (const auto& v : ctx.selected_variants()) {
        const auto corpus = ctx.load(v);
        const auto filtered = filter_by_length(corpus, tok, ctx.config.token_limit);
        const auto result = metrics::profile_corpus(filtered.corpus, p, ctx.config.concurrency);

        nlohmann::ordered_json j;
        j["variant"] = v.first;
        j["n_input"] = corpus.size();
        j["n_removed_by_length"] = filtered.removed;
        j["token_limit"] = ctx.config.token_limit;
        j["tokenizer"] = tok.id();
        j["profile"] = metrics::to_json(result.profile);
        nlohmann::ordered_json failures = nlohmann::ordered_json::array();
        for (const auto& f : result.failures) failures.push_back({{"id", f.id}, {"message", f.message}});
        j["failures"] = failures;
        const auto stem = file_stem(v.first);
        write_text(ctx.dir("profiles") / (stem + ".json"), j.dump(2) + "\n");

        std::string rows;
        for (const auto& m : result.per_example) rows += metrics::to_json(m).dump() + "\n";
        write_text(ctx.dir("profiles") / (stem + ".examples.jsonl"), rows);
        ctx.out << fmt::format("{}: profiled {} examples ({} failed)\n", v.first, result.per_example.size(),
                               result.failures.size());
    }
    return 0;
}

inline Corpus sample_variant(const Context& ctx, const Corpus& corpus, std::size_t n, const fs::path& dir,
                             const std::string& stem) {
    if (n > corpus.size()) {
        spdlog::warn("{}: sample size {} exceeds corpus size {}; using the whole corpus", corpus.name, n,
                     corpus.size());
        n = corpus.size();
    }
    const auto sample = sampling::stratify(corpus, n, {true, 4, ctx.config.seed});
    write_corpus(sample, dir / (stem + ".sample.jsonl"));
    write_text(dir / (stem + ".ids.json"), sampling::ids_json(sampling::sorted_ids(sample)));
    return sample;
}

inline int cmd_sample(const Context& ctx, const std::string& purpose, std::optional<std::size_t> n) {
    const bool eval = purpose == "eval";
    const auto size = n.value_or(eval ? ctx.config.eval_n : ctx.config.fvcu_n);
    for (const auto& v : ctx.selected_variants()) {
        const auto s = sample_variant(ctx, ctx.load(v), size, ctx.dir(eval ? "eval" : "fvcu"), file_stem(v.first));
        ctx.out << fmt::format("{}: sampled {} examples\n", v.first, s.size());
    }
    return 0;
}

inline int cmd_fvcu(const Context& ctx) {
    const auto p = ctx.providers();
    if (!p.chat) fail(ErrorCode::ConfigError, "fvcu needs a chat endpoint (providers.chat or TRACE_PROFILER_CHAT_BASE_URL)");
    fvcu::PipelineOptions options;
    options.workers = ctx.config.concurrency;
    for (const auto& v : ctx.selected_variants()) {
        const auto stem = file_stem(v.first);
        const auto sample = sample_variant(ctx, ctx.load(v), ctx.config.fvcu_n, ctx.dir("fvcu"), stem);
        const auto run = fvcu::run_fvcu(sample, *p.chat, options);
        auto scores = fvcu::to_json(run.scores);
        nlohmann::ordered_json failures = nlohmann::ordered_json::array();
        for (const auto& f : run.failures) failures.push_back({{"id", f.example_id}, {"message", f.message}});
        scores["failures"] = failures;
        write_text(ctx.dir("fvcu") / (stem + ".scores.json"), scores.dump(2) + "\n");
        write_text(ctx.dir("fvcu") / (stem + ".verdicts.jsonl"), fvcu::verdict_log(run));
        ctx.out << fmt::format("{}: F={:.1f} V={:.1f} C={:.1f} U={:.1f} over {} steps\n", v.first,
                               run.scores.factuality_pct, run.scores.validity_pct, run.scores.coherence_pct,
                               run.scores.utility_pct, run.scores.n_steps);
    }
    return 0;
}

inline int cmd_judge(const Context& ctx, std::optional<fs::path> predictions) {
    if (!predictions) predictions = ctx.config.predictions;
    if (!predictions) fail(ErrorCode::ConfigError, "judge needs a predictions file (--predictions or config)");
    const auto records = evaluation::load_predictions(*predictions);
    const auto p = ctx.providers();
    if (!p.chat) fail(ErrorCode::ConfigError, "judge needs a chat endpoint (providers.chat or TRACE_PROFILER_CHAT_BASE_URL)");
    const auto judgments = evaluation::judge_all(records, *p.chat, ctx.config.concurrency);

    std::string log;
    for (std::size_t i = 0; i < records.size(); ++i) {
        nlohmann::ordered_json j;
        j["example_id"] = records[i].example_id;
        j["model"] = records[i].model;
        j["model_variant"] = records[i].model_variant;
        j["benchmark"] = records[i].benchmark;
        j["correct"] = static_cast<bool>(judgments[i]);
        log += j.dump() + "\n";
    }
    const auto results = evaluation::compute_results(records, judgments, ctx.config.baseline_variant);
    const auto domains =
        evaluation::domain_breakdown(records, judgments, ctx.config.domain_benchmark, ctx.config.baseline_variant);
    write_text(ctx.dir("eval") / "judgments.jsonl", log);
    write_text(ctx.dir("eval") / "results.csv", evaluation::results_csv(results));
    write_text(ctx.dir("eval") / "results.json", results_json(results));
    write_text(ctx.dir("eval") / "domains.csv", evaluation::results_csv(domains));
    write_text(ctx.dir("eval") / "domains.json", results_json(domains));
    ctx.out << fmt::format("judged {} predictions into {} result rows\n", records.size(), results.size());
    return 0;
}

inline int cmd_audit(const Context& ctx, std::optional<fs::path> labels) {
    if (!labels) labels = ctx.config.audit_labels;
    if (!labels) fail(ErrorCode::ConfigError, "audit needs a labels file (--labels or config)");
    std::ifstream in(*labels);
    if (!in) fail(ErrorCode::ConfigError, "cannot open " + labels->string());
    const auto l = evaluation::parse_audit_labels(in);
    const auto report = evaluation::cohen_kappa(l.human, l.judge);
    write_text(ctx.dir("eval") / "audit.json", evaluation::to_json(report).dump(2) + "\n");
    ctx.out << fmt::format("agreement {:.3f}, kappa {}\n", report.agreement,
                           report.kappa ? fmt::format("{:.3f}", *report.kappa) : std::string("undefined"));
    return 0;
}

namespace detail {

inline std::map<std::string, metrics::MetricProfile> load_profiles(const Context& ctx) {
    std::map<std::string, metrics::MetricProfile> out;
    for (const auto& v : ctx.selected_variants()) {
        const auto path = ctx.dir("profiles") / (file_stem(v.first) + ".json");
        if (!fs::exists(path)) fail(ErrorCode::ConfigError, "missing profile " + path.string() + "; run `profile` first");
        out[v.first] = metrics::profile_from_json(read_json(path).at("profile"));
    }
    return out;
}

inline std::map<std::string, fvcu::FvcuScores> load_fvcu(const Context& ctx) {
    std::map<std::string, fvcu::FvcuScores> out;
    std::size_t missing = 0;
    for (const auto& v : ctx.selected_variants()) {
        const auto path = ctx.dir("fvcu") / (file_stem(v.first) + ".scores.json");
        if (fs::exists(path)) out[v.first] = fvcu::scores_from_json(read_json(path));
        else ++missing;
    }
    if (missing && !out.empty()) {
        spdlog::warn("FVCU scores missing for {} variant(s); model-based rows omitted", missing);
        out.clear();
    }
    return out;
}

struct Performance {
    std::vector<std::pair<std::string, evaluation::PerformanceTable>> general;  // by model family
    std::vector<std::pair<std::string, evaluation::PerformanceTable>> domains;
    std::vector<evaluation::BenchmarkResult> results;
    std::vector<evaluation::BenchmarkResult> domain_results;
};

inline std::vector<std::pair<std::string, evaluation::PerformanceTable>> tables_by_model(
    const std::vector<evaluation::BenchmarkResult>& rows, const std::string& baseline) {
    std::vector<std::string> models;
    for (const auto& r : rows)
        if (std::find(models.begin(), models.end(), r.model) == models.end()) models.push_back(r.model);
    std::sort(models.begin(), models.end());
    std::vector<std::pair<std::string, evaluation::PerformanceTable>> out;
    for (const auto& m : models) {
        auto t = evaluation::performance_table(rows, m, false, baseline);
        if (!t.empty()) out.emplace_back(m, std::move(t));
    }
    return out;
}

inline Performance load_performance(const Context& ctx) {
    Performance p;
    const auto results = ctx.dir("eval") / "results.json";
    if (fs::exists(results)) {
        p.results = results_from_json(read_json(results));
        p.general = tables_by_model(p.results, ctx.config.baseline_variant);
        const auto domains = ctx.dir("eval") / "domains.json";
        if (fs::exists(domains)) {
            p.domain_results = results_from_json(read_json(domains));
            p.domains = tables_by_model(p.domain_results, ctx.config.baseline_variant);
        }
        return p;
    }
    if (!ctx.config.performance)
        fail(ErrorCode::ConfigError, "no performance data: run `judge` or set \"performance\" in the config");
    // {model: {benchmark: {variant: relative change}}}
    const auto j = read_json(*ctx.config.performance);
    for (const auto& [model, benches] : j.items()) {
        evaluation::PerformanceTable t;
        for (const auto& [bench, series] : benches.items())
            for (const auto& [variant, value] : series.items()) t[bench][variant] = value.get<double>();
        p.general.emplace_back(model, std::move(t));
    }
    return p;
}

}  // namespace detail

inline std::vector<correlation::CorrelationMatrix> correlate_artifacts(const Context& ctx) {
    const auto profiles = detail::load_profiles(ctx);
    const auto scores = detail::load_fvcu(ctx);
    const auto perf = detail::load_performance(ctx);
    correlation::BuildOptions options{ctx.config.include_perplexity};
    std::vector<correlation::CorrelationMatrix> out;
    for (const auto& [model, table] : perf.general) {
        auto m = correlation::build_matrix(correlation::make_input(model, profiles, scores, table), options);
        out.push_back(std::move(m));
    }
    for (const auto& [model, table] : perf.domains) {
        auto m = correlation::build_matrix(
            correlation::make_input(model + " by domain", profiles, scores, table), options);
        out.push_back(std::move(m));
    }
    return out;
}

inline int cmd_correlate(const Context& ctx, const std::vector<fs::path>& fixtures) {
    std::vector<std::pair<std::string, correlation::CorrelationMatrix>> matrices;
    correlation::BuildOptions options{ctx.config.include_perplexity};
    if (!fixtures.empty()) {
        for (const auto& f : fixtures)
            matrices.emplace_back(f.stem().string(), correlation::build_matrix(correlation::load_fixture(f), options));
    } else {
        for (auto& m : correlate_artifacts(ctx)) matrices.emplace_back(file_stem(m.model), std::move(m));
    }
    nlohmann::ordered_json index = nlohmann::ordered_json::array();
    for (const auto& [stem, m] : matrices) {
        write_text(ctx.dir("correlation") / (stem + ".csv"), correlation::matrix_csv(m));
        write_text(ctx.dir("correlation") / (stem + ".json"), correlation::to_json(m).dump(2) + "\n");
        index.push_back(stem);
        ctx.out << "### " << (m.model.empty() ? stem : m.model) << "\n" << correlation::render_matrix(m) << "\n";
    }
    write_text(ctx.dir("correlation") / "index.json", index.dump(2) + "\n");
    return 0;
}

inline correlation::CorrelationMatrix matrix_from_json(const nlohmann::ordered_json& j) {
    correlation::CorrelationMatrix m;
    m.model = j.value("model", std::string{});
    m.variants = j.at("variants").get<std::vector<std::string>>();
    m.benchmarks = j.at("benchmarks").get<std::vector<std::string>>();
    for (const auto& r : j.at("rows")) {
        const auto info = correlation::metric_info(r.at("metric").get<std::string>());
        correlation::MatrixRow row{r["metric"].get<std::string>(), std::string(info.display), info.block, {}, {}};
        for (const auto& c : r.at("rho"))
            row.cells.push_back({c.is_null() ? std::nullopt : std::optional<double>(c.get<double>()), m.variants.size()});
        if (!r.at("avg").is_null()) row.avg = r["avg"].get<double>();
        m.rows.push_back(std::move(row));
    }
    return m;
}

inline int cmd_report(const Context& ctx) {
    correlation::ReportInputs in;
    in.profiles = detail::load_profiles(ctx);
    in.fvcu = detail::load_fvcu(ctx);
    if (fs::exists(ctx.dir("eval") / "results.json")) {
        const auto perf = detail::load_performance(ctx);
        in.results = perf.results;
        in.domain_results = perf.domain_results;
    }
    const auto index = ctx.dir("correlation") / "index.json";
    if (fs::exists(index))
        for (const auto& stem : read_json(index))
            in.matrices.push_back(
                matrix_from_json(read_json(ctx.dir("correlation") / (stem.get<std::string>() + ".json"))));
    const auto doc = correlation::render_report(in);
    write_text(ctx.dir("report") / "report.md", doc);
    ctx.out << "wrote " << (ctx.dir("report") / "report.md").string() << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// Entry point

inline int exit_code(ErrorCode code) { return code == ErrorCode::ConfigError ? 2 : 1; }

inline void print_error(std::ostream& err, std::string_view code, std::string_view message) {
    nlohmann::ordered_json j;
    j["error"] = std::string(code);
    j["message"] = std::string(message);
    err << j.dump() << "\n";
}

inline int run(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    CLI::App app{"Validate reasoning-trace datasets before fine-tuning"};
    app.require_subcommand(1);
    std::optional<std::string> config_path;
    bool offline = false;
    bool verbose = false;
    std::optional<std::string> output_dir;
    std::optional<uint64_t> seed;
    std::vector<std::string> only;
    app.add_option("-c,--config", config_path, "JSON run configuration");
    app.add_flag("--offline", offline, "use deterministic stubs; never touch the network");
    app.add_option("-o,--output-dir", output_dir, "override the configured output directory");
    app.add_option("--seed", seed, "override the configured seed");
    app.add_option("--variant", only, "restrict to these variants");
    app.add_flag("-v,--verbose", verbose, "debug logging");

    auto* stats = app.add_subcommand("stats", "corpus statistics per variant");
    auto* profile = app.add_subcommand("profile", "analytical metrics per variant");
    auto* sample = app.add_subcommand("sample", "stratified subsample per variant");
    std::string purpose = "fvcu";
    std::optional<std::size_t> sample_n;
    sample->add_option("--purpose", purpose, "fvcu or eval (selects default size and directory)")
        ->check(CLI::IsMember({"fvcu", "eval"}));
    sample->add_option("-n", sample_n, "sample size");
    auto* fvcu_cmd = app.add_subcommand("fvcu", "step-level review of a stratified subsample");
    auto* judge = app.add_subcommand("judge", "judge benchmark predictions");
    std::optional<std::string> predictions;
    judge->add_option("--predictions", predictions, "predictions JSONL");
    auto* audit = app.add_subcommand("audit", "judge-vs-human agreement");
    std::optional<std::string> labels;
    audit->add_option("--labels", labels, "audit labels JSONL");
    auto* correlate = app.add_subcommand("correlate", "rank correlation of metrics with performance");
    std::vector<std::string> fixtures;
    bool include_ppl = false;
    correlate->add_option("--fixture", fixtures, "fixture JSON files instead of pipeline artifacts");
    correlate->add_flag("--include-perplexity", include_ppl, "add a perplexity row");
    auto* report = app.add_subcommand("report", "compose all artifacts into a Markdown report");

    std::vector<const char*> argv{"trace_profiler"};
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        print_error(err, "UsageError", e.what());
        return 2;
    }

    auto logger = spdlog::stderr_color_mt("trace_profiler_cli_" + std::to_string(reinterpret_cast<uintptr_t>(&app)));
    spdlog::set_default_logger(logger);
    spdlog::set_level(verbose ? spdlog::level::debug : spdlog::level::warn);
    struct DropLogger {
        std::string name;
        ~DropLogger() { spdlog::drop(name); }
    } drop{logger->name()};

    try {
        RunConfig cfg = config_path ? load_config(*config_path) : RunConfig{};
        if (!config_path) cfg.output_dir = "out";
        apply_env(cfg);
        if (offline) cfg.providers.offline = true;
        if (output_dir) cfg.output_dir = *output_dir;
        if (seed) {
            cfg.seed = *seed;
            cfg.providers.seed = *seed;
        }
        if (include_ppl) cfg.include_perplexity = true;
        Context ctx{cfg, out, only};

        if (*stats) return cmd_stats(ctx);
        if (*profile) return cmd_profile(ctx);
        if (*sample) return cmd_sample(ctx, purpose, sample_n);
        if (*fvcu_cmd) return cmd_fvcu(ctx);
        if (*judge) return cmd_judge(ctx, predictions ? std::optional<fs::path>(*predictions) : std::nullopt);
        if (*audit) return cmd_audit(ctx, labels ? std::optional<fs::path>(*labels) : std::nullopt);
        if (*correlate) return cmd_correlate(ctx, {fixtures.begin(), fixtures.end()});
        if (*report) return cmd_report(ctx);
    } catch (const Error& e) {
        print_error(err, to_string(e.code()), e.message());
        return exit_code(e.code());
    } catch (const std::exception& e) {
        print_error(err, "InternalError", e.what());
        return 1;
    }
    return 2;
}

inline int run(int argc, char** argv) {
    return run(std::vector<std::string>(argv + 1, argv + argc));
}

}  // namespace trace_profiler::cli
