#include "test_support.hpp"

#include <trace_profiler/cli.hpp>

#include <gtest/gtest.h>

#include <cstdlib>

using namespace trace_profiler;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    int code;
    std::string out, err;
};

Outcome run(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

/// Sets an environment variable for the lifetime of the object.
class ScopedEnv {
public:
    ScopedEnv(std::string name, const std::string& value) : name_(std::move(name)) {
        if (const char* old = std::getenv(name_.c_str())) old_ = old;
        ::setenv(name_.c_str(), value.c_str(), 1);
    }
    ~ScopedEnv() {
        if (old_) ::setenv(name_.c_str(), old_->c_str(), 1);
        else ::unsetenv(name_.c_str());
    }

private:
    std::string name_;
    std::optional<std::string> old_;
};

std::map<std::string, std::string> snapshot(const fs::path& dir) {
    std::map<std::string, std::string> files;
    for (const auto& e : fs::recursive_directory_iterator(dir))
        if (e.is_regular_file()) files[fs::relative(e.path(), dir).string()] = tp_test::slurp(e.path());
    return files;
}

/// Copies the bundled synthetic corpus and runs every stage offline.
std::map<std::string, std::string> full_run(const tp_test::TempDir& tmp) {
    tp_test::copy_tree(tp_test::source_path("data/synthetic"), tmp.path());
    const auto config = (tmp / "config.json").string();
    for (const char* cmd : {"stats", "profile", "fvcu", "judge", "audit", "correlate", "report"}) {
        const auto r = run({"--offline", "-c", config, cmd});
        EXPECT_EQ(r.code, 0) << cmd << ": " << r.err;
    }
    return snapshot(tmp / "out");
}

}  // namespace

TEST(Config, ParsesAndResolvesPaths) {
    const auto j = nlohmann::ordered_json::parse(R"({
        "variants": {"B": "b.jsonl", "A": "/abs/a.jsonl"},
        "schema": "chat", "seed": 3, "fvcu_n": 5, "offline": false,
        "providers": {"chat": {"base_url": "http://h", "model_id": "m"}}})");
    const auto c = cli::parse_config(j, "/base");
    ASSERT_EQ(c.variants.size(), 2u);
    EXPECT_EQ(c.variants[0].first, "B");
    EXPECT_EQ(c.variants[0].second, fs::path("/base/b.jsonl"));
    EXPECT_EQ(c.variants[1].second, fs::path("/abs/a.jsonl"));
    EXPECT_EQ(c.schema, Schema::Chat);
    EXPECT_EQ(c.fvcu_n, 5u);
    EXPECT_EQ(c.eval_n, 900u);
    EXPECT_FALSE(c.providers.offline);
    EXPECT_EQ(c.providers.chat.model_id, "m");
    EXPECT_EQ(c.output_dir, fs::path("/base/out"));
}

TEST(Config, RejectsBadValues) {
    for (const char* text : {R"([])", R"({"schema": "xml"})", R"({"fvcu_n": 0})", R"({"variants": [1]})",
                             R"({"seed": "x"})"}) {
        try {
            cli::parse_config(nlohmann::ordered_json::parse(text), "/");
            ADD_FAILURE() << text;
        } catch (const Error& e) {
            EXPECT_EQ(e.code(), ErrorCode::ConfigError) << text;
        }
    }
}

TEST(Config, EnvironmentOverridesEndpoints) {
    ScopedEnv url("TRACE_PROFILER_EMBED_BASE_URL", "http://embed:1");
    ScopedEnv key("TRACE_PROFILER_EMBED_API_KEY", "k");
    ScopedEnv model("TRACE_PROFILER_CHAT_MODEL", "judge-x");
    cli::RunConfig c;
    cli::apply_env(c);
    EXPECT_EQ(c.providers.embed.base_url, "http://embed:1");
    EXPECT_EQ(c.providers.embed.api_key, "k");
    EXPECT_EQ(c.providers.chat.model_id, "judge-x");
    EXPECT_TRUE(c.providers.scorer.base_url.empty());
}

TEST(Cli, UsageErrors) {
    EXPECT_EQ(run({}).code, 2);
    const auto r = run({"bogus"});
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("\"error\":\"UsageError\""), std::string::npos);
    EXPECT_EQ(run({"--help"}).code, 0);
}

TEST(Cli, JudgeOnlineWithoutEndpointIsConfigError) {
    tp_test::TempDir tmp;
    tp_test::copy_tree(tp_test::source_path("data/synthetic"), tmp.path());
    auto cfg = nlohmann::ordered_json::parse(tp_test::slurp(tmp / "config.json"));
    cfg["offline"] = false;
    std::ofstream(tmp / "online.json") << cfg.dump();
    const auto r = run({"-c", (tmp / "online.json").string(), "judge"});
    EXPECT_EQ(r.code, 2);
    const auto err = nlohmann::json::parse(r.err);
    EXPECT_EQ(err["error"], "ConfigError");
    EXPECT_NE(err["message"].get<std::string>().find("chat endpoint"), std::string::npos);
}

TEST(Cli, MissingConfigFile) {
    const auto r = run({"-c", "/nonexistent/config.json", "stats"});
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("ConfigError"), std::string::npos);
}

TEST(Cli, CorruptCorpusExitsOne) {
    tp_test::TempDir tmp;
    tp_test::copy_tree(tp_test::source_path("data/synthetic"), tmp.path());
    std::ofstream(tmp / "detailed.jsonl", std::ios::app) << "{not json\n";
    const auto r = run({"--offline", "-c", (tmp / "config.json").string(), "stats"});
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.err.find("ParseError"), std::string::npos);
}

TEST(Cli, OfflineRunTouchesNoNetwork) {
    // Every configured endpoint points at a closed port; offline mode must ignore them.
    ScopedEnv a("TRACE_PROFILER_CHAT_BASE_URL", "http://127.0.0.1:9");
    ScopedEnv b("TRACE_PROFILER_EMBED_BASE_URL", "http://127.0.0.1:9");
    ScopedEnv c("TRACE_PROFILER_SCORER_BASE_URL", "http://127.0.0.1:9");
    ScopedEnv d("TRACE_PROFILER_NLP_BASE_URL", "http://127.0.0.1:9");
    const auto before = providers::network_operations().load();
    tp_test::TempDir tmp;
    const auto files = full_run(tmp);
    EXPECT_EQ(providers::network_operations().load(), before);
    EXPECT_TRUE(files.count("report/report.md"));
}

TEST(Cli, EndToEndIsByteIdentical) {
    tp_test::TempDir one, two;
    const auto a = full_run(one);
    const auto b = full_run(two);
    ASSERT_EQ(a.size(), b.size());
    for (const auto& [name, content] : a) {
        ASSERT_TRUE(b.count(name)) << name;
        EXPECT_EQ(content, b.at(name)) << name;
    }
    for (const char* expected :
         {"profiles/Detailed.json", "profiles/Lengthy.examples.jsonl", "profiles/BabyThink.stats.json",
          "fvcu/Summarized.scores.json", "fvcu/Detailed.verdicts.jsonl", "fvcu/Detailed.ids.json",
          "eval/results.csv", "eval/domains.json", "eval/judgments.jsonl", "eval/audit.json",
          "correlation/index.json", "report/report.md"})
        EXPECT_TRUE(a.count(expected)) << expected;
    const auto& report = a.at("report/report.md");
    for (const char* heading : {"## Analytical metrics", "## Rank correlation with downstream performance"})
        EXPECT_NE(report.find(heading), std::string::npos) << heading;
}

TEST(Cli, SampleCommand) {
    tp_test::TempDir tmp;
    tp_test::copy_tree(tp_test::source_path("data/synthetic"), tmp.path());
    const auto config = (tmp / "config.json").string();
    auto r = run({"-c", config, "--variant", "Detailed", "sample", "-n", "5"});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto ids = nlohmann::json::parse(tp_test::slurp(tmp / "out/fvcu/Detailed.ids.json"));
    EXPECT_EQ(ids.size(), 5u);
    EXPECT_FALSE(fs::exists(tmp / "out/fvcu/Lengthy.ids.json"));

    r = run({"-c", config, "--variant", "Lengthy", "sample", "--purpose", "eval"});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(nlohmann::json::parse(tp_test::slurp(tmp / "out/eval/Lengthy.ids.json")).size(), 12u);

    // Oversized requests are clamped to the corpus with a warning.
    r = run({"-c", config, "--variant", "Lengthy", "sample", "-n", "500"});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(nlohmann::json::parse(tp_test::slurp(tmp / "out/fvcu/Lengthy.ids.json")).size(), 20u);

    EXPECT_EQ(run({"-c", config, "--variant", "Nope", "stats"}).code, 2);
}

TEST(Cli, CorrelateFixturesAndPerformanceFallback) {
    tp_test::TempDir tmp;
    const auto r = run({"-o", tmp.path().string(), "correlate", "--fixture",
                        tp_test::source_path("data/published/pllum_general.json").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("| Syntactic Depth | 0.00 | 0.00 | 0.00 | 0.00 | 0.40 | -0.74 | -0.06 |"), std::string::npos)
        << r.out;
    EXPECT_TRUE(fs::exists(tmp / "correlation/pllum_general.csv"));

    // Without judged results, correlate falls back to the configured performance file.
    tp_test::TempDir run_dir;
    tp_test::copy_tree(tp_test::source_path("data/synthetic"), run_dir.path());
    const auto config = (run_dir / "config.json").string();
    ASSERT_EQ(run({"--offline", "-c", config, "profile"}).code, 0);
    const auto c = run({"--offline", "-c", config, "correlate"});
    ASSERT_EQ(c.code, 0) << c.err;
    EXPECT_EQ(c.out.find("Utility"), std::string::npos);
    const auto p = run({"--offline", "-c", config, "correlate", "--include-perplexity"});
    EXPECT_NE(p.out.find("Perplexity"), std::string::npos);
}

TEST(Cli, ReportNeedsProfiles) {
    tp_test::TempDir tmp;
    tp_test::copy_tree(tp_test::source_path("data/synthetic"), tmp.path());
    const auto r = run({"--offline", "-c", (tmp / "config.json").string(), "report"});
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("run `profile` first"), std::string::npos);
}

TEST(Cli, SeedOverrideChangesSample) {
    tp_test::TempDir tmp;
    tp_test::copy_tree(tp_test::source_path("data/synthetic"), tmp.path());
    const auto config = (tmp / "config.json").string();
    ASSERT_EQ(run({"-c", config, "--variant", "Detailed", "sample", "-n", "5"}).code, 0);
    const auto first = tp_test::slurp(tmp / "out/fvcu/Detailed.ids.json");
    ASSERT_EQ(run({"-c", config, "--seed", "8", "--variant", "Detailed", "sample", "-n", "5"}).code, 0);
    EXPECT_NE(tp_test::slurp(tmp / "out/fvcu/Detailed.ids.json"), first);
}
