// One PASS/FAIL line per acceptance criterion; exits nonzero if any fails.

#include "test_support.hpp"

#include <trace_profiler/cli.hpp>
#include <trace_profiler/correlation.hpp>
#include <trace_profiler/evaluation.hpp>
#include <trace_profiler/fvcu.hpp>
#include <trace_profiler/metrics.hpp>
#include <trace_profiler/providers/provider_set.hpp>
#include <trace_profiler/sampling.hpp>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>

using namespace trace_profiler;
namespace fs = std::filesystem;
namespace pv = trace_profiler::providers;
using Clock = std::chrono::steady_clock;

namespace {

/// Collects failures for one criterion; the first few are printed.
struct Check {
    std::vector<std::string> failures;
    std::string detail;

    void expect(bool ok, const std::string& what) {
        if (!ok) failures.push_back(what);
    }
    void near(double got, double want, double tol, const std::string& what) {
        expect(std::abs(got - want) <= tol, fmt::format("{}: got {:.6f}, want {:.6f} +/- {}", what, got, want, tol));
    }
};

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

nlohmann::json load_json(const std::string& rel) {
    return nlohmann::json::parse(tp_test::slurp(tp_test::source_path(rel)));
}

correlation::CorrelationMatrix fixture_matrix(const std::string& name) {
    return correlation::build_matrix(
        correlation::load_fixture(tp_test::source_path("data/published/" + name + ".json")));
}

std::size_t compare_matrix(Check& c, const std::string& name) {
    const auto m = fixture_matrix(name);
    const auto expected = load_json("data/published/" + name + ".expected.json");
    c.expect(m.benchmarks == expected["benchmarks"].get<std::vector<std::string>>(), name + ": benchmark order");
    c.expect(m.rows.size() == expected["rho"].size(), name + ": row count");
    std::size_t cells = 0;
    for (const auto& row : m.rows) {
        if (!expected["rho"].contains(row.metric)) {
            c.expect(false, name + ": unexpected row " + row.metric);
            continue;
        }
        const auto& want = expected["rho"][row.metric]["cells"];
        for (std::size_t i = 0; i < row.cells.size() && i < want.size(); ++i) {
            const auto label = fmt::format("{} {} x {}", name, row.metric, m.benchmarks[i]);
            if (!row.cells[i].rho) {
                c.expect(false, label + ": undefined");
                continue;
            }
            c.near(*row.cells[i].rho, want[i].get<double>(), 0.01, label);
            ++cells;
        }
    }
    return cells;
}

double rho_at(const correlation::CorrelationMatrix& m, const std::string& metric, const std::string& bench) {
    for (const auto& r : m.rows)
        if (r.metric == metric)
            for (std::size_t i = 0; i < m.benchmarks.size(); ++i)
                if (m.benchmarks[i] == bench && r.cells[i].rho) return *r.cells[i].rho;
    return std::nan("");
}

// ---------------------------------------------------------------------------

Check correlation_general() {
    Check c;
    const auto t0 = Clock::now();
    const auto cells = compare_matrix(c, "pllum_general") + compare_matrix(c, "bielik_general");
    const double elapsed = seconds_since(t0);
    c.expect(cells == 108, fmt::format("compared {} cells, want 108", cells));
    const auto pllum = fixture_matrix("pllum_general");
    c.near(rho_at(pllum, "syntactic_depth", "LightR1"), -0.74, 0.01, "tied-rank syntactic_depth x LightR1");
    c.near(rho_at(pllum, "utility", "LightR1"), -0.74, 0.01, "tied-rank utility x LightR1");
    c.near(rho_at(pllum, "semantic_alignment", "MoT-PL"), 1.0, 0.01, "semantic_alignment x MoT-PL");
    const auto bielik = fixture_matrix("bielik_general");
    c.near(rho_at(bielik, "redundancy_ratio", "LightR1"), 1.0, 0.01, "bielik redundancy_ratio x LightR1");
    c.expect(elapsed < 1.0, fmt::format("runtime {:.3f}s >= 1s", elapsed));
    c.detail = fmt::format("{} cells within 0.01, {:.3f}s", cells, elapsed);
    return c;
}

Check correlation_domains() {
    Check c;
    const auto cells = compare_matrix(c, "pllum_domains") + compare_matrix(c, "bielik_domains");
    c.expect(cells == 54, fmt::format("compared {} cells, want 54", cells));
    c.detail = fmt::format("{} cells within 0.01", cells);
    return c;
}

Check relative_change_table() {
    Check c;
    const auto j = load_json("data/published/accuracy.json");
    std::size_t n = 0;
    for (const auto& [model, variants] : j["relative_change"].items()) {
        const auto& base = j["accuracy"][model]["Original"];
        for (const auto& [variant, row] : variants.items()) {
            const auto& acc = j["accuracy"][model][variant];
            for (std::size_t i = 0; i < row["scores"].size(); ++i, ++n)
                c.near(evaluation::relative_change(base["scores"][i].get<double>(), acc["scores"][i].get<double>()),
                       row["scores"][i].get<double>(), 0.1, fmt::format("{} {} #{}", model, variant, i));
            // The Avg column follows from the printed Avg accuracies.
            c.near(evaluation::relative_change(base["avg"].get<double>(), acc["avg"].get<double>()),
                   row["avg"].get<double>(), 0.1, fmt::format("{} {} avg", model, variant));
            ++n;
        }
    }
    c.near(evaluation::relative_change(0.316, 0.374), 18.4, 0.1, "0.316 -> 0.374");
    c.near(evaluation::relative_change(0.624, 0.701), 12.3, 0.1, "0.624 -> 0.701");
    c.expect(n == 56, fmt::format("compared {} cells, want 56", n));
    c.detail = fmt::format("{} cells within 0.1 pp", n);
    return c;
}

Check macro_average_column() {
    Check c;
    const auto j = load_json("data/published/accuracy.json");
    std::size_t n = 0;
    for (const auto& [model, variants] : j["accuracy"].items())
        for (const auto& [variant, row] : variants.items()) {
            c.near(evaluation::macro_average(row["scores"].get<std::vector<double>>()), row["avg"].get<double>(), 0.001,
                   model + " " + variant);
            ++n;
        }
    c.expect(n == 10, fmt::format("compared {} rows, want 10", n));
    c.detail = fmt::format("{} averages within 0.001", n);
    return c;
}

// Brute-force oracle: count-based fractional ranks and two-pass Pearson.
std::optional<double> oracle_spearman(const std::vector<double>& x, const std::vector<double>& y) {
    auto ranks = [](const std::vector<double>& v) {
        std::vector<double> r(v.size());
        for (std::size_t i = 0; i < v.size(); ++i) {
            double above = 0, tied = 0;
            for (std::size_t j = 0; j < v.size(); ++j) {
                if (v[j] > v[i]) above += 1;
                else if (j != i && v[j] == v[i]) tied += 1;
            }
            r[i] = 1 + above + tied / 2;
        }
        return r;
    };
    const auto rx = ranks(x), ry = ranks(y);
    const double n = static_cast<double>(x.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) mx += rx[i], my += ry[i];
    mx /= n;
    my /= n;
    double sxx = 0, syy = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (rx[i] - mx) * (rx[i] - mx);
        syy += (ry[i] - my) * (ry[i] - my);
        sxy += (rx[i] - mx) * (ry[i] - my);
    }
    if (sxx == 0 || syy == 0) return std::nullopt;
    return sxy / std::sqrt(sxx * syy);
}

Check spearman_oracle() {
    Check c;
    std::mt19937_64 rng(8675309);
    std::size_t compared = 0, degenerate = 0;
    double worst = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t n = 3 + rng() % 6;
        const int pool = 2 + static_cast<int>(rng() % 5);
        std::vector<double> x(n), y(n);
        for (std::size_t i = 0; i < n; ++i) {
            x[i] = static_cast<double>(rng() % pool);
            y[i] = trial % 2 ? static_cast<double>(rng() % pool) : std::ldexp(static_cast<double>(rng() >> 11), -53);
        }
        const auto want = oracle_spearman(x, y);
        if (!want) {
            ++degenerate;
            bool threw = false;
            try {
                correlation::spearman(x, y);
            } catch (const Error& e) {
                threw = e.code() == ErrorCode::DegenerateSeries;
            }
            c.expect(threw, fmt::format("trial {}: constant series not flagged", trial));
            continue;
        }
        const double got = correlation::spearman(x, y);
        worst = std::max(worst, std::abs(got - *want));
        c.expect(std::abs(got - *want) <= 1e-12, fmt::format("trial {}: {} vs {}", trial, got, *want));
        ++compared;
    }
    const std::set<double> grid = {1.0, 0.8, 0.6, 0.4, 0.2, 0.0, -0.2, -0.4, -0.6, -0.8, -1.0};
    std::vector<double> base = {1, 2, 3, 4}, perm = base;
    std::size_t perms = 0;
    do {
        const double r = correlation::spearman(base, perm);
        c.expect(grid.count(r) == 1, fmt::format("permutation rho {} off grid", r));
        ++perms;
    } while (std::next_permutation(perm.begin(), perm.end()));
    c.expect(perms == 24, "expected 24 permutations");
    c.detail = fmt::format("{} oracle pairs (max err {:.1e}, {} degenerate), {} permutations exact", compared, worst,
                           degenerate, perms);
    return c;
}

std::string from_hex(const std::string& hex) {
    std::string out;
    for (std::size_t i = 0; i + 1 < hex.size(); i += 2)
        out += static_cast<char>(std::stoi(hex.substr(i, 2), nullptr, 16));
    return out;
}

Check metric_properties() {
    Check c;
    struct Case {
        const char* text;
        std::size_t symbolic, total;
    };
    const Case cases[] = {
        {"abc", 0, 3},         {"a+b", 1, 3},        {"x = 2", 1, 3},     {"2+2=4", 2, 5},
        {"f(x)", 2, 4},        {"!!!", 3, 3},        {"hello, world.", 2, 12}, {"a_b", 1, 3},
        {"zażółć", 0, 6},      {"π ≈ 3.14", 2, 6},   {"for (i = 0; i < n; ++i) {", 9, 17},
        {"\t\n a \r", 0, 1},   {"$$$ 100", 3, 6},    {"<think>", 2, 7},   {"Ответ: 42", 1, 8},
        {"中文!", 1, 3},       {"a-b-c-d", 3, 7},    {"∑∫√", 3, 3},       {"3 * (4 + 5) / 6", 5, 9},
        {"emoji 😀", 1, 6},
    };
    std::size_t symbolic = 0;
    for (const auto& k : cases) {
        const double want = static_cast<double>(k.symbolic) / static_cast<double>(k.total);
        c.expect(metrics::symbolic_fraction(k.text) == want, fmt::format("symbolic_fraction(\"{}\")", k.text));
        ++symbolic;
    }

    const double aaa = metrics::redundancy_ratio(std::string(1024, 'a'));
    c.expect(aaa >= 0.95, fmt::format("redundancy a*1024 = {}", aaa));
    const auto fixtures = load_json("tests/golden/deflate_fixtures.json");
    std::optional<double> random_ratio;
    for (const auto& f : fixtures) {
        const auto bytes = from_hex(f["hex"].get<std::string>());
        const double want = 1.0 - f["deflate_size"].get<double>() / static_cast<double>(bytes.size());
        const double got = metrics::redundancy_ratio(bytes);
        c.expect(got == want, fmt::format("deflate fixture {}: {} vs {}", f["name"].get<std::string>(), got, want));
        if (f["name"] == "random_bytes_4096") random_ratio = got;
    }
    c.expect(random_ratio && *random_ratio <= 0.15, "seeded random bytes ratio <= 0.15");

    for (double v : {2.0, 32000.0, 151936.0}) {
        pv::UniformScorer scorer(v);
        c.near(metrics::perplexity("a short reasoning trace with words", scorer), v, 1e-9, "uniform perplexity");
    }
    pv::PunctuationSegmenter seg;
    pv::HashEmbedder emb;
    c.expect(!metrics::semantic_flow("Only one sentence here.", seg, emb).has_value(), "flow on one sentence");
    c.detail = fmt::format("{} symbolic strings, {} DEFLATE fixtures, a*1024 = {:.4f}, random = {:.4f}", symbolic,
                           fixtures.size(), aaa, random_ratio.value_or(std::nan("")));
    return c;
}

fvcu::StepVerdict verdict(std::string ex, std::size_t i, bool f, bool v, bool co, bool u) {
    return {std::move(ex), i, f, v, co, u, "r"};
}

Check fvcu_pipeline() {
    Check c;
    const auto review = load_corpus(tp_test::source_path("data/synthetic/review50.jsonl"), Schema::Structured);
    c.expect(review.size() == 50, "review corpus has 50 examples");
    auto chat = pv::make_offline_chat();
    std::size_t steps = 0;
    for (const auto& ex : review.examples) {
        std::size_t cursor = 0;
        for (const auto& s : fvcu::atomize(ex, *chat)) {
            c.expect(ex.reasoning.compare(s.offset, s.text.size(), s.text) == 0, ex.id + ": step not verbatim");
            c.expect(s.offset >= cursor, ex.id + ": steps out of order");
            cursor = s.offset + s.text.size();
            ++steps;
        }
    }

    std::vector<fvcu::StepVerdict> one;
    for (std::size_t i = 0; i < 10; ++i) one.push_back(verdict("a", i, i != 3, true, true, true));
    const auto s1 = fvcu::aggregate_fvcu(one);
    c.expect(s1.factuality_pct == 90.0 && s1.validity_pct == 100.0 && s1.coherence_pct == 100.0 &&
                 s1.utility_pct == 100.0,
             "set 1 percentages");
    const std::vector<fvcu::StepVerdict> two = {
        verdict("x", 0, true, true, true, true),   verdict("x", 1, true, false, true, false),
        verdict("x", 2, false, true, true, false), verdict("y", 0, true, false, false, true),
        verdict("y", 1, true, true, true, false),  verdict("y", 2, true, false, true, false),
        verdict("y", 3, false, true, true, false), verdict("y", 4, true, false, true, false),
    };
    const auto s2 = fvcu::aggregate_fvcu(two);
    c.expect(s2.factuality_pct == 75.0 && s2.validity_pct == 50.0 && s2.coherence_pct == 87.5 &&
                 s2.utility_pct == 25.0,
             "set 2 percentages");
    const std::vector<fvcu::StepVerdict> three = {
        verdict("z", 0, false, true, false, false),
        verdict("z", 1, false, true, true, false),
        verdict("z", 2, true, true, false, false),
    };
    const auto s3 = fvcu::aggregate_fvcu(three);
    c.near(s3.factuality_pct, 100.0 / 3, 1e-12, "set 3 factuality");
    c.expect(s3.validity_pct == 100.0 && s3.utility_pct == 0.0, "set 3 validity/utility");
    c.near(s3.coherence_pct, 100.0 / 3, 1e-12, "set 3 coherence");

    const auto corpus = load_corpus(tp_test::source_path("data/synthetic/detailed.jsonl"), Schema::Structured);
    auto chat_a = pv::make_offline_chat();
    auto chat_b = pv::make_offline_chat();
    const auto a = fvcu::run_fvcu(corpus, *chat_a);
    const auto b = fvcu::run_fvcu(corpus, *chat_b);
    const bool identical =
        fvcu::verdict_log(a) == fvcu::verdict_log(b) && fvcu::to_json(a.scores).dump() == fvcu::to_json(b.scores).dump();
    c.expect(identical, "two runs differ");
    c.detail = fmt::format("{} verbatim steps over {} examples, 3 hand-counted sets, runs byte-identical", steps,
                           review.size());
    return c;
}

Corpus domain_corpus(std::size_t math, std::size_t code, std::size_t science, uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<Domain> domains;
    domains.insert(domains.end(), math, Domain::Math);
    domains.insert(domains.end(), code, Domain::Code);
    domains.insert(domains.end(), science, Domain::Science);
    std::shuffle(domains.begin(), domains.end(), rng);
    Corpus c;
    for (std::size_t i = 0; i < domains.size(); ++i) {
        Example ex;
        ex.id = fmt::format("s{:05}", i);
        ex.domain = domains[i];
        ex.query = "q";
        ex.answer = "a";
        for (std::size_t w = 0, n = 1 + rng() % 80; w < n; ++w) ex.reasoning += "tok ";
        c.examples.push_back(std::move(ex));
    }
    return c;
}

Check sampling_proportions() {
    Check c;
    auto corpus = domain_corpus(2800, 1700, 5500, 99);
    const auto p = sampling::plan(corpus, 1000, {true, 4, 42});
    std::map<std::string, Domain> domain_of;
    for (const auto& ex : corpus.examples) domain_of[ex.id] = ex.domain;
    std::map<Domain, long> totals;
    for (const auto& id : p.ids) ++totals[domain_of.at(id)];
    c.expect(std::abs(totals[Domain::Math] - 280) <= 1, fmt::format("math {}", totals[Domain::Math]));
    c.expect(std::abs(totals[Domain::Code] - 170) <= 1, fmt::format("code {}", totals[Domain::Code]));
    c.expect(std::abs(totals[Domain::Science] - 550) <= 1, fmt::format("science {}", totals[Domain::Science]));

    c.expect(sampling::plan(corpus, 1000, {true, 4, 42}).ids == p.ids, "rerun changed ids");
    std::mt19937_64 rng(3);
    for (int i = 0; i < 5; ++i) {
        std::shuffle(corpus.examples.begin(), corpus.examples.end(), rng);
        c.expect(sampling::plan(corpus, 1000, {true, 4, 42}).ids == p.ids, "input order changed ids");
    }
    c.detail = fmt::format("math/code/science = {}/{}/{}, stable across reruns and 5 permutations",
                           totals[Domain::Math], totals[Domain::Code], totals[Domain::Science]);
    return c;
}

Check audit_math() {
    Check c;
    const auto indep = evaluation::cohen_kappa({true, true, false, false}, {true, false, true, false});
    c.expect(indep.kappa && *indep.kappa == 0.0, "independence case kappa != 0");
    const std::vector<bool> same = {true, false, true, true, false, false, true};
    const auto ident = evaluation::cohen_kappa(same, same);
    c.expect(ident.kappa && *ident.kappa == 1.0, "identical lists kappa != 1");
    const double pe = evaluation::implied_chance_agreement(0.95, 0.886);
    c.near(pe, 0.5614, 0.001, "implied p_e");
    c.detail = fmt::format("kappa 0 and 1 exact, implied p_e = {:.4f}", pe);
    return c;
}

std::map<std::string, std::string> snapshot(const fs::path& dir) {
    std::map<std::string, std::string> files;
    for (const auto& e : fs::recursive_directory_iterator(dir))
        if (e.is_regular_file()) files[fs::relative(e.path(), dir).string()] = tp_test::slurp(e.path());
    return files;
}

Check offline_end_to_end() {
    Check c;
    // Point every endpoint at a closed port; offline mode must not dial any of them.
    for (const char* cap : {"CHAT", "EMBED", "SCORER", "NLP"})
        ::setenv(fmt::format("TRACE_PROFILER_{}_BASE_URL", cap).c_str(), "http://127.0.0.1:9", 1);
    const auto before = pv::network_operations().load();
    const auto t0 = Clock::now();
    std::vector<std::map<std::string, std::string>> runs;
    for (int i = 0; i < 2; ++i) {
        tp_test::TempDir tmp("tp-accept");
        tp_test::copy_tree(tp_test::source_path("data/synthetic"), tmp.path());
        const auto config = (tmp / "config.json").string();
        for (const char* cmd : {"profile", "fvcu", "correlate", "report"}) {
            std::ostringstream out, err;
            const int code = cli::run({"--offline", "-c", config, cmd}, out, err);
            c.expect(code == 0, fmt::format("{} exited {}: {}", cmd, code, err.str()));
        }
        runs.push_back(snapshot(tmp / "out"));
    }
    const double elapsed = seconds_since(t0) / 2;
    const auto ops = pv::network_operations().load() - before;
    for (const char* cap : {"CHAT", "EMBED", "SCORER", "NLP"})
        ::unsetenv(fmt::format("TRACE_PROFILER_{}_BASE_URL", cap).c_str());

    c.expect(ops == 0, fmt::format("{} network operations", ops));
    c.expect(runs[0] == runs[1], "runs differ");
    c.expect(runs[0].count("report/report.md") == 1, "no report written");
    c.expect(elapsed < 30.0, fmt::format("run took {:.1f}s", elapsed));
    c.detail = fmt::format("{} artifacts byte-identical, {} network ops, {:.2f}s per run", runs[0].size(), ops, elapsed);
    return c;
}

}  // namespace

int main() {
    const std::vector<std::pair<const char*, std::function<Check()>>> criteria = {
        {"correlation matrix, general benchmarks", correlation_general},
        {"correlation matrix, domain benchmarks", correlation_domains},
        {"relative change table", relative_change_table},
        {"accuracy Avg column", macro_average_column},
        {"Spearman oracle suite", spearman_oracle},
        {"metric property suite", metric_properties},
        {"FVCU pipeline under stubs", fvcu_pipeline},
        {"stratified sampling", sampling_proportions},
        {"audit agreement math", audit_math},
        {"offline end-to-end", offline_end_to_end},
    };
    int failed = 0;
    for (const auto& [name, fn] : criteria) {
        Check c;
        try {
            c = fn();
        } catch (const std::exception& e) {
            c.failures.push_back(std::string("threw: ") + e.what());
        }
        if (c.failures.empty()) {
            std::cout << "PASS " << name << ": " << c.detail << "\n";
        } else {
            ++failed;
            std::cout << "FAIL " << name << ": " << c.failures.size() << " problem(s)\n";
            for (std::size_t i = 0; i < std::min<std::size_t>(5, c.failures.size()); ++i)
                std::cout << "    " << c.failures[i] << "\n";
        }
    }
    std::cout << (failed ? fmt::format("{} of {} criteria failed\n", failed, criteria.size())
                         : fmt::format("all {} criteria passed\n", criteria.size()));
    return failed ? 1 : 0;
}
