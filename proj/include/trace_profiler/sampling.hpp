#pragma once

// Deterministic stratified subsampling over domain x reasoning-length strata.

#include "trace_profiler/corpus.hpp"
#include "trace_profiler/error.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstdint>
#include <map>
#include <numeric>
#include <random>
#include <string>
#include <vector>

namespace trace_profiler::sampling {

struct StrataSpec {
    bool domain_axis = true;
    std::size_t length_quantiles = 4;  // 1 disables the length axis
    uint64_t seed = 0;
};

struct StratumKey {
    Domain domain = Domain::Other;
    std::size_t length_bin = 0;
    auto operator<=>(const StratumKey&) const = default;
};

struct Stratum {
    StratumKey key;
    std::vector<std::size_t> members;  // corpus indices
    std::size_t allocation = 0;
};

struct SamplePlan {
    std::vector<Stratum> strata;  // ordered by key
    std::vector<std::string> ids;  // selected, sorted
};

inline uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Uniform integer in [0, bound) by rejection; independent of the standard
/// library's distribution implementation so draws match across platforms.
inline uint64_t uniform_below(std::mt19937_64& rng, uint64_t bound) {
    require(bound > 0, "uniform_below: bound must be positive");
    const uint64_t limit = UINT64_MAX - (UINT64_MAX % bound + 1) % bound;
    uint64_t x;
    do {
        x = rng();
    } while (x > limit);
    return x % bound;
}

/// Largest-remainder apportionment of `n` over groups of the given sizes.
/// Ties in the remainder go to the earlier group.
inline std::vector<std::size_t> largest_remainder(const std::vector<std::size_t>& sizes, std::size_t n) {
    const uint64_t total = std::accumulate(sizes.begin(), sizes.end(), uint64_t{0});
    require(total > 0, "largest_remainder: no members");
    std::vector<std::size_t> alloc(sizes.size());
    std::vector<uint64_t> rem(sizes.size());
    std::size_t assigned = 0;
    for (std::size_t i = 0; i < sizes.size(); ++i) {
        const uint64_t num = static_cast<uint64_t>(n) * sizes[i];
        alloc[i] = static_cast<std::size_t>(num / total);
        rem[i] = num % total;
        assigned += alloc[i];
    }
    std::vector<std::size_t> order(sizes.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return rem[a] > rem[b]; });
    for (std::size_t k = 0; assigned < n; ++k, ++assigned) ++alloc[order[k]];
    return alloc;
}

/// Reasoning-length bin of each example: global rank by (tokens, id) cut
/// into q equal-count bins.
inline std::vector<std::size_t> length_bins(const Corpus& corpus, std::size_t q, const Tokenizer& tokenizer) {
    const auto n = corpus.size();
    std::vector<std::size_t> tokens(n);
    for (std::size_t i = 0; i < n; ++i) tokens[i] = tokenizer.count(corpus.examples[i].reasoning);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](auto a, auto b) {
        if (tokens[a] != tokens[b]) return tokens[a] < tokens[b];
        return corpus.examples[a].id < corpus.examples[b].id;
    });
    std::vector<std::size_t> bins(n);
    for (std::size_t rank = 0; rank < n; ++rank) bins[order[rank]] = rank * q / n;
    return bins;
}

/// Builds strata and allocations. Domains are apportioned first; within a
/// domain each length stratum gets floor(n * p_s) and the domain's leftover
/// units go to the largest remainders. Domain totals and stratum sizes are
/// then both within 1 of their exact proportions.
inline SamplePlan plan(const Corpus& corpus, std::size_t n, const StrataSpec& spec,
                       const Tokenizer& tokenizer = WhitespaceTokenizer{}) {
    require(spec.length_quantiles >= 1, "stratify: length_quantiles must be >= 1");
    if (corpus.empty()) fail(ErrorCode::EmptyCorpus, "stratify: empty corpus");
    require(n >= 1, "stratify: n must be >= 1");
    if (n > corpus.size())
        fail(ErrorCode::NTooLarge,
             "stratify: n=" + std::to_string(n) + " exceeds corpus size " + std::to_string(corpus.size()));

    const auto bins = length_bins(corpus, spec.length_quantiles, tokenizer);
    std::map<StratumKey, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        const Domain d = spec.domain_axis ? corpus.examples[i].domain : Domain::Other;
        groups[{d, bins[i]}].push_back(i);
    }

    SamplePlan out;
    for (auto& [key, members] : groups) {
        std::sort(members.begin(), members.end(),
                  [&](auto a, auto b) { return corpus.examples[a].id < corpus.examples[b].id; });
        out.strata.push_back({key, std::move(members), 0});
    }

    // Domain level.
    std::vector<Domain> domains;
    std::vector<std::size_t> domain_sizes;
    for (const auto& s : out.strata) {
        if (domains.empty() || domains.back() != s.key.domain) {
            domains.push_back(s.key.domain);
            domain_sizes.push_back(0);
        }
        domain_sizes.back() += s.members.size();
    }
    const auto domain_alloc = largest_remainder(domain_sizes, n);

    // Leaf level.
    const uint64_t total = corpus.size();
    std::size_t first = 0;
    for (std::size_t d = 0; d < domains.size(); ++d) {
        std::size_t last = first;
        while (last < out.strata.size() && out.strata[last].key.domain == domains[d]) ++last;
        std::vector<std::pair<uint64_t, std::size_t>> rems;
        std::size_t assigned = 0;
        for (std::size_t s = first; s < last; ++s) {
            const uint64_t num = static_cast<uint64_t>(n) * out.strata[s].members.size();
            out.strata[s].allocation = static_cast<std::size_t>(num / total);
            assigned += out.strata[s].allocation;
            rems.emplace_back(num % total, s);
        }
        std::stable_sort(rems.begin(), rems.end(), [](auto& a, auto& b) { return a.first > b.first; });
        for (std::size_t k = 0; assigned < domain_alloc[d]; ++k, ++assigned) ++out.strata[rems.at(k).second].allocation;
        first = last;
    }

    // Selection: partial Fisher-Yates over id-sorted members, one stream per stratum.
    for (auto& s : out.strata) {
        const uint64_t stream =
            splitmix64(spec.seed ^ splitmix64(static_cast<uint64_t>(s.key.domain) * 0x10000ULL + s.key.length_bin));
        std::mt19937_64 rng(stream);
        auto pool = s.members;
        for (std::size_t k = 0; k < s.allocation; ++k) {
            const auto j = k + static_cast<std::size_t>(uniform_below(rng, pool.size() - k));
            std::swap(pool[k], pool[j]);
            out.ids.push_back(corpus.examples[pool[k]].id);
        }
    }
    std::sort(out.ids.begin(), out.ids.end());
    return out;
}

/// Selected examples, ordered by id.
inline Corpus stratify(const Corpus& corpus, std::size_t n, const StrataSpec& spec,
                       const Tokenizer& tokenizer = WhitespaceTokenizer{}) {
    const auto p = plan(corpus, n, spec, tokenizer);
    std::map<std::string_view, const Example*> by_id;
    for (const auto& ex : corpus.examples) by_id[ex.id] = &ex;
    Corpus out;
    out.name = corpus.name;
    out.provenance = corpus.provenance;
    for (const auto& id : p.ids) out.examples.push_back(*by_id.at(id));
    return out;
}

inline std::string ids_json(const std::vector<std::string>& ids) { return nlohmann::json(ids).dump(2) + "\n"; }

inline std::vector<std::string> sorted_ids(const Corpus& corpus) {
    std::vector<std::string> ids;
    for (const auto& ex : corpus.examples) ids.push_back(ex.id);
    std::sort(ids.begin(), ids.end());
    return ids;
}

inline nlohmann::ordered_json to_json(const SamplePlan& p) {
    nlohmann::ordered_json strata = nlohmann::ordered_json::array();
    for (const auto& s : p.strata) {
        nlohmann::ordered_json j;
        j["domain"] = std::string(to_string(s.key.domain));
        j["length_bin"] = s.key.length_bin;
        j["size"] = s.members.size();
        j["allocation"] = s.allocation;
        strata.push_back(j);
    }
    nlohmann::ordered_json j;
    j["n"] = p.ids.size();
    j["strata"] = strata;
    return j;
}

}  // namespace trace_profiler::sampling
