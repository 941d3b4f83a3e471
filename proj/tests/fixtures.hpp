#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "committee_audit/random.hpp"
#include "committee_audit/synth.hpp"
#include "committee_audit/trace.hpp"

namespace fixtures {

namespace ca = committee_audit;

// Random simplex vector with float-representable entries.
inline std::vector<double> random_simplex(ca::SplitMix64& rng, std::size_t n) {
    std::vector<double> v(n);
    double s = 0.0;
    for (auto& x : v) s += (x = -std::log(rng.uniform()));
    for (auto& x : v) x = static_cast<double>(static_cast<float>(x / s));
    return v;
}

// Trace from explicit per-sample layer-major weights.
inline ca::RoutingTrace make_trace(std::uint32_t E, std::uint32_t L, std::uint32_t k,
                                   std::vector<std::string> names,
                                   std::vector<std::pair<std::uint32_t, std::vector<double>>> samples) {
    ca::RoutingTrace t;
    t.header.num_experts = E;
    t.header.num_layers = L;
    t.header.routing_budget = k;
    t.header.num_domains = static_cast<std::uint32_t>(names.size());
    t.domain_names = std::move(names);
    for (auto& [d, w] : samples) {
        ca::SampleRecord r;
        r.domain_id = d;
        r.weights = std::move(w);
        t.samples.push_back(std::move(r));
    }
    t.header.num_samples = t.samples.size();
    return t;
}

// Random valid trace; tokens optional.
inline ca::RoutingTrace random_trace(std::uint64_t seed, bool tokens) {
    ca::SplitMix64 rng(seed);
    ca::RoutingTrace t;
    const auto E = static_cast<std::uint32_t>(2 + rng.below(15));
    const auto L = static_cast<std::uint32_t>(1 + rng.below(4));
    const auto D = static_cast<std::uint32_t>(1 + rng.below(4));
    t.header.num_experts = E;
    t.header.num_layers = L;
    t.header.routing_budget = static_cast<std::uint32_t>(1 + rng.below(E));
    t.header.num_domains = D;
    for (std::uint32_t d = 0; d < D; ++d) t.domain_names.push_back("d" + std::to_string(d) + (d % 2 ? "\xc3\xa9" : ""));
    const std::size_t n = D + rng.below(12);
    for (std::size_t s = 0; s < n; ++s) {
        ca::SampleRecord r;
        r.domain_id = static_cast<std::uint32_t>(s < D ? s : rng.below(D));
        for (std::uint32_t l = 0; l < L; ++l) {
            const auto v = random_simplex(rng, E);
            r.weights.insert(r.weights.end(), v.begin(), v.end());
        }
        if (tokens) {
            const std::size_t nt = rng.below(4);
            for (std::size_t i = 0; i < nt; ++i) {
                ca::TokenRecord tok;
                tok.text = "tok" + std::to_string(rng.below(5));
                for (std::uint32_t l = 0; l < L; ++l) {
                    const auto v = random_simplex(rng, E);
                    tok.weights.insert(tok.weights.end(), v.begin(), v.end());
                }
                r.tokens.push_back(std::move(tok));
            }
        }
        t.samples.push_back(std::move(r));
    }
    bool any = false;
    for (const auto& s : t.samples) any = any || !s.tokens.empty();
    if (any) t.header.flags |= ca::kFlagTokens;
    t.header.num_samples = t.samples.size();
    return t;
}

inline ca::SynthSpec planted_spec() {
    ca::SynthSpec s;
    s.planted_committee = {5, 9, 21};
    s.committee_mass = 0.6;
    s.seed = 7;
    return s;
}

inline std::filesystem::path temp_dir(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("committee_audit_test_" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

} // namespace fixtures
