#pragma once

// Seeded synthetic traces with planted routing structure.
//
// Planted mode: every routing vector gives `committee_mass` to the planted committee,
// `specialist_mass` to the sample's domain specialists (when that domain has any), and spreads
// the rest over the remaining experts with a symmetric Dirichlet-style draw.
//
// Disjoint mode: domain d routes kDisjointBlockMass of each vector into its own block of k
// experts [d*k, (d+1)*k) and the rest over the experts outside the block.
//
// Residual draw: w_i = (-ln u_i)^(1/concentration), u_i ~ U(0,1) from SplitMix64, normalized.
// concentration 1 gives an exact flat Dirichlet; larger values flatten the draw, smaller values
// sharpen it. Stored weights are rounded to binary32, like the on-disk format.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "committee_audit/error.hpp"
#include "committee_audit/random.hpp"
#include "committee_audit/trace.hpp"

namespace committee_audit {

inline constexpr double kDisjointBlockMass = 0.96;

struct TokenPlant {
    std::string text;
    std::uint32_t expert = 0;
    double mass = 0.0;
    std::vector<std::uint32_t> domains; // empty: every domain
};

struct SynthSpec {
    std::uint32_t num_experts = 64;
    std::uint32_t num_layers = 8;
    std::uint32_t routing_budget = 8;
    std::uint32_t num_domains = 9;
    std::uint32_t samples_per_domain = 200;
    std::vector<std::uint32_t> planted_committee;
    double committee_mass = 0.0;
    /// Relative spread of member shares, rotated across domains so that over a multiple of
    /// |committee| domains every member holds every internal position equally often. 0 gives an
    /// exactly equal split, whose index tie-break would rank members identically in every domain.
    double rotation_tilt = 1e-3;
    std::map<std::uint32_t, std::vector<std::uint32_t>> domain_specialists;
    double specialist_mass = 0.0;
    double noise_concentration = 1.0;
    std::vector<TokenPlant> token_plants;
    std::vector<std::string> domain_names; // "domain_<i>" when empty
    std::uint64_t seed = 0;
};

namespace detail {

inline void residual_draw(SplitMix64& rng, double concentration, std::span<const std::uint32_t> experts,
                          double mass, std::span<double> out) {
    if (experts.empty() || mass <= 0.0) return;
    std::vector<double> w(experts.size());
    double total = 0.0;
    for (double& x : w) {
        x = std::pow(-std::log(rng.uniform()), 1.0 / concentration);
        total += x;
    }
    for (std::size_t i = 0; i < experts.size(); ++i) out[experts[i]] += mass * w[i] / total;
}

inline void round_to_simplex32(std::span<double> v) {
    double total = 0.0;
    for (const double x : v) total += x;
    for (double& x : v) x = static_cast<double>(static_cast<float>(x / total));
}

inline std::vector<std::string> synth_domain_names(const SynthSpec& spec) {
    if (!spec.domain_names.empty()) {
        if (spec.domain_names.size() != spec.num_domains)
            throw PreconditionError("domain_names must list num_domains entries");
        return spec.domain_names;
    }
    std::vector<std::string> names;
    for (std::uint32_t d = 0; d < spec.num_domains; ++d) names.push_back("domain_" + std::to_string(d));
    return names;
}

inline void check_shape(const SynthSpec& spec) {
    if (spec.num_experts < 2) throw PreconditionError("num_experts must be at least 2");
    if (spec.num_layers < 1) throw PreconditionError("num_layers must be at least 1");
    if (spec.routing_budget < 1 || spec.routing_budget > spec.num_experts)
        throw PreconditionError("routing_budget must lie in [1, num_experts]");
    if (spec.num_domains < 1) throw PreconditionError("num_domains must be at least 1");
    if (spec.samples_per_domain < 1) throw PreconditionError("samples_per_domain must be at least 1");
    if (!(spec.noise_concentration > 0.0)) throw PreconditionError("noise_concentration must be positive");
}

} // namespace detail

/// Trace with a planted committee, optional domain specialists and optional token plants.
inline RoutingTrace generate(const SynthSpec& spec) {
    detail::check_shape(spec);
    const std::uint32_t E = spec.num_experts;
    auto in_range = [E](std::uint32_t e) { return e < E; };

    std::set<std::uint32_t> committee(spec.planted_committee.begin(), spec.planted_committee.end());
    if (committee.size() != spec.planted_committee.size())
        throw PreconditionError("planted_committee has duplicate experts");
    if (!std::all_of(committee.begin(), committee.end(), in_range))
        throw PreconditionError("planted_committee expert out of range");
    if (spec.committee_mass < 0.0 || spec.committee_mass > 1.0)
        throw PreconditionError("committee_mass must lie in [0, 1]");
    if (spec.committee_mass > 0.0 && committee.empty())
        throw PreconditionError("committee_mass set without a planted committee");
    if (spec.specialist_mass < 0.0 || spec.committee_mass + spec.specialist_mass > 1.0 + 1e-12)
        throw PreconditionError("committee_mass + specialist_mass exceeds 1");
    if (spec.rotation_tilt < 0.0 ||
        spec.rotation_tilt * static_cast<double>(committee.size()) >= 2.0)
        throw PreconditionError("rotation_tilt too large for the committee size");
    for (const auto& [domain, experts] : spec.domain_specialists) {
        if (domain >= spec.num_domains) throw PreconditionError("specialist domain out of range");
        if (!std::all_of(experts.begin(), experts.end(), in_range))
            throw PreconditionError("specialist expert out of range");
        for (const auto e : experts) {
            if (committee.count(e)) throw PreconditionError("specialist overlaps the planted committee");
        }
    }
    for (const auto& plant : spec.token_plants) {
        if (plant.expert >= E) throw PreconditionError("token plant expert out of range");
        if (plant.mass < 0.0 || plant.mass > 1.0) throw PreconditionError("token plant mass outside [0, 1]");
        if (plant.text.size() > 65535) throw PreconditionError("token plant text too long");
        for (const auto d : plant.domains) {
            if (d >= spec.num_domains) throw PreconditionError("token plant domain out of range");
        }
    }

    const std::vector<std::uint32_t> members(committee.begin(), committee.end());
    std::vector<std::vector<std::uint32_t>> free_experts(spec.num_domains);
    std::vector<std::vector<std::uint32_t>> specialists(spec.num_domains);
    for (std::uint32_t d = 0; d < spec.num_domains; ++d) {
        if (auto it = spec.domain_specialists.find(d); it != spec.domain_specialists.end()) {
            std::set<std::uint32_t> uniq(it->second.begin(), it->second.end());
            specialists[d].assign(uniq.begin(), uniq.end());
        }
        for (std::uint32_t e = 0; e < E; ++e) {
            if (!committee.count(e) &&
                !std::binary_search(specialists[d].begin(), specialists[d].end(), e))
                free_experts[d].push_back(e);
        }
        const double spec_mass = specialists[d].empty() ? 0.0 : spec.specialist_mass;
        if (free_experts[d].empty() && spec.committee_mass + spec_mass < 1.0 - 1e-12)
            throw PreconditionError("infeasible mass split: no experts left for the residual mass");
    }

    SplitMix64 rng(spec.seed);
    auto draw_vector = [&](std::uint32_t domain, std::span<double> out) {
        std::fill(out.begin(), out.end(), 0.0);
        const std::size_t m = members.size();
        if (m > 0 && spec.committee_mass > 0.0) {
            const double base = spec.committee_mass / static_cast<double>(m);
            for (std::size_t j = 0; j < m; ++j) {
                const double pos = static_cast<double>((j + domain) % m);
                const double centered = pos - static_cast<double>(m - 1) / 2.0;
                out[members[j]] = base * (1.0 + spec.rotation_tilt * centered);
            }
        }
        double residual = 1.0 - spec.committee_mass;
        if (!specialists[domain].empty() && spec.specialist_mass > 0.0) {
            const double share = spec.specialist_mass / static_cast<double>(specialists[domain].size());
            for (const auto e : specialists[domain]) out[e] = share;
            residual -= spec.specialist_mass;
        }
        detail::residual_draw(rng, spec.noise_concentration, free_experts[domain], residual, out);
        detail::round_to_simplex32(out);
    };

    RoutingTrace trace;
    trace.domain_names = detail::synth_domain_names(spec);
    trace.header.num_experts = E;
    trace.header.num_layers = spec.num_layers;
    trace.header.routing_budget = spec.routing_budget;
    trace.header.num_domains = spec.num_domains;

    const std::size_t block = static_cast<std::size_t>(E) * spec.num_layers;
    std::uint64_t token_total = 0;
    for (std::uint32_t d = 0; d < spec.num_domains; ++d) {
        for (std::uint32_t n = 0; n < spec.samples_per_domain; ++n) {
            SampleRecord rec;
            rec.domain_id = d;
            rec.weights.assign(block, 0.0);
            for (std::uint32_t l = 0; l < spec.num_layers; ++l)
                draw_vector(d, std::span<double>(rec.weights).subspan(l * E, E));
            for (const auto& plant : spec.token_plants) {
                if (!plant.domains.empty() &&
                    std::find(plant.domains.begin(), plant.domains.end(), d) == plant.domains.end())
                    continue;
                TokenRecord tok;
                tok.text = plant.text;
                tok.weights.assign(block, 0.0);
                for (std::uint32_t l = 0; l < spec.num_layers; ++l) {
                    auto v = std::span<double>(tok.weights).subspan(l * E, E);
                    draw_vector(d, v);
                    for (double& x : v) x *= 1.0 - plant.mass;
                    v[plant.expert] += plant.mass;
                    detail::round_to_simplex32(v);
                }
                rec.tokens.push_back(std::move(tok));
                ++token_total;
            }
            trace.samples.push_back(std::move(rec));
        }
    }
    if (token_total > 0) trace.header.flags |= kFlagTokens;
    trace.header.num_samples = trace.samples.size();
    return trace;
}

/// Trace in which every domain routes almost all mass into its own disjoint block of k experts.
/// Planted-committee, specialist and token fields of the spec are ignored.
inline RoutingTrace generate_disjoint(const SynthSpec& spec) {
    detail::check_shape(spec);
    if (spec.num_domains < 2) throw PreconditionError("disjoint routing needs at least 2 domains");
    const std::uint32_t E = spec.num_experts;
    const std::uint32_t k = spec.routing_budget;
    if (static_cast<std::uint64_t>(spec.num_domains) * k > E)
        throw PreconditionError("infeasible partition: num_domains * k exceeds num_experts");

    RoutingTrace trace;
    trace.domain_names = detail::synth_domain_names(spec);
    trace.header.num_experts = E;
    trace.header.num_layers = spec.num_layers;
    trace.header.routing_budget = k;
    trace.header.num_domains = spec.num_domains;

    SplitMix64 rng(spec.seed);
    const std::size_t block = static_cast<std::size_t>(E) * spec.num_layers;
    for (std::uint32_t d = 0; d < spec.num_domains; ++d) {
        std::vector<std::uint32_t> inside, outside;
        for (std::uint32_t e = 0; e < E; ++e) {
            if (e >= d * k && e < (d + 1) * k) {
                inside.push_back(e);
            } else {
                outside.push_back(e);
            }
        }
        for (std::uint32_t n = 0; n < spec.samples_per_domain; ++n) {
            SampleRecord rec;
            rec.domain_id = d;
            rec.weights.assign(block, 0.0);
            for (std::uint32_t l = 0; l < spec.num_layers; ++l) {
                auto v = std::span<double>(rec.weights).subspan(l * E, E);
                // Half the block mass is split evenly, so every block expert outweighs the
                // whole outside mass in each vector.
                for (const auto e : inside) v[e] = 0.5 * kDisjointBlockMass / static_cast<double>(k);
                detail::residual_draw(rng, spec.noise_concentration, inside, 0.5 * kDisjointBlockMass, v);
                detail::residual_draw(rng, spec.noise_concentration, outside, 1.0 - kDisjointBlockMass, v);
                detail::round_to_simplex32(v);
            }
            trace.samples.push_back(std::move(rec));
        }
    }
    trace.header.num_samples = trace.samples.size();
    return trace;
}

// ---------------------------------------------------------------------------------------------
// JSON spec files

enum class SynthMode { Planted, Disjoint };

struct SynthJob {
    SynthMode mode = SynthMode::Planted;
    SynthSpec spec;
};

inline SynthJob synth_job_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw FormatError("synth spec must be a JSON object");
    SynthJob job;
    SynthSpec& s = job.spec;
    try {
        const std::string mode = j.value("mode", "planted");
        if (mode == "planted") {
            job.mode = SynthMode::Planted;
        } else if (mode == "disjoint") {
            job.mode = SynthMode::Disjoint;
        } else {
            throw FormatError("synth spec mode must be \"planted\" or \"disjoint\"");
        }
        s.num_experts = j.value("num_experts", s.num_experts);
        s.num_layers = j.value("num_layers", s.num_layers);
        s.routing_budget = j.value("routing_budget", s.routing_budget);
        s.num_domains = j.value("num_domains", s.num_domains);
        s.samples_per_domain = j.value("samples_per_domain", s.samples_per_domain);
        s.planted_committee = j.value("planted_committee", s.planted_committee);
        s.committee_mass = j.value("committee_mass", s.committee_mass);
        s.rotation_tilt = j.value("rotation_tilt", s.rotation_tilt);
        s.specialist_mass = j.value("specialist_mass", s.specialist_mass);
        s.noise_concentration = j.value("noise_concentration", s.noise_concentration);
        s.domain_names = j.value("domain_names", s.domain_names);
        s.seed = j.value("seed", s.seed);
        if (j.contains("domain_specialists")) {
            for (const auto& [key, experts] : j.at("domain_specialists").items())
                s.domain_specialists[static_cast<std::uint32_t>(std::stoul(key))] =
                    experts.get<std::vector<std::uint32_t>>();
        }
        if (j.contains("token_plants")) {
            for (const auto& p : j.at("token_plants")) {
                TokenPlant plant;
                plant.text = p.at("token").get<std::string>();
                plant.expert = p.at("expert").get<std::uint32_t>();
                plant.mass = p.at("mass").get<double>();
                plant.domains = p.value("domains", std::vector<std::uint32_t>{});
                s.token_plants.push_back(std::move(plant));
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("synth spec: ") + e.what());
    } catch (const std::invalid_argument&) {
        throw FormatError("synth spec: domain_specialists keys must be domain indices");
    }
    return job;
}

inline SynthJob read_synth_job(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
    return synth_job_from_json(j);
}

inline RoutingTrace run_synth_job(const SynthJob& job) {
    return job.mode == SynthMode::Planted ? generate(job.spec) : generate_disjoint(job.spec);
}

} // namespace committee_audit
