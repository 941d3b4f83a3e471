#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "committee_audit/error.hpp"
#include "committee_audit/parallel.hpp"
#include "committee_audit/trace.hpp"

namespace committee_audit {

/// Expert Contribution Index per (layer, domain, expert): the mean routing weight an expert
/// receives over a domain's samples at a layer.
struct TaskProfileSet {
    std::size_t num_layers = 0;
    std::size_t num_domains = 0;
    std::size_t num_experts = 0;
    std::vector<double> eci;                  // [layer][domain][expert], flattened
    std::vector<std::uint64_t> sample_counts; // per domain
    std::vector<std::string> domain_names;

    std::span<const double> profile(std::size_t layer, std::size_t domain) const {
        return std::span<const double>(eci).subspan((layer * num_domains + domain) * num_experts,
                                                    num_experts);
    }
    double at(std::size_t layer, std::size_t domain, std::size_t expert) const {
        return eci[(layer * num_domains + domain) * num_experts + expert];
    }
};

namespace detail {

/// Neumaier-compensated running sum.
struct CompensatedSum {
    double sum = 0.0;
    double carry = 0.0;

    void add(double x) {
        const double t = sum + x;
        if (std::abs(sum) >= std::abs(x)) {
            carry += (sum - t) + x;
        } else {
            carry += (x - t) + sum;
        }
        sum = t;
    }
    double value() const { return sum + carry; }
};

} // namespace detail

inline TaskProfileSet compute_profiles(const RoutingTrace& trace) {
    TaskProfileSet p;
    p.num_layers = trace.num_layers();
    p.num_domains = trace.num_domains();
    p.num_experts = trace.num_experts();
    p.domain_names = trace.domain_names;
    p.sample_counts.assign(p.num_domains, 0);
    for (const auto& rec : trace.samples) {
        if (rec.domain_id >= p.num_domains)
            throw ValidationError("sample domain_id " + std::to_string(rec.domain_id) +
                                  " out of range");
        ++p.sample_counts[rec.domain_id];
    }
    for (std::size_t d = 0; d < p.num_domains; ++d) {
        if (p.sample_counts[d] == 0)
            throw PreconditionError("domain '" + p.domain_names[d] +
                                    "' has no samples; its profile is undefined");
    }

    p.eci.assign(p.num_layers * p.num_domains * p.num_experts, 0.0);
    parallel_for(p.num_layers, [&](std::size_t layer) {
        std::vector<detail::CompensatedSum> acc(p.num_domains * p.num_experts);
        for (std::size_t s = 0; s < trace.samples.size(); ++s) {
            const auto v = trace.vector(s, layer);
            auto* row = &acc[trace.samples[s].domain_id * p.num_experts];
            for (std::size_t i = 0; i < p.num_experts; ++i) row[i].add(v[i]);
        }
        for (std::size_t d = 0; d < p.num_domains; ++d) {
            const double n = static_cast<double>(p.sample_counts[d]);
            for (std::size_t i = 0; i < p.num_experts; ++i)
                p.eci[(layer * p.num_domains + d) * p.num_experts + i] =
                    acc[d * p.num_experts + i].value() / n;
        }
    });
    return p;
}

enum class DomainWeighting {
    Unweighted,    // each domain counts once
    SampleWeighted // domains weighted by their sample counts
};

/// Mean contribution vector over `domains` at a layer.
inline std::vector<double> global_contribution(const TaskProfileSet& profiles, std::size_t layer,
                                               std::span<const std::size_t> domains,
                                               DomainWeighting weighting = DomainWeighting::Unweighted) {
    if (layer >= profiles.num_layers)
        throw PreconditionError("layer " + std::to_string(layer) + " out of range");
    if (domains.empty()) throw PreconditionError("global contribution over an empty domain set");

    std::vector<double> out(profiles.num_experts, 0.0);
    double total_weight = 0.0;
    for (const std::size_t d : domains) {
        const double w = weighting == DomainWeighting::Unweighted
                             ? 1.0
                             : static_cast<double>(profiles.sample_counts[d]);
        total_weight += w;
        const auto prof = profiles.profile(layer, d);
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += w * prof[i];
    }
    for (double& x : out) x /= total_weight;
    return out;
}

inline std::vector<std::size_t> all_domains(const TaskProfileSet& profiles) {
    std::vector<std::size_t> d(profiles.num_domains);
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = i;
    return d;
}

inline std::vector<double> global_contribution(const TaskProfileSet& profiles, std::size_t layer,
                                               DomainWeighting weighting = DomainWeighting::Unweighted) {
    const auto domains = all_domains(profiles);
    return global_contribution(profiles, layer, domains, weighting);
}

} // namespace committee_audit
