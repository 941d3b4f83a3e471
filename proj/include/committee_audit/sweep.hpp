#pragma once

#include <algorithm>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "committee_audit/committee.hpp"
#include "committee_audit/error.hpp"
#include "committee_audit/profiles.hpp"

namespace committee_audit {

struct SweepPoint {
    std::size_t k = 0;
    std::vector<Committee> committees;             // per layer
    std::vector<std::optional<double>> retention;  // per layer; unset where the reference is empty
    double mean_retention = 0.0;
    std::vector<double> coverage; // per layer
    std::vector<std::size_t> size;
};

struct SweepResult {
    std::size_t reference_k = 0;
    std::size_t excluded_layers = 0; // layers whose reference committee is empty
    std::vector<SweepPoint> points;  // ascending k

    const SweepPoint& at(std::size_t k) const {
        for (const auto& p : points) {
            if (p.k == k) return p;
        }
        throw PreconditionError("no sweep point for k=" + std::to_string(k));
    }
};

/// |current n reference| / |reference|. Both sets ascending; reference non-empty.
inline double retention(std::span<const std::uint32_t> reference,
                        std::span<const std::uint32_t> current) {
    if (reference.empty()) throw PreconditionError("retention against an empty reference committee");
    std::size_t kept = 0;
    for (const auto m : reference) {
        if (std::binary_search(current.begin(), current.end(), m)) ++kept;
    }
    return static_cast<double>(kept) / static_cast<double>(reference.size());
}

/// Re-extracts committees for each budget from the same profiles and scores them against the
/// committee at reference_k.
inline SweepResult run_sweep(const TaskProfileSet& profiles, std::vector<std::size_t> k_values,
                             std::size_t reference_k, const CommitteeConfig& cfg,
                             const SpecificityScores* specificity = nullptr) {
    if (std::find(k_values.begin(), k_values.end(), reference_k) == k_values.end())
        k_values.push_back(reference_k);
    std::sort(k_values.begin(), k_values.end());
    k_values.erase(std::unique(k_values.begin(), k_values.end()), k_values.end());
    for (const auto k : k_values) {
        if (k < 1 || k > profiles.num_experts)
            throw PreconditionError("sweep budget k=" + std::to_string(k) + " outside [1, " +
                                    std::to_string(profiles.num_experts) + "]");
    }

    SweepResult result;
    result.reference_k = reference_k;
    for (const auto k : k_values) {
        SweepPoint p;
        p.k = k;
        p.committees = extract_committees(profiles, k, cfg, specificity);
        for (const auto& c : p.committees) {
            p.coverage.push_back(c.eci_coverage);
            p.size.push_back(c.members.size());
        }
        result.points.push_back(std::move(p));
    }

    const SweepPoint& ref = result.at(reference_k);
    for (const auto& c : ref.committees) {
        if (c.empty()) ++result.excluded_layers;
    }
    if (result.excluded_layers == profiles.num_layers)
        throw PreconditionError("no reference committee at k=" + std::to_string(reference_k));

    const std::vector<Committee> reference = ref.committees;
    for (auto& p : result.points) {
        double sum = 0.0;
        std::size_t counted = 0;
        for (std::size_t layer = 0; layer < reference.size(); ++layer) {
            if (reference[layer].empty()) {
                p.retention.emplace_back();
                continue;
            }
            const double r = retention(reference[layer].members, p.committees[layer].members);
            p.retention.emplace_back(r);
            sum += r;
            ++counted;
        }
        p.mean_retention = sum / static_cast<double>(counted);
    }
    return result;
}

inline SweepResult run_sweep(const RoutingTrace& trace, std::vector<std::size_t> k_values,
                             std::size_t reference_k, const CommitteeConfig& cfg) {
    if (trace.num_domains() < 2) throw PreconditionError("sweep needs at least 2 domains");
    const TaskProfileSet profiles = compute_profiles(trace);
    std::optional<SpecificityScores> scores;
    if (cfg.apply_specificity_filter) scores = compute_specificity(trace, cfg.theta_s);
    return run_sweep(profiles, std::move(k_values), reference_k, cfg, scores ? &*scores : nullptr);
}

} // namespace committee_audit
