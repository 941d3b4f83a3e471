#pragma once

// Standing-committee extraction: per-domain ranks with a k+1 penalty, cross-domain presence,
// rank mean/variance, and the Pareto front of (mean rank, rank variance).

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "committee_audit/error.hpp"
#include "committee_audit/parallel.hpp"
#include "committee_audit/profiles.hpp"
#include "committee_audit/specificity.hpp"
#include "committee_audit/topk.hpp"
#include "committee_audit/trace.hpp"

namespace committee_audit {

struct RankMatrix {
    std::size_t budget = 0; // k; experts outside the top-k hold rank k+1
    std::size_t num_experts = 0;
    std::vector<std::size_t> domains; // profile domain index of each row
    std::vector<std::uint32_t> ranks; // [row][expert], flattened

    std::size_t num_rows() const { return domains.size(); }
    std::uint32_t rank(std::size_t row, std::size_t expert) const {
        return ranks[row * num_experts + expert];
    }
    std::uint32_t penalty() const { return static_cast<std::uint32_t>(budget + 1); }
};

inline RankMatrix rank_experts(const TaskProfileSet& profiles, std::size_t layer, std::size_t k,
                               std::span<const std::size_t> domains) {
    if (k < 1 || k > profiles.num_experts)
        throw PreconditionError("budget k=" + std::to_string(k) + " outside [1, " +
                                std::to_string(profiles.num_experts) + "]");
    if (layer >= profiles.num_layers)
        throw PreconditionError("layer " + std::to_string(layer) + " out of range");
    RankMatrix m;
    m.budget = k;
    m.num_experts = profiles.num_experts;
    m.domains.assign(domains.begin(), domains.end());
    m.ranks.assign(m.domains.size() * m.num_experts, m.penalty());
    for (std::size_t row = 0; row < m.domains.size(); ++row) {
        const auto order = top_k(profiles.profile(layer, m.domains[row]), k);
        for (std::size_t pos = 0; pos < order.size(); ++pos)
            m.ranks[row * m.num_experts + order[pos]] = static_cast<std::uint32_t>(pos + 1);
    }
    return m;
}

inline RankMatrix rank_experts(const TaskProfileSet& profiles, std::size_t layer, std::size_t k) {
    const auto domains = all_domains(profiles);
    return rank_experts(profiles, layer, k, domains);
}

struct CandidateStats {
    std::uint32_t expert = 0;
    double presence = 0.0;      // share of domains holding the expert in their top-k
    double mean_rank = 0.0;     // over all domains, penalty ranks included
    double rank_variance = 0.0; // population variance over all domains

    bool operator==(const CandidateStats&) const = default;
};

/// Presence, mean rank and population rank variance of one expert. Mean and variance come from
/// integer sums, so experts with the same rank multiset get bit-identical statistics.
inline CandidateStats expert_stats(const RankMatrix& ranks, std::size_t expert) {
    const std::int64_t rows = static_cast<std::int64_t>(ranks.num_rows());
    std::int64_t present = 0, sum = 0, sum_sq = 0;
    for (std::size_t row = 0; row < ranks.num_rows(); ++row) {
        const std::int64_t r = ranks.rank(row, expert);
        if (r <= static_cast<std::int64_t>(ranks.budget)) ++present;
        sum += r;
        sum_sq += r * r;
    }
    CandidateStats s;
    s.expert = static_cast<std::uint32_t>(expert);
    s.presence = static_cast<double>(present) / static_cast<double>(rows);
    s.mean_rank = static_cast<double>(sum) / static_cast<double>(rows);
    s.rank_variance =
        static_cast<double>(rows * sum_sq - sum * sum) / static_cast<double>(rows * rows);
    return s;
}

/// Experts whose presence reaches gamma (P >= gamma, or P > gamma when strict).
inline std::vector<CandidateStats> candidate_set(const RankMatrix& ranks, double gamma,
                                                 bool strict = false) {
    if (!(gamma >= 0.0 && gamma <= 1.0))
        throw PreconditionError("gamma must lie in [0, 1]");
    std::vector<CandidateStats> out;
    if (ranks.num_rows() == 0) return out;
    for (std::size_t e = 0; e < ranks.num_experts; ++e) {
        CandidateStats s = expert_stats(ranks, e);
        if (strict ? s.presence > gamma : s.presence >= gamma) out.push_back(s);
    }
    return out;
}

/// Non-dominated candidates under minimization of (mean_rank, rank_variance); returns ascending
/// expert ids. Candidates with identical statistics are all kept. O(n log n).
inline std::vector<std::uint32_t> pareto_front(std::span<const CandidateStats> candidates) {
    std::vector<const CandidateStats*> sorted;
    sorted.reserve(candidates.size());
    for (const auto& c : candidates) sorted.push_back(&c);
    std::sort(sorted.begin(), sorted.end(), [](const CandidateStats* a, const CandidateStats* b) {
        if (a->mean_rank != b->mean_rank) return a->mean_rank < b->mean_rank;
        return a->rank_variance < b->rank_variance;
    });

    std::vector<std::uint32_t> front;
    // Smallest variance among candidates with a strictly smaller mean rank.
    double best_before = std::numeric_limits<double>::infinity();
    for (std::size_t g = 0; g < sorted.size();) {
        std::size_t end = g;
        while (end < sorted.size() && sorted[end]->mean_rank == sorted[g]->mean_rank) ++end;
        const double group_min = sorted[g]->rank_variance;
        if (group_min < best_before) {
            for (std::size_t i = g; i < end && sorted[i]->rank_variance == group_min; ++i)
                front.push_back(sorted[i]->expert);
        }
        best_before = std::min(best_before, group_min);
        g = end;
    }
    std::sort(front.begin(), front.end());
    return front;
}

struct CommitteeStats {
    double eci_coverage = 0.0;
    double ratio = 0.0;               // committee vs periphery per-member density
    double ratio_uniform_naive = 0.0; // coverage * E / |C|
};

/// Coverage and influence ratio of a member set against a layer's global contribution vector.
/// ratio is +inf when the committee holds all mass with members left over, and NaN when the
/// committee is every expert (no periphery).
inline CommitteeStats committee_stats(std::span<const std::uint32_t> members,
                                      std::span<const double> global) {
    const std::size_t experts = global.size();
    if (members.empty()) throw PreconditionError("committee stats of an empty member set");
    CommitteeStats s;
    for (const auto m : members) {
        if (m >= experts)
            throw PreconditionError("committee member " + std::to_string(m) + " out of range");
        s.eci_coverage += global[m];
    }
    const double size = static_cast<double>(members.size());
    s.ratio_uniform_naive = s.eci_coverage * static_cast<double>(experts) / size;
    if (members.size() == experts) {
        s.ratio = std::numeric_limits<double>::quiet_NaN();
    } else if (1.0 - s.eci_coverage <= 0.0) {
        s.ratio = std::numeric_limits<double>::infinity();
    } else {
        s.ratio = (s.eci_coverage / size) /
                  ((1.0 - s.eci_coverage) / static_cast<double>(experts - members.size()));
    }
    return s;
}

/// Table-level variant: coverage is given directly.
inline double influence_ratio(double coverage, std::size_t committee_size, std::size_t num_experts) {
    if (committee_size == 0 || committee_size > num_experts)
        throw PreconditionError("committee size must lie in [1, E]");
    if (committee_size == num_experts) return std::numeric_limits<double>::quiet_NaN();
    if (1.0 - coverage <= 0.0) return std::numeric_limits<double>::infinity();
    return (coverage / static_cast<double>(committee_size)) /
           ((1.0 - coverage) / static_cast<double>(num_experts - committee_size));
}

struct CommitteeConfig {
    std::optional<std::size_t> k; // analysis budget; the trace header's budget when unset
    double gamma = 0.8;
    bool strict_gamma = false;
    double theta_s = 0.0;
    bool apply_specificity_filter = false;
    DomainWeighting weighting = DomainWeighting::Unweighted;
};

struct Committee {
    std::size_t layer = 0;
    std::size_t budget = 0;
    std::vector<std::size_t> domains; // domains that took part in ranking
    std::vector<CandidateStats> candidates;
    std::vector<std::uint32_t> members;
    std::vector<CandidateStats> member_stats;
    double avg_mu = std::numeric_limits<double>::quiet_NaN();
    double avg_var = std::numeric_limits<double>::quiet_NaN();
    double eci_coverage = 0.0;
    double ratio = std::numeric_limits<double>::quiet_NaN();
    double ratio_uniform_naive = std::numeric_limits<double>::quiet_NaN();
    std::string empty_reason; // set when members is empty

    bool empty() const { return members.empty(); }
};

/// Committee at one layer over an explicit domain set.
inline Committee extract_layer_committee(const TaskProfileSet& profiles, std::size_t layer,
                                         std::size_t k, std::span<const std::size_t> domains,
                                         const CommitteeConfig& cfg) {
    Committee c;
    c.layer = layer;
    c.budget = k;
    c.domains.assign(domains.begin(), domains.end());
    if (domains.empty()) {
        c.empty_reason = "all domains filtered out by specificity threshold";
        return c;
    }
    const RankMatrix ranks = rank_experts(profiles, layer, k, domains);
    c.candidates = candidate_set(ranks, cfg.gamma, cfg.strict_gamma);
    if (c.candidates.empty()) {
        c.empty_reason = "no expert reaches the presence threshold";
        return c;
    }
    c.members = pareto_front(c.candidates);
    double mu = 0.0, var = 0.0;
    for (const auto m : c.members) {
        const auto it = std::find_if(c.candidates.begin(), c.candidates.end(),
                                     [m](const CandidateStats& s) { return s.expert == m; });
        c.member_stats.push_back(*it);
        mu += it->mean_rank;
        var += it->rank_variance;
    }
    c.avg_mu = mu / static_cast<double>(c.members.size());
    c.avg_var = var / static_cast<double>(c.members.size());
    const auto global = global_contribution(profiles, layer, domains, cfg.weighting);
    const CommitteeStats stats = committee_stats(c.members, global);
    c.eci_coverage = stats.eci_coverage;
    c.ratio = stats.ratio;
    c.ratio_uniform_naive = stats.ratio_uniform_naive;
    return c;
}

/// One committee per layer. `specificity` is required when the config asks for filtering.
inline std::vector<Committee> extract_committees(const TaskProfileSet& profiles, std::size_t k,
                                                 const CommitteeConfig& cfg,
                                                 const SpecificityScores* specificity = nullptr) {
    if (cfg.apply_specificity_filter && !specificity)
        throw PreconditionError("specificity filter requested without specificity scores");
    std::vector<Committee> out(profiles.num_layers);
    parallel_for(profiles.num_layers, [&](std::size_t layer) {
        const auto domains = cfg.apply_specificity_filter
                                 ? filter_domains(*specificity, layer, cfg.theta_s)
                                 : all_domains(profiles);
        out[layer] = extract_layer_committee(profiles, layer, k, domains, cfg);
    });
    return out;
}

inline std::size_t resolve_budget(const RoutingTrace& trace, const std::optional<std::size_t>& k) {
    return k ? *k : trace.header.routing_budget;
}

inline std::vector<Committee> extract_committees(const RoutingTrace& trace,
                                                 const CommitteeConfig& cfg) {
    if (trace.num_domains() < 2)
        throw PreconditionError("committee extraction needs at least 2 domains");
    const TaskProfileSet profiles = compute_profiles(trace);
    std::optional<SpecificityScores> scores;
    if (cfg.apply_specificity_filter) scores = compute_specificity(trace, cfg.theta_s);
    return extract_committees(profiles, resolve_budget(trace, cfg.k), cfg,
                              scores ? &*scores : nullptr);
}

} // namespace committee_audit
