#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "committee_audit/error.hpp"
#include "committee_audit/profiles.hpp"
#include "committee_audit/topk.hpp"

namespace committee_audit {

/// Top-k experts of a (layer, domain) profile as an ascending set.
inline std::vector<std::uint32_t> topk_set(const TaskProfileSet& profiles, std::size_t layer,
                                           std::size_t domain, std::size_t k) {
    if (layer >= profiles.num_layers || domain >= profiles.num_domains)
        throw PreconditionError("layer/domain out of range");
    return top_k_set(profiles.profile(layer, domain), k);
}

/// |a n b| / |a u b| for ascending, duplicate-free sets.
inline double jaccard(std::span<const std::uint32_t> a, std::span<const std::uint32_t> b) {
    if (a.empty() && b.empty()) throw PreconditionError("jaccard of two empty sets is undefined");
    std::size_t inter = 0;
    auto ia = a.begin();
    auto ib = b.begin();
    while (ia != a.end() && ib != b.end()) {
        if (*ia < *ib) {
            ++ia;
        } else if (*ib < *ia) {
            ++ib;
        } else {
            ++inter;
            ++ia;
            ++ib;
        }
    }
    const std::size_t uni = a.size() + b.size() - inter;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

namespace detail {

inline std::vector<double> sorted_contributions(std::span<const double> c) {
    if (c.empty()) throw PreconditionError("gini of an empty vector");
    std::vector<double> x(c.begin(), c.end());
    for (const double v : x) {
        if (!std::isfinite(v) || v < 0.0)
            throw PreconditionError("contributions must be finite and non-negative");
    }
    std::sort(x.begin(), x.end());
    if (x.back() <= 0.0) throw PreconditionError("gini of an all-zero vector is undefined");
    return x;
}

inline double gini_sorted(const std::vector<double>& x) {
    // sum_ij |x_i - x_j| = 2 sum_i (2i - n - 1) x_(i); pairing the i-th smallest with the i-th
    // largest keeps every term non-negative and makes equal entries cancel exactly.
    const std::size_t n = x.size();
    double num = 0.0, total = 0.0;
    for (std::size_t i = 0; i < n / 2; ++i)
        num += static_cast<double>(n - 1 - 2 * i) * (x[n - 1 - i] - x[i]);
    for (const double v : x) total += v;
    return std::clamp(num / (static_cast<double>(n) * total), 0.0, 1.0);
}

} // namespace detail

/// Gini coefficient of a non-negative contribution vector via the sorted O(E log E) identity.
inline double gini(std::span<const double> contributions) {
    return detail::gini_sorted(detail::sorted_contributions(contributions));
}

struct LorenzPoint {
    double population_share = 0.0;
    double contribution_share = 0.0;
};

struct LorenzCurve {
    std::vector<LorenzPoint> points; // E+1 points from (0,0) to (1,1)
    double gini = 0.0;               // closed-form value
    double area_gini = 0.0;          // 1 - 2 * trapezoid area under the curve
    double used_fraction = 0.0;
};

/// Lorenz curve of a contribution vector. used_fraction falls back to the share of entries
/// above 1/(10E) when no structural usage is supplied.
inline LorenzCurve lorenz(std::span<const double> contributions,
                          std::optional<double> used_fraction = std::nullopt) {
    const auto x = detail::sorted_contributions(contributions);
    const std::size_t n = x.size();
    LorenzCurve curve;
    curve.gini = detail::gini_sorted(x);

    double total = 0.0;
    for (const double v : x) total += v;
    curve.points.reserve(n + 1);
    curve.points.push_back({0.0, 0.0});
    double running = 0.0;
    for (std::size_t j = 1; j <= n; ++j) {
        running += x[j - 1];
        const double share = j == n ? 1.0 : std::min(running / total, 1.0);
        curve.points.push_back({static_cast<double>(j) / static_cast<double>(n), share});
    }

    double twice_area = 0.0;
    for (std::size_t j = 1; j <= n; ++j)
        twice_area += curve.points[j - 1].contribution_share + curve.points[j].contribution_share;
    curve.area_gini = 1.0 - twice_area / static_cast<double>(n);

    if (used_fraction) {
        curve.used_fraction = *used_fraction;
    } else {
        const double floor = 1.0 / (10.0 * static_cast<double>(n));
        const auto used = std::count_if(x.begin(), x.end(), [floor](double v) { return v > floor; });
        curve.used_fraction = static_cast<double>(used) / static_cast<double>(n);
    }
    return curve;
}

/// Share of experts that appear in at least one domain's top-k at a layer.
inline double used_fraction(const TaskProfileSet& profiles, std::size_t layer, std::size_t k,
                            std::span<const std::size_t> domains) {
    std::vector<bool> used(profiles.num_experts, false);
    for (const std::size_t d : domains) {
        for (const auto e : top_k(profiles.profile(layer, d), k)) used[e] = true;
    }
    const auto count = std::count(used.begin(), used.end(), true);
    return static_cast<double>(count) / static_cast<double>(profiles.num_experts);
}

struct SummaryStats {
    double max = std::numeric_limits<double>::quiet_NaN();
    double min = std::numeric_limits<double>::quiet_NaN();
    double mean = std::numeric_limits<double>::quiet_NaN();
};

inline SummaryStats summarize(std::span<const double> values) {
    SummaryStats s;
    if (values.empty()) return s;
    s.max = *std::max_element(values.begin(), values.end());
    s.min = *std::min_element(values.begin(), values.end());
    double sum = 0.0;
    for (const double v : values) sum += v;
    s.mean = sum / static_cast<double>(values.size());
    return s;
}

struct JaccardReport {
    std::size_t budget = 0;
    std::vector<std::size_t> domains;
    std::vector<std::vector<double>> per_layer; // [layer] -> |T| x |T| row-major
    std::vector<double> layer_means;            // mean over unordered pairs per layer
    SummaryStats cells;                         // over all layer x unordered-pair cells
    SummaryStats layer_mean_extrema;            // over per-layer means

    double at(std::size_t layer, std::size_t a, std::size_t b) const {
        return per_layer[layer][a * domains.size() + b];
    }
};

inline JaccardReport jaccard_report(const TaskProfileSet& profiles, std::size_t k,
                                    std::span<const std::size_t> domains) {
    if (domains.size() < 2) throw PreconditionError("jaccard report needs at least 2 domains");
    JaccardReport rep;
    rep.budget = k;
    rep.domains.assign(domains.begin(), domains.end());
    const std::size_t t = domains.size();
    std::vector<double> all_cells;
    for (std::size_t layer = 0; layer < profiles.num_layers; ++layer) {
        std::vector<std::vector<std::uint32_t>> sets;
        for (const std::size_t d : domains) sets.push_back(topk_set(profiles, layer, d, k));
        std::vector<double> m(t * t, 1.0);
        double layer_sum = 0.0;
        for (std::size_t a = 0; a < t; ++a) {
            for (std::size_t b = a + 1; b < t; ++b) {
                const double j = jaccard(sets[a], sets[b]);
                m[a * t + b] = m[b * t + a] = j;
                layer_sum += j;
                all_cells.push_back(j);
            }
        }
        rep.per_layer.push_back(std::move(m));
        rep.layer_means.push_back(layer_sum / static_cast<double>(t * (t - 1) / 2));
    }
    rep.cells = summarize(all_cells);
    rep.layer_mean_extrema = summarize(rep.layer_means);
    return rep;
}

inline JaccardReport jaccard_report(const TaskProfileSet& profiles, std::size_t k) {
    const auto domains = all_domains(profiles);
    return jaccard_report(profiles, k, domains);
}

struct GiniReport {
    std::vector<double> per_layer;
    std::vector<LorenzCurve> lorenz;
    SummaryStats summary;
};

/// Per-layer Gini and Lorenz data of the global contribution vector, with structural usage.
inline GiniReport gini_report(const TaskProfileSet& profiles, std::size_t k,
                              DomainWeighting weighting = DomainWeighting::Unweighted) {
    GiniReport rep;
    const auto domains = all_domains(profiles);
    for (std::size_t layer = 0; layer < profiles.num_layers; ++layer) {
        const auto global = global_contribution(profiles, layer, domains, weighting);
        rep.lorenz.push_back(lorenz(global, used_fraction(profiles, layer, k, domains)));
        rep.per_layer.push_back(rep.lorenz.back().gini);
    }
    rep.summary = summarize(rep.per_layer);
    return rep;
}

} // namespace committee_audit
