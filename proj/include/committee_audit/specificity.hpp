#pragma once

// Silhouette-based task specificity under cosine distance.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "committee_audit/error.hpp"
#include "committee_audit/parallel.hpp"
#include "committee_audit/random.hpp"
#include "committee_audit/trace.hpp"

namespace committee_audit {

/// 1 - cos(u, v). Computed as 1 - u.v / sqrt(|u|^2 |v|^2) so that d(v, v) is exactly 0, and
/// clamped to [0, 1], the range for non-negative inputs.
inline double cosine_distance(std::span<const double> u, std::span<const double> v) {
    if (u.size() != v.size()) throw PreconditionError("cosine distance of vectors of unequal length");
    double dot = 0.0, uu = 0.0, vv = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        dot += u[i] * v[i];
        uu += u[i] * u[i];
        vv += v[i] * v[i];
    }
    if (uu <= 0.0 || vv <= 0.0) throw PreconditionError("cosine distance of a zero vector");
    return std::clamp(1.0 - dot / std::sqrt(uu * vv), 0.0, 1.0);
}

struct LayerSpecificity {
    std::size_t layer = 0;
    std::vector<std::size_t> sample_index;  // trace sample each score belongs to
    std::vector<double> silhouette;         // s_i, aligned with sample_index
    std::vector<double> domain_score;       // S(tau) per domain
    std::vector<std::uint64_t> domain_size; // samples of each domain that were scored
};

struct SpecificityScores {
    double threshold = 0.0;
    std::vector<LayerSpecificity> layers;
};

struct SilhouetteOptions {
    /// Score a seeded uniform subset when a layer has more samples than this. Off when unset.
    std::optional<std::size_t> max_samples;
    std::uint64_t seed = 0;
};

namespace detail {

inline std::vector<std::size_t> silhouette_subset(std::size_t n, const SilhouetteOptions& opts) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    if (!opts.max_samples || n <= *opts.max_samples) return idx;
    SplitMix64 rng(opts.seed);
    const std::size_t m = *opts.max_samples;
    for (std::size_t i = 0; i < m; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.below(n - i));
        std::swap(idx[i], idx[j]);
    }
    idx.resize(m);
    std::sort(idx.begin(), idx.end());
    return idx;
}

} // namespace detail

inline LayerSpecificity silhouette_scores(const RoutingTrace& trace, std::size_t layer,
                                          const SilhouetteOptions& opts = {}) {
    const std::size_t domains = trace.num_domains();
    if (domains < 2)
        throw PreconditionError("silhouette needs at least 2 domains; nearest-domain distance undefined");
    if (layer >= trace.num_layers())
        throw PreconditionError("layer " + std::to_string(layer) + " out of range");

    LayerSpecificity out;
    out.layer = layer;
    out.sample_index = detail::silhouette_subset(trace.samples.size(), opts);
    const std::size_t n = out.sample_index.size();
    const std::size_t experts = trace.num_experts();

    std::vector<std::uint32_t> label(n);
    out.domain_size.assign(domains, 0);
    std::vector<double> data(n * experts);
    std::vector<double> sq_norm(n, 0.0);
    for (std::size_t a = 0; a < n; ++a) {
        const std::size_t s = out.sample_index[a];
        label[a] = trace.samples[s].domain_id;
        ++out.domain_size[label[a]];
        const auto v = trace.vector(s, layer);
        std::copy(v.begin(), v.end(), data.begin() + static_cast<std::ptrdiff_t>(a * experts));
        for (const double w : v) sq_norm[a] += w * w;
        if (sq_norm[a] <= 0.0)
            throw PreconditionError("sample " + std::to_string(s) + " has a zero routing vector");
    }
    for (std::size_t d = 0; d < domains; ++d) {
        if (out.domain_size[d] == 0)
            throw PreconditionError("domain '" + trace.domain_names[d] + "' has no samples at layer " +
                                    std::to_string(layer));
    }

    out.silhouette.assign(n, 0.0);
    parallel_for(n, [&](std::size_t a) {
        std::vector<double> dist_sum(domains, 0.0);
        const double* u = &data[a * experts];
        for (std::size_t b = 0; b < n; ++b) {
            if (b == a) continue;
            const double* v = &data[b * experts];
            double dot = 0.0;
            for (std::size_t i = 0; i < experts; ++i) dot += u[i] * v[i];
            dist_sum[label[b]] += std::clamp(1.0 - dot / std::sqrt(sq_norm[a] * sq_norm[b]), 0.0, 1.0);
        }
        const std::uint32_t own = label[a];
        if (out.domain_size[own] < 2) return; // singleton domain: s_i = 0
        const double intra = dist_sum[own] / static_cast<double>(out.domain_size[own] - 1);
        double nearest = std::numeric_limits<double>::infinity();
        for (std::size_t d = 0; d < domains; ++d) {
            if (d == own) continue;
            nearest = std::min(nearest, dist_sum[d] / static_cast<double>(out.domain_size[d]));
        }
        const double scale = std::max(intra, nearest);
        if (scale > 0.0) out.silhouette[a] = (nearest - intra) / scale;
    });

    out.domain_score.assign(domains, 0.0);
    for (std::size_t a = 0; a < n; ++a) out.domain_score[label[a]] += out.silhouette[a];
    for (std::size_t d = 0; d < domains; ++d)
        out.domain_score[d] /= static_cast<double>(out.domain_size[d]);
    return out;
}

inline SpecificityScores compute_specificity(const RoutingTrace& trace, double threshold,
                                             const SilhouetteOptions& opts = {}) {
    SpecificityScores scores;
    scores.threshold = threshold;
    scores.layers.reserve(trace.num_layers());
    for (std::size_t l = 0; l < trace.num_layers(); ++l)
        scores.layers.push_back(silhouette_scores(trace, l, opts));
    return scores;
}

/// Domains whose specificity at `layer` reaches the threshold.
inline std::vector<std::size_t> filter_domains(const SpecificityScores& scores, std::size_t layer,
                                               double threshold) {
    if (layer >= scores.layers.size())
        throw PreconditionError("no specificity scores for layer " + std::to_string(layer));
    std::vector<std::size_t> pass;
    const auto& s = scores.layers[layer].domain_score;
    for (std::size_t d = 0; d < s.size(); ++d) {
        if (s[d] >= threshold) pass.push_back(d);
    }
    return pass;
}

} // namespace committee_audit
