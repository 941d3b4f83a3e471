#pragma once

// Token anchors: which committee experts a token activates in at least `min_domains` domains.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "committee_audit/error.hpp"
#include "committee_audit/topk.hpp"
#include "committee_audit/trace.hpp"

namespace committee_audit {

enum class ActivationRule {
    TopK,           // expert is in the token's top-k at the layer
    WeightThreshold // expert's routing weight is at least the threshold
};

struct AnchorOptions {
    /// Layer to inspect; when unset an activation at any layer counts (union mode).
    std::optional<std::size_t> layer;
    std::size_t min_domains = 3;
    std::optional<std::size_t> k; // trace header budget when unset
    ActivationRule rule = ActivationRule::TopK;
    double weight_threshold = 0.0;
};

struct AnchorMatrix {
    std::vector<std::string> tokens;    // rows
    std::vector<std::uint32_t> experts; // columns
    std::vector<std::uint8_t> marked;   // [row][col], flattened
    std::vector<std::uint32_t> domain_counts;
    std::vector<std::vector<std::uint32_t>> domain_lists; // per cell, ascending domain ids
    std::vector<std::string> missing_tokens;              // requested but never seen in the trace
    std::optional<std::size_t> layer;
    std::size_t min_domains = 0;

    std::size_t cell(std::size_t row, std::size_t col) const { return row * experts.size() + col; }
    bool is_marked(std::size_t row, std::size_t col) const { return marked[cell(row, col)] != 0; }
    std::uint32_t count(std::size_t row, std::size_t col) const { return domain_counts[cell(row, col)]; }
};

inline AnchorMatrix anchor_matrix(const RoutingTrace& trace, std::span<const std::uint32_t> committee,
                                  std::span<const std::string> token_list,
                                  const AnchorOptions& opts = {}) {
    if (!trace.header.has_tokens()) throw PreconditionError("trace has no token records");
    if (committee.empty()) throw PreconditionError("anchor matrix needs a non-empty committee");
    if (opts.min_domains < 1) throw PreconditionError("min_domains must be at least 1");
    if (opts.layer && *opts.layer >= trace.num_layers())
        throw PreconditionError("layer " + std::to_string(*opts.layer) + " out of range");
    const std::size_t k = opts.k ? *opts.k : trace.header.routing_budget;
    if (opts.rule == ActivationRule::TopK && (k < 1 || k > trace.num_experts()))
        throw PreconditionError("activation budget outside [1, E]");
    for (const auto e : committee) {
        if (e >= trace.num_experts())
            throw PreconditionError("committee expert " + std::to_string(e) + " out of range");
    }

    AnchorMatrix m;
    m.tokens.assign(token_list.begin(), token_list.end());
    m.experts.assign(committee.begin(), committee.end());
    m.layer = opts.layer;
    m.min_domains = opts.min_domains;
    const std::size_t rows = m.tokens.size();
    const std::size_t cols = m.experts.size();
    const std::size_t domains = trace.num_domains();

    std::unordered_map<std::string, std::size_t> row_of;
    for (std::size_t r = 0; r < rows; ++r) row_of.emplace(m.tokens[r], r);

    std::vector<std::size_t> layers;
    if (opts.layer) {
        layers.push_back(*opts.layer);
    } else {
        for (std::size_t l = 0; l < trace.num_layers(); ++l) layers.push_back(l);
    }

    // hit[(row * cols + col) * domains + d]
    std::vector<std::uint8_t> hit(rows * cols * domains, 0);
    std::vector<std::uint8_t> seen(rows, 0);
    std::vector<std::uint8_t> active(trace.num_experts());
    for (const auto& rec : trace.samples) {
        for (const auto& tok : rec.tokens) {
            const auto it = row_of.find(tok.text);
            if (it == row_of.end()) continue;
            const std::size_t row = it->second;
            seen[row] = 1;
            std::fill(active.begin(), active.end(), 0);
            for (const auto layer : layers) {
                const auto v = trace.layer_slice(tok.weights, layer);
                if (opts.rule == ActivationRule::TopK) {
                    for (const auto e : top_k(v, k)) active[e] = 1;
                } else {
                    for (std::size_t e = 0; e < v.size(); ++e) {
                        if (v[e] >= opts.weight_threshold) active[e] = 1;
                    }
                }
            }
            for (std::size_t col = 0; col < cols; ++col) {
                if (active[m.experts[col]]) hit[(row * cols + col) * domains + rec.domain_id] = 1;
            }
        }
    }

    m.marked.assign(rows * cols, 0);
    m.domain_counts.assign(rows * cols, 0);
    m.domain_lists.assign(rows * cols, {});
    for (std::size_t c = 0; c < rows * cols; ++c) {
        for (std::size_t d = 0; d < domains; ++d) {
            if (hit[c * domains + d]) m.domain_lists[c].push_back(static_cast<std::uint32_t>(d));
        }
        m.domain_counts[c] = static_cast<std::uint32_t>(m.domain_lists[c].size());
        m.marked[c] = m.domain_counts[c] >= opts.min_domains ? 1 : 0;
    }
    for (std::size_t r = 0; r < rows; ++r) {
        if (!seen[r]) m.missing_tokens.push_back(m.tokens[r]);
    }
    return m;
}

/// Distinct token strings in the trace, in ascending byte order.
inline std::vector<std::string> distinct_tokens(const RoutingTrace& trace) {
    std::vector<std::string> out;
    for (const auto& rec : trace.samples) {
        for (const auto& tok : rec.tokens) out.push_back(tok.text);
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

} // namespace committee_audit
