#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include "committee_audit/error.hpp"

namespace committee_audit {

/// Indices of the k largest weights in descending-weight order. Equal weights are ordered by
/// ascending index, so the result is fully deterministic.
inline std::vector<std::uint32_t> top_k(std::span<const double> weights, std::size_t k) {
    if (k > weights.size()) {
        throw PreconditionError("top-k budget " + std::to_string(k) + " exceeds expert count " +
                                std::to_string(weights.size()));
    }
    std::vector<std::uint32_t> order(weights.size());
    std::iota(order.begin(), order.end(), 0u);
    const auto before = [&](std::uint32_t a, std::uint32_t b) {
        if (weights[a] != weights[b]) return weights[a] > weights[b];
        return a < b;
    };
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                      before);
    order.resize(k);
    return order;
}

/// Same selection as top_k, returned as an ascending index set.
inline std::vector<std::uint32_t> top_k_set(std::span<const double> weights, std::size_t k) {
    auto idx = top_k(weights, k);
    std::sort(idx.begin(), idx.end());
    return idx;
}

} // namespace committee_audit
