#pragma once

#include "errors.hpp"
#include "grid.hpp"
#include "rng.hpp"
#include "source_set.hpp"

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

/**
 * @file patch_index.hpp
 *
 * @brief Same-location candidate sets and masked brute-force k-NN over them.
 *
 * Candidate sets are tiny (one patch per source, a few more with jitter), so
 * the search is exhaustive and deterministic: ties resolve to the lower
 * candidate index.
 */

namespace latentpatch {

struct Patch {
    ChannelGrid values; // side x side x C
    Cell anchor;        // top-left corner in the grid it came from
    std::size_t source = 0;
    std::size_t scale = 0;

    std::size_t side() const noexcept { return values.height(); }
    std::size_t channels() const noexcept { return values.channels(); }
};

struct PatchMask {
    std::size_t side = 0;
    std::vector<std::uint8_t> flags; // side * side, row-major

    static PatchMask full(std::size_t side) { return {side, std::vector<std::uint8_t>(side * side, 1)}; }

    bool at(std::size_t i, std::size_t j) const noexcept { return flags[i * side + j] != 0; }
    bool any() const noexcept { return std::any_of(flags.begin(), flags.end(), [](auto f) { return f != 0; }); }
    bool all() const noexcept { return std::all_of(flags.begin(), flags.end(), [](auto f) { return f != 0; }); }
};

struct CandidateSet {
    Cell anchor;
    std::size_t scale = 0;
    std::vector<Patch> patches;

    std::size_t size() const noexcept { return patches.size(); }
};

struct Neighbor {
    std::size_t index = 0;
    double distance = 0.0;

    friend bool operator==(const Neighbor&, const Neighbor&) = default;
};

/**
 * @brief Sum of squared differences over `n` contiguous floats.
 *
 * Eight independent lanes let the compiler vectorise without reassociating a
 * single accumulator; the lane order is fixed, so results are reproducible.
 */
inline float squared_l2(const float* a, const float* b, std::size_t n) noexcept {
    constexpr std::size_t lanes = 8;
    float acc[lanes] = {};
    std::size_t i = 0;
    for (; i + lanes <= n; i += lanes) {
        for (std::size_t l = 0; l < lanes; ++l) {
            const float d = a[i + l] - b[i + l];
            acc[l] += d * d;
        }
    }
    for (std::size_t l = 0; i < n; ++i, ++l) {
        const float d = a[i] - b[i];
        acc[l] += d * d;
    }
    return ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]));
}

inline Patch extract_patch(const ChannelGrid& grid, Cell anchor, std::size_t side, std::size_t source = 0,
                           std::size_t scale = 0) {
    if (side == 0) {
        throw ParameterError("patch side must be positive");
    }
    check_rect({anchor.row, anchor.col, side, side}, grid.height(), grid.width(), "patch footprint");
    const std::size_t channels = grid.channels();
    std::vector<float> values;
    values.reserve(side * side * channels);
    for (std::size_t i = 0; i < side; ++i) {
        auto row_start = grid.cell(anchor.row + i, anchor.col);
        values.insert(values.end(), row_start.data(), row_start.data() + side * channels);
    }
    return {ChannelGrid(side, side, channels, std::move(values)), anchor, source, scale};
}

namespace detail {

inline void check_comparable(const Patch& q, const Patch& c, const PatchMask& mask) {
    if (q.side() != c.side() || q.channels() != c.channels()) {
        throw ShapeError("patch shapes differ: " + q.values.shape_string() + " vs " + c.values.shape_string());
    }
    if (mask.side != q.side() || mask.flags.size() != q.side() * q.side()) {
        throw ShapeError("mask side " + std::to_string(mask.side) + " does not match patch side " +
                         std::to_string(q.side()));
    }
}

/// Per-element 0/1 weights for the active cells of `mask`.
inline std::vector<float> expand_mask(const PatchMask& mask, std::size_t channels) {
    std::vector<float> weights(mask.flags.size() * channels);
    for (std::size_t cell = 0; cell < mask.flags.size(); ++cell) {
        std::fill_n(weights.begin() + static_cast<std::ptrdiff_t>(cell * channels), channels,
                    mask.flags[cell] ? 1.0f : 0.0f);
    }
    return weights;
}

} // namespace detail

/**
 * @brief Weighted sum of squared differences with the same lane layout as
 * `squared_l2`.
 *
 * With all weights one the result is bit-identical to `squared_l2`; zero
 * weights add exactly +0 to their lane. Turning a weight on therefore never
 * lowers the result, even under float rounding.
 */
inline float weighted_squared_l2(const float* a, const float* b, const float* w, std::size_t n) noexcept {
    constexpr std::size_t lanes = 8;
    float acc[lanes] = {};
    std::size_t i = 0;
    for (; i + lanes <= n; i += lanes) {
        for (std::size_t l = 0; l < lanes; ++l) {
            const float d = a[i + l] - b[i + l];
            acc[l] += w[i + l] * (d * d);
        }
    }
    for (std::size_t l = 0; i < n; ++i, ++l) {
        const float d = a[i] - b[i];
        acc[l] += w[i] * (d * d);
    }
    return ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]));
}

namespace detail {

/// `weights` is empty for a full mask.
inline double masked_distance_unchecked(const Patch& q, const Patch& c, std::span<const float> weights) noexcept {
    const float* a = q.values.data().data();
    const float* b = c.values.data().data();
    const std::size_t n = q.values.data().size();
    return weights.empty() ? squared_l2(a, b, n) : weighted_squared_l2(a, b, weights.data(), n);
}

} // namespace detail

/// Squared L2 over the cells where `mask` is set; not normalised by mask size.
inline double masked_distance(const Patch& q, const Patch& c, const PatchMask& mask) {
    detail::check_comparable(q, c, mask);
    if (!mask.any()) {
        throw EmptyMaskError("patch mask has no active cells");
    }
    if (mask.all()) {
        return detail::masked_distance_unchecked(q, c, {});
    }
    return detail::masked_distance_unchecked(q, c, detail::expand_mask(mask, q.channels()));
}

/// The min(k, |cands|) nearest candidates, ascending by (distance, index).
inline std::vector<Neighbor> knn(const Patch& q, const CandidateSet& cands, const PatchMask& mask, std::size_t k) {
    if (k == 0) {
        throw ParameterError("k must be at least 1");
    }
    if (cands.patches.empty()) {
        throw EmptyCandidatesError("candidate set is empty");
    }
    if (!mask.any()) {
        throw EmptyMaskError("patch mask has no active cells");
    }
    detail::check_comparable(q, cands.patches.front(), mask);
    const std::vector<float> weights = mask.all() ? std::vector<float>{} : detail::expand_mask(mask, q.channels());
    std::vector<Neighbor> all;
    all.reserve(cands.size());
    for (std::size_t i = 0; i < cands.size(); ++i) {
        detail::check_comparable(q, cands.patches[i], mask);
        all.push_back({i, detail::masked_distance_unchecked(q, cands.patches[i], weights)});
    }
    const std::size_t keep = std::min(k, all.size());
    auto before = [](const Neighbor& x, const Neighbor& y) {
        return x.distance < y.distance || (x.distance == y.distance && x.index < y.index);
    };
    std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(keep), all.end(), before);
    all.resize(keep);
    return all;
}

/// Uniform choice among the retrieved neighbours; one draw from `rng`.
inline std::size_t sample_topk(std::span<const Neighbor> result, Rng& rng) {
    if (result.empty()) {
        throw EmptyCandidatesError("cannot sample from an empty neighbour list");
    }
    return result[rng.uniform_index(result.size())].index;
}

/**
 * @brief Candidates for a query anchored at `anchor` on scale `scale`.
 *
 * One patch per source at the same anchor; with `jitter` > 0 every in-bounds
 * anchor within that Chebyshev radius is added. Order is source-major, then
 * row-major over offsets, so jitter = 0 yields exactly one patch per source.
 */
inline CandidateSet build_candidates(const SourceSet& sources, std::size_t scale, Cell anchor, std::size_t side,
                                     std::size_t jitter = 0) {
    if (scale >= sources.scale_count()) {
        throw ScaleError("scale " + std::to_string(scale) + " out of range (have " +
                         std::to_string(sources.scale_count()) + ")");
    }
    const std::size_t extent = sources.sizes[scale];
    check_rect({anchor.row, anchor.col, side, side}, extent, extent, "candidate footprint");

    const auto j = static_cast<std::ptrdiff_t>(jitter);
    const auto limit = static_cast<std::ptrdiff_t>(extent - side);
    const auto r0 = static_cast<std::ptrdiff_t>(anchor.row);
    const auto c0 = static_cast<std::ptrdiff_t>(anchor.col);

    CandidateSet set{anchor, scale, {}};
    for (std::size_t s = 0; s < sources.size(); ++s) {
        const auto& grid = sources.reduced[scale][s];
        for (std::ptrdiff_t dr = -j; dr <= j; ++dr) {
            for (std::ptrdiff_t dc = -j; dc <= j; ++dc) {
                const auto r = r0 + dr;
                const auto c = c0 + dc;
                if (r < 0 || c < 0 || r > limit || c > limit) {
                    continue;
                }
                set.patches.push_back(
                    extract_patch(grid, {static_cast<std::size_t>(r), static_cast<std::size_t>(c)}, side, s, scale));
            }
        }
    }
    return set;
}

} // namespace latentpatch
