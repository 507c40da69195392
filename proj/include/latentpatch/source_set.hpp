#pragma once

#include "errors.hpp"
#include "grid.hpp"
#include "pca.hpp"

#include <optional>
#include <string>
#include <vector>

namespace latentpatch {

/// Per-source boolean attributes, one row per source in source order.
struct AttributeTable {
    std::vector<std::string> names;
    std::vector<std::vector<bool>> flags; // flags[source][attribute]

    std::size_t source_count() const noexcept { return flags.size(); }

    std::optional<std::size_t> find(const std::string& name) const {
        for (std::size_t i = 0; i < names.size(); ++i) {
            if (names[i] == name) {
                return i;
            }
        }
        return std::nullopt;
    }
};

/**
 * @brief The example grids at every synthesis scale.
 *
 * `full` holds the original L-channel grids at the finest size. `reduced[s]`
 * holds the search-space grids at `sizes[s]`: the PCA projection of `full`
 * (or `full` itself without a model), bilinearly resized. `original_ids`
 * maps each position back to its index in the unfiltered input.
 */
struct SourceSet {
    std::vector<ChannelGrid> full;
    std::vector<std::size_t> sizes;
    std::vector<std::vector<ChannelGrid>> reduced;
    std::optional<PcaModel> pca;
    std::optional<AttributeTable> attributes;
    std::vector<std::size_t> original_ids;

    std::size_t size() const noexcept { return full.size(); }
    std::size_t scale_count() const noexcept { return sizes.size(); }
    std::size_t end_size() const noexcept { return full.empty() ? 0 : full.front().height(); }
    std::size_t full_channels() const noexcept { return full.empty() ? 0 : full.front().channels(); }
    std::size_t search_channels() const noexcept {
        return pca ? pca->components : full_channels();
    }

    /// Map a grid into the search channel space (identity without a model).
    ChannelGrid to_search_space(const ChannelGrid& grid) const { return pca ? project(*pca, grid) : grid; }
};

/**
 * @param full Source grids, all square with side `sizes.back()` and equal channel count.
 * @param pca Optional model; when present its input channel count must match.
 * @param sizes Scale schedule, coarse to fine.
 */
inline SourceSet make_source_set(std::vector<ChannelGrid> full, std::optional<PcaModel> pca,
                                 const std::vector<std::size_t>& sizes) {
    if (full.empty()) {
        throw EmptyInputError("source set needs at least one grid");
    }
    if (sizes.empty()) {
        throw ParameterError("scale schedule is empty");
    }
    const auto& first = full.front();
    if (first.height() != first.width()) {
        throw ShapeError("source grids must be square, got " + first.shape_string());
    }
    for (const auto& g : full) {
        if (!g.same_shape(first)) {
            throw ShapeError("source grids must share a shape; got " + g.shape_string() + " and " + first.shape_string());
        }
    }
    if (sizes.back() != first.height()) {
        throw ShapeError("finest scale " + std::to_string(sizes.back()) + " does not match source side " +
                         std::to_string(first.height()));
    }
    if (pca && pca->input_channels != first.channels()) {
        throw ShapeError("PCA model expects " + std::to_string(pca->input_channels) + " channels, sources have " +
                         std::to_string(first.channels()));
    }

    SourceSet set;
    set.sizes = sizes;
    set.pca = std::move(pca);
    set.reduced.assign(sizes.size(), {});
    std::vector<ChannelGrid> finest;
    finest.reserve(full.size());
    for (const auto& g : full) {
        finest.push_back(set.to_search_space(g));
    }
    for (std::size_t s = 0; s < sizes.size(); ++s) {
        auto& level = set.reduced[s];
        level.reserve(finest.size());
        for (const auto& g : finest) {
            level.push_back(bilinear_resize(g, sizes[s], sizes[s]));
        }
    }
    set.full = std::move(full);
    set.original_ids.resize(set.full.size());
    for (std::size_t i = 0; i < set.original_ids.size(); ++i) {
        set.original_ids[i] = i;
    }
    return set;
}

/// Keep only the sources at `keep` (ascending positions), preserving order.
inline SourceSet subset_sources(const SourceSet& sources, const std::vector<std::size_t>& keep) {
    SourceSet out;
    out.sizes = sources.sizes;
    out.pca = sources.pca;
    out.reduced.assign(sources.reduced.size(), {});
    if (sources.attributes) {
        out.attributes = AttributeTable{sources.attributes->names, {}};
    }
    for (auto idx : keep) {
        if (idx >= sources.size()) {
            throw BoundsError("source index " + std::to_string(idx) + " out of range");
        }
        out.full.push_back(sources.full[idx]);
        for (std::size_t s = 0; s < sources.reduced.size(); ++s) {
            out.reduced[s].push_back(sources.reduced[s][idx]);
        }
        out.original_ids.push_back(sources.original_ids[idx]);
        if (sources.attributes) {
            out.attributes->flags.push_back(sources.attributes->flags[idx]);
        }
    }
    return out;
}

} // namespace latentpatch
