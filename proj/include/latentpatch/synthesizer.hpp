#pragma once

#include "errors.hpp"
#include "grid.hpp"
#include "patch_index.hpp"
#include "provenance.hpp"
#include "rng.hpp"
#include "source_set.hpp"

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <thread>
#include <vector>

/**
 * @file synthesizer.hpp
 *
 * @brief Coarse-to-fine masked raster-scan patch synthesis over a SourceSet.
 *
 * Each scale visits anchors on a stride-w lattice (the last anchor per axis
 * clamped to side - omega). At every anchor the query patch is compared to
 * the same-anchor patches of all sources, one of the k nearest is drawn
 * uniformly, and the footprint cells not yet written in the current pass are
 * copied from it. The final grid is assembled from the full-channel sources
 * through the finest provenance, so outputs are exact rearrangements of
 * source codes.
 */

namespace latentpatch {

struct SynthesisParams {
    std::size_t omega = 4;
    std::size_t stride = 0; // 0 selects floor(omega / 3 + 1/2)
    std::size_t k = 3;
    std::size_t scales = 5;
    std::size_t start_size = 10;
    std::size_t end_size = 16;
    std::uint64_t seed = 0;
    std::size_t jitter = 0;

    static std::size_t default_stride(std::size_t omega) { return std::max<std::size_t>(1, (2 * omega + 3) / 6); }

    std::size_t effective_stride() const { return stride == 0 ? default_stride(omega) : stride; }
};

namespace detail {

/// round(num / den) with ties to even, for positive den.
inline std::size_t round_half_even(std::size_t num, std::size_t den) {
    std::size_t q = num / den;
    std::size_t rem = num % den;
    if (2 * rem > den || (2 * rem == den && (q % 2 == 1))) {
        ++q;
    }
    return q;
}

} // namespace detail

/**
 * Sizes from start_size to end_size, linearly spaced over `scales` steps and
 * rounded to the nearest integer (ties to even). One scale is just end_size.
 */
inline std::vector<std::size_t> scale_schedule(const SynthesisParams& params) {
    if (params.scales <= 1) {
        return {params.end_size};
    }
    const std::size_t steps = params.scales - 1;
    const std::size_t span = params.end_size - params.start_size;
    std::vector<std::size_t> sizes;
    sizes.reserve(params.scales);
    for (std::size_t s = 0; s <= steps; ++s) {
        sizes.push_back(detail::round_half_even(params.start_size * steps + span * s, steps));
    }
    return sizes;
}

inline void validate(const SynthesisParams& params) {
    const auto w = params.effective_stride();
    if (params.omega == 0) {
        throw ParameterError("patch side omega must be at least 1");
    }
    if (w > params.omega) {
        throw ParameterError("stride " + std::to_string(w) + " exceeds patch side " + std::to_string(params.omega));
    }
    if (params.k == 0) {
        throw ParameterError("k must be at least 1");
    }
    if (params.scales == 0) {
        throw ParameterError("scale count must be at least 1");
    }
    if (params.start_size == 0 || params.start_size > params.end_size) {
        throw ParameterError("start size " + std::to_string(params.start_size) + " must be in [1, end size " +
                             std::to_string(params.end_size) + "]");
    }
    const auto coarsest = scale_schedule(params).front();
    if (params.omega > coarsest) {
        throw ParameterError("patch side " + std::to_string(params.omega) + " exceeds coarsest size " +
                             std::to_string(coarsest));
    }
}

/// Query anchors along one axis: 0, w, 2w, ... with the last clamped to side - omega.
inline std::vector<std::size_t> scan_anchors(std::size_t side, std::size_t omega, std::size_t stride) {
    if (omega > side) {
        throw ParameterError("patch side " + std::to_string(omega) + " exceeds canvas side " + std::to_string(side));
    }
    if (stride == 0) {
        throw ParameterError("stride must be at least 1");
    }
    std::vector<std::size_t> anchors;
    const std::size_t last = side - omega;
    for (std::size_t a = 0; a < last; a += stride) {
        anchors.push_back(a);
    }
    anchors.push_back(last);
    return anchors;
}

/// Row-major per-cell flags for a square canvas.
struct CellFlags {
    std::size_t side = 0;
    std::vector<std::uint8_t> flags;

    CellFlags() = default;
    CellFlags(std::size_t s, bool value) : side(s), flags(s * s, value ? 1 : 0) {}

    bool at(std::size_t r, std::size_t c) const noexcept { return flags[r * side + c] != 0; }
    void set(std::size_t r, std::size_t c) noexcept { flags[r * side + c] = 1; }
    bool all() const noexcept { return std::all_of(flags.begin(), flags.end(), [](auto f) { return f != 0; }); }
};

struct PassStats {
    std::size_t queries = 0;
    std::size_t unconstrained_queries = 0; // footprints with no generated context
};

/**
 * @brief Copy one patch-sized block of a source into the canvas.
 *
 * Only cells with `write_if(i, j)` are copied; each copied cell is marked
 * generated and gets its provenance record.
 */
template <class Predicate>
void paste_patch(ChannelGrid& canvas, CellFlags& generated, ProvenanceMap& pmap, const ChannelGrid& source_grid,
                 std::size_t source_index, Cell src_anchor, Cell dst_anchor, std::size_t omega, std::size_t scale,
                 Predicate write_if) {
    for (std::size_t i = 0; i < omega; ++i) {
        for (std::size_t j = 0; j < omega; ++j) {
            const std::size_t r = dst_anchor.row + i;
            const std::size_t c = dst_anchor.col + j;
            if (!write_if(r, c)) {
                continue;
            }
            auto from = source_grid.cell(src_anchor.row + i, src_anchor.col + j);
            std::copy(from.begin(), from.end(), canvas.cell(r, c).begin());
            generated.set(r, c);
            pmap.at(r, c) = {static_cast<std::int32_t>(source_index), static_cast<std::int32_t>(src_anchor.row + i),
                             static_cast<std::int32_t>(src_anchor.col + j), static_cast<std::int32_t>(scale)};
        }
    }
}

/// Place a uniformly drawn source's corner patch at the canvas origin.
inline std::size_t seed_top_left(ChannelGrid& canvas, CellFlags& generated, const SourceSet& sources,
                                 std::size_t scale, const SynthesisParams& params, Rng& rng, ProvenanceMap& pmap) {
    if (scale >= sources.scale_count()) {
        throw ScaleError("scale " + std::to_string(scale) + " out of range");
    }
    const std::size_t chosen = rng.uniform_index(sources.size());
    paste_patch(canvas, generated, pmap, sources.reduced[scale][chosen], chosen, {0, 0}, {0, 0}, params.omega, scale,
                [](std::size_t, std::size_t) { return true; });
    return chosen;
}

/**
 * @brief One raster-scan pass at `scale`.
 *
 * The query mask is the footprint's `generated` flags. A footprint with no
 * generated cell carries no information, so its patch is drawn uniformly from
 * all candidates instead of going through k-NN.
 */
inline PassStats single_scale_pass(ChannelGrid& canvas, CellFlags& generated, const SourceSet& sources,
                                   std::size_t scale, const SynthesisParams& params, Rng& rng, ProvenanceMap& pmap) {
    if (scale >= sources.scale_count()) {
        throw ScaleError("scale " + std::to_string(scale) + " out of range");
    }
    const std::size_t side = canvas.height();
    const std::size_t omega = params.omega;
    if (canvas.width() != side || side != sources.sizes[scale]) {
        throw ShapeError("canvas " + canvas.shape_string() + " does not match scale size " +
                         std::to_string(sources.sizes[scale]));
    }
    if (canvas.channels() != sources.search_channels()) {
        throw ShapeError("canvas has " + std::to_string(canvas.channels()) + " channels, search space has " +
                         std::to_string(sources.search_channels()));
    }
    const auto anchors = scan_anchors(side, omega, params.effective_stride());

    CellFlags written(side, false);
    PassStats stats;
    PatchMask mask{omega, std::vector<std::uint8_t>(omega * omega)};

    for (auto a : anchors) {
        for (auto b : anchors) {
            const Cell anchor{a, b};
            ++stats.queries;
            for (std::size_t i = 0; i < omega; ++i) {
                for (std::size_t j = 0; j < omega; ++j) {
                    mask.flags[i * omega + j] = generated.at(a + i, b + j) ? 1 : 0;
                }
            }
            const auto cands = build_candidates(sources, scale, anchor, omega, params.jitter);
            std::size_t pick = 0;
            if (mask.any()) {
                const auto query = extract_patch(canvas, anchor, omega);
                const auto nearest = knn(query, cands, mask, params.k);
                pick = sample_topk(nearest, rng);
            } else {
                ++stats.unconstrained_queries;
                pick = rng.uniform_index(cands.size());
            }
            const auto& chosen = cands.patches[pick];
            paste_patch(canvas, generated, pmap, sources.reduced[scale][chosen.source], chosen.source, chosen.anchor,
                        anchor, omega, scale, [&](std::size_t r, std::size_t c) {
                            if (written.at(r, c)) {
                                return false;
                            }
                            written.set(r, c);
                            return true;
                        });
        }
    }
    if (!written.all()) {
        throw InvariantError("raster pass left cells unwritten");
    }
    return stats;
}

struct GeneratedGrid {
    ChannelGrid grid;          // full channel dimension
    ProvenanceMap provenance;  // finest scale
};

namespace detail {

inline void check_sources_for(const SourceSet& sources, const SynthesisParams& params) {
    if (sources.size() == 0) {
        throw EmptyInputError("source set is empty");
    }
    validate(params);
    if (sources.sizes != scale_schedule(params)) {
        throw ParameterError("source set was built for a different scale schedule");
    }
}

inline ChannelGrid assemble_full(const SourceSet& sources, const ProvenanceMap& pmap) {
    const std::size_t side = pmap.height();
    ChannelGrid out(side, pmap.width(), sources.full_channels());
    for (std::size_t r = 0; r < side; ++r) {
        for (std::size_t c = 0; c < pmap.width(); ++c) {
            const auto& rec = pmap.at(r, c);
            if (!rec.populated()) {
                throw InvariantError("finest provenance has an unpopulated cell");
            }
            auto from = sources.full[static_cast<std::size_t>(rec.source)].cell(static_cast<std::size_t>(rec.src_row),
                                                                                static_cast<std::size_t>(rec.src_col));
            std::copy(from.begin(), from.end(), out.cell(r, c).begin());
        }
    }
    return out;
}

template <class Task>
void run_batch(std::size_t count, std::size_t jobs, Task task) {
    jobs = std::clamp<std::size_t>(jobs, 1, std::max<std::size_t>(count, 1));
    if (jobs == 1) {
        for (std::size_t i = 0; i < count; ++i) {
            task(i);
        }
        return;
    }
    std::vector<std::jthread> workers;
    workers.reserve(jobs);
    for (std::size_t t = 0; t < jobs; ++t) {
        workers.emplace_back([&, t] {
            for (std::size_t i = t; i < count; i += jobs) {
                task(i);
            }
        });
    }
}

} // namespace detail

/// Synthesise output number `index` of a batch; streams are independent per index.
inline GeneratedGrid generate_one(const SourceSet& sources, const SynthesisParams& params, std::size_t index,
                                  const ChannelGrid* reference = nullptr) {
    detail::check_sources_for(sources, params);
    Rng rng = Rng::stream(params.seed, index);
    const auto& sizes = sources.sizes;
    const std::size_t channels = sources.search_channels();

    ChannelGrid canvas;
    CellFlags generated;
    ProvenanceMap pmap(sizes.front(), sizes.front(), sources.size());
    if (reference != nullptr) {
        if (reference->channels() != sources.full_channels() || reference->height() != params.end_size ||
            reference->width() != params.end_size) {
            throw ShapeError("reference " + reference->shape_string() + " must be " + std::to_string(params.end_size) +
                             "x" + std::to_string(params.end_size) + "x" + std::to_string(sources.full_channels()));
        }
        canvas = bilinear_resize(sources.to_search_space(*reference), sizes.front(), sizes.front());
        generated = CellFlags(sizes.front(), true);
    } else {
        canvas = ChannelGrid(sizes.front(), sizes.front(), channels);
        generated = CellFlags(sizes.front(), false);
        seed_top_left(canvas, generated, sources, 0, params, rng, pmap);
    }
    single_scale_pass(canvas, generated, sources, 0, params, rng, pmap);

    for (std::size_t s = 1; s < sizes.size(); ++s) {
        canvas = bilinear_resize(canvas, sizes[s], sizes[s]);
        generated = CellFlags(sizes[s], true);
        pmap = ProvenanceMap(sizes[s], sizes[s], sources.size());
        single_scale_pass(canvas, generated, sources, s, params, rng, pmap);
    }
    return {detail::assemble_full(sources, pmap), std::move(pmap)};
}

/**
 * @brief Generate `count` grids, optionally conditioned on a reference.
 *
 * @param jobs Number of worker threads; outputs do not depend on it.
 */
inline std::vector<GeneratedGrid> generate(const SourceSet& sources, const SynthesisParams& params, std::size_t count,
                                           const std::optional<ChannelGrid>& reference = std::nullopt,
                                           std::size_t jobs = 1) {
    detail::check_sources_for(sources, params);
    std::vector<GeneratedGrid> outputs(count);
    const ChannelGrid* ref = reference ? &*reference : nullptr;
    detail::run_batch(count, jobs, [&](std::size_t i) { outputs[i] = generate_one(sources, params, i, ref); });
    return outputs;
}

enum class BaselineMode { cell, patch };

/**
 * @brief Random same-location copying without any matching.
 *
 * `cell` draws a source per cell; `patch` tiles the grid with non-overlapping
 * tile x tile blocks (border tiles truncated) and draws a source per tile.
 */
inline std::vector<GeneratedGrid> baseline_random(const SourceSet& sources, BaselineMode mode, std::size_t tile,
                                                  std::uint64_t seed, std::size_t count) {
    if (sources.size() == 0) {
        throw EmptyInputError("source set is empty");
    }
    const std::size_t side = sources.end_size();
    const std::size_t step = mode == BaselineMode::cell ? 1 : tile;
    if (step == 0 || step > side) {
        throw ParameterError("baseline tile size must be in [1, " + std::to_string(side) + "]");
    }
    const std::size_t finest_scale = sources.scale_count() == 0 ? 0 : sources.scale_count() - 1;

    std::vector<GeneratedGrid> outputs;
    outputs.reserve(count);
    for (std::size_t n = 0; n < count; ++n) {
        Rng rng = Rng::stream(seed, n);
        ProvenanceMap pmap(side, side, sources.size());
        for (std::size_t r0 = 0; r0 < side; r0 += step) {
            for (std::size_t c0 = 0; c0 < side; c0 += step) {
                const auto src = static_cast<std::int32_t>(rng.uniform_index(sources.size()));
                for (std::size_t r = r0; r < std::min(r0 + step, side); ++r) {
                    for (std::size_t c = c0; c < std::min(c0 + step, side); ++c) {
                        pmap.at(r, c) = {src, static_cast<std::int32_t>(r), static_cast<std::int32_t>(c),
                                         static_cast<std::int32_t>(finest_scale)};
                    }
                }
            }
        }
        outputs.push_back({detail::assemble_full(sources, pmap), std::move(pmap)});
    }
    return outputs;
}

} // namespace latentpatch
