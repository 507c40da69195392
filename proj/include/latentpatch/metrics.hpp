#pragma once

#include "errors.hpp"
#include "grid.hpp"
#include "npy.hpp"
#include "provenance.hpp"
#include "rng.hpp"
#include "source_set.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <functional>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

/**
 * @file metrics.hpp
 *
 * @brief Diversity ratio, reconstruction-error comparison and provenance
 * statistics.
 */

namespace latentpatch {

enum class DistanceKind {
    latent_l2,       // Euclidean norm of the full tensor difference
    pixel_l2,        // mean over cells of the per-cell Euclidean distance
    external_matrix, // precomputed; rows/cols = generated items, then source items
};

struct DistanceSpec {
    DistanceKind kind = DistanceKind::latent_l2;
    std::size_t matrix_size = 0;
    std::vector<double> matrix; // matrix_size^2, row-major

    static DistanceSpec external(const NpyArray& array) {
        if (array.shape.size() != 2 || array.shape[0] != array.shape[1] || array.shape[0] == 0) {
            throw ShapeError("distance matrix must be square (P, P)");
        }
        const std::size_t p = array.shape[0];
        DistanceSpec spec{DistanceKind::external_matrix, p, std::vector<double>(array.data.begin(), array.data.end())};
        for (std::size_t i = 0; i < p; ++i) {
            if (std::abs(spec.matrix[i * p + i]) > 1e-5) {
                throw FormatError("distance matrix diagonal entry " + std::to_string(i) + " is not zero");
            }
            for (std::size_t j = i + 1; j < p; ++j) {
                if (std::abs(spec.matrix[i * p + j] - spec.matrix[j * p + i]) > 1e-5) {
                    throw FormatError("distance matrix is not symmetric at (" + std::to_string(i) + ", " +
                                      std::to_string(j) + ")");
                }
            }
        }
        return spec;
    }
};

inline double grid_distance(const ChannelGrid& a, const ChannelGrid& b, DistanceKind kind) {
    if (!a.same_shape(b)) {
        throw ShapeError("distance needs equal shapes, got " + a.shape_string() + " and " + b.shape_string());
    }
    if (kind == DistanceKind::latent_l2) {
        double acc = 0.0;
        auto x = a.data();
        auto y = b.data();
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double d = static_cast<double>(x[i]) - static_cast<double>(y[i]);
            acc += d * d;
        }
        return std::sqrt(acc);
    }
    if (kind == DistanceKind::pixel_l2) {
        double total = 0.0;
        for (std::size_t r = 0; r < a.height(); ++r) {
            for (std::size_t c = 0; c < a.width(); ++c) {
                auto x = a.cell(r, c);
                auto y = b.cell(r, c);
                double acc = 0.0;
                for (std::size_t k = 0; k < x.size(); ++k) {
                    const double d = static_cast<double>(x[k]) - static_cast<double>(y[k]);
                    acc += d * d;
                }
                total += std::sqrt(acc);
            }
        }
        return total / static_cast<double>(a.cell_count());
    }
    throw ParameterError("external distances are looked up by index, not computed");
}

/// How item pairs are drawn. Sampled pairs are distinct within a draw; draws may repeat.
struct PairSampling {
    std::size_t pairs = 700;
    bool exhaustive = false;
};

/// Mean of `dist(i, j)` over unordered distinct pairs of `n` items.
inline double mean_pair_distance(std::size_t n, const std::function<double(std::size_t, std::size_t)>& dist,
                                 const PairSampling& sampling, std::uint64_t seed) {
    if (n < 2) {
        throw InsufficientDataError("pairwise distances need at least 2 items, got " + std::to_string(n));
    }
    double total = 0.0;
    std::size_t used = 0;
    if (sampling.exhaustive) {
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = i + 1; j < n; ++j) {
                total += dist(i, j);
                ++used;
            }
        }
    } else {
        if (sampling.pairs == 0) {
            throw ParameterError("pair count must be at least 1");
        }
        Rng rng(seed);
        for (std::size_t p = 0; p < sampling.pairs; ++p) {
            const std::size_t i = rng.uniform_index(n);
            std::size_t j = rng.uniform_index(n - 1);
            if (j >= i) {
                ++j;
            }
            total += dist(std::min(i, j), std::max(i, j));
            ++used;
        }
    }
    return total / static_cast<double>(used);
}

/**
 * @brief Mean pairwise distance within `generated` over the same within `source`.
 *
 * Both sets are sampled with generators seeded by `seed`, so equal lists give
 * exactly 1. For `external_matrix`, row i < |generated| is generated item i
 * and row |generated| + j is source item j.
 */
inline double diversity_score(const std::vector<ChannelGrid>& generated, const std::vector<ChannelGrid>& source,
                              const DistanceSpec& dist, const PairSampling& sampling, std::uint64_t seed) {
    const std::size_t g = generated.size();
    if (g < 2 || source.size() < 2) {
        throw InsufficientDataError("diversity needs at least 2 generated and 2 source items");
    }
    std::function<double(std::size_t, std::size_t)> gen_dist;
    std::function<double(std::size_t, std::size_t)> src_dist;
    if (dist.kind == DistanceKind::external_matrix) {
        const std::size_t p = dist.matrix_size;
        if (p != g + source.size()) {
            throw ShapeError("distance matrix size " + std::to_string(p) + " must equal generated + source count " +
                             std::to_string(g + source.size()));
        }
        gen_dist = [&dist, p](std::size_t i, std::size_t j) { return dist.matrix[i * p + j]; };
        src_dist = [&dist, p, g](std::size_t i, std::size_t j) { return dist.matrix[(g + i) * p + g + j]; };
    } else {
        gen_dist = [&](std::size_t i, std::size_t j) { return grid_distance(generated[i], generated[j], dist.kind); };
        src_dist = [&](std::size_t i, std::size_t j) { return grid_distance(source[i], source[j], dist.kind); };
    }
    const double numerator = mean_pair_distance(g, gen_dist, sampling, seed);
    const double denominator = mean_pair_distance(source.size(), src_dist, sampling, seed);
    if (denominator == 0.0) {
        throw DegenerateSourceError("source items have zero mean pairwise distance");
    }
    return numerator / denominator;
}

/// Two-sample Kolmogorov-Smirnov statistic sup |F_a - F_b|.
inline double ks_statistic(std::vector<double> a, std::vector<double> b) {
    if (a.empty() || b.empty()) {
        throw InsufficientDataError("KS statistic needs two nonempty samples");
    }
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const double na = static_cast<double>(a.size());
    const double nb = static_cast<double>(b.size());
    std::size_t i = 0;
    std::size_t j = 0;
    double best = 0.0;
    while (i < a.size() && j < b.size()) {
        const double x = std::min(a[i], b[j]);
        while (i < a.size() && a[i] == x) {
            ++i;
        }
        while (j < b.size() && b[j] == x) {
            ++j;
        }
        best = std::max(best, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
    }
    return best;
}

inline double mean_squared_error(const ChannelGrid& original, const ChannelGrid& reconstruction) {
    if (!original.same_shape(reconstruction)) {
        throw ShapeError("reconstruction " + reconstruction.shape_string() + " does not match original " +
                         original.shape_string());
    }
    auto x = original.data();
    auto y = reconstruction.data();
    double acc = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double d = static_cast<double>(x[i]) - static_cast<double>(y[i]);
        acc += d * d;
    }
    return acc / static_cast<double>(x.size());
}

struct ErrorSummary {
    std::vector<double> errors;
    double mean = 0.0;
    double stddev = 0.0; // sample standard deviation, 0 for one item
};

struct ReconReport {
    ErrorSummary a;
    ErrorSummary b;
    double ks = 0.0;
};

using ReconPair = std::pair<ChannelGrid, ChannelGrid>;

inline ErrorSummary summarize_errors(const std::vector<ReconPair>& pairs) {
    if (pairs.empty()) {
        throw InsufficientDataError("reconstruction set is empty");
    }
    ErrorSummary s;
    for (const auto& [orig, rec] : pairs) {
        s.errors.push_back(mean_squared_error(orig, rec));
    }
    const double n = static_cast<double>(s.errors.size());
    s.mean = std::accumulate(s.errors.begin(), s.errors.end(), 0.0) / n;
    if (s.errors.size() > 1) {
        double ss = 0.0;
        for (auto e : s.errors) {
            ss += (e - s.mean) * (e - s.mean);
        }
        s.stddev = std::sqrt(ss / (n - 1.0));
    }
    return s;
}

/// Compare per-item reconstruction errors of two sets (e.g. source vs. held-out).
inline ReconReport recon_error_report(const std::vector<ReconPair>& pairs_a, const std::vector<ReconPair>& pairs_b) {
    ReconReport report{summarize_errors(pairs_a), summarize_errors(pairs_b), 0.0};
    report.ks = ks_statistic(report.a.errors, report.b.errors);
    return report;
}

struct CopyStatistics {
    double exact_match_fraction = 0.0;
    std::vector<std::size_t> usage; // cells per source
    double largest_region_fraction = 0.0;
    std::size_t distinct_sources = 0;
};

/// Largest 4-connected component of cells sharing a source index.
inline std::size_t largest_source_region(const ProvenanceMap& pmap) {
    const std::size_t h = pmap.height();
    const std::size_t w = pmap.width();
    std::vector<std::uint8_t> seen(h * w, 0);
    std::vector<std::size_t> stack;
    std::size_t best = 0;
    for (std::size_t start = 0; start < h * w; ++start) {
        if (seen[start]) {
            continue;
        }
        const auto label = pmap.records()[start].source;
        std::size_t size = 0;
        stack.assign(1, start);
        seen[start] = 1;
        while (!stack.empty()) {
            const std::size_t cur = stack.back();
            stack.pop_back();
            ++size;
            const std::size_t r = cur / w;
            const std::size_t c = cur % w;
            auto visit = [&](std::size_t nr, std::size_t nc) {
                const std::size_t idx = nr * w + nc;
                if (!seen[idx] && pmap.records()[idx].source == label) {
                    seen[idx] = 1;
                    stack.push_back(idx);
                }
            };
            if (r > 0) visit(r - 1, c);
            if (r + 1 < h) visit(r + 1, c);
            if (c > 0) visit(r, c - 1);
            if (c + 1 < w) visit(r, c + 1);
        }
        best = std::max(best, size);
    }
    return best;
}

inline CopyStatistics copy_statistics(const ChannelGrid& output, const ProvenanceMap& pmap, const SourceSet& sources) {
    if (pmap.height() != output.height() || pmap.width() != output.width()) {
        throw ShapeError("provenance map does not match output " + output.shape_string());
    }
    CopyStatistics stats;
    stats.usage.assign(sources.size(), 0);
    std::size_t exact = 0;
    for (std::size_t r = 0; r < output.height(); ++r) {
        for (std::size_t c = 0; c < output.width(); ++c) {
            const auto& rec = pmap.at(r, c);
            if (rec.source < 0 || static_cast<std::size_t>(rec.source) >= sources.size()) {
                continue;
            }
            const auto& src = sources.full[static_cast<std::size_t>(rec.source)];
            ++stats.usage[static_cast<std::size_t>(rec.source)];
            if (rec.src_row < 0 || rec.src_col < 0 || static_cast<std::size_t>(rec.src_row) >= src.height() ||
                static_cast<std::size_t>(rec.src_col) >= src.width() || src.channels() != output.channels()) {
                continue;
            }
            auto expected = src.cell(static_cast<std::size_t>(rec.src_row), static_cast<std::size_t>(rec.src_col));
            auto actual = output.cell(r, c);
            if (std::memcmp(expected.data(), actual.data(), actual.size() * sizeof(float)) == 0) {
                ++exact;
            }
        }
    }
    const double cells = static_cast<double>(output.cell_count());
    stats.exact_match_fraction = static_cast<double>(exact) / cells;
    stats.distinct_sources =
        static_cast<std::size_t>(std::count_if(stats.usage.begin(), stats.usage.end(), [](auto u) { return u > 0; }));
    stats.largest_region_fraction = static_cast<double>(largest_source_region(pmap)) / cells;
    return stats;
}

} // namespace latentpatch
