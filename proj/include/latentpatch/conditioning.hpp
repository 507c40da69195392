#pragma once

#include "errors.hpp"
#include "grid.hpp"
#include "npy.hpp"
#include "patch_index.hpp"
#include "source_set.hpp"

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace latentpatch {

/// CSV with header `source,<attr1>,<attr2>,...` and 0/1 values, one row per source.
inline AttributeTable parse_attribute_table(std::istream& in, std::size_t source_count, const std::string& origin = "<csv>") {
    auto split = [](const std::string& line) {
        std::vector<std::string> fields;
        std::stringstream ss(line);
        for (std::string field; std::getline(ss, field, ',');) {
            while (!field.empty() && (field.back() == '\r' || field.back() == ' ')) {
                field.pop_back();
            }
            while (!field.empty() && field.front() == ' ') {
                field.erase(field.begin());
            }
            fields.push_back(field);
        }
        return fields;
    };

    std::string line;
    if (!std::getline(in, line)) {
        throw FormatError(origin + ": attribute table is empty");
    }
    auto header = split(line);
    if (header.empty() || header.front() != "source") {
        throw FormatError(origin + ": attribute table header must start with 'source'");
    }
    AttributeTable table;
    table.names.assign(header.begin() + 1, header.end());
    for (const auto& name : table.names) {
        if (name.empty()) {
            throw FormatError(origin + ": attribute names must be nonempty");
        }
    }
    table.flags.assign(source_count, {});
    std::vector<bool> seen(source_count, false);

    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") {
            continue;
        }
        auto fields = split(line);
        if (fields.size() != header.size()) {
            throw FormatError(origin + ": line " + std::to_string(line_no) + " has " + std::to_string(fields.size()) +
                              " fields, expected " + std::to_string(header.size()));
        }
        std::size_t source = 0;
        try {
            std::size_t used = 0;
            source = std::stoul(fields[0], &used);
            if (used != fields[0].size()) {
                throw std::invalid_argument("trailing");
            }
        } catch (const std::exception&) {
            throw FormatError(origin + ": line " + std::to_string(line_no) + " has a non-integer source id");
        }
        if (source >= source_count) {
            throw FormatError(origin + ": source id " + std::to_string(source) + " out of range");
        }
        if (seen[source]) {
            throw FormatError(origin + ": source id " + std::to_string(source) + " listed twice");
        }
        seen[source] = true;
        auto& row = table.flags[source];
        for (std::size_t a = 1; a < fields.size(); ++a) {
            if (fields[a] != "0" && fields[a] != "1") {
                throw FormatError(origin + ": line " + std::to_string(line_no) + " attribute '" + header[a] +
                                  "' must be 0 or 1");
            }
            row.push_back(fields[a] == "1");
        }
    }
    for (std::size_t s = 0; s < source_count; ++s) {
        if (!seen[s]) {
            throw FormatError(origin + ": source " + std::to_string(s) + " missing from attribute table");
        }
    }
    return table;
}

inline AttributeTable load_attribute_table(const std::filesystem::path& path, std::size_t source_count) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    return parse_attribute_table(in, source_count, path.string());
}

struct AttributeConstraint {
    std::string name;
    bool required = true;
};

/**
 * @brief Sources satisfying every constraint, in their original order.
 *
 * The result's `original_ids` compose with the input's, so provenance
 * indices of a later generation remap to ids of the unfiltered set.
 */
inline SourceSet filter_sources(const SourceSet& sources, const AttributeTable& table,
                                const std::vector<AttributeConstraint>& constraints) {
    if (table.source_count() != sources.size()) {
        throw ShapeError("attribute table covers " + std::to_string(table.source_count()) + " sources, set has " +
                         std::to_string(sources.size()));
    }
    std::vector<std::size_t> columns;
    for (const auto& c : constraints) {
        auto col = table.find(c.name);
        if (!col) {
            throw AttributeNameError("unknown attribute '" + c.name + "'");
        }
        columns.push_back(*col);
    }
    std::vector<std::size_t> keep;
    for (std::size_t s = 0; s < sources.size(); ++s) {
        bool ok = true;
        for (std::size_t i = 0; i < constraints.size() && ok; ++i) {
            ok = table.flags[s][columns[i]] == constraints[i].required;
        }
        if (ok) {
            keep.push_back(s);
        }
    }
    if (keep.empty()) {
        std::string echo;
        for (const auto& c : constraints) {
            echo += (echo.empty() ? "" : ", ") + c.name + "=" + (c.required ? "1" : "0");
        }
        throw EmptySelectionError("no source satisfies constraints [" + echo + "]");
    }
    SourceSet out = subset_sources(sources, keep);
    out.attributes = AttributeTable{table.names, {}};
    for (auto s : keep) {
        out.attributes->flags.push_back(table.flags[s]);
    }
    return out;
}

/// Paste `region` of `donor` onto the same cells of `reference`.
inline ChannelGrid edit_latent(const ChannelGrid& reference, const ChannelGrid& donor, const Rect& region) {
    if (!reference.same_shape(donor)) {
        throw ShapeError("edit needs equal shapes, got " + reference.shape_string() + " and " + donor.shape_string());
    }
    return copy_region(reference, donor, region, {region.row0, region.col0});
}

inline ChannelGrid edit_latent(const ChannelGrid& reference, const ChannelGrid& donor, const std::vector<Rect>& regions) {
    ChannelGrid out = reference;
    for (const auto& region : regions) {
        out = edit_latent(out, donor, region);
    }
    return out;
}

struct Codebook {
    std::size_t atoms = 0;
    std::size_t channels = 0;
    std::vector<float> values; // atoms x channels

    const float* atom(std::size_t i) const noexcept { return values.data() + i * channels; }
};

inline Codebook codebook_from_array(const NpyArray& array) {
    if (array.shape.size() != 2 || array.shape[0] == 0 || array.shape[1] == 0) {
        throw ShapeError("codebook must have shape (N, L) with N, L >= 1");
    }
    return {array.shape[0], array.shape[1], array.data};
}

inline Codebook load_codebook(const std::filesystem::path& path) { return codebook_from_array(read_npy_file(path)); }

struct SnapResult {
    ChannelGrid grid;
    std::vector<std::int32_t> indices; // H x W, row-major
};

/// Replace every cell by its nearest atom (squared L2, lowest index on ties).
inline SnapResult snap_to_codebook(const ChannelGrid& grid, const Codebook& codebook) {
    if (codebook.atoms == 0 || codebook.values.size() != codebook.atoms * codebook.channels) {
        throw ShapeError("codebook is empty or inconsistent");
    }
    if (grid.channels() != codebook.channels) {
        throw ShapeError("codebook has " + std::to_string(codebook.channels) + " channels, grid has " +
                         std::to_string(grid.channels()));
    }
    SnapResult result{ChannelGrid(grid.height(), grid.width(), grid.channels()), {}};
    result.indices.reserve(grid.cell_count());
    for (std::size_t r = 0; r < grid.height(); ++r) {
        for (std::size_t c = 0; c < grid.width(); ++c) {
            const float* cell = grid.cell(r, c).data();
            std::size_t best = 0;
            float best_d = squared_l2(cell, codebook.atom(0), codebook.channels);
            for (std::size_t a = 1; a < codebook.atoms; ++a) {
                const float d = squared_l2(cell, codebook.atom(a), codebook.channels);
                if (d < best_d) {
                    best_d = d;
                    best = a;
                }
            }
            std::copy_n(codebook.atom(best), codebook.channels, result.grid.cell(r, c).begin());
            result.indices.push_back(static_cast<std::int32_t>(best));
        }
    }
    return result;
}

} // namespace latentpatch
