#pragma once

#include "errors.hpp"
#include "grid.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace latentpatch {

/// Where one generated cell was copied from.
struct ProvenanceRecord {
    static constexpr std::int32_t unset = -1;

    std::int32_t source = unset;
    std::int32_t src_row = 0;
    std::int32_t src_col = 0;
    std::int32_t scale = 0;

    bool populated() const noexcept { return source != unset; }
    friend bool operator==(const ProvenanceRecord&, const ProvenanceRecord&) = default;
};

class ProvenanceMap {
public:
    ProvenanceMap() = default;
    ProvenanceMap(std::size_t height, std::size_t width, std::size_t source_count)
        : height_(height), width_(width), source_count_(source_count), records_(height * width) {}

    std::size_t height() const noexcept { return height_; }
    std::size_t width() const noexcept { return width_; }
    std::size_t source_count() const noexcept { return source_count_; }

    ProvenanceRecord& at(std::size_t row, std::size_t col) noexcept { return records_[row * width_ + col]; }
    const ProvenanceRecord& at(std::size_t row, std::size_t col) const noexcept { return records_[row * width_ + col]; }

    const std::vector<ProvenanceRecord>& records() const noexcept { return records_; }

    bool complete() const noexcept {
        return std::all_of(records_.begin(), records_.end(), [](const auto& r) { return r.populated(); });
    }

    friend bool operator==(const ProvenanceMap&, const ProvenanceMap&) = default;

private:
    std::size_t height_ = 0;
    std::size_t width_ = 0;
    std::size_t source_count_ = 0;
    std::vector<ProvenanceRecord> records_;
};

/// HSV to 8-bit RGB at full saturation and value.
inline std::array<std::uint8_t, 3> hue_to_rgb(double hue) {
    hue = hue - std::floor(hue);
    const double h6 = hue * 6.0;
    const int sector = static_cast<int>(std::floor(h6)) % 6;
    const double f = h6 - std::floor(h6);
    double r = 0, g = 0, b = 0;
    switch (sector) {
        case 0: r = 1; g = f; b = 0; break;
        case 1: r = 1 - f; g = 1; b = 0; break;
        case 2: r = 0; g = 1; b = f; break;
        case 3: r = 0; g = 1 - f; b = 1; break;
        case 4: r = f; g = 0; b = 1; break;
        default: r = 1; g = 0; b = 1 - f; break;
    }
    auto byte = [](double v) { return static_cast<std::uint8_t>(std::lround(v * 255.0)); };
    return {byte(r), byte(g), byte(b)};
}

/**
 * @brief Write a P6 image with one pixel per cell coloured by source index,
 * and a CSV sidecar carrying the exact records.
 *
 * The CSV goes next to the image with a `.csv` extension.
 */
inline void render_provenance(const ProvenanceMap& pmap, const std::filesystem::path& ppm_path) {
    if (!pmap.complete()) {
        throw IncompleteProvenanceError("provenance map has unpopulated cells");
    }
    const double count = static_cast<double>(std::max<std::size_t>(pmap.source_count(), 1));

    std::ofstream ppm(ppm_path, std::ios::binary | std::ios::trunc);
    if (!ppm) {
        throw IoError("cannot create " + ppm_path.string());
    }
    ppm << "P6\n" << pmap.width() << ' ' << pmap.height() << "\n255\n";
    for (const auto& rec : pmap.records()) {
        auto rgb = hue_to_rgb(static_cast<double>(rec.source) / count);
        ppm.write(reinterpret_cast<const char*>(rgb.data()), 3);
    }

    auto csv_path = ppm_path;
    csv_path.replace_extension(".csv");
    std::ofstream csv(csv_path, std::ios::trunc);
    if (!csv) {
        throw IoError("cannot create " + csv_path.string());
    }
    csv << "row,col,source,src_row,src_col\n";
    for (std::size_t r = 0; r < pmap.height(); ++r) {
        for (std::size_t c = 0; c < pmap.width(); ++c) {
            const auto& rec = pmap.at(r, c);
            csv << r << ',' << c << ',' << rec.source << ',' << rec.src_row << ',' << rec.src_col << '\n';
        }
    }
    if (!ppm || !csv) {
        throw IoError("write failed for provenance " + ppm_path.string());
    }
}

/**
 * @brief Read a provenance sidecar CSV written by `render_provenance`.
 *
 * The scale column is not stored, so every record comes back with scale 0.
 */
inline ProvenanceMap read_provenance_csv(const std::filesystem::path& csv_path, std::size_t height, std::size_t width,
                                         std::size_t source_count) {
    std::ifstream in(csv_path);
    if (!in) {
        throw IoError("cannot open " + csv_path.string());
    }
    std::string line;
    if (!std::getline(in, line) || line != "row,col,source,src_row,src_col") {
        throw FormatError(csv_path.string() + ": unexpected provenance header");
    }
    ProvenanceMap pmap(height, width, source_count);
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) {
            continue;
        }
        long long v[5] = {};
        std::size_t pos = 0;
        for (int i = 0; i < 5; ++i) {
            std::size_t used = 0;
            try {
                v[i] = std::stoll(line.substr(pos), &used);
            } catch (const std::exception&) {
                throw FormatError(csv_path.string() + ": line " + std::to_string(line_no) + " is malformed");
            }
            pos += used;
            if (i < 4) {
                if (pos >= line.size() || line[pos] != ',') {
                    throw FormatError(csv_path.string() + ": line " + std::to_string(line_no) + " is malformed");
                }
                ++pos;
            }
        }
        if (v[0] < 0 || v[1] < 0 || static_cast<std::size_t>(v[0]) >= height || static_cast<std::size_t>(v[1]) >= width ||
            v[2] < 0 || static_cast<std::size_t>(v[2]) >= source_count) {
            throw FormatError(csv_path.string() + ": line " + std::to_string(line_no) + " is out of range");
        }
        pmap.at(static_cast<std::size_t>(v[0]), static_cast<std::size_t>(v[1])) = {
            static_cast<std::int32_t>(v[2]), static_cast<std::int32_t>(v[3]), static_cast<std::int32_t>(v[4]), 0};
    }
    if (!pmap.complete()) {
        throw IncompleteProvenanceError(csv_path.string() + ": not every cell is listed");
    }
    return pmap;
}

} // namespace latentpatch
