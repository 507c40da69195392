#pragma once

#include "errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

/**
 * @file grid.hpp
 *
 * @brief The H x W x C float tensor every other module works on, plus
 * interpolation and rectangular region copies.
 */

namespace latentpatch {

struct Cell {
    std::size_t row = 0;
    std::size_t col = 0;

    friend bool operator==(const Cell&, const Cell&) = default;
};

/**
 * @brief Row-major, channel-innermost grid of 32-bit floats.
 *
 * Element (r, c, k) lives at `(r * width + c) * channels + k`, so each cell's
 * channel vector is contiguous. Dimensions are fixed at construction.
 */
class ChannelGrid {
public:
    ChannelGrid() = default;

    ChannelGrid(std::size_t height, std::size_t width, std::size_t channels, float fill = 0.0f)
        : height_(height), width_(width), channels_(channels) {
        check_dims();
        data_.assign(height * width * channels, fill);
    }

    ChannelGrid(std::size_t height, std::size_t width, std::size_t channels, std::vector<float> data)
        : height_(height), width_(width), channels_(channels), data_(std::move(data)) {
        check_dims();
        if (data_.size() != height * width * channels) {
            throw ShapeError("grid data length " + std::to_string(data_.size()) + " does not match " +
                             std::to_string(height) + "x" + std::to_string(width) + "x" + std::to_string(channels));
        }
    }

    std::size_t height() const noexcept { return height_; }
    std::size_t width() const noexcept { return width_; }
    std::size_t channels() const noexcept { return channels_; }
    std::size_t cell_count() const noexcept { return height_ * width_; }
    bool empty() const noexcept { return data_.empty(); }

    std::span<float> data() noexcept { return data_; }
    std::span<const float> data() const noexcept { return data_; }

    std::span<float> cell(std::size_t row, std::size_t col) noexcept {
        return {data_.data() + offset(row, col), channels_};
    }
    std::span<const float> cell(std::size_t row, std::size_t col) const noexcept {
        return {data_.data() + offset(row, col), channels_};
    }

    float& at(std::size_t row, std::size_t col, std::size_t ch) noexcept { return data_[offset(row, col) + ch]; }
    float at(std::size_t row, std::size_t col, std::size_t ch) const noexcept { return data_[offset(row, col) + ch]; }

    bool same_shape(const ChannelGrid& other) const noexcept {
        return height_ == other.height_ && width_ == other.width_ && channels_ == other.channels_;
    }

    bool all_finite() const noexcept {
        return std::all_of(data_.begin(), data_.end(), [](float v) { return std::isfinite(v); });
    }

    std::string shape_string() const {
        return std::to_string(height_) + "x" + std::to_string(width_) + "x" + std::to_string(channels_);
    }

    friend bool operator==(const ChannelGrid&, const ChannelGrid&) = default;

private:
    std::size_t offset(std::size_t row, std::size_t col) const noexcept { return (row * width_ + col) * channels_; }

    void check_dims() const {
        if (height_ == 0 || width_ == 0 || channels_ == 0) {
            throw ShapeError("grid dimensions must be positive, got " + shape_string());
        }
    }

    std::size_t height_ = 0;
    std::size_t width_ = 0;
    std::size_t channels_ = 0;
    std::vector<float> data_;
};

/// Axis-aligned cell rectangle. Zero extents are rejected by `check_rect`.
struct Rect {
    std::size_t row0 = 0;
    std::size_t col0 = 0;
    std::size_t rows = 0;
    std::size_t cols = 0;

    friend bool operator==(const Rect&, const Rect&) = default;
};

inline void check_rect(const Rect& rect, std::size_t height, std::size_t width, const char* what = "region") {
    if (rect.rows == 0 || rect.cols == 0) {
        throw BoundsError(std::string(what) + " must have nonzero extent");
    }
    if (rect.row0 + rect.rows > height || rect.col0 + rect.cols > width) {
        throw BoundsError(std::string(what) + " [" + std::to_string(rect.row0) + "+" + std::to_string(rect.rows) + ", " +
                          std::to_string(rect.col0) + "+" + std::to_string(rect.cols) + "] exceeds grid " +
                          std::to_string(height) + "x" + std::to_string(width));
    }
}

/**
 * @brief Bilinear resize with the align-corners convention.
 *
 * Output index i samples input coordinate i * (in - 1) / (out - 1), so corner
 * cells map onto corner cells and an unchanged size reproduces the input
 * bit-exactly. A target extent of 1 samples coordinate 0.
 */
inline ChannelGrid bilinear_resize(const ChannelGrid& grid, std::size_t new_h, std::size_t new_w) {
    if (new_h == 0 || new_w == 0) {
        throw ParameterError("resize target must be at least 1x1");
    }
    if (new_h == grid.height() && new_w == grid.width()) {
        return grid;
    }

    struct Tap {
        std::size_t lo;
        std::size_t hi;
        double t;
    };
    auto taps = [](std::size_t in, std::size_t out) {
        std::vector<Tap> result(out);
        for (std::size_t i = 0; i < out; ++i) {
            double pos = out == 1 ? 0.0 : static_cast<double>(i) * static_cast<double>(in - 1) / static_cast<double>(out - 1);
            auto lo = std::min(static_cast<std::size_t>(std::floor(pos)), in - 1);
            auto hi = std::min(lo + 1, in - 1);
            result[i] = {lo, hi, pos - static_cast<double>(lo)};
        }
        return result;
    };

    const auto row_taps = taps(grid.height(), new_h);
    const auto col_taps = taps(grid.width(), new_w);
    const std::size_t channels = grid.channels();
    ChannelGrid out(new_h, new_w, channels);

    for (std::size_t r = 0; r < new_h; ++r) {
        const auto& rt = row_taps[r];
        for (std::size_t c = 0; c < new_w; ++c) {
            const auto& ct = col_taps[c];
            auto a = grid.cell(rt.lo, ct.lo);
            auto b = grid.cell(rt.lo, ct.hi);
            auto d = grid.cell(rt.hi, ct.lo);
            auto e = grid.cell(rt.hi, ct.hi);
            auto dst = out.cell(r, c);
            for (std::size_t k = 0; k < channels; ++k) {
                double top = std::lerp(static_cast<double>(a[k]), static_cast<double>(b[k]), ct.t);
                double bottom = std::lerp(static_cast<double>(d[k]), static_cast<double>(e[k]), ct.t);
                dst[k] = static_cast<float>(std::lerp(top, bottom, rt.t));
            }
        }
    }
    return out;
}

/// Copy `src_rect` of `src` into a copy of `dst` with its top-left at `dst_origin`.
inline ChannelGrid copy_region(const ChannelGrid& dst, const ChannelGrid& src, const Rect& src_rect, Cell dst_origin) {
    if (dst.channels() != src.channels()) {
        throw ShapeError("copy_region channel mismatch: " + std::to_string(src.channels()) + " vs " +
                         std::to_string(dst.channels()));
    }
    check_rect(src_rect, src.height(), src.width(), "source region");
    check_rect({dst_origin.row, dst_origin.col, src_rect.rows, src_rect.cols}, dst.height(), dst.width(),
               "destination region");

    ChannelGrid out = dst;
    for (std::size_t r = 0; r < src_rect.rows; ++r) {
        for (std::size_t c = 0; c < src_rect.cols; ++c) {
            auto from = src.cell(src_rect.row0 + r, src_rect.col0 + c);
            std::copy(from.begin(), from.end(), out.cell(dst_origin.row + r, dst_origin.col + c).begin());
        }
    }
    return out;
}

} // namespace latentpatch
