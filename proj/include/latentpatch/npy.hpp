#pragma once

#include "errors.hpp"
#include "grid.hpp"

#include <bit>
#include <cctype>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

/**
 * @file npy.hpp
 *
 * @brief Reader and writer for the subset of the NPY format the engine
 * exchanges: little-endian float32, C order, any rank.
 */

namespace latentpatch {

struct NpyArray {
    std::vector<std::size_t> shape;
    std::vector<float> data;

    std::size_t element_count() const {
        std::size_t n = 1;
        for (auto d : shape) {
            n *= d;
        }
        return n;
    }
};

namespace detail {

inline constexpr char npy_magic[] = "\x93NUMPY";
inline constexpr std::size_t npy_magic_len = 6;

inline std::uint32_t byteswap32(std::uint32_t v) {
    return ((v & 0xffu) << 24) | ((v & 0xff00u) << 8) | ((v >> 8) & 0xff00u) | (v >> 24);
}

inline void to_little_endian(std::vector<float>& values) {
    if constexpr (std::endian::native == std::endian::big) {
        for (auto& v : values) {
            v = std::bit_cast<float>(byteswap32(std::bit_cast<std::uint32_t>(v)));
        }
    }
}

/// Minimal scanner for the Python dict literal stored in an NPY header.
class HeaderScanner {
public:
    explicit HeaderScanner(std::string_view text) : text_(text) {}

    void skip_ws() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) {
            ++pos_;
        }
    }

    bool consume(char c) {
        skip_ws();
        if (pos_ < text_.size() && text_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    void expect(char c, const std::string& field) {
        if (!consume(c)) {
            throw FormatError("malformed NPY header near field '" + field + "': expected '" + std::string(1, c) + "'");
        }
    }

    std::string quoted(const std::string& field) {
        skip_ws();
        if (pos_ >= text_.size() || (text_[pos_] != '\'' && text_[pos_] != '"')) {
            throw FormatError("malformed NPY header: field '" + field + "' is not a quoted string");
        }
        char quote = text_[pos_++];
        auto end = text_.find(quote, pos_);
        if (end == std::string_view::npos) {
            throw FormatError("malformed NPY header: unterminated string in field '" + field + "'");
        }
        std::string value(text_.substr(pos_, end - pos_));
        pos_ = end + 1;
        return value;
    }

    std::string word() {
        skip_ws();
        auto start = pos_;
        while (pos_ < text_.size() && std::isalnum(static_cast<unsigned char>(text_[pos_]))) {
            ++pos_;
        }
        return std::string(text_.substr(start, pos_ - start));
    }

    std::vector<std::size_t> shape_tuple() {
        expect('(', "shape");
        std::vector<std::size_t> dims;
        while (!consume(')')) {
            auto token = word();
            if (token.empty() || !std::all_of(token.begin(), token.end(), [](char ch) { return std::isdigit(static_cast<unsigned char>(ch)); })) {
                throw FormatError("malformed NPY header: field 'shape' has non-integer entry '" + token + "'");
            }
            dims.push_back(static_cast<std::size_t>(std::stoull(token)));
            if (!consume(',')) {
                expect(')', "shape");
                break;
            }
        }
        return dims;
    }

private:
    std::string_view text_;
    std::size_t pos_ = 0;
};

inline std::string shape_literal(const std::vector<std::size_t>& shape) {
    std::string out = "(";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i > 0) {
            out += ", ";
        }
        out += std::to_string(shape[i]);
    }
    if (shape.size() == 1) {
        out += ",";
    }
    out += ")";
    return out;
}

} // namespace detail

inline NpyArray parse_npy(std::istream& in, const std::string& origin = "<stream>") {
    char magic[detail::npy_magic_len];
    if (!in.read(magic, detail::npy_magic_len) || std::memcmp(magic, detail::npy_magic, detail::npy_magic_len) != 0) {
        throw FormatError(origin + ": missing NPY magic string");
    }
    unsigned char version[2];
    if (!in.read(reinterpret_cast<char*>(version), 2)) {
        throw FormatError(origin + ": truncated NPY version field");
    }

    std::size_t header_len = 0;
    if (version[0] == 1) {
        unsigned char len[2];
        if (!in.read(reinterpret_cast<char*>(len), 2)) {
            throw FormatError(origin + ": truncated NPY header length");
        }
        header_len = len[0] | (static_cast<std::size_t>(len[1]) << 8);
    } else if (version[0] == 2 || version[0] == 3) {
        unsigned char len[4];
        if (!in.read(reinterpret_cast<char*>(len), 4)) {
            throw FormatError(origin + ": truncated NPY header length");
        }
        header_len = len[0] | (static_cast<std::size_t>(len[1]) << 8) | (static_cast<std::size_t>(len[2]) << 16) |
                     (static_cast<std::size_t>(len[3]) << 24);
    } else {
        throw FormatError(origin + ": unsupported NPY version " + std::to_string(version[0]) + "." +
                          std::to_string(version[1]));
    }

    std::string header(header_len, '\0');
    if (!in.read(header.data(), static_cast<std::streamsize>(header_len))) {
        throw FormatError(origin + ": truncated NPY header");
    }

    detail::HeaderScanner scan(header);
    std::string descr;
    bool have_descr = false;
    bool have_order = false;
    bool fortran = false;
    std::vector<std::size_t> shape;
    bool have_shape = false;

    scan.expect('{', "dict");
    while (!scan.consume('}')) {
        auto key = scan.quoted("key");
        scan.expect(':', key);
        if (key == "descr") {
            descr = scan.quoted("descr");
            have_descr = true;
        } else if (key == "fortran_order") {
            auto value = scan.word();
            if (value != "True" && value != "False") {
                throw FormatError(origin + ": malformed NPY header: field 'fortran_order' must be True or False");
            }
            fortran = value == "True";
            have_order = true;
        } else if (key == "shape") {
            shape = scan.shape_tuple();
            have_shape = true;
        } else {
            throw FormatError(origin + ": malformed NPY header: unexpected field '" + key + "'");
        }
        if (!scan.consume(',')) {
            scan.expect('}', key);
            break;
        }
    }
    if (!have_descr) {
        throw FormatError(origin + ": malformed NPY header: missing field 'descr'");
    }
    if (!have_order) {
        throw FormatError(origin + ": malformed NPY header: missing field 'fortran_order'");
    }
    if (!have_shape) {
        throw FormatError(origin + ": malformed NPY header: missing field 'shape'");
    }
    if (descr != "<f4") {
        throw UnsupportedDtypeError(origin + ": unsupported dtype '" + descr + "', expected '<f4'");
    }
    if (fortran) {
        throw OrderError(origin + ": Fortran-ordered arrays are not supported");
    }

    NpyArray array{std::move(shape), {}};
    array.data.resize(array.element_count());
    const auto bytes = static_cast<std::streamsize>(array.data.size() * sizeof(float));
    if (!in.read(reinterpret_cast<char*>(array.data.data()), bytes)) {
        throw FormatError(origin + ": NPY payload shorter than shape " + detail::shape_literal(array.shape) + " requires");
    }
    if (in.peek() != std::char_traits<char>::eof()) {
        throw FormatError(origin + ": trailing bytes after NPY payload");
    }
    detail::to_little_endian(array.data);
    return array;
}

/// Header bytes laid out exactly as numpy.save writes a version 1.0 file.
inline std::string npy_header(const std::vector<std::size_t>& shape) {
    std::string dict = "{'descr': '<f4', 'fortran_order': False, 'shape': " + detail::shape_literal(shape) + ", }";
    const std::size_t preamble = detail::npy_magic_len + 2 + 2;
    std::size_t total = preamble + dict.size() + 1;
    std::size_t padded = (total + 63) / 64 * 64;
    dict.append(padded - total, ' ');
    dict.push_back('\n');
    if (dict.size() > 0xffff) {
        throw ParameterError("NPY header too long for version 1.0");
    }

    std::string out(detail::npy_magic, detail::npy_magic_len);
    out.push_back('\x01');
    out.push_back('\x00');
    out.push_back(static_cast<char>(dict.size() & 0xff));
    out.push_back(static_cast<char>(dict.size() >> 8));
    out += dict;
    return out;
}

inline void write_npy(std::ostream& out, const NpyArray& array) {
    if (array.element_count() != array.data.size()) {
        throw ShapeError("NPY data length does not match shape " + detail::shape_literal(array.shape));
    }
    auto header = npy_header(array.shape);
    out.write(header.data(), static_cast<std::streamsize>(header.size()));
    if constexpr (std::endian::native == std::endian::big) {
        auto copy = array.data;
        detail::to_little_endian(copy);
        out.write(reinterpret_cast<const char*>(copy.data()), static_cast<std::streamsize>(copy.size() * sizeof(float)));
    } else {
        out.write(reinterpret_cast<const char*>(array.data.data()),
                  static_cast<std::streamsize>(array.data.size() * sizeof(float)));
    }
}

inline NpyArray read_npy_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    return parse_npy(in, path.string());
}

inline void write_npy_file(const std::filesystem::path& path, const NpyArray& array) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot create " + path.string());
    }
    write_npy(out, array);
    if (!out) {
        throw IoError("write failed for " + path.string());
    }
}

/// Split a rank-3 (H,W,C) or rank-4 (B,H,W,C) array into grids.
inline std::vector<ChannelGrid> grids_from_array(const NpyArray& array, const std::string& origin = "<array>") {
    std::size_t batch = 1;
    std::size_t base = 0;
    if (array.shape.size() == 4) {
        batch = array.shape[0];
        base = 1;
    } else if (array.shape.size() != 3) {
        throw FormatError(origin + ": field 'shape' must be (H,W,C) or (B,H,W,C), got " +
                          detail::shape_literal(array.shape));
    }
    const std::size_t h = array.shape[base];
    const std::size_t w = array.shape[base + 1];
    const std::size_t c = array.shape[base + 2];
    if (batch == 0 || h == 0 || w == 0 || c == 0) {
        throw FormatError(origin + ": field 'shape' has a zero extent " + detail::shape_literal(array.shape));
    }

    const std::size_t per_grid = h * w * c;
    std::vector<ChannelGrid> grids;
    grids.reserve(batch);
    for (std::size_t b = 0; b < batch; ++b) {
        auto first = array.data.begin() + static_cast<std::ptrdiff_t>(b * per_grid);
        ChannelGrid grid(h, w, c, std::vector<float>(first, first + static_cast<std::ptrdiff_t>(per_grid)));
        if (!grid.all_finite()) {
            throw FormatError(origin + ": grid " + std::to_string(b) + " contains non-finite values");
        }
        grids.push_back(std::move(grid));
    }
    return grids;
}

inline NpyArray array_from_grids(const std::vector<ChannelGrid>& grids) {
    if (grids.empty()) {
        throw EmptyInputError("cannot save an empty list of grids");
    }
    const auto& first = grids.front();
    NpyArray array{{grids.size(), first.height(), first.width(), first.channels()}, {}};
    array.data.reserve(array.element_count());
    for (const auto& g : grids) {
        if (!g.same_shape(first)) {
            throw ShapeError("all grids must share a shape; got " + g.shape_string() + " and " + first.shape_string());
        }
        array.data.insert(array.data.end(), g.data().begin(), g.data().end());
    }
    return array;
}

inline std::vector<ChannelGrid> load_grids(const std::filesystem::path& path) {
    return grids_from_array(read_npy_file(path), path.string());
}

inline void save_grids(const std::vector<ChannelGrid>& grids, const std::filesystem::path& path) {
    write_npy_file(path, array_from_grids(grids));
}

} // namespace latentpatch
