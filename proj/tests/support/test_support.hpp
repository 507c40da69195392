#pragma once

#include <latentpatch/grid.hpp>

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>

namespace lp_test {

using latentpatch::ChannelGrid;

inline ChannelGrid random_grid(std::mt19937_64& gen, std::size_t h, std::size_t w, std::size_t c, float lo = -1.0f,
                               float hi = 1.0f) {
    std::uniform_real_distribution<float> dist(lo, hi);
    ChannelGrid g(h, w, c);
    for (auto& v : g.data()) {
        v = dist(gen);
    }
    return g;
}

/// Grid whose entry (r, c, k) is r * 1000 + c * 10 + k, handy for index checks.
inline ChannelGrid indexed_grid(std::size_t h, std::size_t w, std::size_t c) {
    ChannelGrid g(h, w, c);
    for (std::size_t r = 0; r < h; ++r) {
        for (std::size_t col = 0; col < w; ++col) {
            for (std::size_t k = 0; k < c; ++k) {
                g.at(r, col, k) = static_cast<float>(r * 1000 + col * 10 + k);
            }
        }
    }
    return g;
}

inline bool bitwise_equal(const ChannelGrid& a, const ChannelGrid& b) {
    return a.same_shape(b) && std::memcmp(a.data().data(), b.data().data(), a.data().size() * sizeof(float)) == 0;
}

/**
 * Registered-face-like corpus: a smooth shared template plus per-source smooth
 * deformations and a little noise, so sources are similar but distinct.
 */
inline std::vector<ChannelGrid> synthetic_sources(std::size_t count, std::size_t side, std::size_t channels,
                                                  std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> phase(channels), freq_r(channels), freq_c(channels);
    for (std::size_t k = 0; k < channels; ++k) {
        phase[k] = normal(gen);
        freq_r[k] = 0.2 + 0.1 * std::abs(normal(gen));
        freq_c[k] = 0.2 + 0.1 * std::abs(normal(gen));
    }
    const std::size_t modes = 6;
    std::vector<ChannelGrid> out;
    for (std::size_t b = 0; b < count; ++b) {
        std::vector<double> amp(modes * channels);
        for (auto& a : amp) {
            a = 0.6 * normal(gen);
        }
        ChannelGrid g(side, side, channels);
        for (std::size_t r = 0; r < side; ++r) {
            for (std::size_t c = 0; c < side; ++c) {
                for (std::size_t k = 0; k < channels; ++k) {
                    double v = std::sin(freq_r[k] * static_cast<double>(r) + phase[k]) *
                               std::cos(freq_c[k] * static_cast<double>(c) - phase[k]);
                    for (std::size_t m = 0; m < modes; ++m) {
                        v += amp[m * channels + k] * std::cos(0.35 * static_cast<double>(m + 1) * static_cast<double>(r) +
                                                              0.27 * static_cast<double>(m) * static_cast<double>(c));
                    }
                    v += 0.05 * normal(gen);
                    g.at(r, c, k) = static_cast<float>(v);
                }
            }
        }
        out.push_back(std::move(g));
    }
    return out;
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("latentpatch_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

inline int run_command(const std::string& cmd) {
    int status = std::system(cmd.c_str());
    if (status == -1) {
        return -1;
    }
    return WEXITSTATUS(status);
}

} // namespace lp_test
