#pragma once

#include "errors.hpp"
#include "grid.hpp"
#include "npy.hpp"

#include <Eigen/Dense>

#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <vector>

/**
 * @file pca.hpp
 *
 * @brief Truncated PCA over the channel vectors of a set of grids.
 *
 * Every cell of every grid is one sample. The model projects an L-channel
 * vector c to basis * (c - mean) and reconstructs r-channel vectors as
 * basis^T * z + mean. With whitening enabled, component j is additionally
 * divided by sqrt(eigenvalue_j) on projection and multiplied back on
 * reconstruction.
 */

namespace latentpatch {

struct PcaModel {
    std::size_t input_channels = 0;  // L
    std::size_t components = 0;      // r
    bool whiten = false;
    std::vector<float> mean;         // L
    std::vector<float> basis;        // r x L, row-major, orthonormal rows
    std::vector<float> eigenvalues;  // r, descending
    double total_variance = 0.0;     // trace of the sample covariance

    std::span<const float> basis_row(std::size_t j) const {
        return {basis.data() + j * input_channels, input_channels};
    }

    double retained_variance_fraction() const {
        if (total_variance <= 0.0) {
            return 1.0;
        }
        double kept = std::accumulate(eigenvalues.begin(), eigenvalues.end(), 0.0);
        return kept / total_variance;
    }

    friend bool operator==(const PcaModel&, const PcaModel&) = default;
};

struct PcaOptions {
    bool whiten = false;
    /// Eigenvalues below this fraction of the largest one are treated as zero.
    double relative_floor = 1e-10;
};

inline PcaModel fit_pca(const std::vector<ChannelGrid>& grids, std::size_t r, const PcaOptions& options = {}) {
    if (grids.empty()) {
        throw InsufficientDataError("PCA needs at least 2 samples, got no grids");
    }
    const std::size_t L = grids.front().channels();
    if (r == 0 || r > L) {
        throw ParameterError("PCA component count must be in [1, " + std::to_string(L) + "], got " + std::to_string(r));
    }
    std::size_t n = 0;
    for (const auto& g : grids) {
        if (g.channels() != L) {
            throw ShapeError("PCA inputs must share channel count " + std::to_string(L) + ", got " +
                             std::to_string(g.channels()));
        }
        n += g.cell_count();
    }
    if (n < 2) {
        throw InsufficientDataError("PCA needs at least 2 samples, got " + std::to_string(n));
    }

    using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    RowMatrix samples(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(L));
    Eigen::Index row = 0;
    for (const auto& g : grids) {
        auto values = g.data();
        for (std::size_t cell = 0; cell < g.cell_count(); ++cell, ++row) {
            for (std::size_t k = 0; k < L; ++k) {
                samples(row, static_cast<Eigen::Index>(k)) = values[cell * L + k];
            }
        }
    }

    Eigen::RowVectorXd mean = samples.colwise().mean();
    samples.rowwise() -= mean;
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(L), static_cast<Eigen::Index>(L));
    cov.selfadjointView<Eigen::Lower>().rankUpdate(samples.transpose(), 1.0 / static_cast<double>(n - 1));
    cov = cov.selfadjointView<Eigen::Lower>();

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
    if (solver.info() != Eigen::Success) {
        throw InvariantError("covariance eigendecomposition did not converge");
    }
    const auto& values = solver.eigenvalues();   // ascending
    const auto& vectors = solver.eigenvectors(); // columns

    const double lambda_max = std::max(values(static_cast<Eigen::Index>(L) - 1), 0.0);
    auto clamp = [&](double v) { return (v < options.relative_floor * lambda_max || v <= 0.0) ? 0.0 : v; };

    PcaModel model;
    model.input_channels = L;
    model.whiten = options.whiten;
    model.total_variance = cov.trace();
    model.mean.assign(L, 0.0f);
    for (std::size_t k = 0; k < L; ++k) {
        model.mean[k] = static_cast<float>(mean(static_cast<Eigen::Index>(k)));
    }

    for (std::size_t j = 0; j < r; ++j) {
        const auto col = static_cast<Eigen::Index>(L - 1 - j);
        const double lambda = clamp(values(col));
        if (options.whiten && lambda == 0.0) {
            break; // whitening cannot invert a null direction; remaining ones are null too
        }
        Eigen::VectorXd v = vectors.col(col);
        Eigen::Index pivot = 0;
        v.cwiseAbs().maxCoeff(&pivot);
        if (v(pivot) < 0) {
            v = -v;
        }
        for (std::size_t k = 0; k < L; ++k) {
            model.basis.push_back(static_cast<float>(v(static_cast<Eigen::Index>(k))));
        }
        model.eigenvalues.push_back(static_cast<float>(lambda));
    }
    model.components = model.eigenvalues.size();
    if (model.components == 0) {
        throw InsufficientDataError("whitened PCA has no components with nonzero variance");
    }
    return model;
}

namespace detail {

inline void check_model(const PcaModel& model) {
    if (model.components == 0 || model.input_channels == 0 || model.mean.size() != model.input_channels ||
        model.basis.size() != model.components * model.input_channels || model.eigenvalues.size() != model.components) {
        throw InvariantError("inconsistent PCA model dimensions");
    }
}

} // namespace detail

/// Cell-wise basis * (c - mean), optionally whitened.
inline ChannelGrid project(const PcaModel& model, const ChannelGrid& grid) {
    detail::check_model(model);
    if (grid.channels() != model.input_channels) {
        throw ShapeError("project expects " + std::to_string(model.input_channels) + " channels, got " +
                         std::to_string(grid.channels()));
    }
    const std::size_t L = model.input_channels;
    const std::size_t r = model.components;
    std::vector<double> scale(r, 1.0);
    if (model.whiten) {
        for (std::size_t j = 0; j < r; ++j) {
            scale[j] = 1.0 / std::sqrt(static_cast<double>(model.eigenvalues[j]));
        }
    }

    ChannelGrid out(grid.height(), grid.width(), r);
    std::vector<double> centered(L);
    for (std::size_t row = 0; row < grid.height(); ++row) {
        for (std::size_t col = 0; col < grid.width(); ++col) {
            auto in = grid.cell(row, col);
            for (std::size_t k = 0; k < L; ++k) {
                centered[k] = static_cast<double>(in[k]) - static_cast<double>(model.mean[k]);
            }
            auto dst = out.cell(row, col);
            for (std::size_t j = 0; j < r; ++j) {
                auto b = model.basis_row(j);
                double acc = 0.0;
                for (std::size_t k = 0; k < L; ++k) {
                    acc += static_cast<double>(b[k]) * centered[k];
                }
                dst[j] = static_cast<float>(acc * scale[j]);
            }
        }
    }
    return out;
}

/// Cell-wise basis^T * z + mean, undoing whitening if enabled.
inline ChannelGrid reconstruct(const PcaModel& model, const ChannelGrid& grid) {
    detail::check_model(model);
    if (grid.channels() != model.components) {
        throw ShapeError("reconstruct expects " + std::to_string(model.components) + " channels, got " +
                         std::to_string(grid.channels()));
    }
    const std::size_t L = model.input_channels;
    const std::size_t r = model.components;
    std::vector<double> scale(r, 1.0);
    if (model.whiten) {
        for (std::size_t j = 0; j < r; ++j) {
            scale[j] = std::sqrt(static_cast<double>(model.eigenvalues[j]));
        }
    }

    ChannelGrid out(grid.height(), grid.width(), L);
    std::vector<double> acc(L);
    for (std::size_t row = 0; row < grid.height(); ++row) {
        for (std::size_t col = 0; col < grid.width(); ++col) {
            auto in = grid.cell(row, col);
            for (std::size_t k = 0; k < L; ++k) {
                acc[k] = model.mean[k];
            }
            for (std::size_t j = 0; j < r; ++j) {
                const double coeff = static_cast<double>(in[j]) * scale[j];
                auto b = model.basis_row(j);
                for (std::size_t k = 0; k < L; ++k) {
                    acc[k] += coeff * static_cast<double>(b[k]);
                }
            }
            auto dst = out.cell(row, col);
            for (std::size_t k = 0; k < L; ++k) {
                dst[k] = static_cast<float>(acc[k]);
            }
        }
    }
    return out;
}

// Persistence: a directory holding mean.npy (L,), basis.npy (r, L),
// eigenvalues.npy (r,) and a key=value file pca.txt.

inline void save_pca(const PcaModel& model, const std::filesystem::path& dir) {
    detail::check_model(model);
    std::filesystem::create_directories(dir);
    write_npy_file(dir / "mean.npy", {{model.input_channels}, model.mean});
    write_npy_file(dir / "basis.npy", {{model.components, model.input_channels}, model.basis});
    write_npy_file(dir / "eigenvalues.npy", {{model.components}, model.eigenvalues});

    std::ofstream meta(dir / "pca.txt", std::ios::trunc);
    if (!meta) {
        throw IoError("cannot create " + (dir / "pca.txt").string());
    }
    char total[64];
    std::snprintf(total, sizeof total, "%.17g", model.total_variance);
    meta << "L=" << model.input_channels << "\nr=" << model.components << "\nwhiten=" << (model.whiten ? 1 : 0)
         << "\ntotal_variance=" << total << "\n";
}

inline PcaModel load_pca(const std::filesystem::path& dir) {
    std::ifstream meta(dir / "pca.txt");
    if (!meta) {
        throw IoError("cannot open PCA manifest " + (dir / "pca.txt").string());
    }
    std::map<std::string, std::string> kv;
    for (std::string line; std::getline(meta, line);) {
        if (line.empty()) {
            continue;
        }
        auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw FormatError("malformed PCA manifest line '" + line + "'");
        }
        kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    auto field = [&](const std::string& key) -> const std::string& {
        auto it = kv.find(key);
        if (it == kv.end()) {
            throw FormatError("PCA manifest is missing field '" + key + "'");
        }
        return it->second;
    };
    auto count = [&](const std::string& key) {
        const auto& text = field(key);
        std::size_t value = 0;
        auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
        if (ec != std::errc{} || ptr != text.data() + text.size()) {
            throw FormatError("PCA manifest field '" + key + "' is not a count");
        }
        return value;
    };

    PcaModel model;
    model.input_channels = count("L");
    model.components = count("r");
    model.whiten = count("whiten") != 0;
    model.total_variance = std::stod(field("total_variance"));

    auto mean = read_npy_file(dir / "mean.npy");
    auto basis = read_npy_file(dir / "basis.npy");
    auto eig = read_npy_file(dir / "eigenvalues.npy");
    if (mean.shape != std::vector<std::size_t>{model.input_channels} ||
        basis.shape != std::vector<std::size_t>{model.components, model.input_channels} ||
        eig.shape != std::vector<std::size_t>{model.components}) {
        throw ShapeError("PCA bundle arrays do not match manifest L=" + std::to_string(model.input_channels) +
                         " r=" + std::to_string(model.components));
    }
    model.mean = std::move(mean.data);
    model.basis = std::move(basis.data);
    model.eigenvalues = std::move(eig.data);
    return model;
}

} // namespace latentpatch
