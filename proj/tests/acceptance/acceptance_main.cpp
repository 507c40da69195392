// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <latentpatch/latentpatch.hpp>

#include "../support/npy_interop.hpp"
#include "../support/pca_oracle.hpp"
#include "../support/test_support.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

using namespace latentpatch;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

SourceSet corpus(std::size_t count, std::size_t channels, const SynthesisParams& p, std::uint64_t seed,
                 std::optional<std::size_t> components = std::nullopt) {
    auto full = lp_test::synthetic_sources(count, p.end_size, channels, seed);
    std::optional<PcaModel> model;
    if (components) {
        model = fit_pca(full, *components);
    }
    return make_source_set(std::move(full), model, scale_schedule(p));
}

// ---------------------------------------------------------------- criteria

Outcome copy_exactness() {
    const auto t0 = Clock::now();
    std::map<std::tuple<std::size_t, std::size_t, std::size_t>, SourceSet> cache;
    const std::size_t Bs[] = {2, 16}, omegas[] = {2, 4, 6}, ks[] = {1, 3}, Ss[] = {1, 5};
    std::size_t runs = 0;
    std::size_t failures = 0;
    for (std::size_t g = 0; g < 200; ++g) {
        std::size_t c = g % 24;
        SynthesisParams p;
        p.omega = omegas[c % 3];
        p.k = ks[(c / 3) % 2];
        p.scales = Ss[(c / 6) % 2];
        const std::size_t B = Bs[(c / 12) % 2];
        p.seed = 1000 + g;
        auto key = std::tuple{B, p.scales, p.omega};
        auto it = cache.find(key);
        if (it == cache.end()) {
            it = cache.emplace(key, corpus(B, 32, p, 17 + B, 8)).first;
        }
        const auto out = generate_one(it->second, p, g);
        const auto stats = copy_statistics(out.grid, out.provenance, it->second);
        failures += stats.exact_match_fraction != 1.0 || !out.provenance.complete();
        ++runs;
    }
    const double secs = seconds_since(t0);
    return {failures == 0 && runs == 200 && secs < 30.0,
            fmt("%zu/%zu outputs with exact_match_fraction = 1.0 in %.2f s (limit 30 s)", runs - failures, runs, secs)};
}

Outcome knn_oracle() {
    std::mt19937_64 gen(4242);
    const auto t0 = Clock::now();
    std::size_t mismatches = 0;
    for (int t = 0; t < 1000; ++t) {
        const std::size_t omega = 1 + gen() % 6;
        const std::size_t r = 1 + gen() % 16;
        const std::size_t n = 1 + gen() % 256;
        const std::size_t k = 1 + gen() % 12;
        // coarse value grid so exact distance ties are common
        std::uniform_int_distribution<int> level(-2, 2);
        auto patch = [&] {
            ChannelGrid g(omega, omega, r);
            for (auto& v : g.data()) v = 0.5f * static_cast<float>(level(gen));
            return g;
        };
        CandidateSet cands;
        for (std::size_t i = 0; i < n; ++i) {
            cands.patches.push_back({(i > 0 && gen() % 5 == 0) ? cands.patches[gen() % i].values : patch(), {0, 0}, i, 0});
        }
        Patch q{patch(), {0, 0}, 0, 0};
        PatchMask mask{omega, std::vector<std::uint8_t>(omega * omega)};
        for (auto& f : mask.flags) f = gen() % 3 != 0;
        mask.flags[gen() % mask.flags.size()] = 1;

        std::vector<Neighbor> oracle;
        for (std::size_t i = 0; i < n; ++i) {
            double acc = 0.0;
            for (std::size_t a = 0; a < omega; ++a)
                for (std::size_t b = 0; b < omega; ++b) {
                    if (!mask.at(a, b)) continue;
                    for (std::size_t c = 0; c < r; ++c) {
                        const double d = double(q.values.at(a, b, c)) - double(cands.patches[i].values.at(a, b, c));
                        acc += d * d;
                    }
                }
            oracle.push_back({i, acc});
        }
        std::stable_sort(oracle.begin(), oracle.end(), [](auto& x, auto& y) { return x.distance < y.distance; });
        oracle.resize(std::min(k, n));
        // quarter-integer data: float accumulation is exact, so distances must agree bitwise
        mismatches += knn(q, cands, mask, k) != oracle;
    }
    const double secs = seconds_since(t0);
    return {mismatches == 0 && secs < 10.0,
            fmt("%zu/1000 instances differ from the exhaustive sort, %.2f s (limit 10 s)", mismatches, secs)};
}

Outcome pca_correctness() {
    std::mt19937_64 gen(77);
    double worst_eig = 0.0, worst_basis = 0.0, worst_span = 0.0, worst_z = 0.0, worst_idem = 0.0;
    for (int d = 0; d < 50; ++d) {
        const std::size_t L = 4 + gen() % 29;
        const std::size_t r = 1 + gen() % std::min<std::size_t>(L, 16);
        auto grids = lp_test::spectrum_dataset(gen, 2000, L);
        auto model = fit_pca(grids, r);
        auto oracle = lp_test::svd_oracle(grids);
        for (std::size_t j = 0; j < r; ++j) {
            const double lo = oracle.eigenvalues(static_cast<Eigen::Index>(j));
            worst_eig = std::max(worst_eig, std::abs(model.eigenvalues[j] - lo) / lo);
            for (std::size_t k = 0; k < L; ++k)
                worst_basis = std::max(worst_basis, std::abs(model.basis_row(j)[k] -
                                                             oracle.basis(static_cast<Eigen::Index>(j),
                                                                          static_cast<Eigen::Index>(k))));
        }
        // z -> reconstruct -> project is the identity on coefficients; span data round-trips
        auto z = lp_test::random_grid(gen, 3, 3, r, -2.0f, 2.0f);
        auto x = reconstruct(model, z);
        auto z2 = project(model, x);
        auto x2 = reconstruct(model, z2);
        double scale_x = 0.0;
        for (auto v : x.data()) scale_x = std::max(scale_x, double(std::abs(v)));
        for (std::size_t i = 0; i < z.data().size(); ++i)
            worst_z = std::max(worst_z, std::abs(double(z.data()[i]) - z2.data()[i]) / 2.0);
        for (std::size_t i = 0; i < x.data().size(); ++i)
            worst_span = std::max(worst_span, std::abs(double(x.data()[i]) - x2.data()[i]) / scale_x);
        // reconstruct . project is idempotent on arbitrary data
        auto y = lp_test::random_grid(gen, 3, 3, L, -5.0f, 5.0f);
        auto p1 = reconstruct(model, project(model, y));
        auto p2 = reconstruct(model, project(model, p1));
        double scale_p = 0.0;
        for (auto v : p1.data()) scale_p = std::max(scale_p, double(std::abs(v)));
        for (std::size_t i = 0; i < p1.data().size(); ++i)
            worst_idem = std::max(worst_idem, std::abs(double(p1.data()[i]) - p2.data()[i]) / scale_p);
    }
    const bool ok = worst_eig <= 1e-5 && worst_basis <= 1e-5 && worst_span <= 1e-5 && worst_z <= 1e-5 &&
                    worst_idem <= 1e-5;
    return {ok, fmt("50 datasets: eig rel %.2e, basis %.2e, span round trip %.2e, coeff round trip %.2e, "
                    "idempotence %.2e (limit 1e-5)",
                    worst_eig, worst_basis, worst_span, worst_z, worst_idem)};
}

Outcome pca_speedup() {
    // same spatial patches in the full 256-channel space and after reduction to 16
    const std::size_t omega = 4, queries = 625, per_query = 16;
    auto full = lp_test::synthetic_sources(per_query, 16, 256, 5);
    auto model = fit_pca(full, 16);
    std::vector<ChannelGrid> reduced;
    for (const auto& g : full) reduced.push_back(project(model, g));

    auto build = [&](const std::vector<ChannelGrid>& grids, std::vector<Patch>& qs, std::vector<CandidateSet>& cs) {
        std::mt19937_64 gen(6);
        for (std::size_t q = 0; q < queries; ++q) {
            const Cell a{gen() % 13, gen() % 13};
            CandidateSet set{a, 0, {}};
            for (std::size_t s = 0; s < per_query; ++s) set.patches.push_back(extract_patch(grids[s], a, omega, s));
            cs.push_back(std::move(set));
            qs.push_back(extract_patch(grids[gen() % per_query], a, omega));
        }
    };
    std::vector<Patch> q256, q16;
    std::vector<CandidateSet> c256, c16;
    build(full, q256, c256);
    build(reduced, q16, c16);
    PatchMask mask = PatchMask::full(omega);
    mask.flags[15] = mask.flags[14] = mask.flags[11] = 0;

    auto time_runs = [&](const std::vector<Patch>& qs, const std::vector<CandidateSet>& cs) {
        std::vector<double> runs;
        std::size_t sink = 0;
        for (int rep = 0; rep < 5; ++rep) {
            const auto t0 = Clock::now();
            for (std::size_t i = 0; i < qs.size(); ++i) sink += knn(qs[i], cs[i], mask, per_query).front().index;
            runs.push_back(seconds_since(t0));
        }
        std::sort(runs.begin(), runs.end());
        volatile std::size_t keep = sink;
        (void)keep;
        return runs[2];
    };
    time_runs(q16, c16); // warm up
    const double t256 = time_runs(q256, c256);
    const double t16 = time_runs(q16, c16);
    const double speedup = t256 / t16;
    return {speedup >= 8.0, fmt("10000 masked distances: C=256 %.3f ms, C=16 %.3f ms, median speedup %.1fx (need 8x)",
                                t256 * 1e3, t16 * 1e3, speedup)};
}

Outcome throughput() {
    SynthesisParams p; // defaults: omega 4, k 3, S 5, 10 -> 16
    p.seed = 99;
    auto full = lp_test::synthetic_sources(16, 16, 256, 8);
    auto model = fit_pca(full, 16);
    const std::size_t jobs = std::max(1u, std::thread::hardware_concurrency());
    std::vector<double> times;
    for (int rep = 0; rep < 3; ++rep) {
        const auto t0 = Clock::now();
        auto sources = make_source_set(full, model, scale_schedule(p));
        auto out = generate(sources, p, 16, std::nullopt, jobs);
        times.push_back(seconds_since(t0));
        if (out.size() != 16) return {false, "wrong output count"};
    }
    std::sort(times.begin(), times.end());
    return {times[1] < 1.0, fmt("16 outputs, B=16, L=256, r=16, S=5: median %.3f s over 3 runs with %zu thread(s) "
                                "(limit 1 s)",
                                times[1], jobs)};
}

struct CliCase {
    std::string args;
};

Outcome determinism() {
    auto dir = lp_test::scratch_dir("acceptance_determinism");
    const auto cli = std::string(LP_CLI_PATH);
    auto full = lp_test::synthetic_sources(12, 16, 24, 31);
    save_grids(full, dir / "sources.npy");
    {
        std::ofstream csv(dir / "attr.csv");
        csv << "source,woman,blond\n";
        for (std::size_t s = 0; s < 12; ++s) csv << s << ',' << (s % 2) << ',' << (s % 3 == 0) << '\n';
    }
    std::mt19937_64 atoms_gen(3);
    auto atoms = lp_test::random_grid(atoms_gen, 1, 64, 24);
    write_npy_file(dir / "codebook.npy", {{64, 24}, {atoms.data().begin(), atoms.data().end()}});
    if (lp_test::run_command(cli + " fit-pca --sources " + (dir / "sources.npy").string() + " --r 8 --output " +
                             (dir / "pca").string() + " > /dev/null") != 0) {
        return {false, "could not fit the shared PCA model"};
    }

    std::mt19937_64 gen(2718);
    const std::string src = (dir / "sources.npy").string();
    std::size_t matched = 0;
    std::string failure;
    for (int m = 0; m < 20; ++m) {
        const auto tag = std::to_string(m);
        const auto out = (dir / ("out" + tag + ".npy")).string();
        std::ostringstream args;
        switch (m % 5) {
        case 0:
        case 1: {
            const std::size_t omega = 2 + gen() % 5;
            args << "generate --sources " << src << " --omega " << omega << " --k " << 1 + gen() % 4 << " --scales "
                 << 1 + gen() % 5 << " --seed " << gen() << " --count " << 2 + gen() % 4 << " --jitter " << gen() % 2
                 << " --output " << out << " --provenance " << (dir / ("prov" + tag)).string();
            if (gen() % 2) args << " --pca " << (dir / "pca").string();
            if (gen() % 2) args << " --stride " << 1 + gen() % omega;
            if (gen() % 3 == 0) args << " --attributes " << (dir / "attr.csv").string() << " --require woman=1";
            if (gen() % 4 == 0) args << " --codebook " << (dir / "codebook.npy").string();
            break;
        }
        case 2:
            if (gen() % 2) {
                args << "generate --sources " << src << " --baseline " << (gen() % 2 ? "cell" : "patch") << " --tile "
                     << 1 + gen() % 8 << " --seed " << gen() << " --count 3 --output " << out << " --provenance "
                     << (dir / ("prov" + tag)).string();
            } else {
                args << "generate --sources " << src << " --ref " << src << " --ref-index " << gen() % 12
                     << " --scales 1 --k " << 1 + gen() % 3 << " --seed " << gen() << " --count 2 --output " << out;
            }
            break;
        case 3:
            args << "edit --ref " << src << " --ref-index " << gen() % 12 << " --donor " << src << " --donor-index "
                 << gen() % 12 << " --edit " << gen() % 8 << ',' << gen() % 8 << ',' << 1 + gen() % 8 << ','
                 << 1 + gen() % 8 << " --edit 12,2,3,9 --output " << out;
            break;
        default:
            if (gen() % 2) {
                args << "fit-pca --sources " << src << " --r " << 1 + gen() % 24 << (gen() % 2 ? " --whiten" : "")
                     << " --output " << (dir / ("pca" + tag)).string();
            } else {
                args << "metrics diversity --generated " << src << " --source " << src << " --pairs "
                     << 1 + gen() % 1000 << " --seed " << gen() << " --distance "
                     << (gen() % 2 ? "latent-l2" : "pixel-l2") << " --output " << out << ".json --manifest " << out
                     << ".json.manifest.json";
            }
            break;
        }
        if (lp_test::run_command(cli + " " + args.str() + " > /dev/null 2> " + (dir / "err.txt").string()) != 0) {
            failure = "command failed: " + args.str() + " : " + lp_test::read_file(dir / "err.txt");
            break;
        }
        // locate the manifest the run produced
        const std::string first = args.str().substr(0, args.str().find(' '));
        std::string manifest;
        if (first == "fit-pca") {
            manifest = (dir / ("pca" + tag)).string() + ".manifest.json";
        } else if (first == "metrics") {
            manifest = out + ".json.manifest.json";
        } else {
            manifest = out + ".manifest.json";
        }
        auto j = nlohmann::json::parse(lp_test::read_file(manifest));
        std::map<std::string, std::string> bytes;
        for (const auto& f : j["outputs"]) bytes[f.get<std::string>()] = lp_test::read_file(f.get<std::string>());
        for (const auto& [f, _] : bytes) fs::remove(f);
        bytes[manifest] = lp_test::read_file(manifest); // rewritten by the replay, compared too
        if (lp_test::run_command(cli + " replay " + manifest + " --jobs " + std::to_string(1 + m % 3) +
                                 " > /dev/null 2>&1") != 0) {
            failure = "replay failed for " + manifest;
            break;
        }
        bool same = !bytes.empty();
        for (const auto& [f, b] : bytes) same = same && fs::exists(f) && lp_test::read_file(f) == b;
        if (!same) {
            failure = "replay output differs for " + manifest;
            break;
        }
        ++matched;
    }
    return {matched == 20, fmt("%zu/20 random manifests replayed byte-exactly", matched) +
                               (failure.empty() ? "" : " (" + failure + ")")};
}

Outcome degenerate_collapses() {
    std::size_t checks = 0, ok = 0;
    for (std::size_t scales : {1, 3, 5})
        for (std::uint64_t seed = 0; seed < 5; ++seed) {
            SynthesisParams p;
            p.scales = scales;
            p.seed = seed;
            auto sources = corpus(1, 16, p, 40 + seed, scales == 5 ? std::optional<std::size_t>(4) : std::nullopt);
            for (const auto& g : generate(sources, p, 2)) {
                ++checks;
                ok += lp_test::bitwise_equal(g.grid, sources.full[0]);
            }
        }
    SynthesisParams p;
    p.k = 1;
    p.scales = 1;
    auto sources = corpus(16, 32, p, 9, 8);
    for (std::size_t s = 0; s < sources.size(); ++s) {
        ++checks;
        ok += lp_test::bitwise_equal(generate(sources, p, 1, sources.full[s]).front().grid, sources.full[s]);
    }
    return {ok == checks,
            fmt("%zu/%zu collapse cases bit-exact (B=1 unconditioned; k=1, S=1 reference in sources)", ok, checks)};
}

Outcome schedule_geometry() {
    SynthesisParams p;
    const auto s5 = scale_schedule(p);
    p.scales = 1;
    const auto s1 = scale_schedule(p);
    SynthesisParams fig;
    fig.omega = 4;
    fig.stride = 2;
    fig.scales = 1;
    fig.start_size = fig.end_size = 10;
    auto sources = corpus(3, 4, fig, 2);
    ChannelGrid canvas(10, 10, 4);
    CellFlags generated(10, false);
    ProvenanceMap pmap(10, 10, 3);
    Rng rng(1);
    seed_top_left(canvas, generated, sources, 0, fig, rng, pmap);
    const auto stats = single_scale_pass(canvas, generated, sources, 0, fig, rng, pmap);
    const bool ok = s5 == std::vector<std::size_t>{10, 12, 13, 14, 16} && s1 == std::vector<std::size_t>{16} &&
                    stats.queries == 16 && pmap.complete();
    auto list = [](const std::vector<std::size_t>& v) {
        std::string s;
        for (auto x : v) s += (s.empty() ? "" : ",") + std::to_string(x);
        return "[" + s + "]";
    };
    return {ok, "S=5 " + list(s5) + ", S=1 " + list(s1) + fmt(", side 10 omega 4 stride 2: %zu queries", stats.queries)};
}

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
    auto ranks = [](const std::vector<double>& v) {
        std::vector<std::size_t> idx(v.size());
        std::iota(idx.begin(), idx.end(), 0);
        std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return v[a] < v[b]; });
        std::vector<double> r(v.size());
        for (std::size_t i = 0; i < idx.size();) {
            std::size_t j = i;
            while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
            for (std::size_t t = i; t <= j; ++t) r[idx[t]] = 0.5 * double(i + j) + 1.0;
            i = j + 1;
        }
        return r;
    };
    auto rx = ranks(x), ry = ranks(y);
    const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / double(rx.size());
    const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / double(ry.size());
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < rx.size(); ++i) {
        sxy += (rx[i] - mx) * (ry[i] - my);
        sxx += (rx[i] - mx) * (rx[i] - mx);
        syy += (ry[i] - my) * (ry[i] - my);
    }
    return sxy / std::sqrt(sxx * syy);
}

Outcome diversity() {
    SynthesisParams base;
    auto sources = corpus(16, 32, base, 12, 8);
    const auto& src = sources.full;
    const double self = diversity_score(src, src, {}, {}, 5);
    const double constant = diversity_score(std::vector<ChannelGrid>(6, src[3]), src, {}, {}, 5);
    auto scalar = [](float v) { return ChannelGrid(1, 1, 1, std::vector<float>{v}); };
    const double toy = diversity_score({scalar(0), scalar(1), scalar(3), scalar(6)},
                                       {scalar(0), scalar(2), scalar(4), scalar(8)}, {}, {700, true}, 0);

    std::vector<double> ks, scores;
    double lo = 1e9, hi = -1e9, default_score = 0.0;
    for (std::size_t k : {1, 3, 10}) {
        for (std::uint64_t seed = 0; seed < 10; ++seed) {
            SynthesisParams p;
            p.k = k;
            p.seed = 500 + seed;
            std::vector<ChannelGrid> grids;
            for (auto& g : generate(sources, p, 16)) grids.push_back(std::move(g.grid));
            const double d = diversity_score(grids, src, {}, {}, seed);
            ks.push_back(double(k));
            scores.push_back(d);
            lo = std::min(lo, d);
            hi = std::max(hi, d);
            if (k == 3 && seed == 0) default_score = d;
        }
    }
    const double rho = spearman(ks, scores);
    const bool ok = self == 1.0 && constant == 0.0 && std::abs(toy - 20.0 / 26.0) <= 1e-6 && default_score > 0.0 &&
                    default_score <= 1.0 && rho > 0.0;
    return {ok, fmt("self %.6f, constant %.6f, toy |err| %.1e, B=16 defaults %.4f, k sweep range [%.4f, %.4f], "
                    "Spearman(k, diversity) %.3f",
                    self, constant, std::abs(toy - 20.0 / 26.0), default_score, lo, hi, rho)};
}

Outcome format_conformance() {
    if (!lp_test::numpy_available()) {
        return {false, "numpy reference reader not available at configure time"};
    }
    auto dir = lp_test::scratch_dir("acceptance_npy");
    auto result = lp_test::numpy_interop_check(dir, 20, 314);
    return {result.ok, fmt("%zu files exchanged with numpy", result.files_checked) +
                           (result.message.empty() ? "" : " (" + result.message + ")")};
}

} // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"copy-exactness", copy_exactness},
        {"knn-oracle", knn_oracle},
        {"pca-correctness", pca_correctness},
        {"pca-speedup", pca_speedup},
        {"throughput", throughput},
        {"determinism", determinism},
        {"degenerate-collapses", degenerate_collapses},
        {"schedule", schedule_geometry},
        {"diversity", diversity},
        {"format-conformance", format_conformance},
    };
    int failed = 0;
    for (const auto& [name, check] : criteria) {
        Outcome o;
        try {
            o = check();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        std::printf("[%s] %s: %s\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str());
        std::fflush(stdout);
        failed += !o.pass;
    }
    std::printf("%zu criteria, %d failed\n", criteria.size(), failed);
    return failed == 0 ? 0 : 1;
}
