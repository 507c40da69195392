// latentpatch command-line tool: fit-pca, generate, edit, metrics, replay.

#include <latentpatch/latentpatch.hpp>

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace latentpatch;

namespace {

constexpr int manifest_version = 1;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

int exit_code(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::parameter:
        return 1;
    case ErrorKind::data:
        return 2;
    case ErrorKind::invariant:
        return 3;
    }
    return 3;
}

std::string absolute_or_empty(const std::string& path) {
    return path.empty() ? std::string{} : fs::absolute(path).lexically_normal().string();
}

json path_json(const std::string& path) { return path.empty() ? json(nullptr) : json(path); }

std::string path_from(const json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) {
        return {};
    }
    return j.at(key).get<std::string>();
}

void require_file(const std::string& path, const char* what) {
    if (!fs::is_regular_file(path)) {
        throw IoError(std::string(what) + " file not found: " + path);
    }
}

void require_writable_parent(const std::string& path) {
    const auto parent = fs::path(path).parent_path();
    if (!parent.empty() && !fs::is_directory(parent)) {
        throw IoError("output directory does not exist: " + parent.string());
    }
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot create " + path.string());
    }
    out << text;
    if (!out) {
        throw IoError("write failed for " + path.string());
    }
}

std::string default_manifest(const std::string& output) { return output.empty() ? "" : output + ".manifest.json"; }

ChannelGrid pick_grid(const std::string& path, std::size_t index, const char* what) {
    auto grids = load_grids(path);
    if (index >= grids.size()) {
        throw BoundsError(std::string(what) + " index " + std::to_string(index) + " out of range for " + path +
                          " holding " + std::to_string(grids.size()) + " grid(s)");
    }
    return std::move(grids[index]);
}

std::string provenance_path(const std::string& prefix, std::size_t index, const char* ext) {
    char name[32];
    std::snprintf(name, sizeof name, "_%04zu%s", index, ext);
    return prefix + name;
}

// ---------------------------------------------------------------- fit-pca

struct FitPcaConfig {
    std::string sources;
    std::size_t components = 16;
    bool whiten = false;
    std::string output;
    std::string manifest;

    json to_json() const {
        return {{"sources", sources}, {"components", components}, {"whiten", whiten}, {"output", output},
                {"manifest", path_json(manifest)}};
    }
    static FitPcaConfig from_json(const json& j) {
        return {j.at("sources").get<std::string>(), j.at("components").get<std::size_t>(), j.at("whiten").get<bool>(),
                j.at("output").get<std::string>(), path_from(j, "manifest")};
    }
    void resolve() {
        sources = absolute_or_empty(sources);
        output = absolute_or_empty(output);
        manifest = absolute_or_empty(manifest);
    }
};

int run_fit_pca(const FitPcaConfig& cfg) {
    if (cfg.components == 0) {
        throw ParameterError("component count r must be at least 1");
    }
    require_file(cfg.sources, "sources");
    require_writable_parent(cfg.output);
    auto grids = load_grids(cfg.sources);
    PcaOptions options;
    options.whiten = cfg.whiten;
    auto model = fit_pca(grids, cfg.components, options);
    save_pca(model, cfg.output);

    json manifest{{"tool", "latentpatch"}, {"version", manifest_version}, {"command", "fit-pca"},
                  {"config", cfg.to_json()},
                  {"resolved",
                   {{"input_channels", model.input_channels},
                    {"retained_variance_fraction", model.retained_variance_fraction()}}},
                  {"outputs",
                   {(fs::path(cfg.output) / "mean.npy").string(), (fs::path(cfg.output) / "basis.npy").string(),
                    (fs::path(cfg.output) / "eigenvalues.npy").string(), (fs::path(cfg.output) / "pca.txt").string()}}};
    if (!cfg.manifest.empty()) {
        write_text(cfg.manifest, manifest.dump(2) + "\n");
    }
    std::printf("r=%zu retained_variance_fraction=%.6f\n", model.components, model.retained_variance_fraction());
    return 0;
}

// ---------------------------------------------------------------- generate

struct GenerateConfig {
    std::string sources;
    std::string pca;
    std::string attributes;
    std::vector<std::string> require;
    std::string reference;
    std::size_t reference_index = 0;
    std::string codebook;
    std::string baseline; // "", "cell" or "patch"
    std::size_t tile = 4;
    SynthesisParams params;
    std::size_t count = 1;
    std::string output;
    std::string provenance;
    std::string manifest;

    json to_json() const {
        return {{"sources", sources},
                {"pca", path_json(pca)},
                {"attributes", path_json(attributes)},
                {"require", require},
                {"reference", path_json(reference)},
                {"reference_index", reference_index},
                {"codebook", path_json(codebook)},
                {"baseline", baseline.empty() ? json(nullptr) : json(baseline)},
                {"tile", tile},
                {"omega", params.omega},
                {"stride", params.stride},
                {"k", params.k},
                {"scales", params.scales},
                {"start_size", params.start_size},
                {"end_size", params.end_size},
                {"seed", params.seed},
                {"jitter", params.jitter},
                {"count", count},
                {"output", output},
                {"provenance", path_json(provenance)},
                {"manifest", path_json(manifest)}};
    }
    static GenerateConfig from_json(const json& j) {
        GenerateConfig c;
        c.sources = j.at("sources").get<std::string>();
        c.pca = path_from(j, "pca");
        c.attributes = path_from(j, "attributes");
        c.require = j.at("require").get<std::vector<std::string>>();
        c.reference = path_from(j, "reference");
        c.reference_index = j.at("reference_index").get<std::size_t>();
        c.codebook = path_from(j, "codebook");
        c.baseline = path_from(j, "baseline");
        c.tile = j.at("tile").get<std::size_t>();
        c.params.omega = j.at("omega").get<std::size_t>();
        c.params.stride = j.at("stride").get<std::size_t>();
        c.params.k = j.at("k").get<std::size_t>();
        c.params.scales = j.at("scales").get<std::size_t>();
        c.params.start_size = j.at("start_size").get<std::size_t>();
        c.params.end_size = j.at("end_size").get<std::size_t>();
        c.params.seed = j.at("seed").get<std::uint64_t>();
        c.params.jitter = j.at("jitter").get<std::size_t>();
        c.count = j.at("count").get<std::size_t>();
        c.output = j.at("output").get<std::string>();
        c.provenance = path_from(j, "provenance");
        c.manifest = path_from(j, "manifest");
        return c;
    }
    void resolve() {
        for (auto* p : {&sources, &pca, &attributes, &reference, &codebook, &output, &provenance, &manifest}) {
            *p = absolute_or_empty(*p);
        }
    }
};

std::vector<AttributeConstraint> parse_constraints(const std::vector<std::string>& items) {
    std::vector<AttributeConstraint> out;
    for (const auto& item : items) {
        const auto eq = item.find('=');
        const std::string value = eq == std::string::npos ? "" : item.substr(eq + 1);
        if (eq == 0 || eq == std::string::npos || (value != "0" && value != "1")) {
            throw UsageError("--require expects name=0 or name=1, got '" + item + "'");
        }
        out.push_back({item.substr(0, eq), value == "1"});
    }
    return out;
}

int run_generate(const GenerateConfig& cfg, std::size_t jobs) {
    // validate everything before any compute or output
    const bool baseline = !cfg.baseline.empty();
    if (baseline && cfg.baseline != "cell" && cfg.baseline != "patch") {
        throw UsageError("--baseline must be 'cell' or 'patch', got '" + cfg.baseline + "'");
    }
    if (cfg.count == 0) {
        throw ParameterError("--count must be at least 1");
    }
    if (!baseline) {
        validate(cfg.params);
    }
    if (baseline && !cfg.reference.empty()) {
        throw UsageError("--baseline cannot be combined with --ref");
    }
    if (!cfg.require.empty() && cfg.attributes.empty()) {
        throw UsageError("--require needs --attributes");
    }
    const auto constraints = parse_constraints(cfg.require);
    require_file(cfg.sources, "sources");
    for (const auto& [path, what] : {std::pair{cfg.attributes, "attributes"}, std::pair{cfg.reference, "reference"},
                                     std::pair{cfg.codebook, "codebook"}}) {
        if (!path.empty()) {
            require_file(path, what);
        }
    }
    require_writable_parent(cfg.output);
    if (!cfg.provenance.empty()) {
        require_writable_parent(cfg.provenance);
    }
    if (!cfg.manifest.empty()) {
        require_writable_parent(cfg.manifest);
    }

    auto full = load_grids(cfg.sources);
    std::optional<PcaModel> model;
    if (!cfg.pca.empty()) {
        model = load_pca(cfg.pca);
    }
    const auto schedule = baseline ? std::vector<std::size_t>{cfg.params.end_size} : scale_schedule(cfg.params);
    SourceSet sources = make_source_set(std::move(full), baseline ? std::nullopt : model, schedule);
    if (!cfg.attributes.empty()) {
        auto table = load_attribute_table(cfg.attributes, sources.size());
        sources = filter_sources(sources, table, constraints);
    }
    std::optional<ChannelGrid> reference;
    if (!cfg.reference.empty()) {
        reference = pick_grid(cfg.reference, cfg.reference_index, "reference");
    }
    std::optional<Codebook> codebook;
    if (!cfg.codebook.empty()) {
        codebook = load_codebook(cfg.codebook);
        if (codebook->channels != sources.full_channels()) {
            throw ShapeError("codebook has " + std::to_string(codebook->channels) + " channels, sources have " +
                             std::to_string(sources.full_channels()));
        }
    }

    std::vector<GeneratedGrid> results;
    if (baseline) {
        results = baseline_random(sources, cfg.baseline == "cell" ? BaselineMode::cell : BaselineMode::patch, cfg.tile,
                                  cfg.params.seed, cfg.count);
    } else {
        results = generate(sources, cfg.params, cfg.count, reference, jobs);
    }

    std::vector<ChannelGrid> grids;
    grids.reserve(results.size());
    for (auto& r : results) {
        grids.push_back(codebook ? snap_to_codebook(r.grid, *codebook).grid : r.grid);
    }

    json outputs = json::array();
    save_grids(grids, cfg.output);
    outputs.push_back(cfg.output);
    if (!cfg.provenance.empty()) {
        for (std::size_t i = 0; i < results.size(); ++i) {
            const auto ppm = provenance_path(cfg.provenance, i, ".ppm");
            render_provenance(results[i].provenance, ppm);
            outputs.push_back(ppm);
            outputs.push_back(provenance_path(cfg.provenance, i, ".csv"));
        }
    }

    json resolved{{"stride", baseline ? json(nullptr) : json(cfg.params.effective_stride())},
                  {"schedule", schedule},
                  {"source_count", sources.size()},
                  {"source_ids", sources.original_ids},
                  {"search_channels", baseline ? sources.full_channels() : sources.search_channels()},
                  {"full_channels", sources.full_channels()}};
    json manifest{{"tool", "latentpatch"}, {"version", manifest_version}, {"command", "generate"},
                  {"config", cfg.to_json()},   {"resolved", resolved},         {"outputs", outputs}};
    if (!cfg.manifest.empty()) {
        write_text(cfg.manifest, manifest.dump(2) + "\n");
    }
    return 0;
}

// ---------------------------------------------------------------- edit

struct EditConfig {
    std::string reference;
    std::size_t reference_index = 0;
    std::string donor;
    std::size_t donor_index = 0;
    std::vector<std::string> edits;
    std::string output;
    std::string manifest;

    json to_json() const {
        return {{"reference", reference}, {"reference_index", reference_index},
                {"donor", donor},         {"donor_index", donor_index},
                {"edits", edits},         {"output", output},
                {"manifest", path_json(manifest)}};
    }
    static EditConfig from_json(const json& j) {
        return {j.at("reference").get<std::string>(), j.at("reference_index").get<std::size_t>(),
                j.at("donor").get<std::string>(),     j.at("donor_index").get<std::size_t>(),
                j.at("edits").get<std::vector<std::string>>(), j.at("output").get<std::string>(),
                path_from(j, "manifest")};
    }
    void resolve() {
        for (auto* p : {&reference, &donor, &output, &manifest}) {
            *p = absolute_or_empty(*p);
        }
    }
};

Rect parse_rect(const std::string& text) {
    std::size_t values[4] = {};
    std::size_t pos = 0;
    for (int i = 0; i < 4; ++i) {
        const auto end = text.find(',', pos);
        const auto field = text.substr(pos, end == std::string::npos ? std::string::npos : end - pos);
        std::size_t used = 0;
        bool ok = !field.empty() && field.front() != '-';
        if (ok) {
            try {
                values[i] = std::stoul(field, &used);
            } catch (const std::exception&) {
                ok = false;
            }
        }
        if (!ok || used != field.size() || (i < 3) == (end == std::string::npos)) {
            throw UsageError("--edit expects r0,c0,rows,cols with non-negative integers, got '" + text + "'");
        }
        pos = end + 1;
    }
    return {values[0], values[1], values[2], values[3]};
}

int run_edit(const EditConfig& cfg) {
    if (cfg.edits.empty()) {
        throw UsageError("edit needs at least one --edit region");
    }
    std::vector<Rect> regions;
    for (const auto& e : cfg.edits) {
        regions.push_back(parse_rect(e));
    }
    require_file(cfg.reference, "reference");
    require_file(cfg.donor, "donor");
    require_writable_parent(cfg.output);
    auto ref = pick_grid(cfg.reference, cfg.reference_index, "reference");
    auto donor = pick_grid(cfg.donor, cfg.donor_index, "donor");
    for (const auto& r : regions) {
        check_rect(r, ref.height(), ref.width(), "edit region");
    }
    auto edited = edit_latent(ref, donor, regions);
    save_grids({edited}, cfg.output);
    json manifest{{"tool", "latentpatch"}, {"version", manifest_version}, {"command", "edit"},
                  {"config", cfg.to_json()},   {"outputs", {cfg.output}}};
    if (!cfg.manifest.empty()) {
        write_text(cfg.manifest, manifest.dump(2) + "\n");
    }
    return 0;
}

// ---------------------------------------------------------------- metrics

struct MetricsConfig {
    std::string kind; // diversity, recon, copy-stats
    std::string generated;
    std::string source;
    std::string distance = "latent-l2";
    std::string matrix;
    std::size_t pairs = 700;
    bool exhaustive = false;
    std::uint64_t seed = 0;
    std::string a_original, a_recon, b_original, b_recon;
    std::string provenance;
    std::string run_manifest;
    std::string output;
    std::string manifest;

    json to_json() const {
        return {{"kind", kind},
                {"generated", path_json(generated)},
                {"source", path_json(source)},
                {"distance", distance},
                {"matrix", path_json(matrix)},
                {"pairs", pairs},
                {"exhaustive", exhaustive},
                {"seed", seed},
                {"a_original", path_json(a_original)},
                {"a_recon", path_json(a_recon)},
                {"b_original", path_json(b_original)},
                {"b_recon", path_json(b_recon)},
                {"provenance", path_json(provenance)},
                {"run_manifest", path_json(run_manifest)},
                {"output", path_json(output)},
                {"manifest", path_json(manifest)}};
    }
    static MetricsConfig from_json(const json& j) {
        MetricsConfig c;
        c.kind = j.at("kind").get<std::string>();
        c.generated = path_from(j, "generated");
        c.source = path_from(j, "source");
        c.distance = j.at("distance").get<std::string>();
        c.matrix = path_from(j, "matrix");
        c.pairs = j.at("pairs").get<std::size_t>();
        c.exhaustive = j.at("exhaustive").get<bool>();
        c.seed = j.at("seed").get<std::uint64_t>();
        c.a_original = path_from(j, "a_original");
        c.a_recon = path_from(j, "a_recon");
        c.b_original = path_from(j, "b_original");
        c.b_recon = path_from(j, "b_recon");
        c.provenance = path_from(j, "provenance");
        c.run_manifest = path_from(j, "run_manifest");
        c.output = path_from(j, "output");
        c.manifest = path_from(j, "manifest");
        return c;
    }
    void resolve() {
        for (auto* p : {&generated, &source, &matrix, &a_original, &a_recon, &b_original, &b_recon, &provenance,
                        &run_manifest, &output, &manifest}) {
            *p = absolute_or_empty(*p);
        }
    }
};

std::vector<ReconPair> recon_pairs(const std::string& original, const std::string& recon) {
    require_file(original, "original");
    require_file(recon, "reconstruction");
    auto a = load_grids(original);
    auto b = load_grids(recon);
    if (a.size() != b.size()) {
        throw ShapeError(original + " holds " + std::to_string(a.size()) + " grids but " + recon + " holds " +
                         std::to_string(b.size()));
    }
    std::vector<ReconPair> pairs;
    for (std::size_t i = 0; i < a.size(); ++i) {
        pairs.emplace_back(std::move(a[i]), std::move(b[i]));
    }
    return pairs;
}

json summary_json(const ErrorSummary& s) { return {{"mean", s.mean}, {"std", s.stddev}, {"errors", s.errors}}; }

json json_file(const std::string& path) {
    require_file(path, "manifest");
    std::ifstream in(path);
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw FormatError(path + ": not valid JSON (" + e.what() + ")");
    }
}

json metrics_diversity(const MetricsConfig& cfg) {
    if (cfg.generated.empty() || cfg.source.empty()) {
        throw UsageError("diversity needs --generated and --source");
    }
    DistanceSpec spec;
    if (cfg.distance == "latent-l2") {
        spec.kind = DistanceKind::latent_l2;
    } else if (cfg.distance == "pixel-l2") {
        spec.kind = DistanceKind::pixel_l2;
    } else if (cfg.distance == "matrix") {
        if (cfg.matrix.empty()) {
            throw UsageError("--distance matrix needs --matrix");
        }
    } else {
        throw UsageError("--distance must be latent-l2, pixel-l2 or matrix, got '" + cfg.distance + "'");
    }
    if (!cfg.exhaustive && cfg.pairs == 0) {
        throw ParameterError("--pairs must be at least 1");
    }
    require_file(cfg.generated, "generated");
    require_file(cfg.source, "source");
    if (cfg.distance == "matrix") {
        require_file(cfg.matrix, "distance matrix");
        spec = DistanceSpec::external(read_npy_file(cfg.matrix));
    }
    auto gen = load_grids(cfg.generated);
    auto src = load_grids(cfg.source);
    const double score = diversity_score(gen, src, spec, {cfg.pairs, cfg.exhaustive}, cfg.seed);
    return {{"metric", "diversity"},        {"distance", cfg.distance},
            {"pairs", cfg.pairs},           {"exhaustive", cfg.exhaustive},
            {"seed", cfg.seed},             {"generated_count", gen.size()},
            {"source_count", src.size()},   {"diversity", score}};
}

json metrics_recon(const MetricsConfig& cfg) {
    if (cfg.a_original.empty() || cfg.a_recon.empty() || cfg.b_original.empty() || cfg.b_recon.empty()) {
        throw UsageError("recon needs --a-original, --a-recon, --b-original and --b-recon");
    }
    auto report = recon_error_report(recon_pairs(cfg.a_original, cfg.a_recon), recon_pairs(cfg.b_original, cfg.b_recon));
    return {{"metric", "recon"}, {"a", summary_json(report.a)}, {"b", summary_json(report.b)}, {"ks", report.ks}};
}

json metrics_copy_stats(const MetricsConfig& cfg) {
    if (cfg.generated.empty() || cfg.source.empty() || cfg.provenance.empty()) {
        throw UsageError("copy-stats needs --generated, --source and --provenance");
    }
    require_file(cfg.generated, "generated");
    require_file(cfg.source, "source");
    auto gen = load_grids(cfg.generated);
    auto full = load_grids(cfg.source);
    const std::size_t side = full.front().height();
    SourceSet sources = make_source_set(std::move(full), std::nullopt, {side});
    if (!cfg.run_manifest.empty()) {
        auto run = json_file(cfg.run_manifest);
        if (!run.contains("resolved") || !run["resolved"].contains("source_ids")) {
            throw FormatError(cfg.run_manifest + ": field 'resolved.source_ids' missing");
        }
        sources = subset_sources(sources, run["resolved"]["source_ids"].get<std::vector<std::size_t>>());
    }
    json per_output = json::array();
    std::size_t exact_cells = 0;
    std::size_t total_cells = 0;
    for (std::size_t i = 0; i < gen.size(); ++i) {
        auto pmap = read_provenance_csv(provenance_path(cfg.provenance, i, ".csv"), gen[i].height(), gen[i].width(),
                                        sources.size());
        auto stats = copy_statistics(gen[i], pmap, sources);
        exact_cells += static_cast<std::size_t>(std::llround(stats.exact_match_fraction *
                                                             static_cast<double>(gen[i].cell_count())));
        total_cells += gen[i].cell_count();
        per_output.push_back({{"index", i},
                              {"exact_match_fraction", stats.exact_match_fraction},
                              {"usage", stats.usage},
                              {"largest_region_fraction", stats.largest_region_fraction},
                              {"distinct_sources", stats.distinct_sources}});
    }
    return {{"metric", "copy-stats"},
            {"exact_match_fraction", static_cast<double>(exact_cells) / static_cast<double>(total_cells)},
            {"outputs", per_output}};
}

int run_metrics(const MetricsConfig& cfg) {
    if (!cfg.output.empty()) {
        require_writable_parent(cfg.output);
    }
    json report;
    if (cfg.kind == "diversity") {
        report = metrics_diversity(cfg);
    } else if (cfg.kind == "recon") {
        report = metrics_recon(cfg);
    } else if (cfg.kind == "copy-stats") {
        report = metrics_copy_stats(cfg);
    } else {
        throw UsageError("unknown metrics kind '" + cfg.kind + "'");
    }
    const std::string text = report.dump(2) + "\n";
    if (cfg.output.empty()) {
        std::cout << text;
    } else {
        write_text(cfg.output, text);
    }
    if (!cfg.manifest.empty()) {
        json manifest{{"tool", "latentpatch"}, {"version", manifest_version}, {"command", "metrics"},
                      {"config", cfg.to_json()},
                      {"outputs", cfg.output.empty() ? json::array() : json::array({cfg.output})}};
        write_text(cfg.manifest, manifest.dump(2) + "\n");
    }
    return 0;
}

// ---------------------------------------------------------------- replay

int run_replay(const std::string& path, std::size_t jobs) {
    auto m = json_file(path);
    try {
        if (m.value("tool", "") != "latentpatch" || m.value("version", 0) != manifest_version) {
            throw FormatError(path + ": not a latentpatch manifest of version " + std::to_string(manifest_version));
        }
        const auto command = m.at("command").get<std::string>();
        const auto& config = m.at("config");
        if (command == "fit-pca") {
            return run_fit_pca(FitPcaConfig::from_json(config));
        }
        if (command == "generate") {
            return run_generate(GenerateConfig::from_json(config), jobs);
        }
        if (command == "edit") {
            return run_edit(EditConfig::from_json(config));
        }
        if (command == "metrics") {
            return run_metrics(MetricsConfig::from_json(config));
        }
        throw FormatError(path + ": unknown command '" + command + "'");
    } catch (const json::exception& e) {
        throw FormatError(path + ": malformed manifest (" + e.what() + ")");
    }
}

void add_synthesis_flags(CLI::App* cmd, SynthesisParams& p) {
    cmd->add_option("--omega", p.omega, "patch side")->capture_default_str();
    cmd->add_option("--stride", p.stride, "raster stride; 0 means floor(omega/3 + 1/2)")->capture_default_str();
    cmd->add_option("--k", p.k, "neighbours sampled from")->capture_default_str();
    cmd->add_option("--scales", p.scales, "number of scales")->capture_default_str();
    cmd->add_option("--start-size", p.start_size, "coarsest side")->capture_default_str();
    cmd->add_option("--end-size", p.end_size, "finest side")->capture_default_str();
    cmd->add_option("--seed", p.seed, "random seed")->capture_default_str();
    cmd->add_option("--jitter", p.jitter, "candidate anchor radius")->capture_default_str();
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"latentpatch: patch-based synthesis over latent channel grids"};
    app.require_subcommand(1);
    std::size_t jobs = std::max(1u, std::thread::hardware_concurrency());

    FitPcaConfig fit;
    auto* fit_cmd = app.add_subcommand("fit-pca", "fit a PCA model over source channel vectors");
    fit_cmd->add_option("--sources", fit.sources, "source grids (.npy)")->required();
    fit_cmd->add_option("--r", fit.components, "retained components")->capture_default_str();
    fit_cmd->add_flag("--whiten", fit.whiten, "scale components to unit variance");
    fit_cmd->add_option("--output", fit.output, "model bundle directory")->required();
    fit_cmd->add_option("--manifest", fit.manifest, "run manifest path (default <output>.manifest.json)");

    GenerateConfig gen;
    auto* gen_cmd = app.add_subcommand("generate", "synthesise grids from a source set");
    gen_cmd->add_option("--sources", gen.sources, "source grids (.npy)")->required();
    gen_cmd->add_option("--pca", gen.pca, "PCA model directory for the search space");
    gen_cmd->add_option("--attributes", gen.attributes, "attribute table (.csv)");
    gen_cmd->add_option("--require", gen.require, "attribute constraint name=0|1 (repeatable)");
    gen_cmd->add_option("--ref", gen.reference, "reference grid(s) (.npy)");
    gen_cmd->add_option("--ref-index", gen.reference_index, "grid index inside --ref")->capture_default_str();
    gen_cmd->add_option("--codebook", gen.codebook, "codebook (.npy, N x L) to snap outputs to");
    gen_cmd->add_option("--baseline", gen.baseline, "random copy baseline: cell or patch");
    gen_cmd->add_option("--tile", gen.tile, "baseline patch tile side")->capture_default_str();
    gen_cmd->add_option("--count", gen.count, "number of outputs")->capture_default_str();
    gen_cmd->add_option("--output", gen.output, "output grids (.npy)")->required();
    gen_cmd->add_option("--provenance", gen.provenance, "prefix for per-output .ppm/.csv provenance");
    gen_cmd->add_option("--manifest", gen.manifest, "run manifest path (default <output>.manifest.json)");
    gen_cmd->add_option("--jobs", jobs, "worker threads");
    add_synthesis_flags(gen_cmd, gen.params);

    EditConfig edit;
    auto* edit_cmd = app.add_subcommand("edit", "paste donor regions onto a reference grid");
    edit_cmd->add_option("--ref", edit.reference, "reference grid(s) (.npy)")->required();
    edit_cmd->add_option("--ref-index", edit.reference_index, "grid index inside --ref")->capture_default_str();
    edit_cmd->add_option("--donor", edit.donor, "donor grid(s) (.npy)")->required();
    edit_cmd->add_option("--donor-index", edit.donor_index, "grid index inside --donor")->capture_default_str();
    edit_cmd->add_option("--edit", edit.edits, "region r0,c0,rows,cols (repeatable)")->required();
    edit_cmd->add_option("--output", edit.output, "edited grid (.npy)")->required();
    edit_cmd->add_option("--manifest", edit.manifest, "run manifest path (default <output>.manifest.json)");

    MetricsConfig met;
    auto* met_cmd = app.add_subcommand("metrics", "diversity, reconstruction and copy statistics");
    met_cmd->require_subcommand(1);
    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--output", met.output, "write the JSON report here instead of stdout");
        cmd->add_option("--manifest", met.manifest, "run manifest path");
    };
    auto* div_cmd = met_cmd->add_subcommand("diversity", "mean pairwise distance ratio");
    div_cmd->add_option("--generated", met.generated, "generated grids (.npy)")->required();
    div_cmd->add_option("--source", met.source, "source grids (.npy)")->required();
    div_cmd->add_option("--distance", met.distance, "latent-l2, pixel-l2 or matrix")->capture_default_str();
    div_cmd->add_option("--matrix", met.matrix, "(P, P) distance matrix, generated items first");
    div_cmd->add_option("--pairs", met.pairs, "sampled pairs per set")->capture_default_str();
    div_cmd->add_flag("--exhaustive", met.exhaustive, "use every pair");
    div_cmd->add_option("--seed", met.seed, "pair sampling seed")->capture_default_str();
    add_common(div_cmd);
    auto* rec_cmd = met_cmd->add_subcommand("recon", "compare reconstruction errors of two sets");
    rec_cmd->add_option("--a-original", met.a_original)->required();
    rec_cmd->add_option("--a-recon", met.a_recon)->required();
    rec_cmd->add_option("--b-original", met.b_original)->required();
    rec_cmd->add_option("--b-recon", met.b_recon)->required();
    add_common(rec_cmd);
    auto* copy_cmd = met_cmd->add_subcommand("copy-stats", "check outputs against their provenance");
    copy_cmd->add_option("--generated", met.generated, "generated grids (.npy)")->required();
    copy_cmd->add_option("--source", met.source, "unfiltered source grids (.npy)")->required();
    copy_cmd->add_option("--provenance", met.provenance, "provenance prefix used by generate")->required();
    copy_cmd->add_option("--run-manifest", met.run_manifest, "generate manifest, for filtered source ids");
    add_common(copy_cmd);

    std::string replay_path;
    auto* replay_cmd = app.add_subcommand("replay", "re-run a command from its manifest");
    replay_cmd->add_option("manifest", replay_path, "manifest written by an earlier run")->required();
    replay_cmd->add_option("--jobs", jobs, "worker threads");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (fit_cmd->parsed()) {
            if (fit.manifest.empty()) {
                fit.manifest = default_manifest(fit.output);
            }
            fit.resolve();
            return run_fit_pca(fit);
        }
        if (gen_cmd->parsed()) {
            if (gen.manifest.empty()) {
                gen.manifest = default_manifest(gen.output);
            }
            gen.resolve();
            return run_generate(gen, jobs);
        }
        if (edit_cmd->parsed()) {
            if (edit.manifest.empty()) {
                edit.manifest = default_manifest(edit.output);
            }
            edit.resolve();
            return run_edit(edit);
        }
        if (met_cmd->parsed()) {
            met.kind = div_cmd->parsed() ? "diversity" : rec_cmd->parsed() ? "recon" : "copy-stats";
            met.resolve();
            return run_metrics(met);
        }
        return run_replay(replay_path, jobs);
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code(e.kind());
    } catch (const fs::filesystem_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 3;
    }
}
