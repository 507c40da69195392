#include <latentpatch/provenance.hpp>

#include "../support/test_support.hpp"

#include <gtest/gtest.h>

#include <array>
#include <set>
#include <sstream>

using namespace latentpatch;

namespace {

ProvenanceMap filled(std::size_t h, std::size_t w, std::size_t sources, auto source_of) {
    ProvenanceMap pmap(h, w, sources);
    for (std::size_t r = 0; r < h; ++r)
        for (std::size_t c = 0; c < w; ++c)
            pmap.at(r, c) = {static_cast<std::int32_t>(source_of(r, c)), static_cast<std::int32_t>(r),
                             static_cast<std::int32_t>(c), 0};
    return pmap;
}

std::vector<std::array<unsigned char, 3>> pixels(const std::string& ppm, std::size_t count) {
    // header is "P6\n{W} {H}\n255\n"
    std::size_t pos = 0;
    for (int lines = 0; lines < 3; ++lines) pos = ppm.find('\n', pos) + 1;
    std::vector<std::array<unsigned char, 3>> out(count);
    for (std::size_t i = 0; i < count; ++i)
        for (int k = 0; k < 3; ++k) out[i][k] = static_cast<unsigned char>(ppm[pos + 3 * i + k]);
    return out;
}

} // namespace

TEST(HueToRgb, PrimaryHues) {
    EXPECT_EQ(hue_to_rgb(0.0), (std::array<std::uint8_t, 3>{255, 0, 0}));
    EXPECT_EQ(hue_to_rgb(1.0 / 3.0), (std::array<std::uint8_t, 3>{0, 255, 0}));
    EXPECT_EQ(hue_to_rgb(2.0 / 3.0), (std::array<std::uint8_t, 3>{0, 0, 255}));
    EXPECT_EQ(hue_to_rgb(0.5), (std::array<std::uint8_t, 3>{0, 255, 255}));
}

TEST(RenderProvenance, SingleSourceIsUniformRed) {
    auto dir = lp_test::scratch_dir("prov_red");
    auto pmap = filled(3, 5, 2, [](auto, auto) { return 0; });
    render_provenance(pmap, dir / "p.ppm");
    auto ppm = lp_test::read_file(dir / "p.ppm");
    EXPECT_EQ(ppm.rfind("P6\n5 3\n255\n", 0), 0u);
    EXPECT_EQ(ppm.size(), std::string("P6\n5 3\n255\n").size() + 15 * 3);
    for (auto px : pixels(ppm, 15)) {
        EXPECT_EQ(px, (std::array<unsigned char, 3>{255, 0, 0}));
    }
}

TEST(RenderProvenance, SixteenSourcesGiveAtMostSixteenColoursAndFullCsv) {
    auto dir = lp_test::scratch_dir("prov_16");
    auto pmap = filled(16, 16, 16, [](auto r, auto c) { return (r * 7 + c * 3) % 16; });
    render_provenance(pmap, dir / "p.ppm");
    std::set<std::array<unsigned char, 3>> colours;
    for (auto px : pixels(lp_test::read_file(dir / "p.ppm"), 256)) colours.insert(px);
    EXPECT_LE(colours.size(), 16u);
    EXPECT_GE(colours.size(), 2u);

    std::istringstream csv(lp_test::read_file(dir / "p.csv"));
    std::string line;
    std::getline(csv, line);
    EXPECT_EQ(line, "row,col,source,src_row,src_col");
    std::size_t rows = 0;
    while (std::getline(csv, line)) ++rows;
    EXPECT_EQ(rows, 256u);
}

TEST(RenderProvenance, IncompleteMapIsRejected) {
    auto dir = lp_test::scratch_dir("prov_incomplete");
    ProvenanceMap pmap(2, 2, 1);
    pmap.at(0, 0) = {0, 0, 0, 0};
    EXPECT_THROW(render_provenance(pmap, dir / "p.ppm"), IncompleteProvenanceError);
}

TEST(ReadProvenanceCsv, RoundTripsSourceAndLocation) {
    auto dir = lp_test::scratch_dir("prov_csv");
    auto pmap = filled(4, 3, 5, [](auto r, auto c) { return (r + c) % 5; });
    render_provenance(pmap, dir / "p.ppm");
    EXPECT_EQ(read_provenance_csv(dir / "p.csv", 4, 3, 5), pmap);
    EXPECT_THROW(read_provenance_csv(dir / "p.csv", 4, 3, 2), FormatError);
    EXPECT_THROW(read_provenance_csv(dir / "p.csv", 5, 3, 5), IncompleteProvenanceError);
    EXPECT_THROW(read_provenance_csv(dir / "missing.csv", 4, 3, 5), IoError);
}
