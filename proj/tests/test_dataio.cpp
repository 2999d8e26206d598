#include <set>

#include "doctest.h"
#include "pdh/dataio.hpp"
#include "pdh/error.hpp"
#include "support.hpp"

using namespace pdh;

namespace {

std::vector<std::uint8_t> bytes_of(const std::string& s) { return {s.begin(), s.end()}; }

Image random_image(Rng& rng, std::size_t h, std::size_t w) {
    Image img(h, w);
    for (double& v : img.data) v = static_cast<double>(rng.below(256)) / 255.0;
    return img;
}

// Independent bilinear sampler: source coordinate from the pixel-center
// mapping, neighbours by floor, clamping applied to the coordinate.
double sample_reference(const Image& s, std::size_t c, double fy, double fx) {
    fy = std::min(std::max(fy, 0.0), double(s.height - 1));
    fx = std::min(std::max(fx, 0.0), double(s.width - 1));
    const double y0 = std::floor(fy), x0 = std::floor(fx);
    const double y1 = std::min(y0 + 1, double(s.height - 1)), x1 = std::min(x0 + 1, double(s.width - 1));
    const double ay = fy - y0, ax = fx - x0;
    auto px = [&](double y, double x) { return s.at(c, std::size_t(y), std::size_t(x)); };
    return (1 - ay) * ((1 - ax) * px(y0, x0) + ax * px(y0, x1)) + ay * ((1 - ax) * px(y1, x0) + ax * px(y1, x1));
}

void make_fixture(const std::filesystem::path& root) {
    std::filesystem::create_directories(root / "bounding_box_test");
    std::filesystem::create_directories(root / "query");
    Image small(32, 16, 0.25);
    write_ppm_file(small, root / "bounding_box_test" / "0002_c1s1_000451_03.ppm");
    write_ppm_file(Image(128, 64, 0.5), root / "bounding_box_test" / "-1_c3s2_000000_00.ppm");
    testing::spit(root / "bounding_box_test" / "0003_c2s1_000001_00.jpg", "not really a jpeg");
    testing::spit(root / "query" / "badname.ppm", "P6\n1 1\n255\n\xff\xff\xff");
    testing::spit(root / "query" / "0004_c1s1_000001_00.ppm", "P6\n2 2\n255\n\x01");
}

}  // namespace

TEST_SUITE("dataio") {

TEST_CASE("one white pixel decodes and encodes to the reference bytes") {
    const auto bytes = bytes_of(std::string("P6\n1 1\n255\n\xff\xff\xff"));
    const Image img = read_ppm(bytes);
    CHECK(img.height == 1);
    CHECK(img.width == 1);
    CHECK(img.data == std::vector<double>{1.0, 1.0, 1.0});
    CHECK(write_ppm(img) == bytes);
}

TEST_CASE("P6 header parsing") {
    const Image c = read_ppm(bytes_of(std::string("P6 # comment\n2 1 # more\n15\n\x0f\x00\x00\x00\x0f\x00", 33)));
    CHECK(c.width == 2);
    CHECK(c.at(0, 0, 0) == 1.0);
    CHECK(c.at(1, 0, 1) == 1.0);
    const Image wide = read_ppm(bytes_of(std::string("P6\n1 1\n65535\n\xff\xff\x00\x00\x80\x00", 19)));
    CHECK(wide.at(0, 0, 0) == 1.0);
    CHECK(wide.at(1, 0, 0) == 0.0);
    CHECK(wide.at(2, 0, 0) == doctest::Approx(32768.0 / 65535.0));
}

TEST_CASE("malformed pixmaps raise format errors") {
    auto rejects = [](const std::string& s) { CHECK_THROWS_AS(read_ppm(bytes_of(s)), FormatError); };
    rejects("P5\n1 1\n255\n\x00");
    rejects("P3\n1 1\n255\n1 1 1");
    rejects("P6\n2 2\n255\n\x01\x02");
    rejects(std::string("P6\n0 1\n255\n", 11));
    rejects("P6\n1 1\n70000\n\x01\x02\x03");
    rejects("P6\n1 1\n10\n\x0b\x00\x00");
    rejects("P6\nx 1\n255\n");
    try {
        read_ppm(bytes_of("P6\n2 2\n255\n\x01"));
        FAIL("truncated raster accepted");
    } catch (const FormatError& e) {
        CHECK(e.offset == 12);
    }
}

TEST_CASE("random 128x64 images survive a write/read round trip exactly") {
    Rng rng(3);
    testing::TempDir dir("ppm");
    for (int t = 0; t < 3; ++t) {
        const Image img = random_image(rng, 128, 64);
        write_ppm_file(img, dir / "x.ppm");
        CHECK(read_ppm_file(dir / "x.ppm") == img);
    }
    CHECK_THROWS_AS(read_ppm_file(dir / "missing.ppm"), IngestionError);
}

TEST_CASE("resizing a constant image keeps it constant") {
    for (auto [h, w] : {std::pair{10, 7}, {128, 64}, {300, 5}}) {
        const Image flat(std::size_t(h), std::size_t(w), 0.375);
        for (auto [oh, ow] : {std::pair{128, 64}, {1, 1}, {17, 250}}) {
            const Image out = resize_bilinear(flat, oh, ow);
            for (double v : out.data) CHECK(v == doctest::Approx(0.375).epsilon(1e-15));
        }
    }
    CHECK_THROWS_AS(resize_bilinear(Image(), 4, 4), DimensionError);
    CHECK_THROWS_AS(resize_bilinear(Image(2, 2), 0, 4), DimensionError);
}

TEST_CASE("resize matches the scalar reference sampler") {
    Rng rng(5);
    const std::pair<std::size_t, std::size_t> fixtures[][2] = {
        {{32, 16}, {128, 64}}, {{200, 90}, {128, 64}}, {{7, 3}, {11, 13}}};
    for (const auto& f : fixtures) {
        const Image src = random_image(rng, f[0].first, f[0].second);
        const Image out = resize_bilinear(src, f[1].first, f[1].second);
        const double sy = double(src.height) / double(out.height), sx = double(src.width) / double(out.width);
        for (std::size_t c = 0; c < 3; ++c)
            for (std::size_t y = 0; y < out.height; ++y)
                for (std::size_t x = 0; x < out.width; ++x)
                    CHECK(out.at(c, y, x) ==
                          doctest::Approx(sample_reference(src, c, (y + 0.5) * sy - 0.5, (x + 0.5) * sx - 0.5))
                              .epsilon(1e-12));
    }
    const Image same = random_image(rng, 12, 9);
    CHECK(resize_bilinear(same, 12, 9) == same);
}

TEST_CASE("Market file names") {
    CHECK(parse_market_name("0002_c1s1_000451_03") == MarketLabel{2, 1});
    CHECK(parse_market_name("-1_c3s2_000000_00") == MarketLabel{-1, 3});
    CHECK_FALSE(parse_market_name("0002_c1s1_000451"));
    CHECK_FALSE(parse_market_name("abcd_c1s1_000451_03"));
    CHECK_FALSE(parse_market_name("0002_c0s1_000451_03"));
    CHECK_FALSE(parse_market_name("-2_c1s1_000451_03"));
}

TEST_CASE("loading a fixture directory reports every skipped file") {
    testing::TempDir dir("market");
    make_fixture(dir.path());
    const LoadResult r = load_market_dir(dir.path());
    CHECK(r.split.train.empty());
    REQUIRE(r.split.gallery.size() == 2);
    CHECK(r.split.query.empty());
    // Filename order: "-1_..." sorts before "0002_...".
    CHECK(r.split.gallery[0].is_distractor());
    CHECK(r.split.gallery[0].camera == 3);
    CHECK(r.split.gallery[1].identity == 2);
    CHECK(r.split.gallery[1].source_id == "0002_c1s1_000451_03");
    CHECK(r.split.gallery[1].pixels.height == kImageHeight);
    CHECK(r.split.gallery[1].pixels.width == kImageWidth);
    CHECK(r.split.gallery[1].pixels.at(1, 100, 30) == doctest::Approx(64.0 / 255.0));
    REQUIRE(r.skipped.size() == 3);
    const std::string report = format_skip_report(r.skipped);
    CHECK(report.find("bounding_box_test/0003_c2s1_000001_00.jpg: unsupported raster format") != std::string::npos);
    CHECK(report.find("query/0004_c1s1_000001_00.ppm: P6 raster truncated") != std::string::npos);
    CHECK(report.find("query/badname.ppm: unparseable filename") != std::string::npos);
    CHECK(std::count(report.begin(), report.end(), '\n') == 3);
}

TEST_CASE("directories without loadable images are rejected") {
    testing::TempDir dir("empty");
    CHECK_THROWS_AS(load_market_dir(dir.path()), IngestionError);
    CHECK_THROWS_AS(load_market_dir(dir / "nope"), IngestionError);
    std::filesystem::create_directories(dir / "bounding_box_train");
    write_ppm_file(Image(4, 4), dir / "bounding_box_train" / "-1_c1s1_000000_00.ppm");
    CHECK_THROWS_AS(load_market_dir(dir.path()), IngestionError);
}

TEST_CASE("identity signatures are distinct below 256") {
    std::set<std::array<int, 4>> seen;
    for (int id = 0; id < 256; ++id) {
        const auto s = identity_signature(id);
        for (int v : s) CHECK((v >= 0 && v < 4));
        seen.insert(s);
    }
    CHECK(seen.size() == 256);
}

TEST_CASE("palette colors stay inside the unit cube and differ by entry") {
    for (int band = 0; band < 4; ++band) {
        std::set<std::array<double, 3>> colors;
        for (int i = 0; i < 4; ++i) {
            const auto c = band_color(band, i);
            for (double v : c) CHECK((v >= 0.0 && v <= 1.0));
            colors.insert(c);
        }
        CHECK(colors.size() == 4);
    }
}

TEST_CASE("zero noise gives identical images per identity and camera") {
    SynthParams p;
    p.num_ids = 6;
    p.noise_sigma = 0.0;
    const DatasetSplit s = synth_dataset(p);
    for (const auto& set : {s.train, s.query, s.gallery})
        for (const PersonImage& img : set) CHECK(img.pixels == render_identity(img.identity, img.camera));
    CHECK_FALSE(render_identity(3, 1) == render_identity(3, 2));
    CHECK_FALSE(render_identity(3, 1) == render_identity(4, 1));
}

TEST_CASE("synthetic split layout") {
    SynthParams p;
    p.num_ids = 10;
    p.images_per_id_per_cam = 4;
    p.num_cams = 3;
    const DatasetSplit s = synth_dataset(p);
    CHECK(s.train.size() == 5 * 3 * 4);
    CHECK(s.query.size() == 5 * 3 * 2);
    CHECK(s.gallery.size() == 5 * 3 * 2);
    for (const PersonImage& t : s.train) CHECK(t.identity < 5);
    for (const PersonImage& q : s.query) {
        CHECK(q.identity >= 5);
        bool cross = false;
        for (const PersonImage& g : s.gallery) cross |= g.identity == q.identity && g.camera != q.camera;
        CHECK(cross);
        CHECK(parse_market_name(q.source_id) == MarketLabel{q.identity, q.camera});
    }
    for (const auto& set : {s.train, s.query, s.gallery})
        for (const PersonImage& img : set)
            for (double v : img.pixels.data) REQUIRE((v >= 0.0 && v <= 1.0));

    p.images_per_id_per_cam = 1;
    const DatasetSplit one = synth_dataset(p);
    for (const PersonImage& q : one.query) CHECK(q.camera == 1);
    for (const PersonImage& g : one.gallery) CHECK(g.camera != 1);
}

TEST_CASE("synthetic data is deterministic in the seed") {
    SynthParams p;
    p.num_ids = 4;
    const DatasetSplit a = synth_dataset(p), b = synth_dataset(p);
    REQUIRE(a.query.size() == b.query.size());
    for (std::size_t i = 0; i < a.query.size(); ++i) CHECK(a.query[i].pixels == b.query[i].pixels);
    p.seed = 43;
    const DatasetSplit c = synth_dataset(p);
    CHECK_FALSE(a.query[0].pixels == c.query[0].pixels);
}

TEST_CASE("synthetic parameter validation") {
    auto bad = [](auto edit) {
        SynthParams p;
        edit(p);
        CHECK_THROWS_AS(p.validate(), ConfigError);
    };
    bad([](SynthParams& p) { p.num_ids = 1; });
    bad([](SynthParams& p) { p.num_cams = 1; });
    bad([](SynthParams& p) { p.images_per_id_per_cam = 0; });
    bad([](SynthParams& p) { p.noise_sigma = -0.1; });
    bad([](SynthParams& p) { p.noise_sigma = std::nan(""); });
    bad([](SynthParams& p) { p.occluders = 9; });
    CHECK_NOTHROW(SynthParams{}.validate());
}

TEST_CASE("a synthetic split written as a Market directory loads back") {
    SynthParams p;
    p.num_ids = 4;
    p.images_per_id_per_cam = 2;
    const DatasetSplit s = synth_dataset(p);
    testing::TempDir dir("synthdir");
    write_market_dir(s, dir.path());
    const LoadResult r = load_market_dir(dir.path());
    CHECK(r.skipped.empty());
    REQUIRE(r.split.train.size() == s.train.size());
    REQUIRE(r.split.query.size() == s.query.size());
    REQUIRE(r.split.gallery.size() == s.gallery.size());
    for (std::size_t i = 0; i < s.query.size(); ++i) {
        CHECK(r.split.query[i].identity == s.query[i].identity);
        CHECK(r.split.query[i].camera == s.query[i].camera);
        for (std::size_t k = 0; k < s.query[i].pixels.data.size(); ++k)
            CHECK(std::abs(r.split.query[i].pixels.data[k] - s.query[i].pixels.data[k]) <= 0.5 / 255.0 + 1e-12);
    }
}

}  // TEST_SUITE
