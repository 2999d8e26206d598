#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace pdh {

inline constexpr std::size_t kImageHeight = 128;
inline constexpr std::size_t kImageWidth = 64;
inline constexpr int kDistractorIdentity = -1;

// RGB raster, channel-major (all R rows, then G, then B), values in [0,1].
struct Image {
    static constexpr std::size_t channels = 3;
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<double> data;

    Image() = default;
    Image(std::size_t h, std::size_t w, double fill = 0.0) : height(h), width(w), data(3 * h * w, fill) {}

    double& at(std::size_t c, std::size_t y, std::size_t x) { return data[(c * height + y) * width + x]; }
    double at(std::size_t c, std::size_t y, std::size_t x) const { return data[(c * height + y) * width + x]; }

    friend bool operator==(const Image&, const Image&) = default;
};

struct PersonImage {
    Image pixels;
    int identity = 0;  // kDistractorIdentity for distractors
    int camera = 1;
    std::string source_id;

    bool is_distractor() const noexcept { return identity == kDistractorIdentity; }
};

struct DatasetSplit {
    std::vector<PersonImage> train;
    std::vector<PersonImage> query;
    std::vector<PersonImage> gallery;
};

// Binary P6 portable pixmap. Values are scaled by maxval on read and
// quantized to 8 bits on write.
Image read_ppm(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> write_ppm(const Image& image);
Image read_ppm_file(const std::filesystem::path& path);
void write_ppm_file(const Image& image, const std::filesystem::path& path);

// Bilinear resampling with pixel-center alignment and edge clamping.
Image resize_bilinear(const Image& src, std::size_t height, std::size_t width);

struct MarketLabel {
    int identity = 0;
    int camera = 0;
    friend bool operator==(const MarketLabel&, const MarketLabel&) = default;
};

// Parses "<id>_c<cam>s<seq>_<frame>_<n>" (extension already stripped).
std::optional<MarketLabel> parse_market_name(std::string_view stem);

struct LoadResult {
    DatasetSplit split;
    std::vector<std::string> skipped;  // "<relative path>: <reason>"
};

// Reads bounding_box_train/, bounding_box_test/ and query/ under `root`.
// Files are visited in filename order and resized to 128x64.
LoadResult load_market_dir(const std::filesystem::path& root);

// Plain-text skip report, one entry per line.
std::string format_skip_report(const std::vector<std::string>& skipped);

struct SynthParams {
    int num_ids = 50;
    int images_per_id_per_cam = 4;
    int num_cams = 2;
    double noise_sigma = 0.08;
    std::uint64_t seed = 42;
    // Dark horizontal strips laid over each noisy image at random heights.
    // Like the pixel noise they vary per image, and noise_sigma = 0 disables
    // both, leaving clean renders.
    int occluders = 2;

    void validate() const;
};

// Palette index of each of the four horizontal bands of an identity. Distinct
// for all identities below 256.
std::array<int, 4> identity_signature(int identity);

// RGB color of palette entry `index` in band `band`.
std::array<double, 3> band_color(int band, int index);

// Gain and per-channel offset applied by a camera.
struct CameraTransform {
    double gain = 1.0;
    std::array<double, 3> offset{};
};
CameraTransform camera_transform(int camera);

// Noise-free rendering of an identity as seen by a camera.
Image render_identity(int identity, int camera);

// Identities [0, num_ids/2) train; the rest are split per (identity, camera)
// into the first half of the images as queries and the remainder as gallery
// (with one image per camera, camera 1 queries and other cameras form the
// gallery).
DatasetSplit synth_dataset(const SynthParams& params);

// Writes a split as a Market-style directory of P6 files.
void write_market_dir(const DatasetSplit& split, const std::filesystem::path& root);

}  // namespace pdh
