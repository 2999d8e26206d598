#include "pdh/dataio.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <regex>

#include "pdh/error.hpp"
#include "pdh/rng.hpp"

namespace fs = std::filesystem;

namespace pdh {

// ---------------------------------------------------------------------------
// P6 codec

namespace {

class HeaderScanner {
public:
    HeaderScanner(std::span<const std::uint8_t> b, std::size_t start) : bytes_(b), pos_(start) {}

    std::size_t pos() const { return pos_; }

    void skip_space_and_comments() {
        while (pos_ < bytes_.size()) {
            const int c = bytes_[pos_];
            if (c == '#') {
                while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
            } else if (std::isspace(c)) {
                ++pos_;
            } else {
                break;
            }
        }
    }

    unsigned long number(const char* what) {
        skip_space_and_comments();
        const std::size_t start = pos_;
        unsigned long v = 0;
        while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
            v = v * 10 + static_cast<unsigned long>(bytes_[pos_] - '0');
            if (v > (1ul << 24)) throw FormatError(std::string("P6 ") + what + " too large", start);
            ++pos_;
        }
        if (pos_ == start) throw FormatError(std::string("P6 header: expected ") + what, start);
        return v;
    }

    void single_whitespace() {
        if (pos_ >= bytes_.size() || !std::isspace(bytes_[pos_])) {
            throw FormatError("P6 header: expected one whitespace byte before the raster", pos_);
        }
        ++pos_;
    }

private:
    std::span<const std::uint8_t> bytes_;
    std::size_t pos_;
};

std::vector<std::uint8_t> read_file_bytes(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IngestionError("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

Image read_ppm(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '6') {
        throw FormatError("not a binary P6 pixmap", 0);
    }
    HeaderScanner h(bytes, 2);
    const auto width = h.number("width");
    const auto height = h.number("height");
    const std::size_t maxval_at = h.pos();
    const auto maxval = h.number("maxval");
    if (width == 0 || height == 0) throw FormatError("P6 image has zero extent", maxval_at);
    if (maxval == 0 || maxval > 65535) throw FormatError("P6 maxval out of range", maxval_at);
    h.single_whitespace();

    const std::size_t sample_bytes = maxval < 256 ? 1 : 2;
    const std::size_t need = width * height * 3 * sample_bytes;
    const std::size_t start = h.pos();
    if (bytes.size() - start < need) {
        throw FormatError("P6 raster truncated: need " + std::to_string(need) + " bytes", bytes.size());
    }

    Image img(height, width);
    const double denom = static_cast<double>(maxval);
    std::size_t p = start;
    for (std::size_t y = 0; y < height; ++y) {
        for (std::size_t x = 0; x < width; ++x) {
            for (std::size_t c = 0; c < 3; ++c) {
                unsigned v = bytes[p++];
                if (sample_bytes == 2) v = (v << 8) | bytes[p++];
                if (v > maxval) throw FormatError("P6 sample exceeds maxval", p - sample_bytes);
                img.at(c, y, x) = v / denom;
            }
        }
    }
    return img;
}

std::vector<std::uint8_t> write_ppm(const Image& image) {
    const std::string header =
        "P6\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n";
    std::vector<std::uint8_t> out(header.begin(), header.end());
    out.reserve(out.size() + image.data.size());
    for (std::size_t y = 0; y < image.height; ++y) {
        for (std::size_t x = 0; x < image.width; ++x) {
            for (std::size_t c = 0; c < 3; ++c) {
                const double v = std::clamp(image.at(c, y, x), 0.0, 1.0);
                out.push_back(static_cast<std::uint8_t>(std::lround(v * 255.0)));
            }
        }
    }
    return out;
}

Image read_ppm_file(const fs::path& path) { return read_ppm(read_file_bytes(path)); }

void write_ppm_file(const Image& image, const fs::path& path) {
    const auto bytes = write_ppm(image);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IngestionError("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IngestionError("failed writing " + path.string());
}

// ---------------------------------------------------------------------------
// Resize

Image resize_bilinear(const Image& src, std::size_t height, std::size_t width) {
    if (src.height == 0 || src.width == 0 || height == 0 || width == 0) {
        throw DimensionError("cannot resize an empty image");
    }
    Image dst(height, width);
    const double sy = static_cast<double>(src.height) / static_cast<double>(height);
    const double sx = static_cast<double>(src.width) / static_cast<double>(width);
    for (std::size_t y = 0; y < height; ++y) {
        const double fy = std::clamp((static_cast<double>(y) + 0.5) * sy - 0.5, 0.0,
                                     static_cast<double>(src.height - 1));
        const auto y0 = static_cast<std::size_t>(fy);
        const std::size_t y1 = std::min(y0 + 1, src.height - 1);
        const double wy = fy - static_cast<double>(y0);
        for (std::size_t x = 0; x < width; ++x) {
            const double fx = std::clamp((static_cast<double>(x) + 0.5) * sx - 0.5, 0.0,
                                         static_cast<double>(src.width - 1));
            const auto x0 = static_cast<std::size_t>(fx);
            const std::size_t x1 = std::min(x0 + 1, src.width - 1);
            const double wx = fx - static_cast<double>(x0);
            for (std::size_t c = 0; c < 3; ++c) {
                const double top = src.at(c, y0, x0) + wx * (src.at(c, y0, x1) - src.at(c, y0, x0));
                const double bot = src.at(c, y1, x0) + wx * (src.at(c, y1, x1) - src.at(c, y1, x0));
                dst.at(c, y, x) = top + wy * (bot - top);
            }
        }
    }
    return dst;
}

// ---------------------------------------------------------------------------
// Market-1501 style directories

std::optional<MarketLabel> parse_market_name(std::string_view stem) {
    static const std::regex pattern(R"(^(-1|\d+)_c(\d+)s(\d+)_(\d+)_(\d+)$)");
    std::match_results<std::string_view::const_iterator> m;
    if (!std::regex_match(stem.begin(), stem.end(), m, pattern)) return std::nullopt;
    try {
        const int id = std::stoi(m[1].str());
        const int cam = std::stoi(m[2].str());
        if (cam <= 0) return std::nullopt;
        return MarketLabel{id, cam};
    } catch (const std::out_of_range&) {
        return std::nullopt;
    }
}

LoadResult load_market_dir(const fs::path& root) {
    if (!fs::is_directory(root)) throw IngestionError("dataset directory not found: " + root.string());
    LoadResult result;
    std::size_t loaded = 0;

    auto load_subdir = [&](const char* name, std::vector<PersonImage>& dst, bool is_train) {
        const fs::path dir = root / name;
        if (!fs::is_directory(dir)) return;
        std::vector<fs::path> files;
        for (const auto& entry : fs::directory_iterator(dir)) {
            if (entry.is_regular_file()) files.push_back(entry.path());
        }
        std::sort(files.begin(), files.end(),
                  [](const fs::path& a, const fs::path& b) { return a.filename() < b.filename(); });
        for (const fs::path& f : files) {
            const std::string rel = std::string(name) + "/" + f.filename().string();
            std::string ext = f.extension().string();
            std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
            if (ext == ".jpg" || ext == ".jpeg" || ext == ".png" || ext == ".bmp") {
                result.skipped.push_back(rel + ": unsupported raster format (convert to P6 .ppm)");
                continue;
            }
            if (ext != ".ppm" && ext != ".pnm") {
                result.skipped.push_back(rel + ": not a raster file");
                continue;
            }
            const auto label = parse_market_name(f.stem().string());
            if (!label) {
                result.skipped.push_back(rel + ": unparseable filename");
                continue;
            }
            if (is_train && label->identity == kDistractorIdentity) {
                result.skipped.push_back(rel + ": distractor in training split");
                continue;
            }
            Image img;
            try {
                img = read_ppm_file(f);
            } catch (const IngestionError& e) {
                result.skipped.push_back(rel + ": " + e.what());
                continue;
            }
            if (img.height != kImageHeight || img.width != kImageWidth) {
                img = resize_bilinear(img, kImageHeight, kImageWidth);
            }
            dst.push_back({std::move(img), label->identity, label->camera, f.stem().string()});
            ++loaded;
        }
    };

    load_subdir("bounding_box_train", result.split.train, true);
    load_subdir("bounding_box_test", result.split.gallery, false);
    load_subdir("query", result.split.query, false);
    if (loaded == 0) throw IngestionError("no loadable images under " + root.string());
    return result;
}

std::string format_skip_report(const std::vector<std::string>& skipped) {
    std::string out;
    for (const auto& s : skipped) out += s + "\n";
    return out;
}

// ---------------------------------------------------------------------------
// Synthetic pedestrians

void SynthParams::validate() const {
    if (num_ids < 2) throw ConfigError("synthetic dataset needs at least 2 identities");
    if (num_cams < 2) throw ConfigError("synthetic dataset needs at least 2 cameras");
    if (images_per_id_per_cam < 1) throw ConfigError("need at least one image per identity per camera");
    if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) throw ConfigError("noise sigma must be >= 0");
    if (occluders < 0 || occluders > 8) throw ConfigError("occluders must be in 0..8");
}

std::array<int, 4> identity_signature(int identity) {
    // 167 is odd, so this is a bijection on [0, 256); its base-4 digits are the band palette indices.
    const int code = static_cast<int>((static_cast<unsigned>(identity) * 167u + 73u) % 256u);
    return {code & 3, (code >> 2) & 3, (code >> 4) & 3, (code >> 6) & 3};
}

std::array<double, 3> band_color(int band, int index) {
    // Hue wheel with per-band rotation; each band has its own four colors.
    const double hue = std::fmod(index * 90.0 + band * 22.5, 360.0) / 60.0;
    const double s = 0.5, v = 0.8;
    const int sector = static_cast<int>(hue) % 6;
    const double f = hue - std::floor(hue);
    const double p = v * (1 - s), q = v * (1 - s * f), t = v * (1 - s * (1 - f));
    switch (sector) {
        case 0: return {v, t, p};
        case 1: return {q, v, p};
        case 2: return {p, v, t};
        case 3: return {p, q, v};
        case 4: return {t, p, v};
        default: return {v, p, q};
    }
}

CameraTransform camera_transform(int camera) {
    if (camera <= 1) return {};
    CameraTransform t;
    t.gain = 1.0 / (1.0 + 0.25 * (camera - 1));
    for (int ch = 0; ch < 3; ++ch) t.offset[ch] = 0.05 * (((camera + ch) % 3) - 1);
    return t;
}

Image render_identity(int identity, int camera) {
    Image img(kImageHeight, kImageWidth);
    const auto sig = identity_signature(identity);
    const CameraTransform cam = camera_transform(camera);
    const std::size_t band_h = kImageHeight / 4;
    for (std::size_t y = 0; y < kImageHeight; ++y) {
        const int band = static_cast<int>(y / band_h);
        const auto rgb = band_color(band, sig[band]);
        for (std::size_t c = 0; c < 3; ++c) {
            const double v = std::clamp(cam.gain * rgb[c] + cam.offset[c], 0.0, 1.0);
            for (std::size_t x = 0; x < kImageWidth; ++x) img.at(c, y, x) = v;
        }
    }
    return img;
}

namespace {

// Dark full-width strip 16..32 rows high at a random height.
void occlude(Image& img, Rng& rng) {
    const std::size_t h = 16 + rng.below(17);
    const std::size_t y0 = rng.below(img.height - h + 1);
    const double shade = 0.1 * rng.uniform();
    for (std::size_t c = 0; c < 3; ++c) {
        for (std::size_t y = y0; y < y0 + h; ++y) {
            for (std::size_t x = 0; x < img.width; ++x) img.at(c, y, x) *= shade;
        }
    }
}

}  // namespace

DatasetSplit synth_dataset(const SynthParams& params) {
    params.validate();
    DatasetSplit split;
    Rng rng(params.seed);
    const int train_ids = params.num_ids / 2;
    const int n = params.images_per_id_per_cam;
    char name[64];
    for (int id = 0; id < params.num_ids; ++id) {
        for (int cam = 1; cam <= params.num_cams; ++cam) {
            const Image clean = render_identity(id, cam);
            for (int j = 0; j < n; ++j) {
                Image img = clean;
                if (params.noise_sigma > 0.0) {
                    for (int o = 0; o < params.occluders; ++o) occlude(img, rng);
                    for (double& v : img.data) v = std::clamp(v + params.noise_sigma * rng.normal(), 0.0, 1.0);
                }
                std::snprintf(name, sizeof name, "%04d_c%ds1_%06d_00", id, cam, j);
                PersonImage p{std::move(img), id, cam, name};
                if (id < train_ids) {
                    split.train.push_back(std::move(p));
                } else if (n >= 2 ? j < n / 2 : cam == 1) {
                    split.query.push_back(std::move(p));
                } else {
                    split.gallery.push_back(std::move(p));
                }
            }
        }
    }
    return split;
}

void write_market_dir(const DatasetSplit& split, const fs::path& root) {
    const std::pair<const char*, const std::vector<PersonImage>*> parts[] = {
        {"bounding_box_train", &split.train}, {"bounding_box_test", &split.gallery}, {"query", &split.query}};
    for (const auto& [name, images] : parts) {
        fs::create_directories(root / name);
        for (const PersonImage& p : *images) write_ppm_file(p.pixels, root / name / (p.source_id + ".ppm"));
    }
}

}  // namespace pdh
