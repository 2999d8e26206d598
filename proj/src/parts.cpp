#include "pdh/parts.hpp"

#include <cmath>
#include <exception>
#include <fstream>
#include <map>
#include <sstream>

#include "pdh/error.hpp"

namespace fs = std::filesystem;

namespace pdh {

namespace {

PartitionScheme make_scheme(std::string name, std::vector<Strip> strips) {
    PartitionScheme s{std::move(name), kImageHeight, kImageWidth, std::move(strips)};
    s.validate();
    return s;
}

PartitionScheme equal_scheme(std::string name, std::size_t m) {
    const std::size_t h = kImageHeight / m;
    std::vector<Strip> strips;
    for (std::size_t k = 0; k < m; ++k) strips.push_back({k * h, h});
    return make_scheme(std::move(name), std::move(strips));
}

PartitionScheme overlap_scheme(std::string name, std::size_t m, std::size_t h) {
    std::vector<Strip> strips;
    const double step = static_cast<double>(kImageHeight - h) / static_cast<double>(m - 1);
    for (std::size_t k = 0; k < m; ++k) {
        strips.push_back({static_cast<std::size_t>(std::lround(static_cast<double>(k) * step)), h});
    }
    return make_scheme(std::move(name), std::move(strips));
}

PartitionScheme contiguous_scheme(std::string name, std::initializer_list<std::size_t> heights) {
    std::vector<Strip> strips;
    std::size_t at = 0;
    for (std::size_t h : heights) {
        strips.push_back({at, h});
        at += h;
    }
    return make_scheme(std::move(name), std::move(strips));
}

Tensor strip_tensor(const Image& img, const Strip& s) {
    Tensor t({3, s.height, img.width});
    const std::size_t plane = s.height * img.width;
    for (std::size_t c = 0; c < 3; ++c) {
        const double* src = img.data.data() + (c * img.height + s.row_offset) * img.width;
        std::copy(src, src + plane, t.data.begin() + static_cast<std::ptrdiff_t>(c * plane));
    }
    return t;
}

void check_image(const PersonImage& image, const PartitionScheme& scheme) {
    if (image.pixels.height != scheme.image_height || image.pixels.width != scheme.image_width) {
        throw IngestionError("image " + image.source_id + " is " + std::to_string(image.pixels.height) + "x" +
                             std::to_string(image.pixels.width) + ", scheme " + scheme.name + " expects " +
                             std::to_string(scheme.image_height) + "x" + std::to_string(scheme.image_width));
    }
}

std::string join(const std::vector<std::string>& v, char sep) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += sep;
        out += v[i];
    }
    return out;
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream in(s);
    while (std::getline(in, cur, sep)) out.push_back(cur);
    return out;
}

std::size_t parse_size(const std::string& s, const std::string& key) {
    try {
        std::size_t used = 0;
        const unsigned long long v = std::stoull(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return static_cast<std::size_t>(v);
    } catch (const std::logic_error&) {
        throw IngestionError("bank manifest: bad value for " + key + ": '" + s + "'");
    }
}

}  // namespace

bool PartitionScheme::equal_sized() const {
    for (const Strip& s : strips) {
        if (s.height != strips.front().height) return false;
    }
    return true;
}

void PartitionScheme::validate() const {
    if (strips.empty()) throw ConfigError("partition scheme " + name + " has no strips");
    if (image_height == 0 || image_width == 0) throw ConfigError("partition scheme " + name + " has empty image");
    for (std::size_t k = 0; k < strips.size(); ++k) {
        const Strip& s = strips[k];
        if (s.height == 0 || s.row_offset + s.height > image_height) {
            throw ConfigError("strip " + std::to_string(k) + " of " + name + " exceeds the image height");
        }
        if (k > 0 && s.row_offset < strips[k - 1].row_offset) {
            throw ConfigError("strips of " + name + " must be ordered top to bottom");
        }
    }
}

const std::vector<std::string>& builtin_scheme_names() {
    static const std::vector<std::string> names{"EQL3",   "UnEQL3", "Overlap3", "EQL4", "UnEQL4",
                                                "Overlap4", "EQL5",   "WHOLE"};
    return names;
}

PartitionScheme builtin_scheme(std::string_view name) {
    if (name == "EQL3") return equal_scheme("EQL3", 3);
    if (name == "EQL4") return equal_scheme("EQL4", 4);
    if (name == "EQL5") return equal_scheme("EQL5", 5);
    if (name == "UnEQL3") return contiguous_scheme("UnEQL3", {24, 56, 48});
    if (name == "UnEQL4") return contiguous_scheme("UnEQL4", {28, 40, 40, 20});
    if (name == "Overlap3") return overlap_scheme("Overlap3", 3, 56);
    if (name == "Overlap4") return overlap_scheme("Overlap4", 4, 48);
    if (name == "WHOLE") return make_scheme("WHOLE", {{0, kImageHeight}});
    throw ConfigError("unknown partition scheme '" + std::string(name) + "'");
}

std::vector<Tensor> extract_parts(const PersonImage& image, const PartitionScheme& scheme) {
    check_image(image, scheme);
    std::vector<Tensor> parts;
    parts.reserve(scheme.parts());
    for (const Strip& s : scheme.strips) parts.push_back(strip_tensor(image.pixels, s));
    return parts;
}

std::vector<LayerSpec> ArchSpec::build(Shape3 input, std::size_t bits) const {
    switch (family) {
        case Family::Conv: return default_architecture(input, bits, input_pool);
        case Family::Mlp: return mlp_architecture(input, hidden, bits, input_pool);
    }
    throw ConfigError("unknown architecture family");
}

void PartModelBank::validate() const {
    scheme.validate();
    const std::size_t want = share_weights ? 1 : scheme.parts();
    if (nets.size() != want) {
        throw ConfigError("bank holds " + std::to_string(nets.size()) + " networks, scheme " + scheme.name +
                          " needs " + std::to_string(want));
    }
    if (share_weights && !scheme.equal_sized()) {
        throw ConfigError("weight sharing requires equal-sized strips; " + scheme.name + " is unequal");
    }
    for (std::size_t k = 0; k < scheme.parts(); ++k) {
        const HashNet& net = net_for(k);
        const Shape3 want_in{3, scheme.strips[k].height, scheme.image_width};
        if (!(net.input_shape() == want_in)) {
            throw DimensionError("network for part " + std::to_string(k) + " expects " + net.input_shape().str() +
                                 ", strip is " + want_in.str());
        }
        if (net.hash_bits() != bits) {
            throw DimensionError("network for part " + std::to_string(k) + " emits " +
                                 std::to_string(net.hash_bits()) + " bits, bank uses " + std::to_string(bits));
        }
    }
}

LabeledSet part_subset(std::span<const PersonImage> images, const PartitionScheme& scheme, std::size_t part) {
    const Strip& s = scheme.strips.at(part);
    LabeledSet set{Tensor({images.size(), 3, s.height, scheme.image_width}), {}, {}};
    const std::size_t row = set.samples.row_size();
    for (std::size_t i = 0; i < images.size(); ++i) {
        check_image(images[i], scheme);
        const Tensor t = strip_tensor(images[i].pixels, s);
        std::copy(t.data.begin(), t.data.end(), set.samples.data.begin() + static_cast<std::ptrdiff_t>(i * row));
        set.labels.push_back(images[i].identity);
    }
    return set;
}

BankTraining train_part_bank(std::span<const PersonImage> images, const PartitionScheme& scheme,
                             const BankConfig& config) {
    scheme.validate();
    config.train.validate();
    if (config.bits == 0) throw ConfigError("per-part bits must be positive");
    if (config.share_weights && !scheme.equal_sized()) {
        throw ConfigError("weight sharing requires equal-sized strips; " + scheme.name + " is unequal");
    }
    for (const PersonImage& im : images) check_image(im, scheme);

    BankTraining out;
    out.bank.scheme = scheme;
    out.bank.bits = config.bits;
    out.bank.share_weights = config.share_weights;
    const std::size_t m = scheme.parts();

    if (config.share_weights) {
        // Union of part subsets; triplets stay within one part position.
        const Strip& s0 = scheme.strips.front();
        LabeledSet uni{Tensor({images.size() * m, 3, s0.height, scheme.image_width}), {}, {}};
        std::vector<int> position;
        const std::size_t row = uni.samples.row_size();
        for (std::size_t k = 0; k < m; ++k) {
            const LabeledSet sub = part_subset(images, scheme, k);
            std::copy(sub.samples.data.begin(), sub.samples.data.end(),
                      uni.samples.data.begin() + static_cast<std::ptrdiff_t>(k * images.size() * row));
            uni.labels.insert(uni.labels.end(), sub.labels.begin(), sub.labels.end());
            position.insert(position.end(), images.size(), static_cast<int>(k));
        }
        uni.groups = std::move(position);
        TrainConfig tc = config.train;
        tc.seed = config.base_seed;
        HashNet net(config.arch.build({3, s0.height, scheme.image_width}, config.bits), config.base_seed);
        TrainResult r = train_hashnet(std::move(net), uni, tc);
        out.bank.nets.push_back(std::move(r.net));
        out.bank.seeds.push_back(config.base_seed);
        out.histories.push_back(std::move(r.history));
        return out;
    }

    std::vector<std::optional<TrainResult>> results(m);
    std::vector<std::exception_ptr> errors(m);
    const auto parts = static_cast<std::ptrdiff_t>(m);
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t k = 0; k < parts; ++k) {
        const auto part = static_cast<std::size_t>(k);
        try {
            const std::uint64_t seed = config.base_seed + part;
            const Strip& s = scheme.strips[part];
            HashNet net(config.arch.build({3, s.height, scheme.image_width}, config.bits), seed);
            TrainConfig tc = config.train;
            tc.seed = seed;
            results[part] = train_hashnet(std::move(net), part_subset(images, scheme, part), tc);
        } catch (...) {
            errors[part] = std::current_exception();
        }
    }
    for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    for (std::size_t k = 0; k < m; ++k) {
        out.bank.nets.push_back(std::move(results[k]->net));
        out.bank.seeds.push_back(config.base_seed + k);
        out.histories.push_back(std::move(results[k]->history));
    }
    return out;
}

std::vector<double> relaxed_code(const PartModelBank& bank, const PersonImage& image) {
    const auto parts = extract_parts(image, bank.scheme);
    std::vector<double> code;
    code.reserve(bank.code_bits());
    for (std::size_t k = 0; k < parts.size(); ++k) {
        Tensor batch = parts[k];
        batch.shape.insert(batch.shape.begin(), 1);
        const Tensor out = forward(bank.net_for(k), batch);
        code.insert(code.end(), out.data.begin(), out.data.end());
    }
    return code;
}

BitCode encode_image(const PartModelBank& bank, const PersonImage& image) {
    return binarize(relaxed_code(bank, image));
}

std::vector<std::vector<double>> relaxed_codes(const PartModelBank& bank, std::span<const PersonImage> images) {
    std::vector<std::vector<double>> codes(images.size());
    if (images.empty()) return codes;
    for (auto& c : codes) c.reserve(bank.code_bits());
    for (std::size_t k = 0; k < bank.scheme.parts(); ++k) {
        const LabeledSet sub = part_subset(images, bank.scheme, k);
        const Tensor out = forward(bank.net_for(k), sub.samples);
        for (std::size_t i = 0; i < images.size(); ++i) {
            const auto row = out.row(i);
            codes[i].insert(codes[i].end(), row.begin(), row.end());
        }
    }
    return codes;
}

std::vector<BitCode> encode_images(const PartModelBank& bank, std::span<const PersonImage> images) {
    const auto relaxed = relaxed_codes(bank, images);
    std::vector<BitCode> out;
    out.reserve(relaxed.size());
    for (const auto& r : relaxed) out.push_back(binarize(r));
    return out;
}

// ---------------------------------------------------------------------------
// Persistence

void save_bank(const PartModelBank& bank, const fs::path& dir) {
    bank.validate();
    fs::create_directories(dir);
    std::vector<std::string> strips, seeds, files;
    for (const Strip& s : bank.scheme.strips) {
        strips.push_back(std::to_string(s.row_offset) + ":" + std::to_string(s.height));
    }
    for (std::uint64_t s : bank.seeds) seeds.push_back(std::to_string(s));
    for (std::size_t k = 0; k < bank.nets.size(); ++k) {
        files.push_back(bank.share_weights ? "shared.pdhnet" : "part" + std::to_string(k) + ".pdhnet");
        save_checkpoint(bank.nets[k], (dir / files.back()).string());
    }
    std::ofstream m(dir / "manifest.txt");
    if (!m) throw IngestionError("cannot write bank manifest in " + dir.string());
    m << "scheme=" << bank.scheme.name << "\n"
      << "image_height=" << bank.scheme.image_height << "\n"
      << "image_width=" << bank.scheme.image_width << "\n"
      << "parts=" << bank.scheme.parts() << "\n"
      << "strips=" << join(strips, ',') << "\n"
      << "bits=" << bank.bits << "\n"
      << "share_weights=" << (bank.share_weights ? 1 : 0) << "\n"
      << "seeds=" << join(seeds, ',') << "\n"
      << "nets=" << join(files, ',') << "\n";
    if (!m) throw IngestionError("failed writing bank manifest in " + dir.string());
}

PartModelBank load_bank(const fs::path& dir) {
    std::ifstream in(dir / "manifest.txt");
    if (!in) throw IngestionError("no bank manifest in " + dir.string());
    std::map<std::string, std::string> kv;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw IngestionError("bank manifest: malformed line '" + line + "'");
        kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    auto get = [&](const std::string& key) -> const std::string& {
        auto it = kv.find(key);
        if (it == kv.end()) throw IngestionError("bank manifest: missing key " + key);
        return it->second;
    };

    PartModelBank bank;
    bank.scheme.name = get("scheme");
    bank.scheme.image_height = parse_size(get("image_height"), "image_height");
    bank.scheme.image_width = parse_size(get("image_width"), "image_width");
    for (const std::string& s : split(get("strips"), ',')) {
        const auto colon = s.find(':');
        if (colon == std::string::npos) throw IngestionError("bank manifest: bad strip '" + s + "'");
        bank.scheme.strips.push_back(
            {parse_size(s.substr(0, colon), "strips"), parse_size(s.substr(colon + 1), "strips")});
    }
    if (parse_size(get("parts"), "parts") != bank.scheme.parts()) {
        throw IngestionError("bank manifest: part count disagrees with strip list");
    }
    bank.bits = parse_size(get("bits"), "bits");
    bank.share_weights = get("share_weights") == "1";
    for (const std::string& s : split(get("seeds"), ',')) bank.seeds.push_back(parse_size(s, "seeds"));
    for (const std::string& f : split(get("nets"), ',')) {
        if (f.find('/') != std::string::npos || f.find("..") != std::string::npos) {
            throw IngestionError("bank manifest: network file must be a plain name: " + f);
        }
        bank.nets.push_back(load_checkpoint((dir / f).string()));
    }
    try {
        bank.validate();
    } catch (const ConfigError& e) {
        throw IngestionError(std::string("bank manifest: ") + e.what());
    } catch (const DimensionError& e) {
        throw IngestionError(std::string("bank manifest: ") + e.what());
    }
    return bank;
}

}  // namespace pdh
