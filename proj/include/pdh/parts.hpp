#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pdh/dataio.hpp"
#include "pdh/hamcode.hpp"
#include "pdh/netcore.hpp"
#include "pdh/triplet.hpp"

namespace pdh {

struct Strip {
    std::size_t row_offset = 0;
    std::size_t height = 0;
    friend bool operator==(const Strip&, const Strip&) = default;
};

// Horizontal strips, top to bottom, each spanning the full image width.
struct PartitionScheme {
    std::string name;
    std::size_t image_height = kImageHeight;
    std::size_t image_width = kImageWidth;
    std::vector<Strip> strips;

    std::size_t parts() const noexcept { return strips.size(); }
    bool equal_sized() const;
    void validate() const;

    friend bool operator==(const PartitionScheme&, const PartitionScheme&) = default;
};

// EQL3, UnEQL3, Overlap3, EQL4, UnEQL4, Overlap4, EQL5 on a 128x64 image, plus
// WHOLE (a single strip covering the image) for the whole-image baseline.
PartitionScheme builtin_scheme(std::string_view name);
const std::vector<std::string>& builtin_scheme_names();

// Rows [offset_k, offset_k + height_k) of the image as (3, height_k, W) tensors.
std::vector<Tensor> extract_parts(const PersonImage& image, const PartitionScheme& scheme);

// Network family used for every part; input geometry comes from the strip.
struct ArchSpec {
    enum class Family { Conv, Mlp };
    Family family = Family::Conv;
    std::size_t hidden = 64;     // MLP hidden width
    std::size_t input_pool = 1;  // leading max-pool factor, 1 = none

    std::vector<LayerSpec> build(Shape3 input, std::size_t bits) const;
};

struct BankConfig {
    ArchSpec arch;
    std::size_t bits = 32;  // per part
    TrainConfig train;
    std::uint64_t base_seed = 42;
    bool share_weights = false;
};

struct PartModelBank {
    PartitionScheme scheme;
    std::vector<HashNet> nets;  // one per strip, or a single shared net
    std::size_t bits = 0;
    bool share_weights = false;
    std::vector<std::uint64_t> seeds;

    const HashNet& net_for(std::size_t part) const { return share_weights ? nets.front() : nets.at(part); }
    std::size_t code_bits() const noexcept { return bits * scheme.parts(); }
    void validate() const;
};

struct BankTraining {
    PartModelBank bank;
    std::vector<std::vector<LossReport>> histories;  // per trained network
};

// Whole-set training tensor for strip k of every image: (N, 3, h_k, W).
LabeledSet part_subset(std::span<const PersonImage> images, const PartitionScheme& scheme, std::size_t part);

// Trains part k with net and sampling seed base_seed + k; parts train
// concurrently. With share_weights, one network (seed base_seed) is trained on
// the union of all part subsets, each triplet drawn from a single part position.
BankTraining train_part_bank(std::span<const PersonImage> images, const PartitionScheme& scheme,
                             const BankConfig& config);

// Concatenated per-part relaxed codes, strip order.
std::vector<double> relaxed_code(const PartModelBank& bank, const PersonImage& image);

BitCode encode_image(const PartModelBank& bank, const PersonImage& image);

// Batched encoders: each part network runs once over all images, with the
// batch split across OpenMP threads. Equal to calling the single-image
// versions in order.
std::vector<std::vector<double>> relaxed_codes(const PartModelBank& bank, std::span<const PersonImage> images);
std::vector<BitCode> encode_images(const PartModelBank& bank, std::span<const PersonImage> images);

// Directory with one PDHNET1 file per network and manifest.txt (key=value).
void save_bank(const PartModelBank& bank, const std::filesystem::path& dir);
PartModelBank load_bank(const std::filesystem::path& dir);

}  // namespace pdh
