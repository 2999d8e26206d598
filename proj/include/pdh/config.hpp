#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "pdh/dataio.hpp"
#include "pdh/evalkit.hpp"
#include "pdh/parts.hpp"
#include "pdh/triplet.hpp"

namespace pdh {

// Flat key=value run configuration. Keys:
//   scheme bits arch hidden input_pool share_weights
//   lr batch epochs weight_decay seed triplets_per_epoch margin
//   pooling max_rank distractors
//   data synth_ids synth_images synth_cams synth_sigma synth_occluders synth_seed
//   out
// An empty `data` selects the synthetic generator.
struct RunConfig {
    std::string scheme = "EQL4";
    std::size_t bits = 32;
    ArchSpec arch;
    bool share_weights = false;
    TrainConfig train;
    Pooling pooling = Pooling::Single;
    std::size_t max_rank = 50;
    DistractorMode distractors = DistractorMode::Junk;
    std::filesystem::path data;
    SynthParams synth;
    std::filesystem::path out = "pdh_out";

    // Throws ConfigError for unknown keys and unparsable values.
    void set(std::string_view key, std::string_view value);
    void validate() const;

    BankConfig bank_config() const;
    Protocol protocol() const;

    // Every key in a fixed order; parse(to_text()) reproduces the config.
    std::string to_text() const;

    static const std::vector<std::string>& keys();
};

// Applies "key=value" lines to `cfg`; '#' starts a comment, blank lines are ignored.
void apply_config_text(RunConfig& cfg, std::istream& in, std::string_view source = "config");
void apply_config_file(RunConfig& cfg, const std::filesystem::path& path);

// Splits "key=value"; ConfigError when there is no '='.
std::pair<std::string, std::string> split_assignment(std::string_view text);

}  // namespace pdh
