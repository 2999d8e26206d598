#include "pdh/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "pdh/error.hpp"

namespace pdh {

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value, std::string_view expected) {
    throw ConfigError("bad value '" + std::string(value) + "' for " + std::string(key) + " (expected " +
                      std::string(expected) + ")");
}

template <class T>
T parse_number(std::string_view key, std::string_view value, std::string_view expected) {
    T v{};
    const char* end = value.data() + value.size();
    const auto [ptr, ec] = std::from_chars(value.data(), end, v);
    if (ec != std::errc{} || ptr != end || value.empty()) bad_value(key, value, expected);
    return v;
}

std::size_t parse_count(std::string_view key, std::string_view value) {
    return parse_number<std::size_t>(key, value, "a non-negative integer");
}

double parse_real(std::string_view key, std::string_view value) {
    const double v = parse_number<double>(key, value, "a number");
    if (!std::isfinite(v)) bad_value(key, value, "a finite number");
    return v;
}

bool parse_bool(std::string_view key, std::string_view value) {
    if (value == "1" || value == "true" || value == "yes") return true;
    if (value == "0" || value == "false" || value == "no") return false;
    bad_value(key, value, "true or false");
}

std::string real_text(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

const std::vector<std::string>& RunConfig::keys() {
    static const std::vector<std::string> k{
        "scheme",    "bits",         "arch",       "hidden",      "input_pool", "share_weights",
        "lr",        "batch",        "epochs",     "weight_decay", "seed",      "triplets_per_epoch",
        "margin",    "pooling",      "max_rank",   "distractors", "data",       "synth_ids",
        "synth_images", "synth_cams", "synth_sigma", "synth_occluders", "synth_seed", "out"};
    return k;
}

void RunConfig::set(std::string_view key, std::string_view raw) {
    const std::string value = trim(raw);
    if (key == "scheme") {
        scheme = value;
    } else if (key == "bits") {
        bits = parse_count(key, value);
    } else if (key == "arch") {
        if (value == "conv") {
            arch.family = ArchSpec::Family::Conv;
        } else if (value == "mlp") {
            arch.family = ArchSpec::Family::Mlp;
        } else {
            bad_value(key, value, "conv or mlp");
        }
    } else if (key == "hidden") {
        arch.hidden = parse_count(key, value);
    } else if (key == "input_pool") {
        arch.input_pool = parse_count(key, value);
    } else if (key == "share_weights") {
        share_weights = parse_bool(key, value);
    } else if (key == "lr") {
        train.lr = parse_real(key, value);
    } else if (key == "batch") {
        train.batch_size = parse_count(key, value);
    } else if (key == "epochs") {
        train.epochs = parse_number<int>(key, value, "an integer");
    } else if (key == "weight_decay") {
        train.weight_decay = parse_real(key, value);
    } else if (key == "seed") {
        train.seed = parse_number<std::uint64_t>(key, value, "a non-negative integer");
    } else if (key == "triplets_per_epoch") {
        train.triplets_per_epoch = parse_count(key, value);
    } else if (key == "margin") {
        train.margin = parse_real(key, value);
    } else if (key == "pooling") {
        pooling = parse_pooling(value);
    } else if (key == "max_rank") {
        max_rank = parse_count(key, value);
    } else if (key == "distractors") {
        if (value == "junk") {
            distractors = DistractorMode::Junk;
        } else if (value == "noise") {
            distractors = DistractorMode::Noise;
        } else {
            bad_value(key, value, "junk or noise");
        }
    } else if (key == "data") {
        data = value;
    } else if (key == "synth_ids") {
        synth.num_ids = parse_number<int>(key, value, "an integer");
    } else if (key == "synth_images") {
        synth.images_per_id_per_cam = parse_number<int>(key, value, "an integer");
    } else if (key == "synth_cams") {
        synth.num_cams = parse_number<int>(key, value, "an integer");
    } else if (key == "synth_sigma") {
        synth.noise_sigma = parse_real(key, value);
    } else if (key == "synth_occluders") {
        synth.occluders = parse_number<int>(key, value, "an integer");
    } else if (key == "synth_seed") {
        synth.seed = parse_number<std::uint64_t>(key, value, "a non-negative integer");
    } else if (key == "out") {
        if (value.empty()) bad_value(key, value, "a directory");
        out = value;
    } else {
        throw ConfigError("unknown configuration key '" + std::string(key) + "'");
    }
}

void RunConfig::validate() const {
    const PartitionScheme s = builtin_scheme(scheme);
    if (bits == 0 || bits > 4096) throw ConfigError("bits per part must be in 1..4096");
    if (arch.input_pool == 0) throw ConfigError("input_pool must be at least 1");
    if (arch.family == ArchSpec::Family::Mlp && arch.hidden == 0) throw ConfigError("hidden must be positive");
    if (share_weights && !s.equal_sized()) {
        throw ConfigError("share_weights requires equal-sized strips; " + scheme + " is unequal");
    }
    train.validate();
    Protocol{max_rank, distractors}.validate();
    if (data.empty()) synth.validate();
    if (out.empty()) throw ConfigError("output directory must be set");
    // Architecture must fit every strip.
    for (const Strip& st : s.strips) {
        try {
            (void)arch.build({3, st.height, s.image_width}, bits);
        } catch (const ConfigError&) {
            throw;
        } catch (const Error& e) {
            throw ConfigError("architecture does not fit strip height " + std::to_string(st.height) + ": " +
                              e.what());
        }
    }
}

BankConfig RunConfig::bank_config() const {
    BankConfig b;
    b.arch = arch;
    b.bits = bits;
    b.train = train;
    b.base_seed = train.seed;
    b.share_weights = share_weights;
    return b;
}

Protocol RunConfig::protocol() const { return Protocol{max_rank, distractors}; }

std::string RunConfig::to_text() const {
    std::ostringstream o;
    o << "scheme=" << scheme << "\n"
      << "bits=" << bits << "\n"
      << "arch=" << (arch.family == ArchSpec::Family::Conv ? "conv" : "mlp") << "\n"
      << "hidden=" << arch.hidden << "\n"
      << "input_pool=" << arch.input_pool << "\n"
      << "share_weights=" << (share_weights ? "true" : "false") << "\n"
      << "lr=" << real_text(train.lr) << "\n"
      << "batch=" << train.batch_size << "\n"
      << "epochs=" << train.epochs << "\n"
      << "weight_decay=" << real_text(train.weight_decay) << "\n"
      << "seed=" << train.seed << "\n"
      << "triplets_per_epoch=" << train.triplets_per_epoch << "\n"
      << "margin=" << real_text(train.margin) << "\n"
      << "pooling=" << to_string(pooling) << "\n"
      << "max_rank=" << max_rank << "\n"
      << "distractors=" << (distractors == DistractorMode::Junk ? "junk" : "noise") << "\n"
      << "data=" << data.string() << "\n"
      << "synth_ids=" << synth.num_ids << "\n"
      << "synth_images=" << synth.images_per_id_per_cam << "\n"
      << "synth_cams=" << synth.num_cams << "\n"
      << "synth_sigma=" << real_text(synth.noise_sigma) << "\n"
      << "synth_occluders=" << synth.occluders << "\n"
      << "synth_seed=" << synth.seed << "\n"
      << "out=" << out.string() << "\n";
    return o.str();
}

std::pair<std::string, std::string> split_assignment(std::string_view text) {
    const auto eq = text.find('=');
    if (eq == std::string_view::npos) {
        throw ConfigError("expected key=value, got '" + std::string(text) + "'");
    }
    return {trim(text.substr(0, eq)), trim(text.substr(eq + 1))};
}

void apply_config_text(RunConfig& cfg, std::istream& in, std::string_view source) {
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        if (trim(line).empty()) continue;
        try {
            const auto [k, v] = split_assignment(line);
            cfg.set(k, v);
        } catch (const ConfigError& e) {
            throw ConfigError(std::string(source) + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
}

void apply_config_file(RunConfig& cfg, const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    apply_config_text(cfg, in, path.string());
}

}  // namespace pdh
