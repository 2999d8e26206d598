#include "pdh/commands.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <system_error>

#include "pdh/error.hpp"

namespace fs = std::filesystem;

namespace pdh {

namespace {

// Builds a command's output in a hidden sibling directory and swaps it into
// place on commit. Anything left uncommitted is deleted, including the output
// root when this command created it.
class Staging {
public:
    explicit Staging(fs::path target) : target_(std::move(target)) {
        const fs::path root = target_.parent_path();
        created_root_ = !root.empty() && !fs::exists(root);
        tmp_ = root / ("." + target_.filename().string() + ".partial");
        fs::remove_all(tmp_);
        fs::create_directories(tmp_);
    }
    Staging(const Staging&) = delete;
    Staging& operator=(const Staging&) = delete;
    ~Staging() {
        if (committed_) return;
        std::error_code ec;
        fs::remove_all(tmp_, ec);
        if (created_root_) fs::remove(target_.parent_path(), ec);  // only succeeds when empty
    }

    const fs::path& dir() const noexcept { return tmp_; }

    void commit() {
        fs::remove_all(target_);
        fs::rename(tmp_, target_);
        committed_ = true;
    }

private:
    fs::path target_;
    fs::path tmp_;
    bool created_root_ = false;
    bool committed_ = false;
};

void say(std::ostream* log, const std::string& line) {
    if (log) *log << line << "\n";
}

CodeIndex index_of(std::span<const PersonImage> images, std::span<const BitCode> codes, std::size_t bits) {
    CodeIndex idx(bits);
    idx.reserve(images.size());
    for (std::size_t i = 0; i < images.size(); ++i) idx.add(codes[i], images[i].source_id);
    return idx;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw IngestionError("cannot write " + path.string());
    out << text;
    if (!out) throw IngestionError("failed writing " + path.string());
}

void check_ids(const std::vector<GalleryRecord>& labels, const std::vector<std::string>& ids, std::string_view what) {
    if (labels.size() != ids.size()) {
        throw EvaluationError(std::string(what) + ": " + std::to_string(labels.size()) + " labels but " +
                              std::to_string(ids.size()) + " codes");
    }
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (labels[i].id != ids[i]) {
            throw EvaluationError(std::string(what) + ": record " + std::to_string(i) + " is '" + ids[i] +
                                  "' in the code file but '" + labels[i].id + "' in the label table");
        }
    }
}

double ms_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

DatasetSplit load_dataset(const RunConfig& cfg, std::ostream* log) {
    if (cfg.data.empty()) {
        say(log, "generating synthetic dataset (" + std::to_string(cfg.synth.num_ids) + " identities)");
        return synth_dataset(cfg.synth);
    }
    LoadResult r = load_market_dir(cfg.data);
    if (log && !r.skipped.empty()) *log << format_skip_report(r.skipped);
    return std::move(r.split);
}

std::vector<GalleryRecord> records_of(std::span<const PersonImage> images) {
    std::vector<GalleryRecord> out;
    out.reserve(images.size());
    for (const PersonImage& im : images) out.push_back({im.source_id, im.identity, im.camera, im.is_distractor()});
    return out;
}

void write_bank_loss_csv(std::ostream& out, const std::vector<std::vector<LossReport>>& histories) {
    out << "part,epoch,mean_loss,active_fraction\n";
    char buf[128];
    for (std::size_t k = 0; k < histories.size(); ++k) {
        for (std::size_t e = 0; e < histories[k].size(); ++e) {
            std::snprintf(buf, sizeof buf, "%zu,%zu,%.10f,%.6f\n", k, e + 1, histories[k][e].mean_loss,
                          histories[k][e].active_fraction);
            out << buf;
        }
    }
}

TrainOutputs cmd_train(const RunConfig& cfg, std::ostream* log) {
    cfg.validate();
    const PartitionScheme scheme = builtin_scheme(cfg.scheme);
    const DatasetSplit split = load_dataset(cfg, log);
    if (split.train.empty()) throw IngestionError("dataset has no training images");

    const fs::path target = cfg.out / "bank";
    Staging stage(target);
    say(log, "training " + std::to_string(cfg.share_weights ? 1 : scheme.parts()) + " network(s) on " +
                 std::to_string(split.train.size()) + " images, scheme " + scheme.name);
    TrainOutputs result{target, train_part_bank(split.train, scheme, cfg.bank_config())};
    save_bank(result.training.bank, stage.dir());
    {
        std::ofstream csv(stage.dir() / "loss.csv");
        write_bank_loss_csv(csv, result.training.histories);
        if (!csv) throw IngestionError("failed writing loss.csv");
    }
    // The output path is left out so that a bank's bytes do not depend on where it was written.
    std::string text = cfg.to_text();
    text.erase(text.rfind("out="));
    write_text(stage.dir() / "config.txt", text);
    stage.commit();
    for (std::size_t k = 0; k < result.training.histories.size(); ++k) {
        const auto& h = result.training.histories[k];
        if (h.empty()) continue;
        char buf[128];
        std::snprintf(buf, sizeof buf, "net %zu: loss %.6f -> %.6f", k, h.front().mean_loss, h.back().mean_loss);
        say(log, buf);
    }
    say(log, "bank written to " + target.string());
    return result;
}

fs::path cmd_encode(const RunConfig& cfg, const fs::path& bank_dir, std::ostream* log) {
    cfg.validate();
    const PartModelBank bank = load_bank(bank_dir.empty() ? cfg.out / "bank" : bank_dir);
    const DatasetSplit split = load_dataset(cfg, log);

    const fs::path target = cfg.out / "codes";
    Staging stage(target);
    const std::size_t L = bank.code_bits();

    const auto query_relaxed = relaxed_codes(bank, split.query);
    std::vector<BitCode> query_codes;
    query_codes.reserve(query_relaxed.size());
    for (const auto& r : query_relaxed) query_codes.push_back(binarize(r));
    const auto gallery_codes = encode_images(bank, split.gallery);

    write_codes_file(index_of(split.query, query_codes, L), stage.dir() / "query.codes");
    write_codes_file(index_of(split.gallery, gallery_codes, L), stage.dir() / "gallery.codes");
    RelaxedSet rel{L, {}, query_relaxed};
    for (const PersonImage& im : split.query) rel.ids.push_back(im.source_id);
    write_relaxed_file(rel, stage.dir() / "query.relaxed");
    write_labels_file(records_of(split.query), stage.dir() / "query_labels.csv");
    write_labels_file(records_of(split.gallery), stage.dir() / "gallery_labels.csv");
    stage.commit();
    say(log, "encoded " + std::to_string(split.query.size()) + " queries and " +
                 std::to_string(split.gallery.size()) + " gallery images at " + std::to_string(L) + " bits");
    return target;
}

EvalReport cmd_eval(const RunConfig& cfg, const fs::path& codes_dir, std::ostream* log) {
    cfg.validate();
    const fs::path dir = codes_dir.empty() ? cfg.out / "codes" : codes_dir;
    const CodeIndex query_index = read_codes_file(dir / "query.codes");
    const CodeIndex gallery_index = read_codes_file(dir / "gallery.codes");
    const auto query_labels = read_labels_file(dir / "query_labels.csv");
    const auto gallery_labels = read_labels_file(dir / "gallery_labels.csv");
    check_ids(query_labels, query_index.ids(), "query set");
    check_ids(gallery_labels, gallery_index.ids(), "gallery set");
    if (query_index.bits() != gallery_index.bits()) {
        throw EvaluationError("query codes have " + std::to_string(query_index.bits()) + " bits, gallery codes " +
                              std::to_string(gallery_index.bits()));
    }

    std::vector<QueryRecord> queries;
    for (const GalleryRecord& r : query_labels) queries.push_back({r.id, r.identity, r.camera});

    PooledQueries pooled;
    if (cfg.pooling == Pooling::Single) {
        pooled.records = queries;
        for (std::size_t i = 0; i < query_index.size(); ++i) pooled.codes.push_back(query_index.code(i));
    } else {
        const RelaxedSet rel = read_relaxed_file(dir / "query.relaxed");
        check_ids(query_labels, rel.ids, "relaxed query set");
        if (rel.bits != query_index.bits()) throw EvaluationError("relaxed and packed query codes differ in length");
        pooled = pool_by_group(queries, rel.values, cfg.pooling);
    }

    const EvalReport report = evaluate(pooled.records, pooled.codes, gallery_labels, gallery_index, cfg.protocol());

    const fs::path target = cfg.out / "eval";
    Staging stage(target);
    {
        std::ofstream txt(stage.dir() / "report.txt");
        txt << "pooling: " << to_string(cfg.pooling) << "\n";
        write_report_text(txt, report);
        std::ofstream csv(stage.dir() / "cmc.csv");
        write_cmc_csv(csv, report);
        if (!txt || !csv) throw EvaluationError("failed writing evaluation report");
    }
    write_text(stage.dir() / "summary.txt", summary_line(report) + "\n");
    stage.commit();
    say(log, summary_line(report));
    return report;
}

void write_bench_table(std::ostream& out, const BenchTable& t) {
    const BenchReport& s = t.search;
    char buf[256];
    std::snprintf(buf, sizeof buf, "# gallery=%zu bits=%zu queries=%zu\n", s.gallery_size, s.bits, s.repeats);
    out << buf << "method,feature_extraction_ms,distance_ms,sorting_ms,total_ms\n";
    std::snprintf(buf, sizeof buf, "hamming_counting,%.6f,%.6f,%.6f,%.6f\n", t.feature_extraction_ms,
                  s.hamming_distance_ms, s.counting_sort_ms, t.feature_extraction_ms + s.hamming_total_ms());
    out << buf;
    if (s.float_pipeline_run) {
        std::snprintf(buf, sizeof buf, "float32_comparison,%.6f,%.6f,%.6f,%.6f\n", t.feature_extraction_ms,
                      s.float_distance_ms, s.comparison_sort_ms, t.feature_extraction_ms + s.float_total_ms());
        out << buf;
        std::snprintf(buf, sizeof buf, "# search speedup %.2fx, rankings %s\n",
                      s.float_total_ms() / s.hamming_total_ms(), s.rankings_agree ? "agree" : "DISAGREE");
        out << buf;
    }
}

BenchTable cmd_bench(const RunConfig& cfg, std::size_t n, std::size_t bits, std::size_t repeats, std::ostream& out,
                     bool run_float_pipeline) {
    cfg.validate();
    if (n == 0 || bits == 0 || repeats == 0) throw ConfigError("bench needs positive n, bits and repeats");

    // Feature extraction cost does not depend on trained weights, so an
    // untrained bank of the configured geometry is timed.
    const PartitionScheme scheme = builtin_scheme(cfg.scheme);
    PartModelBank bank;
    bank.scheme = scheme;
    bank.bits = cfg.bits;
    bank.share_weights = cfg.share_weights;
    const std::size_t nets = cfg.share_weights ? 1 : scheme.parts();
    for (std::size_t k = 0; k < nets; ++k) {
        const Strip& s = scheme.strips[k];
        bank.nets.emplace_back(cfg.arch.build({3, s.height, scheme.image_width}, cfg.bits), cfg.train.seed + k);
        bank.seeds.push_back(cfg.train.seed + k);
    }
    SynthParams sp = cfg.synth;
    sp.num_ids = 4;
    sp.images_per_id_per_cam = 4;
    const DatasetSplit probe = synth_dataset(sp);
    std::vector<PersonImage> images = probe.train;
    images.insert(images.end(), probe.gallery.begin(), probe.gallery.end());
    images.insert(images.end(), probe.query.begin(), probe.query.end());

    BenchTable t;
    const auto t0 = std::chrono::steady_clock::now();
    const auto codes = encode_images(bank, images);
    t.feature_extraction_ms = ms_since(t0) / static_cast<double>(codes.size());
    t.search = bench_search(n, bits, repeats, cfg.train.seed, run_float_pipeline);

    write_bench_table(out, t);
    const fs::path target = cfg.out / "bench.csv";
    fs::create_directories(cfg.out);
    std::ofstream csv(target);
    write_bench_table(csv, t);
    if (!csv) throw IngestionError("failed writing " + target.string());
    return t;
}

fs::path cmd_synth(const RunConfig& cfg, std::ostream* log) {
    cfg.synth.validate();
    const DatasetSplit split = synth_dataset(cfg.synth);
    const fs::path target = cfg.out / "synth";
    Staging stage(target);
    write_market_dir(split, stage.dir());
    stage.commit();
    say(log, "wrote " + std::to_string(split.train.size()) + " train, " + std::to_string(split.query.size()) +
                 " query, " + std::to_string(split.gallery.size()) + " gallery images to " + target.string());
    return target;
}

}  // namespace pdh
