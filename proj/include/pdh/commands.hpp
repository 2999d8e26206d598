#pragma once

#include <filesystem>
#include <iosfwd>

#include "pdh/config.hpp"
#include "pdh/evalkit.hpp"
#include "pdh/hamcode.hpp"
#include "pdh/parts.hpp"

namespace pdh {

// Output layout under RunConfig::out:
//   bank/    manifest.txt, PDHNET1 files, loss.csv, config.txt   (train)
//   codes/   query.codes gallery.codes query.relaxed
//            query_labels.csv gallery_labels.csv                 (encode)
//   eval/    report.txt cmc.csv summary.txt                      (eval)
//   bench.csv                                                    (bench)
//   synth/   Market-style directory tree                         (synth)
// Each command stages its directory and moves it into place only on success.

DatasetSplit load_dataset(const RunConfig& cfg, std::ostream* log = nullptr);

std::vector<GalleryRecord> records_of(std::span<const PersonImage> images);

// "part,epoch,mean_loss,active_fraction", one row per network and epoch.
void write_bank_loss_csv(std::ostream& out, const std::vector<std::vector<LossReport>>& histories);

struct TrainOutputs {
    std::filesystem::path bank_dir;
    BankTraining training;
};
TrainOutputs cmd_train(const RunConfig& cfg, std::ostream* log = nullptr);

// `bank_dir` defaults to out/bank.
std::filesystem::path cmd_encode(const RunConfig& cfg, const std::filesystem::path& bank_dir = {},
                                 std::ostream* log = nullptr);

// `codes_dir` defaults to out/codes. Pooling comes from cfg.pooling.
EvalReport cmd_eval(const RunConfig& cfg, const std::filesystem::path& codes_dir = {}, std::ostream* log = nullptr);

struct BenchTable {
    BenchReport search;
    double feature_extraction_ms = 0.0;  // per image, bank of cfg geometry
};
// Writes the decomposition table to `out` and to out/bench.csv.
BenchTable cmd_bench(const RunConfig& cfg, std::size_t n, std::size_t bits, std::size_t repeats, std::ostream& out,
                     bool run_float_pipeline = true);
void write_bench_table(std::ostream& out, const BenchTable& table);

std::filesystem::path cmd_synth(const RunConfig& cfg, std::ostream* log = nullptr);

}  // namespace pdh
