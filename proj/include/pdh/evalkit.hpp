#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pdh/hamcode.hpp"

namespace pdh {

struct GalleryRecord {
    std::string id;
    int identity = 0;
    int camera = 0;
    bool is_distractor = false;
};

struct QueryRecord {
    std::string id;
    int identity = 0;
    int camera = 0;
};

// What distractor images mean for scoring. Junk removes them from every
// ranking; Noise leaves them in place as non-matching entries.
enum class DistractorMode { Junk, Noise };

struct Protocol {
    std::size_t max_rank = 50;  // length of the CMC curve
    DistractorMode distractors = DistractorMode::Junk;

    void validate() const;
};

// Gallery indices, ascending.
struct GoodJunk {
    std::vector<std::uint32_t> good;
    std::vector<std::uint32_t> junk;
};

// good: same identity, other camera. junk: same identity and camera, plus
// distractors when the protocol says so. Distractors are never good.
GoodJunk good_junk_split(int identity, int camera, std::span<const GalleryRecord> gallery,
                         DistractorMode distractors = DistractorMode::Junk);

struct QueryScore {
    std::optional<double> ap;           // empty when there is no good match
    std::optional<std::size_t> first;   // 1-based rank of the first good match
};

// Scores one ranking (a permutation of gallery indices) after dropping junk.
QueryScore score_ranking(std::span<const std::uint32_t> order, const GoodJunk& split);

// Mean precision at the rank of each good item; nullopt when good is empty.
std::optional<double> average_precision(std::span<const std::uint32_t> order, const GoodJunk& split);

struct EvalReport {
    std::vector<double> cmc;  // cmc[r-1] = P(first good match at rank <= r)
    double mAP = 0.0;
    std::size_t query_count = 0;  // scored queries
    std::size_t skipped = 0;      // queries without any good match

    // CMC at rank r (1-based); nullopt beyond the curve.
    std::optional<double> rank(std::size_t r) const;
};

// Aggregates per-query scores in index order.
EvalReport aggregate(std::span<const QueryScore> scores, std::size_t max_rank);

// Ranks each query against the gallery and scores it. Queries run on OpenMP
// threads; the result does not depend on the thread count.
EvalReport evaluate(std::span<const QueryRecord> queries, std::span<const BitCode> query_codes,
                    std::span<const GalleryRecord> gallery, const CodeIndex& gallery_codes,
                    const Protocol& protocol = {});

// Single-threaded reference for evaluate.
EvalReport evaluate_serial(std::span<const QueryRecord> queries, std::span<const BitCode> query_codes,
                           std::span<const GalleryRecord> gallery, const CodeIndex& gallery_codes,
                           const Protocol& protocol = {});

enum class Pooling { Single, Avg, Max };
Pooling parse_pooling(std::string_view name);
std::string_view to_string(Pooling p);

// Elementwise mean or max of relaxed codes. Single is accepted only for one vector.
std::vector<double> pool_queries(std::span<const std::vector<double>> relaxed, Pooling mode);

// Queries after multiple-query merging: one entry per (identity, camera)
// group in order of first appearance, or every query unchanged for Single.
struct PooledQueries {
    std::vector<QueryRecord> records;
    std::vector<BitCode> codes;
};
PooledQueries pool_by_group(std::span<const QueryRecord> queries, std::span<const std::vector<double>> relaxed,
                            Pooling mode);

// Human-readable report, "rank,cmc" CSV, and the one-line summary
// "rank1=… rank5=… rank10=… rank20=… mAP=… skipped=…".
void write_report_text(std::ostream& out, const EvalReport& report);
void write_cmc_csv(std::ostream& out, const EvalReport& report);
std::string summary_line(const EvalReport& report);

// Label tables written next to code files: "id,identity,camera,distractor".
void write_labels_csv(std::ostream& out, std::span<const GalleryRecord> records);
std::vector<GalleryRecord> read_labels_csv(std::istream& in);
void write_labels_file(std::span<const GalleryRecord> records, const std::filesystem::path& path);
std::vector<GalleryRecord> read_labels_file(const std::filesystem::path& path);

// Relaxed code file: "PDHRLX1\n", u64 L, u64 n, then per record a u32 id
// length, the id bytes and L little-endian f64 values.
struct RelaxedSet {
    std::size_t bits = 0;
    std::vector<std::string> ids;
    std::vector<std::vector<double>> values;

    friend bool operator==(const RelaxedSet&, const RelaxedSet&) = default;
};
void write_relaxed(const RelaxedSet& set, std::ostream& out);
RelaxedSet read_relaxed(std::istream& in);
void write_relaxed_file(const RelaxedSet& set, const std::filesystem::path& path);
RelaxedSet read_relaxed_file(const std::filesystem::path& path);

}  // namespace pdh
