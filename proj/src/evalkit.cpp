#include "pdh/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "pdh/binio.hpp"
#include "pdh/error.hpp"

namespace pdh {

namespace {

constexpr char kRelaxedMagic[] = "PDHRLX1\n";

enum : std::uint8_t { kOther = 0, kGood = 1, kJunk = 2 };

void check_inputs(std::span<const QueryRecord> queries, std::span<const BitCode> query_codes,
                  std::span<const GalleryRecord> gallery, const CodeIndex& gallery_codes) {
    if (queries.size() != query_codes.size()) {
        throw EvaluationError(std::to_string(queries.size()) + " query records but " +
                              std::to_string(query_codes.size()) + " query codes");
    }
    if (gallery.size() != gallery_codes.size()) {
        throw EvaluationError(std::to_string(gallery.size()) + " gallery records but " +
                              std::to_string(gallery_codes.size()) + " gallery codes");
    }
}

QueryScore score_query(const QueryRecord& q, const Ranking& r, std::span<const GalleryRecord> gallery,
                       DistractorMode mode) {
    return score_ranking(r.order, good_junk_split(q.identity, q.camera, gallery, mode));
}

std::string fmt6(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

}  // namespace

void Protocol::validate() const {
    if (max_rank == 0) throw ConfigError("CMC length must be at least 1");
}

GoodJunk good_junk_split(int identity, int camera, std::span<const GalleryRecord> gallery,
                         DistractorMode distractors) {
    GoodJunk s;
    for (std::size_t i = 0; i < gallery.size(); ++i) {
        const GalleryRecord& g = gallery[i];
        const auto idx = static_cast<std::uint32_t>(i);
        if (g.is_distractor) {
            if (distractors == DistractorMode::Junk) s.junk.push_back(idx);
        } else if (g.identity == identity) {
            (g.camera == camera ? s.junk : s.good).push_back(idx);
        }
    }
    return s;
}

QueryScore score_ranking(std::span<const std::uint32_t> order, const GoodJunk& split) {
    QueryScore score;
    if (split.good.empty()) return score;
    std::uint32_t extent = 0;
    for (std::uint32_t i : order) extent = std::max(extent, i + 1);
    for (std::uint32_t i : split.good) extent = std::max(extent, i + 1);
    for (std::uint32_t i : split.junk) extent = std::max(extent, i + 1);
    std::vector<std::uint8_t> status(extent, kOther);
    for (std::uint32_t i : split.junk) status[i] = kJunk;
    for (std::uint32_t i : split.good) status[i] = kGood;

    std::size_t rank = 0, hits = 0;
    double sum = 0.0;
    for (std::uint32_t i : order) {
        if (status[i] == kJunk) continue;
        ++rank;
        if (status[i] == kGood) {
            ++hits;
            if (!score.first) score.first = rank;
            sum += static_cast<double>(hits) / static_cast<double>(rank);
        }
    }
    // Good items missing from the ranking contribute zero precision.
    score.ap = sum / static_cast<double>(split.good.size());
    return score;
}

std::optional<double> average_precision(std::span<const std::uint32_t> order, const GoodJunk& split) {
    return score_ranking(order, split).ap;
}

std::optional<double> EvalReport::rank(std::size_t r) const {
    if (r == 0 || r > cmc.size()) return std::nullopt;
    return cmc[r - 1];
}

EvalReport aggregate(std::span<const QueryScore> scores, std::size_t max_rank) {
    EvalReport rep;
    rep.cmc.assign(max_rank, 0.0);
    std::vector<std::size_t> first_hist(max_rank + 1, 0);
    double ap_sum = 0.0;
    for (const QueryScore& s : scores) {
        if (!s.ap) {
            ++rep.skipped;
            continue;
        }
        ++rep.query_count;
        ap_sum += *s.ap;
        if (s.first && *s.first <= max_rank) ++first_hist[*s.first];
    }
    if (rep.query_count == 0) {
        throw EvaluationError("no query has a cross-camera match in the gallery (" + std::to_string(rep.skipped) +
                              " skipped)");
    }
    const auto n = static_cast<double>(rep.query_count);
    std::size_t cum = 0;
    for (std::size_t r = 1; r <= max_rank; ++r) {
        cum += first_hist[r];
        rep.cmc[r - 1] = static_cast<double>(cum) / n;
    }
    rep.mAP = ap_sum / n;
    return rep;
}

EvalReport evaluate(std::span<const QueryRecord> queries, std::span<const BitCode> query_codes,
                    std::span<const GalleryRecord> gallery, const CodeIndex& gallery_codes,
                    const Protocol& protocol) {
    protocol.validate();
    check_inputs(queries, query_codes, gallery, gallery_codes);
    std::vector<QueryScore> scores(queries.size());
    const auto n = static_cast<std::ptrdiff_t>(queries.size());
    std::exception_ptr error;
#pragma omp parallel for schedule(dynamic, 4)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        try {
            const auto q = static_cast<std::size_t>(i);
            scores[q] = score_query(queries[q], rank_counting(query_codes[q], gallery_codes), gallery,
                                    protocol.distractors);
        } catch (...) {
#pragma omp critical(pdh_eval_error)
            if (!error) error = std::current_exception();
        }
    }
    if (error) std::rethrow_exception(error);
    return aggregate(scores, protocol.max_rank);
}

EvalReport evaluate_serial(std::span<const QueryRecord> queries, std::span<const BitCode> query_codes,
                           std::span<const GalleryRecord> gallery, const CodeIndex& gallery_codes,
                           const Protocol& protocol) {
    protocol.validate();
    check_inputs(queries, query_codes, gallery, gallery_codes);
    std::vector<QueryScore> scores;
    scores.reserve(queries.size());
    for (std::size_t q = 0; q < queries.size(); ++q) {
        scores.push_back(
            score_query(queries[q], rank_counting(query_codes[q], gallery_codes), gallery, protocol.distractors));
    }
    return aggregate(scores, protocol.max_rank);
}

// ---------------------------------------------------------------------------
// Multiple queries

Pooling parse_pooling(std::string_view name) {
    if (name == "single") return Pooling::Single;
    if (name == "avg") return Pooling::Avg;
    if (name == "max") return Pooling::Max;
    throw ConfigError("unknown pooling mode '" + std::string(name) + "' (expected single, avg or max)");
}

std::string_view to_string(Pooling p) {
    switch (p) {
        case Pooling::Single: return "single";
        case Pooling::Avg: return "avg";
        case Pooling::Max: return "max";
    }
    return "?";
}

std::vector<double> pool_queries(std::span<const std::vector<double>> relaxed, Pooling mode) {
    if (relaxed.empty()) throw DomainError("cannot pool an empty set of queries");
    const std::size_t len = relaxed.front().size();
    for (const auto& v : relaxed) {
        if (v.size() != len) throw DimensionError("pooled queries have different code lengths");
        for (double x : v) {
            if (!(x >= 0.0 && x <= 1.0)) throw DomainError("relaxed code value outside [0, 1]");
        }
    }
    if (mode == Pooling::Single) {
        if (relaxed.size() != 1) throw DomainError("single-query mode cannot pool several queries");
        return relaxed.front();
    }
    std::vector<double> out = relaxed.front();
    for (std::size_t k = 1; k < relaxed.size(); ++k) {
        for (std::size_t i = 0; i < len; ++i) {
            out[i] = mode == Pooling::Max ? std::max(out[i], relaxed[k][i]) : out[i] + relaxed[k][i];
        }
    }
    if (mode == Pooling::Avg) {
        for (double& x : out) x /= static_cast<double>(relaxed.size());
    }
    return out;
}

PooledQueries pool_by_group(std::span<const QueryRecord> queries, std::span<const std::vector<double>> relaxed,
                            Pooling mode) {
    if (queries.size() != relaxed.size()) {
        throw EvaluationError(std::to_string(queries.size()) + " query records but " +
                              std::to_string(relaxed.size()) + " relaxed codes");
    }
    PooledQueries out;
    if (mode == Pooling::Single) {
        out.records.assign(queries.begin(), queries.end());
        for (const auto& r : relaxed) out.codes.push_back(binarize(r));
        return out;
    }
    std::map<std::pair<int, int>, std::size_t> slot;
    std::vector<std::vector<std::vector<double>>> members;
    for (std::size_t i = 0; i < queries.size(); ++i) {
        const auto key = std::make_pair(queries[i].identity, queries[i].camera);
        auto [it, fresh] = slot.try_emplace(key, out.records.size());
        if (fresh) {
            out.records.push_back(queries[i]);
            members.emplace_back();
        }
        members[it->second].push_back(relaxed[i]);
    }
    for (const auto& group : members) out.codes.push_back(binarize(pool_queries(group, mode)));
    return out;
}

// ---------------------------------------------------------------------------
// Reports

void write_report_text(std::ostream& out, const EvalReport& report) {
    out << "queries scored: " << report.query_count << "\n"
        << "queries skipped: " << report.skipped << "\n"
        << "mAP: " << fmt6(report.mAP) << "\n";
    for (std::size_t r : {1, 5, 10, 20}) {
        if (auto v = report.rank(r)) out << "rank-" << r << ": " << fmt6(*v) << "\n";
    }
}

void write_cmc_csv(std::ostream& out, const EvalReport& report) {
    out << "rank,cmc\n";
    for (std::size_t r = 0; r < report.cmc.size(); ++r) out << (r + 1) << "," << fmt6(report.cmc[r]) << "\n";
}

std::string summary_line(const EvalReport& report) {
    std::string s;
    for (std::size_t r : {1, 5, 10, 20}) {
        const auto v = report.rank(r);
        s += "rank" + std::to_string(r) + "=" + (v ? fmt6(*v) : std::string("n/a")) + " ";
    }
    s += "mAP=" + fmt6(report.mAP) + " skipped=" + std::to_string(report.skipped);
    return s;
}

// ---------------------------------------------------------------------------
// Label tables

void write_labels_csv(std::ostream& out, std::span<const GalleryRecord> records) {
    out << "id,identity,camera,distractor\n";
    for (const GalleryRecord& r : records) {
        if (r.id.find_first_of(",\n\r") != std::string::npos) {
            throw IngestionError("record id '" + r.id + "' cannot be stored in a label table");
        }
        out << r.id << "," << r.identity << "," << r.camera << "," << (r.is_distractor ? 1 : 0) << "\n";
    }
}

std::vector<GalleryRecord> read_labels_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line != "id,identity,camera,distractor") {
        throw IngestionError("label table must start with 'id,identity,camera,distractor'");
    }
    std::vector<GalleryRecord> out;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::istringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) f.push_back(cell);
        try {
            if (f.size() != 4 || (f[3] != "0" && f[3] != "1")) throw std::invalid_argument(line);
            std::size_t u1 = 0, u2 = 0;
            GalleryRecord r{f[0], std::stoi(f[1], &u1), std::stoi(f[2], &u2), f[3] == "1"};
            if (u1 != f[1].size() || u2 != f[2].size()) throw std::invalid_argument(line);
            out.push_back(std::move(r));
        } catch (const std::logic_error&) {
            throw IngestionError("label table line " + std::to_string(lineno) + " is malformed: '" + line + "'");
        }
    }
    return out;
}

void write_labels_file(std::span<const GalleryRecord> records, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IngestionError("cannot write " + path.string());
    write_labels_csv(out, records);
    if (!out) throw IngestionError("failed writing " + path.string());
}

std::vector<GalleryRecord> read_labels_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IngestionError("cannot open " + path.string());
    return read_labels_csv(in);
}

// ---------------------------------------------------------------------------
// Relaxed codes

void write_relaxed(const RelaxedSet& set, std::ostream& out) {
    if (set.ids.size() != set.values.size()) throw DimensionError("relaxed set ids and values differ in count");
    out.write(kRelaxedMagic, sizeof(kRelaxedMagic) - 1);
    binio::write_le<std::uint64_t>(out, set.bits);
    binio::write_le<std::uint64_t>(out, set.ids.size());
    for (std::size_t i = 0; i < set.ids.size(); ++i) {
        if (set.values[i].size() != set.bits) {
            throw DimensionError("relaxed record " + std::to_string(i) + " has " +
                                 std::to_string(set.values[i].size()) + " values, expected " +
                                 std::to_string(set.bits));
        }
        binio::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(set.ids[i].size()));
        out.write(set.ids[i].data(), static_cast<std::streamsize>(set.ids[i].size()));
        for (double v : set.values[i]) binio::write_f64(out, v);
    }
}

RelaxedSet read_relaxed(std::istream& in) {
    binio::Reader r(in);
    r.expect_magic({kRelaxedMagic, sizeof(kRelaxedMagic) - 1}, "relaxed code file");
    const std::size_t at_bits = r.offset();
    RelaxedSet set;
    set.bits = r.read_le<std::uint64_t>("code length");
    if (set.bits == 0 || set.bits > (1u << 24)) throw FormatError("implausible code length", at_bits);
    const auto n = r.read_le<std::uint64_t>("record count");
    for (std::uint64_t i = 0; i < n; ++i) {
        const std::size_t at_len = r.offset();
        const auto len = r.read_le<std::uint32_t>("id length");
        if (len > (1u << 20)) throw FormatError("implausible id length", at_len);
        std::string id(len, '\0');
        r.read_bytes(id.data(), len, "record id");
        std::vector<double> v(set.bits);
        for (std::size_t b = 0; b < set.bits; ++b) {
            const std::size_t at = r.offset();
            v[b] = r.read_f64("relaxed value");
            if (!(v[b] >= 0.0 && v[b] <= 1.0)) throw FormatError("relaxed value outside [0, 1]", at);
        }
        set.ids.push_back(std::move(id));
        set.values.push_back(std::move(v));
    }
    if (!r.at_eof()) throw FormatError("trailing bytes after last record", r.offset());
    return set;
}

void write_relaxed_file(const RelaxedSet& set, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IngestionError("cannot write " + path.string());
    write_relaxed(set, out);
    if (!out) throw IngestionError("failed writing " + path.string());
}

RelaxedSet read_relaxed_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IngestionError("cannot open " + path.string());
    return read_relaxed(in);
}

}  // namespace pdh
