#include "pdh/hamcode.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>

#include "pdh/binio.hpp"
#include "pdh/error.hpp"
#include "pdh/rng.hpp"

namespace pdh {

namespace {

constexpr char kCodeMagic[] = "PDHCODE1\n";

void check_same_length(std::size_t a, std::size_t b) {
    if (a != b) {
        throw DimensionError("code length mismatch: " + std::to_string(a) + " vs " + std::to_string(b) + " bits");
    }
}

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

double median(std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const std::size_t m = v.size() / 2;
    return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

}  // namespace

// ---------------------------------------------------------------------------
// BitCode

BitCode BitCode::from_string(std::string_view bits) {
    BitCode c(bits.size());
    for (std::size_t i = 0; i < bits.size(); ++i) {
        if (bits[i] != '0' && bits[i] != '1') throw DomainError("bit string may only contain 0 and 1");
        c.set(i, bits[i] == '1');
    }
    return c;
}

BitCode BitCode::from_unpacked(std::span<const std::uint8_t> bits) {
    BitCode c(bits.size());
    for (std::size_t i = 0; i < bits.size(); ++i) c.set(i, bits[i] != 0);
    return c;
}

BitCode BitCode::from_words(std::size_t bits, std::vector<std::uint64_t> words) {
    if (words.size() != words_for_bits(bits)) throw DimensionError("word count does not match bit length");
    if (bits % 64 && (words.back() >> (bits % 64)) != 0) {
        throw DomainError("padding bits of a code must be zero");
    }
    BitCode c;
    c.bits_ = bits;
    c.words_ = std::move(words);
    return c;
}

std::vector<std::uint8_t> BitCode::unpack() const {
    std::vector<std::uint8_t> out(bits_);
    for (std::size_t i = 0; i < bits_; ++i) out[i] = test(i) ? 1 : 0;
    return out;
}

std::string BitCode::to_string() const {
    std::string s(bits_, '0');
    for (std::size_t i = 0; i < bits_; ++i) {
        if (test(i)) s[i] = '1';
    }
    return s;
}

void BitCode::append(const BitCode& tail) {
    const std::size_t old = bits_;
    bits_ += tail.bits_;
    words_.resize(words_for_bits(bits_), 0);
    const std::size_t shift = old & 63;
    const std::size_t base = old >> 6;
    for (std::size_t w = 0; w < tail.words_.size(); ++w) {
        const std::uint64_t v = tail.words_[w];
        words_[base + w] |= v << shift;
        if (shift && base + w + 1 < words_.size()) words_[base + w + 1] |= v >> (64 - shift);
    }
}

BitCode binarize(std::span<const double> relaxed) {
    BitCode c(relaxed.size());
    for (std::size_t i = 0; i < relaxed.size(); ++i) {
        const double v = relaxed[i];
        if (!(v >= 0.0 && v <= 1.0)) {
            throw DomainError("relaxed code value " + std::to_string(v) + " at " + std::to_string(i) +
                              " is outside [0,1]");
        }
        if (v > 0.5) c.set(i, true);
    }
    return c;
}

std::uint32_t hamming_words(std::span<const std::uint64_t> a, std::span<const std::uint64_t> b) noexcept {
    std::uint32_t d = 0;
    for (std::size_t i = 0; i < a.size(); ++i) d += static_cast<std::uint32_t>(std::popcount(a[i] ^ b[i]));
    return d;
}

std::uint32_t hamming(const BitCode& a, const BitCode& b) {
    check_same_length(a.size(), b.size());
    return hamming_words(a.words(), b.words());
}

// ---------------------------------------------------------------------------
// CodeIndex

void CodeIndex::add(const BitCode& code, std::string id) {
    if (ids_.empty() && bits_ == 0) {
        bits_ = code.size();
        stride_ = words_for_bits(bits_);
    }
    check_same_length(bits_, code.size());
    words_.insert(words_.end(), code.words().begin(), code.words().end());
    ids_.push_back(std::move(id));
}

void CodeIndex::reserve(std::size_t n) {
    words_.reserve(n * stride_);
    ids_.reserve(n);
}

BitCode CodeIndex::code(std::size_t i) const {
    const auto w = code_words(i);
    return BitCode::from_words(bits_, {w.begin(), w.end()});
}

// ---------------------------------------------------------------------------
// Scans and ranking

void hamming_scan(const BitCode& query, const CodeIndex& index, std::span<std::uint32_t> out) {
    check_same_length(query.size(), index.bits());
    const auto q = query.words();
    for (std::size_t i = 0; i < index.size(); ++i) out[i] = hamming_words(q, index.code_words(i));
}

void hamming_scan_omp(const BitCode& query, const CodeIndex& index, std::span<std::uint32_t> out) {
    check_same_length(query.size(), index.bits());
    const auto q = query.words();
    const auto n = static_cast<std::ptrdiff_t>(index.size());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        out[static_cast<std::size_t>(i)] = hamming_words(q, index.code_words(static_cast<std::size_t>(i)));
    }
}

void counting_sort_ranking(std::span<const std::uint32_t> distances, std::size_t max_distance, Ranking& out) {
    std::vector<std::uint32_t> start(max_distance + 2, 0);
    for (std::uint32_t d : distances) ++start[d + 1];
    for (std::size_t v = 1; v < start.size(); ++v) start[v] += start[v - 1];
    out.distances.resize(distances.size());
    // The sorted distance column is one run per bucket; only the order is scattered.
    for (std::size_t v = 0; v + 1 < start.size(); ++v) {
        std::fill(out.distances.begin() + start[v], out.distances.begin() + start[v + 1],
                  static_cast<std::uint32_t>(v));
    }
    out.order.resize(distances.size());
    for (std::size_t i = 0; i < distances.size(); ++i) out.order[start[distances[i]]++] = static_cast<std::uint32_t>(i);
}

Ranking counting_sort_ranking(std::span<const std::uint32_t> distances, std::size_t max_distance) {
    Ranking r;
    counting_sort_ranking(distances, max_distance, r);
    return r;
}

Ranking rank_counting(const BitCode& query, const CodeIndex& index) {
    if (index.empty()) return {};
    std::vector<std::uint32_t> dist(index.size());
    hamming_scan(query, index, dist);
    return counting_sort_ranking(dist, index.bits());
}

Ranking top_k(const BitCode& query, const CodeIndex& index, std::size_t k) {
    if (k == 0) throw DomainError("top_k needs k >= 1");
    if (index.empty()) return {};
    std::vector<std::uint32_t> dist(index.size());
    hamming_scan(query, index, dist);
    const std::size_t keep = std::min(k, dist.size());

    std::vector<std::uint32_t> start(index.bits() + 2, 0);
    for (std::uint32_t d : dist) ++start[d + 1];
    std::size_t cutoff = 0;
    for (std::size_t v = 1; v < start.size(); ++v) {
        start[v] += start[v - 1];
        if (start[v] < keep) cutoff = v;
    }
    // Only buckets 0..cutoff can reach the first `keep` positions.
    Ranking r;
    r.order.resize(start[cutoff + 1]);
    r.distances.resize(start[cutoff + 1]);
    for (std::size_t i = 0; i < dist.size(); ++i) {
        if (dist[i] > cutoff) continue;
        const std::uint32_t pos = start[dist[i]]++;
        r.order[pos] = static_cast<std::uint32_t>(i);
        r.distances[pos] = dist[i];
    }
    r.order.resize(keep);
    r.distances.resize(keep);
    return r;
}

std::vector<Ranking> rank_batch(std::span<const BitCode> queries, const CodeIndex& index) {
    for (const BitCode& q : queries) {
        if (!index.empty()) check_same_length(q.size(), index.bits());
    }
    std::vector<Ranking> out(queries.size());
    const auto n = static_cast<std::ptrdiff_t>(queries.size());
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        out[static_cast<std::size_t>(i)] = rank_counting(queries[static_cast<std::size_t>(i)], index);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Benchmark

BenchReport bench_search(std::size_t n, std::size_t bits, std::size_t repeats, std::uint64_t seed,
                         bool run_float_pipeline) {
    if (n == 0 || bits == 0 || repeats == 0) throw ConfigError("bench_search needs positive n, bits, repeats");
    Rng rng(seed);
    const std::size_t stride = words_for_bits(bits);
    auto random_code = [&] {
        std::vector<std::uint64_t> w(stride);
        for (auto& x : w) x = rng.next_u64();
        if (bits % 64) w.back() &= (std::uint64_t{1} << (bits % 64)) - 1;
        return BitCode::from_words(bits, std::move(w));
    };

    CodeIndex index(bits);
    index.reserve(n);
    for (std::size_t i = 0; i < n; ++i) index.add(random_code(), {});
    std::vector<BitCode> queries;
    for (std::size_t r = 0; r < repeats; ++r) queries.push_back(random_code());

    std::vector<float> gallery_f;
    if (run_float_pipeline) {
        gallery_f.resize(n * bits);
        for (std::size_t i = 0; i < n; ++i) {
            const auto w = index.code_words(i);
            float* row = gallery_f.data() + i * bits;
            for (std::size_t b = 0; b < bits; ++b) row[b] = static_cast<float>((w[b >> 6] >> (b & 63)) & 1u);
        }
    }

    BenchReport rep;
    rep.gallery_size = n;
    rep.bits = bits;
    rep.repeats = repeats;
    rep.float_pipeline_run = run_float_pipeline;
    std::vector<double> ham_total, flt_total;
    std::vector<std::uint32_t> dist(n);
    std::vector<float> fdist(n);
    std::vector<std::uint32_t> forder(n);
    std::vector<float> qf(bits);
    Ranking ranking;

    for (const BitCode& q : queries) {
        auto t0 = Clock::now();
        hamming_scan(q, index, dist);
        const double t_dist = ms_since(t0);
        t0 = Clock::now();
        counting_sort_ranking(dist, bits, ranking);
        const double t_sort = ms_since(t0);
        rep.hamming_distance_ms += t_dist;
        rep.counting_sort_ms += t_sort;
        ham_total.push_back(t_dist + t_sort);

        if (!run_float_pipeline) continue;
        for (std::size_t b = 0; b < bits; ++b) qf[b] = q.test(b) ? 1.0f : 0.0f;
        t0 = Clock::now();
        for (std::size_t i = 0; i < n; ++i) {
            const float* row = gallery_f.data() + i * bits;
            float acc = 0.0f;
#pragma omp simd reduction(+ : acc)
            for (std::size_t b = 0; b < bits; ++b) {
                const float d = row[b] - qf[b];
                acc += d * d;
            }
            fdist[i] = acc;
        }
        const double t_fdist = ms_since(t0);
        t0 = Clock::now();
        std::iota(forder.begin(), forder.end(), 0u);
        std::sort(forder.begin(), forder.end(), [&](std::uint32_t a, std::uint32_t b) {
            return fdist[a] < fdist[b] || (fdist[a] == fdist[b] && a < b);
        });
        const double t_fsort = ms_since(t0);
        rep.float_distance_ms += t_fdist;
        rep.comparison_sort_ms += t_fsort;
        flt_total.push_back(t_fdist + t_fsort);
        if (forder != ranking.order) rep.rankings_agree = false;
    }
    const double r = static_cast<double>(repeats);
    rep.hamming_distance_ms /= r;
    rep.counting_sort_ms /= r;
    rep.float_distance_ms /= r;
    rep.comparison_sort_ms /= r;
    rep.hamming_total_median_ms = median(ham_total);
    rep.float_total_median_ms = median(flt_total);
    return rep;
}

// ---------------------------------------------------------------------------
// Code files

void write_codes(const CodeIndex& index, std::ostream& out) {
    out.write(kCodeMagic, sizeof(kCodeMagic) - 1);
    binio::write_le<std::uint64_t>(out, index.bits());
    binio::write_le<std::uint64_t>(out, index.size());
    const std::size_t nbytes = (index.bits() + 7) / 8;
    std::vector<char> buf(nbytes);
    for (std::size_t i = 0; i < index.size(); ++i) {
        const std::string& id = index.id(i);
        binio::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(id.size()));
        out.write(id.data(), static_cast<std::streamsize>(id.size()));
        const auto w = index.code_words(i);
        for (std::size_t b = 0; b < nbytes; ++b) buf[b] = static_cast<char>((w[b / 8] >> (8 * (b % 8))) & 0xFF);
        out.write(buf.data(), static_cast<std::streamsize>(nbytes));
    }
}

CodeIndex read_codes(std::istream& in) {
    binio::Reader r(in);
    r.expect_magic({kCodeMagic, sizeof(kCodeMagic) - 1}, "code file");
    const std::size_t at_bits = r.offset();
    const auto bits = r.read_le<std::uint64_t>("code length");
    if (bits == 0 || bits > (1u << 24)) throw FormatError("implausible code length", at_bits);
    const auto n = r.read_le<std::uint64_t>("record count");
    const std::size_t nbytes = (bits + 7) / 8;
    CodeIndex index(bits);
    std::vector<unsigned char> buf(nbytes);
    for (std::uint64_t i = 0; i < n; ++i) {
        const std::size_t at_len = r.offset();
        const auto len = r.read_le<std::uint32_t>("id length");
        if (len > (1u << 20)) throw FormatError("implausible id length", at_len);
        std::string id(len, '\0');
        r.read_bytes(id.data(), len, "record id");
        const std::size_t at_code = r.offset();
        r.read_bytes(buf.data(), nbytes, "code bytes");
        std::vector<std::uint64_t> words(words_for_bits(bits), 0);
        for (std::size_t b = 0; b < nbytes; ++b) words[b / 8] |= std::uint64_t{buf[b]} << (8 * (b % 8));
        if (bits % 64 && (words.back() >> (bits % 64)) != 0) {
            throw FormatError("nonzero padding bits in record " + std::to_string(i), at_code);
        }
        index.add(BitCode::from_words(bits, std::move(words)), std::move(id));
    }
    if (!r.at_eof()) throw FormatError("trailing bytes after last record", r.offset());
    return index;
}

void write_codes_file(const CodeIndex& index, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IngestionError("cannot write " + path.string());
    write_codes(index, out);
    if (!out) throw IngestionError("failed writing " + path.string());
}

CodeIndex read_codes_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IngestionError("cannot open " + path.string());
    return read_codes(in);
}

}  // namespace pdh
