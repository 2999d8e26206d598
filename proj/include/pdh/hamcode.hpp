#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace pdh {

constexpr std::size_t words_for_bits(std::size_t bits) { return (bits + 63) / 64; }

// Packed binary code. Bit i lives in word i/64 at position i%64; bits past
// size() are always zero so that codes compare and hash canonically.
class BitCode {
public:
    BitCode() = default;
    explicit BitCode(std::size_t bits) : bits_(bits), words_(words_for_bits(bits), 0) {}

    // `bits` is a string of '0'/'1', most significant first in reading order:
    // character i is bit i.
    static BitCode from_string(std::string_view bits);
    static BitCode from_unpacked(std::span<const std::uint8_t> bits);
    static BitCode from_words(std::size_t bits, std::vector<std::uint64_t> words);

    std::size_t size() const noexcept { return bits_; }
    bool test(std::size_t i) const { return (words_[i >> 6] >> (i & 63)) & 1u; }
    void set(std::size_t i, bool value) {
        const std::uint64_t mask = std::uint64_t{1} << (i & 63);
        if (value) {
            words_[i >> 6] |= mask;
        } else {
            words_[i >> 6] &= ~mask;
        }
    }

    std::span<const std::uint64_t> words() const noexcept { return words_; }
    std::vector<std::uint8_t> unpack() const;
    std::string to_string() const;

    // Appends `tail` after the last bit of this code.
    void append(const BitCode& tail);

    friend bool operator==(const BitCode&, const BitCode&) = default;

private:
    std::size_t bits_ = 0;
    std::vector<std::uint64_t> words_;
};

// bit i = 1 iff relaxed[i] > 0.5. Values must lie in [0, 1].
BitCode binarize(std::span<const double> relaxed);

std::uint32_t hamming(const BitCode& a, const BitCode& b);
std::uint32_t hamming_words(std::span<const std::uint64_t> a, std::span<const std::uint64_t> b) noexcept;

// Immutable-after-build gallery of equal-length codes stored contiguously.
class CodeIndex {
public:
    explicit CodeIndex(std::size_t bits = 0) : bits_(bits), stride_(words_for_bits(bits)) {}

    void add(const BitCode& code, std::string id);
    void reserve(std::size_t n);

    std::size_t size() const noexcept { return ids_.size(); }
    bool empty() const noexcept { return ids_.empty(); }
    std::size_t bits() const noexcept { return bits_; }
    std::size_t words_per_code() const noexcept { return stride_; }

    std::span<const std::uint64_t> code_words(std::size_t i) const {
        return {words_.data() + i * stride_, stride_};
    }
    BitCode code(std::size_t i) const;
    const std::string& id(std::size_t i) const { return ids_[i]; }
    const std::vector<std::string>& ids() const noexcept { return ids_; }

    friend bool operator==(const CodeIndex&, const CodeIndex&) = default;

private:
    std::size_t bits_;
    std::size_t stride_;
    std::vector<std::uint64_t> words_;
    std::vector<std::string> ids_;
};

// Gallery indices ordered by ascending Hamming distance, ties by ascending index.
struct Ranking {
    std::vector<std::uint32_t> order;
    std::vector<std::uint32_t> distances;

    std::size_t size() const noexcept { return order.size(); }
    friend bool operator==(const Ranking&, const Ranking&) = default;
};

// Distance from `query` to every gallery code. The serial loop is the
// reference; the OpenMP variant splits the gallery across threads and must
// produce identical output.
void hamming_scan(const BitCode& query, const CodeIndex& index, std::span<std::uint32_t> out);
void hamming_scan_omp(const BitCode& query, const CodeIndex& index, std::span<std::uint32_t> out);

// Stable counting sort of distances bounded by max_distance. The second form
// reuses the storage already held by `out`.
Ranking counting_sort_ranking(std::span<const std::uint32_t> distances, std::size_t max_distance);
void counting_sort_ranking(std::span<const std::uint32_t> distances, std::size_t max_distance, Ranking& out);

Ranking rank_counting(const BitCode& query, const CodeIndex& index);

// First min(k, n) entries of rank_counting, without placing the tail.
Ranking top_k(const BitCode& query, const CodeIndex& index, std::size_t k);

// rank_counting for every query; queries are distributed over OpenMP threads.
std::vector<Ranking> rank_batch(std::span<const BitCode> queries, const CodeIndex& index);

struct BenchReport {
    std::size_t gallery_size = 0;
    std::size_t bits = 0;
    std::size_t repeats = 0;
    // Mean per-query milliseconds.
    double hamming_distance_ms = 0.0;
    double counting_sort_ms = 0.0;
    double float_distance_ms = 0.0;
    double comparison_sort_ms = 0.0;
    // Median per-query milliseconds of the full packed pipeline.
    double hamming_total_median_ms = 0.0;
    double float_total_median_ms = 0.0;
    bool rankings_agree = true;
    bool float_pipeline_run = true;

    double hamming_total_ms() const { return hamming_distance_ms + counting_sort_ms; }
    double float_total_ms() const { return float_distance_ms + comparison_sort_ms; }
};

// Times (a) packed Hamming + counting sort against (b) unpacked float32
// squared-Euclidean + comparison sort over the same random codes, one query
// at a time on the calling thread.
BenchReport bench_search(std::size_t n, std::size_t bits, std::size_t repeats, std::uint64_t seed = 1,
                         bool run_float_pipeline = true);

// Code file: "PDHCODE1\n", u64 L, u64 n, then per record a u32 id length,
// the id bytes and ceil(L/8) code bytes with bit i at byte i/8, bit i%8.
void write_codes(const CodeIndex& index, std::ostream& out);
CodeIndex read_codes(std::istream& in);
void write_codes_file(const CodeIndex& index, const std::filesystem::path& path);
CodeIndex read_codes_file(const std::filesystem::path& path);

}  // namespace pdh
