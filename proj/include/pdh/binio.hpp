#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>

#include "pdh/error.hpp"

namespace pdh::binio {

// Little-endian writers, independent of host byte order.
template <class T>
void write_le(std::ostream& out, T value) {
    static_assert(std::is_unsigned_v<T>);
    unsigned char buf[sizeof(T)];
    for (std::size_t i = 0; i < sizeof(T); ++i) buf[i] = static_cast<unsigned char>(value >> (8 * i));
    out.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

inline void write_f64(std::ostream& out, double v) { write_le(out, std::bit_cast<std::uint64_t>(v)); }

// Reader that tracks the byte offset so format errors can point at the problem.
class Reader {
public:
    explicit Reader(std::istream& in) : in_(in) {}

    std::size_t offset() const noexcept { return offset_; }

    void expect_magic(std::string_view magic, std::string_view what) {
        std::string got(magic.size(), '\0');
        const std::size_t at = offset_;
        read_bytes(got.data(), got.size(), what);
        if (got != magic) throw FormatError("bad " + std::string(what) + " magic", at);
    }

    void read_bytes(void* dst, std::size_t n, std::string_view what) {
        in_.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
        if (static_cast<std::size_t>(in_.gcount()) != n) {
            throw FormatError("truncated " + std::string(what), offset_ + static_cast<std::size_t>(in_.gcount()));
        }
        offset_ += n;
    }

    template <class T>
    T read_le(std::string_view what) {
        unsigned char buf[sizeof(T)];
        read_bytes(buf, sizeof(T), what);
        T v = 0;
        for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(buf[i]) << (8 * i);
        return v;
    }

    double read_f64(std::string_view what) { return std::bit_cast<double>(read_le<std::uint64_t>(what)); }

    bool at_eof() { return in_.peek() == std::char_traits<char>::eof(); }

private:
    std::istream& in_;
    std::size_t offset_ = 0;
};

}  // namespace pdh::binio
