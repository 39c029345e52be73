#pragma once

#include "emk/error.hpp"

#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <vector>

// Little-endian primitives shared by the tensor, descriptor, and model file
// codecs. Byte order is handled explicitly so the formats are identical on
// any host.

namespace emk::io {

inline void put_u32(std::ostream& out, std::uint32_t v) {
    unsigned char b[4] = {
        static_cast<unsigned char>(v & 0xffu),
        static_cast<unsigned char>((v >> 8) & 0xffu),
        static_cast<unsigned char>((v >> 16) & 0xffu),
        static_cast<unsigned char>((v >> 24) & 0xffu),
    };
    out.write(reinterpret_cast<const char*>(b), 4);
}

inline std::uint32_t get_u32(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in)
        throw format_error("unexpected end of file while reading u32");
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

inline void put_f32(std::ostream& out, float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32(out, bits);
}

inline float get_f32(std::istream& in) {
    const std::uint32_t bits = get_u32(in);
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
}

inline void put_u64(std::ostream& out, std::uint64_t v) {
    put_u32(out, static_cast<std::uint32_t>(v & 0xffffffffu));
    put_u32(out, static_cast<std::uint32_t>(v >> 32));
}

inline std::uint64_t get_u64(std::istream& in) {
    const std::uint64_t lo = get_u32(in);
    const std::uint64_t hi = get_u32(in);
    return lo | (hi << 32);
}

inline void put_f64(std::ostream& out, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    put_u64(out, bits);
}

inline double get_f64(std::istream& in) {
    const std::uint64_t bits = get_u64(in);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
}

inline void put_magic(std::ostream& out, const char magic[4]) {
    out.write(magic, 4);
}

inline void expect_magic(std::istream& in, const char magic[4], const char* what) {
    char got[4];
    in.read(got, 4);
    if (!in || std::memcmp(got, magic, 4) != 0)
        throw format_error(std::string("bad magic for ") + what);
}

// f32 storage of double-precision values, used by every blob in the model
// and descriptor files.
inline void put_f32_array(std::ostream& out, const std::vector<double>& v) {
    for (double x : v)
        put_f32(out, static_cast<float>(x));
}

inline std::vector<double> get_f32_array(std::istream& in, std::size_t count) {
    std::vector<double> v(count);
    for (auto& x : v)
        x = static_cast<double>(get_f32(in));
    return v;
}

inline void put_f64_array(std::ostream& out, const std::vector<double>& v) {
    for (double x : v)
        put_f64(out, x);
}

inline std::vector<double> get_f64_array(std::istream& in, std::size_t count) {
    std::vector<double> v(count);
    for (auto& x : v)
        x = get_f64(in);
    return v;
}

} // namespace emk::io
