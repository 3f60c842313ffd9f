#pragma once

#include <bit>
#include <cstdint>
#include <string>
#include <vector>

#include "xens/error.hpp"

namespace xens {

// Doubles as lowercase hex, 16 digits per value, little-endian byte
// order. Round-trips bit exactly on IEEE-754 platforms.
inline std::string encode_doubles_hex(const std::vector<double>& values) {
    static const char* digits = "0123456789abcdef";
    std::string out;
    out.reserve(values.size() * 16);
    for (double v : values) {
        const uint64_t bits = std::bit_cast<uint64_t>(v);
        for (int byte = 0; byte < 8; ++byte) {
            const uint8_t b = uint8_t(bits >> (8 * byte));
            out.push_back(digits[b >> 4]);
            out.push_back(digits[b & 0xF]);
        }
    }
    return out;
}

inline int hex_digit(char c) {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
}

// `where` feeds error messages, typically "row at byte N".
inline std::vector<double> decode_doubles_hex(const std::string& hex, size_t count,
                                              const std::string& where) {
    if (hex.size() != count * 16)
        fail_data("hex block " + where + " has " + std::to_string(hex.size()) +
                  " digits, expected " + std::to_string(count * 16));
    std::vector<double> out(count);
    for (size_t i = 0; i < count; ++i) {
        uint64_t bits = 0;
        for (int byte = 0; byte < 8; ++byte) {
            const int hi = hex_digit(hex[i * 16 + size_t(byte) * 2]);
            const int lo = hex_digit(hex[i * 16 + size_t(byte) * 2 + 1]);
            if (hi < 0 || lo < 0) fail_data("bad hex digit in block " + where);
            bits |= uint64_t((hi << 4) | lo) << (8 * byte);
        }
        out[i] = std::bit_cast<double>(bits);
    }
    return out;
}

}  // namespace xens
