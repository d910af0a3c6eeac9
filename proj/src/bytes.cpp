// Copyright (c) 2026 the hefraud authors
// SPDX-License-Identifier: Apache-2.0

#include "hefraud/bytes.hpp"

#include <algorithm>
#include <cstring>

#include "hefraud/errors.hpp"

namespace hefraud {

namespace {
constexpr char kB64Alphabet[] =
    "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

int b64_value(char c) {
    if (c >= 'A' && c <= 'Z') return c - 'A';
    if (c >= 'a' && c <= 'z') return c - 'a' + 26;
    if (c >= '0' && c <= '9') return c - '0' + 52;
    if (c == '+') return 62;
    if (c == '/') return 63;
    return -1;
}

constexpr char kHexDigits[] = "0123456789abcdef";
}  // namespace

std::string base64_encode(const uint8_t* data, size_t len) {
    std::string out;
    out.reserve((len + 2) / 3 * 4);
    size_t i = 0;
    for (; i + 3 <= len; i += 3) {
        uint32_t v = (uint32_t(data[i]) << 16) | (uint32_t(data[i + 1]) << 8) | data[i + 2];
        out.push_back(kB64Alphabet[(v >> 18) & 0x3f]);
        out.push_back(kB64Alphabet[(v >> 12) & 0x3f]);
        out.push_back(kB64Alphabet[(v >> 6) & 0x3f]);
        out.push_back(kB64Alphabet[v & 0x3f]);
    }
    if (i + 1 == len) {
        uint32_t v = uint32_t(data[i]) << 16;
        out.push_back(kB64Alphabet[(v >> 18) & 0x3f]);
        out.push_back(kB64Alphabet[(v >> 12) & 0x3f]);
        out += "==";
    } else if (i + 2 == len) {
        uint32_t v = (uint32_t(data[i]) << 16) | (uint32_t(data[i + 1]) << 8);
        out.push_back(kB64Alphabet[(v >> 18) & 0x3f]);
        out.push_back(kB64Alphabet[(v >> 12) & 0x3f]);
        out.push_back(kB64Alphabet[(v >> 6) & 0x3f]);
        out.push_back('=');
    }
    return out;
}

std::string base64_encode(const Bytes& b) { return base64_encode(b.data(), b.size()); }

Bytes base64_decode(std::string_view s) {
    if (s.size() % 4 != 0) throw ParseError("base64 length not a multiple of 4", "base64");
    Bytes out;
    out.reserve(s.size() / 4 * 3);
    for (size_t i = 0; i < s.size(); i += 4) {
        int pad = 0;
        uint32_t v = 0;
        for (size_t j = 0; j < 4; ++j) {
            char c = s[i + j];
            if (c == '=') {
                if (i + 4 != s.size() || j < 2) throw ParseError("stray base64 padding", "base64");
                ++pad;
                v <<= 6;
                continue;
            }
            if (pad > 0) throw ParseError("data after base64 padding", "base64");
            int d = b64_value(c);
            if (d < 0) throw ParseError("invalid base64 character", "base64");
            v = (v << 6) | uint32_t(d);
        }
        out.push_back(uint8_t(v >> 16));
        if (pad < 2) out.push_back(uint8_t(v >> 8));
        if (pad < 1) out.push_back(uint8_t(v));
    }
    return out;
}

std::string hex_encode(const uint8_t* data, size_t len) {
    std::string out;
    out.reserve(len * 2);
    for (size_t i = 0; i < len; ++i) {
        out.push_back(kHexDigits[data[i] >> 4]);
        out.push_back(kHexDigits[data[i] & 0xf]);
    }
    return out;
}

std::string hex_encode(const Bytes& b) { return hex_encode(b.data(), b.size()); }

Bytes hex_decode(std::string_view s) {
    if (s.size() % 2 != 0) throw ParseError("odd-length hex string", "hex");
    auto nibble = [](char c) -> int {
        if (c >= '0' && c <= '9') return c - '0';
        if (c >= 'a' && c <= 'f') return c - 'a' + 10;
        if (c >= 'A' && c <= 'F') return c - 'A' + 10;
        return -1;
    };
    Bytes out(s.size() / 2);
    for (size_t i = 0; i < out.size(); ++i) {
        int hi = nibble(s[2 * i]), lo = nibble(s[2 * i + 1]);
        if (hi < 0 || lo < 0) throw ParseError("invalid hex character", "hex");
        out[i] = uint8_t((hi << 4) | lo);
    }
    return out;
}

std::array<uint8_t, 8> be64(uint64_t v) {
    std::array<uint8_t, 8> out;
    for (int i = 7; i >= 0; --i) {
        out[size_t(i)] = uint8_t(v & 0xff);
        v >>= 8;
    }
    return out;
}

uint64_t from_be64(const uint8_t* p) {
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v = (v << 8) | p[i];
    return v;
}

void append_be32(Bytes& out, uint32_t v) {
    for (int i = 24; i >= 0; i -= 8) out.push_back(uint8_t(v >> i));
}

void append_be64(Bytes& out, uint64_t v) {
    for (int i = 56; i >= 0; i -= 8) out.push_back(uint8_t(v >> i));
}

uint32_t read_be32(const Bytes& in, size_t& pos) {
    if (pos + 4 > in.size()) throw ParseError("truncated u32", "bytes");
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v = (v << 8) | in[pos++];
    return v;
}

uint64_t read_be64(const Bytes& in, size_t& pos) {
    if (pos + 8 > in.size()) throw ParseError("truncated u64", "bytes");
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v = (v << 8) | in[pos++];
    return v;
}

void append_length_prefixed(Bytes& out, const Bytes& payload) {
    append_be32(out, uint32_t(payload.size()));
    out.insert(out.end(), payload.begin(), payload.end());
}

Bytes read_length_prefixed(const Bytes& in, size_t& pos) {
    uint32_t len = read_be32(in, pos);
    if (pos + len > in.size()) throw ParseError("truncated length-prefixed field", "bytes");
    Bytes out(in.begin() + long(pos), in.begin() + long(pos + len));
    pos += len;
    return out;
}

bool contains_bytes(const Bytes& haystack, const Bytes& needle) {
    if (needle.empty()) return true;
    if (needle.size() > haystack.size()) return false;
    const void* p = memmem(haystack.data(), haystack.size(), needle.data(), needle.size());
    return p != nullptr;
}

Bytes to_bytes(std::string_view s) { return Bytes(s.begin(), s.end()); }

}  // namespace hefraud
