// Copyright (c) 2026 the hefraud authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace hefraud {

using Bytes = std::vector<uint8_t>;

std::string base64_encode(const uint8_t* data, size_t len);
std::string base64_encode(const Bytes& b);
Bytes base64_decode(std::string_view s);  // throws ParseError on bad input

std::string hex_encode(const uint8_t* data, size_t len);
std::string hex_encode(const Bytes& b);
Bytes hex_decode(std::string_view s);

/// 8-byte big-endian encoding of an unsigned integer.
std::array<uint8_t, 8> be64(uint64_t v);
uint64_t from_be64(const uint8_t* p);

void append_be32(Bytes& out, uint32_t v);
void append_be64(Bytes& out, uint64_t v);
uint32_t read_be32(const Bytes& in, size_t& pos);
uint64_t read_be64(const Bytes& in, size_t& pos);

/// Appends a 4-byte big-endian length prefix followed by the payload.
void append_length_prefixed(Bytes& out, const Bytes& payload);
Bytes read_length_prefixed(const Bytes& in, size_t& pos);

/// True if `needle` occurs anywhere in `haystack`.
bool contains_bytes(const Bytes& haystack, const Bytes& needle);

Bytes to_bytes(std::string_view s);

}  // namespace hefraud
