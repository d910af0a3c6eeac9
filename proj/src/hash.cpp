// Copyright (c) 2026 the hefraud authors
// SPDX-License-Identifier: Apache-2.0

#include "hefraud/hash.hpp"

#include <openssl/hmac.h>
#include <openssl/sha.h>

namespace hefraud {

std::array<uint8_t, 32> sha256(const uint8_t* data, size_t len) {
    std::array<uint8_t, 32> out{};
    SHA256(data, len, out.data());
    return out;
}

std::array<uint8_t, 32> sha256(const Bytes& data) { return sha256(data.data(), data.size()); }

std::array<uint8_t, 32> hmac_sha256(const uint8_t* key, size_t key_len,
                                    const uint8_t* msg, size_t msg_len) {
    std::array<uint8_t, 32> out{};
    unsigned int out_len = 0;
    HMAC(EVP_sha256(), key, int(key_len), msg, msg_len, out.data(), &out_len);
    return out;
}

}  // namespace hefraud
