// Copyright (c) 2026 the hefraud authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <shared_mutex>
#include <string_view>
#include <unordered_map>

#include "hefraud/bytes.hpp"

namespace hefraud::ope {

/// 128-bit symmetric key for the order-preserving cipher.
struct OpeKey {
    std::array<uint8_t, 16> bytes{};
};

OpeKey key_from_bytes(const Bytes& raw);

struct OpeParams {
    int in_bits = 32;   // plaintext domain [0, 2^in_bits)
    int out_bits = 64;  // ciphertext range [0, 2^out_bits)
};

/// Stateless deterministic order-preserving encryption over integers.
///
/// The range is split recursively at a pseudo-random cut drawn from the
/// hypergeometric distribution, with randomness derived from an HMAC stream
/// keyed by (key, interval). Encryption walks the splits down to a singleton
/// domain; decryption replays the same walk. Ciphertext order equals
/// plaintext order by construction.
///
/// Instances are safe to share across threads; an internal memo of interval
/// cuts accelerates repeated calls without affecting outputs.
class OpeCipher {
public:
    OpeCipher(const OpeKey& key, const OpeParams& params);

    uint64_t encrypt(uint64_t plaintext) const;

    /// Inverse of encrypt. Throws NotACiphertextError for values outside the
    /// image of the encryption map.
    uint64_t decrypt(uint64_t ciphertext) const;

    const OpeParams& params() const { return params_; }

private:
    struct IntervalKey {
        uint64_t low_d, high_d, low_r, high_r;
        bool operator==(const IntervalKey&) const = default;
    };
    struct IntervalKeyHash {
        size_t operator()(const IntervalKey& k) const;
    };

    uint64_t domain_cut(uint64_t low_d, uint64_t high_d, uint64_t low_r, uint64_t high_r) const;
    uint64_t singleton_ciphertext(uint64_t m, uint64_t low_r, uint64_t high_r) const;

    OpeKey key_;
    OpeParams params_;
    mutable std::shared_mutex memo_mutex_;
    mutable std::unordered_map<IntervalKey, uint64_t, IntervalKeyHash> memo_;
};

/// Affine map from reals in [min, max] onto the OPE integer domain.
/// Out-of-range inputs are clamped rather than rejected: production
/// transactions may exceed the training min/max.
struct Quantizer {
    double min = 0.0;
    double max = 1.0;
    uint64_t buckets = uint64_t(1) << 31;

    Quantizer() = default;
    Quantizer(double min_value, double max_value, uint64_t bucket_count);

    uint64_t quantize(double v) const;
};

using Tag = std::array<uint8_t, 32>;

/// Keyed pseudorandom tag hiding a feature name: HMAC-SHA256(seed, name).
Tag feature_tag(const std::array<uint8_t, 16>& seed, std::string_view name);

std::string tag_hex(const Tag& tag);
Tag tag_from_hex(std::string_view hex);

}  // namespace hefraud::ope
