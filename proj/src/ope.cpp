// Copyright (c) 2026 the hefraud authors
// SPDX-License-Identifier: Apache-2.0

#include "hefraud/ope.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <mutex>

#include "hefraud/errors.hpp"
#include "hefraud/hash.hpp"

namespace hefraud::ope {

namespace {

using uint128 = unsigned __int128;

// Above this population size the hypergeometric sampler switches from exact
// inverse-CDF accumulation to a normal approximation.
constexpr uint128 kExactSamplingLimit = uint128(1) << 20;

long double to_ld(uint128 v) {
    return std::ldexp(static_cast<long double>(uint64_t(v >> 64)), 64) +
           static_cast<long double>(uint64_t(v));
}

/// Deterministic byte stream: HMAC-SHA256(key, interval || tweak || counter)
/// blocks, consumed as big-endian integers.
class PrfStream {
public:
    PrfStream(const OpeKey& key, uint64_t low_d, uint64_t high_d, uint64_t low_r, uint64_t high_r,
              uint8_t tweak)
        : key_(key) {
        size_t off = 0;
        for (uint64_t v : {low_d, high_d, low_r, high_r}) {
            auto be = be64(v);
            std::memcpy(msg_.data() + off, be.data(), 8);
            off += 8;
        }
        msg_[32] = tweak;
    }

    uint64_t next_u64() {
        uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v = (v << 8) | next_byte();
        return v;
    }

    uint128 next_u128() {
        uint128 hi = next_u64();
        return (hi << 64) | next_u64();
    }

    /// Uniform in the open interval (0, 1), from 53 bits of stream.
    long double next_unit() {
        uint64_t bits = next_u64() >> 11;
        return (static_cast<long double>(bits) + 0.5L) * std::ldexp(1.0L, -53);
    }

private:
    uint8_t next_byte() {
        if (pos_ == block_.size()) {
            auto be = be64(counter_++);
            std::memcpy(msg_.data() + 33, be.data(), 8);
            block_ = hmac_sha256(key_.bytes.data(), key_.bytes.size(), msg_.data(), msg_.size());
            pos_ = 0;
        }
        return block_[pos_++];
    }

    OpeKey key_;
    std::array<uint8_t, 41> msg_{};
    std::array<uint8_t, 32> block_{};
    size_t pos_ = 32;  // force first refill
    uint64_t counter_ = 0;
};

double log_choose(double n, double k) { return std::lgamma(n + 1) - std::lgamma(k + 1) - std::lgamma(n - k + 1); }

/// Draws from Hypergeometric(k draws, w white, b black). The sample is the
/// number of white balls drawn; support [max(0, k-b), min(k, w)].
uint128 sample_hypergeometric(uint128 k, uint128 w, uint128 b, PrfStream& stream) {
    uint128 lo = (k > b) ? k - b : 0;
    uint128 hi = std::min(k, w);
    if (lo >= hi) return lo;

    uint128 population = w + b;
    if (population > kExactSamplingLimit) {
        long double n = to_ld(population);
        long double p = to_ld(w) / n;
        long double kk = to_ld(k);
        long double mean = kk * p;
        long double var = kk * p * (1 - p) * (n - kk) / (n - 1);
        long double sd = var > 0 ? std::sqrt(var) : 0.0L;
        // Box-Muller from two stream uniforms.
        long double u1 = stream.next_unit();
        long double u2 = stream.next_unit();
        long double z = std::sqrt(-2.0L * std::log(u1)) * std::cos(2.0L * M_PIl * u2);
        long double x = std::nearbyintl(mean + z * sd);
        long double lo_ld = to_ld(lo), hi_ld = to_ld(hi);
        if (x < lo_ld) x = lo_ld;
        if (x > hi_ld) x = hi_ld;
        // Exact for integers below 2^64 which the clamp guarantees here.
        return uint128(static_cast<uint64_t>(x));
    }

    // Exact sampling: accumulate pmf outward from the mode until the stream
    // uniform is covered. Population <= 2^20 keeps everything in doubles.
    double dk = double(uint64_t(k)), dw = double(uint64_t(w)), db = double(uint64_t(b));
    double dn = dw + db;
    uint64_t lo64 = uint64_t(lo), hi64 = uint64_t(hi);
    uint64_t mode = uint64_t(((dk + 1) * (dw + 1)) / (dn + 2));
    mode = std::clamp(mode, lo64, hi64);

    double log_pmf_mode =
        log_choose(dw, double(mode)) + log_choose(db, dk - double(mode)) - log_choose(dn, dk);
    double pmf_mode = std::exp(log_pmf_mode);

    long double u = stream.next_unit();
    long double acc = pmf_mode;
    if (acc >= u) return mode;

    double pmf_down = pmf_mode, pmf_up = pmf_mode;
    uint64_t down = mode, up = mode;
    uint64_t last = mode;
    while (down > lo64 || up < hi64) {
        if (down > lo64) {
            double x = double(down);
            pmf_down *= (x * (db - dk + x)) / ((dw - x + 1) * (dk - x + 1));
            --down;
            acc += pmf_down;
            last = down;
            if (acc >= u) return down;
        }
        if (up < hi64) {
            double x = double(up);
            pmf_up *= ((dw - x) * (dk - x)) / ((x + 1) * (db - dk + x + 1));
            ++up;
            acc += pmf_up;
            last = up;
            if (acc >= u) return up;
        }
    }
    return last;  // floating-point residue: land on the farthest tail value
}

constexpr uint8_t kTweakCut = 0x01;
constexpr uint8_t kTweakFinal = 0x02;

}  // namespace

OpeKey key_from_bytes(const Bytes& raw) {
    if (raw.size() != 16) throw ParameterError("OPE key must be exactly 16 bytes");
    OpeKey k;
    std::copy(raw.begin(), raw.end(), k.bytes.begin());
    return k;
}

size_t OpeCipher::IntervalKeyHash::operator()(const IntervalKey& k) const {
    uint64_t h = 0x9e3779b97f4a7c15ull;
    for (uint64_t v : {k.low_d, k.high_d, k.low_r, k.high_r}) {
        h ^= v + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
        h *= 0xff51afd7ed558ccdull;
    }
    return size_t(h);
}

OpeCipher::OpeCipher(const OpeKey& key, const OpeParams& params) : key_(key), params_(params) {
    if (params.in_bits < 1 || params.in_bits > 63)
        throw ParameterError("OPE in_bits must be in [1, 63]");
    if (params.out_bits < 1 || params.out_bits > 64)
        throw ParameterError("OPE out_bits must be in [1, 64]");
    if (params.out_bits <= params.in_bits)
        throw ParameterError("OPE out_bits must exceed in_bits");
}

uint64_t OpeCipher::domain_cut(uint64_t low_d, uint64_t high_d, uint64_t low_r,
                               uint64_t high_r) const {
    IntervalKey ikey{low_d, high_d, low_r, high_r};
    {
        std::shared_lock lock(memo_mutex_);
        auto it = memo_.find(ikey);
        if (it != memo_.end()) return it->second;
    }

    uint128 domain_size = uint128(high_d) - low_d + 1;
    uint128 range_size = uint128(high_r) - low_r + 1;
    uint128 y_offset = (range_size + 1) / 2 - 1;  // midpoint of the range
    uint128 balls_picked = y_offset;
    PrfStream stream(key_, low_d, high_d, low_r, high_r, kTweakCut);
    uint128 sample =
        sample_hypergeometric(balls_picked, domain_size, range_size - domain_size, stream);
    uint64_t cut = low_d + uint64_t(sample);

    {
        std::unique_lock lock(memo_mutex_);
        memo_.emplace(ikey, cut);
    }
    return cut;
}

uint64_t OpeCipher::singleton_ciphertext(uint64_t m, uint64_t low_r, uint64_t high_r) const {
    uint128 range_size = uint128(high_r) - low_r + 1;
    PrfStream stream(key_, m, m, low_r, high_r, kTweakFinal);
    return low_r + uint64_t(stream.next_u128() % range_size);
}

uint64_t OpeCipher::encrypt(uint64_t plaintext) const {
    if (params_.in_bits < 64 && (plaintext >> params_.in_bits) != 0)
        throw RangeError("OPE plaintext outside domain");

    uint64_t low_d = 0, high_d = (uint64_t(1) << params_.in_bits) - 1;
    uint64_t low_r = 0;
    uint64_t high_r =
        (params_.out_bits == 64) ? ~uint64_t(0) : (uint64_t(1) << params_.out_bits) - 1;

    for (;;) {
        if (low_d == high_d) return singleton_ciphertext(low_d, low_r, high_r);
        uint128 range_size = uint128(high_r) - low_r + 1;
        uint64_t y = low_r + uint64_t((range_size + 1) / 2 - 1);
        uint64_t cut = domain_cut(low_d, high_d, low_r, high_r);
        if (plaintext <= cut) {
            high_d = cut;
            high_r = y;
        } else {
            low_d = cut + 1;
            low_r = y + 1;
        }
    }
}

uint64_t OpeCipher::decrypt(uint64_t ciphertext) const {
    if (params_.out_bits < 64 && (ciphertext >> params_.out_bits) != 0)
        throw NotACiphertextError("value outside OPE range");

    uint64_t low_d = 0, high_d = (uint64_t(1) << params_.in_bits) - 1;
    uint64_t low_r = 0;
    uint64_t high_r =
        (params_.out_bits == 64) ? ~uint64_t(0) : (uint64_t(1) << params_.out_bits) - 1;

    for (;;) {
        if (low_d == high_d) {
            if (singleton_ciphertext(low_d, low_r, high_r) != ciphertext)
                throw NotACiphertextError("value is not in the image of the encryption map");
            return low_d;
        }
        uint128 range_size = uint128(high_r) - low_r + 1;
        uint64_t y = low_r + uint64_t((range_size + 1) / 2 - 1);
        uint64_t cut = domain_cut(low_d, high_d, low_r, high_r);
        if (ciphertext <= y) {
            high_d = cut;
            high_r = y;
        } else {
            low_d = cut + 1;
            low_r = y + 1;
        }
    }
}

Quantizer::Quantizer(double min_value, double max_value, uint64_t bucket_count)
    : min(min_value), max(max_value), buckets(bucket_count) {
    if (!(min < max)) throw ParameterError("quantizer requires min < max");
    if (buckets < 2) throw ParameterError("quantizer requires at least 2 buckets");
}

uint64_t Quantizer::quantize(double v) const {
    double clamped = std::clamp(v, min, max);
    long double frac = (static_cast<long double>(clamped) - min) / (static_cast<long double>(max) - min);
    return uint64_t(llroundl(frac * static_cast<long double>(buckets - 1)));
}

Tag feature_tag(const std::array<uint8_t, 16>& seed, std::string_view name) {
    return hmac_sha256(seed.data(), seed.size(),
                       reinterpret_cast<const uint8_t*>(name.data()), name.size());
}

std::string tag_hex(const Tag& tag) { return hex_encode(tag.data(), tag.size()); }

Tag tag_from_hex(std::string_view hex) {
    Bytes raw = hex_decode(hex);
    if (raw.size() != 32) throw ParseError("feature tag must be 32 bytes", "tag");
    Tag t;
    std::copy(raw.begin(), raw.end(), t.begin());
    return t;
}

}  // namespace hefraud::ope
