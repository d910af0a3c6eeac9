// Copyright (c) 2026 the hefraud authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <cstring>

#include "ckks_internal.hpp"
#include "hefraud/errors.hpp"
#include "hefraud/hash.hpp"

namespace hefraud::ckks {

using namespace internal;

int max_modulus_bits_128(size_t ring_degree) {
    // HE security standard, ternary secret, classical hardness.
    switch (ring_degree) {
        case 1024: return 27;
        case 2048: return 54;
        case 4096: return 109;
        case 8192: return 218;
        case 16384: return 438;
        case 32768: return 881;
        default: return 0;  // no 128-bit figure tabulated
    }
}

namespace internal {

uint64_t pow_mod_u64(uint64_t base, uint64_t exp, uint64_t p) {
    uint64_t result = 1;
    base %= p;
    while (exp > 0) {
        if (exp & 1) result = mul_mod(result, base, p);
        base = mul_mod(base, base, p);
        exp >>= 1;
    }
    return result;
}

namespace {

bool is_prime_u64(uint64_t v) {
    mpz_class z(static_cast<unsigned long>(v));
    return mpz_probab_prime_p(z.get_mpz_t(), 40) > 0;
}

uint64_t bit_reverse(uint64_t v, int bits) {
    uint64_t out = 0;
    for (int i = 0; i < bits; ++i) {
        out = (out << 1) | (v & 1);
        v >>= 1;
    }
    return out;
}

uint64_t shoup_constant(uint64_t w, uint64_t p) {
    return uint64_t(((unsigned __int128)w << 64) / p);
}

/// Smallest-distance prime to 2^bits with p = 1 mod 2n, not already taken.
uint64_t find_ntt_prime(int bits, size_t n, const std::vector<uint64_t>& taken) {
    uint64_t two_n = uint64_t(2) * n;
    uint64_t center = uint64_t(1) << bits;
    for (uint64_t step = 0;; ++step) {
        for (int sign : {+1, -1}) {
            if (step == 0 && sign < 0) continue;
            uint64_t candidate;
            if (sign > 0) {
                candidate = center + step * two_n + 1;
            } else {
                if (center < step * two_n + 1) continue;
                candidate = center - step * two_n + 1;
            }
            if (candidate < 3) continue;
            if (std::find(taken.begin(), taken.end(), candidate) != taken.end()) continue;
            if (is_prime_u64(candidate)) return candidate;
        }
    }
}

}  // namespace

void NttTables::init(uint64_t p, size_t ring_degree) {
    prime = p;
    n = ring_degree;
    int log_n = 0;
    while ((size_t(1) << log_n) < n) ++log_n;

    // psi: a primitive 2n-th root of unity mod p (psi^n = -1).
    uint64_t psi = 0;
    for (uint64_t g = 2;; ++g) {
        uint64_t cand = pow_mod_u64(g, (p - 1) / (2 * n), p);
        if (cand != 1 && pow_mod_u64(cand, n, p) == p - 1) {
            psi = cand;
            break;
        }
    }
    uint64_t psi_inv = pow_mod_u64(psi, 2 * n - 1, p);

    psi_rev.resize(n);
    psi_rev_shoup.resize(n);
    psi_inv_rev.resize(n);
    psi_inv_rev_shoup.resize(n);
    uint64_t power = 1, power_inv = 1;
    for (size_t i = 0; i < n; ++i) {
        size_t r = size_t(bit_reverse(i, log_n));
        psi_rev[r] = power;
        psi_inv_rev[r] = power_inv;
        power = mul_mod(power, psi, p);
        power_inv = mul_mod(power_inv, psi_inv, p);
    }
    for (size_t i = 0; i < n; ++i) {
        psi_rev_shoup[i] = shoup_constant(psi_rev[i], p);
        psi_inv_rev_shoup[i] = shoup_constant(psi_inv_rev[i], p);
    }
    n_inv = pow_mod_u64(uint64_t(n) % p, p - 2, p);
    n_inv_shoup = shoup_constant(n_inv, p);
}

void NttTables::forward(uint64_t* a) const {
    const uint64_t p = prime;
    size_t t = n;
    for (size_t m = 1; m < n; m <<= 1) {
        t >>= 1;
        for (size_t i = 0; i < m; ++i) {
            size_t j1 = 2 * i * t;
            uint64_t s = psi_rev[m + i];
            uint64_t s_shoup = psi_rev_shoup[m + i];
            for (size_t j = j1; j < j1 + t; ++j) {
                uint64_t u = a[j];
                uint64_t v = mul_mod_shoup(a[j + t], s, s_shoup, p);
                a[j] = add_mod(u, v, p);
                a[j + t] = sub_mod(u, v, p);
            }
        }
    }
}

void NttTables::inverse(uint64_t* a) const {
    const uint64_t p = prime;
    size_t t = 1;
    for (size_t m = n; m > 1; m >>= 1) {
        size_t j1 = 0;
        size_t h = m >> 1;
        for (size_t i = 0; i < h; ++i) {
            uint64_t s = psi_inv_rev[h + i];
            uint64_t s_shoup = psi_inv_rev_shoup[h + i];
            for (size_t j = j1; j < j1 + t; ++j) {
                uint64_t u = a[j];
                uint64_t v = a[j + t];
                a[j] = add_mod(u, v, p);
                a[j + t] = mul_mod_shoup(sub_mod(u, v, p), s, s_shoup, p);
            }
            j1 += 2 * t;
        }
        t <<= 1;
    }
    for (size_t j = 0; j < n; ++j) a[j] = mul_mod_shoup(a[j], n_inv, n_inv_shoup, p);
}

void FftTables::init(size_t ring_degree) {
    n = ring_degree;
    psi_pow.resize(n);
    for (size_t k = 0; k < n; ++k) {
        double angle = M_PI * double(k) / double(n);
        psi_pow[k] = {std::cos(angle), std::sin(angle)};
    }
    idx5.resize(n / 2);
    uint64_t two_n = 2 * n;
    uint64_t pow5 = 1;
    for (size_t t = 0; t < n / 2; ++t) {
        idx5[t] = size_t((pow5 - 1) / 2);
        pow5 = (pow5 * 5) % two_n;
    }
    int log_n = 0;
    while ((size_t(1) << log_n) < n) ++log_n;
    bitrev.resize(n);
    for (size_t i = 0; i < n; ++i) bitrev[i] = size_t(bit_reverse(i, log_n));
}

void FftTables::fft(std::vector<std::complex<double>>& a, int sign) const {
    for (size_t i = 0; i < n; ++i)
        if (i < bitrev[i]) std::swap(a[i], a[bitrev[i]]);
    for (size_t len = 2; len <= n; len <<= 1) {
        double angle = double(sign) * 2.0 * M_PI / double(len);
        std::complex<double> wl{std::cos(angle), std::sin(angle)};
        for (size_t i = 0; i < n; i += len) {
            std::complex<double> w{1.0, 0.0};
            for (size_t j = 0; j < len / 2; ++j) {
                auto u = a[i + j];
                auto v = a[i + j + len / 2] * w;
                a[i + j] = u + v;
                a[i + j + len / 2] = u - v;
                w *= wl;
            }
        }
    }
}

}  // namespace internal

Context::~Context() = default;

ContextPtr Context::create(const ContextDescriptor& d, SecurityPolicy policy) {
    return create(d.ring_degree, d.moduli_bits, d.scale, policy);
}

ContextPtr Context::create(size_t ring_degree, const std::vector<int>& moduli_bits, double scale,
                           SecurityPolicy policy) {
    if (ring_degree < 8 || (ring_degree & (ring_degree - 1)) != 0)
        throw ParameterError("ring degree must be a power of two (>= 8)");
    if (moduli_bits.size() < 2)
        throw ParameterError("modulus chain needs at least one data prime and the special prime");
    int total_bits = 0;
    for (int b : moduli_bits) {
        if (b < 20 || b > 60) throw ParameterError("modulus prime sizes must lie in [20, 60] bits");
        total_bits += b;
    }
    if (!(scale > 1.0)) throw ParameterError("scale must exceed 1");

    if (policy == SecurityPolicy::kEnforce128) {
        int cap = max_modulus_bits_128(ring_degree);
        if (cap == 0)
            throw SecurityError("no 128-bit security figure for ring degree " +
                                std::to_string(ring_degree));
        if (total_bits > cap)
            throw SecurityError("total modulus of " + std::to_string(total_bits) +
                                " bits exceeds the 128-bit cap of " + std::to_string(cap) +
                                " bits for N=" + std::to_string(ring_degree));
    }

    auto ctx = std::shared_ptr<Context>(new Context());
    ctx->n_ = ring_degree;
    ctx->moduli_bits_ = moduli_bits;
    ctx->scale_ = scale;
    ctx->impl_ = std::make_unique<Impl>();
    Impl& im = *ctx->impl_;
    im.n = ring_degree;

    // Primes: closest to 2^bits with p = 1 mod 2N, all distinct. The search
    // is deterministic, so the same descriptor yields the same context
    // everywhere.
    std::vector<uint64_t> taken;
    for (size_t i = 0; i + 1 < moduli_bits.size(); ++i) {
        uint64_t p = internal::find_ntt_prime(moduli_bits[i], ring_degree, taken);
        taken.push_back(p);
        ctx->data_primes_.push_back(p);
    }
    ctx->special_prime_ = internal::find_ntt_prime(moduli_bits.back(), ring_degree, taken);
    taken.push_back(ctx->special_prime_);

    im.all_primes = ctx->data_primes_;
    im.all_primes.push_back(ctx->special_prime_);
    im.special_index = im.all_primes.size() - 1;
    im.special_mpz = mpz_class(static_cast<unsigned long>(ctx->special_prime_));
    im.special_half = im.special_mpz / 2;

    im.ntt.resize(im.all_primes.size());
    for (size_t i = 0; i < im.all_primes.size(); ++i) im.ntt[i].init(im.all_primes[i], ring_degree);
    im.fft.init(ring_degree);

    int levels = int(ctx->data_primes_.size());
    ctx->level_moduli_.resize(levels);
    im.key_level_moduli.resize(levels);
    im.half_level_moduli.resize(levels);
    im.half_key_moduli.resize(levels);
    im.crt_data.resize(levels);
    im.crt_key.resize(levels);
    im.digit_count.resize(levels);

    mpz_class running = 1;
    for (int l = 0; l < levels; ++l) {
        running *= mpz_class(static_cast<unsigned long>(ctx->data_primes_[size_t(l)]));
        ctx->level_moduli_[size_t(l)] = running;
        im.key_level_moduli[size_t(l)] = running * im.special_mpz;
        im.half_level_moduli[size_t(l)] = running / 2;
        im.half_key_moduli[size_t(l)] = im.key_level_moduli[size_t(l)] / 2;
        im.digit_count[size_t(l)] =
            int((mpz_sizeinbase(running.get_mpz_t(), 2) + kDigitBits - 1) / kDigitBits);

        // CRT bases over the data modulus
        auto make_basis = [](const std::vector<uint64_t>& primes, const mpz_class& product) {
            std::vector<mpz_class> basis;
            basis.reserve(primes.size());
            for (uint64_t p : primes) {
                mpz_class pz(static_cast<unsigned long>(p));
                mpz_class mi = product / pz;
                mpz_class inv;
                if (mpz_invert(inv.get_mpz_t(), mpz_class(mi % pz).get_mpz_t(), pz.get_mpz_t()) == 0)
                    throw ParameterError("CRT basis inversion failed");
                basis.push_back((mi * inv) % product);
            }
            return basis;
        };
        std::vector<uint64_t> data_subset(ctx->data_primes_.begin(),
                                          ctx->data_primes_.begin() + l + 1);
        im.crt_data[size_t(l)] = make_basis(data_subset, running);
        std::vector<uint64_t> key_subset = data_subset;
        key_subset.push_back(ctx->special_prime_);
        im.crt_key[size_t(l)] = make_basis(key_subset, im.key_level_moduli[size_t(l)]);
    }
    ctx->key_modulus_ = im.key_level_moduli.back();

    // digest over the descriptor
    Bytes digest_input;
    append_be64(digest_input, uint64_t(ring_degree));
    for (int b : moduli_bits) append_be32(digest_input, uint32_t(b));
    uint64_t scale_bits;
    static_assert(sizeof(scale_bits) == sizeof(scale));
    std::memcpy(&scale_bits, &scale, sizeof(scale));
    append_be64(digest_input, scale_bits);
    auto h = sha256(digest_input);
    ctx->digest_ = from_be64(h.data());

    return ctx;
}

const mpz_class& Context::modulus_at(int level) const {
    if (level < 0 || level > max_level()) throw DepthError("level out of range");
    return level_moduli_[size_t(level)];
}

ContextDescriptor Context::descriptor() const {
    return ContextDescriptor{n_, moduli_bits_, scale_};
}

Plaintext Context::encode(std::span<const double> values, double scale, int level) const {
    if (values.size() > slot_count())
        throw CapacityError("vector of " + std::to_string(values.size()) +
                            " values exceeds " + std::to_string(slot_count()) + " slots");
    if (level < 0 || level > max_level()) throw DepthError("encode level out of range");

    const Impl& im = *impl_;
    std::vector<std::complex<double>> b(n_, {0.0, 0.0});
    for (size_t t = 0; t < slot_count(); ++t) {
        double z = t < values.size() ? values[t] : 0.0;
        double scaled = z * scale;
        b[im.fft.idx5[t]] = {scaled, 0.0};
        b[n_ - 1 - im.fft.idx5[t]] = {scaled, 0.0};  // conjugate of a real value
    }
    im.fft.fft(b, -1);
    double inv_n = 1.0 / double(n_);

    const mpz_class& q = modulus_at(level);
    Plaintext pt;
    pt.level = level;
    pt.scale = scale;
    pt.poly.coeffs.resize(n_);
    for (size_t k = 0; k < n_; ++k) {
        // untwist by psi^-k (conjugate of psi^k) and round the real part
        std::complex<double> w = b[k] * std::conj(im.fft.psi_pow[k]) * inv_n;
        double r = std::nearbyint(w.real());
        mpz_class& c = pt.poly.coeffs[k];
        mpz_set_d(c.get_mpz_t(), std::abs(r));
        if (r < 0) c = q - (c % q);
        c %= q;
    }
    return pt;
}

Plaintext Context::encode(std::span<const double> values) const {
    return encode(values, scale_, max_level());
}

std::vector<double> Context::decode(const Plaintext& pt) const {
    const Impl& im = *impl_;
    const mpz_class& q = modulus_at(pt.level);
    const mpz_class& half = im.half_level_moduli[size_t(pt.level)];

    std::vector<std::complex<double>> b(n_);
    for (size_t k = 0; k < n_; ++k) {
        mpz_class v = pt.poly.coeffs[k];
        if (v > half) v -= q;
        b[k] = im.fft.psi_pow[k] * v.get_d();
    }
    im.fft.fft(b, +1);
    std::vector<double> out(slot_count());
    for (size_t t = 0; t < slot_count(); ++t) out[t] = b[im.fft.idx5[t]].real() / pt.scale;
    return out;
}

}  // namespace hefraud::ckks
