// Copyright (c) 2026 the hefraud authors
// SPDX-License-Identifier: Apache-2.0

#include <cstring>

#include "ckks_internal.hpp"
#include "hefraud/errors.hpp"

namespace hefraud::ckks::internal {

Poly zero_poly(size_t n) {
    Poly p;
    p.coeffs.assign(n, mpz_class(0));
    return p;
}

namespace {

/// Residues of a coefficient vector modulo a word-size prime.
void residues_mod(const Poly& a, uint64_t p, std::vector<uint64_t>& out) {
    out.resize(a.coeffs.size());
    for (size_t i = 0; i < a.coeffs.size(); ++i)
        out[i] = mpz_fdiv_ui(a.coeffs[i].get_mpz_t(), static_cast<unsigned long>(p));
}

/// CRT-combine per-prime residues into mpz coefficients modulo `product`.
void crt_combine(const std::vector<std::vector<uint64_t>>& residues,
                 const std::vector<mpz_class>& basis, const mpz_class& product, Poly& out) {
    size_t n = residues.front().size();
    out.coeffs.assign(n, mpz_class(0));
    for (size_t i = 0; i < n; ++i) {
        mpz_class& acc = out.coeffs[i];
        for (size_t j = 0; j < residues.size(); ++j)
            mpz_addmul_ui(acc.get_mpz_t(), basis[j].get_mpz_t(),
                          static_cast<unsigned long>(residues[j][i]));
        acc %= product;
    }
}

Poly poly_mult_over(const Context& ctx, const Poly& a, const Poly& b,
                    const std::vector<size_t>& prime_indices,
                    const std::vector<mpz_class>& basis, const mpz_class& product) {
    const auto& im = ctx.impl();
    size_t n = im.n;
    std::vector<std::vector<uint64_t>> residues(prime_indices.size());
    std::vector<uint64_t> ra(n), rb(n);
    for (size_t j = 0; j < prime_indices.size(); ++j) {
        const NttTables& tables = im.ntt[prime_indices[j]];
        uint64_t p = tables.prime;
        residues_mod(a, p, ra);
        residues_mod(b, p, rb);
        tables.forward(ra.data());
        tables.forward(rb.data());
        for (size_t i = 0; i < n; ++i) ra[i] = mul_mod(ra[i], rb[i], p);
        tables.inverse(ra.data());
        residues[j] = ra;
    }
    Poly out;
    crt_combine(residues, basis, product, out);
    return out;
}

std::vector<size_t> data_indices(int level) {
    std::vector<size_t> idx(size_t(level) + 1);
    for (int i = 0; i <= level; ++i) idx[size_t(i)] = size_t(i);
    return idx;
}

std::vector<size_t> key_indices(const Context& ctx, int level) {
    auto idx = data_indices(level);
    idx.push_back(ctx.impl().special_index);
    return idx;
}

}  // namespace

Poly poly_mult(const Context& ctx, const Poly& a, const Poly& b, int level) {
    return poly_mult_over(ctx, a, b, data_indices(level), ctx.impl().crt_data[size_t(level)],
                          ctx.modulus_at(level));
}

Poly poly_mult_key(const Context& ctx, const Poly& a, const Poly& b, int level) {
    return poly_mult_over(ctx, a, b, key_indices(ctx, level), ctx.impl().crt_key[size_t(level)],
                          ctx.impl().key_level_moduli[size_t(level)]);
}

void poly_add_inplace(Poly& a, const Poly& b, const mpz_class& mod) {
    for (size_t i = 0; i < a.coeffs.size(); ++i) {
        a.coeffs[i] += b.coeffs[i];
        if (a.coeffs[i] >= mod) a.coeffs[i] -= mod;
    }
}

void poly_sub_inplace(Poly& a, const Poly& b, const mpz_class& mod) {
    for (size_t i = 0; i < a.coeffs.size(); ++i) {
        a.coeffs[i] -= b.coeffs[i];
        if (a.coeffs[i] < 0) a.coeffs[i] += mod;
    }
}

Poly poly_scalar_mult(const Poly& a, const mpz_class& scalar, const mpz_class& mod) {
    Poly out;
    out.coeffs.resize(a.coeffs.size());
    for (size_t i = 0; i < a.coeffs.size(); ++i) out.coeffs[i] = (a.coeffs[i] * scalar) % mod;
    return out;
}

Poly reduce_poly(const Poly& a, const mpz_class& mod) {
    Poly out;
    out.coeffs.resize(a.coeffs.size());
    for (size_t i = 0; i < a.coeffs.size(); ++i) {
        out.coeffs[i] = a.coeffs[i] % mod;
        if (out.coeffs[i] < 0) out.coeffs[i] += mod;
    }
    return out;
}

uint64_t pow5_mod(uint64_t k, uint64_t two_n) {
    uint64_t result = 1;
    uint64_t base = 5 % two_n;
    while (k > 0) {
        if (k & 1) result = (result * base) % two_n;
        base = (base * base) % two_n;
        k >>= 1;
    }
    return result;
}

Poly galois_permute(const Poly& p, uint64_t g, size_t n, const mpz_class& mod) {
    Poly out = zero_poly(n);
    uint64_t two_n = 2 * n;
    for (size_t i = 0; i < n; ++i) {
        uint64_t j = (uint64_t(i) * g) % two_n;
        if (j < n) {
            out.coeffs[size_t(j)] = p.coeffs[i];
        } else {
            // X^(n+r) = -X^r
            const mpz_class& v = p.coeffs[i];
            out.coeffs[size_t(j - n)] = v == 0 ? mpz_class(0) : mpz_class(mod - v);
        }
    }
    return out;
}

Poly secret_to_poly(const SecretKey& sk, const mpz_class& mod) {
    Poly out;
    out.coeffs.resize(sk.coeffs.size());
    for (size_t i = 0; i < sk.coeffs.size(); ++i) {
        if (sk.coeffs[i] == 0) out.coeffs[i] = 0;
        else if (sk.coeffs[i] == 1) out.coeffs[i] = 1;
        else out.coeffs[i] = mod - 1;
    }
    return out;
}

Poly sample_uniform_poly(Rng& rng, const mpz_class& mod, size_t n) {
    gmp_randclass grand(gmp_randinit_mt);
    grand.seed(rng.next_u64());
    Poly out;
    out.coeffs.resize(n);
    for (size_t i = 0; i < n; ++i) out.coeffs[i] = grand.get_z_range(mod);
    return out;
}

Poly sample_gaussian_poly(Rng& rng, const mpz_class& mod, size_t n) {
    constexpr double kSigma = 3.2;
    Poly out;
    out.coeffs.resize(n);
    for (size_t i = 0; i < n; ++i) {
        long v = std::lround(rng.normal(0.0, kSigma));
        if (v >= 0) out.coeffs[i] = v;
        else out.coeffs[i] = mod - mpz_class(-v);
    }
    return out;
}

Poly sample_ternary_poly(Rng& rng, const mpz_class& mod, size_t n) {
    Poly out;
    out.coeffs.resize(n);
    for (size_t i = 0; i < n; ++i) {
        uint64_t r = rng.uniform(3);
        if (r == 0) out.coeffs[i] = 0;
        else if (r == 1) out.coeffs[i] = 1;
        else out.coeffs[i] = mod - 1;
    }
    return out;
}

namespace {

/// 30-bit digits of every coefficient; coefficients must already be in
/// [0, Q_level).
void decompose_digits(const Poly& c, int n_digits, std::vector<std::vector<uint64_t>>& out) {
    size_t n = c.coeffs.size();
    out.assign(size_t(n_digits), std::vector<uint64_t>(n));
    constexpr uint64_t mask = (uint64_t(1) << kDigitBits) - 1;
    uint64_t limbs[16];  // up to 1024 coefficient bits, far above any chain here
    for (size_t i = 0; i < n; ++i) {
        std::memset(limbs, 0, sizeof(limbs));
        size_t count = 0;
        mpz_export(limbs, &count, -1, sizeof(uint64_t), 0, 0, c.coeffs[i].get_mpz_t());
        for (int d = 0; d < n_digits; ++d) {
            int bit = d * kDigitBits;
            int limb = bit >> 6, off = bit & 63;
            uint64_t v = limbs[limb] >> off;
            if (off + kDigitBits > 64 && limb + 1 < 16) v |= limbs[limb + 1] << (64 - off);
            out[size_t(d)][i] = v & mask;
        }
    }
}

/// Centered rounding division by the special prime, reduced mod q.
void divide_round_special(const Context& ctx, Poly& t, int level) {
    const auto& im = ctx.impl();
    const mpz_class& pq = im.key_level_moduli[size_t(level)];
    const mpz_class& half_pq = im.half_key_moduli[size_t(level)];
    const mpz_class& p = im.special_mpz;
    const mpz_class& half_p = im.special_half;
    const mpz_class& q = ctx.modulus_at(level);
    for (auto& c : t.coeffs) {
        if (c > half_pq) c -= pq;
        c += half_p;
        mpz_fdiv_q(c.get_mpz_t(), c.get_mpz_t(), p.get_mpz_t());
        c %= q;
        if (c < 0) c += q;
    }
}

}  // namespace

std::pair<Poly, Poly> keyswitch(const Context& ctx, const Poly& c, const KswKey& key, int level) {
    const auto& im = ctx.impl();
    size_t n = im.n;
    int n_digits = im.digit_count[size_t(level)];
    if (size_t(n_digits) > key.digits.size())
        throw KeyError("key-switch key has too few digits for this level");

    std::vector<std::vector<uint64_t>> digits;
    decompose_digits(c, n_digits, digits);

    auto primes = key_indices(ctx, level);
    std::vector<std::vector<uint64_t>> res0(primes.size()), res1(primes.size());
    std::vector<uint64_t> tmp(n);
    for (size_t j = 0; j < primes.size(); ++j) {
        const NttTables& tables = im.ntt[primes[j]];
        uint64_t p = tables.prime;
        std::vector<uint64_t> acc0(n, 0), acc1(n, 0);
        for (int d = 0; d < n_digits; ++d) {
            const auto& k0 = key.digits[size_t(d)].k0[primes[j]];
            const auto& k1 = key.digits[size_t(d)].k1[primes[j]];
            for (size_t i = 0; i < n; ++i) {
                uint64_t v = digits[size_t(d)][i];
                tmp[i] = v >= p ? v - p : v;  // digits < 2^30, p can be just below 2^30
            }
            tables.forward(tmp.data());
            for (size_t i = 0; i < n; ++i) {
                acc0[i] = add_mod(acc0[i], mul_mod(tmp[i], k0[i], p), p);
                acc1[i] = add_mod(acc1[i], mul_mod(tmp[i], k1[i], p), p);
            }
        }
        tables.inverse(acc0.data());
        tables.inverse(acc1.data());
        res0[j] = std::move(acc0);
        res1[j] = std::move(acc1);
    }

    const auto& basis = im.crt_key[size_t(level)];
    const mpz_class& pq = im.key_level_moduli[size_t(level)];
    Poly t0, t1;
    crt_combine(res0, basis, pq, t0);
    crt_combine(res1, basis, pq, t1);
    divide_round_special(ctx, t0, level);
    divide_round_special(ctx, t1, level);
    return {std::move(t0), std::move(t1)};
}

KswKey make_ksw_key(const Context& ctx, const Poly& src, const SecretKey& sk, Rng& rng) {
    const auto& im = ctx.impl();
    int level = int(im.digit_count.size()) - 1;
    int n_digits = im.digit_count[size_t(level)];
    const mpz_class& pq = im.key_level_moduli[size_t(level)];
    size_t n = im.n;

    Poly s = secret_to_poly(sk, pq);
    KswKey key;
    key.digits.resize(size_t(n_digits));

    mpz_class digit_base = 1;
    for (int d = 0; d < n_digits; ++d) {
        Poly a = sample_uniform_poly(rng, pq, n);
        Poly e = sample_gaussian_poly(rng, pq, n);

        // k0 = -(a*s) + e + (P * B^d) * src  (mod P*Q)
        Poly as = poly_mult_key(ctx, a, s, level);
        mpz_class factor = (im.special_mpz * digit_base) % pq;
        Poly k0 = poly_scalar_mult(src, factor, pq);
        poly_add_inplace(k0, e, pq);
        poly_sub_inplace(k0, as, pq);

        auto to_ntt_residues = [&](const Poly& poly) {
            std::vector<std::vector<uint64_t>> out(im.all_primes.size());
            for (size_t j = 0; j < im.all_primes.size(); ++j) {
                residues_mod(poly, im.all_primes[j], out[j]);
                im.ntt[j].forward(out[j].data());
            }
            return out;
        };
        key.digits[size_t(d)].k0 = to_ntt_residues(k0);
        key.digits[size_t(d)].k1 = to_ntt_residues(a);

        digit_base <<= kDigitBits;
    }
    return key;
}

}  // namespace hefraud::ckks::internal
