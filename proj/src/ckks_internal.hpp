// Copyright (c) 2026 the hefraud authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <complex>
#include <vector>

#include "hefraud/ckks.hpp"

namespace hefraud::ckks {

// Key-switch digit width. One digit per 30-bit window of the data modulus,
// paired with a ~40-bit special prime so key-switch noise stays far below a
// 2^30 scale.
constexpr int kDigitBits = 30;

namespace internal {

inline uint64_t add_mod(uint64_t a, uint64_t b, uint64_t p) {
    uint64_t s = a + b;
    return s >= p ? s - p : s;
}
inline uint64_t sub_mod(uint64_t a, uint64_t b, uint64_t p) { return a >= b ? a - b : a + p - b; }
inline uint64_t mul_mod(uint64_t a, uint64_t b, uint64_t p) {
    return uint64_t((unsigned __int128)a * b % p);
}
/// Shoup multiplication: w fixed and < p, w_shoup = floor(w * 2^64 / p).
inline uint64_t mul_mod_shoup(uint64_t a, uint64_t w, uint64_t w_shoup, uint64_t p) {
    uint64_t q = uint64_t(((unsigned __int128)a * w_shoup) >> 64);
    uint64_t r = a * w - q * p;
    return r >= p ? r - p : r;
}
uint64_t pow_mod_u64(uint64_t base, uint64_t exp, uint64_t p);

/// Negacyclic number-theoretic transform modulo one prime (p = 1 mod 2N).
/// The 2N-th root twist is folded into the butterfly tables, so
/// forward/pointwise/inverse realizes multiplication mod X^N + 1.
struct NttTables {
    uint64_t prime = 0;
    size_t n = 0;
    std::vector<uint64_t> psi_rev, psi_rev_shoup;
    std::vector<uint64_t> psi_inv_rev, psi_inv_rev_shoup;
    uint64_t n_inv = 0, n_inv_shoup = 0;

    void init(uint64_t p, size_t ring_degree);
    void forward(uint64_t* a) const;
    void inverse(uint64_t* a) const;
};

/// Complex FFT plus the slot index map of the canonical embedding.
struct FftTables {
    size_t n = 0;
    std::vector<std::complex<double>> psi_pow;  // exp(i pi k / N)
    std::vector<size_t> idx5;                   // (5^t mod 2N - 1) / 2
    std::vector<size_t> bitrev;

    void init(size_t ring_degree);
    /// In-place FFT computing sum_k a_k exp(sign * 2*pi*i*k*m / N), no 1/N.
    void fft(std::vector<std::complex<double>>& a, int sign) const;
};

}  // namespace internal

struct Context::Impl {
    size_t n = 0;
    std::vector<uint64_t> all_primes;  // data primes then the special prime
    size_t special_index = 0;
    std::vector<internal::NttTables> ntt;  // parallel to all_primes
    internal::FftTables fft;

    // CRT reconstruction bases. crt_data[level][i] covers primes 0..level over
    // modulus Q_level; crt_key[level][j] covers primes {0..level, special}
    // over P*Q_level (special is the last entry).
    std::vector<std::vector<mpz_class>> crt_data;
    std::vector<std::vector<mpz_class>> crt_key;
    std::vector<mpz_class> key_level_moduli;  // P * Q_level
    std::vector<mpz_class> half_level_moduli;
    std::vector<mpz_class> half_key_moduli;
    std::vector<int> digit_count;  // per level
    mpz_class special_mpz;
    mpz_class special_half;
};

namespace internal {

Poly zero_poly(size_t n);
/// a*b mod Q_level (data primes 0..level).
Poly poly_mult(const Context& ctx, const Poly& a, const Poly& b, int level);
/// a*b mod P*Q_level (primes 0..level plus the special prime).
Poly poly_mult_key(const Context& ctx, const Poly& a, const Poly& b, int level);
void poly_add_inplace(Poly& a, const Poly& b, const mpz_class& mod);
void poly_sub_inplace(Poly& a, const Poly& b, const mpz_class& mod);
Poly poly_scalar_mult(const Poly& a, const mpz_class& scalar, const mpz_class& mod);
Poly reduce_poly(const Poly& a, const mpz_class& mod);

/// sigma_g: X -> X^g. Cheap coefficient permutation with sign flips.
Poly galois_permute(const Poly& p, uint64_t g, size_t n, const mpz_class& mod);
uint64_t pow5_mod(uint64_t k, uint64_t two_n);

Poly secret_to_poly(const SecretKey& sk, const mpz_class& mod);
Poly sample_uniform_poly(Rng& rng, const mpz_class& mod, size_t n);
Poly sample_gaussian_poly(Rng& rng, const mpz_class& mod, size_t n);
Poly sample_ternary_poly(Rng& rng, const mpz_class& mod, size_t n);

/// Switches `c` (mod Q_level) from the key's source secret to the canonical
/// secret: returns the (t0, t1) pair to fold into a ciphertext.
std::pair<Poly, Poly> keyswitch(const Context& ctx, const Poly& c, const KswKey& key, int level);

/// Evaluation key mapping `src` (s^2 or a Galois image of s, mod P*Q) to s.
KswKey make_ksw_key(const Context& ctx, const Poly& src, const SecretKey& sk, Rng& rng);

}  // namespace internal
}  // namespace hefraud::ckks
