// Copyright (c) 2026 the hefraud authors
// SPDX-License-Identifier: Apache-2.0

#include "hefraud/paillier.hpp"

#include <cmath>

#include "hefraud/errors.hpp"
#include "hefraud/hash.hpp"

namespace hefraud::paillier {

namespace {

constexpr int kPrimalityRounds = 64;

uint64_t key_id_of(const mpz_class& n) {
    Bytes nb = mpz_to_bytes(n);
    auto digest = sha256(nb.data(), nb.size());
    return from_be64(digest.data());
}

/// Random prime with exactly `bits` bits and the two top bits set, so the
/// product of two such primes has exactly 2*bits bits.
mpz_class random_prime(int bits, gmp_randclass& grand) {
    mpz_class top = mpz_class(1) << (bits - 1);
    mpz_class second = mpz_class(1) << (bits - 2);
    for (;;) {
        mpz_class cand = grand.get_z_bits(bits);
        cand |= top;
        cand |= second;
        cand |= 1;
        if (mpz_probab_prime_p(cand.get_mpz_t(), kPrimalityRounds) > 0) return cand;
    }
}

}  // namespace

Keypair keygen(int bits, Rng& rng) {
    if (bits < 256) throw ParameterError("paillier key size must be at least 256 bits");
    if (bits % 2 != 0) throw ParameterError("paillier key size must be even");

    gmp_randclass grand(gmp_randinit_mt);
    grand.seed(rng.next_u64());

    mpz_class p, q, n;
    do {
        p = random_prime(bits / 2, grand);
        do {
            q = random_prime(bits / 2, grand);
        } while (p == q);
        n = p * q;
    } while (mpz_sizeinbase(n.get_mpz_t(), 2) != size_t(bits));

    mpz_class pm1 = p - 1, qm1 = q - 1, lambda;
    mpz_lcm(lambda.get_mpz_t(), pm1.get_mpz_t(), qm1.get_mpz_t());

    // With g = n+1, L(g^lambda mod n^2) = lambda mod n, so mu is just its
    // inverse modulo n.
    mpz_class lam_mod_n = lambda % n;
    mpz_class mu;
    if (mpz_invert(mu.get_mpz_t(), lam_mod_n.get_mpz_t(), n.get_mpz_t()) == 0)
        throw ParameterError("degenerate paillier key: lambda not invertible");

    Keypair kp;
    kp.pub.n = n;
    kp.pub.n_squared = n * n;
    kp.pub.bits = bits;
    kp.pub.key_id = key_id_of(n);
    kp.sec.lambda = lambda;
    kp.sec.mu = mu;
    kp.sec.n = n;
    kp.sec.n_squared = kp.pub.n_squared;
    kp.sec.key_id = kp.pub.key_id;
    return kp;
}

Ciphertext encrypt(const PublicKey& pk, const mpz_class& m, Rng& rng) {
    if (m < 0 || m >= pk.n) throw RangeError("paillier plaintext out of [0, n)");

    gmp_randclass grand(gmp_randinit_mt);
    grand.seed(rng.next_u64());
    mpz_class r, g;
    do {
        r = grand.get_z_range(pk.n - 1) + 1;  // [1, n-1]
        mpz_gcd(g.get_mpz_t(), r.get_mpz_t(), pk.n.get_mpz_t());
    } while (g != 1);

    // (1+n)^m = 1 + m*n (mod n^2)
    mpz_class gm = (1 + m * pk.n) % pk.n_squared;
    mpz_class rn;
    mpz_powm(rn.get_mpz_t(), r.get_mpz_t(), pk.n.get_mpz_t(), pk.n_squared.get_mpz_t());
    Ciphertext ct;
    ct.value = (gm * rn) % pk.n_squared;
    ct.key_id = pk.key_id;
    return ct;
}

mpz_class decrypt(const SecretKey& sk, const Ciphertext& ct) {
    if (ct.key_id != sk.key_id) throw KeyMismatchError("ciphertext key does not match secret key");
    mpz_class u;
    mpz_powm(u.get_mpz_t(), ct.value.get_mpz_t(), sk.lambda.get_mpz_t(), sk.n_squared.get_mpz_t());
    mpz_class l = (u - 1) / sk.n;
    return (l * sk.mu) % sk.n;
}

Ciphertext add(const PublicKey& pk, const Ciphertext& a, const Ciphertext& b) {
    if (a.key_id != b.key_id || a.key_id != pk.key_id)
        throw KeyMismatchError("cannot add ciphertexts under different keys");
    Ciphertext out;
    out.value = (a.value * b.value) % pk.n_squared;
    out.key_id = pk.key_id;
    return out;
}

Ciphertext zero(const PublicKey& pk) {
    Ciphertext ct;
    ct.value = 1;  // (1+n)^0 * 1^n
    ct.key_id = pk.key_id;
    return ct;
}

mpz_class FixedPointCodec::encode(double x) const {
    double scaled = std::ldexp(std::abs(x), scale_bits);
    mpz_class magnitude;
    mpz_set_d(magnitude.get_mpz_t(), std::nearbyint(scaled));
    if (2 * magnitude >= modulus)
        throw RangeError("fixed-point value exceeds n/2 headroom");
    if (x < 0 && magnitude != 0) return modulus - magnitude;
    return magnitude;
}

double FixedPointCodec::decode(const mpz_class& m) const {
    mpz_class v = m % modulus;
    if (v < 0) v += modulus;
    bool negative = 2 * v > modulus;
    if (negative) v = modulus - v;
    return (negative ? -1.0 : 1.0) * std::ldexp(v.get_d(), -scale_bits);
}

Bytes mpz_to_bytes(const mpz_class& v) {
    if (v < 0) throw RangeError("cannot serialize negative big integer");
    size_t count = 0;
    Bytes out((mpz_sizeinbase(v.get_mpz_t(), 2) + 7) / 8);
    if (v == 0) return {0};
    mpz_export(out.data(), &count, 1, 1, 1, 0, v.get_mpz_t());
    out.resize(count);
    return out;
}

mpz_class mpz_from_bytes(const Bytes& b) {
    mpz_class v;
    mpz_import(v.get_mpz_t(), b.size(), 1, 1, 1, 0, b.data());
    return v;
}

Bytes serialize(const Ciphertext& ct) {
    Bytes out;
    append_length_prefixed(out, mpz_to_bytes(ct.value));
    return out;
}

Ciphertext deserialize_ciphertext(const Bytes& in, uint64_t key_id) {
    size_t pos = 0;
    Ciphertext ct;
    ct.value = mpz_from_bytes(read_length_prefixed(in, pos));
    ct.key_id = key_id;
    return ct;
}

Bytes serialize(const PublicKey& pk) {
    Bytes out;
    append_length_prefixed(out, mpz_to_bytes(pk.n));
    return out;
}

PublicKey deserialize_public_key(const Bytes& in) {
    size_t pos = 0;
    PublicKey pk;
    pk.n = mpz_from_bytes(read_length_prefixed(in, pos));
    pk.n_squared = pk.n * pk.n;
    pk.bits = int(mpz_sizeinbase(pk.n.get_mpz_t(), 2));
    pk.key_id = key_id_of(pk.n);
    return pk;
}

Bytes serialize(const SecretKey& sk) {
    Bytes out;
    append_length_prefixed(out, mpz_to_bytes(sk.lambda));
    append_length_prefixed(out, mpz_to_bytes(sk.mu));
    append_length_prefixed(out, mpz_to_bytes(sk.n));
    return out;
}

SecretKey deserialize_secret_key(const Bytes& in) {
    size_t pos = 0;
    SecretKey sk;
    sk.lambda = mpz_from_bytes(read_length_prefixed(in, pos));
    sk.mu = mpz_from_bytes(read_length_prefixed(in, pos));
    sk.n = mpz_from_bytes(read_length_prefixed(in, pos));
    sk.n_squared = sk.n * sk.n;
    sk.key_id = key_id_of(sk.n);
    return sk;
}

}  // namespace hefraud::paillier
