// Copyright (c) 2026 the hefraud authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <gmpxx.h>

#include <cstdint>

#include "hefraud/bytes.hpp"
#include "hefraud/rng.hpp"

namespace hefraud::paillier {

/// Public half of a keypair. g is fixed to n+1 and never stored.
struct PublicKey {
    mpz_class n;
    mpz_class n_squared;
    uint64_t key_id = 0;
    int bits = 0;
};

struct SecretKey {
    mpz_class lambda;  // lcm(p-1, q-1)
    mpz_class mu;      // (lambda mod n)^-1 mod n
    mpz_class n;
    mpz_class n_squared;
    uint64_t key_id = 0;
};

struct Keypair {
    PublicKey pub;
    SecretKey sec;
};

struct Ciphertext {
    mpz_class value;  // unit modulo n^2
    uint64_t key_id = 0;
};

/// Generates an n of exactly `bits` bits from two random primes of equal
/// length. bits must be >= 256 and even.
Keypair keygen(int bits, Rng& rng);

/// Enc(m) = (1+n)^m * r^n mod n^2 with fresh r. Requires 0 <= m < n.
Ciphertext encrypt(const PublicKey& pk, const mpz_class& m, Rng& rng);

mpz_class decrypt(const SecretKey& sk, const Ciphertext& ct);

/// Homomorphic addition: decrypts to (m1 + m2) mod n. Both ciphertexts must
/// be under pk's key.
Ciphertext add(const PublicKey& pk, const Ciphertext& a, const Ciphertext& b);

/// A ciphertext of 0 usable as the identity for folds.
Ciphertext zero(const PublicKey& pk);

/// Signed fixed-point embedding of reals into [0, n): x maps to
/// round(x * 2^scale_bits) with negatives wrapped to n - |.|.
struct FixedPointCodec {
    int scale_bits = 16;
    mpz_class modulus;  // the key's n

    mpz_class encode(double x) const;
    double decode(const mpz_class& m) const;
};

// Wire formats: ciphertext and key fields are big-endian magnitudes with a
// 4-byte big-endian length prefix.
Bytes serialize(const Ciphertext& ct);
Ciphertext deserialize_ciphertext(const Bytes& in, uint64_t key_id);
Bytes serialize(const PublicKey& pk);
PublicKey deserialize_public_key(const Bytes& in);
Bytes serialize(const SecretKey& sk);
SecretKey deserialize_secret_key(const Bytes& in);

Bytes mpz_to_bytes(const mpz_class& v);
mpz_class mpz_from_bytes(const Bytes& b);

}  // namespace hefraud::paillier
