// Copyright (c) 2026 the hefraud authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <gmpxx.h>

#include <complex>
#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "hefraud/bytes.hpp"
#include "hefraud/rng.hpp"

namespace hefraud::ckks {

/// Largest total coefficient-modulus bit count giving 128-bit security for a
/// ternary secret at ring degree N, per the homomorphic encryption security
/// standard tables.
int max_modulus_bits_128(size_t ring_degree);

enum class SecurityPolicy {
    kEnforce128,        // reject parameter sets above the 128-bit cap
    kInsecureTestOnly,  // bypass the gate for toy rings in unit tests
};

struct ContextDescriptor {
    size_t ring_degree = 0;
    std::vector<int> moduli_bits;
    double scale = 0.0;
};

class Context;
using ContextPtr = std::shared_ptr<const Context>;

/// Coefficient vector of a ring element, reduced modulo the level modulus.
struct Poly {
    std::vector<mpz_class> coeffs;
};

struct Plaintext {
    Poly poly;
    int level = 0;
    double scale = 1.0;
};

struct Ciphertext {
    std::vector<Poly> polys;  // 2 normally, 3 before relinearization
    int level = 0;
    double scale = 1.0;
    uint64_t context_digest = 0;

    size_t size() const { return polys.size(); }
};

struct SecretKey {
    std::vector<int8_t> coeffs;  // ternary, Hamming weight N/2
};

struct PublicKey {
    Poly b, a;  // b = -a*s + e  (mod Q_max)
};

/// Key-switch key: per 30-bit digit, a pair of ring elements stored as
/// per-prime NTT residues over the full key modulus P*Q.
struct KswKey {
    struct Digit {
        std::vector<std::vector<uint64_t>> k0;  // [prime][coeff]
        std::vector<std::vector<uint64_t>> k1;
    };
    std::vector<Digit> digits;
};

/// Public evaluation material: safe to hand to an untrusted evaluator.
struct EvalKeys {
    KswKey relin;
    std::map<int64_t, KswKey> galois;  // by normalized rotation step
};

struct KeySet {
    ContextPtr context;
    SecretKey secret;
    PublicKey public_key;
    std::shared_ptr<EvalKeys> eval = std::make_shared<EvalKeys>();
};

namespace internal {
struct NttTables;
struct FftTables;
}  // namespace internal

/// Ring parameters, modulus chain and transform tables. Immutable once
/// created; share via ContextPtr.
///
/// The last modulus in the chain is the special prime reserved for
/// key-switching; the remaining ones form the data chain. A fresh ciphertext
/// sits at level (#data primes - 1), and each rescale drops one data prime.
class Context {
public:
    /// Validates parameters and builds all tables. Throws SecurityError when
    /// the total modulus size exceeds the 128-bit cap for N (unless the
    /// insecure test-only policy is requested), ParameterError for malformed
    /// inputs.
    static ContextPtr create(size_t ring_degree, const std::vector<int>& moduli_bits,
                             double scale, SecurityPolicy policy = SecurityPolicy::kEnforce128);
    static ContextPtr create(const ContextDescriptor& d,
                             SecurityPolicy policy = SecurityPolicy::kEnforce128);
    ~Context();

    size_t ring_degree() const { return n_; }
    size_t slot_count() const { return n_ / 2; }
    int max_level() const { return int(data_primes_.size()) - 1; }
    double default_scale() const { return scale_; }
    uint64_t digest() const { return digest_; }
    ContextDescriptor descriptor() const;

    const std::vector<uint64_t>& data_primes() const { return data_primes_; }
    uint64_t special_prime() const { return special_prime_; }
    const mpz_class& modulus_at(int level) const;  // product q_0..q_level
    const mpz_class& key_modulus() const { return key_modulus_; }

    // --- encoding (canonical embedding) ---
    Plaintext encode(std::span<const double> values, double scale, int level) const;
    Plaintext encode(std::span<const double> values) const;  // default scale, top level
    std::vector<double> decode(const Plaintext& pt) const;

    // internal machinery shared with the evaluator/key code
    struct Impl;
    const Impl& impl() const { return *impl_; }

private:
    Context() = default;
    size_t n_ = 0;
    std::vector<int> moduli_bits_;
    double scale_ = 0.0;
    std::vector<uint64_t> data_primes_;
    uint64_t special_prime_ = 0;
    std::vector<mpz_class> level_moduli_;  // [level] -> product
    mpz_class key_modulus_;
    uint64_t digest_ = 0;
    std::unique_ptr<Impl> impl_;
};

/// Fresh keys under one context: ternary secret (Hamming weight N/2), RLWE
/// public key, relinearization key, and rotation keys for the given steps.
KeySet generate_keys(ContextPtr context, Rng& rng, const std::vector<int64_t>& rotation_steps = {});

/// Adds rotation keys for more steps to an existing key set.
void add_rotation_keys(KeySet& keys, const std::vector<int64_t>& steps, Rng& rng);

Ciphertext encrypt(const Context& ctx, const PublicKey& pk, const Plaintext& pt, Rng& rng);
Plaintext decrypt(const Context& ctx, const SecretKey& sk, const Ciphertext& ct);

/// Homomorphic operations over one context. Evaluation needs only public
/// material (EvalKeys); the evaluator never sees a secret key.
class Evaluator {
public:
    Evaluator(ContextPtr context, std::shared_ptr<const EvalKeys> keys);
    explicit Evaluator(ContextPtr context);  // add/mul_plain only

    Ciphertext add(const Ciphertext& a, const Ciphertext& b) const;
    Ciphertext sub(const Ciphertext& a, const Ciphertext& b) const;
    Ciphertext add_plain(const Ciphertext& ct, const Plaintext& pt) const;
    Ciphertext mul_plain(const Ciphertext& ct, const Plaintext& pt) const;

    /// Ciphertext product followed by relinearization back to two elements.
    /// Output scale is the product of scales. Requires level >= 1.
    Ciphertext mul(const Ciphertext& a, const Ciphertext& b) const;

    /// Divides the scale by the top data prime and drops one level.
    Ciphertext rescale(const Ciphertext& ct) const;

    /// Left cyclic rotation of the slot vector by `step` (negative allowed).
    Ciphertext rotate(const Ciphertext& ct, int64_t step) const;

    const Context& context() const { return *ctx_; }

private:
    void check_ct(const Ciphertext& ct) const;
    void check_pair(const Ciphertext& a, const Ciphertext& b) const;

    ContextPtr ctx_;
    std::shared_ptr<const EvalKeys> keys_;
};

int64_t normalize_step(int64_t step, size_t slots);

// --- wire formats ---
Bytes serialize(const Context& ctx, const Ciphertext& ct);
Ciphertext deserialize_ciphertext(const Context& ctx, const Bytes& in);
Bytes serialize_public_key(const Context& ctx, const PublicKey& pk);
PublicKey deserialize_public_key(const Context& ctx, const Bytes& in);
Bytes serialize_secret_key(const Context& ctx, const SecretKey& sk);
SecretKey deserialize_secret_key(const Context& ctx, const Bytes& in);
Bytes serialize_ksw_key(const Context& ctx, const KswKey& key);
KswKey deserialize_ksw_key(const Context& ctx, const Bytes& in);
std::string descriptor_to_json(const ContextDescriptor& d);
ContextDescriptor descriptor_from_json(const std::string& json_text);

}  // namespace hefraud::ckks
