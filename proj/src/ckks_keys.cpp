// Copyright (c) 2026 the hefraud authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>

#include "ckks_internal.hpp"
#include "hefraud/errors.hpp"

namespace hefraud::ckks {

using namespace internal;

int64_t normalize_step(int64_t step, size_t slots) {
    int64_t s = step % int64_t(slots);
    if (s < 0) s += int64_t(slots);
    return s;
}

namespace {

SecretKey sample_secret(size_t n, Rng& rng) {
    // Ternary with Hamming weight exactly n/2, signs uniform.
    SecretKey sk;
    sk.coeffs.assign(n, 0);
    std::vector<size_t> positions(n);
    for (size_t i = 0; i < n; ++i) positions[i] = i;
    for (size_t i = 0; i < n / 2; ++i) {
        size_t j = i + size_t(rng.uniform(uint64_t(n - i)));
        std::swap(positions[i], positions[j]);
        sk.coeffs[positions[i]] = rng.bernoulli(0.5) ? 1 : -1;
    }
    return sk;
}

KswKey make_galois_key(const Context& ctx, const SecretKey& sk, int64_t step, Rng& rng) {
    const auto& im = ctx.impl();
    const mpz_class& pq = im.key_level_moduli.back();
    uint64_t g = pow5_mod(uint64_t(step), 2 * ctx.ring_degree());
    Poly s = secret_to_poly(sk, pq);
    Poly src = galois_permute(s, g, ctx.ring_degree(), pq);
    return make_ksw_key(ctx, src, sk, rng);
}

}  // namespace

KeySet generate_keys(ContextPtr context, Rng& rng, const std::vector<int64_t>& rotation_steps) {
    const Context& ctx = *context;
    const auto& im = ctx.impl();
    size_t n = ctx.ring_degree();
    const mpz_class& q_max = ctx.modulus_at(ctx.max_level());

    KeySet keys;
    keys.context = context;
    keys.secret = sample_secret(n, rng);

    Poly s = secret_to_poly(keys.secret, q_max);
    Poly a = sample_uniform_poly(rng, q_max, n);
    Poly e = sample_gaussian_poly(rng, q_max, n);
    Poly as = poly_mult(ctx, a, s, ctx.max_level());
    Poly b = e;
    poly_sub_inplace(b, as, q_max);  // b = e - a*s
    keys.public_key.b = std::move(b);
    keys.public_key.a = std::move(a);

    // relinearization: s^2 -> s
    const mpz_class& pq = im.key_level_moduli.back();
    Poly s_pq = secret_to_poly(keys.secret, pq);
    Poly s2 = poly_mult_key(ctx, s_pq, s_pq, ctx.max_level());
    keys.eval->relin = make_ksw_key(ctx, s2, keys.secret, rng);

    add_rotation_keys(keys, rotation_steps, rng);
    return keys;
}

void add_rotation_keys(KeySet& keys, const std::vector<int64_t>& steps, Rng& rng) {
    const Context& ctx = *keys.context;
    for (int64_t raw_step : steps) {
        int64_t step = normalize_step(raw_step, ctx.slot_count());
        if (step == 0) continue;
        if (keys.eval->galois.count(step)) continue;
        keys.eval->galois.emplace(step, make_galois_key(ctx, keys.secret, step, rng));
    }
}

Ciphertext encrypt(const Context& ctx, const PublicKey& pk, const Plaintext& pt, Rng& rng) {
    size_t n = ctx.ring_degree();
    if (pt.poly.coeffs.size() != n) throw ContextError("plaintext ring degree mismatch");
    int level = pt.level;
    const mpz_class& q = ctx.modulus_at(level);

    Poly u = sample_ternary_poly(rng, q, n);
    Poly e0 = sample_gaussian_poly(rng, q, n);
    Poly e1 = sample_gaussian_poly(rng, q, n);
    Poly b = reduce_poly(pk.b, q);
    Poly a = reduce_poly(pk.a, q);

    Ciphertext ct;
    ct.level = level;
    ct.scale = pt.scale;
    ct.context_digest = ctx.digest();
    ct.polys.resize(2);
    ct.polys[0] = poly_mult(ctx, b, u, level);
    poly_add_inplace(ct.polys[0], e0, q);
    poly_add_inplace(ct.polys[0], pt.poly, q);
    ct.polys[1] = poly_mult(ctx, a, u, level);
    poly_add_inplace(ct.polys[1], e1, q);
    return ct;
}

Plaintext decrypt(const Context& ctx, const SecretKey& sk, const Ciphertext& ct) {
    if (ct.context_digest != ctx.digest())
        throw ContextError("ciphertext belongs to a different context");
    int level = ct.level;
    const mpz_class& q = ctx.modulus_at(level);

    Poly s = secret_to_poly(sk, q);
    Plaintext pt;
    pt.level = level;
    pt.scale = ct.scale;
    pt.poly = ct.polys[0];
    Poly s_power = s;
    for (size_t i = 1; i < ct.polys.size(); ++i) {
        Poly term = poly_mult(ctx, ct.polys[i], s_power, level);
        poly_add_inplace(pt.poly, term, q);
        if (i + 1 < ct.polys.size()) s_power = poly_mult(ctx, s_power, s, level);
    }
    return pt;
}

}  // namespace hefraud::ckks
