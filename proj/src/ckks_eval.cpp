// Copyright (c) 2026 the hefraud authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>

#include "ckks_internal.hpp"
#include "hefraud/errors.hpp"

namespace hefraud::ckks {

using namespace internal;

namespace {
constexpr double kScaleTolerance = 1e-9;

bool scales_match(double a, double b) {
    return std::abs(a - b) <= kScaleTolerance * std::max(std::abs(a), std::abs(b));
}
}  // namespace

Evaluator::Evaluator(ContextPtr context, std::shared_ptr<const EvalKeys> keys)
    : ctx_(std::move(context)), keys_(std::move(keys)) {}

Evaluator::Evaluator(ContextPtr context) : ctx_(std::move(context)) {}

void Evaluator::check_ct(const Ciphertext& ct) const {
    if (ct.context_digest != ctx_->digest())
        throw ContextError("ciphertext belongs to a different context");
    if (ct.level < 0 || ct.level > ctx_->max_level()) throw DepthError("invalid ciphertext level");
}

void Evaluator::check_pair(const Ciphertext& a, const Ciphertext& b) const {
    check_ct(a);
    check_ct(b);
    if (a.level != b.level)
        throw ContextError("operands sit at different levels (" + std::to_string(a.level) +
                           " vs " + std::to_string(b.level) + ")");
}

Ciphertext Evaluator::add(const Ciphertext& a, const Ciphertext& b) const {
    check_pair(a, b);
    if (!scales_match(a.scale, b.scale))
        throw ScaleError("cannot add ciphertexts with scales " + std::to_string(a.scale) +
                         " and " + std::to_string(b.scale));
    const mpz_class& q = ctx_->modulus_at(a.level);
    Ciphertext out = a.polys.size() >= b.polys.size() ? a : b;
    const Ciphertext& other = a.polys.size() >= b.polys.size() ? b : a;
    for (size_t i = 0; i < other.polys.size(); ++i)
        poly_add_inplace(out.polys[i], other.polys[i], q);
    return out;
}

Ciphertext Evaluator::sub(const Ciphertext& a, const Ciphertext& b) const {
    check_pair(a, b);
    if (!scales_match(a.scale, b.scale)) throw ScaleError("cannot subtract mismatched scales");
    const mpz_class& q = ctx_->modulus_at(a.level);
    Ciphertext out = a;
    out.polys.resize(std::max(a.polys.size(), b.polys.size()), zero_poly(ctx_->ring_degree()));
    for (size_t i = 0; i < b.polys.size(); ++i) poly_sub_inplace(out.polys[i], b.polys[i], q);
    return out;
}

Ciphertext Evaluator::add_plain(const Ciphertext& ct, const Plaintext& pt) const {
    check_ct(ct);
    if (pt.level != ct.level) throw ContextError("plaintext level mismatch");
    if (!scales_match(ct.scale, pt.scale)) throw ScaleError("plaintext scale mismatch");
    Ciphertext out = ct;
    poly_add_inplace(out.polys[0], pt.poly, ctx_->modulus_at(ct.level));
    return out;
}

Ciphertext Evaluator::mul_plain(const Ciphertext& ct, const Plaintext& pt) const {
    check_ct(ct);
    if (pt.level != ct.level) throw ContextError("plaintext level mismatch");
    if (ct.level < 1)
        throw DepthError("multiplication at level 0: modulus chain exhausted");
    Ciphertext out;
    out.level = ct.level;
    out.scale = ct.scale * pt.scale;
    out.context_digest = ct.context_digest;
    out.polys.reserve(ct.polys.size());
    for (const auto& p : ct.polys) out.polys.push_back(poly_mult(*ctx_, p, pt.poly, ct.level));
    return out;
}

Ciphertext Evaluator::mul(const Ciphertext& a, const Ciphertext& b) const {
    check_pair(a, b);
    if (a.level < 1) throw DepthError("multiplication at level 0: modulus chain exhausted");
    if (a.polys.size() != 2 || b.polys.size() != 2)
        throw ParameterError("multiplication expects 2-element ciphertexts");
    if (!keys_) throw KeyError("relinearization requires evaluation keys");
    int level = a.level;
    const mpz_class& q = ctx_->modulus_at(level);

    // 3-multiplication Karatsuba split
    Poly e0 = poly_mult(*ctx_, a.polys[0], b.polys[0], level);
    Poly e2 = poly_mult(*ctx_, a.polys[1], b.polys[1], level);
    Poly sa = a.polys[0];
    poly_add_inplace(sa, a.polys[1], q);
    Poly sb = b.polys[0];
    poly_add_inplace(sb, b.polys[1], q);
    Poly e1 = poly_mult(*ctx_, sa, sb, level);
    poly_sub_inplace(e1, e0, q);
    poly_sub_inplace(e1, e2, q);

    auto [t0, t1] = keyswitch(*ctx_, e2, keys_->relin, level);
    poly_add_inplace(e0, t0, q);
    poly_add_inplace(e1, t1, q);

    Ciphertext out;
    out.level = level;
    out.scale = a.scale * b.scale;
    out.context_digest = a.context_digest;
    out.polys = {std::move(e0), std::move(e1)};
    return out;
}

Ciphertext Evaluator::rescale(const Ciphertext& ct) const {
    check_ct(ct);
    if (ct.level < 1) throw DepthError("rescale requires level > 0");
    int level = ct.level;
    uint64_t prime = ctx_->data_primes()[size_t(level)];
    mpz_class p(static_cast<unsigned long>(prime));
    mpz_class half_p = p / 2;
    const mpz_class& q = ctx_->modulus_at(level);
    const mpz_class& half_q = ctx_->impl().half_level_moduli[size_t(level)];
    const mpz_class& q_next = ctx_->modulus_at(level - 1);

    Ciphertext out;
    out.level = level - 1;
    out.scale = ct.scale / double(prime);
    out.context_digest = ct.context_digest;
    out.polys.resize(ct.polys.size());
    for (size_t i = 0; i < ct.polys.size(); ++i) {
        out.polys[i].coeffs.resize(ct.polys[i].coeffs.size());
        for (size_t k = 0; k < ct.polys[i].coeffs.size(); ++k) {
            mpz_class v = ct.polys[i].coeffs[k];
            if (v > half_q) v -= q;
            v += half_p;
            mpz_fdiv_q(v.get_mpz_t(), v.get_mpz_t(), p.get_mpz_t());
            v %= q_next;
            if (v < 0) v += q_next;
            out.polys[i].coeffs[k] = v;
        }
    }
    return out;
}

Ciphertext Evaluator::rotate(const Ciphertext& ct, int64_t step) const {
    check_ct(ct);
    if (ct.polys.size() != 2) throw ParameterError("rotation expects a 2-element ciphertext");
    int64_t k = normalize_step(step, ctx_->slot_count());
    if (k == 0) return ct;
    if (!keys_) throw KeyError("rotation requires evaluation keys");
    auto it = keys_->galois.find(k);
    if (it == keys_->galois.end())
        throw KeyError("no galois key for rotation step " + std::to_string(step));

    size_t n = ctx_->ring_degree();
    const mpz_class& q = ctx_->modulus_at(ct.level);
    uint64_t g = pow5_mod(uint64_t(k), 2 * n);
    Poly c0 = galois_permute(ct.polys[0], g, n, q);
    Poly c1 = galois_permute(ct.polys[1], g, n, q);

    auto [t0, t1] = keyswitch(*ctx_, c1, it->second, ct.level);
    poly_add_inplace(t0, c0, q);

    Ciphertext out;
    out.level = ct.level;
    out.scale = ct.scale;
    out.context_digest = ct.context_digest;
    out.polys = {std::move(t0), std::move(t1)};
    return out;
}

}  // namespace hefraud::ckks
