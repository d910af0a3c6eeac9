// Copyright (c) 2026 the hefraud authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <cstring>

#include <json.hpp>

#include "ckks_internal.hpp"
#include "hefraud/errors.hpp"

namespace hefraud::ckks {

namespace {

size_t coeff_width(const mpz_class& modulus) {
    return (mpz_sizeinbase(modulus.get_mpz_t(), 2) + 7) / 8;
}

void append_poly(Bytes& out, const Poly& poly, size_t width) {
    std::vector<uint8_t> buf(width);
    for (const auto& c : poly.coeffs) {
        std::memset(buf.data(), 0, width);
        size_t count = 0;
        size_t bytes = (mpz_sizeinbase(c.get_mpz_t(), 2) + 7) / 8;
        if (c != 0) mpz_export(buf.data() + (width - bytes), &count, 1, 1, 1, 0, c.get_mpz_t());
        out.insert(out.end(), buf.begin(), buf.end());
    }
}

Poly read_poly(const Bytes& in, size_t& pos, size_t n, size_t width) {
    if (pos + n * width > in.size()) throw ParseError("truncated polynomial", "ciphertext");
    Poly poly;
    poly.coeffs.resize(n);
    for (size_t i = 0; i < n; ++i) {
        mpz_import(poly.coeffs[i].get_mpz_t(), width, 1, 1, 1, 0, in.data() + pos);
        pos += width;
    }
    return poly;
}

}  // namespace

Bytes serialize(const Context& ctx, const Ciphertext& ct) {
    Bytes out;
    append_be32(out, uint32_t(ctx.ring_degree()));
    append_be32(out, uint32_t(ct.level));
    uint64_t scale_bits;
    static_assert(sizeof(scale_bits) == sizeof(ct.scale));
    std::memcpy(&scale_bits, &ct.scale, sizeof(scale_bits));
    append_be64(out, scale_bits);
    append_be32(out, uint32_t(ct.polys.size()));
    size_t width = coeff_width(ctx.modulus_at(ct.level));
    for (const auto& p : ct.polys) append_poly(out, p, width);
    return out;
}

Ciphertext deserialize_ciphertext(const Context& ctx, const Bytes& in) {
    size_t pos = 0;
    uint32_t n = read_be32(in, pos);
    if (n != ctx.ring_degree()) throw ContextError("ciphertext ring degree mismatch");
    uint32_t level = read_be32(in, pos);
    if (level > uint32_t(ctx.max_level())) throw DepthError("ciphertext level out of range");
    uint64_t scale_bits = read_be64(in, pos);
    double scale;
    std::memcpy(&scale, &scale_bits, sizeof(scale));
    uint32_t count = read_be32(in, pos);
    if (count < 2 || count > 3) throw ParseError("unexpected polynomial count", "ciphertext");

    Ciphertext ct;
    ct.level = int(level);
    ct.scale = scale;
    ct.context_digest = ctx.digest();
    size_t width = coeff_width(ctx.modulus_at(int(level)));
    for (uint32_t i = 0; i < count; ++i) ct.polys.push_back(read_poly(in, pos, n, width));
    return ct;
}

Bytes serialize_public_key(const Context& ctx, const PublicKey& pk) {
    Bytes out;
    size_t width = coeff_width(ctx.modulus_at(ctx.max_level()));
    append_be32(out, uint32_t(ctx.ring_degree()));
    append_poly(out, pk.b, width);
    append_poly(out, pk.a, width);
    return out;
}

PublicKey deserialize_public_key(const Context& ctx, const Bytes& in) {
    size_t pos = 0;
    uint32_t n = read_be32(in, pos);
    if (n != ctx.ring_degree()) throw ContextError("public key ring degree mismatch");
    size_t width = coeff_width(ctx.modulus_at(ctx.max_level()));
    PublicKey pk;
    pk.b = read_poly(in, pos, n, width);
    pk.a = read_poly(in, pos, n, width);
    return pk;
}

Bytes serialize_secret_key(const Context& ctx, const SecretKey& sk) {
    Bytes out;
    append_be32(out, uint32_t(ctx.ring_degree()));
    for (int8_t v : sk.coeffs) out.push_back(uint8_t(v + 1));
    return out;
}

SecretKey deserialize_secret_key(const Context& ctx, const Bytes& in) {
    size_t pos = 0;
    uint32_t n = read_be32(in, pos);
    if (n != ctx.ring_degree() || in.size() != 4 + n)
        throw ParseError("secret key size mismatch", "secret_key");
    SecretKey sk;
    sk.coeffs.resize(n);
    for (size_t i = 0; i < n; ++i) sk.coeffs[i] = int8_t(in[pos + i]) - 1;
    return sk;
}

Bytes serialize_ksw_key(const Context& ctx, const KswKey& key) {
    const auto& im = ctx.impl();
    Bytes out;
    append_be32(out, uint32_t(key.digits.size()));
    append_be32(out, uint32_t(im.all_primes.size()));
    append_be32(out, uint32_t(ctx.ring_degree()));
    for (const auto& digit : key.digits) {
        for (const auto* half : {&digit.k0, &digit.k1}) {
            for (const auto& residues : *half)
                for (uint64_t v : residues) append_be64(out, v);
        }
    }
    return out;
}

KswKey deserialize_ksw_key(const Context& ctx, const Bytes& in) {
    const auto& im = ctx.impl();
    size_t pos = 0;
    uint32_t n_digits = read_be32(in, pos);
    uint32_t n_primes = read_be32(in, pos);
    uint32_t n = read_be32(in, pos);
    if (n != ctx.ring_degree() || n_primes != im.all_primes.size())
        throw ContextError("key-switch key does not match this context");
    if (n_digits > 64) throw ParseError("implausible digit count", "ksw_key");

    KswKey key;
    key.digits.resize(n_digits);
    for (auto& digit : key.digits) {
        for (auto* half : {&digit.k0, &digit.k1}) {
            half->resize(n_primes);
            for (auto& residues : *half) {
                residues.resize(n);
                for (size_t i = 0; i < n; ++i) residues[i] = read_be64(in, pos);
            }
        }
    }
    return key;
}

std::string descriptor_to_json(const ContextDescriptor& d) {
    nlohmann::json j;
    j["N"] = d.ring_degree;
    j["moduli_bits"] = d.moduli_bits;
    j["scale_bits"] = std::log2(d.scale);
    return j.dump();
}

ContextDescriptor descriptor_from_json(const std::string& json_text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("invalid JSON: ") + e.what(), "$");
    }
    ContextDescriptor d;
    d.ring_degree = j.at("N").get<size_t>();
    d.moduli_bits = j.at("moduli_bits").get<std::vector<int>>();
    d.scale = std::exp2(j.at("scale_bits").get<double>());
    return d;
}

}  // namespace hefraud::ckks
