// Copyright (c) 2026 the hefraud authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <memory>
#include <variant>
#include <vector>

#include "hefraud/gbdt.hpp"
#include "hefraud/ope.hpp"
#include "hefraud/paillier.hpp"
#include "hefraud/rng.hpp"

namespace hefraud::he_gbdt {

/// The symmetric material the Secure Middle Server generates and hands to
/// clients: OPE key, feature-name PRF seed, Paillier secret key, plus the
/// quantizer and fixed-point codec both sides must share.
struct ClientKeyBundle {
    ope::OpeKey ope_key;
    std::array<uint8_t, 16> prf_seed{};
    paillier::SecretKey paillier_secret;
    ope::Quantizer quantizer;
    paillier::FixedPointCodec codec;
    ope::OpeParams ope_params;
};

struct BundleWithPublic {
    ClientKeyBundle bundle;
    paillier::PublicKey paillier_public;
};

/// Fresh bundle: 128-bit OPE key and PRF seed, new Paillier keypair.
BundleWithPublic generate_bundle(const ope::Quantizer& quantizer, int paillier_bits, Rng& rng,
                                 int fixed_point_scale_bits = 16,
                                 const ope::OpeParams& ope_params = {});

enum class LeafMode {
    kPaillierLeaves,   // leaves are Paillier ciphertexts of fixed-point values
    kPlaintextLeaves,  // leaves stay plaintext; output is a plain margin
};

struct EncryptedNode {
    bool is_leaf = false;
    ope::Tag feature_tag{};
    uint64_t enc_threshold = 0;
    std::unique_ptr<EncryptedNode> left;
    std::unique_ptr<EncryptedNode> right;
    paillier::Ciphertext leaf_ct;    // paillier-leaves mode
    double leaf_plain = 0.0;         // plaintext-leaves mode

    int depth() const;
    size_t node_count() const;
};

struct EncryptedEnsemble {
    LeafMode mode = LeafMode::kPaillierLeaves;
    double base_score = 0.0;
    std::vector<std::unique_ptr<EncryptedNode>> trees;
    paillier::PublicKey paillier_public;  // needed by the host for leaf sums

    std::vector<std::string> warnings;  // clamped thresholds, depth advisories
};

/// Map from feature tag to OPE ciphertext; the only form of a transaction the
/// host ever sees on this path.
using EncryptedTransactionOpe = std::map<ope::Tag, uint64_t>;

/// Node-wise encryption of a tree ensemble: OPE on quantized thresholds,
/// HMAC tags on feature names, Paillier (or nothing) on leaves. Trees are
/// distributed across `cores` workers; the output does not depend on `cores`.
EncryptedEnsemble encrypt_model(const gbdt::TreeEnsemble& model, const ClientKeyBundle& bundle,
                                const paillier::PublicKey& paillier_public, LeafMode mode,
                                int cores);

EncryptedTransactionOpe encrypt_transaction(const data::TransactionRecord& tx,
                                            const ClientKeyBundle& bundle);
EncryptedTransactionOpe encrypt_features(
    const std::vector<std::pair<std::string, double>>& features, const ClientKeyBundle& bundle);

/// Host-side inference: traverse every tree comparing OPE ciphertexts as
/// integers, then either Paillier-sum the reached leaves or (plaintext-leaf
/// mode) return base_score plus the plain sum.
using InferenceResult = std::variant<paillier::Ciphertext, double>;
InferenceResult infer_encrypted(const EncryptedEnsemble& model,
                                const EncryptedTransactionOpe& tx);

struct Score {
    double margin = 0.0;
    double proba = 0.0;
    int label = 0;  // 1 iff proba >= 0.5
};

/// Client-side: decrypt the Paillier sum, decode fixed point, add base_score,
/// apply the sigmoid and the 0.5 threshold.
Score decrypt_score(const ClientKeyBundle& bundle, const paillier::Ciphertext& result,
                    double model_base_score);

/// Plaintext-leaf results carry the margin already.
Score score_from_plain_margin(double margin);

// JSON wire formats (base64/hex binary fields).
std::string serialize_encrypted_model(const EncryptedEnsemble& model);
EncryptedEnsemble deserialize_encrypted_model(const std::string& json_text);
std::string serialize_encrypted_transaction(const EncryptedTransactionOpe& tx);
EncryptedTransactionOpe deserialize_encrypted_transaction(const std::string& json_text);
std::string serialize_bundle(const ClientKeyBundle& bundle);
ClientKeyBundle deserialize_bundle(const std::string& json_text);

}  // namespace hefraud::he_gbdt
