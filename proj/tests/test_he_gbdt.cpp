// Copyright (c) 2026 the hefraud authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <chrono>
#include <cmath>

#include "hefraud/errors.hpp"
#include "hefraud/he_gbdt.hpp"

using namespace hefraud;
using namespace hefraud::he_gbdt;
using hefraud::data::TransactionRecord;
using hefraud::gbdt::TreeEnsemble;
using hefraud::gbdt::TreeNode;

namespace {

std::unique_ptr<TreeNode> leaf(double v) {
    auto n = std::make_unique<TreeNode>();
    n->is_leaf = true;
    n->leaf_value = v;
    return n;
}

std::unique_ptr<TreeNode> internal(const std::string& f, double t,
                                   std::unique_ptr<TreeNode> l, std::unique_ptr<TreeNode> r) {
    auto n = std::make_unique<TreeNode>();
    n->is_leaf = false;
    n->feature = f;
    n->threshold = t;
    n->left = std::move(l);
    n->right = std::move(r);
    return n;
}

TreeEnsemble hand_ensemble() {
    TreeEnsemble m;
    m.base_score = 0.0;
    m.feature_names = {"V1", "V2"};
    m.trees.push_back(internal("V1", 2.0, leaf(0.25), leaf(-0.25)));
    m.trees.push_back(internal("V2", 5.0, leaf(0.15625), leaf(-0.15625)));
    return m;
}

TransactionRecord tx(std::vector<std::pair<std::string, double>> features) {
    TransactionRecord r;
    r.features = std::move(features);
    return r;
}

BundleWithPublic test_bundle(uint64_t seed = 11, int paillier_bits = 512) {
    Rng rng(seed);
    return generate_bundle(ope::Quantizer(-10.0, 10.0, uint64_t(1) << 31), paillier_bits, rng);
}

TreeEnsemble random_full_ensemble(size_t n_trees, int depth, uint64_t seed) {
    Rng rng(seed);
    std::vector<std::string> names;
    for (int i = 0; i < 8; ++i) names.push_back("V" + std::to_string(i + 1));
    std::function<std::unique_ptr<TreeNode>(int)> build = [&](int d) {
        if (d == 0) return leaf(rng.normal(0, 0.2));
        return internal(names[rng.uniform(names.size())], rng.normal(0, 4), build(d - 1),
                        build(d - 1));
    };
    TreeEnsemble m;
    m.feature_names = names;
    for (size_t t = 0; t < n_trees; ++t) m.trees.push_back(build(depth));
    return m;
}

TransactionRecord random_tx(Rng& rng, const std::vector<std::string>& names) {
    TransactionRecord r;
    for (const auto& n : names) r.features.emplace_back(n, rng.normal(0, 4));
    return r;
}

}  // namespace

TEST_CASE("encrypted inference matches the plaintext margin on the hand ensemble") {
    auto bp = test_bundle();
    auto model = hand_ensemble();
    auto enc = encrypt_model(model, bp.bundle, bp.paillier_public, LeafMode::kPaillierLeaves, 1);

    auto t = tx({{"V1", 1.0}, {"V2", 9.0}});  // +0.25, -0.15625 -> 0.09375
    auto enc_tx = encrypt_transaction(t, bp.bundle);
    auto result = infer_encrypted(enc, enc_tx);
    REQUIRE(std::holds_alternative<paillier::Ciphertext>(result));
    auto score = decrypt_score(bp.bundle, std::get<paillier::Ciphertext>(result), enc.base_score);

    double plain_margin = gbdt::predict_margin(model, t);
    CHECK(score.margin == plain_margin);  // exactly representable at 2^-16
    CHECK(score.proba == doctest::Approx(gbdt::sigmoid(plain_margin)));
    CHECK(score.label == (gbdt::sigmoid(plain_margin) >= 0.5 ? 1 : 0));
}

TEST_CASE("plaintext-leaves mode returns the exact plaintext margin") {
    auto bp = test_bundle();
    auto model = hand_ensemble();
    auto enc = encrypt_model(model, bp.bundle, bp.paillier_public, LeafMode::kPlaintextLeaves, 1);

    auto t = tx({{"V1", 3.0}, {"V2", 1.0}});
    auto result = infer_encrypted(enc, encrypt_transaction(t, bp.bundle));
    REQUIRE(std::holds_alternative<double>(result));
    CHECK(std::get<double>(result) == gbdt::predict_margin(model, t));
}

TEST_CASE("single-leaf model keeps its plaintext leaf in plaintext mode") {
    auto bp = test_bundle();
    TreeEnsemble m;
    m.trees.push_back(leaf(0.42));
    auto enc = encrypt_model(m, bp.bundle, bp.paillier_public, LeafMode::kPlaintextLeaves, 1);
    REQUIRE(enc.trees.size() == 1);
    CHECK(enc.trees[0]->is_leaf);
    CHECK(enc.trees[0]->leaf_plain == 0.42);
}

TEST_CASE("missing tags are reported as hex, not names") {
    auto bp = test_bundle();
    auto enc = encrypt_model(hand_ensemble(), bp.bundle, bp.paillier_public,
                             LeafMode::kPaillierLeaves, 1);
    auto enc_tx = encrypt_features({{"V1", 1.0}}, bp.bundle);
    try {
        infer_encrypted(enc, enc_tx);
        FAIL("expected MissingFeatureError");
    } catch (const MissingFeatureError& e) {
        CHECK(e.feature_name.size() == 64);  // hex of a 32-byte tag
        CHECK(e.feature_name.find("V2") == std::string::npos);
    }
}

TEST_CASE("encrypt_transaction is deterministic and order preserving") {
    auto bp = test_bundle();
    auto t = tx({{"V1", 1.5}, {"V2", -3.0}});
    auto e1 = encrypt_transaction(t, bp.bundle);
    auto e2 = encrypt_transaction(t, bp.bundle);
    CHECK(e1 == e2);

    auto lo = encrypt_features({{"V1", -10.0}}, bp.bundle);
    auto hi = encrypt_features({{"V1", 2.0}}, bp.bundle);
    auto tag = ope::feature_tag(bp.bundle.prf_seed, "V1");
    CHECK(lo.at(tag) < hi.at(tag));
    // v=min quantizes to bucket 0
    CHECK(bp.bundle.quantizer.quantize(-10.0) == 0);
}

TEST_CASE("parallel encryption is deterministic node-by-node") {
    auto bp = test_bundle(21);
    auto model = random_full_ensemble(16, 4, 3);
    auto enc1 = encrypt_model(model, bp.bundle, bp.paillier_public, LeafMode::kPaillierLeaves, 1);
    auto enc4 = encrypt_model(model, bp.bundle, bp.paillier_public, LeafMode::kPaillierLeaves, 4);

    REQUIRE(enc1.trees.size() == enc4.trees.size());
    std::function<void(const EncryptedNode&, const EncryptedNode&)> compare =
        [&](const EncryptedNode& a, const EncryptedNode& b) {
            REQUIRE(a.is_leaf == b.is_leaf);
            if (a.is_leaf) {
                // Paillier randomness differs; decrypted values must agree.
                CHECK(paillier::decrypt(bp.bundle.paillier_secret, a.leaf_ct) ==
                      paillier::decrypt(bp.bundle.paillier_secret, b.leaf_ct));
                return;
            }
            CHECK(a.feature_tag == b.feature_tag);
            CHECK(a.enc_threshold == b.enc_threshold);
            compare(*a.left, *b.left);
            compare(*a.right, *b.right);
        };
    for (size_t i = 0; i < enc1.trees.size(); ++i) compare(*enc1.trees[i], *enc4.trees[i]);
}

TEST_CASE("encrypted ensemble is structurally isomorphic to the source") {
    auto bp = test_bundle(31);
    auto model = random_full_ensemble(8, 5, 9);
    auto enc = encrypt_model(model, bp.bundle, bp.paillier_public, LeafMode::kPaillierLeaves, 2);
    REQUIRE(enc.trees.size() == model.trees.size());
    for (size_t i = 0; i < enc.trees.size(); ++i) {
        CHECK(enc.trees[i]->depth() == model.trees[i]->depth());
        CHECK(enc.trees[i]->node_count() == model.trees[i]->node_count());
    }
}

TEST_CASE("cores must be positive") {
    auto bp = test_bundle();
    CHECK_THROWS_AS(
        encrypt_model(hand_ensemble(), bp.bundle, bp.paillier_public, LeafMode::kPaillierLeaves, 0),
        ParameterError);
}

TEST_CASE("label equivalence and margin agreement against the plaintext oracle") {
    auto bp = test_bundle(41);
    auto model = random_full_ensemble(12, 4, 77);
    auto enc = encrypt_model(model, bp.bundle, bp.paillier_public, LeafMode::kPaillierLeaves, 2);

    Rng rng(55);
    size_t label_matches = 0;
    for (int i = 0; i < 200; ++i) {
        auto t = random_tx(rng, model.feature_names);
        double plain_margin = gbdt::predict_margin(model, t);
        auto result = infer_encrypted(enc, encrypt_transaction(t, bp.bundle));
        auto score = decrypt_score(bp.bundle, std::get<paillier::Ciphertext>(result),
                                   enc.base_score);
        // num_trees * 2^-16 margin bound when traversals agree
        CHECK(std::abs(score.margin - plain_margin) <=
              double(model.trees.size()) * std::ldexp(1.0, -16));
        label_matches += size_t(score.label == (gbdt::sigmoid(plain_margin) >= 0.5 ? 1 : 0));
    }
    CHECK(label_matches == 200);
}

TEST_CASE("base score flows through decrypt_score") {
    auto bp = test_bundle(61);
    TreeEnsemble m;
    m.base_score = -0.4;
    m.trees.push_back(leaf(0.0));
    auto enc = encrypt_model(m, bp.bundle, bp.paillier_public, LeafMode::kPaillierLeaves, 1);
    auto result = infer_encrypted(enc, encrypt_features({{"V1", 0.0}}, bp.bundle));
    auto score = decrypt_score(bp.bundle, std::get<paillier::Ciphertext>(result), enc.base_score);
    CHECK(score.margin == doctest::Approx(-0.4));
    CHECK(score.proba == doctest::Approx(gbdt::sigmoid(-0.4)));
    CHECK(score.label == 0);
}

TEST_CASE("probability exactly 0.5 is labeled fraudulent") {
    auto s = score_from_plain_margin(0.0);
    CHECK(s.proba == 0.5);
    CHECK(s.label == 1);
}

TEST_CASE("out-of-range thresholds produce a clamp warning") {
    auto bp = test_bundle(71);
    TreeEnsemble m;
    m.feature_names = {"V1"};
    m.trees.push_back(internal("V1", 50.0, leaf(0.1), leaf(-0.1)));  // quantizer is [-10, 10]
    auto enc = encrypt_model(m, bp.bundle, bp.paillier_public, LeafMode::kPaillierLeaves, 1);
    REQUIRE(!enc.warnings.empty());
    CHECK(enc.warnings[0].find("clamped") != std::string::npos);
}

TEST_CASE("deep models trigger the encryption-time advisory") {
    auto bp = test_bundle(73);
    auto model = random_full_ensemble(1, 8, 5);
    auto enc = encrypt_model(model, bp.bundle, bp.paillier_public, LeafMode::kPlaintextLeaves, 1);
    bool found = false;
    for (const auto& w : enc.warnings) found = found || w.find("depth") != std::string::npos;
    CHECK(found);
}

TEST_CASE("encrypted model serialization round-trips and leaks nothing") {
    auto bp = test_bundle(81);
    // Sentinel names/threshold long enough that base64 cannot contain them by
    // chance.
    TreeEnsemble model;
    model.base_score = 0.0;
    model.feature_names = {"amount_in_euro_cents", "merchant_category_code"};
    model.trees.push_back(
        internal("amount_in_euro_cents", 2.0, leaf(0.25), leaf(-0.25)));
    model.trees.push_back(
        internal("merchant_category_code", 5.0, leaf(0.15625), leaf(-0.15625)));
    auto enc = encrypt_model(model, bp.bundle, bp.paillier_public, LeafMode::kPaillierLeaves, 1);
    std::string json_text = serialize_encrypted_model(enc);

    // no plaintext feature names or thresholds in the serialized form
    CHECK(json_text.find("amount_in_euro_cents") == std::string::npos);
    CHECK(json_text.find("merchant_category_code") == std::string::npos);

    auto loaded = deserialize_encrypted_model(json_text);
    auto t = tx({{"amount_in_euro_cents", 1.0}, {"merchant_category_code", 9.0}});
    auto enc_tx = encrypt_transaction(t, bp.bundle);
    auto s1 = decrypt_score(bp.bundle, std::get<paillier::Ciphertext>(infer_encrypted(enc, enc_tx)),
                            enc.base_score);
    auto s2 = decrypt_score(bp.bundle,
                            std::get<paillier::Ciphertext>(infer_encrypted(loaded, enc_tx)),
                            loaded.base_score);
    CHECK(s1.margin == s2.margin);

    SUBCASE("transaction serialization round-trips") {
        auto tx2 = deserialize_encrypted_transaction(serialize_encrypted_transaction(enc_tx));
        CHECK(tx2 == enc_tx);
    }
    SUBCASE("bundle serialization round-trips") {
        auto b2 = deserialize_bundle(serialize_bundle(bp.bundle));
        CHECK(b2.ope_key.bytes == bp.bundle.ope_key.bytes);
        CHECK(b2.prf_seed == bp.bundle.prf_seed);
        CHECK(b2.quantizer.min == bp.bundle.quantizer.min);
        auto tx3 = encrypt_transaction(t, b2);
        CHECK(tx3 == enc_tx);
        auto s3 = decrypt_score(b2, std::get<paillier::Ciphertext>(infer_encrypted(enc, tx3)),
                                enc.base_score);
        CHECK(s3.margin == s1.margin);
    }
}

TEST_CASE("parallel encryption smoke: more cores is not slower by much") {
    // The strict 2x criterion lives in the acceptance suite; here we only
    // check the worker pool runs and is not pathologically slower.
    auto bp = test_bundle(91);
    auto model = random_full_ensemble(16, 5, 13);
    auto t0 = std::chrono::steady_clock::now();
    encrypt_model(model, bp.bundle, bp.paillier_public, LeafMode::kPaillierLeaves, 1);
    auto t1 = std::chrono::steady_clock::now();
    encrypt_model(model, bp.bundle, bp.paillier_public, LeafMode::kPaillierLeaves, 4);
    auto t2 = std::chrono::steady_clock::now();
    double serial = std::chrono::duration<double>(t1 - t0).count();
    double parallel = std::chrono::duration<double>(t2 - t1).count();
    CHECK(parallel < serial * 1.5);
}
