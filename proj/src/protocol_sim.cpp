// Copyright (c) 2026 the hefraud authors
// SPDX-License-Identifier: Apache-2.0

#include <json.hpp>

#include "hefraud/errors.hpp"
#include "hefraud/hash.hpp"
#include "hefraud/protocol.hpp"

namespace hefraud::protocol {

using nlohmann::json;

std::string model_id_of(const std::string& model_json) {
    auto digest = sha256(reinterpret_cast<const uint8_t*>(model_json.data()), model_json.size());
    return hex_encode(digest.data(), digest.size());
}

std::string quantizer_hash(const ope::Quantizer& q) {
    json j{{"min", q.min}, {"max", q.max}, {"buckets", q.buckets}};
    std::string s = j.dump();
    auto digest = sha256(reinterpret_cast<const uint8_t*>(s.data()), s.size());
    return hex_encode(digest.data(), digest.size());
}

Bytes HostRole::serialized_state() const {
    std::string blob;
    for (const auto& [id, model] : plain_xgb) {
        blob += id;
        blob += gbdt::save_model(model);
    }
    for (const auto& [id, enc] : encrypted_xgb) {
        blob += id;
        blob += he_gbdt::serialize_encrypted_model(enc);
    }
    for (const auto& [id, h] : xgb_quantizer_hash) blob += id + h;
    for (const auto& [id, model] : nn_models) {
        blob += id;
        blob += nn::save_model(model);
    }
    return to_bytes(blob);
}

// ---------------------------------------------------------------------------
// Protocol 2 (HE XGBoost, three parties)
// ---------------------------------------------------------------------------

XgbProtocol::XgbProtocol(he_gbdt::LeafMode mode, int cores, int paillier_bits, uint64_t seed)
    : mode_(mode), cores_(cores), paillier_bits_(paillier_bits), rng_(seed) {}

void XgbProtocol::host_train(gbdt::TreeEnsemble model) {
    model_id_ = model_id_of(gbdt::save_model(model));
    host_.plain_xgb.emplace(model_id_, std::move(model));
    trained_ = true;
}

void XgbProtocol::sms_encrypt_model(const ope::Quantizer& q) {
    if (!trained_) throw ProtocolError("model-transfer", "host has no trained model to send");
    sms_.interactions += 1;

    // SMS generates K and encrypts the model it received from the host.
    auto bundle = he_gbdt::generate_bundle(q, paillier_bits_, rng_);
    const auto& model = host_.plain_xgb.at(model_id_);
    auto encrypted = he_gbdt::encrypt_model(model, bundle.bundle, bundle.paillier_public, mode_,
                                            cores_);
    sms_.bundles.emplace(model_id_, std::move(bundle.bundle));

    // SMS returns the encrypted model to the host.
    host_.encrypted_xgb.emplace(model_id_, std::move(encrypted));
    host_.xgb_quantizer_hash.emplace(model_id_, quantizer_hash(q));
    encrypted_ = true;
}

void XgbProtocol::client_fetch_keys() {
    if (!encrypted_)
        throw ProtocolError("key-delivery", "SMS has not generated keys for this model yet");
    sms_.interactions += 1;
    client_.bundle = sms_.bundles.at(model_id_);
    keys_delivered_ = true;
}

he_gbdt::Score XgbProtocol::infer(const data::TransactionRecord& tx) {
    if (!encrypted_)
        throw ProtocolError("model-not-encrypted",
                            "inference requested before the model was encrypted");
    if (!keys_delivered_)
        throw ProtocolError("keys-not-delivered", "client has no key bundle yet");

    // step 6: client encrypts the transaction
    auto enc_tx = he_gbdt::encrypt_transaction(tx, *client_.bundle);
    // steps 7-8: host processes the encrypted transaction
    const auto& enc_model = host_.encrypted_xgb.at(model_id_);
    auto result = he_gbdt::infer_encrypted(enc_model, enc_tx);
    // steps 9-10: client decrypts the result
    if (std::holds_alternative<double>(result))
        return he_gbdt::score_from_plain_margin(std::get<double>(result));
    return he_gbdt::decrypt_score(*client_.bundle, std::get<paillier::Ciphertext>(result),
                                  enc_model.base_score);
}

he_gbdt::Score XgbProtocol::run(const data::TransactionRecord& tx, const ope::Quantizer& q) {
    if (!encrypted_) sms_encrypt_model(q);
    if (!keys_delivered_) client_fetch_keys();
    return infer(tx);
}

// ---------------------------------------------------------------------------
// Protocol 1 (HE NN, two parties)
// ---------------------------------------------------------------------------

NnProtocol::NnProtocol(size_t ring_degree, std::vector<int> moduli_bits, double scale,
                       uint64_t seed)
    : descriptor_{ring_degree, std::move(moduli_bits), scale}, rng_(seed) {}

void NnProtocol::host_train(nn::NnModel model) {
    host_.nn_models.emplace("nn", std::move(model));
    trained_ = true;
}

void NnProtocol::client_keygen() {
    if (!trained_) throw ProtocolError("model-spec", "host has no trained model to describe");
    // Context validation happens here: an insecure descriptor is rejected
    // before any keys exist.
    client_.context = ckks::Context::create(descriptor_);
    const auto& model = host_.nn_models.at("nn");
    auto steps = nn::required_rotation_steps(model, descriptor_.ring_degree);
    client_.ckks_keys = ckks::generate_keys(client_.context, rng_, steps);
    keygen_done_ = true;
}

NnProtocol::Result NnProtocol::infer(std::span<const double> features) {
    if (!trained_) throw ProtocolError("train", "host has no model");
    if (!keygen_done_) throw ProtocolError("client-keygen", "client has not generated keys");
    const auto& ctx = *client_.context;
    const auto& model = host_.nn_models.at("nn");

    // step 2: client encodes and encrypts the transaction
    auto pt = ctx.encode(nn::pack_input(features));
    auto ct = ckks::encrypt(ctx, client_.ckks_keys->public_key, pt, rng_);

    // step 3: ciphertext, context descriptor and evaluation keys travel to
    // the host (never the secret key). Record what the host received.
    if (!host_evaluator_) {
        host_eval_keys_ = client_.ckks_keys->eval;
        Bytes received = to_bytes(ckks::descriptor_to_json(descriptor_));
        Bytes relin = ckks::serialize_ksw_key(ctx, host_eval_keys_->relin);
        received.insert(received.end(), relin.begin(), relin.end());
        for (const auto& [step, key] : host_eval_keys_->galois) {
            append_be64(received, uint64_t(step));
            Bytes kb = ckks::serialize_ksw_key(ctx, key);
            received.insert(received.end(), kb.begin(), kb.end());
        }
        host_received_ = std::move(received);
        host_evaluator_ = std::make_unique<nn::HeNnEvaluator>(client_.context, host_eval_keys_,
                                                              model);
    }
    Bytes ct_bytes = ckks::serialize(ctx, ct);
    host_received_.insert(host_received_.end(), ct_bytes.begin(), ct_bytes.end());

    // step 4: host processes the encrypted transaction
    auto enc_result = host_evaluator_->forward(ct);

    // steps 5-6: result returns to the client, which decrypts
    double logit = ctx.decode(ckks::decrypt(ctx, client_.ckks_keys->secret, enc_result))[0];
    Result r;
    r.logit = logit;
    r.proba = nn::sigmoid(logit);
    r.label = r.proba >= 0.5 ? 1 : 0;
    return r;
}

}  // namespace hefraud::protocol
