// Copyright (c) 2026 the hefraud authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>

#include "hefraud/ckks.hpp"
#include "hefraud/he_gbdt.hpp"
#include "hefraud/nn.hpp"

namespace hefraud::protocol {

inline constexpr const char* kProtocolVersion = "1";

std::string model_id_of(const std::string& model_json);
std::string quantizer_hash(const ope::Quantizer& q);

// ---------------------------------------------------------------------------
// In-process three-party simulation with explicit protocol steps.
// ---------------------------------------------------------------------------

/// Host role: owns plaintext models at train time and encrypted/NN models for
/// serving. Never holds client secrets; serialized_state() exists so tests
/// can assert that at the byte level.
struct HostRole {
    std::map<std::string, gbdt::TreeEnsemble> plain_xgb;  // train-time only
    std::map<std::string, he_gbdt::EncryptedEnsemble> encrypted_xgb;
    std::map<std::string, std::string> xgb_quantizer_hash;
    std::map<std::string, nn::NnModel> nn_models;

    Bytes serialized_state() const;
};

/// Secure Middle Server role: generates key bundles and encrypts models.
/// Stores bundles per model id; never sees transactions.
struct SmsRole {
    std::map<std::string, he_gbdt::ClientKeyBundle> bundles;
    std::atomic<int> interactions{0};
};

struct ClientRole {
    std::optional<he_gbdt::ClientKeyBundle> bundle;  // Protocol 2 key material
    // Protocol 1 key material
    ckks::ContextPtr context;
    std::optional<ckks::KeySet> ckks_keys;
};

/// Protocol 2: encrypted-XGBoost inference with a Secure Middle Server.
/// Step methods throw ProtocolError (naming the violated step) when invoked
/// out of order. Steps 1-5 run once; infer() covers steps 6-10 and can run
/// any number of times.
class XgbProtocol {
public:
    XgbProtocol(he_gbdt::LeafMode mode, int cores, int paillier_bits, uint64_t seed);

    void host_train(gbdt::TreeEnsemble model);               // step 1
    void sms_encrypt_model(const ope::Quantizer& q);         // steps 2-4
    void client_fetch_keys();                                // step 5
    he_gbdt::Score infer(const data::TransactionRecord& tx); // steps 6-10

    /// One-call convenience: runs any outstanding setup steps, then infers.
    he_gbdt::Score run(const data::TransactionRecord& tx, const ope::Quantizer& q);

    const HostRole& host() const { return host_; }
    const SmsRole& sms() const { return sms_; }
    const ClientRole& client() const { return client_; }
    int sms_interactions() const { return sms_.interactions.load(); }
    const std::string& model_id() const { return model_id_; }

private:
    he_gbdt::LeafMode mode_;
    int cores_;
    int paillier_bits_;
    Rng rng_;
    HostRole host_;
    SmsRole sms_;
    ClientRole client_;
    std::string model_id_;
    bool trained_ = false, encrypted_ = false, keys_delivered_ = false;
};

/// Protocol 1: encrypted-NN inference, two parties only.
class NnProtocol {
public:
    NnProtocol(size_t ring_degree, std::vector<int> moduli_bits, double scale, uint64_t seed);

    void host_train(nn::NnModel model);                         // step 1
    void client_keygen();                                       // client setup
    struct Result {
        double logit, proba;
        int label;
    };
    Result infer(std::span<const double> features);             // steps 2-6

    const HostRole& host() const { return host_; }
    const ClientRole& client() const { return client_; }
    Bytes host_received_bytes() const { return host_received_; }

private:
    ckks::ContextDescriptor descriptor_;
    Rng rng_;
    HostRole host_;
    ClientRole client_;
    std::unique_ptr<nn::HeNnEvaluator> host_evaluator_;
    std::shared_ptr<ckks::EvalKeys> host_eval_keys_;
    Bytes host_received_;  // everything the host ever received, for audits
    bool trained_ = false, keygen_done_ = false;
};

// ---------------------------------------------------------------------------
// HTTP services (plain HTTP; TLS/TEE are deployment concerns, not simulated).
// ---------------------------------------------------------------------------

/// Host service: POST /v1/infer/xgb, POST /v1/infer/nn, GET /v1/model-spec.
class HostService {
public:
    HostService();
    ~HostService();

    void add_xgb_model(const std::string& id, he_gbdt::EncryptedEnsemble model,
                       const std::string& quantizer_hash_hex);
    void add_nn_model(const std::string& id, nn::NnModel model);

    /// Binds an ephemeral port (or the given one) and serves on a background
    /// thread. Returns the bound port.
    int start(int port = 0);
    void stop();
    int port() const { return port_; }

    Bytes serialized_state() const;

private:
    struct NnContextCacheEntry {
        ckks::ContextPtr context;
        std::shared_ptr<ckks::EvalKeys> eval_keys;
        std::map<std::string, std::shared_ptr<nn::HeNnEvaluator>> evaluators;  // by model id
    };
    struct Impl;
    std::unique_ptr<Impl> impl_;
    int port_ = 0;
};

/// Secure Middle Server service: POST /v1/encrypt-model,
/// GET /v1/client-keys/{model_id}.
class SmsService {
public:
    SmsService();
    ~SmsService();

    int start(int port = 0);
    void stop();
    int port() const { return port_; }
    int interactions() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
    int port_ = 0;
};

// ---------------------------------------------------------------------------
// HTTP client helpers (used by the CLI and tests).
// ---------------------------------------------------------------------------

struct EncryptModelReply {
    std::string model_id;
    std::string encrypted_model_json;
    std::string quantizer_hash_hex;
};

/// Host-side setup call to the SMS (Protocol 2 steps 2-4 over HTTP).
EncryptModelReply http_encrypt_model(const std::string& sms_host, int sms_port,
                                     const std::string& model_json, const ope::Quantizer& q,
                                     he_gbdt::LeafMode mode, int cores, int paillier_bits);

/// Client key fetch from the SMS (step 5).
he_gbdt::ClientKeyBundle http_fetch_keys(const std::string& sms_host, int sms_port,
                                         const std::string& model_id);

/// Client-side encrypted inference against the host (steps 6-10).
he_gbdt::Score http_infer_xgb(const std::string& host, int port, const std::string& model_id,
                              const he_gbdt::ClientKeyBundle& bundle,
                              const data::TransactionRecord& tx, double base_score);

struct ModelSpec {
    std::string model_id;
    std::string type;  // "xgb" or "nn"
    std::vector<std::string> feature_tags;
    std::string quantizer_hash_hex;
    size_t nn_input_dim = 0;
    size_t nn_hidden = 0;
};
ModelSpec http_model_spec(const std::string& host, int port, const std::string& model_id);

/// Client session for encrypted NN inference: generates keys once, ships the
/// evaluation material with the first request, then refers to it by id.
class NnHttpClient {
public:
    NnHttpClient(const std::string& host, int port, const std::string& model_id,
                 ckks::ContextDescriptor descriptor, uint64_t seed);

    NnProtocol::Result infer(std::span<const double> features);

private:
    std::string host_;
    int port_;
    std::string model_id_;
    ckks::ContextPtr context_;
    ckks::KeySet keys_;
    std::string context_id_;
    bool keys_uploaded_ = false;
    Rng rng_;
};

}  // namespace hefraud::protocol
