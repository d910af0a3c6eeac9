// Copyright (c) 2026 the hefraud authors
// SPDX-License-Identifier: Apache-2.0

#include <httplib.h>

#include <cmath>
#include <functional>
#include <set>

#include <json.hpp>

#include "hefraud/errors.hpp"
#include "hefraud/hash.hpp"
#include "hefraud/protocol.hpp"

namespace hefraud::protocol {

using nlohmann::json;

namespace {

void respond_json(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

void respond_error(httplib::Response& res, int status, const std::string& code,
                   const std::string& message) {
    respond_json(res, status, json{{"code", code}, {"message", message}});
}

json parse_body(const httplib::Request& req) {
    try {
        return json::parse(req.body);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("invalid JSON body: ") + e.what(), "$");
    }
}

constexpr size_t kMaxPayload = size_t(1) << 31;  // evaluation keys are large

}  // namespace

// ---------------------------------------------------------------------------
// Host service
// ---------------------------------------------------------------------------

struct HostService::Impl {
    httplib::Server server;
    std::thread thread;
    std::mutex mutex;
    std::map<std::string, he_gbdt::EncryptedEnsemble> xgb;
    std::map<std::string, std::string> xgb_qhash;
    std::map<std::string, nn::NnModel> nn_models;
    std::map<std::string, NnContextCacheEntry> contexts;  // by client context id

    void route();
    void handle_infer_xgb(const httplib::Request& req, httplib::Response& res);
    void handle_infer_nn(const httplib::Request& req, httplib::Response& res);
    void handle_model_spec(const httplib::Request& req, httplib::Response& res);
};

HostService::HostService() : impl_(std::make_unique<Impl>()) {
    impl_->server.set_payload_max_length(kMaxPayload);
    impl_->route();
}

HostService::~HostService() { stop(); }

void HostService::Impl::route() {
    server.Post("/v1/infer/xgb", [this](const httplib::Request& req, httplib::Response& res) {
        handle_infer_xgb(req, res);
    });
    server.Post("/v1/infer/nn", [this](const httplib::Request& req, httplib::Response& res) {
        handle_infer_nn(req, res);
    });
    server.Get("/v1/model-spec", [this](const httplib::Request& req, httplib::Response& res) {
        handle_model_spec(req, res);
    });
}

void HostService::Impl::handle_infer_xgb(const httplib::Request& req, httplib::Response& res) {
    try {
        json body = parse_body(req);
        std::string model_id = body.at("model_id").get<std::string>();
        const he_gbdt::EncryptedEnsemble* model;
        {
            std::lock_guard lock(mutex);
            auto it = xgb.find(model_id);
            if (it == xgb.end()) {
                respond_error(res, 404, "unknown-model", "no encrypted model '" + model_id + "'");
                return;
            }
            model = &it->second;
        }
        auto tx = he_gbdt::deserialize_encrypted_transaction(body.at("tx").dump());
        auto result = he_gbdt::infer_encrypted(*model, tx);
        json reply{{"protocol_version", kProtocolVersion}};
        if (std::holds_alternative<double>(result)) {
            reply["plaintext_margin"] = std::get<double>(result);
        } else {
            reply["result_b64"] =
                base64_encode(paillier::serialize(std::get<paillier::Ciphertext>(result)));
        }
        respond_json(res, 200, reply);
    } catch (const MissingFeatureError& e) {
        respond_error(res, 422, "missing-feature", e.what());
    } catch (const ParseError& e) {
        respond_error(res, 400, "bad-encoding", e.what());
    } catch (const json::exception& e) {
        respond_error(res, 400, "bad-request", e.what());
    } catch (const Error& e) {
        respond_error(res, 500, "internal", e.what());
    }
}

void HostService::Impl::handle_infer_nn(const httplib::Request& req, httplib::Response& res) {
    try {
        json body = parse_body(req);
        std::string model_id = body.at("model_id").get<std::string>();
        const nn::NnModel* model;
        {
            std::lock_guard lock(mutex);
            auto it = nn_models.find(model_id);
            if (it == nn_models.end()) {
                respond_error(res, 404, "unknown-model", "no NN model '" + model_id + "'");
                return;
            }
            model = &it->second;
        }

        json ctx_json = body.at("context");
        std::string context_id = ctx_json.at("context_id").get<std::string>();
        std::shared_ptr<nn::HeNnEvaluator> evaluator;
        ckks::ContextPtr context;
        {
            std::lock_guard lock(mutex);
            auto it = contexts.find(context_id);
            if (it == contexts.end()) {
                if (!ctx_json.contains("relin_b64")) {
                    respond_error(res, 404, "unknown-context",
                                  "context id not seen before and no keys supplied");
                    return;
                }
                // Validate the descriptor against the security gate before
                // accepting any key material.
                ckks::ContextDescriptor d;
                d.ring_degree = ctx_json.at("N").get<size_t>();
                d.moduli_bits = ctx_json.at("moduli_bits").get<std::vector<int>>();
                d.scale = std::exp2(ctx_json.at("scale_bits").get<double>());
                NnContextCacheEntry entry;
                entry.context = ckks::Context::create(d);  // throws SecurityError if weak
                entry.eval_keys = std::make_shared<ckks::EvalKeys>();
                entry.eval_keys->relin = ckks::deserialize_ksw_key(
                    *entry.context, base64_decode(ctx_json.at("relin_b64").get<std::string>()));
                for (auto it2 = ctx_json.at("galois").begin(); it2 != ctx_json.at("galois").end();
                     ++it2) {
                    int64_t step = std::stoll(it2.key());
                    entry.eval_keys->galois.emplace(
                        step, ckks::deserialize_ksw_key(*entry.context,
                                                        base64_decode(it2.value().get<std::string>())));
                }
                it = contexts.emplace(context_id, std::move(entry)).first;
            }
            auto ev = it->second.evaluators.find(model_id);
            if (ev == it->second.evaluators.end()) {
                ev = it->second.evaluators
                         .emplace(model_id, std::make_shared<nn::HeNnEvaluator>(
                                                it->second.context, it->second.eval_keys, *model))
                         .first;
            }
            evaluator = ev->second;
            context = it->second.context;
        }

        auto ct = ckks::deserialize_ciphertext(*context,
                                               base64_decode(body.at("ct_b64").get<std::string>()));
        auto out = evaluator->forward(ct);
        respond_json(res, 200,
                     json{{"protocol_version", kProtocolVersion},
                          {"result_b64", base64_encode(ckks::serialize(*context, out))}});
    } catch (const SecurityError& e) {
        respond_error(res, 422, "insecure-context", e.what());
    } catch (const UnsupportedDepthError& e) {
        respond_error(res, 422, "depth", e.what());
    } catch (const DepthError& e) {
        respond_error(res, 422, "depth", e.what());
    } catch (const CapacityError& e) {
        respond_error(res, 422, "capacity", e.what());
    } catch (const ParseError& e) {
        respond_error(res, 400, "bad-encoding", e.what());
    } catch (const json::exception& e) {
        respond_error(res, 400, "bad-request", e.what());
    } catch (const Error& e) {
        respond_error(res, 500, "internal", e.what());
    }
}

void HostService::Impl::handle_model_spec(const httplib::Request& req, httplib::Response& res) {
    std::string model_id = req.get_param_value("model_id");
    std::lock_guard lock(mutex);
    json reply{{"protocol_version", kProtocolVersion}, {"model_id", model_id}};
    if (auto it = xgb.find(model_id); it != xgb.end()) {
        reply["type"] = "xgb";
        std::set<std::string> tags;
        std::function<void(const he_gbdt::EncryptedNode&)> walk =
            [&](const he_gbdt::EncryptedNode& node) {
                if (node.is_leaf) return;
                tags.insert(ope::tag_hex(node.feature_tag));
                walk(*node.left);
                walk(*node.right);
            };
        for (const auto& tree : it->second.trees) walk(*tree);
        reply["feature_tags"] = tags;
        reply["quantizer_hash"] = xgb_qhash.at(model_id);
        respond_json(res, 200, reply);
        return;
    }
    if (auto it = nn_models.find(model_id); it != nn_models.end()) {
        reply["type"] = "nn";
        reply["nn"] = json{{"d", it->second.input_dim},
                           {"h", it->second.hidden_size()},
                           {"rotation_steps", nn::required_rotation_steps(it->second, 0)}};
        respond_json(res, 200, reply);
        return;
    }
    respond_error(res, 404, "unknown-model", "no model '" + model_id + "'");
}

void HostService::add_xgb_model(const std::string& id, he_gbdt::EncryptedEnsemble model,
                                const std::string& quantizer_hash_hex) {
    std::lock_guard lock(impl_->mutex);
    impl_->xgb.emplace(id, std::move(model));
    impl_->xgb_qhash.emplace(id, quantizer_hash_hex);
}

void HostService::add_nn_model(const std::string& id, nn::NnModel model) {
    std::lock_guard lock(impl_->mutex);
    impl_->nn_models.emplace(id, std::move(model));
}

int HostService::start(int port) {
    if (port == 0) {
        port_ = impl_->server.bind_to_any_port("127.0.0.1");
    } else {
        impl_->server.bind_to_port("127.0.0.1", port);
        port_ = port;
    }
    impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
    impl_->server.wait_until_ready();
    return port_;
}

void HostService::stop() {
    if (impl_ && impl_->thread.joinable()) {
        impl_->server.stop();
        impl_->thread.join();
    }
}

Bytes HostService::serialized_state() const {
    std::lock_guard lock(impl_->mutex);
    std::string blob;
    for (const auto& [id, enc] : impl_->xgb) {
        blob += id;
        blob += he_gbdt::serialize_encrypted_model(enc);
    }
    for (const auto& [id, h] : impl_->xgb_qhash) blob += id + h;
    for (const auto& [id, m] : impl_->nn_models) {
        blob += id;
        blob += nn::save_model(m);
    }
    Bytes out = to_bytes(blob);
    for (const auto& [cid, entry] : impl_->contexts) {
        out.insert(out.end(), cid.begin(), cid.end());
        Bytes d = to_bytes(ckks::descriptor_to_json(entry.context->descriptor()));
        out.insert(out.end(), d.begin(), d.end());
        Bytes relin = ckks::serialize_ksw_key(*entry.context, entry.eval_keys->relin);
        out.insert(out.end(), relin.begin(), relin.end());
        for (const auto& [step, key] : entry.eval_keys->galois) {
            append_be64(out, uint64_t(step));
            Bytes kb = ckks::serialize_ksw_key(*entry.context, key);
            out.insert(out.end(), kb.begin(), kb.end());
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// SMS service
// ---------------------------------------------------------------------------

struct SmsService::Impl {
    httplib::Server server;
    std::thread thread;
    std::mutex mutex;
    std::map<std::string, he_gbdt::ClientKeyBundle> bundles;
    std::map<std::string, std::unique_ptr<std::mutex>> job_locks;
    std::atomic<int> interactions{0};

    std::mutex& job_lock(const std::string& model_id) {
        std::lock_guard lock(mutex);
        auto it = job_locks.find(model_id);
        if (it == job_locks.end())
            it = job_locks.emplace(model_id, std::make_unique<std::mutex>()).first;
        return *it->second;
    }
};

SmsService::SmsService() : impl_(std::make_unique<Impl>()) {
    impl_->server.set_payload_max_length(kMaxPayload);

    impl_->server.Post("/v1/encrypt-model", [this](const httplib::Request& req,
                                                   httplib::Response& res) {
        impl_->interactions += 1;
        try {
            json body = parse_body(req);
            std::string model_json = body.at("model_json").get<std::string>();
            auto model = gbdt::load_model(model_json);
            ope::Quantizer q(body.at("quantizer").at("min").get<double>(),
                             body.at("quantizer").at("max").get<double>(),
                             body.at("quantizer").at("buckets").get<uint64_t>());
            auto mode = body.value("mode", std::string("paillier-leaves")) == "plaintext-leaves"
                            ? he_gbdt::LeafMode::kPlaintextLeaves
                            : he_gbdt::LeafMode::kPaillierLeaves;
            int cores = body.value("cores", 1);
            int paillier_bits = body.value("paillier_bits", 3072);

            std::string model_id = model_id_of(model_json);
            // model-encryption jobs are serialized per model id
            std::lock_guard job(impl_->job_lock(model_id));

            Rng rng;
            auto bundle = he_gbdt::generate_bundle(q, paillier_bits, rng);
            auto encrypted = he_gbdt::encrypt_model(model, bundle.bundle, bundle.paillier_public,
                                                    mode, cores);
            {
                std::lock_guard lock(impl_->mutex);
                impl_->bundles.insert_or_assign(model_id, std::move(bundle.bundle));
            }
            respond_json(res, 200,
                         json{{"protocol_version", kProtocolVersion},
                              {"model_id", model_id},
                              {"encrypted_model_json", he_gbdt::serialize_encrypted_model(encrypted)},
                              {"quantizer_hash", quantizer_hash(q)}});
        } catch (const ParseError& e) {
            respond_error(res, 400, "bad-encoding", e.what());
        } catch (const json::exception& e) {
            respond_error(res, 400, "bad-request", e.what());
        } catch (const Error& e) {
            respond_error(res, 422, "encrypt-failed", e.what());
        }
    });

    impl_->server.Get(R"(/v1/client-keys/([0-9a-f]+))", [this](const httplib::Request& req,
                                                               httplib::Response& res) {
        impl_->interactions += 1;
        std::string model_id = req.matches[1];
        std::lock_guard lock(impl_->mutex);
        auto it = impl_->bundles.find(model_id);
        if (it == impl_->bundles.end()) {
            respond_error(res, 404, "unknown-model", "no key bundle for '" + model_id + "'");
            return;
        }
        json reply = json::parse(he_gbdt::serialize_bundle(it->second));
        respond_json(res, 200, reply);
    });
}

SmsService::~SmsService() { stop(); }

int SmsService::start(int port) {
    if (port == 0) {
        port_ = impl_->server.bind_to_any_port("127.0.0.1");
    } else {
        impl_->server.bind_to_port("127.0.0.1", port);
        port_ = port;
    }
    impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
    impl_->server.wait_until_ready();
    return port_;
}

void SmsService::stop() {
    if (impl_ && impl_->thread.joinable()) {
        impl_->server.stop();
        impl_->thread.join();
    }
}

int SmsService::interactions() const { return impl_->interactions.load(); }

// ---------------------------------------------------------------------------
// HTTP client helpers
// ---------------------------------------------------------------------------

namespace {

httplib::Client make_client(const std::string& host, int port) {
    httplib::Client client(host, port);
    client.set_read_timeout(300, 0);
    client.set_write_timeout(300, 0);
    client.set_connection_timeout(10, 0);
    return client;
}

json checked_post(const std::string& host, int port, const std::string& path, const json& body) {
    auto client = make_client(host, port);
    auto res = client.Post(path, body.dump(), "application/json");
    if (!res) throw ProtocolError("http", "no response from " + host + path);
    json reply = json::parse(res->body);
    if (res->status != 200)
        throw ProtocolError("http", path + " returned " + std::to_string(res->status) + ": " +
                                        reply.value("message", std::string("?")));
    return reply;
}

}  // namespace

EncryptModelReply http_encrypt_model(const std::string& sms_host, int sms_port,
                                     const std::string& model_json, const ope::Quantizer& q,
                                     he_gbdt::LeafMode mode, int cores, int paillier_bits) {
    json body{{"protocol_version", kProtocolVersion},
              {"model_json", model_json},
              {"quantizer", {{"min", q.min}, {"max", q.max}, {"buckets", q.buckets}}},
              {"mode", mode == he_gbdt::LeafMode::kPlaintextLeaves ? "plaintext-leaves"
                                                                   : "paillier-leaves"},
              {"cores", cores},
              {"paillier_bits", paillier_bits}};
    json reply = checked_post(sms_host, sms_port, "/v1/encrypt-model", body);
    return EncryptModelReply{reply.at("model_id").get<std::string>(),
                             reply.at("encrypted_model_json").get<std::string>(),
                             reply.at("quantizer_hash").get<std::string>()};
}

he_gbdt::ClientKeyBundle http_fetch_keys(const std::string& sms_host, int sms_port,
                                         const std::string& model_id) {
    auto client = make_client(sms_host, sms_port);
    auto res = client.Get("/v1/client-keys/" + model_id);
    if (!res) throw ProtocolError("key-delivery", "no response from SMS");
    if (res->status != 200)
        throw ProtocolError("key-delivery", "SMS returned " + std::to_string(res->status));
    return he_gbdt::deserialize_bundle(res->body);
}

he_gbdt::Score http_infer_xgb(const std::string& host, int port, const std::string& model_id,
                              const he_gbdt::ClientKeyBundle& bundle,
                              const data::TransactionRecord& tx, double base_score) {
    auto enc_tx = he_gbdt::encrypt_transaction(tx, bundle);
    json body{{"protocol_version", kProtocolVersion},
              {"model_id", model_id},
              {"tx", json::parse(he_gbdt::serialize_encrypted_transaction(enc_tx))}};
    json reply = checked_post(host, port, "/v1/infer/xgb", body);
    if (reply.contains("plaintext_margin"))
        return he_gbdt::score_from_plain_margin(reply["plaintext_margin"].get<double>());
    auto ct = paillier::deserialize_ciphertext(
        base64_decode(reply.at("result_b64").get<std::string>()), bundle.paillier_secret.key_id);
    return he_gbdt::decrypt_score(bundle, ct, base_score);
}

ModelSpec http_model_spec(const std::string& host, int port, const std::string& model_id) {
    auto client = make_client(host, port);
    auto res = client.Get("/v1/model-spec?model_id=" + model_id);
    if (!res) throw ProtocolError("model-spec", "no response from host");
    if (res->status != 200)
        throw ProtocolError("model-spec", "host returned " + std::to_string(res->status));
    json reply = json::parse(res->body);
    ModelSpec spec;
    spec.model_id = reply.at("model_id").get<std::string>();
    spec.type = reply.at("type").get<std::string>();
    if (reply.contains("feature_tags"))
        spec.feature_tags = reply["feature_tags"].get<std::vector<std::string>>();
    if (reply.contains("quantizer_hash"))
        spec.quantizer_hash_hex = reply["quantizer_hash"].get<std::string>();
    if (reply.contains("nn")) {
        spec.nn_input_dim = reply["nn"].at("d").get<size_t>();
        spec.nn_hidden = reply["nn"].at("h").get<size_t>();
    }
    return spec;
}

NnHttpClient::NnHttpClient(const std::string& host, int port, const std::string& model_id,
                           ckks::ContextDescriptor descriptor, uint64_t seed)
    : host_(host), port_(port), model_id_(model_id), rng_(seed) {
    context_ = ckks::Context::create(descriptor);
    auto spec = http_model_spec(host, port, model_id);
    if (spec.type != "nn") throw ConfigError("model '" + model_id + "' is not an NN model");

    // rotation steps for this model shape, fetched from the host's spec
    auto client = make_client(host, port);
    auto res = client.Get("/v1/model-spec?model_id=" + model_id);
    json reply = json::parse(res->body);
    auto steps = reply.at("nn").at("rotation_steps").get<std::vector<int64_t>>();
    keys_ = ckks::generate_keys(context_, rng_, steps);

    // random client-chosen context id
    Bytes id_bytes(16);
    for (auto& b : id_bytes) b = uint8_t(rng_.uniform(256));
    context_id_ = hex_encode(id_bytes);
}

NnProtocol::Result NnHttpClient::infer(std::span<const double> features) {
    auto pt = context_->encode(nn::pack_input(features));
    auto ct = ckks::encrypt(*context_, keys_.public_key, pt, rng_);

    json ctx_json{{"context_id", context_id_}};
    if (!keys_uploaded_) {
        auto d = context_->descriptor();
        ctx_json["N"] = d.ring_degree;
        ctx_json["moduli_bits"] = d.moduli_bits;
        ctx_json["scale_bits"] = std::log2(d.scale);
        ctx_json["relin_b64"] = base64_encode(ckks::serialize_ksw_key(*context_, keys_.eval->relin));
        json galois = json::object();
        for (const auto& [step, key] : keys_.eval->galois)
            galois[std::to_string(step)] = base64_encode(ckks::serialize_ksw_key(*context_, key));
        ctx_json["galois"] = galois;
    }
    json body{{"protocol_version", kProtocolVersion},
              {"model_id", model_id_},
              {"context", ctx_json},
              {"ct_b64", base64_encode(ckks::serialize(*context_, ct))}};
    json reply = checked_post(host_, port_, "/v1/infer/nn", body);
    keys_uploaded_ = true;

    auto out = ckks::deserialize_ciphertext(*context_,
                                            base64_decode(reply.at("result_b64").get<std::string>()));
    double logit = context_->decode(ckks::decrypt(*context_, keys_.secret, out))[0];
    NnProtocol::Result r;
    r.logit = logit;
    r.proba = nn::sigmoid(logit);
    r.label = r.proba >= 0.5 ? 1 : 0;
    return r;
}

}  // namespace hefraud::protocol
