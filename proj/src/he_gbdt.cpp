// Copyright (c) 2026 the hefraud authors
// SPDX-License-Identifier: Apache-2.0

#include "hefraud/he_gbdt.hpp"

#include <cmath>
#include <mutex>
#include <thread>

#include <json.hpp>

#include "hefraud/errors.hpp"

namespace hefraud::he_gbdt {

using nlohmann::json;

int EncryptedNode::depth() const {
    if (is_leaf) return 0;
    return 1 + std::max(left->depth(), right->depth());
}

size_t EncryptedNode::node_count() const {
    if (is_leaf) return 1;
    return 1 + left->node_count() + right->node_count();
}

BundleWithPublic generate_bundle(const ope::Quantizer& quantizer, int paillier_bits, Rng& rng,
                                 int fixed_point_scale_bits, const ope::OpeParams& ope_params) {
    BundleWithPublic out;
    for (auto& b : out.bundle.ope_key.bytes) b = uint8_t(rng.uniform(256));
    for (auto& b : out.bundle.prf_seed) b = uint8_t(rng.uniform(256));
    auto keypair = paillier::keygen(paillier_bits, rng);
    out.bundle.paillier_secret = keypair.sec;
    out.bundle.quantizer = quantizer;
    out.bundle.codec = paillier::FixedPointCodec{fixed_point_scale_bits, keypair.pub.n};
    out.bundle.ope_params = ope_params;
    out.paillier_public = keypair.pub;
    return out;
}

namespace {

// Vesta-scale finding: deeper trees made model encryption impractically slow.
constexpr int kDepthAdvisoryLimit = 7;

struct EncryptJob {
    const ClientKeyBundle* bundle;
    const paillier::PublicKey* paillier_public;
    const ope::OpeCipher* cipher;
    LeafMode mode;
    std::mutex warn_mutex;
    std::vector<std::string> warnings;
};

std::unique_ptr<EncryptedNode> encrypt_node(const gbdt::TreeNode& node, EncryptJob& job,
                                            Rng& rng) {
    auto out = std::make_unique<EncryptedNode>();
    if (node.is_leaf) {
        out->is_leaf = true;
        if (job.mode == LeafMode::kPaillierLeaves) {
            mpz_class encoded = job.bundle->codec.encode(node.leaf_value);
            out->leaf_ct = paillier::encrypt(*job.paillier_public, encoded, rng);
        } else {
            out->leaf_plain = node.leaf_value;
        }
        return out;
    }
    const auto& q = job.bundle->quantizer;
    if (node.threshold < q.min || node.threshold > q.max) {
        std::lock_guard lock(job.warn_mutex);
        job.warnings.push_back("threshold " + std::to_string(node.threshold) + " for feature '" +
                               node.feature + "' clamped into quantizer range");
    }
    out->is_leaf = false;
    out->feature_tag = ope::feature_tag(job.bundle->prf_seed, node.feature);
    out->enc_threshold = job.cipher->encrypt(q.quantize(node.threshold));
    out->left = encrypt_node(*node.left, job, rng);
    out->right = encrypt_node(*node.right, job, rng);
    return out;
}

}  // namespace

EncryptedEnsemble encrypt_model(const gbdt::TreeEnsemble& model, const ClientKeyBundle& bundle,
                                const paillier::PublicKey& paillier_public, LeafMode mode,
                                int cores) {
    if (cores < 1) throw ParameterError("cores must be >= 1");

    ope::OpeCipher cipher(bundle.ope_key, bundle.ope_params);
    EncryptJob job;
    job.bundle = &bundle;
    job.paillier_public = &paillier_public;
    job.cipher = &cipher;
    job.mode = mode;

    for (const auto& tree : model.trees) {
        int d = tree->depth();
        if (d > kDepthAdvisoryLimit) {
            job.warnings.push_back("tree depth " + std::to_string(d) + " exceeds " +
                                   std::to_string(kDepthAdvisoryLimit) +
                                   "; expect long model encryption times");
            break;
        }
    }

    size_t n_trees = model.trees.size();
    std::vector<std::unique_ptr<EncryptedNode>> encrypted(n_trees);
    size_t workers = std::min<size_t>(size_t(cores), std::max<size_t>(n_trees, 1));

    std::random_device seeder;
    std::vector<uint64_t> worker_seeds(workers);
    for (auto& s : worker_seeds) s = (uint64_t(seeder()) << 32) | seeder();

    // Contiguous slices of the tree list, one per worker.
    auto run_slice = [&](size_t begin, size_t end, uint64_t seed) {
        Rng rng(seed);
        for (size_t i = begin; i < end; ++i)
            encrypted[i] = encrypt_node(*model.trees[i], job, rng);
    };

    if (workers <= 1) {
        run_slice(0, n_trees, worker_seeds.empty() ? 0 : worker_seeds[0]);
    } else {
        std::vector<std::thread> threads;
        size_t chunk = (n_trees + workers - 1) / workers;
        for (size_t w = 0; w < workers; ++w) {
            size_t begin = w * chunk;
            size_t end = std::min(n_trees, begin + chunk);
            if (begin >= end) break;
            threads.emplace_back(run_slice, begin, end, worker_seeds[w]);
        }
        for (auto& t : threads) t.join();
    }

    EncryptedEnsemble out;
    out.mode = mode;
    out.base_score = model.base_score;
    out.trees = std::move(encrypted);
    out.paillier_public = paillier_public;
    out.warnings = std::move(job.warnings);
    return out;
}

EncryptedTransactionOpe encrypt_features(
    const std::vector<std::pair<std::string, double>>& features, const ClientKeyBundle& bundle) {
    ope::OpeCipher cipher(bundle.ope_key, bundle.ope_params);
    EncryptedTransactionOpe out;
    for (const auto& [name, value] : features) {
        ope::Tag tag = ope::feature_tag(bundle.prf_seed, name);
        out[tag] = cipher.encrypt(bundle.quantizer.quantize(value));
    }
    return out;
}

EncryptedTransactionOpe encrypt_transaction(const data::TransactionRecord& tx,
                                            const ClientKeyBundle& bundle) {
    return encrypt_features(tx.features, bundle);
}

InferenceResult infer_encrypted(const EncryptedEnsemble& model,
                                const EncryptedTransactionOpe& tx) {
    auto reach_leaf = [&](const EncryptedNode* node) -> const EncryptedNode* {
        while (!node->is_leaf) {
            auto it = tx.find(node->feature_tag);
            if (it == tx.end()) throw MissingFeatureError(ope::tag_hex(node->feature_tag));
            node = (it->second < node->enc_threshold) ? node->left.get() : node->right.get();
        }
        return node;
    };

    if (model.mode == LeafMode::kPlaintextLeaves) {
        double margin = model.base_score;
        for (const auto& tree : model.trees) margin += reach_leaf(tree.get())->leaf_plain;
        return margin;
    }
    paillier::Ciphertext sum = paillier::zero(model.paillier_public);
    for (const auto& tree : model.trees)
        sum = paillier::add(model.paillier_public, sum, reach_leaf(tree.get())->leaf_ct);
    return sum;
}

Score decrypt_score(const ClientKeyBundle& bundle, const paillier::Ciphertext& result,
                    double model_base_score) {
    mpz_class sum = paillier::decrypt(bundle.paillier_secret, result);
    Score s;
    s.margin = model_base_score + bundle.codec.decode(sum);
    s.proba = gbdt::sigmoid(s.margin);
    s.label = s.proba >= 0.5 ? 1 : 0;
    return s;
}

Score score_from_plain_margin(double margin) {
    Score s;
    s.margin = margin;
    s.proba = gbdt::sigmoid(margin);
    s.label = s.proba >= 0.5 ? 1 : 0;
    return s;
}

namespace {

json enc_node_to_json(const EncryptedNode& node, LeafMode mode) {
    if (node.is_leaf) {
        if (mode == LeafMode::kPaillierLeaves)
            return json{{"leaf", base64_encode(paillier::serialize(node.leaf_ct))}};
        return json{{"leaf", node.leaf_plain}};
    }
    auto ct_be = be64(node.enc_threshold);
    Bytes ct_bytes(ct_be.begin(), ct_be.end());
    return json{{"tag", ope::tag_hex(node.feature_tag)},
                {"ct", base64_encode(ct_bytes)},
                {"l", enc_node_to_json(*node.left, mode)},
                {"r", enc_node_to_json(*node.right, mode)}};
}

std::unique_ptr<EncryptedNode> enc_node_from_json(const json& j, LeafMode mode, uint64_t key_id,
                                                  const std::string& path) {
    auto node = std::make_unique<EncryptedNode>();
    if (j.contains("leaf")) {
        node->is_leaf = true;
        if (mode == LeafMode::kPaillierLeaves) {
            node->leaf_ct =
                paillier::deserialize_ciphertext(base64_decode(j["leaf"].get<std::string>()), key_id);
        } else {
            node->leaf_plain = j["leaf"].get<double>();
        }
        return node;
    }
    for (const char* field : {"tag", "ct", "l", "r"})
        if (!j.contains(field)) throw ParseError(std::string("missing '") + field + "'", path);
    node->is_leaf = false;
    node->feature_tag = ope::tag_from_hex(j["tag"].get<std::string>());
    Bytes ct = base64_decode(j["ct"].get<std::string>());
    if (ct.size() != 8) throw ParseError("OPE ciphertext must be 8 bytes", path + "/ct");
    node->enc_threshold = from_be64(ct.data());
    node->left = enc_node_from_json(j["l"], mode, key_id, path + "/l");
    node->right = enc_node_from_json(j["r"], mode, key_id, path + "/r");
    return node;
}

std::string mode_name(LeafMode mode) {
    return mode == LeafMode::kPaillierLeaves ? "paillier-leaves" : "plaintext-leaves";
}

LeafMode mode_from_name(const std::string& name) {
    if (name == "paillier-leaves") return LeafMode::kPaillierLeaves;
    if (name == "plaintext-leaves") return LeafMode::kPlaintextLeaves;
    throw ParseError("unknown leaf mode '" + name + "'", "/mode");
}

}  // namespace

std::string serialize_encrypted_model(const EncryptedEnsemble& model) {
    json j;
    j["mode"] = mode_name(model.mode);
    j["base_score"] = model.base_score;
    j["paillier_public"] = base64_encode(paillier::serialize(model.paillier_public));
    j["trees"] = json::array();
    for (const auto& t : model.trees) j["trees"].push_back(enc_node_to_json(*t, model.mode));
    return j.dump();
}

EncryptedEnsemble deserialize_encrypted_model(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("invalid JSON: ") + e.what(), "$");
    }
    EncryptedEnsemble model;
    model.mode = mode_from_name(j.at("mode").get<std::string>());
    model.base_score = j.at("base_score").get<double>();
    model.paillier_public =
        paillier::deserialize_public_key(base64_decode(j.at("paillier_public").get<std::string>()));
    for (size_t i = 0; i < j.at("trees").size(); ++i)
        model.trees.push_back(enc_node_from_json(j["trees"][i], model.mode,
                                                 model.paillier_public.key_id,
                                                 "/trees/" + std::to_string(i)));
    return model;
}

std::string serialize_encrypted_transaction(const EncryptedTransactionOpe& tx) {
    json j = json::object();
    for (const auto& [tag, ct] : tx) {
        auto ct_be = be64(ct);
        Bytes ct_bytes(ct_be.begin(), ct_be.end());
        j[ope::tag_hex(tag)] = base64_encode(ct_bytes);
    }
    return j.dump();
}

EncryptedTransactionOpe deserialize_encrypted_transaction(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("invalid JSON: ") + e.what(), "$");
    }
    EncryptedTransactionOpe tx;
    for (auto it = j.begin(); it != j.end(); ++it) {
        Bytes ct = base64_decode(it.value().get<std::string>());
        if (ct.size() != 8) throw ParseError("OPE ciphertext must be 8 bytes", "/" + it.key());
        tx[ope::tag_from_hex(it.key())] = from_be64(ct.data());
    }
    return tx;
}

std::string serialize_bundle(const ClientKeyBundle& bundle) {
    json j;
    j["protocol_version"] = "1";
    j["ope_key_b64"] = base64_encode(bundle.ope_key.bytes.data(), bundle.ope_key.bytes.size());
    j["prf_seed_b64"] = base64_encode(bundle.prf_seed.data(), bundle.prf_seed.size());
    j["paillier_secret_b64"] = base64_encode(paillier::serialize(bundle.paillier_secret));
    j["quantizer"] = {{"min", bundle.quantizer.min},
                      {"max", bundle.quantizer.max},
                      {"buckets", bundle.quantizer.buckets}};
    j["codec"] = {{"scale_bits", bundle.codec.scale_bits}};
    j["ope_params"] = {{"in_bits", bundle.ope_params.in_bits},
                       {"out_bits", bundle.ope_params.out_bits}};
    return j.dump();
}

ClientKeyBundle deserialize_bundle(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("invalid JSON: ") + e.what(), "$");
    }
    ClientKeyBundle b;
    b.ope_key = ope::key_from_bytes(base64_decode(j.at("ope_key_b64").get<std::string>()));
    Bytes seed = base64_decode(j.at("prf_seed_b64").get<std::string>());
    if (seed.size() != 16) throw ParseError("prf seed must be 16 bytes", "/prf_seed_b64");
    std::copy(seed.begin(), seed.end(), b.prf_seed.begin());
    b.paillier_secret =
        paillier::deserialize_secret_key(base64_decode(j.at("paillier_secret_b64").get<std::string>()));
    b.quantizer = ope::Quantizer(j.at("quantizer").at("min").get<double>(),
                                 j.at("quantizer").at("max").get<double>(),
                                 j.at("quantizer").at("buckets").get<uint64_t>());
    b.codec.scale_bits = j.at("codec").at("scale_bits").get<int>();
    b.codec.modulus = b.paillier_secret.n;
    b.ope_params.in_bits = j.at("ope_params").at("in_bits").get<int>();
    b.ope_params.out_bits = j.at("ope_params").at("out_bits").get<int>();
    return b;
}

}  // namespace hefraud::he_gbdt
