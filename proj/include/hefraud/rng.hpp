// Copyright (c) 2026 the hefraud authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <random>

namespace hefraud {

/// Pseudo-random source shared by key generation, sampling and the synthetic
/// data generator. Seeded construction gives reproducible streams; default
/// construction seeds from the OS.
class Rng {
public:
    Rng() : engine_(std::random_device{}()) {}
    explicit Rng(uint64_t seed) : engine_(seed) {}

    uint64_t next_u64() { return engine_(); }

    /// Uniform in [0, bound). bound must be > 0.
    uint64_t uniform(uint64_t bound) {
        return std::uniform_int_distribution<uint64_t>(0, bound - 1)(engine_);
    }

    double uniform_real() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }

    double normal(double mean, double stddev) {
        return std::normal_distribution<double>(mean, stddev)(engine_);
    }

    bool bernoulli(double p) { return std::bernoulli_distribution(p)(engine_); }

    std::mt19937_64& engine() { return engine_; }

private:
    std::mt19937_64 engine_;
};

}  // namespace hefraud
