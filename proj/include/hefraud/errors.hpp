// Copyright (c) 2026 the hefraud authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace hefraud {

/// Base class for all library errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// An argument violates a documented precondition (key size, core count, ...).
struct ParameterError : Error {
    using Error::Error;
};

/// A value falls outside the legal domain of an operation.
struct RangeError : Error {
    using Error::Error;
};

/// Two objects belong to different keys and cannot be combined.
struct KeyMismatchError : Error {
    using Error::Error;
};

/// A required key (e.g. a rotation key for a step) is not available.
struct KeyError : Error {
    using Error::Error;
};

/// The value is not in the image of the encryption map.
struct NotACiphertextError : Error {
    using Error::Error;
};

/// A transaction lacks a feature (or feature tag) the model references.
struct MissingFeatureError : Error {
    explicit MissingFeatureError(const std::string& feature)
        : Error("missing feature: " + feature), feature_name(feature) {}
    std::string feature_name;
};

/// Malformed document; `path` locates the offending element.
struct ParseError : Error {
    ParseError(const std::string& msg, const std::string& at)
        : Error(msg + " (at " + at + ")"), path(at) {}
    std::string path;
};

/// Input file/record set does not match the expected schema.
struct SchemaError : Error {
    using Error::Error;
};

/// A data row could not be parsed; carries the 1-based line number.
struct RowError : Error {
    RowError(const std::string& msg, size_t line_no)
        : Error(msg + " (line " + std::to_string(line_no) + ")"), line(line_no) {}
    size_t line;
};

/// Too few records for the requested operation.
struct SizeError : Error {
    using Error::Error;
};

/// Training cannot proceed (single-class data, loss increase, ...).
struct TrainingError : Error {
    using Error::Error;
};

/// Training produced a non-finite loss.
struct DivergenceError : Error {
    using Error::Error;
};

/// Metric undefined for the given inputs (e.g. single-class AUC).
struct MetricError : Error {
    using Error::Error;
};

/// Tensor/vector dimensions do not line up.
struct ShapeError : Error {
    using Error::Error;
};

/// Operands belong to different encryption contexts.
struct ContextError : Error {
    using Error::Error;
};

/// Modulus chain exhausted: no level left for the operation.
struct DepthError : Error {
    using Error::Error;
};

/// More plaintext slots requested than the ring provides.
struct CapacityError : Error {
    using Error::Error;
};

/// Ciphertext scales are incompatible beyond tolerance.
struct ScaleError : Error {
    using Error::Error;
};

/// Parameter set violates the 128-bit security requirement.
struct SecurityError : Error {
    using Error::Error;
};

/// Model depth unsupported by the homomorphic evaluation path.
struct UnsupportedDepthError : Error {
    using Error::Error;
};

/// A protocol step failed or was attempted out of order; names the step.
struct ProtocolError : Error {
    ProtocolError(const std::string& step_name, const std::string& msg)
        : Error("protocol step '" + step_name + "': " + msg), step(step_name) {}
    std::string step;
};

/// Mismatched models/keys handed to a harness operation.
struct ConfigError : Error {
    using Error::Error;
};

/// Unknown name looked up in a registry.
struct RegistryError : Error {
    using Error::Error;
};

/// Filesystem-level failure.
struct IoError : Error {
    using Error::Error;
};

}  // namespace hefraud
