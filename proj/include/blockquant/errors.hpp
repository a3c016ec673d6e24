// Copyright (C) 2026 The blockquant authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <stdexcept>
#include <string>

namespace bq {

/// Base of every error raised by the library. The CLI maps subclasses to
/// exit codes (ConfigError -> 2, InvalidInput -> 3).
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
    virtual const char* kind() const noexcept { return "error"; }
};

/// Non-finite or otherwise numerically invalid input.
class InvalidInput : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "invalid_input"; }
};

/// Request outside what an operation supports (too wide to enumerate,
/// format without an area-table entry, ...).
class Unsupported : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "unsupported"; }
};

/// Malformed configuration: unknown keys, missing sites, bad dims.
class ConfigError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "config"; }
};

/// Block boundaries of two GEMM operands do not line up along the
/// reduction dimension.
class BlockAlignmentError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "block_alignment"; }
};

/// Corrupt or mismatched binary container.
class FormatError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "file_format"; }
};

}  // namespace bq
