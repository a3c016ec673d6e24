// Copyright (C) 2026 The blockquant authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <string>

#include "blockquant/model_zoo.hpp"
#include "blockquant/quantizer.hpp"
#include "blockquant/tensor.hpp"

namespace bq {

// Binary containers. All integers are little-endian u64 unless noted and
// all reals are little-endian IEEE binary64.
//
// Tensor "BQTN1": magic, rank, dims[rank], data.
//
// QTensor "BQQT1": magic, rank, dims[rank], then the format descriptor
// (u8 kind, u8 implicit bit, u8 saturating, i32 exponent bits, i32
// mantissa bits, i32 bias, i32 format mantissa bits, i32 shared bits, u64
// block rows, u64 block cols), f64 fixed-point scale, u64 shared count,
// u64 payload count. The body holds the shared fields packed at
// shared_field_bits() each, then the payloads packed at element_bits()
// each, both LSB-first and padded to a byte boundary. A payload is packed
// as sign | exponent | mantissa with the sign in the top bit; fields a
// kind does not use are omitted. Identity tensors store binary64 values.
//
// Model "BQTM1": magic, d_model, d_ff, heads, layers, vocab, seq_len,
// seed, then weights in declaration order: embed, pos, for each layer
// ln1_gain, ln1_bias, wq, wk, wv, wo, bo, ln2_gain, ln2_bias, w1, b1, w2,
// b2, and finally unembed.

std::string encode_tensor(const Tensor& t);
Tensor decode_tensor(const std::string& bytes);

std::string encode_qtensor(const QTensor& q);
QTensor decode_qtensor(const std::string& bytes);

std::string encode_model(const ToyModel& m);
ToyModel decode_model(const std::string& bytes);

/// Comma-separated rows of numbers; every row must have the same length.
Tensor parse_csv_tensor(const std::string& text);

/// Whole-file helpers; throw ConfigError when the file cannot be read or
/// written.
std::string read_file(const std::string& path);
void write_file_atomic(const std::string& path, const std::string& bytes);

/// Reads a BQTN1 file, or CSV when the path ends in ".csv".
Tensor load_tensor(const std::string& path);

}  // namespace bq
