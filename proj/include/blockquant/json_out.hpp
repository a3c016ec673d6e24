// Copyright (C) 2026 The blockquant authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace bq {

/// Shortest decimal text that reads back to the same double. Non-finite values become "inf", "-inf" or "nan".
std::string format_real(double v);

/// Real rounded to one decimal place, for human-facing tables.
std::string format_one_decimal(double v);

/// Streaming JSON writer producing compact, deterministic text. Keys are
/// emitted in call order. Non-finite reals are written as strings.
class JsonWriter {
public:
    JsonWriter& begin_object();
    JsonWriter& end_object();
    JsonWriter& begin_array();
    JsonWriter& end_array();
    JsonWriter& key(std::string_view k);
    JsonWriter& value(double v);
    JsonWriter& value(std::int64_t v);
    JsonWriter& value(std::uint64_t v);
    JsonWriter& value(int v) { return value(static_cast<std::int64_t>(v)); }
    JsonWriter& value(bool v);
    JsonWriter& value(std::string_view v);
    JsonWriter& value(const char* v) { return value(std::string_view(v)); }
    /// Inserts already-serialised JSON.
    JsonWriter& raw(std::string_view json);
    JsonWriter& null();

    const std::string& str() const { return out_; }

private:
    void separator();
    std::string out_;
    std::vector<bool> first_;
    bool after_key_ = false;
};

std::string json_escape(std::string_view s);

}  // namespace bq
