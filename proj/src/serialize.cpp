// Copyright (C) 2026 The blockquant authors
// SPDX-License-Identifier: Apache-2.0
//

#include "blockquant/serialize.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "blockquant/errors.hpp"

namespace bq {

namespace {

constexpr std::size_t kMaxElements = std::size_t{1} << 32;

class Writer {
public:
    void raw(std::string_view s) { out_.append(s); }
    void u8(std::uint8_t v) { out_.push_back(static_cast<char>(v)); }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
    }
    void i32(std::int32_t v) {
        const auto u = static_cast<std::uint32_t>(v);
        for (int i = 0; i < 4; ++i) out_.push_back(static_cast<char>((u >> (8 * i)) & 0xFF));
    }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void f64s(const std::vector<double>& v) {
        for (double x : v) f64(x);
    }
    void tensor_data(const Tensor& t) { f64s(t.data()); }
    std::string take() { return std::move(out_); }

private:
    std::string out_;
};

class Reader {
public:
    explicit Reader(const std::string& bytes) : bytes_(bytes) {}
    void expect_magic(std::string_view magic) {
        if (bytes_.compare(0, magic.size(), magic) != 0) {
            throw FormatError("bad magic: expected " + std::string(magic));
        }
        pos_ = magic.size();
    }
    std::uint8_t u8() {
        need(1);
        return static_cast<std::uint8_t>(bytes_[pos_++]);
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= std::uint64_t{static_cast<std::uint8_t>(bytes_[pos_ + i])} << (8 * i);
        pos_ += 8;
        return v;
    }
    std::int32_t i32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= std::uint32_t{static_cast<std::uint8_t>(bytes_[pos_ + i])} << (8 * i);
        pos_ += 4;
        return static_cast<std::int32_t>(v);
    }
    double f64() { return std::bit_cast<double>(u64()); }
    std::vector<double> f64s(std::size_t n) {
        need(n * 8);
        std::vector<double> v(n);
        for (double& x : v) x = f64();
        return v;
    }
    std::size_t size_field(const char* what) {
        const std::uint64_t v = u64();
        if (v > kMaxElements) throw FormatError(std::string("implausible ") + what);
        return static_cast<std::size_t>(v);
    }
    std::string_view bytes(std::size_t n) {
        need(n);
        std::string_view s(bytes_.data() + pos_, n);
        pos_ += n;
        return s;
    }
    void finish() const {
        if (pos_ != bytes_.size()) throw FormatError("trailing bytes after container");
    }

private:
    void need(std::size_t n) const {
        if (bytes_.size() - pos_ < n) throw FormatError("truncated container");
    }
    const std::string& bytes_;
    std::size_t pos_ = 0;
};

class BitPacker {
public:
    void put(std::uint64_t value, int bits) {
        for (int i = 0; i < bits; ++i) {
            if (fill_ == 0) out_.push_back(0);
            if ((value >> i) & 1u) out_.back() = static_cast<char>(out_.back() | (1 << fill_));
            fill_ = (fill_ + 1) % 8;
        }
    }
    std::string take() { return std::move(out_); }

private:
    std::string out_;
    int fill_ = 0;
};

class BitUnpacker {
public:
    explicit BitUnpacker(std::string_view in) : in_(in) {}
    std::uint64_t get(int bits) {
        std::uint64_t v = 0;
        for (int i = 0; i < bits; ++i, ++bit_) {
            const std::size_t byte = bit_ / 8;
            if (byte >= in_.size()) throw FormatError("truncated bit stream");
            if ((static_cast<std::uint8_t>(in_[byte]) >> (bit_ % 8)) & 1u) v |= std::uint64_t{1} << i;
        }
        return v;
    }

private:
    std::string_view in_;
    std::size_t bit_ = 0;
};

std::size_t packed_bytes(std::size_t count, int bits) {
    return (count * static_cast<std::size_t>(bits) + 7) / 8;
}

void write_shape(Writer& w, const std::vector<std::size_t>& shape) {
    w.u64(shape.size());
    for (std::size_t s : shape) w.u64(s);
}

std::vector<std::size_t> read_shape(Reader& r, std::size_t& elements) {
    const std::size_t rank = r.size_field("rank");
    if (rank < 1 || rank > 3) throw FormatError("tensor rank must be 1..3");
    std::vector<std::size_t> shape(rank);
    elements = 1;
    for (std::size_t& s : shape) {
        s = r.size_field("dimension");
        if (s == 0) throw FormatError("zero-sized dimension");
        elements *= s;
        if (elements > kMaxElements) throw FormatError("tensor too large");
    }
    return shape;
}

// Field widths of one payload: (exponent bits, mantissa bits).
std::pair<int, int> payload_fields(const BlockFormat& f) {
    switch (f.kind) {
        case BlockKind::FixedPoint:
        case BlockKind::BFP: return {0, f.mantissa_bits};
        case BlockKind::BL: return {f.element.exponent_bits, 0};
        case BlockKind::MiniFloat:
        case BlockKind::DMF:
        case BlockKind::BM: return {f.element.exponent_bits, f.element.mantissa_bits};
        case BlockKind::Identity: break;
    }
    return {0, 0};
}

Tensor read_matrix(Reader& r, std::size_t rows, std::size_t cols) {
    return Tensor({rows, cols}, r.f64s(rows * cols));
}

}  // namespace

std::string encode_tensor(const Tensor& t) {
    Writer w;
    w.raw("BQTN1");
    write_shape(w, t.shape());
    w.tensor_data(t);
    return w.take();
}

Tensor decode_tensor(const std::string& bytes) {
    Reader r(bytes);
    r.expect_magic("BQTN1");
    std::size_t n = 0;
    auto shape = read_shape(r, n);
    Tensor t(std::move(shape), r.f64s(n));
    r.finish();
    return t;
}

std::string encode_qtensor(const QTensor& q) {
    validate_qtensor(q);
    const BlockFormat& f = q.format;
    Writer w;
    w.raw("BQQT1");
    write_shape(w, q.shape);
    w.u8(static_cast<std::uint8_t>(f.kind));
    w.u8(f.element.implicit_leading_bit ? 1 : 0);
    w.u8(f.element.saturating ? 1 : 0);
    w.i32(f.element.exponent_bits);
    w.i32(f.element.mantissa_bits);
    w.i32(f.element.bias);
    w.i32(f.mantissa_bits);
    w.i32(f.shared_bits);
    w.u64(q.block.rows);
    w.u64(q.block.cols);
    w.f64(q.scale);
    w.u64(q.shared.size());
    w.u64(f.kind == BlockKind::Identity ? q.passthrough.size() : q.payload.size());
    if (f.kind == BlockKind::Identity) {
        w.f64s(q.passthrough);
        return w.take();
    }
    BitPacker shared;
    for (std::uint32_t s : q.shared) shared.put(s, f.shared_field_bits());
    w.raw(shared.take());
    const auto [eb, mb] = payload_fields(f);
    BitPacker payload;
    for (const BitPattern& p : q.payload) {
        payload.put(p.mantissa, mb);
        payload.put(p.exponent, eb);
        payload.put(p.sign, 1);
    }
    w.raw(payload.take());
    return w.take();
}

QTensor decode_qtensor(const std::string& bytes) {
    Reader r(bytes);
    r.expect_magic("BQQT1");
    QTensor q;
    std::size_t n = 0;
    q.shape = read_shape(r, n);
    const std::uint8_t kind = r.u8();
    if (kind > static_cast<std::uint8_t>(BlockKind::BL)) throw FormatError("unknown format kind");
    BlockFormat& f = q.format;
    f.kind = static_cast<BlockKind>(kind);
    f.element.implicit_leading_bit = r.u8() != 0;
    f.element.saturating = r.u8() != 0;
    f.element.exponent_bits = r.i32();
    f.element.mantissa_bits = r.i32();
    f.element.bias = r.i32();
    f.mantissa_bits = r.i32();
    f.shared_bits = r.i32();
    q.block.rows = r.size_field("block rows");
    q.block.cols = r.size_field("block cols");
    if (f.is_block_format()) f.block = q.block;
    try {
        f.validate();
    } catch (const ConfigError& e) {
        throw FormatError(std::string("bad format descriptor: ") + e.what());
    }
    q.scale = r.f64();
    const std::size_t n_shared = r.size_field("shared count");
    const std::size_t n_payload = r.size_field("payload count");
    if (n_payload != n) throw FormatError("payload count does not match shape");
    if (f.kind == BlockKind::Identity) {
        q.passthrough = r.f64s(n);
    } else {
        BitUnpacker shared(r.bytes(packed_bytes(n_shared, f.shared_field_bits())));
        for (std::size_t i = 0; i < n_shared; ++i) {
            q.shared.push_back(static_cast<std::uint32_t>(shared.get(f.shared_field_bits())));
        }
        const auto [eb, mb] = payload_fields(f);
        BitUnpacker payload(r.bytes(packed_bytes(n, eb + mb + 1)));
        q.payload.resize(n);
        for (BitPattern& p : q.payload) {
            p.mantissa = static_cast<std::uint32_t>(payload.get(mb));
            p.exponent = static_cast<std::uint32_t>(payload.get(eb));
            p.sign = static_cast<std::uint32_t>(payload.get(1));
        }
    }
    r.finish();
    validate_qtensor(q);
    return q;
}

std::string encode_model(const ToyModel& m) {
    Writer w;
    w.raw("BQTM1");
    const ModelDims& d = m.dims;
    for (std::size_t v : {d.d_model, d.d_ff, d.heads, d.layers, d.vocab, d.seq_len}) w.u64(v);
    w.u64(m.seed);
    w.tensor_data(m.embed);
    w.tensor_data(m.pos);
    for (const LayerWeights& l : m.layers) {
        w.f64s(l.ln1_gain);
        w.f64s(l.ln1_bias);
        w.tensor_data(l.wq);
        w.tensor_data(l.wk);
        w.tensor_data(l.wv);
        w.tensor_data(l.wo);
        w.f64s(l.bo);
        w.f64s(l.ln2_gain);
        w.f64s(l.ln2_bias);
        w.tensor_data(l.w1);
        w.f64s(l.b1);
        w.tensor_data(l.w2);
        w.f64s(l.b2);
    }
    w.tensor_data(m.unembed);
    return w.take();
}

ToyModel decode_model(const std::string& bytes) {
    Reader r(bytes);
    r.expect_magic("BQTM1");
    ToyModel m;
    ModelDims& d = m.dims;
    d.d_model = r.size_field("d_model");
    d.d_ff = r.size_field("d_ff");
    d.heads = r.size_field("heads");
    d.layers = r.size_field("layers");
    d.vocab = r.size_field("vocab");
    d.seq_len = r.size_field("seq_len");
    try {
        d.validate();
    } catch (const ConfigError& e) {
        throw FormatError(std::string("model header: ") + e.what());
    }
    m.seed = r.u64();
    const std::size_t dm = d.d_model, ff = d.d_ff;
    m.embed = read_matrix(r, d.vocab, dm);
    m.pos = read_matrix(r, d.seq_len, dm);
    for (std::size_t l = 0; l < d.layers; ++l) {
        LayerWeights w;
        w.ln1_gain = r.f64s(dm);
        w.ln1_bias = r.f64s(dm);
        w.wq = read_matrix(r, dm, dm);
        w.wk = read_matrix(r, dm, dm);
        w.wv = read_matrix(r, dm, dm);
        w.wo = read_matrix(r, dm, dm);
        w.bo = r.f64s(dm);
        w.ln2_gain = r.f64s(dm);
        w.ln2_bias = r.f64s(dm);
        w.w1 = read_matrix(r, dm, ff);
        w.b1 = r.f64s(ff);
        w.w2 = read_matrix(r, ff, dm);
        w.b2 = r.f64s(dm);
        m.layers.push_back(std::move(w));
    }
    m.unembed = read_matrix(r, dm, d.vocab);
    r.finish();
    if (!m.all_finite()) throw InvalidInput("model file contains non-finite weights");
    return m;
}

Tensor parse_csv_tensor(const std::string& text) {
    std::vector<double> data;
    std::size_t rows = 0, cols = 0;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        std::size_t count = 0;
        std::size_t start = 0;
        while (true) {
            const std::size_t comma = line.find(',', start);
            std::string field = line.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
            const auto b = field.find_first_not_of(" \t");
            const auto e = field.find_last_not_of(" \t");
            if (b == std::string::npos) throw FormatError("empty CSV field");
            field = field.substr(b, e - b + 1);
            double v = 0.0;
            const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
            if (ec != std::errc() || ptr != field.data() + field.size()) {
                throw FormatError("bad CSV number '" + field + "'");
            }
            data.push_back(v);
            ++count;
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
        if (rows == 0) cols = count;
        if (count != cols) throw FormatError("CSV rows have different lengths");
        ++rows;
    }
    if (rows == 0) throw FormatError("CSV tensor is empty");
    return Tensor({rows, cols}, std::move(data));
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file_atomic(const std::string& path, const std::string& bytes) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw ConfigError("cannot write '" + path + "'");
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw ConfigError("short write to '" + path + "'");
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw ConfigError("cannot move output into place: " + path);
}

Tensor load_tensor(const std::string& path) {
    const std::string bytes = read_file(path);
    if (path.size() >= 4 && path.compare(path.size() - 4, 4, ".csv") == 0) return parse_csv_tensor(bytes);
    return decode_tensor(bytes);
}

}  // namespace bq
