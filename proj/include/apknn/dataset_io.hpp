/*
 * Copyright 2026 The apknn Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

#include <cstdint>
#include <fstream>
#include <iterator>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "apknn/bits.hpp"

namespace apknn::io {

inline constexpr char kMagic[4] = {'A', 'P', 'K', 'N'};
inline constexpr std::uint16_t kDatasetVersion = 1;
inline constexpr std::size_t kHeaderBytes = 4 + 2 + 8 + 4;

/// Malformed dataset; `offset` is the byte position of the first bad byte.
class FormatError : public std::runtime_error {
  public:
    FormatError(const std::string& what, std::uint64_t offset)
        : std::runtime_error(what + " at byte " + std::to_string(offset)), offset_(offset) {}
    std::uint64_t offset() const { return offset_; }

  private:
    std::uint64_t offset_;
};

enum class DatasetFormat { Binary, Text };

namespace detail {

template <class T>
T read_le(std::span<const std::uint8_t> bytes, std::size_t at) {
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= T(bytes[at + i]) << (8 * i);
    return v;
}

template <class T>
void write_le(std::ostream& os, T v) {
    for (std::size_t i = 0; i < sizeof(T); ++i) os.put(static_cast<char>((v >> (8 * i)) & 0xff));
}

}  // namespace detail

inline bool looks_binary(std::span<const std::uint8_t> bytes) {
    return bytes.size() >= 4 && std::equal(kMagic, kMagic + 4, bytes.begin(), [](char a, std::uint8_t b) {
               return static_cast<std::uint8_t>(a) == b;
           });
}

inline BitMatrix parse_binary(std::span<const std::uint8_t> bytes) {
    if (!looks_binary(bytes)) {
        std::size_t bad = 0;
        while (bad < 4 && bad < bytes.size() && bytes[bad] == static_cast<std::uint8_t>(kMagic[bad])) ++bad;
        throw FormatError("missing APKN magic", bad);
    }
    if (bytes.size() < kHeaderBytes) throw FormatError("truncated header", bytes.size());
    const auto version = detail::read_le<std::uint16_t>(bytes, 4);
    if (version != kDatasetVersion) throw FormatError("unsupported dataset version " + std::to_string(version), 4);
    const auto n = detail::read_le<std::uint64_t>(bytes, 6);
    const auto d = detail::read_le<std::uint32_t>(bytes, 14);
    if (d == 0 && n > 0) throw FormatError("zero dimensionality", 14);
    const std::uint64_t stride = (std::uint64_t{d} + 7) / 8;
    const std::uint64_t body = bytes.size() - kHeaderBytes;
    if (stride > 0 && body / stride < n)
        throw FormatError("file ends inside row " + std::to_string(body / stride), bytes.size());
    if (body != n * stride) throw FormatError("trailing data after " + std::to_string(n) + " rows", kHeaderBytes + n * stride);

    BitMatrix m(d);
    m.reserve(n);
    BitVector row(d);
    for (std::uint64_t r = 0; r < n; ++r) {
        const std::size_t base = kHeaderBytes + r * stride;
        for (std::uint32_t i = 0; i < d; ++i) row.set(i, (bytes[base + i / 8] >> (i % 8)) & 1u);
        if (d % 8 != 0 && (bytes[base + stride - 1] >> (d % 8)) != 0)
            throw FormatError("padding bits set in row " + std::to_string(r), base + stride - 1);
        m.push_back(row);
    }
    return m;
}

inline BitMatrix parse_text(std::string_view text) {
    BitMatrix m;
    bool have_dims = false;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        std::string_view line = text.substr(pos, end - pos);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (!line.empty()) {
            for (std::size_t i = 0; i < line.size(); ++i)
                if (line[i] != '0' && line[i] != '1') throw FormatError("expected '0' or '1'", pos + i);
            if (!have_dims) {
                m = BitMatrix(line.size());
                have_dims = true;
            } else if (line.size() != m.dims()) {
                throw FormatError("row of length " + std::to_string(line.size()) + " in a dataset of d = " +
                                      std::to_string(m.dims()),
                                  pos + std::min(line.size(), m.dims()));
            }
            m.push_back(BitVector::from_string(line));
        }
        pos = end + 1;
    }
    return m;
}

inline std::vector<std::uint8_t> read_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open '" + path + "'");
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// Reads either format, telling them apart by the magic.
inline BitMatrix read_dataset(const std::string& path) {
    const auto bytes = read_bytes(path);
    if (looks_binary(bytes)) return parse_binary(bytes);
    return parse_text(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

inline void write_binary(std::ostream& os, const BitMatrix& m) {
    os.write(kMagic, 4);
    detail::write_le<std::uint16_t>(os, kDatasetVersion);
    detail::write_le<std::uint64_t>(os, m.rows());
    detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(m.dims()));
    const std::size_t stride = (m.dims() + 7) / 8;
    std::vector<std::uint8_t> row(stride);
    for (std::size_t r = 0; r < m.rows(); ++r) {
        std::fill(row.begin(), row.end(), 0);
        const auto v = m.row(r);
        for (std::size_t i = 0; i < m.dims(); ++i)
            if (v[i]) row[i / 8] |= static_cast<std::uint8_t>(1u << (i % 8));
        os.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(stride));
    }
}

inline void write_text(std::ostream& os, const BitMatrix& m) {
    for (std::size_t r = 0; r < m.rows(); ++r) os << BitVector(m.row(r)).to_string() << '\n';
}

inline void write_dataset(const std::string& path, const BitMatrix& m, DatasetFormat f) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    if (f == DatasetFormat::Binary) write_binary(out, m);
    else write_text(out, m);
}

}  // namespace apknn::io
