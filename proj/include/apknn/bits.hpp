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

#include <bit>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace apknn {

/// Read-only view of a packed bit vector. Dimension i lives in word i/64 at
/// bit i%64.
struct BitView {
    std::span<const std::uint64_t> words;
    std::size_t dims = 0;

    bool operator[](std::size_t i) const { return (words[i >> 6] >> (i & 63)) & 1u; }
    std::size_t size() const { return dims; }
};

inline std::size_t words_for(std::size_t dims) { return (dims + 63) / 64; }

class BitVector {
  public:
    BitVector() = default;
    explicit BitVector(std::size_t dims) : dims_(dims), words_(words_for(dims), 0) {}
    explicit BitVector(BitView v) : dims_(v.dims), words_(v.words.begin(), v.words.end()) {}

    /// Parses a string of '0'/'1' characters; dimension 0 is the first character.
    static BitVector from_string(std::string_view s) {
        BitVector v(s.size());
        for (std::size_t i = 0; i < s.size(); ++i) {
            if (s[i] == '1') {
                v.set(i, true);
            } else if (s[i] != '0') {
                throw std::invalid_argument("bit string contains a character other than '0' or '1'");
            }
        }
        return v;
    }

    static BitVector from_bits(std::initializer_list<int> bits) {
        BitVector v(bits.size());
        std::size_t i = 0;
        for (int b : bits) v.set(i++, b != 0);
        return v;
    }

    template <class Rng>
    static BitVector random(std::size_t dims, Rng& rng) {
        BitVector v(dims);
        for (auto& w : v.words_) w = rng();
        v.trim();
        return v;
    }

    std::size_t size() const { return dims_; }
    bool get(std::size_t i) const { return (words_[i >> 6] >> (i & 63)) & 1u; }
    bool operator[](std::size_t i) const { return get(i); }
    void set(std::size_t i, bool value) {
        const std::uint64_t mask = std::uint64_t{1} << (i & 63);
        if (value) {
            words_[i >> 6] |= mask;
        } else {
            words_[i >> 6] &= ~mask;
        }
    }

    std::span<const std::uint64_t> words() const { return words_; }
    BitView view() const { return {words_, dims_}; }
    operator BitView() const { return view(); }

    std::string to_string() const {
        std::string s(dims_, '0');
        for (std::size_t i = 0; i < dims_; ++i)
            if (get(i)) s[i] = '1';
        return s;
    }

    bool operator==(const BitVector&) const = default;

  private:
    // Keeps bits beyond dims_ zero so word-wise popcounts stay exact.
    void trim() {
        if (dims_ % 64 != 0 && !words_.empty()) words_.back() &= (std::uint64_t{1} << (dims_ % 64)) - 1;
    }

    std::size_t dims_ = 0;
    std::vector<std::uint64_t> words_;
};

/// Dense row-major matrix of packed bit rows sharing one dimensionality.
class BitMatrix {
  public:
    BitMatrix() = default;
    explicit BitMatrix(std::size_t dims) : dims_(dims), stride_(words_for(dims)) {}

    std::size_t rows() const { return rows_; }
    std::size_t dims() const { return dims_; }
    bool empty() const { return rows_ == 0; }

    BitView row(std::size_t r) const { return {std::span(words_).subspan(r * stride_, stride_), dims_}; }
    BitView operator[](std::size_t r) const { return row(r); }

    void push_back(BitView v) {
        if (v.dims != dims_) throw std::invalid_argument("row dimensionality does not match matrix");
        words_.insert(words_.end(), v.words.begin(), v.words.end());
        ++rows_;
    }

    void reserve(std::size_t n) { words_.reserve(n * stride_); }

    bool operator==(const BitMatrix&) const = default;

    template <class Rng>
    static BitMatrix random(std::size_t n, std::size_t dims, Rng& rng) {
        BitMatrix m(dims);
        m.reserve(n);
        for (std::size_t i = 0; i < n; ++i) m.push_back(BitVector::random(dims, rng));
        return m;
    }

  private:
    std::size_t dims_ = 0;
    std::size_t stride_ = 0;
    std::size_t rows_ = 0;
    std::vector<std::uint64_t> words_;
};

/// Number of differing dimensions between two equally sized vectors.
inline std::uint32_t hamming(BitView a, BitView b) {
    if (a.dims != b.dims) throw std::invalid_argument("hamming: length mismatch");
    std::uint32_t dist = 0;
    for (std::size_t w = 0; w < a.words.size(); ++w) dist += std::popcount(a.words[w] ^ b.words[w]);
    return dist;
}

}  // namespace apknn
