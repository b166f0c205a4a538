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
#include <random>

#include <gtest/gtest.h>

#include "apknn/bits.hpp"

using apknn::BitMatrix;
using apknn::BitVector;
using apknn::hamming;

TEST(BitVector, StringRoundTrip) {
    const auto v = BitVector::from_string("1011001");
    EXPECT_EQ(v.size(), 7u);
    EXPECT_TRUE(v[0]);
    EXPECT_FALSE(v[1]);
    EXPECT_EQ(v.to_string(), "1011001");
    EXPECT_THROW(BitVector::from_string("10x"), std::invalid_argument);
}

TEST(BitVector, RandomTrimsTail) {
    std::mt19937_64 rng(7);
    for (std::size_t d : {1u, 63u, 64u, 65u, 130u}) {
        const auto v = BitVector::random(d, rng);
        BitVector w(d);
        for (std::size_t i = 0; i < d; ++i) w.set(i, v[i]);
        EXPECT_EQ(v, w) << d;
    }
}

TEST(Hamming, HandComputed) {
    EXPECT_EQ(hamming(BitVector::from_bits({1, 0, 1, 1}), BitVector::from_bits({1, 0, 0, 1})), 1u);
    const auto x = BitVector::from_string("110100111");
    EXPECT_EQ(hamming(x, x), 0u);
    EXPECT_THROW(hamming(BitVector(3), BitVector(4)), std::invalid_argument);
}

TEST(Hamming, MetricOnRandomTriples) {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 500; ++trial) {
        const std::size_t d = 1 + rng() % 300;
        const auto a = BitVector::random(d, rng), b = BitVector::random(d, rng), c = BitVector::random(d, rng);
        EXPECT_EQ(hamming(a, b), hamming(b, a));
        EXPECT_GE(hamming(a, b) + hamming(b, c), hamming(a, c));
        std::uint32_t naive = 0;
        for (std::size_t i = 0; i < d; ++i) naive += a[i] != b[i];
        EXPECT_EQ(hamming(a, b), naive);
    }
}

TEST(BitMatrix, RowsAreViews) {
    BitMatrix m(70);
    auto v = BitVector(70);
    v.set(69, true);
    m.push_back(BitVector(70));
    m.push_back(v);
    EXPECT_EQ(m.rows(), 2u);
    EXPECT_TRUE(m.row(1)[69]);
    EXPECT_FALSE(m.row(0)[69]);
    EXPECT_THROW(m.push_back(BitVector(3)), std::invalid_argument);
}
