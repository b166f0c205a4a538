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
#include <algorithm>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "apknn/oracle.hpp"
#include "apknn/pipeline.hpp"
#include "apknn/stream_codec.hpp"

using namespace apknn;
using namespace apknn::codec;
using compiler::CompileOptions;
using compiler::DatasetPartition;

namespace {

BitMatrix matrix(std::initializer_list<const char*> rows) {
    BitMatrix m(std::string_view(*rows.begin()).size());
    for (auto r : rows) m.push_back(BitVector::from_string(r));
    return m;
}

KnnResult random_partial(std::mt19937_64& rng, std::uint32_t first_id, std::size_t n) {
    KnnResult r{0, {}};
    for (std::size_t i = 0; i < n; ++i) r.neighbors.push_back({first_id + std::uint32_t(i), std::uint32_t(rng() % 8)});
    std::sort(r.neighbors.begin(), r.neighbors.end());
    return r;
}

}  // namespace

TEST(Encode, PlainFrameLayout) {
    const auto s = encode(QueryBatch::from_matrix(matrix({"1001"})), 4, 0, StreamMode::Plain);
    const std::vector<Symbol> expected = {0x80, 1, 0, 0, 1, 0x82, 0x82, 0x82, 0x82, 0x82, 0x81};
    EXPECT_EQ(s.symbols, expected);
    EXPECT_EQ(s.frame_length, 11u);
    ASSERT_EQ(s.frames.size(), 1u);
    EXPECT_EQ(s.frames[0].start, 0u);
}

TEST(Encode, FrameLengthFormula) {
    std::mt19937_64 rng(1);
    for (std::uint32_t d : {1u, 4u, 33u, 64u})
        for (std::uint32_t L : {0u, 1u, 3u}) {
            const auto s = encode(QueryBatch::from_matrix(BitMatrix::random(3, d, rng)), d, L, StreamMode::Plain);
            EXPECT_EQ(s.frame_length, 2 * d + L + 3);
            EXPECT_EQ(s.symbols.size(), 3u * s.frame_length);
            EXPECT_EQ(s.frames[2].start, 2u * s.frame_length);
        }
}

TEST(Encode, Errors) {
    QueryBatch empty;
    empty.queries = BitMatrix(4);
    EXPECT_THROW(encode(empty, 4, 0, StreamMode::Plain), std::invalid_argument);
    EXPECT_THROW(encode(QueryBatch::from_matrix(matrix({"101"})), 4, 0, StreamMode::Plain), std::invalid_argument);
    std::mt19937_64 rng(2);
    const auto eight = QueryBatch::from_matrix(BitMatrix::random(8, 8, rng));
    EXPECT_THROW(encode_frame(eight, 8, 0, StreamMode::Multiplexed), std::invalid_argument);
}

TEST(Encode, MultiplexedPacksSevenQueriesPerFrame) {
    std::mt19937_64 rng(3);
    const auto qs = BitMatrix::random(7, 64, rng);
    const auto s = encode(QueryBatch::from_matrix(qs), 64, 2, StreamMode::Multiplexed);
    ASSERT_EQ(s.frames.size(), 1u);
    EXPECT_EQ(s.frames[0].query_ids.size(), 7u);
    for (std::uint32_t i = 0; i < 64; ++i)
        for (unsigned b = 0; b < 7; ++b) EXPECT_EQ((s.symbols[1 + i] >> b) & 1u, unsigned(qs.row(b)[i]));
    const auto nine = encode(QueryBatch::from_matrix(BitMatrix::random(9, 64, rng)), 64, 2, StreamMode::Multiplexed);
    EXPECT_EQ(nine.frames.size(), 2u);
    EXPECT_EQ(nine.frames[1].query_ids.size(), 2u);
}

TEST(Encode, CounterIncrementPacksSevenDimensionsPerSymbol) {
    std::mt19937_64 rng(4);
    const auto qs = BitMatrix::random(1, 20, rng);
    const auto s = encode(QueryBatch::from_matrix(qs), 20, 0, StreamMode::CounterIncrement);
    EXPECT_EQ(s.frame_length, 1u + 3 + 20 + 1 + 1);
    for (std::uint32_t i = 0; i < 20; ++i) EXPECT_EQ((s.symbols[1 + i / 7] >> (i % 7)) & 1u, unsigned(qs.row(0)[i]));
    EXPECT_EQ(s.symbols[4], StreamLayout::kFill);
}

TEST(Decode, NearestVectorFirst) {
    const auto data = matrix({"1011", "0000"});
    const auto images = compile_dataset(data, {});
    const auto r = run_query(images, QueryBatch::from_matrix(matrix({"1001"})), 1);
    ASSERT_EQ(r.size(), 1u);
    EXPECT_EQ(r[0].neighbors, (std::vector<Neighbor>{{0, 1}}));
    const auto all = run_query(images, QueryBatch::from_matrix(matrix({"1001"})), 10);
    EXPECT_EQ(all[0].neighbors, (std::vector<Neighbor>{{0, 1}, {1, 2}}));
}

TEST(Decode, MatchesOracleOnRandomInstance) {
    std::mt19937_64 rng(5);
    const auto data = BitMatrix::random(256, 64, rng);
    const auto qs = QueryBatch::from_matrix(BitMatrix::random(4, 64, rng));
    const auto images = compile_dataset(data, {});
    EXPECT_EQ(run_query(images, qs, 10), oracle::knn_exact(data, qs, 10));
}

TEST(Decode, RejectsForeignEvents) {
    const auto img = compiler::compile(DatasetPartition::from_rows(matrix({"1011"}), 0, 1), {});
    const auto stream = encode(QueryBatch::from_matrix(matrix({"1001"})), img.layout);
    const std::vector<fabric::ReportEvent> unknown = {{5, img.layout.calibration_base}};
    EXPECT_THROW(decode(unknown, stream, img.layout, 1), std::invalid_argument);
    const std::vector<fabric::ReportEvent> early = {{0, img.layout.calibration_base - 1}};
    EXPECT_THROW(decode(early, stream, img.layout, 1), std::invalid_argument);
    const std::vector<fabric::ReportEvent> beyond = {{0, 1000}};
    EXPECT_THROW(decode(beyond, stream, img.layout, 1), std::invalid_argument);
    const std::vector<fabric::ReportEvent> twice = {{0, img.layout.calibration_base}, {0, img.layout.calibration_base + 1}};
    EXPECT_THROW(decode(twice, stream, img.layout, 1), std::invalid_argument);
}

TEST(Decode, FramesAreIsolated) {
    std::mt19937_64 rng(6);
    const auto data = BitMatrix::random(20, 16, rng);
    const auto images = compile_dataset(data, {});
    const auto middle = BitVector::random(16, rng);
    for (int trial = 0; trial < 5; ++trial) {
        BitMatrix qs(16);
        qs.push_back(BitVector::random(16, rng));
        qs.push_back(middle);
        qs.push_back(BitVector::random(16, rng));
        const auto r = run_query(images, QueryBatch::from_matrix(qs), 5);
        EXPECT_EQ(r[1].neighbors, oracle::knn_exact(data, middle, 5).neighbors);
    }
}

TEST(Merge, DisjointPartitions) {
    const KnnResult a{0, {{3, 1}, {4, 5}}};
    const KnnResult b{0, {{1, 2}, {2, 9}}};
    EXPECT_EQ(merge_partitions(a, b, 2).neighbors, (std::vector<Neighbor>{{3, 1}, {1, 2}}));
    const KnnResult one[] = {a};
    EXPECT_EQ(merge_partitions(one, 5), a);
    EXPECT_THROW(merge_partitions(a, a, 2), std::invalid_argument);
}

TEST(Merge, AssociativeAndCommutative) {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t k = 1 + rng() % 6;
        auto trunc = [&](KnnResult r) {
            if (r.neighbors.size() > k) r.neighbors.resize(k);
            return r;
        };
        const auto a = trunc(random_partial(rng, 0, 1 + rng() % 6));
        const auto b = trunc(random_partial(rng, 100, 1 + rng() % 6));
        const auto c = trunc(random_partial(rng, 200, 1 + rng() % 6));
        EXPECT_EQ(merge_partitions(merge_partitions(a, b, k), c, k), merge_partitions(a, merge_partitions(b, c, k), k));
        EXPECT_EQ(merge_partitions(a, b, k), merge_partitions(b, a, k));
    }
}

TEST(Results, JsonLinesRoundTrip) {
    const std::vector<KnnResult> rs = {{3, {{1, 0}, {9, 4}}}, {4, {}}};
    std::stringstream ss;
    write_results(ss, rs);
    EXPECT_EQ(ss.str().substr(0, ss.str().find('\n')),
              R"({"neighbors":[{"distance":0,"id":1},{"distance":4,"id":9}],"query_id":3})");
    EXPECT_EQ(read_results(ss), rs);
}

TEST(Hex, RoundTrip) {
    const std::vector<Symbol> s = {0x80, 0x01, 0x00, 0x82, 0x81};
    EXPECT_EQ(to_hex(s), "8001008281");
    EXPECT_EQ(from_hex("80 01\n0082 81"), s);
    EXPECT_EQ(to_hex(s, 5), "8001008281\n");
    EXPECT_THROW(from_hex("8"), std::invalid_argument);
    EXPECT_THROW(from_hex("zz"), std::invalid_argument);
}
