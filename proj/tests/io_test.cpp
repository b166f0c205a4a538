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
#include <cstdio>
#include <filesystem>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "apknn/dataset_io.hpp"
#include "apknn/run_config.hpp"

using namespace apknn;
using namespace apknn::io;

namespace {

std::vector<std::uint8_t> binary_of(const BitMatrix& m) {
    std::ostringstream os;
    write_binary(os, m);
    const auto s = os.str();
    return {s.begin(), s.end()};
}

std::uint64_t offset_of(auto&& fn) {
    try {
        fn();
    } catch (const FormatError& e) {
        return e.offset();
    }
    ADD_FAILURE() << "no FormatError";
    return ~0ull;
}

}  // namespace

TEST(Binary, RoundTripOddDims) {
    std::mt19937_64 rng(1);
    for (std::size_t d : {1u, 7u, 8u, 9u, 64u, 100u}) {
        const auto m = BitMatrix::random(37, d, rng);
        EXPECT_EQ(parse_binary(binary_of(m)), m) << d;
    }
}

TEST(Binary, LayoutIsLeastSignificantFirst) {
    BitMatrix m(10);
    m.push_back(BitVector::from_string("1000000001"));
    const auto b = binary_of(m);
    ASSERT_EQ(b.size(), kHeaderBytes + 2);
    EXPECT_EQ(std::string(b.begin(), b.begin() + 4), "APKN");
    EXPECT_EQ(b[4], 1);
    EXPECT_EQ(b[5], 0);
    EXPECT_EQ(b[6], 1);   // n, little-endian
    EXPECT_EQ(b[14], 10); // d
    EXPECT_EQ(b[18], 0x01);
    EXPECT_EQ(b[19], 0x02);
}

TEST(Binary, EmptyDataset) {
    BitMatrix m(16);
    EXPECT_EQ(parse_binary(binary_of(m)).rows(), 0u);
}

TEST(Binary, ErrorOffsets) {
    std::mt19937_64 rng(2);
    const auto m = BitMatrix::random(4, 12, rng);
    auto good = binary_of(m);

    auto bad_magic = good;
    bad_magic[2] = 'X';
    EXPECT_EQ(offset_of([&] { parse_binary(bad_magic); }), 2u);

    auto bad_version = good;
    bad_version[4] = 9;
    EXPECT_EQ(offset_of([&] { parse_binary(bad_version); }), 4u);

    std::vector<std::uint8_t> short_header(good.begin(), good.begin() + 10);
    EXPECT_EQ(offset_of([&] { parse_binary(short_header); }), 10u);

    auto truncated = good;
    truncated.pop_back();
    EXPECT_EQ(offset_of([&] { parse_binary(truncated); }), truncated.size());

    auto trailing = good;
    trailing.push_back(0);
    EXPECT_EQ(offset_of([&] { parse_binary(trailing); }), good.size());

    auto padding = good;
    padding[kHeaderBytes + 2 * 2 + 1] |= 0x80;  // row 2, bit 15 of a 12-bit row
    EXPECT_EQ(offset_of([&] { parse_binary(padding); }), kHeaderBytes + 2 * 2 + 1);
}

TEST(Text, RoundTrip) {
    std::mt19937_64 rng(3);
    const auto m = BitMatrix::random(20, 33, rng);
    std::ostringstream os;
    write_text(os, m);
    EXPECT_EQ(parse_text(os.str()), m);
}

TEST(Text, CrlfAndBlankLines) {
    const auto m = parse_text("0101\r\n\n1111\r\n");
    ASSERT_EQ(m.rows(), 2u);
    EXPECT_EQ(BitVector(m.row(1)).to_string(), "1111");
}

TEST(Text, ErrorOffsets) {
    EXPECT_EQ(offset_of([] { parse_text("0101\n01x1\n"); }), 7u);
    EXPECT_EQ(offset_of([] { parse_text("0101\n011\n"); }), 8u);
    EXPECT_EQ(offset_of([] { parse_text("0101\n01011\n"); }), 9u);
}

TEST(Files, AutoDetectFormat) {
    const auto dir = std::filesystem::temp_directory_path() / "apknn_io_test";
    std::filesystem::create_directories(dir);
    std::mt19937_64 rng(4);
    const auto m = BitMatrix::random(9, 20, rng);
    write_dataset((dir / "a.bin").string(), m, DatasetFormat::Binary);
    write_dataset((dir / "a.txt").string(), m, DatasetFormat::Text);
    EXPECT_EQ(read_dataset((dir / "a.bin").string()), m);
    EXPECT_EQ(read_dataset((dir / "a.txt").string()), m);
    EXPECT_THROW(read_dataset((dir / "missing").string()), std::runtime_error);
    std::filesystem::remove_all(dir);
}

TEST(Config, DefaultsMatchReferenceConstants) {
    const RunConfig c = config_from_json(nlohmann::json::object());
    EXPECT_EQ(c.fabric.stes_per_block, 256u);
    EXPECT_DOUBLE_EQ(c.platform.reconfig_gen1_s, 45e-3);
    ASSERT_EQ(c.workloads.size(), 3u);
    EXPECT_EQ(c.workloads[2].capacity, 512u);
    EXPECT_EQ(c.experiment.trials, 100u);
}

TEST(Config, Overrides) {
    const auto c = config_from_json(nlohmann::json::parse(R"({
        "fabric": {"counters_per_block": 8},
        "platform": {"reconfig_gen2_s": 0.001},
        "capacity": {"vectors": {"64": 2048}, "rho": 1.5},
        "workloads": [{"name": "W", "d": 64, "k": 3}],
        "seeds": {"experiment": 7},
        "experiment": {"queries": 16}
    })"));
    EXPECT_EQ(c.fabric.counters_per_block, 8u);
    EXPECT_DOUBLE_EQ(c.platform.reconfig_gen2_s, 0.001);
    EXPECT_DOUBLE_EQ(c.capacity.rho, 1.5);
    ASSERT_EQ(c.workloads.size(), 1u);
    EXPECT_EQ(c.workloads[0].capacity, 2048u);
    EXPECT_EQ(c.seeds.experiment, 7u);
    EXPECT_EQ(c.experiment.queries, 16u);
}

TEST(Config, UnknownKeysRejected) {
    for (const char* doc : {R"({"fabrik": {}})", R"({"fabric": {"stes": 1}})", R"({"platform": {"watts": 3}})",
                            R"({"workloads": [{"name": "W", "d": 64, "k": 1, "m": 2}]})",
                            R"({"seeds": {"foo": 1}})"})
        EXPECT_THROW(config_from_json(nlohmann::json::parse(doc)), std::invalid_argument) << doc;
}

TEST(Config, InvalidValuesRejected) {
    EXPECT_THROW(config_from_json(nlohmann::json::parse(R"({"fabric": {"stes_per_block": 0}})")), std::invalid_argument);
    EXPECT_THROW(config_from_json(nlohmann::json::parse(R"({"capacity": {"rho": 0.5}})")), std::invalid_argument);
    EXPECT_THROW(load_config("/nonexistent/cfg.json"), std::runtime_error);
}
