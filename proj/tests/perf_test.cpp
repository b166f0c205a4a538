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
#include <cmath>

#include <gtest/gtest.h>

#include "apknn/perf_model.hpp"

using namespace apknn;
using namespace apknn::perf;

TEST(SmallRuntime, Examples) {
    EXPECT_NEAR(small_runtime(word_embed()), 1.97e-3, 0.02 * 1.97e-3);
    EXPECT_NEAR(small_runtime(tag_space()), 7.88e-3, 0.02 * 7.88e-3);
}

TEST(SmallRuntime, DoublingDimsDoublesRuntime) {
    auto w = word_embed();
    const double base = small_runtime(w);
    w.dims *= 2;
    EXPECT_DOUBLE_EQ(small_runtime(w), 2 * base);
}

TEST(LargeRuntime, Examples) {
    EXPECT_NEAR(large_runtime(tag_space(), Generation::Gen1), 108.31, 0.02 * 108.31);
    EXPECT_NEAR(large_runtime(word_embed(), Generation::Gen2), 2.48, 0.02 * 2.48);
    EXPECT_NEAR(large_runtime(sift(), Generation::Gen1), 50.11, 0.02 * 50.11);
}

TEST(LargeRuntime, GenerationGapIsReconfigurationOnly) {
    for (const auto& w : default_workloads()) {
        const double gap = large_runtime(w, Generation::Gen1) - large_runtime(w, Generation::Gen2);
        EXPECT_NEAR(gap, double(w.reconfigurations()) * 44.55e-3, 1e-9);
    }
}

TEST(LargeRuntime, Reconfigurations) {
    EXPECT_EQ(word_embed().reconfigurations(), 1024u);
    EXPECT_EQ(tag_space().reconfigurations(), 2048u);
}

TEST(Bandwidth, FormulaValues) {
    // 32 bits x (capacity + d) per 2d cycles at 133 MHz.
    EXPECT_NEAR(report_bandwidth(word_embed()), 32.0 * 1088 * 133e6 / 128, 1e-3);
    EXPECT_NEAR(report_bandwidth(tag_space()), 32.0 * 768 * 133e6 / 512, 1e-3);
}

TEST(Bandwidth, ReductionDividesActivationTerm) {
    for (const auto& w : default_workloads()) {
        const Reduction r{16, 4};
        const double full = report_bandwidth(w);
        const double offsets = 32.0 * w.dims / (2.0 * w.dims / 133e6);
        EXPECT_NEAR(report_bandwidth(w, r) - offsets, (full - offsets) / 4.0, 1e-3);
    }
    EXPECT_THROW(report_bandwidth(word_embed(), Reduction{16, 0}), std::invalid_argument);
    EXPECT_THROW(report_bandwidth(word_embed(), Reduction{4, 8}), std::invalid_argument);
}

TEST(Bandwidth, FullRateFlaggedReducedNot) {
    EXPECT_TRUE(bandwidth_flagged(word_embed()));
    EXPECT_TRUE(bandwidth_flagged(sift()));
    EXPECT_FALSE(bandwidth_flagged(tag_space()));
    EXPECT_FALSE(bandwidth_flagged(word_embed(), Reduction{16, 1}));
}

TEST(Improvement, Examples) {
    const auto f = improvement_factors(tag_space());
    EXPECT_NEAR(f.tech, 3.19, 0.005);
    EXPECT_DOUBLE_EQ(f.counter_ext, 1.75);
    EXPECT_NEAR(f.total(), 73.17, 0.20 * 73.17);
    EXPECT_DOUBLE_EQ(f.total(), f.tech * f.packing * f.decomposition * f.counter_ext);
}

TEST(Improvement, CounterExtensionIsExactForAnyDims) {
    for (std::uint32_t d : {7u, 64u, 100u, 256u})
        EXPECT_DOUBLE_EQ(query_latency_cycles(d, false) / query_latency_cycles(d, true), 1.75);
}

TEST(Improvement, DisabledOptimizationsAreNeutral) {
    const auto f = improvement_factors(sift(), {1, 1, false, 16});
    EXPECT_DOUBLE_EQ(f.packing, 1.0);
    EXPECT_DOUBLE_EQ(f.decomposition, 1.0);
    EXPECT_DOUBLE_EQ(f.counter_ext, 1.0);
}

TEST(OptExt, Examples) {
    EXPECT_NEAR(optext_runtime(word_embed()), 0.039, 0.20 * 0.039);
    EXPECT_NEAR(optext_runtime(sift()), 0.062, 0.20 * 0.062);
}

TEST(Energy, Basics) {
    EXPECT_DOUBLE_EQ(energy_efficiency(0, 1.0, 10.0), 0.0);
    EXPECT_DOUBLE_EQ(energy_efficiency(100, 2.0, 5.0), 10.0);
    EXPECT_THROW(energy_efficiency(1, 1.0, 0.0), std::invalid_argument);
    // The default power reproduces the first-generation WordEmbed figure.
    const PlatformParams p;
    EXPECT_NEAR(energy_efficiency(4096, large_runtime(word_embed(), Generation::Gen1), p.dynamic_power_w), 4.53, 0.01);
}

TEST(Indexed, SingleBucket) {
    const auto w = sift();
    const IndexStats s{{w.queries}};
    const PlatformParams p;
    EXPECT_DOUBLE_EQ(indexed_runtime(w, s, 0.0, Generation::Gen1),
                     p.reconfig_gen1_s + scan_seconds(w.queries, w.dims, p));
}

TEST(Indexed, LinearScanEqualsLargeRuntime) {
    for (const auto& w : default_workloads())
        for (auto g : {Generation::Gen1, Generation::Gen2})
            EXPECT_NEAR(indexed_runtime(w, linear_scan_stats(w), 0.0, g), large_runtime(w, g), 1e-9);
}

TEST(Indexed, ReconfigurationDominatesOnGen1) {
    // A k-means style plan: 4096 queries spread over 512 buckets.
    const auto w = word_embed();
    IndexStats s{std::vector<std::uint64_t>(512, 8)};
    const PlatformParams p;
    const double total = indexed_runtime(w, s, 1e-3, Generation::Gen1);
    EXPECT_GT(512 * p.reconfig_gen1_s, 0.5 * total);
}

TEST(Platform, RejectsNonPositive) {
    PlatformParams p;
    p.clock_hz = 0;
    EXPECT_THROW(p.check(), std::invalid_argument);
}

TEST(Workloads, CapacityProfile) {
    resource::CapacityProfile prof;
    prof.capacity[64] = 2048;
    const auto w = default_workloads(prof);
    EXPECT_EQ(w[0].capacity, 2048u);
    EXPECT_EQ(w[2].capacity, 512u);
}
