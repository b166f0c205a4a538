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

#include "apknn/fabric.hpp"
#include "apknn/image_format.hpp"
#include "apknn/stream_layout.hpp"
#include "apknn/validate.hpp"

using namespace apknn::fabric;
using apknn::codec::StreamLayout;

TEST(SymbolClass, TernaryAndCounts) {
    const auto odd = SymbolClass::ternary("*******1");
    EXPECT_EQ(odd.count(), 128u);
    EXPECT_TRUE(odd.matches(3));
    EXPECT_FALSE(odd.matches(2));
    EXPECT_EQ(odd.sensitivity_mask(), 0x01);
    EXPECT_EQ(SymbolClass::all().sensitivity(), 0);
    EXPECT_EQ(SymbolClass::single(0x80).sensitivity(), 8);
}

TEST(SymbolClass, PayloadBitClassesCoverSixtyFourSymbols) {
    for (unsigned b = 0; b < StreamLayout::kPayloadBits; ++b)
        for (bool v : {false, true}) {
            const auto c = StreamLayout::payload_bit(b, v);
            EXPECT_EQ(c.count(), 64u);
            EXPECT_EQ(c.sensitivity_mask(), (1u << 7) | (1u << b));
            EXPECT_EQ(c, StreamLayout::payload_bit(0, v).swap_bits(0, b));
        }
}

TEST(SymbolClass, ControlSymbolsDistinct) {
    EXPECT_NE(StreamLayout::kSof, StreamLayout::kEof);
    EXPECT_NE(StreamLayout::kSof, StreamLayout::kFill);
    EXPECT_NE(StreamLayout::kEof, StreamLayout::kFill);
    for (auto s : {StreamLayout::kSof, StreamLayout::kEof, StreamLayout::kFill}) {
        EXPECT_TRUE(StreamLayout::is_control(s));
        EXPECT_FALSE(StreamLayout::data().matches(s));
    }
    EXPECT_EQ(StreamLayout::data().count(), 128u);
}

TEST(SymbolClass, HexRoundTrip) {
    std::mt19937 rng(5);
    for (int i = 0; i < 50; ++i) {
        const auto c = SymbolClass::where([&](Symbol) { return rng() & 1; });
        EXPECT_EQ(SymbolClass::from_hex(c.to_hex()), c);
    }
    EXPECT_EQ(SymbolClass::single(0).to_hex().back(), '1');
    EXPECT_THROW(SymbolClass::from_hex("zz"), std::invalid_argument);
}

TEST(Validate, CleanChainPasses) {
    Automaton a;
    const auto s0 = a.add_ste(SymbolClass::single('a'), true);
    const auto s1 = a.add_ste(SymbolClass::single('b'), false, 0u);
    a.connect(s0, s1);
    EXPECT_TRUE(validate(a, {}).empty());
}

TEST(Validate, ReportsEachDefect) {
    FabricConfig cfg;
    cfg.fan_in_limit = 2;
    cfg.fan_out_limit = 2;
    Automaton a;
    const auto hub = a.add_ste(SymbolClass::all(), true);
    std::vector<ElementId> leaves;
    for (int i = 0; i < 3; ++i) {
        leaves.push_back(a.add_ste(SymbolClass::all()));
        a.connect(hub, leaves.back());
    }
    const auto sink = a.add_ste(SymbolClass::all(), false, 1u);
    for (auto l : leaves) a.connect(l, sink);
    a.add_ste(SymbolClass::all(), false, 1u);
    const auto c = a.add_counter(0u);
    a.connect(hub, c, Port::InputA);
    a.connect(hub, 99);
    const auto dyn = a.add_counter(CounterRef{hub});
    const auto g = a.add_boolean(Boolean::kAnd);
    a.connect(c, g, Port::InputA);
    (void)dyn;

    const auto r = validate(a, cfg);
    EXPECT_TRUE(has_code(r, Diagnostic::Code::FanOutExceeded));
    EXPECT_TRUE(has_code(r, Diagnostic::Code::FanInExceeded));
    EXPECT_TRUE(has_code(r, Diagnostic::Code::DuplicateReportTag));
    EXPECT_TRUE(has_code(r, Diagnostic::Code::ThresholdTooSmall));
    EXPECT_TRUE(has_code(r, Diagnostic::Code::PortMismatch));
    EXPECT_TRUE(has_code(r, Diagnostic::Code::DanglingEdge));
    EXPECT_TRUE(has_code(r, Diagnostic::Code::DynamicThresholdDisabled));
    EXPECT_TRUE(has_code(r, Diagnostic::Code::BadThresholdReference));
    EXPECT_TRUE(has_code(r, Diagnostic::Code::BooleanArity));
}

TEST(Validate, BooleanCycleAndIncrementFlag) {
    Automaton a;
    const auto s = a.add_ste(SymbolClass::all(), true);
    const auto g1 = a.add_boolean(Boolean::kOr);
    const auto g2 = a.add_boolean(Boolean::kOr);
    a.connect(s, g1, Port::InputA);
    a.connect(g2, g1, Port::InputB);
    a.connect(s, g2, Port::InputA);
    a.connect(g1, g2, Port::InputB);
    a.metadata.requires_increment_by_n = true;
    const auto r = validate(a, {});
    EXPECT_TRUE(has_code(r, Diagnostic::Code::BooleanCycle));
    EXPECT_TRUE(has_code(r, Diagnostic::Code::IncrementByNDisabled));
}

TEST(Validate, OversizedNfa) {
    FabricConfig cfg;
    cfg.blocks_per_halfcore = 1;
    cfg.stes_per_block = 4;
    Automaton a;
    auto prev = a.add_ste(SymbolClass::all(), true);
    for (int i = 0; i < 4; ++i) {
        const auto next = a.add_ste(SymbolClass::all());
        a.connect(prev, next);
        prev = next;
    }
    EXPECT_TRUE(has_code(validate(a, cfg), Diagnostic::Code::NfaTooLarge));
    Automaton split;
    for (int i = 0; i < 5; ++i) split.add_ste(SymbolClass::all(), true);
    EXPECT_TRUE(validate(split, cfg).empty());
}

TEST(Validate, DecompositionFactorRange) {
    FabricConfig cfg;
    cfg.ste_decomposition_factor = 3;
    EXPECT_TRUE(has_code(validate(Automaton{}, cfg), Diagnostic::Code::InvalidConfig));
}

TEST(Components, ThresholdReferencesJoinNfas) {
    Automaton a;
    const auto b = a.add_counter(5u);
    a.add_ste(SymbolClass::all(), true);
    const auto c = a.add_counter(CounterRef{b});
    const auto comp = nfa_components(a);
    EXPECT_EQ(comp[b], comp[c]);
    EXPECT_NE(comp[1], comp[b]);
}

TEST(ImageFormat, RoundTripIsByteStable) {
    Automaton a;
    const auto s0 = a.add_ste(SymbolClass::ternary("0******1"), true, {}, Role::Guard, 3);
    const auto s1 = a.add_ste(SymbolClass::all_except(0x81), false, 7u, Role::Report, 3);
    const auto b = a.add_counter(9u);
    const auto c = a.add_counter(CounterRef{b}, Role::DistanceCounter);
    const auto g = a.add_boolean(Boolean::kXor);
    a[s1].slice = 4;
    a.connect(s1, s0);
    a.connect(s0, s1);
    a.connect(s0, c, Port::Increment);
    a.connect(s1, c, Port::Reset);
    a.connect(s0, g, Port::InputA);
    a.connect(c, g, Port::InputB);
    a.metadata.passes = {"x"};
    a.metadata.dims = 4;

    const auto text = image_to_string(a);
    auto back = image_from_string(text);
    auto expected = a;
    canonicalize(expected);
    EXPECT_EQ(back, expected);
    EXPECT_EQ(image_to_string(back), text);
}

TEST(ImageFormat, RejectsForeignDocuments) {
    EXPECT_THROW(image_from_string(R"({"format":"other","version":1})"), std::invalid_argument);
    EXPECT_THROW(image_from_string(R"({"format":"apknn-automaton","version":2})"), std::invalid_argument);
}
