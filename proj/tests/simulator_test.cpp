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

#include "apknn/simulator.hpp"

using namespace apknn::fabric;

namespace {

FabricConfig extended() {
    FabricConfig cfg;
    cfg.dynamic_threshold = true;
    cfg.increment_by_n = true;
    return cfg;
}

/// Random validated automaton over a small alphabet {0..7}.
Automaton random_automaton(std::mt19937_64& rng, bool allow_dynamic) {
    Automaton a;
    const int n = 2 + static_cast<int>(rng() % 48);
    std::uint32_t tag = 0;
    std::vector<ElementId> counters;
    for (int i = 0; i < n; ++i) {
        const auto pick = rng() % 10;
        if (pick < 6 || i == 0) {
            const auto cls = SymbolClass::where([&](Symbol s) { return s < 8 && rng() % 3 == 0; });
            const bool start = rng() % 4 == 0;
            std::optional<std::uint32_t> rep;
            if (rng() % 3 == 0) rep = tag++;
            a.add_ste(cls, start, rep);
        } else if (pick < 9) {
            if (allow_dynamic && !counters.empty() && rng() % 3 == 0)
                counters.push_back(a.add_counter(CounterRef{counters[rng() % counters.size()]}));
            else
                counters.push_back(a.add_counter(1 + static_cast<std::uint32_t>(rng() % 4)));
        } else {
            a.add_boolean(static_cast<std::uint8_t>(rng() % 16));
        }
    }
    const auto size = static_cast<ElementId>(a.size());
    for (ElementId to = 0; to < size; ++to) {
        switch (a[to].kind()) {
            case ElementKind::Ste: {
                const auto drivers = rng() % 4;
                for (std::uint32_t k = 0; k < drivers; ++k) a.connect(static_cast<ElementId>(rng() % size), to);
                break;
            }
            case ElementKind::Counter: {
                const auto inc = 1 + rng() % 3;
                for (std::uint32_t k = 0; k < inc; ++k)
                    a.connect(static_cast<ElementId>(rng() % size), to, Port::Increment);
                if (rng() % 2) a.connect(static_cast<ElementId>(rng() % size), to, Port::Reset);
                break;
            }
            case ElementKind::Boolean: {
                // Inputs come from lower ids only, so gates stay acyclic.
                auto src = [&]() -> ElementId {
                    return to == 0 ? 0 : static_cast<ElementId>(rng() % to);
                };
                a.connect(src(), to, Port::InputA);
                a.connect(src(), to, Port::InputB);
                break;
            }
        }
    }
    return a;
}

std::vector<Symbol> random_stream(std::mt19937_64& rng, std::size_t max_len) {
    std::vector<Symbol> s(1 + rng() % max_len);
    for (auto& x : s) x = static_cast<Symbol>(rng() % 9);
    return s;
}

}  // namespace

TEST(Simulator, RejectsEmptyStreamAndInvalidAutomaton) {
    Automaton a;
    a.add_ste(SymbolClass::all(), true, 0u);
    EXPECT_THROW(simulate(a, {}, {}), std::invalid_argument);
    Automaton bad;
    bad.add_counter(CounterRef{0});
    EXPECT_THROW(Simulator(bad, {}), std::invalid_argument);
}

TEST(Simulator, StartStateReportsEverywhereItMatches) {
    Automaton a;
    a.add_ste(SymbolClass::single('x'), true, 5u);
    const std::vector<Symbol> s = {'x', 'y', 'x'};
    const auto ev = simulate(a, s, {});
    ASSERT_EQ(ev.size(), 2u);
    EXPECT_EQ(ev[0], (ReportEvent{5, 0}));
    EXPECT_EQ(ev[1], (ReportEvent{5, 2}));
}

TEST(Simulator, ChainAdvancesOneStatePerCycle) {
    Automaton a;
    const auto s0 = a.add_ste(SymbolClass::single('a'), true);
    const auto s1 = a.add_ste(SymbolClass::single('b'));
    const auto s2 = a.add_ste(SymbolClass::single('c'), false, 1u);
    a.connect(s0, s1);
    a.connect(s1, s2);
    const std::vector<Symbol> hit = {'z', 'a', 'b', 'c'};
    const std::vector<Symbol> miss = {'a', 'c', 'c'};
    EXPECT_EQ(simulate(a, hit, {}), (std::vector<ReportEvent>{{1, 3}}));
    EXPECT_TRUE(simulate(a, miss, {}).empty());
}

TEST(Simulator, CounterPulsesOnceAtThreshold) {
    Automaton a;
    const auto inc = a.add_ste(SymbolClass::single('i'), true);
    const auto rst = a.add_ste(SymbolClass::single('r'), true);
    const auto c = a.add_counter(3u);
    const auto out = a.add_ste(SymbolClass::all(), false, 0u);
    a.connect(inc, c, Port::Increment);
    a.connect(rst, c, Port::Reset);
    a.connect(c, out);
    // Increments land one cycle after the driving STE.
    const std::vector<Symbol> s = {'i', 'i', 'i', '.', '.', 'i', 'i', 'r', 'i', 'i', 'i', '.', '.'};
    const auto ev = simulate(a, s, {});
    ASSERT_EQ(ev.size(), 2u);
    EXPECT_EQ(ev[0].offset, 4u);   // counter fires at 3, report STE one cycle later
    EXPECT_EQ(ev[1].offset, 12u);  // reset at 8 zeroes the count, three more increments at 9..11
}

TEST(Simulator, ThresholdMinusOneSchedulesPulse) {
    Automaton a;
    const auto inc = a.add_ste(SymbolClass::single('i'), true);
    const auto c = a.add_counter(2u);
    a.connect(inc, c, Port::Increment);
    Simulator sim(a, {});
    auto s = sim.reset();
    std::vector<ReportEvent> ev;
    sim.advance(s, 'i', ev);
    sim.advance(s, 'i', ev);
    EXPECT_EQ(sim.count_of(s, c), 1u);
    EXPECT_FALSE(sim.is_output(s, c));
    sim.advance(s, '.', ev);
    EXPECT_EQ(sim.count_of(s, c), 2u);
    EXPECT_TRUE(sim.is_output(s, c));
    sim.advance(s, '.', ev);
    EXPECT_FALSE(sim.is_output(s, c));
}

TEST(Simulator, ResetCancelsSameCycleIncrement) {
    Automaton a;
    const auto both = a.add_ste(SymbolClass::single('b'), true);
    const auto c = a.add_counter(1u);
    a.connect(both, c, Port::Increment);
    a.connect(both, c, Port::Reset);
    const auto out = a.add_ste(SymbolClass::all(), false, 0u);
    a.connect(c, out);
    const std::vector<Symbol> s = {'b', 'b', 'b', '.'};
    EXPECT_TRUE(simulate(a, s, {}).empty());
}

TEST(Simulator, IncrementCollapsesUnlessExtensionOn) {
    Automaton a;
    std::vector<ElementId> drivers;
    for (int i = 0; i < 10; ++i) drivers.push_back(a.add_ste(SymbolClass::single('x'), true));
    const auto c = a.add_counter(100u);
    for (auto d : drivers) a.connect(d, c, Port::Increment);
    const std::vector<Symbol> s = {'x', '.'};
    for (bool ext : {false, true}) {
        FabricConfig cfg;
        cfg.increment_by_n = ext;
        Simulator sim(a, cfg);
        auto st = sim.reset();
        std::vector<ReportEvent> ev;
        for (auto sym : s) sim.advance(st, sym, ev);
        EXPECT_EQ(sim.count_of(st, c), ext ? cfg.increment_cap : 1u);
    }
}

TEST(Simulator, BooleanGatesAreCombinational) {
    Automaton a;
    const auto x = a.add_ste(SymbolClass::single('a') | SymbolClass::single('c'), true);
    const auto y = a.add_ste(SymbolClass::single('b') | SymbolClass::single('c'), true);
    const auto g = a.add_boolean(Boolean::kAnd);
    a.connect(x, g, Port::InputA);
    a.connect(y, g, Port::InputB);
    const auto out = a.add_ste(SymbolClass::all(), false, 0u);
    a.connect(g, out);
    const std::vector<Symbol> s = {'a', 'b', 'c', '.'};
    EXPECT_EQ(simulate(a, s, {}), (std::vector<ReportEvent>{{0, 3}}));
}

TEST(Simulator, DynamicThresholdComparesAgainstPreviousCount) {
    Automaton a;
    const auto ia = a.add_ste(SymbolClass::single('a'), true);
    const auto ib = a.add_ste(SymbolClass::single('b'), true);
    const auto cb = a.add_counter(1000u);
    const auto ca = a.add_counter(CounterRef{cb});
    a.connect(ia, ca, Port::Increment);
    a.connect(ib, cb, Port::Increment);
    const auto out = a.add_ste(SymbolClass::all(), false, 0u);
    a.connect(ca, out);
    FabricConfig off;
    EXPECT_THROW(Simulator(a, off), std::invalid_argument);
    const std::vector<Symbol> s = {'b', 'a', 'a', '.', '.'};
    const auto ev = simulate(a, s, extended());
    // B=1 after cycle 1, A reaches 2 at cycle 3, report at 4.
    EXPECT_EQ(ev, (std::vector<ReportEvent>{{0, 4}}));
}

TEST(Simulator, StepFoldingEqualsSimulate) {
    std::mt19937_64 rng(2024);
    const auto cfg = extended();
    int checked = 0;
    while (checked < 1000) {
        auto a = random_automaton(rng, true);
        if (!validate(a, cfg).empty()) continue;
        const auto stream = random_stream(rng, 200);
        const auto expected = simulate(a, stream, cfg);
        Simulator sim(a, cfg);
        SimState s = sim.reset();
        std::vector<ReportEvent> folded;
        for (auto sym : stream) {
            auto out = sim.step(s, sym);
            folded.insert(folded.end(), out.events.begin(), out.events.end());
            s = std::move(out.state);
        }
        ASSERT_EQ(folded, expected) << "automaton " << checked;
        ASSERT_TRUE(std::is_sorted(expected.begin(), expected.end()));
        ASSERT_EQ(simulate(a, stream, cfg), expected);
        ++checked;
    }
}

TEST(Simulator, PulseOnceAndMonotoneCounters) {
    std::mt19937_64 rng(77);
    FabricConfig cfg;
    int checked = 0;
    while (checked < 300) {
        auto a = random_automaton(rng, false);
        if (!validate(a, cfg).empty()) continue;
        const auto stream = random_stream(rng, 150);
        Simulator sim(a, cfg);
        std::vector<ElementId> counters;
        for (const auto& el : a.elements())
            if (el.kind() == ElementKind::Counter) counters.push_back(el.id);
        auto s = sim.reset();
        std::vector<std::uint32_t> prev(counters.size(), 0), pulses(counters.size(), 0);
        std::vector<ReportEvent> ev;
        for (auto sym : stream) {
            sim.advance(s, sym, ev);
            for (std::size_t i = 0; i < counters.size(); ++i) {
                const auto now = sim.count_of(s, counters[i]);
                // Only a reset lowers a count; it also reopens the latch.
                if (now < prev[i] || now == 0) pulses[i] = 0;
                ASSERT_LE(now, prev[i] + 1) << "count grew by more than one";
                if (sim.is_output(s, counters[i])) ASSERT_LE(++pulses[i], 1u) << "second pulse without reset";
                prev[i] = now;
            }
        }
        ++checked;
    }
}

TEST(Simulator, QuiescentOnNonMatchingStream) {
    std::mt19937_64 rng(99);
    int checked = 0;
    while (checked < 200) {
        auto a = random_automaton(rng, false);
        if (!validate(a, {}).empty()) continue;
        // No class touches symbols >= 8, and gates on nothing stay low except
        // those whose truth table is true on (0,0).
        bool constant_gate = false;
        for (const auto& el : a.elements())
            if (el.kind() == ElementKind::Boolean && (el.boolean().truth_table & 1u)) constant_gate = true;
        if (constant_gate) continue;
        const std::vector<Symbol> stream(50, 200);
        EXPECT_TRUE(simulate(a, stream, {}).empty());
        ++checked;
    }
}
