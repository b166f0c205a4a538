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

#include <algorithm>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "apknn/fabric.hpp"
#include "apknn/validate.hpp"

namespace apknn::fabric {

// Cycle semantics. At step t the t-th symbol is consumed and:
//  1. an STE is active iff the symbol is in its class and it is a start STE or
//     one of its drivers produced an output at t-1;
//  2. every counter reads its drivers' outputs from t-1: any active reset
//     clears the count and the latch and cancels the increment, otherwise one
//     or more active increment drivers add 1 (or min(active, cap) with the
//     increment-by-N extension); reaching the threshold while unlatched emits
//     the pulse as this step's output and latches;
//  3. booleans evaluate over this step's outputs in topological order.
// Outputs of step t enable downstream elements at t+1.

/// Mutable simulation state. Holds its own scratch so several states can be
/// stepped concurrently against one Simulator.
struct SimState {
    std::uint64_t cycle = 0;
    std::vector<ElementId> outputs;  // elements that produced an output on the last step
    std::vector<std::uint32_t> counts;
    std::vector<std::uint8_t> latched;

    // Scratch, indexed by element or counter slot; stamps are cycle + 1.
    std::vector<std::uint64_t> out_stamp;
    std::vector<std::uint64_t> touch_stamp;
    std::vector<std::uint32_t> hits;
    std::vector<std::uint8_t> reset_hit;
    std::vector<std::uint32_t> ref_snapshot;
    std::vector<std::uint32_t> touched;
    std::vector<ElementId> next;
    std::vector<std::uint32_t> tags;

    bool operator==(const SimState& o) const {
        return cycle == o.cycle && outputs == o.outputs && counts == o.counts && latched == o.latched;
    }
};

struct StepOutcome {
    SimState state;
    std::vector<ReportEvent> events;
};

class Simulator {
  public:
    Simulator(const Automaton& a, const FabricConfig& cfg) : cfg_(cfg) {
        const auto report = validate(a, cfg);
        if (!report.empty()) throw std::invalid_argument("automaton is not runnable: " + report.front().message);
        build(a);
    }

    SimState reset() const {
        SimState s;
        s.counts.assign(counter_elem_.size(), 0);
        s.latched.assign(counter_elem_.size(), 0);
        s.out_stamp.assign(kind_.size(), 0);
        s.touch_stamp.assign(counter_elem_.size(), 0);
        s.hits.assign(counter_elem_.size(), 0);
        s.reset_hit.assign(counter_elem_.size(), 0);
        s.ref_snapshot.assign(counter_elem_.size(), 0);
        return s;
    }

    /// Consumes one symbol in place and appends this cycle's reports to `events`.
    void advance(SimState& s, Symbol symbol, std::vector<ReportEvent>& events) const {
        const std::uint64_t t = s.cycle;
        const std::uint64_t stamp = t + 1;
        s.next.clear();
        s.touched.clear();
        s.tags.clear();

        auto activate_ste = [&](ElementId id) {
            if (s.out_stamp[id] == stamp) return;
            s.out_stamp[id] = stamp;
            s.next.push_back(id);
            if (report_tag_[id] != kNoTag) s.tags.push_back(report_tag_[id]);
        };
        auto touch = [&](std::uint32_t slot) {
            if (s.touch_stamp[slot] == stamp) return;
            s.touch_stamp[slot] = stamp;
            s.hits[slot] = 0;
            s.reset_hit[slot] = 0;
            s.touched.push_back(slot);
        };

        for (const ElementId src : s.outputs) {
            for (std::uint32_t e = out_begin_[src]; e < out_begin_[src + 1]; ++e) {
                const ElementId dst = out_to_[e];
                switch (out_port_[e]) {
                    case Port::Enable:
                        if (classes_[ste_slot_[dst]].matches(symbol)) activate_ste(dst);
                        break;
                    case Port::Increment:
                        touch(counter_slot_[dst]);
                        ++s.hits[counter_slot_[dst]];
                        break;
                    case Port::Reset:
                        touch(counter_slot_[dst]);
                        s.reset_hit[counter_slot_[dst]] = 1;
                        break;
                    case Port::InputA:
                    case Port::InputB: break;
                }
            }
        }
        for (const ElementId id : starts_by_symbol_[symbol]) activate_ste(id);

        for (const auto slot : referenced_) s.ref_snapshot[slot] = s.counts[slot];
        for (const auto slot : dynamic_) touch(slot);
        for (const auto slot : s.touched) {
            if (s.reset_hit[slot]) {
                s.counts[slot] = 0;
                s.latched[slot] = 0;
            } else if (s.hits[slot] > 0) {
                s.counts[slot] += cfg_.increment_by_n ? std::min(s.hits[slot], cfg_.increment_cap) : 1u;
            }
            if (s.latched[slot]) continue;
            const bool reached = threshold_ref_[slot] == kNoRef ? s.counts[slot] >= threshold_[slot]
                                                                : s.counts[slot] > s.ref_snapshot[threshold_ref_[slot]];
            if (reached) {
                s.latched[slot] = 1;
                const ElementId id = counter_elem_[slot];
                s.out_stamp[id] = stamp;
                s.next.push_back(id);
            }
        }

        for (const auto& g : booleans_) {
            if (g.gate.eval(s.out_stamp[g.a] == stamp, s.out_stamp[g.b] == stamp)) {
                s.out_stamp[g.id] = stamp;
                s.next.push_back(g.id);
            }
        }

        std::sort(s.tags.begin(), s.tags.end());
        for (const auto tag : s.tags) events.push_back({tag, t});
        s.outputs.swap(s.next);
        s.cycle = t + 1;
    }

    /// Pure form of advance().
    StepOutcome step(const SimState& s, Symbol symbol) const {
        StepOutcome out{s, {}};
        advance(out.state, symbol, out.events);
        return out;
    }

    std::vector<ReportEvent> run(std::span<const Symbol> stream) const {
        if (stream.empty()) throw std::invalid_argument("simulate: symbol stream is empty");
        SimState s = reset();
        std::vector<ReportEvent> events;
        for (const Symbol sym : stream) advance(s, sym, events);
        return events;
    }

    /// Count of counter element `id` in `s`.
    std::uint32_t count_of(const SimState& s, ElementId id) const { return s.counts.at(counter_slot_.at(id)); }
    bool is_output(const SimState& s, ElementId id) const {
        return std::find(s.outputs.begin(), s.outputs.end(), id) != s.outputs.end();
    }

  private:
    static constexpr std::uint32_t kNoTag = UINT32_MAX;
    static constexpr std::uint32_t kNoRef = UINT32_MAX;

    struct Gate {
        ElementId id, a, b;
        Boolean gate;
    };

    void build(const Automaton& a) {
        const std::size_t n = a.size();
        kind_.resize(n);
        report_tag_.assign(n, kNoTag);
        ste_slot_.assign(n, 0);
        counter_slot_.assign(n, UINT32_MAX);
        starts_by_symbol_.assign(256, {});

        for (const auto& el : a.elements()) {
            kind_[el.id] = el.kind();
            if (el.is_ste()) {
                ste_slot_[el.id] = static_cast<std::uint32_t>(classes_.size());
                classes_.push_back(el.ste().symbols);
                if (el.ste().report_tag) report_tag_[el.id] = *el.ste().report_tag;
                if (el.ste().start)
                    for (unsigned sym = 0; sym < 256; ++sym)
                        if (el.ste().symbols.matches(static_cast<Symbol>(sym))) starts_by_symbol_[sym].push_back(el.id);
            } else if (el.kind() == ElementKind::Counter) {
                counter_slot_[el.id] = static_cast<std::uint32_t>(counter_elem_.size());
                counter_elem_.push_back(el.id);
            }
        }
        threshold_.assign(counter_elem_.size(), 1);
        threshold_ref_.assign(counter_elem_.size(), kNoRef);
        std::vector<std::uint8_t> is_ref(counter_elem_.size(), 0);
        for (std::uint32_t slot = 0; slot < counter_elem_.size(); ++slot) {
            const auto& c = a[counter_elem_[slot]].counter();
            if (const auto* thr = std::get_if<std::uint32_t>(&c.threshold)) {
                threshold_[slot] = *thr;
            } else {
                const auto ref = counter_slot_[std::get<CounterRef>(c.threshold).counter];
                threshold_ref_[slot] = ref;
                dynamic_.push_back(slot);
                if (!is_ref[ref]) {
                    is_ref[ref] = 1;
                    referenced_.push_back(ref);
                }
            }
        }

        out_begin_.assign(n + 1, 0);
        for (const auto& e : a.edges()) ++out_begin_[e.from + 1];
        for (std::size_t i = 0; i < n; ++i) out_begin_[i + 1] += out_begin_[i];
        out_to_.resize(a.edges().size());
        out_port_.resize(a.edges().size());
        std::vector<std::uint32_t> cursor(out_begin_.begin(), out_begin_.end() - 1);
        for (const auto& e : a.edges()) {
            const auto pos = cursor[e.from]++;
            out_to_[pos] = e.to;
            out_port_[pos] = e.port;
        }

        // Boolean gates in topological order over gate-to-gate wires.
        std::vector<Gate> gates(n);
        std::vector<std::uint8_t> is_gate(n, 0);
        for (const auto& el : a.elements())
            if (el.kind() == ElementKind::Boolean) {
                is_gate[el.id] = 1;
                gates[el.id] = {el.id, 0, 0, el.boolean()};
            }
        std::vector<std::uint32_t> indeg(n, 0);
        std::vector<std::vector<ElementId>> fwd(n);
        for (const auto& e : a.edges()) {
            if (e.port == Port::InputA) gates[e.to].a = e.from;
            if (e.port == Port::InputB) gates[e.to].b = e.from;
            if ((e.port == Port::InputA || e.port == Port::InputB) && is_gate[e.from]) {
                fwd[e.from].push_back(e.to);
                ++indeg[e.to];
            }
        }
        std::vector<ElementId> ready;
        for (ElementId i = 0; i < n; ++i)
            if (is_gate[i] && indeg[i] == 0) ready.push_back(i);
        std::sort(ready.begin(), ready.end(), std::greater<>());
        while (!ready.empty()) {
            const auto id = ready.back();
            ready.pop_back();
            booleans_.push_back(gates[id]);
            for (auto t : fwd[id])
                if (--indeg[t] == 0) ready.push_back(t);
        }
    }

    FabricConfig cfg_;
    std::vector<ElementKind> kind_;
    std::vector<std::uint32_t> report_tag_;
    std::vector<std::uint32_t> ste_slot_;
    std::vector<SymbolClass> classes_;
    std::vector<std::vector<ElementId>> starts_by_symbol_;
    std::vector<std::uint32_t> counter_slot_;
    std::vector<ElementId> counter_elem_;
    std::vector<std::uint32_t> threshold_;
    std::vector<std::uint32_t> threshold_ref_;
    std::vector<std::uint32_t> dynamic_;
    std::vector<std::uint32_t> referenced_;
    std::vector<std::uint32_t> out_begin_;
    std::vector<ElementId> out_to_;
    std::vector<Port> out_port_;
    std::vector<Gate> booleans_;
};

/// Runs `stream` through `a` from the reset state.
inline std::vector<ReportEvent> simulate(const Automaton& a, std::span<const Symbol> stream, const FabricConfig& cfg) {
    return Simulator(a, cfg).run(stream);
}

}  // namespace apknn::fabric
