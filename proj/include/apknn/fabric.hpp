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

#include <compare>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "apknn/symbol_class.hpp"

namespace apknn::fabric {

using ElementId = std::uint32_t;

/// Capacity constants of the modeled device plus the architectural extension
/// switches. Defaults describe a first-generation board.
struct FabricConfig {
    std::uint32_t stes_per_block = 256;
    std::uint32_t counters_per_block = 4;
    std::uint32_t booleans_per_block = 12;
    std::uint32_t reporting_per_block = 32;
    std::uint32_t blocks_per_halfcore = 96;
    std::uint32_t halfcores_per_device = 64;
    double clock_hz = 133e6;
    std::uint32_t fan_in_limit = 16;
    std::uint32_t fan_out_limit = 64;

    // Extensions.
    bool increment_by_n = false;
    std::uint32_t increment_cap = 8;
    bool dynamic_threshold = false;
    std::uint32_t ste_decomposition_factor = 1;

    std::uint32_t halfcore_ste_limit() const { return stes_per_block * blocks_per_halfcore; }
    std::uint64_t device_blocks() const { return std::uint64_t{blocks_per_halfcore} * halfcores_per_device; }

    void check() const {
        if (!stes_per_block || !counters_per_block || !booleans_per_block || !reporting_per_block ||
            !blocks_per_halfcore || !halfcores_per_device || !fan_in_limit || !fan_out_limit || !increment_cap ||
            !(clock_hz > 0))
            throw std::invalid_argument("fabric capacities must be positive");
        switch (ste_decomposition_factor) {
            case 1: case 2: case 4: case 8: case 16: case 32: break;
            default: throw std::invalid_argument("STE decomposition factor must be one of 1, 2, 4, 8, 16, 32");
        }
    }
};

enum class Port : std::uint8_t { Enable, Increment, Reset, InputA, InputB };

/// What a compiler pass built an element for. The fabric ignores roles; they
/// let later passes and the resource model find macro parts again.
enum class Role : std::uint8_t {
    Generic,
    Guard,
    Star,
    Match,
    Ladder,
    Collector,
    Delay,
    Sort,
    Eof,
    DistanceCounter,
    Report,
    GroupCollector,
    LocalCounter,
};

struct Ste {
    SymbolClass symbols;
    bool start = false;
    std::optional<std::uint32_t> report_tag;

    bool is_report() const { return report_tag.has_value(); }
    bool operator==(const Ste&) const = default;
};

/// Threshold taken from the live count of another counter (dynamic-threshold
/// extension).
struct CounterRef {
    ElementId counter;
    bool operator==(const CounterRef&) const = default;
};

/// Pulse-mode counter: emits one activation when the threshold is reached and
/// stays latched until reset.
struct Counter {
    std::variant<std::uint32_t, CounterRef> threshold = std::uint32_t{1};

    bool is_dynamic() const { return std::holds_alternative<CounterRef>(threshold); }
    bool operator==(const Counter&) const = default;
};

/// Two-input gate given by its truth table: bit (a | b << 1) is the output.
struct Boolean {
    std::uint8_t truth_table = 0b1000;

    static constexpr std::uint8_t kAnd = 0b1000;
    static constexpr std::uint8_t kOr = 0b1110;
    static constexpr std::uint8_t kXor = 0b0110;
    static constexpr std::uint8_t kNand = 0b0111;
    static constexpr std::uint8_t kNor = 0b0001;
    static constexpr std::uint8_t kAndNotB = 0b0010;

    bool eval(bool a, bool b) const { return (truth_table >> (unsigned(a) | (unsigned(b) << 1))) & 1u; }
    bool operator==(const Boolean&) const = default;
};

enum class ElementKind : std::uint8_t { Ste, Counter, Boolean };

struct Element {
    ElementId id = 0;
    std::variant<Ste, Counter, Boolean> body;
    Role role = Role::Generic;
    std::int64_t owner = -1;  // dataset vector the element was built for, -1 if shared
    std::uint8_t slice = 0;

    ElementKind kind() const { return static_cast<ElementKind>(body.index()); }
    bool is_ste() const { return kind() == ElementKind::Ste; }
    const Ste& ste() const { return std::get<Ste>(body); }
    Ste& ste() { return std::get<Ste>(body); }
    const Counter& counter() const { return std::get<Counter>(body); }
    Counter& counter() { return std::get<Counter>(body); }
    const Boolean& boolean() const { return std::get<Boolean>(body); }

    bool operator==(const Element&) const = default;
};

struct Edge {
    ElementId from;
    ElementId to;
    Port port = Port::Enable;

    auto operator<=>(const Edge&) const = default;
};

struct AutomatonMetadata {
    std::uint32_t dims = 0;
    std::uint32_t vector_count = 0;
    std::vector<std::string> passes;
    bool requires_increment_by_n = false;

    bool operator==(const AutomatonMetadata&) const = default;
};

/// Element graph forming one board image. Element ids are dense indices in
/// insertion order.
class Automaton {
  public:
    ElementId add_ste(SymbolClass symbols, bool start = false, std::optional<std::uint32_t> report_tag = {},
                      Role role = Role::Generic, std::int64_t owner = -1) {
        return add(Ste{symbols, start, report_tag}, role, owner);
    }
    ElementId add_counter(std::uint32_t threshold, Role role = Role::Generic, std::int64_t owner = -1) {
        return add(Counter{threshold}, role, owner);
    }
    ElementId add_counter(CounterRef threshold, Role role = Role::Generic, std::int64_t owner = -1) {
        return add(Counter{threshold}, role, owner);
    }
    ElementId add_boolean(std::uint8_t truth_table, Role role = Role::Generic, std::int64_t owner = -1) {
        return add(Boolean{truth_table}, role, owner);
    }

    ElementId add(std::variant<Ste, Counter, Boolean> body, Role role = Role::Generic, std::int64_t owner = -1) {
        const auto id = static_cast<ElementId>(elements_.size());
        elements_.push_back(Element{id, std::move(body), role, owner, 0});
        return id;
    }

    void connect(ElementId from, ElementId to, Port port = Port::Enable) { edges_.push_back({from, to, port}); }

    std::size_t size() const { return elements_.size(); }
    bool empty() const { return elements_.empty(); }
    const std::vector<Element>& elements() const { return elements_; }
    std::vector<Element>& elements() { return elements_; }
    const Element& operator[](ElementId id) const { return elements_.at(id); }
    Element& operator[](ElementId id) { return elements_.at(id); }
    const std::vector<Edge>& edges() const { return edges_; }
    std::vector<Edge>& edges() { return edges_; }

    AutomatonMetadata metadata;

    std::size_t ste_count() const {
        std::size_t n = 0;
        for (const auto& e : elements_) n += e.is_ste();
        return n;
    }

    /// Appends a copy of another automaton, shifting its ids. Returns the id
    /// offset applied.
    ElementId append(const Automaton& other) {
        const auto base = static_cast<ElementId>(elements_.size());
        for (Element e : other.elements_) {
            e.id += base;
            if (auto* c = std::get_if<Counter>(&e.body)) {
                if (auto* ref = std::get_if<CounterRef>(&c->threshold)) ref->counter += base;
            }
            elements_.push_back(std::move(e));
        }
        for (Edge edge : other.edges_) edges_.push_back({edge.from + base, edge.to + base, edge.port});
        return base;
    }

    bool operator==(const Automaton&) const = default;

  private:
    std::vector<Element> elements_;
    std::vector<Edge> edges_;
};

/// One activation of a reporting STE.
struct ReportEvent {
    std::uint32_t tag = 0;
    std::uint64_t offset = 0;

    bool operator==(const ReportEvent&) const = default;
    // Emission order: by offset, then tag.
    friend auto operator<=>(const ReportEvent& a, const ReportEvent& b) {
        if (auto c = a.offset <=> b.offset; c != 0) return c;
        return a.tag <=> b.tag;
    }
};

}  // namespace apknn::fabric
