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
#include <numeric>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include "apknn/fabric.hpp"

namespace apknn::fabric {

struct Diagnostic {
    enum class Code {
        InvalidConfig,
        DanglingEdge,
        PortMismatch,
        FanInExceeded,
        FanOutExceeded,
        NfaTooLarge,
        BooleanArity,
        BooleanCycle,
        ThresholdTooSmall,
        BadThresholdReference,
        DynamicThresholdDisabled,
        IncrementByNDisabled,
        DuplicateReportTag,
    };

    Code code;
    std::string message;
    std::optional<ElementId> element;
};

using ValidationReport = std::vector<Diagnostic>;

/// Labels every element with the connected NFA it belongs to. Wires are
/// treated as undirected, threshold references included. Labels are dense and
/// ordered by the lowest element id in each NFA.
inline std::vector<std::uint32_t> nfa_components(const Automaton& a) {
    const std::size_t n = a.size();
    std::vector<std::uint32_t> parent(n);
    std::iota(parent.begin(), parent.end(), 0u);
    auto find = [&](std::uint32_t x) {
        while (parent[x] != x) {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        return x;
    };
    auto unite = [&](std::uint32_t x, std::uint32_t y) {
        x = find(x);
        y = find(y);
        if (x != y) parent[std::max(x, y)] = std::min(x, y);
    };
    for (const auto& e : a.edges())
        if (e.from < n && e.to < n) unite(e.from, e.to);
    for (const auto& el : a.elements()) {
        if (el.kind() != ElementKind::Counter) continue;
        if (const auto* ref = std::get_if<CounterRef>(&el.counter().threshold); ref && ref->counter < n)
            unite(el.id, ref->counter);
    }
    std::vector<std::uint32_t> label(n, UINT32_MAX), out(n);
    std::uint32_t next = 0;
    for (std::uint32_t i = 0; i < n; ++i) {
        const auto root = find(i);
        if (label[root] == UINT32_MAX) label[root] = next++;
        out[i] = label[root];
    }
    return out;
}

/// Checks every structural rule the fabric imposes. An empty report means the
/// automaton can be simulated under `cfg`.
inline ValidationReport validate(const Automaton& a, const FabricConfig& cfg) {
    ValidationReport report;
    auto diag = [&](Diagnostic::Code code, std::string msg, std::optional<ElementId> id = {}) {
        report.push_back({code, std::move(msg), id});
    };

    try {
        cfg.check();
    } catch (const std::exception& ex) {
        diag(Diagnostic::Code::InvalidConfig, ex.what());
        return report;
    }

    const std::size_t n = a.size();
    std::vector<std::uint32_t> fan_in(n, 0), fan_out(n, 0);
    std::vector<std::uint8_t> bool_a(n, 0), bool_b(n, 0);

    for (const auto& e : a.edges()) {
        if (e.from >= n || e.to >= n) {
            diag(Diagnostic::Code::DanglingEdge,
                 "edge " + std::to_string(e.from) + " -> " + std::to_string(e.to) + " references a missing element");
            continue;
        }
        ++fan_out[e.from];
        const auto kind = a[e.to].kind();
        bool ok = false;
        switch (e.port) {
            case Port::Enable:
                ok = kind == ElementKind::Ste;
                if (ok) ++fan_in[e.to];
                break;
            case Port::Increment:
            case Port::Reset: ok = kind == ElementKind::Counter; break;
            case Port::InputA:
                ok = kind == ElementKind::Boolean;
                if (ok) ++bool_a[e.to];
                break;
            case Port::InputB:
                ok = kind == ElementKind::Boolean;
                if (ok) ++bool_b[e.to];
                break;
        }
        if (!ok)
            diag(Diagnostic::Code::PortMismatch,
                 "edge " + std::to_string(e.from) + " -> " + std::to_string(e.to) + " targets a port the element lacks",
                 e.to);
    }

    std::unordered_set<std::uint32_t> tags;
    bool any_boolean = false;
    for (const auto& el : a.elements()) {
        if (fan_out[el.id] > cfg.fan_out_limit)
            diag(Diagnostic::Code::FanOutExceeded,
                 "element " + std::to_string(el.id) + " drives " + std::to_string(fan_out[el.id]) +
                     " wires (limit " + std::to_string(cfg.fan_out_limit) + ")",
                 el.id);
        switch (el.kind()) {
            case ElementKind::Ste:
                if (fan_in[el.id] > cfg.fan_in_limit)
                    diag(Diagnostic::Code::FanInExceeded,
                         "STE " + std::to_string(el.id) + " has fan-in " + std::to_string(fan_in[el.id]) +
                             " (limit " + std::to_string(cfg.fan_in_limit) + ")",
                         el.id);
                if (el.ste().report_tag && !tags.insert(*el.ste().report_tag).second)
                    diag(Diagnostic::Code::DuplicateReportTag,
                         "report tag " + std::to_string(*el.ste().report_tag) + " is used more than once", el.id);
                break;
            case ElementKind::Counter: {
                const auto& c = el.counter();
                if (const auto* t = std::get_if<std::uint32_t>(&c.threshold)) {
                    if (*t < 1)
                        diag(Diagnostic::Code::ThresholdTooSmall,
                             "counter " + std::to_string(el.id) + " has a static threshold below 1", el.id);
                } else {
                    const auto ref = std::get<CounterRef>(c.threshold).counter;
                    if (!cfg.dynamic_threshold)
                        diag(Diagnostic::Code::DynamicThresholdDisabled,
                             "counter " + std::to_string(el.id) +
                                 " takes its threshold from another counter but the dynamic threshold extension is off",
                             el.id);
                    if (ref >= n || a[ref].kind() != ElementKind::Counter || ref == el.id)
                        diag(Diagnostic::Code::BadThresholdReference,
                             "counter " + std::to_string(el.id) + " references a threshold source that is not another counter",
                             el.id);
                }
                break;
            }
            case ElementKind::Boolean:
                any_boolean = true;
                if (bool_a[el.id] != 1 || bool_b[el.id] != 1)
                    diag(Diagnostic::Code::BooleanArity,
                         "boolean " + std::to_string(el.id) + " must have exactly two input drivers", el.id);
                break;
        }
    }

    if (a.metadata.requires_increment_by_n && !cfg.increment_by_n)
        diag(Diagnostic::Code::IncrementByNDisabled,
             "automaton was compiled for multi-increment counters but the extension is off");

    if (any_boolean) {
        // Kahn's algorithm restricted to boolean-to-boolean wires.
        std::vector<std::uint32_t> indeg(n, 0);
        std::vector<std::vector<ElementId>> next(n);
        for (const auto& e : a.edges()) {
            if (e.from >= n || e.to >= n) continue;
            if (a[e.from].kind() == ElementKind::Boolean && a[e.to].kind() == ElementKind::Boolean) {
                next[e.from].push_back(e.to);
                ++indeg[e.to];
            }
        }
        std::vector<ElementId> ready;
        std::size_t total = 0, seen = 0;
        for (const auto& el : a.elements()) {
            if (el.kind() != ElementKind::Boolean) continue;
            ++total;
            if (indeg[el.id] == 0) ready.push_back(el.id);
        }
        while (!ready.empty()) {
            const auto id = ready.back();
            ready.pop_back();
            ++seen;
            for (auto t : next[id])
                if (--indeg[t] == 0) ready.push_back(t);
        }
        if (seen != total) diag(Diagnostic::Code::BooleanCycle, "boolean elements form a combinational cycle");
    }

    const auto comp = nfa_components(a);
    std::vector<std::uint32_t> stes;
    for (const auto& el : a.elements()) {
        if (comp[el.id] >= stes.size()) stes.resize(comp[el.id] + 1, 0);
        stes[comp[el.id]] += el.is_ste();
    }
    for (std::size_t c = 0; c < stes.size(); ++c) {
        if (stes[c] > cfg.halfcore_ste_limit())
            diag(Diagnostic::Code::NfaTooLarge,
                 "connected NFA " + std::to_string(c) + " has " + std::to_string(stes[c]) + " STEs (limit " +
                     std::to_string(cfg.halfcore_ste_limit()) + ")");
    }
    return report;
}

inline bool has_code(const ValidationReport& r, Diagnostic::Code code) {
    return std::any_of(r.begin(), r.end(), [&](const Diagnostic& d) { return d.code == code; });
}

}  // namespace apknn::fabric
