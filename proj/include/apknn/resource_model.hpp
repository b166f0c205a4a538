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
#include <bit>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "apknn/fabric.hpp"
#include "apknn/knn_compiler.hpp"
#include "apknn/validate.hpp"

namespace apknn::resource {

using fabric::Automaton;
using fabric::FabricConfig;

struct ElementCounts {
    std::uint64_t stes = 0;
    std::uint64_t counters = 0;
    std::uint64_t booleans = 0;
    std::uint64_t reporting_stes = 0;

    ElementCounts& operator+=(const ElementCounts& o) {
        stes += o.stes;
        counters += o.counters;
        booleans += o.booleans;
        reporting_stes += o.reporting_stes;
        return *this;
    }
    bool operator==(const ElementCounts&) const = default;
};

struct ResourceTally {
    ElementCounts total;
    std::vector<ElementCounts> nfas;  // one per connected NFA, ordered by lowest element id
    ElementCounts nfa_max;
};

inline ResourceTally tally(const Automaton& a) {
    ResourceTally t;
    const auto comp = fabric::nfa_components(a);
    for (const auto& el : a.elements()) {
        if (comp[el.id] >= t.nfas.size()) t.nfas.resize(comp[el.id] + 1);
        auto& c = t.nfas[comp[el.id]];
        switch (el.kind()) {
            case fabric::ElementKind::Ste:
                ++c.stes;
                c.reporting_stes += el.ste().is_report();
                break;
            case fabric::ElementKind::Counter: ++c.counters; break;
            case fabric::ElementKind::Boolean: ++c.booleans; break;
        }
    }
    for (const auto& c : t.nfas) {
        t.total += c;
        t.nfa_max.stes = std::max(t.nfa_max.stes, c.stes);
        t.nfa_max.counters = std::max(t.nfa_max.counters, c.counters);
        t.nfa_max.booleans = std::max(t.nfa_max.booleans, c.booleans);
        t.nfa_max.reporting_stes = std::max(t.nfa_max.reporting_stes, c.reporting_stes);
    }
    return t;
}

/// Contents of one placed block. Reporting STEs are included in `stes`.
using BlockLoad = ElementCounts;

struct Placement {
    std::vector<BlockLoad> blocks;  // device block index -> load
    std::uint64_t occupied_blocks = 0;
    std::uint64_t halfcores = 0;
    double utilization = 0;  // occupied blocks x rho / device blocks
    bool fits_device = true;
};

namespace detail {

// Fills `count` items into consecutive blocks from `first`, using `room`
// to read and update each block's remaining capacity. Returns the last
// block index touched.
template <class Room>
std::size_t fill(std::vector<BlockLoad>& blocks, std::size_t first, std::uint64_t count, Room room) {
    std::size_t b = first;
    while (count > 0) {
        if (b >= blocks.size()) blocks.resize(b + 1);
        const auto take = std::min(count, room(blocks[b], count));
        count -= take;
        if (count > 0) ++b;
    }
    return b;
}

}  // namespace detail

/// Greedy placement: NFAs go one after another, each inside a contiguous
/// block span that never crosses a half-core boundary. Within its span an NFA
/// fills reporting STEs, plain STEs, counters and booleans kind by kind,
/// starting from the span's first block, which it may share with the
/// previous NFA.
inline Placement place(const ResourceTally& t, const FabricConfig& cfg, double rho = 1.0) {
    cfg.check();
    if (!(rho >= 1.0)) throw std::invalid_argument("routing overhead factor must be at least 1");
    const std::uint64_t per_hc = cfg.blocks_per_halfcore;
    auto blocks_needed = [&](const ElementCounts& c) {
        auto ceil_div = [](std::uint64_t a, std::uint64_t b) { return (a + b - 1) / b; };
        return std::max({ceil_div(c.stes, cfg.stes_per_block), ceil_div(c.counters, cfg.counters_per_block),
                         ceil_div(c.booleans, cfg.booleans_per_block),
                         ceil_div(c.reporting_stes, cfg.reporting_per_block), std::uint64_t{1}});
    };

    Placement p;
    std::size_t cursor = 0;
    for (std::size_t n = 0; n < t.nfas.size(); ++n) {
        const auto& c = t.nfas[n];
        if (c.stes > cfg.halfcore_ste_limit() || blocks_needed(c) > per_hc)
            throw std::invalid_argument("NFA " + std::to_string(n) + " does not fit in one half-core");

        auto try_at = [&](std::size_t start, std::vector<BlockLoad>& blocks) {
            std::size_t last = start;
            last = std::max(last, detail::fill(blocks, start, c.reporting_stes, [&](BlockLoad& b, std::uint64_t want) {
                const auto room = std::min<std::uint64_t>(cfg.reporting_per_block - b.reporting_stes,
                                                          cfg.stes_per_block - b.stes);
                const auto take = std::min(room, want);
                b.reporting_stes += take;
                b.stes += take;
                return take;
            }));
            last = std::max(last, detail::fill(blocks, start, c.stes - c.reporting_stes, [&](BlockLoad& b, std::uint64_t want) {
                const auto take = std::min<std::uint64_t>(cfg.stes_per_block - b.stes, want);
                b.stes += take;
                return take;
            }));
            last = std::max(last, detail::fill(blocks, start, c.counters, [&](BlockLoad& b, std::uint64_t want) {
                const auto take = std::min<std::uint64_t>(cfg.counters_per_block - b.counters, want);
                b.counters += take;
                return take;
            }));
            last = std::max(last, detail::fill(blocks, start, c.booleans, [&](BlockLoad& b, std::uint64_t want) {
                const auto take = std::min<std::uint64_t>(cfg.booleans_per_block - b.booleans, want);
                b.booleans += take;
                return take;
            }));
            return last;
        };

        auto trial = p.blocks;
        auto last = try_at(cursor, trial);
        if (last / per_hc != cursor / per_hc) {
            // Restart at the next half-core so the NFA stays in one.
            cursor = (cursor / per_hc + 1) * per_hc;
            trial = p.blocks;
            last = try_at(cursor, trial);
        }
        p.blocks = std::move(trial);
        cursor = last;
    }
    for (const auto& b : p.blocks) p.occupied_blocks += (b.stes + b.counters + b.booleans) > 0;
    p.halfcores = p.blocks.empty() ? 0 : (p.blocks.size() + per_hc - 1) / per_hc;
    p.utilization = double(p.occupied_blocks) * rho / double(cfg.device_blocks());
    p.fits_device = p.blocks.size() <= cfg.device_blocks();
    return p;
}

/// Vectors per board configuration by dimensionality, plus the routing
/// overhead calibration.
struct CapacityProfile {
    std::map<std::uint32_t, std::uint32_t> capacity = {{64, 1024}, {128, 1024}, {256, 512}};
    double rho = 1.0;

    std::uint32_t capacity_for(std::uint32_t dims) const {
        const auto it = capacity.find(dims);
        if (it == capacity.end())
            throw std::invalid_argument("no board capacity configured for d = " + std::to_string(dims));
        return it->second;
    }
};

/// STEs a single vector's macros occupy under the plain build.
inline std::uint64_t unpacked_stes(std::uint32_t dims, std::uint32_t fan_in) {
    Automaton a;
    const BitVector x(dims);
    const auto h = compiler::build_hamming_macro(a, x, fan_in);
    compiler::build_sorting_macro(a, h, dims, h.depth, 0);
    return a.ste_count();
}

/// STEs of one packed group of P vectors.
inline std::uint64_t packed_stes(std::uint32_t dims, std::uint32_t packing, std::uint32_t fan_in,
                                 std::uint32_t fan_out = 64) {
    Automaton a;
    BitMatrix group(dims);
    std::vector<std::uint32_t> ids(packing);
    for (std::uint32_t i = 0; i < packing; ++i) {
        group.push_back(BitVector(dims));
        ids[i] = i;
    }
    compiler::apply_vector_packing(a, group, ids, 0, fan_in, fan_out);
    return a.ste_count();
}

/// (P x unpacked STE cost) / packed STE cost, from the compiler's own builds.
inline double packing_savings(std::uint32_t dims, std::uint32_t packing, std::uint32_t fan_in = 16) {
    if (packing < 1) throw std::invalid_argument("packing factor must be at least 1");
    if (packing == 1) return 1.0;
    return double(packing) * double(unpacked_stes(dims, fan_in)) / double(packed_stes(dims, packing, fan_in));
}

/// Cost of one STE when each full STE splits into x narrower ones.
inline double decomposed_cost(const fabric::SymbolClass& cls, std::uint32_t x) {
    const int width = 8 - std::countr_zero(x);
    return cls.sensitivity() <= width ? 1.0 / x : 1.0;
}

inline double decomposition_savings(const Automaton& a, std::uint32_t x) {
    switch (x) {
        case 1: case 2: case 4: case 8: case 16: case 32: break;
        default: throw std::invalid_argument("decomposition factor must be a power of two up to 32");
    }
    double cost = 0;
    std::uint64_t stes = 0;
    for (const auto& el : a.elements()) {
        if (!el.is_ste()) continue;
        ++stes;
        cost += decomposed_cost(el.ste().symbols, x);
    }
    return stes ? double(stes) / cost : 1.0;
}

/// Savings for one representative vector of dimensionality d.
inline double decomposition_savings(std::uint32_t dims, std::uint32_t x, std::uint32_t fan_in = 16) {
    Automaton a;
    const BitVector v(dims);
    const auto h = compiler::build_hamming_macro(a, v, fan_in);
    compiler::build_sorting_macro(a, h, dims, h.depth, 0);
    return decomposition_savings(a, x);
}

inline nlohmann::json to_json(const ElementCounts& c) {
    return {{"stes", c.stes}, {"counters", c.counters}, {"booleans", c.booleans}, {"reporting_stes", c.reporting_stes}};
}

inline nlohmann::json to_json(const ResourceTally& t, const Placement& p) {
    return {{"total", to_json(t.total)},
            {"nfas", t.nfas.size()},
            {"nfa_max", to_json(t.nfa_max)},
            {"occupied_blocks", p.occupied_blocks},
            {"halfcores", p.halfcores},
            {"utilization", p.utilization},
            {"fits_device", p.fits_device}};
}

}  // namespace apknn::resource
