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
#include <array>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "apknn/bits.hpp"
#include "apknn/fabric.hpp"
#include "apknn/stream_layout.hpp"
#include "apknn/validate.hpp"

namespace apknn::compiler {

using codec::StreamLayout;
using codec::StreamMode;
using fabric::Automaton;
using fabric::ElementId;
using fabric::Port;
using fabric::Role;

/// Slice of the dataset compiled into one board image. `ids` are global
/// dataset vector ids, parallel to the rows of `vectors`.
struct DatasetPartition {
    std::uint32_t dims = 0;
    std::vector<std::uint32_t> ids;
    BitMatrix vectors;
    std::uint32_t index = 0;

    std::size_t size() const { return ids.size(); }

    /// Rows [first, first + count) of `data`, ids taken from the row numbers.
    static DatasetPartition from_rows(const BitMatrix& data, std::size_t first, std::size_t count,
                                      std::uint32_t index = 0) {
        DatasetPartition p;
        p.dims = static_cast<std::uint32_t>(data.dims());
        p.vectors = BitMatrix(data.dims());
        p.vectors.reserve(count);
        p.index = index;
        for (std::size_t r = first; r < first + count && r < data.rows(); ++r) {
            p.ids.push_back(static_cast<std::uint32_t>(r));
            p.vectors.push_back(data.row(r));
        }
        return p;
    }

    static DatasetPartition from_ids(const BitMatrix& data, std::span<const std::uint32_t> ids, std::uint32_t index = 0) {
        DatasetPartition p;
        p.dims = static_cast<std::uint32_t>(data.dims());
        p.vectors = BitMatrix(data.dims());
        p.vectors.reserve(ids.size());
        p.index = index;
        for (auto id : ids) {
            p.ids.push_back(id);
            p.vectors.push_back(data.row(id));
        }
        return p;
    }
};

/// Splits `data` into consecutive partitions of at most `capacity` vectors.
inline std::vector<DatasetPartition> partition_dataset(const BitMatrix& data, std::size_t capacity) {
    if (capacity == 0) throw std::invalid_argument("partition capacity must be positive");
    std::vector<DatasetPartition> parts;
    for (std::size_t first = 0, i = 0; first < data.rows(); first += capacity, ++i)
        parts.push_back(DatasetPartition::from_rows(data, first, capacity, static_cast<std::uint32_t>(i)));
    return parts;
}

struct ReductionOptions {
    std::uint32_t group_size = 16;    // p
    std::uint32_t local_budget = 4;   // k'

    bool operator==(const ReductionOptions&) const = default;
};

struct CompileOptions {
    std::uint32_t packing = 1;
    bool multiplexing = false;
    std::optional<ReductionOptions> reduction;
    bool counter_increment = false;
    std::uint32_t fan_in = 16;
    std::uint32_t fan_out = 64;
    std::uint32_t capacity = 1024;  // dataset vectors per board image

    StreamMode mode() const {
        if (counter_increment) return StreamMode::CounterIncrement;
        return multiplexing ? StreamMode::Multiplexed : StreamMode::Plain;
    }

    void check() const {
        if (packing < 1) throw std::invalid_argument("packing factor must be at least 1");
        if (fan_in < 2) throw std::invalid_argument("fan-in limit must be at least 2");
        if (fan_out < 2) throw std::invalid_argument("fan-out limit must be at least 2");
        if (capacity < 1) throw std::invalid_argument("board capacity must be at least 1");
        if (multiplexing && counter_increment)
            throw std::invalid_argument("stream multiplexing and the counter increment extension both use the spare "
                                        "payload bits and cannot be combined");
        if (reduction) {
            if (reduction->local_budget < 1) throw std::invalid_argument("local report budget k' must be at least 1");
            if (reduction->local_budget > reduction->group_size)
                throw std::invalid_argument("local report budget k' exceeds group size p");
            if (reduction->group_size > fan_in)
                throw std::invalid_argument("reduction group size exceeds the collector fan-in limit");
        }
    }

    /// Fabric settings the compiled image needs.
    fabric::FabricConfig fabric() const {
        fabric::FabricConfig cfg;
        cfg.fan_in_limit = fan_in;
        cfg.fan_out_limit = fan_out;
        cfg.increment_by_n = counter_increment;
        return cfg;
    }

    bool operator==(const CompileOptions&) const = default;
};

/// report tag -> (dataset vector, query slice)
struct ReportSlot {
    std::uint32_t vector_id = 0;
    std::uint8_t slice = 0;

    bool operator==(const ReportSlot&) const = default;
};

/// Host-side sidecar describing how to drive and decode one board image.
struct BoardLayout {
    std::uint32_t dims = 0;
    std::uint32_t data_length = 0;
    std::uint32_t delay_depth = 0;
    std::uint32_t calibration_base = 0;
    std::uint32_t partition_index = 0;
    CompileOptions options;
    std::vector<ReportSlot> slots;  // indexed by report tag

    StreamMode mode() const { return options.mode(); }
    std::uint32_t frame_length() const { return codec::frame_length(data_length, dims, delay_depth); }
    std::uint32_t slices() const { return options.multiplexing ? StreamLayout::kSlices : 1; }

    bool operator==(const BoardLayout&) const = default;
};

struct BoardImage {
    Automaton automaton;
    BoardLayout layout;
};

/// Uniform depth of a fan-in-limited OR tree over `leaves` inputs.
inline std::uint32_t collector_depth(std::uint32_t leaves, std::uint32_t fan_in) {
    std::uint32_t depth = 0;
    for (std::uint64_t m = leaves; m > 1; m = (m + fan_in - 1) / fan_in) ++depth;
    return depth;
}

/// Delay depth L of an image: collector depth, zero when counters can sum.
inline std::uint32_t delay_depth(std::uint32_t dims, std::uint32_t fan_in, StreamMode mode) {
    return mode == StreamMode::CounterIncrement ? 0 : collector_depth(dims, fan_in);
}

/// Data-phase position (1-based) and payload bit carrying dimension i.
struct DimensionSlot {
    std::uint32_t position;
    unsigned bit;
};

inline DimensionSlot dimension_slot(std::uint32_t i, StreamMode mode) {
    if (mode == StreamMode::CounterIncrement)
        return {i / StreamLayout::kPayloadBits + 1, i % StreamLayout::kPayloadBits};
    return {i + 1, 0};
}

struct HammingMacro {
    ElementId guard = 0;
    std::vector<ElementId> stars;
    std::vector<ElementId> matches;
    std::vector<ElementId> collectors;
    std::vector<ElementId> roots;      // drivers of the distance counter's increment port
    std::vector<ElementId> chain_end;  // elements active on the last data symbol
    std::uint32_t depth = 0;
};

struct SortingMacro {
    std::vector<ElementId> delays;
    ElementId sort = 0;
    ElementId eof = 0;
    ElementId counter = 0;
    ElementId report = 0;
};

/// Balanced OR reduction of `leaves` with every leaf at the same depth.
/// Returns the root(s); with zero depth the leaves themselves drive the
/// counter.
inline std::vector<ElementId> build_collector_tree(Automaton& a, std::vector<ElementId> level, std::uint32_t fan_in,
                                                   std::int64_t owner, std::vector<ElementId>* created = nullptr) {
    while (level.size() > 1) {
        const std::size_t groups = (level.size() + fan_in - 1) / fan_in;
        std::vector<ElementId> next;
        next.reserve(groups);
        std::size_t pos = 0;
        for (std::size_t g = 0; g < groups; ++g) {
            // Spread leaves evenly: the first (size % groups) groups take one extra.
            const std::size_t take = level.size() / groups + (g < level.size() % groups ? 1 : 0);
            const auto c = a.add_ste(StreamLayout::any(), false, {}, Role::Collector, owner);
            for (std::size_t i = 0; i < take; ++i) a.connect(level[pos + i], c);
            pos += take;
            next.push_back(c);
            if (created) created->push_back(c);
        }
        level = std::move(next);
    }
    return level;
}

/// Guard, star chain and per-dimension matching states for one vector, plus
/// the collector tree feeding its distance counter.
inline HammingMacro build_hamming_macro(Automaton& a, BitView x, std::uint32_t fan_in, std::int64_t owner = -1,
                                        StreamMode mode = StreamMode::Plain) {
    const auto d = static_cast<std::uint32_t>(x.size());
    if (d == 0) throw std::invalid_argument("cannot build a Hamming macro for a zero-dimensional vector");
    HammingMacro h;
    const std::uint32_t len = codec::data_length(mode, d);
    h.guard = a.add_ste(StreamLayout::sof(), true, {}, Role::Guard, owner);
    ElementId prev = h.guard;
    for (std::uint32_t j = 0; j < len; ++j) {
        const auto s = a.add_ste(StreamLayout::data(), false, {}, Role::Star, owner);
        a.connect(prev, s);
        h.stars.push_back(s);
        prev = s;
    }
    for (std::uint32_t i = 0; i < d; ++i) {
        const auto slot = dimension_slot(i, mode);
        const auto m = a.add_ste(StreamLayout::payload_bit(slot.bit, x[i]), false, {}, Role::Match, owner);
        a.connect(slot.position == 1 ? h.guard : h.stars[slot.position - 2], m);
        h.matches.push_back(m);
    }
    if (mode == StreamMode::CounterIncrement) {
        h.roots = h.matches;
        h.depth = 0;
    } else {
        h.roots = build_collector_tree(a, h.matches, fan_in, owner, &h.collectors);
        h.depth = collector_depth(d, fan_in);
    }
    h.chain_end = {h.stars.back()};
    return h;
}

/// Delay chain of `depth` any-symbol states after `drivers`. Returns the new
/// chain end.
inline std::vector<ElementId> build_delay_chain(Automaton& a, std::vector<ElementId> drivers, std::uint32_t depth,
                                                std::int64_t owner, std::vector<ElementId>* created = nullptr) {
    for (std::uint32_t l = 0; l < depth; ++l) {
        const auto s = a.add_ste(StreamLayout::any(), false, {}, Role::Delay, owner);
        for (auto drv : drivers) a.connect(drv, s);
        drivers = {s};
        if (created) created->push_back(s);
    }
    return drivers;
}

/// Sort state, EOF state, distance counter (threshold d) and reporting state.
/// `sort_drivers` must be active on the cycle before the fill phase, so the
/// sort and EOF states only ever see FILL and EOF and can use one-bit classes.
inline SortingMacro build_sort_stage(Automaton& a, std::span<const ElementId> sort_drivers,
                                     std::span<const ElementId> roots, std::uint32_t dims, std::uint32_t tag,
                                     std::int64_t owner) {
    SortingMacro m;
    m.sort = a.add_ste(StreamLayout::fill_continue(), false, {}, Role::Sort, owner);
    for (auto drv : sort_drivers) a.connect(drv, m.sort);
    a.connect(m.sort, m.sort);
    m.eof = a.add_ste(StreamLayout::fill_exit(), false, {}, Role::Eof, owner);
    a.connect(m.sort, m.eof);
    m.counter = a.add_counter(dims, Role::DistanceCounter, owner);
    for (auto r : roots) a.connect(r, m.counter, Port::Increment);
    a.connect(m.sort, m.counter, Port::Increment);
    a.connect(m.eof, m.counter, Port::Reset);
    m.report = a.add_ste(StreamLayout::any(), false, tag, Role::Report, owner);
    a.connect(m.counter, m.report);
    return m;
}

/// Sorting macro appended to a Hamming macro: the sort state is pushed back
/// by `depth` cycles so sort increments never collide with match increments.
inline SortingMacro build_sorting_macro(Automaton& a, const HammingMacro& h, std::uint32_t dims, std::uint32_t depth,
                                        std::uint32_t tag, std::int64_t owner = -1) {
    std::vector<ElementId> delays;
    const auto end = build_delay_chain(a, h.chain_end, depth, owner, &delays);
    auto m = build_sort_stage(a, end, h.roots, dims, tag, owner);
    m.delays = std::move(delays);
    return m;
}

/// Thrown when a packing group would exceed the fan-out limit.
class PackingError : public std::invalid_argument {
  public:
    PackingError(const std::string& what, std::uint32_t max_legal) : std::invalid_argument(what), max_legal_(max_legal) {}
    std::uint32_t max_legal() const { return max_legal_; }

  private:
    std::uint32_t max_legal_;
};

/// Largest fan-out any element of a P-vector packed NFA needs.
inline std::uint32_t packed_fan_out(std::uint32_t dims, std::uint32_t packing, std::uint32_t fan_in, StreamMode mode) {
    const std::uint32_t depth = delay_depth(dims, fan_in, mode);
    if (mode == StreamMode::CounterIncrement) {
        // star -> next star + the pool states it enables; pool state -> P counters;
        // last star -> P sort states.
        const std::uint32_t per_position = std::min<std::uint32_t>(dims, StreamLayout::kPayloadBits) * 2;
        return std::max({1 + per_position, packing, packing});
    }
    // ladder state -> two successors (or the delay chain) + one collector per
    // vector; delay end -> P sort states. With no delay the last rung drives the
    // sort states and the counters directly.
    const std::uint32_t inner = dims > 1 ? 2 + packing : 0;
    const std::uint32_t last = depth > 0 ? 1 + packing : 2 * packing;
    return std::max({inner, last, depth > 0 ? packing : 0u});
}

inline std::uint32_t max_packing_factor(std::uint32_t dims, std::uint32_t fan_in, std::uint32_t fan_out,
                                        StreamMode mode) {
    std::uint32_t p = 1;
    while (p < 4096 && packed_fan_out(dims, p + 1, fan_in, mode) <= fan_out) ++p;
    return p;
}

/// Vectors sharing one guard and one trellis ladder: rung i holds a value-0
/// and a value-1 state, each fully connected to the next rung. Every vector
/// keeps its own collector tree over the rung states it encodes and its own
/// sorting macro; the delay chain is shared.
///
/// `first_tag` numbers the report states consecutively in group order.
inline std::vector<SortingMacro> apply_vector_packing(Automaton& a, const BitMatrix& group,
                                                      std::span<const std::uint32_t> ids, std::uint32_t first_tag,
                                                      std::uint32_t fan_in, std::uint32_t fan_out,
                                                      StreamMode mode = StreamMode::Plain) {
    const auto d = static_cast<std::uint32_t>(group.dims());
    const auto P = static_cast<std::uint32_t>(group.rows());
    if (d == 0) throw std::invalid_argument("cannot pack zero-dimensional vectors");
    if (P == 0) throw std::invalid_argument("empty packing group");
    if (ids.size() != P) throw std::invalid_argument("packing group ids do not match its vectors");
    if (packed_fan_out(d, P, fan_in, mode) > fan_out) {
        const auto legal = max_packing_factor(d, fan_in, fan_out, mode);
        throw PackingError("packing " + std::to_string(P) + " vectors exceeds the fan-out limit; maximal legal factor is " +
                               std::to_string(legal),
                           legal);
    }
    const std::uint32_t len = codec::data_length(mode, d);
    const std::uint32_t depth = delay_depth(d, fan_in, mode);

    const auto guard = a.add_ste(StreamLayout::sof(), true, {}, Role::Guard);
    // rung[i][v]: state active when dimension i of the query equals v.
    std::vector<std::array<ElementId, 2>> rung(d);
    std::vector<ElementId> chain_end;
    if (mode == StreamMode::CounterIncrement) {
        // Seven dimensions share a symbol, so the rungs hang off a star chain.
        std::vector<ElementId> stars;
        ElementId prev = guard;
        for (std::uint32_t j = 0; j < len; ++j) {
            const auto s = a.add_ste(StreamLayout::data(), false, {}, Role::Star);
            a.connect(prev, s);
            stars.push_back(s);
            prev = s;
        }
        for (std::uint32_t i = 0; i < d; ++i) {
            const auto slot = dimension_slot(i, mode);
            for (int v = 0; v < 2; ++v) {
                rung[i][v] = a.add_ste(StreamLayout::payload_bit(slot.bit, v), false, {}, Role::Ladder);
                a.connect(slot.position == 1 ? guard : stars[slot.position - 2], rung[i][v]);
            }
        }
        chain_end = {stars.back()};
    } else {
        for (std::uint32_t i = 0; i < d; ++i) {
            for (int v = 0; v < 2; ++v) {
                rung[i][v] = a.add_ste(StreamLayout::payload_bit(0, v), false, {}, Role::Ladder);
                if (i == 0) {
                    a.connect(guard, rung[i][v]);
                } else {
                    a.connect(rung[i - 1][0], rung[i][v]);
                    a.connect(rung[i - 1][1], rung[i][v]);
                }
            }
        }
        chain_end = {rung[d - 1][0], rung[d - 1][1]};
    }
    const auto sort_drivers = build_delay_chain(a, chain_end, depth, -1);

    std::vector<SortingMacro> macros;
    for (std::uint32_t v = 0; v < P; ++v) {
        const BitView x = group.row(v);
        std::vector<ElementId> leaves(d);
        for (std::uint32_t i = 0; i < d; ++i) leaves[i] = rung[i][x[i]];
        const auto owner = static_cast<std::int64_t>(ids[v]);
        const auto roots =
            mode == StreamMode::CounterIncrement ? leaves : build_collector_tree(a, leaves, fan_in, owner);
        macros.push_back(build_sort_stage(a, sort_drivers, roots, d, first_tag + v, owner));
    }
    return macros;
}

/// Replicates the image once per payload slice. Slice s matches payload bit s
/// where the original matched bit 0; all other classes are untouched.
inline BoardImage apply_stream_multiplexing(const BoardImage& image) {
    if (image.layout.options.counter_increment)
        throw std::invalid_argument("stream multiplexing cannot be applied to a counter-increment image");
    if (image.layout.options.multiplexing) throw std::invalid_argument("image is already multiplexed");
    const auto& base = image.automaton;
    std::uint32_t tags = 0;
    for (const auto& el : base.elements())
        if (el.is_ste() && el.ste().report_tag) tags = std::max(tags, *el.ste().report_tag + 1);

    BoardImage out;
    out.layout = image.layout;
    out.layout.options.multiplexing = true;
    out.layout.slots.clear();
    out.automaton.metadata = base.metadata;
    out.automaton.metadata.passes.push_back("stream_multiplexing");
    for (unsigned s = 0; s < StreamLayout::kSlices; ++s) {
        Automaton replica = base;
        for (auto& el : replica.elements()) {
            el.slice = static_cast<std::uint8_t>(s);
            if (!el.is_ste()) continue;
            auto& ste = el.ste();
            if (el.role == Role::Match || el.role == Role::Ladder) ste.symbols = ste.symbols.swap_bits(0, s);
            if (ste.report_tag) ste.report_tag = *ste.report_tag + s * tags;
        }
        out.automaton.append(replica);
        for (const auto& slot : image.layout.slots) out.layout.slots.push_back({slot.vector_id, static_cast<std::uint8_t>(s)});
    }
    return out;
}

/// Partitions the report states into groups of p (contiguous tags within one
/// slice). Each group gets a collector over its reports driving a local
/// neighbor counter with threshold k'; the counter's pulse resets every
/// distance counter in the group, suppressing the rest of the group's
/// reports for this frame.
inline BoardImage apply_statistical_reduction(const BoardImage& image, std::uint32_t group_size,
                                              std::uint32_t local_budget) {
    if (local_budget < 1) throw std::invalid_argument("local report budget k' must be at least 1");
    if (local_budget > group_size) throw std::invalid_argument("local report budget k' exceeds group size p");
    if (group_size > image.layout.options.fan_in)
        throw std::invalid_argument("reduction group size exceeds the collector fan-in limit");
    if (image.layout.options.reduction) throw std::invalid_argument("image already carries statistical reduction");

    BoardImage out = image;
    auto& a = out.automaton;
    const auto ntags = image.layout.slots.size();
    std::vector<ElementId> report(ntags, 0), counter(ntags, 0), eof(ntags, 0);
    std::vector<std::uint8_t> found(ntags, 0);
    for (const auto& el : a.elements())
        if (el.is_ste() && el.ste().report_tag) {
            const auto tag = *el.ste().report_tag;
            if (tag >= ntags) throw std::invalid_argument("report tag outside the image layout");
            report[tag] = el.id;
            found[tag] = 1;
        }
    std::vector<ElementId> counter_of_report(a.size(), UINT32_MAX), eof_of_counter(a.size(), UINT32_MAX);
    for (const auto& e : a.edges()) {
        if (e.port == Port::Enable && a[e.from].role == Role::DistanceCounter) counter_of_report[e.to] = e.from;
        if (e.port == Port::Reset && a[e.from].role == Role::Eof) eof_of_counter[e.to] = e.from;
    }
    for (std::size_t t = 0; t < ntags; ++t) {
        if (!found[t] || counter_of_report[report[t]] == UINT32_MAX)
            throw std::invalid_argument("image has a report tag without a distance counter");
        counter[t] = counter_of_report[report[t]];
        eof[t] = eof_of_counter[counter[t]];
        if (eof[t] == UINT32_MAX) throw std::invalid_argument("distance counter without an EOF reset");
    }

    std::size_t t = 0;
    while (t < ntags) {
        std::size_t end = t;
        while (end < ntags && end - t < group_size && image.layout.slots[end].slice == image.layout.slots[t].slice) ++end;
        const auto slice = image.layout.slots[t].slice;
        const auto collector = a.add_ste(StreamLayout::not_sof(), false, {}, Role::GroupCollector);
        const auto local = a.add_counter(local_budget, Role::LocalCounter);
        a[collector].slice = slice;
        a[local].slice = slice;
        for (std::size_t i = t; i < end; ++i) {
            a.connect(report[i], collector);
            a.connect(local, counter[i], Port::Reset);
        }
        a.connect(collector, local, Port::Increment);
        a.connect(eof[t], local, Port::Reset);
        t = end;
    }
    out.layout.options.reduction = ReductionOptions{group_size, local_budget};
    a.metadata.passes.push_back("statistical_reduction");
    return out;
}

/// Compiles a partition into one board image: a Hamming and a sorting macro
/// per vector (or packed groups of them), then the multiplexing and reduction
/// passes the options ask for.
inline BoardImage compile(const DatasetPartition& part, const CompileOptions& opt) {
    opt.check();
    if (part.size() == 0) throw std::invalid_argument("cannot compile an empty partition");
    if (part.size() > opt.capacity)
        throw std::invalid_argument("partition of " + std::to_string(part.size()) +
                                    " vectors exceeds the board capacity of " + std::to_string(opt.capacity));
    if (part.dims == 0) throw std::invalid_argument("cannot compile zero-dimensional vectors");
    if (part.vectors.rows() != part.ids.size() || part.vectors.dims() != part.dims)
        throw std::invalid_argument("malformed partition");
    {
        std::vector<std::uint32_t> sorted(part.ids);
        std::sort(sorted.begin(), sorted.end());
        if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
            throw std::invalid_argument("partition vector ids are not unique");
    }

    const auto d = part.dims;
    const StreamMode base_mode = opt.counter_increment ? StreamMode::CounterIncrement : StreamMode::Plain;
    const auto depth = delay_depth(d, opt.fan_in, base_mode);

    BoardImage img;
    img.layout.dims = d;
    img.layout.data_length = codec::data_length(base_mode, d);
    img.layout.delay_depth = depth;
    img.layout.calibration_base = codec::calibration_base(img.layout.data_length, depth);
    img.layout.partition_index = part.index;
    img.layout.options = opt;
    img.layout.options.multiplexing = false;
    img.layout.options.reduction.reset();

    auto& a = img.automaton;
    a.metadata.dims = d;
    a.metadata.vector_count = static_cast<std::uint32_t>(part.size());
    a.metadata.requires_increment_by_n = opt.counter_increment;

    if (opt.packing >= 2) {
        a.metadata.passes.push_back("vector_packing");
        for (std::size_t first = 0; first < part.size(); first += opt.packing) {
            const std::size_t count = std::min<std::size_t>(opt.packing, part.size() - first);
            BitMatrix group(d);
            for (std::size_t i = 0; i < count; ++i) group.push_back(part.vectors.row(first + i));
            apply_vector_packing(a, group, std::span(part.ids).subspan(first, count),
                                 static_cast<std::uint32_t>(first), opt.fan_in, opt.fan_out, base_mode);
        }
    } else {
        for (std::size_t v = 0; v < part.size(); ++v) {
            const auto owner = static_cast<std::int64_t>(part.ids[v]);
            const auto h = build_hamming_macro(a, part.vectors.row(v), opt.fan_in, owner, base_mode);
            build_sorting_macro(a, h, d, depth, static_cast<std::uint32_t>(v), owner);
        }
    }
    for (std::size_t v = 0; v < part.size(); ++v) img.layout.slots.push_back({part.ids[v], 0});

    if (opt.multiplexing) img = apply_stream_multiplexing(img);
    if (opt.reduction) img = apply_statistical_reduction(img, opt.reduction->group_size, opt.reduction->local_budget);

    const auto report = fabric::validate(img.automaton, opt.fabric());
    if (!report.empty()) throw std::logic_error("compiled image failed validation: " + report.front().message);
    return img;
}

/// Demonstrates the dynamic-threshold extension: `a_symbol` increments
/// counter A, `b_symbol` increments counter B, and B's live count is A's
/// threshold. The reporting state (tag 0) fires once A's count first exceeds
/// B's. `reset_symbol` clears both.
inline Automaton build_comparison_macro(const fabric::FabricConfig& cfg, fabric::Symbol a_symbol = 'a',
                                        fabric::Symbol b_symbol = 'b', fabric::Symbol reset_symbol = 'r') {
    if (!cfg.dynamic_threshold)
        throw std::invalid_argument("the comparison macro needs the dynamic threshold extension");
    Automaton a;
    const auto inc_a = a.add_ste(fabric::SymbolClass::single(a_symbol), true);
    const auto inc_b = a.add_ste(fabric::SymbolClass::single(b_symbol), true);
    const auto rst = a.add_ste(fabric::SymbolClass::single(reset_symbol), true);
    const auto count_b = a.add_counter(std::numeric_limits<std::uint32_t>::max());
    const auto count_a = a.add_counter(fabric::CounterRef{count_b});
    a.connect(inc_a, count_a, Port::Increment);
    a.connect(inc_b, count_b, Port::Increment);
    a.connect(rst, count_a, Port::Reset);
    a.connect(rst, count_b, Port::Reset);
    const auto out = a.add_ste(fabric::SymbolClass::all(), false, 0u, Role::Report);
    a.connect(count_a, out);
    return a;
}

// Layout sidecar serialization.

inline nlohmann::json options_to_json(const CompileOptions& o) {
    nlohmann::json j = {{"packing", o.packing},           {"multiplexing", o.multiplexing},
                        {"counter_increment", o.counter_increment}, {"fan_in", o.fan_in},
                        {"fan_out", o.fan_out},           {"capacity", o.capacity}};
    if (o.reduction) {
        j["reduction"] = {{"group_size", o.reduction->group_size}, {"local_budget", o.reduction->local_budget}};
    } else {
        j["reduction"] = nullptr;
    }
    return j;
}

inline CompileOptions options_from_json(const nlohmann::json& j) {
    CompileOptions o;
    o.packing = j.at("packing").get<std::uint32_t>();
    o.multiplexing = j.at("multiplexing").get<bool>();
    o.counter_increment = j.at("counter_increment").get<bool>();
    o.fan_in = j.at("fan_in").get<std::uint32_t>();
    o.fan_out = j.at("fan_out").get<std::uint32_t>();
    o.capacity = j.at("capacity").get<std::uint32_t>();
    if (!j.at("reduction").is_null())
        o.reduction = ReductionOptions{j["reduction"].at("group_size").get<std::uint32_t>(),
                                       j["reduction"].at("local_budget").get<std::uint32_t>()};
    return o;
}

inline nlohmann::json layout_to_json(const BoardLayout& l) {
    nlohmann::json slots = nlohmann::json::array();
    for (const auto& s : l.slots) slots.push_back({s.vector_id, s.slice});
    return {{"format", "apknn-layout"},
            {"version", 1},
            {"dims", l.dims},
            {"data_length", l.data_length},
            {"delay_depth", l.delay_depth},
            {"calibration_base", l.calibration_base},
            {"frame_length", l.frame_length()},
            {"partition_index", l.partition_index},
            {"options", options_to_json(l.options)},
            {"slots", slots}};
}

inline BoardLayout layout_from_json(const nlohmann::json& j) {
    if (j.value("format", "") != "apknn-layout") throw std::invalid_argument("not a layout sidecar");
    if (j.value("version", 0) != 1) throw std::invalid_argument("unsupported layout sidecar version");
    BoardLayout l;
    l.dims = j.at("dims").get<std::uint32_t>();
    l.data_length = j.at("data_length").get<std::uint32_t>();
    l.delay_depth = j.at("delay_depth").get<std::uint32_t>();
    l.calibration_base = j.at("calibration_base").get<std::uint32_t>();
    l.partition_index = j.at("partition_index").get<std::uint32_t>();
    l.options = options_from_json(j.at("options"));
    for (const auto& s : j.at("slots")) l.slots.push_back({s.at(0).get<std::uint32_t>(), s.at(1).get<std::uint8_t>()});
    if (l.frame_length() != j.at("frame_length").get<std::uint32_t>())
        throw std::invalid_argument("layout sidecar frame length is inconsistent with its geometry");
    return l;
}

}  // namespace apknn::compiler
