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
#include <iomanip>
#include <map>
#include <ostream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "apknn/bits.hpp"
#include "apknn/fabric.hpp"
#include "apknn/knn_compiler.hpp"
#include "apknn/stream_layout.hpp"

namespace apknn::codec {

struct QueryBatch {
    std::vector<std::uint32_t> ids;
    BitMatrix queries;

    std::size_t size() const { return ids.size(); }
    std::size_t dims() const { return queries.dims(); }

    /// Queries numbered 0..n-1 in row order.
    static QueryBatch from_matrix(BitMatrix m) {
        QueryBatch b;
        b.ids.resize(m.rows());
        for (std::size_t i = 0; i < m.rows(); ++i) b.ids[i] = static_cast<std::uint32_t>(i);
        b.queries = std::move(m);
        return b;
    }
};

struct Frame {
    std::uint64_t start = 0;
    std::vector<std::uint32_t> query_ids;  // query carried by slice s, one entry per used slice
};

struct EncodedStream {
    std::vector<Symbol> symbols;
    std::vector<Frame> frames;
    std::uint32_t frame_length = 0;
};

/// Frames of SOF, data phase, d + L + 1 FILL symbols and EOF. Each frame
/// carries one query, or up to seven in multiplexed mode.
inline EncodedStream encode(const QueryBatch& batch, std::uint32_t dims, std::uint32_t delay_depth, StreamMode mode) {
    if (batch.size() == 0) throw std::invalid_argument("cannot encode an empty query batch");
    if (batch.ids.size() != batch.queries.rows()) throw std::invalid_argument("query batch ids do not match its rows");
    if (batch.dims() != dims)
        throw std::invalid_argument("query length " + std::to_string(batch.dims()) + " does not match d = " +
                                    std::to_string(dims));
    if (dims == 0) throw std::invalid_argument("cannot encode zero-dimensional queries");

    const std::uint32_t len = data_length(mode, dims);
    const std::size_t per_frame = mode == StreamMode::Multiplexed ? StreamLayout::kSlices : 1;
    EncodedStream out;
    out.frame_length = frame_length(len, dims, delay_depth);
    const std::size_t nframes = (batch.size() + per_frame - 1) / per_frame;
    out.symbols.reserve(nframes * out.frame_length);

    for (std::size_t f = 0; f < nframes; ++f) {
        Frame frame;
        frame.start = out.symbols.size();
        const std::size_t first = f * per_frame;
        const std::size_t count = std::min(per_frame, batch.size() - first);
        for (std::size_t s = 0; s < count; ++s) frame.query_ids.push_back(batch.ids[first + s]);

        out.symbols.push_back(StreamLayout::kSof);
        for (std::uint32_t j = 0; j < len; ++j) {
            unsigned payload = 0;
            if (mode == StreamMode::CounterIncrement) {
                const BitView q = batch.queries.row(first);
                for (unsigned b = 0; b < StreamLayout::kPayloadBits; ++b) {
                    const std::uint32_t i = j * StreamLayout::kPayloadBits + b;
                    if (i < dims && q[i]) payload |= 1u << b;
                }
            } else {
                for (std::size_t s = 0; s < count; ++s)
                    if (batch.queries.row(first + s)[j]) payload |= 1u << s;
            }
            out.symbols.push_back(static_cast<Symbol>(payload));
        }
        out.symbols.insert(out.symbols.end(), dims + delay_depth + 1, StreamLayout::kFill);
        out.symbols.push_back(StreamLayout::kEof);
        out.frames.push_back(std::move(frame));
    }
    return out;
}

/// Encodes a batch for the geometry a board image was compiled with.
inline EncodedStream encode(const QueryBatch& batch, const compiler::BoardLayout& layout) {
    return encode(batch, layout.dims, layout.delay_depth, layout.mode());
}

/// Variant for callers that supply a pre-split multiplexed frame; rejects
/// more queries than slices.
inline EncodedStream encode_frame(const QueryBatch& batch, std::uint32_t dims, std::uint32_t delay_depth,
                                  StreamMode mode) {
    const std::size_t limit = mode == StreamMode::Multiplexed ? StreamLayout::kSlices : 1;
    if (batch.size() > limit)
        throw std::invalid_argument(std::to_string(batch.size()) + " queries exceed the " + std::to_string(limit) +
                                    " slices of one frame");
    return encode(batch, dims, delay_depth, mode);
}

struct Neighbor {
    std::uint32_t id = 0;
    std::uint32_t distance = 0;

    bool operator==(const Neighbor&) const = default;
    friend bool operator<(const Neighbor& a, const Neighbor& b) {
        return a.distance != b.distance ? a.distance < b.distance : a.id < b.id;
    }
};

struct KnnResult {
    std::uint32_t query_id = 0;
    std::vector<Neighbor> neighbors;

    bool operator==(const KnnResult&) const = default;
};

/// Turns report events into per-query candidate lists, one per query of the
/// stream, in frame order. Each list is sorted by (distance, id) and truncated
/// to k.
inline std::vector<KnnResult> decode(std::span<const fabric::ReportEvent> events, const EncodedStream& stream,
                                     const compiler::BoardLayout& layout, std::size_t k) {
    std::vector<KnnResult> results;
    std::vector<std::size_t> first_result(stream.frames.size());
    for (std::size_t f = 0; f < stream.frames.size(); ++f) {
        first_result[f] = results.size();
        for (auto q : stream.frames[f].query_ids) results.push_back({q, {}});
    }
    const std::uint64_t flen = stream.frame_length;
    if (flen == 0 && !events.empty()) throw std::invalid_argument("stream has no frame geometry");
    std::vector<std::vector<std::uint8_t>> seen(results.size());

    for (const auto& ev : events) {
        if (ev.tag >= layout.slots.size())
            throw std::invalid_argument("report tag " + std::to_string(ev.tag) + " is not in the layout");
        const std::uint64_t f = ev.offset / flen;
        if (f >= stream.frames.size() || stream.frames[f].start != f * flen)
            throw std::invalid_argument("report at offset " + std::to_string(ev.offset) + " lies outside every frame");
        const std::uint64_t rel = ev.offset - stream.frames[f].start;
        if (rel < layout.calibration_base || rel > layout.calibration_base + layout.dims)
            throw std::invalid_argument("report at offset " + std::to_string(ev.offset) +
                                        " lies outside its frame's report window");
        const auto& slot = layout.slots[ev.tag];
        if (slot.slice >= stream.frames[f].query_ids.size()) continue;  // slice without a query
        const auto r = first_result[f] + slot.slice;
        auto& s = seen[r];
        if (s.empty()) s.assign(layout.slots.size(), 0);
        if (s[ev.tag]) throw std::invalid_argument("report tag " + std::to_string(ev.tag) + " fired twice in one frame");
        s[ev.tag] = 1;
        results[r].neighbors.push_back({slot.vector_id, static_cast<std::uint32_t>(rel - layout.calibration_base)});
    }
    for (auto& r : results) {
        std::sort(r.neighbors.begin(), r.neighbors.end());
        if (r.neighbors.size() > k) r.neighbors.resize(k);
    }
    return results;
}

/// Merges candidate lists for one query coming from disjoint partitions.
inline KnnResult merge_partitions(std::span<const KnnResult> partials, std::size_t k) {
    KnnResult out;
    if (!partials.empty()) out.query_id = partials.front().query_id;
    std::unordered_set<std::uint32_t> ids;
    for (const auto& p : partials) {
        if (p.query_id != out.query_id) throw std::invalid_argument("partials belong to different queries");
        for (const auto& n : p.neighbors) {
            if (!ids.insert(n.id).second)
                throw std::invalid_argument("vector id " + std::to_string(n.id) + " appears in more than one partition");
            out.neighbors.push_back(n);
        }
    }
    std::sort(out.neighbors.begin(), out.neighbors.end());
    if (out.neighbors.size() > k) out.neighbors.resize(k);
    return out;
}

inline KnnResult merge_partitions(const KnnResult& a, const KnnResult& b, std::size_t k) {
    const KnnResult both[] = {a, b};
    return merge_partitions(both, k);
}

/// Folds the per-partition result lists of a whole batch: `partials[p][q]`
/// is partition p's list for query q.
inline std::vector<KnnResult> merge_batches(std::span<const std::vector<KnnResult>> partials, std::size_t k) {
    if (partials.empty()) return {};
    const std::size_t nq = partials.front().size();
    std::vector<KnnResult> out(nq);
    std::vector<KnnResult> column;
    for (std::size_t q = 0; q < nq; ++q) {
        column.clear();
        for (const auto& p : partials) {
            if (p.size() != nq) throw std::invalid_argument("partition result lists differ in length");
            column.push_back(p[q]);
        }
        out[q] = merge_partitions(column, k);
    }
    return out;
}

inline nlohmann::json to_json(const KnnResult& r) {
    nlohmann::json n = nlohmann::json::array();
    for (const auto& x : r.neighbors) n.push_back({{"id", x.id}, {"distance", x.distance}});
    return {{"query_id", r.query_id}, {"neighbors", n}};
}

inline KnnResult result_from_json(const nlohmann::json& j) {
    KnnResult r;
    r.query_id = j.at("query_id").get<std::uint32_t>();
    for (const auto& n : j.at("neighbors"))
        r.neighbors.push_back({n.at("id").get<std::uint32_t>(), n.at("distance").get<std::uint32_t>()});
    return r;
}

/// One JSON record per line.
inline void write_results(std::ostream& os, std::span<const KnnResult> results) {
    for (const auto& r : results) os << to_json(r).dump() << '\n';
}

inline std::vector<KnnResult> read_results(std::istream& is) {
    std::vector<KnnResult> out;
    std::string line;
    while (std::getline(is, line))
        if (!line.empty()) out.push_back(result_from_json(nlohmann::json::parse(line)));
    return out;
}

/// Hex dump, one frame per line when `frame_length` is nonzero.
inline std::string to_hex(std::span<const Symbol> symbols, std::size_t frame_length = 0) {
    std::ostringstream os;
    os << std::hex << std::setfill('0');
    for (std::size_t i = 0; i < symbols.size(); ++i) {
        os << std::setw(2) << unsigned(symbols[i]);
        if (frame_length && (i + 1) % frame_length == 0) os << '\n';
    }
    return os.str();
}

inline std::vector<Symbol> from_hex(std::string_view text) {
    std::vector<Symbol> out;
    int hi = -1;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (c == ' ' || c == '\n' || c == '\r' || c == '\t') continue;
        int v;
        if (c >= '0' && c <= '9') v = c - '0';
        else if (c >= 'a' && c <= 'f') v = c - 'a' + 10;
        else if (c >= 'A' && c <= 'F') v = c - 'A' + 10;
        else throw std::invalid_argument("invalid hex digit at position " + std::to_string(i));
        if (hi < 0) {
            hi = v;
        } else {
            out.push_back(static_cast<Symbol>(hi << 4 | v));
            hi = -1;
        }
    }
    if (hi >= 0) throw std::invalid_argument("hex stream has an odd number of digits");
    return out;
}

}  // namespace apknn::codec
