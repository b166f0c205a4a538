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
#include <map>
#include <numeric>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "apknn/bits.hpp"
#include "apknn/knn_compiler.hpp"
#include "apknn/oracle.hpp"
#include "apknn/perf_model.hpp"
#include "apknn/pipeline.hpp"
#include "apknn/stream_codec.hpp"

namespace apknn::index {

enum class IndexKind { Linear, KdTree, KMeans, Lsh };

inline std::string to_string(IndexKind k) {
    switch (k) {
        case IndexKind::Linear: return "linear";
        case IndexKind::KdTree: return "kdtree";
        case IndexKind::KMeans: return "kmeans";
        case IndexKind::Lsh: return "lsh";
    }
    return "?";
}

inline IndexKind kind_from_string(const std::string& s) {
    if (s == "linear") return IndexKind::Linear;
    if (s == "kdtree") return IndexKind::KdTree;
    if (s == "kmeans") return IndexKind::KMeans;
    if (s == "lsh") return IndexKind::Lsh;
    throw std::invalid_argument("unknown index kind '" + s + "'");
}

struct IndexParams {
    IndexKind kind = IndexKind::KdTree;
    std::uint32_t capacity = 1024;   // bucket size limit, one board image each
    std::uint32_t trees = 4;         // kd-trees, or hash tables for LSH
    std::uint32_t branching = 2;     // k-means
    std::uint32_t iterations = 10;   // k-means Lloyd rounds per node
    std::uint32_t bits_per_key = 16; // LSH
    std::uint32_t top_variance = 5;  // kd split candidates
    std::uint64_t seed = 1;

    bool operator==(const IndexParams&) const = default;
};

/// kd node: internal nodes split on `dim` (bit 0 left, bit 1 right); a node
/// with `bucket >= 0` is a leaf. Nodes split without a usable dimension
/// (identical points) carry dim = -1 and send queries left.
struct KdNode {
    std::int32_t dim = -1;
    std::int32_t left = -1;
    std::int32_t right = -1;
    std::int32_t bucket = -1;

    bool operator==(const KdNode&) const = default;
};

struct KMeansNode {
    std::vector<BitVector> centers;     // one per child
    std::vector<std::int32_t> children;
    std::int32_t bucket = -1;

    bool operator==(const KMeansNode&) const = default;
};

struct LshTable {
    std::vector<std::uint32_t> bits;                                // sampled dimensions
    std::map<std::string, std::vector<std::uint32_t>> chains;       // key -> bucket chain

    std::string key(BitView v) const {
        std::string k(bits.size(), '0');
        for (std::size_t i = 0; i < bits.size(); ++i) k[i] = v[bits[i]] ? '1' : '0';
        return k;
    }
    bool operator==(const LshTable&) const = default;
};

struct IndexStructure {
    IndexParams params;
    std::uint32_t dims = 0;
    std::uint64_t n = 0;
    std::vector<std::vector<std::uint32_t>> buckets;  // dataset ids per bucket
    std::vector<std::vector<KdNode>> kd_trees;        // node 0 is the root
    std::vector<KMeansNode> kmeans;                   // node 0 is the root
    std::vector<LshTable> lsh;

    bool operator==(const IndexStructure&) const = default;
};

namespace detail {

inline std::int32_t add_bucket(IndexStructure& idx, std::vector<std::uint32_t> ids) {
    idx.buckets.push_back(std::move(ids));
    return static_cast<std::int32_t>(idx.buckets.size() - 1);
}

inline std::int32_t build_kd_node(IndexStructure& idx, std::vector<KdNode>& nodes, const BitMatrix& data,
                                  std::vector<std::uint32_t> ids, std::mt19937_64& rng) {
    const auto me = static_cast<std::int32_t>(nodes.size());
    nodes.emplace_back();
    if (ids.size() <= idx.params.capacity) {
        nodes[me].bucket = add_bucket(idx, std::move(ids));
        return me;
    }
    std::vector<std::uint64_t> ones(data.dims(), 0);
    for (auto id : ids) {
        const auto row = data.row(id);
        for (std::size_t w = 0; w < row.words.size(); ++w)
            for (auto word = row.words[w]; word; word &= word - 1)
                ++ones[w * 64 + static_cast<std::size_t>(std::countr_zero(word))];
    }
    std::vector<std::uint32_t> order(data.dims());
    std::iota(order.begin(), order.end(), 0u);
    const double m = double(ids.size());
    auto variance = [&](std::uint32_t dim) {
        const double p = double(ones[dim]) / m;
        return p * (1 - p);
    };
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return variance(a) > variance(b); });
    std::vector<std::uint32_t> candidates;
    for (std::size_t i = 0; i < order.size() && candidates.size() < idx.params.top_variance; ++i)
        if (variance(order[i]) > 0) candidates.push_back(order[i]);

    std::vector<std::uint32_t> lo, hi;
    std::int32_t dim = -1;
    if (!candidates.empty()) {
        dim = static_cast<std::int32_t>(candidates[rng() % candidates.size()]);
        for (auto id : ids) (data.row(id)[static_cast<std::size_t>(dim)] ? hi : lo).push_back(id);
    } else {
        // Every point identical: halve by position so recursion terminates.
        lo.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(ids.size() / 2));
        hi.assign(ids.begin() + static_cast<std::ptrdiff_t>(ids.size() / 2), ids.end());
    }
    ids.clear();
    ids.shrink_to_fit();
    const auto l = build_kd_node(idx, nodes, data, std::move(lo), rng);
    const auto r = build_kd_node(idx, nodes, data, std::move(hi), rng);
    nodes[me].dim = dim;
    nodes[me].left = l;
    nodes[me].right = r;
    return me;
}

inline BitVector majority(const BitMatrix& data, std::span<const std::uint32_t> ids) {
    std::vector<std::uint32_t> ones(data.dims(), 0);
    for (auto id : ids) {
        const auto row = data.row(id);
        for (std::size_t i = 0; i < data.dims(); ++i) ones[i] += row[i];
    }
    BitVector c(data.dims());
    for (std::size_t i = 0; i < data.dims(); ++i) c.set(i, 2 * ones[i] > ids.size());
    return c;
}

inline std::size_t nearest(std::span<const BitVector> centers, BitView v) {
    std::size_t best = 0;
    std::uint32_t best_d = UINT32_MAX;
    for (std::size_t c = 0; c < centers.size(); ++c) {
        const auto d = hamming(centers[c], v);
        if (d < best_d) {
            best_d = d;
            best = c;
        }
    }
    return best;
}

inline std::int32_t build_kmeans_node(IndexStructure& idx, const BitMatrix& data, std::vector<std::uint32_t> ids,
                                      std::mt19937_64& rng) {
    const auto me = static_cast<std::int32_t>(idx.kmeans.size());
    idx.kmeans.emplace_back();
    if (ids.size() <= idx.params.capacity) {
        idx.kmeans[me].bucket = add_bucket(idx, std::move(ids));
        return me;
    }
    const std::size_t b = std::min<std::size_t>(idx.params.branching, ids.size());
    std::vector<std::uint32_t> pick(ids);
    std::shuffle(pick.begin(), pick.end(), rng);
    std::vector<BitVector> centers;
    for (std::size_t i = 0; i < b; ++i) centers.emplace_back(data.row(pick[i]));

    std::vector<std::vector<std::uint32_t>> groups(b);
    for (std::uint32_t it = 0; it <= idx.params.iterations; ++it) {
        for (auto& g : groups) g.clear();
        for (auto id : ids) groups[nearest(centers, data.row(id))].push_back(id);
        if (it == idx.params.iterations) break;
        bool moved = false;
        for (std::size_t c = 0; c < b; ++c) {
            if (groups[c].empty()) continue;
            auto next = majority(data, groups[c]);
            if (!(next == centers[c])) moved = true;
            centers[c] = std::move(next);
        }
        if (!moved) break;
    }
    const bool degenerate = std::any_of(groups.begin(), groups.end(), [&](const auto& g) { return g.size() == ids.size(); });
    if (degenerate) {
        // Clusters collapsed: cut into equal chunks instead.
        for (auto& g : groups) g.clear();
        for (std::size_t i = 0; i < ids.size(); ++i) groups[i * b / ids.size()].push_back(ids[i]);
        for (std::size_t c = 0; c < b; ++c) centers[c] = majority(data, groups[c]);
    }
    ids.clear();
    ids.shrink_to_fit();
    std::vector<BitVector> kept;
    std::vector<std::int32_t> children;
    for (std::size_t c = 0; c < b; ++c) {
        if (groups[c].empty()) continue;
        kept.push_back(centers[c]);
        children.push_back(build_kmeans_node(idx, data, std::move(groups[c]), rng));
    }
    idx.kmeans[me].centers = std::move(kept);
    idx.kmeans[me].children = std::move(children);
    return me;
}

}  // namespace detail

inline void check_dataset(const BitMatrix& data) {
    if (data.dims() == 0) throw std::invalid_argument("index needs d > 0");
    if (data.rows() == 0) throw std::invalid_argument("index needs at least one vector");
}

inline IndexStructure build_linear(const BitMatrix& data, IndexParams params = {}) {
    check_dataset(data);
    params.kind = IndexKind::Linear;
    if (params.capacity == 0) throw std::invalid_argument("bucket capacity must be positive");
    IndexStructure idx{params, static_cast<std::uint32_t>(data.dims()), data.rows(), {}, {}, {}, {}};
    for (std::size_t first = 0; first < data.rows(); first += params.capacity) {
        std::vector<std::uint32_t> ids;
        for (std::size_t i = first; i < std::min<std::size_t>(data.rows(), first + params.capacity); ++i)
            ids.push_back(static_cast<std::uint32_t>(i));
        detail::add_bucket(idx, std::move(ids));
    }
    return idx;
}

inline IndexStructure build_kdtree(const BitMatrix& data, IndexParams params = {}) {
    check_dataset(data);
    params.kind = IndexKind::KdTree;
    if (params.capacity == 0 || params.trees == 0 || params.top_variance == 0)
        throw std::invalid_argument("kd-tree needs positive capacity, tree count and candidate count");
    IndexStructure idx{params, static_cast<std::uint32_t>(data.dims()), data.rows(), {}, {}, {}, {}};
    std::vector<std::uint32_t> all(data.rows());
    std::iota(all.begin(), all.end(), 0u);
    for (std::uint32_t t = 0; t < params.trees; ++t) {
        std::mt19937_64 rng(oracle::trial_seed(params.seed, t));
        std::vector<KdNode> nodes;
        detail::build_kd_node(idx, nodes, data, all, rng);
        idx.kd_trees.push_back(std::move(nodes));
    }
    return idx;
}

inline IndexStructure build_kmeans(const BitMatrix& data, IndexParams params = {}) {
    check_dataset(data);
    params.kind = IndexKind::KMeans;
    if (params.branching < 2) throw std::invalid_argument("k-means branching must be at least 2");
    if (params.capacity == 0) throw std::invalid_argument("bucket capacity must be positive");
    IndexStructure idx{params, static_cast<std::uint32_t>(data.dims()), data.rows(), {}, {}, {}, {}};
    std::vector<std::uint32_t> all(data.rows());
    std::iota(all.begin(), all.end(), 0u);
    std::mt19937_64 rng(params.seed);
    detail::build_kmeans_node(idx, data, std::move(all), rng);
    return idx;
}

inline IndexStructure build_lsh(const BitMatrix& data, IndexParams params = {}) {
    check_dataset(data);
    params.kind = IndexKind::Lsh;
    if (params.bits_per_key == 0) throw std::invalid_argument("LSH needs at least one bit per key");
    if (params.trees == 0 || params.capacity == 0) throw std::invalid_argument("LSH needs tables and capacity > 0");
    IndexStructure idx{params, static_cast<std::uint32_t>(data.dims()), data.rows(), {}, {}, {}, {}};
    const auto key_bits = std::min<std::uint32_t>(params.bits_per_key, static_cast<std::uint32_t>(data.dims()));
    for (std::uint32_t t = 0; t < params.trees; ++t) {
        std::mt19937_64 rng(oracle::trial_seed(params.seed, t));
        LshTable table;
        std::vector<std::uint32_t> dims(data.dims());
        std::iota(dims.begin(), dims.end(), 0u);
        std::shuffle(dims.begin(), dims.end(), rng);
        table.bits.assign(dims.begin(), dims.begin() + key_bits);
        std::sort(table.bits.begin(), table.bits.end());
        std::map<std::string, std::vector<std::uint32_t>> members;
        for (std::size_t i = 0; i < data.rows(); ++i) members[table.key(data.row(i))].push_back(static_cast<std::uint32_t>(i));
        for (auto& [key, ids] : members) {
            auto& chain = table.chains[key];
            for (std::size_t first = 0; first < ids.size(); first += params.capacity) {
                const auto last = std::min<std::size_t>(ids.size(), first + params.capacity);
                chain.push_back(static_cast<std::uint32_t>(detail::add_bucket(
                    idx, std::vector<std::uint32_t>(ids.begin() + static_cast<std::ptrdiff_t>(first),
                                                    ids.begin() + static_cast<std::ptrdiff_t>(last)))));
            }
        }
        idx.lsh.push_back(std::move(table));
    }
    return idx;
}

inline IndexStructure build(const BitMatrix& data, const IndexParams& params) {
    switch (params.kind) {
        case IndexKind::Linear: return build_linear(data, params);
        case IndexKind::KdTree: return build_kdtree(data, params);
        case IndexKind::KMeans: return build_kmeans(data, params);
        case IndexKind::Lsh: return build_lsh(data, params);
    }
    throw std::invalid_argument("unknown index kind");
}

/// Buckets one query visits: a leaf per kd-tree, the nearest-center leaf for
/// k-means, the key's chain per LSH table, every bucket for the linear index.
/// Sorted and deduplicated.
inline std::vector<std::uint32_t> traverse(const IndexStructure& idx, BitView q) {
    if (q.size() != idx.dims) throw std::invalid_argument("query dimensionality does not match the index");
    std::vector<std::uint32_t> out;
    switch (idx.params.kind) {
        case IndexKind::Linear:
            out.resize(idx.buckets.size());
            std::iota(out.begin(), out.end(), 0u);
            break;
        case IndexKind::KdTree:
            for (const auto& tree : idx.kd_trees) {
                std::int32_t cur = 0;
                while (tree[cur].bucket < 0) {
                    const auto& nd = tree[cur];
                    cur = nd.dim >= 0 && q[static_cast<std::size_t>(nd.dim)] ? nd.right : nd.left;
                }
                out.push_back(static_cast<std::uint32_t>(tree[cur].bucket));
            }
            break;
        case IndexKind::KMeans: {
            std::int32_t cur = 0;
            while (idx.kmeans[cur].bucket < 0) {
                const auto& nd = idx.kmeans[cur];
                cur = nd.children[detail::nearest(nd.centers, q)];
            }
            out.push_back(static_cast<std::uint32_t>(idx.kmeans[cur].bucket));
            break;
        }
        case IndexKind::Lsh:
            for (const auto& table : idx.lsh) {
                const auto it = table.chains.find(table.key(q));
                if (it != table.chains.end()) out.insert(out.end(), it->second.begin(), it->second.end());
            }
            break;
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

struct BucketVisit {
    std::uint32_t bucket = 0;
    std::vector<std::uint32_t> queries;  // row indices into the query batch

    bool operator==(const BucketVisit&) const = default;
};

/// Ordered bucket visits; every distinct bucket appears once with all the
/// queries routed to it.
struct BucketPlan {
    std::vector<BucketVisit> visits;

    perf::IndexStats stats() const {
        perf::IndexStats s;
        for (const auto& v : visits) s.queries_per_bucket.push_back(v.queries.size());
        return s;
    }
};

inline BucketPlan plan(const IndexStructure& idx, const BitMatrix& queries) {
    std::map<std::uint32_t, std::vector<std::uint32_t>> by_bucket;
    for (std::size_t i = 0; i < queries.rows(); ++i)
        for (auto b : traverse(idx, queries.row(i))) by_bucket[b].push_back(static_cast<std::uint32_t>(i));
    BucketPlan p;
    for (auto& [b, qs] : by_bucket) p.visits.push_back({b, std::move(qs)});
    return p;
}

enum class ScanMode { Fast, Simulated };

struct SearchOutcome {
    BucketPlan plan;
    std::vector<codec::KnnResult> results;  // batch order
};

/// Candidate union keeping one entry per vector id, then the usual order.
inline void merge_candidates(codec::KnnResult& into, const codec::KnnResult& more, std::size_t k) {
    into.neighbors.insert(into.neighbors.end(), more.neighbors.begin(), more.neighbors.end());
    std::sort(into.neighbors.begin(), into.neighbors.end());
    std::vector<codec::Neighbor> kept;
    std::vector<std::uint32_t> seen;
    for (const auto& n : into.neighbors) {
        if (std::find(seen.begin(), seen.end(), n.id) != seen.end()) continue;
        seen.push_back(n.id);
        kept.push_back(n);
        if (kept.size() == k) break;
    }
    into.neighbors = std::move(kept);
}

inline SearchOutcome search(const IndexStructure& idx, const BitMatrix& data, const codec::QueryBatch& batch,
                            std::size_t k, ScanMode mode = ScanMode::Fast, compiler::CompileOptions opt = {}) {
    if (k < 1) throw std::invalid_argument("k must be at least 1");
    if (data.dims() != idx.dims || batch.dims() != idx.dims)
        throw std::invalid_argument("dataset, queries and index disagree on dimensionality");
    if (data.rows() != idx.n) throw std::invalid_argument("dataset size does not match the index");
    SearchOutcome out;
    out.plan = plan(idx, batch.queries);
    out.results.resize(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) out.results[i].query_id = batch.ids[i];
    opt.capacity = std::max<std::uint32_t>(opt.capacity, idx.params.capacity);

    for (const auto& visit : out.plan.visits) {
        const auto& ids = idx.buckets[visit.bucket];
        const auto part = compiler::DatasetPartition::from_ids(data, ids, visit.bucket);
        codec::QueryBatch sub;
        sub.queries = BitMatrix(data.dims());
        for (auto q : visit.queries) {
            sub.ids.push_back(batch.ids[q]);
            sub.queries.push_back(batch.queries.row(q));
        }
        std::vector<codec::KnnResult> partial;
        if (mode == ScanMode::Fast) {
            partial = oracle::knn_exact(part.vectors, sub, k, part.ids);
        } else {
            const auto image = compiler::compile(part, opt);
            partial = query_image(image, sub, k);
        }
        for (std::size_t j = 0; j < visit.queries.size(); ++j) merge_candidates(out.results[visit.queries[j]], partial[j], k);
    }
    return out;
}

/// Fraction of the exact top-k ids recovered, averaged over queries.
inline double recall_at_k(std::span<const codec::KnnResult> approx, std::span<const codec::KnnResult> exact) {
    if (approx.size() != exact.size()) throw std::invalid_argument("result lists differ in length");
    double sum = 0;
    std::size_t counted = 0;
    for (std::size_t i = 0; i < exact.size(); ++i) {
        if (exact[i].neighbors.empty()) continue;
        std::size_t hit = 0;
        for (const auto& e : exact[i].neighbors)
            hit += std::any_of(approx[i].neighbors.begin(), approx[i].neighbors.end(),
                               [&](const auto& a) { return a.id == e.id; });
        sum += double(hit) / double(exact[i].neighbors.size());
        ++counted;
    }
    return counted ? sum / double(counted) : 1.0;
}

// Persistence.

inline constexpr int kIndexVersion = 1;

inline nlohmann::json to_json(const IndexStructure& idx) {
    const auto& p = idx.params;
    nlohmann::json j = {{"format", "apknn-index"},
                        {"version", kIndexVersion},
                        {"kind", to_string(p.kind)},
                        {"params",
                         {{"capacity", p.capacity},
                          {"trees", p.trees},
                          {"branching", p.branching},
                          {"iterations", p.iterations},
                          {"bits_per_key", p.bits_per_key},
                          {"top_variance", p.top_variance}}},
                        {"seed", p.seed},
                        {"dims", idx.dims},
                        {"n", idx.n},
                        {"buckets", idx.buckets}};
    if (!idx.kd_trees.empty()) {
        auto trees = nlohmann::json::array();
        for (const auto& t : idx.kd_trees) {
            auto nodes = nlohmann::json::array();
            for (const auto& nd : t) nodes.push_back({nd.dim, nd.left, nd.right, nd.bucket});
            trees.push_back(nodes);
        }
        j["kd_trees"] = trees;
    }
    if (!idx.kmeans.empty()) {
        auto nodes = nlohmann::json::array();
        for (const auto& nd : idx.kmeans) {
            auto centers = nlohmann::json::array();
            for (const auto& c : nd.centers) centers.push_back(c.to_string());
            nodes.push_back({{"centers", centers}, {"children", nd.children}, {"bucket", nd.bucket}});
        }
        j["kmeans"] = nodes;
    }
    if (!idx.lsh.empty()) {
        auto tables = nlohmann::json::array();
        for (const auto& t : idx.lsh) tables.push_back({{"bits", t.bits}, {"chains", t.chains}});
        j["lsh"] = tables;
    }
    return j;
}

inline IndexStructure index_from_json(const nlohmann::json& j) {
    if (j.value("format", "") != "apknn-index") throw std::invalid_argument("not an index file");
    if (j.value("version", 0) != kIndexVersion) throw std::invalid_argument("unsupported index file version");
    IndexStructure idx;
    auto& p = idx.params;
    p.kind = kind_from_string(j.at("kind").get<std::string>());
    const auto& jp = j.at("params");
    p.capacity = jp.at("capacity").get<std::uint32_t>();
    p.trees = jp.at("trees").get<std::uint32_t>();
    p.branching = jp.at("branching").get<std::uint32_t>();
    p.iterations = jp.at("iterations").get<std::uint32_t>();
    p.bits_per_key = jp.at("bits_per_key").get<std::uint32_t>();
    p.top_variance = jp.at("top_variance").get<std::uint32_t>();
    p.seed = j.at("seed").get<std::uint64_t>();
    idx.dims = j.at("dims").get<std::uint32_t>();
    idx.n = j.at("n").get<std::uint64_t>();
    idx.buckets = j.at("buckets").get<std::vector<std::vector<std::uint32_t>>>();
    if (j.contains("kd_trees"))
        for (const auto& t : j["kd_trees"]) {
            std::vector<KdNode> nodes;
            for (const auto& nd : t)
                nodes.push_back({nd.at(0).get<std::int32_t>(), nd.at(1).get<std::int32_t>(), nd.at(2).get<std::int32_t>(),
                                 nd.at(3).get<std::int32_t>()});
            idx.kd_trees.push_back(std::move(nodes));
        }
    if (j.contains("kmeans"))
        for (const auto& nd : j["kmeans"]) {
            KMeansNode k;
            for (const auto& c : nd.at("centers")) k.centers.push_back(BitVector::from_string(c.get<std::string>()));
            k.children = nd.at("children").get<std::vector<std::int32_t>>();
            k.bucket = nd.at("bucket").get<std::int32_t>();
            idx.kmeans.push_back(std::move(k));
        }
    if (j.contains("lsh"))
        for (const auto& t : j["lsh"]) {
            LshTable table;
            table.bits = t.at("bits").get<std::vector<std::uint32_t>>();
            table.chains = t.at("chains").get<std::map<std::string, std::vector<std::uint32_t>>>();
            idx.lsh.push_back(std::move(table));
        }
    for (const auto& b : idx.buckets)
        for (auto id : b)
            if (id >= idx.n) throw std::invalid_argument("index bucket references vector " + std::to_string(id));
    return idx;
}

}  // namespace apknn::index
