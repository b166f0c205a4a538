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
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include "apknn/bits.hpp"
#include "apknn/stream_codec.hpp"

namespace apknn::oracle {

using apknn::hamming;
using codec::KnnResult;
using codec::Neighbor;

/// Full scan: distance to every row, sorted by (distance, id), first k kept.
/// `ids` defaults to the row numbers.
inline KnnResult knn_exact(const BitMatrix& data, BitView query, std::size_t k, std::uint32_t query_id = 0,
                           std::span<const std::uint32_t> ids = {}) {
    if (data.rows() == 0) throw std::invalid_argument("knn_exact: empty dataset");
    if (query.size() != data.dims()) throw std::invalid_argument("knn_exact: query and dataset dimensions differ");
    if (!ids.empty() && ids.size() != data.rows()) throw std::invalid_argument("knn_exact: ids do not match rows");
    KnnResult r{query_id, {}};
    r.neighbors.reserve(data.rows());
    for (std::size_t i = 0; i < data.rows(); ++i)
        r.neighbors.push_back({ids.empty() ? static_cast<std::uint32_t>(i) : ids[i], hamming(data.row(i), query)});
    const auto keep = std::min(k, r.neighbors.size());
    std::partial_sort(r.neighbors.begin(), r.neighbors.begin() + static_cast<std::ptrdiff_t>(keep), r.neighbors.end());
    r.neighbors.resize(keep);
    return r;
}

inline std::vector<KnnResult> knn_exact(const BitMatrix& data, const codec::QueryBatch& batch, std::size_t k,
                                        std::span<const std::uint32_t> ids = {}) {
    std::vector<KnnResult> out;
    out.reserve(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) out.push_back(knn_exact(data, batch.queries.row(i), k, batch.ids[i], ids));
    return out;
}

struct ExperimentConfig {
    std::uint32_t n = 1024;
    std::uint32_t group_size = 16;  // p
    std::uint32_t k = 16;
    std::uint32_t local_budget = 4;  // k'
    std::uint32_t dims = 256;
    std::uint32_t queries = 4096;
    std::uint32_t trials = 100;
    std::uint64_t seed = 1;

    void check() const {
        if (n == 0 || dims == 0 || trials == 0) throw std::invalid_argument("experiment needs n, d and trials > 0");
        if (group_size == 0 || group_size > n) throw std::invalid_argument("group size p must satisfy 1 <= p <= n");
        if (local_budget == 0 || local_budget > group_size) throw std::invalid_argument("k' must satisfy 1 <= k' <= p");
        if (k == 0 || k > n) throw std::invalid_argument("k must satisfy 1 <= k <= n");
    }
};

struct ExperimentOutcome {
    std::uint32_t local_budget = 0;
    std::uint32_t failed_trials = 0;
    std::uint32_t trials = 0;
    std::uint64_t failed_queries = 0;
    std::uint64_t queries = 0;

    double failure_percent() const { return trials ? 100.0 * failed_trials / trials : 0.0; }
    double query_failure_rate() const { return queries ? double(failed_queries) / double(queries) : 0.0; }
};

/// Seed of trial t, independent of how trials are scheduled.
inline std::uint64_t trial_seed(std::uint64_t base, std::uint32_t trial) {
    std::seed_seq seq{static_cast<std::uint32_t>(base), static_cast<std::uint32_t>(base >> 32), trial};
    std::uint32_t parts[2];
    seq.generate(parts, parts + 2);
    return (std::uint64_t{parts[0]} << 32) | parts[1];
}

namespace detail {

/// True when the k smallest distances of `dist` equal the k smallest of the
/// union of each group's k' best (distance, id) entries.
inline bool reduced_query_correct(std::span<const std::uint32_t> dist, std::uint32_t p, std::uint32_t budget,
                                  std::uint32_t k, std::vector<std::uint32_t>& scratch_exact,
                                  std::vector<std::uint32_t>& scratch_merged) {
    scratch_exact.assign(dist.begin(), dist.end());
    std::nth_element(scratch_exact.begin(), scratch_exact.begin() + (k - 1), scratch_exact.end());
    std::sort(scratch_exact.begin(), scratch_exact.begin() + k);

    scratch_merged.clear();
    std::uint32_t group[256];
    for (std::size_t first = 0; first < dist.size(); first += p) {
        const std::size_t len = std::min<std::size_t>(p, dist.size() - first);
        std::copy_n(dist.begin() + static_cast<std::ptrdiff_t>(first), len, group);
        // Ties between equal distances are interchangeable under the multiset
        // criterion, so stable id order need not be tracked here.
        const std::size_t take = std::min<std::size_t>(budget, len);
        std::partial_sort(group, group + take, group + len);
        scratch_merged.insert(scratch_merged.end(), group, group + take);
    }
    if (scratch_merged.size() < k) return false;
    std::nth_element(scratch_merged.begin(), scratch_merged.begin() + (k - 1), scratch_merged.end());
    std::sort(scratch_merged.begin(), scratch_merged.begin() + k);
    return std::equal(scratch_exact.begin(), scratch_exact.begin() + k, scratch_merged.begin());
}

}  // namespace detail

/// Monte Carlo accuracy of statistical reduction for several budgets k' at
/// once. Every budget sees the same random datasets and queries, so the
/// failure counts are monotone in k' by construction.
inline std::vector<ExperimentOutcome> statistical_sweep(ExperimentConfig cfg, std::span<const std::uint32_t> budgets) {
    for (auto b : budgets) {
        cfg.local_budget = b;
        cfg.check();
    }
    if (cfg.group_size > 256) throw std::invalid_argument("group size above 256 unsupported");
    std::vector<ExperimentOutcome> out(budgets.size());
    for (std::size_t i = 0; i < budgets.size(); ++i) out[i].local_budget = budgets[i];

    std::vector<std::uint32_t> dist(cfg.n), exact, merged;
    std::vector<std::uint8_t> trial_failed(budgets.size());
    for (std::uint32_t t = 0; t < cfg.trials; ++t) {
        std::mt19937_64 rng(trial_seed(cfg.seed, t));
        const auto data = BitMatrix::random(cfg.n, cfg.dims, rng);
        std::fill(trial_failed.begin(), trial_failed.end(), 0);
        for (std::uint32_t q = 0; q < cfg.queries; ++q) {
            const auto query = BitVector::random(cfg.dims, rng);
            for (std::uint32_t i = 0; i < cfg.n; ++i) dist[i] = hamming(data.row(i), query);
            for (std::size_t b = 0; b < budgets.size(); ++b) {
                const bool ok = detail::reduced_query_correct(dist, cfg.group_size, budgets[b], cfg.k, exact, merged);
                if (!ok) {
                    ++out[b].failed_queries;
                    trial_failed[b] = 1;
                }
                ++out[b].queries;
            }
        }
        for (std::size_t b = 0; b < budgets.size(); ++b) {
            out[b].failed_trials += trial_failed[b];
            ++out[b].trials;
        }
    }
    return out;
}

inline ExperimentOutcome statistical_experiment(const ExperimentConfig& cfg) {
    const std::uint32_t budget[] = {cfg.local_budget};
    return statistical_sweep(cfg, budget).front();
}

}  // namespace apknn::oracle
