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

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "apknn/knn_compiler.hpp"
#include "apknn/resource_model.hpp"

namespace apknn::perf {

enum class Generation { Gen1, Gen2 };

struct PlatformParams {
    double clock_hz = 133e6;
    double reconfig_gen1_s = 45e-3;
    double reconfig_gen2_s = 0.45e-3;
    double pcie_bps = 63e9;
    // Back-solved default: 4096 queries / (4.53 q/J x 48.10 s).
    double dynamic_power_w = 18.8;
    double process_nm = 50;
    double target_nm = 28;
    // Share of the PCIe link above which sustained reporting is flagged.
    double bandwidth_budget = 0.25;

    double reconfig_s(Generation g) const { return g == Generation::Gen1 ? reconfig_gen1_s : reconfig_gen2_s; }

    void check() const {
        if (!(clock_hz > 0 && reconfig_gen1_s > 0 && reconfig_gen2_s > 0 && pcie_bps > 0 && dynamic_power_w > 0 &&
              process_nm > 0 && target_nm > 0 && bandwidth_budget > 0))
            throw std::invalid_argument("platform parameters must be positive");
    }
};

struct WorkloadSpec {
    std::string name;
    std::uint32_t dims = 0;
    std::uint32_t k = 0;
    std::uint64_t n = 1u << 20;
    std::uint64_t queries = 4096;
    std::uint32_t capacity = 1024;

    std::uint64_t reconfigurations() const { return (n + capacity - 1) / capacity; }
};

inline WorkloadSpec word_embed() { return {"WordEmbed", 64, 2, 1u << 20, 4096, 1024}; }
inline WorkloadSpec sift() { return {"SIFT", 128, 4, 1u << 20, 4096, 1024}; }
inline WorkloadSpec tag_space() { return {"TagSpace", 256, 16, 1u << 20, 4096, 512}; }
inline std::array<WorkloadSpec, 3> default_workloads() { return {word_embed(), sift(), tag_space()}; }

/// Same workloads with board capacities taken from a profile.
inline std::array<WorkloadSpec, 3> default_workloads(const resource::CapacityProfile& profile) {
    auto w = default_workloads();
    for (auto& x : w) x.capacity = profile.capacity_for(x.dims);
    return w;
}

/// One board configuration, queries pipelined at d cycles each.
inline double scan_seconds(std::uint64_t queries, std::uint32_t dims, const PlatformParams& p) {
    return double(queries) * double(dims) / p.clock_hz;
}

inline double small_runtime(const WorkloadSpec& w, const PlatformParams& p = {}) {
    return scan_seconds(w.queries, w.dims, p);
}

inline double large_runtime(const WorkloadSpec& w, Generation g, const PlatformParams& p = {}) {
    const auto R = double(w.reconfigurations());
    return R * p.reconfig_s(g) + R * scan_seconds(w.queries, w.dims, p);
}

struct Reduction {
    std::uint32_t group_size = 16;
    std::uint32_t local_budget = 4;
};

/// Sustained report traffic: 32-bit entries for the capacity activations plus
/// d offset words per query of 2d cycles. Statistical reduction divides the
/// activation term by p/k'.
inline double report_bandwidth(const WorkloadSpec& w, std::optional<Reduction> r = {}, const PlatformParams& p = {}) {
    double activations = w.capacity;
    if (r) {
        if (r->local_budget == 0 || r->local_budget > r->group_size)
            throw std::invalid_argument("reduction needs 1 <= k' <= p");
        activations /= double(r->group_size) / double(r->local_budget);
    }
    return 32.0 * (activations + w.dims) / (2.0 * w.dims / p.clock_hz);
}

inline double pcie_fraction(const WorkloadSpec& w, std::optional<Reduction> r = {}, const PlatformParams& p = {}) {
    return report_bandwidth(w, r, p) / p.pcie_bps;
}

inline bool bandwidth_flagged(const WorkloadSpec& w, std::optional<Reduction> r = {}, const PlatformParams& p = {}) {
    return pcie_fraction(w, r, p) > p.bandwidth_budget;
}

/// Cycles for one query frame's data and sort phases.
inline double query_latency_cycles(std::uint32_t dims, bool counter_increment) {
    return counter_increment ? dims + dims / 7.0 : 2.0 * dims;
}

struct ImprovementFactors {
    double tech = 1;
    double packing = 1;
    double decomposition = 1;
    double counter_ext = 1;

    double total() const { return tech * packing * decomposition * counter_ext; }
};

struct ImprovementAssumptions {
    std::uint32_t packing = 4;
    std::uint32_t decomposition = 4;
    bool counter_increment = true;
    std::uint32_t fan_in = 16;
};

inline ImprovementFactors improvement_factors(const WorkloadSpec& w, const ImprovementAssumptions& a = {},
                                              const PlatformParams& p = {}) {
    ImprovementFactors f;
    f.tech = std::pow(p.process_nm / p.target_nm, 2);
    f.packing = resource::packing_savings(w.dims, a.packing, a.fan_in);
    f.decomposition = resource::decomposition_savings(w.dims, a.decomposition, a.fan_in);
    f.counter_ext = a.counter_increment ? query_latency_cycles(w.dims, false) / query_latency_cycles(w.dims, true) : 1.0;
    return f;
}

inline double optext_runtime(const WorkloadSpec& w, const ImprovementAssumptions& a = {}, const PlatformParams& p = {}) {
    return large_runtime(w, Generation::Gen2, p) / improvement_factors(w, a, p).total();
}

/// Queries per joule.
inline double energy_efficiency(std::uint64_t queries, double runtime_s, double power_w) {
    if (!(power_w > 0)) throw std::invalid_argument("power must be positive");
    if (queries == 0) return 0.0;
    if (!(runtime_s > 0)) throw std::invalid_argument("runtime must be positive");
    return double(queries) / (power_w * runtime_s);
}

/// Per-bucket query counts produced by an index traversal.
struct IndexStats {
    std::vector<std::uint64_t> queries_per_bucket;  // one entry per distinct bucket visited
};

inline double indexed_runtime(const WorkloadSpec& w, const IndexStats& s, double host_traversal_s, Generation g,
                              const PlatformParams& p = {}) {
    double t = host_traversal_s + double(s.queries_per_bucket.size()) * p.reconfig_s(g);
    for (auto q : s.queries_per_bucket) t += scan_seconds(q, w.dims, p);
    return t;
}

/// Every query against every partition: the linear scan as an index.
inline IndexStats linear_scan_stats(const WorkloadSpec& w) {
    return {std::vector<std::uint64_t>(w.reconfigurations(), w.queries)};
}

}  // namespace apknn::perf
