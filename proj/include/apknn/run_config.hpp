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

#include <cstdint>
#include <fstream>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "apknn/fabric.hpp"
#include "apknn/perf_model.hpp"
#include "apknn/resource_model.hpp"

namespace apknn {

struct Seeds {
    std::uint64_t experiment = 1;
    std::uint64_t index = 1;
    std::uint64_t data = 1;
};

struct ExperimentSettings {
    std::uint32_t queries = 4096;
    std::uint32_t trials = 100;
    std::uint32_t n = 1024;
    std::uint32_t group_size = 16;
};

/// Everything a command may need; defaults reproduce the reference constants.
struct RunConfig {
    fabric::FabricConfig fabric;
    perf::PlatformParams platform;
    resource::CapacityProfile capacity;
    std::vector<perf::WorkloadSpec> workloads = {perf::word_embed(), perf::sift(), perf::tag_space()};
    Seeds seeds;
    ExperimentSettings experiment;
};

namespace detail {

inline void only_keys(const nlohmann::json& j, const std::string& where, std::initializer_list<const char*> keys) {
    if (!j.is_object()) throw std::invalid_argument("config section '" + where + "' must be an object");
    for (const auto& [k, v] : j.items()) {
        bool known = false;
        for (const char* allowed : keys) known |= k == allowed;
        if (!known) throw std::invalid_argument("unknown config key '" + where + "." + k + "'");
    }
}

template <class T>
void get_if(const nlohmann::json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace detail

inline RunConfig config_from_json(const nlohmann::json& j) {
    using detail::get_if;
    RunConfig c;
    detail::only_keys(j, "", {"fabric", "platform", "capacity", "workloads", "seeds", "experiment"});
    if (j.contains("fabric")) {
        const auto& f = j["fabric"];
        detail::only_keys(f, "fabric",
                          {"stes_per_block", "counters_per_block", "booleans_per_block", "reporting_per_block",
                           "blocks_per_halfcore", "halfcores_per_device", "clock_hz", "fan_in_limit", "fan_out_limit",
                           "increment_by_n", "increment_cap", "dynamic_threshold", "ste_decomposition_factor"});
        get_if(f, "stes_per_block", c.fabric.stes_per_block);
        get_if(f, "counters_per_block", c.fabric.counters_per_block);
        get_if(f, "booleans_per_block", c.fabric.booleans_per_block);
        get_if(f, "reporting_per_block", c.fabric.reporting_per_block);
        get_if(f, "blocks_per_halfcore", c.fabric.blocks_per_halfcore);
        get_if(f, "halfcores_per_device", c.fabric.halfcores_per_device);
        get_if(f, "clock_hz", c.fabric.clock_hz);
        get_if(f, "fan_in_limit", c.fabric.fan_in_limit);
        get_if(f, "fan_out_limit", c.fabric.fan_out_limit);
        get_if(f, "increment_by_n", c.fabric.increment_by_n);
        get_if(f, "increment_cap", c.fabric.increment_cap);
        get_if(f, "dynamic_threshold", c.fabric.dynamic_threshold);
        get_if(f, "ste_decomposition_factor", c.fabric.ste_decomposition_factor);
        c.fabric.check();
    }
    if (j.contains("platform")) {
        const auto& p = j["platform"];
        detail::only_keys(p, "platform",
                          {"clock_hz", "reconfig_gen1_s", "reconfig_gen2_s", "pcie_bps", "dynamic_power_w",
                           "process_nm", "target_nm", "bandwidth_budget"});
        get_if(p, "clock_hz", c.platform.clock_hz);
        get_if(p, "reconfig_gen1_s", c.platform.reconfig_gen1_s);
        get_if(p, "reconfig_gen2_s", c.platform.reconfig_gen2_s);
        get_if(p, "pcie_bps", c.platform.pcie_bps);
        get_if(p, "dynamic_power_w", c.platform.dynamic_power_w);
        get_if(p, "process_nm", c.platform.process_nm);
        get_if(p, "target_nm", c.platform.target_nm);
        get_if(p, "bandwidth_budget", c.platform.bandwidth_budget);
        c.platform.check();
    }
    if (j.contains("capacity")) {
        const auto& p = j["capacity"];
        detail::only_keys(p, "capacity", {"vectors", "rho"});
        if (p.contains("vectors")) {
            c.capacity.capacity.clear();
            for (const auto& [k, v] : p["vectors"].items()) c.capacity.capacity[std::stoul(k)] = v.get<std::uint32_t>();
        }
        get_if(p, "rho", c.capacity.rho);
        if (!(c.capacity.rho >= 1.0)) throw std::invalid_argument("capacity.rho must be at least 1");
    }
    if (j.contains("workloads")) {
        c.workloads.clear();
        for (const auto& w : j["workloads"]) {
            detail::only_keys(w, "workloads[]", {"name", "d", "k", "n", "q", "capacity"});
            perf::WorkloadSpec s;
            s.name = w.at("name").get<std::string>();
            s.dims = w.at("d").get<std::uint32_t>();
            s.k = w.at("k").get<std::uint32_t>();
            get_if(w, "n", s.n);
            get_if(w, "q", s.queries);
            s.capacity = w.contains("capacity") ? w["capacity"].get<std::uint32_t>() : c.capacity.capacity_for(s.dims);
            c.workloads.push_back(s);
        }
    }
    if (j.contains("seeds")) {
        const auto& s = j["seeds"];
        detail::only_keys(s, "seeds", {"experiment", "index", "data"});
        get_if(s, "experiment", c.seeds.experiment);
        get_if(s, "index", c.seeds.index);
        get_if(s, "data", c.seeds.data);
    }
    if (j.contains("experiment")) {
        const auto& e = j["experiment"];
        detail::only_keys(e, "experiment", {"queries", "trials", "n", "group_size"});
        get_if(e, "queries", c.experiment.queries);
        get_if(e, "trials", c.experiment.trials);
        get_if(e, "n", c.experiment.n);
        get_if(e, "group_size", c.experiment.group_size);
    }
    return c;
}

inline RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config '" + path + "'");
    return config_from_json(nlohmann::json::parse(in));
}

}  // namespace apknn
