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
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "apknn/fabric.hpp"

namespace apknn::fabric {

inline constexpr std::string_view kImageFormat = "apknn-automaton";
inline constexpr int kImageVersion = 1;

namespace detail {

inline constexpr std::array<std::string_view, 13> kRoleNames = {
    "generic", "guard", "star", "match", "ladder", "collector", "delay",
    "sort", "eof", "distance_counter", "report", "group_collector", "local_counter"};
inline constexpr std::array<std::string_view, 5> kPortNames = {"enable", "increment", "reset", "a", "b"};

template <class Enum, std::size_t N>
Enum parse_name(const std::array<std::string_view, N>& names, const std::string& s, const char* what) {
    for (std::size_t i = 0; i < N; ++i)
        if (names[i] == s) return static_cast<Enum>(i);
    throw std::invalid_argument(std::string("unknown ") + what + " '" + s + "'");
}

inline nlohmann::json element_to_json(const Element& el) {
    nlohmann::json j;
    j["id"] = el.id;
    switch (el.kind()) {
        case ElementKind::Ste: {
            const auto& s = el.ste();
            j["kind"] = "ste";
            j["class"] = s.symbols.to_hex();
            j["start"] = s.start;
            if (s.report_tag) j["report"] = *s.report_tag;
            break;
        }
        case ElementKind::Counter: {
            const auto& c = el.counter();
            j["kind"] = "counter";
            j["mode"] = "pulse";
            if (const auto* t = std::get_if<std::uint32_t>(&c.threshold)) {
                j["threshold"] = *t;
            } else {
                j["threshold"] = {{"counter", std::get<CounterRef>(c.threshold).counter}};
            }
            break;
        }
        case ElementKind::Boolean:
            j["kind"] = "boolean";
            j["truth_table"] = el.boolean().truth_table;
            break;
    }
    j["role"] = kRoleNames[static_cast<std::size_t>(el.role)];
    if (el.owner >= 0) j["owner"] = el.owner;
    if (el.slice) j["slice"] = el.slice;
    return j;
}

}  // namespace detail

/// Writes the image as one element or edge per line, elements by id and edges
/// sorted, so identical automata serialize to identical bytes.
inline void write_image(std::ostream& os, const Automaton& a) {
    nlohmann::json meta = {{"dims", a.metadata.dims},
                           {"vector_count", a.metadata.vector_count},
                           {"passes", a.metadata.passes},
                           {"requires_increment_by_n", a.metadata.requires_increment_by_n}};
    os << "{\n\"format\": \"" << kImageFormat << "\",\n\"version\": " << kImageVersion << ",\n\"metadata\": "
       << meta.dump() << ",\n\"elements\": [";
    bool first = true;
    for (const auto& el : a.elements()) {
        os << (first ? "\n" : ",\n") << detail::element_to_json(el).dump();
        first = false;
    }
    os << "\n],\n\"edges\": [";
    auto edges = a.edges();
    std::sort(edges.begin(), edges.end());
    first = true;
    for (const auto& e : edges) {
        os << (first ? "\n" : ",\n") << "[" << e.from << "," << e.to << ",\""
           << detail::kPortNames[static_cast<std::size_t>(e.port)] << "\"]";
        first = false;
    }
    os << "\n]\n}\n";
}

inline std::string image_to_string(const Automaton& a) {
    std::ostringstream os;
    write_image(os, a);
    return os.str();
}

inline Automaton image_from_json(const nlohmann::json& j) {
    if (j.value("format", "") != kImageFormat) throw std::invalid_argument("not an automaton image");
    if (j.value("version", 0) != kImageVersion)
        throw std::invalid_argument("unsupported automaton image version " + std::to_string(j.value("version", 0)));
    Automaton a;
    const auto& meta = j.at("metadata");
    a.metadata.dims = meta.at("dims").get<std::uint32_t>();
    a.metadata.vector_count = meta.at("vector_count").get<std::uint32_t>();
    a.metadata.passes = meta.at("passes").get<std::vector<std::string>>();
    a.metadata.requires_increment_by_n = meta.at("requires_increment_by_n").get<bool>();

    for (const auto& je : j.at("elements")) {
        const auto id = je.at("id").get<ElementId>();
        if (id != a.size()) throw std::invalid_argument("element ids must be dense and sorted; got " + std::to_string(id));
        const auto kind = je.at("kind").get<std::string>();
        const auto role = detail::parse_name<Role>(detail::kRoleNames, je.value("role", "generic"), "role");
        const auto owner = je.value("owner", std::int64_t{-1});
        ElementId made;
        if (kind == "ste") {
            std::optional<std::uint32_t> tag;
            if (je.contains("report")) tag = je.at("report").get<std::uint32_t>();
            made = a.add_ste(SymbolClass::from_hex(je.at("class").get<std::string>()), je.at("start").get<bool>(), tag,
                             role, owner);
        } else if (kind == "counter") {
            if (je.value("mode", "pulse") != "pulse") throw std::invalid_argument("only pulse-mode counters exist");
            const auto& thr = je.at("threshold");
            made = thr.is_object() ? a.add_counter(CounterRef{thr.at("counter").get<ElementId>()}, role, owner)
                                   : a.add_counter(thr.get<std::uint32_t>(), role, owner);
        } else if (kind == "boolean") {
            made = a.add_boolean(je.at("truth_table").get<std::uint8_t>(), role, owner);
        } else {
            throw std::invalid_argument("unknown element kind '" + kind + "'");
        }
        a[made].slice = je.value("slice", std::uint8_t{0});
    }
    for (const auto& je : j.at("edges")) {
        a.connect(je.at(0).get<ElementId>(), je.at(1).get<ElementId>(),
                  detail::parse_name<Port>(detail::kPortNames, je.at(2).get<std::string>(), "port"));
    }
    return a;
}

inline Automaton read_image(std::istream& is) { return image_from_json(nlohmann::json::parse(is)); }
inline Automaton image_from_string(std::string_view text) { return image_from_json(nlohmann::json::parse(text)); }

/// Sorts edges into the order write_image uses.
inline void canonicalize(Automaton& a) { std::sort(a.edges().begin(), a.edges().end()); }

}  // namespace apknn::fabric
