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
#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

namespace apknn::report {

/// How a model value is judged against its reference.
struct Check {
    enum class Kind { Info, Relative, Band, AtLeast, AtMost, Exact };
    Kind kind = Kind::Info;
    double tolerance = 0;  // relative fraction, absolute half-width, or bound

    static Check info() { return {Kind::Info, 0}; }
    static Check relative(double frac) { return {Kind::Relative, frac}; }
    static Check band(double half_width) { return {Kind::Band, half_width}; }
    static Check at_least(double bound) { return {Kind::AtLeast, bound}; }
    static Check at_most(double bound) { return {Kind::AtMost, bound}; }
    /// Equal after rounding to the reference's printed precision.
    static Check exact(double half_ulp) { return {Kind::Exact, half_ulp}; }

    bool gated() const { return kind != Kind::Info; }

    bool passes(double reference, double value) const {
        switch (kind) {
            case Kind::Info: return true;
            case Kind::Relative: return std::abs(value - reference) <= tolerance * std::abs(reference);
            case Kind::Band: return std::abs(value - reference) <= tolerance;
            case Kind::AtLeast: return value >= tolerance;
            case Kind::AtMost: return value <= tolerance;
            case Kind::Exact: return std::abs(value - reference) <= tolerance;
        }
        return false;
    }

    std::string describe() const {
        char buf[64];
        switch (kind) {
            case Kind::Info: return "info";
            case Kind::Relative: std::snprintf(buf, sizeof buf, "+/-%g%%", tolerance * 100); break;
            case Kind::Band: std::snprintf(buf, sizeof buf, "+/-%g", tolerance); break;
            case Kind::AtLeast: std::snprintf(buf, sizeof buf, ">=%g", tolerance); break;
            case Kind::AtMost: std::snprintf(buf, sizeof buf, "<=%g", tolerance); break;
            case Kind::Exact: return "exact";
        }
        return buf;
    }
};

struct Row {
    std::string quantity;
    double reference = 0;
    double value = 0;
    Check check;

    double relative_error() const { return reference != 0 ? (value - reference) / std::abs(reference) : value; }
    bool pass() const { return check.passes(reference, value); }
};

struct Table {
    std::string title;
    std::vector<Row> rows;

    void add(std::string quantity, double reference, double value, Check check) {
        rows.push_back({std::move(quantity), reference, value, check});
    }
    bool pass() const {
        return std::all_of(rows.begin(), rows.end(), [](const Row& r) { return r.pass(); });
    }
    std::size_t failures() const {
        return static_cast<std::size_t>(std::count_if(rows.begin(), rows.end(), [](const Row& r) { return !r.pass(); }));
    }
};

inline std::string format_number(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

inline void write_text(std::ostream& os, const Table& t) {
    std::size_t w = 8;
    for (const auto& r : t.rows) w = std::max(w, r.quantity.size());
    char line[256];
    os << t.title << '\n';
    std::snprintf(line, sizeof line, "%-*s %12s %12s %9s %10s %s\n", int(w), "quantity", "reference", "model",
                  "rel.err", "check", "result");
    os << line;
    for (const auto& r : t.rows) {
        char err[16];
        std::snprintf(err, sizeof err, "%+.1f%%", r.relative_error() * 100);
        std::snprintf(line, sizeof line, "%-*s %12s %12s %9s %10s %s\n", int(w), r.quantity.c_str(),
                      format_number(r.reference).c_str(), format_number(r.value).c_str(), err,
                      r.check.describe().c_str(), !r.check.gated() ? "-" : (r.pass() ? "PASS" : "FAIL"));
        os << line;
    }
}

inline void write_csv(std::ostream& os, const Table& t) {
    os << "quantity,reference,model,relative_error,check,result\n";
    for (const auto& r : t.rows)
        os << '"' << r.quantity << "\"," << format_number(r.reference) << ',' << format_number(r.value) << ','
           << format_number(r.relative_error()) << ',' << r.check.describe() << ','
           << (!r.check.gated() ? "info" : (r.pass() ? "pass" : "fail")) << '\n';
}

}  // namespace apknn::report
