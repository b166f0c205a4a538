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

#include "apknn/symbol_class.hpp"

namespace apknn::codec {

using fabric::Symbol;
using fabric::SymbolClass;

/// Symbol alphabet shared by the compiler and the stream codec. Bit 7 flags a
/// control symbol; data symbols carry their payload in bits 0-6, which is why
/// at most seven query slices fit one stream.
struct StreamLayout {
    static constexpr Symbol kSof = 0x80;
    static constexpr Symbol kEof = 0x81;
    static constexpr Symbol kFill = 0x82;
    static constexpr unsigned kControlBit = 7;
    static constexpr unsigned kPayloadBits = 7;
    static constexpr unsigned kSlices = kPayloadBits;

    static constexpr bool is_control(Symbol s) { return (s >> kControlBit) & 1u; }

    static SymbolClass sof() { return SymbolClass::single(kSof); }
    static SymbolClass eof() { return SymbolClass::single(kEof); }
    static SymbolClass any() { return SymbolClass::all(); }
    static SymbolClass not_eof() { return SymbolClass::all_except(kEof); }
    static SymbolClass not_sof() { return SymbolClass::all_except(kSof); }
    static SymbolClass data() {
        return SymbolClass::where([](Symbol s) { return !is_control(s); });
    }
    /// Class for states that only ever observe the fill phase and its closing
    /// EOF: keeps FILL, drops EOF (and SOF). Depends on one bit only.
    static SymbolClass fill_continue() {
        return SymbolClass::where([](Symbol s) { return (s >> 1) & 1u; });
    }
    /// Counterpart of fill_continue(): EOF but not FILL, again on one bit.
    static SymbolClass fill_exit() {
        return SymbolClass::where([](Symbol s) { return s & 1u; });
    }
    /// Data symbols whose payload bit `bit` equals `value`: the ternary match
    /// 0b0...v... with every other payload bit a don't-care.
    static SymbolClass payload_bit(unsigned bit, bool value) {
        return SymbolClass::where([=](Symbol s) { return !is_control(s) && (((s >> bit) & 1u) == unsigned(value)); });
    }
};

/// How query dimensions map onto the data phase of a frame.
enum class StreamMode : std::uint8_t {
    Plain,             // one dimension per symbol in payload bit 0
    Multiplexed,       // one dimension per symbol, query slice s in payload bit s
    CounterIncrement,  // seven dimensions per symbol, dimension i in bit i % 7
};

inline std::uint32_t data_length(StreamMode mode, std::uint32_t dims) {
    return mode == StreamMode::CounterIncrement ? (dims + StreamLayout::kPayloadBits - 1) / StreamLayout::kPayloadBits
                                                : dims;
}

/// Cycle offset, relative to the frame's SOF, at which a distance-0 vector
/// reports.
inline std::uint32_t calibration_base(std::uint32_t data_len, std::uint32_t delay_depth) {
    return data_len + delay_depth + 2;
}

/// SOF, data phase, d + L + 1 fill symbols, EOF.
inline std::uint32_t frame_length(std::uint32_t data_len, std::uint32_t dims, std::uint32_t delay_depth) {
    return 1 + data_len + dims + delay_depth + 1 + 1;
}

}  // namespace apknn::codec
