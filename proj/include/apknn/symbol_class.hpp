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

#include <bit>
#include <bitset>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace apknn::fabric {

using Symbol = std::uint8_t;

/// Match predicate of an STE: membership over the 256 possible 8-bit symbols.
class SymbolClass {
  public:
    SymbolClass() = default;

    static SymbolClass all() {
        SymbolClass c;
        c.bits_.set();
        return c;
    }
    static SymbolClass none() { return {}; }
    static SymbolClass single(Symbol s) {
        SymbolClass c;
        c.bits_.set(s);
        return c;
    }
    static SymbolClass all_except(Symbol s) {
        SymbolClass c = all();
        c.bits_.reset(s);
        return c;
    }

    template <class Pred>
    static SymbolClass where(Pred pred) {
        SymbolClass c;
        for (unsigned s = 0; s < 256; ++s)
            if (pred(static_cast<Symbol>(s))) c.bits_.set(s);
        return c;
    }

    /// Ternary pattern written most-significant bit first, e.g. "0******1".
    /// Accepts an optional "0b" prefix.
    static SymbolClass ternary(std::string_view pattern) {
        if (pattern.starts_with("0b")) pattern.remove_prefix(2);
        if (pattern.size() != 8) throw std::invalid_argument("ternary pattern must have 8 positions");
        unsigned care = 0, value = 0;
        for (int i = 0; i < 8; ++i) {
            const unsigned bit = 1u << (7 - i);
            switch (pattern[i]) {
                case '1': care |= bit; value |= bit; break;
                case '0': care |= bit; break;
                case '*': break;
                default: throw std::invalid_argument("ternary pattern accepts only 0, 1 and *");
            }
        }
        return where([=](Symbol s) { return (s & care) == value; });
    }

    bool matches(Symbol s) const { return bits_.test(s); }
    std::size_t count() const { return bits_.count(); }
    bool empty() const { return bits_.none(); }

    void add(Symbol s) { bits_.set(s); }
    void remove(Symbol s) { bits_.reset(s); }

    /// Bit positions the membership function essentially depends on. A bit is
    /// in the set iff flipping it changes membership for some symbol, which is
    /// the unique minimal set the class can be expressed over.
    std::uint8_t sensitivity_mask() const {
        std::uint8_t mask = 0;
        for (unsigned bit = 0; bit < 8; ++bit) {
            for (unsigned s = 0; s < 256; ++s) {
                if (bits_.test(s) != bits_.test(s ^ (1u << bit))) {
                    mask |= static_cast<std::uint8_t>(1u << bit);
                    break;
                }
            }
        }
        return mask;
    }
    int sensitivity() const { return std::popcount(static_cast<unsigned>(sensitivity_mask())); }

    /// Relabels symbols through a permutation of bit positions a and b.
    SymbolClass swap_bits(unsigned a, unsigned b) const {
        if (a == b) return *this;
        return where([&](Symbol s) {
            const unsigned ba = (s >> a) & 1u, bb = (s >> b) & 1u;
            unsigned t = s & ~((1u << a) | (1u << b));
            t |= (ba << b) | (bb << a);
            return bits_.test(t);
        });
    }

    /// 64 hex characters of the 256-bit mask read as a big-endian integer:
    /// the last character holds symbols 3..0.
    std::string to_hex() const {
        static constexpr char digits[] = "0123456789abcdef";
        std::string out(64, '0');
        for (int nib = 0; nib < 64; ++nib) {
            unsigned v = 0;
            for (int b = 0; b < 4; ++b)
                if (bits_.test(nib * 4 + b)) v |= 1u << b;
            out[63 - nib] = digits[v];
        }
        return out;
    }

    static SymbolClass from_hex(std::string_view hex) {
        if (hex.size() != 64) throw std::invalid_argument("symbol class mask must be 64 hex characters");
        SymbolClass c;
        for (int nib = 0; nib < 64; ++nib) {
            const char ch = hex[63 - nib];
            unsigned v;
            if (ch >= '0' && ch <= '9') v = ch - '0';
            else if (ch >= 'a' && ch <= 'f') v = ch - 'a' + 10;
            else if (ch >= 'A' && ch <= 'F') v = ch - 'A' + 10;
            else throw std::invalid_argument("symbol class mask contains a non-hex character");
            for (int b = 0; b < 4; ++b)
                if (v & (1u << b)) c.bits_.set(nib * 4 + b);
        }
        return c;
    }

    SymbolClass operator|(const SymbolClass& o) const { SymbolClass c; c.bits_ = bits_ | o.bits_; return c; }
    SymbolClass operator&(const SymbolClass& o) const { SymbolClass c; c.bits_ = bits_ & o.bits_; return c; }
    SymbolClass operator~() const { SymbolClass c; c.bits_ = ~bits_; return c; }
    bool operator==(const SymbolClass&) const = default;

  private:
    std::bitset<256> bits_;
};

}  // namespace apknn::fabric
