/*
   Copyright 2026 The vcescrow Authors

   Licensed under the Apache License, Version 2.0 (the "License");
   you may not use this file except in compliance with the License.
   You may obtain a copy of the License at

       http://www.apache.org/licenses/LICENSE-2.0

   Unless required by applicable law or agreed to in writing, software
   distributed under the License is distributed on an "AS IS" BASIS,
   WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
   See the License for the specific language governing permissions and
   limitations under the License.
*/

#pragma once

#include <compare>
#include <cstdint>
#include <limits>
#include <string>
#include <string_view>

#include "error.hpp"

namespace vcescrow {

using uint128 = unsigned __int128;

inline constexpr uint128 kWeiPerGwei{1'000'000'000ULL};
inline constexpr uint128 kGweiPerEth{1'000'000'000ULL};
inline constexpr uint128 kWeiPerEth{kWeiPerGwei * kGweiPerEth};

inline uint128 checked_add(uint128 a, uint128 b) {
    uint128 r{};
    if (__builtin_add_overflow(a, b, &r)) throw Error{ErrorCode::kOverflow, "addition"};
    return r;
}

inline uint128 checked_sub(uint128 a, uint128 b) {
    if (b > a) throw Error{ErrorCode::kUnderflow, "subtraction"};
    return a - b;
}

inline uint128 checked_mul(uint128 a, uint128 b) {
    uint128 r{};
    if (__builtin_mul_overflow(a, b, &r)) throw Error{ErrorCode::kOverflow, "multiplication"};
    return r;
}

//! floor(a * b / d), the product is checked rather than widened.
inline uint128 mul_div_floor(uint128 a, uint128 b, uint128 d) {
    if (d == 0) throw Error{ErrorCode::kInvalidArgument, "division by zero"};
    return checked_mul(a, b) / d;
}

inline std::string u128_to_string(uint128 v) {
    if (v == 0) return "0";
    std::string out;
    while (v != 0) {
        out.insert(out.begin(), static_cast<char>('0' + static_cast<int>(v % 10)));
        v /= 10;
    }
    return out;
}

inline uint128 parse_u128(std::string_view text) {
    if (text.empty()) throw Error{ErrorCode::kParseError, "empty integer"};
    uint128 v{0};
    for (char c : text) {
        if (c < '0' || c > '9') throw Error{ErrorCode::kParseError, "not a decimal integer: " + std::string{text}};
        v = checked_add(checked_mul(v, 10), static_cast<uint128>(c - '0'));
    }
    return v;
}

//! Exact, non-negative amount of wei. Arithmetic throws on overflow or underflow.
class Amount {
  public:
    constexpr Amount() noexcept = default;

    static constexpr Amount wei(uint128 v) noexcept { return Amount{v}; }
    static Amount gwei(uint128 v) { return Amount{checked_mul(v, kWeiPerGwei)}; }
    static Amount eth(uint128 v) { return Amount{checked_mul(v, kWeiPerEth)}; }
    static Amount parse(std::string_view decimal) { return Amount{parse_u128(decimal)}; }

    [[nodiscard]] constexpr uint128 value() const noexcept { return wei_; }
    [[nodiscard]] constexpr bool is_zero() const noexcept { return wei_ == 0; }
    [[nodiscard]] std::string to_string() const { return u128_to_string(wei_); }

    friend constexpr auto operator<=>(const Amount&, const Amount&) = default;

    friend Amount operator+(Amount a, Amount b) { return Amount{checked_add(a.wei_, b.wei_)}; }
    friend Amount operator-(Amount a, Amount b) { return Amount{checked_sub(a.wei_, b.wei_)}; }
    friend Amount operator*(Amount a, uint128 k) { return Amount{checked_mul(a.wei_, k)}; }
    friend Amount operator*(uint128 k, Amount a) { return a * k; }
    Amount& operator+=(Amount o) { return *this = *this + o; }
    Amount& operator-=(Amount o) { return *this = *this - o; }

    //! floor(this * num / den)
    [[nodiscard]] Amount scaled(uint128 num, uint128 den) const { return Amount{mul_div_floor(wei_, num, den)}; }

  private:
    constexpr explicit Amount(uint128 v) noexcept : wei_{v} {}

    uint128 wei_{0};
};

}  // namespace vcescrow
