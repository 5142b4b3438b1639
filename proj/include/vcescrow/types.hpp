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
#include <string>
#include <utility>

namespace vcescrow {

//! Seconds since simulation genesis. Only block timestamps are ever handed to contracts.
using Timestamp = std::uint64_t;

//! 10000 basis points = 100%.
using BasisPoints = std::uint32_t;
inline constexpr BasisPoints kFullBasisPoints{10'000};

class Address {
  public:
    Address() = default;
    explicit Address(std::string id) : id_{std::move(id)} {}

    [[nodiscard]] const std::string& str() const noexcept { return id_; }
    [[nodiscard]] bool empty() const noexcept { return id_.empty(); }

    friend auto operator<=>(const Address&, const Address&) = default;
    friend bool operator==(const Address&, const Address&) = default;

  private:
    std::string id_;
};

struct Block {
    std::uint64_t height{0};
    Timestamp timestamp{0};

    friend bool operator==(const Block&, const Block&) = default;
};

}  // namespace vcescrow
