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

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "amount.hpp"
#include "types.hpp"

namespace vcescrow {

enum class ContractKind {
    kFixedPrice,
    kDynamicPrice,
    kTimeLimitedQuota,
    kFlexiblePeriod,
    kIncomeDivision,
    kConsensusDecision,
    kConstraintBased,
};

inline constexpr std::string_view to_string(ContractKind kind) noexcept {
    switch (kind) {
        case ContractKind::kFixedPrice: return "fixed_price";
        case ContractKind::kDynamicPrice: return "dynamic_price";
        case ContractKind::kTimeLimitedQuota: return "time_limited_quota";
        case ContractKind::kFlexiblePeriod: return "flexible_period";
        case ContractKind::kIncomeDivision: return "income_division";
        case ContractKind::kConsensusDecision: return "consensus_decision";
        case ContractKind::kConstraintBased: return "constraint_based";
    }
    return "unknown";
}

inline std::optional<ContractKind> parse_contract_kind(std::string_view name) {
    for (auto k : {ContractKind::kFixedPrice, ContractKind::kDynamicPrice, ContractKind::kTimeLimitedQuota,
                   ContractKind::kFlexiblePeriod, ContractKind::kIncomeDivision, ContractKind::kConsensusDecision,
                   ContractKind::kConstraintBased}) {
        if (to_string(k) == name) return k;
    }
    return std::nullopt;
}

enum class ContractState { kDeployed, kQuoted, kUserSigned, kActive, kStopped, kExpired, kSettled };

inline constexpr std::string_view to_string(ContractState state) noexcept {
    switch (state) {
        case ContractState::kDeployed: return "Deployed";
        case ContractState::kQuoted: return "Quoted";
        case ContractState::kUserSigned: return "UserSigned";
        case ContractState::kActive: return "Active";
        case ContractState::kStopped: return "Stopped";
        case ContractState::kExpired: return "Expired";
        case ContractState::kSettled: return "Settled";
    }
    return "unknown";
}

inline constexpr BasisPoints kDefaultRefundThresholdBp{7'500};

//! Fields shared by every template. For time-based templates `price` is the maximum price for
//! `lock_time_seconds` of service.
struct AgreementCore {
    Address owner;
    std::optional<Address> end_user;
    Amount price;
    std::uint64_t lock_time_seconds{0};
    Timestamp session_start_time{0};
    Timestamp release_time{0};
    Amount escrow;
    ContractState state{ContractState::kDeployed};
    //! Stopped or Expired once the contract has passed through settlement.
    std::optional<ContractState> ended_via;
    BasisPoints refund_threshold_bp{kDefaultRefundThresholdBp};
    // Companion contracts for the two-contract templates.
    std::optional<Address> income_shares_contract;
    std::optional<Address> voting_contract;
};

struct FixedPriceTerms {};

struct DynamicPriceTerms {};

struct QuotaTerms {
    Amount per_minute_price;
    std::uint64_t minutes_purchased{0};
    std::uint64_t minutes_consumed{0};
    std::optional<Timestamp> open_session;
    std::uint64_t sessions_started{0};
    std::uint64_t sessions_stopped{0};
};

struct FlexibleTerms {
    Amount standby_rate;  // wei per second
    std::uint64_t standby_window_seconds{0};
    Amount min_charge;
};

//! Shares in listing order; ties in remainder distribution go to the earlier entry.
struct IncomeShares {
    std::vector<std::pair<Address, std::uint64_t>> entries;
    std::uint64_t denominator{0};
};

enum class VoteChoice { kYes, kNo };

//! Enactment requires yes * denominator > voters * numerator. The default 1/2 is a strict majority.
struct VoteThreshold {
    std::uint64_t numerator{1};
    std::uint64_t denominator{2};
};

struct VotingState {
    std::set<Address> voters;
    std::map<Address, VoteChoice> votes;
    VoteThreshold threshold;
    bool enacted{false};
};

struct ConstraintTerms {
    bool gdpr_required{false};
    std::set<std::string> allowed_regions;  // empty = unrestricted
    BasisPoints price_multiplier_bp{kFullBasisPoints};
};

using ContractTerms = std::variant<FixedPriceTerms, DynamicPriceTerms, QuotaTerms, FlexibleTerms, IncomeShares,
                                   VotingState, ConstraintTerms>;

struct Contract {
    Address address;
    AgreementCore core;
    ContractTerms terms;

    [[nodiscard]] ContractKind kind() const noexcept { return static_cast<ContractKind>(terms.index()); }

    template <typename T>
    [[nodiscard]] T& as() {
        return std::get<T>(terms);
    }
    template <typename T>
    [[nodiscard]] const T& as() const {
        return std::get<T>(terms);
    }
};

struct Payout {
    Address to;
    Amount value;

    friend bool operator==(const Payout&, const Payout&) = default;
};

//! Funds that left a contract's escrow: `charge` to the provider side (split across `payouts`),
//! `refund` back to the end user.
struct Settlement {
    Amount charge;
    Amount refund;
    std::vector<Payout> payouts;
    std::uint64_t used_seconds{0};
    Timestamp settled_at{0};
};

}  // namespace vcescrow
