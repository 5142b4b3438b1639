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

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "amount.hpp"
#include "contract_types.hpp"
#include "contracts.hpp"
#include "error.hpp"
#include "ledger.hpp"
#include "types.hpp"

namespace vcescrow {

enum class VideoQuality { kSD, kHD };

inline constexpr std::string_view to_string(VideoQuality q) noexcept { return q == VideoQuality::kSD ? "SD" : "HD"; }

struct QosPreferences {
    BasisPoints availability_target_bp{kFullBasisPoints};
    VideoQuality video_quality{VideoQuality::kSD};
    std::uint64_t max_period_seconds{3600};
    ContractKind monetization_kind{ContractKind::kDynamicPrice};
};

//! Deterministic stand-in for history-based price estimation.
struct RateCard {
    Amount base_rate_per_second{Amount::wei(100'000'000'000'000ULL)};
    BasisPoints sd_multiplier_bp{10'000};
    BasisPoints hd_multiplier_bp{15'000};
    //! Targets strictly above this get the high-availability multiplier.
    BasisPoints high_availability_above_bp{9'950};
    BasisPoints high_availability_multiplier_bp{12'000};
    Amount standby_rate_per_second{Amount::wei(1'000'000'000'000ULL)};
    std::uint64_t standby_window_seconds{86'400};
    std::uint64_t quote_validity_blocks{40};
};

struct Quote {
    Amount price;
    Amount per_minute_price;  // quota kind only
    Amount min_charge;        // flexible kind only
    BasisPoints constraint_multiplier_bp{kFullBasisPoints};
    std::uint64_t expires_at_block{0};
};

inline void validate(const QosPreferences& prefs) {
    if (prefs.availability_target_bp == 0 || prefs.availability_target_bp > kFullBasisPoints) {
        throw Error{ErrorCode::kInvalidPreferences, "availability target must be in (0, 10000] bp"};
    }
    if (prefs.max_period_seconds == 0) throw Error{ErrorCode::kInvalidPreferences, "max period must be positive"};
}

inline Amount standby_min_charge(const FlexibleTerms& terms) {
    if (terms.standby_window_seconds == 0) throw Error{ErrorCode::kInvalidArgument, "standby window must be positive"};
    return terms.standby_rate * terms.standby_window_seconds;
}

inline FlexibleTerms standby_terms(const RateCard& card) {
    FlexibleTerms t;
    t.standby_rate = card.standby_rate_per_second;
    t.standby_window_seconds = card.standby_window_seconds;
    t.min_charge = standby_min_charge(t);
    return t;
}

//! base x seconds x quality x availability x constraint, multipliers in bp, one floor at the end.
inline Quote quote_price(const QosPreferences& prefs, const RateCard& card,
                         BasisPoints constraint_multiplier_bp = kFullBasisPoints, std::uint64_t issued_at_height = 0) {
    validate(prefs);
    const BasisPoints quality =
        prefs.video_quality == VideoQuality::kHD ? card.hd_multiplier_bp : card.sd_multiplier_bp;
    const BasisPoints availability = prefs.availability_target_bp > card.high_availability_above_bp
                                         ? card.high_availability_multiplier_bp
                                         : kFullBasisPoints;
    constexpr uint128 kBp3 = uint128{kFullBasisPoints} * kFullBasisPoints * kFullBasisPoints;
    const uint128 multipliers = checked_mul(checked_mul(quality, availability), constraint_multiplier_bp);

    Quote q;
    q.constraint_multiplier_bp = constraint_multiplier_bp;
    q.expires_at_block = issued_at_height + card.quote_validity_blocks;
    if (prefs.monetization_kind == ContractKind::kTimeLimitedQuota) {
        q.per_minute_price = Amount::wei(mul_div_floor(checked_mul(card.base_rate_per_second.value(), 60), multipliers, kBp3));
        q.price = q.per_minute_price * ((prefs.max_period_seconds + 59) / 60);
    } else {
        q.price = Amount::wei(
            mul_div_floor(checked_mul(card.base_rate_per_second.value(), prefs.max_period_seconds), multipliers, kBp3));
    }
    if (prefs.monetization_kind == ContractKind::kFlexiblePeriod) q.min_charge = standby_terms(card).min_charge;
    if (q.price.is_zero()) throw Error{ErrorCode::kInvalidPreferences, "rate card yields a zero price"};
    return q;
}

inline Quote apply_constraint_pricing(Quote quote, const ConstraintEvaluation& eval) {
    if (!eval.admissible) throw Error{ErrorCode::kInadmissibleOffer, "constraints not satisfied"};
    quote.price = quote.price.scaled(eval.price_multiplier_bp, kFullBasisPoints);
    quote.per_minute_price = quote.per_minute_price.scaled(eval.price_multiplier_bp, kFullBasisPoints);
    quote.constraint_multiplier_bp = static_cast<BasisPoints>(
        mul_div_floor(quote.constraint_multiplier_bp, eval.price_multiplier_bp, kFullBasisPoints));
    return quote;
}

// ---------------------------------------------------------------------------------------------
// Payment method fee comparison
// ---------------------------------------------------------------------------------------------

enum class LockIn { kLimited, kFlexible };

inline constexpr std::string_view to_string(LockIn l) noexcept { return l == LockIn::kLimited ? "limited" : "flexible"; }

struct MerchantCost {
    BasisPoints min_bp{0};
    std::uint64_t fixed_usd_cents{0};
};

struct FeeMethodSpec {
    std::string_view name;
    bool gas_priced{false};
    BasisPoints fee_bp_min{0};
    BasisPoints fee_bp_max{0};
    MerchantCost merchant;
    LockIn lockin{LockIn::kLimited};
};

//! Processing fees and merchant costs of card payments, PayPal and Ethereum as of H1 2018.
inline constexpr std::array<FeeMethodSpec, 4> kFeeMethods{{
    {"Visa", false, 143, 240, {125, 0}, LockIn::kLimited},
    {"Mastercard", false, 155, 260, {125, 5}, LockIn::kLimited},
    {"PayPal", false, 290, 440, {150, 0}, LockIn::kLimited},
    {"Ethereum", true, 0, 0, {0, 0}, LockIn::kFlexible},
}};

struct FeeComparisonInput {
    std::uint64_t amount_usd_cents{0};
    std::uint64_t eth_usd_cents{50'000};
    Amount gas_price{Amount::gwei(20)};
    std::uint64_t gas_units{21'000};
    bool enforce_gas_price_bounds{true};
    GasPriceBounds bounds;
};

struct FeeRow {
    std::string_view method;
    std::uint64_t fee_min_usd_cents{0};
    std::uint64_t fee_max_usd_cents{0};
    bool proportional{false};
    std::uint64_t merchant_min_usd_cents{0};
    LockIn lockin{LockIn::kLimited};
    Amount fee_wei;  // Ethereum only
};

//! USD value of a gas-priced fee, floor-rounded to cents.
inline std::uint64_t gas_fee_usd_cents(Amount gas_price, std::uint64_t gas_units, std::uint64_t eth_usd_cents) {
    const Amount fee = gas_price * gas_units;
    return static_cast<std::uint64_t>(mul_div_floor(fee.value(), eth_usd_cents, kWeiPerEth));
}

inline std::vector<FeeRow> compare_fee_methods(const FeeComparisonInput& in) {
    if (in.eth_usd_cents == 0) throw Error{ErrorCode::kInvalidArgument, "ETH/USD rate must be positive"};
    if (in.enforce_gas_price_bounds && !in.bounds.contains(in.gas_price)) {
        throw Error{ErrorCode::kGasPriceOutOfRange, in.gas_price.to_string() + " wei per gas"};
    }
    auto pct = [&](BasisPoints bp) {
        return static_cast<std::uint64_t>(mul_div_floor(in.amount_usd_cents, bp, kFullBasisPoints));
    };
    std::vector<FeeRow> rows;
    for (const auto& m : kFeeMethods) {
        FeeRow r;
        r.method = m.name;
        r.lockin = m.lockin;
        r.merchant_min_usd_cents = pct(m.merchant.min_bp) + m.merchant.fixed_usd_cents;
        if (m.gas_priced) {
            r.fee_wei = in.gas_price * in.gas_units;
            r.fee_min_usd_cents = r.fee_max_usd_cents = gas_fee_usd_cents(in.gas_price, in.gas_units, in.eth_usd_cents);
        } else {
            r.proportional = true;
            r.fee_min_usd_cents = pct(m.fee_bp_min);
            r.fee_max_usd_cents = pct(m.fee_bp_max);
        }
        rows.push_back(r);
    }
    return rows;
}

inline std::string format_usd_cents(std::uint64_t cents) {
    std::string frac = std::to_string(cents % 100);
    if (frac.size() < 2) frac.insert(frac.begin(), '0');
    return "$" + std::to_string(cents / 100) + "." + frac;
}

}  // namespace vcescrow
