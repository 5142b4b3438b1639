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

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "amount.hpp"
#include "contract_types.hpp"
#include "error.hpp"
#include "ledger.hpp"
#include "types.hpp"

namespace vcescrow {

//! Deployment parameters. `terms` fixes the template for the life of the contract.
struct AgreementTerms {
    Address owner;
    Amount price;
    std::uint64_t lock_time_seconds{0};
    BasisPoints refund_threshold_bp{kDefaultRefundThresholdBp};
    ContractTerms terms{DynamicPriceTerms{}};
    std::optional<Address> income_shares_contract;
    std::optional<Address> voting_contract;
};

struct ConstraintOffer {
    std::string provider_region;
    bool gdpr_compliant{false};
};

struct ConstraintEvaluation {
    bool admissible{false};
    BasisPoints price_multiplier_bp{kFullBasisPoints};
};

namespace detail {

    inline bool is_time_based(ContractKind k) noexcept {
        return k == ContractKind::kFixedPrice || k == ContractKind::kDynamicPrice ||
               k == ContractKind::kFlexiblePeriod || k == ContractKind::kConstraintBased;
    }

    inline bool is_agreement(ContractKind k) noexcept {
        return is_time_based(k) || k == ContractKind::kTimeLimitedQuota;
    }

    inline void require_state(const Contract& c, ContractState expected) {
        if (c.core.state != expected) {
            throw Error{ErrorCode::kWrongState, c.address.str() + " is " + std::string{to_string(c.core.state)} +
                                                    ", expected " + std::string{to_string(expected)}};
        }
    }

    inline void require_kind(const Contract& c, bool ok) {
        if (!ok) {
            throw Error{ErrorCode::kWrongState,
                        "operation not supported by " + std::string{to_string(c.kind())} + " contract"};
        }
    }

    inline void require_owner(const Contract& c, const Address& caller) {
        if (caller != c.core.owner) throw Error{ErrorCode::kNotOwner, caller.str()};
    }

    inline void require_end_user(const Contract& c, const Address& caller) {
        if (!c.core.end_user || caller != *c.core.end_user) throw Error{ErrorCode::kNotEndUser, caller.str()};
    }

    inline void require_bp(BasisPoints bp) {
        if (bp > kFullBasisPoints) throw Error{ErrorCode::kInvalidArgument, "basis points above 10000"};
    }

}  // namespace detail

// ---------------------------------------------------------------------------------------------
// Pure settlement rules
// ---------------------------------------------------------------------------------------------

//! Largest-remainder split of `charge`. Each party first gets floor(charge * n / d); the
//! leftover wei go one each to the largest fractional remainders, earlier entries winning ties.
inline std::vector<Payout> divide_income(Amount charge, const IncomeShares& shares) {
    std::vector<Payout> out;
    std::vector<std::pair<uint128, std::size_t>> remainders;
    Amount assigned;
    for (std::size_t i = 0; i < shares.entries.size(); ++i) {
        const auto& [addr, numerator] = shares.entries[i];
        const uint128 product = checked_mul(charge.value(), numerator);
        out.push_back({addr, Amount::wei(product / shares.denominator)});
        remainders.emplace_back(product % shares.denominator, i);
        assigned += out.back().value;
    }
    std::stable_sort(remainders.begin(), remainders.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    uint128 leftover = (charge - assigned).value();
    for (std::size_t k = 0; leftover > 0; ++k, --leftover) {
        out[remainders[k].second].value += Amount::wei(1);
    }
    return out;
}

inline void validate_shares(const IncomeShares& shares) {
    if (shares.entries.empty() || shares.denominator == 0) throw Error{ErrorCode::kInvalidShares, "empty shares"};
    std::set<Address> seen;
    uint128 sum{0};
    for (const auto& [addr, numerator] : shares.entries) {
        if (numerator == 0) throw Error{ErrorCode::kInvalidShares, "zero share for " + addr.str()};
        if (!seen.insert(addr).second) throw Error{ErrorCode::kInvalidShares, "duplicate party " + addr.str()};
        sum += numerator;
    }
    if (sum != shares.denominator) {
        throw Error{ErrorCode::kInvalidShares,
                    "numerators sum to " + u128_to_string(sum) + ", denominator " + std::to_string(shares.denominator)};
    }
}

[[nodiscard]] inline bool tally(const VotingState& v) noexcept {
    std::uint64_t yes{0};
    for (const auto& [_, choice] : v.votes) yes += choice == VoteChoice::kYes ? 1 : 0;
    return static_cast<uint128>(yes) * v.threshold.denominator >
           static_cast<uint128>(v.voters.size()) * v.threshold.numerator;
}

[[nodiscard]] inline ConstraintEvaluation evaluate_constraints(const ConstraintTerms& terms,
                                                               const ConstraintOffer& offer) {
    const bool gdpr_ok = !terms.gdpr_required || offer.gdpr_compliant;
    const bool region_ok = terms.allowed_regions.empty() || terms.allowed_regions.contains(offer.provider_region);
    ConstraintEvaluation eval;
    eval.admissible = gdpr_ok && region_ok;
    eval.price_multiplier_bp = terms.price_multiplier_bp;
    return eval;
}

//! Total the end user must lock: the maximum price, plus the standby minimum for flexible periods.
[[nodiscard]] inline Amount agreed_payment(const Contract& c) {
    if (c.kind() == ContractKind::kFlexiblePeriod) return c.core.price + c.as<FlexibleTerms>().min_charge;
    return c.core.price;
}

//! Charge owed for `used_seconds` of a time-based agreement at the given availability.
[[nodiscard]] inline Amount time_based_charge(const Contract& c, std::uint64_t used_seconds, BasisPoints availability_bp) {
    const bool anomaly = availability_bp < c.core.refund_threshold_bp;
    const std::uint64_t used = std::min(used_seconds, c.core.lock_time_seconds);
    switch (c.kind()) {
        case ContractKind::kFixedPrice:
            return anomaly ? Amount{} : c.core.price;
        case ContractKind::kFlexiblePeriod: {
            const Amount usage = anomaly ? Amount{} : c.core.price.scaled(used, c.core.lock_time_seconds);
            return c.as<FlexibleTerms>().min_charge + usage;
        }
        case ContractKind::kDynamicPrice:
        case ContractKind::kConstraintBased:
            return anomaly ? Amount{} : c.core.price.scaled(used, c.core.lock_time_seconds);
        default:
            throw Error{ErrorCode::kWrongState, "not a time-based contract"};
    }
}

// ---------------------------------------------------------------------------------------------
// Deployment
// ---------------------------------------------------------------------------------------------

inline Address deploy_contract(Ledger& ledger, const AgreementTerms& t) {
    Contract c;
    c.core.owner = t.owner;
    c.core.price = t.price;
    c.core.lock_time_seconds = t.lock_time_seconds;
    c.core.refund_threshold_bp = t.refund_threshold_bp;
    c.core.income_shares_contract = t.income_shares_contract;
    c.core.voting_contract = t.voting_contract;
    c.terms = t.terms;
    const ContractKind kind = c.kind();

    detail::require_bp(t.refund_threshold_bp);
    if (detail::is_time_based(kind) && t.lock_time_seconds == 0) {
        throw Error{ErrorCode::kInvalidArgument, "lock time must be positive"};
    }
    if (kind == ContractKind::kFlexiblePeriod) {
        const auto& f = c.as<FlexibleTerms>();
        if (f.standby_window_seconds == 0) throw Error{ErrorCode::kInvalidArgument, "standby window must be positive"};
        if (f.min_charge != f.standby_rate * f.standby_window_seconds) {
            throw Error{ErrorCode::kInvalidArgument, "min charge must equal standby rate x window"};
        }
    }
    if ((t.income_shares_contract || t.voting_contract) && !detail::is_agreement(kind)) {
        throw Error{ErrorCode::kInvalidArgument, "only agreement contracts take companions"};
    }
    if (t.income_shares_contract) {
        const Contract& s = ledger.contract(*t.income_shares_contract);
        if (s.kind() != ContractKind::kIncomeDivision) {
            throw Error{ErrorCode::kInvalidArgument, "companion is not an income division contract"};
        }
        if (kind == ContractKind::kTimeLimitedQuota) {
            throw Error{ErrorCode::kInvalidArgument, "income division settles time-based agreements only"};
        }
        detail::require_state(s, ContractState::kQuoted);
    }
    if (t.voting_contract) {
        const Contract& v = ledger.contract(*t.voting_contract);
        if (v.kind() != ContractKind::kConsensusDecision) {
            throw Error{ErrorCode::kInvalidArgument, "companion is not a consensus decision contract"};
        }
        if (!v.as<VotingState>().enacted) throw Error{ErrorCode::kWrongState, "decision not enacted"};
    }
    return ledger.deploy_contract(t.owner, std::move(c));
}

//! Owner publishes the price: Deployed -> Quoted. For quota contracts `price` is per minute.
inline Receipt set_price(Ledger& ledger, const Address& addr, const Address& caller, Amount price) {
    Contract& c = ledger.contract(addr);
    detail::require_kind(c, detail::is_agreement(c.kind()));
    detail::require_state(c, ContractState::kDeployed);
    detail::require_owner(c, caller);
    if (price.is_zero()) throw Error{ErrorCode::kInvalidArgument, "price must be positive"};
    Receipt r = ledger.charge_call(caller, addr);
    if (c.kind() == ContractKind::kTimeLimitedQuota) {
        c.as<QuotaTerms>().per_minute_price = price;
    } else {
        c.core.price = price;
    }
    c.core.state = ContractState::kQuoted;
    return r;
}

// ---------------------------------------------------------------------------------------------
// Time-based agreement life cycle
// ---------------------------------------------------------------------------------------------

//! Escrows the agreed payment. Returns false, changing nothing, when `value` is not the agreed
//! amount; the sender becomes the end user and the release time starts counting.
inline bool lock_funds(Ledger& ledger, const Address& addr, const Address& from, Amount value) {
    Contract& c = ledger.contract(addr);
    detail::require_kind(c, detail::is_time_based(c.kind()));
    detail::require_state(c, ContractState::kQuoted);
    if (value != agreed_payment(c)) return false;
    ledger.deposit_to_escrow(from, addr, value);
    const Timestamp now = ledger.current_block().timestamp;
    c.core.end_user = from;
    c.core.session_start_time = now;
    c.core.release_time = now + c.core.lock_time_seconds;
    c.core.state = ContractState::kUserSigned;
    return true;
}

inline Receipt countersign(Ledger& ledger, const Address& addr, const Address& signer) {
    Contract& c = ledger.contract(addr);
    detail::require_state(c, ContractState::kUserSigned);
    detail::require_owner(c, signer);
    Receipt r = ledger.charge_call(signer, addr);
    c.core.state = ContractState::kActive;
    return r;
}

namespace detail {

    inline Settlement pay_out(Ledger& ledger, Contract& c, Amount charge, std::uint64_t used_seconds,
                              ContractState via) {
        Settlement s;
        s.charge = charge;
        s.refund = c.core.escrow - charge;
        s.used_seconds = used_seconds;
        s.settled_at = ledger.current_block().timestamp;
        if (c.core.income_shares_contract) {
            s.payouts = divide_income(charge, ledger.contract(*c.core.income_shares_contract).as<IncomeShares>());
        } else {
            s.payouts.push_back({c.core.owner, charge});
        }
        c.core.state = via;
        for (const auto& p : s.payouts) {
            if (!p.value.is_zero()) ledger.release_from_escrow(c.address, p.to, p.value, TxKind::kPayout);
        }
        if (!s.refund.is_zero()) ledger.release_from_escrow(c.address, *c.core.end_user, s.refund, TxKind::kRefund);
        c.core.ended_via = via;
        c.core.state = ContractState::kSettled;
        return s;
    }

}  // namespace detail

//! End user stops the session; used time is prorated unless availability fell below threshold.
inline Settlement stop_and_settle(Ledger& ledger, const Address& addr, const Address& caller,
                                  BasisPoints availability_bp) {
    detail::require_bp(availability_bp);
    Contract& c = ledger.contract(addr);
    detail::require_kind(c, detail::is_time_based(c.kind()));
    detail::require_state(c, ContractState::kActive);
    detail::require_end_user(c, caller);
    ledger.charge_call(caller, addr);
    const Timestamp now = ledger.current_block().timestamp;
    const std::uint64_t used = std::min(now - c.core.session_start_time, c.core.lock_time_seconds);
    return detail::pay_out(ledger, c, time_based_charge(c, used, availability_bp), used, ContractState::kStopped);
}

//! Alarm-clock settlement at or after the release time. A contract that was paid but never
//! countersigned never delivered service and is refunded in full.
inline Settlement expire_and_settle(Ledger& ledger, const Address& addr, BasisPoints availability_bp) {
    detail::require_bp(availability_bp);
    Contract& c = ledger.contract(addr);
    detail::require_kind(c, detail::is_time_based(c.kind()));
    if (c.core.state != ContractState::kActive && c.core.state != ContractState::kUserSigned) {
        detail::require_state(c, ContractState::kActive);
    }
    const Timestamp now = ledger.current_block().timestamp;
    if (now < c.core.release_time) {
        throw Error{ErrorCode::kNotYetReleased,
                    "release at " + std::to_string(c.core.release_time) + ", now " + std::to_string(now)};
    }
    ledger.record_wakeup(addr);
    if (c.core.state == ContractState::kUserSigned) {
        return detail::pay_out(ledger, c, Amount{}, 0, ContractState::kExpired);
    }
    const std::uint64_t used = c.core.lock_time_seconds;
    return detail::pay_out(ledger, c, time_based_charge(c, used, availability_bp), used, ContractState::kExpired);
}

//! Returns the whole escrow to the end user, e.g. after a failed deployment.
inline Settlement refund_in_full(Ledger& ledger, const Address& addr) {
    Contract& c = ledger.contract(addr);
    detail::require_kind(c, detail::is_time_based(c.kind()));
    if (c.core.state != ContractState::kActive && c.core.state != ContractState::kUserSigned) {
        detail::require_state(c, ContractState::kActive);
    }
    return detail::pay_out(ledger, c, Amount{}, 0, ContractState::kStopped);
}

// ---------------------------------------------------------------------------------------------
// Prepaid minute quota
// ---------------------------------------------------------------------------------------------

inline bool quota_purchase(Ledger& ledger, const Address& addr, const Address& from, std::uint64_t minutes,
                           Amount value) {
    Contract& c = ledger.contract(addr);
    detail::require_kind(c, c.kind() == ContractKind::kTimeLimitedQuota);
    detail::require_state(c, ContractState::kQuoted);
    if (minutes == 0) throw Error{ErrorCode::kInvalidArgument, "minutes must be positive"};
    auto& q = c.as<QuotaTerms>();
    if (value != q.per_minute_price * minutes) return false;
    ledger.deposit_to_escrow(from, addr, value);
    c.core.end_user = from;
    c.core.price = value;
    c.core.session_start_time = ledger.current_block().timestamp;
    q.minutes_purchased = minutes;
    c.core.state = ContractState::kActive;
    return true;
}

//! Opens a metered session and returns its token.
inline std::string quota_start(Ledger& ledger, const Address& addr, const Address& caller) {
    Contract& c = ledger.contract(addr);
    detail::require_kind(c, c.kind() == ContractKind::kTimeLimitedQuota);
    auto& q = c.as<QuotaTerms>();
    if (c.core.state == ContractState::kSettled && q.minutes_purchased > 0 &&
        q.minutes_consumed == q.minutes_purchased) {
        throw Error{ErrorCode::kQuotaExhausted, addr.str()};
    }
    detail::require_state(c, ContractState::kActive);
    detail::require_end_user(c, caller);
    if (q.open_session) throw Error{ErrorCode::kSessionAlreadyOpen, addr.str()};
    if (q.minutes_consumed >= q.minutes_purchased) throw Error{ErrorCode::kQuotaExhausted, addr.str()};
    ledger.charge_call(caller, addr);
    q.open_session = ledger.current_block().timestamp;
    ++q.sessions_started;
    return addr.str() + "/session-" + std::to_string(q.sessions_started);
}

//! Closes the open session, billing every started minute (clamped to what remains).
inline std::uint64_t quota_stop(Ledger& ledger, const Address& addr, const Address& caller) {
    Contract& c = ledger.contract(addr);
    detail::require_kind(c, c.kind() == ContractKind::kTimeLimitedQuota);
    detail::require_state(c, ContractState::kActive);
    detail::require_end_user(c, caller);
    auto& q = c.as<QuotaTerms>();
    if (!q.open_session) throw Error{ErrorCode::kNoOpenSession, addr.str()};
    ledger.charge_call(caller, addr);
    const Timestamp now = ledger.current_block().timestamp;
    const std::uint64_t elapsed = now - *q.open_session;
    const std::uint64_t started_minutes = (elapsed + 59) / 60;
    const std::uint64_t minutes = std::min(started_minutes, q.minutes_purchased - q.minutes_consumed);
    q.open_session.reset();
    q.minutes_consumed += minutes;
    ++q.sessions_stopped;
    const Amount charge = q.per_minute_price * minutes;
    if (!charge.is_zero()) ledger.release_from_escrow(addr, c.core.owner, charge, TxKind::kPayout);
    if (q.minutes_consumed == q.minutes_purchased) {
        c.core.ended_via = ContractState::kStopped;
        c.core.state = ContractState::kSettled;
    }
    return minutes;
}

//! End user gives up the unused minutes; the remaining escrow is refunded.
inline Settlement quota_close(Ledger& ledger, const Address& addr, const Address& caller) {
    Contract& c = ledger.contract(addr);
    detail::require_kind(c, c.kind() == ContractKind::kTimeLimitedQuota);
    detail::require_state(c, ContractState::kActive);
    detail::require_end_user(c, caller);
    auto& q = c.as<QuotaTerms>();
    if (q.open_session) throw Error{ErrorCode::kSessionAlreadyOpen, addr.str()};
    ledger.charge_call(caller, addr);
    Settlement s;
    s.charge = q.per_minute_price * q.minutes_consumed;
    s.refund = c.core.escrow;
    s.payouts.push_back({c.core.owner, s.charge});
    s.used_seconds = q.minutes_consumed * 60;
    s.settled_at = ledger.current_block().timestamp;
    if (!s.refund.is_zero()) ledger.release_from_escrow(addr, *c.core.end_user, s.refund, TxKind::kRefund);
    c.core.ended_via = ContractState::kStopped;
    c.core.state = ContractState::kSettled;
    return s;
}

// ---------------------------------------------------------------------------------------------
// Income division and consensus companions
// ---------------------------------------------------------------------------------------------

inline Receipt set_income_shares(Ledger& ledger, const Address& addr, const Address& proposer, IncomeShares shares) {
    Contract& c = ledger.contract(addr);
    detail::require_kind(c, c.kind() == ContractKind::kIncomeDivision);
    detail::require_state(c, ContractState::kDeployed);
    detail::require_owner(c, proposer);
    validate_shares(shares);
    for (const auto& [party, _] : shares.entries) {
        if (!ledger.is_account(party)) throw Error{ErrorCode::kInvalidShares, "unknown party " + party.str()};
    }
    Receipt r = ledger.charge_call(proposer, addr);
    c.as<IncomeShares>() = std::move(shares);
    c.core.state = ContractState::kQuoted;
    return r;
}

inline Receipt init_vote(Ledger& ledger, const Address& addr, const Address& owner, std::set<Address> voters,
                         VoteThreshold threshold = {}) {
    Contract& c = ledger.contract(addr);
    detail::require_kind(c, c.kind() == ContractKind::kConsensusDecision);
    detail::require_state(c, ContractState::kDeployed);
    detail::require_owner(c, owner);
    if (voters.empty()) throw Error{ErrorCode::kInvalidArgument, "no voters"};
    if (threshold.denominator == 0 || threshold.numerator > threshold.denominator) {
        throw Error{ErrorCode::kInvalidArgument, "threshold must lie in [0, 1]"};
    }
    Receipt r = ledger.charge_call(owner, addr);
    auto& v = c.as<VotingState>();
    v.voters = std::move(voters);
    v.threshold = threshold;
    c.core.state = ContractState::kQuoted;
    return r;
}

inline Receipt cast_vote(Ledger& ledger, const Address& addr, const Address& voter, VoteChoice choice) {
    Contract& c = ledger.contract(addr);
    detail::require_kind(c, c.kind() == ContractKind::kConsensusDecision);
    detail::require_state(c, ContractState::kQuoted);
    auto& v = c.as<VotingState>();
    if (!v.voters.contains(voter)) throw Error{ErrorCode::kNotAVoter, voter.str()};
    if (v.votes.contains(voter)) throw Error{ErrorCode::kAlreadyVoted, voter.str()};
    Receipt r = ledger.charge_call(voter, addr);
    v.votes.emplace(voter, choice);
    return r;
}

//! Counts the votes cast so far. Once enacted a decision stays enacted.
inline bool tally_and_enact(Ledger& ledger, const Address& addr, const Address& caller) {
    Contract& c = ledger.contract(addr);
    detail::require_kind(c, c.kind() == ContractKind::kConsensusDecision);
    detail::require_state(c, ContractState::kQuoted);
    ledger.charge_call(caller, addr);
    auto& v = c.as<VotingState>();
    v.enacted = v.enacted || tally(v);
    return v.enacted;
}

}  // namespace vcescrow
