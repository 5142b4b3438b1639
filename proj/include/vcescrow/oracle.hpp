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
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "amount.hpp"
#include "contract_types.hpp"
#include "runner.hpp"
#include "scenario.hpp"

namespace vcescrow {

struct OracleResult {
    std::map<SessionId, SessionOutcome> outcomes;
    std::map<Address, Amount> balances;
    Amount fee_sink;
};

//! Recomputes every session's settlement straight from the event list with exact rational
//! arithmetic. It shares nothing with the ledger, the contract state machines or the
//! orchestrator; it only reuses the parsed script.
class SettlementOracle {
  public:
    using Int = boost::multiprecision::cpp_int;
    using Rational = boost::multiprecision::cpp_rational;

    explicit SettlementOracle(const ScenarioScript& script, std::optional<std::uint64_t> seed = std::nullopt)
        : script_{script} {
        const auto& b = script.config.ledger.blocks;
        interval_ = b.interval_seconds;
        half_width_ = b.jitter_half_width;
        jitter_ = seed ? seed : b.jitter_seed;
        if (jitter_) rng_.seed(*jitter_);
        const auto& gas = script.config.ledger.gas;
        const Int gas_price = to_int(gas.gas_price);
        transfer_fee_ = gas_price * gas.transfer_gas;
        call_fee_ = gas_price * gas.contract_call_gas;
        deploy_fee_ = gas_price * gas.contract_deploy_gas;
    }

    OracleResult run() {
        for (const auto& [addr, v] : script_.genesis) balance_[addr] = to_int(v);
        for (const auto& e : script_.events) {
            advance_to(e.at);
            fire_expiries();
            apply(e);
        }
        if (script_.config.drain_wakeups) {
            Timestamp last_release = 0;
            for (const auto& [_, s] : sessions_) {
                if (s.kind == ContractKind::kTimeLimitedQuota) continue;
                if (s.phase == Phase::kPaid || s.phase == Phase::kRunning) last_release = std::max(last_release, s.release);
            }
            advance_to(last_release);
            fire_expiries();
        }

        OracleResult r;
        for (const auto& [id, s] : sessions_) {
            SessionOutcome o;
            o.kind = s.kind;
            o.settled = s.settled;
            o.charge = to_amount(s.settled ? s.charge : s.income);
            o.refund = to_amount(s.refund);
            for (const auto& [addr, v] : s.payouts) o.payouts.push_back({addr, to_amount(v)});
            r.outcomes.emplace(id, std::move(o));
        }
        for (const auto& [addr, v] : balance_) r.balances.emplace(addr, to_amount(v));
        r.fee_sink = to_amount(fee_sink_);
        return r;
    }

    // Exposed so tests can check the rational rules on hand-picked values.
    static Int floor_of(const Rational& q) { return numerator(q) / denominator(q); }

    static Int prorated(const Int& price, std::uint64_t used, std::uint64_t lock) {
        return floor_of(Rational{price} * Rational{Int{used}, Int{lock}});
    }

    //! Exact share, floored; leftover wei to the largest fractional parts, earlier entries first.
    static std::vector<std::pair<Address, Int>> split(const Int& charge,
                                                      const std::vector<std::pair<Address, std::uint64_t>>& shares,
                                                      std::uint64_t denominator_) {
        std::vector<std::pair<Address, Int>> out;
        std::vector<std::pair<Rational, std::size_t>> fractions;
        Int assigned = 0;
        for (std::size_t i = 0; i < shares.size(); ++i) {
            const Rational exact = Rational{charge} * Rational{Int{shares[i].second}, Int{denominator_}};
            const Int whole = floor_of(exact);
            out.emplace_back(shares[i].first, whole);
            fractions.emplace_back(exact - Rational{whole}, i);
            assigned += whole;
        }
        Int left = charge - assigned;
        std::vector<std::size_t> order(fractions.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return fractions[a].first > fractions[b].first; });
        for (std::size_t k = 0; left > 0; ++k, --left) out[fractions[order[k]].second].second += 1;
        return out;
    }

  private:
    enum class Phase { kAwaitingDecision, kQuoted, kPaid, kRunning, kClosed };

    struct Tracked {
        ContractKind kind{ContractKind::kDynamicPrice};
        Address user;
        Address owner;
        Phase phase{Phase::kQuoted};
        bool has_agreement{false};
        std::uint64_t quote_expiry{0};
        Int price = 0;
        Int per_minute = 0;
        Int min_charge = 0;
        std::uint64_t lock{0};
        Int escrow = 0;
        Timestamp start{0};
        Timestamp release{0};
        bool deployed{false};
        std::uint64_t up{0};
        std::uint64_t samples{0};
        std::uint64_t purchased{0};
        std::uint64_t consumed{0};
        std::optional<Timestamp> open;
        Int income = 0;
        std::vector<std::pair<Address, std::uint64_t>> shares;
        std::uint64_t share_denominator{0};
        std::set<Address> voters;
        std::map<Address, bool> votes;
        bool enacted{false};
        bool settled{false};
        Int charge = 0;
        Int refund = 0;
        std::vector<std::pair<Address, Int>> payouts;
    };

    static Int to_int(Amount a) {
        return Int{a.to_string()};
    }
    static Amount to_amount(const Int& v) { return Amount::parse(v.str()); }

    void advance_to(Timestamp t) {
        while (now_ < t) {
            std::uint64_t step = interval_;
            if (jitter_) step = interval_ - half_width_ + rng_() % (2 * half_width_ + 1);
            now_ += step;
            ++height_;
        }
    }

    bool funded(const Address& a, const Int& need) const {
        auto it = balance_.find(a);
        return it != balance_.end() && it->second >= need;
    }

    void pay_fee(const Address& a, const Int& fee) {
        balance_[a] -= fee;
        fee_sink_ += fee;
    }

    BasisPoints availability(const Tracked& s) const {
        if (s.samples == 0) return kFullBasisPoints;
        return static_cast<BasisPoints>(floor_of(Rational{Int{10'000} * s.up, Int{s.samples}}));
    }

    Int owed(const Tracked& s, std::uint64_t used) const {
        const bool anomaly = availability(s) < script_.config.orchestrator.refund_threshold_bp;
        switch (s.kind) {
            case ContractKind::kFixedPrice: return anomaly ? Int{0} : s.price;
            case ContractKind::kFlexiblePeriod: return s.min_charge + (anomaly ? Int{0} : prorated(s.price, used, s.lock));
            default: return anomaly ? Int{0} : prorated(s.price, used, s.lock);
        }
    }

    void settle(Tracked& s, const Int& charge) {
        s.charge = charge;
        s.refund = s.escrow - charge;
        if (s.kind == ContractKind::kIncomeDivision) {
            s.payouts = split(charge, s.shares, s.share_denominator);
        } else {
            s.payouts = {{s.owner, charge}};
        }
        for (const auto& [addr, v] : s.payouts) balance_[addr] += v;
        balance_[s.user] += s.refund;
        s.escrow = 0;
        s.settled = true;
        s.phase = Phase::kClosed;
    }

    void fire_expiries() {
        for (auto& [_, s] : sessions_) {
            if (s.kind == ContractKind::kTimeLimitedQuota) continue;
            if ((s.phase == Phase::kPaid || s.phase == Phase::kRunning) && s.release <= now_) {
                settle(s, s.phase == Phase::kPaid ? Int{0} : owed(s, s.lock));
            }
        }
    }

    Tracked* find(const SessionId& id) {
        auto it = sessions_.find(id);
        return it == sessions_.end() ? nullptr : &it->second;
    }

    void apply(const ScenarioEvent& e) {
        switch (e.action) {
            case Action::kRequestSession: return request(e);
            case Action::kTransfer: {
                const Int v = to_int(*e.value);
                if (!funded(e.actor, v + transfer_fee_)) return;
                pay_fee(e.actor, transfer_fee_);
                balance_[e.actor] -= v;
                balance_[e.to] += v;
                return;
            }
            default: break;
        }
        Tracked* s = find(e.session);
        if (s == nullptr) return;
        const bool quota = s->kind == ContractKind::kTimeLimitedQuota;
        switch (e.action) {
            case Action::kPay: {
                if (!s->has_agreement || quota || e.actor != s->user || s->phase != Phase::kQuoted) return;
                if (height_ > s->quote_expiry) return;
                const Int due = s->price + s->min_charge;
                const Int value = e.value ? to_int(*e.value) : due;
                if (value != due || !funded(e.actor, value + call_fee_)) return;
                pay_fee(e.actor, call_fee_);
                balance_[e.actor] -= value;
                s->escrow = value;
                s->start = now_;
                s->release = now_ + s->lock;
                s->phase = Phase::kPaid;
                return;
            }
            case Action::kPurchase: {
                if (!s->has_agreement || !quota || e.actor != s->user || s->phase != Phase::kQuoted) return;
                if (height_ > s->quote_expiry || e.minutes == 0) return;
                const Int due = s->per_minute * e.minutes;
                const Int value = e.value ? to_int(*e.value) : due;
                if (value != due || !funded(e.actor, value + call_fee_)) return;
                pay_fee(e.actor, call_fee_);
                balance_[e.actor] -= value;
                s->escrow = value;
                s->purchased = e.minutes;
                s->phase = Phase::kRunning;
                return;
            }
            case Action::kCountersign: {
                if (s->phase != Phase::kPaid || e.actor != s->owner || !funded(e.actor, call_fee_)) return;
                pay_fee(e.actor, call_fee_);
                if (script_.config.orchestrator.failing_deployments.contains(e.session)) {
                    settle(*s, Int{0});
                    return;
                }
                s->deployed = true;
                s->phase = Phase::kRunning;
                return;
            }
            case Action::kQos:
                if (!s->deployed || s->settled) return;
                ++s->samples;
                s->up += e.available ? 1 : 0;
                return;
            case Action::kStop: {
                if (quota || s->phase != Phase::kRunning || e.actor != s->user || !funded(e.actor, call_fee_)) return;
                pay_fee(e.actor, call_fee_);
                settle(*s, owed(*s, std::min<std::uint64_t>(now_ - s->start, s->lock)));
                return;
            }
            case Action::kQuotaStart: {
                if (!quota || s->phase != Phase::kRunning || e.actor != s->user || s->open) return;
                if (s->consumed >= s->purchased || !funded(e.actor, call_fee_)) return;
                pay_fee(e.actor, call_fee_);
                s->open = now_;
                return;
            }
            case Action::kQuotaStop: {
                if (!quota || s->phase != Phase::kRunning || e.actor != s->user || !s->open) return;
                if (!funded(e.actor, call_fee_)) return;
                pay_fee(e.actor, call_fee_);
                const std::uint64_t elapsed = now_ - *s->open;
                const std::uint64_t started = elapsed / 60 + (elapsed % 60 != 0 ? 1 : 0);
                const std::uint64_t minutes = std::min(started, s->purchased - s->consumed);
                const Int bill = s->per_minute * minutes;
                s->open.reset();
                s->consumed += minutes;
                s->income += bill;
                s->escrow -= bill;
                balance_[s->owner] += bill;
                if (s->consumed == s->purchased) {
                    s->charge = s->income;
                    s->refund = 0;
                    s->payouts = {{s->owner, s->income}};
                    s->settled = true;
                    s->phase = Phase::kClosed;
                }
                return;
            }
            case Action::kQuotaClose: {
                if (!quota || s->phase != Phase::kRunning || e.actor != s->user || s->open) return;
                if (!funded(e.actor, call_fee_)) return;
                pay_fee(e.actor, call_fee_);
                s->charge = s->income;
                s->refund = s->escrow;
                s->payouts = {{s->owner, s->income}};
                balance_[s->user] += s->escrow;
                s->escrow = 0;
                s->settled = true;
                s->phase = Phase::kClosed;
                return;
            }
            case Action::kVote: {
                if (s->kind != ContractKind::kConsensusDecision || !s->voters.contains(e.actor)) return;
                if (s->votes.contains(e.actor) || !funded(e.actor, call_fee_)) return;
                pay_fee(e.actor, call_fee_);
                s->votes.emplace(e.actor, e.choice == VoteChoice::kYes);
                return;
            }
            case Action::kTally: {
                if (s->kind != ContractKind::kConsensusDecision) return;
                std::uint64_t yes = 0;
                for (const auto& [_, v] : s->votes) yes += v ? 1 : 0;
                const auto& th = script_.config.orchestrator.vote_threshold;
                const bool passes = Int{yes} * th.denominator > Int{s->voters.size()} * th.numerator;
                const bool deploys = !s->has_agreement && (s->enacted || passes);
                if (deploys) {
                    Int owner_needs = deploy_fee_ + call_fee_ + (e.actor == s->owner ? call_fee_ : Int{0});
                    if (!funded(s->owner, owner_needs)) return;
                }
                if (!funded(e.actor, call_fee_)) return;
                pay_fee(e.actor, call_fee_);
                s->enacted = s->enacted || passes;
                if (deploys) {
                    pay_fee(s->owner, deploy_fee_ + call_fee_);
                    s->has_agreement = true;
                    s->phase = Phase::kQuoted;
                    s->quote_expiry = height_ + script_.config.orchestrator.rate_card.quote_validity_blocks;
                }
                return;
            }
            default: return;
        }
    }

    void request(const ScenarioEvent& e) {
        if (sessions_.contains(e.session)) return;
        const auto& prefs = e.request.prefs;
        if (prefs.availability_target_bp == 0 || prefs.availability_target_bp > 10'000 || prefs.max_period_seconds == 0) {
            return;
        }
        const auto& cfg = script_.config.orchestrator;
        const ConstraintTerms constraints = e.request.constraints.value_or(ConstraintTerms{});
        std::optional<Address> owner;
        for (const auto& p : cfg.providers) {
            const bool gdpr = !constraints.gdpr_required || p.gdpr_compliant;
            const bool region = constraints.allowed_regions.empty() || constraints.allowed_regions.contains(p.region);
            if (gdpr && region) {
                owner = p.address;
                break;
            }
        }
        if (!owner) return;

        Tracked s;
        s.kind = prefs.monetization_kind;
        s.user = e.actor;
        s.owner = *owner;
        s.lock = prefs.max_period_seconds;
        if (s.kind == ContractKind::kIncomeDivision) {
            const auto& shares = e.request.income_shares;
            if (shares.entries.empty() || shares.denominator == 0) return;
            std::set<Address> seen;
            Int sum = 0;
            for (const auto& [addr, n] : shares.entries) {
                if (n == 0 || !seen.insert(addr).second || !balance_.contains(addr)) return;
                sum += n;
            }
            if (sum != shares.denominator) return;
            s.shares = shares.entries;
            s.share_denominator = shares.denominator;
        }
        if (s.kind == ContractKind::kConsensusDecision) {
            if (e.request.voters.empty()) return;
            for (const auto& v : e.request.voters) {
                if (!balance_.contains(v)) return;
            }
            s.voters = e.request.voters;
        }
        const Int contracts = s.kind == ContractKind::kIncomeDivision ? 2 : 1;
        if (!funded(s.owner, (deploy_fee_ + call_fee_) * contracts)) return;

        const auto& card = cfg.rate_card;
        const BasisPoints quality = prefs.video_quality == VideoQuality::kHD ? card.hd_multiplier_bp : card.sd_multiplier_bp;
        const BasisPoints avail =
            prefs.availability_target_bp > card.high_availability_above_bp ? card.high_availability_multiplier_bp : 10'000;
        const Rational scale = Rational{Int{quality}, Int{10'000}} * Rational{Int{avail}, Int{10'000}} *
                               Rational{Int{constraints.price_multiplier_bp}, Int{10'000}};
        const Int base = to_int(card.base_rate_per_second);
        if (s.kind == ContractKind::kTimeLimitedQuota) {
            s.per_minute = floor_of(Rational{base * 60} * scale);
            s.price = s.per_minute * ((prefs.max_period_seconds + 59) / 60);
        } else {
            s.price = floor_of(Rational{base * prefs.max_period_seconds} * scale);
        }
        if (s.kind == ContractKind::kFlexiblePeriod) {
            if (card.standby_window_seconds == 0) return;
            s.min_charge = to_int(card.standby_rate_per_second) * card.standby_window_seconds;
        }
        if (s.price == 0) return;

        pay_fee(s.owner, (deploy_fee_ + call_fee_) * contracts);
        s.has_agreement = s.kind != ContractKind::kConsensusDecision;
        s.phase = s.has_agreement ? Phase::kQuoted : Phase::kAwaitingDecision;
        s.quote_expiry = height_ + card.quote_validity_blocks;
        sessions_.emplace(e.session, std::move(s));
    }

    const ScenarioScript& script_;
    std::uint64_t interval_{15};
    std::uint64_t half_width_{10};
    std::optional<std::uint64_t> jitter_;
    std::mt19937_64 rng_;
    Timestamp now_{0};
    std::uint64_t height_{0};
    Int transfer_fee_ = 0;
    Int call_fee_ = 0;
    Int deploy_fee_ = 0;
    std::map<Address, Int> balance_;
    Int fee_sink_ = 0;
    std::map<SessionId, Tracked> sessions_;
};

inline OracleResult oracle_settlement(const ScenarioScript& script, std::optional<std::uint64_t> seed = std::nullopt) {
    return SettlementOracle{script, seed}.run();
}

inline nlohmann::ordered_json oracle_json(const OracleResult& r) {
    using ojson = nlohmann::ordered_json;
    ojson j;
    ojson settlements = ojson::object();
    for (const auto& [id, o] : r.outcomes) settlements[id] = outcome_json(o);
    j["settlements"] = settlements;
    ojson balances = ojson::object();
    for (const auto& [addr, v] : r.balances) balances[addr.str()] = v.to_string();
    j["final_balances"] = balances;
    j["fee_sink_wei"] = r.fee_sink.to_string();
    return j;
}

}  // namespace vcescrow
