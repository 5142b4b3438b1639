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
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "amount.hpp"
#include "contract_types.hpp"
#include "contracts.hpp"
#include "error.hpp"
#include "ledger.hpp"
#include "orchestrator.hpp"
#include "scenario.hpp"

namespace vcescrow {

//! What left a session's escrow so far. Compared field-for-field against the oracle.
struct SessionOutcome {
    ContractKind kind{ContractKind::kDynamicPrice};
    bool settled{false};
    Amount charge;
    Amount refund;
    std::vector<Payout> payouts;

    friend bool operator==(const SessionOutcome&, const SessionOutcome&) = default;
};

struct EventOutcome {
    std::size_t index{0};
    Timestamp at{0};
    Block block;
    Action action{Action::kPay};
    SessionId session;
    std::optional<std::string> error;
};

struct SettlementReport {
    std::string name;
    Block final_block;
    Amount genesis_total;
    BalanceSnapshot balances;
    std::map<Address, Contract> contracts;
    std::map<SessionId, Session> sessions;
    std::map<SessionId, SessionOutcome> outcomes;
    std::vector<EventOutcome> events;
    bool conservation{false};
    bool replay_matches{false};
    std::size_t transaction_count{0};
    std::string transaction_log_digest;
    std::string transaction_log_jsonl;

    [[nodiscard]] std::size_t event_error_count() const {
        std::size_t n{0};
        for (const auto& e : events) n += e.error ? 1 : 0;
        return n;
    }
};

inline SessionOutcome outcome_of(const Session& s) {
    SessionOutcome o;
    o.kind = s.request.prefs.monetization_kind;
    if (s.record.settlement) {
        o.settled = true;
        o.charge = s.record.settlement->charge;
        o.refund = s.record.settlement->refund;
        o.payouts = s.record.settlement->payouts;
    } else {
        o.charge = s.record.quota_income;
    }
    return o;
}

namespace detail {

    inline void apply_event(Orchestrator& orch, Ledger& ledger, const ScenarioEvent& e) {
        switch (e.action) {
            case Action::kRequestSession:
                orch.request_session(e.session, e.request);
                break;
            case Action::kPay: {
                const Session& s = orch.session(e.session);
                Amount value = e.value.value_or(Amount{});
                if (!e.value && !s.record.contract_address.empty()) {
                    value = agreed_payment(ledger.contract(s.record.contract_address));
                }
                orch.user_approve_and_pay(e.session, e.actor, value);
                break;
            }
            case Action::kPurchase: {
                const Session& s = orch.session(e.session);
                const Amount value = e.value ? *e.value : s.quote.per_minute_price * e.minutes;
                orch.purchase_minutes(e.session, e.actor, e.minutes, value);
                break;
            }
            case Action::kCountersign: orch.countersign_and_deploy(e.session, e.actor); break;
            case Action::kQos: orch.record_qos_sample(e.session, e.available); break;
            case Action::kStop: orch.end_session(e.session, e.actor, e.at); break;
            case Action::kQuotaStart: orch.start_quota_session(e.session, e.actor); break;
            case Action::kQuotaStop: orch.stop_quota_session(e.session, e.actor); break;
            case Action::kQuotaClose: orch.close_quota(e.session, e.actor); break;
            case Action::kVote: orch.vote(e.session, e.actor, e.choice); break;
            case Action::kTally: orch.tally(e.session, e.actor); break;
            case Action::kTransfer: ledger.transfer(e.actor, e.to, *e.value); break;
        }
    }

}  // namespace detail

//! Executes every event in the first block whose timestamp reaches its time, in script order.
//! A failing event is recorded in the report and the run continues.
inline SettlementReport run_scenario(const ScenarioScript& script, std::optional<std::uint64_t> seed = std::nullopt) {
    LedgerConfig lc = script.config.ledger;
    if (seed) lc.blocks.jitter_seed = seed;
    Ledger ledger{lc};
    for (const auto& [addr, amount] : script.genesis) ledger.genesis(addr, amount);
    Orchestrator orch{ledger, script.config.orchestrator};

    SettlementReport report;
    report.name = script.name;
    for (std::size_t i = 0; i < script.events.size(); ++i) {
        const ScenarioEvent& e = script.events[i];
        EventOutcome out;
        out.index = i;
        out.at = e.at;
        out.block = ledger.advance_to(e.at);
        out.action = e.action;
        out.session = e.session;
        try {
            detail::apply_event(orch, ledger, e);
        } catch (const Error& err) {
            out.error = err.what();
        }
        report.events.push_back(std::move(out));
    }
    if (script.config.drain_wakeups) {
        while (!ledger.pending_wakeups().empty()) ledger.produce_block();
    }
    if (script.config.corrupt_balance) {
        ledger.testing_corrupt_balance(script.config.corrupt_balance->address, script.config.corrupt_balance->value);
    }

    report.final_block = ledger.current_block();
    report.genesis_total = ledger.genesis_total();
    report.balances = ledger.snapshot();
    report.contracts = ledger.contracts();
    report.sessions = orch.sessions();
    for (const auto& [id, s] : report.sessions) report.outcomes.emplace(id, outcome_of(s));
    report.conservation = ledger.conservation_check();
    report.replay_matches = replay_balances(ledger.tx_log()) == report.balances;
    report.transaction_count = ledger.tx_log().size();
    report.transaction_log_jsonl = ledger.tx_log_jsonl();
    report.transaction_log_digest = sha256_hex(report.transaction_log_jsonl);
    return report;
}

// ---------------------------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------------------------

inline nlohmann::ordered_json payouts_json(const std::vector<Payout>& payouts) {
    auto j = nlohmann::ordered_json::array();
    for (const auto& p : payouts) j.push_back({{"address", p.to.str()}, {"value_wei", p.value.to_string()}});
    return j;
}

inline nlohmann::ordered_json terms_json(const Contract& c) {
    using ojson = nlohmann::ordered_json;
    ojson t = ojson::object();
    t["price_wei"] = c.core.price.to_string();
    t["lock_time_seconds"] = c.core.lock_time_seconds;
    t["refund_threshold_bp"] = c.core.refund_threshold_bp;
    t["owner"] = c.core.owner.str();
    t["end_user"] = c.core.end_user ? ojson(c.core.end_user->str()) : ojson(nullptr);
    t["session_start_time"] = c.core.session_start_time;
    t["release_time"] = c.core.release_time;
    if (c.core.income_shares_contract) t["income_shares_contract"] = c.core.income_shares_contract->str();
    if (c.core.voting_contract) t["voting_contract"] = c.core.voting_contract->str();
    std::visit(
        [&](const auto& terms) {
            using T = std::decay_t<decltype(terms)>;
            if constexpr (std::is_same_v<T, QuotaTerms>) {
                t["per_minute_price_wei"] = terms.per_minute_price.to_string();
                t["minutes_purchased"] = terms.minutes_purchased;
                t["minutes_consumed"] = terms.minutes_consumed;
                t["sessions_started"] = terms.sessions_started;
                t["sessions_stopped"] = terms.sessions_stopped;
            } else if constexpr (std::is_same_v<T, FlexibleTerms>) {
                t["standby_rate_wei_per_second"] = terms.standby_rate.to_string();
                t["standby_window_seconds"] = terms.standby_window_seconds;
                t["min_charge_wei"] = terms.min_charge.to_string();
            } else if constexpr (std::is_same_v<T, IncomeShares>) {
                ojson entries = ojson::array();
                for (const auto& [addr, n] : terms.entries) entries.push_back({{"address", addr.str()}, {"numerator", n}});
                t["denominator"] = terms.denominator;
                t["entries"] = entries;
            } else if constexpr (std::is_same_v<T, VotingState>) {
                ojson voters = ojson::array();
                for (const auto& v : terms.voters) voters.push_back(v.str());
                ojson votes = ojson::object();
                for (const auto& [v, choice] : terms.votes) votes[v.str()] = choice == VoteChoice::kYes ? "yes" : "no";
                t["voters"] = voters;
                t["votes"] = votes;
                t["threshold"] = {{"numerator", terms.threshold.numerator}, {"denominator", terms.threshold.denominator}};
                t["enacted"] = terms.enacted;
            } else if constexpr (std::is_same_v<T, ConstraintTerms>) {
                ojson regions = ojson::array();
                for (const auto& r : terms.allowed_regions) regions.push_back(r);
                t["gdpr_required"] = terms.gdpr_required;
                t["allowed_regions"] = regions;
                t["price_multiplier_bp"] = terms.price_multiplier_bp;
            }
        },
        c.terms);
    return t;
}

inline nlohmann::ordered_json contract_json(const Contract& c) {
    nlohmann::ordered_json j;
    j["address"] = c.address.str();
    j["kind"] = std::string{to_string(c.kind())};
    j["state"] = std::string{to_string(c.core.state)};
    j["escrow_wei"] = c.core.escrow.to_string();
    j["terms"] = terms_json(c);
    return j;
}

inline nlohmann::ordered_json outcome_json(const SessionOutcome& o) {
    nlohmann::ordered_json j;
    j["kind"] = std::string{to_string(o.kind)};
    j["settled"] = o.settled;
    j["charge_wei"] = o.charge.to_string();
    j["refund_wei"] = o.refund.to_string();
    j["payouts"] = payouts_json(o.payouts);
    return j;
}

inline nlohmann::ordered_json block_json(const std::optional<Block>& b) {
    if (!b) return nullptr;
    return {{"height", b->height}, {"timestamp", b->timestamp}};
}

inline nlohmann::ordered_json session_json(const Session& s) {
    using ojson = nlohmann::ordered_json;
    const auto& r = s.record;
    ojson j;
    j["session"] = s.id;
    j["kind"] = std::string{to_string(s.request.prefs.monetization_kind)};
    j["end_user"] = s.request.end_user.str();
    j["provider"] = s.provider.address.str();
    j["quote"] = {{"price_wei", s.quote.price.to_string()},
                  {"per_minute_price_wei", s.quote.per_minute_price.to_string()},
                  {"min_charge_wei", s.quote.min_charge.to_string()},
                  {"constraint_multiplier_bp", s.quote.constraint_multiplier_bp},
                  {"expires_at_block", s.quote.expires_at_block}};
    j["contract_address"] = r.contract_address.empty() ? ojson(nullptr) : ojson(r.contract_address.str());
    ojson companions = ojson::array();
    for (const auto& a : r.companion_contracts) companions.push_back(a.str());
    j["companion_contracts"] = companions;
    j["url_token"] = r.url_token.empty() ? ojson(nullptr) : ojson(r.url_token);
    j["deploy_block"] = block_json(r.deploy_block);
    j["stop_block"] = block_json(r.stop_block);
    j["availability_bp"] = r.availability_bp();
    j["qos_samples"] = r.trace.samples.size();
    j["step_log"] = r.step_log;
    if (!r.quota_uses.empty()) {
        ojson uses = ojson::array();
        for (const auto& u : r.quota_uses) {
            uses.push_back({{"token", u.token},
                            {"started_at", u.started_at},
                            {"stopped_at", u.stopped_at ? ojson(*u.stopped_at) : ojson(nullptr)},
                            {"minutes", u.minutes}});
        }
        j["quota_sessions"] = uses;
    }
    if (r.settlement) {
        j["settlement"] = {{"charge_wei", r.settlement->charge.to_string()},
                           {"refund_wei", r.settlement->refund.to_string()},
                           {"payouts", payouts_json(r.settlement->payouts)},
                           {"used_seconds", r.settlement->used_seconds},
                           {"requested_at", r.requested_stop_time ? ojson(*r.requested_stop_time) : ojson(nullptr)},
                           {"settled_at", r.settlement->settled_at}};
    } else {
        j["settlement"] = nullptr;
    }
    return j;
}

inline nlohmann::ordered_json report_json(const SettlementReport& r) {
    using ojson = nlohmann::ordered_json;
    ojson j;
    j["name"] = r.name;
    j["final_block"] = block_json(r.final_block);
    j["genesis_total_wei"] = r.genesis_total.to_string();
    ojson balances = ojson::object();
    for (const auto& [addr, v] : r.balances.accounts) balances[addr.str()] = v.to_string();
    j["final_balances"] = balances;
    j["fee_sink_wei"] = r.balances.fee_sink.to_string();
    ojson contracts = ojson::array();
    for (const auto& [_, c] : r.contracts) contracts.push_back(contract_json(c));
    j["contracts"] = contracts;
    ojson sessions = ojson::array();
    for (const auto& [_, s] : r.sessions) sessions.push_back(session_json(s));
    j["sessions"] = sessions;
    ojson settlements = ojson::object();
    for (const auto& [id, o] : r.outcomes) settlements[id] = outcome_json(o);
    j["settlements"] = settlements;
    ojson errors = ojson::array();
    for (const auto& e : r.events) {
        if (!e.error) continue;
        errors.push_back({{"index", e.index},
                          {"at", e.at},
                          {"block_height", e.block.height},
                          {"action", std::string{to_string(e.action)}},
                          {"session", e.session},
                          {"error", *e.error}});
    }
    j["event_errors"] = errors;
    j["conservation"] = r.conservation;
    j["replay_matches"] = r.replay_matches;
    j["transaction_count"] = r.transaction_count;
    j["transaction_log_digest"] = r.transaction_log_digest;
    return j;
}

inline std::string step_log_text(const std::vector<int>& steps) {
    std::string out = "[";
    for (std::size_t i = 0; i < steps.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(steps[i]);
    }
    return out + "]";
}

inline std::string summary_text(const SettlementReport& r) {
    std::ostringstream os;
    os << "scenario " << (r.name.empty() ? "(unnamed)" : r.name) << ": " << r.events.size() << " events, "
       << r.event_error_count() << " errors, final block " << r.final_block.height << " @ " << r.final_block.timestamp
       << " s\n";
    for (const auto& [id, s] : r.sessions) {
        os << "  session " << id << " (" << to_string(s.request.prefs.monetization_kind) << ") steps "
           << step_log_text(s.record.step_log);
        if (s.record.settlement) {
            os << " charge " << s.record.settlement->charge.to_string() << " wei, refund "
               << s.record.settlement->refund.to_string() << " wei";
        } else {
            os << " unsettled";
        }
        os << "\n";
    }
    for (const auto& e : r.events) {
        if (e.error) os << "  event " << e.index << " (" << to_string(e.action) << "): " << *e.error << "\n";
    }
    os << "  conservation " << (r.conservation ? "ok" : "VIOLATED") << ", replay "
       << (r.replay_matches ? "ok" : "MISMATCH") << ", " << r.transaction_count << " transactions, digest "
       << r.transaction_log_digest << "\n";
    return os.str();
}

}  // namespace vcescrow
