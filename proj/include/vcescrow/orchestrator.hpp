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
#include <utility>
#include <vector>

#include "amount.hpp"
#include "contract_types.hpp"
#include "contracts.hpp"
#include "error.hpp"
#include "ledger.hpp"
#include "pricing.hpp"
#include "types.hpp"

namespace vcescrow {

using SessionId = std::string;

struct ProviderProfile {
    Address address;
    std::string region{"EU"};
    bool gdpr_compliant{true};
};

struct OrchestratorConfig {
    std::vector<ProviderProfile> providers;
    RateCard rate_card;
    BasisPoints refund_threshold_bp{kDefaultRefundThresholdBp};
    VoteThreshold vote_threshold;
    std::uint64_t flexible_deploy_latency_seconds{0};
    //! Fault injection: deployments of these sessions fail.
    std::set<SessionId> failing_deployments;
};

struct SessionRequest {
    Address end_user;
    QosPreferences prefs;
    std::optional<ConstraintTerms> constraints;
    IncomeShares income_shares;  // income division only
    std::set<Address> voters;    // consensus decision only
};

struct QosSample {
    Timestamp timestamp{0};
    bool available{true};
};

struct QosTrace {
    std::vector<QosSample> samples;

    //! floor(10000 * up / total). An empty trace carries no evidence of an outage.
    [[nodiscard]] BasisPoints availability_bp() const noexcept {
        if (samples.empty()) return kFullBasisPoints;
        std::uint64_t up{0};
        for (const auto& s : samples) up += s.available ? 1 : 0;
        return static_cast<BasisPoints>(up * kFullBasisPoints / samples.size());
    }
};

struct QuotaUse {
    std::string token;
    Timestamp started_at{0};
    std::optional<Timestamp> stopped_at;
    std::uint64_t minutes{0};
};

struct SessionRecord {
    std::string url_token;
    Address contract_address;
    std::vector<Address> companion_contracts;
    std::optional<Block> deploy_block;
    std::optional<Block> stop_block;
    Timestamp ready_at{0};
    QosTrace trace;
    std::vector<int> step_log;
    std::optional<Settlement> settlement;
    std::optional<Timestamp> requested_stop_time;
    std::vector<QuotaUse> quota_uses;
    Amount quota_income;

    [[nodiscard]] BasisPoints availability_bp() const noexcept { return trace.availability_bp(); }
};

struct Session {
    SessionId id;
    SessionRequest request;
    ProviderProfile provider;
    Quote quote;
    SessionRecord record;
};

//! Drives one provider-side workflow per session: quote, payment, countersignature and
//! deployment, monitoring, then settlement by the end user or by the alarm clock.
//!
//! Step numbers follow the sixteen-message dynamic-price sequence. Steps 14 and 15 carry no
//! fund movement of their own and are logged together with 13.
class Orchestrator {
  public:
    Orchestrator(Ledger& ledger, OrchestratorConfig config) : ledger_{ledger}, config_{std::move(config)} {
        if (config_.providers.empty()) throw Error{ErrorCode::kInvalidArgument, "no provider configured"};
        ledger_.set_wakeup_handler([this](const Wakeup& w, const Block&) { handle_wakeup(w); });
    }
    ~Orchestrator() { ledger_.set_wakeup_handler(nullptr); }

    Orchestrator(const Orchestrator&) = delete;
    Orchestrator& operator=(const Orchestrator&) = delete;

    [[nodiscard]] const std::map<SessionId, Session>& sessions() const noexcept { return sessions_; }
    [[nodiscard]] const Session& session(const SessionId& id) const { return find(id); }
    [[nodiscard]] const Ledger& ledger() const noexcept { return ledger_; }
    [[nodiscard]] const OrchestratorConfig& config() const noexcept { return config_; }

    //! Steps 1-2: price estimate, contract deployment and quote notification.
    Quote request_session(const SessionId& id, const SessionRequest& req) {
        if (sessions_.contains(id)) throw Error{ErrorCode::kInvalidArgument, "duplicate session " + id};
        validate(req.prefs);
        ledger_.require_account(req.end_user);
        const ContractKind kind = req.prefs.monetization_kind;

        const ConstraintTerms constraints = req.constraints.value_or(ConstraintTerms{});
        const ProviderProfile* provider = nullptr;
        for (const auto& p : config_.providers) {
            if (evaluate_constraints(constraints, {p.region, p.gdpr_compliant}).admissible) {
                provider = &p;
                break;
            }
        }
        if (provider == nullptr) throw Error{ErrorCode::kInadmissibleOffer, "no admissible provider"};
        const Address& owner = provider->address;

        if (kind == ContractKind::kIncomeDivision) {
            validate_shares(req.income_shares);
            for (const auto& [party, _] : req.income_shares.entries) {
                if (!ledger_.is_account(party)) throw Error{ErrorCode::kInvalidShares, "unknown party " + party.str()};
            }
        }
        if (kind == ContractKind::kConsensusDecision) {
            if (req.voters.empty()) throw Error{ErrorCode::kInvalidArgument, "no voters"};
            for (const auto& v : req.voters) ledger_.require_account(v);
        }
        const std::uint64_t contracts_now = kind == ContractKind::kIncomeDivision ? 2 : 1;
        ledger_.require_funds(owner, (ledger_.deploy_fee() + ledger_.call_fee()) * contracts_now);

        const Quote quote = quote_price(req.prefs, config_.rate_card, constraints.price_multiplier_bp,
                                        ledger_.current_block().height);

        Session s;
        s.id = id;
        s.request = req;
        s.provider = *provider;
        s.quote = quote;

        if (kind == ContractKind::kConsensusDecision) {
            AgreementTerms vt;
            vt.owner = owner;
            vt.terms = VotingState{};
            const Address voting = deploy_contract(ledger_, vt);
            init_vote(ledger_, voting, owner, req.voters, config_.vote_threshold);
            s.record.companion_contracts.push_back(voting);
        } else {
            std::optional<Address> shares_contract;
            if (kind == ContractKind::kIncomeDivision) {
                AgreementTerms st;
                st.owner = owner;
                st.terms = IncomeShares{};
                shares_contract = deploy_contract(ledger_, st);
                set_income_shares(ledger_, *shares_contract, owner, req.income_shares);
                s.record.companion_contracts.push_back(*shares_contract);
            }
            s.record.contract_address = deploy_agreement(s, shares_contract, std::nullopt);
        }
        s.record.step_log = {1, 2};
        sessions_.emplace(id, std::move(s));
        return quote;
    }

    //! Step 3: the end user locks the quoted price in the agreement contract.
    Receipt user_approve_and_pay(const SessionId& id, const Address& payer, Amount value) {
        Session& s = find(id);
        const Contract& c = agreement(s);
        if (c.kind() == ContractKind::kTimeLimitedQuota) {
            throw Error{ErrorCode::kWrongState, "quota sessions purchase minutes"};
        }
        check_quote(s, c, payer);
        if (!lock_funds(ledger_, c.address, payer, value)) {
            throw Error{ErrorCode::kPriceMismatch,
                        "paid " + value.to_string() + " wei, agreed " + agreed_payment(c).to_string()};
        }
        ledger_.schedule_wakeup({c.address, c.core.release_time});
        s.record.step_log.push_back(3);
        return Receipt{ledger_.current_block().height, ledger_.tx_log().size() - 1, ledger_.call_fee()};
    }

    //! Step 3 for prepaid minutes.
    void purchase_minutes(const SessionId& id, const Address& payer, std::uint64_t minutes, Amount value) {
        Session& s = find(id);
        const Contract& c = agreement(s);
        check_quote(s, c, payer);
        if (!quota_purchase(ledger_, c.address, payer, minutes, value)) {
            throw Error{ErrorCode::kPriceMismatch, "paid " + value.to_string() + " wei for " +
                                                       std::to_string(minutes) + " minutes"};
        }
        s.record.step_log.push_back(3);
    }

    //! Steps 4-10: provider signature, deployment and URL issuance.
    std::string countersign_and_deploy(const SessionId& id, const Address& signer) {
        Session& s = find(id);
        const Contract& c = agreement(s);
        countersign(ledger_, c.address, signer);
        s.record.step_log.insert(s.record.step_log.end(), {4, 5, 6});
        if (config_.failing_deployments.contains(id)) {
            ledger_.cancel_wakeups(c.address);
            s.record.settlement = refund_in_full(ledger_, c.address);
            s.record.stop_block = ledger_.current_block();
            s.record.step_log.insert(s.record.step_log.end(), {13, 16});
            throw Error{ErrorCode::kDeploymentFailed, "session " + id + " refunded in full"};
        }
        const Block now = ledger_.current_block();
        s.record.deploy_block = now;
        s.record.ready_at = now.timestamp + (c.kind() == ContractKind::kFlexiblePeriod
                                                 ? config_.flexible_deploy_latency_seconds
                                                 : 0);
        s.record.url_token = "vc-" + std::to_string(++url_counter_);
        s.record.step_log.insert(s.record.step_log.end(), {7, 8, 9, 10});
        return s.record.url_token;
    }

    //! Steps 11-16: end user signs the stop, service is undeployed, escrow is settled.
    Settlement end_session(const SessionId& id, const Address& caller,
                           std::optional<Timestamp> requested_at = std::nullopt) {
        Session& s = find(id);
        const Contract& c = agreement(s);
        Settlement st = stop_and_settle(ledger_, c.address, caller, s.record.availability_bp());
        ledger_.cancel_wakeups(c.address);
        s.record.stop_block = ledger_.current_block();
        s.record.requested_stop_time = requested_at.value_or(ledger_.current_block().timestamp);
        s.record.settlement = st;
        s.record.step_log.insert(s.record.step_log.end(), {11, 12, 13, 14, 15, 16});
        return st;
    }

    //! Alarm-clock path: steps 12-16, no user signature. No-op once settled.
    std::optional<Settlement> on_wakeup(const SessionId& id) {
        Session& s = find(id);
        const Contract& c = agreement(s);
        if (c.core.state != ContractState::kActive && c.core.state != ContractState::kUserSigned) return std::nullopt;
        if (ledger_.current_block().timestamp < c.core.release_time) return std::nullopt;
        const bool was_deployed = c.core.state == ContractState::kActive;
        Settlement st = expire_and_settle(ledger_, c.address, s.record.availability_bp());
        ledger_.cancel_wakeups(c.address);
        s.record.stop_block = ledger_.current_block();
        s.record.requested_stop_time = c.core.release_time;
        s.record.settlement = st;
        if (was_deployed) {
            s.record.step_log.insert(s.record.step_log.end(), {12, 13, 14, 15, 16});
        } else {
            s.record.step_log.insert(s.record.step_log.end(), {13, 16});
        }
        return st;
    }

    void record_qos_sample(const SessionId& id, bool available) {
        Session& s = find(id);
        if (!s.record.deploy_block || s.record.settlement) {
            throw Error{ErrorCode::kSessionNotActive, "session " + id + " is not deployed"};
        }
        s.record.trace.samples.push_back({ledger_.current_block().timestamp, available});
    }

    std::string start_quota_session(const SessionId& id, const Address& caller) {
        Session& s = find(id);
        std::string token = quota_start(ledger_, agreement(s).address, caller);
        s.record.quota_uses.push_back({token, ledger_.current_block().timestamp, std::nullopt, 0});
        return token;
    }

    std::uint64_t stop_quota_session(const SessionId& id, const Address& caller) {
        Session& s = find(id);
        const Contract& c = agreement(s);
        const std::uint64_t minutes = quota_stop(ledger_, c.address, caller);
        auto& use = s.record.quota_uses.back();
        use.stopped_at = ledger_.current_block().timestamp;
        use.minutes = minutes;
        s.record.quota_income += c.as<QuotaTerms>().per_minute_price * minutes;
        if (c.core.state == ContractState::kSettled) finish_quota(s, Amount{});
        return minutes;
    }

    Settlement close_quota(const SessionId& id, const Address& caller) {
        Session& s = find(id);
        Settlement st = quota_close(ledger_, agreement(s).address, caller);
        finish_quota(s, st.refund);
        return *s.record.settlement;
    }

    void vote(const SessionId& id, const Address& voter, VoteChoice choice) {
        Session& s = find(id);
        cast_vote(ledger_, voting_contract(s), voter, choice);
    }

    //! Tallies the decision; the first enacting tally deploys and prices the agreement contract.
    bool tally(const SessionId& id, const Address& caller) {
        Session& s = find(id);
        const Address voting = voting_contract(s);
        const Contract& vc = ledger_.contract(voting);
        const bool deploys = s.record.contract_address.empty() &&
                             vc.core.state == ContractState::kQuoted &&
                             (vc.as<VotingState>().enacted || vcescrow::tally(vc.as<VotingState>()));
        if (deploys) {
            const Address& owner = s.provider.address;
            Amount owner_needs = ledger_.deploy_fee() + ledger_.call_fee();
            if (caller == owner) owner_needs += ledger_.call_fee();
            ledger_.require_funds(owner, owner_needs);
        }
        const bool enacted = tally_and_enact(ledger_, voting, caller);
        if (deploys) {
            s.quote.expires_at_block = ledger_.current_block().height + config_.rate_card.quote_validity_blocks;
            s.record.contract_address = deploy_agreement(s, std::nullopt, voting);
        }
        return enacted;
    }

    [[nodiscard]] const std::string* session_for_contract(const Address& addr) const {
        auto it = by_contract_.find(addr);
        return it == by_contract_.end() ? nullptr : &it->second;
    }

  private:
    Session& find(const SessionId& id) {
        auto it = sessions_.find(id);
        if (it == sessions_.end()) throw Error{ErrorCode::kUnknownSession, id};
        return it->second;
    }
    const Session& find(const SessionId& id) const {
        auto it = sessions_.find(id);
        if (it == sessions_.end()) throw Error{ErrorCode::kUnknownSession, id};
        return it->second;
    }

    const Contract& agreement(const Session& s) const {
        if (s.record.contract_address.empty()) {
            throw Error{ErrorCode::kWrongState, "session " + s.id + " has no agreement contract yet"};
        }
        return ledger_.contract(s.record.contract_address);
    }

    Address voting_contract(const Session& s) const {
        if (s.request.prefs.monetization_kind != ContractKind::kConsensusDecision) {
            throw Error{ErrorCode::kWrongState, "session " + s.id + " has no vote"};
        }
        return s.record.companion_contracts.front();
    }

    void check_quote(const Session& s, const Contract& c, const Address& payer) const {
        if (payer != s.request.end_user) throw Error{ErrorCode::kNotEndUser, payer.str()};
        if (c.core.state == ContractState::kQuoted && ledger_.current_block().height > s.quote.expires_at_block) {
            throw Error{ErrorCode::kQuoteExpired, "quote for " + s.id + " expired at block " +
                                                      std::to_string(s.quote.expires_at_block)};
        }
    }

    Address deploy_agreement(const Session& s, std::optional<Address> shares, std::optional<Address> voting) {
        const ContractKind kind = s.request.prefs.monetization_kind;
        AgreementTerms t;
        t.owner = s.provider.address;
        t.price = s.quote.price;
        t.lock_time_seconds = s.request.prefs.max_period_seconds;
        t.refund_threshold_bp = config_.refund_threshold_bp;
        t.income_shares_contract = std::move(shares);
        t.voting_contract = std::move(voting);
        Amount published = s.quote.price;
        switch (kind) {
            case ContractKind::kFixedPrice: t.terms = FixedPriceTerms{}; break;
            case ContractKind::kTimeLimitedQuota:
                t.terms = QuotaTerms{};
                published = s.quote.per_minute_price;
                break;
            case ContractKind::kFlexiblePeriod: t.terms = standby_terms(config_.rate_card); break;
            case ContractKind::kConstraintBased: t.terms = s.request.constraints.value_or(ConstraintTerms{}); break;
            default: t.terms = DynamicPriceTerms{}; break;
        }
        const Address addr = deploy_contract(ledger_, t);
        set_price(ledger_, addr, t.owner, published);
        by_contract_.emplace(addr, s.id);
        return addr;
    }

    void finish_quota(Session& s, Amount refund) {
        Settlement st;
        st.charge = s.record.quota_income;
        st.refund = refund;
        st.payouts.push_back({s.provider.address, st.charge});
        st.settled_at = ledger_.current_block().timestamp;
        s.record.settlement = st;
        s.record.stop_block = ledger_.current_block();
        s.record.requested_stop_time = ledger_.current_block().timestamp;
        s.record.step_log.insert(s.record.step_log.end(), {13, 16});
    }

    void handle_wakeup(const Wakeup& w) {
        if (const std::string* id = session_for_contract(w.contract)) on_wakeup(*id);
    }

    Ledger& ledger_;
    OrchestratorConfig config_;
    std::map<SessionId, Session> sessions_;
    std::map<Address, SessionId> by_contract_;
    std::uint64_t url_counter_{0};
};

}  // namespace vcescrow
