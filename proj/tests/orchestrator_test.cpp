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

#include <functional>

#include <gtest/gtest.h>

#include <vcescrow/orchestrator.hpp>

namespace vcescrow {
namespace {

    ErrorCode code_of(const std::function<void()>& f) {
        try {
            f();
        } catch (const Error& e) {
            return e.code();
        }
        ADD_FAILURE() << "no error thrown";
        return ErrorCode::kInvalidArgument;
    }

    std::vector<int> steps(std::initializer_list<std::pair<int, int>> ranges) {
        std::vector<int> out;
        for (const auto& [lo, hi] : ranges) {
            for (int s = lo; s <= hi; ++s) out.push_back(s);
        }
        return out;
    }

    class OrchestratorTest : public ::testing::Test {
      protected:
        void SetUp() override { build({}); }

        void build(std::function<void(OrchestratorConfig&)> tweak) {
            orch_.reset();
            ledger_ = std::make_unique<Ledger>();
            ledger_->genesis(provider, Amount::eth(1));
            ledger_->genesis(user, Amount::eth(5));
            ledger_->genesis(partner, Amount::eth(1));
            OrchestratorConfig c;
            c.providers.push_back({provider, "EU", true});
            if (tweak) tweak(c);
            orch_ = std::make_unique<Orchestrator>(*ledger_, c);
        }

        SessionRequest request(ContractKind kind = ContractKind::kDynamicPrice) {
            SessionRequest r;
            r.end_user = user;
            r.prefs.monetization_kind = kind;
            r.prefs.video_quality = VideoQuality::kHD;
            r.prefs.availability_target_bp = 9'980;
            r.prefs.max_period_seconds = 3'600;
            return r;
        }

        const Contract& agreement(const SessionId& id) { return ledger_->contract(orch_->session(id).record.contract_address); }

        //! Requested, paid and deployed in the current block.
        void running(const SessionId& id, ContractKind kind = ContractKind::kDynamicPrice) {
            orch_->request_session(id, request(kind));
            orch_->user_approve_and_pay(id, user, agreed_payment(agreement(id)));
            orch_->countersign_and_deploy(id, provider);
        }

        Address provider{"vc-owner"};
        Address user{"end-user"};
        Address partner{"partner"};
        std::unique_ptr<Ledger> ledger_;
        std::unique_ptr<Orchestrator> orch_;
    };

}  // namespace

TEST_F(OrchestratorTest, RequestQuotesAndDeploys) {
    const Quote q = orch_->request_session("vc-1", request());
    EXPECT_EQ(q.price, Amount::wei(648'000'000'000'000'000ULL));
    const Contract& c = agreement("vc-1");
    EXPECT_EQ(c.kind(), ContractKind::kDynamicPrice);
    EXPECT_EQ(c.core.state, ContractState::kQuoted);
    EXPECT_EQ(c.core.price, q.price);
    EXPECT_EQ(orch_->session("vc-1").record.step_log, steps({{1, 2}}));
}

TEST_F(OrchestratorTest, GdprRequestWithoutCompliantProviderIsInadmissible) {
    build([](OrchestratorConfig& c) { c.providers.front().gdpr_compliant = false; });
    SessionRequest r = request();
    r.constraints = ConstraintTerms{true, {}, kFullBasisPoints};
    EXPECT_EQ(code_of([&] { orch_->request_session("s", r); }), ErrorCode::kInadmissibleOffer);
    EXPECT_TRUE(orch_->sessions().empty());
    EXPECT_TRUE(ledger_->contracts().empty());
}

TEST_F(OrchestratorTest, FirstAdmissibleProviderIsChosen) {
    ledger_ = std::make_unique<Ledger>();
    ledger_->genesis(provider, Amount::eth(1));
    ledger_->genesis(partner, Amount::eth(1));
    ledger_->genesis(user, Amount::eth(5));
    OrchestratorConfig c;
    c.providers = {{partner, "US", true}, {provider, "EU", true}};
    orch_ = std::make_unique<Orchestrator>(*ledger_, c);
    SessionRequest r = request(ContractKind::kConstraintBased);
    r.constraints = ConstraintTerms{false, {"EU"}, 12'000};
    const Quote q = orch_->request_session("s", r);
    EXPECT_EQ(orch_->session("s").provider.address, provider);
    EXPECT_EQ(q.price, Amount::wei(777'600'000'000'000'000ULL));
    EXPECT_EQ(agreement("s").kind(), ContractKind::kConstraintBased);
}

TEST_F(OrchestratorTest, QuotaQuoteCarriesPerMinutePrice) {
    const Quote q = orch_->request_session("q", request(ContractKind::kTimeLimitedQuota));
    EXPECT_FALSE(q.per_minute_price.is_zero());
    EXPECT_EQ(agreement("q").as<QuotaTerms>().per_minute_price, q.per_minute_price);
}

TEST_F(OrchestratorTest, InvalidRequestsChangeNothing) {
    SessionRequest r = request();
    r.prefs.availability_target_bp = 0;
    EXPECT_EQ(code_of([&] { orch_->request_session("s", r); }), ErrorCode::kInvalidPreferences);
    r = request();
    r.end_user = Address{"stranger"};
    EXPECT_EQ(code_of([&] { orch_->request_session("s", r); }), ErrorCode::kUnknownAddress);
    orch_->request_session("s", request());
    EXPECT_EQ(code_of([&] { orch_->request_session("s", request()); }), ErrorCode::kInvalidArgument);
    EXPECT_EQ(ledger_->contracts().size(), 1u);
}

TEST_F(OrchestratorTest, ExactPaymentLocksFundsAndSchedulesWakeup) {
    orch_->request_session("vc-1", request());
    ledger_->advance_to(30);
    orch_->user_approve_and_pay("vc-1", user, Amount::wei(648'000'000'000'000'000ULL));
    const Contract& c = agreement("vc-1");
    EXPECT_EQ(c.core.state, ContractState::kUserSigned);
    EXPECT_EQ(c.core.escrow, Amount::wei(648'000'000'000'000'000ULL));
    const auto wakeups = ledger_->pending_wakeups();
    ASSERT_EQ(wakeups.size(), 1u);
    EXPECT_EQ(wakeups.front().fire_at, 30u + 3'600u);
    EXPECT_EQ(orch_->session("vc-1").record.step_log, steps({{1, 3}}));
}

TEST_F(OrchestratorTest, WrongPaymentIsRejectedWithoutStateChange) {
    orch_->request_session("vc-1", request());
    const auto before = ledger_->snapshot();
    EXPECT_EQ(code_of([&] { orch_->user_approve_and_pay("vc-1", user, Amount::eth(1)); }), ErrorCode::kPriceMismatch);
    EXPECT_EQ(ledger_->snapshot(), before);
    EXPECT_EQ(agreement("vc-1").core.state, ContractState::kQuoted);
    EXPECT_TRUE(ledger_->pending_wakeups().empty());
    EXPECT_EQ(code_of([&] { orch_->user_approve_and_pay("vc-1", partner, agreement("vc-1").core.price); }),
              ErrorCode::kNotEndUser);
}

TEST_F(OrchestratorTest, ExpiredQuoteIsRejected) {
    orch_->request_session("vc-1", request());
    const std::uint64_t expiry = orch_->session("vc-1").quote.expires_at_block;
    while (ledger_->current_block().height <= expiry) ledger_->produce_block();
    EXPECT_EQ(code_of([&] { orch_->user_approve_and_pay("vc-1", user, agreement("vc-1").core.price); }),
              ErrorCode::kQuoteExpired);
}

TEST_F(OrchestratorTest, QuoteValidAtItsLastBlock) {
    orch_->request_session("vc-1", request());
    const std::uint64_t expiry = orch_->session("vc-1").quote.expires_at_block;
    while (ledger_->current_block().height < expiry) ledger_->produce_block();
    EXPECT_NO_THROW(orch_->user_approve_and_pay("vc-1", user, agreement("vc-1").core.price));
}

TEST_F(OrchestratorTest, CountersignLogsDeploymentSteps) {
    running("vc-1");
    const auto& rec = orch_->session("vc-1").record;
    EXPECT_EQ(rec.step_log, steps({{1, 10}}));
    EXPECT_EQ(rec.deploy_block->timestamp, 0u);
    EXPECT_EQ(agreement("vc-1").core.state, ContractState::kActive);
    EXPECT_FALSE(rec.url_token.empty());
}

TEST_F(OrchestratorTest, UrlTokensAreUnique) {
    running("a");
    running("b");
    EXPECT_NE(orch_->session("a").record.url_token, orch_->session("b").record.url_token);
}

TEST_F(OrchestratorTest, FailedDeploymentRefundsInFull) {
    build([](OrchestratorConfig& c) { c.failing_deployments.insert("vc-1"); });
    orch_->request_session("vc-1", request());
    const Amount price = agreement("vc-1").core.price;
    orch_->user_approve_and_pay("vc-1", user, price);
    const Amount user_after_pay = ledger_->balance_of(user);
    EXPECT_EQ(code_of([&] { orch_->countersign_and_deploy("vc-1", provider); }), ErrorCode::kDeploymentFailed);
    const Contract& c = agreement("vc-1");
    EXPECT_EQ(c.core.state, ContractState::kSettled);
    EXPECT_TRUE(c.core.escrow.is_zero());
    EXPECT_EQ(ledger_->balance_of(user), user_after_pay + price);
    EXPECT_EQ(orch_->session("vc-1").record.settlement->refund, price);
    EXPECT_TRUE(ledger_->pending_wakeups().empty());
    EXPECT_TRUE(ledger_->conservation_check());
}

TEST_F(OrchestratorTest, StopAtHalfPeriodRefundsHalf) {
    running("vc-1");
    ledger_->advance_to(1'800);
    const Settlement s = orch_->end_session("vc-1", user);
    EXPECT_EQ(s.charge, Amount::wei(324'000'000'000'000'000ULL));
    EXPECT_EQ(s.refund, Amount::wei(324'000'000'000'000'000ULL));
    EXPECT_EQ(orch_->session("vc-1").record.step_log, steps({{1, 16}}));
    EXPECT_TRUE(ledger_->pending_wakeups().empty());
    EXPECT_TRUE(agreement("vc-1").core.escrow.is_zero());
    EXPECT_TRUE(ledger_->conservation_check());
}

TEST_F(OrchestratorTest, StopWithPoorAvailabilityRefundsAll) {
    running("vc-1");
    for (int i = 0; i < 10; ++i) {
        ledger_->produce_block();
        orch_->record_qos_sample("vc-1", i < 7);
    }
    EXPECT_EQ(orch_->session("vc-1").record.availability_bp(), 7'000u);
    const Settlement s = orch_->end_session("vc-1", user);
    EXPECT_TRUE(s.charge.is_zero());
}

TEST_F(OrchestratorTest, ThreeOfFourSamplesIsNotAnAnomaly) {
    running("vc-1");
    for (bool up : {true, true, false, true}) orch_->record_qos_sample("vc-1", up);
    EXPECT_EQ(orch_->session("vc-1").record.availability_bp(), 7'500u);
    ledger_->advance_to(1'800);
    EXPECT_FALSE(orch_->end_session("vc-1", user).charge.is_zero());
}

TEST_F(OrchestratorTest, FullTraceIsFullAvailability) {
    running("vc-1");
    for (int i = 0; i < 5; ++i) orch_->record_qos_sample("vc-1", true);
    EXPECT_EQ(orch_->session("vc-1").record.availability_bp(), 10'000u);
}

TEST_F(OrchestratorTest, SamplesOnlyWhileDeployed) {
    orch_->request_session("vc-1", request());
    EXPECT_EQ(code_of([&] { orch_->record_qos_sample("vc-1", true); }), ErrorCode::kSessionNotActive);
    orch_->user_approve_and_pay("vc-1", user, agreement("vc-1").core.price);
    orch_->countersign_and_deploy("vc-1", provider);
    orch_->record_qos_sample("vc-1", true);
    ledger_->produce_block();
    orch_->end_session("vc-1", user);
    EXPECT_EQ(code_of([&] { orch_->record_qos_sample("vc-1", true); }), ErrorCode::kSessionNotActive);
    EXPECT_EQ(code_of([&] { orch_->record_qos_sample("nope", true); }), ErrorCode::kUnknownSession);
}

TEST_F(OrchestratorTest, WakeupSettlesAtFirstBlockAfterRelease) {
    orch_->request_session("vc-1", request());
    ledger_->advance_to(20);  // block at 30
    orch_->user_approve_and_pay("vc-1", user, agreement("vc-1").core.price);
    orch_->countersign_and_deploy("vc-1", provider);
    ledger_->advance_to(10'000);
    const auto& rec = orch_->session("vc-1").record;
    ASSERT_TRUE(rec.settlement);
    EXPECT_EQ(rec.stop_block->timestamp, 3'630u);
    EXPECT_EQ(*rec.requested_stop_time, 3'630u);
    EXPECT_EQ(rec.settlement->charge, agreement("vc-1").core.price);
    EXPECT_EQ(rec.step_log, steps({{1, 10}, {12, 16}}));
    EXPECT_EQ(agreement("vc-1").core.ended_via, ContractState::kExpired);
}

TEST_F(OrchestratorTest, WakeupDelayStaysBelowOneBlock) {
    for (std::uint64_t period : {3'601u, 3'607u, 3'614u, 3'615u}) {
        build({});
        SessionRequest r = request();
        r.prefs.max_period_seconds = period;
        orch_->request_session("s", r);
        orch_->user_approve_and_pay("s", user, agreement("s").core.price);
        orch_->countersign_and_deploy("s", provider);
        ledger_->advance_to(10'000);
        const auto& rec = orch_->session("s").record;
        const Timestamp delay = rec.stop_block->timestamp - agreement("s").core.release_time;
        EXPECT_LT(delay, 15u) << period;
        EXPECT_EQ(rec.stop_block->timestamp % 15, 0u);
    }
}

TEST_F(OrchestratorTest, StopAfterExpiryIsWrongState) {
    running("vc-1");
    ledger_->advance_to(10'000);
    EXPECT_EQ(code_of([&] { orch_->end_session("vc-1", user); }), ErrorCode::kWrongState);
}

TEST_F(OrchestratorTest, WakeupAfterStopIsNoOp) {
    running("vc-1");
    ledger_->advance_to(600);
    orch_->end_session("vc-1", user);
    ledger_->advance_to(10'000);
    const auto before = ledger_->snapshot();
    EXPECT_FALSE(orch_->on_wakeup("vc-1").has_value());
    EXPECT_EQ(ledger_->snapshot(), before);
    EXPECT_EQ(orch_->session("vc-1").record.step_log, steps({{1, 16}}));
}

TEST_F(OrchestratorTest, EarlyWakeupIsNoOp) {
    running("vc-1");
    EXPECT_FALSE(orch_->on_wakeup("vc-1").has_value());
    EXPECT_EQ(agreement("vc-1").core.state, ContractState::kActive);
}

TEST_F(OrchestratorTest, UndeployedPaidSessionIsRefundedAtExpiry) {
    orch_->request_session("vc-1", request());
    orch_->user_approve_and_pay("vc-1", user, agreement("vc-1").core.price);
    const Amount before = ledger_->balance_of(user);
    ledger_->advance_to(10'000);
    const auto& rec = orch_->session("vc-1").record;
    ASSERT_TRUE(rec.settlement);
    EXPECT_TRUE(rec.settlement->charge.is_zero());
    EXPECT_EQ(ledger_->balance_of(user), before + agreement("vc-1").core.price);
    EXPECT_EQ(rec.step_log, (std::vector<int>{1, 2, 3, 13, 16}));
}

TEST_F(OrchestratorTest, OnlyTheEndUserEndsTheSession) {
    running("vc-1");
    EXPECT_EQ(code_of([&] { orch_->end_session("vc-1", provider); }), ErrorCode::kNotEndUser);
}

TEST_F(OrchestratorTest, FlexibleDeploymentLatency) {
    build([](OrchestratorConfig& c) { c.flexible_deploy_latency_seconds = 40; });
    running("f", ContractKind::kFlexiblePeriod);
    const auto& rec = orch_->session("f").record;
    EXPECT_EQ(rec.ready_at, rec.deploy_block->timestamp + 40);
    running("d");
    EXPECT_EQ(orch_->session("d").record.ready_at, orch_->session("d").record.deploy_block->timestamp);
}

TEST_F(OrchestratorTest, IncomeDivisionUsesTwoContracts) {
    SessionRequest r = request(ContractKind::kIncomeDivision);
    r.income_shares.entries = {{provider, 3}, {partner, 1}};
    r.income_shares.denominator = 4;
    orch_->request_session("div", r);
    EXPECT_EQ(ledger_->contracts().size(), 2u);
    const auto& rec = orch_->session("div").record;
    ASSERT_EQ(rec.companion_contracts.size(), 1u);
    EXPECT_EQ(ledger_->contract(rec.companion_contracts.front()).kind(), ContractKind::kIncomeDivision);
    orch_->user_approve_and_pay("div", user, agreement("div").core.price);
    orch_->countersign_and_deploy("div", provider);
    ledger_->advance_to(1'800);
    const Amount partner_before = ledger_->balance_of(partner);
    const Settlement s = orch_->end_session("div", user);
    ASSERT_EQ(s.payouts.size(), 2u);
    EXPECT_EQ(s.payouts[0].value + s.payouts[1].value, s.charge);
    EXPECT_EQ(ledger_->balance_of(partner), partner_before + s.payouts[1].value);
    EXPECT_EQ(s.payouts[1].value, s.charge.scaled(1, 4));
}

TEST_F(OrchestratorTest, IncomeDivisionRejectsBadShares) {
    SessionRequest r = request(ContractKind::kIncomeDivision);
    r.income_shares.entries = {{provider, 3}, {partner, 1}};
    r.income_shares.denominator = 5;
    EXPECT_EQ(code_of([&] { orch_->request_session("div", r); }), ErrorCode::kInvalidShares);
    EXPECT_TRUE(ledger_->contracts().empty());
}

TEST_F(OrchestratorTest, ConsensusGatesTheAgreement) {
    SessionRequest r = request(ContractKind::kConsensusDecision);
    r.voters = {user, partner, provider};
    orch_->request_session("c", r);
    EXPECT_EQ(ledger_->contracts().size(), 1u);
    EXPECT_EQ(code_of([&] { orch_->user_approve_and_pay("c", user, Amount::eth(1)); }), ErrorCode::kWrongState);
    EXPECT_EQ(code_of([&] { orch_->vote("c", Address{"stranger"}, VoteChoice::kYes); }), ErrorCode::kNotAVoter);
    orch_->vote("c", user, VoteChoice::kYes);
    EXPECT_FALSE(orch_->tally("c", provider));
    EXPECT_EQ(ledger_->contracts().size(), 1u);
    orch_->vote("c", partner, VoteChoice::kYes);
    EXPECT_TRUE(orch_->tally("c", provider));
    EXPECT_EQ(ledger_->contracts().size(), 2u);
    EXPECT_TRUE(orch_->tally("c", provider));
    EXPECT_EQ(ledger_->contracts().size(), 2u);
    const Contract& a = agreement("c");
    EXPECT_EQ(a.kind(), ContractKind::kDynamicPrice);
    EXPECT_TRUE(a.core.voting_contract.has_value());
    orch_->user_approve_and_pay("c", user, a.core.price);
    orch_->countersign_and_deploy("c", provider);
    EXPECT_EQ(a.core.state, ContractState::kActive);
}

TEST_F(OrchestratorTest, QuotaSessionsThroughTheOrchestrator) {
    const Quote q = orch_->request_session("q", request(ContractKind::kTimeLimitedQuota));
    EXPECT_EQ(code_of([&] { orch_->user_approve_and_pay("q", user, q.price); }), ErrorCode::kWrongState);
    orch_->purchase_minutes("q", user, 10, q.per_minute_price * 10);
    for (int i = 0; i < 4; ++i) {
        orch_->start_quota_session("q", user);
        ledger_->advance_to(ledger_->current_block().timestamp + 90);
        EXPECT_EQ(orch_->stop_quota_session("q", user), 2u);
    }
    const Settlement s = orch_->close_quota("q", user);
    EXPECT_EQ(s.charge, q.per_minute_price * 8);
    EXPECT_EQ(s.refund, q.per_minute_price * 2);
    const auto& rec = orch_->session("q").record;
    EXPECT_EQ(rec.quota_uses.size(), 4u);
    EXPECT_EQ(rec.step_log, (std::vector<int>{1, 2, 3, 13, 16}));
    EXPECT_EQ(ledger_->contracts().size(), 1u);
    EXPECT_TRUE(ledger_->conservation_check());
}

TEST_F(OrchestratorTest, QuotaPurchaseMismatch) {
    const Quote q = orch_->request_session("q", request(ContractKind::kTimeLimitedQuota));
    EXPECT_EQ(code_of([&] { orch_->purchase_minutes("q", user, 10, q.per_minute_price * 9); }), ErrorCode::kPriceMismatch);
    EXPECT_EQ(agreement("q").core.state, ContractState::kQuoted);
}

TEST_F(OrchestratorTest, OwnerMustAffordDeployment) {
    ledger_ = std::make_unique<Ledger>();
    ledger_->genesis(provider, Amount::gwei(1));
    ledger_->genesis(user, Amount::eth(5));
    OrchestratorConfig c;
    c.providers.push_back({provider});
    orch_ = std::make_unique<Orchestrator>(*ledger_, c);
    EXPECT_EQ(code_of([&] { orch_->request_session("s", request()); }), ErrorCode::kInsufficientFunds);
    EXPECT_TRUE(ledger_->contracts().empty());
    EXPECT_TRUE(orch_->sessions().empty());
}

}  // namespace vcescrow
