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

#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include <vcescrow/demo.hpp>
#include <vcescrow/runner.hpp>
#include <vcescrow/scenario.hpp>

#include "support/random_scenario.hpp"

namespace vcescrow {
namespace {

    std::string sample(const std::string& name) {
        std::ifstream in{std::string{VCESCROW_SCENARIO_DIR} + "/" + name};
        std::stringstream ss;
        ss << in.rdbuf();
        return ss.str();
    }

    const char* const kMinimal = R"({
  "config": {"providers": [{"address": "p"}]},
  "genesis": {"u": "1000000000000000000", "p": 5},
  "events": [
    {"at": 0, "actor": "u", "action": "request_session", "session": "s", "kind": "fixed_price"},
    {"at": 15, "actor": "u", "action": "transfer", "to": "p", "value_wei": "7"}
  ]
})";

    Error parse_error(const std::string& doc) {
        try {
            parse_scenario(doc);
        } catch (const Error& e) {
            return e;
        }
        ADD_FAILURE() << "parsed";
        return Error{ErrorCode::kInvalidArgument, ""};
    }

}  // namespace

TEST(ScenarioParse, MinimalDocument) {
    const ScenarioScript s = parse_scenario(kMinimal);
    EXPECT_TRUE(s.name.empty());
    EXPECT_EQ(s.config.ledger.blocks.interval_seconds, 15u);
    EXPECT_FALSE(s.config.ledger.blocks.jitter_seed.has_value());
    ASSERT_EQ(s.genesis.size(), 2u);
    EXPECT_EQ(s.genesis[0].first, Address{"u"});
    EXPECT_EQ(s.genesis[1].second, Amount::wei(5));
    ASSERT_EQ(s.events.size(), 2u);
    EXPECT_EQ(s.events[0].request.end_user, Address{"u"});
    EXPECT_EQ(s.events[0].request.prefs.monetization_kind, ContractKind::kFixedPrice);
    EXPECT_EQ(s.events[1].action, Action::kTransfer);
    EXPECT_EQ(*s.events[1].value, Amount::wei(7));
    EXPECT_EQ(s.config.orchestrator.providers[0].region, "EU");
}

TEST(ScenarioParse, MalformedJsonReportsLine) {
    const Error e = parse_error(sample("invalid/malformed.json"));
    EXPECT_EQ(e.code(), ErrorCode::kParseError);
    EXPECT_NE(std::string{e.what()}.find("line 7"), std::string::npos) << e.what();
}

TEST(ScenarioParse, FieldErrorsNameThePath) {
    std::string doc = kMinimal;
    doc.replace(doc.find("\"at\": 15"), 8, "\"at\": -3");
    Error e = parse_error(doc);
    EXPECT_EQ(e.code(), ErrorCode::kParseError);
    EXPECT_NE(std::string{e.what()}.find("events[1].at"), std::string::npos) << e.what();

    doc = kMinimal;
    doc.replace(doc.find("fixed_price"), 11, "barter");
    e = parse_error(doc);
    EXPECT_NE(std::string{e.what()}.find("events[0].kind"), std::string::npos) << e.what();

    doc = kMinimal;
    doc.replace(doc.find("\"7\""), 3, "\"7.5\"");
    e = parse_error(doc);
    EXPECT_NE(std::string{e.what()}.find("events[1].value_wei"), std::string::npos) << e.what();

    EXPECT_EQ(parse_error(R"({"genesis": {}, "events": []})").code(), ErrorCode::kParseError);
    EXPECT_EQ(parse_error("[1, 2]").code(), ErrorCode::kParseError);
}

TEST(ScenarioParse, UndeclaredActorIsRejected) {
    const Error e = parse_error(sample("invalid/undeclared_actor.json"));
    EXPECT_EQ(e.code(), ErrorCode::kValidationError);
    EXPECT_NE(std::string{e.what()}.find("mallory"), std::string::npos);
}

TEST(ScenarioParse, DecreasingTimesAreRejected) {
    std::string doc = kMinimal;
    doc.replace(doc.find("\"at\": 15"), 8, "\"at\": 0");
    EXPECT_NO_THROW(parse_scenario(doc));
    doc = kMinimal;
    doc.replace(doc.find("\"at\": 0"), 7, "\"at\": 30");
    EXPECT_EQ(parse_error(doc).code(), ErrorCode::kValidationError);
}

TEST(ScenarioParse, UndeclaredProviderAndTransferTarget) {
    std::string doc = kMinimal;
    doc.replace(doc.find("\"address\": \"p\""), 14, "\"address\": \"q\"");
    EXPECT_EQ(parse_error(doc).code(), ErrorCode::kValidationError);
    doc = kMinimal;
    doc.replace(doc.find("\"to\": \"p\""), 9, "\"to\": \"z\"");
    EXPECT_EQ(parse_error(doc).code(), ErrorCode::kValidationError);
}

TEST(ScenarioParse, SampleScenariosParse) {
    for (const char* name : {"dynamic_price.json", "dynamic_price_timeout.json", "quota.json", "income_division.json",
                             "consensus.json", "constraint_gdpr.json", "failed_deployment.json",
                             "jittered_flexible.json", "invalid/corrupt_balance.json"}) {
        EXPECT_NO_THROW(parse_scenario(sample(name))) << name;
    }
}

TEST(ScenarioJson, RoundTripsSamples) {
    for (const char* name : {"dynamic_price.json", "quota.json", "income_division.json", "consensus.json",
                             "constraint_gdpr.json", "failed_deployment.json", "jittered_flexible.json",
                             "invalid/corrupt_balance.json"}) {
        const ScenarioScript a = parse_scenario(sample(name));
        const auto j = scenario_json(a);
        const ScenarioScript b = parse_scenario(j.dump());
        EXPECT_EQ(scenario_json(b), j) << name;
        EXPECT_EQ(report_json(run_scenario(a)), report_json(run_scenario(b))) << name;
    }
}

TEST(ScenarioJson, RoundTripsRandomScripts) {
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        const ScenarioScript a = test::random_scenario(seed);
        const ScenarioScript b = parse_scenario(scenario_json(a).dump());
        ASSERT_EQ(scenario_json(b), scenario_json(a)) << seed;
        ASSERT_EQ(run_scenario(b).transaction_log_digest, run_scenario(a).transaction_log_digest) << seed;
    }
}

TEST(ScenarioRun, CanonicalHalfHourStop) {
    const SettlementReport r = run_scenario(parse_scenario(sample("dynamic_price.json")));
    const SessionOutcome& o = r.outcomes.at("vc-1");
    const Amount price = r.sessions.at("vc-1").quote.price;
    EXPECT_TRUE(o.settled);
    EXPECT_EQ(o.charge, price.scaled(1, 2));
    EXPECT_EQ(o.refund, price.scaled(1, 2));
    EXPECT_EQ(r.sessions.at("vc-1").record.availability_bp(), 7'500u);
    EXPECT_TRUE(r.conservation);
    EXPECT_TRUE(r.replay_matches);
    EXPECT_EQ(r.event_error_count(), 0u);
}

TEST(ScenarioRun, MatchesBuiltInCanonicalScript) {
    const SettlementReport file = run_scenario(parse_scenario(sample("dynamic_price.json")));
    const SettlementReport built = run_scenario(canonical_scenario(false));
    EXPECT_EQ(file.outcomes, built.outcomes);
    EXPECT_EQ(file.sessions.at("vc-1").record.step_log, built.sessions.at("vc-1").record.step_log);
}

TEST(ScenarioRun, QuotaFourSessions) {
    const SettlementReport r = run_scenario(parse_scenario(sample("quota.json")));
    const Session& s = r.sessions.at("q-1");
    ASSERT_EQ(s.record.quota_uses.size(), 4u);
    std::uint64_t minutes{0};
    for (const auto& u : s.record.quota_uses) minutes += u.minutes;
    EXPECT_EQ(minutes, 4u + 10u + 1u + 2u);
    EXPECT_EQ(r.outcomes.at("q-1").charge, s.quote.per_minute_price * 17);
    EXPECT_EQ(r.outcomes.at("q-1").refund, s.quote.per_minute_price * 13);
    EXPECT_EQ(r.contracts.size(), 1u);
}

TEST(ScenarioRun, IncomeDivisionPaysBothParties) {
    const SettlementReport r = run_scenario(parse_scenario(sample("income_division.json")));
    const SessionOutcome& o = r.outcomes.at("div-1");
    ASSERT_EQ(o.payouts.size(), 2u);
    EXPECT_EQ(o.payouts[0].value, o.charge.scaled(7, 10));
    EXPECT_EQ(o.payouts[1].value, o.charge.scaled(3, 10));
    EXPECT_EQ(r.balances.accounts.at(Address{"partner"}), o.payouts[1].value);
    EXPECT_EQ(r.contracts.size(), 2u);
}

TEST(ScenarioRun, ConsensusEnactsAndExpires) {
    const SettlementReport r = run_scenario(parse_scenario(sample("consensus.json")));
    EXPECT_EQ(r.event_error_count(), 0u);
    EXPECT_EQ(r.contracts.size(), 2u);
    EXPECT_EQ(r.outcomes.at("team").charge, r.sessions.at("team").quote.price);
}

TEST(ScenarioRun, ConstraintProviderSelectionAndAnomalyRefund) {
    const SettlementReport r = run_scenario(parse_scenario(sample("constraint_gdpr.json")));
    EXPECT_EQ(r.sessions.at("c-1").provider.address, Address{"eu-host"});
    EXPECT_TRUE(r.outcomes.at("c-1").charge.is_zero());
    EXPECT_EQ(r.event_error_count(), 0u);
}

TEST(ScenarioRun, FailedDeploymentIsRecordedAndRefunded) {
    const SettlementReport r = run_scenario(parse_scenario(sample("failed_deployment.json")));
    ASSERT_EQ(r.event_error_count(), 1u);
    EXPECT_EQ(r.events[2].action, Action::kCountersign);
    EXPECT_NE(r.events[2].error->find("DeploymentFailed"), std::string::npos);
    EXPECT_EQ(r.outcomes.at("vc-1").refund, r.sessions.at("vc-1").quote.price);
    EXPECT_TRUE(r.conservation);
}

TEST(ScenarioRun, CorruptBalanceBreaksConservation) {
    const SettlementReport r = run_scenario(parse_scenario(sample("invalid/corrupt_balance.json")));
    EXPECT_FALSE(r.conservation);
    EXPECT_FALSE(r.replay_matches);
}

TEST(ScenarioRun, EventsRunAtFirstBlockReachingTheirTime) {
    const SettlementReport r = run_scenario(parse_scenario(sample("dynamic_price_timeout.json")));
    EXPECT_EQ(r.events[1].block.timestamp, 30u);
    EXPECT_EQ(r.events[2].block.timestamp, 45u);
    EXPECT_EQ(r.sessions.at("vc-1").record.stop_block->timestamp, 3'630u);
}

TEST(ScenarioRun, DeterministicReports) {
    for (const char* name : {"dynamic_price.json", "jittered_flexible.json", "quota.json"}) {
        const ScenarioScript s = parse_scenario(sample(name));
        const SettlementReport a = run_scenario(s);
        const SettlementReport b = run_scenario(s);
        EXPECT_EQ(report_json(a).dump(), report_json(b).dump()) << name;
        EXPECT_EQ(a.transaction_log_digest, b.transaction_log_digest) << name;
        EXPECT_EQ(a.transaction_log_jsonl, b.transaction_log_jsonl) << name;
    }
    const ScenarioScript s = parse_scenario(sample("dynamic_price.json"));
    EXPECT_EQ(run_scenario(s, 7).transaction_log_digest, run_scenario(s, 7).transaction_log_digest);
    EXPECT_NE(run_scenario(s, 7).final_block, run_scenario(s).final_block);
}

TEST(ScenarioRun, RandomScriptsKeepStepLogsOrdered) {
    for (std::uint64_t seed = 0; seed < 300; ++seed) {
        const SettlementReport r = run_scenario(test::random_scenario(seed));
        ASSERT_TRUE(r.conservation) << seed;
        for (const auto& [id, s] : r.sessions) {
            const auto& log = s.record.step_log;
            ASSERT_TRUE(std::is_sorted(log.begin(), log.end())) << seed << " " << id;
            ASSERT_EQ(std::adjacent_find(log.begin(), log.end()), log.end()) << seed << " " << id;
            ASSERT_GE(log.front(), 1);
            ASSERT_LE(log.back(), 16);
            if (s.record.settlement) ASSERT_EQ(log.back(), 16) << seed << " " << id;
        }
    }
}

}  // namespace vcescrow
