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
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "amount.hpp"
#include "contract_types.hpp"
#include "error.hpp"
#include "ledger.hpp"
#include "orchestrator.hpp"
#include "pricing.hpp"
#include "types.hpp"

namespace vcescrow {

enum class Action {
    kRequestSession,
    kPay,
    kCountersign,
    kQos,
    kStop,
    kPurchase,
    kQuotaStart,
    kQuotaStop,
    kQuotaClose,
    kVote,
    kTally,
    kTransfer,
};

inline constexpr std::string_view to_string(Action a) noexcept {
    switch (a) {
        case Action::kRequestSession: return "request_session";
        case Action::kPay: return "pay";
        case Action::kCountersign: return "countersign";
        case Action::kQos: return "qos";
        case Action::kStop: return "stop";
        case Action::kPurchase: return "purchase";
        case Action::kQuotaStart: return "quota_start";
        case Action::kQuotaStop: return "quota_stop";
        case Action::kQuotaClose: return "quota_close";
        case Action::kVote: return "vote";
        case Action::kTally: return "tally";
        case Action::kTransfer: return "transfer";
    }
    return "unknown";
}

struct ScenarioEvent {
    Timestamp at{0};
    Address actor;
    Action action{Action::kPay};
    SessionId session;
    SessionRequest request;       // request_session
    std::optional<Amount> value;  // pay, purchase, transfer; absent = the agreed amount
    std::uint64_t minutes{0};     // purchase
    bool available{true};         // qos
    VoteChoice choice{VoteChoice::kYes};
    Address to;  // transfer
};

struct BalanceFault {
    Address address;
    Amount value;
};

struct ScenarioConfig {
    LedgerConfig ledger;
    OrchestratorConfig orchestrator;
    //! After the last event keep producing blocks until every pending wakeup has fired.
    bool drain_wakeups{true};
    //! Fault injection: overwrite a balance out of band after the run.
    std::optional<BalanceFault> corrupt_balance;
};

struct ScenarioScript {
    std::string name;
    ScenarioConfig config;
    std::vector<std::pair<Address, Amount>> genesis;
    std::vector<ScenarioEvent> events;
};

namespace detail {

    using ojson = nlohmann::ordered_json;

    [[noreturn]] inline void field_error(const std::string& path, const std::string& what) {
        throw Error{ErrorCode::kParseError, path + ": " + what};
    }

    inline const ojson* optional_field(const ojson& obj, const char* key) {
        auto it = obj.find(key);
        return it == obj.end() || it->is_null() ? nullptr : &*it;
    }

    inline const ojson& required_field(const ojson& obj, const char* key, const std::string& path) {
        const ojson* f = optional_field(obj, key);
        if (f == nullptr) field_error(path + "." + key, "missing");
        return *f;
    }

    inline std::uint64_t as_u64(const ojson& v, const std::string& path) {
        if (!v.is_number_unsigned()) {
            if (v.is_number_integer() && v.get<std::int64_t>() >= 0) return v.get<std::uint64_t>();
            field_error(path, "expected unsigned integer");
        }
        return v.get<std::uint64_t>();
    }

    inline BasisPoints as_bp(const ojson& v, const std::string& path) {
        const std::uint64_t x = as_u64(v, path);
        if (x > 0xFFFFFFFFULL) field_error(path, "basis points out of range");
        return static_cast<BasisPoints>(x);
    }

    inline std::string as_string(const ojson& v, const std::string& path) {
        if (!v.is_string()) field_error(path, "expected string");
        return v.get<std::string>();
    }

    inline bool as_bool(const ojson& v, const std::string& path) {
        if (!v.is_boolean()) field_error(path, "expected boolean");
        return v.get<bool>();
    }

    //! Amounts are decimal strings; plain unsigned JSON integers are accepted as well.
    inline Amount as_amount(const ojson& v, const std::string& path) {
        if (v.is_string()) {
            try {
                return Amount::parse(v.get<std::string>());
            } catch (const Error& e) {
                field_error(path, e.what());
            }
        }
        return Amount::wei(as_u64(v, path));
    }

    template <typename T, typename F>
    void read_opt(const ojson& obj, const char* key, const std::string& path, T& out, F conv) {
        if (const ojson* f = optional_field(obj, key)) out = conv(*f, path + "." + key);
    }

    inline std::size_t line_of(std::string_view text, std::size_t byte) {
        byte = std::min(byte, text.size());
        return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(byte), '\n'));
    }

    inline ConstraintTerms parse_constraints(const ojson& j, const std::string& path) {
        ConstraintTerms t;
        read_opt(j, "gdpr_required", path, t.gdpr_required, as_bool);
        read_opt(j, "price_multiplier_bp", path, t.price_multiplier_bp, as_bp);
        if (const ojson* r = optional_field(j, "allowed_regions")) {
            if (!r->is_array()) field_error(path + ".allowed_regions", "expected array");
            for (std::size_t i = 0; i < r->size(); ++i) {
                t.allowed_regions.insert(as_string((*r)[i], path + ".allowed_regions[" + std::to_string(i) + "]"));
            }
        }
        return t;
    }

    inline SessionRequest parse_request(const ojson& e, const std::string& path, const Address& actor) {
        SessionRequest r;
        r.end_user = actor;
        const std::string kind_name = as_string(required_field(e, "kind", path), path + ".kind");
        auto kind = parse_contract_kind(kind_name);
        if (!kind) field_error(path + ".kind", "unknown contract kind '" + kind_name + "'");
        r.prefs.monetization_kind = *kind;
        read_opt(e, "max_period_seconds", path, r.prefs.max_period_seconds, as_u64);
        read_opt(e, "availability_target_bp", path, r.prefs.availability_target_bp, as_bp);
        if (const ojson* q = optional_field(e, "video_quality")) {
            const std::string qs = as_string(*q, path + ".video_quality");
            if (qs == "SD") {
                r.prefs.video_quality = VideoQuality::kSD;
            } else if (qs == "HD") {
                r.prefs.video_quality = VideoQuality::kHD;
            } else {
                field_error(path + ".video_quality", "expected SD or HD");
            }
        }
        if (const ojson* c = optional_field(e, "constraints")) r.constraints = parse_constraints(*c, path + ".constraints");
        if (const ojson* s = optional_field(e, "income_shares")) {
            const std::string sp = path + ".income_shares";
            r.income_shares.denominator = as_u64(required_field(*s, "denominator", sp), sp + ".denominator");
            const ojson& entries = required_field(*s, "entries", sp);
            if (!entries.is_array()) field_error(sp + ".entries", "expected array");
            for (std::size_t i = 0; i < entries.size(); ++i) {
                const std::string ep = sp + ".entries[" + std::to_string(i) + "]";
                r.income_shares.entries.emplace_back(
                    Address{as_string(required_field(entries[i], "address", ep), ep + ".address")},
                    as_u64(required_field(entries[i], "numerator", ep), ep + ".numerator"));
            }
        }
        if (const ojson* v = optional_field(e, "voters")) {
            if (!v->is_array()) field_error(path + ".voters", "expected array");
            for (std::size_t i = 0; i < v->size(); ++i) {
                r.voters.insert(Address{as_string((*v)[i], path + ".voters[" + std::to_string(i) + "]")});
            }
        }
        return r;
    }

    inline Action parse_action(const std::string& name, const std::string& path) {
        for (auto a : {Action::kRequestSession, Action::kPay, Action::kCountersign, Action::kQos, Action::kStop,
                       Action::kPurchase, Action::kQuotaStart, Action::kQuotaStop, Action::kQuotaClose, Action::kVote,
                       Action::kTally, Action::kTransfer}) {
            if (to_string(a) == name) return a;
        }
        field_error(path, "unknown action '" + name + "'");
    }

    inline ScenarioConfig parse_config(const ojson& c) {
        const std::string p = "config";
        ScenarioConfig cfg;
        auto& blocks = cfg.ledger.blocks;
        read_opt(c, "block_interval_seconds", p, blocks.interval_seconds, as_u64);
        read_opt(c, "jitter_half_width_seconds", p, blocks.jitter_half_width, as_u64);
        if (const ojson* s = optional_field(c, "jitter_seed")) blocks.jitter_seed = as_u64(*s, p + ".jitter_seed");
        read_opt(c, "enforce_gas_price_bounds", p, cfg.ledger.enforce_gas_price_bounds, as_bool);
        if (const ojson* g = optional_field(c, "gas")) {
            const std::string gp = p + ".gas";
            auto& gas = cfg.ledger.gas;
            read_opt(*g, "transfer_gas", gp, gas.transfer_gas, as_u64);
            read_opt(*g, "contract_call_gas", gp, gas.contract_call_gas, as_u64);
            read_opt(*g, "contract_deploy_gas", gp, gas.contract_deploy_gas, as_u64);
            read_opt(*g, "gas_price_wei", gp, gas.gas_price, as_amount);
            if (const ojson* gw = optional_field(*g, "gas_price_gwei")) {
                gas.gas_price = Amount::gwei(as_u64(*gw, gp + ".gas_price_gwei"));
            }
        }
        auto& orch = cfg.orchestrator;
        read_opt(c, "refund_threshold_bp", p, orch.refund_threshold_bp, as_bp);
        read_opt(c, "flexible_deploy_latency_seconds", p, orch.flexible_deploy_latency_seconds, as_u64);
        if (const ojson* v = optional_field(c, "vote_threshold")) {
            read_opt(*v, "numerator", p + ".vote_threshold", orch.vote_threshold.numerator, as_u64);
            read_opt(*v, "denominator", p + ".vote_threshold", orch.vote_threshold.denominator, as_u64);
        }
        if (const ojson* r = optional_field(c, "rate_card")) {
            const std::string rp = p + ".rate_card";
            auto& card = orch.rate_card;
            read_opt(*r, "base_rate_wei_per_second", rp, card.base_rate_per_second, as_amount);
            read_opt(*r, "sd_multiplier_bp", rp, card.sd_multiplier_bp, as_bp);
            read_opt(*r, "hd_multiplier_bp", rp, card.hd_multiplier_bp, as_bp);
            read_opt(*r, "high_availability_above_bp", rp, card.high_availability_above_bp, as_bp);
            read_opt(*r, "high_availability_multiplier_bp", rp, card.high_availability_multiplier_bp, as_bp);
            read_opt(*r, "standby_rate_wei_per_second", rp, card.standby_rate_per_second, as_amount);
            read_opt(*r, "standby_window_seconds", rp, card.standby_window_seconds, as_u64);
            read_opt(*r, "quote_validity_blocks", rp, card.quote_validity_blocks, as_u64);
        }
        const ojson& providers = required_field(c, "providers", p);
        if (!providers.is_array() || providers.empty()) field_error(p + ".providers", "expected non-empty array");
        for (std::size_t i = 0; i < providers.size(); ++i) {
            const std::string pp = p + ".providers[" + std::to_string(i) + "]";
            ProviderProfile prof;
            prof.address = Address{as_string(required_field(providers[i], "address", pp), pp + ".address")};
            read_opt(providers[i], "region", pp, prof.region, as_string);
            read_opt(providers[i], "gdpr_compliant", pp, prof.gdpr_compliant, as_bool);
            orch.providers.push_back(std::move(prof));
        }
        read_opt(c, "drain_wakeups", p, cfg.drain_wakeups, as_bool);
        if (const ojson* f = optional_field(c, "faults")) {
            const std::string fp = p + ".faults";
            if (const ojson* d = optional_field(*f, "failing_deployments")) {
                if (!d->is_array()) field_error(fp + ".failing_deployments", "expected array");
                for (std::size_t i = 0; i < d->size(); ++i) {
                    orch.failing_deployments.insert(as_string((*d)[i], fp + ".failing_deployments[" + std::to_string(i) + "]"));
                }
            }
            if (const ojson* b = optional_field(*f, "corrupt_balance")) {
                const std::string bp = fp + ".corrupt_balance";
                cfg.corrupt_balance = BalanceFault{Address{as_string(required_field(*b, "address", bp), bp + ".address")},
                                                   as_amount(required_field(*b, "value_wei", bp), bp + ".value_wei")};
            }
        }
        return cfg;
    }

    [[noreturn]] inline void invalid(const std::string& what) { throw Error{ErrorCode::kValidationError, what}; }

}  // namespace detail

//! Structural checks that need the whole script: declared actors, ordered times, providers.
inline void validate_script(const ScenarioScript& script) {
    std::set<Address> declared;
    for (const auto& [addr, _] : script.genesis) {
        if (!declared.insert(addr).second) detail::invalid("genesis declares " + addr.str() + " twice");
    }
    for (const auto& p : script.config.orchestrator.providers) {
        if (!declared.contains(p.address)) detail::invalid("provider " + p.address.str() + " not declared in genesis");
    }
    Timestamp last{0};
    for (std::size_t i = 0; i < script.events.size(); ++i) {
        const auto& e = script.events[i];
        const std::string where = "events[" + std::to_string(i) + "]";
        if (e.at < last) {
            detail::invalid(where + ".at: " + std::to_string(e.at) + " is earlier than " + std::to_string(last));
        }
        last = e.at;
        if (!declared.contains(e.actor)) detail::invalid(where + ".actor: undeclared actor '" + e.actor.str() + "'");
        if (e.action == Action::kTransfer && !declared.contains(e.to)) {
            detail::invalid(where + ".to: undeclared address '" + e.to.str() + "'");
        }
        if (e.action != Action::kTransfer && e.session.empty()) detail::invalid(where + ".session: missing");
    }
}

inline ScenarioScript parse_scenario(std::string_view document) {
    detail::ojson root;
    try {
        root = detail::ojson::parse(document);
    } catch (const nlohmann::json::parse_error& e) {
        throw Error{ErrorCode::kParseError,
                    "line " + std::to_string(detail::line_of(document, e.byte)) + ": " + e.what()};
    }
    if (!root.is_object()) throw Error{ErrorCode::kParseError, "line 1: document must be an object"};

    ScenarioScript script;
    detail::read_opt(root, "name", "", script.name, detail::as_string);
    script.config = detail::parse_config(detail::required_field(root, "config", ""));

    const auto& genesis = detail::required_field(root, "genesis", "");
    if (!genesis.is_object()) detail::field_error("genesis", "expected object");
    for (const auto& [name, value] : genesis.items()) {
        script.genesis.emplace_back(Address{name}, detail::as_amount(value, "genesis." + name));
    }

    const auto& events = detail::required_field(root, "events", "");
    if (!events.is_array()) detail::field_error("events", "expected array");
    for (std::size_t i = 0; i < events.size(); ++i) {
        const std::string p = "events[" + std::to_string(i) + "]";
        const auto& j = events[i];
        if (!j.is_object()) detail::field_error(p, "expected object");
        ScenarioEvent e;
        e.at = detail::as_u64(detail::required_field(j, "at", p), p + ".at");
        e.actor = Address{detail::as_string(detail::required_field(j, "actor", p), p + ".actor")};
        e.action = detail::parse_action(detail::as_string(detail::required_field(j, "action", p), p + ".action"),
                                        p + ".action");
        detail::read_opt(j, "session", p, e.session, detail::as_string);
        if (const auto* v = detail::optional_field(j, "value_wei")) e.value = detail::as_amount(*v, p + ".value_wei");
        detail::read_opt(j, "minutes", p, e.minutes, detail::as_u64);
        detail::read_opt(j, "available", p, e.available, detail::as_bool);
        if (const auto* c = detail::optional_field(j, "choice")) {
            const std::string cs = detail::as_string(*c, p + ".choice");
            if (cs != "yes" && cs != "no") detail::field_error(p + ".choice", "expected yes or no");
            e.choice = cs == "yes" ? VoteChoice::kYes : VoteChoice::kNo;
        }
        if (const auto* t = detail::optional_field(j, "to")) e.to = Address{detail::as_string(*t, p + ".to")};
        if (e.action == Action::kRequestSession) e.request = detail::parse_request(j, p, e.actor);
        if (e.action == Action::kTransfer && !e.value) detail::field_error(p + ".value_wei", "missing");
        script.events.push_back(std::move(e));
    }
    validate_script(script);
    return script;
}

//! Inverse of parse_scenario for every field the parser reads.
inline nlohmann::ordered_json scenario_json(const ScenarioScript& script) {
    using ojson = nlohmann::ordered_json;
    const auto& lc = script.config.ledger;
    const auto& oc = script.config.orchestrator;
    ojson cfg;
    cfg["block_interval_seconds"] = lc.blocks.interval_seconds;
    if (lc.blocks.jitter_seed) cfg["jitter_seed"] = *lc.blocks.jitter_seed;
    cfg["jitter_half_width_seconds"] = lc.blocks.jitter_half_width;
    cfg["gas"] = {{"transfer_gas", lc.gas.transfer_gas},
                  {"contract_call_gas", lc.gas.contract_call_gas},
                  {"contract_deploy_gas", lc.gas.contract_deploy_gas},
                  {"gas_price_wei", lc.gas.gas_price.to_string()}};
    cfg["enforce_gas_price_bounds"] = lc.enforce_gas_price_bounds;
    const auto& card = oc.rate_card;
    cfg["rate_card"] = {{"base_rate_wei_per_second", card.base_rate_per_second.to_string()},
                        {"sd_multiplier_bp", card.sd_multiplier_bp},
                        {"hd_multiplier_bp", card.hd_multiplier_bp},
                        {"high_availability_above_bp", card.high_availability_above_bp},
                        {"high_availability_multiplier_bp", card.high_availability_multiplier_bp},
                        {"standby_rate_wei_per_second", card.standby_rate_per_second.to_string()},
                        {"standby_window_seconds", card.standby_window_seconds},
                        {"quote_validity_blocks", card.quote_validity_blocks}};
    cfg["refund_threshold_bp"] = oc.refund_threshold_bp;
    cfg["vote_threshold"] = {{"numerator", oc.vote_threshold.numerator}, {"denominator", oc.vote_threshold.denominator}};
    cfg["flexible_deploy_latency_seconds"] = oc.flexible_deploy_latency_seconds;
    ojson providers = ojson::array();
    for (const auto& p : oc.providers) {
        providers.push_back({{"address", p.address.str()}, {"region", p.region}, {"gdpr_compliant", p.gdpr_compliant}});
    }
    cfg["providers"] = providers;
    cfg["drain_wakeups"] = script.config.drain_wakeups;
    ojson faults = ojson::object();
    if (!oc.failing_deployments.empty()) faults["failing_deployments"] = oc.failing_deployments;
    if (script.config.corrupt_balance) {
        faults["corrupt_balance"] = {{"address", script.config.corrupt_balance->address.str()},
                                     {"value_wei", script.config.corrupt_balance->value.to_string()}};
    }
    if (!faults.empty()) cfg["faults"] = faults;

    ojson j;
    j["name"] = script.name;
    j["config"] = cfg;
    ojson genesis = ojson::object();
    for (const auto& [addr, v] : script.genesis) genesis[addr.str()] = v.to_string();
    j["genesis"] = genesis;
    ojson events = ojson::array();
    for (const auto& e : script.events) {
        ojson ev;
        ev["at"] = e.at;
        ev["actor"] = e.actor.str();
        ev["action"] = std::string{to_string(e.action)};
        if (!e.session.empty()) ev["session"] = e.session;
        switch (e.action) {
            case Action::kRequestSession: {
                const auto& r = e.request;
                ev["kind"] = std::string{to_string(r.prefs.monetization_kind)};
                ev["max_period_seconds"] = r.prefs.max_period_seconds;
                ev["availability_target_bp"] = r.prefs.availability_target_bp;
                ev["video_quality"] = std::string{to_string(r.prefs.video_quality)};
                if (r.constraints) {
                    ev["constraints"] = {{"gdpr_required", r.constraints->gdpr_required},
                                         {"allowed_regions", r.constraints->allowed_regions},
                                         {"price_multiplier_bp", r.constraints->price_multiplier_bp}};
                }
                if (!r.income_shares.entries.empty() || r.income_shares.denominator != 0) {
                    ojson entries = ojson::array();
                    for (const auto& [addr, n] : r.income_shares.entries) {
                        entries.push_back({{"address", addr.str()}, {"numerator", n}});
                    }
                    ev["income_shares"] = {{"denominator", r.income_shares.denominator}, {"entries", entries}};
                }
                if (!r.voters.empty()) {
                    ojson voters = ojson::array();
                    for (const auto& v : r.voters) voters.push_back(v.str());
                    ev["voters"] = voters;
                }
                break;
            }
            case Action::kPurchase: ev["minutes"] = e.minutes; break;
            case Action::kQos: ev["available"] = e.available; break;
            case Action::kVote: ev["choice"] = e.choice == VoteChoice::kYes ? "yes" : "no"; break;
            case Action::kTransfer: ev["to"] = e.to.str(); break;
            default: break;
        }
        if (e.value) ev["value_wei"] = e.value->to_string();
        events.push_back(ev);
    }
    j["events"] = events;
    return j;
}

}  // namespace vcescrow
