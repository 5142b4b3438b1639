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
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "demo.hpp"
#include "error.hpp"
#include "oracle.hpp"
#include "pricing.hpp"
#include "runner.hpp"
#include "scenario.hpp"

namespace vcescrow {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConservation = 1;
inline constexpr int kExitInvalidInput = 2;
inline constexpr int kExitEventErrors = 3;

//! Parses "12", "12.3" or "12.34" dollars into cents.
inline std::uint64_t parse_usd_cents(const std::string& text) {
    const auto dot = text.find('.');
    const std::string whole = text.substr(0, dot);
    std::string frac = dot == std::string::npos ? "" : text.substr(dot + 1);
    if (whole.empty() || frac.size() > 2 || (dot != std::string::npos && frac.empty())) {
        throw Error{ErrorCode::kParseError, "not a dollar amount: " + text};
    }
    while (frac.size() < 2) frac.push_back('0');
    const uint128 cents = checked_add(checked_mul(parse_u128(whole), 100), parse_u128(frac));
    if (cents > UINT64_MAX) throw Error{ErrorCode::kOverflow, text};
    return static_cast<std::uint64_t>(cents);
}

inline std::string read_file(const std::string& path) {
    std::ifstream in{path, std::ios::binary};
    if (!in) throw Error{ErrorCode::kParseError, "cannot read " + path};
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_output(const std::string& path, const std::string& text, std::ostream& out) {
    if (path.empty()) {
        out << text;
        return;
    }
    std::ofstream f{path, std::ios::binary};
    if (!f) throw Error{ErrorCode::kInvalidArgument, "cannot write " + path};
    f << text;
}

inline void print_fee_table(const std::vector<FeeRow>& rows, std::ostream& out) {
    out << std::left << std::setw(12) << "method" << std::setw(20) << "processing fee" << std::setw(14)
        << "proportional" << std::setw(16) << "merchant (min)" << "lock-in\n";
    for (const auto& r : rows) {
        std::string fee = format_usd_cents(r.fee_min_usd_cents);
        if (r.proportional) fee += "–" + format_usd_cents(r.fee_max_usd_cents);
        // setw counts bytes; the en dash is three of them.
        const int pad = r.proportional ? 22 : 20;
        out << std::left << std::setw(12) << std::string{r.method} << std::setw(pad) << fee << std::setw(14)
            << (r.proportional ? "yes" : "no") << std::setw(16) << format_usd_cents(r.merchant_min_usd_cents)
            << to_string(r.lockin);
        if (!r.proportional) out << "  (" << r.fee_wei.to_string() << " wei)";
        out << "\n";
    }
}

//! Entry point shared by the executable and the tests. Data goes to `out`, diagnostics to `err`.
inline int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Escrow settlement simulator for on-demand video-conferencing services", "vcescrow"};
    app.require_subcommand(1, 1);

    std::string scenario_path;
    std::string out_path;
    std::optional<std::uint64_t> seed;

    auto* run = app.add_subcommand("run", "Execute a scenario and write the settlement report");
    run->add_option("scenario", scenario_path, "Scenario JSON file")->required();
    run->add_option("--seed", seed, "Jittered block times with this seed");
    run->add_option("--out", out_path, "Report path (default: standard output)");

    auto* oracle = app.add_subcommand("oracle", "Recompute expected settlements independently");
    oracle->add_option("scenario", scenario_path, "Scenario JSON file")->required();
    oracle->add_option("--seed", seed, "Jittered block times with this seed");
    oracle->add_option("--out", out_path, "Output path (default: standard output)");

    std::string amount_usd = "100";
    std::string eth_usd = "500";
    std::uint64_t gas_price_gwei = 20;
    std::uint64_t gas_units = 21'000;
    bool any_gas_price = false;
    auto* fees = app.add_subcommand("fees", "Compare card, PayPal and Ethereum payment fees");
    fees->add_option("--amount-usd", amount_usd, "Payment amount in USD")->capture_default_str();
    fees->add_option("--eth-usd", eth_usd, "ETH price in USD")->capture_default_str();
    fees->add_option("--gas-price-gwei", gas_price_gwei, "Gas price in GWEI")->capture_default_str();
    fees->add_option("--gas-units", gas_units, "Gas consumed by the payment")->capture_default_str();
    fees->add_flag("--allow-any-gas-price", any_gas_price, "Do not enforce the 1-40 GWEI gas price range");

    bool timeout = false;
    bool demo_json = false;
    auto* demo = app.add_subcommand("demo", "Run the canonical dynamic-price session and print its steps");
    demo->add_flag("--timeout", timeout, "Never stop; let the alarm clock settle at expiry");
    demo->add_option("--seed", seed, "Jittered block times with this seed");
    demo->add_flag("--json", demo_json, "Print the full report instead of the step trace");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        return kExitInvalidInput;
    }

    try {
        if (*run) {
            const ScenarioScript script = parse_scenario(read_file(scenario_path));
            const SettlementReport report = run_scenario(script, seed);
            write_output(out_path, report_json(report).dump(2) + "\n", out);
            if (!out_path.empty()) out << summary_text(report);
            if (!report.conservation) {
                err << "error: conservation violated\n";
                return kExitConservation;
            }
            if (report.event_error_count() != 0) {
                err << "error: " << report.event_error_count() << " event(s) failed\n";
                return kExitEventErrors;
            }
            return kExitOk;
        }
        if (*oracle) {
            const ScenarioScript script = parse_scenario(read_file(scenario_path));
            write_output(out_path, oracle_json(oracle_settlement(script, seed)).dump(2) + "\n", out);
            return kExitOk;
        }
        if (*fees) {
            FeeComparisonInput in;
            in.amount_usd_cents = parse_usd_cents(amount_usd);
            in.eth_usd_cents = parse_usd_cents(eth_usd);
            in.gas_price = Amount::gwei(gas_price_gwei);
            in.gas_units = gas_units;
            in.enforce_gas_price_bounds = !any_gas_price;
            const auto rows = compare_fee_methods(in);
            out << "payment " << format_usd_cents(in.amount_usd_cents) << ", ETH at " << format_usd_cents(in.eth_usd_cents)
                << ", gas " << gas_price_gwei << " GWEI x " << gas_units << "\n";
            print_fee_table(rows, out);
            return kExitOk;
        }
        if (*demo) {
            const SettlementReport report = run_scenario(canonical_scenario(timeout), seed);
            if (demo_json) {
                out << report_json(report).dump(2) << "\n";
                return report.conservation ? kExitOk : kExitConservation;
            }
            const Session& s = report.sessions.begin()->second;
            out << "demo " << report.name << ": dynamic price, 3600 s, HD, availability target 9980 bp\n";
            out << "quote " << s.quote.price.to_string() << " wei\n";
            out << "step_log " << step_log_text(s.record.step_log) << "\n";
            for (int step : s.record.step_log) {
                out << "  " << std::setw(2) << std::right << step << "  " << step_description(step) << "\n";
            }
            if (s.record.settlement) {
                out << "settlement charge " << s.record.settlement->charge.to_string() << " wei, refund "
                    << s.record.settlement->refund.to_string() << " wei, settled at "
                    << s.record.settlement->settled_at << " s (requested "
                    << s.record.requested_stop_time.value_or(0) << " s)\n";
            }
            out << "conservation " << (report.conservation ? "ok" : "VIOLATED") << ", digest "
                << report.transaction_log_digest << "\n";
            return report.conservation ? kExitOk : kExitConservation;
        }
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return kExitInvalidInput;
    }
    return kExitInvalidInput;
}

}  // namespace vcescrow
