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

#include <openssl/evp.h>

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "amount.hpp"
#include "contract_types.hpp"
#include "error.hpp"
#include "types.hpp"

namespace vcescrow {

//! Gas units are fixed per transaction class; the fee never depends on the value moved.
struct GasSchedule {
    std::uint64_t transfer_gas{21'000};
    std::uint64_t contract_call_gas{50'000};
    std::uint64_t contract_deploy_gas{200'000};
    Amount gas_price{Amount::gwei(20)};

    [[nodiscard]] Amount fee(std::uint64_t gas_units) const { return gas_price * gas_units; }
};

struct GasPriceBounds {
    Amount min{Amount::gwei(1)};
    Amount max{Amount::gwei(40)};

    [[nodiscard]] bool contains(Amount price) const noexcept { return min <= price && price <= max; }
};

struct BlockProduction {
    std::uint64_t interval_seconds{15};
    //! Set: intervals drawn uniformly from [interval - half_width, interval + half_width].
    std::optional<std::uint64_t> jitter_seed;
    std::uint64_t jitter_half_width{10};
};

struct LedgerConfig {
    BlockProduction blocks;
    GasSchedule gas;
    GasPriceBounds gas_price_bounds;
    bool enforce_gas_price_bounds{true};
};

enum class TxKind { kGenesis, kTransfer, kDeploy, kCall, kPayout, kRefund, kWakeup };

inline constexpr std::string_view to_string(TxKind kind) noexcept {
    switch (kind) {
        case TxKind::kGenesis: return "genesis";
        case TxKind::kTransfer: return "transfer";
        case TxKind::kDeploy: return "deploy";
        case TxKind::kCall: return "call";
        case TxKind::kPayout: return "payout";
        case TxKind::kRefund: return "refund";
        case TxKind::kWakeup: return "wakeup";
    }
    return "unknown";
}

struct TxRecord {
    std::uint64_t block_height{0};
    Address from;
    Address to;
    Amount value;
    Amount fee;
    TxKind kind{TxKind::kTransfer};
};

struct Receipt {
    std::uint64_t block_height{0};
    std::size_t tx_index{0};
    Amount fee;
};

struct Wakeup {
    Address contract;
    Timestamp fire_at{0};
};

//! Balances reconstructed from state or from a transaction log; compared for replay checks.
struct BalanceSnapshot {
    std::map<Address, Amount> accounts;
    std::map<Address, Amount> escrows;
    Amount fee_sink;

    friend bool operator==(const BalanceSnapshot&, const BalanceSnapshot&) = default;
};

inline const Address& genesis_source() {
    static const Address kAddr{"genesis"};
    return kAddr;
}

inline const Address& fee_sink_address() {
    static const Address kAddr{"fee-sink"};
    return kAddr;
}

inline nlohmann::ordered_json to_json(const TxRecord& tx) {
    nlohmann::ordered_json j;
    j["block_height"] = tx.block_height;
    j["from"] = tx.from.str();
    j["to"] = tx.to.str();
    j["value_wei"] = tx.value.to_string();
    j["fee_wei"] = tx.fee.to_string();
    j["kind"] = std::string{to_string(tx.kind)};
    return j;
}

inline std::string sha256_hex(std::string_view data) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len{0};
    if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1) {
        throw Error{ErrorCode::kInvalidArgument, "sha256 failed"};
    }
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out;
    out.reserve(len * 2);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(kHex[md[i] >> 4]);
        out.push_back(kHex[md[i] & 0xF]);
    }
    return out;
}

//! Single-writer simulated chain: accounts, contract escrows, a fee sink and a block clock.
//!
//! Every mutating call validates before touching state, so a thrown Error leaves the ledger
//! exactly as it was. Contract code moves value only through deposit_to_escrow and
//! release_from_escrow, which keeps the conservation invariant checkable at any point.
class Ledger {
  public:
    using WakeupHandler = std::function<void(const Wakeup&, const Block&)>;

    explicit Ledger(LedgerConfig config = {}) : config_{std::move(config)} {
        if (config_.blocks.interval_seconds == 0) {
            throw Error{ErrorCode::kInvalidArgument, "block interval must be positive"};
        }
        if (config_.blocks.jitter_seed && config_.blocks.jitter_half_width >= config_.blocks.interval_seconds) {
            throw Error{ErrorCode::kInvalidArgument, "jitter half width must be below the block interval"};
        }
        if (config_.enforce_gas_price_bounds && !config_.gas_price_bounds.contains(config_.gas.gas_price)) {
            throw Error{ErrorCode::kGasPriceOutOfRange, config_.gas.gas_price.to_string() + " wei"};
        }
        if (config_.blocks.jitter_seed) rng_.seed(*config_.blocks.jitter_seed);
    }

    Ledger(const Ledger&) = delete;
    Ledger& operator=(const Ledger&) = delete;

    [[nodiscard]] const LedgerConfig& config() const noexcept { return config_; }
    [[nodiscard]] const Block& current_block() const noexcept { return current_; }
    [[nodiscard]] Amount genesis_total() const noexcept { return genesis_total_; }
    [[nodiscard]] Amount fee_sink() const noexcept { return fee_sink_; }
    [[nodiscard]] const std::vector<TxRecord>& tx_log() const noexcept { return log_; }
    [[nodiscard]] const std::map<Address, Amount>& accounts() const noexcept { return accounts_; }
    [[nodiscard]] const std::map<Address, Contract>& contracts() const noexcept { return contracts_; }

    [[nodiscard]] Amount transfer_fee() const { return config_.gas.fee(config_.gas.transfer_gas); }
    [[nodiscard]] Amount call_fee() const { return config_.gas.fee(config_.gas.contract_call_gas); }
    [[nodiscard]] Amount deploy_fee() const { return config_.gas.fee(config_.gas.contract_deploy_gas); }

    [[nodiscard]] bool is_account(const Address& a) const { return accounts_.contains(a); }
    [[nodiscard]] bool is_contract(const Address& a) const { return contracts_.contains(a); }

    //! Initial grant; only allowed before the first block after genesis is produced.
    void genesis(const Address& addr, Amount initial) {
        if (current_.height != 0) throw Error{ErrorCode::kWrongState, "genesis grants only at height 0"};
        if (addr.empty() || addr == genesis_source() || addr == fee_sink_address()) {
            throw Error{ErrorCode::kInvalidArgument, "reserved address '" + addr.str() + "'"};
        }
        if (is_account(addr) || is_contract(addr)) throw Error{ErrorCode::kAddressInUse, addr.str()};
        genesis_total_ += initial;
        accounts_.emplace(addr, initial);
        append({current_.height, genesis_source(), addr, initial, Amount{}, TxKind::kGenesis});
    }

    //! Appends one block and delivers every wakeup with fire_at <= the new timestamp, in
    //! (fire_at, scheduling order) order.
    Block produce_block() {
        std::uint64_t step = config_.blocks.interval_seconds;
        if (config_.blocks.jitter_seed) {
            const std::uint64_t hw = config_.blocks.jitter_half_width;
            step = step - hw + rng_() % (2 * hw + 1);
        }
        current_ = Block{current_.height + 1, current_.timestamp + step};
        while (!wakeups_.empty() && wakeups_.begin()->first <= current_.timestamp) {
            Wakeup w = wakeups_.begin()->second;
            wakeups_.erase(wakeups_.begin());
            if (handler_) handler_(w, current_);
        }
        return current_;
    }

    //! Produces blocks until the timestamp reaches `t`; returns the block events at `t` run in.
    const Block& advance_to(Timestamp t) {
        while (current_.timestamp < t) produce_block();
        return current_;
    }

    [[nodiscard]] Amount balance_of(const Address& addr) const {
        if (auto it = accounts_.find(addr); it != accounts_.end()) return it->second;
        if (auto it = contracts_.find(addr); it != contracts_.end()) return it->second.core.escrow;
        throw Error{ErrorCode::kUnknownAddress, addr.str()};
    }

    Receipt transfer(const Address& from, const Address& to, Amount value) {
        require_account(from);
        require_account(to);
        const Amount fee = transfer_fee();
        require_funds(from, value + fee);
        accounts_[from] -= value + fee;
        accounts_[to] += value;
        fee_sink_ += fee;
        return append({current_.height, from, to, value, fee, TxKind::kTransfer});
    }

    void require_account(const Address& addr) const {
        if (!is_account(addr)) throw Error{ErrorCode::kUnknownAddress, addr.str()};
    }

    void require_funds(const Address& addr, Amount needed) const {
        require_account(addr);
        const Amount have = accounts_.at(addr);
        if (have < needed) {
            throw Error{ErrorCode::kInsufficientFunds,
                        addr.str() + " has " + have.to_string() + " wei, needs " + needed.to_string()};
        }
    }

    //! Deploys `contract` under a fresh address, charging the deploy fee to `deployer`.
    Address deploy_contract(const Address& deployer, Contract contract) {
        require_funds(deployer, deploy_fee());
        Address addr;
        do {
            addr = Address{"sc-" + std::to_string(next_contract_id_++)};
        } while (is_account(addr));
        const Amount fee = deploy_fee();
        accounts_[deployer] -= fee;
        fee_sink_ += fee;
        contract.address = addr;
        contract.core.escrow = Amount{};
        contract.core.state = ContractState::kDeployed;
        contracts_.emplace(addr, std::move(contract));
        append({current_.height, deployer, addr, Amount{}, fee, TxKind::kDeploy});
        return addr;
    }

    [[nodiscard]] const Contract& contract(const Address& addr) const {
        auto it = contracts_.find(addr);
        if (it == contracts_.end()) throw Error{ErrorCode::kUnknownAddress, addr.str()};
        return it->second;
    }

    [[nodiscard]] Contract& contract(const Address& addr) {
        auto it = contracts_.find(addr);
        if (it == contracts_.end()) throw Error{ErrorCode::kUnknownAddress, addr.str()};
        return it->second;
    }

    //! Value-free contract call: the caller pays the call fee.
    Receipt charge_call(const Address& caller, const Address& contract_addr) {
        (void)contract(contract_addr);
        const Amount fee = call_fee();
        require_funds(caller, fee);
        accounts_[caller] -= fee;
        fee_sink_ += fee;
        return append({current_.height, caller, contract_addr, Amount{}, fee, TxKind::kCall});
    }

    //! Payable contract call: moves `value` into escrow, the caller pays value + call fee.
    Receipt deposit_to_escrow(const Address& caller, const Address& contract_addr, Amount value) {
        Contract& c = contract(contract_addr);
        const Amount fee = call_fee();
        require_funds(caller, value + fee);
        accounts_[caller] -= value + fee;
        fee_sink_ += fee;
        c.core.escrow += value;
        return append({current_.height, caller, contract_addr, value, fee, TxKind::kCall});
    }

    //! Internal contract transfer, no fee.
    Receipt release_from_escrow(const Address& contract_addr, const Address& to, Amount value, TxKind kind) {
        Contract& c = contract(contract_addr);
        require_account(to);
        if (c.core.escrow < value) {
            throw Error{ErrorCode::kInsufficientFunds, "escrow of " + contract_addr.str() + " too small"};
        }
        c.core.escrow -= value;
        accounts_[to] += value;
        return append({current_.height, contract_addr, to, value, Amount{}, kind});
    }

    //! Records a fee-free alarm-clock invocation of `contract_addr`.
    Receipt record_wakeup(const Address& contract_addr) {
        (void)contract(contract_addr);
        return append({current_.height, contract_addr, contract_addr, Amount{}, Amount{}, TxKind::kWakeup});
    }

    void set_wakeup_handler(WakeupHandler handler) { handler_ = std::move(handler); }

    void schedule_wakeup(const Wakeup& w) { wakeups_.emplace(w.fire_at, w); }

    void cancel_wakeups(const Address& contract_addr) {
        std::erase_if(wakeups_, [&](const auto& kv) { return kv.second.contract == contract_addr; });
    }

    [[nodiscard]] std::vector<Wakeup> pending_wakeups() const {
        std::vector<Wakeup> out;
        for (const auto& [_, w] : wakeups_) out.push_back(w);
        return out;
    }

    [[nodiscard]] BalanceSnapshot snapshot() const {
        BalanceSnapshot s;
        s.accounts = accounts_;
        for (const auto& [addr, c] : contracts_) s.escrows.emplace(addr, c.core.escrow);
        s.fee_sink = fee_sink_;
        return s;
    }

    [[nodiscard]] bool conservation_check() const {
        try {
            Amount total = fee_sink_;
            for (const auto& [_, v] : accounts_) total += v;
            for (const auto& [_, c] : contracts_) total += c.core.escrow;
            return total == genesis_total_;
        } catch (const Error&) {
            return false;
        }
    }

    [[nodiscard]] std::string tx_log_jsonl() const {
        std::string out;
        for (const auto& tx : log_) {
            out += to_json(tx).dump();
            out += '\n';
        }
        return out;
    }

    [[nodiscard]] std::string tx_log_digest() const { return sha256_hex(tx_log_jsonl()); }

    //! Fault injection for tests: overwrites a balance without a matching transaction.
    void testing_corrupt_balance(const Address& addr, Amount value) {
        require_account(addr);
        accounts_[addr] = value;
    }

  private:
    Receipt append(TxRecord tx) {
        Receipt r{tx.block_height, log_.size(), tx.fee};
        log_.push_back(std::move(tx));
        return r;
    }

    LedgerConfig config_;
    Block current_{};
    std::mt19937_64 rng_{};
    std::map<Address, Amount> accounts_;
    std::map<Address, Contract> contracts_;
    Amount fee_sink_;
    Amount genesis_total_;
    std::vector<TxRecord> log_;
    std::multimap<Timestamp, Wakeup> wakeups_;
    WakeupHandler handler_;
    std::uint64_t next_contract_id_{1};
};

//! Rebuilds balances from a transaction log alone, independent of the ledger that wrote it.
inline BalanceSnapshot replay_balances(const std::vector<TxRecord>& log) {
    BalanceSnapshot s;
    auto is_escrow = [&](const Address& a) { return s.escrows.contains(a); };
    for (const auto& tx : log) {
        switch (tx.kind) {
            case TxKind::kGenesis:
                s.accounts[tx.to] += tx.value;
                break;
            case TxKind::kDeploy:
                s.accounts.at(tx.from) -= tx.fee;
                s.escrows.emplace(tx.to, Amount{});
                s.fee_sink += tx.fee;
                break;
            case TxKind::kWakeup:
                break;
            default: {
                auto& src = is_escrow(tx.from) ? s.escrows.at(tx.from) : s.accounts.at(tx.from);
                src -= tx.value + tx.fee;
                auto& dst = is_escrow(tx.to) ? s.escrows.at(tx.to) : s.accounts.at(tx.to);
                dst += tx.value;
                s.fee_sink += tx.fee;
            }
        }
    }
    return s;
}

}  // namespace vcescrow
