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

#include <stdexcept>
#include <string>
#include <string_view>

namespace vcescrow {

enum class ErrorCode {
    kOverflow,
    kUnderflow,
    kInsufficientFunds,
    kUnknownAddress,
    kAddressInUse,
    kWrongState,
    kNotOwner,
    kNotEndUser,
    kNotYetReleased,
    kQuotaExhausted,
    kSessionAlreadyOpen,
    kNoOpenSession,
    kInvalidShares,
    kNotAVoter,
    kAlreadyVoted,
    kInvalidArgument,
    kInvalidPreferences,
    kInadmissibleOffer,
    kGasPriceOutOfRange,
    kQuoteExpired,
    kPriceMismatch,
    kDeploymentFailed,
    kSessionNotActive,
    kUnknownSession,
    kParseError,
    kValidationError,
};

inline constexpr std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::kOverflow: return "Overflow";
        case ErrorCode::kUnderflow: return "Underflow";
        case ErrorCode::kInsufficientFunds: return "InsufficientFunds";
        case ErrorCode::kUnknownAddress: return "UnknownAddress";
        case ErrorCode::kAddressInUse: return "AddressInUse";
        case ErrorCode::kWrongState: return "WrongState";
        case ErrorCode::kNotOwner: return "NotOwner";
        case ErrorCode::kNotEndUser: return "NotEndUser";
        case ErrorCode::kNotYetReleased: return "NotYetReleased";
        case ErrorCode::kQuotaExhausted: return "QuotaExhausted";
        case ErrorCode::kSessionAlreadyOpen: return "SessionAlreadyOpen";
        case ErrorCode::kNoOpenSession: return "NoOpenSession";
        case ErrorCode::kInvalidShares: return "InvalidShares";
        case ErrorCode::kNotAVoter: return "NotAVoter";
        case ErrorCode::kAlreadyVoted: return "AlreadyVoted";
        case ErrorCode::kInvalidArgument: return "InvalidArgument";
        case ErrorCode::kInvalidPreferences: return "InvalidPreferences";
        case ErrorCode::kInadmissibleOffer: return "InadmissibleOffer";
        case ErrorCode::kGasPriceOutOfRange: return "GasPriceOutOfRange";
        case ErrorCode::kQuoteExpired: return "QuoteExpired";
        case ErrorCode::kPriceMismatch: return "PriceMismatch";
        case ErrorCode::kDeploymentFailed: return "DeploymentFailed";
        case ErrorCode::kSessionNotActive: return "SessionNotActive";
        case ErrorCode::kUnknownSession: return "UnknownSession";
        case ErrorCode::kParseError: return "ParseError";
        case ErrorCode::kValidationError: return "ValidationError";
    }
    return "Unknown";
}

//! Every failing operation throws Error and leaves the ledger untouched.
class Error : public std::runtime_error {
  public:
    Error(ErrorCode code, const std::string& detail)
        : std::runtime_error{std::string{to_string(code)} + (detail.empty() ? "" : ": " + detail)}, code_{code} {}
    explicit Error(ErrorCode code) : Error{code, ""} {}

    [[nodiscard]] ErrorCode code() const noexcept { return code_; }

  private:
    ErrorCode code_;
};

}  // namespace vcescrow
