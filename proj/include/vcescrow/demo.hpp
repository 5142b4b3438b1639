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
#include <string>

#include "contract_types.hpp"
#include "ledger.hpp"
#include "orchestrator.hpp"
#include "scenario.hpp"

namespace vcescrow {

inline const Address& demo_end_user() {
    static const Address kAddr{"end-user"};
    return kAddr;
}

inline const Address& demo_provider() {
    static const Address kAddr{"vc-owner"};
    return kAddr;
}

//! One-hour dynamic-price HD session with a 99.8% availability target. The end user stops
//! after 30 minutes; with `timeout` the user never stops and the alarm clock settles at expiry.
inline ScenarioScript canonical_scenario(bool timeout) {
    ScenarioScript s;
    s.name = timeout ? "dynamic-price-timeout" : "dynamic-price";
    s.config.orchestrator.providers.push_back({demo_provider(), "EU", true});
    s.genesis = {{demo_end_user(), Amount::eth(5)}, {demo_provider(), Amount::eth(1)}};

    ScenarioEvent request;
    request.at = 0;
    request.actor = demo_end_user();
    request.action = Action::kRequestSession;
    request.session = "vc-1";
    request.request.end_user = demo_end_user();
    request.request.prefs = {9'980, VideoQuality::kHD, 3'600, ContractKind::kDynamicPrice};
    s.events.push_back(request);

    auto add = [&](Timestamp at, const Address& actor, Action action) {
        ScenarioEvent e;
        e.at = at;
        e.actor = actor;
        e.action = action;
        e.session = "vc-1";
        s.events.push_back(e);
    };
    add(0, demo_end_user(), Action::kPay);
    add(15, demo_provider(), Action::kCountersign);
    for (Timestamp t = 300; t <= (timeout ? 3'300 : 1'500); t += 300) add(t, demo_provider(), Action::kQos);
    if (!timeout) add(1'800, demo_end_user(), Action::kStop);
    return s;
}

inline const char* step_description(int step) {
    switch (step) {
        case 1: return "price estimated from QoS preferences, agreement contract deployed";
        case 2: return "pricing policy sent to the end user";
        case 3: return "end user pays the full price, funds locked in the contract";
        case 4: return "signed contract forwarded to the solution services";
        case 5: return "contract countersigned by the VC service address";
        case 6: return "deployment request passed to QoS modeler and decision maker";
        case 7: return "container deployment executed";
        case 8: return "deployment succeeded";
        case 9: return "unique session URL issued to the end user";
        case 10: return "URL shared with the session participants";
        case 11: return "end user signs the session stop";
        case 12: return "application instances undeployed";
        case 13: return "funds unlocked, time-proportional return executed";
        case 14: return "refund transfer to the end user";
        case 15: return "charge transfer to the VC service";
        case 16: return "end user notified of contract completion";
        default: return "?";
    }
}

}  // namespace vcescrow
