#pragma once

#include <string>
#include <vector>

#include "peerchurn/types.hpp"

namespace peerchurn {

// Per-subscriber view the churn rule needs: outbound-activity bitmap plus
// where observation starts. `has_history` marks subscribers who joined
// before the window (so silence from month 1 counts as a churn run).
struct ActivityView {
  std::vector<uint8_t> active;  // slot m-1 => any outbound call in month m
  int first_month = 1;          // presence start inside the window
  bool has_history = false;     // joined before the window start
};

ActivityView activity_view(const UsageTable& usage, int sub, CalMonth join,
                           const MonthWindow& window);

// Prepaid churn rule: a subscriber churns at the first month m (m within the
// evaluable range, i.e. a full 3-month run fits in the window) such that
// months m, m+1, m+2 all have zero outbound calls. Inbound calls do not
// prevent churn. Subscribers with no such run are censored at the last
// evaluable month, window_len - 2. Reactivation after a qualifying run does
// not undo the label.
ChurnEvent label_churn_one(const ActivityView& view, int window_len);

// Labels everyone in the roster. window_len >= 4 required.
ChurnTable label_churn(const UsageTable& usage, const SubscriberTable& subs,
                       const MonthWindow& window);

// Network presence intervals: entry at max(1, join), exit the month before
// churn (a churner's first silent month no longer counts as co-presence).
Presence build_presence(const ChurnTable& churn, const SubscriberTable& subs,
                        const MonthWindow& window);

// churn export: subscriber_id,churn_month,censored. censored rows carry the
// censoring month. Deterministic id order.
void write_churn_csv(const std::string& path, const ChurnTable& churn,
                     const SubscriberTable& subs);
// Inverse of write_churn_csv; requires exactly one row per roster subscriber.
ChurnTable read_churn_csv(const std::string& path, const SubscriberTable& subs,
                          const MonthWindow& window);

}  // namespace peerchurn
