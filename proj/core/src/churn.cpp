#include "peerchurn/churn.hpp"

#include "peerchurn/csv.hpp"
#include "peerchurn/error.hpp"

namespace peerchurn {

ActivityView activity_view(const UsageTable& usage, int sub, CalMonth join,
                           const MonthWindow& window) {
  ActivityView v;
  v.active.assign(static_cast<std::size_t>(window.n_months), 0);
  for (int m = 1; m <= window.n_months; ++m)
    if (usage.active(sub, m)) v.active[static_cast<std::size_t>(m - 1)] = 1;
  int join_idx = join.linear() - window.start.linear() + 1;  // may be <= 0
  v.first_month = join_idx < 1 ? 1 : join_idx;
  v.has_history = join_idx < 1;
  return v;
}

ChurnEvent label_churn_one(const ActivityView& view, int window_len) {
  if (window_len < 4) throw Error("churn rule needs a window of at least 4 months");
  ChurnEvent ev;
  ev.month = window_len - 2;  // censoring month when no run found
  int last_start = window_len - 2;
  for (int m = view.first_month; m <= last_start; ++m) {
    bool silent = !view.active[static_cast<std::size_t>(m - 1)] &&
                  !view.active[static_cast<std::size_t>(m)] &&
                  !view.active[static_cast<std::size_t>(m + 1)];
    if (!silent) continue;
    // The run must begin after observed life: the previous month was active,
    // or the subscriber predates the window and went silent immediately.
    // A never-active mid-window joiner is a late starter, not a churner.
    bool preceded = (m == view.first_month)
                        ? view.has_history
                        : view.active[static_cast<std::size_t>(m - 2)] != 0;
    if (preceded) {
      ev.churned = true;
      ev.month = m;
      return ev;
    }
  }
  return ev;
}

ChurnTable label_churn(const UsageTable& usage, const SubscriberTable& subs,
                       const MonthWindow& window) {
  ChurnTable table;
  table.censor_month = window.n_months - 2;
  table.events.resize(static_cast<std::size_t>(subs.size()));
  for (int s = 0; s < subs.size(); ++s)
    table.events[static_cast<std::size_t>(s)] =
        label_churn_one(activity_view(usage, s, subs.row(s).join, window), window.n_months);
  return table;
}

Presence build_presence(const ChurnTable& churn, const SubscriberTable& subs,
                        const MonthWindow& window) {
  Presence p;
  p.first.resize(static_cast<std::size_t>(subs.size()));
  p.last.resize(static_cast<std::size_t>(subs.size()));
  for (int s = 0; s < subs.size(); ++s) {
    int join_idx = subs.row(s).join.linear() - window.start.linear() + 1;
    p.first[static_cast<std::size_t>(s)] = join_idx < 1 ? 1 : join_idx;
    const ChurnEvent& ev = churn.of(s);
    // Presence ends at the label horizon, not the window end: past it a
    // silent month cannot be told apart from an undetected churn, so the
    // every-month call test would break ties to friends who quit in the
    // tail for survivors only, skewing degree by the ego's own outcome.
    p.last[static_cast<std::size_t>(s)] =
        ev.churned ? ev.month - 1 : churn.censor_month;
  }
  return p;
}

void write_churn_csv(const std::string& path, const ChurnTable& churn,
                     const SubscriberTable& subs) {
  CsvWriter w(path, {"subscriber_id", "churn_month", "censored"});
  std::string row;
  for (int sub : subs.sorted_by_id()) {
    const ChurnEvent& ev = churn.of(sub);
    row.clear();
    row += subs.row(sub).id;
    row += ',';
    row += std::to_string(ev.month);
    row += ',';
    row += ev.churned ? '0' : '1';
    w.raw_row(row);
  }
  w.close();
}

ChurnTable read_churn_csv(const std::string& path, const SubscriberTable& subs,
                          const MonthWindow& window) {
  ChurnTable table;
  table.censor_month = window.n_months - 2;
  table.events.resize(static_cast<std::size_t>(subs.size()));
  std::vector<uint8_t> seen(static_cast<std::size_t>(subs.size()), 0);
  CsvReader r(path, {"subscriber_id", "churn_month", "censored"});
  std::vector<std::string> f;
  while (r.next(f)) {
    if (f.size() != 3)
      throw Error(path + ":" + std::to_string(r.line_number()) + ": expected 3 fields");
    int sub = subs.find(f[0]);
    if (sub < 0)
      throw Error(path + ":" + std::to_string(r.line_number()) + ": unknown subscriber " + f[0]);
    if (seen[static_cast<std::size_t>(sub)])
      throw Error(path + ":" + std::to_string(r.line_number()) + ": duplicate subscriber " + f[0]);
    seen[static_cast<std::size_t>(sub)] = 1;
    ChurnEvent ev;
    ev.month = std::stoi(f[1]);
    ev.churned = f[2] == "0";
    if (f[2] != "0" && f[2] != "1")
      throw Error(path + ":" + std::to_string(r.line_number()) + ": bad censored flag");
    if (ev.month < 1 || ev.month > window.n_months)
      throw Error(path + ":" + std::to_string(r.line_number()) + ": month out of window");
    table.events[static_cast<std::size_t>(sub)] = ev;
  }
  for (int s = 0; s < subs.size(); ++s)
    if (!seen[static_cast<std::size_t>(s)])
      throw Error(path + ": no churn row for subscriber " + subs.row(s).id);
  return table;
}

}  // namespace peerchurn
