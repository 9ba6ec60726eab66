#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "peerchurn/calmonth.hpp"

namespace peerchurn {

// One call detail record, as parsed from disk. Durations are seconds.
struct CdrRecord {
  Timestamp ts;
  std::string caller_id;
  std::string callee_id;
  int64_t duration_sec = 0;
  std::string cell_id;
  bool caller_on_net = false;
  bool callee_on_net = false;
};

struct TariffPlan {
  std::string plan_id;
  double monthly_fee = 0.0;
  double rate_on_net = 0.0;   // currency per minute
  double rate_off_net = 0.0;  // currency per minute
};

// Subscriber roster: dense index <-> id, plan assignment, join month.
// Indices are assigned in file order; all exports sort by id string.
class SubscriberTable {
 public:
  struct Row {
    std::string id;
    int plan = -1;  // index into plans()
    CalMonth join;
  };

  int add(const std::string& id, int plan, CalMonth join);
  int add_plan(const TariffPlan& p);

  int find(const std::string& id) const {  // -1 if unknown
    auto it = index_.find(id);
    return it == index_.end() ? -1 : it->second;
  }
  int find_plan(const std::string& plan_id) const {
    auto it = plan_index_.find(plan_id);
    return it == plan_index_.end() ? -1 : it->second;
  }

  const Row& row(int i) const { return rows_[static_cast<std::size_t>(i)]; }
  const TariffPlan& plan_of(int sub) const {
    return plans_[static_cast<std::size_t>(rows_[static_cast<std::size_t>(sub)].plan)];
  }
  const std::vector<Row>& rows() const { return rows_; }
  const std::vector<TariffPlan>& plans() const { return plans_; }
  int size() const { return static_cast<int>(rows_.size()); }

  // Subscriber indices ordered by id string; the deterministic export order.
  std::vector<int> sorted_by_id() const;

 private:
  std::vector<Row> rows_;
  std::vector<TariffPlan> plans_;
  std::unordered_map<std::string, int> index_;
  std::unordered_map<std::string, int> plan_index_;
};

// Per subscriber-month usage aggregate. Airtime is kept in exact integer
// seconds; minutes are derived views, rounded only at serialization.
struct SubscriberMonth {
  int sub = -1;
  int month = 0;  // 1-based window index
  int32_t n_calls_out = 0;
  int32_t n_calls_in = 0;
  int32_t n_calls_out_offnet = 0;
  int32_t n_calls_in_offnet = 0;
  int64_t airtime_out_on_sec = 0;
  int64_t airtime_out_off_sec = 0;
  int64_t airtime_in_sec = 0;
  double expenditure = 0.0;

  int64_t airtime_out_sec() const { return airtime_out_on_sec + airtime_out_off_sec; }
  double airtime_out_min() const { return static_cast<double>(airtime_out_sec()) / 60.0; }
  double airtime_in_min() const { return static_cast<double>(airtime_in_sec) / 60.0; }
  double pct_calls_out_other() const {
    return n_calls_out ? static_cast<double>(n_calls_out_offnet) / n_calls_out : 0.0;
  }
  double pct_calls_in_other() const {
    return n_calls_in ? static_cast<double>(n_calls_in_offnet) / n_calls_in : 0.0;
  }
};

// Dense (subscriber, month) usage grid; absent cells mean a silent month.
class UsageTable {
 public:
  UsageTable() = default;
  UsageTable(int n_subs, int n_months)
      : n_subs_(n_subs), n_months_(n_months),
        cells_(static_cast<std::size_t>(n_subs) * n_months, -1) {}

  SubscriberMonth& at(int sub, int month);              // creates on demand
  const SubscriberMonth* find(int sub, int month) const;  // nullptr if silent
  const std::vector<SubscriberMonth>& rows() const { return rows_; }
  std::vector<SubscriberMonth>& rows() { return rows_; }
  int n_months() const { return n_months_; }
  int n_subs() const { return n_subs_; }
  bool active(int sub, int month) const {
    const SubscriberMonth* sm = find(sub, month);
    return sm && sm->n_calls_out > 0;
  }

 private:
  int n_subs_ = 0;
  int n_months_ = 0;
  std::vector<int32_t> cells_;       // index into rows_, -1 = absent
  std::vector<SubscriberMonth> rows_;
};

// Undirected per-month call totals between on-net subscriber pairs.
class EdgeMonthTable {
 public:
  EdgeMonthTable() = default;
  explicit EdgeMonthTable(int n_months) : n_months_(n_months) {}

  void add_call(int a, int b, int month, int n = 1);
  // Total calls exchanged (both directions) in `month`; 0 when none.
  int calls_exchanged(int a, int b, int month) const;

  struct Pair {
    int a, b;  // a < b
    std::vector<int32_t> calls;  // per month, 1-based in slot month-1
  };
  const std::vector<Pair>& pairs() const { return pairs_; }
  int n_months() const { return n_months_; }

 private:
  static uint64_t key(int a, int b) {
    if (a > b) std::swap(a, b);
    return (static_cast<uint64_t>(static_cast<uint32_t>(a)) << 32) |
           static_cast<uint32_t>(b);
  }
  int n_months_ = 0;
  std::unordered_map<uint64_t, int32_t> index_;
  std::vector<Pair> pairs_;
};

// Churn status from the 3-silent-month rule. `month` is the first silent
// month when churned == true, otherwise the censoring month.
struct ChurnEvent {
  bool churned = false;
  int month = 0;
};

struct ChurnTable {
  std::vector<ChurnEvent> events;  // by subscriber index
  int censor_month = 0;            // window_len - 2

  const ChurnEvent& of(int sub) const { return events[static_cast<std::size_t>(sub)]; }
};

// Months a subscriber is treated as part of the network: from entry until
// the month before churn (a churner's first silent month is already "gone").
struct Presence {
  std::vector<int> first;  // per subscriber, 1-based; > last means never present
  std::vector<int> last;

  bool present(int sub, int month) const {
    return month >= first[static_cast<std::size_t>(sub)] &&
           month <= last[static_cast<std::size_t>(sub)];
  }
};

}  // namespace peerchurn
