#pragma once

#include <array>
#include <functional>
#include <string>
#include <vector>

#include "peerchurn/types.hpp"

namespace peerchurn {

// Why a CDR row was rejected. Rejections are per-record and reported, never
// silently dropped; structural file problems (missing file, wrong header)
// throw instead.
enum class RejectReason : int {
  field_count = 0,
  bad_timestamp,
  out_of_window,
  bad_duration,
  negative_duration,
  self_call,
  bad_boolean,
  COUNT
};

const char* reject_reason_name(RejectReason r);

struct RejectReport {
  struct Entry {
    long line;
    RejectReason reason;
  };
  int64_t n_accepted = 0;
  int64_t n_rejected = 0;
  std::array<int64_t, static_cast<int>(RejectReason::COUNT)> by_reason{};
  std::vector<Entry> sample;  // first `max_sample` offending lines
  std::size_t max_sample = 100;

  void reject(long line, RejectReason reason);
};

// Streams records from a CDR file through `sink`, validating row-by-row.
// Expected header: timestamp,caller_id,callee_id,duration_sec,cell_id,
// caller_on_net,callee_on_net. Timestamps are minute-precision ISO-8601.
RejectReport parse_cdr_file(const std::string& path, const MonthWindow& window,
                            const std::function<void(const CdrRecord&)>& sink);

// subscriber_id,plan_id,join_month — every plan_id must exist in `table`
// already (load tariffs first). Malformed rows throw with line numbers.
void parse_subscriber_file(const std::string& path, SubscriberTable& table);

// plan_id,monthly_fee,rate_on_net,rate_off_net
void parse_tariff_file(const std::string& path, SubscriberTable& table);

// monthly_fee + rate_on_net * on-net outbound minutes + rate_off_net *
// off-net outbound minutes. Outbound only: the receiving party pays nothing.
double compute_expenditure(const SubscriberMonth& m, const TariffPlan& plan);

// Accumulates per-subscriber-month usage and per-pair-month call counts from
// a record stream. On-net ids must resolve in the roster; unknown on-net ids
// are a hard error naming the subscriber (no tariff plan assignment).
class MonthlyAggregator {
 public:
  MonthlyAggregator(const SubscriberTable& subs, const MonthWindow& window);
  void add(const CdrRecord& rec);
  // Fills expenditures and returns the tables. Call once.
  void finish(UsageTable& usage_out, EdgeMonthTable& edges_out);

 private:
  const SubscriberTable& subs_;
  MonthWindow window_;
  UsageTable usage_;
  EdgeMonthTable edges_;
  bool finished_ = false;
};

// Writes the usage grid in deterministic (id, month) order. Airtime columns
// are minutes with two decimals (half-up); counts are integers.
void write_usage_csv(const std::string& path, const UsageTable& usage,
                     const SubscriberTable& subs);
// Reads a file written by write_usage_csv back into a grid.
UsageTable read_usage_csv(const std::string& path, const SubscriberTable& subs,
                          const MonthWindow& window);

std::vector<std::string> usage_csv_header();

}  // namespace peerchurn
