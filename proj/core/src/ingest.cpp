#include "peerchurn/ingest.hpp"

#include <charconv>
#include <cmath>

#include "peerchurn/csv.hpp"
#include "peerchurn/error.hpp"

namespace peerchurn {

namespace {

bool parse_i64(const std::string& s, int64_t& out) {
  if (s.empty()) return false;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && p == s.data() + s.size();
}

bool parse_f64(const std::string& s, double& out) {
  if (s.empty()) return false;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && p == s.data() + s.size();
}

bool parse_bool01(const std::string& s, bool& out) {
  if (s == "0") { out = false; return true; }
  if (s == "1") { out = true; return true; }
  return false;
}

}  // namespace

const char* reject_reason_name(RejectReason r) {
  switch (r) {
    case RejectReason::field_count: return "field_count";
    case RejectReason::bad_timestamp: return "bad_timestamp";
    case RejectReason::out_of_window: return "out_of_window";
    case RejectReason::bad_duration: return "bad_duration";
    case RejectReason::negative_duration: return "negative_duration";
    case RejectReason::self_call: return "self_call";
    case RejectReason::bad_boolean: return "bad_boolean";
    default: return "unknown";
  }
}

void RejectReport::reject(long line, RejectReason reason) {
  ++n_rejected;
  ++by_reason[static_cast<int>(reason)];
  if (sample.size() < max_sample) sample.push_back(Entry{line, reason});
}

RejectReport parse_cdr_file(const std::string& path, const MonthWindow& window,
                            const std::function<void(const CdrRecord&)>& sink) {
  CsvReader reader(path, {"timestamp", "caller_id", "callee_id", "duration_sec", "cell_id",
                          "caller_on_net", "callee_on_net"});
  RejectReport report;
  std::vector<std::string> f;
  CdrRecord rec;
  while (reader.next(f)) {
    long line = reader.line_number();
    if (f.size() != 7) {
      report.reject(line, RejectReason::field_count);
      continue;
    }
    auto ts = parse_timestamp(f[0]);
    if (!ts) {
      report.reject(line, RejectReason::bad_timestamp);
      continue;
    }
    if (window.index_of(ts->ym) == 0) {
      report.reject(line, RejectReason::out_of_window);
      continue;
    }
    int64_t dur;
    if (!parse_i64(f[3], dur)) {
      report.reject(line, RejectReason::bad_duration);
      continue;
    }
    if (dur < 0) {
      report.reject(line, RejectReason::negative_duration);
      continue;
    }
    if (f[1] == f[2]) {
      report.reject(line, RejectReason::self_call);
      continue;
    }
    bool con, cen;
    if (!parse_bool01(f[5], con) || !parse_bool01(f[6], cen)) {
      report.reject(line, RejectReason::bad_boolean);
      continue;
    }
    rec.ts = *ts;
    rec.caller_id = f[1];
    rec.callee_id = f[2];
    rec.duration_sec = dur;
    rec.cell_id = f[4];
    rec.caller_on_net = con;
    rec.callee_on_net = cen;
    ++report.n_accepted;
    sink(rec);
  }
  return report;
}

void parse_tariff_file(const std::string& path, SubscriberTable& table) {
  CsvReader reader(path, {"plan_id", "monthly_fee", "rate_on_net", "rate_off_net"});
  std::vector<std::string> f;
  while (reader.next(f)) {
    if (f.size() != 4)
      throw Error(path + ":" + std::to_string(reader.line_number()) + ": expected 4 fields");
    TariffPlan p;
    p.plan_id = f[0];
    if (!parse_f64(f[1], p.monthly_fee) || !parse_f64(f[2], p.rate_on_net) ||
        !parse_f64(f[3], p.rate_off_net))
      throw Error(path + ":" + std::to_string(reader.line_number()) + ": bad number");
    if (p.monthly_fee < 0 || p.rate_on_net < 0 || p.rate_off_net < 0)
      throw Error(path + ":" + std::to_string(reader.line_number()) +
                  ": negative fee or rate in plan " + p.plan_id);
    table.add_plan(p);
  }
}

void parse_subscriber_file(const std::string& path, SubscriberTable& table) {
  CsvReader reader(path, {"subscriber_id", "plan_id", "join_month"});
  std::vector<std::string> f;
  while (reader.next(f)) {
    if (f.size() != 3)
      throw Error(path + ":" + std::to_string(reader.line_number()) + ": expected 3 fields");
    int plan = table.find_plan(f[1]);
    if (plan < 0)
      throw Error(path + ":" + std::to_string(reader.line_number()) + ": unknown plan_id " +
                  f[1] + " for subscriber " + f[0]);
    auto join = parse_cal_month(f[2]);
    if (!join)
      throw Error(path + ":" + std::to_string(reader.line_number()) + ": bad join_month " +
                  f[2]);
    table.add(f[0], plan, *join);
  }
}

double compute_expenditure(const SubscriberMonth& m, const TariffPlan& plan) {
  return plan.monthly_fee +
         plan.rate_on_net * (static_cast<double>(m.airtime_out_on_sec) / 60.0) +
         plan.rate_off_net * (static_cast<double>(m.airtime_out_off_sec) / 60.0);
}

MonthlyAggregator::MonthlyAggregator(const SubscriberTable& subs, const MonthWindow& window)
    : subs_(subs), window_(window), usage_(subs.size(), window.n_months),
      edges_(window.n_months) {}

void MonthlyAggregator::add(const CdrRecord& rec) {
  int month = window_.index_of(rec.ts.ym);
  if (month == 0) return;  // parse layer already rejects; defensive for direct feeds
  int caller = -1, callee = -1;
  if (rec.caller_on_net) {
    caller = subs_.find(rec.caller_id);
    if (caller < 0)
      throw Error("on-net subscriber " + rec.caller_id + " has no tariff plan assignment");
  }
  if (rec.callee_on_net) {
    callee = subs_.find(rec.callee_id);
    if (callee < 0)
      throw Error("on-net subscriber " + rec.callee_id + " has no tariff plan assignment");
  }
  if (caller >= 0) {
    SubscriberMonth& sm = usage_.at(caller, month);
    sm.n_calls_out += 1;
    if (rec.callee_on_net) {
      sm.airtime_out_on_sec += rec.duration_sec;
    } else {
      sm.n_calls_out_offnet += 1;
      sm.airtime_out_off_sec += rec.duration_sec;
    }
  }
  if (callee >= 0) {
    SubscriberMonth& sm = usage_.at(callee, month);
    sm.n_calls_in += 1;
    sm.airtime_in_sec += rec.duration_sec;
    if (!rec.caller_on_net) sm.n_calls_in_offnet += 1;
  }
  if (caller >= 0 && callee >= 0 && caller != callee) edges_.add_call(caller, callee, month);
}

void MonthlyAggregator::finish(UsageTable& usage_out, EdgeMonthTable& edges_out) {
  if (finished_) throw Error("MonthlyAggregator::finish called twice");
  finished_ = true;
  for (auto& row : usage_.rows())
    row.expenditure = compute_expenditure(row, subs_.plan_of(row.sub));
  usage_out = std::move(usage_);
  edges_out = std::move(edges_);
}

std::vector<std::string> usage_csv_header() {
  return {"subscriber_id", "month",          "n_calls_out",     "n_calls_in",
          "airtime_out",   "airtime_in",     "expenditure",     "pct_calls_out_other",
          "pct_calls_in_other", "airtime_out_on_net", "airtime_out_off_net"};
}

void write_usage_csv(const std::string& path, const UsageTable& usage,
                     const SubscriberTable& subs) {
  CsvWriter w(path, usage_csv_header());
  std::string row;
  for (int sub : subs.sorted_by_id()) {
    for (int m = 1; m <= usage.n_months(); ++m) {
      const SubscriberMonth* sm = usage.find(sub, m);
      if (!sm) continue;
      if (sm->n_calls_out == 0 && sm->n_calls_in == 0) continue;
      row.clear();
      row += subs.row(sub).id;
      row += ',';
      row += std::to_string(m);
      row += ',';
      row += std::to_string(sm->n_calls_out);
      row += ',';
      row += std::to_string(sm->n_calls_in);
      row += ',';
      row += fmt_minutes_2dp(sm->airtime_out_sec());
      row += ',';
      row += fmt_minutes_2dp(sm->airtime_in_sec);
      row += ',';
      row += fmt_fixed(sm->expenditure, 4);
      row += ',';
      row += fmt_fixed(sm->pct_calls_out_other(), 6);
      row += ',';
      row += fmt_fixed(sm->pct_calls_in_other(), 6);
      row += ',';
      row += fmt_minutes_2dp(sm->airtime_out_on_sec);
      row += ',';
      row += fmt_minutes_2dp(sm->airtime_out_off_sec);
      w.raw_row(row);
    }
  }
  w.close();
}

UsageTable read_usage_csv(const std::string& path, const SubscriberTable& subs,
                          const MonthWindow& window) {
  CsvReader reader(path, usage_csv_header());
  UsageTable usage(subs.size(), window.n_months);
  std::vector<std::string> f;
  auto minutes_to_sec = [](const std::string& s, const std::string& where) {
    double minutes;
    if (!parse_f64(s, minutes)) throw Error(where + ": bad airtime " + s);
    return static_cast<int64_t>(std::llround(minutes * 60.0));
  };
  while (reader.next(f)) {
    std::string where = path + ":" + std::to_string(reader.line_number());
    if (f.size() != 11) throw Error(where + ": expected 11 fields");
    int sub = subs.find(f[0]);
    if (sub < 0) throw Error(where + ": unknown subscriber " + f[0]);
    int64_t month, n_out, n_in;
    if (!parse_i64(f[1], month) || month < 1 || month > window.n_months)
      throw Error(where + ": bad month " + f[1]);
    if (!parse_i64(f[2], n_out) || !parse_i64(f[3], n_in))
      throw Error(where + ": bad call count");
    SubscriberMonth& sm = usage.at(sub, static_cast<int>(month));
    sm.n_calls_out = static_cast<int32_t>(n_out);
    sm.n_calls_in = static_cast<int32_t>(n_in);
    sm.airtime_in_sec = minutes_to_sec(f[5], where);
    double exp_v, pct_out, pct_in;
    if (!parse_f64(f[6], exp_v) || !parse_f64(f[7], pct_out) || !parse_f64(f[8], pct_in))
      throw Error(where + ": bad numeric field");
    sm.expenditure = exp_v;
    sm.n_calls_out_offnet = static_cast<int32_t>(std::llround(pct_out * n_out));
    sm.n_calls_in_offnet = static_cast<int32_t>(std::llround(pct_in * n_in));
    sm.airtime_out_on_sec = minutes_to_sec(f[9], where);
    sm.airtime_out_off_sec = minutes_to_sec(f[10], where);
    (void)f[4];
  }
  return usage;
}

}  // namespace peerchurn
