#include "peerchurn/panel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>

#include "peerchurn/csv.hpp"
#include "peerchurn/error.hpp"
#include "peerchurn/ingest.hpp"

namespace peerchurn {

int SurvivalPanel::column(const std::string& name) const {
  for (std::size_t i = 0; i < covariate_names.size(); ++i)
    if (covariate_names[i] == name) return static_cast<int>(i);
  return -1;
}

int64_t SurvivalPanel::total_events() const {
  int64_t n = 0;
  for (uint8_t e : event) n += e;
  return n;
}

namespace {

struct LagUsage {
  double n_calls = 0.0;
  double airtime_min = 0.0;
  double expenditure = 0.0;
};

// Usage for a present-but-possibly-silent month: a silent month has zero
// calls and airtime but still incurs the plan's monthly fee.
LagUsage usage_at(const UsageTable& usage, const SubscriberTable& subs, int sub, int month) {
  LagUsage u;
  const SubscriberMonth* sm = usage.find(sub, month);
  if (sm) {
    u.n_calls = sm->n_calls_out;
    u.airtime_min = sm->airtime_out_min();
    u.expenditure = sm->expenditure;
  } else {
    u.expenditure = subs.plan_of(sub).monthly_fee;
  }
  return u;
}

}  // namespace

SurvivalPanel build_survival_panel(const UsageTable& usage, const SubscriberTable& subs,
                                   const MonthWindow& window, const ChurnTable& churn,
                                   const FriendshipGraph& graph,
                                   const ChurnerFriendCounts& counts,
                                   const std::vector<int>& egos, const PanelOptions& opt) {
  int risk_months = window.n_months - 3;
  if (risk_months < 1) throw Error("window too short for a survival panel");

  SurvivalPanel p;
  p.risk_months = risk_months;
  p.covariate_names = {"frd_churn", "n_calls", "n_calls_sq", "airtime",
                       "airtime_sq", "expenditure", "frd"};
  for (int m = 1; m <= risk_months; ++m)
    p.covariate_names.push_back("m" + std::to_string(m));
  std::size_t ncov = p.covariate_names.size();

  for (int ego : egos) {
    int join_idx = subs.row(ego).join.linear() - window.start.linear() + 1;
    // Delayed entry for in-window joiners: a subscriber enters the risk set
    // once two months of history exist, the point where ties to them become
    // detectable and lagged usage is observable. Earlier months would sit in
    // the risk set with exposure that cannot be measured.
    int first = join_idx < 1 ? 1 : join_idx + 2;
    if (first > risk_months) continue;
    const ChurnEvent& ev = churn.of(ego);
    int last = risk_months;
    bool has_event = false;
    if (ev.churned && ev.month <= risk_months) {
      last = ev.month;
      has_event = true;
    }
    for (int t = first; t <= last; ++t) {
      int lag = (t == 1) ? 1 : t - 1;  // month 1 has no prior month to lag to
      LagUsage u = usage_at(usage, subs, ego, lag);
      double fc = opt.lag_form_cumulative
                      ? counts.cumulative(ego, lag, opt.threshold)
                      : counts.count(ego, lag, opt.threshold);
      p.sub.push_back(ego);
      p.month.push_back(t);
      p.event.push_back(has_event && t == last ? 1 : 0);
      std::size_t base = p.x.size();
      p.x.resize(base + ncov, 0.0);
      p.x[base + 0] = fc;
      p.x[base + 1] = u.n_calls;
      p.x[base + 2] = u.n_calls * u.n_calls;
      p.x[base + 3] = u.airtime_min;
      p.x[base + 4] = u.airtime_min * u.airtime_min;
      p.x[base + 5] = u.expenditure;
      p.x[base + 6] = graph.frd(ego);
      p.x[base + 6 + static_cast<std::size_t>(t)] = 1.0;  // month dummy m<t>
    }
  }
  return p;
}

void validate_split(const SplitSpec& split, int risk_months) {
  if (split.tep.empty() || split.ptp.empty())
    throw Error("split must name at least one exposure and one outcome month");
  auto check_sorted = [&](const std::vector<int>& v, const char* what) {
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (v[i] < 1 || v[i] > risk_months)
        throw Error(std::string(what) + " month outside risk window");
      if (i && v[i] != v[i - 1] + 1)
        throw Error(std::string(what) + " months must be consecutive");
    }
  };
  check_sorted(split.tep, "exposure");
  check_sorted(split.ptp, "outcome");
  if (split.tep.back() >= split.ptp.front())
    throw Error("exposure months must end before outcome months begin");
}

CrossSection build_gps_cross_section(const UsageTable& usage, const SubscriberTable& subs,
                                     const MonthWindow& window, const ChurnTable& churn,
                                     const FriendshipGraph& graph,
                                     const ChurnerFriendCounts& counts,
                                     const std::vector<int>& egos, int threshold,
                                     const SplitSpec& split) {
  int risk_months = window.n_months - 3;
  validate_split(split, risk_months);
  int tep_end = split.tep.back();

  CrossSection cs;
  // Volume covariates enter on the log scale: exposure opportunity scales
  // multiplicatively with degree and usage, so the exponential treatment
  // model's linear index is that much closer to the truth.
  cs.covariate_names = {"tenure", "log_n_calls", "log_expenditure", "log_frd",
                        "pct_calls_out_other"};
  std::size_t ncov = cs.covariate_names.size();

  for (int ego : egos) {
    const ChurnEvent& ev = churn.of(ego);
    if (ev.churned && ev.month <= tep_end) {
      ++cs.excluded_tep_churners;
      continue;
    }
    int join_idx = subs.row(ego).join.linear() - window.start.linear() + 1;
    int first = join_idx < 1 ? 1 : join_idx;
    if (first > tep_end) {
      ++cs.excluded_unobserved;
      continue;
    }
    double t_total = 0.0;
    double n_calls = 0.0, expenditure = 0.0, pct_other = 0.0;
    int n_obs = 0;
    for (int m : split.tep) {
      if (m < first) continue;
      t_total += counts.count(ego, m, threshold);
      const SubscriberMonth* sm = usage.find(ego, m);
      if (sm) {
        n_calls += sm->n_calls_out;
        expenditure += sm->expenditure;
        pct_other += sm->pct_calls_out_other();
      } else {
        expenditure += subs.plan_of(ego).monthly_fee;
      }
      ++n_obs;
    }
    if (n_obs == 0) {
      ++cs.excluded_unobserved;
      continue;
    }
    bool y = false;
    if (ev.churned)
      y = std::find(split.ptp.begin(), split.ptp.end(), ev.month) != split.ptp.end();
    cs.sub.push_back(ego);
    cs.treatment.push_back(t_total);
    cs.outcome.push_back(y ? 1 : 0);
    std::size_t base = cs.x.size();
    cs.x.resize(base + ncov, 0.0);
    cs.x[base + 0] = tenure_at(subs.row(ego).join, window, tep_end);
    cs.x[base + 1] = std::log1p(n_calls / n_obs);
    cs.x[base + 2] = std::log1p(expenditure / n_obs);
    cs.x[base + 3] = std::log1p(graph.frd(ego));
    cs.x[base + 4] = pct_other / n_obs;
  }
  return cs;
}

void write_panel_csv(const std::string& path, const SurvivalPanel& panel,
                     const SubscriberTable& subs) {
  std::vector<std::string> header = {"subscriber_id", "t", "start", "stop", "event"};
  for (const auto& n : panel.covariate_names) header.push_back(n);
  CsvWriter w(path, header);

  // Deterministic order: by id string, then month.
  std::vector<std::size_t> order(panel.n_rows());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
    const std::string& a = subs.row(panel.sub[i]).id;
    const std::string& b = subs.row(panel.sub[j]).id;
    if (a != b) return a < b;
    return panel.month[i] < panel.month[j];
  });
  std::string row;
  for (std::size_t i : order) {
    row.clear();
    row += subs.row(panel.sub[i]).id;
    row += ',';
    row += std::to_string(panel.month[i]);
    row += ',';
    row += std::to_string(panel.month[i] - 1);
    row += ',';
    row += std::to_string(panel.month[i]);
    row += ',';
    row += std::to_string(static_cast<int>(panel.event[i]));
    for (std::size_t c = 0; c < panel.n_cov(); ++c) {
      row += ',';
      row += fmt_double(panel.value(i, c));
    }
    w.raw_row(row);
  }
  w.close();
}

void write_cross_section_csv(const std::string& path, const CrossSection& cs,
                             const SubscriberTable& subs) {
  std::vector<std::string> header = {"subscriber_id", "treatment", "outcome"};
  for (const auto& n : cs.covariate_names) header.push_back(n);
  CsvWriter w(path, header);
  std::vector<std::size_t> order(cs.n_rows());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
    return subs.row(cs.sub[i]).id < subs.row(cs.sub[j]).id;
  });
  std::string row;
  for (std::size_t i : order) {
    row.clear();
    row += subs.row(cs.sub[i]).id;
    row += ',';
    row += fmt_double(cs.treatment[i]);
    row += ',';
    row += std::to_string(static_cast<int>(cs.outcome[i]));
    for (std::size_t c = 0; c < cs.n_cov(); ++c) {
      row += ',';
      row += fmt_double(cs.value(i, c));
    }
    w.raw_row(row);
  }
  w.close();
}

namespace {

double field_f64(const std::string& s, const std::string& path, long line) {
  char* end = nullptr;
  double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0')
    throw Error(path + ":" + std::to_string(line) + ": not a number: '" + s + "'");
  return v;
}

int field_i32(const std::string& s, const std::string& path, long line) {
  double v = field_f64(s, path, line);
  int i = static_cast<int>(v);
  if (static_cast<double>(i) != v)
    throw Error(path + ":" + std::to_string(line) + ": not an integer: '" + s + "'");
  return i;
}

bool month_dummy_name(const std::string& s) {
  if (s.size() < 2 || s[0] != 'm') return false;
  for (std::size_t i = 1; i < s.size(); ++i)
    if (s[i] < '0' || s[i] > '9') return false;
  return true;
}

}  // namespace

SurvivalPanel read_panel_csv(const std::string& path, const SubscriberTable& subs) {
  CsvReader r(path);
  const std::vector<std::string> prefix = {"subscriber_id", "t", "start", "stop", "event"};
  const auto& h = r.header();
  if (h.size() < prefix.size() + 1 ||
      !std::equal(prefix.begin(), prefix.end(), h.begin()))
    throw Error("schema mismatch in " + path + ": not a survival panel file");
  SurvivalPanel panel;
  panel.covariate_names.assign(h.begin() + static_cast<long>(prefix.size()), h.end());
  for (const auto& name : panel.covariate_names)
    if (month_dummy_name(name)) ++panel.risk_months;
  std::vector<std::string> f;
  while (r.next(f)) {
    if (f.size() != h.size())
      throw Error(path + ":" + std::to_string(r.line_number()) + ": wrong field count");
    int sub = subs.find(f[0]);
    if (sub < 0)
      throw Error(path + ":" + std::to_string(r.line_number()) + ": unknown subscriber " + f[0]);
    int t = field_i32(f[1], path, r.line_number());
    if (field_i32(f[2], path, r.line_number()) != t - 1 ||
        field_i32(f[3], path, r.line_number()) != t)
      throw Error(path + ":" + std::to_string(r.line_number()) + ": start/stop do not bracket t");
    int ev = field_i32(f[4], path, r.line_number());
    if (ev != 0 && ev != 1)
      throw Error(path + ":" + std::to_string(r.line_number()) + ": bad event flag");
    panel.sub.push_back(sub);
    panel.month.push_back(t);
    panel.event.push_back(static_cast<uint8_t>(ev));
    for (std::size_t c = 0; c < panel.covariate_names.size(); ++c)
      panel.x.push_back(field_f64(f[prefix.size() + c], path, r.line_number()));
  }
  if (panel.risk_months == 0)
    for (int t : panel.month) panel.risk_months = std::max(panel.risk_months, t);
  return panel;
}

CrossSection read_cross_section_csv(const std::string& path, const SubscriberTable& subs) {
  CsvReader r(path);
  const std::vector<std::string> prefix = {"subscriber_id", "treatment", "outcome"};
  const auto& h = r.header();
  if (h.size() < prefix.size() + 1 ||
      !std::equal(prefix.begin(), prefix.end(), h.begin()))
    throw Error("schema mismatch in " + path + ": not a cross-section file");
  CrossSection cs;
  cs.covariate_names.assign(h.begin() + static_cast<long>(prefix.size()), h.end());
  std::vector<std::string> f;
  while (r.next(f)) {
    if (f.size() != h.size())
      throw Error(path + ":" + std::to_string(r.line_number()) + ": wrong field count");
    int sub = subs.find(f[0]);
    if (sub < 0)
      throw Error(path + ":" + std::to_string(r.line_number()) + ": unknown subscriber " + f[0]);
    int y = field_i32(f[2], path, r.line_number());
    if (y != 0 && y != 1)
      throw Error(path + ":" + std::to_string(r.line_number()) + ": bad outcome flag");
    cs.sub.push_back(sub);
    cs.treatment.push_back(field_f64(f[1], path, r.line_number()));
    cs.outcome.push_back(static_cast<uint8_t>(y));
    for (std::size_t c = 0; c < cs.covariate_names.size(); ++c)
      cs.x.push_back(field_f64(f[prefix.size() + c], path, r.line_number()));
  }
  return cs;
}

}  // namespace peerchurn
