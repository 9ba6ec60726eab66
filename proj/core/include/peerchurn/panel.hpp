#pragma once

#include <string>
#include <vector>

#include "peerchurn/churn.hpp"
#include "peerchurn/graph.hpp"
#include "peerchurn/types.hpp"

namespace peerchurn {

// Counting-process survival panel over the risk window 1..n_months-3.
// Row t covers (t-1, t]; time-varying covariates are the previous month's
// values (a subscriber's first row reuses its own month, the month-0
// backfill); frd_churn is the cumulative churner-friend count through the
// lag month. Month dummies are stored for export and cross-checks but are
// not part of any fit on this time scale: with analysis time = panel month
// each risk set is a single month, so the dummies are constant within every
// risk set and their coefficients vanish from the partial likelihood (the
// baseline hazard already carries one level per month).
struct SurvivalPanel {
  std::vector<std::string> covariate_names;  // columns of x, excl. dummies
  std::vector<int> sub;                      // subscriber index per row
  std::vector<int> month;                    // t = stop; start = t-1
  std::vector<uint8_t> event;
  std::vector<double> x;  // row-major, covariate_names.size() per row
  int risk_months = 0;

  std::size_t n_rows() const { return month.size(); }
  std::size_t n_cov() const { return covariate_names.size(); }
  double value(std::size_t row, std::size_t col) const { return x[row * n_cov() + col]; }
  int column(const std::string& name) const;  // -1 if absent
  int64_t total_events() const;
};

struct PanelOptions {
  int threshold = 1;             // churner-friend call threshold
  bool lag_form_cumulative = true;  // false: previous-month count only
};

SurvivalPanel build_survival_panel(const UsageTable& usage, const SubscriberTable& subs,
                                   const MonthWindow& window, const ChurnTable& churn,
                                   const FriendshipGraph& graph,
                                   const ChurnerFriendCounts& counts,
                                   const std::vector<int>& egos, const PanelOptions& opt);

// Cross-section for the dose-response stage. T = churner friends accumulated
// over the treatment-exposure months; Y = churned during the post-treatment
// months; covariates are exposure-period averages. Egos churning during the
// exposure period are excluded (their treatment is truncated by their own
// exit).
struct CrossSection {
  std::vector<std::string> covariate_names;
  std::vector<int> sub;
  std::vector<double> treatment;
  std::vector<uint8_t> outcome;
  std::vector<double> x;  // row-major

  std::size_t n_rows() const { return treatment.size(); }
  std::size_t n_cov() const { return covariate_names.size(); }
  double value(std::size_t row, std::size_t col) const { return x[row * n_cov() + col]; }
  int excluded_tep_churners = 0;
  int excluded_unobserved = 0;
};

struct SplitSpec {
  std::vector<int> tep;  // treatment-exposure months
  std::vector<int> ptp;  // post-treatment months
};

// Throws when the split is malformed: overlapping, unordered, gapped within
// a period, or outside the risk window.
void validate_split(const SplitSpec& split, int risk_months);

CrossSection build_gps_cross_section(const UsageTable& usage, const SubscriberTable& subs,
                                     const MonthWindow& window, const ChurnTable& churn,
                                     const FriendshipGraph& graph,
                                     const ChurnerFriendCounts& counts,
                                     const std::vector<int>& egos, int threshold,
                                     const SplitSpec& split);

void write_panel_csv(const std::string& path, const SurvivalPanel& panel,
                     const SubscriberTable& subs);
void write_cross_section_csv(const std::string& path, const CrossSection& cs,
                             const SubscriberTable& subs);
// Inverses of the writers. Covariate names come from the header; risk_months
// from the month-dummy columns. Exclusion counters are build-time statistics
// and read back as zero.
SurvivalPanel read_panel_csv(const std::string& path, const SubscriberTable& subs);
CrossSection read_cross_section_csv(const std::string& path, const SubscriberTable& subs);

}  // namespace peerchurn
