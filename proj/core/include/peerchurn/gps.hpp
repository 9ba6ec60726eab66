#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "peerchurn/panel.hpp"

namespace peerchurn {

// ln E[T|X] = gamma' [1, X]; fitted by Newton on the exponential loglik
// sum_i [-eta_i - T_i * exp(-eta_i)], which is concave, so every accepted
// step increases it.
struct TreatmentModel {
  std::vector<std::string> names;  // "(intercept)" then covariate names
  std::vector<double> gamma;       // original scale
  std::vector<double> mu;          // fitted mean per cross-section row
  double loglik = 0.0;
  int iterations = 0;
  bool converged = false;
};

TreatmentModel fit_treatment_model(const CrossSection& cs, int max_iter = 50,
                                   double tol = 1e-8);

double treatment_mu(const TreatmentModel& tm, const CrossSection& cs, std::size_t row);
double gps_density(double t, double mu);  // (1/mu) exp(-t/mu)

// Propensity density at each row's own (T, X), recomputed from gamma every
// time so cached values can never go stale.
std::vector<double> compute_gps(const TreatmentModel& tm, const CrossSection& cs);

// Treatment-intensity groups: 0 for T <= 1, 1 for T in (1,3], 2 for T > 3.
int treatment_group(double t);

struct BalanceCell {
  std::string covariate;
  int group = 0;  // 0..2
  double t_before = 0.0;
  double t_after = 0.0;
  bool flagged_before = false;  // |t| > 1.96
  bool flagged_after = false;
};

struct BalanceReport {
  std::vector<BalanceCell> cells;  // covariate-major, group-minor
  std::vector<std::string> notes;
  int n_blocks = 5;
};

// Before: two-sample t of each covariate, group vs complement. After: all
// rows are blocked into score quintiles of gps_density(median group T, X),
// and the per-block mean differences combine into one blocked t with pooled
// within-block variance. Blocks missing either side merge into a neighbour.
BalanceReport balance_test(const CrossSection& cs, const TreatmentModel& tm,
                           int n_blocks = 5);

struct GpsOptions {
  std::vector<double> ts = {0, 1, 2, 3, 4, 5};
  int n_boot = 100;
  uint64_t seed = 1;
  int threads = 1;
  double max_fail = 0.10;  // bootstrap failure budget
  bool probit = false;     // probit outcome link instead of least squares
  int max_iter = 50;
  double tol = 1e-8;
};

struct DoseResponse {
  TreatmentModel treatment;
  std::vector<double> alpha;  // outcome coefficients on {1, T, T^2, R, R^2, T*R}
  std::vector<double> ts;
  std::vector<double> drf;
  std::vector<double> mte;     // drf(t) - drf(0); exactly 0 at t = 0
  std::vector<double> mte_lo;  // empty until bootstrap_mte runs
  std::vector<double> mte_hi;
  int boot_total = 0;
  int boot_failed = 0;
  bool probit = false;
  std::vector<std::string> notes;
};

DoseResponse fit_dose_response(const CrossSection& cs, const GpsOptions& opt);

// Percentile 2.5/97.5 bands from resampling subscribers with replacement,
// refitting both models per replicate. Replicate seeds derive from
// opt.seed + replicate index, so thread count never changes the result.
void bootstrap_mte(const CrossSection& cs, const GpsOptions& opt, DoseResponse& dr);

// mean(Y | T > 3) - mean(Y | T = 0): the unadjusted churn-rate gap between
// the high-exposure group and the zero-exposure group.
double naive_treated_gap(const CrossSection& cs);

std::string balance_table(const BalanceReport& report);
std::string dose_response_table(const DoseResponse& dr);

}  // namespace peerchurn
