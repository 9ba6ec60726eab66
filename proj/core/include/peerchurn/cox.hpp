#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "peerchurn/panel.hpp"

namespace peerchurn {

enum class Ties { breslow, efron };

struct CoxOptions {
  bool frailty = true;     // per-subscriber gamma frailty on the hazard
  Ties ties = Ties::breslow;  // efron is only supported without frailty
  double theta = -1.0;     // fixed frailty variance when >= 0, else profiled
  double tol = 1e-8;       // max |gradient| at convergence, standardized scale
  int max_iter = 100;
  double theta_min = 1e-4;  // profile grid bounds
  double theta_max = 16.0;
  int theta_grid = 17;
};

// Coefficients, baseline, and frailty terms are reported on the original
// covariate scale; fitting happens on standardized columns internally.
struct CoxFit {
  std::vector<std::string> names;
  std::vector<double> beta;
  std::vector<double> se;
  std::vector<double> baseline;  // h0 per panel month, 1-based via baseline[t-1]

  double theta = 0.0;            // frailty variance (0 = no frailty)
  std::vector<int> frailty_sub;  // subscriber index per frailty slot
  std::vector<double> frailty_log;  // fitted log-frailty per slot

  double loglik = 0.0;           // partial loglik at the fit
  double loglik_null = 0.0;      // partial loglik at beta = 0, no frailty
  double marginal_loglik = 0.0;  // profile marginal loglik; equals loglik when theta = 0
  double frailty_lrt = 0.0;      // 2 * (marginal_loglik - no-frailty loglik)

  int64_t n_rows = 0;
  int64_t n_events = 0;
  int n_subjects = 0;
  int iterations = 0;
  int theta_evals = 0;
  bool converged = false;
};

// Fits a Cox proportional-hazards model on the panel's month time scale.
// `covariates` name panel columns; a column that is constant within every
// risk set (a month dummy) is rejected because its coefficient is not
// identified next to the baseline.
CoxFit fit_cox(const SurvivalPanel& panel, const std::vector<std::string>& covariates,
               const CoxOptions& opt);

// Plain partial loglik at a given coefficient vector on the original scale,
// no frailty. Slow path for cross-checks.
double cox_pl_at(const SurvivalPanel& panel, const std::vector<std::string>& covariates,
                 const std::vector<double>& beta, Ties ties);

struct PlGrad {
  double value = 0.0;
  std::vector<double> grad;  // d value / d beta, original scale
};

// Penalized partial loglik and its analytic beta-gradient, evaluated with
// the log-frailty terms held at zero (theta > 0 only shifts the value by the
// penalty constant). Risk sets accumulate in shifted exponent form, so large
// linear predictors do not overflow.
PlGrad partial_loglik_and_grad(const SurvivalPanel& panel,
                               const std::vector<std::string>& covariates,
                               const std::vector<double>& beta, double theta, Ties ties);

// Per-subject martingale residuals, aligned with fit.frailty_sub when the
// fit has frailty slots and with the panel's subject order otherwise.
std::vector<double> martingale_residuals(const SurvivalPanel& panel, const CoxFit& fit);

struct RelativeHazard {
  int k = 0;
  double mean = 1.0;
  double lo = 1.0;
  double hi = 1.0;
};

// Simulated relative hazard exp(delta * k) with delta ~ N(delta_hat, se^2).
// One draw set is shared across all k, so the curves are comparable point
// by point; k = 0 is exactly 1.
std::vector<RelativeHazard> mc_relative_hazard(double delta_hat, double se,
                                               const std::vector<int>& ks, int n_draws,
                                               uint64_t seed);

double normal_two_sided_p(double z);

// Fixed-width text table of coefficients plus the frailty summary.
std::string cox_fit_table(const CoxFit& fit);

}  // namespace peerchurn
