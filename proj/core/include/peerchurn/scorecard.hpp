#pragma once

#include <string>

#include "peerchurn/cox.hpp"
#include "peerchurn/gps.hpp"
#include "peerchurn/synth.hpp"

namespace peerchurn {

// Estimates lined up against a synthetic world's ground truth. The hazard
// block always fills; the dose-response block only when a GPS run is added.
struct Scorecard {
  double delta_true = 0.0;
  double delta_hat = 0.0;
  double se = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  bool ci_covers = false;
  // Strict sign match for nonzero truth; a zero truth counts as agreement
  // when the confidence interval straddles zero.
  bool sign_agrees = false;
  double theta = 0.0;
  int n_churned = 0;
  int n_contagion = 0;

  bool has_gps = false;
  double naive_gap = 0.0;
  double mte1 = 0.0;
  double mte1_lo = 0.0;
  double mte1_hi = 0.0;
  bool mte1_band_has_zero = false;
};

// Throws when `exposure` is not among the fitted covariates.
Scorecard score_world(const GroundTruth& truth, const CoxFit& fit,
                      const std::string& exposure = "frd_churn");
void add_dose_response(Scorecard& card, const DoseResponse& dr, double naive_gap);

// key=value lines, one per field, stable order.
std::string scorecard_kv(const Scorecard& card);

}  // namespace peerchurn
