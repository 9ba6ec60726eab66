#include "peerchurn/scorecard.hpp"

#include <cmath>

#include "peerchurn/csv.hpp"
#include "peerchurn/error.hpp"

namespace peerchurn {

Scorecard score_world(const GroundTruth& truth, const CoxFit& fit,
                      const std::string& exposure) {
  int idx = -1;
  for (std::size_t i = 0; i < fit.names.size(); ++i)
    if (fit.names[i] == exposure) idx = static_cast<int>(i);
  if (idx < 0) throw Error("scorecard: fit has no covariate named " + exposure);

  Scorecard c;
  c.delta_true = truth.delta;
  c.delta_hat = fit.beta[static_cast<std::size_t>(idx)];
  c.se = fit.se[static_cast<std::size_t>(idx)];
  c.ci_lo = c.delta_hat - 1.959963984540054 * c.se;
  c.ci_hi = c.delta_hat + 1.959963984540054 * c.se;
  c.ci_covers = c.delta_true >= c.ci_lo && c.delta_true <= c.ci_hi;
  if (c.delta_true > 0.0)
    c.sign_agrees = c.delta_hat > 0.0;
  else if (c.delta_true < 0.0)
    c.sign_agrees = c.delta_hat < 0.0;
  else
    c.sign_agrees = c.ci_lo <= 0.0 && 0.0 <= c.ci_hi;
  c.theta = fit.theta;
  c.n_churned = truth.n_churned;
  c.n_contagion = truth.n_contagion;
  return c;
}

void add_dose_response(Scorecard& card, const DoseResponse& dr, double naive_gap) {
  int idx = -1;
  for (std::size_t i = 0; i < dr.ts.size(); ++i)
    if (dr.ts[i] == 1.0) idx = static_cast<int>(i);
  if (idx < 0) throw Error("scorecard: dose-response grid has no t = 1 point");
  card.has_gps = true;
  card.naive_gap = naive_gap;
  card.mte1 = dr.mte[static_cast<std::size_t>(idx)];
  card.mte1_lo = dr.mte_lo[static_cast<std::size_t>(idx)];
  card.mte1_hi = dr.mte_hi[static_cast<std::size_t>(idx)];
  card.mte1_band_has_zero = card.mte1_lo <= 0.0 && 0.0 <= card.mte1_hi;
}

std::string scorecard_kv(const Scorecard& c) {
  std::string s;
  auto kv = [&s](const char* k, const std::string& v) {
    s += k;
    s += '=';
    s += v;
    s += '\n';
  };
  kv("delta_true", fmt_double(c.delta_true));
  kv("delta_hat", fmt_double(c.delta_hat));
  kv("se", fmt_double(c.se));
  kv("ci_lo", fmt_double(c.ci_lo));
  kv("ci_hi", fmt_double(c.ci_hi));
  kv("ci_covers", c.ci_covers ? "1" : "0");
  kv("sign_agrees", c.sign_agrees ? "1" : "0");
  kv("theta", fmt_double(c.theta));
  kv("n_churned", std::to_string(c.n_churned));
  kv("n_contagion", std::to_string(c.n_contagion));
  if (c.has_gps) {
    kv("naive_gap", fmt_double(c.naive_gap));
    kv("mte1", fmt_double(c.mte1));
    kv("mte1_lo", fmt_double(c.mte1_lo));
    kv("mte1_hi", fmt_double(c.mte1_hi));
    kv("mte1_band_has_zero", c.mte1_band_has_zero ? "1" : "0");
  }
  return s;
}

}  // namespace peerchurn
