#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "peerchurn/ingest.hpp"
#include "peerchurn/types.hpp"

namespace peerchurn {

// How a subscriber's churn hazard reacts to friends who already churned:
// all of them so far, or only last month's.
enum class ContagionForm { cumulative, previous_month };

// Synthetic mobile network with known ground truth. Subscribers carry a
// latent trait vector; edge probability decays with trait distance
// (homophily), and the monthly churn hazard is
//   logit p = logit(base_hazard) + trait_slope * score + delta * exposure
// where exposure counts friends already seen churning. Call volumes scale
// with the same trait through usage_slope, so the trait is visible to an
// analyst through usage covariates rather than directly.
struct WorldConfig {
  int n_subscribers = 10000;
  int n_months = 10;
  CalMonth start{2008, 1};
  uint64_t seed = 1;

  int trait_dim = 1;        // latent trait dimensions
  double sigma_h = 0.5;     // edge kernel bandwidth; large = uniform mixing
  double mean_degree = 8.4; // target average friend count
  // Lognormal spread of per-subscriber edge propensity (0 = everyone equal).
  // Positive values give the degree distribution a heavy right tail while
  // keeping mean_degree; a handful of top pairs saturate and are clamped.
  double sociability_sigma = 0.0;

  double base_hazard = 0.017; // monthly churn probability at score 0, exposure 0
  double trait_slope = 0.6;   // trait score -> churn log-odds
  double delta = 0.0;         // contagion log-odds per exposing friend
  ContagionForm contagion_form = ContagionForm::cumulative;

  double edge_call_rate = 3.0;   // mean calls per friend pair per month, >= 1
  double usage_slope = 0.35;     // trait score -> solo call volume multiplier
  double offnet_out_rate = 2.0;  // mean outbound off-net calls per month, >= 1
  double offnet_in_rate = 1.2;
  double background_rate = 0.25; // extra on-net calls to random subscribers
  double duration_mean_sec = 105.0;

  double join_prewindow_frac = 0.75; // rest join in window months 1..n_months-4
  int join_spread_months = 24;       // pre-window joins spread this far back
};

// What actually happened, by subscriber index (same order as the roster).
struct GroundTruth {
  double delta = 0.0;
  std::vector<double> trait_score;  // (sum of trait dims) / sqrt(dim)
  std::vector<int> churn_month;     // 1-based window month, 0 = still active
  std::vector<uint8_t> contagion;   // 1 = the exposure term tipped this churn
  std::vector<std::pair<int32_t, int32_t>> friend_edges;  // a < b
  int n_churned = 0;
  int n_contagion = 0;
};

struct SynthWorld {
  WorldConfig cfg;
  MonthWindow window;
  SubscriberTable subs;
  GroundTruth truth;
};

using CdrSink = std::function<void(const CdrRecord&)>;
// Called once, after the roster and window exist but before any record is
// emitted; returns the per-record sink. Lets callers aggregate in memory or
// stream to disk without a second pass.
using CdrSinkFactory = std::function<CdrSink(const SubscriberTable&, const MonthWindow&)>;

// Generates the world and streams every call record through the sink in a
// fixed order (month by month). Identical output for identical configs
// regardless of `threads`. Throws Error when the trait geometry cannot reach
// mean_degree without edge probabilities exceeding one.
SynthWorld generate_world(const WorldConfig& cfg, const CdrSinkFactory& make_sink,
                          int threads = 1);

// generate_world + MonthlyAggregator in one step, for in-process analysis.
struct SimulatedTables {
  SynthWorld world;
  UsageTable usage;
  EdgeMonthTable edges;
};
SimulatedTables simulate_tables(const WorldConfig& cfg, int threads = 1);

// Preset configurations. All share the call-texture parameters; they differ
// in what drives churn.
WorldConfig default_world();                // homophily + mild contagion
WorldConfig null_world();                   // uniform mixing, flat hazard
WorldConfig homophily_world();              // strong sorting, zero contagion
WorldConfig contagion_world(double delta);  // strong sorting + real contagion
WorldConfig recovery_world(double delta);   // flat traits: hazard model holds exactly

void write_subscribers_csv(const std::string& path, const SubscriberTable& subs);
void write_tariffs_csv(const std::string& path, const SubscriberTable& subs);
// subscriber_id,trait_score,churn_month,cause with cause in {none,baseline,contagion}
void write_truth_csv(const std::string& path, const SynthWorld& world);
void write_true_friends_csv(const std::string& path, const SynthWorld& world);
// Reads back what write_truth_csv stored; delta and friend_edges are not in
// the file and stay at their defaults.
GroundTruth read_truth_csv(const std::string& path, const SubscriberTable& subs);

std::vector<std::string> cdr_csv_header();
std::string format_cdr_row(const CdrRecord& rec);

}  // namespace peerchurn
