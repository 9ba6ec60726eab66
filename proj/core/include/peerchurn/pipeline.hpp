#pragma once

#include <functional>
#include <string>
#include <vector>

#include "peerchurn/cox.hpp"
#include "peerchurn/gps.hpp"
#include "peerchurn/manifest.hpp"
#include "peerchurn/synth.hpp"

namespace peerchurn {

// Settings for an end-to-end run. Artifacts land under outdir/<stage>/; every
// stage reads its inputs back from disk so stages can run one at a time or
// across processes and still agree byte-for-byte with a single `run`.
struct RunConfig {
  std::string outdir = "out";
  int threads = 1;
  bool force = false;  // rebuild even when manifests say up to date

  std::string preset = "default";
  WorldConfig world = default_world();

  // External data mode: point these at real exports instead of running the
  // simulate stage. The scorecard stage then has no ground truth and is
  // skipped by `run`.
  std::string cdr_path;
  std::string subscribers_path;
  std::string tariffs_path;
  CalMonth window_start{2008, 1};
  int window_months = 10;

  std::vector<int> thresholds = {1, 3, 5};  // churner-friend call thresholds
  bool lag_cumulative = true;
  int degree_cap = 50;

  std::vector<int> tep_ends = {4, 3};  // exposure period = months 1..e
  int gps_threshold = 1;

  int mc_draws = 200000;
  std::vector<int> mc_ks = {0, 1, 2, 3};

  CoxOptions cox;
  GpsOptions gps;
};

// Builds a RunConfig from key=value settings (see configs/default.conf for
// the full key list). Unknown keys are an error so typos do not silently
// fall back to defaults.
RunConfig run_config_from_kv(const KvFile& kv);

// Config keys that describe the synthetic world's texture (hazard shape,
// graph geometry, traffic rates). A preset chosen on the command line
// replaces this whole block, so the CLI strips these keys from the settings
// file before applying the preset; size, window, and seed keys stay.
const std::vector<std::string>& world_texture_keys();

// Stage names in execution order: simulate, ingest, graph, panel, cox,
// hazard, gps, scorecard.
const std::vector<std::string>& pipeline_stages();

// Runs one stage, or every applicable stage when `stage` is "run". A stage
// whose manifest still hashes clean is skipped unless cfg.force. `log`
// receives one line per action (may be null). Throws Error with the missing
// artifact and the stage that produces it when inputs are absent.
void run_stage(const std::string& stage, const RunConfig& cfg,
               const std::function<void(const std::string&)>& log);

}  // namespace peerchurn
