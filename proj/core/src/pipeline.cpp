#include "peerchurn/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>

#include "peerchurn/churn.hpp"
#include "peerchurn/csv.hpp"
#include "peerchurn/error.hpp"
#include "peerchurn/graph.hpp"
#include "peerchurn/panel.hpp"
#include "peerchurn/scorecard.hpp"

namespace peerchurn {

namespace {

using Log = std::function<void(const std::string&)>;

void say(const Log& log, const std::string& s) {
  if (log) log(s);
}

MonthWindow run_window(const RunConfig& cfg) {
  return MonthWindow{cfg.window_start, cfg.window_months};
}

bool synthetic_run(const RunConfig& cfg) { return cfg.cdr_path.empty(); }

bool stage_fresh(const RunConfig& cfg, const char* stage) {
  if (cfg.force) return false;
  return ArtifactManifest::load(cfg.outdir + "/" + stage + "/manifest.txt")
      .current(cfg.outdir);
}

// Resolves a stage input: an explicit external file wins, otherwise the
// artifact another stage produced. Records the input in `man` either way.
std::string input_path(const RunConfig& cfg, const std::string& external,
                       const std::string& rel, const char* producer,
                       ArtifactManifest& man) {
  if (!external.empty()) {
    if (!file_exists(external)) throw Error("input file not found: " + external);
    std::string abs = std::filesystem::absolute(external).string();
    man.record("in", cfg.outdir, abs);
    return abs;
  }
  std::string full = cfg.outdir + "/" + rel;
  if (!file_exists(full))
    throw Error("missing artifact " + full + "; run the " + std::string(producer) +
                " stage first");
  man.record("in", cfg.outdir, rel);
  return full;
}

SubscriberTable load_roster(const RunConfig& cfg, ArtifactManifest& man) {
  std::string tariffs =
      input_path(cfg, cfg.tariffs_path, "simulate/tariffs.csv", "simulate", man);
  std::string subscribers =
      input_path(cfg, cfg.subscribers_path, "simulate/subscribers.csv", "simulate", man);
  SubscriberTable subs;
  parse_tariff_file(tariffs, subs);
  parse_subscriber_file(subscribers, subs);
  return subs;
}

std::string nsuffix(int threshold) { return "_n" + std::to_string(threshold); }
std::string tsuffix(int threshold, int tep_end) {
  return nsuffix(threshold) + "_tep" + std::to_string(tep_end);
}

SplitSpec split_for(int tep_end, int risk_months) {
  if (tep_end < 1 || tep_end >= risk_months)
    throw Error("tep_end " + std::to_string(tep_end) + " does not leave a post period in " +
                std::to_string(risk_months) + " risk months");
  SplitSpec s;
  for (int m = 1; m <= tep_end; ++m) s.tep.push_back(m);
  for (int m = tep_end + 1; m <= risk_months; ++m) s.ptp.push_back(m);
  return s;
}

const std::vector<std::string> kCoxCovariates = {
    "frd_churn", "n_calls", "n_calls_sq", "airtime", "airtime_sq", "expenditure", "frd"};

struct CoefRow {
  std::string name;
  double coef = 0.0;
  double se = 0.0;
};

std::vector<CoefRow> read_coefficients(const std::string& path) {
  CsvReader r(path, {"covariate", "coef", "se", "z", "p"});
  std::vector<CoefRow> rows;
  std::vector<std::string> f;
  while (r.next(f)) {
    if (f.size() != 5)
      throw Error(path + ":" + std::to_string(r.line_number()) + ": expected 5 fields");
    rows.push_back(CoefRow{f[0], std::strtod(f[1].c_str(), nullptr),
                           std::strtod(f[2].c_str(), nullptr)});
  }
  if (rows.empty()) throw Error(path + ": no coefficient rows");
  return rows;
}

CoefRow coefficient(const std::vector<CoefRow>& rows, const std::string& name,
                    const std::string& path) {
  for (const auto& r : rows)
    if (r.name == name) return r;
  throw Error(path + ": no coefficient named " + name);
}

void stage_simulate(const RunConfig& cfg, const Log& log) {
  if (!synthetic_run(cfg)) {
    say(log, "[simulate] external cdr configured; nothing to generate");
    return;
  }
  const std::string dir = cfg.outdir + "/simulate";
  if (stage_fresh(cfg, "simulate")) {
    say(log, "[simulate] up to date");
    return;
  }
  ensure_dir(dir);
  int64_t n_records = 0;
  SynthWorld world;
  {
    CsvWriter out(dir + "/cdr.csv", cdr_csv_header());
    world = generate_world(
        cfg.world,
        [&](const SubscriberTable&, const MonthWindow&) -> CdrSink {
          return [&out, &n_records](const CdrRecord& rec) {
            out.raw_row(format_cdr_row(rec));
            ++n_records;
          };
        },
        cfg.threads);
    out.close();
  }
  write_subscribers_csv(dir + "/subscribers.csv", world.subs);
  write_tariffs_csv(dir + "/tariffs.csv", world.subs);
  write_truth_csv(dir + "/truth.csv", world);
  write_true_friends_csv(dir + "/true_friends.csv", world);

  KvFile kv;
  kv.set("preset", cfg.preset);
  kv.set("n_subscribers", std::to_string(cfg.world.n_subscribers));
  kv.set("n_months", std::to_string(cfg.world.n_months));
  kv.set("start", format_cal_month(cfg.world.start));
  kv.set("seed", std::to_string(cfg.world.seed));
  kv.set("trait_dim", std::to_string(cfg.world.trait_dim));
  kv.set("sigma_h", fmt_double(cfg.world.sigma_h));
  kv.set("mean_degree", fmt_double(cfg.world.mean_degree));
  kv.set("sociability_sigma", fmt_double(cfg.world.sociability_sigma));
  kv.set("base_hazard", fmt_double(cfg.world.base_hazard));
  kv.set("trait_slope", fmt_double(cfg.world.trait_slope));
  kv.set("delta", fmt_double(cfg.world.delta));
  kv.set("contagion_form", cfg.world.contagion_form == ContagionForm::cumulative
                               ? "cumulative"
                               : "previous_month");
  kv.set("edge_call_rate", fmt_double(cfg.world.edge_call_rate));
  kv.set("usage_slope", fmt_double(cfg.world.usage_slope));
  kv.set("offnet_out_rate", fmt_double(cfg.world.offnet_out_rate));
  kv.set("offnet_in_rate", fmt_double(cfg.world.offnet_in_rate));
  kv.set("background_rate", fmt_double(cfg.world.background_rate));
  kv.set("duration_mean_sec", fmt_double(cfg.world.duration_mean_sec));
  kv.set("join_prewindow_frac", fmt_double(cfg.world.join_prewindow_frac));
  kv.set("join_spread_months", std::to_string(cfg.world.join_spread_months));
  kv.set("n_records", std::to_string(n_records));
  kv.set("n_edges", std::to_string(world.truth.friend_edges.size()));
  kv.set("n_churned", std::to_string(world.truth.n_churned));
  kv.set("n_contagion", std::to_string(world.truth.n_contagion));
  kv.write(dir + "/world.txt");

  ArtifactManifest man;
  for (const char* name : {"cdr.csv", "subscribers.csv", "tariffs.csv", "truth.csv",
                           "true_friends.csv", "world.txt"})
    man.record("out", cfg.outdir, std::string("simulate/") + name);
  man.save(dir + "/manifest.txt");
  say(log, "[simulate] " + std::to_string(n_records) + " records, " +
               std::to_string(world.truth.n_churned) + " churners (" +
               std::to_string(world.truth.n_contagion) + " exposure-tipped) -> " + dir);
}

void stage_ingest(const RunConfig& cfg, const Log& log) {
  const std::string dir = cfg.outdir + "/ingest";
  if (stage_fresh(cfg, "ingest")) {
    say(log, "[ingest] up to date");
    return;
  }
  ArtifactManifest man;
  SubscriberTable subs = load_roster(cfg, man);
  std::string cdr = input_path(cfg, cfg.cdr_path, "simulate/cdr.csv", "simulate", man);
  MonthWindow window = run_window(cfg);

  ensure_dir(dir);
  MonthlyAggregator agg(subs, window);
  RejectReport report =
      parse_cdr_file(cdr, window, [&](const CdrRecord& rec) { agg.add(rec); });
  UsageTable usage;
  EdgeMonthTable edges;
  agg.finish(usage, edges);

  write_usage_csv(dir + "/usage.csv", usage, subs);
  write_edge_months_csv(dir + "/edge_months.csv", edges, subs);
  {
    KvFile kv;
    kv.set("accepted", std::to_string(report.n_accepted));
    kv.set("rejected", std::to_string(report.n_rejected));
    for (int i = 0; i < static_cast<int>(RejectReason::COUNT); ++i)
      kv.set(std::string("rejected_") + reject_reason_name(static_cast<RejectReason>(i)),
             std::to_string(report.by_reason[static_cast<std::size_t>(i)]));
    kv.write(dir + "/rejects.txt");
  }
  for (const char* name : {"usage.csv", "edge_months.csv", "rejects.txt"})
    man.record("out", cfg.outdir, std::string("ingest/") + name);
  man.save(dir + "/manifest.txt");
  say(log, "[ingest] accepted " + std::to_string(report.n_accepted) + " records, rejected " +
               std::to_string(report.n_rejected) + " -> " + dir);
}

void stage_graph(const RunConfig& cfg, const Log& log) {
  const std::string dir = cfg.outdir + "/graph";
  if (stage_fresh(cfg, "graph")) {
    say(log, "[graph] up to date");
    return;
  }
  ArtifactManifest man;
  SubscriberTable subs = load_roster(cfg, man);
  MonthWindow window = run_window(cfg);
  std::string usage_path = input_path(cfg, "", "ingest/usage.csv", "ingest", man);
  std::string edges_path = input_path(cfg, "", "ingest/edge_months.csv", "ingest", man);
  UsageTable usage = read_usage_csv(usage_path, subs, window);
  EdgeMonthTable edges = read_edge_months_csv(edges_path, subs, window.n_months);

  ensure_dir(dir);
  ChurnTable churn = label_churn(usage, subs, window);
  Presence presence = build_presence(churn, subs, window);
  FriendshipGraph graph = build_friendships(edges, presence);
  TrimResult trim = trim_sample(graph, subs.size(), cfg.degree_cap);

  write_churn_csv(dir + "/churn.csv", churn, subs);
  write_friendships_csv(dir + "/friendships.csv", graph, subs);
  int64_t churners = 0;
  for (const auto& ev : churn.events) churners += ev.churned ? 1 : 0;
  double frd_sum = 0.0;
  for (int sub : trim.retained) frd_sum += graph.frd(sub);
  {
    KvFile kv;
    kv.set("subscribers", std::to_string(subs.size()));
    kv.set("churners", std::to_string(churners));
    kv.set("retained", std::to_string(trim.retained.size()));
    kv.set("removed_no_degree", std::to_string(trim.removed_no_degree));
    kv.set("removed_high_degree", std::to_string(trim.removed_high_degree));
    kv.set("mean_frd_retained",
           fmt_double(trim.retained.empty()
                          ? 0.0
                          : frd_sum / static_cast<double>(trim.retained.size())));
    kv.write(dir + "/sample.txt");
  }
  for (const char* name : {"churn.csv", "friendships.csv", "sample.txt"})
    man.record("out", cfg.outdir, std::string("graph/") + name);
  man.save(dir + "/manifest.txt");
  say(log, "[graph] " + std::to_string(churners) + " churners, " +
               std::to_string(trim.retained.size()) + " egos retained -> " + dir);
}

void stage_panel(const RunConfig& cfg, const Log& log) {
  const std::string dir = cfg.outdir + "/panel";
  if (stage_fresh(cfg, "panel")) {
    say(log, "[panel] up to date");
    return;
  }
  ArtifactManifest man;
  SubscriberTable subs = load_roster(cfg, man);
  MonthWindow window = run_window(cfg);
  UsageTable usage =
      read_usage_csv(input_path(cfg, "", "ingest/usage.csv", "ingest", man), subs, window);
  EdgeMonthTable edges = read_edge_months_csv(
      input_path(cfg, "", "ingest/edge_months.csv", "ingest", man), subs, window.n_months);
  ChurnTable churn = read_churn_csv(
      input_path(cfg, "", "graph/churn.csv", "graph", man), subs, window);
  FriendshipGraph graph = read_friendships_csv(
      input_path(cfg, "", "graph/friendships.csv", "graph", man), subs);
  TrimResult trim = trim_sample(graph, subs.size(), cfg.degree_cap);
  ChurnerFriendCounts counts(graph, edges, churn, cfg.thresholds, window.n_months);

  ensure_dir(dir);
  std::vector<std::string> outs;
  std::string note;
  for (int threshold : cfg.thresholds) {
    PanelOptions opt;
    opt.threshold = threshold;
    opt.lag_form_cumulative = cfg.lag_cumulative;
    SurvivalPanel panel =
        build_survival_panel(usage, subs, window, churn, graph, counts, trim.retained, opt);
    std::string name = "panel" + nsuffix(threshold) + ".csv";
    write_panel_csv(dir + "/" + name, panel, subs);
    outs.push_back(name);
    if (threshold == cfg.thresholds.front())
      note = std::to_string(panel.n_rows()) + " rows, " +
             std::to_string(panel.total_events()) + " events";
    for (int tep_end : cfg.tep_ends) {
      SplitSpec split = split_for(tep_end, panel.risk_months);
      CrossSection cs = build_gps_cross_section(usage, subs, window, churn, graph, counts,
                                                trim.retained, threshold, split);
      std::string cname = "cross_section" + tsuffix(threshold, tep_end) + ".csv";
      write_cross_section_csv(dir + "/" + cname, cs, subs);
      outs.push_back(cname);
    }
  }
  for (const auto& name : outs) man.record("out", cfg.outdir, "panel/" + name);
  man.save(dir + "/manifest.txt");
  say(log, "[panel] " + note + " per threshold -> " + dir);
}

void stage_cox(const RunConfig& cfg, const Log& log) {
  const std::string dir = cfg.outdir + "/cox";
  if (stage_fresh(cfg, "cox")) {
    say(log, "[cox] up to date");
    return;
  }
  ArtifactManifest man;
  SubscriberTable subs = load_roster(cfg, man);
  ensure_dir(dir);
  std::string note;
  for (int threshold : cfg.thresholds) {
    std::string panel_rel = "panel/panel" + nsuffix(threshold) + ".csv";
    SurvivalPanel panel =
        read_panel_csv(input_path(cfg, "", panel_rel, "panel", man), subs);
    CoxFit fit = fit_cox(panel, kCoxCovariates, cfg.cox);

    std::string table = cox_fit_table(fit);
    {
      std::string path = dir + "/fit" + nsuffix(threshold) + ".txt";
      std::ofstream out(path);
      if (!out) throw Error("cannot create file: " + path);
      out << table;
    }
    {
      CsvWriter w(dir + "/coefficients" + nsuffix(threshold) + ".csv",
                  {"covariate", "coef", "se", "z", "p"});
      for (std::size_t i = 0; i < fit.names.size(); ++i) {
        double z = fit.se[i] > 0.0 ? fit.beta[i] / fit.se[i] : 0.0;
        w.raw_row(fit.names[i] + "," + fmt_double(fit.beta[i]) + "," + fmt_double(fit.se[i]) +
                  "," + fmt_double(z) + "," + fmt_double(normal_two_sided_p(z)));
      }
      w.close();
    }
    {
      KvFile kv;
      kv.set("theta", fmt_double(fit.theta));
      kv.set("loglik", fmt_double(fit.loglik));
      kv.set("loglik_null", fmt_double(fit.loglik_null));
      kv.set("marginal_loglik", fmt_double(fit.marginal_loglik));
      kv.set("frailty_lrt", fmt_double(fit.frailty_lrt));
      kv.set("frailty_p", fmt_double(fit.frailty_lrt > 0.0
                                         ? 0.5 * std::erfc(std::sqrt(fit.frailty_lrt / 2.0))
                                         : 1.0));
      kv.set("n_rows", std::to_string(fit.n_rows));
      kv.set("n_events", std::to_string(fit.n_events));
      kv.set("n_subjects", std::to_string(fit.n_subjects));
      kv.set("iterations", std::to_string(fit.iterations));
      kv.set("theta_evals", std::to_string(fit.theta_evals));
      kv.set("converged", fit.converged ? "1" : "0");
      kv.write(dir + "/model" + nsuffix(threshold) + ".txt");
    }
    for (const char* base : {"fit", "coefficients", "model"})
      man.record("out", cfg.outdir,
                 "cox/" + std::string(base) + nsuffix(threshold) +
                     (std::string(base) == "coefficients" ? ".csv" : ".txt"));
    if (threshold == cfg.gps_threshold) {
      int idx = -1;
      for (std::size_t i = 0; i < fit.names.size(); ++i)
        if (fit.names[i] == "frd_churn") idx = static_cast<int>(i);
      if (idx >= 0)
        note = "frd_churn coef " + fmt_double(fit.beta[static_cast<std::size_t>(idx)]) +
               " (theta " + fmt_double(fit.theta) + ")";
    }
  }
  man.save(dir + "/manifest.txt");
  say(log, "[cox] " + note + " -> " + dir);
}

void stage_hazard(const RunConfig& cfg, const Log& log) {
  const std::string dir = cfg.outdir + "/hazard";
  if (stage_fresh(cfg, "hazard")) {
    say(log, "[hazard] up to date");
    return;
  }
  ArtifactManifest man;
  ensure_dir(dir);
  for (int threshold : cfg.thresholds) {
    std::string coef_rel = "cox/coefficients" + nsuffix(threshold) + ".csv";
    auto rows = read_coefficients(input_path(cfg, "", coef_rel, "cox", man));
    CoefRow dc = coefficient(rows, "frd_churn", coef_rel);
    auto rh = mc_relative_hazard(dc.coef, dc.se, cfg.mc_ks, cfg.mc_draws, cfg.world.seed);
    std::string name = "relative_hazard" + nsuffix(threshold) + ".csv";
    CsvWriter w(dir + "/" + name, {"k", "mean", "ci_lo", "ci_hi"});
    for (const auto& r : rh)
      w.raw_row(std::to_string(r.k) + "," + fmt_double(r.mean) + "," + fmt_double(r.lo) +
                "," + fmt_double(r.hi));
    w.close();
    man.record("out", cfg.outdir, "hazard/" + name);
  }
  man.save(dir + "/manifest.txt");
  say(log, "[hazard] relative hazard curves for " + std::to_string(cfg.thresholds.size()) +
               " thresholds -> " + dir);
}

void stage_gps(const RunConfig& cfg, const Log& log) {
  const std::string dir = cfg.outdir + "/gps";
  if (stage_fresh(cfg, "gps")) {
    say(log, "[gps] up to date");
    return;
  }
  ArtifactManifest man;
  SubscriberTable subs = load_roster(cfg, man);
  ensure_dir(dir);
  std::string note;
  for (int tep_end : cfg.tep_ends) {
    std::string cs_rel = "panel/cross_section" + tsuffix(cfg.gps_threshold, tep_end) + ".csv";
    CrossSection cs =
        read_cross_section_csv(input_path(cfg, "", cs_rel, "panel", man), subs);
    if (cs.n_rows() == 0) throw Error(cs_rel + ": empty cross-section");

    GpsOptions opt = cfg.gps;
    opt.threads = cfg.threads;
    TreatmentModel tm = fit_treatment_model(cs);
    BalanceReport balance = balance_test(cs, tm);
    DoseResponse dr = fit_dose_response(cs, opt);
    bootstrap_mte(cs, opt, dr);
    double naive = naive_treated_gap(cs);

    std::string suffix = tsuffix(cfg.gps_threshold, tep_end);
    {
      std::string path = dir + "/balance" + suffix + ".txt";
      std::ofstream out(path);
      if (!out) throw Error("cannot create file: " + path);
      out << balance_table(balance);
    }
    {
      CsvWriter w(dir + "/dose_response" + suffix + ".csv",
                  {"t", "drf", "mte", "mte_lo", "mte_hi"});
      for (std::size_t i = 0; i < dr.ts.size(); ++i)
        w.raw_row(fmt_double(dr.ts[i]) + "," + fmt_double(dr.drf[i]) + "," +
                  fmt_double(dr.mte[i]) + "," + fmt_double(dr.mte_lo[i]) + "," +
                  fmt_double(dr.mte_hi[i]));
      w.close();
    }
    {
      KvFile kv;
      kv.set("rows", std::to_string(cs.n_rows()));
      kv.set("naive_gap", fmt_double(naive));
      kv.set("boot_total", std::to_string(dr.boot_total));
      kv.set("boot_failed", std::to_string(dr.boot_failed));
      kv.set("probit", dr.probit ? "1" : "0");
      kv.set("treatment_converged", tm.converged ? "1" : "0");
      std::string notes;
      for (const auto& s : dr.notes) {
        if (!notes.empty()) notes += "; ";
        notes += s;
      }
      kv.set("notes", notes);
      kv.write(dir + "/summary" + suffix + ".txt");
    }
    for (const char* base : {"balance", "dose_response", "summary"})
      man.record("out", cfg.outdir,
                 "gps/" + std::string(base) + suffix +
                     (std::string(base) == "dose_response" ? ".csv" : ".txt"));
    if (tep_end == cfg.tep_ends.front()) {
      int idx = -1;
      for (std::size_t i = 0; i < dr.ts.size(); ++i)
        if (dr.ts[i] == 1.0) idx = static_cast<int>(i);
      if (idx >= 0)
        note = "mte(1) = " + fmt_double(dr.mte[static_cast<std::size_t>(idx)]) +
               ", naive gap " + fmt_double(naive);
    }
  }
  man.save(dir + "/manifest.txt");
  say(log, "[gps] " + note + " -> " + dir);
}

void stage_scorecard(const RunConfig& cfg, const Log& log) {
  const std::string dir = cfg.outdir + "/scorecard";
  if (!synthetic_run(cfg)) {
    say(log, "[scorecard] external data has no ground truth; skipping");
    return;
  }
  if (stage_fresh(cfg, "scorecard")) {
    say(log, "[scorecard] up to date");
    return;
  }
  ArtifactManifest man;
  SubscriberTable subs = load_roster(cfg, man);
  GroundTruth truth = read_truth_csv(
      input_path(cfg, "", "simulate/truth.csv", "simulate", man), subs);
  KvFile world_kv =
      KvFile::parse_file(input_path(cfg, "", "simulate/world.txt", "simulate", man));
  truth.delta = world_kv.num("delta", 0.0);

  std::string coef_rel = "cox/coefficients" + nsuffix(cfg.gps_threshold) + ".csv";
  auto rows = read_coefficients(input_path(cfg, "", coef_rel, "cox", man));
  KvFile model_kv = KvFile::parse_file(
      input_path(cfg, "", "cox/model" + nsuffix(cfg.gps_threshold) + ".txt", "cox", man));
  CoxFit fit;
  for (const auto& r : rows) {
    fit.names.push_back(r.name);
    fit.beta.push_back(r.coef);
    fit.se.push_back(r.se);
  }
  fit.theta = model_kv.num("theta", 0.0);
  Scorecard card = score_world(truth, fit);

  // Dose-response artifacts are optional: the hazard block alone is a valid
  // scorecard when the gps stage has not run.
  std::string suffix = tsuffix(cfg.gps_threshold, cfg.tep_ends.front());
  std::string dr_path = cfg.outdir + "/gps/dose_response" + suffix + ".csv";
  std::string sum_path = cfg.outdir + "/gps/summary" + suffix + ".txt";
  if (file_exists(dr_path) && file_exists(sum_path)) {
    man.record("in", cfg.outdir, "gps/dose_response" + suffix + ".csv");
    man.record("in", cfg.outdir, "gps/summary" + suffix + ".txt");
    CsvReader r(dr_path, {"t", "drf", "mte", "mte_lo", "mte_hi"});
    std::vector<std::string> f;
    bool found = false;
    while (r.next(f)) {
      if (f.size() != 5) throw Error(dr_path + ": expected 5 fields");
      if (std::strtod(f[0].c_str(), nullptr) == 1.0) {
        card.has_gps = true;
        card.mte1 = std::strtod(f[2].c_str(), nullptr);
        card.mte1_lo = std::strtod(f[3].c_str(), nullptr);
        card.mte1_hi = std::strtod(f[4].c_str(), nullptr);
        card.mte1_band_has_zero = card.mte1_lo <= 0.0 && 0.0 <= card.mte1_hi;
        found = true;
      }
    }
    if (!found) throw Error(dr_path + ": no t = 1 row");
    card.naive_gap = KvFile::parse_file(sum_path).num("naive_gap", 0.0);
  }

  ensure_dir(dir);
  {
    std::string path = dir + "/scorecard.txt";
    std::ofstream out(path);
    if (!out) throw Error("cannot create file: " + path);
    out << scorecard_kv(card);
  }
  man.record("out", cfg.outdir, "scorecard/scorecard.txt");
  man.save(dir + "/manifest.txt");
  say(log, "[scorecard] delta_true " + fmt_double(card.delta_true) + ", delta_hat " +
               fmt_double(card.delta_hat) + (card.ci_covers ? " (CI covers)" : " (CI misses)") +
               " -> " + dir);
}

}  // namespace

const std::vector<std::string>& pipeline_stages() {
  static const std::vector<std::string> stages = {
      "simulate", "ingest", "graph", "panel", "cox", "hazard", "gps", "scorecard"};
  return stages;
}

void run_stage(const std::string& stage, const RunConfig& cfg, const Log& log) {
  ensure_dir(cfg.outdir);
  if (stage == "run") {
    for (const auto& s : pipeline_stages()) run_stage(s, cfg, log);
    return;
  }
  if (stage == "simulate") return stage_simulate(cfg, log);
  if (stage == "ingest") return stage_ingest(cfg, log);
  if (stage == "graph") return stage_graph(cfg, log);
  if (stage == "panel") return stage_panel(cfg, log);
  if (stage == "cox") return stage_cox(cfg, log);
  if (stage == "hazard") return stage_hazard(cfg, log);
  if (stage == "gps") return stage_gps(cfg, log);
  if (stage == "scorecard") return stage_scorecard(cfg, log);
  std::string names;
  for (const auto& s : pipeline_stages()) names += " " + s;
  throw Error("unknown stage '" + stage + "'; expected one of:" + names + " run");
}

const std::vector<std::string>& world_texture_keys() {
  static const std::vector<std::string> keys = {
      "trait_dim",        "sigma_h",
      "mean_degree",      "sociability_sigma",
      "base_hazard",      "trait_slope",
      "delta",            "contagion_form",
      "edge_call_rate",   "usage_slope",
      "offnet_out_rate",  "offnet_in_rate",
      "background_rate",  "duration_mean_sec",
      "join_prewindow_frac", "join_spread_months"};
  return keys;
}

RunConfig run_config_from_kv(const KvFile& kv) {
  static const std::set<std::string> known = {
      "preset",          "seed",
      "n_subscribers",   "n_months",
      "start",           "trait_dim",
      "sigma_h",         "mean_degree",
      "sociability_sigma",
      "base_hazard",     "trait_slope",
      "delta",           "contagion_form",
      "edge_call_rate",  "usage_slope",
      "offnet_out_rate", "offnet_in_rate",
      "background_rate", "duration_mean_sec",
      "join_prewindow_frac", "join_spread_months",
      "cdr",             "subscribers",
      "tariffs",         "window_start",
      "window_months",   "thresholds",
      "lag_form",        "degree_cap",
      "tep_ends",        "gps_threshold",
      "mc_draws",        "mc_ks",
      "frailty",         "theta",
      "ties",            "n_boot",
      "gps_seed",        "probit",
      "outdir",          "threads"};
  for (const auto& [key, value] : kv.items())
    if (!known.count(key))
      throw Error(kv.origin() + ": unknown key '" + key + "'");

  RunConfig cfg;
  cfg.preset = kv.str("preset", "default");
  if (cfg.preset == "default")
    cfg.world = default_world();
  else if (cfg.preset == "null")
    cfg.world = null_world();
  else if (cfg.preset == "homophily")
    cfg.world = homophily_world();
  else if (cfg.preset == "contagion")
    cfg.world = contagion_world(kv.num("delta", 0.4));
  else if (cfg.preset == "recovery")
    cfg.world = recovery_world(kv.num("delta", 0.2));
  else
    throw Error(kv.origin() + ": unknown preset '" + cfg.preset +
                "'; expected default, null, homophily, contagion, or recovery");

  WorldConfig& w = cfg.world;
  w.seed = kv.uinteger("seed", w.seed);
  w.n_subscribers = static_cast<int>(kv.integer("n_subscribers", w.n_subscribers));
  w.n_months = static_cast<int>(kv.integer("n_months", w.n_months));
  if (kv.has("start")) {
    auto m = parse_cal_month(*kv.find("start"));
    if (!m) throw Error(kv.origin() + ": bad start month '" + *kv.find("start") + "'");
    w.start = *m;
  }
  w.trait_dim = static_cast<int>(kv.integer("trait_dim", w.trait_dim));
  w.sigma_h = kv.num("sigma_h", w.sigma_h);
  w.mean_degree = kv.num("mean_degree", w.mean_degree);
  w.sociability_sigma = kv.num("sociability_sigma", w.sociability_sigma);
  w.base_hazard = kv.num("base_hazard", w.base_hazard);
  w.trait_slope = kv.num("trait_slope", w.trait_slope);
  w.delta = kv.num("delta", w.delta);
  if (kv.has("contagion_form")) {
    std::string form = *kv.find("contagion_form");
    if (form == "cumulative")
      w.contagion_form = ContagionForm::cumulative;
    else if (form == "previous_month")
      w.contagion_form = ContagionForm::previous_month;
    else
      throw Error(kv.origin() + ": bad contagion_form '" + form + "'");
  }
  w.edge_call_rate = kv.num("edge_call_rate", w.edge_call_rate);
  w.usage_slope = kv.num("usage_slope", w.usage_slope);
  w.offnet_out_rate = kv.num("offnet_out_rate", w.offnet_out_rate);
  w.offnet_in_rate = kv.num("offnet_in_rate", w.offnet_in_rate);
  w.background_rate = kv.num("background_rate", w.background_rate);
  w.duration_mean_sec = kv.num("duration_mean_sec", w.duration_mean_sec);
  w.join_prewindow_frac = kv.num("join_prewindow_frac", w.join_prewindow_frac);
  w.join_spread_months = static_cast<int>(kv.integer("join_spread_months", w.join_spread_months));

  cfg.cdr_path = kv.str("cdr", "");
  cfg.subscribers_path = kv.str("subscribers", "");
  cfg.tariffs_path = kv.str("tariffs", "");
  cfg.window_start = w.start;
  cfg.window_months = w.n_months;
  if (kv.has("window_start")) {
    auto m = parse_cal_month(*kv.find("window_start"));
    if (!m) throw Error(kv.origin() + ": bad window_start '" + *kv.find("window_start") + "'");
    cfg.window_start = *m;
  }
  cfg.window_months = static_cast<int>(kv.integer("window_months", cfg.window_months));

  cfg.thresholds = kv.int_list("thresholds", cfg.thresholds);
  for (int t : cfg.thresholds)
    if (t < 1) throw Error(kv.origin() + ": thresholds must be positive");
  if (kv.has("lag_form")) {
    std::string form = *kv.find("lag_form");
    if (form == "cumulative")
      cfg.lag_cumulative = true;
    else if (form == "previous_month")
      cfg.lag_cumulative = false;
    else
      throw Error(kv.origin() + ": bad lag_form '" + form + "'");
  }
  cfg.degree_cap = static_cast<int>(kv.integer("degree_cap", cfg.degree_cap));
  cfg.tep_ends = kv.int_list("tep_ends", cfg.tep_ends);
  cfg.gps_threshold = static_cast<int>(kv.integer("gps_threshold", cfg.gps_threshold));
  if (std::find(cfg.thresholds.begin(), cfg.thresholds.end(), cfg.gps_threshold) ==
      cfg.thresholds.end())
    throw Error(kv.origin() + ": gps_threshold must be one of the thresholds");
  cfg.mc_draws = static_cast<int>(kv.integer("mc_draws", cfg.mc_draws));
  cfg.mc_ks = kv.int_list("mc_ks", cfg.mc_ks);

  cfg.cox.frailty = kv.flag("frailty", cfg.cox.frailty);
  cfg.cox.theta = kv.num("theta", cfg.cox.theta);
  if (kv.has("ties")) {
    std::string ties = *kv.find("ties");
    if (ties == "breslow")
      cfg.cox.ties = Ties::breslow;
    else if (ties == "efron")
      cfg.cox.ties = Ties::efron;
    else
      throw Error(kv.origin() + ": bad ties '" + ties + "'");
  }
  cfg.gps.n_boot = static_cast<int>(kv.integer("n_boot", cfg.gps.n_boot));
  cfg.gps.probit = kv.flag("probit", cfg.gps.probit);
  cfg.gps.seed = kv.uinteger("gps_seed", w.seed);

  cfg.outdir = kv.str("outdir", cfg.outdir);
  cfg.threads = static_cast<int>(kv.integer("threads", cfg.threads));
  return cfg;
}

}  // namespace peerchurn
