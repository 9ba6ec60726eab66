#include "peerchurn/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <memory>

#include "peerchurn/csv.hpp"
#include "peerchurn/error.hpp"
#include "peerchurn/rng.hpp"

namespace peerchurn {

namespace {

double plogis(double x) { return 1.0 / (1.0 + std::exp(-x)); }

void validate(const WorldConfig& c) {
  if (c.n_subscribers < 2) throw Error("world needs at least 2 subscribers");
  if (c.n_months < 4) throw Error("world needs at least 4 months");
  if (!c.start.ok()) throw Error("bad start month");
  if (c.trait_dim < 1) throw Error("trait_dim must be positive");
  if (!(c.sigma_h > 0.0)) throw Error("sigma_h must be positive");
  if (!(c.mean_degree > 0.0)) throw Error("mean_degree must be positive");
  if (c.sociability_sigma < 0.0) throw Error("sociability_sigma must be non-negative");
  if (!(c.base_hazard > 0.0) || !(c.base_hazard < 1.0))
    throw Error("base_hazard must lie in (0,1)");
  if (c.edge_call_rate < 1.0) throw Error("edge_call_rate must be at least 1");
  if (c.offnet_out_rate < 1.0) throw Error("offnet_out_rate must be at least 1");
  if (c.offnet_in_rate < 0.0 || c.background_rate < 0.0)
    throw Error("call rates must be non-negative");
  if (!(c.duration_mean_sec > 0.0)) throw Error("duration_mean_sec must be positive");
  if (c.join_prewindow_frac < 0.0 || c.join_prewindow_frac > 1.0)
    throw Error("join_prewindow_frac must lie in [0,1]");
  if (c.join_spread_months < 1) throw Error("join_spread_months must be positive");
}

std::vector<TariffPlan> tariff_menu() {
  return {
      {"P1", 10.0, 0.10, 0.25},
      {"P2", 18.0, 0.06, 0.18},
      {"P3", 30.0, 0.03, 0.12},
  };
}

// Emits one call, consuming a fixed number of draws from `r` so record
// streams stay reproducible.
struct CallEmitter {
  const WorldConfig& cfg;
  const CdrSink& sink;
  CdrRecord rec;

  void emit(Rng& r, CalMonth ym, int days, const std::string& caller,
            const std::string& callee, bool caller_on, bool callee_on) {
    rec.ts.ym = ym;
    rec.ts.day = 1 + static_cast<int>(r.below(static_cast<uint64_t>(days)));
    rec.ts.hour = static_cast<int>(r.below(24));
    rec.ts.minute = static_cast<int>(r.below(60));
    rec.caller_id = caller;
    rec.callee_id = callee;
    rec.duration_sec =
        std::max<int64_t>(1, std::llround(r.exponential(cfg.duration_mean_sec)));
    char cell[8];
    std::snprintf(cell, sizeof cell, "C%03d", static_cast<int>(r.below(200)));
    rec.cell_id = cell;
    rec.caller_on_net = caller_on;
    rec.callee_on_net = callee_on;
    sink(rec);
  }
};

}  // namespace

SynthWorld generate_world(const WorldConfig& cfg, const CdrSinkFactory& make_sink,
                          int threads) {
  validate(cfg);
  const std::size_t n = static_cast<std::size_t>(cfg.n_subscribers);
  const int d = cfg.trait_dim;
  const int n_months = cfg.n_months;

  SynthWorld w;
  w.cfg = cfg;
  w.window = MonthWindow{cfg.start, n_months};

  // Traits are uniform on +-sqrt(3) per dimension (unit variance, bounded).
  // A bounded trait keeps the hazard multiplier exp(slope * score) away from
  // zero, so nobody's expected exposure collapses to the point where a
  // density value computed from it blows up.
  static constexpr double kTraitHalfWidth = 1.7320508075688772;
  std::vector<double> traits(n * static_cast<std::size_t>(d));
  std::vector<double> score(n);
  parallel_for(n, threads, [&](std::size_t i) {
    Rng r(cfg.seed, "trait", i);
    double s = 0.0;
    for (int k = 0; k < d; ++k) {
      double z = kTraitHalfWidth * (2.0 * r.uniform() - 1.0);
      traits[i * static_cast<std::size_t>(d) + static_cast<std::size_t>(k)] = z;
      s += z;
    }
    score[i] = s / std::sqrt(static_cast<double>(d));
  });

  for (const TariffPlan& p : tariff_menu()) w.subs.add_plan(p);
  const uint64_t n_plans = static_cast<uint64_t>(w.subs.plans().size());
  const int join_hi = std::max(1, n_months - 4);
  {
    char id[16];
    for (std::size_t i = 0; i < n; ++i) {
      std::snprintf(id, sizeof id, "S%06d", static_cast<int>(i) + 1);
      int plan = static_cast<int>(Rng(cfg.seed, "plan", i).below(n_plans));
      Rng rj(cfg.seed, "join", i);
      CalMonth join =
          rj.uniform() < cfg.join_prewindow_frac
              ? add_months(cfg.start,
                           -(1 + static_cast<int>(rj.below(
                                     static_cast<uint64_t>(cfg.join_spread_months)))))
              : add_months(cfg.start, static_cast<int>(rj.below(
                                          static_cast<uint64_t>(join_hi))));
      w.subs.add(id, plan, join);
    }
  }

  // Edge probability c * soc_i * soc_j * exp(-|z_i - z_j| / sigma_h), with c
  // set so expected edges hit the degree target. Sociability is a unit-mean
  // lognormal multiplier; the few pairs it pushes past certainty are clamped
  // at 0.95, which shaves the realized mean degree imperceptibly. A geometry
  // the average pair cannot reach is an error, not a silent clip.
  std::vector<double> soc(n, 1.0);
  if (cfg.sociability_sigma > 0.0) {
    const double sg = cfg.sociability_sigma;
    for (std::size_t i = 0; i < n; ++i)
      soc[i] = std::exp(sg * Rng(cfg.seed, "soc", i).normal() - 0.5 * sg * sg);
  }
  auto kernel = [&](std::size_t i, std::size_t j) {
    const double* zi = &traits[i * static_cast<std::size_t>(d)];
    const double* zj = &traits[j * static_cast<std::size_t>(d)];
    double q = 0.0;
    for (int k = 0; k < d; ++k) {
      double dz = zi[k] - zj[k];
      q += dz * dz;
    }
    return soc[i] * soc[j] * std::exp(-std::sqrt(q) / cfg.sigma_h);
  };
  std::vector<double> ksum(n, 0.0);
  parallel_for(n, threads, [&](std::size_t i) {
    double s = 0.0;
    for (std::size_t j = i + 1; j < n; ++j) s += kernel(i, j);
    ksum[i] = s;
  });
  double total = 0.0;
  for (double v : ksum) total += v;  // sequential sum: thread-count independent
  if (!(total > 0.0)) throw Error("edge kernel sums to zero; sigma_h is too small");
  const double c_edge = 0.5 * static_cast<double>(n) * cfg.mean_degree / total;
  if (c_edge > 1.0)
    throw Error(
        "mean_degree is unreachable for this trait geometry (edge probabilities "
        "would exceed 1); raise sigma_h or lower mean_degree");

  std::vector<std::vector<int32_t>> nbr(n);
  parallel_for(n, threads, [&](std::size_t i) {
    for (std::size_t j = i + 1; j < n; ++j)
      if (Rng(cfg.seed, "edge", i, j).uniform() < std::min(c_edge * kernel(i, j), 0.95))
        nbr[i].push_back(static_cast<int32_t>(j));
  });
  auto& edges = w.truth.friend_edges;
  for (std::size_t i = 0; i < n; ++i)
    for (int32_t j : nbr[i]) edges.emplace_back(static_cast<int32_t>(i), j);

  CdrSink sink = make_sink(w.subs, w.window);

  std::vector<int> join_idx(n);
  for (std::size_t i = 0; i < n; ++i)
    join_idx[i] = w.subs.row(static_cast<int>(i)).join.linear() - cfg.start.linear() + 1;

  w.truth.delta = cfg.delta;
  w.truth.trait_score = score;
  auto& churn = w.truth.churn_month;
  auto& cause = w.truth.contagion;
  churn.assign(n, 0);
  cause.assign(n, 0);

  std::vector<int32_t> fc_cum(n, 0), fc_prev(n, 0), fc_new(n, 0);
  const double l0 = std::log(cfg.base_hazard / (1.0 - cfg.base_hazard));
  CallEmitter em{cfg, sink, {}};
  char ext[16];

  for (int m = 1; m <= n_months; ++m) {
    const CalMonth ym = w.window.month_at(m);
    const int days = days_in_month(ym.year, ym.month);

    // Churn decisions. In-window joiners get a two-month ramp before the
    // hazard starts, matching the two shared months a tie needs before it is
    // detectable: every reachable churn leaves enough history to observe.
    // One uniform decides both the factual and the no-exposure
    // counterfactual: a draw between the two probabilities is a churn that
    // exposure tipped.
    for (std::size_t i = 0; i < n; ++i) {
      if (churn[i] != 0) continue;
      if (join_idx[i] >= 1 && m < join_idx[i] + 2) continue;
      double expo = cfg.contagion_form == ContagionForm::cumulative
                        ? static_cast<double>(fc_cum[i])
                        : static_cast<double>(fc_prev[i]);
      double base = l0 + cfg.trait_slope * score[i];
      double u = Rng(cfg.seed, "churn", i, static_cast<uint64_t>(m)).uniform();
      if (u < plogis(base + cfg.delta * expo)) {
        churn[i] = m;
        cause[i] = u >= plogis(base) ? 1 : 0;
      }
    }

    // Friend-pair calls. Friends of a subscriber churning this month still
    // call them (one-sided: the churner stops placing calls), which is the
    // contact that exposure counting sees. Pairs churning together go quiet.
    // Influence flows only through established ties: the pair must share at
    // least two active months before the churn month. A tie that fresh has
    // no pull, and it is also exactly the detectability line of the
    // persistent-tie friendship rule, so measured exposure matches this one.
    for (const auto& e : edges) {
      const std::size_t i = static_cast<std::size_t>(e.first);
      const std::size_t j = static_cast<std::size_t>(e.second);
      if (join_idx[i] > m || join_idx[j] > m) continue;
      const bool ai = churn[i] == 0, aj = churn[j] == 0;
      const bool ci = churn[i] == m, cj = churn[j] == m;
      if (!(ai && aj) && !(ai && cj) && !(aj && ci)) continue;
      Rng r(cfg.seed, "calls", i, j, static_cast<uint64_t>(m));
      // Pair volume shares the endpoints' usage scale (geometric mean), so
      // total call volume stays log-linear in the trait even when friend
      // traffic dominates solo traffic.
      const double pair_mult =
          std::exp(0.5 * cfg.usage_slope * (score[i] + score[j]));
      int k = 1 + r.poisson(std::max(0.0, cfg.edge_call_rate * pair_mult - 1.0));
      for (int t = 0; t < k; ++t) {
        std::size_t from = i, to = j;
        if (ai && aj) {
          if (r.uniform() < 0.5) std::swap(from, to);
        } else if (ci) {
          from = j;
          to = i;
        }
        em.emit(r, ym, days, w.subs.row(static_cast<int>(from)).id,
                w.subs.row(static_cast<int>(to)).id, true, true);
      }
      const int shared_since = std::max({join_idx[i], join_idx[j], 1});
      const bool established = m >= shared_since + 2;
      if (ai && cj && established) {
        ++fc_cum[i];
        ++fc_new[i];
      }
      if (aj && ci && established) {
        ++fc_cum[j];
        ++fc_new[j];
      }
    }

    // Solo traffic. Every active subscriber-month gets at least one outbound
    // call, so silence starts exactly at the generated churn month and the
    // 3-silent-month rule recovers it. Usage scales multiplicatively with the
    // trait score, so log call volume is linear in the trait: that is the
    // channel that makes the latent trait observable.
    for (std::size_t i = 0; i < n; ++i) {
      if (join_idx[i] > m || churn[i] != 0) continue;
      Rng r(cfg.seed, "solo", i, static_cast<uint64_t>(m));
      const double mult = std::exp(cfg.usage_slope * score[i]);
      const std::string& me = w.subs.row(static_cast<int>(i)).id;
      int n_out = 1 + r.poisson(std::max(0.0, cfg.offnet_out_rate * mult - 1.0));
      for (int t = 0; t < n_out; ++t) {
        std::snprintf(ext, sizeof ext, "X%06d", static_cast<int>(r.below(1000000)));
        em.emit(r, ym, days, me, ext, true, false);
      }
      int n_in = r.poisson(cfg.offnet_in_rate * mult);
      for (int t = 0; t < n_in; ++t) {
        std::snprintf(ext, sizeof ext, "X%06d", static_cast<int>(r.below(1000000)));
        em.emit(r, ym, days, ext, me, false, true);
      }
      int n_bg = r.poisson(cfg.background_rate * mult);
      for (int t = 0; t < n_bg; ++t) {
        std::size_t target = n;
        for (int tries = 0; tries < 16; ++tries) {
          std::size_t cand = static_cast<std::size_t>(r.below(n));
          if (cand != i && join_idx[cand] <= m && churn[cand] == 0) {
            target = cand;
            break;
          }
        }
        if (target == n) continue;
        em.emit(r, ym, days, me, w.subs.row(static_cast<int>(target)).id, true, true);
      }
    }

    fc_prev.swap(fc_new);
    std::fill(fc_new.begin(), fc_new.end(), 0);
  }

  for (std::size_t i = 0; i < n; ++i) {
    if (churn[i] != 0) {
      ++w.truth.n_churned;
      if (cause[i]) ++w.truth.n_contagion;
    }
  }
  return w;
}

SimulatedTables simulate_tables(const WorldConfig& cfg, int threads) {
  SimulatedTables out;
  std::unique_ptr<MonthlyAggregator> agg;
  out.world = generate_world(
      cfg,
      [&](const SubscriberTable& subs, const MonthWindow& window) -> CdrSink {
        agg = std::make_unique<MonthlyAggregator>(subs, window);
        return [a = agg.get()](const CdrRecord& rec) { a->add(rec); };
      },
      threads);
  agg->finish(out.usage, out.edges);
  return out;
}

WorldConfig default_world() {
  WorldConfig c;
  c.delta = 0.25;
  return c;
}

WorldConfig null_world() {
  WorldConfig c;
  c.sigma_h = 50.0;
  c.trait_slope = 0.0;
  c.usage_slope = 0.0;
  c.delta = 0.0;
  c.base_hazard = 0.0204;
  return c;
}

// The validation presets enroll everyone before the window. Detected degree
// is then the same no matter when the ego churns (a tie is observed exactly
// when both ends outlive month 2), so the whole-window frd control cannot
// leak the ego's own survival back into the fit.
// Dense graph on purpose: with ~40 friends per ego the zero-exposure and
// high-exposure groups still overlap on the density score, which is what
// lets the dose-response adjustment separate trait from exposure. Sparse
// homophilous graphs put the two groups on disjoint density ranges and the
// adjustment degenerates into a refit of the raw contrast.
WorldConfig homophily_world() {
  WorldConfig c;
  c.sigma_h = 0.3;
  c.trait_slope = 0.35;
  c.usage_slope = 0.6;
  c.delta = 0.0;
  c.base_hazard = 0.06;
  c.mean_degree = 40.0;
  c.sociability_sigma = 0.0;
  c.join_prewindow_frac = 1.0;
  return c;
}

// Contagion spreads on cumulative peer churn, so a dense graph at a high
// base rate would saturate the hazard within two months. Keep the graph
// moderate here so the cascade stays in the regime where each extra
// exposure month still moves the churn probability.
WorldConfig contagion_world(double delta) {
  WorldConfig c = homophily_world();
  c.delta = delta;
  c.base_hazard = 0.02;
  c.mean_degree = 12.0;
  return c;
}

WorldConfig recovery_world(double delta) {
  WorldConfig c;
  c.sigma_h = 50.0;
  c.trait_slope = 0.0;
  c.usage_slope = 0.0;
  c.delta = delta;
  c.base_hazard = 0.019;
  c.join_prewindow_frac = 1.0;
  return c;
}

void write_subscribers_csv(const std::string& path, const SubscriberTable& subs) {
  CsvWriter w(path, {"subscriber_id", "plan_id", "join_month"});
  std::string row;
  for (int i : subs.sorted_by_id()) {
    const auto& r = subs.row(i);
    row.clear();
    row += r.id;
    row += ',';
    row += subs.plans()[static_cast<std::size_t>(r.plan)].plan_id;
    row += ',';
    row += format_cal_month(r.join);
    w.raw_row(row);
  }
  w.close();
}

void write_tariffs_csv(const std::string& path, const SubscriberTable& subs) {
  CsvWriter w(path, {"plan_id", "monthly_fee", "rate_on_net", "rate_off_net"});
  std::string row;
  for (const TariffPlan& p : subs.plans()) {
    row.clear();
    row += p.plan_id;
    row += ',';
    row += fmt_double(p.monthly_fee);
    row += ',';
    row += fmt_double(p.rate_on_net);
    row += ',';
    row += fmt_double(p.rate_off_net);
    w.raw_row(row);
  }
  w.close();
}

void write_truth_csv(const std::string& path, const SynthWorld& world) {
  CsvWriter w(path, {"subscriber_id", "trait_score", "churn_month", "cause"});
  std::string row;
  for (int i : world.subs.sorted_by_id()) {
    const std::size_t s = static_cast<std::size_t>(i);
    row.clear();
    row += world.subs.row(i).id;
    row += ',';
    row += fmt_double(world.truth.trait_score[s]);
    row += ',';
    row += std::to_string(world.truth.churn_month[s]);
    row += ',';
    row += world.truth.churn_month[s] == 0
               ? "none"
               : (world.truth.contagion[s] ? "contagion" : "baseline");
    w.raw_row(row);
  }
  w.close();
}

void write_true_friends_csv(const std::string& path, const SynthWorld& world) {
  CsvWriter w(path, {"subscriber_id_a", "subscriber_id_b"});
  std::string row;
  for (const auto& e : world.truth.friend_edges) {
    row.clear();
    row += world.subs.row(e.first).id;
    row += ',';
    row += world.subs.row(e.second).id;
    w.raw_row(row);
  }
  w.close();
}

GroundTruth read_truth_csv(const std::string& path, const SubscriberTable& subs) {
  GroundTruth t;
  const std::size_t n = static_cast<std::size_t>(subs.size());
  t.trait_score.assign(n, 0.0);
  t.churn_month.assign(n, 0);
  t.contagion.assign(n, 0);
  std::vector<uint8_t> seen(n, 0);
  CsvReader r(path, {"subscriber_id", "trait_score", "churn_month", "cause"});
  std::vector<std::string> f;
  while (r.next(f)) {
    if (f.size() != 4)
      throw Error(path + ":" + std::to_string(r.line_number()) + ": expected 4 fields");
    int sub = subs.find(f[0]);
    if (sub < 0)
      throw Error(path + ":" + std::to_string(r.line_number()) + ": unknown subscriber " + f[0]);
    std::size_t s = static_cast<std::size_t>(sub);
    if (seen[s])
      throw Error(path + ":" + std::to_string(r.line_number()) + ": duplicate subscriber " + f[0]);
    seen[s] = 1;
    t.trait_score[s] = std::strtod(f[1].c_str(), nullptr);
    t.churn_month[s] = std::stoi(f[2]);
    if (f[3] == "contagion")
      t.contagion[s] = 1;
    else if (f[3] != "none" && f[3] != "baseline")
      throw Error(path + ":" + std::to_string(r.line_number()) + ": bad cause '" + f[3] + "'");
    if (t.churn_month[s] != 0) {
      ++t.n_churned;
      if (t.contagion[s]) ++t.n_contagion;
    }
  }
  for (std::size_t s = 0; s < n; ++s)
    if (!seen[s]) throw Error(path + ": no truth row for subscriber " + subs.row(static_cast<int>(s)).id);
  return t;
}

std::vector<std::string> cdr_csv_header() {
  return {"timestamp", "caller_id",     "callee_id",    "duration_sec",
          "cell_id",   "caller_on_net", "callee_on_net"};
}

std::string format_cdr_row(const CdrRecord& rec) {
  std::string s = format_timestamp(rec.ts);
  s += ',';
  s += rec.caller_id;
  s += ',';
  s += rec.callee_id;
  s += ',';
  s += std::to_string(rec.duration_sec);
  s += ',';
  s += rec.cell_id;
  s += ',';
  s += rec.caller_on_net ? '1' : '0';
  s += ',';
  s += rec.callee_on_net ? '1' : '0';
  return s;
}

}  // namespace peerchurn
