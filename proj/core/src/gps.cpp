#include "peerchurn/gps.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "peerchurn/error.hpp"
#include "peerchurn/rng.hpp"

namespace peerchurn {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

constexpr double kFlag = 1.96;

// Rows of the cross-section addressed through an index vector, so the
// bootstrap can fit on resamples without copying the data.
struct View {
  const CrossSection* cs;
  const std::vector<std::size_t>* idx;  // nullptr = identity
  std::size_t size() const { return idx ? idx->size() : cs->n_rows(); }
  std::size_t at(std::size_t i) const { return idx ? (*idx)[i] : i; }
};

struct ExpFit {
  VectorXd gamma;  // original scale, intercept first
  double loglik = 0.0;
  int iterations = 0;
  bool converged = false;
};

double exp_loglik(const View& v, const MatrixXd& Z, const VectorXd& g) {
  double ll = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    double eta = Z.row(static_cast<Eigen::Index>(i)).dot(g);
    ll += -eta - v.cs->treatment[v.at(i)] * std::exp(-eta);
  }
  return ll;
}

ExpFit fit_exponential(const View& v, int max_iter, double tol) {
  std::size_t n = v.size();
  std::size_t p = v.cs->n_cov();
  ExpFit fit;
  if (n < p + 10) throw Error("cross-section too small for the treatment model");

  double tmean = 0.0;
  for (std::size_t i = 0; i < n; ++i) tmean += v.cs->treatment[v.at(i)];
  tmean /= static_cast<double>(n);
  if (tmean <= 0.0) return fit;  // all-zero treatment; unfittable

  // Standardized design with intercept; coefficients mapped back at the end.
  std::vector<double> mean(p, 0.0), sd(p, 1.0);
  for (std::size_t c = 0; c < p; ++c) {
    double m = 0.0;
    for (std::size_t i = 0; i < n; ++i) m += v.cs->value(v.at(i), c);
    m /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double d = v.cs->value(v.at(i), c) - m;
      var += d * d;
    }
    mean[c] = m;
    sd[c] = std::sqrt(var / static_cast<double>(n));
    if (sd[c] <= 0.0) sd[c] = 1.0;  // constant column: coefficient pinned by the data at 0
  }
  MatrixXd Z(n, p + 1);
  for (std::size_t i = 0; i < n; ++i) {
    Z(static_cast<Eigen::Index>(i), 0) = 1.0;
    for (std::size_t c = 0; c < p; ++c)
      Z(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c + 1)) =
          (v.cs->value(v.at(i), c) - mean[c]) / sd[c];
  }

  VectorXd g = VectorXd::Zero(static_cast<Eigen::Index>(p + 1));
  g[0] = std::log(tmean);
  double ll = exp_loglik(v, Z, g);

  VectorXd grad(p + 1);
  MatrixXd H(p + 1, p + 1);
  for (int it = 1; it <= max_iter; ++it) {
    fit.iterations = it;
    grad.setZero();
    H.setZero();
    for (std::size_t i = 0; i < n; ++i) {
      double t = v.cs->treatment[v.at(i)];
      VectorXd z = Z.row(static_cast<Eigen::Index>(i));
      double w = t * std::exp(-z.dot(g));
      grad += z * (w - 1.0);
      H.selfadjointView<Eigen::Lower>().rankUpdate(z, w);
    }
    MatrixXd Hf = H.selfadjointView<Eigen::Lower>();
    Hf.diagonal().array() += 1e-12 * static_cast<double>(n);
    if (grad.lpNorm<Eigen::Infinity>() <= tol) {
      fit.converged = true;
      break;
    }
    VectorXd step = Hf.ldlt().solve(grad);
    // Near the optimum the per-step gain falls below double resolution while
    // the gradient is still shrinking, so accept steps that hold the loglik
    // to within rounding noise instead of demanding strict ascent.
    const double slack = 1e-10 * (1.0 + std::abs(ll));
    double s = 1.0;
    double nll = -1e300;
    VectorXd ng;
    for (int h = 0; h < 30; ++h) {
      ng = g + s * step;
      nll = exp_loglik(v, Z, ng);
      if (std::isfinite(nll) && nll >= ll - slack) break;
      s *= 0.5;
    }
    if (!std::isfinite(nll) || nll < ll - slack) break;
    g = ng;
    ll = std::max(ll, nll);
  }

  fit.loglik = ll;
  fit.gamma = VectorXd::Zero(static_cast<Eigen::Index>(p + 1));
  double shift = 0.0;
  for (std::size_t c = 0; c < p; ++c) {
    fit.gamma[static_cast<Eigen::Index>(c + 1)] = g[static_cast<Eigen::Index>(c + 1)] / sd[c];
    shift += g[static_cast<Eigen::Index>(c + 1)] * mean[c] / sd[c];
  }
  fit.gamma[0] = g[0] - shift;
  return fit;
}

double mu_from_gamma(const VectorXd& gamma, const CrossSection& cs, std::size_t row) {
  double eta = gamma[0];
  for (std::size_t c = 0; c < cs.n_cov(); ++c)
    eta += gamma[static_cast<Eigen::Index>(c + 1)] * cs.value(row, c);
  return std::exp(eta);
}

void outcome_features(double t, double r, double* f) {
  f[0] = 1.0;
  f[1] = t;
  f[2] = t * t;
  f[3] = r;
  f[4] = r * r;
  f[5] = t * r;
}

double norm_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }
double norm_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI); }

// Outcome model on {1, T, T^2, R, R^2, T*R}: least squares by default, a
// probit link behind the flag.
bool fit_outcome(const View& v, const std::vector<double>& mu, bool probit,
                 VectorXd& alpha) {
  std::size_t n = v.size();
  MatrixXd A(n, 6);
  VectorXd y(n);
  double f[6];
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t r = v.at(i);
    double t = v.cs->treatment[r];
    outcome_features(t, gps_density(t, mu[i]), f);
    for (int c = 0; c < 6; ++c) A(static_cast<Eigen::Index>(i), c) = f[c];
    y[static_cast<Eigen::Index>(i)] = v.cs->outcome[r];
  }
  if (!probit) {
    Eigen::ColPivHouseholderQR<MatrixXd> qr(A);
    if (qr.rank() < 6) return false;
    alpha = qr.solve(y);
    return true;
  }
  // Probit by Fisher scoring with step halving; the loglik is concave.
  alpha = VectorXd::Zero(6);
  auto loglik = [&](const VectorXd& a) {
    double ll = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double eta = std::clamp(A.row(static_cast<Eigen::Index>(i)).dot(a), -8.0, 8.0);
      double ph = norm_cdf(eta);
      ll += y[static_cast<Eigen::Index>(i)] > 0.5 ? std::log(ph) : std::log1p(-ph);
    }
    return ll;
  };
  double ll = loglik(alpha);
  for (int it = 0; it < 50; ++it) {
    VectorXd grad = VectorXd::Zero(6);
    MatrixXd H = MatrixXd::Zero(6, 6);
    for (std::size_t i = 0; i < n; ++i) {
      VectorXd x = A.row(static_cast<Eigen::Index>(i));
      double eta = std::clamp(x.dot(alpha), -8.0, 8.0);
      double ph = norm_cdf(eta), pd = norm_pdf(eta);
      double denom = std::max(ph * (1.0 - ph), 1e-12);
      grad += x * pd * (y[static_cast<Eigen::Index>(i)] - ph) / denom;
      H.selfadjointView<Eigen::Lower>().rankUpdate(x, pd * pd / denom);
    }
    if (grad.lpNorm<Eigen::Infinity>() <= 1e-6) return true;
    MatrixXd Hf = H.selfadjointView<Eigen::Lower>();
    Hf.diagonal().array() += 1e-10 * static_cast<double>(n);
    VectorXd step = Hf.ldlt().solve(grad);
    double s = 1.0, nll = -1e300;
    VectorXd na;
    for (int h = 0; h < 30; ++h) {
      na = alpha + s * step;
      nll = loglik(na);
      if (std::isfinite(nll) && nll >= ll) break;
      s *= 0.5;
    }
    if (!std::isfinite(nll) || nll < ll) return true;  // stalled at the optimum
    alpha = na;
    ll = nll;
  }
  return true;
}

// drf(t) averaged over the view's covariate distribution.
double drf_at(const View& v, const std::vector<double>& mu, const VectorXd& alpha,
              bool probit, double t) {
  double f[6];
  double acc = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    outcome_features(t, gps_density(t, mu[i]), f);
    double eta = 0.0;
    for (int c = 0; c < 6; ++c) eta += alpha[c] * f[c];
    acc += probit ? norm_cdf(std::clamp(eta, -8.0, 8.0)) : eta;
  }
  return acc / static_cast<double>(v.size());
}

std::vector<double> view_mu(const View& v, const VectorXd& gamma) {
  std::vector<double> mu(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) mu[i] = mu_from_gamma(gamma, *v.cs, v.at(i));
  return mu;
}

double pooled_two_sample_t(const std::vector<double>& a, const std::vector<double>& b,
                           bool* degenerate) {
  std::size_t na = a.size(), nb = b.size();
  if (na < 2 || nb < 2) {
    *degenerate = true;
    return 0.0;
  }
  double ma = std::accumulate(a.begin(), a.end(), 0.0) / static_cast<double>(na);
  double mb = std::accumulate(b.begin(), b.end(), 0.0) / static_cast<double>(nb);
  double va = 0.0, vb = 0.0;
  for (double x : a) va += (x - ma) * (x - ma);
  for (double x : b) vb += (x - mb) * (x - mb);
  double sp2 = (va + vb) / static_cast<double>(na + nb - 2);
  if (sp2 <= 0.0) {
    *degenerate = true;
    return 0.0;
  }
  *degenerate = false;
  return (ma - mb) / std::sqrt(sp2 * (1.0 / na + 1.0 / nb));
}

}  // namespace

TreatmentModel fit_treatment_model(const CrossSection& cs, int max_iter, double tol) {
  View v{&cs, nullptr};
  ExpFit f = fit_exponential(v, max_iter, tol);
  if (f.gamma.size() == 0) throw Error("treatment is identically zero; nothing to model");
  TreatmentModel tm;
  tm.names.push_back("(intercept)");
  for (const auto& n : cs.covariate_names) tm.names.push_back(n);
  tm.gamma.assign(f.gamma.data(), f.gamma.data() + f.gamma.size());
  tm.loglik = f.loglik;
  tm.iterations = f.iterations;
  tm.converged = f.converged;
  tm.mu.resize(cs.n_rows());
  for (std::size_t i = 0; i < cs.n_rows(); ++i) tm.mu[i] = mu_from_gamma(f.gamma, cs, i);
  return tm;
}

double treatment_mu(const TreatmentModel& tm, const CrossSection& cs, std::size_t row) {
  double eta = tm.gamma[0];
  for (std::size_t c = 0; c < cs.n_cov(); ++c) eta += tm.gamma[c + 1] * cs.value(row, c);
  return std::exp(eta);
}

double gps_density(double t, double mu) { return std::exp(-t / mu) / mu; }

std::vector<double> compute_gps(const TreatmentModel& tm, const CrossSection& cs) {
  std::vector<double> r(cs.n_rows());
  for (std::size_t i = 0; i < cs.n_rows(); ++i)
    r[i] = gps_density(cs.treatment[i], treatment_mu(tm, cs, i));
  return r;
}

int treatment_group(double t) { return t <= 1.0 ? 0 : (t <= 3.0 ? 1 : 2); }

BalanceReport balance_test(const CrossSection& cs, const TreatmentModel& tm, int n_blocks) {
  if (n_blocks < 2) throw Error("balance blocking needs at least 2 blocks");
  std::size_t n = cs.n_rows();
  BalanceReport rep;
  rep.n_blocks = n_blocks;

  std::vector<int> group(n);
  for (std::size_t i = 0; i < n; ++i) group[i] = treatment_group(cs.treatment[i]);

  std::vector<double> mu(n);
  for (std::size_t i = 0; i < n; ++i) mu[i] = treatment_mu(tm, cs, i);

  char note[160];
  for (std::size_t c = 0; c < cs.n_cov(); ++c) {
    for (int g = 0; g < 3; ++g) {
      BalanceCell cell;
      cell.covariate = cs.covariate_names[c];
      cell.group = g;

      std::vector<double> in, out, t_in;
      for (std::size_t i = 0; i < n; ++i) {
        if (group[i] == g) {
          in.push_back(cs.value(i, c));
          t_in.push_back(cs.treatment[i]);
        } else {
          out.push_back(cs.value(i, c));
        }
      }
      if (in.empty()) {
        std::snprintf(note, sizeof note, "group T%d is empty; its cells report t=0", g + 1);
        if (std::find(rep.notes.begin(), rep.notes.end(), note) == rep.notes.end())
          rep.notes.push_back(note);
        rep.cells.push_back(cell);
        continue;
      }

      bool degenerate = false;
      cell.t_before = pooled_two_sample_t(in, out, &degenerate);
      if (degenerate) {
        std::snprintf(note, sizeof note, "%s/T%d: degenerate variance before adjustment",
                      cell.covariate.c_str(), g + 1);
        rep.notes.push_back(note);
      }

      // Score everyone at the group's median treatment, block by score rank.
      std::sort(t_in.begin(), t_in.end());
      double t_med = quantile_sorted(t_in, 0.5);
      std::vector<std::size_t> order(n);
      for (std::size_t i = 0; i < n; ++i) order[i] = i;
      std::vector<double> score(n);
      for (std::size_t i = 0; i < n; ++i) score[i] = gps_density(t_med, mu[i]);
      std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (score[a] != score[b]) return score[a] < score[b];
        return a < b;
      });

      struct Block {
        std::vector<double> in, out;
      };
      std::vector<Block> blocks;
      Block cur;
      for (int b = 0; b < n_blocks; ++b) {
        std::size_t lo = n * static_cast<std::size_t>(b) / static_cast<std::size_t>(n_blocks);
        std::size_t hi =
            n * static_cast<std::size_t>(b + 1) / static_cast<std::size_t>(n_blocks);
        for (std::size_t i = lo; i < hi; ++i) {
          std::size_t r = order[i];
          (group[r] == g ? cur.in : cur.out).push_back(cs.value(r, c));
        }
        if (!cur.in.empty() && !cur.out.empty()) {
          blocks.push_back(std::move(cur));
          cur = Block{};
        }
        // else: carry the accumulated rows into the next block
      }
      if (!cur.in.empty() || !cur.out.empty()) {
        if (!blocks.empty() && (cur.in.empty() || cur.out.empty())) {
          auto& last = blocks.back();
          last.in.insert(last.in.end(), cur.in.begin(), cur.in.end());
          last.out.insert(last.out.end(), cur.out.begin(), cur.out.end());
        } else if (!cur.in.empty() && !cur.out.empty()) {
          blocks.push_back(std::move(cur));
        }
      }
      if (blocks.size() < static_cast<std::size_t>(n_blocks)) {
        std::snprintf(note, sizeof note, "%s/T%d: merged into %zu blocks (one side empty)",
                      cell.covariate.c_str(), g + 1, blocks.size());
        rep.notes.push_back(note);
      }

      double n_g = static_cast<double>(in.size());
      double diff = 0.0, var = 0.0;
      for (const auto& b : blocks) {
        double ngb = static_cast<double>(b.in.size());
        double ncb = static_cast<double>(b.out.size());
        double mi = std::accumulate(b.in.begin(), b.in.end(), 0.0) / ngb;
        double mo = std::accumulate(b.out.begin(), b.out.end(), 0.0) / ncb;
        double ss = 0.0;
        for (double x : b.in) ss += (x - mi) * (x - mi);
        for (double x : b.out) ss += (x - mo) * (x - mo);
        double dof = ngb + ncb - 2.0;
        double s2 = dof > 0 ? ss / dof : 0.0;
        double w = ngb / n_g;  // weight by where the group's members sit
        diff += w * (mi - mo);
        var += w * w * s2 * (1.0 / ngb + 1.0 / ncb);
      }
      if (var > 0.0) {
        cell.t_after = diff / std::sqrt(var);
      } else {
        cell.t_after = 0.0;
        std::snprintf(note, sizeof note, "%s/T%d: degenerate variance after blocking",
                      cell.covariate.c_str(), g + 1);
        rep.notes.push_back(note);
      }
      cell.flagged_before = std::abs(cell.t_before) > kFlag;
      cell.flagged_after = std::abs(cell.t_after) > kFlag;
      rep.cells.push_back(cell);
    }
  }
  return rep;
}

DoseResponse fit_dose_response(const CrossSection& cs, const GpsOptions& opt) {
  DoseResponse dr;
  dr.probit = opt.probit;
  dr.treatment = fit_treatment_model(cs, opt.max_iter, opt.tol);
  if (!dr.treatment.converged) throw Error("treatment model did not converge");

  View v{&cs, nullptr};
  VectorXd gamma(static_cast<Eigen::Index>(dr.treatment.gamma.size()));
  for (std::size_t i = 0; i < dr.treatment.gamma.size(); ++i)
    gamma[static_cast<Eigen::Index>(i)] = dr.treatment.gamma[i];
  std::vector<double> mu = view_mu(v, gamma);

  VectorXd alpha;
  if (!fit_outcome(v, mu, opt.probit, alpha))
    throw Error("outcome design is collinear; treatment may be degenerate");
  dr.alpha.assign(alpha.data(), alpha.data() + 6);

  dr.ts = opt.ts;
  double drf0 = drf_at(v, mu, alpha, opt.probit, 0.0);
  for (double t : dr.ts) {
    double d = t == 0.0 ? drf0 : drf_at(v, mu, alpha, opt.probit, t);
    dr.drf.push_back(d);
    dr.mte.push_back(d - drf0);
  }
  return dr;
}

void bootstrap_mte(const CrossSection& cs, const GpsOptions& opt, DoseResponse& dr) {
  if (opt.n_boot < 1) throw Error("bootstrap needs at least one replicate");
  if (cs.n_rows() < 100) throw Error("bootstrap needs at least 100 subscribers");
  std::size_t n = cs.n_rows();
  std::size_t nt = dr.ts.size();

  std::vector<double> reps(static_cast<std::size_t>(opt.n_boot) * nt, 0.0);
  std::vector<uint8_t> ok(static_cast<std::size_t>(opt.n_boot), 0);

  parallel_for(static_cast<std::size_t>(opt.n_boot), opt.threads, [&](std::size_t j) {
    Rng rng(opt.seed + static_cast<uint64_t>(j), "gps_boot");
    std::vector<std::size_t> idx(n);
    for (auto& i : idx) i = static_cast<std::size_t>(rng.below(static_cast<uint64_t>(n)));
    View v{&cs, &idx};
    ExpFit f;
    try {
      f = fit_exponential(v, opt.max_iter, opt.tol);
    } catch (const Error&) {
      return;
    }
    if (f.gamma.size() == 0 || !f.converged) return;
    std::vector<double> mu = view_mu(v, f.gamma);
    VectorXd alpha;
    if (!fit_outcome(v, mu, opt.probit, alpha)) return;
    double drf0 = drf_at(v, mu, alpha, opt.probit, 0.0);
    for (std::size_t k = 0; k < nt; ++k) {
      double t = dr.ts[k];
      double d = t == 0.0 ? drf0 : drf_at(v, mu, alpha, opt.probit, t);
      reps[j * nt + k] = d - drf0;
    }
    ok[j] = 1;
  });

  int used = 0;
  for (uint8_t o : ok) used += o;
  dr.boot_total = opt.n_boot;
  dr.boot_failed = opt.n_boot - used;
  if (dr.boot_failed > opt.max_fail * opt.n_boot)
    throw Error("more than " + std::to_string(static_cast<int>(opt.max_fail * 100)) +
                "% of bootstrap replicates failed");
  if (opt.n_boot == 1)
    dr.notes.push_back("single bootstrap replicate; the band is degenerate");

  dr.mte_lo.assign(nt, 0.0);
  dr.mte_hi.assign(nt, 0.0);
  std::vector<double> col;
  for (std::size_t k = 0; k < nt; ++k) {
    col.clear();
    for (std::size_t j = 0; j < static_cast<std::size_t>(opt.n_boot); ++j)
      if (ok[j]) col.push_back(reps[j * nt + k]);
    std::sort(col.begin(), col.end());
    double lo = quantile_sorted(col, 0.025);
    double hi = quantile_sorted(col, 0.975);
    // The band always contains the point estimate.
    dr.mte_lo[k] = std::min(lo, dr.mte[k]);
    dr.mte_hi[k] = std::max(hi, dr.mte[k]);
  }
}

double naive_treated_gap(const CrossSection& cs) {
  // High exposure means the top treatment group (more than three exposed
  // friends), the same bucket the balance table calls T3.
  double s1 = 0.0, s0 = 0.0;
  int64_t n1 = 0, n0 = 0;
  for (std::size_t i = 0; i < cs.n_rows(); ++i) {
    if (cs.treatment[i] > 3.0) {
      s1 += cs.outcome[i];
      ++n1;
    } else if (cs.treatment[i] == 0.0) {
      s0 += cs.outcome[i];
      ++n0;
    }
  }
  if (n1 == 0 || n0 == 0)
    throw Error("need both high-exposure and zero-exposure subscribers");
  return s1 / static_cast<double>(n1) - s0 / static_cast<double>(n0);
}

std::string balance_table(const BalanceReport& report) {
  std::string s;
  char line[200];
  std::snprintf(line, sizeof line, "%-22s %8s %8s %8s %8s %8s %8s\n", "covariate", "T1.pre",
                "T1.post", "T2.pre", "T2.post", "T3.pre", "T3.post");
  s += line;
  for (std::size_t i = 0; i + 2 < report.cells.size(); i += 3) {
    const auto& a = report.cells[i];
    const auto& b = report.cells[i + 1];
    const auto& c = report.cells[i + 2];
    auto f = [](double t, bool fl, char* buf, std::size_t cap) {
      std::snprintf(buf, cap, "%7.2f%s", t, fl ? "*" : " ");
    };
    char ca[16], cb[16], cc[16], cd[16], ce[16], cf[16];
    f(a.t_before, a.flagged_before, ca, sizeof ca);
    f(a.t_after, a.flagged_after, cb, sizeof cb);
    f(b.t_before, b.flagged_before, cc, sizeof cc);
    f(b.t_after, b.flagged_after, cd, sizeof cd);
    f(c.t_before, c.flagged_before, ce, sizeof ce);
    f(c.t_after, c.flagged_after, cf, sizeof cf);
    std::snprintf(line, sizeof line, "%-22s %8s %8s %8s %8s %8s %8s\n", a.covariate.c_str(),
                  ca, cb, cc, cd, ce, cf);
    s += line;
  }
  for (const auto& n : report.notes) s += "note: " + n + "\n";
  return s;
}

std::string dose_response_table(const DoseResponse& dr) {
  std::string s = "t,mte,ci_low,ci_high\n";
  char line[128];
  for (std::size_t k = 0; k < dr.ts.size(); ++k) {
    double lo = k < dr.mte_lo.size() ? dr.mte_lo[k] : dr.mte[k];
    double hi = k < dr.mte_hi.size() ? dr.mte_hi[k] : dr.mte[k];
    std::snprintf(line, sizeof line, "%g,%.10g,%.10g,%.10g\n", dr.ts[k], dr.mte[k], lo, hi);
    s += line;
  }
  return s;
}

}  // namespace peerchurn
