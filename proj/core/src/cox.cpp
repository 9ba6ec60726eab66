#include "peerchurn/cox.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <unordered_map>

#include "peerchurn/csv.hpp"
#include "peerchurn/error.hpp"
#include "peerchurn/rng.hpp"

namespace peerchurn {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Panel rows regrouped by month. Only months with at least one event enter
// the partial likelihood; the others matter solely for the exported baseline
// (which is zero there anyway).
struct FitData {
  int p = 0;          // fitted covariates
  int S = 0;          // subjects
  int T = 0;          // risk months
  std::vector<int> group_month;   // months that hold rows, ascending
  std::vector<int> group_begin;   // offsets into the arrays below, size groups+1
  std::vector<int> group_events;  // d_t per group
  std::vector<double> X;          // standardized covariates, row-major
  std::vector<uint8_t> ev;
  std::vector<int> slot;
  std::vector<int> d_slot;        // events per subject, 0 or 1
  std::vector<int> slot_sub;      // subscriber index per slot
  std::vector<double> mean, sd;   // standardization per covariate
  int64_t n_events = 0;
};

FitData prepare(const SurvivalPanel& panel, const std::vector<std::string>& covariates,
                bool standardize, bool allow_empty = false) {
  FitData fd;
  fd.p = static_cast<int>(covariates.size());
  fd.T = panel.risk_months;
  if (panel.n_rows() == 0) throw Error("survival panel is empty");
  if (fd.p == 0 && !allow_empty) throw Error("no covariates named for the fit");

  std::vector<int> cols;
  for (const auto& name : covariates) {
    int c = panel.column(name);
    if (c < 0) throw Error("unknown panel column '" + name + "'");
    cols.push_back(c);
  }

  std::vector<std::vector<int>> buckets(static_cast<std::size_t>(fd.T) + 1);
  for (std::size_t r = 0; r < panel.n_rows(); ++r) {
    int t = panel.month[r];
    if (t < 1 || t > fd.T) throw Error("panel row outside the risk window");
    buckets[static_cast<std::size_t>(t)].push_back(static_cast<int>(r));
  }

  std::unordered_map<int, int> slot_of;
  fd.group_begin.push_back(0);
  for (int t = 1; t <= fd.T; ++t) {
    const auto& b = buckets[static_cast<std::size_t>(t)];
    if (b.empty()) continue;
    fd.group_month.push_back(t);
    int d = 0;
    for (int r : b) {
      fd.ev.push_back(panel.event[static_cast<std::size_t>(r)]);
      d += panel.event[static_cast<std::size_t>(r)];
      int sub = panel.sub[static_cast<std::size_t>(r)];
      auto it = slot_of.find(sub);
      int s;
      if (it == slot_of.end()) {
        s = static_cast<int>(fd.slot_sub.size());
        slot_of.emplace(sub, s);
        fd.slot_sub.push_back(sub);
        fd.d_slot.push_back(0);
      } else {
        s = it->second;
      }
      fd.slot.push_back(s);
      fd.d_slot[static_cast<std::size_t>(s)] += panel.event[static_cast<std::size_t>(r)];
      for (int c : cols) fd.X.push_back(panel.value(static_cast<std::size_t>(r), static_cast<std::size_t>(c)));
    }
    fd.group_events.push_back(d);
    fd.n_events += d;
    fd.group_begin.push_back(static_cast<int>(fd.ev.size()));
  }
  fd.S = static_cast<int>(fd.slot_sub.size());
  if (fd.n_events == 0) throw Error("panel has no events; nothing to fit");
  for (int di : fd.d_slot)
    if (di > 1) throw Error("subject with more than one event; the panel is malformed");

  std::size_t n = fd.ev.size();
  fd.mean.assign(static_cast<std::size_t>(fd.p), 0.0);
  fd.sd.assign(static_cast<std::size_t>(fd.p), 1.0);
  if (standardize) {
    for (int c = 0; c < fd.p; ++c) {
      double m = 0.0;
      for (std::size_t r = 0; r < n; ++r) m += fd.X[r * static_cast<std::size_t>(fd.p) + static_cast<std::size_t>(c)];
      m /= static_cast<double>(n);
      double v = 0.0;
      for (std::size_t r = 0; r < n; ++r) {
        double d = fd.X[r * static_cast<std::size_t>(fd.p) + static_cast<std::size_t>(c)] - m;
        v += d * d;
      }
      double s = std::sqrt(v / static_cast<double>(n));
      if (s <= 0.0) throw Error("covariate '" + covariates[static_cast<std::size_t>(c)] + "' is constant");
      fd.mean[static_cast<std::size_t>(c)] = m;
      fd.sd[static_cast<std::size_t>(c)] = s;
      for (std::size_t r = 0; r < n; ++r) {
        auto& x = fd.X[r * static_cast<std::size_t>(fd.p) + static_cast<std::size_t>(c)];
        x = (x - m) / s;
      }
    }
  }

  // A column constant inside every risk set that holds an event is collinear
  // with the baseline on this time scale and has no identified coefficient.
  for (int c = 0; c < fd.p; ++c) {
    bool varies = false;
    for (std::size_t g = 0; g < fd.group_month.size() && !varies; ++g) {
      if (fd.group_events[g] == 0) continue;
      int lo = fd.group_begin[g], hi = fd.group_begin[g + 1];
      double first = fd.X[static_cast<std::size_t>(lo) * static_cast<std::size_t>(fd.p) + static_cast<std::size_t>(c)];
      for (int r = lo + 1; r < hi; ++r)
        if (fd.X[static_cast<std::size_t>(r) * static_cast<std::size_t>(fd.p) + static_cast<std::size_t>(c)] != first) {
          varies = true;
          break;
        }
    }
    if (!varies)
      throw Error("covariate '" + covariates[static_cast<std::size_t>(c)] +
                  "' is constant within every risk set; on the panel-month time scale it is "
                  "collinear with the baseline hazard");
  }
  return fd;
}

struct Eval {
  double pl = 0.0;
  double ppl = 0.0;
  VectorXd gb;   // p
  MatrixXd Ibb;  // p x p
  VectorXd gw;   // S, frailty only
  VectorXd a;    // S, diagonal of the omega information before the rank-k part
  MatrixXd B;    // S x p cross block
  MatrixXd Q;    // S x k, q_t columns for event months
  VectorXd lam;  // k, event counts per event month
};

double row_eta(const FitData& fd, std::size_t r, const VectorXd& beta, const VectorXd& omega,
               bool frailty) {
  const double* x = &fd.X[r * static_cast<std::size_t>(fd.p)];
  double e = 0.0;
  for (int c = 0; c < fd.p; ++c) e += beta[c] * x[c];
  if (frailty) e += omega[fd.slot[r]];
  return e;
}

// Penalized partial loglik only; the cheap line-search evaluation.
double eval_ppl(const FitData& fd, const VectorXd& beta, const VectorXd& omega, bool frailty,
                double nu, Ties ties, std::vector<double>& eta_buf) {
  double pl = 0.0;
  std::size_t n = fd.ev.size();
  eta_buf.resize(n);
  for (std::size_t r = 0; r < n; ++r) eta_buf[r] = row_eta(fd, r, beta, omega, frailty);
  for (std::size_t g = 0; g < fd.group_month.size(); ++g) {
    int d = fd.group_events[g];
    if (d == 0) continue;
    int lo = fd.group_begin[g], hi = fd.group_begin[g + 1];
    double m = eta_buf[static_cast<std::size_t>(lo)];
    for (int r = lo + 1; r < hi; ++r) m = std::max(m, eta_buf[static_cast<std::size_t>(r)]);
    double w = 0.0, we = 0.0;
    for (int r = lo; r < hi; ++r) {
      double v = std::exp(eta_buf[static_cast<std::size_t>(r)] - m);
      w += v;
      if (fd.ev[static_cast<std::size_t>(r)]) {
        we += v;
        pl += eta_buf[static_cast<std::size_t>(r)];
      }
    }
    if (ties == Ties::breslow) {
      pl -= d * (m + std::log(w));
    } else {
      for (int l = 0; l < d; ++l)
        pl -= m + std::log(w - (static_cast<double>(l) / d) * we);
    }
  }
  double ppl = pl;
  if (frailty)
    for (int i = 0; i < fd.S; ++i) ppl += nu * (omega[i] - std::exp(omega[i]));
  return ppl;
}

Eval evaluate(const FitData& fd, const VectorXd& beta, const VectorXd& omega, bool frailty,
              double nu, Ties ties) {
  int p = fd.p, S = fd.S;
  Eval e;
  e.gb = VectorXd::Zero(p);
  e.Ibb = MatrixXd::Zero(p, p);
  if (frailty) {
    e.gw = VectorXd::Zero(S);
    e.a = VectorXd::Zero(S);
    e.B = MatrixXd::Zero(S, p);
    int k = 0;
    for (int d : fd.group_events) k += d > 0;
    e.Q = MatrixXd::Zero(S, k);
    e.lam = VectorXd::Zero(k);
  }

  std::vector<double> eta(fd.ev.size());
  for (std::size_t r = 0; r < eta.size(); ++r) eta[r] = row_eta(fd, r, beta, omega, frailty);

  VectorXd s1(p), xr(p);
  MatrixXd s2(p, p);
  int gi = -1;
  for (std::size_t g = 0; g < fd.group_month.size(); ++g) {
    int d = fd.group_events[g];
    if (d == 0) continue;
    ++gi;
    int lo = fd.group_begin[g], hi = fd.group_begin[g + 1];
    double m = eta[static_cast<std::size_t>(lo)];
    for (int r = lo + 1; r < hi; ++r) m = std::max(m, eta[static_cast<std::size_t>(r)]);

    double w = 0.0, we = 0.0;
    s1.setZero();
    s2.setZero();
    VectorXd s1e = VectorXd::Zero(p);
    MatrixXd s2e = MatrixXd::Zero(p, p);
    for (int r = lo; r < hi; ++r) {
      const double* x = &fd.X[static_cast<std::size_t>(r) * static_cast<std::size_t>(p)];
      for (int c = 0; c < p; ++c) xr[c] = x[c];
      double v = std::exp(eta[static_cast<std::size_t>(r)] - m);
      w += v;
      s1 += v * xr;
      s2.selfadjointView<Eigen::Lower>().rankUpdate(xr, v);
      if (fd.ev[static_cast<std::size_t>(r)]) {
        we += v;
        s1e += v * xr;
        if (ties == Ties::efron) s2e.selfadjointView<Eigen::Lower>().rankUpdate(xr, v);
        e.pl += eta[static_cast<std::size_t>(r)];
        e.gb += xr;
      }
    }
    s2 = s2.selfadjointView<Eigen::Lower>();
    if (ties == Ties::efron) s2e = s2e.selfadjointView<Eigen::Lower>();

    if (ties == Ties::breslow) {
      e.pl -= d * (m + std::log(w));
      VectorXd sbar = s1 / w;
      e.gb -= d * sbar;
      e.Ibb += d * (s2 / w - sbar * sbar.transpose());
      if (frailty) {
        e.lam[gi] = d;
        for (int r = lo; r < hi; ++r) {
          double pr = std::exp(eta[static_cast<std::size_t>(r)] - m) / w;
          int s = fd.slot[static_cast<std::size_t>(r)];
          e.gw[s] -= d * pr;
          e.a[s] += d * pr;
          e.Q(s, gi) = pr;
          const double* x = &fd.X[static_cast<std::size_t>(r) * static_cast<std::size_t>(p)];
          for (int c = 0; c < p; ++c) e.B(s, c) += d * pr * (x[c] - sbar[c]);
        }
      }
    } else {
      for (int l = 0; l < d; ++l) {
        double f = static_cast<double>(l) / d;
        double wl = w - f * we;
        VectorXd s1l = s1 - f * s1e;
        MatrixXd s2l = s2 - f * s2e;
        e.pl -= m + std::log(wl);
        VectorXd sbar = s1l / wl;
        e.gb -= sbar;
        e.Ibb += s2l / wl - sbar * sbar.transpose();
      }
    }
  }

  e.ppl = e.pl;
  if (frailty) {
    for (int i = 0; i < S; ++i) {
      double ew = std::exp(omega[i]);
      e.ppl += nu * (omega[i] - ew);
      e.gw[i] += fd.d_slot[static_cast<std::size_t>(i)] + nu * (1.0 - ew);
      e.a[i] += nu * ew;
    }
  }
  return e;
}

struct InnerResult {
  double pl = 0.0;
  double ppl = 0.0;
  double ilpl = 0.0;  // profile marginal loglik at this theta
  int iterations = 0;
  bool converged = false;
  MatrixXd cov_beta;  // standardized scale
};

// Joint Newton over (beta, omega) at fixed theta. The omega information is
// diagonal minus a rank-k update (k = event months), so the solve and the
// Schur complement for beta stay exact and cheap.
InnerResult newton_fit(const FitData& fd, bool frailty, double theta, Ties ties,
                       const CoxOptions& opt, VectorXd& beta, VectorXd& omega) {
  double nu = frailty ? 1.0 / theta : 0.0;
  InnerResult res;
  std::vector<double> eta_buf;

  Eval e = evaluate(fd, beta, omega, frailty, nu, ties);
  MatrixXd Sc;
  for (int iter = 1; iter <= opt.max_iter; ++iter) {
    res.iterations = iter;
    double gmax = e.gb.lpNorm<Eigen::Infinity>();
    if (frailty) gmax = std::max(gmax, e.gw.lpNorm<Eigen::Infinity>());

    VectorXd db(fd.p), dw;
    if (!frailty) {
      Sc = e.Ibb;
      db = Sc.ldlt().solve(e.gb);
    } else {
      VectorXd dinv = e.a.cwiseInverse();
      MatrixXd DQ = dinv.asDiagonal() * e.Q;                       // S x k
      MatrixXd K = e.lam.cwiseInverse().asDiagonal().toDenseMatrix() - e.Q.transpose() * DQ;
      Eigen::LDLT<MatrixXd> Kf(K);
      auto wapply = [&](const VectorXd& y) -> VectorXd {
        VectorXd dy = dinv.asDiagonal() * y;
        return dy + DQ * Kf.solve(e.Q.transpose() * dy);
      };
      MatrixXd WB(fd.S, fd.p);
      for (int c = 0; c < fd.p; ++c) WB.col(c) = wapply(e.B.col(c));
      Sc = e.Ibb - e.B.transpose() * WB;
      VectorXd wg = wapply(e.gw);
      db = Sc.ldlt().solve(e.gb - e.B.transpose() * wg);
      dw = wapply(e.gw - e.B * db);
    }

    if (gmax <= opt.tol) {
      res.converged = true;
      break;
    }

    double gdot = e.gb.dot(db) + (frailty ? e.gw.dot(dw) : 0.0);
    double step = 1.0;
    VectorXd nb, nw;
    double nppl = -1e300;
    for (int h = 0; h < 40; ++h) {
      nb = beta + step * db;
      if (frailty) nw = omega + step * dw;
      nppl = eval_ppl(fd, nb, frailty ? nw : omega, frailty, nu, ties, eta_buf);
      if (std::isfinite(nppl) && nppl >= e.ppl + 1e-4 * step * gdot) break;
      step *= 0.5;
    }
    if (!std::isfinite(nppl) || nppl < e.ppl - 1e-9) break;  // no usable step
    beta = nb;
    if (frailty) omega = nw;
    double gain = nppl - e.ppl;
    e = evaluate(fd, beta, omega, frailty, nu, ties);
    if (gain < 1e-13 * (1.0 + std::abs(e.ppl))) {
      double g2 = e.gb.lpNorm<Eigen::Infinity>();
      if (frailty) g2 = std::max(g2, e.gw.lpNorm<Eigen::Infinity>());
      res.converged = g2 <= std::max(opt.tol, 1e-6);
      break;
    }
  }

  res.pl = e.pl;
  res.ppl = e.ppl;
  res.cov_beta = Sc.inverse();
  if (!frailty) {
    res.ilpl = e.pl;
  } else {
    // Exact profile marginal loglik, shifted by the theta-free constant so
    // that theta -> 0 recovers the plain partial loglik.
    double corr = 0.0;
    for (int i = 0; i < fd.S; ++i)
      corr += nu * (omega[i] - std::exp(omega[i]) + 1.0);
    double per_event = 1.0 - (nu + 1.0) * std::log1p(theta);
    corr += static_cast<double>(fd.n_events) * per_event;
    res.ilpl = e.pl + corr;
  }
  return res;
}

}  // namespace

double normal_two_sided_p(double z) { return std::erfc(std::abs(z) / std::sqrt(2.0)); }

CoxFit fit_cox(const SurvivalPanel& panel, const std::vector<std::string>& covariates,
               const CoxOptions& opt) {
  if (opt.frailty && opt.ties == Ties::efron)
    throw Error("efron ties are only supported without frailty");
  if (opt.theta == 0.0 && opt.frailty) {
    CoxOptions o = opt;
    o.frailty = false;
    o.theta = -1.0;
    return fit_cox(panel, covariates, o);
  }

  FitData fd = prepare(panel, covariates, true);
  int p = fd.p;

  CoxFit fit;
  fit.names = covariates;
  fit.n_rows = static_cast<int64_t>(fd.ev.size());
  fit.n_events = fd.n_events;
  fit.n_subjects = fd.S;

  VectorXd beta0 = VectorXd::Zero(p);
  VectorXd omega0 = VectorXd::Zero(fd.S);
  {
    std::vector<double> eta_buf;
    fit.loglik_null = eval_ppl(fd, beta0, omega0, false, 0.0, opt.ties, eta_buf);
  }

  // Plain fit first; it is the theta = 0 reference and the warm start.
  VectorXd beta = VectorXd::Zero(p);
  VectorXd omega = VectorXd::Zero(fd.S);
  InnerResult plain = newton_fit(fd, false, 0.0, opt.ties, opt, beta, omega);
  double pl0 = plain.pl;

  InnerResult best = plain;
  VectorXd best_beta = beta, best_omega = omega;
  double best_theta = 0.0;
  int evals = 1;

  if (opt.frailty) {
    auto run_at = [&](double th, VectorXd& b, VectorXd& w) {
      ++evals;
      return newton_fit(fd, true, th, opt.ties, opt, b, w);
    };
    if (opt.theta > 0.0) {
      InnerResult r = run_at(opt.theta, beta, omega);
      best = r;
      best_beta = beta;
      best_omega = omega;
      best_theta = opt.theta;
    } else {
      double l0 = std::log(opt.theta_min), l1 = std::log(opt.theta_max);
      int ng = std::max(opt.theta_grid, 4);
      std::vector<double> thetas(static_cast<std::size_t>(ng));
      std::vector<double> vals(static_cast<std::size_t>(ng));
      int ibest = -1;
      for (int i = 0; i < ng; ++i) {
        double th = std::exp(l0 + (l1 - l0) * i / (ng - 1));
        thetas[static_cast<std::size_t>(i)] = th;
        InnerResult r = run_at(th, beta, omega);
        vals[static_cast<std::size_t>(i)] = r.ilpl;
        if (ibest < 0 || r.ilpl > vals[static_cast<std::size_t>(ibest)]) ibest = i;
      }
      if (vals[static_cast<std::size_t>(ibest)] > pl0) {
        // Golden-section refinement on log theta between the grid neighbours.
        double xa = std::log(thetas[static_cast<std::size_t>(std::max(ibest - 1, 0))]);
        double xb = std::log(thetas[static_cast<std::size_t>(std::min(ibest + 1, ng - 1))]);
        const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
        double x1 = xb - gr * (xb - xa), x2 = xa + gr * (xb - xa);
        auto eval_log = [&](double x) {
          InnerResult r = run_at(std::exp(x), beta, omega);
          return r.ilpl;
        };
        double f1 = eval_log(x1), f2 = eval_log(x2);
        while (xb - xa > 5e-3) {
          if (f1 < f2) {
            xa = x1;
            x1 = x2;
            f1 = f2;
            x2 = xa + gr * (xb - xa);
            f2 = eval_log(x2);
          } else {
            xb = x2;
            x2 = x1;
            f2 = f1;
            x1 = xb - gr * (xb - xa);
            f1 = eval_log(x1);
          }
        }
        double xhat = 0.5 * (xa + xb);
        double th = std::exp(xhat);
        InnerResult r = run_at(th, beta, omega);
        best = r;
        best_beta = beta;
        best_omega = omega;
        best_theta = th;
      }
      // else: the profile peaks at the boundary, keep the plain fit.
    }
  }

  fit.theta = best_theta;
  fit.loglik = best.pl;
  fit.marginal_loglik = best.ilpl;
  fit.frailty_lrt = std::max(0.0, 2.0 * (best.ilpl - pl0));
  fit.iterations = best.iterations;
  fit.theta_evals = evals;
  fit.converged = best.converged;

  fit.beta.resize(static_cast<std::size_t>(p));
  fit.se.resize(static_cast<std::size_t>(p));
  double shift = 0.0;
  for (int c = 0; c < p; ++c) {
    fit.beta[static_cast<std::size_t>(c)] = best_beta[c] / fd.sd[static_cast<std::size_t>(c)];
    fit.se[static_cast<std::size_t>(c)] =
        std::sqrt(std::max(0.0, best.cov_beta(c, c))) / fd.sd[static_cast<std::size_t>(c)];
    shift += best_beta[c] * fd.mean[static_cast<std::size_t>(c)] / fd.sd[static_cast<std::size_t>(c)];
  }

  if (best_theta > 0.0) {
    fit.frailty_sub = fd.slot_sub;
    fit.frailty_log.resize(static_cast<std::size_t>(fd.S));
    for (int i = 0; i < fd.S; ++i) fit.frailty_log[static_cast<std::size_t>(i)] = best_omega[i];
  }

  // Breslow baseline per month, shifted back to the original covariate scale.
  fit.baseline.assign(static_cast<std::size_t>(fd.T), 0.0);
  bool frail = best_theta > 0.0;
  for (std::size_t g = 0; g < fd.group_month.size(); ++g) {
    int d = fd.group_events[g];
    if (d == 0) continue;
    int lo = fd.group_begin[g], hi = fd.group_begin[g + 1];
    double m = -1e300;
    std::vector<double> etas(static_cast<std::size_t>(hi - lo));
    for (int r = lo; r < hi; ++r) {
      double v = row_eta(fd, static_cast<std::size_t>(r), best_beta, best_omega, frail);
      etas[static_cast<std::size_t>(r - lo)] = v;
      m = std::max(m, v);
    }
    double w = 0.0;
    for (double v : etas) w += std::exp(v - m);
    double h0_std = d / (w * std::exp(m));
    fit.baseline[static_cast<std::size_t>(fd.group_month[g] - 1)] = h0_std * std::exp(-shift);
  }
  return fit;
}

double cox_pl_at(const SurvivalPanel& panel, const std::vector<std::string>& covariates,
                 const std::vector<double>& beta, Ties ties) {
  FitData fd = prepare(panel, covariates, false);
  if (beta.size() != static_cast<std::size_t>(fd.p)) throw Error("beta size mismatch");
  VectorXd b(fd.p);
  for (int c = 0; c < fd.p; ++c) b[c] = beta[static_cast<std::size_t>(c)];
  VectorXd w = VectorXd::Zero(fd.S);
  std::vector<double> eta_buf;
  return eval_ppl(fd, b, w, false, 0.0, ties, eta_buf);
}

PlGrad partial_loglik_and_grad(const SurvivalPanel& panel,
                               const std::vector<std::string>& covariates,
                               const std::vector<double>& beta, double theta, Ties ties) {
  if (theta < 0.0) throw Error("theta must be non-negative");
  FitData fd = prepare(panel, covariates, false, true);
  if (beta.size() != static_cast<std::size_t>(fd.p)) throw Error("beta size mismatch");
  VectorXd b(fd.p);
  for (int c = 0; c < fd.p; ++c) b[c] = beta[static_cast<std::size_t>(c)];
  VectorXd w = VectorXd::Zero(std::max(fd.S, 1));
  bool frail = theta > 0.0;
  Eval e = evaluate(fd, b, w, frail, frail ? 1.0 / theta : 0.0, ties);
  PlGrad out;
  out.value = e.ppl;
  out.grad.resize(static_cast<std::size_t>(fd.p));
  for (int c = 0; c < fd.p; ++c) out.grad[static_cast<std::size_t>(c)] = e.gb[c];
  return out;
}

std::vector<double> martingale_residuals(const SurvivalPanel& panel, const CoxFit& fit) {
  std::unordered_map<int, int> slot_of;
  std::vector<int> subs;
  if (!fit.frailty_sub.empty()) {
    subs = fit.frailty_sub;
    for (std::size_t i = 0; i < subs.size(); ++i) slot_of.emplace(subs[i], static_cast<int>(i));
  } else {
    for (std::size_t r = 0; r < panel.n_rows(); ++r)
      if (slot_of.emplace(panel.sub[r], static_cast<int>(subs.size())).second)
        subs.push_back(panel.sub[r]);
  }
  std::vector<int> cols;
  for (const auto& n : fit.names) {
    int c = panel.column(n);
    if (c < 0) throw Error("fit names a column the panel lacks");
    cols.push_back(c);
  }
  std::vector<double> m(subs.size(), 0.0);
  for (std::size_t r = 0; r < panel.n_rows(); ++r) {
    auto it = slot_of.find(panel.sub[r]);
    if (it == slot_of.end()) continue;
    int s = it->second;
    double eta = 0.0;
    for (std::size_t j = 0; j < cols.size(); ++j)
      eta += fit.beta[j] * panel.value(r, static_cast<std::size_t>(cols[j]));
    double frail = fit.frailty_log.empty() ? 0.0 : fit.frailty_log[static_cast<std::size_t>(s)];
    double h0 = fit.baseline[static_cast<std::size_t>(panel.month[r] - 1)];
    m[static_cast<std::size_t>(s)] += panel.event[r] - h0 * std::exp(eta + frail);
  }
  return m;
}

std::vector<RelativeHazard> mc_relative_hazard(double delta_hat, double se,
                                               const std::vector<int>& ks, int n_draws,
                                               uint64_t seed) {
  if (n_draws < 2) throw Error("mc_relative_hazard needs at least 2 draws");
  std::vector<double> deltas(static_cast<std::size_t>(n_draws));
  Rng rng(seed, "mc_relative_hazard");
  for (auto& d : deltas) d = delta_hat + se * rng.normal();

  std::vector<RelativeHazard> out;
  std::vector<double> vals(deltas.size());
  for (int k : ks) {
    RelativeHazard rh;
    rh.k = k;
    if (k == 0) {
      out.push_back(rh);
      continue;
    }
    double sum = 0.0;
    for (std::size_t j = 0; j < deltas.size(); ++j) {
      vals[j] = std::exp(deltas[j] * k);
      sum += vals[j];
    }
    rh.mean = sum / static_cast<double>(n_draws);
    std::sort(vals.begin(), vals.end());
    rh.lo = quantile_sorted(vals, 0.025);
    rh.hi = quantile_sorted(vals, 0.975);
    out.push_back(rh);
  }
  return out;
}

std::string cox_fit_table(const CoxFit& fit) {
  std::string s;
  char line[256];
  std::snprintf(line, sizeof line, "%-12s %10s %10s %10s %8s %10s\n", "covariate", "coef",
                "exp(coef)", "se", "z", "p");
  s += line;
  for (std::size_t j = 0; j < fit.names.size(); ++j) {
    double z = fit.se[j] > 0 ? fit.beta[j] / fit.se[j] : 0.0;
    double p = normal_two_sided_p(z);
    const char* stars = p <= 0.01 ? " ***" : p <= 0.05 ? " **" : p <= 0.10 ? " *" : "";
    std::snprintf(line, sizeof line, "%-12s %10.6f %10.4f %10.6f %8.3f %10.3g%s\n",
                  fit.names[j].c_str(), fit.beta[j], std::exp(fit.beta[j]), fit.se[j], z, p,
                  stars);
    s += line;
  }
  std::snprintf(line, sizeof line,
                "\nn=%lld rows, %d subjects, %lld events\nloglik %.4f (null %.4f)\n",
                static_cast<long long>(fit.n_rows), fit.n_subjects,
                static_cast<long long>(fit.n_events), fit.loglik, fit.loglik_null);
  s += line;
  if (fit.theta > 0.0) {
    double x = fit.frailty_lrt;
    double pmix = x > 0.0 ? 0.5 * std::erfc(std::sqrt(0.5 * x)) : 1.0;
    std::snprintf(line, sizeof line,
                  "frailty variance %.4f, marginal loglik %.4f, LRT %.2f (p %.3g)\n", fit.theta,
                  fit.marginal_loglik, fit.frailty_lrt, pmix);
    s += line;
  } else {
    s += "frailty variance 0 (profile peaks at the no-frailty boundary)\n";
  }
  return s;
}

}  // namespace peerchurn
