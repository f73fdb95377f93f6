#include "lseg/gmm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "lseg/errors.hpp"
#include "lseg/rng.hpp"

namespace lseg {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

double log_gauss(double x, double mean, double var) {
  double d = x - mean;
  return -0.5 * (kLog2Pi + std::log(var) + d * d / var);
}

// log(exp(a) + exp(b)) without overflow
double log_add(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity()) return b;
  if (b == -std::numeric_limits<double>::infinity()) return a;
  double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

// One EM iteration in place. Returns the data log-likelihood under the
// model *before* the update.
double em_iteration(Gmm1D& g, const std::vector<double>& xs) {
  const int k = static_cast<int>(g.comps.size());
  const size_t n = xs.size();
  std::vector<double> nk(k, 0.0), sum(k, 0.0), sumsq(k, 0.0);
  std::vector<double> logw(k);
  for (int c = 0; c < k; ++c)
    logw[c] = g.comps[c].weight > 0 ? std::log(g.comps[c].weight)
                                    : -std::numeric_limits<double>::infinity();
  double ll = 0;
  std::vector<double> lp(k);
  for (size_t i = 0; i < n; ++i) {
    double tot = -std::numeric_limits<double>::infinity();
    for (int c = 0; c < k; ++c) {
      lp[c] = logw[c] + log_gauss(xs[i], g.comps[c].mean, g.comps[c].var);
      tot = log_add(tot, lp[c]);
    }
    ll += tot;
    for (int c = 0; c < k; ++c) {
      double r = std::exp(lp[c] - tot);
      nk[c] += r;
      sum[c] += r * xs[i];
      sumsq[c] += r * xs[i] * xs[i];
    }
  }
  for (int c = 0; c < k; ++c) {
    if (nk[c] > 1e-12) {
      double mean = sum[c] / nk[c];
      double var = sumsq[c] / nk[c] - mean * mean;
      g.comps[c].weight = nk[c] / static_cast<double>(n);
      g.comps[c].mean = mean;
      g.comps[c].var = std::max(var, kGmmVarianceFloor);
    } else {
      // Dead component: keep its location, zero it out of the mixture.
      g.comps[c].weight = 0.0;
      g.comps[c].var = std::max(g.comps[c].var, kGmmVarianceFloor);
    }
  }
  // renormalize against accumulated rounding
  double wsum = 0;
  for (auto& cm : g.comps) wsum += cm.weight;
  if (wsum > 0)
    for (auto& cm : g.comps) cm.weight /= wsum;
  return ll;
}

}  // namespace

double Gmm1D::log_likelihood(double x) const {
  double tot = -std::numeric_limits<double>::infinity();
  for (const auto& c : comps) {
    if (c.weight <= 0) continue;
    tot = log_add(tot, std::log(c.weight) + log_gauss(x, c.mean, c.var));
  }
  return tot;
}

double Gmm1D::total_log_likelihood(const std::vector<double>& xs) const {
  double s = 0;
  for (double x : xs) s += log_likelihood(x);
  return s;
}

Gmm1D fit_gmm(const std::vector<double>& samples, int k, uint64_t seed,
              std::vector<double>* ll_trace, int max_em_iters) {
  if (samples.empty()) throw DataError("fit_gmm: empty sample set");
  if (k < 1) throw ConfigError("fit_gmm: k must be >= 1");
  k = std::min<int>(k, static_cast<int>(samples.size()));

  Rng rng(seed);
  const size_t n = samples.size();

  // k-means++ seeding on the 1-D samples
  std::vector<double> centers;
  centers.push_back(samples[rng.below(n)]);
  std::vector<double> d2(n);
  while (static_cast<int>(centers.size()) < k) {
    double total = 0;
    for (size_t i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (double c : centers) best = std::min(best, (samples[i] - c) * (samples[i] - c));
      d2[i] = best;
      total += best;
    }
    if (total <= 0) {
      centers.push_back(centers.back());  // all mass on existing centers
      continue;
    }
    double target = rng.uniform01() * total;
    double acc = 0;
    size_t pick = n - 1;
    for (size_t i = 0; i < n; ++i) {
      acc += d2[i];
      if (acc >= target) {
        pick = i;
        break;
      }
    }
    centers.push_back(samples[pick]);
  }

  // hard assignment to the nearest center -> initial mixture
  std::vector<double> nk(k, 0.0), sum(k, 0.0), sumsq(k, 0.0);
  for (size_t i = 0; i < n; ++i) {
    int best = 0;
    double bd = std::numeric_limits<double>::infinity();
    for (int c = 0; c < k; ++c) {
      double d = (samples[i] - centers[c]) * (samples[i] - centers[c]);
      if (d < bd) {
        bd = d;
        best = c;
      }
    }
    nk[best] += 1;
    sum[best] += samples[i];
    sumsq[best] += samples[i] * samples[i];
  }
  Gmm1D g;
  g.comps.resize(k);
  for (int c = 0; c < k; ++c) {
    if (nk[c] > 0) {
      double mean = sum[c] / nk[c];
      double var = sumsq[c] / nk[c] - mean * mean;
      g.comps[c] = {nk[c] / static_cast<double>(n), mean, std::max(var, kGmmVarianceFloor)};
    } else {
      g.comps[c] = {0.0, centers[c], kGmmVarianceFloor};
    }
  }

  if (ll_trace) ll_trace->clear();
  double prev_ll = -std::numeric_limits<double>::infinity();
  for (int it = 0; it < max_em_iters; ++it) {
    double ll = em_iteration(g, samples);
    if (ll_trace) ll_trace->push_back(ll);
    if (it > 0 && ll - prev_ll < 1e-10 * (1.0 + std::abs(ll))) break;
    prev_ll = ll;
  }
  return g;
}

Gmm1D refit_gmm(const Gmm1D& init, const std::vector<double>& samples, int em_iters) {
  if (samples.empty()) throw DataError("refit_gmm: empty sample set");
  Gmm1D g = init;
  for (int it = 0; it < em_iters; ++it) em_iteration(g, samples);
  return g;
}

}  // namespace lseg
