#pragma once

#include <cstdint>
#include <vector>

namespace lseg {

struct GmmComponent {
  double weight = 0;
  double mean = 0;
  double var = 0;
};

// 1-D Gaussian mixture. CT slices are single-channel, so the GrabCut
// appearance models live on windowed intensity rather than color.
struct Gmm1D {
  std::vector<GmmComponent> comps;

  double log_likelihood(double x) const;
  double total_log_likelihood(const std::vector<double>& xs) const;
};

constexpr double kGmmVarianceFloor = 1e-6;

// EM fit with k-means++-style seeding. K is reduced to the sample count when
// there are fewer samples than components. Deterministic given seed.
// Throws DataError on an empty sample set.
// If ll_trace is non-null it receives the data log-likelihood after the
// initial fit and after every EM iteration (non-decreasing within 1e-9).
Gmm1D fit_gmm(const std::vector<double>& samples, int k, uint64_t seed,
              std::vector<double>* ll_trace = nullptr, int max_em_iters = 30);

// One EM pass warm-started from a previous model on a (possibly different)
// sample set. Used by the GrabCut loop to keep the energy monotone.
Gmm1D refit_gmm(const Gmm1D& init, const std::vector<double>& samples, int em_iters = 3);

}  // namespace lseg
