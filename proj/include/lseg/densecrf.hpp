#pragma once

#include "lseg/array2.hpp"

namespace lseg {

// Fully-connected binary CRF with two Gaussian pairwise kernels
// (appearance: spatial x intensity; smoothness: spatial only), inferred by
// mean-field iteration. Pairwise sums are exact O(N^2); defaults follow the
// usual dense-CRF regime scaled for 128x128 crops.
struct CrfParams {
  double w_appearance = 10.0;
  double theta_alpha = 20.0;  // spatial stddev, px
  double theta_beta = 0.1;    // intensity stddev (normalized units)
  double w_smooth = 3.0;
  double theta_gamma = 3.0;   // spatial stddev, px
  int iterations = 10;
};

// Per-pixel 2-class distribution; q0 + q1 == 1 per pixel.
struct BinaryField {
  ProbMap q0;  // background
  ProbMap q1;  // lesion
};

// One mean-field update. `unary` holds the negative-log potentials per
// class. The j == i term is excluded from the messages.
BinaryField mean_field_step(const BinaryField& q, const BinaryField& unary, const ImageF& image,
                            const CrfParams& params);

// unary = -log{1-p, p} (clamped), `iterations` mean-field steps, returns
// the class-1 (lesion) marginal.
ProbMap refine(const ProbMap& prob, const ImageF& image, const CrfParams& params);

}  // namespace lseg
