#include "lseg/densecrf.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "lseg/errors.hpp"
#include "lseg/threads.hpp"

namespace lseg {

namespace {

void check_params(const CrfParams& p) {
  if (p.theta_alpha <= 0 || p.theta_beta <= 0 || p.theta_gamma <= 0)
    throw ConfigError("densecrf: kernel stddevs must be positive");
  if (p.w_appearance < 0 || p.w_smooth < 0)
    throw ConfigError("densecrf: kernel weights must be non-negative");
  if (p.iterations < 1) throw ConfigError("densecrf: iterations must be >= 1");
}

}  // namespace

BinaryField mean_field_step(const BinaryField& q, const BinaryField& unary, const ImageF& image,
                            const CrfParams& params) {
  check_params(params);
  const int h = image.h, w = image.w;
  if (!q.q0.same_shape(image) || !q.q1.same_shape(image) || !unary.q0.same_shape(image) ||
      !unary.q1.same_shape(image))
    throw DataError("mean_field_step: shape mismatch");
  const size_t n = static_cast<size_t>(h) * w;
  for (size_t i = 0; i < n; ++i)
    if (std::abs(q.q0.v[i] + q.q1.v[i] - 1.0) > 1e-6)
      throw DataError("mean_field_step: Q rows must sum to 1");

  // spatial factors are exact lookups on integer squared distances
  const int max_r2 = (h - 1) * (h - 1) + (w - 1) * (w - 1);
  std::vector<double> lut_alpha(max_r2 + 1), lut_gamma(max_r2 + 1);
  const double ia = 1.0 / (2.0 * params.theta_alpha * params.theta_alpha);
  const double ig = 1.0 / (2.0 * params.theta_gamma * params.theta_gamma);
  for (int r2 = 0; r2 <= max_r2; ++r2) {
    lut_alpha[r2] = std::exp(-ia * r2);
    lut_gamma[r2] = std::exp(-ig * r2);
  }
  const double ib = 1.0 / (2.0 * params.theta_beta * params.theta_beta);
  const double wa = params.w_appearance, ws = params.w_smooth;

  BinaryField out{ProbMap(h, w), ProbMap(h, w)};
  const bool skip_pairwise = wa == 0.0 && ws == 0.0;

  parallel_for(n, [&](size_t begin, size_t end) {
    for (size_t i = begin; i < end; ++i) {
      const int yi = static_cast<int>(i) / w, xi = static_cast<int>(i) % w;
      const double zi = image.v[i];
      double m0 = 0, m1 = 0;
      if (!skip_pairwise) {
        for (size_t j = 0; j < n; ++j) {
          if (j == i) continue;
          const int yj = static_cast<int>(j) / w, xj = static_cast<int>(j) % w;
          const int dy = yi - yj, dx = xi - xj;
          const int r2 = dy * dy + dx * dx;
          const double dz = zi - image.v[j];
          const double k = wa * lut_alpha[r2] * std::exp(-ib * dz * dz) + ws * lut_gamma[r2];
          m0 += k * q.q0.v[j];
          m1 += k * q.q1.v[j];
        }
      }
      // Potts compatibility: label l is penalized by the other label's message
      const double e0 = -unary.q0.v[i] - m1;
      const double e1 = -unary.q1.v[i] - m0;
      const double mx = std::max(e0, e1);
      const double p0 = std::exp(e0 - mx), p1 = std::exp(e1 - mx);
      out.q0.v[i] = p0 / (p0 + p1);
      out.q1.v[i] = p1 / (p0 + p1);
    }
  });
  return out;
}

ProbMap refine(const ProbMap& prob, const ImageF& image, const CrfParams& params) {
  check_params(params);
  if (!prob.same_shape(image)) throw DataError("refine: probability/image shape mismatch");

  const size_t n = prob.size();
  BinaryField unary{ProbMap(image.h, image.w), ProbMap(image.h, image.w)};
  BinaryField q{ProbMap(image.h, image.w), ProbMap(image.h, image.w)};
  constexpr double kEps = 1e-8;
  for (size_t i = 0; i < n; ++i) {
    double p = std::clamp(prob.v[i], kEps, 1.0 - kEps);
    unary.q1.v[i] = -std::log(p);
    unary.q0.v[i] = -std::log(1.0 - p);
    q.q1.v[i] = p;
    q.q0.v[i] = 1.0 - p;
  }
  for (int it = 0; it < params.iterations; ++it)
    q = mean_field_step(q, unary, image, params);
  return q.q1;
}

}  // namespace lseg
