#include "lseg/grabcut.hpp"

#include <algorithm>
#include <cmath>

#include "lseg/errors.hpp"
#include "lseg/gmm.hpp"
#include "lseg/maxflow.hpp"

namespace lseg {

namespace {

double point_segment_dist(double px, double py, Point a, Point b) {
  double dx = b.x - a.x, dy = b.y - a.y;
  double len2 = dx * dx + dy * dy;
  double t = 0;
  if (len2 > 0) t = std::clamp(((px - a.x) * dx + (py - a.y) * dy) / len2, 0.0, 1.0);
  double cx = a.x + t * dx, cy = a.y + t * dy;
  return std::hypot(px - cx, py - cy);
}

// 8-neighborhood offsets covering each unordered pair once
constexpr int kNeighbors[4][2] = {{1, 0}, {0, 1}, {1, 1}, {1, -1}};

constexpr double kSeedCap = 1e12;  // terminal capacity pinning definite seeds

struct PairwiseField {
  // per pixel, per neighbor direction: weight of the arc to (x+dx, y+dy)
  Array2<double> w[4];
};

PairwiseField build_pairwise(const ImageF& img, double gamma) {
  const int h = img.h, w = img.w;
  // beta = 1 / (2 <(z_m - z_n)^2>) over all 8-neighbor pairs
  double sum = 0;
  long cnt = 0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (auto [dx, dy] : kNeighbors) {
        int nx = x + dx, ny = y + dy;
        if (nx < 0 || nx >= w || ny < 0 || ny >= h) continue;
        double d = img.at(y, x) - img.at(ny, nx);
        sum += d * d;
        ++cnt;
      }
  double beta = sum > 0 ? static_cast<double>(cnt) / (2.0 * sum) : 0.0;

  PairwiseField f;
  for (int k = 0; k < 4; ++k) f.w[k] = Array2<double>(h, w, 0.0);
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int k = 0; k < 4; ++k) {
        int nx = x + kNeighbors[k][0], ny = y + kNeighbors[k][1];
        if (nx < 0 || nx >= w || ny < 0 || ny >= h) continue;
        double d = img.at(y, x) - img.at(ny, nx);
        double dist_inv = (k >= 2) ? inv_sqrt2 : 1.0;
        f.w[k].at(y, x) = gamma * std::exp(-beta * d * d) * dist_inv;
      }
  return f;
}

double total_energy(const ImageF& img, const std::vector<uint8_t>& fg, const Gmm1D& gmm_fg,
                    const Gmm1D& gmm_bg, const PairwiseField& pw) {
  const int h = img.h, w = img.w;
  double e = 0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      size_t i = static_cast<size_t>(y) * w + x;
      double z = img.at(y, x);
      e -= fg[i] ? gmm_fg.log_likelihood(z) : gmm_bg.log_likelihood(z);
      for (int k = 0; k < 4; ++k) {
        int nx = x + kNeighbors[k][0], ny = y + kNeighbors[k][1];
        if (nx < 0 || nx >= w || ny < 0 || ny >= h) continue;
        size_t j = static_cast<size_t>(ny) * w + nx;
        if (fg[i] != fg[j]) e += pw.w[k].at(y, x);
      }
    }
  return e;
}

}  // namespace

Trimap build_trimap(const RecistAnnotation& recist, int h, int w, const GrabcutParams& params) {
  const Point pts[4] = {recist.long_a, recist.long_b, recist.short_a, recist.short_b};
  for (const Point& p : pts)
    if (p.x < 0 || p.x > w - 1 || p.y < 0 || p.y > h - 1 || !std::isfinite(p.x) ||
        !std::isfinite(p.y))
      throw DataError("build_trimap: RECIST endpoint outside the image");

  double x_lo = pts[0].x, x_hi = pts[0].x, y_lo = pts[0].y, y_hi = pts[0].y;
  for (const Point& p : pts) {
    x_lo = std::min(x_lo, p.x);
    x_hi = std::max(x_hi, p.x);
    y_lo = std::min(y_lo, p.y);
    y_hi = std::max(y_hi, p.y);
  }
  const double ex = params.bbox_expand * (x_hi - x_lo);
  const double ey = params.bbox_expand * (y_hi - y_lo);
  const double dx_lo = x_lo - ex, dx_hi = x_hi + ex;
  const double dy_lo = y_lo - ey, dy_hi = y_hi + ey;

  Trimap tm(h, w, TrimapLabel::DefBG);
  const double r = params.seed_radius;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      TrimapLabel lab;
      if (x < dx_lo || x > dx_hi || y < dy_lo || y > dy_hi) {
        lab = TrimapLabel::DefBG;
      } else if (x >= x_lo && x <= x_hi && y >= y_lo && y <= y_hi) {
        lab = TrimapLabel::ProbFG;
      } else {
        lab = TrimapLabel::ProbBG;
      }
      if (point_segment_dist(x, y, recist.long_a, recist.long_b) <= r ||
          point_segment_dist(x, y, recist.short_a, recist.short_b) <= r)
        lab = TrimapLabel::DefFG;
      tm.at(y, x) = lab;
    }

  bool has_bg = false;
  for (auto l : tm.v)
    if (l == TrimapLabel::DefBG) {
      has_bg = true;
      break;
    }
  if (!has_bg) {
    // RECIST box fills the image; force a 2-px border ring to background
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        if ((y < 2 || y >= h - 2 || x < 2 || x >= w - 2) && tm.at(y, x) != TrimapLabel::DefFG) {
          tm.at(y, x) = TrimapLabel::DefBG;
          has_bg = true;
        }
  }
  if (!has_bg) throw DataError("build_trimap: no definite background pixel available");
  return tm;
}

GrabcutResult grabcut_iterate(const ImageF& image, const Trimap& trimap,
                              const GrabcutParams& params) {
  if (image.h != trimap.h || image.w != trimap.w)
    throw DataError("grabcut_iterate: image/trimap shape mismatch");
  if (params.gmm_components < 1) throw ConfigError("grabcut_iterate: gmm_components >= 1");
  if (params.gamma < 0) throw ConfigError("grabcut_iterate: gamma must be >= 0");

  const int h = image.h, w = image.w;
  const size_t n = static_cast<size_t>(h) * w;

  bool has_fg = false, has_bg = false, has_prob = false;
  for (auto l : trimap.v) {
    has_fg |= l == TrimapLabel::DefFG;
    has_bg |= l == TrimapLabel::DefBG;
    has_prob |= l == TrimapLabel::ProbFG || l == TrimapLabel::ProbBG;
  }
  if (!has_fg || !has_bg)
    throw DataError("grabcut_iterate: trimap needs at least one DefFG and one DefBG pixel");

  std::vector<uint8_t> fg(n);
  for (size_t i = 0; i < n; ++i)
    fg[i] = trimap.v[i] == TrimapLabel::DefFG || trimap.v[i] == TrimapLabel::ProbFG;

  GrabcutResult res;
  if (!has_prob) {
    // nothing to optimize: the mask is the definite foreground
    res.mask = MaskU8(h, w, 0);
    for (size_t i = 0; i < n; ++i)
      if (trimap.v[i] == TrimapLabel::DefFG) res.mask.v[i] = 255;
    return res;
  }

  const PairwiseField pw = build_pairwise(image, params.gamma);

  Gmm1D gmm_fg, gmm_bg;
  for (int iter = 1; iter <= params.max_iters; ++iter) {
    std::vector<double> fg_samples, bg_samples;
    fg_samples.reserve(n / 4);
    bg_samples.reserve(n / 2);
    for (size_t i = 0; i < n; ++i)
      (fg[i] ? fg_samples : bg_samples).push_back(image.v[i]);

    if (iter == 1) {
      gmm_fg = fit_gmm(fg_samples, params.gmm_components, params.rng_seed);
      gmm_bg = fit_gmm(bg_samples, params.gmm_components, params.rng_seed + 1);
    } else {
      gmm_fg = refit_gmm(gmm_fg, fg_samples);
      gmm_bg = refit_gmm(gmm_bg, bg_samples);
    }

    FlowNetwork net(static_cast<int>(n));
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        int i = y * w + x;
        switch (trimap.v[i]) {
          case TrimapLabel::DefFG:
            net.add_terminal(i, kSeedCap, 0.0);
            break;
          case TrimapLabel::DefBG:
            net.add_terminal(i, 0.0, kSeedCap);
            break;
          default: {
            double z = image.v[i];
            // cut pays s->i when i lands BG and i->t when it lands FG;
            // 1-D densities exceed 1, so shift both t-links per pixel
            // (adds a constant to every cut, partition unchanged)
            double d_bg = -gmm_bg.log_likelihood(z);
            double d_fg = -gmm_fg.log_likelihood(z);
            double base = std::min(d_bg, d_fg);
            net.add_terminal(i, d_bg - base, d_fg - base);
          }
        }
        for (int k = 0; k < 4; ++k) {
          int nx = x + kNeighbors[k][0], ny = y + kNeighbors[k][1];
          if (nx < 0 || nx >= w || ny < 0 || ny >= h) continue;
          double cap = pw.w[k].at(y, x);
          if (cap > 0) net.add_edge(i, ny * w + nx, cap, cap);
        }
      }
    net.solve();
    std::vector<bool> prev(fg.begin(), fg.end());
    std::vector<bool> side = net.min_cut_with_preference(prev);

    size_t changed = 0;
    for (size_t i = 0; i < n; ++i) {
      bool now = side[i];
      if (trimap.v[i] == TrimapLabel::DefFG) now = true;
      if (trimap.v[i] == TrimapLabel::DefBG) now = false;
      changed += (now != static_cast<bool>(fg[i]));
      fg[i] = now;
    }
    res.energies.push_back(total_energy(image, fg, gmm_fg, gmm_bg, pw));
    res.iterations = iter;

    if (iter == 1) {
      bool any_prob_fg = false;
      for (size_t i = 0; i < n; ++i)
        if (fg[i] && trimap.v[i] != TrimapLabel::DefFG) {
          any_prob_fg = true;
          break;
        }
      if (!any_prob_fg) {
        res.fg_collapsed = true;
        break;
      }
    }
    if (static_cast<double>(changed) / static_cast<double>(n) < params.convergence_tol) break;
  }

  res.mask = MaskU8(h, w, 0);
  for (size_t i = 0; i < n; ++i) res.mask.v[i] = fg[i] ? 255 : 0;
  return res;
}

PseudoMaskResult generate_pseudo_mask(const ImageF& hu_image, const RecistAnnotation& recist,
                                      const PreprocessConfig& pre, const GrabcutParams& params) {
  Preprocessed p = preprocess(hu_image, pre);
  RecistAnnotation mapped = transform_recist(recist, p.tf);
  // half-pixel resampling can push boundary endpoints fractionally outside
  auto clamp_pt = [&](Point& q) {
    q.x = std::clamp(q.x, 0.0, static_cast<double>(p.image.w - 1));
    q.y = std::clamp(q.y, 0.0, static_cast<double>(p.image.h - 1));
  };
  clamp_pt(mapped.long_a);
  clamp_pt(mapped.long_b);
  clamp_pt(mapped.short_a);
  clamp_pt(mapped.short_b);
  Trimap tm = build_trimap(mapped, p.image.h, p.image.w, params);
  GrabcutResult gr = grabcut_iterate(p.image, tm, params);
  return {std::move(gr.mask), p.tf, std::move(gr.energies), gr.iterations, gr.fg_collapsed};
}

}  // namespace lseg
