#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>

#include "lseg/errors.hpp"
#include "lseg/metrics.hpp"
#include "lseg/rng.hpp"

using namespace lseg;

namespace {

MaskU8 mask_from(int h, int w, std::initializer_list<int> fg) {
  MaskU8 m(h, w, 0);
  for (int idx : fg) m.v[idx] = 255;
  return m;
}

MaskU8 random_mask(int h, int w, double density, Rng& rng) {
  MaskU8 m(h, w, 0);
  for (auto& v : m.v) v = rng.uniform01() < density ? 255 : 0;
  return m;
}

// independent oracle: naive double loops over pixels and pixel pairs
struct NaiveMetrics {
  long long tp = 0, fp = 0, fn = 0, tn = 0;
  double avd = std::numeric_limits<double>::quiet_NaN();
};

NaiveMetrics naive_eval(const MaskU8& pred, const MaskU8& gt) {
  NaiveMetrics n;
  for (size_t i = 0; i < pred.size(); ++i) {
    bool p = pred.v[i] != 0, g = gt.v[i] != 0;
    n.tp += p && g;
    n.fp += p && !g;
    n.fn += !p && g;
    n.tn += !p && !g;
  }
  auto directed = [](const MaskU8& a, const MaskU8& b) {
    double total = 0;
    long cnt = 0;
    for (int ya = 0; ya < a.h; ++ya)
      for (int xa = 0; xa < a.w; ++xa) {
        if (!a.at(ya, xa)) continue;
        double best = std::numeric_limits<double>::infinity();
        for (int yb = 0; yb < b.h; ++yb)
          for (int xb = 0; xb < b.w; ++xb)
            if (b.at(yb, xb)) {
              double d = std::hypot(ya - yb, xa - xb);
              best = std::min(best, d);
            }
        total += best;
        ++cnt;
      }
    return total / cnt;
  };
  if (n.tp + n.fp > 0 && n.tp + n.fn > 0)
    n.avd = std::max(directed(pred, gt), directed(gt, pred));
  return n;
}

}  // namespace

TEST_CASE("confusion counts: hand cases and conventions") {
  // pred 4 px, gt 6 px, overlap 3
  MaskU8 pred = mask_from(4, 4, {0, 1, 2, 5});
  MaskU8 gt = mask_from(4, 4, {0, 1, 5, 8, 9, 10});
  auto c = confusion(pred, gt);
  CHECK(c.tp == 3);
  CHECK(c.fp == 1);
  CHECK(c.fn == 3);
  CHECK(c.tn == 9);
  CHECK(c.total() == 16);

  CHECK(dice(c) == doctest::Approx(0.6));
  CHECK(precision(c) == doctest::Approx(0.75));
  CHECK(recall(c) == doctest::Approx(0.5));
  CHECK(vs(c) == doctest::Approx(0.8));  // 1 - |1-3|/10

  MaskU8 same = mask_from(3, 3, {4, 5});
  auto cs = confusion(same, same);
  CHECK(cs.fp == 0);
  CHECK(cs.fn == 0);
  CHECK(dice(cs) == 1.0);
  CHECK(vs(cs) == 1.0);

  MaskU8 empty(3, 3, 0);
  auto ce = confusion(empty, empty);
  CHECK(ce.tp == 0);
  CHECK(ce.tn == 9);
  CHECK(dice(ce) == 1.0);
  CHECK(precision(ce) == 1.0);
  CHECK(recall(ce) == 1.0);
  CHECK(vs(ce) == 1.0);

  // one-sided empty -> 0
  auto c1 = confusion(empty, same);
  CHECK(dice(c1) == 0.0);
  CHECK(precision(c1) == 0.0);
  CHECK(recall(c1) == 0.0);

  MaskU8 a = mask_from(3, 3, {0});
  MaskU8 b = mask_from(3, 3, {8});
  auto cd = confusion(a, b);
  CHECK(dice(cd) == 0.0);
  CHECK(precision(cd) == 0.0);
  CHECK(recall(cd) == 0.0);

  CHECK_THROWS_AS(confusion(MaskU8(2, 2), MaskU8(3, 3)), DataError);
}

TEST_CASE("avd: hand cases") {
  // P={(0,0)}, G={(3,4)} -> 5 (y=3, x=4 at w=8)
  MaskU8 p = mask_from(8, 8, {0});
  MaskU8 g = mask_from(8, 8, {3 * 8 + 4});
  CHECK(avd(p, g) == doctest::Approx(5.0).epsilon(1e-12));

  CHECK(avd(g, g) == doctest::Approx(0.0));

  // P={(0,0),(0,1)} as (y,x); G={(0,0)} -> max(0.5, 0)
  MaskU8 p2 = mask_from(4, 4, {0, 1});
  MaskU8 g2 = mask_from(4, 4, {0});
  CHECK(avd(p2, g2) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(avd(g2, p2) == doctest::Approx(0.5).epsilon(1e-12));  // symmetric in the max

  CHECK_THROWS_AS(avd(MaskU8(4, 4, 0), g2), DataError);
}

TEST_CASE("five metrics match the naive oracle on 200 random 32x32 pairs") {
  Rng rng(2024);
  for (int trial = 0; trial < 200; ++trial) {
    double dens_p = rng.uniform(0.02, 0.5);
    double dens_g = rng.uniform(0.02, 0.5);
    MaskU8 pred = random_mask(32, 32, dens_p, rng);
    MaskU8 gt = random_mask(32, 32, dens_g, rng);
    auto naive = naive_eval(pred, gt);
    auto c = confusion(pred, gt);
    REQUIRE(c.tp == naive.tp);
    REQUIRE(c.fp == naive.fp);
    REQUIRE(c.fn == naive.fn);
    REQUIRE(c.tn == naive.tn);
    if (!std::isnan(naive.avd)) {
      REQUIRE(avd(pred, gt) == doctest::Approx(naive.avd).epsilon(0).scale(1e-9));
    }
    // dice = 2 P R / (P + R) whenever both defined
    double pr = precision(c), rc = recall(c);
    if (pr + rc > 0)
      CHECK(dice(c) == doctest::Approx(2 * pr * rc / (pr + rc)).epsilon(1e-12));
  }
}

TEST_CASE("squared_edt is exact against brute force") {
  Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    MaskU8 m = random_mask(17, 23, 0.08, rng);
    if (mask_area(m) == 0) m.v[0] = 255;
    auto d = squared_edt(m);
    for (int y = 0; y < m.h; ++y)
      for (int x = 0; x < m.w; ++x) {
        double best = std::numeric_limits<double>::infinity();
        for (int yb = 0; yb < m.h; ++yb)
          for (int xb = 0; xb < m.w; ++xb)
            if (m.at(yb, xb))
              best = std::min(best, double((y - yb) * (y - yb) + (x - xb) * (x - xb)));
        REQUIRE(d.at(y, x) == doctest::Approx(best).epsilon(1e-12));
      }
  }
}

TEST_CASE("evaluate_set aggregation") {
  MaskU8 gt = mask_from(4, 4, {5, 6, 9, 10});

  SUBCASE("single case -> std 0") {
    auto r = evaluate_set({{"a", gt, gt}});
    CHECK(r.dice.mean == 1.0);
    CHECK(r.dice.stddev == 0.0);
    CHECK(r.cases.size() == 1);
  }
  SUBCASE("two cases with dice 0.8 and 1.0 -> mean 0.9, std 0.1") {
    // dice 0.8: pred 4 px, gt 6 px, tp 4 -> 8/10
    MaskU8 gt6 = mask_from(4, 4, {0, 1, 2, 4, 5, 6});
    MaskU8 p4 = mask_from(4, 4, {0, 1, 2, 4});
    auto r = evaluate_set({{"a", p4, gt6}, {"b", gt, gt}});
    CHECK(r.dice.mean == doctest::Approx(0.9).epsilon(1e-12));
    CHECK(r.dice.stddev == doctest::Approx(0.1).epsilon(1e-12));
  }
  SUBCASE("identical predictions -> all stds 0") {
    auto r = evaluate_set({{"a", gt, gt}, {"b", gt, gt}, {"c", gt, gt}});
    CHECK(r.recall.stddev == 0.0);
    CHECK(r.precision.stddev == 0.0);
    CHECK(r.dice.stddev == 0.0);
    CHECK(r.avd.stddev == 0.0);
    CHECK(r.vs.stddev == 0.0);
  }
  SUBCASE("empty mask cases excluded from avd with count") {
    MaskU8 empty(4, 4, 0);
    auto r = evaluate_set({{"a", gt, gt}, {"b", empty, gt}});
    CHECK(r.avd_excluded == 1);
    CHECK(r.avd.count == 1);
    CHECK_FALSE(r.cases[1].avd.has_value());
  }
}

TEST_CASE("report formatting") {
  MetricSummary s{0.903, 0.09, 10};
  CHECK(format_mean_std(s) == "0.903 +/- 0.090");
}
