#include "lseg/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "lseg/errors.hpp"

namespace lseg {

ConfusionCounts confusion(const MaskU8& pred, const MaskU8& gt) {
  if (!pred.same_shape(gt)) throw DataError("confusion: mask shape mismatch");
  ConfusionCounts c;
  for (size_t i = 0; i < pred.size(); ++i) {
    bool p = pred.v[i] != 0, g = gt.v[i] != 0;
    if (p && g)
      ++c.tp;
    else if (p && !g)
      ++c.fp;
    else if (!p && g)
      ++c.fn;
    else
      ++c.tn;
  }
  return c;
}

double dice(const ConfusionCounts& c) {
  long long den = 2 * c.tp + c.fp + c.fn;
  if (den == 0) return 1.0;  // both masks empty
  return 2.0 * c.tp / static_cast<double>(den);
}

double precision(const ConfusionCounts& c) {
  if (c.tp + c.fp == 0) return (c.fn == 0) ? 1.0 : 0.0;
  return static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
}

double recall(const ConfusionCounts& c) {
  if (c.tp + c.fn == 0) return (c.fp == 0) ? 1.0 : 0.0;
  return static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
}

double vs(const ConfusionCounts& c) {
  long long den = 2 * c.tp + c.fp + c.fn;
  if (den == 0) return 1.0;
  return 1.0 - std::abs(static_cast<double>(c.fp - c.fn)) / static_cast<double>(den);
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// 1-D squared distance transform (lower envelope of parabolas).
void edt_1d(const std::vector<double>& f, std::vector<double>& d, std::vector<int>& v,
            std::vector<double>& z) {
  int n = static_cast<int>(f.size());
  int k = 0;
  v[0] = 0;
  z[0] = -kInf;
  z[1] = kInf;
  for (int q = 1; q < n; ++q) {
    if (f[q] == kInf) continue;
    double s;
    while (true) {
      if (f[v[k]] == kInf) {
        // no finite parabola yet; replace
        if (k == 0) {
          v[0] = q;
          z[0] = -kInf;
          z[1] = kInf;
          break;
        }
        --k;
        continue;
      }
      s = ((f[q] + q * q) - (f[v[k]] + v[k] * v[k])) / (2.0 * q - 2.0 * v[k]);
      if (s <= z[k]) {
        --k;
      } else {
        ++k;
        v[k] = q;
        z[k] = s;
        z[k + 1] = kInf;
        break;
      }
    }
  }
  if (f[v[0]] == kInf) {  // the whole row is empty
    for (int q = 0; q < n; ++q) d[q] = kInf;
    return;
  }
  k = 0;
  for (int q = 0; q < n; ++q) {
    while (z[k + 1] < q) ++k;
    double dq = q - v[k];
    d[q] = dq * dq + f[v[k]];
  }
}

}  // namespace

Array2<double> squared_edt(const MaskU8& fg) {
  int h = fg.h, w = fg.w;
  Array2<double> d(h, w);
  for (size_t i = 0; i < fg.size(); ++i) d.v[i] = fg.v[i] ? 0.0 : kInf;

  int n = std::max(h, w);
  std::vector<double> f(n), out(n), z(n + 1);
  std::vector<int> v(n);

  // columns then rows
  for (int x = 0; x < w; ++x) {
    for (int y = 0; y < h; ++y) f[y] = d.at(y, x);
    f.resize(h);
    out.resize(h);
    edt_1d(f, out, v, z);
    for (int y = 0; y < h; ++y) d.at(y, x) = out[y];
    f.resize(n);
    out.resize(n);
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) f[x] = d.at(y, x);
    f.resize(w);
    out.resize(w);
    edt_1d(f, out, v, z);
    for (int x = 0; x < w; ++x) d.at(y, x) = out[x];
    f.resize(n);
    out.resize(n);
  }
  return d;
}

double avd(const MaskU8& pred, const MaskU8& gt) {
  if (!pred.same_shape(gt)) throw DataError("avd: mask shape mismatch");
  if (mask_area(pred) == 0 || mask_area(gt) == 0)
    throw DataError("avd: undefined for an empty mask");

  auto directed = [](const MaskU8& from, const Array2<double>& sq_to) {
    double sum = 0;
    long long n = 0;
    for (int y = 0; y < from.h; ++y)
      for (int x = 0; x < from.w; ++x)
        if (from.at(y, x)) {
          sum += std::sqrt(sq_to.at(y, x));
          ++n;
        }
    return sum / static_cast<double>(n);
  };

  Array2<double> to_gt = squared_edt(gt);
  Array2<double> to_pred = squared_edt(pred);
  return std::max(directed(pred, to_gt), directed(gt, to_pred));
}

CaseMetrics evaluate_case(const std::string& case_id, const MaskU8& pred, const MaskU8& gt) {
  ConfusionCounts c = confusion(pred, gt);
  CaseMetrics m;
  m.case_id = case_id;
  m.recall = recall(c);
  m.precision = precision(c);
  m.dice = dice(c);
  m.vs = vs(c);
  if (mask_area(pred) > 0 && mask_area(gt) > 0) m.avd = avd(pred, gt);
  return m;
}

namespace {

MetricSummary summarize(const std::vector<double>& xs) {
  MetricSummary s;
  s.count = static_cast<int>(xs.size());
  if (xs.empty()) return s;
  double sum = 0;
  for (double x : xs) sum += x;
  s.mean = sum / xs.size();
  double var = 0;
  for (double x : xs) var += (x - s.mean) * (x - s.mean);
  s.stddev = std::sqrt(var / xs.size());
  return s;
}

}  // namespace

MetricReport evaluate_set(const std::vector<MaskPair>& cases) {
  if (cases.empty()) throw DataError("evaluate_set: no cases");
  MetricReport r;
  std::vector<double> rec, prec, dsc, av, volsim;
  for (const auto& mp : cases) {
    CaseMetrics m = evaluate_case(mp.case_id, mp.pred, mp.gt);
    rec.push_back(m.recall);
    prec.push_back(m.precision);
    dsc.push_back(m.dice);
    volsim.push_back(m.vs);
    if (m.avd)
      av.push_back(*m.avd);
    else
      ++r.avd_excluded;
    r.cases.push_back(std::move(m));
  }
  r.recall = summarize(rec);
  r.precision = summarize(prec);
  r.dice = summarize(dsc);
  r.avd = summarize(av);
  r.vs = summarize(volsim);
  return r;
}

std::string format_mean_std(const MetricSummary& s) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.3f +/- %.3f", s.mean, s.stddev);
  return buf;
}

void write_report_csv(const std::string& path, const MetricReport& r) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw DataError("cannot write report: " + path);
  f << "case_id,recall,precision,dice,avd,vs\n";
  char buf[256];
  for (const auto& m : r.cases) {
    if (m.avd)
      std::snprintf(buf, sizeof(buf), "%s,%.9g,%.9g,%.9g,%.9g,%.9g\n", m.case_id.c_str(),
                    m.recall, m.precision, m.dice, *m.avd, m.vs);
    else
      std::snprintf(buf, sizeof(buf), "%s,%.9g,%.9g,%.9g,n/a,%.9g\n", m.case_id.c_str(),
                    m.recall, m.precision, m.dice, m.vs);
    f << buf;
  }
  if (!f) throw DataError("failed writing report: " + path);
}

void write_report_json(const std::string& path, const MetricReport& r) {
  nlohmann::json j;
  j["cases"] = r.cases.size();
  j["std_kind"] = "population";
  auto summary = [&](const MetricSummary& s) {
    return nlohmann::json{{"mean", s.mean}, {"std", s.stddev}, {"count", s.count}};
  };
  j["recall"] = summary(r.recall);
  j["precision"] = summary(r.precision);
  j["dice"] = summary(r.dice);
  j["avd"] = summary(r.avd);
  j["vs"] = summary(r.vs);
  j["avd_excluded"] = r.avd_excluded;
  j["table"] = {
      {"recall", format_mean_std(r.recall)},   {"precision", format_mean_std(r.precision)},
      {"dice", format_mean_std(r.dice)},       {"avd", format_mean_std(r.avd)},
      {"vs", format_mean_std(r.vs)},
  };
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw DataError("cannot write report: " + path);
  f << j.dump(2) << "\n";
  if (!f) throw DataError("failed writing report: " + path);
}

}  // namespace lseg
