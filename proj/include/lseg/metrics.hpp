#pragma once

#include <optional>
#include <string>
#include <vector>

#include "lseg/array2.hpp"

namespace lseg {

struct ConfusionCounts {
  long long tp = 0, fp = 0, fn = 0, tn = 0;
  long long total() const { return tp + fp + fn + tn; }
};

ConfusionCounts confusion(const MaskU8& pred, const MaskU8& gt);

// Degenerate conventions: both masks empty -> dice/precision/recall/vs = 1;
// exactly one side empty -> 0.
double dice(const ConfusionCounts& c);
double precision(const ConfusionCounts& c);
double recall(const ConfusionCounts& c);
double vs(const ConfusionCounts& c);

// Averaged Hausdorff distance over all foreground pixels, Euclidean,
// max of the two directed mean nearest-neighbor distances.
// Throws DataError if either mask is empty.
double avd(const MaskU8& pred, const MaskU8& gt);

// Exact squared Euclidean distance transform to the nearest foreground
// pixel (Felzenszwalb-Huttenlocher). Foreground-free input yields all +inf.
Array2<double> squared_edt(const MaskU8& fg);

struct CaseMetrics {
  std::string case_id;
  double recall = 0, precision = 0, dice = 0, vs = 0;
  std::optional<double> avd;  // absent when either mask was empty
};

struct MetricSummary {
  double mean = 0;
  double stddev = 0;  // population standard deviation
  int count = 0;
};

struct MetricReport {
  std::vector<CaseMetrics> cases;
  MetricSummary recall, precision, dice, avd, vs;
  int avd_excluded = 0;  // cases without a defined AVD
};

CaseMetrics evaluate_case(const std::string& case_id, const MaskU8& pred, const MaskU8& gt);

struct MaskPair {
  std::string case_id;
  MaskU8 pred;
  MaskU8 gt;
};

MetricReport evaluate_set(const std::vector<MaskPair>& cases);

// "0.903 +/- 0.090" table-style cell
std::string format_mean_std(const MetricSummary& s);

void write_report_csv(const std::string& path, const MetricReport& r);
void write_report_json(const std::string& path, const MetricReport& r);

}  // namespace lseg
