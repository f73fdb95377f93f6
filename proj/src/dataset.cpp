#include "lseg/dataset.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "lseg/errors.hpp"
#include "lseg/io.hpp"
#include "lseg/rng.hpp"

namespace lseg {

double RecistAnnotation::long_len() const {
  return std::hypot(long_b.x - long_a.x, long_b.y - long_a.y);
}

double RecistAnnotation::short_len() const {
  return std::hypot(short_b.x - short_a.x, short_b.y - short_a.y);
}

const char* split_name(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
    default: return "unassigned";
  }
}

Point GeomTransform::forward(Point p) const {
  double s = static_cast<double>(target) / square;
  return {(p.x + pad_x + 0.5) * s - 0.5, (p.y + pad_y + 0.5) * s - 0.5};
}

Point GeomTransform::inverse(Point q) const {
  double s = static_cast<double>(square) / target;
  return {(q.x + 0.5) * s - 0.5 - pad_x, (q.y + 0.5) * s - 0.5 - pad_y};
}

Preprocessed preprocess(const ImageF& hu_image, const PreprocessConfig& cfg) {
  if (cfg.hu_low >= cfg.hu_high)
    throw ConfigError("preprocess: degenerate HU window (low >= high)");
  if (cfg.target_size <= 0) throw ConfigError("preprocess: target_size must be positive");
  if (hu_image.empty()) throw DataError("preprocess: empty image");

  const double lo = cfg.hu_low, hi = cfg.hu_high, range = hi - lo;
  auto normalize = [&](double v) { return (std::clamp(v, lo, hi) - lo) / range; };

  const int h = hu_image.h, w = hu_image.w;
  const int square = std::max(h, w);
  GeomTransform tf;
  tf.src_h = h;
  tf.src_w = w;
  tf.square = square;
  tf.target = cfg.target_size;
  tf.pad_x = (square - w) / 2;
  tf.pad_y = (square - h) / 2;

  const double pad_val = normalize(cfg.pad_hu);
  ImageF padded(square, square, pad_val);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) padded.at(y + tf.pad_y, x + tf.pad_x) = normalize(hu_image.at(y, x));

  const int t = cfg.target_size;
  ImageF out(t, t);
  const double scale = static_cast<double>(square) / t;
  for (int yo = 0; yo < t; ++yo) {
    double sy = std::clamp((yo + 0.5) * scale - 0.5, 0.0, square - 1.0);
    int y0 = static_cast<int>(sy);
    int y1 = std::min(y0 + 1, square - 1);
    double fy = sy - y0;
    for (int xo = 0; xo < t; ++xo) {
      double sx = std::clamp((xo + 0.5) * scale - 0.5, 0.0, square - 1.0);
      int x0 = static_cast<int>(sx);
      int x1 = std::min(x0 + 1, square - 1);
      double fx = sx - x0;
      double top = padded.at(y0, x0) * (1 - fx) + padded.at(y0, x1) * fx;
      double bot = padded.at(y1, x0) * (1 - fx) + padded.at(y1, x1) * fx;
      out.at(yo, xo) = top * (1 - fy) + bot * fy;
    }
  }
  return {std::move(out), tf};
}

MaskU8 transform_mask(const MaskU8& src, const GeomTransform& tf) {
  MaskU8 out(tf.target, tf.target, 0);
  for (int yo = 0; yo < tf.target; ++yo)
    for (int xo = 0; xo < tf.target; ++xo) {
      Point p = tf.inverse({static_cast<double>(xo), static_cast<double>(yo)});
      int xi = static_cast<int>(std::lround(p.x));
      int yi = static_cast<int>(std::lround(p.y));
      if (src.in_bounds(yi, xi)) out.at(yo, xo) = src.at(yi, xi);
    }
  return out;
}

RecistAnnotation transform_recist(const RecistAnnotation& r, const GeomTransform& tf) {
  return {tf.forward(r.long_a), tf.forward(r.long_b), tf.forward(r.short_a),
          tf.forward(r.short_b)};
}

namespace {

const char* kCsvHeader =
    "lesion_id,patient_id,image_path,cluster_id,lx1,ly1,lx2,ly2,sx1,sy1,sx2,sy2";

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

double parse_double(const std::string& s, int row, const char* field) {
  double v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size())
    throw DataError("annotations row " + std::to_string(row) + ": field '" + field +
                    "': not a number: '" + s + "'");
  return v;
}

long parse_long(const std::string& s, int row, const char* field) {
  long v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size())
    throw DataError("annotations row " + std::to_string(row) + ": field '" + field +
                    "': not an integer: '" + s + "'");
  return v;
}

}  // namespace

std::vector<LesionRecord> load_records(const std::string& csv_path,
                                       std::vector<std::string>* warnings) {
  std::ifstream f(csv_path);
  if (!f) throw DataError("cannot open annotations CSV: " + csv_path);
  std::string line;
  if (!std::getline(f, line)) throw DataError("annotations CSV is empty: " + csv_path);
  {
    auto hdr = line;
    if (!hdr.empty() && hdr.back() == '\r') hdr.pop_back();
    if (hdr != kCsvHeader)
      throw DataError("annotations CSV header mismatch; expected '" + std::string(kCsvHeader) +
                      "'");
  }

  std::vector<LesionRecord> out;
  int row = 1;
  while (std::getline(f, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    auto cells = split_line(line);
    if (cells.size() != 12)
      throw DataError("annotations row " + std::to_string(row) + ": expected 12 fields, got " +
                      std::to_string(cells.size()));
    LesionRecord r;
    r.lesion_id = cells[0];
    r.patient_id = cells[1];
    r.image_path = cells[2];
    if (r.lesion_id.empty())
      throw DataError("annotations row " + std::to_string(row) + ": field 'lesion_id': empty");
    r.cluster_id = static_cast<int>(parse_long(cells[3], row, "cluster_id"));
    const char* names[8] = {"lx1", "ly1", "lx2", "ly2", "sx1", "sy1", "sx2", "sy2"};
    double v[8];
    for (int i = 0; i < 8; ++i) {
      v[i] = parse_double(cells[4 + i], row, names[i]);
      if (!std::isfinite(v[i]))
        throw DataError("annotations row " + std::to_string(row) + ": field '" +
                        names[i] + "': not finite");
    }
    r.recist = {{v[0], v[1]}, {v[2], v[3]}, {v[4], v[5]}, {v[6], v[7]}};
    // tolerance keeps equal-diameter lesions (disks) from swapping on
    // last-ulp differences
    if (r.recist.short_len() > r.recist.long_len() * (1.0 + 1e-12) + 1e-12) {
      std::swap(r.recist.long_a, r.recist.short_a);
      std::swap(r.recist.long_b, r.recist.short_b);
      if (warnings)
        warnings->push_back("row " + std::to_string(row) + " (" + r.lesion_id +
                            "): diameters swapped so the long axis is the longer one");
    }
    out.push_back(std::move(r));
  }
  return out;
}

void write_records_csv(const std::string& path, const std::vector<LesionRecord>& records) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw DataError("cannot write annotations CSV: " + path);
  f << kCsvHeader << "\n";
  char buf[768];
  for (const auto& r : records) {
    // %.17g round-trips doubles exactly
    std::snprintf(buf, sizeof(buf),
                  "%s,%s,%s,%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                  r.lesion_id.c_str(), r.patient_id.c_str(), r.image_path.c_str(), r.cluster_id,
                  r.recist.long_a.x, r.recist.long_a.y, r.recist.long_b.x, r.recist.long_b.y,
                  r.recist.short_a.x, r.recist.short_a.y, r.recist.short_b.x, r.recist.short_b.y);
    f << buf;
  }
  if (!f) throw DataError("failed writing annotations CSV: " + path);
}

void stratified_split(std::vector<LesionRecord>& records, const DatasetConfig& cfg,
                      std::vector<std::string>* warnings) {
  if (cfg.num_clusters < 1) throw ConfigError("stratified_split: num_clusters must be >= 1");
  double fsum = cfg.frac_train + cfg.frac_val + cfg.frac_test;
  if (std::abs(fsum - 1.0) > 1e-9)
    throw ConfigError("stratified_split: split fractions must sum to 1");
  for (const auto& r : records)
    if (r.cluster_id < 0 || r.cluster_id >= cfg.num_clusters)
      throw DataError("stratified_split: record " + r.lesion_id + " has cluster_id " +
                      std::to_string(r.cluster_id) + " outside [0, " +
                      std::to_string(cfg.num_clusters) + ")");

  // patient -> records; a patient follows its majority cluster
  std::map<std::string, std::vector<size_t>> by_patient;
  for (size_t i = 0; i < records.size(); ++i) by_patient[records[i].patient_id].push_back(i);

  struct Group {
    std::string patient;
    std::vector<size_t> recs;
    int cluster;
  };
  std::map<int, std::vector<Group>> clusters;
  for (auto& [pid, idxs] : by_patient) {
    std::map<int, int> votes;
    for (size_t i : idxs) votes[records[i].cluster_id]++;
    int best = -1, best_n = -1;
    for (auto [c, n] : votes)
      if (n > best_n) {
        best = c;
        best_n = n;
      }
    clusters[best].push_back({pid, idxs, best});
  }

  Rng rng(cfg.rng_seed);
  for (auto& [cid, groups] : clusters) {
    // by_patient is id-sorted already; shuffle for unbiased assignment
    rng.shuffle(groups);
    if (groups.size() < 3) {
      if (warnings)
        warnings->push_back("cluster " + std::to_string(cid) + " has " +
                            std::to_string(groups.size()) +
                            " patient(s) (< 3); assigning it entirely to train");
      for (auto& g : groups)
        for (size_t i : g.recs) records[i].split = Split::Train;
      continue;
    }
    size_t lesions = 0;
    for (auto& g : groups) lesions += g.recs.size();
    double target[3] = {cfg.frac_train * lesions, cfg.frac_val * lesions,
                        cfg.frac_test * lesions};
    double count[3] = {0, 0, 0};
    for (auto& g : groups) {
      int pick = 0;
      double best_deficit = target[0] - count[0];
      for (int s = 1; s < 3; ++s) {
        double d = target[s] - count[s];
        if (d > best_deficit) {
          best_deficit = d;
          pick = s;
        }
      }
      Split sp = pick == 0 ? Split::Train : (pick == 1 ? Split::Val : Split::Test);
      for (size_t i : g.recs) records[i].split = sp;
      count[pick] += static_cast<double>(g.recs.size());
    }
  }
}

std::vector<std::pair<std::string, std::string>> build_pairs(
    const std::vector<LesionRecord>& records, Split split, const DatasetConfig& cfg) {
  std::map<int, std::vector<std::string>> members;
  for (const auto& r : records)
    if (r.split == split) members[r.cluster_id].push_back(r.lesion_id);

  std::vector<std::pair<std::string, std::string>> pairs;
  const long cap = cfg.pairing_cap;
  for (auto& [cid, ids] : members) {
    std::sort(ids.begin(), ids.end());
    const size_t n = ids.size();
    if (n < 2) continue;
    std::vector<long> used(n, 0);
    std::set<std::pair<size_t, size_t>> seen;
    // ring offsets spread the cap evenly over lesions
    for (size_t k = 1; k < n; ++k) {
      bool any_room = false;
      for (size_t i = 0; i < n; ++i) {
        size_t j = (i + k) % n;
        size_t a = std::min(i, j), b = std::max(i, j);
        if (!seen.insert({a, b}).second) continue;
        if (cap >= 0 && (used[a] >= cap || used[b] >= cap)) {
          seen.erase({a, b});
          continue;
        }
        ++used[a];
        ++used[b];
        pairs.emplace_back(ids[a], ids[b]);
        any_room = true;
      }
      if (cap >= 0 && !any_room) break;
    }
  }
  return pairs;
}

std::string join_path(const std::string& root, const std::string& rel) {
  if (root.empty()) return rel;
  std::filesystem::path p(rel);
  if (p.is_absolute()) return rel;
  return (std::filesystem::path(root) / p).string();
}

std::vector<int> fallback_cluster(const std::vector<LesionRecord>& records,
                                  const std::string& images_root, int num_clusters,
                                  uint64_t rng_seed, const PreprocessConfig& window,
                                  std::vector<std::string>* warnings) {
  if (num_clusters < 1) throw ConfigError("fallback_cluster: num_clusters must be >= 1");
  const size_t n = records.size();
  if (n == 0) return {};
  int k = num_clusters;
  if (static_cast<size_t>(k) > n) {
    k = static_cast<int>(n);
    if (warnings)
      warnings->push_back("fallback_cluster: fewer records than clusters; using k = " +
                          std::to_string(k));
  }

  // descriptor: mean windowed intensity over the RECIST crop,
  // long/short diameter lengths, aspect ratio
  constexpr int kDim = 4;
  std::vector<std::array<double, kDim>> feat(n);
  for (size_t i = 0; i < n; ++i) {
    const auto& r = records[i];
    ImageF img = read_image_hu(join_path(images_root, r.image_path));
    const auto& rc = r.recist;
    double xs[4] = {rc.long_a.x, rc.long_b.x, rc.short_a.x, rc.short_b.x};
    double ys[4] = {rc.long_a.y, rc.long_b.y, rc.short_a.y, rc.short_b.y};
    int x0 = std::clamp(static_cast<int>(std::floor(*std::min_element(xs, xs + 4))), 0, img.w - 1);
    int x1 = std::clamp(static_cast<int>(std::ceil(*std::max_element(xs, xs + 4))), 0, img.w - 1);
    int y0 = std::clamp(static_cast<int>(std::floor(*std::min_element(ys, ys + 4))), 0, img.h - 1);
    int y1 = std::clamp(static_cast<int>(std::ceil(*std::max_element(ys, ys + 4))), 0, img.h - 1);
    double sum = 0;
    long cnt = 0;
    const double range = window.hu_high - window.hu_low;
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x) {
        sum += (std::clamp(img.at(y, x), window.hu_low, window.hu_high) - window.hu_low) / range;
        ++cnt;
      }
    double long_len = rc.long_len(), short_len = rc.short_len();
    feat[i] = {cnt ? sum / cnt : 0.0, long_len, short_len,
               long_len > 0 ? short_len / long_len : 1.0};
  }

  // z-score per dimension
  for (int d = 0; d < kDim; ++d) {
    double mean = 0;
    for (auto& f : feat) mean += f[d];
    mean /= n;
    double var = 0;
    for (auto& f : feat) var += (f[d] - mean) * (f[d] - mean);
    double sd = std::sqrt(var / n);
    for (auto& f : feat) f[d] = sd > 1e-12 ? (f[d] - mean) / sd : 0.0;
  }

  auto dist2 = [](const std::array<double, kDim>& a, const std::array<double, kDim>& b) {
    double s = 0;
    for (int d = 0; d < kDim; ++d) s += (a[d] - b[d]) * (a[d] - b[d]);
    return s;
  };

  // k-means++ seeding
  Rng rng(rng_seed);
  std::vector<std::array<double, kDim>> centers;
  centers.push_back(feat[rng.below(n)]);
  std::vector<double> d2(n);
  while (static_cast<int>(centers.size()) < k) {
    double total = 0;
    for (size_t i = 0; i < n; ++i) {
      double best = dist2(feat[i], centers[0]);
      for (size_t c = 1; c < centers.size(); ++c) best = std::min(best, dist2(feat[i], centers[c]));
      d2[i] = best;
      total += best;
    }
    size_t pick = n - 1;
    if (total <= 0) {
      pick = rng.below(n);  // identical records; any choice works
    } else {
      double tgt = rng.uniform01() * total;
      double acc = 0;
      for (size_t i = 0; i < n; ++i) {
        acc += d2[i];
        if (acc >= tgt) {
          pick = i;
          break;
        }
      }
    }
    centers.push_back(feat[pick]);
  }

  // Lloyd iterations
  std::vector<int> assign(n, 0);
  for (int iter = 0; iter < 100; ++iter) {
    bool changed = false;
    for (size_t i = 0; i < n; ++i) {
      int best = 0;
      double bd = dist2(feat[i], centers[0]);
      for (int c = 1; c < k; ++c) {
        double d = dist2(feat[i], centers[c]);
        if (d < bd) {
          bd = d;
          best = c;
        }
      }
      if (assign[i] != best) {
        assign[i] = best;
        changed = true;
      }
    }
    if (!changed && iter > 0) break;
    std::vector<std::array<double, kDim>> sums(k, std::array<double, kDim>{});
    std::vector<long> cnt(k, 0);
    for (size_t i = 0; i < n; ++i) {
      for (int d = 0; d < kDim; ++d) sums[assign[i]][d] += feat[i][d];
      cnt[assign[i]]++;
    }
    for (int c = 0; c < k; ++c)
      if (cnt[c] > 0)
        for (int d = 0; d < kDim; ++d) centers[c][d] = sums[c][d] / cnt[c];
  }
  return assign;
}

}  // namespace lseg
