#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "lseg/array2.hpp"

namespace lseg {

struct Point {
  double x = 0;
  double y = 0;
};

// Two diameters (four endpoints) locating a lesion on a CT slice.
struct RecistAnnotation {
  Point long_a, long_b;
  Point short_a, short_b;

  double long_len() const;
  double short_len() const;
};

enum class Split : uint8_t { Unassigned, Train, Val, Test };

const char* split_name(Split s);

struct LesionRecord {
  std::string lesion_id;
  std::string patient_id;
  std::string image_path;
  RecistAnnotation recist;
  int cluster_id = -1;  // -1 = unassigned; see fallback_cluster
  Split split = Split::Unassigned;
};

struct PreprocessConfig {
  int target_size = 128;
  double hu_low = -175.0;  // soft-tissue window
  double hu_high = 275.0;
  double pad_hu = -1000.0;  // air
};

struct DatasetConfig {
  int num_clusters = 200;
  double frac_train = 0.8;
  double frac_val = 0.1;
  double frac_test = 0.1;
  long pairing_cap = -1;  // per-lesion pair cap; < 0 means unlimited
  uint64_t rng_seed = 0;
};

// Original-frame coordinates -> preprocessed-frame coordinates. The image is
// zero-padded to a centered square of side `square`, then resized to
// `target` with half-pixel-centered bilinear sampling; points map through
// the identical geometry, so inverse(forward(p)) == p exactly.
struct GeomTransform {
  int src_h = 0, src_w = 0;
  int square = 0;
  int target = 0;
  int pad_x = 0, pad_y = 0;

  Point forward(Point p) const;
  Point inverse(Point q) const;
};

struct Preprocessed {
  ImageF image;  // target x target, intensities in [0, 1]
  GeomTransform tf;
};

// Window-normalize to [0,1], pad square, resize to target_size.
Preprocessed preprocess(const ImageF& hu_image, const PreprocessConfig& cfg);

// Nearest-neighbor resample of a mask into the preprocessed frame.
MaskU8 transform_mask(const MaskU8& src, const GeomTransform& tf);

RecistAnnotation transform_recist(const RecistAnnotation& r, const GeomTransform& tf);

// CSV schema (exact header):
// lesion_id,patient_id,image_path,cluster_id,lx1,ly1,lx2,ly2,sx1,sy1,sx2,sy2
// A short diameter measured longer than the long one is swapped on load
// (both seed the trimap identically) and reported through `warnings`.
std::vector<LesionRecord> load_records(const std::string& csv_path,
                                       std::vector<std::string>* warnings = nullptr);

void write_records_csv(const std::string& path, const std::vector<LesionRecord>& records);

// Cluster-stratified 80/10/10 split at patient granularity: all lesions of a
// patient land in one split; per-cluster lesion fractions stay within one
// patient group of the targets. Clusters with fewer than 3 patients go
// entirely to train with a warning. Deterministic given cfg.rng_seed.
void stratified_split(std::vector<LesionRecord>& records, const DatasetConfig& cfg,
                      std::vector<std::string>* warnings = nullptr);

// Unordered within-cluster pairs for one split, canonically ordered by
// lesion id, ring-offset order so a pairing cap spreads pairs evenly.
std::vector<std::pair<std::string, std::string>> build_pairs(
    const std::vector<LesionRecord>& records, Split split, const DatasetConfig& cfg);

// k-means over a small shape/intensity descriptor; stands in for the
// precomputed lesion-embedding clusters when the CSV has none.
std::vector<int> fallback_cluster(const std::vector<LesionRecord>& records,
                                  const std::string& images_root, int num_clusters,
                                  uint64_t rng_seed, const PreprocessConfig& window,
                                  std::vector<std::string>* warnings = nullptr);

std::string join_path(const std::string& root, const std::string& rel);

}  // namespace lseg
