#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lseg/array2.hpp"
#include "lseg/dataset.hpp"
#include "lseg/rng.hpp"

namespace lseg {

// Synthetic CT-like lesion slices: an elliptical lesion on a flat background
// with Gaussian noise, plus the analytic mask and RECIST diameters. Keeps
// the pipeline testable without any external dataset.
struct PhantomConfig {
  int count = 200;
  int num_clusters = 4;  // cluster id encodes a size/shape recipe
  int image_size = 128;
  double bg_hu = 50.0;
  double fg_hu = 200.0;
  double noise_sigma = 10.0;  // HU
  int lesions_per_patient = 2;
  uint64_t rng_seed = 7;
};

struct PhantomCase {
  ImageF image;  // HU
  MaskU8 gt;
  RecistAnnotation recist;
};

PhantomCase make_ellipse_phantom(int image_size, Point center, double semi_major,
                                 double semi_minor, double angle_rad, double bg_hu, double fg_hu,
                                 double noise_sigma, Rng& rng);

PhantomCase make_disk_phantom(int image_size, double radius, double bg_hu, double fg_hu,
                              double noise_sigma, uint64_t seed);

struct PhantomDataset {
  std::vector<LesionRecord> records;  // image_path/gt relative to the out dir
  std::vector<PhantomCase> cases;     // aligned with records
};

PhantomDataset generate_phantoms(const PhantomConfig& cfg);

// Writes images/<id>.png (16-bit HU), gt/<id>.png, annotations.csv.
void write_phantom_dataset(const PhantomDataset& ds, const std::string& out_dir);

}  // namespace lseg
