#include "lseg/phantom.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "lseg/errors.hpp"
#include "lseg/io.hpp"

namespace lseg {

PhantomCase make_ellipse_phantom(int image_size, Point center, double semi_major,
                                 double semi_minor, double angle_rad, double bg_hu, double fg_hu,
                                 double noise_sigma, Rng& rng) {
  if (semi_major < semi_minor) std::swap(semi_major, semi_minor);
  PhantomCase c;
  c.image = ImageF(image_size, image_size, bg_hu);
  c.gt = MaskU8(image_size, image_size, 0);
  const double ca = std::cos(angle_rad), sa = std::sin(angle_rad);
  for (int y = 0; y < image_size; ++y)
    for (int x = 0; x < image_size; ++x) {
      const double dx = x - center.x, dy = y - center.y;
      const double u = (dx * ca + dy * sa) / semi_major;
      const double v = (-dx * sa + dy * ca) / semi_minor;
      if (u * u + v * v <= 1.0) {
        c.gt.at(y, x) = 255;
        c.image.at(y, x) = fg_hu;
      }
      c.image.at(y, x) += noise_sigma * rng.normal();
    }
  c.recist.long_a = {center.x - semi_major * ca, center.y - semi_major * sa};
  c.recist.long_b = {center.x + semi_major * ca, center.y + semi_major * sa};
  c.recist.short_a = {center.x + semi_minor * sa, center.y - semi_minor * ca};
  c.recist.short_b = {center.x - semi_minor * sa, center.y + semi_minor * ca};
  return c;
}

PhantomCase make_disk_phantom(int image_size, double radius, double bg_hu, double fg_hu,
                              double noise_sigma, uint64_t seed) {
  Rng rng(seed);
  const double mid = (image_size - 1) / 2.0;
  return make_ellipse_phantom(image_size, {mid, mid}, radius, radius, 0.0, bg_hu, fg_hu,
                              noise_sigma, rng);
}

PhantomDataset generate_phantoms(const PhantomConfig& cfg) {
  if (cfg.count < 1 || cfg.num_clusters < 1 || cfg.image_size < 16)
    throw ConfigError("phantom: count >= 1, clusters >= 1, image_size >= 16 required");
  if (cfg.lesions_per_patient < 1)
    throw ConfigError("phantom: lesions_per_patient must be >= 1");

  PhantomDataset ds;
  Rng rng(cfg.rng_seed);
  const double s = cfg.image_size;

  // lesions are dealt round-robin over clusters so patients (consecutive
  // within a cluster) never straddle clusters
  std::vector<int> cluster_counts(cfg.num_clusters, 0);
  for (int i = 0; i < cfg.count; ++i) cluster_counts[i % cfg.num_clusters]++;

  int lesion_idx = 0;
  for (int cl = 0; cl < cfg.num_clusters; ++cl) {
    const bool large = cl % 2 == 1;
    const bool ellipse = (cl / 2) % 2 == 1;
    for (int j = 0; j < cluster_counts[cl]; ++j, ++lesion_idx) {
      const double a_frac = large ? rng.uniform(0.16, 0.22) : rng.uniform(0.09, 0.13);
      const double a = a_frac * s;
      const double b = ellipse ? a * rng.uniform(0.55, 0.75) : a;
      const double phi = ellipse ? rng.uniform(0.0, 3.14159265358979323846) : 0.0;
      const double jitter = 0.06 * s;
      Point center{(s - 1) / 2.0 + rng.uniform(-jitter, jitter),
                   (s - 1) / 2.0 + rng.uniform(-jitter, jitter)};
      PhantomCase pc = make_ellipse_phantom(cfg.image_size, center, a, b, phi, cfg.bg_hu,
                                            cfg.fg_hu, cfg.noise_sigma, rng);
      char id[32];
      std::snprintf(id, sizeof(id), "L%04d", lesion_idx);
      LesionRecord rec;
      rec.lesion_id = id;
      rec.patient_id = "P" + std::to_string(cl) + "_" + std::to_string(j / cfg.lesions_per_patient);
      rec.image_path = std::string("images/") + id + ".png";
      rec.recist = pc.recist;
      rec.cluster_id = cl;
      ds.records.push_back(std::move(rec));
      ds.cases.push_back(std::move(pc));
    }
  }
  return ds;
}

void write_phantom_dataset(const PhantomDataset& ds, const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(out_dir) / "images");
  fs::create_directories(fs::path(out_dir) / "gt");
  for (size_t i = 0; i < ds.records.size(); ++i) {
    const auto& rec = ds.records[i];
    write_image_hu_png((fs::path(out_dir) / rec.image_path).string(), ds.cases[i].image);
    write_mask_png((fs::path(out_dir) / "gt" / (rec.lesion_id + ".png")).string(),
                   ds.cases[i].gt);
  }
  write_records_csv((fs::path(out_dir) / "annotations.csv").string(), ds.records);
}

}  // namespace lseg
