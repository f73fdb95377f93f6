// lseg: weakly-supervised lesion co-segmentation pipeline driver.
//
// Subcommands: phantom, gen-masks, train, infer, refine, evaluate, overlay.
// One JSON config file feeds every stage; flags override config values.
// Exit codes: 0 success, 1 data/partial failure, 2 configuration error.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "lseg/cosegnet.hpp"
#include "lseg/dataset.hpp"
#include "lseg/densecrf.hpp"
#include "lseg/errors.hpp"
#include "lseg/grabcut.hpp"
#include "lseg/io.hpp"
#include "lseg/metrics.hpp"
#include "lseg/phantom.hpp"
#include "lseg/threads.hpp"
#include "lseg/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct AppConfig {
  lseg::PreprocessConfig pre;
  lseg::DatasetConfig data;
  lseg::GrabcutParams grabcut;
  lseg::CrfParams crf;
  lseg::ModelConfig model;
  lseg::OptimizerConfig opt;
  lseg::TrainConfig train;
  lseg::PhantomConfig phantom;
};

json load_json(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw lseg::ConfigError("cannot open config: " + path);
  try {
    return json::parse(f);
  } catch (const json::exception& e) {
    throw lseg::ConfigError("config " + path + ": " + e.what());
  }
}

AppConfig load_config(const std::string& path) {
  AppConfig c;
  c.model.input_size = c.pre.target_size;
  if (path.empty()) return c;
  json j = load_json(path);
  try {
    if (j.contains("preprocess")) {
      const auto& p = j["preprocess"];
      c.pre.target_size = p.value("target_size", c.pre.target_size);
      if (p.contains("hu_window")) {
        c.pre.hu_low = p["hu_window"].at(0).get<double>();
        c.pre.hu_high = p["hu_window"].at(1).get<double>();
      }
      c.pre.pad_hu = p.value("pad_hu", c.pre.pad_hu);
    }
    if (j.contains("dataset")) {
      const auto& d = j["dataset"];
      c.data.num_clusters = d.value("num_clusters", c.data.num_clusters);
      if (d.contains("split_fractions")) {
        c.data.frac_train = d["split_fractions"].at(0).get<double>();
        c.data.frac_val = d["split_fractions"].at(1).get<double>();
        c.data.frac_test = d["split_fractions"].at(2).get<double>();
      }
      c.data.pairing_cap = d.value("pairing_cap", c.data.pairing_cap);
      c.data.rng_seed = d.value("seed", c.data.rng_seed);
    }
    if (j.contains("grabcut")) {
      const auto& g = j["grabcut"];
      c.grabcut.gmm_components = g.value("components", c.grabcut.gmm_components);
      c.grabcut.gamma = g.value("gamma", c.grabcut.gamma);
      c.grabcut.max_iters = g.value("max_iters", c.grabcut.max_iters);
      c.grabcut.convergence_tol = g.value("convergence_tol", c.grabcut.convergence_tol);
      c.grabcut.seed_radius = g.value("seed_radius", c.grabcut.seed_radius);
      c.grabcut.bbox_expand = g.value("bbox_expand", c.grabcut.bbox_expand);
      c.grabcut.rng_seed = g.value("seed", c.grabcut.rng_seed);
    }
    if (j.contains("crf")) {
      const auto& r = j["crf"];
      c.crf.w_appearance = r.value("w_appearance", c.crf.w_appearance);
      c.crf.theta_alpha = r.value("theta_alpha", c.crf.theta_alpha);
      c.crf.theta_beta = r.value("theta_beta", c.crf.theta_beta);
      c.crf.w_smooth = r.value("w_smooth", c.crf.w_smooth);
      c.crf.theta_gamma = r.value("theta_gamma", c.crf.theta_gamma);
      c.crf.iterations = r.value("iterations", c.crf.iterations);
    }
    if (j.contains("model")) c.model = lseg::model_config_from_json(j["model"].dump());
    c.model.input_size = c.pre.target_size;
    if (j.contains("train")) {
      const auto& t = j["train"];
      std::string opt = t.value("optimizer", std::string("adam"));
      if (opt == "adam")
        c.opt.kind = lseg::OptimizerConfig::Kind::Adam;
      else if (opt == "sgd")
        c.opt.kind = lseg::OptimizerConfig::Kind::SGD;
      else
        throw lseg::ConfigError("train.optimizer must be 'adam' or 'sgd'");
      c.opt.adam_lr = t.value("adam_lr", c.opt.adam_lr);
      c.opt.sgd_lr0 = t.value("sgd_lr0", c.opt.sgd_lr0);
      c.opt.momentum = t.value("momentum", c.opt.momentum);
      c.opt.weight_decay = t.value("weight_decay", c.opt.weight_decay);
      c.opt.poly_power = t.value("poly_power", c.opt.poly_power);
      c.train.batch_pairs = t.value("batch_pairs", c.train.batch_pairs);
      c.train.epochs = t.value("epochs", c.train.epochs);
      c.train.iters_per_epoch = t.value("iters_per_epoch", c.train.iters_per_epoch);
      c.train.rng_seed = t.value("seed", c.train.rng_seed);
      c.train.checkpoint_every = t.value("checkpoint_every", c.train.checkpoint_every);
    }
    if (j.contains("phantom")) {
      const auto& p = j["phantom"];
      c.phantom.count = p.value("count", c.phantom.count);
      c.phantom.num_clusters = p.value("clusters", c.phantom.num_clusters);
      c.phantom.image_size = p.value("image_size", c.phantom.image_size);
      c.phantom.bg_hu = p.value("bg_hu", c.phantom.bg_hu);
      c.phantom.fg_hu = p.value("fg_hu", c.phantom.fg_hu);
      c.phantom.noise_sigma = p.value("noise_sigma", c.phantom.noise_sigma);
      c.phantom.lesions_per_patient =
          p.value("lesions_per_patient", c.phantom.lesions_per_patient);
      c.phantom.rng_seed = p.value("seed", c.phantom.rng_seed);
    }
  } catch (const json::exception& e) {
    throw lseg::ConfigError("config " + path + ": " + e.what());
  }
  return c;
}

std::vector<lseg::LesionRecord> load_records_with_clusters(const AppConfig& cfg,
                                                           const std::string& csv,
                                                           const std::string& images_root) {
  std::vector<std::string> warnings;
  auto records = lseg::load_records(csv, &warnings);
  for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
  bool missing = false;
  for (const auto& r : records) missing |= r.cluster_id < 0;
  if (missing) {
    std::cerr << "clusters missing from CSV; running fallback descriptor clustering\n";
    warnings.clear();
    auto assign = lseg::fallback_cluster(records, images_root, cfg.data.num_clusters,
                                         cfg.data.rng_seed, cfg.pre, &warnings);
    for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
    for (size_t i = 0; i < records.size(); ++i) records[i].cluster_id = assign[i];
  }
  return records;
}

void write_pairs_csv(const std::string& path,
                     const std::vector<std::pair<std::string, std::string>>& pairs) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw lseg::DataError("cannot write pairs file: " + path);
  f << "lesion_a,lesion_b\n";
  for (const auto& [a, b] : pairs) f << a << "," << b << "\n";
}

std::vector<std::pair<std::string, std::string>> read_pairs_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw lseg::DataError("cannot open pairs file: " + path);
  std::string line;
  if (!std::getline(f, line)) throw lseg::DataError("pairs file is empty: " + path);
  std::vector<std::pair<std::string, std::string>> out;
  while (std::getline(f, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto comma = line.find(',');
    if (comma == std::string::npos) throw lseg::DataError("pairs file row missing comma: " + line);
    out.emplace_back(line.substr(0, comma), line.substr(comma + 1));
  }
  return out;
}

int cmd_phantom(const AppConfig& cfg, const std::string& out_dir) {
  auto ds = lseg::generate_phantoms(cfg.phantom);
  lseg::write_phantom_dataset(ds, out_dir);
  std::cout << "phantom: wrote " << ds.records.size() << " lesions ("
            << cfg.phantom.num_clusters << " clusters) to " << out_dir << "\n";
  return 0;
}

int cmd_gen_masks(const AppConfig& cfg, const std::string& csv, const std::string& images_root,
                  const std::string& out_dir) {
  auto records = lseg::load_records(csv);
  fs::create_directories(out_dir);
  struct Row {
    std::string status, message, mask_path;
  };
  std::vector<Row> rows(records.size());

  lseg::parallel_for(records.size(), [&](size_t begin, size_t end) {
    for (size_t i = begin; i < end; ++i) {
      const auto& rec = records[i];
      Row& row = rows[i];
      try {
        lseg::ImageF img = lseg::read_image_hu(lseg::join_path(images_root, rec.image_path));
        lseg::GrabcutParams params = cfg.grabcut;
        params.rng_seed = cfg.grabcut.rng_seed + i;  // schedule-independent
        auto result = lseg::generate_pseudo_mask(img, rec.recist, cfg.pre, params);
        std::string mask_path = (fs::path(out_dir) / (rec.lesion_id + ".png")).string();
        lseg::write_mask_png(mask_path, result.mask);
        row.mask_path = mask_path;
        row.status = result.fg_collapsed ? "ok_collapsed_to_seeds" : "ok";
      } catch (const std::exception& e) {
        row.status = "failed";
        row.message = e.what();
      }
    }
  });

  std::ofstream manifest(fs::path(out_dir) / "manifest.csv", std::ios::trunc);
  manifest << "lesion_id,mask_path,status\n";
  int failures = 0;
  for (size_t i = 0; i < records.size(); ++i) {
    manifest << records[i].lesion_id << "," << rows[i].mask_path << "," << rows[i].status << "\n";
    if (rows[i].status == "failed") {
      ++failures;
      std::cerr << "gen-masks: " << records[i].lesion_id << " failed: " << rows[i].message << "\n";
    }
  }
  std::cout << "gen-masks: " << records.size() - failures << "/" << records.size()
            << " masks written to " << out_dir << "\n";
  return failures ? 1 : 0;
}

int cmd_train(const AppConfig& cfg, const std::string& csv, const std::string& images_root,
              const std::string& masks_dir, const std::string& out_dir,
              const std::string& resume) {
  auto records = load_records_with_clusters(cfg, csv, images_root);
  std::vector<std::string> warnings;
  lseg::stratified_split(records, cfg.data, &warnings);
  for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";

  fs::create_directories(out_dir);
  {
    std::ofstream split_file(fs::path(out_dir) / "split.csv", std::ios::trunc);
    split_file << "lesion_id,split\n";
    for (const auto& r : records)
      split_file << r.lesion_id << "," << lseg::split_name(r.split) << "\n";
  }
  for (auto [split, name] : {std::pair<lseg::Split, const char*>{lseg::Split::Train, "train"},
                             {lseg::Split::Val, "val"},
                             {lseg::Split::Test, "test"}}) {
    auto pairs = lseg::build_pairs(records, split, cfg.data);
    write_pairs_csv((fs::path(out_dir) / (std::string("pairs_") + name + ".csv")).string(),
                    pairs);
  }

  auto train_pairs_ids = lseg::build_pairs(records, lseg::Split::Train, cfg.data);
  if (train_pairs_ids.empty()) throw lseg::DataError("train: no training pairs available");

  std::map<std::string, const lseg::LesionRecord*> by_id;
  for (const auto& r : records) by_id[r.lesion_id] = &r;
  std::set<std::string> needed;
  for (const auto& [a, b] : train_pairs_ids) {
    needed.insert(a);
    needed.insert(b);
  }
  std::map<std::string, lseg::nn::Tensor> images, targets;
  for (const auto& id : needed) {
    const auto* rec = by_id.at(id);
    lseg::ImageF img = lseg::read_image_hu(lseg::join_path(images_root, rec->image_path));
    auto pre = lseg::preprocess(img, cfg.pre);
    images.emplace(id, lseg::image_to_tensor(pre.image));
    std::string mask_path = (fs::path(masks_dir) / (id + ".png")).string();
    if (!fs::exists(mask_path))
      throw lseg::DataError("train: pseudo-mask not found: " + mask_path +
                            " (run gen-masks first)");
    lseg::MaskU8 mask = lseg::read_mask_png(mask_path);
    if (mask.h != cfg.pre.target_size || mask.w != cfg.pre.target_size)
      throw lseg::DataError("train: mask " + mask_path + " is " + std::to_string(mask.w) + "x" +
                            std::to_string(mask.h) + ", expected target size " +
                            std::to_string(cfg.pre.target_size));
    targets.emplace(id, lseg::mask_to_target(mask));
  }
  std::vector<lseg::TrainPair> pairs;
  pairs.reserve(train_pairs_ids.size());
  for (const auto& [a, b] : train_pairs_ids)
    pairs.push_back({a, b, images.at(a), images.at(b), targets.at(a), targets.at(b)});

  lseg::CosegNet model(cfg.model);
  lseg::TrainOptions opts;
  opts.out_dir = out_dir;
  opts.resume_checkpoint = resume;
  auto result = lseg::train(model, pairs, cfg.opt, cfg.train, opts);
  std::cout << "train: " << result.iterations << " iterations, final loss " << result.final_loss
            << ", checkpoint " << result.checkpoint_path << "\n";
  return 0;
}

int cmd_infer(const AppConfig& cfg, const std::string& checkpoint, const std::string& csv,
              const std::string& images_root, const std::string& pairs_path,
              const std::string& out_dir, bool use_crf, double threshold) {
  lseg::Checkpoint ck = lseg::read_checkpoint(checkpoint);
  lseg::CosegNet model(ck.config);
  lseg::import_parameters(model, ck.tensors);
  if (ck.config.input_size != cfg.pre.target_size)
    throw lseg::ConfigError("infer: checkpoint expects input size " +
                            std::to_string(ck.config.input_size) + " but preprocess target is " +
                            std::to_string(cfg.pre.target_size));

  auto records = lseg::load_records(csv);
  std::map<std::string, const lseg::LesionRecord*> by_id;
  for (const auto& r : records) by_id[r.lesion_id] = &r;
  auto pairs = read_pairs_csv(pairs_path);
  if (pairs.empty()) throw lseg::DataError("infer: no pairs listed");

  fs::create_directories(out_dir);
  std::set<std::string> done;
  std::map<std::string, lseg::nn::Tensor> cache;
  auto fetch = [&](const std::string& id) -> const lseg::nn::Tensor& {
    auto it = cache.find(id);
    if (it != cache.end()) return it->second;
    auto rec_it = by_id.find(id);
    if (rec_it == by_id.end())
      throw lseg::DataError("infer: pair references unknown lesion " + id);
    lseg::ImageF img =
        lseg::read_image_hu(lseg::join_path(images_root, rec_it->second->image_path));
    auto pre = lseg::preprocess(img, cfg.pre);
    return cache.emplace(id, lseg::image_to_tensor(pre.image)).first->second;
  };

  std::ofstream manifest(fs::path(out_dir) / "manifest.csv", std::ios::trunc);
  manifest << "lesion_id,mask_path,prob_path\n";
  for (const auto& [ida, idb] : pairs) {
    if (done.count(ida) && done.count(idb)) continue;
    const lseg::nn::Tensor& ta = fetch(ida);
    const lseg::nn::Tensor& tb = fetch(idb);
    lseg::nn::Graph g;
    auto out = model.forward_pair(g, ta, tb);
    auto emit = [&](const std::string& id, const lseg::nn::NodePtr& node) {
      if (done.count(id)) return;  // first prediction of a lesion wins
      done.insert(id);
      lseg::ProbMap prob = lseg::tensor_to_prob(node->value);
      if (use_crf) {
        lseg::ImageF img_plane(prob.h, prob.w);
        img_plane.v = cache.at(id).data;
        prob = lseg::refine(prob, img_plane, cfg.crf);
      }
      std::string prob_path = (fs::path(out_dir) / (id + ".prob.lseg1")).string();
      std::string mask_path = (fs::path(out_dir) / (id + ".png")).string();
      lseg::write_lseg1(prob_path, prob);
      lseg::write_mask_png(mask_path, lseg::threshold_prob(prob, threshold));
      manifest << id << "," << mask_path << "," << prob_path << "\n";
    };
    emit(ida, out.prob_a);
    emit(idb, out.prob_b);
  }
  std::cout << "infer: wrote masks for " << done.size() << " lesions to " << out_dir << "\n";
  return 0;
}

int cmd_refine(const AppConfig& cfg, const std::string& prob_path, const std::string& image_path,
               const std::string& out_path, const std::string& mask_out) {
  lseg::ImageF prob = lseg::read_lseg1(prob_path);
  lseg::ImageF raw = lseg::read_image_hu(image_path);
  if (raw.h != prob.h || raw.w != prob.w)
    throw lseg::DataError("refine: image and probability map shapes differ");
  const double lo = cfg.pre.hu_low, hi = cfg.pre.hu_high;
  lseg::ImageF img(raw.h, raw.w);
  for (size_t i = 0; i < raw.size(); ++i)
    img.v[i] = (std::clamp(raw.v[i], lo, hi) - lo) / (hi - lo);
  lseg::ProbMap refined = lseg::refine(prob, img, cfg.crf);
  lseg::write_lseg1(out_path, refined);
  if (!mask_out.empty()) lseg::write_mask_png(mask_out, lseg::threshold_prob(refined, 0.5));
  std::cout << "refine: wrote " << out_path << "\n";
  return 0;
}

int cmd_evaluate(const std::string& pred_dir, const std::string& gt_dir,
                 const std::string& out_prefix) {
  std::vector<std::string> ids;
  for (const auto& entry : fs::directory_iterator(pred_dir))
    if (entry.path().extension() == ".png") ids.push_back(entry.path().stem().string());
  std::sort(ids.begin(), ids.end());
  if (ids.empty()) throw lseg::DataError("evaluate: no .png masks in " + pred_dir);

  std::vector<lseg::MaskPair> cases;
  std::vector<std::string> unmatched;
  for (const auto& id : ids) {
    fs::path gt_path = fs::path(gt_dir) / (id + ".png");
    if (!fs::exists(gt_path)) {
      unmatched.push_back(id);
      continue;
    }
    cases.push_back({id, lseg::read_mask_png((fs::path(pred_dir) / (id + ".png")).string()),
                     lseg::read_mask_png(gt_path.string())});
  }
  if (!cases.empty()) {
    auto report = lseg::evaluate_set(cases);
    lseg::write_report_csv(out_prefix + ".csv", report);
    lseg::write_report_json(out_prefix + ".json", report);
    std::cout << "evaluate: " << cases.size() << " cases (population std)\n"
              << "  recall    " << lseg::format_mean_std(report.recall) << "\n"
              << "  precision " << lseg::format_mean_std(report.precision) << "\n"
              << "  dice      " << lseg::format_mean_std(report.dice) << "\n"
              << "  avd       " << lseg::format_mean_std(report.avd) << " (" << report.avd_excluded
              << " n/a)\n"
              << "  vs        " << lseg::format_mean_std(report.vs) << "\n";
  }
  if (!unmatched.empty()) {
    std::cerr << "evaluate: no ground truth for:";
    for (const auto& id : unmatched) std::cerr << " " << id;
    std::cerr << "\n";
    return 1;
  }
  return 0;
}

int cmd_overlay(const AppConfig& cfg, const std::string& image_path, const std::string& pred_path,
                const std::string& gt_path, const std::string& out_path) {
  lseg::ImageF raw = lseg::read_image_hu(image_path);
  const double lo = cfg.pre.hu_low, hi = cfg.pre.hu_high;
  std::vector<uint8_t> rgb(static_cast<size_t>(raw.h) * raw.w * 3);
  for (size_t i = 0; i < raw.size(); ++i) {
    auto g = static_cast<uint8_t>(
        std::lround(255.0 * (std::clamp(raw.v[i], lo, hi) - lo) / (hi - lo)));
    rgb[3 * i] = rgb[3 * i + 1] = rgb[3 * i + 2] = g;
  }
  auto draw_contour = [&](const lseg::MaskU8& m, uint8_t r, uint8_t gr, uint8_t b) {
    if (m.h != raw.h || m.w != raw.w)
      throw lseg::DataError("overlay: mask shape differs from image");
    for (int y = 0; y < m.h; ++y)
      for (int x = 0; x < m.w; ++x) {
        if (!m.at(y, x)) continue;
        bool boundary = y == 0 || y == m.h - 1 || x == 0 || x == m.w - 1 || !m.at(y - 1, x) ||
                        !m.at(y + 1, x) || !m.at(y, x - 1) || !m.at(y, x + 1);
        if (boundary) {
          size_t i = (static_cast<size_t>(y) * m.w + x) * 3;
          rgb[i] = r;
          rgb[i + 1] = gr;
          rgb[i + 2] = b;
        }
      }
  };
  // ground truth first so the prediction stays visible where they coincide
  if (!gt_path.empty()) draw_contour(lseg::read_mask_png(gt_path), 0, 255, 0);
  draw_contour(lseg::read_mask_png(pred_path), 255, 0, 0);
  lseg::write_rgb_png(out_path, raw.h, raw.w, rgb);
  std::cout << "overlay: wrote " << out_path << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"weakly-supervised lesion co-segmentation pipeline"};
  app.require_subcommand(1);

  std::string config_path;
  app.add_option("--config", config_path, "JSON config file")->envname("LSEG_CONFIG");

  auto* sc_phantom = app.add_subcommand("phantom", "generate a synthetic lesion dataset");
  std::string ph_out;
  int ph_count = -1, ph_clusters = -1, ph_size = -1;
  long ph_seed = -1;
  sc_phantom->add_option("--out", ph_out, "output directory")->required();
  sc_phantom->add_option("--count", ph_count, "lesion count");
  sc_phantom->add_option("--clusters", ph_clusters, "cluster count");
  sc_phantom->add_option("--size", ph_size, "image size in px");
  sc_phantom->add_option("--seed", ph_seed, "rng seed");

  auto* sc_gen = app.add_subcommand("gen-masks", "RECIST -> GrabCut pseudo-masks");
  std::string gm_csv, gm_root, gm_out;
  sc_gen->add_option("--csv", gm_csv, "annotations CSV")->required();
  sc_gen->add_option("--images-root", gm_root, "image path root (default: CSV directory)");
  sc_gen->add_option("--out", gm_out, "mask output directory")->required();

  auto* sc_train = app.add_subcommand("train", "train the co-segmentation network");
  std::string tr_csv, tr_root, tr_masks, tr_out, tr_resume;
  sc_train->add_option("--csv", tr_csv, "annotations CSV")->required();
  sc_train->add_option("--images-root", tr_root, "image path root (default: CSV directory)");
  sc_train->add_option("--masks", tr_masks, "pseudo-mask directory")->required();
  sc_train->add_option("--out", tr_out, "output directory")->required();
  sc_train->add_option("--resume", tr_resume, "checkpoint to resume from");

  auto* sc_infer = app.add_subcommand("infer", "predict masks for lesion pairs");
  std::string in_ckpt, in_csv, in_root, in_pairs, in_out;
  bool in_crf = false;
  double in_thr = 0.5;
  sc_infer->add_option("--checkpoint", in_ckpt, "model checkpoint")->required();
  sc_infer->add_option("--csv", in_csv, "annotations CSV")->required();
  sc_infer->add_option("--images-root", in_root, "image path root (default: CSV directory)");
  sc_infer->add_option("--pairs", in_pairs, "pairs CSV (lesion_a,lesion_b)")->required();
  sc_infer->add_option("--out", in_out, "output directory")->required();
  sc_infer->add_flag("--crf", in_crf, "dense-CRF refinement before thresholding");
  sc_infer->add_option("--threshold", in_thr, "binarization threshold");

  auto* sc_refine = app.add_subcommand("refine", "dense-CRF refinement of a probability map");
  std::string rf_prob, rf_image, rf_out, rf_mask;
  sc_refine->add_option("--prob", rf_prob, "probability map (LSEG1)")->required();
  sc_refine->add_option("--image", rf_image, "matching intensity image (HU)")->required();
  sc_refine->add_option("--out", rf_out, "refined probability output (LSEG1)")->required();
  sc_refine->add_option("--mask-out", rf_mask, "optional thresholded mask PNG");

  auto* sc_eval = app.add_subcommand("evaluate", "five-metric report: pred masks vs ground truth");
  std::string ev_pred, ev_gt, ev_out;
  sc_eval->add_option("--pred", ev_pred, "prediction mask directory")->required();
  sc_eval->add_option("--gt", ev_gt, "ground-truth mask directory")->required();
  sc_eval->add_option("--out-prefix", ev_out, "report prefix (.csv/.json)")->required();

  auto* sc_overlay = app.add_subcommand("overlay", "draw mask contours over the image");
  std::string ov_image, ov_pred, ov_gt, ov_out;
  sc_overlay->add_option("--image", ov_image, "base image")->required();
  sc_overlay->add_option("--pred", ov_pred, "prediction mask (red)")->required();
  sc_overlay->add_option("--gt", ov_gt, "ground-truth mask (green)");
  sc_overlay->add_option("--out", ov_out, "output PNG")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    AppConfig cfg = load_config(config_path);
    if (sc_phantom->parsed()) {
      if (ph_count > 0) cfg.phantom.count = ph_count;
      if (ph_clusters > 0) cfg.phantom.num_clusters = ph_clusters;
      if (ph_size > 0) cfg.phantom.image_size = ph_size;
      if (ph_seed >= 0) cfg.phantom.rng_seed = static_cast<uint64_t>(ph_seed);
      return cmd_phantom(cfg, ph_out);
    }
    if (sc_gen->parsed()) {
      if (gm_root.empty()) gm_root = fs::path(gm_csv).parent_path().string();
      return cmd_gen_masks(cfg, gm_csv, gm_root, gm_out);
    }
    if (sc_train->parsed()) {
      if (tr_root.empty()) tr_root = fs::path(tr_csv).parent_path().string();
      return cmd_train(cfg, tr_csv, tr_root, tr_masks, tr_out, tr_resume);
    }
    if (sc_infer->parsed()) {
      if (in_root.empty()) in_root = fs::path(in_csv).parent_path().string();
      return cmd_infer(cfg, in_ckpt, in_csv, in_root, in_pairs, in_out, in_crf, in_thr);
    }
    if (sc_refine->parsed()) return cmd_refine(cfg, rf_prob, rf_image, rf_out, rf_mask);
    if (sc_eval->parsed()) return cmd_evaluate(ev_pred, ev_gt, ev_out);
    if (sc_overlay->parsed()) return cmd_overlay(cfg, ov_image, ov_pred, ov_gt, ov_out);
  } catch (const lseg::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
