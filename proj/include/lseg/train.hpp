#pragma once

#include <functional>
#include <string>
#include <vector>

#include "lseg/array2.hpp"
#include "lseg/cosegnet.hpp"

namespace lseg {

struct OptimizerConfig {
  enum class Kind { Adam, SGD };
  Kind kind = Kind::Adam;
  double adam_lr = 1e-5;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double sgd_lr0 = 0.01;
  double momentum = 0.99;
  double weight_decay = 0.0005;
  double poly_power = 0.9;
};

struct TrainConfig {
  int batch_pairs = 10;  // the paper's 20 images per batch
  int epochs = 2;
  long iters_per_epoch = 12000;
  uint64_t rng_seed = 1;
  long checkpoint_every = 1000;
};

struct PolySchedule {
  double lr0 = 0.01;
  double power = 0.9;
  long total_iters = 24000;
};

// lr0 * (1 - iter/total)^power; iter past the horizon clamps to 0 (with the
// optional flag set so callers can warn once).
double poly_lr(const PolySchedule& s, long iter, bool* clamped = nullptr);

// v <- momentum*v + (g + wd*p); p <- p - lr*v
void sgd_step(std::vector<double>& p, const std::vector<double>& g, std::vector<double>& v,
              double lr, double momentum, double weight_decay);

// Adam with L2 folded into the gradient and bias correction; t counts from 1.
void adam_step(std::vector<double>& p, const std::vector<double>& g, std::vector<double>& m,
               std::vector<double>& v, double lr, const OptimizerConfig& c, long t);

// Mean BCE over all pixels of both images; predictions clamped to
// [1e-7, 1-1e-7]. Masks must be strictly 0/255.
double pair_loss(const ProbMap& pred_a, const ProbMap& pred_b, const MaskU8& mask_a,
                 const MaskU8& mask_b);

nn::Tensor mask_to_target(const MaskU8& mask);  // (1,H,W) of {0,1}

struct TrainPair {
  std::string id_a, id_b;
  nn::Tensor image_a, image_b;  // (1,H,W) normalized intensities
  nn::Tensor mask_a, mask_b;    // (1,H,W) of {0,1}
};

struct TrainOptions {
  std::string out_dir;              // receives loss.csv and checkpoint.csgw
  std::string resume_checkpoint;    // optional
  long eval_every = 0;              // 0 disables the callback
  std::function<bool(long, CosegNet&)> periodic;  // true stops training early
};

struct TrainResult {
  long iterations = 0;
  double final_loss = 0;
  std::string checkpoint_path;
};

TrainResult train(CosegNet& model, const std::vector<TrainPair>& pairs,
                  const OptimizerConfig& oc, const TrainConfig& tc, const TrainOptions& opts);

// Mean Dice of thresholded forward passes against the training targets.
double mean_train_dice(CosegNet& model, const std::vector<TrainPair>& pairs,
                       double threshold = 0.5);

}  // namespace lseg
