#include "lseg/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "lseg/errors.hpp"
#include "lseg/metrics.hpp"
#include "lseg/rng.hpp"

namespace lseg {

double poly_lr(const PolySchedule& s, long iter, bool* clamped) {
  if (s.total_iters < 1) throw ConfigError("poly_lr: total_iters must be >= 1");
  if (iter < 0) throw ConfigError("poly_lr: negative iteration");
  if (clamped) *clamped = false;
  if (iter > s.total_iters) {
    if (clamped) *clamped = true;
    return 0.0;
  }
  double frac = 1.0 - static_cast<double>(iter) / static_cast<double>(s.total_iters);
  return s.lr0 * std::pow(frac, s.power);
}

void sgd_step(std::vector<double>& p, const std::vector<double>& g, std::vector<double>& v,
              double lr, double momentum, double weight_decay) {
  if (p.size() != g.size() || p.size() != v.size()) throw ConfigError("sgd_step: size mismatch");
  for (size_t i = 0; i < p.size(); ++i) {
    v[i] = momentum * v[i] + (g[i] + weight_decay * p[i]);
    p[i] -= lr * v[i];
  }
}

void adam_step(std::vector<double>& p, const std::vector<double>& g, std::vector<double>& m,
               std::vector<double>& v, double lr, const OptimizerConfig& c, long t) {
  if (p.size() != g.size() || p.size() != m.size() || p.size() != v.size())
    throw ConfigError("adam_step: size mismatch");
  if (t < 1) throw ConfigError("adam_step: t counts from 1");
  const double b1 = c.adam_beta1, b2 = c.adam_beta2;
  const double corr1 = 1.0 - std::pow(b1, static_cast<double>(t));
  const double corr2 = 1.0 - std::pow(b2, static_cast<double>(t));
  for (size_t i = 0; i < p.size(); ++i) {
    const double grad = g[i] + c.weight_decay * p[i];
    m[i] = b1 * m[i] + (1.0 - b1) * grad;
    v[i] = b2 * v[i] + (1.0 - b2) * grad * grad;
    const double mhat = m[i] / corr1;
    const double vhat = v[i] / corr2;
    p[i] -= lr * mhat / (std::sqrt(vhat) + c.adam_eps);
  }
}

nn::Tensor mask_to_target(const MaskU8& mask) {
  nn::Tensor t({1, mask.h, mask.w});
  for (size_t i = 0; i < mask.size(); ++i) {
    if (mask.v[i] != 0 && mask.v[i] != 255)
      throw DataError("mask_to_target: non-binary mask value " + std::to_string(mask.v[i]));
    t.data[i] = mask.v[i] ? 1.0 : 0.0;
  }
  return t;
}

double pair_loss(const ProbMap& pred_a, const ProbMap& pred_b, const MaskU8& mask_a,
                 const MaskU8& mask_b) {
  if (!pred_a.same_shape(pred_b) || pred_a.h != mask_a.h || pred_a.w != mask_a.w ||
      !mask_a.same_shape(mask_b))
    throw DataError("pair_loss: shape mismatch");
  constexpr double kEps = 1e-7;
  auto one = [&](const ProbMap& p, const MaskU8& m) {
    double s = 0;
    for (size_t i = 0; i < p.size(); ++i) {
      if (m.v[i] != 0 && m.v[i] != 255)
        throw DataError("pair_loss: non-binary mask value " + std::to_string(m.v[i]));
      const double pc = std::clamp(p.v[i], kEps, 1.0 - kEps);
      const double t = m.v[i] ? 1.0 : 0.0;
      s += -t * std::log(pc) - (1.0 - t) * std::log(1.0 - pc);
    }
    return s;
  };
  return (one(pred_a, mask_a) + one(pred_b, mask_b)) /
         static_cast<double>(2 * pred_a.size());
}

namespace {

// Deterministic infinite stream of pair indices: block k is [0..n) shuffled
// with a seed derived from (base_seed, k), so any position is recomputable
// after a resume.
class PairStream {
 public:
  PairStream(size_t n, uint64_t seed, uint64_t consumed) : n_(n), seed_(seed) {
    block_ = consumed / n_;
    offset_ = consumed % n_;
    fill();
  }

  size_t next() {
    if (offset_ == n_) {
      ++block_;
      offset_ = 0;
      fill();
    }
    return order_[offset_++];
  }

 private:
  void fill() {
    order_.resize(n_);
    for (size_t i = 0; i < n_; ++i) order_[i] = i;
    Rng rng(seed_ ^ (0x5851f42d4c957f2dull * (block_ + 1)));
    rng.shuffle(order_);
  }

  size_t n_, offset_;
  uint64_t seed_, block_;
  std::vector<size_t> order_;
};

}  // namespace

TrainResult train(CosegNet& model, const std::vector<TrainPair>& pairs,
                  const OptimizerConfig& oc, const TrainConfig& tc, const TrainOptions& opts) {
  if (pairs.empty()) throw DataError("train: empty pair set");
  if (tc.batch_pairs < 1) throw ConfigError("train: batch_pairs must be >= 1");
  if (tc.epochs < 1 || tc.iters_per_epoch < 1)
    throw ConfigError("train: epochs and iters_per_epoch must be >= 1");
  if (oc.momentum < 0 || oc.momentum >= 1) throw ConfigError("train: momentum must be in [0,1)");
  if (oc.weight_decay < 0) throw ConfigError("train: weight_decay must be >= 0");
  if ((oc.kind == OptimizerConfig::Kind::Adam ? oc.adam_lr : oc.sgd_lr0) <= 0)
    throw ConfigError("train: learning rate must be positive");

  const long total_iters = static_cast<long>(tc.epochs) * tc.iters_per_epoch;
  const PolySchedule sched{oc.sgd_lr0, oc.poly_power, total_iters};

  std::filesystem::create_directories(opts.out_dir);
  const std::string ckpt_path =
      (std::filesystem::path(opts.out_dir) / "checkpoint.csgw").string();
  const std::string loss_path = (std::filesystem::path(opts.out_dir) / "loss.csv").string();

  // optimizer slots per parameter, in registration order
  const auto& params = model.named_parameters();
  std::vector<std::vector<double>> slot_m(params.size()), slot_v(params.size());
  for (size_t i = 0; i < params.size(); ++i) {
    slot_m[i].assign(params[i].second->value.data.size(), 0.0);
    slot_v[i].assign(params[i].second->value.data.size(), 0.0);
  }

  long start_iter = 0;
  if (!opts.resume_checkpoint.empty()) {
    Checkpoint ck = read_checkpoint(opts.resume_checkpoint);
    import_parameters(model, ck.tensors);
    auto extra = nlohmann::json::parse(ck.extra_json);
    start_iter = extra.value("iteration", 0L);
    for (size_t i = 0; i < params.size(); ++i) {
      auto im = ck.tensors.find("opt.m." + params[i].first);
      auto iv = ck.tensors.find("opt.v." + params[i].first);
      if (im != ck.tensors.end()) slot_m[i] = im->second.data;
      if (iv != ck.tensors.end()) slot_v[i] = iv->second.data;
    }
  }

  std::ofstream loss_log(loss_path, start_iter == 0 ? std::ios::trunc : std::ios::app);
  if (!loss_log) throw DataError("train: cannot open loss log " + loss_path);

  auto save = [&](long iter_done, double loss) {
    Checkpoint ck;
    ck.config = model.config();
    nlohmann::json extra;
    extra["iteration"] = iter_done;
    extra["total_iters"] = total_iters;
    extra["optimizer"] = oc.kind == OptimizerConfig::Kind::Adam ? "adam" : "sgd";
    extra["last_loss"] = loss;
    ck.extra_json = extra.dump();
    export_parameters(model, ck.tensors);
    for (size_t i = 0; i < params.size(); ++i) {
      nn::Tensor m(params[i].second->value.shape), v(params[i].second->value.shape);
      m.data = slot_m[i];
      v.data = slot_v[i];
      ck.tensors.emplace("opt.m." + params[i].first, std::move(m));
      ck.tensors.emplace("opt.v." + params[i].first, std::move(v));
    }
    write_checkpoint(ckpt_path, ck);
  };

  PairStream stream(pairs.size(), tc.rng_seed,
                    static_cast<uint64_t>(start_iter) * tc.batch_pairs);

  TrainResult res;
  double loss_value = 0;
  char row[128];
  for (long iter = start_iter; iter < total_iters; ++iter) {
    const double lr =
        oc.kind == OptimizerConfig::Kind::SGD ? poly_lr(sched, iter) : oc.adam_lr;

    model.zero_grad();
    nn::Graph g;
    nn::NodePtr loss_sum;
    for (int b = 0; b < tc.batch_pairs; ++b) {
      const TrainPair& tp = pairs[stream.next()];
      auto out = model.forward_pair(g, tp.image_a, tp.image_b);
      auto la = g.bce_mean(out.prob_a, tp.mask_a);
      auto lb = g.bce_mean(out.prob_b, tp.mask_b);
      auto lp = g.scale_const(g.add(la, lb), 0.5);
      loss_sum = loss_sum ? g.add(loss_sum, lp) : lp;
    }
    auto loss = g.scale_const(loss_sum, 1.0 / tc.batch_pairs);
    g.backward(loss);
    loss_value = loss->value.data[0];

    for (size_t i = 0; i < params.size(); ++i) {
      for (double gv : params[i].second->grad.data)
        if (!std::isfinite(gv))
          throw DataError("train: non-finite gradient in '" + params[i].first +
                          "' at iteration " + std::to_string(iter + 1));
      if (oc.kind == OptimizerConfig::Kind::SGD)
        sgd_step(params[i].second->value.data, params[i].second->grad.data, slot_m[i], lr,
                 oc.momentum, oc.weight_decay);
      else
        adam_step(params[i].second->value.data, params[i].second->grad.data, slot_m[i],
                  slot_v[i], lr, oc, iter + 1);
    }

    const long done = iter + 1;
    std::snprintf(row, sizeof(row), "%ld,%.9g,%.9g\n", done, lr, loss_value);
    loss_log << row;
    res.iterations = done;

    bool stop = false;
    if (opts.periodic && opts.eval_every > 0 && done % opts.eval_every == 0)
      stop = opts.periodic(done, model);
    if (tc.checkpoint_every > 0 && done % tc.checkpoint_every == 0) save(done, loss_value);
    if (stop) break;
  }
  loss_log.flush();
  save(res.iterations, loss_value);
  res.final_loss = loss_value;
  res.checkpoint_path = ckpt_path;
  return res;
}

double mean_train_dice(CosegNet& model, const std::vector<TrainPair>& pairs, double threshold) {
  if (pairs.empty()) throw DataError("mean_train_dice: empty pair set");
  double sum = 0;
  long n = 0;
  for (const auto& tp : pairs) {
    nn::Graph g;
    auto out = model.forward_pair(g, tp.image_a, tp.image_b);
    auto one = [&](const nn::NodePtr& prob, const nn::Tensor& target) {
      MaskU8 pred = threshold_prob(tensor_to_prob(prob->value), threshold);
      MaskU8 gt(pred.h, pred.w, 0);
      for (size_t i = 0; i < gt.size(); ++i) gt.v[i] = target.data[i] > 0.5 ? 255 : 0;
      sum += dice(confusion(pred, gt));
      ++n;
    };
    one(out.prob_a, tp.mask_a);
    one(out.prob_b, tp.mask_b);
  }
  return sum / static_cast<double>(n);
}

}  // namespace lseg
