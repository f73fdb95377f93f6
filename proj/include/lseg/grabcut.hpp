#pragma once

#include <cstdint>
#include <vector>

#include "lseg/array2.hpp"
#include "lseg/dataset.hpp"

namespace lseg {

enum class TrimapLabel : uint8_t { DefBG = 0, ProbBG = 1, ProbFG = 2, DefFG = 3 };

using Trimap = Array2<TrimapLabel>;

struct GrabcutParams {
  int gmm_components = 5;
  double gamma = 50.0;       // pairwise strength
  int max_iters = 5;
  double convergence_tol = 0.001;  // fraction of pixels changing label
  double seed_radius = 2.0;        // px dilation of the diameter segments
  double bbox_expand = 0.5;        // fractional bbox dilation per side
  uint64_t rng_seed = 17;
};

// Seeds from the RECIST diameters: pixels within seed_radius of either
// segment are DefFG; pixels outside the bbox dilated by bbox_expand are
// DefBG; the ring between is ProbFG inside the raw bbox, ProbBG outside.
// If the dilated bbox swallows the whole image, a 2-px border is forced
// DefBG. Throws DataError when an endpoint lies outside the image.
Trimap build_trimap(const RecistAnnotation& recist, int h, int w, const GrabcutParams& params);

struct GrabcutResult {
  MaskU8 mask;                    // 0 / 255
  std::vector<double> energies;   // total energy after each min-cut
  int iterations = 0;
  bool fg_collapsed = false;      // every ProbFG pixel went BG on the first cut
};

// Alternates GMM refits and min-cuts over the trimap's free pixels.
// Definite seeds never flip; the recorded energies are non-increasing.
GrabcutResult grabcut_iterate(const ImageF& image, const Trimap& trimap,
                              const GrabcutParams& params);

struct PseudoMaskResult {
  MaskU8 mask;  // target_size x target_size
  GeomTransform tf;
  std::vector<double> energies;
  int iterations = 0;
  bool fg_collapsed = false;
};

// preprocess -> transform RECIST -> build_trimap -> grabcut_iterate.
PseudoMaskResult generate_pseudo_mask(const ImageF& hu_image, const RecistAnnotation& recist,
                                      const PreprocessConfig& pre, const GrabcutParams& params);

}  // namespace lseg
