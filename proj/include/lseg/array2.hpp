#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace lseg {

// Dense row-major 2-D array. Index order is (y, x).
template <typename T>
struct Array2 {
  int h = 0;
  int w = 0;
  std::vector<T> v;

  Array2() = default;
  Array2(int height, int width, T fill = T{})
      : h(height), w(width), v(static_cast<size_t>(height) * static_cast<size_t>(width), fill) {}

  T& at(int y, int x) { return v[static_cast<size_t>(y) * w + x]; }
  const T& at(int y, int x) const { return v[static_cast<size_t>(y) * w + x]; }

  bool in_bounds(int y, int x) const { return y >= 0 && y < h && x >= 0 && x < w; }
  bool same_shape(const Array2& o) const { return h == o.h && w == o.w; }
  size_t size() const { return v.size(); }
  bool empty() const { return v.empty(); }
};

using ImageF = Array2<double>;   // intensities (HU or normalized), per context
using MaskU8 = Array2<uint8_t>;  // 0 = background, 255 = lesion
using ProbMap = Array2<double>;  // values in [0, 1]

inline int mask_area(const MaskU8& m) {
  int n = 0;
  for (uint8_t p : m.v) n += (p != 0);
  return n;
}

}  // namespace lseg
