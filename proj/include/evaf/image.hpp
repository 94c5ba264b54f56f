#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "evaf/error.hpp"

namespace evaf {

/// Row-major grid of doubles. Used for textures (linear intensity), rendered
/// log-intensity frames and reconstructions.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<double> data;

  Image() = default;
  Image(int w, int h, double fill = 0.0)
      : width(w), height(h), data(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), fill) {
    if (w < 0 || h < 0) throw InvalidArgument("image dimensions must be non-negative");
  }

  std::size_t size() const { return data.size(); }
  bool empty() const { return data.empty(); }

  double& at(int x, int y) { return data[index(x, y)]; }
  double at(int x, int y) const { return data[index(x, y)]; }

  /// Replicate-boundary access.
  double clamped(int x, int y) const {
    return at(std::clamp(x, 0, width - 1), std::clamp(y, 0, height - 1));
  }

  bool all_finite() const {
    return std::all_of(data.begin(), data.end(), [](double v) { return std::isfinite(v); });
  }

  friend bool operator==(const Image&, const Image&) = default;

 private:
  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x);
  }
};

/// Cyclic shift with wrap-around.
inline Image cyclic_shift(const Image& img, int dx, int dy) {
  Image out(img.width, img.height);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      const int sx = ((x - dx) % img.width + img.width) % img.width;
      const int sy = ((y - dy) % img.height + img.height) % img.height;
      out.at(x, y) = img.at(sx, sy);
    }
  }
  return out;
}

}  // namespace evaf
