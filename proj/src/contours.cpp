#include <array>
#include <cmath>
#include <numbers>
#include <vector>

#include "shad3s/render.hpp"

namespace shad3s {

Mask extract_contours(const Plane<float>& depth, const Plane<Vec3>& normals, const Mask& coverage,
                      double depth_extent, const RenderConfig& config) {
  if (!depth.same_shape(coverage) || !normals.same_shape(coverage))
    throw FormatError("contour buffers differ in size");
  const int w = coverage.width();
  const int h = coverage.height();
  Mask strokes(w, h);
  const double depth_jump = config.depth_jump * depth_extent;
  const double cos_crease = std::cos(config.crease_deg * std::numbers::pi / 180.0);

  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!coverage(x, y)) continue;
      // Silhouette: the object-side pixel of a coverage edge, including the image border.
      for (const auto [dx, dy] : std::array<std::array<int, 2>, 4>{{{1, 0}, {-1, 0}, {0, 1}, {0, -1}}}) {
        const int nx = x + dx;
        const int ny = y + dy;
        if (!coverage.contains(nx, ny) || !coverage(nx, ny)) {
          strokes(x, y) = 1;
          break;
        }
      }
      // Interior discontinuities against the right and lower neighbours mark one side only.
      for (const auto [dx, dy] : std::array<std::array<int, 2>, 2>{{{1, 0}, {0, 1}}}) {
        const int nx = x + dx;
        const int ny = y + dy;
        if (!coverage.contains(nx, ny) || !coverage(nx, ny)) continue;
        const float d0 = depth(x, y);
        const float d1 = depth(nx, ny);
        // A real occlusion edge jumps well past the slope on either side; grazing surfaces
        // only ramp up smoothly.
        const double jump = std::abs(d0 - d1);
        auto slope = [&](int ax, int ay, int bx, int by) {
          if (!coverage.contains(ax, ay) || !coverage(ax, ay)) return 0.0;
          return static_cast<double>(std::abs(depth(ax, ay) - depth(bx, by)));
        };
        const bool dominates = jump > 2.0 * slope(x - dx, y - dy, x, y) && jump > 2.0 * slope(nx + dx, ny + dy, nx, ny);
        if (jump > depth_jump && dominates) {
          if (d0 <= d1) strokes(x, y) = 1;
          else strokes(nx, ny) = 1;
        } else if (normals(x, y).dot(normals(nx, ny)) < cos_crease) {
          strokes(x, y) = 1;
        }
      }
    }
  }
  return thin(strokes);
}

Mask thin(const Mask& strokes) {
  const int w = strokes.width();
  const int h = strokes.height();
  Mask img = strokes;
  auto at = [&](int x, int y) -> int { return img.contains(x, y) ? img(x, y) : 0; };
  std::vector<std::size_t> removals;
  bool changed = true;
  while (changed) {
    changed = false;
    for (int pass = 0; pass < 2; ++pass) {
      removals.clear();
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          if (!img(x, y)) continue;
          // Neighbours P2..P9 clockwise from north.
          const std::array<int, 8> p{at(x, y - 1), at(x + 1, y - 1), at(x + 1, y), at(x + 1, y + 1),
                                     at(x, y + 1), at(x - 1, y + 1), at(x - 1, y), at(x - 1, y - 1)};
          int b = 0;
          int a = 0;
          for (int i = 0; i < 8; ++i) {
            b += p[i];
            if (p[i] == 0 && p[(i + 1) % 8] == 1) ++a;
          }
          if (b < 2 || b > 6 || a != 1) continue;
          if (pass == 0 && (p[0] * p[2] * p[4] != 0 || p[2] * p[4] * p[6] != 0)) continue;
          if (pass == 1 && (p[0] * p[2] * p[6] != 0 || p[0] * p[4] * p[6] != 0)) continue;
          removals.push_back(static_cast<std::size_t>(y) * w + x);
        }
      }
      for (auto i : removals) img[i] = 0;
      changed = changed || !removals.empty();
    }
  }
  return img;
}

}  // namespace shad3s
