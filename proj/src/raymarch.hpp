#pragma once

// Sphere tracing shared by the scene renderer and the gnomon hint.

#include <cmath>
#include <optional>
#include <utility>

#include "shad3s/render.hpp"

namespace shad3s::detail {

struct PinholeCamera {
  Vec3 origin;
  Vec3 forward;
  Vec3 right;
  Vec3 up;
  double tan_half = 0.0;
  int width = 0;
  int height = 0;

  PinholeCamera(const CameraPose& pose, int w, int h);

  /// Unit ray through the centre of pixel (x, y); y grows downwards.
  Vec3 ray(int x, int y) const {
    const double u = (x + 0.5) * 2.0 / width - 1.0;
    const double v = 1.0 - (y + 0.5) * 2.0 / height;
    const double aspect = static_cast<double>(width) / height;
    return (forward + (u * tan_half * aspect) * right + (v * tan_half) * up).normalized();
  }
};

/// Parametric interval [t0, t1] where the ray is inside the sphere.
inline std::optional<std::pair<double, double>> ray_sphere(const Vec3& o, const Vec3& d, const Sphere& s) {
  const Vec3 oc = o - s.center;
  const double b = oc.dot(d);
  const double c = oc.squaredNorm() - s.radius * s.radius;
  const double disc = b * b - c;
  if (disc < 0.0) return std::nullopt;
  const double root = std::sqrt(disc);
  return std::pair{-b - root, -b + root};
}

struct MarchResult {
  bool hit = false;
  bool converged = true;
  double t = 0.0;
};

template <class Sdf>
MarchResult march(const Sdf& sdf, const Vec3& o, const Vec3& d, double t0, double t1, double eps, int max_steps) {
  double t = t0;
  for (int i = 0; i < max_steps; ++i) {
    if (t > t1) return {false, true, t};
    const double dist = sdf(o + t * d);
    if (dist < eps) return {true, true, t};
    t += dist;
  }
  return {false, t > t1, t};
}

/// Sphere trace restricted to a bounding sphere.
template <class Sdf>
MarchResult march_bounded(const Sdf& sdf, const Sphere& bound, const Vec3& o, const Vec3& d, double t_min,
                          double eps, int max_steps) {
  const auto span = ray_sphere(o, d, bound);
  if (!span || span->second < t_min) return {false, true, 0.0};
  return march(sdf, o, d, std::max(t_min, span->first), span->second, eps, max_steps);
}

template <class Sdf>
Vec3 central_normal(const Sdf& sdf, const Vec3& p, double h) {
  const Vec3 ex(h, 0, 0), ey(0, h, 0), ez(0, 0, h);
  const Vec3 g(sdf(p + ex) - sdf(p - ex), sdf(p + ey) - sdf(p - ey), sdf(p + ez) - sdf(p - ez));
  const double n = g.norm();
  return n > 0.0 ? Vec3(g / n) : Vec3(0, 1, 0);
}

/// True when a ray from the surface point towards the light meets the solid.
template <class Sdf>
bool occluded(const Sdf& sdf, const Sphere& bound, const Vec3& p, const Vec3& n, const Vec3& l, double eps,
              int max_steps) {
  const Vec3 start = p + n * (2.0 * eps);
  return march_bounded(sdf, bound, start, l, 0.0, eps, max_steps).hit;
}

}  // namespace shad3s::detail
