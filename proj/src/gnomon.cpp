// Canonical illumination hint.
//
// Geometry (scene units): a disc of radius 1.0 and thickness 0.05 resting on y = 0, centred
// on the y axis; on top of it a fin of thickness 0.05 centred on x = 0 whose profile in the
// yz plane is a right triangle with legs 1.0 along +z and 0.8 along +y, hypotenuse facing +z.
//
// The canonical camera looks at the origin from elevation 35 deg, distance 4, fov 40 deg,
// placed at azimuth 30 deg with the gnomon yawed by the same 30 deg so that the fin plane
// contains the camera. Rendering happens in the gnomon frame, where that camera sits at
// azimuth 0: the picture is then exactly mirror-symmetric under x -> -x.

#include <algorithm>
#include <cmath>

#include "raymarch.hpp"
#include "shad3s/render.hpp"

namespace shad3s {

namespace {

constexpr double kDiscRadius = 1.0;
constexpr double kThickness = 0.05;
constexpr double kFinDepth = 1.0;   // along +z
constexpr double kFinHeight = 0.8;  // along +y

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

using Vec2 = Eigen::Vector2d;

double triangle_distance(const Vec2& p, const Vec2& p0, const Vec2& p1, const Vec2& p2) {
  const Vec2 e0 = p1 - p0, e1 = p2 - p1, e2 = p0 - p2;
  const Vec2 v0 = p - p0, v1 = p - p1, v2 = p - p2;
  const Vec2 pq0 = v0 - e0 * std::clamp(v0.dot(e0) / e0.dot(e0), 0.0, 1.0);
  const Vec2 pq1 = v1 - e1 * std::clamp(v1.dot(e1) / e1.dot(e1), 0.0, 1.0);
  const Vec2 pq2 = v2 - e2 * std::clamp(v2.dot(e2) / e2.dot(e2), 0.0, 1.0);
  const double s = sign(e0.x() * e2.y() - e0.y() * e2.x());
  const double d0 = std::min({pq0.dot(pq0), pq1.dot(pq1), pq2.dot(pq2)});
  const double d1 = std::min({s * (v0.x() * e0.y() - v0.y() * e0.x()), s * (v1.x() * e1.y() - v1.y() * e1.x()),
                              s * (v2.x() * e2.y() - v2.y() * e2.x())});
  return -std::sqrt(d0) * sign(d1);
}

}  // namespace

double gnomon_signed_distance(const Vec3& p) {
  const double half = 0.5 * kThickness;
  // Disc.
  const double dr = std::hypot(p.x(), p.z()) - kDiscRadius;
  const double dy = std::abs(p.y() - half) - half;
  const double disc = std::min(std::max(dr, dy), 0.0) + std::hypot(std::max(dr, 0.0), std::max(dy, 0.0));
  // Fin: triangle in (z, y) extruded along x.
  const Vec2 q(p.z(), p.y());
  const double tri = triangle_distance(q, Vec2(0.0, kThickness), Vec2(kFinDepth, kThickness),
                                       Vec2(0.0, kThickness + kFinHeight));
  const double wx = tri;
  const double wy = std::abs(p.x()) - half;
  const double fin = std::min(std::max(wx, wy), 0.0) + std::hypot(std::max(wx, 0.0), std::max(wy, 0.0));
  return std::min(disc, fin);
}

CameraPose gnomon_camera() {
  CameraPose pose;
  pose.azimuth_deg = 0.0;
  pose.elevation_deg = 35.0;
  pose.distance = 4.0;
  pose.fov_deg = 40.0;
  pose.target = Vec3::Zero();
  return pose;
}

Image render_gnomon_hint(const LightSpec& light, int width, int height) {
  light.validate();
  Image out(width, height);
  const Sphere bound{Vec3::Zero(), 1.05};
  constexpr double eps = 1e-4;
  constexpr int max_steps = 256;
  const auto sdf = [](const Vec3& p) { return gnomon_signed_distance(p); };
  const detail::PinholeCamera camera(gnomon_camera(), width, height);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const Vec3 d = camera.ray(x, y);
      const auto hit = detail::march_bounded(sdf, bound, camera.origin, d, 0.0, eps, max_steps);
      if (!hit.hit) continue;
      const Vec3 p = camera.origin + hit.t * d;
      const Vec3 n = detail::central_normal(sdf, p, 1e-5);
      const double lambert = std::max(0.0, n.dot(light.direction));
      if (lambert > 0.0 && !detail::occluded(sdf, bound, p, n, light.direction, eps, max_steps))
        out(x, y) = static_cast<float>(lambert);
    }
  }
  return out;
}

}  // namespace shad3s
