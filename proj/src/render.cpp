#include <algorithm>
#include <cmath>
#include <numbers>

#include "raymarch.hpp"
#include "shad3s/render.hpp"

namespace shad3s {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

Vec3 orbit_direction(double azimuth_deg, double elevation_deg) {
  const double az = std::remainder(azimuth_deg, 360.0) * kDeg;
  const double el = elevation_deg * kDeg;
  return {std::cos(el) * std::sin(az), std::sin(el), std::cos(el) * std::cos(az)};
}

double scene_epsilon(const Sphere& bound, const RenderConfig& config) {
  return config.epsilon_factor * std::max(bound.radius, 1.0);
}

}  // namespace

CameraPose CameraPose::framing(const CsgScene& scene, double azimuth_deg, double elevation_deg, double fov_deg) {
  CameraPose pose;
  pose.azimuth_deg = azimuth_deg;
  pose.elevation_deg = elevation_deg;
  pose.fov_deg = fov_deg;
  const Sphere bound = scene.empty() ? Sphere{Vec3::Zero(), 1.0} : scene.bounding_sphere();
  pose.target = bound.center;
  pose.distance = 1.05 * bound.radius / std::sin(0.5 * fov_deg * kDeg);
  return pose;
}

Vec3 CameraPose::position() const { return target + distance * orbit_direction(azimuth_deg, elevation_deg); }

LightSpec LightSpec::from_angles(double azimuth_deg, double elevation_deg) {
  LightSpec light{orbit_direction(azimuth_deg, elevation_deg)};
  light.validate();
  return light;
}

void LightSpec::validate() const {
  if (std::abs(direction.norm() - 1.0) > 1e-9) throw RangeError("light direction must be a unit vector");
  if (!(direction.y() > 0.05)) throw RangeError("light must be above the horizon (y > 0.05)");
}

double LightSpec::azimuth_deg() const { return std::atan2(direction.x(), direction.z()) / kDeg; }

double LightSpec::elevation_deg() const { return std::asin(std::clamp(direction.y(), -1.0, 1.0)) / kDeg; }

LightSpec relative_to_camera(const LightSpec& world, const CameraPose& pose) {
  const Eigen::AngleAxisd yaw(-std::remainder(pose.azimuth_deg, 360.0) * kDeg, Vec3::UnitY());
  return LightSpec{(yaw * world.direction).normalized()};
}

namespace detail {

PinholeCamera::PinholeCamera(const CameraPose& pose, int w, int h) : width(w), height(h) {
  origin = pose.position();
  forward = (pose.target - origin).normalized();
  right = forward.cross(Vec3::UnitY()).normalized();
  up = right.cross(forward);
  tan_half = std::tan(0.5 * pose.fov_deg * kDeg);
}

}  // namespace detail

DiffuseRender render_diffuse(const CsgScene& scene, const CameraPose& pose, const LightSpec& light,
                             const RenderConfig& config) {
  const int w = config.width;
  const int h = config.height;
  DiffuseRender out{Image(w, h), Mask(w, h), Plane<float>(w, h), Plane<Vec3>(w, h, Vec3::Zero()), 0.0, 0};
  if (scene.empty()) return out;

  const Sphere bound = scene.bounding_sphere();
  out.depth_extent = 2.0 * bound.radius;
  const double eps = scene_epsilon(bound, config);
  const double normal_step = 1e-5 * std::max(bound.radius, 1.0);
  const auto sdf = [&](const Vec3& p) { return scene.root->signed_distance(p); };
  const detail::PinholeCamera camera(pose, w, h);

  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const Vec3 d = camera.ray(x, y);
      const auto hit = detail::march_bounded(sdf, bound, camera.origin, d, 0.0, eps, config.max_steps);
      if (!hit.converged) ++out.non_converged;
      if (!hit.hit) continue;
      const Vec3 p = camera.origin + hit.t * d;
      const Vec3 n = detail::central_normal(sdf, p, normal_step);
      const double lambert = std::max(0.0, n.dot(light.direction));
      double intensity = 0.0;
      if (lambert > 0.0 && !detail::occluded(sdf, bound, p, n, light.direction, eps, config.max_steps))
        intensity = lambert;
      out.dif(x, y) = static_cast<float>(intensity);
      out.coverage(x, y) = 1;
      out.depth(x, y) = static_cast<float>(hit.t);
      out.normals(x, y) = n;
    }
  }
  return out;
}

IlluminationMasks quantize_masks(const Image& dif, const Mask& coverage, double tau_hi, double tau_sha) {
  if (!dif.same_shape(coverage)) throw FormatError("diffuse render and coverage differ in size");
  IlluminationMasks m{Mask(dif.width(), dif.height()), Mask(dif.width(), dif.height()),
                      Mask(dif.width(), dif.height())};
  for (std::size_t i = 0; i < dif.size(); ++i) {
    if (!coverage[i]) continue;
    if (dif[i] >= tau_hi) m.hi[i] = 1;
    else if (dif[i] >= tau_sha) m.mid[i] = 1;
    else m.sha[i] = 1;
  }
  return m;
}

Mask render_shadow_mask(const CsgScene& scene, const CameraPose& pose, const LightSpec& light,
                        const RenderConfig& config) {
  const int w = config.width;
  const int h = config.height;
  Mask shw(w, h);
  if (scene.empty()) return shw;

  const Sphere bound = scene.bounding_sphere();
  const double eps = scene_epsilon(bound, config);
  const auto sdf = [&](const Vec3& p) { return scene.root->signed_distance(p); };
  const detail::PinholeCamera camera(pose, w, h);
  const Vec3 up = Vec3::UnitY();

  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const Vec3 d = camera.ray(x, y);
      if (d.y() >= 0.0) continue;
      const double t_ground = (scene.ground_height - camera.origin.y()) / d.y();
      if (t_ground <= 0.0) continue;
      const auto hit = detail::march_bounded(sdf, bound, camera.origin, d, 0.0, eps, config.max_steps);
      if (hit.hit && hit.t < t_ground) continue;
      const Vec3 g = camera.origin + t_ground * d;
      if (detail::occluded(sdf, bound, g, up, light.direction, eps, config.max_steps)) shw(x, y) = 1;
    }
  }
  return shw;
}

Image contour_image(const Mask& cnt) {
  Image out(cnt.width(), cnt.height(), 1.0f);
  for (std::size_t i = 0; i < cnt.size(); ++i)
    if (cnt[i]) out[i] = 0.0f;
  return out;
}

RenderPlanes render_planes(const CsgScene& scene, const CameraPose& pose, const LightSpec& world_light,
                           const ToneCrops& crops, const PlaneOptions& options, const RenderConfig& config) {
  RenderPlanes planes;
  auto diffuse = render_diffuse(scene, pose, world_light, config);
  planes.non_converged = diffuse.non_converged;
  auto masks = quantize_masks(diffuse.dif, diffuse.coverage, config.tau_hi, config.tau_sha);
  planes.hi = std::move(masks.hi);
  planes.mid = std::move(masks.mid);
  planes.sha = std::move(masks.sha);
  planes.shw = options.no_shadows ? Mask(config.width, config.height)
                                  : render_shadow_mask(scene, pose, world_light, config);
  planes.cnt = extract_contours(diffuse.depth, diffuse.normals, diffuse.coverage, diffuse.depth_extent, config);
  planes.ill = render_gnomon_hint(relative_to_camera(world_light, pose), config.width, config.height);
  planes.sk = render_hatch(diffuse.dif, diffuse.coverage, planes.shw, planes.cnt, crops,
                           HatchOptions{options.background_hatch, config.hatch_bins});
  planes.dif = std::move(diffuse.dif);
  planes.coverage = std::move(diffuse.coverage);
  return planes;
}

}  // namespace shad3s
