#pragma once

#include <array>
#include <cstdint>

#include "shad3s/csg.hpp"
#include "shad3s/image.hpp"

namespace shad3s {

/// Orbit camera. The look-at target is the centre of the scene's bounding sphere.
struct CameraPose {
  double azimuth_deg = 0.0;     // [0, 360), 0 looks from +z towards -z
  double elevation_deg = 30.0;  // [10, 80]
  double distance = 6.0;
  double fov_deg = 40.0;  // vertical
  Vec3 target = Vec3::Zero();

  /// Pose whose distance keeps the whole bounding sphere inside the view.
  static CameraPose framing(const CsgScene& scene, double azimuth_deg, double elevation_deg, double fov_deg = 40.0);

  Vec3 position() const;
};

/// Directional light; `direction` points from the surface towards the light.
struct LightSpec {
  Vec3 direction = Vec3(0, 1, 0);

  /// Same azimuth/elevation convention as CameraPose. Throws RangeError below the horizon.
  static LightSpec from_angles(double azimuth_deg, double elevation_deg);
  /// Throws RangeError unless unit norm with y > 0.05.
  void validate() const;

  double azimuth_deg() const;
  double elevation_deg() const;
};

/// The light as seen from a camera: world light yawed so the camera sits at azimuth 0.
LightSpec relative_to_camera(const LightSpec& world, const CameraPose& pose);

struct RenderConfig {
  int width = 256;
  int height = 256;
  double tau_hi = 0.75;
  double tau_sha = 0.40;
  int hatch_bins = 6;
  double depth_jump = 0.02;  // fraction of the scene depth extent
  double crease_deg = 25.0;
  int max_steps = 256;
  double epsilon_factor = 1e-4;  // sphere-trace hit tolerance, times scene radius
};

struct DiffuseRender {
  Image dif;
  Mask coverage;
  Plane<float> depth;       // ray distance at object hits, 0 elsewhere
  Plane<Vec3> normals;      // world-space unit normals at object hits
  double depth_extent = 0;  // diameter of the scene bounding sphere
  std::size_t non_converged = 0;
};

/// Lambertian render with hard cast shadows: max(0, n.l) times light visibility.
DiffuseRender render_diffuse(const CsgScene& scene, const CameraPose& pose, const LightSpec& light,
                             const RenderConfig& config = {});

struct IlluminationMasks {
  Mask hi;
  Mask mid;
  Mask sha;
};

/// Three-way threshold partition of the covered pixels.
IlluminationMasks quantize_masks(const Image& dif, const Mask& coverage, double tau_hi = 0.75, double tau_sha = 0.40);

/// Ground pixels from which the light is blocked by the scene.
Mask render_shadow_mask(const CsgScene& scene, const CameraPose& pose, const LightSpec& light,
                        const RenderConfig& config = {});

/// One-pixel silhouette and crease strokes from depth and normal discontinuities.
Mask extract_contours(const Plane<float>& depth, const Plane<Vec3>& normals, const Mask& coverage,
                      double depth_extent, const RenderConfig& config = {});

/// Zhang-Suen thinning.
Mask thin(const Mask& strokes);

/// Canonical gnomon: disc base plus a right-triangular fin. Exposed for tests and tools.
double gnomon_signed_distance(const Vec3& p);
CameraPose gnomon_camera();

/// Diffuse render of the gnomon under a camera-relative light, from the canonical camera.
Image render_gnomon_hint(const LightSpec& camera_relative_light, int width = 256, int height = 256);

/// Four aligned tone crops, darkest first.
struct ToneCrops {
  std::array<Image, 4> tones;
};

struct HatchOptions {
  bool background_hatch = false;
  int bins = 6;
};

/// Six-tone cel shading with tones 1..4 tiled from `crops`, cast shadows in tone 1 and
/// contours in black. Returns ink-on-paper intensities.
Image render_hatch(const Image& dif, const Mask& coverage, const Mask& shw, const Mask& cnt, const ToneCrops& crops,
                   const HatchOptions& options = {});

/// Tone bin of a diffuse value: 0 darkest .. bins-1 brightest.
int tone_bin(float dif, int bins = 6);

struct RenderPlanes {
  Image dif;
  Mask coverage;
  Mask hi;
  Mask mid;
  Mask sha;
  Mask shw;
  Mask cnt;
  Image ill;
  Image sk;
  std::size_t non_converged = 0;
};

struct PlaneOptions {
  bool background_hatch = false;
  bool no_shadows = false;
};

/// All registered planes of one view. Contours are stored as set = stroke.
RenderPlanes render_planes(const CsgScene& scene, const CameraPose& pose, const LightSpec& world_light,
                           const ToneCrops& crops, const PlaneOptions& options = {}, const RenderConfig& config = {});

/// Drawing convention for contours: black strokes on white paper.
Image contour_image(const Mask& cnt);

}  // namespace shad3s
