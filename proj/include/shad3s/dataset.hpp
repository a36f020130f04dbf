#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "shad3s/csg.hpp"
#include "shad3s/render.hpp"
#include "shad3s/tam.hpp"

namespace shad3s {

enum class Split { train, val, test };

std::string to_string(Split split);
Split split_from_string(const std::string& name);

struct DatasetFlags {
  bool background_hatch = false;
  bool no_shadows = false;
};

struct SubsetSpec {
  int k = 1;  // max solids per scene
  int n_scenes = 1024;
  int n_poses = 64;
  std::uint64_t seed = 0;
  DatasetFlags flags;
  int resolution = 256;
};

inline constexpr int kAzimuthSectors = 64;
inline constexpr std::array<double, 3> kDefaultSplitRatios{0.90, 0.05, 0.05};

/// One manifest row: everything needed to regenerate a data point.
struct DataPointMeta {
  std::string path;  // relative to the dataset root
  int k = 1;
  int scene_index = 0;
  std::string scene_id;
  int pose = 0;
  Split split = Split::train;
  LightSpec light;  // world frame
  CameraPose camera;
  std::string tam_family_id;
  std::uint64_t base_seed = 0;
  std::uint64_t scene_seed = 0;
  std::uint64_t pose_seed = 0;
  DatasetFlags flags;
  int resolution = 256;
  int leaf_count = 0;
  std::string digest;  // SHA-256 over the stored PNG bytes
};

struct DataPoint {
  RenderPlanes planes;
  ToneCrops crops;
  DataPointMeta meta;
};

/// Encoded files of a data point in storage order: 8 planes then t1..t4.
struct EncodedPoint {
  std::vector<std::pair<std::string, std::vector<std::uint8_t>>> files;
  std::string digest;
};

/// Deterministic scene of a subset; independent of generation order.
CsgScene subset_scene(const SubsetSpec& spec, int scene_index);

/// Renders the planes and crops of an explicit configuration. Only the light, camera, family,
/// flags, resolution and leaf count of the returned meta are filled in.
DataPoint render_point(const CsgScene& scene, const CameraPose& pose, const LightSpec& light, const TamFamily& family,
                       std::uint64_t crop_seed, const DatasetFlags& flags = {}, int resolution = 256);

/// Renders one data point from its recorded seeds.
DataPoint generate_point(const SubsetSpec& spec, int scene_index, int pose_index, const TamCatalog& catalog);

EncodedPoint encode_point(const DataPoint& point);

struct Manifest {
  std::vector<DataPointMeta> rows;

  std::string to_jsonl() const;
  static Manifest from_jsonl(const std::string& text);
  static Manifest load(const std::filesystem::path& root);
  void save(const std::filesystem::path& root) const;
  /// SHA-256 of the JSONL text; covers every point digest.
  std::string content_hash() const;
};

/// Renders n_scenes x n_poses points into root/k<k>/scene<id>/pose<i>/ and returns their rows in
/// scene order. On a failure the completed rows are written to root/manifest.partial.jsonl and
/// the error is rethrown.
Manifest build_subset(const SubsetSpec& spec, const TamCatalog& catalog, const std::filesystem::path& root,
                      int jobs = 1);

/// Split decided per scene from a hash of the scene id. Ratios must sum to 1.
Split split_for_scene(const std::string& scene_id, const std::array<double, 3>& ratios = kDefaultSplitRatios);
Manifest split_assign(Manifest manifest, const std::array<double, 3>& ratios = kDefaultSplitRatios);

/// Planes of a stored point as images, in the storage conventions: cnt and sk are ink on paper,
/// masks are white where set.
struct StoredPoint {
  Image cnt, ill, hi, mid, sha, shw, sk, dif;
  std::array<Image, 4> tones;
};

StoredPoint load_point(const std::filesystem::path& root, const DataPointMeta& row);

}  // namespace shad3s
