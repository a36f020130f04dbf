#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <variant>

#include "shad3s/error.hpp"

namespace shad3s {

using Vec3 = Eigen::Vector3d;
using Quat = Eigen::Quaterniond;

enum class PrimitiveKind { sphere, box, cylinder, cone, torus };
inline constexpr int kPrimitiveKindCount = 5;
inline constexpr int kMaxSolids = 6;

std::string_view to_string(PrimitiveKind kind);

/// Canonical solid in its local frame, centred at the origin.
///
/// Parameter layout by kind:
///   sphere    {radius}
///   box       {half-x, half-y, half-z}
///   cylinder  {radius, half-height}        axis along y
///   cone      {base radius, half-height}   base at y = -h, apex at y = +h
///   torus     {major, minor}               ring in the xz plane
struct Primitive {
  PrimitiveKind kind = PrimitiveKind::sphere;
  std::array<double, 3> params{1.0, 0.0, 0.0};

  static Primitive sphere(double r) { return {PrimitiveKind::sphere, {r, 0, 0}}; }
  static Primitive box(double hx, double hy, double hz) { return {PrimitiveKind::box, {hx, hy, hz}}; }
  static Primitive cylinder(double r, double h) { return {PrimitiveKind::cylinder, {r, h, 0}}; }
  static Primitive cone(double r, double h) { return {PrimitiveKind::cone, {r, h, 0}}; }
  static Primitive torus(double major, double minor) { return {PrimitiveKind::torus, {major, minor, 0}}; }

  /// Throws SemanticError when a size is non-positive or the torus is self-intersecting.
  void validate() const;

  double signed_distance(const Vec3& p) const;
  /// Radius of the smallest origin-centred sphere enclosing the solid.
  double bounding_radius() const;
  /// max over the solid of dot(x, dir), dir in local coordinates.
  double support(const Vec3& dir) const;

  friend bool operator==(const Primitive&, const Primitive&) = default;
};

/// World = translation + scale * rotation * local.
struct Transform {
  Vec3 translation = Vec3::Zero();
  Quat rotation = Quat::Identity();
  double scale = 1.0;

  Vec3 to_local(const Vec3& world) const;
  Vec3 to_world(const Vec3& local) const;

  friend bool operator==(const Transform& a, const Transform& b) {
    return a.translation == b.translation && a.rotation.coeffs() == b.rotation.coeffs() && a.scale == b.scale;
  }
};

enum class BoolOp { union_, difference, intersection };

std::string_view to_string(BoolOp op);

struct Sphere {
  Vec3 center = Vec3::Zero();
  double radius = 0.0;
};

class CsgNode;
using NodePtr = std::shared_ptr<const CsgNode>;

/// Immutable CSG tree node; subtrees are shared between copies.
class CsgNode {
 public:
  struct Leaf {
    Primitive primitive;
    Transform transform;
  };
  struct Operation {
    BoolOp op;
    NodePtr left;
    NodePtr right;
  };

  static NodePtr leaf(Primitive primitive, Transform transform = {});
  static NodePtr operation(BoolOp op, NodePtr left, NodePtr right);

  bool is_leaf() const noexcept { return std::holds_alternative<Leaf>(node_); }
  const Leaf& as_leaf() const { return std::get<Leaf>(node_); }
  const Operation& as_operation() const { return std::get<Operation>(node_); }

  int leaf_count() const;
  double signed_distance(const Vec3& p) const;
  Sphere bounding_sphere() const;

  friend bool operator==(const CsgNode& a, const CsgNode& b);

 private:
  explicit CsgNode(Leaf leaf) : node_(std::move(leaf)) {}
  explicit CsgNode(Operation op) : node_(std::move(op)) {}

  std::variant<Leaf, Operation> node_;
};

struct CsgScene {
  NodePtr root;  // null for an empty scene
  double ground_height = 0.0;
  std::uint64_t seed = 0;
  int max_solids = kMaxSolids;

  bool empty() const noexcept { return root == nullptr; }
  int leaf_count() const { return root ? root->leaf_count() : 0; }
  /// +infinity for an empty scene.
  double signed_distance(const Vec3& p) const;
  Sphere bounding_sphere() const;

  friend bool operator==(const CsgScene& a, const CsgScene& b);
};

struct SamplerConfig {
  // union / difference / intersection
  std::array<double, 3> op_weights{0.5, 0.3, 0.2};
  std::array<double, kPrimitiveKindCount> kind_weights{1, 1, 1, 1, 1};
  double placement_radius = 2.0;
  double min_scale = 0.5;
  double max_scale = 1.5;
  double max_clearance = 0.5;
  double scene_radius = 4.5;
  int max_retries = 16;
};

/// Procedural scene: a left-deep chain Op(...Op(Solid, Solid)..., Solid) with a leaf count drawn
/// uniformly from [1, max_solids]. Throws RangeError for max_solids outside [1, 6].
CsgScene sample_scene(std::uint64_t seed, int max_solids, const SamplerConfig& config = {});

/// True when the set {p : node.signed_distance(p) < 0} has a grid sample inside `region`.
bool has_interior(const CsgNode& node, const Sphere& region, int resolution = 20);

/// Text form of a scene. One node per line, metadata in a leading `# shad3s-scene` comment.
std::string serialize_scene(const CsgScene& scene);
/// Inverse of serialize_scene; throws ParseError or SemanticError.
CsgScene parse_scene(std::string_view text);

}  // namespace shad3s
