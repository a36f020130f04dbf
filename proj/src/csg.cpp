#include "shad3s/csg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "shad3s/random.hpp"

namespace shad3s {

std::string_view to_string(PrimitiveKind kind) {
  switch (kind) {
    case PrimitiveKind::sphere: return "sphere";
    case PrimitiveKind::box: return "box";
    case PrimitiveKind::cylinder: return "cylinder";
    case PrimitiveKind::cone: return "cone";
    case PrimitiveKind::torus: return "torus";
  }
  return "?";
}

std::string_view to_string(BoolOp op) {
  switch (op) {
    case BoolOp::union_: return "union";
    case BoolOp::difference: return "difference";
    case BoolOp::intersection: return "intersection";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Primitive

namespace {

int param_count(PrimitiveKind kind) {
  switch (kind) {
    case PrimitiveKind::sphere: return 1;
    case PrimitiveKind::box: return 3;
    default: return 2;
  }
}

double length_xz(const Vec3& p) { return std::hypot(p.x(), p.z()); }

double dot2(double x, double y) { return x * x + y * y; }

}  // namespace

void Primitive::validate() const {
  for (int i = 0; i < param_count(kind); ++i) {
    if (!(params[i] > 0.0) || !std::isfinite(params[i]))
      throw SemanticError(std::string(to_string(kind)) + " size parameters must be positive and finite");
  }
  if (kind == PrimitiveKind::torus && !(params[1] < params[0]))
    throw SemanticError("torus minor radius must be smaller than its major radius");
}

double Primitive::signed_distance(const Vec3& p) const {
  switch (kind) {
    case PrimitiveKind::sphere:
      return p.norm() - params[0];
    case PrimitiveKind::box: {
      const Vec3 q = p.cwiseAbs() - Vec3(params[0], params[1], params[2]);
      return q.cwiseMax(0.0).norm() + std::min(q.maxCoeff(), 0.0);
    }
    case PrimitiveKind::cylinder: {
      const double dx = length_xz(p) - params[0];
      const double dy = std::abs(p.y()) - params[1];
      return std::min(std::max(dx, dy), 0.0) + std::hypot(std::max(dx, 0.0), std::max(dy, 0.0));
    }
    case PrimitiveKind::cone: {
      // Exact capped cone with top radius 0.
      const double r1 = params[0];
      const double h = params[1];
      const double qx = length_xz(p);
      const double qy = p.y();
      const double k2x = -r1;
      const double k2y = 2.0 * h;
      const double cax = qx - std::min(qx, qy < 0.0 ? r1 : 0.0);
      const double cay = std::abs(qy) - h;
      const double t = std::clamp(((0.0 - qx) * k2x + (h - qy) * k2y) / dot2(k2x, k2y), 0.0, 1.0);
      const double cbx = qx + k2x * t;
      const double cby = qy - h + k2y * t;
      const double s = (cbx < 0.0 && cay < 0.0) ? -1.0 : 1.0;
      return s * std::sqrt(std::min(dot2(cax, cay), dot2(cbx, cby)));
    }
    case PrimitiveKind::torus:
      return std::hypot(length_xz(p) - params[0], p.y()) - params[1];
  }
  return std::numeric_limits<double>::infinity();
}

double Primitive::bounding_radius() const {
  switch (kind) {
    case PrimitiveKind::sphere: return params[0];
    case PrimitiveKind::box: return Vec3(params[0], params[1], params[2]).norm();
    case PrimitiveKind::cylinder:
    case PrimitiveKind::cone: return std::hypot(params[0], params[1]);
    case PrimitiveKind::torus: return params[0] + params[1];
  }
  return 0.0;
}

double Primitive::support(const Vec3& d) const {
  const double dxz = std::hypot(d.x(), d.z());
  switch (kind) {
    case PrimitiveKind::sphere: return params[0] * d.norm();
    case PrimitiveKind::box: return params[0] * std::abs(d.x()) + params[1] * std::abs(d.y()) + params[2] * std::abs(d.z());
    case PrimitiveKind::cylinder: return params[1] * std::abs(d.y()) + params[0] * dxz;
    case PrimitiveKind::cone: return std::max(params[1] * d.y(), -params[1] * d.y() + params[0] * dxz);
    case PrimitiveKind::torus: return params[0] * dxz + params[1] * d.norm();
  }
  return 0.0;
}

// ---------------------------------------------------------------------------
// Transform

Vec3 Transform::to_local(const Vec3& world) const {
  return rotation.conjugate() * ((world - translation) / scale);
}

Vec3 Transform::to_world(const Vec3& local) const { return translation + scale * (rotation * local); }

// ---------------------------------------------------------------------------
// CsgNode

NodePtr CsgNode::leaf(Primitive primitive, Transform transform) {
  primitive.validate();
  if (!(transform.scale > 0.0)) throw SemanticError("uniform scale must be positive");
  return NodePtr(new CsgNode(Leaf{primitive, transform}));
}

NodePtr CsgNode::operation(BoolOp op, NodePtr left, NodePtr right) {
  if (!left || !right) throw SemanticError("boolean operation needs two operands");
  return NodePtr(new CsgNode(Operation{op, std::move(left), std::move(right)}));
}

int CsgNode::leaf_count() const {
  if (is_leaf()) return 1;
  const auto& o = as_operation();
  return o.left->leaf_count() + o.right->leaf_count();
}

double CsgNode::signed_distance(const Vec3& p) const {
  if (const auto* l = std::get_if<Leaf>(&node_))
    return l->transform.scale * l->primitive.signed_distance(l->transform.to_local(p));
  const auto& o = std::get<Operation>(node_);
  const double a = o.left->signed_distance(p);
  const double b = o.right->signed_distance(p);
  switch (o.op) {
    case BoolOp::union_: return std::min(a, b);
    case BoolOp::intersection: return std::max(a, b);
    case BoolOp::difference: return std::max(a, -b);
  }
  return a;
}

namespace {

Sphere enclose(const Sphere& a, const Sphere& b) {
  const Vec3 d = b.center - a.center;
  const double dist = d.norm();
  if (dist + b.radius <= a.radius) return a;
  if (dist + a.radius <= b.radius) return b;
  const double radius = 0.5 * (dist + a.radius + b.radius);
  return {a.center + d * ((radius - a.radius) / dist), radius};
}

}  // namespace

Sphere CsgNode::bounding_sphere() const {
  if (const auto* l = std::get_if<Leaf>(&node_))
    return {l->transform.translation, l->transform.scale * l->primitive.bounding_radius()};
  const auto& o = std::get<Operation>(node_);
  const Sphere a = o.left->bounding_sphere();
  switch (o.op) {
    case BoolOp::union_: return enclose(a, o.right->bounding_sphere());
    case BoolOp::intersection: {
      const Sphere b = o.right->bounding_sphere();
      return b.radius < a.radius ? b : a;
    }
    case BoolOp::difference: return a;
  }
  return a;
}

bool operator==(const CsgNode& a, const CsgNode& b) {
  if (a.is_leaf() != b.is_leaf()) return false;
  if (a.is_leaf()) {
    const auto& la = a.as_leaf();
    const auto& lb = b.as_leaf();
    return la.primitive == lb.primitive && la.transform == lb.transform;
  }
  const auto& oa = a.as_operation();
  const auto& ob = b.as_operation();
  return oa.op == ob.op && *oa.left == *ob.left && *oa.right == *ob.right;
}

// ---------------------------------------------------------------------------
// CsgScene

double CsgScene::signed_distance(const Vec3& p) const {
  return root ? root->signed_distance(p) : std::numeric_limits<double>::infinity();
}

Sphere CsgScene::bounding_sphere() const { return root ? root->bounding_sphere() : Sphere{}; }

bool operator==(const CsgScene& a, const CsgScene& b) {
  if (a.ground_height != b.ground_height || a.seed != b.seed || a.max_solids != b.max_solids) return false;
  if (!a.root || !b.root) return a.root == b.root;
  return *a.root == *b.root;
}

// ---------------------------------------------------------------------------
// Sampling

bool has_interior(const CsgNode& node, const Sphere& region, int resolution) {
  const double step = 2.0 * region.radius / resolution;
  for (int i = 0; i < resolution; ++i)
    for (int j = 0; j < resolution; ++j)
      for (int k = 0; k < resolution; ++k) {
        const Vec3 offset((i + 0.5) * step - region.radius, (j + 0.5) * step - region.radius,
                          (k + 0.5) * step - region.radius);
        if (offset.squaredNorm() > region.radius * region.radius) continue;
        if (node.signed_distance(region.center + offset) < 0.0) return true;
      }
  return false;
}

namespace {

Quat random_rotation(Rng& rng) {
  const double u1 = uniform(rng, 0.0, 1.0);
  const double u2 = uniform(rng, 0.0, 2.0 * std::numbers::pi);
  const double u3 = uniform(rng, 0.0, 2.0 * std::numbers::pi);
  const double a = std::sqrt(1.0 - u1);
  const double b = std::sqrt(u1);
  return Quat(a * std::sin(u2), a * std::cos(u2), b * std::sin(u3), b * std::cos(u3));
}

Primitive random_primitive(Rng& rng, const SamplerConfig& config) {
  std::discrete_distribution<int> kinds(config.kind_weights.begin(), config.kind_weights.end());
  switch (static_cast<PrimitiveKind>(kinds(rng))) {
    case PrimitiveKind::sphere: return Primitive::sphere(uniform(rng, 0.5, 1.0));
    case PrimitiveKind::box:
      return Primitive::box(uniform(rng, 0.3, 0.57), uniform(rng, 0.3, 0.57), uniform(rng, 0.3, 0.57));
    case PrimitiveKind::cylinder: return Primitive::cylinder(uniform(rng, 0.3, 0.7), uniform(rng, 0.3, 0.7));
    case PrimitiveKind::cone: return Primitive::cone(uniform(rng, 0.3, 0.7), uniform(rng, 0.3, 0.7));
    case PrimitiveKind::torus: {
      const double major = uniform(rng, 0.45, 0.75);
      return Primitive::torus(major, uniform(rng, 0.1, std::min(0.25, 0.5 * major)));
    }
  }
  return Primitive::sphere(1.0);
}

// `near`, when given, focuses the centroid on the horizontal footprint of existing geometry so
// that intersections and differences bite; the centroid still stays inside the placement disc.
NodePtr random_leaf(Rng& rng, const SamplerConfig& config, const Sphere* near = nullptr) {
  const Primitive primitive = random_primitive(rng, config);
  Transform t;
  t.rotation = random_rotation(rng);
  t.scale = uniform(rng, config.min_scale, config.max_scale);
  // Uniform point in the placement disc.
  double rho = config.placement_radius * std::sqrt(uniform(rng, 0.0, 1.0));
  double phi = uniform(rng, 0.0, 2.0 * std::numbers::pi);
  if (near) {
    for (int tries = 0; tries < 64; ++tries) {
      const double r = near->radius * std::sqrt(uniform(rng, 0.0, 1.0));
      const double a = uniform(rng, 0.0, 2.0 * std::numbers::pi);
      const double x = near->center.x() + r * std::cos(a);
      const double z = near->center.z() + r * std::sin(a);
      if (std::hypot(x, z) <= config.placement_radius) {
        rho = std::hypot(x, z);
        phi = std::atan2(z, x);
        break;
      }
    }
  }
  const bool resting = uniform(rng, 0.0, 1.0) < 0.5;
  const double clearance = resting ? 0.0 : uniform(rng, 0.0, config.max_clearance);
  // Lowest point of the rotated solid sits `clearance` above the ground.
  const double drop = t.scale * primitive.support(t.rotation.conjugate() * Vec3(0, -1, 0));
  t.translation = Vec3(rho * std::cos(phi), drop + clearance, rho * std::sin(phi));
  return CsgNode::leaf(primitive, t);
}

BoolOp random_op(Rng& rng, const SamplerConfig& config) {
  std::discrete_distribution<int> ops(config.op_weights.begin(), config.op_weights.end());
  return static_cast<BoolOp>(ops(rng));
}

bool acceptable(const NodePtr& candidate, const SamplerConfig& config) {
  const Sphere bound = candidate->bounding_sphere();
  if (bound.radius > config.scene_radius) return false;
  const auto& o = candidate->as_operation();
  switch (o.op) {
    case BoolOp::union_: return true;
    case BoolOp::intersection: {
      const Sphere a = o.left->bounding_sphere();
      const Sphere b = o.right->bounding_sphere();
      if ((a.center - b.center).norm() >= a.radius + b.radius) return false;
      return has_interior(*candidate, bound);
    }
    case BoolOp::difference: {
      // Non-empty remainder, and the cut must actually touch the left operand.
      const Sphere a = o.left->bounding_sphere();
      const Sphere b = o.right->bounding_sphere();
      if ((a.center - b.center).norm() >= a.radius + b.radius) return false;
      const auto overlap = CsgNode::operation(BoolOp::intersection, o.left, o.right);
      return has_interior(*candidate, bound) && has_interior(*overlap, overlap->bounding_sphere());
    }
  }
  return false;
}

}  // namespace

CsgScene sample_scene(std::uint64_t seed, int max_solids, const SamplerConfig& config) {
  if (max_solids < 1 || max_solids > kMaxSolids)
    throw RangeError("max_solids must lie in [1, " + std::to_string(kMaxSolids) + "]");
  const auto k = static_cast<std::uint64_t>(max_solids);
  Rng rng = make_rng(derive_seed(seed, {k, 0}));
  const int leaves = uniform_int(rng, 1, max_solids);

  NodePtr root;
  for (int attempt = 0; !root; ++attempt) {
    Rng sub = make_rng(derive_seed(seed, {k, 1, static_cast<std::uint64_t>(attempt)}));
    NodePtr leaf = random_leaf(sub, config);
    const Sphere b = leaf->bounding_sphere();
    if (b.radius <= config.scene_radius) root = std::move(leaf);
  }
  for (int i = 1; i < leaves; ++i) {
    const BoolOp op = random_op(rng, config);
    for (int attempt = 0; attempt < config.max_retries; ++attempt) {
      Rng sub = make_rng(derive_seed(seed, {k, 2, static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(attempt)}));
      const Sphere focus = root->bounding_sphere();
      auto candidate = CsgNode::operation(op, root, random_leaf(sub, config, op == BoolOp::union_ ? nullptr : &focus));
      if (acceptable(candidate, config)) {
        root = std::move(candidate);
        break;
      }
    }
  }
  return CsgScene{root, 0.0, seed, max_solids};
}

}  // namespace shad3s
