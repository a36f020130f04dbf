#include <gtest/gtest.h>

#include <array>
#include <cmath>
#include <random>

#include "oracles.hpp"
#include "shad3s/csg.hpp"

using namespace shad3s;

namespace {

NodePtr unit_sphere() { return CsgNode::leaf(Primitive::sphere(1.0)); }

}  // namespace

TEST(SampleScene, SingleSolidBoundGivesALeaf) {
  const auto scene = sample_scene(7, 1);
  ASSERT_FALSE(scene.empty());
  EXPECT_TRUE(scene.root->is_leaf());
  EXPECT_EQ(scene.leaf_count(), 1);
}

TEST(SampleScene, DeterministicInSeed) {
  const auto a = sample_scene(7, 6);
  const auto b = sample_scene(7, 6);
  EXPECT_TRUE(a == b);
  EXPECT_EQ(serialize_scene(a), serialize_scene(b));
}

TEST(SampleScene, RejectsBadMaxSolids) {
  EXPECT_THROW(sample_scene(1, 0), RangeError);
  EXPECT_THROW(sample_scene(1, 7), RangeError);
}

TEST(SampleScene, InvariantsHoldOverManySeeds) {
  const SamplerConfig config;
  for (std::uint64_t seed = 0; seed < 300; ++seed) {
    const int k = 1 + static_cast<int>(seed % 6);
    const auto scene = sample_scene(seed, k);
    ASSERT_GE(scene.leaf_count(), 1);
    ASSERT_LE(scene.leaf_count(), k);
    const Sphere b = scene.bounding_sphere();
    EXPECT_LE(b.center.norm() + b.radius, config.scene_radius + 1e-9);
    // Every solid sits on or above the ground.
    std::vector<const CsgNode*> stack{scene.root.get()};
    while (!stack.empty()) {
      const CsgNode* n = stack.back();
      stack.pop_back();
      if (n->is_leaf()) {
        const auto& leaf = n->as_leaf();
        const double lowest = leaf.transform.translation.y() -
                              leaf.transform.scale * leaf.primitive.support(leaf.transform.rotation.conjugate() *
                                                                            Vec3(0, -1, 0));
        EXPECT_GE(lowest, -1e-9);
        EXPECT_LE(std::hypot(leaf.transform.translation.x(), leaf.transform.translation.z()), 2.0 + 1e-12);
      } else {
        stack.push_back(n->as_operation().left.get());
        stack.push_back(n->as_operation().right.get());
      }
    }
  }
}

TEST(SampleScene, LeafCountsUniformOverTenThousandSeeds) {
  std::array<int, 7> counts{};
  constexpr int kSeeds = 10000;
  for (int seed = 0; seed < kSeeds; ++seed) ++counts[static_cast<std::size_t>(sample_scene(seed, 6).leaf_count())];
  double chi2 = 0.0;
  const double expected = kSeeds / 6.0;
  for (int k = 1; k <= 6; ++k) {
    const double freq = counts[static_cast<std::size_t>(k)] / static_cast<double>(kSeeds);
    EXPECT_NEAR(freq, 1.0 / 6.0, 0.02) << "leaf count " << k;
    chi2 += std::pow(counts[static_cast<std::size_t>(k)] - expected, 2) / expected;
  }
  // 5 degrees of freedom, 99.9th percentile.
  EXPECT_LT(chi2, 20.515);
}

TEST(ParseScene, TwoLeafUnion) {
  const auto scene = parse_scene("union(sphere(r=1), box(hx=1,hy=1,hz=1))");
  ASSERT_FALSE(scene.empty());
  ASSERT_FALSE(scene.root->is_leaf());
  const auto& op = scene.root->as_operation();
  EXPECT_EQ(op.op, BoolOp::union_);
  EXPECT_EQ(op.left->as_leaf().primitive, Primitive::sphere(1));
  EXPECT_EQ(op.right->as_leaf().primitive, Primitive::box(1, 1, 1));
  EXPECT_EQ(scene.leaf_count(), 2);
}

TEST(ParseScene, TransformSyntax) {
  const auto scene = parse_scene("cone(r=0.5, h=0.7) @t(1, 2, -3) r(1, 0, 0, 0) s(1.5)");
  const auto& leaf = scene.root->as_leaf();
  EXPECT_EQ(leaf.transform.translation, Vec3(1, 2, -3));
  EXPECT_EQ(leaf.transform.scale, 1.5);
}

TEST(ParseScene, NegativeRadiusIsSemanticError) {
  EXPECT_THROW(parse_scene("sphere(r=-1)"), SemanticError);
  EXPECT_THROW(parse_scene("torus(major=0.5, minor=0.6)"), SemanticError);
  EXPECT_THROW(parse_scene("box(hx=1, hy=1)"), SemanticError);
  EXPECT_THROW(parse_scene("sphere(radius=1)"), SemanticError);
  EXPECT_THROW(parse_scene("sphere(r=1) @s(0)"), SemanticError);
  EXPECT_THROW(parse_scene("sphere(r=1) @r(2, 0, 0, 0)"), SemanticError);
}

TEST(ParseScene, TooManySolidsIsSemanticError) {
  std::string text = "sphere(r=1)";
  for (int i = 0; i < 6; ++i) text = "union(" + text + ", sphere(r=1))";
  EXPECT_THROW(parse_scene(text), SemanticError);
}

TEST(ParseScene, SyntaxErrorReportsPosition) {
  try {
    parse_scene("union(sphere(r=1),\n  box(hx=1 hy=1, hz=1))");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2);
    EXPECT_EQ(e.column(), 12);
  }
  EXPECT_THROW(parse_scene("blob(r=1)"), ParseError);
  EXPECT_THROW(parse_scene("sphere(r=1) sphere(r=1)"), ParseError);
}

TEST(ParseScene, RoundTripsSampledScenes) {
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    const auto scene = sample_scene(seed, 1 + static_cast<int>(seed % 6));
    const auto text = serialize_scene(scene);
    const auto back = parse_scene(text);
    ASSERT_TRUE(back == scene) << text;
  }
  EXPECT_TRUE(parse_scene(serialize_scene(sample_scene(7, 3))) == sample_scene(7, 3));
}

TEST(SignedDistance, UnitSphere) {
  const CsgScene scene{unit_sphere()};
  EXPECT_DOUBLE_EQ(scene.signed_distance(Vec3(0, 0, 0)), -1.0);
  EXPECT_DOUBLE_EQ(scene.signed_distance(Vec3(2, 0, 0)), 1.0);
}

TEST(SignedDistance, EmptySceneIsFarAway) {
  EXPECT_TRUE(std::isinf(CsgScene{}.signed_distance(Vec3::Zero())));
}

TEST(SignedDistance, PrimitiveClosedForms) {
  EXPECT_NEAR(Primitive::box(1, 2, 3).signed_distance(Vec3(2, 0, 0)), 1.0, 1e-12);
  EXPECT_NEAR(Primitive::box(1, 1, 1).signed_distance(Vec3(2, 2, 1)), std::sqrt(2.0), 1e-12);
  EXPECT_NEAR(Primitive::cylinder(1, 1).signed_distance(Vec3(0, 3, 0)), 2.0, 1e-12);
  EXPECT_NEAR(Primitive::torus(1, 0.25).signed_distance(Vec3(1, 0, 0)), -0.25, 1e-12);
  EXPECT_NEAR(Primitive::cone(1, 1).signed_distance(Vec3(0, 2, 0)), 1.0, 1e-12);
  EXPECT_NEAR(Primitive::cone(1, 1).signed_distance(Vec3(0, -2, 0)), 1.0, 1e-12);
}

TEST(SignedDistance, BoxMinusSphereAgreesWithVoxelMembership) {
  const auto node = CsgNode::operation(BoolOp::difference, CsgNode::leaf(Primitive::box(1, 1, 1)), unit_sphere());
  const CsgScene scene{node};
  // The probe corner lies in the box and outside the sphere.
  EXPECT_LT(scene.signed_distance(Vec3(0.99, 0.99, 0.99)), 0.0);
  EXPECT_TRUE(oracle::inside(scene, Vec3(0.99, 0.99, 0.99)));

  constexpr int n = 64;
  constexpr double lo = -1.5, hi = 1.5;
  int checked = 0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        const Vec3 p(lo + (i + 0.5) * (hi - lo) / n, lo + (j + 0.5) * (hi - lo) / n, lo + (k + 0.5) * (hi - lo) / n);
        const double d = scene.signed_distance(p);
        if (std::abs(d) <= 1e-6) continue;
        ASSERT_EQ(d < 0.0, oracle::inside(scene, p)) << p.transpose();
        ++checked;
      }
  EXPECT_GT(checked, n * n * n - 100);
}

TEST(SignedDistance, SignMatchesMembershipOnRandomScenes) {
  std::mt19937_64 rng(99);
  for (std::uint64_t seed = 100; seed < 130; ++seed) {
    const auto scene = sample_scene(seed, 6);
    const Sphere b = scene.bounding_sphere();
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    int mismatches = 0;
    for (int i = 0; i < 10000; ++i) {
      const Vec3 p = b.center + 1.1 * b.radius * Vec3(u(rng), u(rng), u(rng));
      const double d = scene.signed_distance(p);
      if (std::abs(d) <= 1e-6) continue;
      if ((d < 0.0) != oracle::inside(scene, p)) ++mismatches;
    }
    EXPECT_EQ(mismatches, 0) << "seed " << seed;
  }
}

TEST(SignedDistance, IsALowerBoundOnDistance) {
  // Lipschitz-1: moving by |d| never crosses the surface.
  const auto scene = sample_scene(5, 6);
  const Sphere b = scene.bounding_sphere();
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < 2000; ++i) {
    const Vec3 p = b.center + b.radius * Vec3(u(rng), u(rng), u(rng));
    const Vec3 q = b.center + b.radius * Vec3(u(rng), u(rng), u(rng));
    EXPECT_LE(std::abs(scene.signed_distance(p) - scene.signed_distance(q)), (p - q).norm() + 1e-9);
  }
}

TEST(HasInterior, DetectsEmptyIntersection) {
  Transform far;
  far.translation = Vec3(5, 0, 0);
  const auto apart = CsgNode::operation(BoolOp::intersection, unit_sphere(), CsgNode::leaf(Primitive::sphere(1), far));
  EXPECT_FALSE(has_interior(*apart, Sphere{Vec3(2.5, 0, 0), 4.0}));
  EXPECT_TRUE(has_interior(*unit_sphere(), Sphere{Vec3::Zero(), 1.0}));
}
