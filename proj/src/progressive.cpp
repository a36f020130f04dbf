#include "shad3s/progressive.hpp"

#include "shad3s/error.hpp"
#include "shad3s/random.hpp"
#include "shad3s/training.hpp"

namespace shad3s {

std::string to_string(ProgressiveMode mode) {
  switch (mode) {
    case ProgressiveMode::pose: return "pose";
    case ProgressiveMode::pose_lit: return "pose+lit";
    case ProgressiveMode::pose_lit_shape: return "pose+lit+shap";
    case ProgressiveMode::texture: return "txr";
    case ProgressiveMode::all: return "all";
  }
  return "?";
}

ProgressiveMode progressive_mode_from_string(const std::string& name) {
  for (auto m : {ProgressiveMode::pose, ProgressiveMode::pose_lit, ProgressiveMode::pose_lit_shape,
                 ProgressiveMode::texture, ProgressiveMode::all})
    if (to_string(m) == name) return m;
  throw FormatError("unknown progressive mode '" + name + "' (pose, pose+lit, pose+lit+shap, txr, all)");
}

std::vector<DataPoint> progressive_inputs(const TamCatalog& catalog, ProgressiveMode mode, int count,
                                          std::uint64_t seed, int resolution) {
  if (count < 1) throw RangeError("grid needs at least one cell");
  if (catalog.size() == 0) throw FormatError("empty TAM catalog");
  Transform lift;
  lift.translation = Vec3(0, 1, 0);
  const CsgScene cube{CsgNode::leaf(Primitive::box(1, 1, 1), lift)};
  const LightSpec fixed_light = LightSpec::from_angles(300, 45);
  const int level = static_cast<int>(mode);

  std::vector<DataPoint> points;
  for (int i = 0; i < count; ++i) {
    Rng rng = make_rng(derive_seed(seed, {0x9a0d, static_cast<std::uint64_t>(i)}));
    const double az = (i + uniform(rng, 0.0, 1.0)) * 360.0 / count;
    const double el = uniform(rng, 15.0, 60.0);
    const LightSpec light = level >= 1 ? LightSpec::from_angles(uniform(rng, 0.0, 360.0), uniform(rng, 20.0, 70.0))
                                       : fixed_light;
    CsgScene scene = cube;
    if (level == 2 || level == 3) scene = sample_scene(derive_seed(seed, {0x5ea, static_cast<std::uint64_t>(i)}), 1);
    if (level == 4) scene = sample_scene(derive_seed(seed, {0xa11, static_cast<std::uint64_t>(i)}), kMaxSolids);
    const std::size_t family = level >= 3 ? static_cast<std::size_t>(uniform_int(rng, 0, int(catalog.size()) - 1)) : 0;
    const std::uint64_t crop_seed = level >= 3 ? derive_seed(seed, {0xc0, static_cast<std::uint64_t>(i)}) : seed;
    auto p = render_point(scene, CameraPose::framing(scene, az, el), light, catalog.at(family), crop_seed, {}, resolution);
    p.meta.pose = i;
    points.push_back(std::move(p));
  }
  return points;
}

ProgressiveResult progressive_eval(ModelBundle& bundle, const TamCatalog& catalog, ProgressiveMode mode, int rows,
                                   int cols, std::uint64_t seed) {
  if (rows < 1 || cols < 1) throw RangeError("grid needs at least one row and column");
  ProgressiveResult r;
  r.rows = rows;
  r.cols = cols;
  const int res = bundle.spec().resolution;
  r.inputs = progressive_inputs(catalog, mode, rows * cols, seed, res);
  const auto data = TrainingSet::from_points(r.inputs);

  torch::NoGradGuard no_grad;
  bundle.eval();
  const auto pred = bundle.complete(data.contour, data.hint, data.tones);
  const int gap = 2;
  const int cell_w = 3 * res + 2 * gap;
  r.grid = Image(cols * cell_w + (cols - 1) * 2 * gap, rows * res + (rows - 1) * 2 * gap, 1.0f);
  for (int i = 0; i < rows * cols; ++i) {
    const Image out = tensor_to_image(pred[i]);
    const Image truth = tensor_to_image(data.sketch[i]);
    const Image contour = tensor_to_image(data.contour[i]);
    r.l1.push_back(l1_distance(data.sketch[i], pred[i]).item<double>());
    const int x0 = (i % cols) * (cell_w + 2 * gap);
    const int y0 = (i / cols) * (res + 2 * gap);
    const Image* panels[3] = {&contour, &truth, &out};
    for (int p = 0; p < 3; ++p)
      for (int y = 0; y < res; ++y)
        for (int x = 0; x < res; ++x) r.grid(x0 + p * (res + gap) + x, y0 + y) = (*panels[p])(x, y);
    r.outputs.push_back(out);
  }
  return r;
}

}  // namespace shad3s
