#pragma once

#include <string>
#include <vector>

#include "shad3s/dataset.hpp"
#include "shad3s/models.hpp"

namespace shad3s {

/// Which factors vary across the cells; each mode adds one factor to the previous.
enum class ProgressiveMode { pose, pose_lit, pose_lit_shape, texture, all };

std::string to_string(ProgressiveMode mode);
ProgressiveMode progressive_mode_from_string(const std::string& name);

/// Ground-truth points for a grid of `count` cells. pose: a cube under one light and texture;
/// pose+lit: the light varies too; pose+lit+shap: single random solids; txr: the texture
/// family varies; all: random scenes of up to six solids.
std::vector<DataPoint> progressive_inputs(const TamCatalog& catalog, ProgressiveMode mode, int count,
                                          std::uint64_t seed, int resolution);

struct ProgressiveResult {
  int rows = 0;
  int cols = 0;
  std::vector<DataPoint> inputs;
  std::vector<Image> outputs;
  std::vector<double> l1;  // per cell, prediction vs ground-truth sketch
  Image grid;              // each cell: contour | ground truth | prediction
};

ProgressiveResult progressive_eval(ModelBundle& bundle, const TamCatalog& catalog, ProgressiveMode mode, int rows,
                                   int cols, std::uint64_t seed = 0);

}  // namespace shad3s
