#include <algorithm>
#include <cmath>

#include "shad3s/render.hpp"

namespace shad3s {

int tone_bin(float dif, int bins) {
  return std::clamp(static_cast<int>(std::floor(dif * static_cast<float>(bins))), 0, bins - 1);
}

Image render_hatch(const Image& dif, const Mask& coverage, const Mask& shw, const Mask& cnt, const ToneCrops& crops,
                   const HatchOptions& options) {
  if (!dif.same_shape(coverage) || !dif.same_shape(shw) || !dif.same_shape(cnt))
    throw FormatError("hatch inputs differ in size");
  for (const auto& tone : crops.tones)
    if (tone.empty()) throw FormatError("hatch needs four non-empty tone crops");

  // Screen-space tiling of tone k (1 = darkest).
  auto texel = [&](int tone, int x, int y) {
    const Image& t = crops.tones[static_cast<std::size_t>(tone - 1)];
    return t(x % t.width(), y % t.height());
  };

  const int top = options.bins - 1;
  Image sk(dif.width(), dif.height(), 1.0f);
  for (int y = 0; y < dif.height(); ++y) {
    for (int x = 0; x < dif.width(); ++x) {
      float v = 1.0f;
      if (coverage(x, y)) {
        const int bin = tone_bin(dif(x, y), options.bins);
        if (bin == 0) v = 0.0f;
        else if (bin < top) v = texel(std::min(bin, 4), x, y);
      } else if (shw(x, y)) {
        v = texel(1, x, y);
      } else if (options.background_hatch) {
        v = texel(3, x, y);
      }
      if (cnt(x, y)) v = 0.0f;
      sk(x, y) = v;
    }
  }
  return sk;
}

}  // namespace shad3s
