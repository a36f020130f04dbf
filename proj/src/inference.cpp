#include "shad3s/inference.hpp"

#include <chrono>
#include <cstdio>

#include "shad3s/error.hpp"
#include "shad3s/random.hpp"
#include "shad3s/render.hpp"
#include "shad3s/training.hpp"

namespace shad3s {

Image illumination_hint(double azimuth, double elevation, int size) {
  return render_gnomon_hint(LightSpec::from_angles(azimuth, elevation), size, size);
}

CompletionEngine::CompletionEngine(ModelBundle bundle, const TamCatalog& catalog)
    : bundle_(std::move(bundle)), catalog_(catalog) {
  bundle_.eval();
  bundle_.set_sampling(false);
}

std::uint64_t CompletionEngine::request_seed(const Image& binarised, const CompletionRequest& r) const {
  char params[128];
  std::snprintf(params, sizeof(params), "|%.17g|%.17g|", r.azimuth, r.elevation);
  const auto bytes = to_bytes(binarised);
  return hash64(sha256_hex(bytes) + params + r.tam_family_id + "|" + bundle_.spec().model_name());
}

CompletionResult CompletionEngine::complete(const CompletionRequest& request) {
  const auto start = std::chrono::steady_clock::now();
  if (request.contour.empty()) throw FormatError("contour image is empty");
  const TamFamily& family = catalog_.find(request.tam_family_id);
  const int res = resolution();

  // Letterbox to a square, shrink keeping ink, binarise at 0.5.
  const Letterbox lb = letterbox(request.contour);
  const Image sized = resize_keep_ink(lb.square, res, res);
  const Mask paper = binarize(sized, 0.5f);
  Image contour = mask_to_image(paper);

  CompletionResult result;
  if (count_set(paper) == paper.size()) {
    result.low_confidence = true;
    result.note = "contour empty";
  }
  result.seed = request.seed ? *request.seed : request_seed(contour, request);
  const Image hint = illumination_hint(request.azimuth, request.elevation, res);
  const ToneCrops crops = crop(family, result.seed, std::min(res, family.resolution()));
  std::vector<torch::Tensor> tones;
  for (const auto& t : crops.tones) tones.push_back(image_to_tensor(res == t.width() ? t : resize_nearest(t, res, res)));

  Image out;
  {
    std::lock_guard guard(mutex_);
    torch::NoGradGuard no_grad;
    out = tensor_to_image(bundle_.complete(image_to_tensor(contour), image_to_tensor(hint), torch::cat(tones, 1)));
  }

  // Undo the letterbox at the original scale.
  const int side = lb.square.width();
  const Image full = resize_nearest(out, side, side);
  result.sketch = Image(request.contour.width(), request.contour.height());
  for (int y = 0; y < result.sketch.height(); ++y)
    for (int x = 0; x < result.sketch.width(); ++x) result.sketch(x, y) = full(lb.offset_x + x, lb.offset_y + y);
  result.elapsed_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return result;
}

}  // namespace shad3s
