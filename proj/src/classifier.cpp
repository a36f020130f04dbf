#include "shad3s/classifier.hpp"

#include <algorithm>
#include <mutex>
#include <numeric>

#include "shad3s/error.hpp"
#include "shad3s/random.hpp"
#include "shad3s/training.hpp"

namespace shad3s {

namespace nn = torch::nn;

SketchClassifierImpl::SketchClassifierImpl(int classes, int width) : classes_(classes), width_(width) {
  features_ = register_module(
      "features",
      nn::Sequential(nn::Conv2d(nn::Conv2dOptions(1, width, 3).padding(1)), nn::ReLU(), nn::MaxPool2d(2),
                     nn::Conv2d(nn::Conv2dOptions(width, 2 * width, 3).padding(1)), nn::ReLU(), nn::MaxPool2d(2),
                     nn::Conv2d(nn::Conv2dOptions(2 * width, 4 * width, 3).padding(1)), nn::ReLU(),
                     nn::MaxPool2d(2), nn::AdaptiveAvgPool2d(4)));
  head_ = register_module("head", nn::Linear(4 * width * 16, classes));
}

torch::Tensor SketchClassifierImpl::forward(const torch::Tensor& x) {
  // Ink as signal: 1 where drawn.
  return head_(features_->forward(1.0 - x).flatten(1));
}

SketchClassifier train_classifier(const torch::Tensor& sketches, const torch::Tensor& labels,
                                  const ClassifierConfig& config) {
  if (sketches.size(0) != labels.size(0) || sketches.size(0) == 0)
    throw FormatError("classifier needs one label per sketch");
  torch::manual_seed(config.seed);
  SketchClassifier model(config.classes, config.width);
  torch::optim::Adam opt(model->parameters(), torch::optim::AdamOptions(config.lr));
  const auto n = sketches.size(0);
  std::vector<std::int64_t> order(static_cast<std::size_t>(n));
  model->train();
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    Rng rng = make_rng(derive_seed(config.seed, {0xc1a5, static_cast<std::uint64_t>(epoch)}));
    std::shuffle(order.begin(), order.end(), rng);
    for (std::int64_t b = 0; b < n; b += config.batch_size) {
      const auto e = std::min(n, b + config.batch_size);
      const auto idx = torch::tensor(std::vector<std::int64_t>(order.begin() + b, order.begin() + e), torch::kLong);
      opt.zero_grad();
      const auto loss =
          torch::nn::functional::cross_entropy(model(sketches.index_select(0, idx)), labels.index_select(0, idx));
      loss.backward();
      opt.step();
    }
  }
  model->eval();
  return model;
}

torch::Tensor classify(SketchClassifier& model, const torch::Tensor& sketches) {
  torch::NoGradGuard no_grad;
  model->eval();
  return torch::softmax(model(sketches), 1);
}

Classifier as_classifier(SketchClassifier model, int resolution) {
  auto lock = std::make_shared<std::mutex>();
  return [model, resolution, lock](const Image& image) mutable {
    const Image sized = (image.width() == resolution && image.height() == resolution)
                            ? image
                            : resize_nearest(image, resolution, resolution);
    std::lock_guard guard(*lock);
    const auto p = classify(model, image_to_tensor(sized)).to(torch::kFloat64).contiguous();
    return std::vector<double>(p.data_ptr<double>(), p.data_ptr<double>() + p.numel());
  };
}

void save_classifier(SketchClassifier& model, const std::filesystem::path& path) {
  torch::serialize::OutputArchive archive;
  archive.write("classes", c10::IValue(static_cast<std::int64_t>(model->classes())));
  archive.write("width", c10::IValue(static_cast<std::int64_t>(model->width())));
  model->save(archive);
  archive.save_to(path.string());
}

SketchClassifier load_classifier(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw NotFoundError("classifier not found: " + path.string());
  torch::serialize::InputArchive archive;
  archive.load_from(path.string());
  c10::IValue classes;
  if (!archive.try_read("classes", classes)) throw FormatError(path.string() + " is not a classifier archive");
  c10::IValue width;
  if (!archive.try_read("width", width)) throw FormatError(path.string() + " is not a classifier archive");
  SketchClassifier model(static_cast<int>(classes.toInt()), static_cast<int>(width.toInt()));
  model->load(archive);
  model->eval();
  return model;
}

}  // namespace shad3s
