#pragma once

#include <torch/torch.h>

#include <filesystem>

#include "shad3s/metrics.hpp"

namespace shad3s {

/// Small CNN over 64 x 64 sketches; the default classifier behind the inception score.
class SketchClassifierImpl : public torch::nn::Module {
 public:
  explicit SketchClassifierImpl(int classes = 6, int width = 32);
  /// N1HW sketches in [0,1], any side that is a multiple of 8; returns logits.
  torch::Tensor forward(const torch::Tensor& x);
  int classes() const { return classes_; }
  int width() const { return width_; }

 private:
  int classes_;
  int width_;
  torch::nn::Sequential features_;
  torch::nn::Linear head_{nullptr};
};
TORCH_MODULE(SketchClassifier);

struct ClassifierConfig {
  int classes = 6;
  int width = 32;
  int resolution = 64;
  int epochs = 30;
  int batch_size = 32;
  double lr = 1e-3;
  std::uint64_t seed = 0;
};

/// Fits the classifier on sketches with 0-based labels. The default labels are the number of
/// primitives in the scene minus one; subset k overlaps too much between subsets to separate them.
SketchClassifier train_classifier(const torch::Tensor& sketches, const torch::Tensor& labels,
                                  const ClassifierConfig& config = {});

/// Softmax probabilities per sketch, eval mode.
torch::Tensor classify(SketchClassifier& model, const torch::Tensor& sketches);

/// Wraps the network as a metrics classifier; images are resized to `resolution` first.
Classifier as_classifier(SketchClassifier model, int resolution = 64);

void save_classifier(SketchClassifier& model, const std::filesystem::path& path);
SketchClassifier load_classifier(const std::filesystem::path& path);

}  // namespace shad3s
