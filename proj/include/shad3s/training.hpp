#pragma once

#include <torch/torch.h>

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "shad3s/dataset.hpp"
#include "shad3s/models.hpp"

namespace shad3s {

/// Data points as N x C x H x W float tensors in [0,1], in storage conventions: contour and
/// sketch are ink (0) on paper (1); masks are 1 where set.
struct TrainingSet {
  torch::Tensor contour;  // N1HW
  torch::Tensor hint;     // N1HW
  torch::Tensor tones;    // N4HW, darkest first
  torch::Tensor masks;    // N4HW: hi, mid, sha, shw
  torch::Tensor sketch;   // N1HW
  std::vector<int> subset_k;

  std::int64_t size() const { return contour.defined() ? contour.size(0) : 0; }
  TrainingSet select(const torch::Tensor& indices) const;
  TrainingSet slice(std::int64_t begin, std::int64_t end) const;
  TrainingSet to(torch::Dtype dtype) const;

  /// Quantises to 8 bits on the way, so in-memory points match what a dataset on disk holds.
  static TrainingSet from_points(const std::vector<DataPoint>& points);
  static TrainingSet load(const std::filesystem::path& root, const std::vector<DataPointMeta>& rows);
};

/// Mean absolute difference per pixel.
torch::Tensor l1_distance(const torch::Tensor& target, const torch::Tensor& prediction);

inline constexpr double kScoreEps = 1e-7;

/// mean log D(real) + mean log(1 - D(fake)): the quantity the discriminator maximises.
torch::Tensor discriminator_objective(const torch::Tensor& real_scores, const torch::Tensor& fake_scores);
/// Non-saturating generator term, -mean log D(fake).
torch::Tensor generator_adversarial(const torch::Tensor& fake_scores);
/// Mean of "real scored above 0.5" and "fake scored below 0.5".
double discriminator_accuracy(const torch::Tensor& real_scores, const torch::Tensor& fake_scores);

struct SplitLossTerms {
  torch::Tensor l1_masks, l1_sketch, l1;
  torch::Tensor objective_masks, objective_sketch, objective;
  torch::Tensor g_adv_masks, g_adv_sketch, g_adv;
};

SplitLossTerms split_losses(const torch::Tensor& masks, const torch::Tensor& masks_hat, const torch::Tensor& sketch,
                            const torch::Tensor& sketch_hat, const torch::Tensor& real_scores_masks,
                            const torch::Tensor& fake_scores_masks, const torch::Tensor& real_scores_sketch,
                            const torch::Tensor& fake_scores_sketch);

/// Generator outputs for a batch; `masks` stays undefined for direct models.
SplitOutput generate(ModelBundle& bundle, const TrainingSet& batch, bool teacher_forcing = false);

struct DiscriminatorLoss {
  torch::Tensor loss;  // negated objective, summed over both discriminators of a split model
  double accuracy = 0;
};

/// Fakes are detached, so only the discriminators receive gradients.
DiscriminatorLoss discriminator_loss(ModelBundle& bundle, const TrainingSet& batch, const SplitOutput& out);

struct GeneratorLoss {
  torch::Tensor total, l1, adv;
};

/// L1 + adv_weight * adversarial term, with the discriminators frozen while scoring.
GeneratorLoss generator_loss(ModelBundle& bundle, const TrainingSet& batch, const SplitOutput& out, double adv_weight);

struct TrainConfig {
  double adv_weight = 0.01;
  double lr = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  int batch_size = 4;
  int epochs = 1;
  bool teacher_forcing = false;  // split models: feed F2 the true masks
  std::uint64_t seed = 0;

  void validate() const;
  std::string to_json() const;
};

struct StepStats {
  double d_loss = 0;
  double g_adv = 0;
  double g_l1 = 0;
  double d_accuracy = 0;
};

struct EpochStats {
  int epoch = 0;
  double d_loss = 0;
  double g_adv = 0;
  double g_l1 = 0;
  double d_accuracy = 0;
  double val_l1 = 0;
};

struct FitResult {
  double initial_val_l1 = 0;
  std::vector<EpochStats> epochs;
};

/// Alternating optimisation: each step updates the discriminator(s) once, then the generator(s)
/// once on L1 + adv_weight * generator adversarial term.
class Trainer {
 public:
  Trainer(ModelBundle& bundle, const TrainConfig& config);

  StepStats step(const TrainingSet& batch);
  /// Held-out reconstruction L1 of the final sketch, eval mode.
  double validation_l1(const TrainingSet& data, int batch_size = 16);

  /// Runs config.epochs epochs. With `out_dir`, writes metrics.jsonl and ckpt_e<epoch>.bin.
  FitResult fit(const TrainingSet& train, const TrainingSet& val, const std::optional<std::filesystem::path>& out_dir = {},
                const std::function<void(const EpochStats&)>& on_epoch = {});

  std::int64_t steps_taken() const { return steps_; }

 private:
  ModelBundle& bundle_;
  TrainConfig config_;
  torch::optim::Adam gen_opt_;
  torch::optim::Adam disc_opt_;
  std::int64_t steps_ = 0;
};

/// Stable digest of a parameter list, for checking which side of the game moved.
std::string parameter_digest(const std::vector<torch::Tensor>& params);

/// Converts between the 2-D image type and 1 x 1 x H x W tensors.
torch::Tensor image_to_tensor(const Image& image);
Image tensor_to_image(const torch::Tensor& t);

}  // namespace shad3s
