#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <string>

namespace shad3s {

enum class GeneratorVariant { unet, unet_se };

std::string to_string(GeneratorVariant v);
GeneratorVariant generator_variant_from_string(const std::string& name);

struct GeneratorSpec {
  GeneratorVariant variant = GeneratorVariant::unet;
  int in_channels = 6;
  int out_channels = 1;
  int base_width = 64;
  // Channel ceiling of the deeper stages. 512 gives the classic 54M-parameter U-Net; 208
  // lands the default 256^2 network at about 11.4M.
  int max_width = 208;
  int depth = 8;  // down-sampling stages; input side must be divisible by 2^depth
  double dropout_p = 0.5;
  int dropout_stages = 3;  // innermost decoder stages with dropout
  int se_reduction = 16;

  int width(int stage) const;
  bool operator==(const GeneratorSpec&) const = default;
};

struct DiscriminatorSpec {
  int in_channels = 7;  // condition planes + candidate
  int base_width = 64;
  int max_width = 512;
  int n_strided = 3;  // stride-2 stages before the two stride-1 layers

  /// Receptive field in input pixels of one score-map cell.
  int receptive_field() const;
  /// Score-map side for a square input of the given side.
  int output_size(int input) const;
  bool operator==(const DiscriminatorSpec&) const = default;
};

/// Channel-wise squeeze-and-excitation gate.
class SqueezeExciteImpl : public torch::nn::Module {
 public:
  SqueezeExciteImpl(int channels, int reduction);
  torch::Tensor forward(const torch::Tensor& x);

 private:
  torch::nn::Linear squeeze_{nullptr}, excite_{nullptr};
};
TORCH_MODULE(SqueezeExcite);

/// U-Net generator. Inputs and outputs live in [0,1]; the network works in [-1,1] internally.
class GeneratorImpl : public torch::nn::Module {
 public:
  explicit GeneratorImpl(const GeneratorSpec& spec);

  torch::Tensor forward(const torch::Tensor& x);

  /// Keeps dropout active in eval mode, so repeated calls draw different samples.
  void set_sampling(bool on) { sampling_ = on; }
  bool sampling() const { return sampling_; }
  const GeneratorSpec& spec() const { return spec_; }

 private:
  GeneratorSpec spec_;
  bool sampling_ = false;
  torch::nn::ModuleList down_conv_, down_norm_, up_conv_, up_norm_, down_se_, up_se_;
};
TORCH_MODULE(Generator);

/// Conditional PatchGAN. forward() returns logits; scores() squashes them into (0,1).
class DiscriminatorImpl : public torch::nn::Module {
 public:
  explicit DiscriminatorImpl(const DiscriminatorSpec& spec);

  torch::Tensor forward(const torch::Tensor& condition, const torch::Tensor& candidate);
  torch::Tensor scores(const torch::Tensor& condition, const torch::Tensor& candidate);
  /// The last convolution, exposed for tests.
  torch::nn::Conv2d& head() { return head_; }
  const DiscriminatorSpec& spec() const { return spec_; }

 private:
  DiscriminatorSpec spec_;
  torch::nn::Sequential body_;
  torch::nn::Conv2d head_{nullptr};
};
TORCH_MODULE(Discriminator);

std::int64_t parameter_count(const torch::nn::Module& module);

enum class ModelKind { direct, split };

std::string to_string(ModelKind kind);

/// Architecture of a whole bundle. Model names: dm = direct U-Net, sp = split U-Net,
/// se = split squeeze-and-excitation U-Net.
struct BundleSpec {
  ModelKind kind = ModelKind::direct;
  GeneratorVariant variant = GeneratorVariant::unet;
  int base_width = 64;
  int max_width = 208;
  int depth = 8;
  int disc_base_width = 64;
  int resolution = 256;

  static BundleSpec for_model(const std::string& name);
  std::string model_name() const;

  GeneratorSpec direct_generator() const;  // 6 -> 1
  GeneratorSpec mask_generator() const;    // F1: contour + hint (2) -> hi, mid, sha, shw (4)
  GeneratorSpec sketch_generator() const;  // F2: masks + tones (8) -> sketch (1)
  DiscriminatorSpec direct_discriminator() const;  // 6 + 1
  DiscriminatorSpec mask_discriminator() const;    // 2 + 4
  DiscriminatorSpec sketch_discriminator() const;  // 8 + 1

  bool operator==(const BundleSpec&) const = default;
};

struct SplitOutput {
  torch::Tensor masks;
  torch::Tensor sketch;
};

/// Generators and discriminators of one model. Unused members stay null.
class ModelBundle {
 public:
  explicit ModelBundle(const BundleSpec& spec);

  const BundleSpec& spec() const { return spec_; }
  ModelKind kind() const { return spec_.kind; }

  /// c: N1HW contour, l: N1HW hint, t: N4HW tones.
  torch::Tensor forward_direct(const torch::Tensor& c, const torch::Tensor& l, const torch::Tensor& t);
  /// With `teacher_masks` defined, F2 consumes them instead of F1's prediction.
  SplitOutput forward_split(const torch::Tensor& c, const torch::Tensor& l, const torch::Tensor& t,
                            const torch::Tensor& teacher_masks = {});
  /// Sketch for either kind.
  torch::Tensor complete(const torch::Tensor& c, const torch::Tensor& l, const torch::Tensor& t);

  std::vector<torch::Tensor> generator_parameters();
  std::vector<torch::Tensor> discriminator_parameters();
  void train(bool on = true);
  void eval() { train(false); }
  void set_sampling(bool on);
  void to(torch::Dtype dtype);

  Generator direct{nullptr}, mask_gen{nullptr}, sketch_gen{nullptr};
  Discriminator direct_disc{nullptr}, mask_disc{nullptr}, sketch_disc{nullptr};

 private:
  BundleSpec spec_;
};

}  // namespace shad3s
