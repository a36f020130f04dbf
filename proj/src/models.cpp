#include "shad3s/models.hpp"

#include "shad3s/error.hpp"

namespace shad3s {

namespace nn = torch::nn;

std::string to_string(GeneratorVariant v) { return v == GeneratorVariant::unet ? "unet" : "unet_se"; }

GeneratorVariant generator_variant_from_string(const std::string& name) {
  if (name == "unet") return GeneratorVariant::unet;
  if (name == "unet_se") return GeneratorVariant::unet_se;
  throw FormatError("unknown generator variant '" + name + "'");
}

std::string to_string(ModelKind kind) { return kind == ModelKind::direct ? "direct" : "split"; }

int GeneratorSpec::width(int stage) const {
  long w = static_cast<long>(base_width) << stage;
  return static_cast<int>(std::min<long>(w, max_width));
}

int DiscriminatorSpec::receptive_field() const {
  // Walk back from one output cell: kernel 4 everywhere.
  int rf = 1;
  const int layers = n_strided + 2;
  for (int i = layers - 1; i >= 0; --i) {
    const int stride = i < n_strided ? 2 : 1;
    rf = (rf - 1) * stride + 4;
  }
  return rf;
}

int DiscriminatorSpec::output_size(int input) const {
  int n = input;
  for (int i = 0; i < n_strided + 2; ++i) n = (n + 2 - 4) / (i < n_strided ? 2 : 1) + 1;
  return n;
}

std::int64_t parameter_count(const nn::Module& module) {
  std::int64_t n = 0;
  for (const auto& p : module.parameters()) n += p.numel();
  return n;
}

SqueezeExciteImpl::SqueezeExciteImpl(int channels, int reduction) {
  const int hidden = std::max(1, channels / reduction);
  squeeze_ = register_module("squeeze", nn::Linear(channels, hidden));
  excite_ = register_module("excite", nn::Linear(hidden, channels));
}

torch::Tensor SqueezeExciteImpl::forward(const torch::Tensor& x) {
  auto z = x.mean({2, 3});
  z = torch::sigmoid(excite_(torch::relu(squeeze_(z))));
  return x * z.unsqueeze(-1).unsqueeze(-1);
}

GeneratorImpl::GeneratorImpl(const GeneratorSpec& spec) : spec_(spec) {
  if (spec.depth < 1 || spec.in_channels < 1 || spec.out_channels < 1 || spec.base_width < 1)
    throw RangeError("generator spec needs positive channels and depth");
  const bool se = spec.variant == GeneratorVariant::unet_se;
  const int d = spec.depth;
  down_conv_ = register_module("down_conv", nn::ModuleList());
  down_norm_ = register_module("down_norm", nn::ModuleList());
  down_se_ = register_module("down_se", nn::ModuleList());
  up_conv_ = register_module("up_conv", nn::ModuleList());
  up_norm_ = register_module("up_norm", nn::ModuleList());
  up_se_ = register_module("up_se", nn::ModuleList());

  for (int i = 0; i < d; ++i) {
    const int in = i == 0 ? spec.in_channels : spec.width(i - 1);
    const int out = spec.width(i);
    // No normalisation on the outermost stage, nor the 1x1 bottleneck.
    const bool norm = i > 0 && i < d - 1;
    down_conv_->push_back(nn::Conv2d(nn::Conv2dOptions(in, out, 4).stride(2).padding(1).bias(!norm)));
    if (norm) down_norm_->push_back(nn::BatchNorm2d(out));
    else down_norm_->push_back(nn::Identity());
    if (se) down_se_->push_back(SqueezeExcite(out, spec.se_reduction));
    else down_se_->push_back(nn::Identity());
  }
  // up_conv_[j] produces decoder stage j, from the bottleneck (j = d-1) out to the image (j = 0).
  for (int j = 0; j < d; ++j) {
    const int in = j == d - 1 ? spec.width(j) : 2 * spec.width(j);
    const bool last = j == 0;
    const int out = last ? spec.out_channels : spec.width(j - 1);
    up_conv_->push_back(
        nn::ConvTranspose2d(nn::ConvTranspose2dOptions(in, out, 4).stride(2).padding(1).bias(last)));
    if (!last) up_norm_->push_back(nn::BatchNorm2d(out));
    else up_norm_->push_back(nn::Identity());
    if (se && !last) up_se_->push_back(SqueezeExcite(out, spec.se_reduction));
    else up_se_->push_back(nn::Identity());
  }
}

namespace {

torch::Tensor run_stage(const std::shared_ptr<nn::Module>& m, const torch::Tensor& x) {
  if (auto c = m->as<nn::Conv2d>()) return c->forward(x);
  if (auto c = m->as<nn::ConvTranspose2d>()) return c->forward(x);
  if (auto b = m->as<nn::BatchNorm2d>()) return b->forward(x);
  if (auto s = m->as<SqueezeExcite>()) return s->forward(x);
  return x;
}

}  // namespace

torch::Tensor GeneratorImpl::forward(const torch::Tensor& input) {
  const int d = spec_.depth;
  if (input.dim() != 4 || input.size(1) != spec_.in_channels)
    throw FormatError("generator expects N x " + std::to_string(spec_.in_channels) + " x H x W input");
  const auto side = 1L << d;
  if (input.size(2) % side != 0 || input.size(3) % side != 0)
    throw FormatError("generator input sides must be divisible by " + std::to_string(side));

  std::vector<torch::Tensor> skips;
  auto x = input * 2.0 - 1.0;
  for (int i = 0; i < d; ++i) {
    if (i > 0) x = torch::leaky_relu(x, 0.2);
    x = run_stage(down_conv_[i], x);
    x = run_stage(down_norm_[i], x);
    x = run_stage(down_se_[i], x);
    skips.push_back(x);
  }
  const bool drop = is_training() || sampling_;
  for (int j = d - 1; j >= 0; --j) {
    if (j < d - 1) x = torch::cat({x, skips[static_cast<std::size_t>(j)]}, 1);
    x = run_stage(up_conv_[j], torch::relu(x));
    if (j == 0) break;
    x = run_stage(up_norm_[j], x);
    x = run_stage(up_se_[j], x);
    if (j >= d - spec_.dropout_stages && spec_.dropout_p > 0) x = torch::dropout(x, spec_.dropout_p, drop);
  }
  return (torch::tanh(x) + 1.0) * 0.5;
}

DiscriminatorImpl::DiscriminatorImpl(const DiscriminatorSpec& spec) : spec_(spec) {
  body_ = register_module("body", nn::Sequential());
  auto width = [&](int i) { return std::min(spec.base_width << i, spec.max_width); };
  const int layers = spec.n_strided + 1;
  int in = spec.in_channels;
  for (int i = 0; i < layers; ++i) {
    const int out = width(i);
    const bool norm = i > 0;
    const int stride = i < spec.n_strided ? 2 : 1;
    body_->push_back(nn::Conv2d(nn::Conv2dOptions(in, out, 4).stride(stride).padding(1).bias(!norm)));
    if (norm) body_->push_back(nn::BatchNorm2d(out));
    body_->push_back(nn::LeakyReLU(nn::LeakyReLUOptions().negative_slope(0.2)));
    in = out;
  }
  head_ = register_module("head", nn::Conv2d(nn::Conv2dOptions(in, 1, 4).stride(1).padding(1)));
}

torch::Tensor DiscriminatorImpl::forward(const torch::Tensor& condition, const torch::Tensor& candidate) {
  if (condition.dim() != 4 || candidate.dim() != 4 || condition.sizes()[0] != candidate.sizes()[0] ||
      condition.size(2) != candidate.size(2) || condition.size(3) != candidate.size(3) ||
      condition.size(1) + candidate.size(1) != spec_.in_channels)
    throw FormatError("discriminator inputs do not match its channel wiring");
  const auto x = torch::cat({condition, candidate}, 1) * 2.0 - 1.0;
  return head_(body_->forward(x));
}

torch::Tensor DiscriminatorImpl::scores(const torch::Tensor& condition, const torch::Tensor& candidate) {
  return torch::sigmoid(forward(condition, candidate));
}

BundleSpec BundleSpec::for_model(const std::string& name) {
  BundleSpec s;
  if (name == "dm") return s;
  s.kind = ModelKind::split;
  if (name == "sp") return s;
  if (name == "se") {
    s.variant = GeneratorVariant::unet_se;
    return s;
  }
  throw FormatError("unknown model '" + name + "' (expected dm, sp or se)");
}

std::string BundleSpec::model_name() const {
  if (kind == ModelKind::direct) return variant == GeneratorVariant::unet ? "dm" : "dm-se";
  return variant == GeneratorVariant::unet ? "sp" : "se";
}

namespace {

GeneratorSpec make_gen(const BundleSpec& b, int in, int out) {
  GeneratorSpec g;
  g.variant = b.variant;
  g.in_channels = in;
  g.out_channels = out;
  g.base_width = b.base_width;
  g.max_width = b.max_width;
  g.depth = b.depth;
  return g;
}

DiscriminatorSpec make_disc(const BundleSpec& b, int in) {
  DiscriminatorSpec d;
  d.in_channels = in;
  d.base_width = b.disc_base_width;
  return d;
}

}  // namespace

GeneratorSpec BundleSpec::direct_generator() const { return make_gen(*this, 6, 1); }
GeneratorSpec BundleSpec::mask_generator() const { return make_gen(*this, 2, 4); }
GeneratorSpec BundleSpec::sketch_generator() const { return make_gen(*this, 8, 1); }
DiscriminatorSpec BundleSpec::direct_discriminator() const { return make_disc(*this, 7); }
DiscriminatorSpec BundleSpec::mask_discriminator() const { return make_disc(*this, 6); }
DiscriminatorSpec BundleSpec::sketch_discriminator() const { return make_disc(*this, 9); }

ModelBundle::ModelBundle(const BundleSpec& spec) : spec_(spec) {
  if (spec.kind == ModelKind::direct) {
    direct = Generator(spec.direct_generator());
    direct_disc = Discriminator(spec.direct_discriminator());
  } else {
    mask_gen = Generator(spec.mask_generator());
    sketch_gen = Generator(spec.sketch_generator());
    mask_disc = Discriminator(spec.mask_discriminator());
    sketch_disc = Discriminator(spec.sketch_discriminator());
  }
}

torch::Tensor ModelBundle::forward_direct(const torch::Tensor& c, const torch::Tensor& l, const torch::Tensor& t) {
  if (!direct) throw FormatError("forward_direct on a split bundle");
  return direct(torch::cat({c, l, t}, 1));
}

SplitOutput ModelBundle::forward_split(const torch::Tensor& c, const torch::Tensor& l, const torch::Tensor& t,
                                       const torch::Tensor& teacher_masks) {
  if (!mask_gen) throw FormatError("forward_split on a direct bundle");
  SplitOutput out;
  out.masks = mask_gen(torch::cat({c, l}, 1));
  const auto& m = teacher_masks.defined() ? teacher_masks : out.masks;
  out.sketch = sketch_gen(torch::cat({m, t}, 1));
  return out;
}

torch::Tensor ModelBundle::complete(const torch::Tensor& c, const torch::Tensor& l, const torch::Tensor& t) {
  return spec_.kind == ModelKind::direct ? forward_direct(c, l, t) : forward_split(c, l, t).sketch;
}

std::vector<torch::Tensor> ModelBundle::generator_parameters() {
  if (direct) return direct->parameters();
  auto p = mask_gen->parameters();
  for (auto& q : sketch_gen->parameters()) p.push_back(q);
  return p;
}

std::vector<torch::Tensor> ModelBundle::discriminator_parameters() {
  if (direct_disc) return direct_disc->parameters();
  auto p = mask_disc->parameters();
  for (auto& q : sketch_disc->parameters()) p.push_back(q);
  return p;
}

void ModelBundle::train(bool on) {
  for (auto* g : {&direct, &mask_gen, &sketch_gen})
    if (*g) (*g)->train(on);
  for (auto* d : {&direct_disc, &mask_disc, &sketch_disc})
    if (*d) (*d)->train(on);
}

void ModelBundle::set_sampling(bool on) {
  for (auto* g : {&direct, &mask_gen, &sketch_gen})
    if (*g) (*g)->set_sampling(on);
}

void ModelBundle::to(torch::Dtype dtype) {
  for (auto* g : {&direct, &mask_gen, &sketch_gen})
    if (*g) (*g)->to(dtype);
  for (auto* d : {&direct_disc, &mask_disc, &sketch_disc})
    if (*d) (*d)->to(dtype);
}

}  // namespace shad3s
