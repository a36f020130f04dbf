#include "shad3s/training.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "shad3s/checkpoint.hpp"
#include "shad3s/error.hpp"
#include "shad3s/random.hpp"

namespace shad3s {

namespace fs = std::filesystem;

torch::Tensor image_to_tensor(const Image& image) {
  auto t = torch::empty({1, 1, image.height(), image.width()}, torch::kFloat32);
  std::copy(image.pixels().begin(), image.pixels().end(), t.data_ptr<float>());
  return t;
}

Image tensor_to_image(const torch::Tensor& t) {
  const auto c = t.detach().to(torch::kFloat32).contiguous().reshape({t.size(-2), t.size(-1)});
  Image out(static_cast<int>(c.size(1)), static_cast<int>(c.size(0)));
  std::copy(c.data_ptr<float>(), c.data_ptr<float>() + c.numel(), out.pixels().begin());
  return out;
}

namespace {

Image quantised(const Image& im) {
  Image out(im.width(), im.height());
  for (std::size_t i = 0; i < im.size(); ++i) out[i] = static_cast<float>(to_byte(im[i])) / 255.0f;
  return out;
}

torch::Tensor stack_planes(const std::vector<std::vector<Image>>& rows) {
  std::vector<torch::Tensor> items;
  for (const auto& planes : rows) {
    std::vector<torch::Tensor> ch;
    for (const auto& p : planes) ch.push_back(image_to_tensor(p));
    items.push_back(torch::cat(ch, 1));
  }
  return torch::cat(items, 0);
}

TrainingSet assemble(const std::vector<std::array<Image, 11>>& planes, std::vector<int> k) {
  std::vector<std::vector<Image>> c, l, t, m, s;
  for (const auto& p : planes) {
    c.push_back({p[0]});
    l.push_back({p[1]});
    t.push_back({p[2], p[3], p[4], p[5]});
    m.push_back({p[6], p[7], p[8], p[9]});
    s.push_back({p[10]});
  }
  TrainingSet set;
  if (planes.empty()) return set;
  set.contour = stack_planes(c);
  set.hint = stack_planes(l);
  set.tones = stack_planes(t);
  set.masks = stack_planes(m);
  set.sketch = stack_planes(s);
  set.subset_k = std::move(k);
  return set;
}

}  // namespace

TrainingSet TrainingSet::from_points(const std::vector<DataPoint>& points) {
  std::vector<std::array<Image, 11>> planes;
  std::vector<int> k;
  for (const auto& p : points) {
    const auto& r = p.planes;
    planes.push_back({quantised(contour_image(r.cnt)), quantised(r.ill), quantised(p.crops.tones[0]),
                      quantised(p.crops.tones[1]), quantised(p.crops.tones[2]), quantised(p.crops.tones[3]),
                      mask_to_image(r.hi), mask_to_image(r.mid), mask_to_image(r.sha), mask_to_image(r.shw),
                      quantised(r.sk)});
    k.push_back(p.meta.k);
  }
  return assemble(planes, std::move(k));
}

TrainingSet TrainingSet::load(const fs::path& root, const std::vector<DataPointMeta>& rows) {
  std::vector<std::array<Image, 11>> planes;
  std::vector<int> k;
  for (const auto& row : rows) {
    auto p = load_point(root, row);
    planes.push_back({std::move(p.cnt), std::move(p.ill), std::move(p.tones[0]), std::move(p.tones[1]),
                      std::move(p.tones[2]), std::move(p.tones[3]), std::move(p.hi), std::move(p.mid),
                      std::move(p.sha), std::move(p.shw), std::move(p.sk)});
    k.push_back(row.k);
  }
  return assemble(planes, std::move(k));
}

TrainingSet TrainingSet::select(const torch::Tensor& indices) const {
  TrainingSet out{contour.index_select(0, indices), hint.index_select(0, indices), tones.index_select(0, indices),
                  masks.index_select(0, indices), sketch.index_select(0, indices), {}};
  const auto idx = indices.to(torch::kLong).contiguous();
  for (std::int64_t i = 0; i < idx.numel(); ++i)
    if (!subset_k.empty()) out.subset_k.push_back(subset_k[static_cast<std::size_t>(idx.data_ptr<std::int64_t>()[i])]);
  return out;
}

TrainingSet TrainingSet::slice(std::int64_t begin, std::int64_t end) const {
  return select(torch::arange(begin, std::min(end, size()), torch::kLong));
}

TrainingSet TrainingSet::to(torch::Dtype dtype) const {
  return {contour.to(dtype), hint.to(dtype), tones.to(dtype), masks.to(dtype), sketch.to(dtype), subset_k};
}

torch::Tensor l1_distance(const torch::Tensor& target, const torch::Tensor& prediction) {
  if (target.sizes() != prediction.sizes()) throw FormatError("l1 loss inputs differ in shape");
  return (target - prediction).abs().mean();
}

torch::Tensor discriminator_objective(const torch::Tensor& real_scores, const torch::Tensor& fake_scores) {
  return torch::log(real_scores.clamp(kScoreEps, 1.0 - kScoreEps)).mean() +
         torch::log(1.0 - fake_scores.clamp(kScoreEps, 1.0 - kScoreEps)).mean();
}

torch::Tensor generator_adversarial(const torch::Tensor& fake_scores) {
  return -torch::log(fake_scores.clamp(kScoreEps, 1.0 - kScoreEps)).mean();
}

double discriminator_accuracy(const torch::Tensor& real_scores, const torch::Tensor& fake_scores) {
  const double real_ok = (real_scores > 0.5).to(torch::kFloat64).mean().item<double>();
  const double fake_ok = (fake_scores < 0.5).to(torch::kFloat64).mean().item<double>();
  return 0.5 * (real_ok + fake_ok);
}

SplitLossTerms split_losses(const torch::Tensor& masks, const torch::Tensor& masks_hat, const torch::Tensor& sketch,
                            const torch::Tensor& sketch_hat, const torch::Tensor& real_scores_masks,
                            const torch::Tensor& fake_scores_masks, const torch::Tensor& real_scores_sketch,
                            const torch::Tensor& fake_scores_sketch) {
  SplitLossTerms t;
  t.l1_masks = l1_distance(masks, masks_hat);
  t.l1_sketch = l1_distance(sketch, sketch_hat);
  t.l1 = t.l1_masks + t.l1_sketch;
  t.objective_masks = discriminator_objective(real_scores_masks, fake_scores_masks);
  t.objective_sketch = discriminator_objective(real_scores_sketch, fake_scores_sketch);
  t.objective = t.objective_masks + t.objective_sketch;
  t.g_adv_masks = generator_adversarial(fake_scores_masks);
  t.g_adv_sketch = generator_adversarial(fake_scores_sketch);
  t.g_adv = t.g_adv_masks + t.g_adv_sketch;
  return t;
}

void TrainConfig::validate() const {
  if (!(adv_weight >= 0.0)) throw RangeError("adversarial weight must be non-negative");
  if (batch_size < 1) throw RangeError("batch size must be at least 1");
  if (epochs < 0) throw RangeError("epochs must be non-negative");
  if (!(lr >= 0.0)) throw RangeError("learning rate must be non-negative");
}

std::string TrainConfig::to_json() const {
  return nlohmann::json{{"adv_weight", adv_weight}, {"lr", lr},         {"beta1", beta1},
                        {"beta2", beta2},           {"batch_size", batch_size}, {"epochs", epochs},
                        {"teacher_forcing", teacher_forcing}, {"seed", seed}}
      .dump();
}

std::string parameter_digest(const std::vector<torch::Tensor>& params) {
  std::vector<std::uint8_t> bytes;
  for (const auto& p : params) {
    const auto c = p.detach().contiguous();
    const auto* data = static_cast<const std::uint8_t*>(c.data_ptr());
    bytes.insert(bytes.end(), data, data + c.numel() * c.element_size());
  }
  return sha256_hex(bytes);
}

namespace {

torch::optim::AdamOptions adam(const TrainConfig& c) {
  return torch::optim::AdamOptions(c.lr).betas({c.beta1, c.beta2});
}

// Freezes a parameter list for the lifetime of the guard.
class Frozen {
 public:
  explicit Frozen(std::vector<torch::Tensor> params) : params_(std::move(params)) {
    for (auto& p : params_) p.set_requires_grad(false);
  }
  ~Frozen() {
    for (auto& p : params_) p.set_requires_grad(true);
  }
  Frozen(const Frozen&) = delete;
  Frozen& operator=(const Frozen&) = delete;

 private:
  std::vector<torch::Tensor> params_;
};

}  // namespace

Trainer::Trainer(ModelBundle& bundle, const TrainConfig& config)
    : bundle_(bundle),
      config_(config),
      gen_opt_(bundle.generator_parameters(), adam(config)),
      disc_opt_(bundle.discriminator_parameters(), adam(config)) {
  config.validate();
}

SplitOutput generate(ModelBundle& bundle, const TrainingSet& batch, bool teacher_forcing) {
  if (bundle.kind() == ModelKind::direct) return {torch::Tensor(), bundle.forward_direct(batch.contour, batch.hint, batch.tones)};
  return bundle.forward_split(batch.contour, batch.hint, batch.tones, teacher_forcing ? batch.masks : torch::Tensor());
}

namespace {

// Condition planes of each discriminator. The second split stage is conditioned on the true masks.
torch::Tensor direct_condition(const TrainingSet& b) { return torch::cat({b.contour, b.hint, b.tones}, 1); }
torch::Tensor mask_condition(const TrainingSet& b) { return torch::cat({b.contour, b.hint}, 1); }
torch::Tensor sketch_condition(const TrainingSet& b) { return torch::cat({b.masks, b.tones}, 1); }

}  // namespace

DiscriminatorLoss discriminator_loss(ModelBundle& bundle, const TrainingSet& batch, const SplitOutput& out) {
  DiscriminatorLoss r;
  if (bundle.kind() == ModelKind::direct) {
    const auto cond = direct_condition(batch);
    const auto real = bundle.direct_disc->scores(cond, batch.sketch);
    const auto fake = bundle.direct_disc->scores(cond, out.sketch.detach());
    r.loss = -discriminator_objective(real, fake);
    r.accuracy = discriminator_accuracy(real.detach(), fake.detach());
    return r;
  }
  const auto cl = mask_condition(batch);
  const auto cm = sketch_condition(batch);
  const auto r1 = bundle.mask_disc->scores(cl, batch.masks);
  const auto f1 = bundle.mask_disc->scores(cl, out.masks.detach());
  const auto r2 = bundle.sketch_disc->scores(cm, batch.sketch);
  const auto f2 = bundle.sketch_disc->scores(cm, out.sketch.detach());
  r.loss = -(discriminator_objective(r1, f1) + discriminator_objective(r2, f2));
  r.accuracy = 0.5 * (discriminator_accuracy(r1.detach(), f1.detach()) + discriminator_accuracy(r2.detach(), f2.detach()));
  return r;
}

GeneratorLoss generator_loss(ModelBundle& bundle, const TrainingSet& batch, const SplitOutput& out, double adv_weight) {
  GeneratorLoss r;
  Frozen frozen(bundle.discriminator_parameters());
  if (bundle.kind() == ModelKind::direct) {
    r.l1 = l1_distance(batch.sketch, out.sketch);
    r.adv = generator_adversarial(bundle.direct_disc->scores(direct_condition(batch), out.sketch));
  } else {
    r.l1 = l1_distance(batch.masks, out.masks) + l1_distance(batch.sketch, out.sketch);
    r.adv = generator_adversarial(bundle.mask_disc->scores(mask_condition(batch), out.masks)) +
            generator_adversarial(bundle.sketch_disc->scores(sketch_condition(batch), out.sketch));
  }
  r.total = r.l1 + adv_weight * r.adv;
  return r;
}

StepStats Trainer::step(const TrainingSet& batch) {
  bundle_.train(true);
  StepStats stats;
  const auto out = generate(bundle_, batch, config_.teacher_forcing);

  disc_opt_.zero_grad();
  const auto d = discriminator_loss(bundle_, batch, out);
  d.loss.backward();
  disc_opt_.step();
  stats.d_loss = d.loss.item<double>();
  stats.d_accuracy = d.accuracy;

  // The discriminator has moved; score the same fakes against it.
  gen_opt_.zero_grad();
  const auto g = generator_loss(bundle_, batch, out, config_.adv_weight);
  stats.g_l1 = g.l1.item<double>();
  stats.g_adv = g.adv.item<double>();
  if (!std::isfinite(stats.g_l1) || !std::isfinite(stats.g_adv))
    throw DivergenceError("generator loss became non-finite at step " + std::to_string(steps_));
  g.total.backward();
  gen_opt_.step();
  ++steps_;
  return stats;
}

double Trainer::validation_l1(const TrainingSet& data, int batch_size) {
  if (data.size() == 0) return 0.0;
  torch::NoGradGuard no_grad;
  bundle_.eval();
  double total = 0.0;
  for (std::int64_t b = 0; b < data.size(); b += batch_size) {
    const auto batch = data.slice(b, b + batch_size);
    const auto pred = bundle_.complete(batch.contour, batch.hint, batch.tones);
    total += l1_distance(batch.sketch, pred).item<double>() * static_cast<double>(batch.size());
  }
  bundle_.train(true);
  return total / static_cast<double>(data.size());
}

FitResult Trainer::fit(const TrainingSet& train, const TrainingSet& val, const std::optional<fs::path>& out_dir,
                       const std::function<void(const EpochStats&)>& on_epoch) {
  if (train.size() == 0) throw RangeError("training set is empty");
  std::ofstream log;
  if (out_dir) {
    fs::create_directories(*out_dir);
    log.open(*out_dir / "metrics.jsonl", std::ios::trunc);
  }
  auto write_log = [&](const nlohmann::json& row) {
    if (log.is_open()) log << row.dump() << "\n" << std::flush;
  };

  FitResult result;
  result.initial_val_l1 = validation_l1(val);
  write_log({{"step", steps_}, {"epoch", 0}, {"val_l1", result.initial_val_l1}});

  std::vector<std::int64_t> order(static_cast<std::size_t>(train.size()));
  for (int epoch = 1; epoch <= config_.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    Rng rng = make_rng(derive_seed(config_.seed, {0xe90c, static_cast<std::uint64_t>(epoch)}));
    std::shuffle(order.begin(), order.end(), rng);

    EpochStats es;
    es.epoch = epoch;
    int batches = 0;
    for (std::size_t b = 0; b < order.size(); b += static_cast<std::size_t>(config_.batch_size)) {
      const std::size_t e = std::min(order.size(), b + static_cast<std::size_t>(config_.batch_size));
      const auto idx = torch::tensor(std::vector<std::int64_t>(order.begin() + static_cast<long>(b),
                                                               order.begin() + static_cast<long>(e)),
                                     torch::kLong);
      const auto s = step(train.select(idx));
      write_log({{"step", steps_}, {"d_loss", s.d_loss}, {"g_adv", s.g_adv}, {"g_l1", s.g_l1}, {"d_acc", s.d_accuracy}});
      es.d_loss += s.d_loss;
      es.g_adv += s.g_adv;
      es.g_l1 += s.g_l1;
      es.d_accuracy += s.d_accuracy;
      ++batches;
    }
    es.d_loss /= batches;
    es.g_adv /= batches;
    es.g_l1 /= batches;
    es.d_accuracy /= batches;
    es.val_l1 = validation_l1(val);
    write_log({{"step", steps_}, {"epoch", epoch}, {"d_loss", es.d_loss}, {"g_adv", es.g_adv}, {"g_l1", es.g_l1},
               {"d_acc", es.d_accuracy}, {"val_l1", es.val_l1}});
    if (out_dir) save_checkpoint(bundle_, *out_dir / ("ckpt_e" + std::to_string(epoch) + ".bin"), epoch, config_.to_json());
    result.epochs.push_back(es);
    if (on_epoch) on_epoch(es);
  }
  return result;
}

}  // namespace shad3s
