#include "lth/optim.hpp"

#include <cmath>

namespace lth {

void TrainRecipe::validate() const {
  if (total_epochs < 1) throw ConfigError("recipe: total_epochs must be >= 1");
  if (warmup_epochs < 0 || warmup_epochs >= total_epochs)
    throw ConfigError("recipe: warmup_epochs must be in [0, T)");
  if (initial_lr <= 0.0) throw ConfigError("recipe: initial_lr must be > 0");
  if (schedule == LrSchedule::step && decay_factor <= 1.0)
    throw ConfigError("recipe: decay_factor must be > 1");
  if (momentum < 0.0 || momentum >= 1.0)
    throw ConfigError("recipe: momentum must be in [0, 1)");
  if (weight_decay < 0.0) throw ConfigError("recipe: weight_decay must be >= 0");
  if (batch_size < 1) throw ConfigError("recipe: batch_size must be >= 1");
  if (rewind_epoch < 0 || rewind_epoch >= total_epochs)
    throw ConfigError("recipe: rewind_epoch must be in [0, T)");
}

TrainRecipe preset_cifar_style() {
  TrainRecipe r;
  r.total_epochs = 160;
  r.initial_lr = 0.1;
  r.schedule = LrSchedule::step;
  r.decay_epochs = {80, 120};
  r.decay_factor = 10.0;
  r.warmup_epochs = 0;
  r.momentum = 0.9;
  r.weight_decay = 5e-4;
  r.batch_size = 64;
  r.rewind_epoch = 8;
  return r;
}

TrainRecipe preset_imagenet_style() {
  TrainRecipe r;
  r.total_epochs = 90;
  r.initial_lr = 0.1;
  r.schedule = LrSchedule::cosine;
  r.warmup_epochs = 8;
  r.momentum = 0.875;
  r.weight_decay = 3.05e-5;
  r.batch_size = 1024;
  r.rewind_epoch = 5;
  return r;
}

TrainRecipe recipe_preset(const std::string& name) {
  if (name == "cifar-style") return preset_cifar_style();
  if (name == "imagenet-style") return preset_imagenet_style();
  throw ConfigError("unknown recipe preset: " + name);
}

double lr_at(const TrainRecipe& recipe, int epoch) {
  if (epoch < 0 || epoch >= recipe.total_epochs)
    throw ArgumentError("lr_at: epoch " + std::to_string(epoch) + " outside [0, " +
                        std::to_string(recipe.total_epochs) + ")");
  const int W = recipe.warmup_epochs;
  if (epoch < W)
    return recipe.initial_lr * static_cast<double>(epoch + 1) / static_cast<double>(W);
  if (recipe.schedule == LrSchedule::step) {
    int decays = 0;
    for (int d : recipe.decay_epochs)
      if (epoch >= d) ++decays;
    return recipe.initial_lr * std::pow(recipe.decay_factor, -decays);
  }
  const double progress = static_cast<double>(epoch - W) /
                          static_cast<double>(recipe.total_epochs - W);
  return 0.5 * recipe.initial_lr *
         (1.0 + std::cos(3.14159265358979323846 * progress));
}

namespace {

void enforce_mask(const Mask& mask, WeightSnapshot& weights, OptimState& state) {
  for (const Mask::Layer& l : mask.layers) {
    WeightSnapshot::Entry* e = weights.find(l.name);
    if (!e) throw ConfigError("mask layer " + l.name + " missing from weights");
    std::vector<float>& vel = state.velocity[l.name];
    for (size_t i = 0; i < l.keep.size(); ++i)
      if (!l.keep[i]) {
        e->values[i] = 0.0f;
        if (i < vel.size()) vel[i] = 0.0f;
      }
  }
}

}  // namespace

EpochMetrics sgd_epoch(const Model& model, WeightSnapshot& weights, const Mask* mask,
                       const Dataset& train, const TrainRecipe& recipe,
                       OptimState& state, uint64_t epoch_seed, Augment augment) {
  recipe.validate();
  if (mask && mask->arch_hash != model.arch_hash())
    throw ConfigError("sgd_epoch: mask does not match the model architecture");
  const double lr = lr_at(recipe, state.epoch);

  // Velocity buffers mirror the weight layout.
  for (const WeightSnapshot::Entry& e : weights.entries)
    if (state.velocity.find(e.name) == state.velocity.end())
      state.velocity[e.name] = std::vector<float>(e.values.size(), 0.0f);

  BatchStream stream = batches(train, recipe.batch_size, epoch_seed, augment);
  double loss_acc = 0.0;
  double hit_acc = 0.0;
  int64_t seen = 0;
  int64_t batch_index = 0;
  while (auto brun = stream.next()) {
    const LabeledBatch& batch = *brun;
    Graph g;
    std::unordered_map<std::string, int> leaves;
    int loss_node = -1;
    try {
      const int logits = model.forward(g, weights, batch.features, &leaves);
      loss_node = g.softmax_cross_entropy(logits, batch.labels);
      const int64_t bsz = static_cast<int64_t>(batch.labels.size());
      loss_acc += static_cast<double>(g.value(loss_node).data[0]) * static_cast<double>(bsz);
      hit_acc += accuracy_of(g.value(logits), batch.labels) * static_cast<double>(bsz);
      seen += bsz;
      g.backward(loss_node);
    } catch (const NumericError& e) {
      throw NumericError(std::string(e.what()) + " (epoch " +
                         std::to_string(state.epoch) + ", batch " +
                         std::to_string(batch_index) + ")");
    }

    for (WeightSnapshot::Entry& w : weights.entries) {
      auto it = leaves.find(w.name);
      if (it == leaves.end()) continue;
      const Tensor& grad = g.grad(it->second);
      std::vector<float>& vel = state.velocity[w.name];
      for (size_t i = 0; i < w.values.size(); ++i) {
        const float gi =
            grad.data[i] + static_cast<float>(recipe.weight_decay) * w.values[i];
        vel[i] = static_cast<float>(recipe.momentum) * vel[i] + gi;
        w.values[i] -= static_cast<float>(lr) * vel[i];
      }
    }
    if (mask) enforce_mask(*mask, weights, state);
    ++batch_index;
  }

  EpochMetrics m;
  m.mean_loss = seen ? loss_acc / static_cast<double>(seen) : 0.0;
  m.accuracy = seen ? hit_acc / static_cast<double>(seen) : 0.0;
  m.lr = lr;
  ++state.epoch;
  return m;
}

EvalResult evaluate_dataset(const Model& model, const WeightSnapshot& weights,
                            const Dataset& data, int batch_size) {
  if (data.size() == 0) throw ArgumentError("evaluate_dataset: empty dataset");
  double loss_acc = 0.0;
  double hit_acc = 0.0;
  int64_t seen = 0;
  for (int64_t first = 0; first < data.size(); first += batch_size) {
    const int64_t count = std::min<int64_t>(batch_size, data.size() - first);
    const LabeledBatch b = take_batch(data, first, count);
    const EvalResult r = evaluate(model, weights, b);
    loss_acc += r.loss * static_cast<double>(count);
    hit_acc += r.accuracy * static_cast<double>(count);
    seen += count;
  }
  EvalResult r;
  r.loss = loss_acc / static_cast<double>(seen);
  r.accuracy = hit_acc / static_cast<double>(seen);
  return r;
}

}  // namespace lth
