#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "lth/data.hpp"
#include "lth/model.hpp"
#include "lth/prune.hpp"

namespace lth {

enum class LrSchedule : uint8_t { step, cosine };

struct TrainRecipe {
  int total_epochs = 1;            // T
  double initial_lr = 0.1;
  LrSchedule schedule = LrSchedule::step;
  std::vector<int> decay_epochs;   // step schedule only
  double decay_factor = 10.0;
  int warmup_epochs = 0;
  double momentum = 0.0;
  double weight_decay = 0.0;       // coupled l2, applied inside the gradient
  int batch_size = 64;
  int rewind_epoch = 0;            // default t for this recipe family

  void validate() const;
};

// Named presets carrying the standard recipes this toolkit ships with.
TrainRecipe preset_cifar_style();     // T=160, step 80/120 x10, mom .9, wd 5e-4
TrainRecipe preset_imagenet_style();  // T=90, cosine, warmup 8, mom .875
TrainRecipe recipe_preset(const std::string& name);

// Learning rate at a 0-indexed epoch. Warmup is linear up to initial_lr;
// a step decay takes effect at the named epoch index itself.
double lr_at(const TrainRecipe& recipe, int epoch);

struct OptimState {
  std::map<std::string, std::vector<float>> velocity;
  int epoch = 0;
};

struct EpochMetrics {
  double mean_loss = 0.0;
  double accuracy = 0.0;
  double lr = 0.0;
};

// One epoch of SGD with momentum: v <- mu*v + (grad + wd*w); w <- w - lr*v.
// After every step, masked weights and their velocities are hard-zeroed.
EpochMetrics sgd_epoch(const Model& model, WeightSnapshot& weights, const Mask* mask,
                       const Dataset& train, const TrainRecipe& recipe,
                       OptimState& state, uint64_t epoch_seed,
                       Augment augment = Augment::none);

// Whole-split evaluation in identity order (no shuffle, no augmentation).
EvalResult evaluate_dataset(const Model& model, const WeightSnapshot& weights,
                            const Dataset& data, int batch_size);

}  // namespace lth
