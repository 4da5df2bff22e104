#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "lth/optim.hpp"

using namespace lth;

namespace {

TrainRecipe step_recipe() {
  TrainRecipe r;
  r.total_epochs = 160;
  r.initial_lr = 0.1;
  r.schedule = LrSchedule::step;
  r.decay_epochs = {80, 120};
  r.decay_factor = 10.0;
  return r;
}

}  // namespace

TEST_CASE("step decay takes effect at the named epochs") {
  const TrainRecipe r = step_recipe();
  CHECK(lr_at(r, 0) == doctest::Approx(0.1));
  CHECK(lr_at(r, 79) == doctest::Approx(0.1));
  CHECK(lr_at(r, 80) == doctest::Approx(0.01));
  CHECK(lr_at(r, 119) == doctest::Approx(0.01));
  CHECK(lr_at(r, 120) == doctest::Approx(0.001));
  CHECK(lr_at(r, 159) == doctest::Approx(0.001));
  CHECK_THROWS_AS(lr_at(r, -1), ArgumentError);
  CHECK_THROWS_AS(lr_at(r, 160), ArgumentError);
}

TEST_CASE("cosine schedule endpoints") {
  TrainRecipe r;
  r.total_epochs = 90;
  r.initial_lr = 0.4;
  r.schedule = LrSchedule::cosine;
  CHECK(lr_at(r, 0) == doctest::Approx(0.4));
  const double expect = 0.5 * 0.4 * (1.0 + std::cos(M_PI * 89.0 / 90.0));
  CHECK(lr_at(r, 89) == doctest::Approx(expect));
}

TEST_CASE("linear warmup scales by (epoch+1)/W") {
  TrainRecipe r;
  r.total_epochs = 90;
  r.initial_lr = 0.4;
  r.schedule = LrSchedule::cosine;
  r.warmup_epochs = 8;
  CHECK(lr_at(r, 3) == doctest::Approx(0.5 * 0.4));
  CHECK(lr_at(r, 0) == doctest::Approx(0.4 / 8.0));
  CHECK(lr_at(r, 7) == doctest::Approx(0.4));
  CHECK(lr_at(r, 8) == doctest::Approx(0.4));  // cosine restarts from full lr
}

TEST_CASE("lr is non-increasing after warmup for both schedules") {
  Rng rng(2024);
  for (int trial = 0; trial < 50; ++trial) {
    TrainRecipe r;
    r.total_epochs = 20 + static_cast<int>(rng.below(200));
    r.initial_lr = rng.uniform(0.01, 1.0);
    r.warmup_epochs = static_cast<int>(rng.below(static_cast<uint64_t>(r.total_epochs)));
    if (rng.below(2)) {
      r.schedule = LrSchedule::step;
      r.decay_factor = 2.0 + rng.uniform01() * 8.0;
      const int d1 = static_cast<int>(rng.below(static_cast<uint64_t>(r.total_epochs)));
      const int d2 = static_cast<int>(rng.below(static_cast<uint64_t>(r.total_epochs)));
      r.decay_epochs = {std::min(d1, d2), std::max(d1, d2)};
    } else {
      r.schedule = LrSchedule::cosine;
    }
    double prev = lr_at(r, r.warmup_epochs);
    for (int e = r.warmup_epochs + 1; e < r.total_epochs; ++e) {
      const double cur = lr_at(r, e);
      CHECK(cur <= prev + 1e-12);
      prev = cur;
    }
  }
}

TEST_CASE("presets carry the standard recipes") {
  const TrainRecipe c = preset_cifar_style();
  CHECK(c.total_epochs == 160);
  CHECK(c.schedule == LrSchedule::step);
  CHECK(c.decay_epochs == std::vector<int>{80, 120});
  CHECK(c.decay_factor == doctest::Approx(10.0));
  CHECK(c.momentum == doctest::Approx(0.9));
  CHECK(c.weight_decay == doctest::Approx(5e-4));
  CHECK(c.batch_size == 64);
  CHECK(c.warmup_epochs == 0);
  CHECK(c.rewind_epoch == 8);

  const TrainRecipe i = preset_imagenet_style();
  CHECK(i.total_epochs == 90);
  CHECK(i.schedule == LrSchedule::cosine);
  CHECK(i.momentum == doctest::Approx(0.875));
  CHECK(i.weight_decay == doctest::Approx(3.05e-5));
  CHECK(i.warmup_epochs == 8);
  CHECK(i.rewind_epoch == 5);

  CHECK_THROWS_AS(recipe_preset("nonsense"), ConfigError);
}

TEST_CASE("plain sgd step moves weights against the gradient") {
  // fc 1->2 on one sample: logits are [w00+b0, w01+b1], so with zeros the
  // gradient at label 0 is (p0-1, p1) = (-0.5, 0.5) and one step at lr 0.1
  // moves w00 by +0.05.
  const ArchSpec spec = ArchSpec::fc(1, {}, 2);
  const Model model(spec);
  WeightSnapshot w;
  w.meta.arch_hash = model.arch_hash();
  w.meta.epoch_tag = "0";
  w.entries.push_back({"head.w", {1, 2}, {0.0f, 0.0f}});
  w.entries.push_back({"head.b", {2}, {0.0f, 0.0f}});

  Dataset d;
  d.sample_shape = {1};
  d.samples = {1.0f};
  d.labels = {0};
  d.num_classes = 2;

  TrainRecipe r;
  r.total_epochs = 1;
  r.initial_lr = 0.1;
  r.schedule = LrSchedule::cosine;
  r.momentum = 0.0;
  r.weight_decay = 0.0;
  r.batch_size = 1;
  OptimState st;
  sgd_epoch(model, w, nullptr, d, r, st, 1);
  CHECK(w.entries[0].values[0] == doctest::Approx(0.05).epsilon(1e-6));
  CHECK(w.entries[0].values[1] == doctest::Approx(-0.05).epsilon(1e-6));
}

TEST_CASE("momentum accumulates the velocity") {
  // Same setup, two epochs with momentum 0.9 and no weight decay; compare
  // against the recurrence computed by hand in doubles.
  const ArchSpec spec = ArchSpec::fc(1, {}, 2);
  const Model model(spec);
  WeightSnapshot w;
  w.meta.arch_hash = model.arch_hash();
  w.entries.push_back({"head.w", {1, 2}, {0.0f, 0.0f}});
  w.entries.push_back({"head.b", {2}, {0.0f, 0.0f}});
  Dataset d;
  d.sample_shape = {1};
  d.samples = {1.0f};
  d.labels = {0};
  d.num_classes = 2;
  TrainRecipe r;
  r.total_epochs = 2;
  r.initial_lr = 0.1;
  r.schedule = LrSchedule::step;
  r.decay_factor = 10.0;
  r.momentum = 0.9;
  r.batch_size = 1;
  OptimState st;
  sgd_epoch(model, w, nullptr, d, r, st, 1);
  sgd_epoch(model, w, nullptr, d, r, st, 2);

  // Hand recurrence: z = w00 - w01 doubles each logit gap's effect.
  double w00 = 0.0, w01 = 0.0, b0 = 0.0, b1 = 0.0, vw0 = 0.0, vw1 = 0.0, vb0 = 0.0,
         vb1 = 0.0;
  for (int stp = 0; stp < 2; ++stp) {
    const double z0 = w00 + b0, z1 = w01 + b1;
    const double m = std::max(z0, z1);
    const double p0 = std::exp(z0 - m) / (std::exp(z0 - m) + std::exp(z1 - m));
    const double p1 = 1.0 - p0;
    const double g0 = p0 - 1.0, g1 = p1;
    vw0 = 0.9 * vw0 + g0;
    vw1 = 0.9 * vw1 + g1;
    vb0 = 0.9 * vb0 + g0;
    vb1 = 0.9 * vb1 + g1;
    w00 -= 0.1 * vw0;
    w01 -= 0.1 * vw1;
    b0 -= 0.1 * vb0;
    b1 -= 0.1 * vb1;
  }
  CHECK(w.entries[0].values[0] == doctest::Approx(w00).epsilon(1e-5));
  CHECK(w.entries[0].values[1] == doctest::Approx(w01).epsilon(1e-5));
  CHECK(w.entries[1].values[0] == doctest::Approx(b0).epsilon(1e-5));
}

TEST_CASE("identity mask training matches unmasked training bit-exactly") {
  SyntheticData d = load_synthetic(SyntheticKind::spirals, 64, 32, 2, 0.1, 11);
  const ArchSpec spec = ArchSpec::fc(2, {16, 16}, 2);
  const Model model(spec);
  WeightSnapshot w1 = init_weights(model, InitSpec{InitScheme::kaiming_uniform, 5});
  WeightSnapshot w2 = w1;
  const Mask ones = Mask::all_ones(w1);

  TrainRecipe r;
  r.total_epochs = 5;
  r.initial_lr = 0.1;
  r.schedule = LrSchedule::cosine;
  r.momentum = 0.9;
  r.weight_decay = 5e-4;
  r.batch_size = 16;
  OptimState s1, s2;
  for (int e = 0; e < 5; ++e) {
    sgd_epoch(model, w1, nullptr, d.train, r, s1, mix_seed(3, "epoch", e));
    sgd_epoch(model, w2, &ones, d.train, r, s2, mix_seed(3, "epoch", e));
  }
  for (size_t i = 0; i < w1.entries.size(); ++i)
    CHECK(w1.entries[i].values == w2.entries[i].values);
}

TEST_CASE("masked weights and velocities stay exactly zero") {
  SyntheticData d = load_synthetic(SyntheticKind::spirals, 64, 32, 2, 0.1, 13);
  const ArchSpec spec = ArchSpec::fc(2, {16, 16}, 2);
  const Model model(spec);
  WeightSnapshot w = init_weights(model, InitSpec{InitScheme::kaiming_uniform, 6});

  // Mask out every other prunable weight.
  Mask mask = Mask::all_ones(w);
  for (Mask::Layer& l : mask.layers)
    for (size_t i = 0; i < l.keep.size(); i += 2) l.keep[i] = 0;
  mask.sparsity = mask.achieved_sparsity();
  w = apply_mask(w, mask);

  TrainRecipe r;
  r.total_epochs = 10;
  r.initial_lr = 0.1;
  r.schedule = LrSchedule::cosine;
  r.momentum = 0.9;
  r.weight_decay = 5e-4;
  r.batch_size = 16;
  OptimState st;
  for (int e = 0; e < 10; ++e) {
    sgd_epoch(model, w, &mask, d.train, r, st, mix_seed(7, "epoch", e));
    for (const Mask::Layer& l : mask.layers) {
      const WeightSnapshot::Entry* we = w.find(l.name);
      const std::vector<float>& vel = st.velocity.at(l.name);
      for (size_t i = 0; i < l.keep.size(); ++i)
        if (!l.keep[i]) {
          CHECK(we->values[i] == 0.0f);
          CHECK(vel[i] == 0.0f);
        }
    }
  }
}

TEST_CASE("recipe validation rejects bad fields") {
  TrainRecipe r = preset_cifar_style();
  r.warmup_epochs = 200;
  CHECK_THROWS_AS(r.validate(), ConfigError);
  r = preset_cifar_style();
  r.decay_factor = 0.5;
  CHECK_THROWS_AS(r.validate(), ConfigError);
  r = preset_cifar_style();
  r.momentum = 1.5;
  CHECK_THROWS_AS(r.validate(), ConfigError);
}
