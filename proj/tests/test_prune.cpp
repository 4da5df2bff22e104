#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "lth/prune.hpp"

using namespace lth;

namespace {

WeightSnapshot snapshot_of(std::vector<std::pair<std::string, std::vector<float>>> layers) {
  WeightSnapshot w;
  w.meta.arch_hash = "testhash";
  for (auto& [name, values] : layers) {
    WeightSnapshot::Entry e;
    e.name = name;
    e.shape = {1, static_cast<int>(values.size())};  // rank 2 -> prunable
    e.values = std::move(values);
    w.entries.push_back(std::move(e));
  }
  return w;
}

// Brute-force reference: full sort of (magnitude, layer, index) triples,
// pruning the first floor(s*N); lower indices survive ties.
Mask oracle_omp(const WeightSnapshot& snap, double s, PruneScope scope) {
  Mask m = Mask::all_ones(snap);
  struct T {
    float mag;
    size_t layer;
    size_t index;
  };
  auto order = [](const T& a, const T& b) {
    if (a.mag != b.mag) return a.mag < b.mag;
    if (a.layer != b.layer) return a.layer > b.layer;
    return a.index > b.index;
  };
  if (scope == PruneScope::global) {
    std::vector<T> all;
    for (size_t li = 0; li < m.layers.size(); ++li) {
      const WeightSnapshot::Entry* e = snap.find(m.layers[li].name);
      for (size_t i = 0; i < e->values.size(); ++i)
        all.push_back({std::fabs(e->values[i]), li, i});
    }
    std::sort(all.begin(), all.end(), order);
    const size_t k = static_cast<size_t>(std::floor(s * static_cast<double>(all.size())));
    for (size_t i = 0; i < k; ++i) m.layers[all[i].layer].keep[all[i].index] = 0;
  } else {
    for (size_t li = 0; li < m.layers.size(); ++li) {
      const WeightSnapshot::Entry* e = snap.find(m.layers[li].name);
      std::vector<T> all;
      for (size_t i = 0; i < e->values.size(); ++i)
        all.push_back({std::fabs(e->values[i]), li, i});
      std::sort(all.begin(), all.end(), order);
      const size_t k = static_cast<size_t>(std::floor(s * static_cast<double>(all.size())));
      for (size_t i = 0; i < k; ++i) m.layers[li].keep[all[i].index] = 0;
    }
  }
  m.sparsity = m.achieved_sparsity();
  m.method = "omp";
  return m;
}

bool same_bits(const Mask& a, const Mask& b) {
  if (a.layers.size() != b.layers.size()) return false;
  for (size_t i = 0; i < a.layers.size(); ++i)
    if (a.layers[i].keep != b.layers[i].keep) return false;
  return true;
}

}  // namespace

TEST_CASE("imp sparsity schedule follows 1 - 0.8^k") {
  CHECK(imp_sparsity(0) == doctest::Approx(0.0));
  CHECK(std::fabs(imp_sparsity(4) - 0.5904) < 5e-4);
  CHECK(std::fabs(imp_sparsity(8) - 0.8322) < 5e-4);
  CHECK(std::fabs(imp_sparsity(11) - 0.9141) < 5e-4);
  CHECK(std::fabs(imp_sparsity(13) - 0.9450) < 5e-4);
  CHECK(std::fabs(imp_sparsity(14) - 0.9560) < 5e-4);
  CHECK_THROWS_AS(imp_sparsity(-1), ArgumentError);
}

TEST_CASE("omp keeps the largest magnitudes") {
  const WeightSnapshot w = snapshot_of({{"a", {0.3f, -0.7f, 0.05f, 0.9f}}});
  const Mask m = omp_mask(w, SparsityRatio(0.5));
  CHECK(m.layers[0].keep == std::vector<uint8_t>{0, 1, 0, 1});
  CHECK(m.kept() == 2);
  CHECK(m.sparsity == doctest::Approx(0.5));
}

TEST_CASE("omp at sparsity zero is the identity mask") {
  const WeightSnapshot w = snapshot_of({{"a", {0.1f, 0.2f}}, {"b", {-0.3f, 0.0f}}});
  const Mask m = omp_mask(w, SparsityRatio(0.0));
  CHECK(m.kept() == 4);
  for (const Mask::Layer& l : m.layers)
    for (uint8_t k : l.keep) CHECK(k == 1);
}

TEST_CASE("equal magnitudes survive at the lowest indices") {
  const WeightSnapshot w = snapshot_of({{"a", {0.5f, 0.5f, 0.5f, 0.5f}}});
  const Mask m = omp_mask(w, SparsityRatio(0.5));
  CHECK(m.layers[0].keep == std::vector<uint8_t>{1, 1, 0, 0});
}

TEST_CASE("sparsity ratio validates its range") {
  CHECK_THROWS_AS(SparsityRatio(1.0), ArgumentError);
  CHECK_THROWS_AS(SparsityRatio(-0.1), ArgumentError);
}

TEST_CASE("imp_next prunes 20 percent of the remaining weights") {
  std::vector<float> vals(1000);
  Rng rng(17);
  for (float& v : vals) v = static_cast<float>(rng.uniform(-1.0, 1.0));
  const WeightSnapshot w = snapshot_of({{"a", std::move(vals)}});
  const Mask dense = Mask::all_ones(w);
  const Mask m1 = imp_next(dense, w);
  CHECK(m1.kept() == 800);
  CHECK(m1.method == "imp-1");

  WeightSnapshot w1 = apply_mask(w, m1);
  const Mask m2 = imp_next(m1, w1);
  CHECK(m2.kept() == 640);
  CHECK(m2.method == "imp-2");
}

TEST_CASE("imp_next rejects unsatisfied and empty masks") {
  const WeightSnapshot w = snapshot_of({{"a", {1.0f, 2.0f, 3.0f, 4.0f}}});
  Mask zero = Mask::all_ones(w);
  for (auto& l : zero.layers) std::fill(l.keep.begin(), l.keep.end(), 0);
  zero.sparsity = 1.0;
  CHECK_THROWS_AS(imp_next(zero, w), ArgumentError);

  Mask half = Mask::all_ones(w);
  half.layers[0].keep = {1, 1, 0, 0};
  half.sparsity = 0.5;
  // Snapshot does not satisfy the mask (pruned entries non-zero).
  CHECK_THROWS_AS(imp_next(half, w), ArgumentError);

  Mask wrong = Mask::all_ones(w);
  wrong.arch_hash = "otherhash";
  CHECK_THROWS_AS(imp_next(wrong, w), ConfigError);
}

TEST_CASE("k-fold imp_next tracks the geometric schedule with floor rounding") {
  std::vector<float> vals(4096);
  Rng rng(23);
  for (float& v : vals) v = static_cast<float>(rng.uniform(-1.0, 1.0));
  WeightSnapshot w = snapshot_of({{"a", std::move(vals)}});
  Mask m = Mask::all_ones(w);
  int64_t expect_kept = 4096;
  for (int k = 1; k <= 11; ++k) {
    WeightSnapshot trained = apply_mask(w, m);
    m = imp_next(m, trained);
    expect_kept -= expect_kept / 5;  // floor(0.2 * remaining)
    CHECK(m.kept() == expect_kept);
    CHECK(std::fabs(m.sparsity - imp_sparsity(k)) < 2e-3);
  }
}

TEST_CASE("imp chain masks nest") {
  std::vector<float> vals(512);
  Rng rng(31);
  for (float& v : vals) v = static_cast<float>(rng.uniform(-1.0, 1.0));
  WeightSnapshot w = snapshot_of({{"a", vals}, {"b", vals}});
  Mask prev = Mask::all_ones(w);
  for (int k = 1; k <= 8; ++k) {
    // Retrain stand-in: new values on the kept positions.
    WeightSnapshot trained = w;
    for (auto& e : trained.entries)
      for (float& v : e.values) v = static_cast<float>(rng.uniform(-1.0, 1.0));
    trained = apply_mask(trained, prev);
    const Mask next = imp_next(prev, trained);
    for (size_t li = 0; li < next.layers.size(); ++li)
      for (size_t i = 0; i < next.layers[li].keep.size(); ++i)
        if (next.layers[li].keep[i]) CHECK(prev.layers[li].keep[i] == 1);
    prev = next;
  }
}

TEST_CASE("omp matches the brute-force sort oracle") {
  Rng rng(2025);
  for (int trial = 0; trial < 60; ++trial) {
    // 1 to 3 layers, sizes 1..2000, with deliberately duplicated magnitudes.
    const int layers = 1 + static_cast<int>(rng.below(3));
    std::vector<std::pair<std::string, std::vector<float>>> spec;
    for (int l = 0; l < layers; ++l) {
      const int n = 1 + static_cast<int>(rng.below(2000));
      std::vector<float> vals(static_cast<size_t>(n));
      for (float& v : vals) {
        v = static_cast<float>(rng.uniform(-1.0, 1.0));
        if (rng.below(4) == 0) v = 0.25f;  // forced ties
        if (rng.below(8) == 0) v = -0.25f;
      }
      spec.push_back({"layer" + std::to_string(l), std::move(vals)});
    }
    const WeightSnapshot w = snapshot_of(std::move(spec));
    const double s = rng.uniform01() * 0.999;
    const PruneScope scope = rng.below(2) ? PruneScope::global : PruneScope::per_layer;
    const Mask got = omp_mask(w, SparsityRatio(s), scope);
    const Mask want = oracle_omp(w, s, scope);
    CHECK(same_bits(got, want));
    if (scope == PruneScope::global) {
      const int64_t n = got.total();
      CHECK(n - got.kept() == static_cast<int64_t>(std::floor(s * static_cast<double>(n))));
    }
  }
}

TEST_CASE("omp and k-fold imp reach equal sparsity up to floor rounding") {
  std::vector<float> vals(2048);
  Rng rng(47);
  for (float& v : vals) v = static_cast<float>(rng.uniform(-1.0, 1.0));
  WeightSnapshot w = snapshot_of({{"a", std::move(vals)}});
  const int k = 6;
  Mask chain = Mask::all_ones(w);
  for (int i = 0; i < k; ++i) chain = imp_next(chain, apply_mask(w, chain));
  const Mask oneshot = omp_mask(w, SparsityRatio(imp_sparsity(k)));
  CHECK(std::fabs(chain.sparsity - oneshot.sparsity) < 2e-3);
  // Counts differ slightly (per-round floor vs a single floor).
  CHECK(chain.kept() != oneshot.kept());
}

TEST_CASE("apply_mask is the identity for all-ones and idempotent otherwise") {
  const WeightSnapshot w = snapshot_of({{"a", {1.0f, -2.0f, 3.0f, -4.0f, 5.0f}}});
  const Mask ones = Mask::all_ones(w);
  const WeightSnapshot same = apply_mask(w, ones);
  CHECK(same.entries[0].values == w.entries[0].values);

  Mask three = Mask::all_ones(w);
  three.layers[0].keep = {1, 0, 0, 1, 0};
  three.sparsity = three.achieved_sparsity();
  const WeightSnapshot once = apply_mask(w, three);
  const WeightSnapshot twice = apply_mask(once, three);
  CHECK(once.entries[0].values == std::vector<float>{1.0f, 0.0f, 0.0f, -4.0f, 0.0f});
  CHECK(twice.entries[0].values == once.entries[0].values);

  Mask wrong = three;
  wrong.arch_hash = "otherhash";
  CHECK_THROWS_AS(apply_mask(w, wrong), ConfigError);
}
