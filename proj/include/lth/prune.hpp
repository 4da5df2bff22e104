#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lth/model.hpp"

namespace lth {

// Fraction of prunable weights removed; always in [0, 1).
struct SparsityRatio {
  double value = 0.0;
  explicit SparsityRatio(double v) : value(v) {
    if (!(v >= 0.0 && v < 1.0))
      throw ArgumentError("sparsity ratio must be in [0,1), got " + std::to_string(v));
  }
};

enum class PruneScope : uint8_t { global, per_layer };

// Binary keep/prune indicator aligned to a snapshot's prunable layers
// (weights only; biases are never prunable).
struct Mask {
  struct Layer {
    std::string name;
    std::vector<int> shape;
    std::vector<uint8_t> keep;  // 1 = kept, 0 = pruned
  };
  std::vector<Layer> layers;
  std::string arch_hash;
  double sparsity = 0.0;  // achieved, not requested
  std::string method;     // "omp" | "imp-k" | "ones"

  int64_t total() const;
  int64_t kept() const;
  double achieved_sparsity() const;
  const Layer* find(const std::string& name) const;
  void validate() const;

  static Mask all_ones(const WeightSnapshot& snapshot);
};

// Sparsity after k rounds of pruning 20% of the remaining weights.
double imp_sparsity(int k);

// One-shot magnitude pruning: removes exactly floor(s*N) weights, the
// smallest by |value|. Among equal magnitudes the lower (layer, index)
// survives. Global scope pools all prunable layers into one ranking.
Mask omp_mask(const WeightSnapshot& snapshot, SparsityRatio s,
              PruneScope scope = PruneScope::global);

// One IMP round: of the currently kept weights, the 20% smallest by
// trained magnitude are additionally pruned. The result nests inside
// current_mask.
Mask imp_next(const Mask& current_mask, const WeightSnapshot& trained,
              PruneScope scope = PruneScope::global);

// Elementwise product; non-prunable layers untouched. Idempotent.
WeightSnapshot apply_mask(const WeightSnapshot& snapshot, const Mask& mask);

}  // namespace lth
