#include "lth/prune.hpp"

#include <algorithm>
#include <cmath>

namespace lth {

namespace {

bool is_prunable(const WeightSnapshot::Entry& e) { return e.shape.size() >= 2; }

struct Ranked {
  float mag;
  int layer;
  int64_t index;
};

// Pruning priority: ascending magnitude; among ties the higher (layer,
// index) goes first so the lower one survives.
bool prune_order(const Ranked& a, const Ranked& b) {
  if (a.mag != b.mag) return a.mag < b.mag;
  if (a.layer != b.layer) return a.layer > b.layer;
  return a.index > b.index;
}

}  // namespace

int64_t Mask::total() const {
  int64_t n = 0;
  for (const Layer& l : layers) n += static_cast<int64_t>(l.keep.size());
  return n;
}

int64_t Mask::kept() const {
  int64_t n = 0;
  for (const Layer& l : layers)
    for (uint8_t k : l.keep) n += k;
  return n;
}

double Mask::achieved_sparsity() const {
  const int64_t t = total();
  return t == 0 ? 0.0 : 1.0 - static_cast<double>(kept()) / static_cast<double>(t);
}

const Mask::Layer* Mask::find(const std::string& name) const {
  for (const Layer& l : layers)
    if (l.name == name) return &l;
  return nullptr;
}

void Mask::validate() const {
  for (const Layer& l : layers) {
    if (static_cast<int64_t>(l.keep.size()) != shape_numel(l.shape))
      throw ConfigError("mask layer " + l.name + " bit count mismatch");
    for (uint8_t k : l.keep)
      if (k > 1) throw ConfigError("mask layer " + l.name + " has non-binary flags");
  }
  if (std::abs(achieved_sparsity() - sparsity) > 1e-9)
    throw ConfigError("mask recorded sparsity is inconsistent with its bit counts");
}

Mask Mask::all_ones(const WeightSnapshot& snapshot) {
  Mask m;
  m.arch_hash = snapshot.meta.arch_hash;
  m.method = "ones";
  for (const WeightSnapshot::Entry& e : snapshot.entries) {
    if (!is_prunable(e)) continue;
    Layer l;
    l.name = e.name;
    l.shape = e.shape;
    l.keep.assign(e.values.size(), 1);
    m.layers.push_back(std::move(l));
  }
  m.sparsity = 0.0;
  return m;
}

double imp_sparsity(int k) {
  if (k < 0) throw ArgumentError("imp_sparsity: k must be >= 0");
  return 1.0 - std::pow(0.8, k);
}

namespace {

// Prunes the first `to_prune` entries of `pool` in prune_order. The order
// is strict and total ((mag, layer, index) never ties), so nth_element
// partitions the pool exactly.
void prune_pool(Mask& mask, std::vector<Ranked>& pool, int64_t to_prune) {
  if (to_prune <= 0) return;
  if (to_prune < static_cast<int64_t>(pool.size()))
    std::nth_element(pool.begin(), pool.begin() + to_prune, pool.end(), prune_order);
  for (int64_t i = 0; i < to_prune; ++i)
    mask.layers[static_cast<size_t>(pool[static_cast<size_t>(i)].layer)]
        .keep[static_cast<size_t>(pool[static_cast<size_t>(i)].index)] = 0;
}

}  // namespace

Mask omp_mask(const WeightSnapshot& snapshot, SparsityRatio s, PruneScope scope) {
  Mask m = Mask::all_ones(snapshot);
  m.method = "omp";
  if (m.total() < 1) throw ArgumentError("omp: snapshot has no prunable weights");

  if (scope == PruneScope::global) {
    std::vector<Ranked> pool;
    pool.reserve(static_cast<size_t>(m.total()));
    for (size_t li = 0; li < m.layers.size(); ++li) {
      const WeightSnapshot::Entry* e = snapshot.find(m.layers[li].name);
      for (size_t i = 0; i < e->values.size(); ++i)
        pool.push_back(Ranked{std::fabs(e->values[i]), static_cast<int>(li),
                              static_cast<int64_t>(i)});
    }
    const int64_t to_prune =
        static_cast<int64_t>(std::floor(s.value * static_cast<double>(pool.size())));
    prune_pool(m, pool, to_prune);
  } else {
    for (size_t li = 0; li < m.layers.size(); ++li) {
      const WeightSnapshot::Entry* e = snapshot.find(m.layers[li].name);
      std::vector<Ranked> pool;
      pool.reserve(e->values.size());
      for (size_t i = 0; i < e->values.size(); ++i)
        pool.push_back(Ranked{std::fabs(e->values[i]), static_cast<int>(li),
                              static_cast<int64_t>(i)});
      const int64_t to_prune =
          static_cast<int64_t>(std::floor(s.value * static_cast<double>(pool.size())));
      prune_pool(m, pool, to_prune);
    }
  }
  m.sparsity = m.achieved_sparsity();
  return m;
}

Mask imp_next(const Mask& current_mask, const WeightSnapshot& trained,
              PruneScope scope) {
  if (current_mask.arch_hash != trained.meta.arch_hash)
    throw ConfigError("imp_next: mask arch " + current_mask.arch_hash +
                      " does not match snapshot " + trained.meta.arch_hash);
  Mask m = current_mask;
  int64_t remaining_total = 0;
  for (size_t li = 0; li < m.layers.size(); ++li) {
    const WeightSnapshot::Entry* e = trained.find(m.layers[li].name);
    if (!e || e->shape != m.layers[li].shape)
      throw ConfigError("imp_next: snapshot missing layer " + m.layers[li].name);
    for (size_t i = 0; i < e->values.size(); ++i) {
      if (m.layers[li].keep[i])
        ++remaining_total;
      else if (e->values[i] != 0.0f)
        throw ArgumentError("imp_next: snapshot does not satisfy the current mask at " +
                            m.layers[li].name);
    }
  }
  if (remaining_total == 0)
    throw ArgumentError("imp_next: current mask keeps no weights, nothing prunable");

  if (scope == PruneScope::global) {
    std::vector<Ranked> pool;
    pool.reserve(static_cast<size_t>(remaining_total));
    for (size_t li = 0; li < m.layers.size(); ++li) {
      const WeightSnapshot::Entry* e = trained.find(m.layers[li].name);
      for (size_t i = 0; i < e->values.size(); ++i)
        if (m.layers[li].keep[i])
          pool.push_back(Ranked{std::fabs(e->values[i]), static_cast<int>(li),
                                static_cast<int64_t>(i)});
    }
    prune_pool(m, pool, static_cast<int64_t>(std::floor(0.2 * static_cast<double>(pool.size()))));
  } else {
    for (size_t li = 0; li < m.layers.size(); ++li) {
      const WeightSnapshot::Entry* e = trained.find(m.layers[li].name);
      std::vector<Ranked> pool;
      for (size_t i = 0; i < e->values.size(); ++i)
        if (m.layers[li].keep[i])
          pool.push_back(Ranked{std::fabs(e->values[i]), static_cast<int>(li),
                                static_cast<int64_t>(i)});
      prune_pool(m, pool, static_cast<int64_t>(std::floor(0.2 * static_cast<double>(pool.size()))));
    }
  }
  m.sparsity = m.achieved_sparsity();
  int iter = 1;
  if (current_mask.method.rfind("imp-", 0) == 0)
    iter = std::stoi(current_mask.method.substr(4)) + 1;
  m.method = "imp-" + std::to_string(iter);
  return m;
}

WeightSnapshot apply_mask(const WeightSnapshot& snapshot, const Mask& mask) {
  if (mask.arch_hash != snapshot.meta.arch_hash)
    throw ConfigError("apply_mask: arch hash mismatch (mask " + mask.arch_hash +
                      ", snapshot " + snapshot.meta.arch_hash + ")");
  WeightSnapshot out = snapshot;
  for (const Mask::Layer& l : mask.layers) {
    WeightSnapshot::Entry* e = out.find(l.name);
    if (!e || e->shape != l.shape)
      throw ConfigError("apply_mask: snapshot missing layer " + l.name);
    for (size_t i = 0; i < e->values.size(); ++i)
      if (!l.keep[i]) e->values[i] = 0.0f;
  }
  return out;
}

}  // namespace lth
