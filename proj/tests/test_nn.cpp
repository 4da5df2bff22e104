#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "lth/data.hpp"
#include "lth/model.hpp"

using namespace lth;

TEST_CASE("fc spec 784-256-256-10 builds 3 weight matrices and 3 biases") {
  const Model m(ArchSpec::fc(784, {256, 256}, 10));
  int weights = 0, biases = 0;
  for (const LayerInfo& li : m.layers()) {
    if (li.prunable)
      ++weights;
    else
      ++biases;
  }
  CHECK(weights == 3);
  CHECK(biases == 3);
  CHECK(m.layers()[0].shape == std::vector<int>{784, 256});
  CHECK(m.layers()[2].shape == std::vector<int>{256, 256});
  CHECK(m.layers()[4].shape == std::vector<int>{256, 10});
}

TEST_CASE("residual fc with 4 blocks has 4 skip additions") {
  // Stem maps the input to the block width; each of the 4 blocks carries
  // one identity shortcut.
  const ArchSpec spec = ArchSpec::fc(16, {64, 64, 64, 64, 64}, 10, true);
  const Model m(spec);
  CHECK(m.skip_add_count() == 4);

  const WeightSnapshot w = init_weights(m, InitSpec{InitScheme::kaiming_uniform, 1});
  Graph g;
  Tensor x = Tensor::zeros({2, 16});
  const int logits = m.forward(g, w, x);
  CHECK(g.value(logits).shape == std::vector<int>{2, 10});
}

TEST_CASE("residual fc rejects mismatched block widths") {
  CHECK_THROWS_AS(ArchSpec::fc(16, {64, 32}, 10, true), ConfigError);
}

TEST_CASE("width multiplier 2 doubles every conv channel count") {
  ArchSpec spec = ArchSpec::conv({3, 16, 16}, {8, 16}, 1, 10);
  ArchSpec wide = spec;
  wide.width_multiplier = 2.0;
  CHECK(wide.effective_hidden() == std::vector<int>{16, 32});
  const Model m(wide);
  CHECK(m.layers()[0].shape == std::vector<int>{16, 3, 3, 3});
}

TEST_CASE("same init seed twice is bit-identical, different seeds differ") {
  const Model m(ArchSpec::fc(784, {256, 256}, 10));
  const WeightSnapshot a = init_weights(m, InitSpec{InitScheme::kaiming_uniform, 1});
  const WeightSnapshot b = init_weights(m, InitSpec{InitScheme::kaiming_uniform, 1});
  const WeightSnapshot c = init_weights(m, InitSpec{InitScheme::kaiming_uniform, 2});
  int64_t diff = 0, total = 0;
  for (size_t e = 0; e < a.entries.size(); ++e) {
    CHECK(a.entries[e].values == b.entries[e].values);
    for (size_t i = 0; i < a.entries[e].values.size(); ++i) {
      ++total;
      if (a.entries[e].values[i] != c.entries[e].values[i]) ++diff;
    }
  }
  // Biases are zero under both seeds; all weights should differ.
  CHECK(static_cast<double>(diff) / static_cast<double>(total) >= 0.99);
}

TEST_CASE("kaiming-uniform bounds follow the fan-in") {
  const Model m(ArchSpec::fc(100, {50}, 10));
  const WeightSnapshot w = init_weights(m, InitSpec{InitScheme::kaiming_uniform, 3});
  const double bound = std::sqrt(6.0 / 100.0);
  const WeightSnapshot::Entry* fc1 = w.find("fc1.w");
  REQUIRE(fc1 != nullptr);
  double seen_max = 0.0;
  for (float v : fc1->values) {
    CHECK(std::fabs(v) <= bound);
    seen_max = std::max(seen_max, static_cast<double>(std::fabs(v)));
  }
  CHECK(seen_max > 0.8 * bound);  // the draw actually fills the range
}

TEST_CASE("kaiming-normal std tracks sqrt(2/fan_in)") {
  const Model m(ArchSpec::fc(200, {400}, 10));
  const WeightSnapshot w = init_weights(m, InitSpec{InitScheme::kaiming_normal, 11});
  const WeightSnapshot::Entry* fc1 = w.find("fc1.w");
  double sum = 0.0, sq = 0.0;
  for (float v : fc1->values) {
    sum += v;
    sq += static_cast<double>(v) * v;
  }
  const double n = static_cast<double>(fc1->values.size());
  const double var = sq / n - (sum / n) * (sum / n);
  CHECK(std::sqrt(var) == doctest::Approx(std::sqrt(2.0 / 200.0)).epsilon(0.05));
}

TEST_CASE("count_params matches the closed-form sums") {
  const ArchSpec spec = ArchSpec::fc(784, {256, 256}, 10);
  CHECK(count_params(spec, ParamScope::all) == 269322);
  CHECK(count_params(spec, ParamScope::prunable) == 268800);

  const ArchSpec tiny = ArchSpec::fc(10, {}, 10);
  CHECK(count_params(tiny, ParamScope::all) == 110);

  const Model m(spec);
  const WeightSnapshot w = init_weights(m, InitSpec{InitScheme::kaiming_uniform, 1});
  CHECK(count_params(w, ParamScope::all) == 269322);
  CHECK(count_params(w, ParamScope::prunable) == 268800);
}

TEST_CASE("residual and plain variants have identical parameter counts") {
  const ArchSpec plain = ArchSpec::fc(32, {64, 64, 64}, 10, false);
  const ArchSpec res = ArchSpec::fc(32, {64, 64, 64}, 10, true);
  CHECK(count_params(plain, ParamScope::all) == count_params(res, ParamScope::all));

  const ArchSpec cplain = ArchSpec::conv({3, 16, 16}, {8, 16}, 2, 10, false);
  const ArchSpec cres = ArchSpec::conv({3, 16, 16}, {8, 16}, 2, 10, true);
  CHECK(count_params(cplain, ParamScope::all) == count_params(cres, ParamScope::all));
}

TEST_CASE("small-dense search finds width 53 for the 45,246 target") {
  const ArchSpec spec = ArchSpec::fc(784, {256, 256}, 10);
  const ArchSpec sd = build_small_dense(spec, 45246, 0.02);
  CHECK(sd.effective_hidden() == std::vector<int>{53, 53});
  CHECK(sd.hidden == spec.hidden);
  CHECK(sd.kind == spec.kind);
  const int64_t params = count_params(sd, ParamScope::all);
  CHECK(params == 45007);  // 53^2 + 796*53 + 10
  CHECK(std::fabs(static_cast<double>(params) - 45246.0) / 45246.0 <= 0.02);
}

TEST_CASE("small-dense keeps depth and respects the tolerance") {
  const ArchSpec spec = ArchSpec::fc(784, {256, 256}, 10);
  for (int64_t target : {250000, 150000, 60000, 20000, 5000}) {
    const ArchSpec sd = build_small_dense(spec, target, 0.05);
    CHECK(sd.depth() == spec.depth());
    const double err = std::fabs(static_cast<double>(count_params(sd, ParamScope::all)) -
                                 static_cast<double>(target)) /
                       static_cast<double>(target);
    CHECK(err <= 0.05);
  }
}

TEST_CASE("small-dense identity and floor cases") {
  const ArchSpec spec = ArchSpec::fc(784, {256, 256}, 10);
  const int64_t full = count_params(spec, ParamScope::all);
  const ArchSpec same = build_small_dense(spec, full, 0.02);
  CHECK(count_params(same, ParamScope::all) == full);
  CHECK(same.width_multiplier == spec.width_multiplier);

  CHECK_THROWS_AS(build_small_dense(spec, 10, 0.02), ConfigError);
}

TEST_CASE("snapshots validate layer uniqueness and value counts") {
  WeightSnapshot w;
  w.entries.push_back({"a", {2, 2}, {1, 2, 3, 4}});
  w.entries.push_back({"a", {2}, {1, 2}});
  CHECK_THROWS_AS(w.validate(), ConfigError);

  WeightSnapshot v;
  v.entries.push_back({"a", {2, 2}, {1, 2, 3}});
  CHECK_THROWS_AS(v.validate(), ConfigError);
}

TEST_CASE("forward rejects snapshots from another architecture") {
  const Model m(ArchSpec::fc(4, {8}, 3));
  const Model other(ArchSpec::fc(4, {9}, 3));
  const WeightSnapshot w = init_weights(other, InitSpec{InitScheme::kaiming_uniform, 1});
  Graph g;
  Tensor x = Tensor::zeros({1, 4});
  CHECK_THROWS_AS(m.forward(g, w, x), ConfigError);
}

TEST_CASE("conv forward produces class logits") {
  const ArchSpec spec = ArchSpec::conv({3, 8, 8}, {4, 8}, 1, 5, true);
  const Model m(spec);
  const WeightSnapshot w = init_weights(m, InitSpec{InitScheme::kaiming_uniform, 4});
  Graph g;
  Tensor x = Tensor::zeros({2, 3, 8, 8});
  const int logits = m.forward(g, w, x);
  CHECK(g.value(logits).shape == std::vector<int>{2, 5});
}
