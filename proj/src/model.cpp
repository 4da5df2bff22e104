#include "lth/model.hpp"

#include <algorithm>
#include <cmath>

#include "lth/data.hpp"

namespace lth {

void ArchSpec::validate() const {
  if (num_classes < 2) throw ConfigError("arch: num_classes must be >= 2");
  if (width_multiplier <= 0.0) throw ConfigError("arch: width_multiplier must be > 0");
  if (kind == ArchKind::fc) {
    if (input_shape.size() != 1 || input_shape[0] < 1)
      throw ConfigError("arch: fc input_shape must be {features}");
    for (int w : hidden)
      if (w < 1) throw ConfigError("arch: hidden widths must be >= 1");
    if (residual) {
      const std::vector<int> eff = effective_hidden();
      for (size_t i = 1; i < eff.size(); ++i)
        if (eff[i] != eff[i - 1])
          throw ConfigError(
              "arch: residual fc requires matching widths per block (got " +
              std::to_string(eff[i - 1]) + " -> " + std::to_string(eff[i]) + ")");
    }
  } else {
    if (input_shape.size() != 3 || input_shape[0] < 1 || input_shape[1] < 1 ||
        input_shape[2] < 1)
      throw ConfigError("arch: conv input_shape must be {C,H,W}");
    if (input_shape[1] != input_shape[2])
      throw ConfigError("arch: conv inputs must be square (global pooling)");
    if (hidden.empty()) throw ConfigError("arch: conv needs stage channels");
    if (blocks_per_stage < 0) throw ConfigError("arch: blocks_per_stage must be >= 0");
    for (int c : hidden)
      if (c < 1) throw ConfigError("arch: stage channels must be >= 1");
  }
  if (depth() < 1) throw ConfigError("arch: depth must be >= 1");
}

std::vector<int> ArchSpec::effective_hidden() const {
  std::vector<int> out;
  out.reserve(hidden.size());
  for (int w : hidden) {
    const long long scaled = std::llround(static_cast<double>(w) * width_multiplier);
    out.push_back(static_cast<int>(std::max(1LL, scaled)));
  }
  return out;
}

int ArchSpec::depth() const {
  if (kind == ArchKind::fc) return static_cast<int>(hidden.size()) + 1;
  // stem + per-stage transitions + two convs per block + classifier
  const int stages = static_cast<int>(hidden.size());
  return 1 + (stages - 1) + stages * blocks_per_stage * 2 + 1;
}

std::string ArchSpec::canonical() const {
  std::string s = kind == ArchKind::fc ? "fc|" : "conv|";
  s += "in=";
  for (size_t i = 0; i < input_shape.size(); ++i)
    s += (i ? "x" : "") + std::to_string(input_shape[i]);
  s += "|hidden=";
  const std::vector<int> eff = effective_hidden();
  for (size_t i = 0; i < eff.size(); ++i) s += (i ? "," : "") + std::to_string(eff[i]);
  s += "|blocks=" + std::to_string(kind == ArchKind::conv ? blocks_per_stage : 0);
  s += residual ? "|res=1" : "|res=0";
  s += "|classes=" + std::to_string(num_classes);
  return s;
}

std::string ArchSpec::arch_hash() const { return hex64(fnv1a64(canonical())); }

ArchSpec ArchSpec::fc(int input_dim, std::vector<int> hidden, int num_classes,
                      bool residual) {
  ArchSpec s;
  s.kind = ArchKind::fc;
  s.input_shape = {input_dim};
  s.hidden = std::move(hidden);
  s.num_classes = num_classes;
  s.residual = residual;
  s.validate();
  return s;
}

ArchSpec ArchSpec::conv(std::vector<int> input_chw, std::vector<int> stage_channels,
                        int blocks_per_stage, int num_classes, bool residual) {
  ArchSpec s;
  s.kind = ArchKind::conv;
  s.input_shape = std::move(input_chw);
  s.hidden = std::move(stage_channels);
  s.blocks_per_stage = blocks_per_stage;
  s.num_classes = num_classes;
  s.residual = residual;
  s.validate();
  return s;
}

// ----------------------------------------------------------------------
// WeightSnapshot
// ----------------------------------------------------------------------

const WeightSnapshot::Entry* WeightSnapshot::find(const std::string& name) const {
  for (const Entry& e : entries)
    if (e.name == name) return &e;
  return nullptr;
}

WeightSnapshot::Entry* WeightSnapshot::find(const std::string& name) {
  for (Entry& e : entries)
    if (e.name == name) return &e;
  return nullptr;
}

int64_t WeightSnapshot::total_values() const {
  int64_t n = 0;
  for (const Entry& e : entries) n += static_cast<int64_t>(e.values.size());
  return n;
}

void WeightSnapshot::validate() const {
  for (const Entry& e : entries) {
    if (static_cast<int64_t>(e.values.size()) != shape_numel(e.shape))
      throw ConfigError("snapshot layer " + e.name + " value count mismatch");
    int dup = 0;
    for (const Entry& o : entries)
      if (o.name == e.name) ++dup;
    if (dup != 1) throw ConfigError("snapshot layer names must be unique: " + e.name);
  }
}

// ----------------------------------------------------------------------
// Model plan
// ----------------------------------------------------------------------

Model::Model(ArchSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  arch_hash_ = spec_.arch_hash();
  if (spec_.kind == ArchKind::fc)
    build_fc_plan();
  else
    build_conv_plan();
}

void Model::add_param(const std::string& name, std::vector<int> shape, bool prunable,
                      int fan_in) {
  layers_.push_back(LayerInfo{name, std::move(shape), prunable, fan_in});
}

void Model::build_fc_plan() {
  const std::vector<int> widths = spec_.effective_hidden();
  int in = spec_.input_shape[0];
  for (size_t i = 0; i < widths.size(); ++i) {
    const int out = widths[i];
    const std::string base = "fc" + std::to_string(i + 1);
    add_param(base + ".w", {in, out}, true, in);
    add_param(base + ".b", {out}, false, in);
    Step st;
    st.kind = Step::Kind::linear;
    st.weight = base + ".w";
    st.bias = base + ".b";
    st.relu_after = true;
    st.capture_skip = st.add_skip = spec_.residual && in == out;
    if (st.add_skip) ++skip_adds_;
    steps_.push_back(st);
    in = out;
  }
  add_param("head.w", {in, spec_.num_classes}, true, in);
  add_param("head.b", {spec_.num_classes}, false, in);
  Step st;
  st.kind = Step::Kind::linear;
  st.weight = "head.w";
  st.bias = "head.b";
  steps_.push_back(st);
}

void Model::build_conv_plan() {
  const std::vector<int> channels = spec_.effective_hidden();
  int in_c = spec_.input_shape[0];
  int hw = spec_.input_shape[1];
  auto conv_step = [&](const std::string& base, int out_c, bool relu, bool capture,
                       bool add_skip) {
    add_param(base + ".w", {out_c, in_c, 3, 3}, true, in_c * 9);
    add_param(base + ".b", {out_c}, false, in_c * 9);
    Step st;
    st.kind = Step::Kind::conv;
    st.weight = base + ".w";
    st.bias = base + ".b";
    st.relu_after = relu;
    st.capture_skip = capture;
    st.add_skip = add_skip;
    st.stride = 1;
    st.pad = 1;
    steps_.push_back(st);
    in_c = out_c;
  };
  for (size_t s = 0; s < channels.size(); ++s) {
    const std::string stage = "s" + std::to_string(s + 1);
    if (s > 0) {
      Step pool;
      pool.kind = Step::Kind::pool;
      pool.pool_k = 2;
      pool.stride = 2;
      steps_.push_back(pool);
      hw /= 2;
      if (hw < 1) throw ConfigError("arch: conv spatial size collapsed to zero");
    }
    conv_step(stage + ".stem", channels[s], true, false, false);
    for (int b = 0; b < spec_.blocks_per_stage; ++b) {
      // Standard two-conv block: out = relu(conv2(relu(conv1(in))) + in).
      const std::string blk = stage + ".b" + std::to_string(b + 1);
      conv_step(blk + ".c1", channels[s], true, spec_.residual, false);
      conv_step(blk + ".c2", channels[s], true, false, spec_.residual);
      if (spec_.residual) ++skip_adds_;
    }
  }
  Step gp;
  gp.kind = Step::Kind::global_pool;
  steps_.push_back(gp);
  Step fl;
  fl.kind = Step::Kind::flatten;
  steps_.push_back(fl);
  add_param("head.w", {in_c, spec_.num_classes}, true, in_c);
  add_param("head.b", {spec_.num_classes}, false, in_c);
  Step st;
  st.kind = Step::Kind::linear;
  st.weight = "head.w";
  st.bias = "head.b";
  steps_.push_back(st);
}

int Model::forward(Graph& g, const WeightSnapshot& weights, const Tensor& features,
                   std::unordered_map<std::string, int>* leaf_ids) const {
  if (!weights.meta.arch_hash.empty() && weights.meta.arch_hash != arch_hash_)
    throw ConfigError("snapshot arch hash " + weights.meta.arch_hash +
                      " does not match model " + arch_hash_);
  auto param_leaf = [&](const std::string& name) {
    const WeightSnapshot::Entry* e = weights.find(name);
    if (!e) throw ConfigError("snapshot missing layer " + name);
    const LayerInfo* info = nullptr;
    for (const LayerInfo& li : layers_)
      if (li.name == name) info = &li;
    if (info && info->shape != e->shape)
      throw ConfigError("snapshot layer " + name + " shape " + shape_str(e->shape) +
                        " does not match model " + shape_str(info->shape));
    const int id = g.leaf(Tensor::from_values(e->shape, e->values, true));
    if (leaf_ids) (*leaf_ids)[name] = id;
    return id;
  };

  int x = g.leaf(features);
  int skip_src = -1;
  for (const Step& st : steps_) {
    g.set_tag(st.weight.empty() ? "pool" : st.weight);
    if (st.capture_skip) skip_src = x;
    switch (st.kind) {
      case Step::Kind::linear: {
        x = g.matmul(x, param_leaf(st.weight));
        x = g.add_bias(x, param_leaf(st.bias));
        if (st.add_skip) {
          if (st.relu_after) x = g.relu(x);
          x = g.add(x, skip_src);
        } else if (st.relu_after) {
          x = g.relu(x);
        }
        break;
      }
      case Step::Kind::conv: {
        x = g.conv2d(x, param_leaf(st.weight), st.stride, st.pad);
        x = g.bias_channels(x, param_leaf(st.bias));
        if (st.add_skip) {
          x = g.add(x, skip_src);
          if (st.relu_after) x = g.relu(x);
        } else if (st.relu_after) {
          x = g.relu(x);
        }
        break;
      }
      case Step::Kind::pool:
        x = g.avg_pool(x, st.pool_k, st.stride);
        break;
      case Step::Kind::global_pool: {
        const Tensor& v = g.value(x);
        if (v.rank() != 4 || v.dim(2) != v.dim(3))
          throw ConfigError("global pool expects square feature maps");
        x = g.avg_pool(x, v.dim(2), v.dim(2));
        break;
      }
      case Step::Kind::flatten:
        x = g.flatten(x);
        break;
    }
  }
  g.set_tag("");
  return x;
}

// ----------------------------------------------------------------------
// Initialization and counting
// ----------------------------------------------------------------------

WeightSnapshot init_weights(const Model& model, const InitSpec& init) {
  WeightSnapshot snap;
  snap.meta.epoch_tag = "0";
  snap.meta.seed = init.seed;
  snap.meta.arch_hash = model.arch_hash();
  Rng rng(mix_seed(init.seed, "init"));
  for (const LayerInfo& li : model.layers()) {
    WeightSnapshot::Entry e;
    e.name = li.name;
    e.shape = li.shape;
    e.values.resize(static_cast<size_t>(shape_numel(li.shape)));
    if (li.prunable) {
      if (init.scheme == InitScheme::kaiming_uniform) {
        const double bound = std::sqrt(6.0 / li.fan_in);
        for (float& v : e.values) v = static_cast<float>(rng.uniform(-bound, bound));
      } else {
        const double stddev = std::sqrt(2.0 / li.fan_in);
        for (float& v : e.values) v = static_cast<float>(rng.normal() * stddev);
      }
    }  // biases stay zero
    snap.entries.push_back(std::move(e));
  }
  return snap;
}

int64_t count_params(const ArchSpec& spec, ParamScope scope) {
  const Model m(spec);
  int64_t n = 0;
  for (const LayerInfo& li : m.layers())
    if (scope == ParamScope::all || li.prunable) n += shape_numel(li.shape);
  return n;
}

int64_t count_params(const WeightSnapshot& snapshot, ParamScope scope) {
  int64_t n = 0;
  for (const WeightSnapshot::Entry& e : snapshot.entries) {
    const bool prunable = e.shape.size() >= 2;
    if (scope == ParamScope::all || prunable) n += static_cast<int64_t>(e.values.size());
  }
  return n;
}

ArchSpec build_small_dense(const ArchSpec& spec, int64_t target_nonzero,
                           double tolerance) {
  spec.validate();
  const int64_t floor_params =
      static_cast<int64_t>(spec.depth()) * spec.num_classes;
  if (target_nonzero < floor_params)
    throw ConfigError("small-dense target " + std::to_string(target_nonzero) +
                      " is below the feasibility floor depth*classes = " +
                      std::to_string(floor_params));

  const int64_t full = count_params(spec, ParamScope::all);
  if (target_nonzero >= full) return spec;
  if (spec.hidden.empty()) {
    if (static_cast<double>(full - target_nonzero) / target_nonzero <= tolerance)
      return spec;
    throw ConfigError("small-dense: spec has no hidden widths to shrink");
  }

  // The width axis is integral, so scan candidate multipliers that produce
  // distinct width tuples and keep the closest parameter count.
  const int max_w = *std::max_element(spec.hidden.begin(), spec.hidden.end());
  const double base_mult = spec.width_multiplier;
  ArchSpec best = spec;
  int64_t best_err = -1;
  const int grid = std::max(4 * max_w, 64);
  for (int i = 1; i <= grid; ++i) {
    ArchSpec cand = spec;
    cand.width_multiplier = base_mult * static_cast<double>(i) / grid;
    const int64_t n = count_params(cand, ParamScope::all);
    const int64_t err = std::llabs(n - target_nonzero);
    if (best_err < 0 || err < best_err) {
      best_err = err;
      best = cand;
    }
    if (n >= target_nonzero) break;  // counts only grow from here
  }
  const double rel_err =
      static_cast<double>(best_err) / static_cast<double>(target_nonzero);
  if (rel_err > tolerance)
    throw ConfigError("small-dense search cannot reach target " +
                      std::to_string(target_nonzero) + " within tolerance (best " +
                      std::to_string(count_params(best, ParamScope::all)) + ")");
  return best;
}

// ----------------------------------------------------------------------
// Evaluation
// ----------------------------------------------------------------------

double Model::reference_loss(const WeightSnapshot& weights,
                             const LabeledBatch& batch) const {
  using Vec = std::vector<double>;
  const int n = batch.features.dim(0);
  Vec x(batch.features.data.begin(), batch.features.data.end());
  std::vector<int> shape = batch.features.shape;
  Vec skip_src;

  const auto want = [&](const std::string& name) -> const WeightSnapshot::Entry& {
    const WeightSnapshot::Entry* e = weights.find(name);
    if (!e) throw ConfigError("snapshot missing layer " + name);
    return *e;
  };

  for (const Step& st : steps_) {
    if (st.capture_skip) skip_src = x;
    switch (st.kind) {
      case Step::Kind::linear: {
        const WeightSnapshot::Entry& w = want(st.weight);
        const WeightSnapshot::Entry& b = want(st.bias);
        const int in_dim = w.shape[0], out_dim = w.shape[1];
        Vec y(static_cast<size_t>(n) * out_dim);
        for (int r = 0; r < n; ++r)
          for (int c = 0; c < out_dim; ++c) {
            double acc = b.values[static_cast<size_t>(c)];
            for (int k = 0; k < in_dim; ++k)
              acc += x[static_cast<size_t>(r) * in_dim + k] *
                     static_cast<double>(w.values[static_cast<size_t>(k) * out_dim + c]);
            y[static_cast<size_t>(r) * out_dim + c] = acc;
          }
        if (st.add_skip) {
          for (double& v : y) v = v > 0.0 ? v : 0.0;
          for (size_t i = 0; i < y.size(); ++i) y[i] += skip_src[i];
        } else if (st.relu_after) {
          for (double& v : y) v = v > 0.0 ? v : 0.0;
        }
        x = std::move(y);
        shape = {n, out_dim};
        break;
      }
      case Step::Kind::conv: {
        const WeightSnapshot::Entry& w = want(st.weight);
        const WeightSnapshot::Entry& b = want(st.bias);
        const int IC = shape[1], H = shape[2], W = shape[3];
        const int OC = w.shape[0], KH = w.shape[2], KW = w.shape[3];
        const int OH = (H + 2 * st.pad - KH) / st.stride + 1;
        const int OW = (W + 2 * st.pad - KW) / st.stride + 1;
        Vec y(static_cast<size_t>(n) * OC * OH * OW);
        for (int img = 0; img < n; ++img)
          for (int oc = 0; oc < OC; ++oc)
            for (int oh = 0; oh < OH; ++oh)
              for (int ow = 0; ow < OW; ++ow) {
                double acc = b.values[static_cast<size_t>(oc)];
                for (int ic = 0; ic < IC; ++ic)
                  for (int kh = 0; kh < KH; ++kh) {
                    const int ih = oh * st.stride - st.pad + kh;
                    if (ih < 0 || ih >= H) continue;
                    for (int kw = 0; kw < KW; ++kw) {
                      const int iw = ow * st.stride - st.pad + kw;
                      if (iw < 0 || iw >= W) continue;
                      acc += x[((static_cast<size_t>(img) * IC + ic) * H + ih) * W + iw] *
                             static_cast<double>(
                                 w.values[((static_cast<size_t>(oc) * IC + ic) * KH + kh) *
                                              KW +
                                          kw]);
                    }
                  }
                y[((static_cast<size_t>(img) * OC + oc) * OH + oh) * OW + ow] = acc;
              }
        if (st.add_skip) {
          for (size_t i = 0; i < y.size(); ++i) y[i] += skip_src[i];
          if (st.relu_after)
            for (double& v : y) v = v > 0.0 ? v : 0.0;
        } else if (st.relu_after) {
          for (double& v : y) v = v > 0.0 ? v : 0.0;
        }
        x = std::move(y);
        shape = {n, OC, OH, OW};
        break;
      }
      case Step::Kind::pool:
      case Step::Kind::global_pool: {
        const int C = shape[1], H = shape[2], W = shape[3];
        const int k = st.kind == Step::Kind::global_pool ? H : st.pool_k;
        const int stride = st.kind == Step::Kind::global_pool ? H : st.stride;
        const int OH = (H - k) / stride + 1;
        const int OW = (W - k) / stride + 1;
        Vec y(static_cast<size_t>(n) * C * OH * OW);
        for (int img = 0; img < n; ++img)
          for (int c = 0; c < C; ++c)
            for (int oh = 0; oh < OH; ++oh)
              for (int ow = 0; ow < OW; ++ow) {
                double acc = 0.0;
                for (int kh = 0; kh < k; ++kh)
                  for (int kw = 0; kw < k; ++kw)
                    acc += x[((static_cast<size_t>(img) * C + c) * H + oh * stride + kh) *
                                 W +
                             ow * stride + kw];
                y[((static_cast<size_t>(img) * C + c) * OH + oh) * OW + ow] =
                    acc / (static_cast<double>(k) * k);
              }
        x = std::move(y);
        shape = {n, C, OH, OW};
        break;
      }
      case Step::Kind::flatten:
        shape = {n, static_cast<int>(x.size()) / n};
        break;
    }
  }

  const int classes = shape[1];
  double loss = 0.0;
  for (int r = 0; r < n; ++r) {
    double mx = x[static_cast<size_t>(r) * classes];
    for (int c = 1; c < classes; ++c)
      mx = std::max(mx, x[static_cast<size_t>(r) * classes + c]);
    double denom = 0.0;
    for (int c = 0; c < classes; ++c)
      denom += std::exp(x[static_cast<size_t>(r) * classes + c] - mx);
    loss += mx + std::log(denom) -
            x[static_cast<size_t>(r) * classes + batch.labels[static_cast<size_t>(r)]];
  }
  return loss / n;
}

EvalResult evaluate(const Model& model, const WeightSnapshot& weights,
                    const LabeledBatch& batch) {
  if (batch.labels.empty()) throw ArgumentError("evaluate: batch must be non-empty");
  Graph g;
  const int logits = model.forward(g, weights, batch.features);
  const int loss = g.softmax_cross_entropy(logits, batch.labels);
  EvalResult r;
  r.loss = static_cast<double>(g.value(loss).data[0]);
  r.accuracy = accuracy_of(g.value(logits), batch.labels);
  return r;
}

WeightSnapshot finite_diff_grad(const Model& model, const WeightSnapshot& weights,
                                const LabeledBatch& batch, double step) {
  if (step <= 0.0) throw ArgumentError("finite_diff_grad: step must be > 0");
  WeightSnapshot grad = weights;
  grad.meta.epoch_tag = "grad";
  WeightSnapshot probe = weights;
  for (size_t e = 0; e < weights.entries.size(); ++e) {
    for (size_t i = 0; i < weights.entries[e].values.size(); ++i) {
      const float orig = weights.entries[e].values[i];
      const float up_w = static_cast<float>(static_cast<double>(orig) + step);
      const float down_w = static_cast<float>(static_cast<double>(orig) - step);
      probe.entries[e].values[i] = up_w;
      const double up = model.reference_loss(probe, batch);
      probe.entries[e].values[i] = down_w;
      const double down = model.reference_loss(probe, batch);
      probe.entries[e].values[i] = orig;
      // Divide by the step the float32 weights actually realized.
      const double achieved = static_cast<double>(up_w) - static_cast<double>(down_w);
      grad.entries[e].values[i] = static_cast<float>((up - down) / achieved);
    }
  }
  return grad;
}

}  // namespace lth
