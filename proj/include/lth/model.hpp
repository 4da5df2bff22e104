#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "lth/tensor.hpp"

namespace lth {

enum class ArchKind : uint8_t { fc, conv };

// Declarative architecture description. Residual shortcuts are
// identity-only, so residual=true requires equal in/out widths on every
// block. width_multiplier rescales every hidden width / channel count.
struct ArchSpec {
  ArchKind kind = ArchKind::fc;
  std::vector<int> hidden;     // fc: hidden layer widths; conv: stage channels
  int blocks_per_stage = 1;    // conv only
  bool residual = false;
  double width_multiplier = 1.0;
  int num_classes = 0;
  std::vector<int> input_shape;  // fc: {features}; conv: {C,H,W}

  void validate() const;
  // Widths/channels after applying width_multiplier (floor at 1).
  std::vector<int> effective_hidden() const;
  int depth() const;  // number of weight layers
  std::string canonical() const;
  std::string arch_hash() const;

  static ArchSpec fc(int input_dim, std::vector<int> hidden, int num_classes,
                     bool residual = false);
  static ArchSpec conv(std::vector<int> input_chw, std::vector<int> stage_channels,
                       int blocks_per_stage, int num_classes, bool residual = false);
};

struct SnapshotMeta {
  std::string epoch_tag;  // "0", "8", "160", "final", ...
  uint64_t seed = 0;
  std::string arch_hash;
};

// Full parameter state of a model at a named epoch, layer-addressed.
struct WeightSnapshot {
  struct Entry {
    std::string name;
    std::vector<int> shape;
    std::vector<float> values;
  };
  std::vector<Entry> entries;
  SnapshotMeta meta;

  const Entry* find(const std::string& name) const;
  Entry* find(const std::string& name);
  int64_t total_values() const;
  void validate() const;
};

enum class InitScheme : uint8_t { kaiming_uniform, kaiming_normal };

struct InitSpec {
  InitScheme scheme = InitScheme::kaiming_uniform;
  uint64_t seed = 0;
};

enum class ParamScope : uint8_t { all, prunable };

struct LayerInfo {
  std::string name;
  std::vector<int> shape;
  bool prunable = false;  // weights yes, biases no
  int fan_in = 0;
};

struct LabeledBatch;  // data.hpp

// ----------------------------------------------------------------------
// Model: a forward-evaluable plan derived from an ArchSpec. The plan and
// the parameter list are deterministic functions of the spec; weights
// live in WeightSnapshots, never in the model.
// ----------------------------------------------------------------------
class Model {
 public:
  explicit Model(ArchSpec spec);

  const ArchSpec& spec() const { return spec_; }
  const std::vector<LayerInfo>& layers() const { return layers_; }
  const std::string& arch_hash() const { return arch_hash_; }
  int skip_add_count() const { return skip_adds_; }

  // Builds the forward computation for one batch; returns the logits node.
  // If leaf_ids is given it receives layer-name -> weight-leaf node id.
  int forward(Graph& g, const WeightSnapshot& weights, const Tensor& features,
              std::unordered_map<std::string, int>* leaf_ids = nullptr) const;

  // Mean cross-entropy evaluated entirely in double precision, off the
  // autodiff path. Feeds the finite-difference oracle, where float32
  // forward rounding would otherwise swamp the difference quotient.
  double reference_loss(const WeightSnapshot& weights, const LabeledBatch& batch) const;

 private:
  struct Step {  // one fc layer or one conv stage element
    enum class Kind : uint8_t { linear, conv, pool, global_pool, flatten } kind;
    std::string weight;  // parameter names, empty when unused
    std::string bias;
    bool relu_after = false;
    bool capture_skip = false;  // remember this step's input as shortcut source
    bool add_skip = false;      // add the remembered shortcut to this step's output
    int stride = 1;
    int pad = 0;
    int pool_k = 2;
  };

  void build_fc_plan();
  void build_conv_plan();
  void add_param(const std::string& name, std::vector<int> shape, bool prunable,
                 int fan_in);

  ArchSpec spec_;
  std::vector<Step> steps_;
  std::vector<LayerInfo> layers_;
  std::string arch_hash_;
  int skip_adds_ = 0;
};

WeightSnapshot init_weights(const Model& model, const InitSpec& init);

int64_t count_params(const ArchSpec& spec, ParamScope scope);
int64_t count_params(const WeightSnapshot& snapshot, ParamScope scope);

// Same depth and kind, width multiplier shrunk by integer width search so
// the total parameter count lands within `tolerance` of target_nonzero.
ArchSpec build_small_dense(const ArchSpec& spec, int64_t target_nonzero,
                           double tolerance);

// Mean cross-entropy and argmax accuracy of `weights` on one batch.
struct EvalResult {
  double loss = 0.0;
  double accuracy = 0.0;
};
EvalResult evaluate(const Model& model, const WeightSnapshot& weights,
                    const LabeledBatch& batch);

// Central finite differences of the batch loss w.r.t. every parameter.
// Test oracle; deliberately uses only the forward path.
WeightSnapshot finite_diff_grad(const Model& model, const WeightSnapshot& weights,
                                const LabeledBatch& batch, double step);

}  // namespace lth
