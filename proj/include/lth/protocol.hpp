#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "lth/data.hpp"
#include "lth/model.hpp"
#include "lth/optim.hpp"
#include "lth/prune.hpp"
#include "lth/store.hpp"

namespace lth {

enum class Protocol : uint8_t { pretrain, lt, rr, wr, sdt };
enum class PruneMethod : uint8_t { omp, imp };
enum class InitKind : uint8_t { lottery, random_reinit, rewind, small_dense };

std::string protocol_name(Protocol p, PruneMethod m);  // "lt-imp", "sdt", ...

// Dataset source description; serialized into the manifest.
struct DatasetSpec {
  enum class Kind : uint8_t { synthetic, idx, cifar } kind = Kind::synthetic;
  // synthetic
  SyntheticKind synthetic_kind = SyntheticKind::spirals;
  int64_t n_train = 512;
  int64_t n_test = 256;
  int num_classes = 2;
  double noise = 0.1;
  // idx
  std::string train_images, train_labels, test_images, test_labels;
  // cifar
  std::string cifar_train, cifar_test;
  CifarLayout cifar_layout = CifarLayout::detect;

  Augment augment = Augment::none;

  std::string canonical() const;
};

struct LoadedData {
  Dataset train;
  Dataset test;
};
LoadedData load_dataset(const DatasetSpec& spec, uint64_t data_seed);

struct SeedPack {
  uint64_t theta0 = 1;
  uint64_t theta0_prime = 2;
  uint64_t data = 3;
};

struct ExperimentConfig {
  ArchSpec arch;
  DatasetSpec dataset;
  TrainRecipe recipe;
  Protocol protocol = Protocol::pretrain;
  PruneMethod method = PruneMethod::imp;
  double target_sparsity = 0.0;
  int rewind_epoch = 0;  // t; 0 < t < T required for wr
  double pretrain_lr = 0.1;
  double subnet_lr = 0.1;
  SeedPack seeds;
  int replicate = 0;
  double sdt_tolerance = 0.02;

  void validate() const;
  std::string canonical() const;
  std::string config_hash() const;
  std::string run_id() const;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  double lr = 0.0;
};

struct RunRecord {
  std::string run_id;
  std::string config_hash;
  std::string protocol;
  std::vector<EpochRecord> epochs;
  double final_test_accuracy = 0.0;
  double final_test_loss = 0.0;
  std::vector<std::string> checkpoints;
  bool failed = false;
  std::string fail_reason;
};

// Output directory handle. Snapshot/mask writes are single-owner; the
// results log serializes appends internally.
struct Workspace {
  std::filesystem::path root;

  explicit Workspace(std::filesystem::path r) : root(std::move(r)) {}
  std::filesystem::path snapshot_path(const std::string& run_id,
                                      const std::string& tag) const;
  std::filesystem::path mask_path(const std::string& base,
                                  const std::string& tag) const;
  std::filesystem::path results_path() const { return root / "results.jsonl"; }
  std::filesystem::path trajectory_dir(const std::string& run_id) const;
};

struct PretrainResult {
  RunRecord record;
  WeightSnapshot theta0;
  WeightSnapshot theta_t;
  WeightSnapshot theta_T;
};

// Trains f(x; theta0) for T epochs; snapshots at epochs {0, t, T}.
// save_trajectory additionally writes a snapshot at every epoch end.
PretrainResult run_pretrain(const ExperimentConfig& cfg, const LoadedData& data,
                            Workspace* ws = nullptr, bool save_trajectory = false);

struct ImpChainResult {
  std::vector<Mask> masks;  // m_1 .. m_k, nested
  std::vector<RunRecord> records;
  int completed_iterations = 0;
};

// Full IMP loop: every iteration restarts from the same theta0, trains the
// masked subnetwork for the full T epochs, then prunes 20% of what is left.
ImpChainResult run_imp_chain(const ExperimentConfig& cfg, const LoadedData& data,
                             const WeightSnapshot& theta0, int target_k,
                             Workspace* ws = nullptr,
                             PruneScope scope = PruneScope::global);

// Number of IMP iterations whose sparsity 1-0.8^k best matches s.
int imp_iterations_for(double sparsity);

struct SubnetArtifacts {
  const WeightSnapshot* theta0 = nullptr;       // lottery
  const WeightSnapshot* theta0_prime = nullptr; // random reinit
  const WeightSnapshot* theta_t = nullptr;      // rewind
};

RunRecord run_subnet(const ExperimentConfig& cfg, const LoadedData& data,
                     const Mask* mask, InitKind init, const SubnetArtifacts& art,
                     Workspace* ws = nullptr, bool save_trajectory = false);

// ----------------------------------------------------------------------
// Sweep driver
// ----------------------------------------------------------------------

struct SweepGrid {
  std::vector<std::string> protocols;  // protocol_name strings, "pretrain" implied
  std::vector<double> pretrain_lrs;
  std::vector<double> subnet_lrs;      // empty = coupled (subnet lr = pretrain lr)
  std::vector<double> sparsities;
  int replicates = 1;
  int jobs = 1;
  bool dedup = true;
  PruneScope scope = PruneScope::global;
};

struct SweepCell {
  Protocol protocol;
  PruneMethod method;
  double pretrain_lr;
  double subnet_lr;
  double sparsity;
  int replicate;
};

struct SweepPlan {
  std::vector<SweepCell> cells;
  int unique_pretrains = 0;  // after dedup
  int naive_pretrains = 0;   // one per (pretrain_lr, replicate)
};

SweepPlan plan_sweep(const SweepGrid& grid);

// Executes the whole grid: pretrains and mask chains are shared across
// cells (one pretrain per pretrain_lr, one chain per pretrain x method),
// every cell appends its final accuracies to the results log, failures are
// recorded and skipped. Independent cells may run on `jobs` threads;
// output is independent of execution order.
std::vector<ResultRecord> run_sweep(const ExperimentConfig& base, const SweepGrid& grid,
                                    Workspace& ws);

}  // namespace lth
