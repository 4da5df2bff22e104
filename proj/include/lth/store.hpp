#pragma once

#include <cstdint>
#include <filesystem>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "lth/model.hpp"
#include "lth/prune.hpp"

namespace lth {

// On-disk layouts (all header integers little-endian):
//
//   snapshot  "LTHS" | u16 version | u32 layer count |
//             per layer: u16 name len, name bytes, u8 rank, u32 dims...,
//             f32 values (row-major) |
//             u32 metadata len, metadata JSON (epoch, seed, arch_hash)
//
//   mask      "LTHM" | same header scheme | per layer the dims are followed
//             by bit-packed keep flags, LSB first, zero-padded per layer |
//             metadata JSON (sparsity, method, arch_hash)
//
// Readers validate magic, version and length arithmetic before allocating;
// round trips are bit-exact.

void write_snapshot(const std::filesystem::path& path, const WeightSnapshot& snapshot);
WeightSnapshot read_snapshot(const std::filesystem::path& path);

void write_mask(const std::filesystem::path& path, const Mask& mask);
Mask read_mask(const std::filesystem::path& path);

// One accuracy record, one JSON line. `epoch` empty means "final".
struct ResultRecord {
  std::string run_id;
  std::string protocol;  // pretrain | lt-imp | lt-omp | rr-imp | rr-omp |
                         // wr-imp | wr-omp | sdt
  double pretrain_lr = 0.0;
  double subnet_lr = 0.0;
  double sparsity = 0.0;
  uint64_t seed = 0;
  int replicate = 0;
  std::optional<int> epoch;
  std::string split;  // train | test
  double accuracy = 0.0;
  double loss = 0.0;
  std::string config_hash;

  std::string to_json() const;
  static ResultRecord from_json(const std::string& line);
};

// Append-only JSONL results log. Appends are serialized and rejected when
// the (run_id, replicate, epoch, split) key was already written.
class ResultsLog {
 public:
  explicit ResultsLog(std::filesystem::path path);

  void append(const ResultRecord& record);
  const std::filesystem::path& path() const { return path_; }

  static std::vector<ResultRecord> read_all(const std::filesystem::path& path);

 private:
  std::filesystem::path path_;
  std::mutex mutex_;
  std::set<std::string> seen_;
};

struct ReportFilter {
  std::optional<std::string> protocol;
  std::optional<double> sparsity;  // matched within 1e-9
  std::optional<double> pretrain_lr;
};

enum class ReportFormat : uint8_t { csv, json };

// Replicate-aggregated series: one row per (protocol, pretrain_lr,
// subnet_lr, sparsity) with mean/std of the final test accuracy, ordered
// by lr ascending then sparsity.
struct ReportRow {
  std::string protocol;
  double pretrain_lr;
  double subnet_lr;
  double sparsity;
  int replicates;
  double mean_accuracy;
  double std_accuracy;
  double mean_loss;
};

std::vector<ReportRow> aggregate_results(const std::vector<ResultRecord>& records,
                                         const ReportFilter& filter);
// Returns the emitted file path (report.csv or report.json under out_dir).
std::filesystem::path emit_report(const std::filesystem::path& log_path,
                                  const ReportFilter& filter, ReportFormat format,
                                  const std::filesystem::path& out_dir);

}  // namespace lth
