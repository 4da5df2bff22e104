#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lth/model.hpp"
#include "lth/prune.hpp"
#include "lth/store.hpp"

namespace lth {

// Accuracy-point thresholds for the five ticket conditions.
struct VerdictThresholds {
  double delta_similar = 0.5;  // "similar accuracy": within this many points
  double delta_gap = 0.5;      // "clear gap": at least this many points
  double s_min = 0.6;          // non-trivial sparsity floor
  double weak_band = 0.05;     // |R_p - p| band for the correlation classes

  // 10-class small images -> 0.5; 100/200 classes -> 1.0; 1000 -> 1.5.
  static VerdictThresholds for_dataset_class(int num_classes);
};

struct AccuracyCell {
  double mean = 0.0;
  double stddev = 0.0;
  int n = 0;
  bool present = false;
};

struct AccuracyRow {
  double lr = 0.0;
  AccuracyCell pre, lt, rr, sdt;
};

struct AccuracyTable {
  std::vector<AccuracyRow> rows;  // sorted by lr ascending
  double sparsity = 0.0;
  bool trained_full_T = false;

  void validate() const;
};

enum class QuantifierMode : uint8_t { independent, single_witness };

// The condition statements compare the candidate against RR "at any
// learning rate" and against the best small-dense run. The worked
// adjudications in the source material apply both baselines at the
// witness lr instead; that reading is the default, the literal
// max-over-lrs reading is available as `strict_global_baselines`.
struct VerdictOptions {
  QuantifierMode mode = QuantifierMode::independent;
  bool strict_global_baselines = false;
};

struct ConditionReport {
  bool evaluated = false;  // false when required rows are missing
  bool pass = false;
  std::optional<double> witness_lr;
  std::string detail;
};

struct ConditionsReport {
  ConditionReport c1, c2, c3, c4, c5;
  VerdictOptions options;
  VerdictThresholds thresholds;
  double sparsity = 0.0;
  // Summary facts for the report.
  std::optional<std::pair<double, double>> best_lt;   // (lr, acc)
  std::optional<std::pair<double, double>> best_pre;  // (lr, acc)
  std::optional<std::pair<double, double>> best_rr;
  std::optional<std::pair<double, double>> best_sdt;
  std::optional<double> lt_rr_gap_at_witness;
  bool best_lt_similar_to_best_pre = false;

  std::vector<bool> flags() const;  // {c1..c5} pass flags
};

// True iff candidate accuracy a is within delta of reference b or higher.
bool similar(double a, double b, double delta_similar);

ConditionsReport check_conditions(const AccuracyTable& table,
                                  const VerdictThresholds& thresholds,
                                  const VerdictOptions& options = {});

enum class TicketClass : uint8_t { jackpot, secondary, none };

std::string ticket_class_name(TicketClass c);

// Pure function of the five condition flags.
TicketClass classify(bool c1, bool c2, bool c3, bool c4, bool c5);

struct Verdict {
  ConditionsReport report;
  TicketClass classification = TicketClass::none;
};

Verdict classify(const ConditionsReport& report);

// ----------------------------------------------------------------------
// Correlation indicator
// ----------------------------------------------------------------------

struct CorrelationReport {
  double p = 0.0;
  double r_p = 0.0;
  enum class Class : uint8_t { weak, positive, negative } cls = Class::weak;
  struct LayerOverlap {
    std::string name;
    int64_t candidates;    // N_l (remaining under the mask when given)
    int64_t top_size;      // ceil(p * N_l)
    int64_t intersection;
  };
  std::vector<LayerOverlap> layers;
};

// Overlap ratio of the per-layer top-p*100% magnitude index sets of two
// weight states. Only prunable layers participate; with a mask, both
// snapshots must satisfy it and only kept positions are ranked.
CorrelationReport correlation_indicator(const WeightSnapshot& theta,
                                        const WeightSnapshot& theta_prime, double p,
                                        const Mask* mask = nullptr,
                                        double weak_band = 0.05);

// ----------------------------------------------------------------------
// Log-driven adjudication
// ----------------------------------------------------------------------

struct AdjudicateFilter {
  double sparsity = 0.0;
  std::string method = "imp";          // imp | omp
  std::string subnet_protocol = "lt";  // lt | wr (rewinding conditions)
  std::optional<double> pretrain_lr;   // decoupled tables: fix the pretrain lr
  bool trained_full_T = false;         // config attestation for condition (1)
};

// Builds the per-lr accuracy table from final test rows. Log accuracies
// are fractions; the table is in accuracy points (0-100) to match the
// thresholds.
AccuracyTable assemble_table(const std::vector<ResultRecord>& records,
                             const AdjudicateFilter& filter);

struct AdjudicationResult {
  Verdict verdict;
  AccuracyTable table;
  std::string text;  // human-readable report
};

AdjudicationResult adjudicate_run(const std::vector<ResultRecord>& records,
                                  const AdjudicateFilter& filter,
                                  const VerdictThresholds& thresholds,
                                  const VerdictOptions& options = {});

std::string render_report(const AccuracyTable& table, const Verdict& verdict);

}  // namespace lth
