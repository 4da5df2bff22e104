#pragma once

#include <filesystem>
#include <string>

#include "lth/adjudicate.hpp"
#include "lth/protocol.hpp"

namespace lth {

// Run manifest: one JSON document holding the architecture, dataset,
// recipe (preset name plus overrides), sweep grid, thresholds, seeds and
// output directory. Unknown keys are rejected; preset expansion is echoed
// back by every subcommand.
struct Manifest {
  ExperimentConfig base;
  SweepGrid sweep;
  VerdictThresholds thresholds;
  std::filesystem::path out_dir = "out";
  std::string recipe_preset;  // empty when the recipe is fully custom
  bool assume_sufficient_epochs = false;
  bool save_trajectory = false;
};

Manifest load_manifest(const std::filesystem::path& path);

// Effective configuration after preset expansion, as a JSON document.
std::string manifest_echo(const Manifest& m);

// Parses an explicit accuracy table (published numbers) for adjudication:
// {"sparsity": s, "trained_full_T": bool,
//  "rows": [{"lr": x, "pre": a, "lt": b, "rr": c, "sdt": d}, ...]}
// with absent cells simply omitted.
AccuracyTable load_accuracy_table(const std::filesystem::path& path);

}  // namespace lth
