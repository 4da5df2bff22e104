#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "lth/data.hpp"
#include "lth/model.hpp"

namespace lth {

// First two principal directions of the checkpoint cloud, centered on the
// final checkpoint and orthonormalized.
struct TrajectoryDirections {
  std::vector<float> d1;
  std::vector<float> d2;
  double variance_d1 = 0.0;  // explained-variance fractions
  double variance_d2 = 0.0;
};

TrajectoryDirections pca_directions(const std::vector<WeightSnapshot>& checkpoints);

struct LossGrid {
  int n = 0;
  double span = 0.0;
  std::vector<double> alpha;   // n axis values, center exactly 0
  std::vector<double> beta;
  std::vector<double> loss;    // n*n, row-major in (i=alpha, j=beta)
  std::vector<uint8_t> valid;  // 0 where the evaluation was non-finite
};

// Loss surface on the 2-plane through `center` spanned by d1/d2, evaluated
// on one fixed batch. n must be odd so the center lands on a grid node;
// that node equals evaluate(model, center, batch) exactly.
LossGrid loss_grid(const Model& model, const WeightSnapshot& center,
                   const std::vector<float>& d1, const std::vector<float>& d2,
                   double span, int n, const LabeledBatch& batch);

struct ProjectedPoint {
  double alpha = 0.0;
  double beta = 0.0;
  double residual = 0.0;  // distance from the 2-plane
  int epoch = 0;
};

std::vector<ProjectedPoint> project_trajectory(
    const std::vector<WeightSnapshot>& checkpoints, const std::vector<float>& d1,
    const std::vector<float>& d2, const WeightSnapshot& center);

// CSV emission for external plotting: grid.csv (alpha,beta,loss) and
// trajectory.csv (alpha,beta,epoch).
void write_grid_csv(const std::filesystem::path& path, const LossGrid& grid);
void write_trajectory_csv(const std::filesystem::path& path,
                          const std::vector<ProjectedPoint>& points);

std::vector<float> flatten_snapshot(const WeightSnapshot& snapshot);

}  // namespace lth
