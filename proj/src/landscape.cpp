#include "lth/landscape.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace lth {

std::vector<float> flatten_snapshot(const WeightSnapshot& snapshot) {
  std::vector<float> out;
  out.reserve(static_cast<size_t>(snapshot.total_values()));
  for (const WeightSnapshot::Entry& e : snapshot.entries)
    out.insert(out.end(), e.values.begin(), e.values.end());
  return out;
}

namespace {

// Cyclic Jacobi eigensolver for small symmetric matrices; plenty for the
// checkpoint Gram matrix (k x k with k = number of checkpoints).
void jacobi_eigen(std::vector<double>& a, int n, std::vector<double>& eigvec,
                  std::vector<double>& eigval) {
  eigvec.assign(static_cast<size_t>(n) * n, 0.0);
  for (int i = 0; i < n; ++i) eigvec[static_cast<size_t>(i) * n + i] = 1.0;
  for (int sweep = 0; sweep < 64; ++sweep) {
    double off = 0.0;
    for (int p = 0; p < n; ++p)
      for (int q = p + 1; q < n; ++q) off += std::fabs(a[static_cast<size_t>(p) * n + q]);
    if (off < 1e-14) break;
    for (int p = 0; p < n; ++p)
      for (int q = p + 1; q < n; ++q) {
        const double apq = a[static_cast<size_t>(p) * n + q];
        if (std::fabs(apq) < 1e-18) continue;
        const double app = a[static_cast<size_t>(p) * n + p];
        const double aqq = a[static_cast<size_t>(q) * n + q];
        const double theta = (aqq - app) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (int k = 0; k < n; ++k) {
          const double akp = a[static_cast<size_t>(k) * n + p];
          const double akq = a[static_cast<size_t>(k) * n + q];
          a[static_cast<size_t>(k) * n + p] = c * akp - s * akq;
          a[static_cast<size_t>(k) * n + q] = s * akp + c * akq;
        }
        for (int k = 0; k < n; ++k) {
          const double apk = a[static_cast<size_t>(p) * n + k];
          const double aqk = a[static_cast<size_t>(q) * n + k];
          a[static_cast<size_t>(p) * n + k] = c * apk - s * aqk;
          a[static_cast<size_t>(q) * n + k] = s * apk + c * aqk;
        }
        for (int k = 0; k < n; ++k) {
          const double vkp = eigvec[static_cast<size_t>(k) * n + p];
          const double vkq = eigvec[static_cast<size_t>(k) * n + q];
          eigvec[static_cast<size_t>(k) * n + p] = c * vkp - s * vkq;
          eigvec[static_cast<size_t>(k) * n + q] = s * vkp + c * vkq;
        }
      }
  }
  eigval.resize(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) eigval[static_cast<size_t>(i)] = a[static_cast<size_t>(i) * n + i];
}

double dot64(const std::vector<float>& a, const std::vector<float>& b) {
  double acc = 0.0;
  for (size_t i = 0; i < a.size(); ++i)
    acc += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  return acc;
}

}  // namespace

TrajectoryDirections pca_directions(const std::vector<WeightSnapshot>& checkpoints) {
  if (checkpoints.size() < 3)
    throw ArgumentError("pca_directions: need at least 3 checkpoints, got " +
                        std::to_string(checkpoints.size()));
  const int k = static_cast<int>(checkpoints.size());
  const std::vector<float> center = flatten_snapshot(checkpoints.back());

  // Row i = checkpoint i minus the final checkpoint.
  std::vector<std::vector<float>> rows(static_cast<size_t>(k));
  for (int i = 0; i < k; ++i) {
    rows[static_cast<size_t>(i)] = flatten_snapshot(checkpoints[static_cast<size_t>(i)]);
    if (rows[static_cast<size_t>(i)].size() != center.size())
      throw ArgumentError("pca_directions: checkpoints have mismatched sizes");
    for (size_t j = 0; j < center.size(); ++j)
      rows[static_cast<size_t>(i)][j] -= center[j];
  }

  // Gram trick: eigenvectors of M M^T (k x k) give the principal
  // directions as M^T u without forming the parameter-space covariance.
  std::vector<double> gram(static_cast<size_t>(k) * k, 0.0);
  for (int i = 0; i < k; ++i)
    for (int j = i; j < k; ++j) {
      const double g = dot64(rows[static_cast<size_t>(i)], rows[static_cast<size_t>(j)]);
      gram[static_cast<size_t>(i) * k + j] = g;
      gram[static_cast<size_t>(j) * k + i] = g;
    }

  std::vector<double> vecs, vals;
  jacobi_eigen(gram, k, vecs, vals);
  std::vector<int> order(static_cast<size_t>(k));
  for (int i = 0; i < k; ++i) order[static_cast<size_t>(i)] = i;
  std::sort(order.begin(), order.end(),
            [&](int x, int y) { return vals[static_cast<size_t>(x)] > vals[static_cast<size_t>(y)]; });

  double total = 0.0;
  for (double v : vals) total += std::max(0.0, v);
  const double l1 = std::max(0.0, vals[static_cast<size_t>(order[0])]);
  const double l2 = std::max(0.0, vals[static_cast<size_t>(order[1])]);
  if (l2 <= total * 1e-12 || l2 <= 0.0)
    throw NumericError("pca_directions: trajectory is degenerate (rank < 2)");

  auto dir_from = [&](int col) {
    std::vector<float> d(center.size(), 0.0f);
    std::vector<double> acc(center.size(), 0.0);
    for (int i = 0; i < k; ++i) {
      const double u = vecs[static_cast<size_t>(i) * k + col];
      const std::vector<float>& row = rows[static_cast<size_t>(i)];
      for (size_t j = 0; j < acc.size(); ++j) acc[j] += u * static_cast<double>(row[j]);
    }
    double norm = 0.0;
    for (double v : acc) norm += v * v;
    norm = std::sqrt(norm);
    if (norm == 0.0) throw NumericError("pca_directions: zero principal direction");
    for (size_t j = 0; j < acc.size(); ++j) d[j] = static_cast<float>(acc[j] / norm);
    return d;
  };

  TrajectoryDirections out;
  out.d1 = dir_from(order[0]);
  out.d2 = dir_from(order[1]);
  out.variance_d1 = total > 0.0 ? l1 / total : 0.0;
  out.variance_d2 = total > 0.0 ? l2 / total : 0.0;

  // Re-orthogonalize d2 against d1 (Gram-Schmidt) to hold the 1e-6 bound.
  const double d12 = dot64(out.d1, out.d2);
  double norm = 0.0;
  for (size_t j = 0; j < out.d2.size(); ++j) {
    const double v = static_cast<double>(out.d2[j]) - d12 * static_cast<double>(out.d1[j]);
    out.d2[j] = static_cast<float>(v);
    norm += v * v;
  }
  norm = std::sqrt(norm);
  if (norm == 0.0) throw NumericError("pca_directions: collinear principal directions");
  for (float& v : out.d2) v = static_cast<float>(v / norm);
  return out;
}

LossGrid loss_grid(const Model& model, const WeightSnapshot& center,
                   const std::vector<float>& d1, const std::vector<float>& d2,
                   double span, int n, const LabeledBatch& batch) {
  if (n < 3 || n % 2 == 0)
    throw ArgumentError("loss_grid: n must be odd and >= 3 so the center is a node");
  if (span < 0.0) throw ArgumentError("loss_grid: span must be >= 0");
  const std::vector<float> flat_center = flatten_snapshot(center);
  if (d1.size() != flat_center.size() || d2.size() != flat_center.size())
    throw ArgumentError("loss_grid: direction size does not match the snapshot");

  LossGrid grid;
  grid.n = n;
  grid.span = span;
  grid.alpha.resize(static_cast<size_t>(n));
  grid.beta.resize(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    // (2i - (n-1)) keeps the middle node at exactly 0.
    const double frac = static_cast<double>(2 * i - (n - 1)) / static_cast<double>(n - 1);
    grid.alpha[static_cast<size_t>(i)] = span * frac;
    grid.beta[static_cast<size_t>(i)] = span * frac;
  }
  grid.loss.assign(static_cast<size_t>(n) * n, 0.0);
  grid.valid.assign(static_cast<size_t>(n) * n, 1);

  WeightSnapshot probe = center;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const double a = grid.alpha[static_cast<size_t>(i)];
      const double b = grid.beta[static_cast<size_t>(j)];
      size_t off = 0;
      for (size_t e = 0; e < probe.entries.size(); ++e) {
        std::vector<float>& vals = probe.entries[e].values;
        const std::vector<float>& cv = center.entries[e].values;
        for (size_t v = 0; v < vals.size(); ++v, ++off)
          vals[v] = static_cast<float>(cv[v] + a * d1[off] + b * d2[off]);
      }
      try {
        grid.loss[static_cast<size_t>(i) * n + j] = evaluate(model, probe, batch).loss;
      } catch (const NumericError&) {
        grid.loss[static_cast<size_t>(i) * n + j] = std::nan("");
        grid.valid[static_cast<size_t>(i) * n + j] = 0;
      }
    }
  return grid;
}

std::vector<ProjectedPoint> project_trajectory(
    const std::vector<WeightSnapshot>& checkpoints, const std::vector<float>& d1,
    const std::vector<float>& d2, const WeightSnapshot& center) {
  const std::vector<float> flat_center = flatten_snapshot(center);
  if (d1.size() != flat_center.size() || d2.size() != flat_center.size())
    throw ArgumentError("project_trajectory: direction size mismatch");
  std::vector<ProjectedPoint> out;
  out.reserve(checkpoints.size());
  for (size_t c = 0; c < checkpoints.size(); ++c) {
    std::vector<float> delta = flatten_snapshot(checkpoints[c]);
    if (delta.size() != flat_center.size())
      throw ArgumentError("project_trajectory: checkpoint size mismatch");
    for (size_t j = 0; j < delta.size(); ++j) delta[j] -= flat_center[j];
    ProjectedPoint p;
    p.alpha = dot64(delta, d1);
    p.beta = dot64(delta, d2);
    double norm2 = 0.0;
    for (float v : delta) norm2 += static_cast<double>(v) * static_cast<double>(v);
    const double plane2 = p.alpha * p.alpha + p.beta * p.beta;
    p.residual = std::sqrt(std::max(0.0, norm2 - plane2));
    p.epoch = static_cast<int>(c);
    out.push_back(p);
  }
  return out;
}

namespace {

void write_csv(const std::filesystem::path& path, const std::string& body) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw FormatError("cannot write " + path.string());
  out << body;
}

}  // namespace

void write_grid_csv(const std::filesystem::path& path, const LossGrid& grid) {
  std::string body = "alpha,beta,loss\n";
  char line[128];
  for (int i = 0; i < grid.n; ++i)
    for (int j = 0; j < grid.n; ++j) {
      const size_t idx = static_cast<size_t>(i) * grid.n + j;
      std::snprintf(line, sizeof(line), "%.9g,%.9g,%.9g\n",
                    grid.alpha[static_cast<size_t>(i)], grid.beta[static_cast<size_t>(j)],
                    grid.valid[idx] ? grid.loss[idx] : std::nan(""));
      body += line;
    }
  write_csv(path, body);
}

void write_trajectory_csv(const std::filesystem::path& path,
                          const std::vector<ProjectedPoint>& points) {
  std::string body = "alpha,beta,epoch\n";
  char line[128];
  for (const ProjectedPoint& p : points) {
    std::snprintf(line, sizeof(line), "%.9g,%.9g,%d\n", p.alpha, p.beta, p.epoch);
    body += line;
  }
  write_csv(path, body);
}

}  // namespace lth
