#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lth/tensor.hpp"

namespace lth {

enum class Split : uint8_t { train, test };

struct Dataset {
  std::vector<int> sample_shape;
  std::vector<float> samples;  // n * prod(sample_shape), row-major
  std::vector<int> labels;
  Split split = Split::train;
  int num_classes = 0;

  int64_t size() const { return static_cast<int64_t>(labels.size()); }
  int64_t sample_numel() const { return shape_numel(sample_shape); }
  // Copies one sample out (tests and inspection).
  std::vector<float> sample(int64_t i) const;
};

struct LabeledBatch {
  Tensor features;  // batch-major
  std::vector<int> labels;
};

enum class SyntheticKind : uint8_t { blobs, spirals };

struct SyntheticData {
  Dataset train;
  Dataset test;
};

// Deterministic 2-D classification sets. Blobs with noise 0 are linearly
// separable by construction; spirals interleave one arm per class.
// Train/test are drawn from independent seed streams.
SyntheticData load_synthetic(SyntheticKind kind, int64_t n_train, int64_t n_test,
                             int num_classes, double noise, uint64_t seed);

// IDX container (big-endian magic + dims, then raw unsigned bytes).
// Pixels are scaled to [0,1].
Dataset load_idx(const std::string& images_path, const std::string& labels_path,
                 Split split = Split::train);

enum class CifarLayout : uint8_t { detect, classes10, classes100 };

// Fixed-record CIFAR binary: 3073-byte records (label + 3x32x32) for the
// 10-class layout, 3074 (coarse+fine label) for the 100-class one; the
// fine label is kept. Channel-major pixels scaled to [0,1].
Dataset load_cifar_binary(const std::string& path, Split split,
                          CifarLayout layout = CifarLayout::detect);

enum class Augment : uint8_t { none, crop_flip };

// Seeded per-epoch batch stream: one full permutation per epoch, final
// partial batch kept. crop_flip = pad-4 random crop + horizontal flip.
class BatchStream {
 public:
  BatchStream(const Dataset& data, int batch_size, uint64_t epoch_seed,
              Augment augment = Augment::none);

  std::optional<LabeledBatch> next();
  int64_t batch_count() const;

 private:
  const Dataset& data_;
  int batch_size_;
  Augment augment_;
  Rng rng_;
  std::vector<int64_t> order_;
  int64_t cursor_ = 0;
};

BatchStream batches(const Dataset& data, int batch_size, uint64_t epoch_seed,
                    Augment augment = Augment::none);

// Assembles samples [first, first+count) of the identity order into a
// batch (evaluation path; no shuffle, no augmentation).
LabeledBatch take_batch(const Dataset& data, int64_t first, int64_t count);

}  // namespace lth
