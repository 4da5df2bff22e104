#include "lth/data.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

namespace lth {

std::vector<float> Dataset::sample(int64_t i) const {
  const int64_t n = sample_numel();
  if (i < 0 || i >= size()) throw ArgumentError("dataset sample index out of range");
  return std::vector<float>(samples.begin() + i * n, samples.begin() + (i + 1) * n);
}

// ----------------------------------------------------------------------
// Synthetic sets
// ----------------------------------------------------------------------

namespace {

constexpr double kTau = 6.283185307179586476925286766559;

Dataset make_synthetic_split(SyntheticKind kind, int64_t n, int num_classes,
                             double noise, uint64_t seed, Split split) {
  Dataset d;
  d.split = split;
  d.num_classes = num_classes;
  d.sample_shape = {2};
  d.samples.resize(static_cast<size_t>(n) * 2);
  d.labels.resize(static_cast<size_t>(n));
  Rng rng(seed);
  for (int64_t i = 0; i < n; ++i) {
    const int c = static_cast<int>(i % num_classes);  // balanced within +-1
    double x = 0.0, y = 0.0;
    if (kind == SyntheticKind::blobs) {
      const double ang = kTau * c / num_classes;
      x = 5.0 * std::cos(ang) + noise * rng.normal();
      y = 5.0 * std::sin(ang) + noise * rng.normal();
    } else {
      // One spiral arm per class, radius growing with t.
      const double t = 0.15 + 0.85 * rng.uniform01();
      const double ang = kTau * c / num_classes + t * kTau * 0.75;
      const double r = 4.0 * t;
      x = r * std::cos(ang) + noise * rng.normal();
      y = r * std::sin(ang) + noise * rng.normal();
    }
    d.samples[static_cast<size_t>(i) * 2] = static_cast<float>(x);
    d.samples[static_cast<size_t>(i) * 2 + 1] = static_cast<float>(y);
    d.labels[static_cast<size_t>(i)] = c;
  }
  return d;
}

}  // namespace

SyntheticData load_synthetic(SyntheticKind kind, int64_t n_train, int64_t n_test,
                             int num_classes, double noise, uint64_t seed) {
  if (n_train <= 0 || n_test <= 0)
    throw ArgumentError("load_synthetic: n_train and n_test must be positive");
  if (num_classes < 2) throw ArgumentError("load_synthetic: need >= 2 classes");
  SyntheticData out;
  out.train = make_synthetic_split(kind, n_train, num_classes, noise,
                                   mix_seed(seed, "train"), Split::train);
  out.test = make_synthetic_split(kind, n_test, num_classes, noise,
                                  mix_seed(seed, "test"), Split::test);
  return out;
}

// ----------------------------------------------------------------------
// IDX container
// ----------------------------------------------------------------------

namespace {

std::vector<uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path);
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                             std::istreambuf_iterator<char>());
  return bytes;
}

uint32_t be32(const std::vector<uint8_t>& b, size_t off, const std::string& path) {
  if (off + 4 > b.size())
    throw FormatError(path + ": truncated at offset " + std::to_string(off) +
                      " (need 4 bytes)");
  return (static_cast<uint32_t>(b[off]) << 24) | (static_cast<uint32_t>(b[off + 1]) << 16) |
         (static_cast<uint32_t>(b[off + 2]) << 8) | static_cast<uint32_t>(b[off + 3]);
}

}  // namespace

Dataset load_idx(const std::string& images_path, const std::string& labels_path,
                 Split split) {
  const std::vector<uint8_t> img = read_file(images_path);
  const uint32_t img_magic = be32(img, 0, images_path);
  if (img_magic != 0x00000803u)
    throw FormatError(images_path + ": bad magic at offset 0 (expected 0x00000803, got 0x" +
                      hex64(img_magic).substr(8) + ")");
  const uint32_t n = be32(img, 4, images_path);
  const uint32_t rows = be32(img, 8, images_path);
  const uint32_t cols = be32(img, 12, images_path);
  const size_t expect = 16 + static_cast<size_t>(n) * rows * cols;
  if (img.size() != expect)
    throw FormatError(images_path + ": payload length mismatch, expected " +
                      std::to_string(expect) + " bytes, got " +
                      std::to_string(img.size()));

  const std::vector<uint8_t> lab = read_file(labels_path);
  const uint32_t lab_magic = be32(lab, 0, labels_path);
  if (lab_magic != 0x00000801u)
    throw FormatError(labels_path + ": bad magic at offset 0 (expected 0x00000801, got 0x" +
                      hex64(lab_magic).substr(8) + ")");
  const uint32_t ln = be32(lab, 4, labels_path);
  if (ln != n)
    throw FormatError(labels_path + ": label count " + std::to_string(ln) +
                      " != image count " + std::to_string(n));
  const size_t lab_expect = 8 + static_cast<size_t>(ln);
  if (lab.size() != lab_expect)
    throw FormatError(labels_path + ": payload length mismatch, expected " +
                      std::to_string(lab_expect) + " bytes, got " +
                      std::to_string(lab.size()));

  Dataset d;
  d.split = split;
  d.sample_shape = {1, static_cast<int>(rows), static_cast<int>(cols)};
  d.samples.resize(static_cast<size_t>(n) * rows * cols);
  d.labels.resize(n);
  for (size_t i = 0; i < d.samples.size(); ++i)
    d.samples[i] = static_cast<float>(img[16 + i]) / 255.0f;
  int max_label = 0;
  for (uint32_t i = 0; i < n; ++i) {
    d.labels[i] = lab[8 + i];
    max_label = std::max(max_label, d.labels[i]);
  }
  d.num_classes = max_label + 1;
  return d;
}

// ----------------------------------------------------------------------
// CIFAR binary
// ----------------------------------------------------------------------

Dataset load_cifar_binary(const std::string& path, Split split, CifarLayout layout) {
  const std::vector<uint8_t> bytes = read_file(path);
  if (bytes.empty()) throw FormatError(path + ": empty dataset file");
  constexpr size_t kRec10 = 1 + 3072;
  constexpr size_t kRec100 = 2 + 3072;
  if (layout == CifarLayout::detect) {
    const bool fits10 = bytes.size() % kRec10 == 0;
    const bool fits100 = bytes.size() % kRec100 == 0;
    if (fits10 && fits100)
      throw FormatError(path + ": record size ambiguous, pass an explicit layout");
    if (fits10)
      layout = CifarLayout::classes10;
    else if (fits100)
      layout = CifarLayout::classes100;
    else
      throw FormatError(path + ": length " + std::to_string(bytes.size()) +
                        " is not a multiple of 3073 or 3074");
  }
  const size_t rec = layout == CifarLayout::classes10 ? kRec10 : kRec100;
  if (bytes.size() % rec != 0)
    throw FormatError(path + ": length " + std::to_string(bytes.size()) +
                      " is not a multiple of the record size " + std::to_string(rec));
  const size_t n = bytes.size() / rec;
  Dataset d;
  d.split = split;
  d.num_classes = layout == CifarLayout::classes10 ? 10 : 100;
  d.sample_shape = {3, 32, 32};
  d.samples.resize(n * 3072);
  d.labels.resize(n);
  for (size_t i = 0; i < n; ++i) {
    const uint8_t* r = bytes.data() + i * rec;
    // 100-class records carry (coarse, fine); the fine label is kept.
    d.labels[i] = layout == CifarLayout::classes10 ? r[0] : r[1];
    const uint8_t* px = r + (layout == CifarLayout::classes10 ? 1 : 2);
    for (size_t j = 0; j < 3072; ++j)
      d.samples[i * 3072 + j] = static_cast<float>(px[j]) / 255.0f;
  }
  return d;
}

// ----------------------------------------------------------------------
// Batch stream
// ----------------------------------------------------------------------

BatchStream::BatchStream(const Dataset& data, int batch_size, uint64_t epoch_seed,
                         Augment augment)
    : data_(data), batch_size_(batch_size), augment_(augment), rng_(epoch_seed) {
  if (batch_size_ < 1) throw ArgumentError("batches: batch_size must be >= 1");
  if (augment_ == Augment::crop_flip && data_.sample_shape.size() != 3)
    throw ConfigError("crop-flip augmentation needs (C,H,W) samples");
  order_.resize(static_cast<size_t>(data_.size()));
  for (int64_t i = 0; i < data_.size(); ++i) order_[static_cast<size_t>(i)] = i;
  rng_.shuffle(order_);
}

int64_t BatchStream::batch_count() const {
  return (data_.size() + batch_size_ - 1) / batch_size_;
}

std::optional<LabeledBatch> BatchStream::next() {
  if (cursor_ >= data_.size()) return std::nullopt;
  const int64_t count = std::min<int64_t>(batch_size_, data_.size() - cursor_);
  const int64_t sn = data_.sample_numel();
  LabeledBatch b;
  std::vector<int> shape;
  shape.push_back(static_cast<int>(count));
  for (int ddim : data_.sample_shape) shape.push_back(ddim);
  b.features = Tensor::zeros(shape);
  b.labels.resize(static_cast<size_t>(count));
  for (int64_t i = 0; i < count; ++i) {
    const int64_t src = order_[static_cast<size_t>(cursor_ + i)];
    b.labels[static_cast<size_t>(i)] = data_.labels[static_cast<size_t>(src)];
    float* dst = b.features.data.data() + i * sn;
    const float* s = data_.samples.data() + src * sn;
    if (augment_ == Augment::none) {
      std::memcpy(dst, s, static_cast<size_t>(sn) * sizeof(float));
    } else {
      const int C = data_.sample_shape[0], H = data_.sample_shape[1],
                W = data_.sample_shape[2];
      constexpr int pad = 4;
      const int dy = static_cast<int>(rng_.below(2 * pad + 1)) - pad;
      const int dx = static_cast<int>(rng_.below(2 * pad + 1)) - pad;
      const bool flip = rng_.below(2) == 1;
      for (int c = 0; c < C; ++c)
        for (int h = 0; h < H; ++h)
          for (int w = 0; w < W; ++w) {
            const int sw = flip ? W - 1 - w : w;
            const int sh = h + dy;
            const int sx = sw + dx;
            float v = 0.0f;  // zero padding outside the source image
            if (sh >= 0 && sh < H && sx >= 0 && sx < W)
              v = s[(static_cast<int64_t>(c) * H + sh) * W + sx];
            dst[(static_cast<int64_t>(c) * H + h) * W + w] = v;
          }
    }
  }
  cursor_ += count;
  return b;
}

BatchStream batches(const Dataset& data, int batch_size, uint64_t epoch_seed,
                    Augment augment) {
  return BatchStream(data, batch_size, epoch_seed, augment);
}

LabeledBatch take_batch(const Dataset& data, int64_t first, int64_t count) {
  if (first < 0 || count < 1 || first + count > data.size())
    throw ArgumentError("take_batch: range out of bounds");
  const int64_t sn = data.sample_numel();
  LabeledBatch b;
  std::vector<int> shape;
  shape.push_back(static_cast<int>(count));
  for (int d : data.sample_shape) shape.push_back(d);
  b.features = Tensor::zeros(shape);
  b.labels.assign(data.labels.begin() + first, data.labels.begin() + first + count);
  std::memcpy(b.features.data.data(), data.samples.data() + first * sn,
              static_cast<size_t>(count * sn) * sizeof(float));
  return b;
}

}  // namespace lth
