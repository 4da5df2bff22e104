#include "lth/store.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>

#include <json.hpp>

namespace lth {

namespace {

using nlohmann::json;

constexpr uint16_t kFormatVersion = 1;

void put_u16(std::string& out, uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
}

void put_u32(std::string& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f32(std::string& out, float v) {
  uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32(out, bits);
}

// Sequential little-endian reader with offset-carrying errors.
class Reader {
 public:
  Reader(std::string bytes, std::string path)
      : bytes_(std::move(bytes)), path_(std::move(path)) {}

  size_t offset() const { return off_; }
  size_t remaining() const { return bytes_.size() - off_; }

  void need(size_t n, const char* what) const {
    if (off_ + n > bytes_.size())
      throw FormatError(path_ + ": truncated reading " + what + " at offset " +
                        std::to_string(off_) + " (need " + std::to_string(n) +
                        " bytes, have " + std::to_string(bytes_.size() - off_) + ")");
  }

  uint8_t u8(const char* what) {
    need(1, what);
    return static_cast<uint8_t>(bytes_[off_++]);
  }

  uint16_t u16(const char* what) {
    need(2, what);
    const uint16_t v = static_cast<uint16_t>(static_cast<uint8_t>(bytes_[off_])) |
                       static_cast<uint16_t>(static_cast<uint8_t>(bytes_[off_ + 1]) << 8);
    off_ += 2;
    return v;
  }

  uint32_t u32(const char* what) {
    need(4, what);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<uint32_t>(static_cast<uint8_t>(bytes_[off_ + static_cast<size_t>(i)]))
           << (8 * i);
    off_ += 4;
    return v;
  }

  std::string str(size_t n, const char* what) {
    need(n, what);
    std::string s = bytes_.substr(off_, n);
    off_ += n;
    return s;
  }

  void raw(void* dst, size_t n, const char* what) {
    need(n, what);
    std::memcpy(dst, bytes_.data() + off_, n);
    off_ += n;
  }

  void expect_magic(const char* magic) {
    need(4, "magic");
    if (bytes_.compare(0, 4, magic) != 0)
      throw FormatError(path_ + ": bad magic at offset 0 (expected \"" +
                        std::string(magic) + "\")");
    off_ = 4;
  }

  void expect_end() const {
    if (off_ != bytes_.size())
      throw FormatError(path_ + ": " + std::to_string(bytes_.size() - off_) +
                        " trailing bytes at offset " + std::to_string(off_));
  }

 private:
  std::string bytes_;
  std::string path_;
  size_t off_ = 0;
};

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
  return bytes;
}

void spill(const std::filesystem::path& path, const std::string& bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError("write failed for " + path.string());
}

void put_layer_header(std::string& out, const std::string& name,
                      const std::vector<int>& shape) {
  if (name.size() > 0xffff) throw ArgumentError("layer name too long");
  if (shape.size() > 0xff) throw ArgumentError("layer rank too large");
  put_u16(out, static_cast<uint16_t>(name.size()));
  out += name;
  out.push_back(static_cast<char>(shape.size()));
  for (int d : shape) put_u32(out, static_cast<uint32_t>(d));
}

struct LayerHeader {
  std::string name;
  std::vector<int> shape;
  int64_t count;
};

LayerHeader read_layer_header(Reader& r) {
  LayerHeader h;
  const uint16_t name_len = r.u16("layer name length");
  h.name = r.str(name_len, "layer name");
  const uint8_t rank = r.u8("layer rank");
  h.count = 1;
  for (int i = 0; i < rank; ++i) {
    const uint32_t d = r.u32("layer dim");
    if (d == 0 || d > (1u << 28))
      throw FormatError("implausible dimension " + std::to_string(d) + " in layer " +
                        h.name);
    h.shape.push_back(static_cast<int>(d));
    h.count *= d;
  }
  return h;
}

}  // namespace

// ----------------------------------------------------------------------
// Snapshot files
// ----------------------------------------------------------------------

void write_snapshot(const std::filesystem::path& path, const WeightSnapshot& snapshot) {
  snapshot.validate();
  std::string out = "LTHS";
  put_u16(out, kFormatVersion);
  put_u32(out, static_cast<uint32_t>(snapshot.entries.size()));
  for (const WeightSnapshot::Entry& e : snapshot.entries) {
    put_layer_header(out, e.name, e.shape);
    for (float v : e.values) put_f32(out, v);
  }
  const json meta = {{"epoch", snapshot.meta.epoch_tag},
                     {"seed", snapshot.meta.seed},
                     {"arch_hash", snapshot.meta.arch_hash}};
  const std::string meta_str = meta.dump();
  put_u32(out, static_cast<uint32_t>(meta_str.size()));
  out += meta_str;
  spill(path, out);
}

WeightSnapshot read_snapshot(const std::filesystem::path& path) {
  Reader r(slurp(path), path.string());
  r.expect_magic("LTHS");
  const uint16_t version = r.u16("version");
  if (version != kFormatVersion)
    throw FormatError(path.string() + ": unknown snapshot version " +
                      std::to_string(version));
  const uint32_t layers = r.u32("layer count");
  WeightSnapshot snap;
  for (uint32_t i = 0; i < layers; ++i) {
    LayerHeader h = read_layer_header(r);
    WeightSnapshot::Entry e;
    e.name = std::move(h.name);
    e.shape = std::move(h.shape);
    r.need(static_cast<size_t>(h.count) * 4, "layer values");
    e.values.resize(static_cast<size_t>(h.count));
    r.raw(e.values.data(), static_cast<size_t>(h.count) * 4, "layer values");
    snap.entries.push_back(std::move(e));
  }
  const uint32_t meta_len = r.u32("metadata length");
  const std::string meta_str = r.str(meta_len, "metadata");
  r.expect_end();
  try {
    const json meta = json::parse(meta_str);
    snap.meta.epoch_tag = meta.at("epoch").get<std::string>();
    snap.meta.seed = meta.at("seed").get<uint64_t>();
    snap.meta.arch_hash = meta.at("arch_hash").get<std::string>();
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": bad metadata block: " + e.what());
  }
  snap.validate();
  return snap;
}

// ----------------------------------------------------------------------
// Mask files
// ----------------------------------------------------------------------

void write_mask(const std::filesystem::path& path, const Mask& mask) {
  mask.validate();
  std::string out = "LTHM";
  put_u16(out, kFormatVersion);
  put_u32(out, static_cast<uint32_t>(mask.layers.size()));
  for (const Mask::Layer& l : mask.layers) {
    put_layer_header(out, l.name, l.shape);
    uint8_t acc = 0;
    int bit = 0;
    for (size_t i = 0; i < l.keep.size(); ++i) {
      if (l.keep[i]) acc |= static_cast<uint8_t>(1u << bit);
      if (++bit == 8) {
        out.push_back(static_cast<char>(acc));
        acc = 0;
        bit = 0;
      }
    }
    if (bit) out.push_back(static_cast<char>(acc));
  }
  const json meta = {{"sparsity", mask.sparsity},
                     {"method", mask.method},
                     {"arch_hash", mask.arch_hash}};
  const std::string meta_str = meta.dump();
  put_u32(out, static_cast<uint32_t>(meta_str.size()));
  out += meta_str;
  spill(path, out);
}

Mask read_mask(const std::filesystem::path& path) {
  Reader r(slurp(path), path.string());
  r.expect_magic("LTHM");
  const uint16_t version = r.u16("version");
  if (version != kFormatVersion)
    throw FormatError(path.string() + ": unknown mask version " +
                      std::to_string(version));
  const uint32_t layers = r.u32("layer count");
  Mask mask;
  for (uint32_t i = 0; i < layers; ++i) {
    LayerHeader h = read_layer_header(r);
    Mask::Layer l;
    l.name = std::move(h.name);
    l.shape = std::move(h.shape);
    const size_t packed = (static_cast<size_t>(h.count) + 7) / 8;
    const std::string bits = r.str(packed, "mask bits");
    l.keep.resize(static_cast<size_t>(h.count));
    for (int64_t b = 0; b < h.count; ++b)
      l.keep[static_cast<size_t>(b)] =
          (static_cast<uint8_t>(bits[static_cast<size_t>(b / 8)]) >> (b % 8)) & 1u;
    mask.layers.push_back(std::move(l));
  }
  const uint32_t meta_len = r.u32("metadata length");
  const std::string meta_str = r.str(meta_len, "metadata");
  r.expect_end();
  try {
    const json meta = json::parse(meta_str);
    mask.sparsity = meta.at("sparsity").get<double>();
    mask.method = meta.at("method").get<std::string>();
    mask.arch_hash = meta.at("arch_hash").get<std::string>();
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": bad metadata block: " + e.what());
  }
  if (std::abs(mask.achieved_sparsity() - mask.sparsity) > 1e-9)
    throw FormatError(path.string() + ": popcount does not match recorded sparsity");
  return mask;
}

// ----------------------------------------------------------------------
// Results log
// ----------------------------------------------------------------------

std::string ResultRecord::to_json() const {
  json j;
  j["run_id"] = run_id;
  j["protocol"] = protocol;
  j["pretrain_lr"] = pretrain_lr;
  j["subnet_lr"] = subnet_lr;
  j["sparsity"] = sparsity;
  j["seed"] = seed;
  j["replicate"] = replicate;
  if (epoch)
    j["epoch"] = *epoch;
  else
    j["epoch"] = "final";
  j["split"] = split;
  j["accuracy"] = accuracy;
  j["loss"] = loss;
  j["config_hash"] = config_hash;
  return j.dump();
}

ResultRecord ResultRecord::from_json(const std::string& line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::exception& e) {
    throw FormatError(std::string("results log: invalid JSON line: ") + e.what());
  }
  static const char* kFields[] = {"run_id", "protocol", "pretrain_lr", "subnet_lr",
                                  "sparsity", "seed", "replicate", "epoch",
                                  "split", "accuracy", "loss", "config_hash"};
  for (const char* f : kFields)
    if (!j.contains(f))
      throw FormatError("results record is missing required field '" +
                        std::string(f) + "'");
  ResultRecord r;
  try {
    r.run_id = j["run_id"].get<std::string>();
    r.protocol = j["protocol"].get<std::string>();
    r.pretrain_lr = j["pretrain_lr"].get<double>();
    r.subnet_lr = j["subnet_lr"].get<double>();
    r.sparsity = j["sparsity"].get<double>();
    r.seed = j["seed"].get<uint64_t>();
    r.replicate = j["replicate"].get<int>();
    if (j["epoch"].is_string()) {
      if (j["epoch"].get<std::string>() != "final")
        throw FormatError("results record: epoch must be an integer or \"final\"");
    } else {
      r.epoch = j["epoch"].get<int>();
    }
    r.split = j["split"].get<std::string>();
    r.accuracy = j["accuracy"].get<double>();
    r.loss = j["loss"].get<double>();
    r.config_hash = j["config_hash"].get<std::string>();
  } catch (const json::exception& e) {
    throw FormatError(std::string("results record has a mistyped field: ") + e.what());
  }
  if (r.split != "train" && r.split != "test")
    throw FormatError("results record: split must be train or test");
  return r;
}

namespace {

std::string record_key(const ResultRecord& r) {
  return r.run_id + "|" + std::to_string(r.replicate) + "|" +
         (r.epoch ? std::to_string(*r.epoch) : "final") + "|" + r.split;
}

}  // namespace

ResultsLog::ResultsLog(std::filesystem::path path) : path_(std::move(path)) {
  if (std::filesystem::exists(path_))
    for (const ResultRecord& r : read_all(path_)) seen_.insert(record_key(r));
  else if (path_.has_parent_path())
    std::filesystem::create_directories(path_.parent_path());
}

void ResultsLog::append(const ResultRecord& record) {
  const std::string line = record.to_json();  // validates shape by construction
  ResultRecord::from_json(line);              // schema check before write
  const std::string key = record_key(record);
  std::lock_guard<std::mutex> lock(mutex_);
  if (!seen_.insert(key).second)
    throw ArgumentError("results log: duplicate record for " + key);
  std::ofstream out(path_, std::ios::app | std::ios::binary);
  if (!out) throw FormatError("cannot append to " + path_.string());
  out << line << '\n';
  if (!out) throw FormatError("append failed for " + path_.string());
}

std::vector<ResultRecord> ResultsLog::read_all(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  std::vector<ResultRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    out.push_back(ResultRecord::from_json(line));
  }
  return out;
}

// ----------------------------------------------------------------------
// Reports
// ----------------------------------------------------------------------

std::vector<ReportRow> aggregate_results(const std::vector<ResultRecord>& records,
                                         const ReportFilter& filter) {
  struct Key {
    std::string protocol;
    double pretrain_lr, subnet_lr, sparsity;
    bool operator<(const Key& o) const {
      if (subnet_lr != o.subnet_lr) return subnet_lr < o.subnet_lr;
      if (sparsity != o.sparsity) return sparsity < o.sparsity;
      if (pretrain_lr != o.pretrain_lr) return pretrain_lr < o.pretrain_lr;
      return protocol < o.protocol;
    }
  };
  std::map<Key, std::vector<std::pair<double, double>>> cells;
  for (const ResultRecord& r : records) {
    if (r.epoch || r.split != "test") continue;  // final test rows only
    if (filter.protocol && r.protocol != *filter.protocol) continue;
    if (filter.sparsity && std::abs(r.sparsity - *filter.sparsity) > 1e-9) continue;
    if (filter.pretrain_lr && std::abs(r.pretrain_lr - *filter.pretrain_lr) > 1e-12)
      continue;
    cells[Key{r.protocol, r.pretrain_lr, r.subnet_lr, r.sparsity}].push_back(
        {r.accuracy, r.loss});
  }
  std::vector<ReportRow> rows;
  for (const auto& [key, vals] : cells) {
    ReportRow row;
    row.protocol = key.protocol;
    row.pretrain_lr = key.pretrain_lr;
    row.subnet_lr = key.subnet_lr;
    row.sparsity = key.sparsity;
    row.replicates = static_cast<int>(vals.size());
    double acc = 0.0, loss = 0.0;
    for (const auto& [a, l] : vals) {
      acc += a;
      loss += l;
    }
    row.mean_accuracy = acc / static_cast<double>(vals.size());
    row.mean_loss = loss / static_cast<double>(vals.size());
    double var = 0.0;
    for (const auto& [a, l] : vals) {
      (void)l;
      var += (a - row.mean_accuracy) * (a - row.mean_accuracy);
    }
    row.std_accuracy =
        vals.size() > 1 ? std::sqrt(var / static_cast<double>(vals.size() - 1)) : 0.0;
    rows.push_back(row);
  }
  return rows;
}

std::filesystem::path emit_report(const std::filesystem::path& log_path,
                                  const ReportFilter& filter, ReportFormat format,
                                  const std::filesystem::path& out_dir) {
  const std::vector<ResultRecord> records = ResultsLog::read_all(log_path);
  const std::vector<ReportRow> rows = aggregate_results(records, filter);
  if (rows.empty())
    throw ArgumentError("report: no records match the requested filter");
  std::filesystem::create_directories(out_dir);
  if (format == ReportFormat::csv) {
    const std::filesystem::path out = out_dir / "report.csv";
    std::string body =
        "protocol,pretrain_lr,subnet_lr,sparsity,replicates,mean_accuracy,"
        "std_accuracy,mean_loss\n";
    for (const ReportRow& r : rows) {
      body += r.protocol + "," + json(r.pretrain_lr).dump() + "," +
              json(r.subnet_lr).dump() + "," + json(r.sparsity).dump() + "," +
              std::to_string(r.replicates) + "," + json(r.mean_accuracy).dump() + "," +
              json(r.std_accuracy).dump() + "," + json(r.mean_loss).dump() + "\n";
    }
    spill(out, body);
    return out;
  }
  const std::filesystem::path out = out_dir / "report.json";
  json arr = json::array();
  for (const ReportRow& r : rows)
    arr.push_back({{"protocol", r.protocol},
                   {"pretrain_lr", r.pretrain_lr},
                   {"subnet_lr", r.subnet_lr},
                   {"sparsity", r.sparsity},
                   {"replicates", r.replicates},
                   {"mean_accuracy", r.mean_accuracy},
                   {"std_accuracy", r.std_accuracy},
                   {"mean_loss", r.mean_loss}});
  spill(out, arr.dump(2) + "\n");
  return out;
}

}  // namespace lth
