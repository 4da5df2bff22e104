#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <thread>

#include "lth/store.hpp"

using namespace lth;

namespace {

std::filesystem::path tmpdir() {
  const auto dir = std::filesystem::temp_directory_path() / "lth_store_tests";
  std::filesystem::create_directories(dir);
  return dir;
}

WeightSnapshot random_snapshot(uint64_t seed) {
  Rng rng(seed);
  WeightSnapshot w;
  w.meta.epoch_tag = std::to_string(rng.below(200));
  w.meta.seed = rng.next_u64();
  w.meta.arch_hash = hex64(rng.next_u64());
  const int layers = 1 + static_cast<int>(rng.below(4));
  for (int l = 0; l < layers; ++l) {
    WeightSnapshot::Entry e;
    e.name = "layer" + std::to_string(l) + (rng.below(2) ? ".w" : ".b");
    const int rank = 1 + static_cast<int>(rng.below(4));
    int64_t n = 1;
    for (int d = 0; d < rank; ++d) {
      const int dim = 1 + static_cast<int>(rng.below(9));
      e.shape.push_back(dim);
      n *= dim;
    }
    for (int64_t i = 0; i < n; ++i)
      e.values.push_back(static_cast<float>(rng.uniform(-10.0, 10.0)));
    w.entries.push_back(std::move(e));
  }
  return w;
}

Mask random_mask(uint64_t seed) {
  Rng rng(seed);
  Mask m;
  m.arch_hash = hex64(rng.next_u64());
  m.method = rng.below(2) ? "omp" : "imp-3";
  const int layers = 1 + static_cast<int>(rng.below(3));
  for (int l = 0; l < layers; ++l) {
    Mask::Layer ml;
    ml.name = "w" + std::to_string(l);
    const int n = 1 + static_cast<int>(rng.below(300));
    ml.shape = {n};
    for (int i = 0; i < n; ++i) ml.keep.push_back(rng.below(2) ? 1 : 0);
    m.layers.push_back(std::move(ml));
  }
  m.sparsity = m.achieved_sparsity();
  return m;
}

std::string slurp_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
}

ResultRecord record_of(const std::string& run, int rep, const std::string& split,
                       double acc) {
  ResultRecord r;
  r.run_id = run;
  r.protocol = "lt-imp";
  r.pretrain_lr = 0.1;
  r.subnet_lr = 0.1;
  r.sparsity = 0.832;
  r.seed = 1;
  r.replicate = rep;
  r.split = split;
  r.accuracy = acc;
  r.loss = 1.0 - acc;
  r.config_hash = "cfg";
  return r;
}

}  // namespace

TEST_CASE("snapshot round trips are value-exact and byte-stable") {
  const auto dir = tmpdir();
  for (uint64_t seed = 1; seed <= 40; ++seed) {
    const WeightSnapshot w = random_snapshot(seed);
    const auto p = dir / ("snap" + std::to_string(seed) + ".lths");
    write_snapshot(p, w);
    const WeightSnapshot r = read_snapshot(p);
    REQUIRE(r.entries.size() == w.entries.size());
    for (size_t e = 0; e < w.entries.size(); ++e) {
      CHECK(r.entries[e].name == w.entries[e].name);
      CHECK(r.entries[e].shape == w.entries[e].shape);
      CHECK(r.entries[e].values == w.entries[e].values);
    }
    CHECK(r.meta.epoch_tag == w.meta.epoch_tag);
    CHECK(r.meta.seed == w.meta.seed);
    CHECK(r.meta.arch_hash == w.meta.arch_hash);

    // Writing the reread snapshot reproduces the file bit for bit.
    const auto p2 = dir / "snap_rt.lths";
    write_snapshot(p2, r);
    CHECK(slurp_bytes(p) == slurp_bytes(p2));
  }
}

TEST_CASE("snapshot file length follows the layout arithmetic") {
  WeightSnapshot w;
  w.meta.epoch_tag = "0";
  w.meta.seed = 7;
  w.meta.arch_hash = "abcd";
  w.entries.push_back({"ab", {2, 2}, {1.0f, 2.0f, 3.0f, 4.0f}});
  const auto p = tmpdir() / "layout.lths";
  write_snapshot(p, w);
  const std::string bytes = slurp_bytes(p);
  const std::string meta = "{\"arch_hash\":\"abcd\",\"epoch\":\"0\",\"seed\":7}";
  // magic + version + count + (name len + name + rank + 2 dims) + 4 floats
  // + metadata length field + metadata
  const size_t expect = 4 + 2 + 4 + (2 + 2 + 1 + 8) + 16 + 4 + meta.size();
  CHECK(bytes.size() == expect);
  CHECK(bytes.substr(0, 4) == "LTHS");
  CHECK(bytes.substr(bytes.size() - meta.size()) == meta);
}

TEST_CASE("snapshot reader rejects corruption with exact offsets") {
  const WeightSnapshot w = random_snapshot(5);
  const auto p = tmpdir() / "corrupt.lths";
  write_snapshot(p, w);
  std::string bytes = slurp_bytes(p);

  // Flipped magic byte.
  {
    std::string bad = bytes;
    bad[0] = 'X';
    const auto pb = tmpdir() / "bad_magic.lths";
    std::ofstream(pb, std::ios::binary) << bad;
    try {
      read_snapshot(pb);
      FAIL("expected rejection");
    } catch (const FormatError& e) {
      CHECK(std::string(e.what()).find("offset 0") != std::string::npos);
    }
  }
  // Unknown version.
  {
    std::string bad = bytes;
    bad[4] = 9;
    const auto pb = tmpdir() / "bad_version.lths";
    std::ofstream(pb, std::ios::binary) << bad;
    CHECK_THROWS_AS(read_snapshot(pb), FormatError);
  }
  // Truncation inside the payload.
  {
    const std::string bad = bytes.substr(0, bytes.size() / 2);
    const auto pb = tmpdir() / "trunc.lths";
    std::ofstream(pb, std::ios::binary) << bad;
    CHECK_THROWS_AS(read_snapshot(pb), FormatError);
  }
  // Trailing garbage.
  {
    const std::string bad = bytes + "zz";
    const auto pb = tmpdir() / "trailing.lths";
    std::ofstream(pb, std::ios::binary) << bad;
    try {
      read_snapshot(pb);
      FAIL("expected rejection");
    } catch (const FormatError& e) {
      CHECK(std::string(e.what()).find("trailing") != std::string::npos);
      CHECK(std::string(e.what()).find(std::to_string(bytes.size())) != std::string::npos);
    }
  }
}

TEST_CASE("mask round trips preserve bits and popcount metadata") {
  const auto dir = tmpdir();
  for (uint64_t seed = 100; seed < 140; ++seed) {
    const Mask m = random_mask(seed);
    const auto p = dir / ("mask" + std::to_string(seed) + ".lthm");
    write_mask(p, m);
    const Mask r = read_mask(p);
    REQUIRE(r.layers.size() == m.layers.size());
    for (size_t l = 0; l < m.layers.size(); ++l) {
      CHECK(r.layers[l].name == m.layers[l].name);
      CHECK(r.layers[l].shape == m.layers[l].shape);
      CHECK(r.layers[l].keep == m.layers[l].keep);
    }
    CHECK(r.sparsity == doctest::Approx(m.sparsity));
    CHECK(r.method == m.method);
    CHECK(r.arch_hash == m.arch_hash);
  }
}

TEST_CASE("mask reader checks magic and popcount consistency") {
  const Mask m = random_mask(7);
  const auto p = tmpdir() / "mask_ok.lthm";
  write_mask(p, m);
  std::string bytes = slurp_bytes(p);
  {
    std::string bad = bytes;
    bad[1] = 'X';
    const auto pb = tmpdir() / "mask_bad_magic.lthm";
    std::ofstream(pb, std::ios::binary) << bad;
    CHECK_THROWS_AS(read_mask(pb), FormatError);
  }
  {
    // Flip one keep bit inside the first layer's payload; the recorded
    // sparsity no longer matches the popcount.
    std::string bad = bytes;
    const size_t name_len = static_cast<uint8_t>(bad[10]);
    const size_t header = 4 + 2 + 4 + 2 + name_len + 1 + 4;  // one dim (rank 1)
    bad[header] = static_cast<char>(bad[header] ^ 1);
    const auto pb = tmpdir() / "mask_bad_pop.lthm";
    std::ofstream(pb, std::ios::binary) << bad;
    CHECK_THROWS_AS(read_mask(pb), FormatError);
  }
}

TEST_CASE("results log appends, rejects duplicates and schema violations") {
  const auto p = tmpdir() / "results1.jsonl";
  std::filesystem::remove(p);
  ResultsLog log(p);
  log.append(record_of("run1", 0, "test", 0.9));
  log.append(record_of("run1", 0, "train", 0.95));
  log.append(record_of("run1", 1, "test", 0.91));
  CHECK_THROWS_AS(log.append(record_of("run1", 0, "test", 0.8)), ArgumentError);

  const auto records = ResultsLog::read_all(p);
  CHECK(records.size() == 3);
  CHECK(records[0].run_id == "run1");
  CHECK(records[0].epoch == std::nullopt);

  // A fresh handle on the same file still sees earlier keys.
  ResultsLog again(p);
  CHECK_THROWS_AS(again.append(record_of("run1", 1, "test", 0.5)), ArgumentError);

  // Schema violation: missing sparsity.
  const auto bad = tmpdir() / "bad.jsonl";
  std::ofstream(bad) << "{\"run_id\":\"x\",\"protocol\":\"sdt\"}\n";
  try {
    ResultsLog::read_all(bad);
    FAIL("expected schema rejection");
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find("pretrain_lr") != std::string::npos);
  }
}

TEST_CASE("concurrent appends keep every line intact") {
  const auto p = tmpdir() / "results_mt.jsonl";
  std::filesystem::remove(p);
  ResultsLog log(p);
  auto writer = [&](int base) {
    for (int i = 0; i < 50; ++i)
      log.append(record_of("run" + std::to_string(base * 1000 + i), 0, "test", 0.5));
  };
  std::thread t1(writer, 1), t2(writer, 2);
  t1.join();
  t2.join();
  const auto records = ResultsLog::read_all(p);
  CHECK(records.size() == 100);
}

TEST_CASE("reports aggregate replicates with deterministic ordering") {
  const auto p = tmpdir() / "results2.jsonl";
  std::filesystem::remove(p);
  ResultsLog log(p);
  for (int rep = 0; rep < 3; ++rep) {
    ResultRecord r = record_of("rep" + std::to_string(rep), rep, "test", 0.90 + 0.01 * rep);
    log.append(r);
  }
  ResultRecord other = record_of("other", 0, "test", 0.5);
  other.subnet_lr = 0.01;
  other.protocol = "rr-imp";
  log.append(other);

  const auto rows = aggregate_results(ResultsLog::read_all(p), {});
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].subnet_lr == doctest::Approx(0.01));  // lr ascending
  CHECK(rows[1].replicates == 3);
  CHECK(rows[1].mean_accuracy == doctest::Approx(0.91));
  CHECK(rows[1].std_accuracy == doctest::Approx(0.01));

  ReportFilter filter;
  filter.protocol = "lt-imp";
  const auto only = aggregate_results(ResultsLog::read_all(p), filter);
  CHECK(only.size() == 1);

  const auto out_csv = emit_report(p, {}, ReportFormat::csv, tmpdir() / "reports");
  CHECK(std::filesystem::exists(out_csv));
  const auto out_json = emit_report(p, {}, ReportFormat::json, tmpdir() / "reports");
  CHECK(std::filesystem::exists(out_json));

  ReportFilter none;
  none.sparsity = 0.999;
  CHECK_THROWS_AS(emit_report(p, none, ReportFormat::csv, tmpdir() / "reports"),
                  ArgumentError);
}
