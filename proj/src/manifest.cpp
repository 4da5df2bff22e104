#include "lth/manifest.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include <json.hpp>

namespace lth {

namespace {

using nlohmann::json;

json parse_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open manifest " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("manifest " + path.string() + ": " + e.what());
  }
}

void expect_keys(const json& j, const std::set<std::string>& allowed,
                 const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
  for (const auto& [key, value] : j.items())
    if (!allowed.count(key))
      throw ConfigError("unknown key '" + key + "' in " + where);
}

template <class T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError("manifest key '" + std::string(key) + "': " + e.what());
  }
}

ArchSpec parse_arch(const json& j) {
  expect_keys(j,
              {"kind", "hidden", "blocks_per_stage", "residual", "width_multiplier",
               "num_classes", "input_shape"},
              "arch");
  ArchSpec a;
  const std::string kind = get_or<std::string>(j, "kind", "fc");
  if (kind == "fc")
    a.kind = ArchKind::fc;
  else if (kind == "conv")
    a.kind = ArchKind::conv;
  else
    throw ConfigError("arch.kind must be fc or conv");
  a.hidden = get_or<std::vector<int>>(j, "hidden", {});
  a.blocks_per_stage = get_or<int>(j, "blocks_per_stage", 1);
  a.residual = get_or<bool>(j, "residual", false);
  a.width_multiplier = get_or<double>(j, "width_multiplier", 1.0);
  a.num_classes = get_or<int>(j, "num_classes", 0);
  a.input_shape = get_or<std::vector<int>>(j, "input_shape", {});
  a.validate();
  return a;
}

DatasetSpec parse_dataset(const json& j) {
  expect_keys(j,
              {"kind", "n_train", "n_test", "num_classes", "noise", "train_images",
               "train_labels", "test_images", "test_labels", "train_path", "test_path",
               "cifar_layout", "augment"},
              "dataset");
  DatasetSpec d;
  const std::string kind = get_or<std::string>(j, "kind", "spirals");
  if (kind == "spirals" || kind == "blobs") {
    d.kind = DatasetSpec::Kind::synthetic;
    d.synthetic_kind = kind == "blobs" ? SyntheticKind::blobs : SyntheticKind::spirals;
    d.n_train = get_or<int64_t>(j, "n_train", 512);
    d.n_test = get_or<int64_t>(j, "n_test", 256);
    d.num_classes = get_or<int>(j, "num_classes", 2);
    d.noise = get_or<double>(j, "noise", 0.1);
  } else if (kind == "idx") {
    d.kind = DatasetSpec::Kind::idx;
    d.train_images = get_or<std::string>(j, "train_images", "");
    d.train_labels = get_or<std::string>(j, "train_labels", "");
    d.test_images = get_or<std::string>(j, "test_images", "");
    d.test_labels = get_or<std::string>(j, "test_labels", "");
  } else if (kind == "cifar") {
    d.kind = DatasetSpec::Kind::cifar;
    d.cifar_train = get_or<std::string>(j, "train_path", "");
    d.cifar_test = get_or<std::string>(j, "test_path", "");
    const std::string layout = get_or<std::string>(j, "cifar_layout", "detect");
    if (layout == "detect")
      d.cifar_layout = CifarLayout::detect;
    else if (layout == "10")
      d.cifar_layout = CifarLayout::classes10;
    else if (layout == "100")
      d.cifar_layout = CifarLayout::classes100;
    else
      throw ConfigError("dataset.cifar_layout must be detect, 10 or 100");
  } else {
    throw ConfigError("dataset.kind must be spirals, blobs, idx or cifar");
  }
  const std::string aug = get_or<std::string>(j, "augment", "none");
  if (aug == "none")
    d.augment = Augment::none;
  else if (aug == "crop-flip")
    d.augment = Augment::crop_flip;
  else
    throw ConfigError("dataset.augment must be none or crop-flip");
  return d;
}

TrainRecipe parse_recipe(const json& j, std::string* preset_name) {
  expect_keys(j,
              {"preset", "total_epochs", "initial_lr", "schedule", "decay_epochs",
               "decay_factor", "warmup_epochs", "momentum", "weight_decay",
               "batch_size", "rewind_epoch"},
              "recipe");
  TrainRecipe r;
  if (j.contains("preset")) {
    *preset_name = j.at("preset").get<std::string>();
    r = recipe_preset(*preset_name);
  }
  r.total_epochs = get_or<int>(j, "total_epochs", r.total_epochs);
  r.initial_lr = get_or<double>(j, "initial_lr", r.initial_lr);
  if (j.contains("schedule")) {
    const std::string s = j.at("schedule").get<std::string>();
    if (s == "step")
      r.schedule = LrSchedule::step;
    else if (s == "cosine")
      r.schedule = LrSchedule::cosine;
    else
      throw ConfigError("recipe.schedule must be step or cosine");
  }
  r.decay_epochs = get_or<std::vector<int>>(j, "decay_epochs", r.decay_epochs);
  r.decay_factor = get_or<double>(j, "decay_factor", r.decay_factor);
  r.warmup_epochs = get_or<int>(j, "warmup_epochs", r.warmup_epochs);
  r.momentum = get_or<double>(j, "momentum", r.momentum);
  r.weight_decay = get_or<double>(j, "weight_decay", r.weight_decay);
  r.batch_size = get_or<int>(j, "batch_size", r.batch_size);
  if (r.rewind_epoch >= r.total_epochs) r.rewind_epoch = 0;  // preset t vs tiny T
  r.rewind_epoch = get_or<int>(j, "rewind_epoch", r.rewind_epoch);
  r.validate();
  return r;
}

SweepGrid parse_sweep(const json& j) {
  expect_keys(j,
              {"protocols", "pretrain_lrs", "subnet_lrs", "sparsities", "replicates",
               "jobs", "scope"},
              "sweep");
  SweepGrid g;
  g.protocols = get_or<std::vector<std::string>>(j, "protocols", {});
  g.pretrain_lrs = get_or<std::vector<double>>(j, "pretrain_lrs", {});
  g.subnet_lrs = get_or<std::vector<double>>(j, "subnet_lrs", {});
  g.sparsities = get_or<std::vector<double>>(j, "sparsities", {});
  g.replicates = get_or<int>(j, "replicates", 1);
  g.jobs = get_or<int>(j, "jobs", 1);
  const std::string scope = get_or<std::string>(j, "scope", "global");
  if (scope == "global")
    g.scope = PruneScope::global;
  else if (scope == "per-layer")
    g.scope = PruneScope::per_layer;
  else
    throw ConfigError("sweep.scope must be global or per-layer");
  return g;
}

}  // namespace

Manifest load_manifest(const std::filesystem::path& path) {
  const json j = parse_file(path);
  expect_keys(j,
              {"arch", "dataset", "recipe", "seeds", "sweep", "thresholds", "out_dir",
               "assume_sufficient_epochs", "save_trajectory", "sdt_tolerance"},
              "manifest");
  Manifest m;
  if (!j.contains("arch")) throw ConfigError("manifest needs an arch section");
  m.base.arch = parse_arch(j.at("arch"));
  if (!j.contains("dataset")) throw ConfigError("manifest needs a dataset section");
  m.base.dataset = parse_dataset(j.at("dataset"));
  if (j.contains("recipe"))
    m.base.recipe = parse_recipe(j.at("recipe"), &m.recipe_preset);
  if (j.contains("seeds")) {
    expect_keys(j.at("seeds"), {"theta0", "theta0_prime", "data"}, "seeds");
    m.base.seeds.theta0 = get_or<uint64_t>(j.at("seeds"), "theta0", 1);
    m.base.seeds.theta0_prime = get_or<uint64_t>(j.at("seeds"), "theta0_prime", 2);
    m.base.seeds.data = get_or<uint64_t>(j.at("seeds"), "data", 3);
  }
  if (j.contains("sweep")) m.sweep = parse_sweep(j.at("sweep"));
  if (j.contains("thresholds")) {
    const json& t = j.at("thresholds");
    expect_keys(t, {"delta_similar", "delta_gap", "s_min", "weak_band"}, "thresholds");
    m.thresholds.delta_similar = get_or<double>(t, "delta_similar", 0.5);
    m.thresholds.delta_gap = get_or<double>(t, "delta_gap", 0.5);
    m.thresholds.s_min = get_or<double>(t, "s_min", 0.6);
    m.thresholds.weak_band = get_or<double>(t, "weak_band", 0.05);
  }
  m.out_dir = get_or<std::string>(j, "out_dir", "out");
  m.assume_sufficient_epochs = get_or<bool>(j, "assume_sufficient_epochs", false);
  m.save_trajectory = get_or<bool>(j, "save_trajectory", false);
  m.base.sdt_tolerance = get_or<double>(j, "sdt_tolerance", 0.02);
  m.base.rewind_epoch = m.base.recipe.rewind_epoch;
  m.base.pretrain_lr = m.base.recipe.initial_lr;
  m.base.subnet_lr = m.base.recipe.initial_lr;
  return m;
}

std::string manifest_echo(const Manifest& m) {
  json j;
  json arch;
  arch["kind"] = m.base.arch.kind == ArchKind::fc ? "fc" : "conv";
  arch["hidden"] = m.base.arch.hidden;
  arch["effective_hidden"] = m.base.arch.effective_hidden();
  arch["blocks_per_stage"] = m.base.arch.blocks_per_stage;
  arch["residual"] = m.base.arch.residual;
  arch["width_multiplier"] = m.base.arch.width_multiplier;
  arch["num_classes"] = m.base.arch.num_classes;
  arch["input_shape"] = m.base.arch.input_shape;
  arch["arch_hash"] = m.base.arch.arch_hash();
  arch["params_total"] = count_params(m.base.arch, ParamScope::all);
  arch["params_prunable"] = count_params(m.base.arch, ParamScope::prunable);
  j["arch"] = arch;

  j["dataset"] = m.base.dataset.canonical();

  json recipe;
  recipe["preset"] = m.recipe_preset;
  recipe["total_epochs"] = m.base.recipe.total_epochs;
  recipe["initial_lr"] = m.base.recipe.initial_lr;
  recipe["schedule"] = m.base.recipe.schedule == LrSchedule::step ? "step" : "cosine";
  recipe["decay_epochs"] = m.base.recipe.decay_epochs;
  recipe["decay_factor"] = m.base.recipe.decay_factor;
  recipe["warmup_epochs"] = m.base.recipe.warmup_epochs;
  recipe["momentum"] = m.base.recipe.momentum;
  recipe["weight_decay"] = m.base.recipe.weight_decay;
  recipe["batch_size"] = m.base.recipe.batch_size;
  recipe["rewind_epoch"] = m.base.recipe.rewind_epoch;
  j["recipe"] = recipe;

  j["seeds"] = {{"theta0", m.base.seeds.theta0},
                {"theta0_prime", m.base.seeds.theta0_prime},
                {"data", m.base.seeds.data}};
  j["sweep"] = {{"protocols", m.sweep.protocols},
                {"pretrain_lrs", m.sweep.pretrain_lrs},
                {"subnet_lrs", m.sweep.subnet_lrs},
                {"sparsities", m.sweep.sparsities},
                {"replicates", m.sweep.replicates},
                {"jobs", m.sweep.jobs},
                {"scope", m.sweep.scope == PruneScope::global ? "global" : "per-layer"}};
  j["thresholds"] = {{"delta_similar", m.thresholds.delta_similar},
                     {"delta_gap", m.thresholds.delta_gap},
                     {"s_min", m.thresholds.s_min},
                     {"weak_band", m.thresholds.weak_band}};
  j["out_dir"] = m.out_dir.string();
  j["assume_sufficient_epochs"] = m.assume_sufficient_epochs;
  j["save_trajectory"] = m.save_trajectory;
  j["sdt_tolerance"] = m.base.sdt_tolerance;
  return j.dump(2);
}

AccuracyTable load_accuracy_table(const std::filesystem::path& path) {
  const json j = parse_file(path);
  expect_keys(j, {"sparsity", "trained_full_T", "rows"}, "accuracy table");
  if (!j.contains("sparsity"))
    throw FormatError("accuracy table is missing required field 'sparsity'");
  if (!j.contains("rows"))
    throw FormatError("accuracy table is missing required field 'rows'");
  AccuracyTable t;
  t.sparsity = j.at("sparsity").get<double>();
  t.trained_full_T = get_or<bool>(j, "trained_full_T", false);
  for (const json& rj : j.at("rows")) {
    expect_keys(rj, {"lr", "pre", "lt", "rr", "sdt"}, "accuracy table row");
    if (!rj.contains("lr"))
      throw FormatError("accuracy table row is missing required field 'lr'");
    AccuracyRow row;
    row.lr = rj.at("lr").get<double>();
    auto cell = [&](const char* key) {
      AccuracyCell c;
      if (rj.contains(key)) {
        c.present = true;
        c.mean = rj.at(key).get<double>();
        c.n = 1;
      }
      return c;
    };
    row.pre = cell("pre");
    row.lt = cell("lt");
    row.rr = cell("rr");
    row.sdt = cell("sdt");
    t.rows.push_back(row);
  }
  std::sort(t.rows.begin(), t.rows.end(),
            [](const AccuracyRow& a, const AccuracyRow& b) { return a.lr < b.lr; });
  t.validate();
  return t;
}

}  // namespace lth
