#include "lth/protocol.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <map>
#include <mutex>
#include <thread>

namespace lth {

std::string protocol_name(Protocol p, PruneMethod m) {
  switch (p) {
    case Protocol::pretrain:
      return "pretrain";
    case Protocol::sdt:
      return "sdt";
    case Protocol::lt:
      return m == PruneMethod::imp ? "lt-imp" : "lt-omp";
    case Protocol::rr:
      return m == PruneMethod::imp ? "rr-imp" : "rr-omp";
    case Protocol::wr:
      return m == PruneMethod::imp ? "wr-imp" : "wr-omp";
  }
  throw ArgumentError("unknown protocol");
}

std::string DatasetSpec::canonical() const {
  const std::string aug = augment == Augment::none ? ":plain" : ":crop-flip";
  switch (kind) {
    case Kind::synthetic:
      return std::string("synthetic:") +
             (synthetic_kind == SyntheticKind::blobs ? "blobs" : "spirals") + ":" +
             std::to_string(n_train) + ":" + std::to_string(n_test) + ":" +
             std::to_string(num_classes) + ":" + std::to_string(noise) + aug;
    case Kind::idx:
      return "idx:" + train_images + ":" + train_labels + ":" + test_images + ":" +
             test_labels + aug;
    case Kind::cifar:
      return "cifar:" + cifar_train + ":" + cifar_test + aug;
  }
  throw ArgumentError("unknown dataset kind");
}

LoadedData load_dataset(const DatasetSpec& spec, uint64_t data_seed) {
  LoadedData out;
  switch (spec.kind) {
    case DatasetSpec::Kind::synthetic: {
      SyntheticData s = load_synthetic(spec.synthetic_kind, spec.n_train, spec.n_test,
                                       spec.num_classes, spec.noise, data_seed);
      out.train = std::move(s.train);
      out.test = std::move(s.test);
      break;
    }
    case DatasetSpec::Kind::idx:
      out.train = load_idx(spec.train_images, spec.train_labels, Split::train);
      out.test = load_idx(spec.test_images, spec.test_labels, Split::test);
      break;
    case DatasetSpec::Kind::cifar:
      out.train = load_cifar_binary(spec.cifar_train, Split::train, spec.cifar_layout);
      out.test = load_cifar_binary(spec.cifar_test, Split::test, spec.cifar_layout);
      break;
  }
  return out;
}

void ExperimentConfig::validate() const {
  arch.validate();
  recipe.validate();
  if (target_sparsity < 0.0 || target_sparsity >= 1.0)
    throw ConfigError("config: target sparsity must be in [0,1)");
  if (protocol == Protocol::wr &&
      (rewind_epoch <= 0 || rewind_epoch >= recipe.total_epochs))
    throw ConfigError("config: wr requires 0 < t < T");
  if (protocol == Protocol::rr && seeds.theta0_prime == seeds.theta0)
    throw ConfigError("config: rr requires a reinit seed different from theta0's");
  if (replicate < 0) throw ConfigError("config: replicate must be >= 0");
}

std::string ExperimentConfig::canonical() const {
  std::string s = arch.canonical();
  s += "|" + dataset.canonical();
  s += "|T=" + std::to_string(recipe.total_epochs);
  s += "|lr0=" + std::to_string(pretrain_lr);
  s += "|lr1=" + std::to_string(subnet_lr);
  s += "|sched=" + std::to_string(static_cast<int>(recipe.schedule));
  for (int d : recipe.decay_epochs) s += "," + std::to_string(d);
  s += "|warm=" + std::to_string(recipe.warmup_epochs);
  s += "|mom=" + std::to_string(recipe.momentum);
  s += "|wd=" + std::to_string(recipe.weight_decay);
  s += "|bs=" + std::to_string(recipe.batch_size);
  s += "|proto=" + protocol_name(protocol, method);
  s += "|s=" + std::to_string(target_sparsity);
  s += "|t=" + std::to_string(rewind_epoch);
  s += "|seeds=" + std::to_string(seeds.theta0) + "," +
       std::to_string(seeds.theta0_prime) + "," + std::to_string(seeds.data);
  return s;
}

std::string ExperimentConfig::config_hash() const { return hex64(fnv1a64(canonical())); }

std::string ExperimentConfig::run_id() const {
  return hex64(fnv1a64(config_hash() + ":rep" + std::to_string(replicate)));
}

std::filesystem::path Workspace::snapshot_path(const std::string& run_id,
                                               const std::string& tag) const {
  return root / "snapshots" / (run_id + "_ep" + tag + ".lths");
}

std::filesystem::path Workspace::mask_path(const std::string& base,
                                           const std::string& tag) const {
  return root / "masks" / (base + "_" + tag + ".lthm");
}

std::filesystem::path Workspace::trajectory_dir(const std::string& run_id) const {
  return root / "traj" / run_id;
}

namespace {

uint64_t epoch_seed_for(const ExperimentConfig& cfg, int global_epoch) {
  return mix_seed(cfg.seeds.data, "epoch", static_cast<uint64_t>(global_epoch));
}

std::string epoch_tag(int epoch) { return std::to_string(epoch); }

void write_traj_snapshot(Workspace* ws, bool save_trajectory,
                         const std::string& run_id, int epoch,
                         const WeightSnapshot& w) {
  if (!ws || !save_trajectory) return;
  WeightSnapshot copy = w;
  copy.meta.epoch_tag = epoch_tag(epoch);
  char name[32];
  std::snprintf(name, sizeof(name), "ep%05d.lths", epoch);
  write_snapshot(ws->trajectory_dir(run_id) / name, copy);
}

// Core loop shared by every protocol: trains `epochs` epochs starting at
// schedule position `first_epoch`, enforcing the mask each step.
RunRecord train_run(const ExperimentConfig& cfg, const LoadedData& data,
                    const Model& model, WeightSnapshot weights, const Mask* mask,
                    int first_epoch, int epochs, const std::string& proto,
                    Workspace* ws, bool save_trajectory,
                    WeightSnapshot* theta_t_out = nullptr,
                    WeightSnapshot* final_out = nullptr) {
  RunRecord rec;
  rec.run_id = cfg.run_id();
  rec.config_hash = cfg.config_hash();
  rec.protocol = proto;

  TrainRecipe recipe = cfg.recipe;
  recipe.validate();
  OptimState state;
  state.epoch = first_epoch;

  write_traj_snapshot(ws, save_trajectory, rec.run_id, first_epoch, weights);
  for (int e = 0; e < epochs; ++e) {
    const int global_epoch = first_epoch + e;
    try {
      const EpochMetrics m = sgd_epoch(model, weights, mask, data.train, recipe, state,
                                       epoch_seed_for(cfg, global_epoch),
                                       cfg.dataset.augment);
      rec.epochs.push_back(EpochRecord{global_epoch, m.mean_loss, m.accuracy, m.lr});
    } catch (const NumericError& err) {
      rec.failed = true;
      rec.fail_reason = err.what();
      return rec;
    }
    if (theta_t_out && global_epoch + 1 == cfg.rewind_epoch) {
      *theta_t_out = weights;
      theta_t_out->meta.epoch_tag = epoch_tag(cfg.rewind_epoch);
    }
    write_traj_snapshot(ws, save_trajectory, rec.run_id, global_epoch + 1, weights);
  }

  const EvalResult test = evaluate_dataset(model, weights, data.test, recipe.batch_size);
  rec.final_test_accuracy = test.accuracy;
  rec.final_test_loss = test.loss;
  if (final_out) {
    *final_out = std::move(weights);
    final_out->meta.epoch_tag = "final";
  }
  return rec;
}

}  // namespace

PretrainResult run_pretrain(const ExperimentConfig& cfg, const LoadedData& data,
                            Workspace* ws, bool save_trajectory) {
  cfg.validate();
  if (cfg.protocol != Protocol::pretrain)
    throw ArgumentError("run_pretrain: config protocol must be pretrain");
  const int t = cfg.rewind_epoch > 0 ? cfg.rewind_epoch : cfg.recipe.rewind_epoch;

  Model model(cfg.arch);
  PretrainResult out;
  out.theta0 = init_weights(model, InitSpec{InitScheme::kaiming_uniform, cfg.seeds.theta0});

  ExperimentConfig c = cfg;
  c.rewind_epoch = t;
  out.record = train_run(c, data, model, out.theta0, nullptr, 0, c.recipe.total_epochs,
                         "pretrain", ws, save_trajectory, &out.theta_t, &out.theta_T);
  out.theta_T.meta.epoch_tag = epoch_tag(c.recipe.total_epochs);
  if (out.record.failed) return out;
  if (t == 0) {
    out.theta_t = out.theta0;
    out.theta_t.meta.epoch_tag = "0";
  }

  if (ws) {
    const auto p0 = ws->snapshot_path(out.record.run_id, "0");
    write_snapshot(p0, out.theta0);
    out.record.checkpoints.push_back(p0.string());
    if (t != 0) {
      const auto pt = ws->snapshot_path(out.record.run_id, epoch_tag(t));
      write_snapshot(pt, out.theta_t);
      out.record.checkpoints.push_back(pt.string());
    }
    const auto pT = ws->snapshot_path(out.record.run_id, epoch_tag(c.recipe.total_epochs));
    write_snapshot(pT, out.theta_T);
    out.record.checkpoints.push_back(pT.string());
  }
  return out;
}

int imp_iterations_for(double sparsity) {
  if (sparsity <= 0.0) return 0;
  if (sparsity >= 1.0) throw ArgumentError("imp iterations: sparsity must be < 1");
  return static_cast<int>(std::llround(std::log(1.0 - sparsity) / std::log(0.8)));
}

ImpChainResult run_imp_chain(const ExperimentConfig& cfg, const LoadedData& data,
                             const WeightSnapshot& theta0, int target_k, Workspace* ws,
                             PruneScope scope) {
  if (target_k < 1) throw ArgumentError("imp chain: target_k must be >= 1");
  Model model(cfg.arch);
  ImpChainResult out;
  Mask current = Mask::all_ones(theta0);
  for (int j = 1; j <= target_k; ++j) {
    ExperimentConfig c = cfg;
    c.protocol = Protocol::lt;
    c.method = PruneMethod::imp;
    c.target_sparsity = imp_sparsity(j - 1);
    c.replicate = 0;
    c.subnet_lr = cfg.pretrain_lr;
    // Every iteration restarts from the same theta0.
    WeightSnapshot start = apply_mask(theta0, current);
    WeightSnapshot trained;
    RunRecord rec = train_run(c, data, model, std::move(start),
                              j == 1 ? nullptr : &current, 0, c.recipe.total_epochs,
                              "imp-chain-" + std::to_string(j), nullptr, false, nullptr,
                              &trained);
    out.records.push_back(rec);
    if (rec.failed) return out;
    current = imp_next(current, trained, scope);
    out.masks.push_back(current);
    out.completed_iterations = j;
    if (ws) {
      char tag[32];
      std::snprintf(tag, sizeof(tag), "imp%02d", j);
      write_mask(ws->mask_path(cfg.config_hash(), tag), current);
    }
  }
  return out;
}

RunRecord run_subnet(const ExperimentConfig& cfg, const LoadedData& data,
                     const Mask* mask, InitKind init, const SubnetArtifacts& art,
                     Workspace* ws, bool save_trajectory) {
  cfg.validate();
  Model model(cfg.arch);
  const std::string proto = protocol_name(cfg.protocol, cfg.method);

  if (init != InitKind::small_dense && !mask)
    throw DependencyError("subnet run needs a pruning mask (protocol " + proto + ")");

  WeightSnapshot start;
  int first_epoch = 0;
  int epochs = cfg.recipe.total_epochs;
  const Mask* train_mask = mask;
  std::optional<Model> sd_model;

  switch (init) {
    case InitKind::lottery:
      if (!art.theta0) throw DependencyError("lottery subnet needs the theta0 snapshot");
      start = apply_mask(*art.theta0, *mask);
      break;
    case InitKind::random_reinit: {
      if (cfg.seeds.theta0_prime == cfg.seeds.theta0)
        throw ConfigError("random reinit requires a seed different from theta0's");
      if (!art.theta0_prime) throw DependencyError("random reinit needs a theta0' snapshot");
      start = apply_mask(*art.theta0_prime, *mask);
      break;
    }
    case InitKind::rewind: {
      if (!art.theta_t)
        throw DependencyError("rewind subnet needs the epoch-t pretrain snapshot");
      if (cfg.rewind_epoch <= 0 || cfg.rewind_epoch >= cfg.recipe.total_epochs)
        throw ConfigError("rewind requires 0 < t < T");
      start = apply_mask(*art.theta_t, *mask);
      first_epoch = cfg.rewind_epoch;  // schedule resumes at epoch t
      epochs = cfg.recipe.total_epochs - cfg.rewind_epoch;
      break;
    }
    case InitKind::small_dense: {
      if (!mask)
        throw DependencyError("small-dense sizing needs the mask it mirrors");
      const int64_t bias_count = count_params(cfg.arch, ParamScope::all) -
                                 count_params(cfg.arch, ParamScope::prunable);
      const int64_t target = mask->kept() + bias_count;
      const ArchSpec sd_spec = build_small_dense(cfg.arch, target, cfg.sdt_tolerance);
      sd_model.emplace(sd_spec);
      start = init_weights(*sd_model,
                           InitSpec{InitScheme::kaiming_uniform,
                                    mix_seed(cfg.seeds.theta0_prime, "small-dense",
                                             static_cast<uint64_t>(cfg.replicate))});
      train_mask = nullptr;  // sdt ignores masks
      break;
    }
  }

  const Model& run_model = sd_model ? *sd_model : model;
  WeightSnapshot final_weights;
  RunRecord rec = train_run(cfg, data, run_model, std::move(start), train_mask,
                            first_epoch, epochs, proto, ws, save_trajectory, nullptr,
                            &final_weights);
  if (!rec.failed && ws) {
    const auto pf = ws->snapshot_path(rec.run_id, "final");
    write_snapshot(pf, final_weights);
    rec.checkpoints.push_back(pf.string());
  }
  return rec;
}

// ----------------------------------------------------------------------
// Sweep driver
// ----------------------------------------------------------------------

namespace {

std::pair<Protocol, PruneMethod> parse_protocol(const std::string& name) {
  if (name == "pretrain") return {Protocol::pretrain, PruneMethod::imp};
  if (name == "sdt") return {Protocol::sdt, PruneMethod::imp};
  if (name == "lt-imp") return {Protocol::lt, PruneMethod::imp};
  if (name == "lt-omp") return {Protocol::lt, PruneMethod::omp};
  if (name == "rr-imp") return {Protocol::rr, PruneMethod::imp};
  if (name == "rr-omp") return {Protocol::rr, PruneMethod::omp};
  if (name == "wr-imp") return {Protocol::wr, PruneMethod::imp};
  if (name == "wr-omp") return {Protocol::wr, PruneMethod::omp};
  throw ArgumentError("unknown protocol name: " + name);
}

struct PretrainKey {
  double lr;
  bool operator<(const PretrainKey& o) const { return lr < o.lr; }
};

}  // namespace

SweepPlan plan_sweep(const SweepGrid& grid) {
  if (grid.protocols.empty() || grid.pretrain_lrs.empty() || grid.sparsities.empty() ||
      grid.replicates < 1)
    throw ArgumentError("sweep grid is empty");
  SweepPlan plan;
  std::vector<double> subnet_lrs = grid.subnet_lrs;
  for (const std::string& pname : grid.protocols) {
    const auto [proto, method] = parse_protocol(pname);
    if (proto == Protocol::pretrain) continue;  // implied prerequisite
    for (double plr : grid.pretrain_lrs) {
      const std::vector<double> slrs =
          subnet_lrs.empty() ? std::vector<double>{plr} : subnet_lrs;
      for (double slr : slrs)
        for (double s : grid.sparsities)
          for (int r = 0; r < grid.replicates; ++r)
            plan.cells.push_back(SweepCell{proto, method, plr, slr, s, r});
    }
  }
  std::vector<double> uniq = grid.pretrain_lrs;
  std::sort(uniq.begin(), uniq.end());
  uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
  plan.unique_pretrains = static_cast<int>(uniq.size());
  plan.naive_pretrains = static_cast<int>(uniq.size()) * grid.replicates;
  return plan;
}

std::vector<ResultRecord> run_sweep(const ExperimentConfig& base, const SweepGrid& grid,
                                    Workspace& ws) {
  const SweepPlan plan = plan_sweep(grid);
  ResultsLog log(ws.results_path());
  std::vector<ResultRecord> results;
  std::mutex results_mutex;

  const LoadedData data = load_dataset(base.dataset, base.seeds.data);

  struct PretrainArtifact {
    PretrainResult pre;
    WeightSnapshot theta0_prime;
    std::map<int, Mask> imp_masks;              // k -> mask
    std::map<std::string, Mask> omp_masks;      // sparsity key -> mask
  };

  const auto sparsity_key = [](double s) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6f", s);
    return std::string(buf);
  };

  auto emit = [&](const ExperimentConfig& cfg, const RunRecord& rec,
                  const std::string& proto) {
    if (rec.failed) {
      std::lock_guard<std::mutex> lk(results_mutex);
      std::printf("[sweep] FAILED %-9s lr=%g s=%.4f rep=%d: %s\n", proto.c_str(),
                  cfg.subnet_lr, cfg.target_sparsity, cfg.replicate,
                  rec.fail_reason.c_str());
      std::fflush(stdout);
      return;
    }
    ResultRecord out;
    out.run_id = rec.run_id;
    out.protocol = proto;
    out.pretrain_lr = cfg.pretrain_lr;
    out.subnet_lr = cfg.subnet_lr;
    out.sparsity = cfg.target_sparsity;
    out.seed = cfg.seeds.theta0;
    out.replicate = cfg.replicate;
    out.split = "test";
    out.accuracy = rec.final_test_accuracy;
    out.loss = rec.final_test_loss;
    out.config_hash = rec.config_hash;
    ResultRecord train_row = out;
    if (!rec.epochs.empty()) {
      train_row.split = "train";
      train_row.accuracy = rec.epochs.back().train_accuracy;
      train_row.loss = rec.epochs.back().train_loss;
    }
    {
      std::lock_guard<std::mutex> lk(results_mutex);
      log.append(out);
      if (!rec.epochs.empty()) log.append(train_row);
      results.push_back(out);
      std::printf("[sweep] done %-9s pre_lr=%g lr=%g s=%.4f rep=%d acc=%.4f\n",
                  proto.c_str(), cfg.pretrain_lr, cfg.subnet_lr, cfg.target_sparsity,
                  cfg.replicate, rec.final_test_accuracy);
      std::fflush(stdout);
    }
  };

  auto make_pretrain_cfg = [&](double lr) {
    ExperimentConfig cfg = base;
    cfg.protocol = Protocol::pretrain;
    cfg.method = PruneMethod::imp;
    cfg.pretrain_lr = lr;
    cfg.subnet_lr = lr;
    cfg.target_sparsity = 0.0;
    cfg.replicate = 0;
    cfg.recipe.initial_lr = lr;
    if (cfg.rewind_epoch == 0) cfg.rewind_epoch = cfg.recipe.rewind_epoch;
    return cfg;
  };

  // Which mask families does the grid need at this pretrain lr?
  bool any_imp = false;
  bool any_omp = false;
  for (const SweepCell& c : plan.cells) {
    if (c.protocol == Protocol::sdt)
      any_omp = true;  // sdt sizes itself from the omp-exact kept count
    else if (c.method == PruneMethod::imp)
      any_imp = true;
    else
      any_omp = true;
  }

  // Pretrain + masks for one lr. `store` controls whether artifacts are
  // written out (the naive path recomputes them in memory only).
  auto build_artifact = [&](double lr, Workspace* store) {
    ExperimentConfig cfg = make_pretrain_cfg(lr);
    PretrainArtifact art;
    art.pre = run_pretrain(cfg, data, store);
    if (art.pre.record.failed)
      throw NumericError("pretrain diverged at lr " + std::to_string(lr) + ": " +
                         art.pre.record.fail_reason);
    Model model(cfg.arch);
    art.theta0_prime = init_weights(
        model, InitSpec{InitScheme::kaiming_uniform, cfg.seeds.theta0_prime});
    if (any_omp) {
      for (double s : grid.sparsities) {
        Mask m = omp_mask(art.pre.theta_T, SparsityRatio(s), grid.scope);
        if (store)
          write_mask(store->mask_path(cfg.config_hash(), "omp_s" + sparsity_key(s)), m);
        art.omp_masks.emplace(sparsity_key(s), std::move(m));
      }
    }
    if (any_imp) {
      int max_k = 0;
      for (double s : grid.sparsities) max_k = std::max(max_k, imp_iterations_for(s));
      if (max_k > 0) {
        ImpChainResult chain =
            run_imp_chain(cfg, data, art.pre.theta0, max_k, store, grid.scope);
        if (chain.completed_iterations < max_k)
          throw NumericError("imp chain diverged at lr " + std::to_string(lr));
        for (int k = 1; k <= chain.completed_iterations; ++k)
          art.imp_masks.insert_or_assign(k, chain.masks[static_cast<size_t>(k - 1)]);
      }
    }
    return art;
  };

  // Stage 1+2: shared prerequisites, one artifact per unique pretrain lr.
  std::map<double, PretrainArtifact> pretrains;
  for (double lr : grid.pretrain_lrs) {
    if (pretrains.count(lr)) continue;
    try {
      PretrainArtifact art = build_artifact(lr, &ws);
      emit(make_pretrain_cfg(lr), art.pre.record, "pretrain");
      pretrains.emplace(lr, std::move(art));
    } catch (const Error& e) {
      std::printf("[sweep] FAILED pretrain lr=%g: %s\n", lr, e.what());
      std::fflush(stdout);
    }
  }

  // Stage 3: subnet cells, parallel over `jobs` threads.
  std::atomic<size_t> next_cell{0};
  auto worker = [&]() {
    for (;;) {
      const size_t i = next_cell.fetch_add(1);
      if (i >= plan.cells.size()) return;
      const SweepCell& cell = plan.cells[i];
      const std::string proto = protocol_name(cell.protocol, cell.method);
      try {
        const PretrainArtifact* art = nullptr;
        PretrainArtifact naive_art;
        if (grid.dedup) {
          auto it = pretrains.find(cell.pretrain_lr);
          if (it == pretrains.end())
            throw DependencyError("pretrain at lr " + std::to_string(cell.pretrain_lr) +
                                  " is unavailable");
          art = &it->second;
        } else {
          naive_art = build_artifact(cell.pretrain_lr, nullptr);
          art = &naive_art;
        }

        ExperimentConfig cfg = base;
        cfg.protocol = cell.protocol;
        cfg.method = cell.method;
        cfg.pretrain_lr = cell.pretrain_lr;
        cfg.subnet_lr = cell.subnet_lr;
        cfg.recipe.initial_lr = cell.subnet_lr;
        cfg.target_sparsity = cell.sparsity;
        cfg.replicate = cell.replicate;
        if (cfg.rewind_epoch == 0) cfg.rewind_epoch = cfg.recipe.rewind_epoch;
        // Replicates perturb the data order and the reinit draw, never theta0.
        if (cell.replicate != 0) {
          cfg.seeds.data = mix_seed(base.seeds.data, "replicate",
                                    static_cast<uint64_t>(cell.replicate));
          cfg.seeds.theta0_prime = mix_seed(base.seeds.theta0_prime, "replicate",
                                            static_cast<uint64_t>(cell.replicate));
        }

        const Mask* mask = nullptr;
        if (cell.protocol == Protocol::sdt || cell.method == PruneMethod::omp)
          mask = &art->omp_masks.at(sparsity_key(cell.sparsity));
        else
          mask = &art->imp_masks.at(imp_iterations_for(cell.sparsity));

        InitKind init = InitKind::lottery;
        if (cell.protocol == Protocol::rr) init = InitKind::random_reinit;
        if (cell.protocol == Protocol::wr) init = InitKind::rewind;
        if (cell.protocol == Protocol::sdt) init = InitKind::small_dense;

        SubnetArtifacts sa;
        sa.theta0 = &art->pre.theta0;
        sa.theta0_prime = &art->theta0_prime;
        sa.theta_t = &art->pre.theta_t;

        WeightSnapshot reinit;
        if (cell.protocol == Protocol::rr && cell.replicate != 0) {
          Model model(cfg.arch);
          reinit = init_weights(
              model, InitSpec{InitScheme::kaiming_uniform, cfg.seeds.theta0_prime});
          sa.theta0_prime = &reinit;
        }
        const RunRecord rec = run_subnet(cfg, data, mask, init, sa, &ws);
        emit(cfg, rec, proto);
      } catch (const Error& e) {
        std::lock_guard<std::mutex> lk(results_mutex);
        std::printf("[sweep] FAILED %-9s pre_lr=%g lr=%g s=%.4f rep=%d: %s\n",
                    proto.c_str(), cell.pretrain_lr, cell.subnet_lr, cell.sparsity,
                    cell.replicate, e.what());
        std::fflush(stdout);
      }
    }
  };

  const int jobs = std::max(1, grid.jobs);
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }
  return results;
}

}  // namespace lth
