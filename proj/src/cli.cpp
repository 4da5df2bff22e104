#include "lth/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#include "lth/adjudicate.hpp"
#include "lth/landscape.hpp"
#include "lth/manifest.hpp"
#include "lth/protocol.hpp"

namespace lth {

namespace {

using nlohmann::json;

std::filesystem::path resolve_out_dir(const Manifest& m, const std::string& override_dir) {
  if (!override_dir.empty()) return override_dir;
  if (!m.out_dir.empty() && m.out_dir != "out") return m.out_dir;
  if (const char* env = std::getenv("LTH_OUT")) return std::filesystem::path(env) / m.out_dir;
  return m.out_dir;
}

// Every subcommand prints its effective configuration and writes it next
// to the outputs.
void echo_config(const Manifest& m, const Workspace& ws, const std::string& command) {
  const std::string echo = manifest_echo(m);
  std::printf("[%s] effective configuration:\n%s\n", command.c_str(), echo.c_str());
  const std::filesystem::path dir = ws.root / "echo";
  std::filesystem::create_directories(dir);
  std::ofstream out(dir / (command + "_config.json"), std::ios::trunc);
  out << echo << "\n";
}

ExperimentConfig pretrain_cfg(const Manifest& m, double lr) {
  ExperimentConfig cfg = m.base;
  cfg.protocol = Protocol::pretrain;
  cfg.method = PruneMethod::imp;
  cfg.pretrain_lr = lr;
  cfg.subnet_lr = lr;
  cfg.target_sparsity = 0.0;
  cfg.replicate = 0;
  cfg.recipe.initial_lr = lr;
  if (cfg.rewind_epoch == 0) cfg.rewind_epoch = cfg.recipe.rewind_epoch;
  return cfg;
}

std::string sparsity_key(double s) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", s);
  return buf;
}

WeightSnapshot load_pretrain_snapshot(const Workspace& ws, const ExperimentConfig& cfg,
                                      const std::string& tag) {
  const auto path = ws.snapshot_path(cfg.run_id(), tag);
  if (!std::filesystem::exists(path))
    throw DependencyError("missing pretrain snapshot " + path.string() +
                          " (run `lth pretrain` first)");
  return read_snapshot(path);
}

Mask load_mask_for(const Workspace& ws, const ExperimentConfig& pre_cfg,
                   PruneMethod method, double sparsity) {
  std::string tag;
  if (method == PruneMethod::omp) {
    tag = "omp_s" + sparsity_key(sparsity);
  } else {
    const int k = imp_iterations_for(sparsity);
    if (k < 1) throw ArgumentError("imp masks need a sparsity of at least 0.2");
    char buf[32];
    std::snprintf(buf, sizeof(buf), "imp%02d", k);
    tag = buf;
  }
  const auto path = ws.mask_path(pre_cfg.config_hash(), tag);
  if (!std::filesystem::exists(path))
    throw DependencyError("missing mask " + path.string() + " (run `lth prune` first)");
  return read_mask(path);
}

void append_verdict(const Workspace& ws, const AdjudicationResult& res,
                    const AdjudicateFilter& filter, const VerdictOptions& options) {
  json j;
  j["sparsity"] = filter.sparsity;
  j["method"] = filter.method;
  j["subnet_protocol"] = filter.subnet_protocol;
  j["mode"] = options.mode == QuantifierMode::independent ? "independent"
                                                          : "single-witness";
  j["strict_baselines"] = options.strict_global_baselines;
  auto cond = [](const ConditionReport& c) {
    json o;
    o["evaluated"] = c.evaluated;
    o["pass"] = c.pass;
    if (c.witness_lr) o["witness_lr"] = *c.witness_lr;
    return o;
  };
  const ConditionsReport& rep = res.verdict.report;
  j["conditions"] = {{"c1", cond(rep.c1)},
                     {"c2", cond(rep.c2)},
                     {"c3", cond(rep.c3)},
                     {"c4", cond(rep.c4)},
                     {"c5", cond(rep.c5)}};
  j["classification"] = ticket_class_name(res.verdict.classification);
  if (rep.lt_rr_gap_at_witness) j["lt_rr_gap"] = *rep.lt_rr_gap_at_witness;
  std::filesystem::create_directories(ws.root);
  std::ofstream out(ws.root / "verdicts.jsonl", std::ios::app);
  out << j.dump() << "\n";
}

struct CommonArgs {
  std::string manifest_path;
  std::string out_dir;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--manifest", args.manifest_path, "run manifest (JSON)")
      ->required();
  cmd->add_option("--out", args.out_dir, "output directory override");
}

int run_cli(std::vector<std::string> args) {
  CLI::App app{"lottery-ticket experiment toolkit"};
  app.require_subcommand(1);

  // --- pretrain ---
  auto* cmd_pre = app.add_subcommand("pretrain", "train the dense network");
  CommonArgs pre_args;
  add_common(cmd_pre, pre_args);
  double pre_lr = 0.0;
  bool pre_traj = false;
  cmd_pre->add_option("--lr", pre_lr, "override the initial learning rate");
  cmd_pre->add_flag("--save-trajectory", pre_traj, "snapshot every epoch end");

  // --- prune ---
  auto* cmd_prune = app.add_subcommand("prune", "produce pruning masks");
  CommonArgs prune_args;
  add_common(cmd_prune, prune_args);
  std::string prune_method = "imp";
  double prune_sparsity = -1.0;
  int prune_iterations = 0;
  std::string prune_scope = "global";
  double prune_lr = 0.0;
  cmd_prune->add_option("--method", prune_method, "imp | omp")
      ->check(CLI::IsMember({"imp", "omp"}));
  cmd_prune->add_option("--sparsity", prune_sparsity, "target sparsity in [0,1)");
  cmd_prune->add_option("--iterations", prune_iterations, "IMP iteration count");
  cmd_prune->add_option("--scope", prune_scope, "global | per-layer")
      ->check(CLI::IsMember({"global", "per-layer"}));
  cmd_prune->add_option("--lr", prune_lr, "pretrain lr the masks derive from");

  // --- subnet ---
  auto* cmd_sub = app.add_subcommand("subnet", "train one subnetwork");
  CommonArgs sub_args;
  add_common(cmd_sub, sub_args);
  std::string sub_init = "lottery";
  std::string sub_method = "imp";
  double sub_sparsity = -1.0;
  double sub_lr = 0.0;
  double sub_subnet_lr = 0.0;
  int sub_replicate = 0;
  bool sub_traj = false;
  cmd_sub->add_option("--init", sub_init, "lottery | random | rewind | small-dense")
      ->check(CLI::IsMember({"lottery", "random", "rewind", "small-dense"}));
  cmd_sub->add_option("--method", sub_method, "imp | omp")
      ->check(CLI::IsMember({"imp", "omp"}));
  cmd_sub->add_option("--sparsity", sub_sparsity, "target sparsity")->required();
  cmd_sub->add_option("--lr", sub_lr, "pretrain lr (mask source)");
  cmd_sub->add_option("--subnet-lr", sub_subnet_lr, "subnet training lr");
  cmd_sub->add_option("--replicate", sub_replicate, "replicate index");
  cmd_sub->add_flag("--save-trajectory", sub_traj, "snapshot every epoch end");

  // --- sweep ---
  auto* cmd_sweep = app.add_subcommand("sweep", "run the whole grid");
  CommonArgs sweep_args;
  add_common(cmd_sweep, sweep_args);
  int sweep_jobs = 0;
  cmd_sweep->add_option("--jobs", sweep_jobs, "parallel subnet cells");

  // --- adjudicate ---
  auto* cmd_adj = app.add_subcommand("adjudicate", "evaluate the ticket conditions");
  CommonArgs adj_args;
  add_common(cmd_adj, adj_args);
  std::string adj_mode = "independent";
  std::string adj_method = "imp";
  std::string adj_subnet = "lt";
  double adj_sparsity = -1.0;
  int adj_class = 0;
  double adj_pretrain_lr = 0.0;
  bool adj_strict = false;
  std::string adj_table;
  cmd_adj->add_option("--mode", adj_mode, "independent | single-witness")
      ->check(CLI::IsMember({"independent", "single-witness"}));
  cmd_adj->add_option("--method", adj_method, "imp | omp")
      ->check(CLI::IsMember({"imp", "omp"}));
  cmd_adj->add_option("--subnet", adj_subnet, "lt | wr (rewinding conditions)")
      ->check(CLI::IsMember({"lt", "wr"}));
  cmd_adj->add_option("--sparsity", adj_sparsity, "sparsity to adjudicate");
  cmd_adj->add_option("--dataset-class", adj_class,
                      "class count selecting the similarity threshold");
  cmd_adj->add_option("--pretrain-lr", adj_pretrain_lr,
                      "fix the pretrain lr (decoupled tables)");
  cmd_adj->add_flag("--strict-baselines", adj_strict,
                    "compare against max-over-lr RR/SDT instead of witness-local");
  cmd_adj->add_option("--table", adj_table, "adjudicate an explicit accuracy table");

  // --- correlate ---
  auto* cmd_corr = app.add_subcommand("correlate", "top-p overlap of two snapshots");
  CommonArgs corr_args;
  add_common(cmd_corr, corr_args);
  double corr_p = 0.1;
  std::string corr_a, corr_b, corr_mask;
  cmd_corr->add_option("--p", corr_p, "top fraction p in (0,1]");
  cmd_corr->add_option("--a", corr_a, "first snapshot file")->required();
  cmd_corr->add_option("--b", corr_b, "second snapshot file")->required();
  cmd_corr->add_option("--mask", corr_mask, "restrict to mask-kept weights");

  // --- landscape ---
  auto* cmd_land = app.add_subcommand("landscape", "loss grid + trajectory projection");
  CommonArgs land_args;
  add_common(cmd_land, land_args);
  std::string land_run;
  int land_grid_n = 21;
  double land_span = 1.0;
  int land_stride = 1;
  int land_eval = 1024;
  cmd_land->add_option("--run", land_run, "run id with a saved trajectory")->required();
  cmd_land->add_option("--grid-n", land_grid_n, "grid nodes per axis (odd)");
  cmd_land->add_option("--span", land_span, "half-width of the grid in each direction");
  cmd_land->add_option("--stride", land_stride, "use every k-th checkpoint");
  cmd_land->add_option("--eval-samples", land_eval, "loss evaluation subsample size");

  // --- report ---
  auto* cmd_rep = app.add_subcommand("report", "aggregate the results log");
  CommonArgs rep_args;
  add_common(cmd_rep, rep_args);
  std::string rep_format = "csv";
  std::string rep_protocol;
  double rep_sparsity = -1.0;
  cmd_rep->add_option("--format", rep_format, "csv | json")
      ->check(CLI::IsMember({"csv", "json"}));
  cmd_rep->add_option("--protocol", rep_protocol, "filter by protocol");
  cmd_rep->add_option("--sparsity", rep_sparsity, "filter by sparsity");

  std::reverse(args.begin(), args.end());  // CLI11 parses reversed vectors
  try {
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  auto with_manifest = [&](const CommonArgs& a, const std::string& cmd_name) {
    Manifest m = load_manifest(a.manifest_path);
    Workspace ws(resolve_out_dir(m, a.out_dir));
    std::filesystem::create_directories(ws.root);
    echo_config(m, ws, cmd_name);
    return std::pair<Manifest, Workspace>(std::move(m), std::move(ws));
  };

  if (cmd_pre->parsed()) {
    auto [m, ws] = with_manifest(pre_args, "pretrain");
    const double lr = pre_lr > 0.0 ? pre_lr : m.base.recipe.initial_lr;
    const ExperimentConfig cfg = pretrain_cfg(m, lr);
    const LoadedData data = load_dataset(cfg.dataset, cfg.seeds.data);
    const PretrainResult res =
        run_pretrain(cfg, data, &ws, m.save_trajectory || pre_traj);
    if (res.record.failed) {
      std::printf("pretrain FAILED: %s\n", res.record.fail_reason.c_str());
      return 2;
    }
    ResultsLog log(ws.results_path());
    ResultRecord rec;
    rec.run_id = res.record.run_id;
    rec.protocol = "pretrain";
    rec.pretrain_lr = lr;
    rec.subnet_lr = lr;
    rec.sparsity = 0.0;
    rec.seed = cfg.seeds.theta0;
    rec.replicate = 0;
    rec.split = "test";
    rec.accuracy = res.record.final_test_accuracy;
    rec.loss = res.record.final_test_loss;
    rec.config_hash = res.record.config_hash;
    log.append(rec);
    std::printf("pretrain done: run %s, final test acc %.4f, snapshots at",
                res.record.run_id.c_str(), res.record.final_test_accuracy);
    for (const std::string& c : res.record.checkpoints) std::printf(" %s", c.c_str());
    std::printf("\n");
    return 0;
  }

  if (cmd_prune->parsed()) {
    auto [m, ws] = with_manifest(prune_args, "prune");
    const double lr = prune_lr > 0.0 ? prune_lr : m.base.recipe.initial_lr;
    const ExperimentConfig cfg = pretrain_cfg(m, lr);
    const PruneScope scope =
        prune_scope == "global" ? PruneScope::global : PruneScope::per_layer;
    double target = prune_sparsity;
    if (prune_method == "imp") {
      const int k = prune_iterations > 0 ? prune_iterations
                                         : imp_iterations_for(prune_sparsity);
      if (k < 1) throw ArgumentError("prune: pass --iterations or --sparsity");
      const WeightSnapshot theta0 = load_pretrain_snapshot(ws, cfg, "0");
      const LoadedData data = load_dataset(cfg.dataset, cfg.seeds.data);
      const ImpChainResult chain = run_imp_chain(cfg, data, theta0, k, &ws, scope);
      if (chain.completed_iterations < k) {
        std::printf("imp chain halted after %d iterations\n",
                    chain.completed_iterations);
        return 2;
      }
      std::printf("imp chain done: %d iterations, final sparsity %.4f\n", k,
                  chain.masks.back().sparsity);
      return 0;
    }
    if (target < 0.0) throw ArgumentError("prune --method omp needs --sparsity");
    const WeightSnapshot theta_T =
        load_pretrain_snapshot(ws, cfg, std::to_string(cfg.recipe.total_epochs));
    const Mask mask = omp_mask(theta_T, SparsityRatio(target), scope);
    const auto path = ws.mask_path(cfg.config_hash(), "omp_s" + sparsity_key(target));
    write_mask(path, mask);
    std::printf("omp mask written: %s (achieved sparsity %.6f)\n",
                path.string().c_str(), mask.sparsity);
    return 0;
  }

  if (cmd_sub->parsed()) {
    auto [m, ws] = with_manifest(sub_args, "subnet");
    const double plr = sub_lr > 0.0 ? sub_lr : m.base.recipe.initial_lr;
    const double slr = sub_subnet_lr > 0.0 ? sub_subnet_lr : plr;
    const ExperimentConfig pre = pretrain_cfg(m, plr);

    ExperimentConfig cfg = m.base;
    cfg.pretrain_lr = plr;
    cfg.subnet_lr = slr;
    cfg.recipe.initial_lr = slr;
    cfg.method = sub_method == "imp" ? PruneMethod::imp : PruneMethod::omp;
    cfg.target_sparsity = sub_sparsity;
    cfg.replicate = sub_replicate;
    if (cfg.rewind_epoch == 0) cfg.rewind_epoch = cfg.recipe.rewind_epoch;
    if (sub_replicate != 0) {
      cfg.seeds.data = mix_seed(m.base.seeds.data, "replicate",
                                static_cast<uint64_t>(sub_replicate));
      cfg.seeds.theta0_prime = mix_seed(m.base.seeds.theta0_prime, "replicate",
                                        static_cast<uint64_t>(sub_replicate));
    }

    InitKind init = InitKind::lottery;
    cfg.protocol = Protocol::lt;
    if (sub_init == "random") {
      init = InitKind::random_reinit;
      cfg.protocol = Protocol::rr;
    } else if (sub_init == "rewind") {
      init = InitKind::rewind;
      cfg.protocol = Protocol::wr;
    } else if (sub_init == "small-dense") {
      init = InitKind::small_dense;
      cfg.protocol = Protocol::sdt;
    }

    const Mask mask = load_mask_for(ws, pre, cfg.method, sub_sparsity);
    WeightSnapshot theta0, theta0_prime, theta_t;
    SubnetArtifacts art;
    if (init == InitKind::lottery) {
      theta0 = load_pretrain_snapshot(ws, pre, "0");
      art.theta0 = &theta0;
    } else if (init == InitKind::random_reinit) {
      Model model(cfg.arch);
      theta0_prime = init_weights(
          model, InitSpec{InitScheme::kaiming_uniform, cfg.seeds.theta0_prime});
      art.theta0_prime = &theta0_prime;
    } else if (init == InitKind::rewind) {
      theta_t = load_pretrain_snapshot(ws, pre, std::to_string(cfg.rewind_epoch));
      art.theta_t = &theta_t;
    }

    const LoadedData data = load_dataset(cfg.dataset, cfg.seeds.data);
    const RunRecord rec = run_subnet(cfg, data, &mask, init, art, &ws,
                                     m.save_trajectory || sub_traj);
    if (rec.failed) {
      std::printf("subnet FAILED: %s\n", rec.fail_reason.c_str());
      return 2;
    }
    ResultsLog log(ws.results_path());
    ResultRecord out;
    out.run_id = rec.run_id;
    out.protocol = rec.protocol;
    out.pretrain_lr = plr;
    out.subnet_lr = slr;
    out.sparsity = sub_sparsity;
    out.seed = cfg.seeds.theta0;
    out.replicate = sub_replicate;
    out.split = "test";
    out.accuracy = rec.final_test_accuracy;
    out.loss = rec.final_test_loss;
    out.config_hash = rec.config_hash;
    log.append(out);
    std::printf("subnet done: %s acc %.4f (run %s)\n", rec.protocol.c_str(),
                rec.final_test_accuracy, rec.run_id.c_str());
    return 0;
  }

  if (cmd_sweep->parsed()) {
    auto [m, ws] = with_manifest(sweep_args, "sweep");
    SweepGrid grid = m.sweep;
    if (sweep_jobs > 0) grid.jobs = sweep_jobs;
    const std::vector<ResultRecord> results = run_sweep(m.base, grid, ws);
    std::printf("sweep done: %zu result rows in %s\n", results.size(),
                ws.results_path().string().c_str());
    return 0;
  }

  if (cmd_adj->parsed()) {
    auto [m, ws] = with_manifest(adj_args, "adjudicate");
    VerdictThresholds thr = m.thresholds;
    if (adj_class > 0) {
      const double band = thr.weak_band;
      thr = VerdictThresholds::for_dataset_class(adj_class);
      thr.weak_band = band;
    }
    VerdictOptions options;
    options.mode = adj_mode == "independent" ? QuantifierMode::independent
                                             : QuantifierMode::single_witness;
    options.strict_global_baselines = adj_strict;

    AdjudicateFilter filter;
    filter.method = adj_method;
    filter.subnet_protocol = adj_subnet;
    filter.trained_full_T = m.assume_sufficient_epochs;
    if (adj_pretrain_lr > 0.0) filter.pretrain_lr = adj_pretrain_lr;

    AdjudicationResult res;
    if (!adj_table.empty()) {
      const AccuracyTable table = load_accuracy_table(adj_table);
      filter.sparsity = table.sparsity;
      res.table = table;
      res.verdict = classify(check_conditions(table, thr, options));
      res.text = render_report(table, res.verdict);
    } else {
      if (adj_sparsity < 0.0)
        throw ArgumentError("adjudicate needs --sparsity (or --table)");
      filter.sparsity = adj_sparsity;
      const std::vector<ResultRecord> records =
          ResultsLog::read_all(ws.results_path());
      res = adjudicate_run(records, filter, thr, options);
    }
    std::printf("%s", res.text.c_str());
    append_verdict(ws, res, filter, options);
    return 0;
  }

  if (cmd_corr->parsed()) {
    auto [m, ws] = with_manifest(corr_args, "correlate");
    const WeightSnapshot a = read_snapshot(corr_a);
    const WeightSnapshot b = read_snapshot(corr_b);
    std::optional<Mask> mask;
    if (!corr_mask.empty()) mask = read_mask(corr_mask);
    const CorrelationReport rep = correlation_indicator(
        a, b, corr_p, mask ? &*mask : nullptr, m.thresholds.weak_band);
    const char* cls = rep.cls == CorrelationReport::Class::weak ? "weak"
                      : rep.cls == CorrelationReport::Class::positive ? "positive"
                                                                      : "negative";
    std::printf("R_p = %.6f at p = %g -> %s correlation\n", rep.r_p, rep.p, cls);
    for (const auto& l : rep.layers)
      std::printf("  %-12s n=%lld top=%lld overlap=%lld\n", l.name.c_str(),
                  static_cast<long long>(l.candidates), static_cast<long long>(l.top_size),
                  static_cast<long long>(l.intersection));
    return 0;
  }

  if (cmd_land->parsed()) {
    auto [m, ws] = with_manifest(land_args, "landscape");
    const std::filesystem::path traj_dir = ws.trajectory_dir(land_run);
    if (!std::filesystem::exists(traj_dir))
      throw DependencyError("no trajectory snapshots under " + traj_dir.string() +
                            " (run with --save-trajectory first)");
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(traj_dir))
      if (entry.path().extension() == ".lths") files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    if (land_stride < 1) throw ArgumentError("landscape: stride must be >= 1");
    std::vector<WeightSnapshot> checkpoints;
    for (size_t i = 0; i < files.size(); i += static_cast<size_t>(land_stride))
      checkpoints.push_back(read_snapshot(files[i]));
    if ((files.size() - 1) % static_cast<size_t>(land_stride) != 0)
      checkpoints.push_back(read_snapshot(files.back()));  // keep the final point

    const Model model(m.base.arch);
    const LoadedData data = load_dataset(m.base.dataset, m.base.seeds.data);
    // Fixed seeded subsample for the grid evaluations.
    const int64_t want = std::min<int64_t>(land_eval, data.train.size());
    Rng rng(mix_seed(m.base.seeds.data, "landscape"));
    std::vector<int64_t> idx(static_cast<size_t>(data.train.size()));
    for (int64_t i = 0; i < data.train.size(); ++i) idx[static_cast<size_t>(i)] = i;
    rng.shuffle(idx);
    idx.resize(static_cast<size_t>(want));
    std::sort(idx.begin(), idx.end());
    Dataset sub;
    sub.sample_shape = data.train.sample_shape;
    sub.num_classes = data.train.num_classes;
    sub.split = Split::train;
    for (int64_t i : idx) {
      const std::vector<float> s = data.train.sample(i);
      sub.samples.insert(sub.samples.end(), s.begin(), s.end());
      sub.labels.push_back(data.train.labels[static_cast<size_t>(i)]);
    }
    const LabeledBatch batch = take_batch(sub, 0, sub.size());

    const TrajectoryDirections dirs = pca_directions(checkpoints);
    const WeightSnapshot& center = checkpoints.back();
    const LossGrid grid =
        loss_grid(model, center, dirs.d1, dirs.d2, land_span, land_grid_n, batch);
    const std::vector<ProjectedPoint> traj =
        project_trajectory(checkpoints, dirs.d1, dirs.d2, center);

    const std::filesystem::path out_dir = ws.root / "landscape";
    write_grid_csv(out_dir / (land_run + "_grid.csv"), grid);
    write_trajectory_csv(out_dir / (land_run + "_trajectory.csv"), traj);
    std::printf(
        "landscape done: %zu checkpoints, explained variance %.3f + %.3f, "
        "eval subsample %lld, outputs in %s\n",
        checkpoints.size(), dirs.variance_d1, dirs.variance_d2,
        static_cast<long long>(want), out_dir.string().c_str());
    return 0;
  }

  if (cmd_rep->parsed()) {
    auto [m, ws] = with_manifest(rep_args, "report");
    ReportFilter filter;
    if (!rep_protocol.empty()) filter.protocol = rep_protocol;
    if (rep_sparsity >= 0.0) filter.sparsity = rep_sparsity;
    const auto out =
        emit_report(ws.results_path(), filter,
                    rep_format == "csv" ? ReportFormat::csv : ReportFormat::json,
                    ws.root / "reports");
    std::printf("report written: %s\n", out.string().c_str());
    return 0;
  }

  return 0;
}

}  // namespace

int dispatch(std::vector<std::string> args) {
  try {
    return run_cli(std::move(args));
  } catch (const CLI::CallForHelp&) {
    return 0;
  } catch (const CLI::ParseError& e) {
    std::fprintf(stderr, "%s\n", e.what());
    return 1;
  } catch (const DependencyError& e) {
    std::fprintf(stderr, "dependency error: %s\n", e.what());
    return 3;
  } catch (const NumericError& e) {
    std::fprintf(stderr, "numeric failure: %s\n", e.what());
    return 2;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}

}  // namespace lth
