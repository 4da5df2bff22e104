#include "lth/adjudicate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>

namespace lth {

VerdictThresholds VerdictThresholds::for_dataset_class(int num_classes) {
  VerdictThresholds t;
  if (num_classes >= 1000)
    t.delta_similar = 1.5;
  else if (num_classes >= 100)
    t.delta_similar = 1.0;
  else
    t.delta_similar = 0.5;
  return t;
}

void AccuracyTable::validate() const {
  if (rows.empty()) throw ArgumentError("accuracy table has no rows");
  for (size_t i = 1; i < rows.size(); ++i)
    if (rows[i].lr <= rows[i - 1].lr)
      throw ArgumentError("accuracy table rows must be sorted by lr ascending");
}

bool similar(double a, double b, double delta_similar) {
  return a >= b - delta_similar;
}

namespace {

std::string fmt_lr(double lr) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%g", lr);
  return buf;
}

std::string fmt_acc(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

// argmax of LT accuracy over rows passing `pred`; ties keep the lower lr.
template <class Pred>
std::optional<size_t> best_lt_row(const AccuracyTable& t, Pred pred) {
  std::optional<size_t> best;
  for (size_t i = 0; i < t.rows.size(); ++i) {
    if (!t.rows[i].lt.present || !pred(i)) continue;
    if (!best || t.rows[i].lt.mean > t.rows[*best].lt.mean) best = i;
  }
  return best;
}

}  // namespace

ConditionsReport check_conditions(const AccuracyTable& table,
                                  const VerdictThresholds& thr,
                                  const VerdictOptions& options) {
  table.validate();
  ConditionsReport rep;
  rep.options = options;
  rep.thresholds = thr;
  rep.sparsity = table.sparsity;
  const auto& rows = table.rows;

  std::optional<size_t> max_pre, max_rr, max_sdt, max_lt;
  for (size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].pre.present && (!max_pre || rows[i].pre.mean > rows[*max_pre].pre.mean))
      max_pre = i;
    if (rows[i].rr.present && (!max_rr || rows[i].rr.mean > rows[*max_rr].rr.mean))
      max_rr = i;
    if (rows[i].sdt.present && (!max_sdt || rows[i].sdt.mean > rows[*max_sdt].sdt.mean))
      max_sdt = i;
    if (rows[i].lt.present && (!max_lt || rows[i].lt.mean > rows[*max_lt].lt.mean))
      max_lt = i;
  }
  if (max_lt) rep.best_lt = {rows[*max_lt].lr, rows[*max_lt].lt.mean};
  if (max_pre) rep.best_pre = {rows[*max_pre].lr, rows[*max_pre].pre.mean};
  if (max_rr) rep.best_rr = {rows[*max_rr].lr, rows[*max_rr].rr.mean};
  if (max_sdt) rep.best_sdt = {rows[*max_sdt].lr, rows[*max_sdt].sdt.mean};
  if (rep.best_lt && rep.best_pre)
    rep.best_lt_similar_to_best_pre =
        similar(rep.best_lt->second, rep.best_pre->second, thr.delta_similar);

  // Raw per-lr predicates.
  auto g3 = [&](size_t i) {
    if (!rows[i].lt.present) return false;
    if (options.strict_global_baselines)
      return max_rr && rows[i].lt.mean >= rows[*max_rr].rr.mean + thr.delta_gap;
    return rows[i].rr.present && rows[i].lt.mean >= rows[i].rr.mean + thr.delta_gap;
  };
  auto g4 = [&](size_t i) {
    return rows[i].lt.present && rows[i].pre.present &&
           similar(rows[i].lt.mean, rows[i].pre.mean, thr.delta_similar);
  };
  auto g5 = [&](size_t i) {
    return rows[i].lt.present && max_pre &&
           similar(rows[i].lt.mean, rows[*max_pre].pre.mean, thr.delta_similar);
  };
  auto g2_local = [&](size_t i) {
    return rows[i].lt.present && rows[i].sdt.present &&
           rows[i].sdt.mean <= rows[i].lt.mean - thr.delta_gap;
  };

  const bool any_lt_rr = [&] {
    for (size_t i = 0; i < rows.size(); ++i)
      if (rows[i].lt.present && (options.strict_global_baselines
                                     ? static_cast<bool>(max_rr)
                                     : rows[i].rr.present))
        return true;
    return false;
  }();
  const bool any_lt_pre = [&] {
    for (size_t i = 0; i < rows.size(); ++i)
      if (rows[i].lt.present && rows[i].pre.present) return true;
    return false;
  }();
  const bool any_sdt = static_cast<bool>(max_sdt);

  // (1): non-trivial sparsity and sufficient epochs (config attestation).
  rep.c1.evaluated = true;
  rep.c1.pass = table.sparsity >= thr.s_min && table.trained_full_T;
  rep.c1.detail = "s=" + fmt_acc(table.sparsity * 100.0) + "% vs s_min=" +
                  fmt_acc(thr.s_min * 100.0) + "%, full-T " +
                  (table.trained_full_T ? "attested" : "NOT attested");

  // (3) and (4), quantified per-mode.
  std::optional<size_t> w3, w4, w5;
  if (options.mode == QuantifierMode::independent) {
    w3 = best_lt_row(table, g3);
    w4 = best_lt_row(table, g4);
    w5 = best_lt_row(table, g5);
    rep.c3.pass = w3.has_value();
    rep.c4.pass = w4.has_value();
    rep.c5.pass = w5.has_value();
  } else {
    // One lr must satisfy (3) and (4) together, and (5) as well for a
    // jackpot-grade witness.
    auto g34 = [&](size_t i) { return g3(i) && g4(i); };
    const std::optional<size_t> joint = best_lt_row(table, g34);
    w3 = w4 = joint;
    rep.c3.pass = rep.c4.pass = joint.has_value();
    auto g345 = [&](size_t i) { return g3(i) && g4(i) && g5(i); };
    w5 = best_lt_row(table, g345);
    rep.c5.pass = w5.has_value();
  }
  rep.c3.evaluated = any_lt_rr;
  rep.c4.evaluated = any_lt_pre;
  rep.c5.evaluated = static_cast<bool>(max_pre) && static_cast<bool>(max_lt);
  if (!rep.c3.evaluated) rep.c3.pass = false;
  if (!rep.c4.evaluated) rep.c4.pass = false;
  if (!rep.c5.evaluated) rep.c5.pass = false;
  if (w3) rep.c3.witness_lr = rows[*w3].lr;
  if (w4) rep.c4.witness_lr = rows[*w4].lr;
  if (w5) rep.c5.witness_lr = rows[*w5].lr;

  if (w3 && rows[*w3].rr.present)
    rep.lt_rr_gap_at_witness = rows[*w3].lt.mean - rows[*w3].rr.mean;
  else if (rep.best_lt && rep.best_rr)
    rep.lt_rr_gap_at_witness = rep.best_lt->second - rep.best_rr->second;

  if (rep.c3.evaluated) {
    if (options.strict_global_baselines && max_rr)
      rep.c3.detail = "needs LT >= max RR " + fmt_acc(rows[*max_rr].rr.mean) + " + " +
                      fmt_acc(thr.delta_gap);
    else
      rep.c3.detail = "same-lr RR comparison, gap " + fmt_acc(thr.delta_gap);
  } else {
    rep.c3.detail = "no lr has both LT and RR rows";
  }
  rep.c4.detail = rep.c4.evaluated ? "same-lr pretrain comparison"
                                   : "no lr has both LT and pretrain rows";
  rep.c5.detail = rep.c5.evaluated && max_pre
                      ? "best pretrain " + fmt_acc(rows[*max_pre].pre.mean) + " @ lr " +
                            fmt_lr(rows[*max_pre].lr)
                      : "pretrain rows missing";

  // (2): clear drop of small-dense vs the well-trained subnetwork,
  // anchored at the (3) witness set.
  rep.c2.evaluated = any_sdt && static_cast<bool>(max_lt);
  if (!rep.c2.evaluated) {
    rep.c2.pass = false;
    rep.c2.detail = any_sdt ? "no LT rows" : "no SDT rows; treated as failing";
  } else if (options.strict_global_baselines) {
    const size_t anchor = w3 ? *w3 : *max_lt;
    rep.c2.pass =
        rows[*max_sdt].sdt.mean <= rows[anchor].lt.mean - thr.delta_gap;
    if (rep.c2.pass) rep.c2.witness_lr = rows[anchor].lr;
    rep.c2.detail = "max SDT " + fmt_acc(rows[*max_sdt].sdt.mean) + " vs LT " +
                    fmt_acc(rows[anchor].lt.mean) + " @ lr " + fmt_lr(rows[anchor].lr);
  } else {
    // Witness-local: some lr in the (3)-satisfying set (or any lr when (3)
    // fails) must show the drop at its own lr. Under a single witness the
    // scope narrows to the joint (3)&(4) set so a single-witness pass
    // always implies an independent one.
    auto in_scope = [&](size_t i) {
      if (options.mode == QuantifierMode::single_witness)
        return g3(i) && g4(i);
      return rep.c3.pass ? g3(i) : rows[i].lt.present;
    };
    auto g2s = [&](size_t i) { return in_scope(i) && g2_local(i); };
    const std::optional<size_t> w2 = best_lt_row(table, g2s);
    rep.c2.pass = w2.has_value();
    if (w2) {
      rep.c2.witness_lr = rows[*w2].lr;
      rep.c2.detail = "SDT " + fmt_acc(rows[*w2].sdt.mean) + " <= LT " +
                      fmt_acc(rows[*w2].lt.mean) + " - " + fmt_acc(thr.delta_gap) +
                      " @ lr " + fmt_lr(rows[*w2].lr);
    } else {
      rep.c2.detail = "no in-scope lr shows a clear SDT drop";
    }
  }

  return rep;
}

std::string ticket_class_name(TicketClass c) {
  switch (c) {
    case TicketClass::jackpot:
      return "jackpot";
    case TicketClass::secondary:
      return "secondary";
    case TicketClass::none:
      return "none";
  }
  return "none";
}

TicketClass classify(bool c1, bool c2, bool c3, bool c4, bool c5) {
  if (c1 && c2 && c3 && c4) return c5 ? TicketClass::jackpot : TicketClass::secondary;
  return TicketClass::none;
}

std::vector<bool> ConditionsReport::flags() const {
  return {c1.pass, c2.pass, c3.pass, c4.pass, c5.pass};
}

Verdict classify(const ConditionsReport& report) {
  Verdict v;
  v.report = report;
  v.classification = classify(report.c1.pass, report.c2.pass, report.c3.pass,
                              report.c4.pass, report.c5.pass);
  return v;
}

// ----------------------------------------------------------------------
// Correlation indicator
// ----------------------------------------------------------------------

CorrelationReport correlation_indicator(const WeightSnapshot& theta,
                                        const WeightSnapshot& theta_prime, double p,
                                        const Mask* mask, double weak_band) {
  if (!(p > 0.0 && p <= 1.0))
    throw ArgumentError("correlation indicator: p must be in (0,1]");
  if (theta.entries.size() != theta_prime.entries.size())
    throw ArgumentError("correlation indicator: snapshots have different layouts");

  CorrelationReport rep;
  rep.p = p;
  int64_t numerator = 0;
  int64_t denominator = 0;

  for (size_t e = 0; e < theta.entries.size(); ++e) {
    const WeightSnapshot::Entry& a = theta.entries[e];
    const WeightSnapshot::Entry& b = theta_prime.entries[e];
    if (a.name != b.name || a.shape != b.shape)
      throw ArgumentError("correlation indicator: layer mismatch at " + a.name);
    if (a.shape.size() < 2) continue;  // weights only

    const Mask::Layer* ml = mask ? mask->find(a.name) : nullptr;
    if (mask && !ml)
      throw ArgumentError("correlation indicator: mask has no layer " + a.name);

    std::vector<int64_t> candidates;
    candidates.reserve(a.values.size());
    for (size_t i = 0; i < a.values.size(); ++i) {
      if (ml) {
        if (!ml->keep[i]) {
          if (a.values[i] != 0.0f || b.values[i] != 0.0f)
            throw ArgumentError(
                "correlation indicator: snapshot violates the mask at " + a.name);
          continue;
        }
      }
      candidates.push_back(static_cast<int64_t>(i));
    }
    const int64_t n = static_cast<int64_t>(candidates.size());
    if (n == 0) continue;
    const int64_t t = static_cast<int64_t>(
        std::ceil(p * static_cast<double>(n) - 1e-12));
    const int64_t top = std::max<int64_t>(1, std::min(t, n));

    // Top `top` indices by |value|, ties to the lower index.
    auto top_set = [&](const std::vector<float>& vals) {
      std::vector<int64_t> idx = candidates;
      std::nth_element(idx.begin(), idx.begin() + top, idx.end(),
                       [&](int64_t x, int64_t y) {
                         const float mx = std::fabs(vals[static_cast<size_t>(x)]);
                         const float my = std::fabs(vals[static_cast<size_t>(y)]);
                         if (mx != my) return mx > my;
                         return x < y;
                       });
      idx.resize(static_cast<size_t>(top));
      std::sort(idx.begin(), idx.end());
      return idx;
    };
    const std::vector<int64_t> ta = top_set(a.values);
    const std::vector<int64_t> tb = top_set(b.values);
    std::vector<int64_t> inter;
    std::set_intersection(ta.begin(), ta.end(), tb.begin(), tb.end(),
                          std::back_inserter(inter));

    numerator += static_cast<int64_t>(inter.size());
    denominator += top;
    rep.layers.push_back(CorrelationReport::LayerOverlap{
        a.name, n, top, static_cast<int64_t>(inter.size())});
  }
  if (denominator == 0)
    throw ArgumentError("correlation indicator: no prunable weights to compare");
  rep.r_p = static_cast<double>(numerator) / static_cast<double>(denominator);
  if (rep.r_p > p + weak_band)
    rep.cls = CorrelationReport::Class::positive;
  else if (rep.r_p < p - weak_band)
    rep.cls = CorrelationReport::Class::negative;
  else
    rep.cls = CorrelationReport::Class::weak;
  return rep;
}

// ----------------------------------------------------------------------
// Log-driven adjudication
// ----------------------------------------------------------------------

AccuracyTable assemble_table(const std::vector<ResultRecord>& records,
                             const AdjudicateFilter& filter) {
  if (filter.method != "imp" && filter.method != "omp")
    throw ArgumentError("adjudicate: method must be imp or omp");
  if (filter.subnet_protocol != "lt" && filter.subnet_protocol != "wr")
    throw ArgumentError("adjudicate: subnet protocol must be lt or wr");
  const std::string lt_proto = filter.subnet_protocol + "-" + filter.method;
  const std::string rr_proto = "rr-" + filter.method;

  struct Agg {
    std::vector<double> vals;
  };
  std::map<double, Agg> pre, lt, rr, sdt;

  auto sparsity_match = [&](double s) { return std::abs(s - filter.sparsity) < 1e-9; };
  auto lr_match = [&](double a, double b) { return std::abs(a - b) < 1e-12; };

  // Log rows carry accuracy fractions; the condition thresholds are in
  // accuracy points, so the table is assembled in points (0-100).
  for (const ResultRecord& r : records) {
    if (r.epoch || r.split != "test") continue;
    const double points = r.accuracy * 100.0;
    if (r.protocol == "pretrain") {
      if (filter.pretrain_lr && !lr_match(r.pretrain_lr, *filter.pretrain_lr)) continue;
      pre[r.pretrain_lr].vals.push_back(points);
      continue;
    }
    if (!sparsity_match(r.sparsity)) continue;
    if (filter.pretrain_lr) {
      if (!lr_match(r.pretrain_lr, *filter.pretrain_lr)) continue;
    } else if (!lr_match(r.pretrain_lr, r.subnet_lr)) {
      continue;  // coupled view: pretrain and subnet share the lr
    }
    if (r.protocol == lt_proto)
      lt[r.subnet_lr].vals.push_back(points);
    else if (r.protocol == rr_proto)
      rr[r.subnet_lr].vals.push_back(points);
    else if (r.protocol == "sdt")
      sdt[r.subnet_lr].vals.push_back(points);
  }

  std::vector<std::string> missing;
  if (lt.empty()) missing.push_back(lt_proto);
  if (pre.empty()) missing.push_back("pretrain");
  if (!missing.empty()) {
    std::string msg = "adjudicate: results log is missing required protocols:";
    for (const std::string& m : missing) msg += " " + m;
    throw DependencyError(msg);
  }

  std::set<double> lrs;
  for (const auto& [k, v] : pre) lrs.insert(k);
  for (const auto& [k, v] : lt) lrs.insert(k);
  for (const auto& [k, v] : rr) lrs.insert(k);
  for (const auto& [k, v] : sdt) lrs.insert(k);

  auto cell_of = [](const std::map<double, Agg>& m, double lr) {
    AccuracyCell c;
    auto it = m.find(lr);
    if (it == m.end() || it->second.vals.empty()) return c;
    c.present = true;
    c.n = static_cast<int>(it->second.vals.size());
    double sum = 0.0;
    for (double v : it->second.vals) sum += v;
    c.mean = sum / static_cast<double>(c.n);
    double var = 0.0;
    for (double v : it->second.vals) var += (v - c.mean) * (v - c.mean);
    c.stddev = c.n > 1 ? std::sqrt(var / static_cast<double>(c.n - 1)) : 0.0;
    return c;
  };

  AccuracyTable table;
  table.sparsity = filter.sparsity;
  table.trained_full_T = filter.trained_full_T;
  for (double lr : lrs) {
    AccuracyRow row;
    row.lr = lr;
    row.pre = cell_of(pre, lr);
    row.lt = cell_of(lt, lr);
    row.rr = cell_of(rr, lr);
    row.sdt = cell_of(sdt, lr);
    table.rows.push_back(row);
  }
  return table;
}

std::string render_report(const AccuracyTable& table, const Verdict& verdict) {
  const ConditionsReport& rep = verdict.report;
  std::string out;
  char line[256];
  std::snprintf(line, sizeof(line),
                "== ticket adjudication ==\nsparsity %.4f   mode %s   baselines %s\n"
                "thresholds: similar %.2f   gap %.2f   s_min %.2f\n",
                table.sparsity,
                rep.options.mode == QuantifierMode::independent ? "independent"
                                                                : "single-witness",
                rep.options.strict_global_baselines ? "global-max" : "witness-local",
                rep.thresholds.delta_similar, rep.thresholds.delta_gap,
                rep.thresholds.s_min);
  out += line;
  out += "\n      lr |        pre |         lt |         rr |        sdt\n";
  auto cell = [](const AccuracyCell& c) {
    char buf[32];
    if (!c.present) return std::string("          -");
    std::snprintf(buf, sizeof(buf), "%5.2f+-%4.2f", c.mean, c.stddev);
    return std::string(buf);
  };
  for (const AccuracyRow& r : table.rows) {
    std::snprintf(line, sizeof(line), "%8g | %s | %s | %s | %s\n", r.lr,
                  cell(r.pre).c_str(), cell(r.lt).c_str(), cell(r.rr).c_str(),
                  cell(r.sdt).c_str());
    out += line;
  }
  out += "\n";
  auto cond = [&](const char* name, const ConditionReport& c) {
    std::string s = "(" + std::string(name) + ") ";
    if (!c.evaluated)
      s += "NOT EVALUATED (fails)";
    else
      s += c.pass ? "PASS" : "fail";
    if (c.witness_lr) s += " @ lr " + std::string(fmt_lr(*c.witness_lr));
    if (!c.detail.empty()) s += "  [" + c.detail + "]";
    return s + "\n";
  };
  out += cond("1 non-trivial sparsity, full T", rep.c1);
  out += cond("2 clear drop vs small-dense   ", rep.c2);
  out += cond("3 clear gap over reinit       ", rep.c3);
  out += cond("4 matches pretrain at same lr ", rep.c4);
  out += cond("5 matches best pretrain       ", rep.c5);
  if (rep.best_lt) {
    std::snprintf(line, sizeof(line), "best subnet accuracy %.2f at lr %g\n",
                  rep.best_lt->second, rep.best_lt->first);
    out += line;
  }
  if (rep.best_pre) {
    std::snprintf(line, sizeof(line),
                  "best pretrain accuracy %.2f at lr %g (best-subnet similar: %s)\n",
                  rep.best_pre->second, rep.best_pre->first,
                  rep.best_lt_similar_to_best_pre ? "yes" : "no");
    out += line;
  }
  if (rep.lt_rr_gap_at_witness) {
    std::snprintf(line, sizeof(line), "lt-rr gap: %.2f points\n",
                  *rep.lt_rr_gap_at_witness);
    out += line;
  }
  out += "classification: " + ticket_class_name(verdict.classification) + "\n";
  return out;
}

AdjudicationResult adjudicate_run(const std::vector<ResultRecord>& records,
                                  const AdjudicateFilter& filter,
                                  const VerdictThresholds& thresholds,
                                  const VerdictOptions& options) {
  AdjudicationResult out;
  out.table = assemble_table(records, filter);
  out.verdict = classify(check_conditions(out.table, thresholds, options));
  out.text = render_report(out.table, out.verdict);
  return out;
}

}  // namespace lth
