#include "ido/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "ido/config.hpp"
#include "ido/csvio.hpp"
#include "ido/errors.hpp"
#include "ido/experiment.hpp"
#include "ido/rng.hpp"

namespace ido {

double auc(std::span<const double> scores, std::span<const char> noisy_mask) {
  if (scores.size() != noisy_mask.size())
    throw std::invalid_argument("auc: scores/mask length mismatch");
  size_t n_pos = 0;
  for (char m : noisy_mask) n_pos += m != 0;
  const size_t n_neg = noisy_mask.size() - n_pos;
  if (n_pos == 0 || n_neg == 0) throw eval_error("auc: oracle mask contains a single class");
  for (double s : scores) {
    if (!std::isfinite(s)) throw std::invalid_argument("auc: non-finite score");
  }

  std::vector<size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](size_t a, size_t b) { return scores[a] < scores[b]; });

  // average ranks across ties, 1-based
  double pos_rank_sum = 0.0;
  size_t i = 0;
  while (i < idx.size()) {
    size_t j = i;
    while (j + 1 < idx.size() && scores[idx[j + 1]] == scores[idx[i]]) ++j;
    const double rank = 0.5 * static_cast<double>(i + 1 + j + 1);
    for (size_t t = i; t <= j; ++t)
      if (noisy_mask[idx[t]]) pos_rank_sum += rank;
    i = j + 1;
  }
  return (pos_rank_sum - 0.5 * n_pos * (n_pos + 1)) / (static_cast<double>(n_pos) * n_neg);
}

Prf prf_at_threshold(std::span<const double> clean_posterior, std::span<const char> noisy_mask,
                     double thresh) {
  if (clean_posterior.size() != noisy_mask.size())
    throw std::invalid_argument("prf: posterior/mask length mismatch");
  if (!(thresh > 0.0) || !(thresh < 1.0))
    throw std::invalid_argument("prf: threshold must be in (0,1)");
  size_t tp = 0, fp = 0, fn = 0;
  for (size_t i = 0; i < clean_posterior.size(); ++i) {
    const bool pred_clean = clean_posterior[i] >= thresh;
    const bool is_clean = noisy_mask[i] == 0;
    tp += pred_clean && is_clean;
    fp += pred_clean && !is_clean;
    fn += !pred_clean && is_clean;
  }
  Prf out;
  out.precision = tp + fp ? static_cast<double>(tp) / (tp + fp) : 0.0;
  out.recall = tp + fn ? static_cast<double>(tp) / (tp + fn) : 0.0;
  out.f = out.precision + out.recall > 0.0
              ? 2.0 * out.precision * out.recall / (out.precision + out.recall)
              : 0.0;
  return out;
}

double test_accuracy(const Model& m, const Dataset& test) {
  if (test.size() == 0) throw eval_error("test_accuracy: empty test set");
  size_t hits = 0;
  Workspace ws;
  for (size_t i = 0; i < test.size(); ++i) {
    forward(m, test.row(i), ws);
    const auto& p = ws.act.back();
    const int pred = static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
    hits += pred == test.true_labels[i];
  }
  return static_cast<double>(hits) / static_cast<double>(test.size());
}

namespace {
bool all_equal(std::span<const double> v) {
  for (double x : v)
    if (x != v[0]) return false;
  return true;
}
}  // namespace

MetricTable compare_metrics(const DynamicsLedger& ledger, std::span<const char> noisy_mask,
                            std::span<const int> probe_epochs) {
  if (!ledger.retains_history()) throw state_error("compare_metrics: history retention disabled");
  if (noisy_mask.size() != ledger.size())
    throw std::invalid_argument("compare_metrics: mask length mismatch");
  MetricTable table;
  table.metrics = {"single_loss", "ema_loss", "fe", "fkl", "wrong_event"};
  table.values.assign(table.metrics.size(), {});
  const double nan = std::numeric_limits<double>::quiet_NaN();

  for (int probe : probe_epochs) {
    if (probe < 1 || probe > ledger.epoch())
      throw std::invalid_argument("compare_metrics: probe epoch " + std::to_string(probe) +
                                  " outside recorded range");
    table.probe_epochs.push_back(probe);
    const auto& snap = ledger.history()[static_cast<size_t>(probe) - 1];

    const size_t n = ledger.size();
    std::vector<double> fe(n), we(n);
    for (size_t i = 0; i < n; ++i) {
      fe[i] = snap.forgetting[i];
      we[i] = snap.wrong[i];
    }
    const std::vector<std::span<const double>> columns = {snap.loss, snap.ema, fe, snap.fkl, we};
    for (size_t m = 0; m < columns.size(); ++m) {
      // a constant metric cannot rank samples (the paper's '-' cells)
      table.values[m].push_back(all_equal(columns[m]) ? nan : auc(columns[m], noisy_mask));
    }
  }
  return table;
}

void write_metric_table_csv(const MetricTable& table, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot write file: " + path);
  out << "metric";
  for (int p : table.probe_epochs) out << ",epoch_" << p;
  out << "\n";
  for (size_t m = 0; m < table.metrics.size(); ++m) {
    out << table.metrics[m];
    for (double v : table.values[m]) {
      out << ",";
      if (std::isnan(v))
        out << "-";
      else
        out << format_double(v);
    }
    out << "\n";
  }
  if (!out) throw io_error("write failed: " + path);
}

std::vector<AblationCell> ablation_grid() {
  std::vector<AblationCell> cells;
  auto add = [&](LossCombo combo, EpsMode eps, std::string name) {
    AblationCell c;
    c.combo = combo;
    c.eps = eps;
    c.name = std::move(name);
    cells.push_back(std::move(c));
  };
  add(LossCombo::lc_only, {}, "lc");
  add(LossCombo::lc_ln, {}, "lc+ln");
  add(LossCombo::lc_lsim, {}, "lc+lsim");
  add(LossCombo::full, {true, 0.0}, "full(dynamic)");
  add(LossCombo::full, {false, 0.25}, "full(eps=0.25)");
  add(LossCombo::full, {false, 0.5}, "full(eps=0.5)");
  add(LossCombo::full, {false, 1.0}, "full(eps=1)");
  return cells;
}

std::vector<AblationCell> ablate(const ExperimentConfig& cfg, int n_seeds) {
  if (n_seeds < 1) throw std::invalid_argument("ablate: n_seeds must be >= 1");
  auto cells = ablation_grid();

  for (int s = 0; s < n_seeds; ++s) {
    ExperimentConfig seed_cfg = cfg;
    seed_cfg.seed = derive_seed(cfg.seed, "ablate-cell", static_cast<uint64_t>(s));
    const auto [train, test] = build_datasets(seed_cfg);

    TrainConfig tc = seed_cfg.train_config();
    Stage1Result s1 = stage1(tc, train, test);

    for (auto& cell : cells) {
      TrainConfig cell_tc = tc;
      cell_tc.combo = cell.combo;
      cell_tc.eps_mode = cell.eps;
      DynamicsLedger ledger = s1.ledger;  // each cell replays from the same stage-1 state
      try {
        Stage2Result s2 = stage2(cell_tc, train, test, s1.base, ledger);
        cell.seed_acc.push_back(test_accuracy(s2.model, test));
        cell.max_coeff_dev = std::max(cell.max_coeff_dev, s2.coeff_sum_max_dev);
        cell.eps_lo = std::min(cell.eps_lo, s2.eps_min);
        cell.eps_hi = std::max(cell.eps_hi, s2.eps_max);
      } catch (const std::exception&) {
        cell.failed = true;
        cell.seed_acc.push_back(std::numeric_limits<double>::quiet_NaN());
      }
    }
  }
  for (auto& cell : cells) {
    double sum = 0.0;
    int live = 0;
    for (double a : cell.seed_acc) {
      if (!std::isnan(a)) {
        sum += a;
        ++live;
      }
    }
    cell.mean_acc = live ? sum / live : std::numeric_limits<double>::quiet_NaN();
  }
  return cells;
}

void write_ablation_csv(const std::vector<AblationCell>& cells, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot write file: " + path);
  out << "cell,mean_acc";
  if (!cells.empty())
    for (size_t s = 0; s < cells[0].seed_acc.size(); ++s) out << ",acc_seed" << s;
  out << ",failed\n";
  for (const auto& c : cells) {
    out << c.name << "," << format_double(c.mean_acc);
    for (double a : c.seed_acc) out << "," << (std::isnan(a) ? "-" : format_double(a));
    out << "," << (c.failed ? 1 : 0) << "\n";
  }
  if (!out) throw io_error("write failed: " + path);
}

}  // namespace ido
