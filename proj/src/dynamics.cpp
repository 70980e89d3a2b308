#include "ido/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "ido/csvio.hpp"
#include "ido/errors.hpp"

namespace ido {

DynamicsLedger::DynamicsLedger(size_t n_samples, int fkl_k, bool retain_history)
    : fkl_k_(fkl_k), retain_history_(retain_history) {
  if (n_samples == 0) throw std::invalid_argument("ledger: n_samples must be positive");
  if (fkl_k < 1) throw std::invalid_argument("ledger: fkl k must be >= 1");
  wrong_events_.assign(n_samples, 0);
  forgetting_.assign(n_samples, 0);
  last_pred_.assign(n_samples, -1);
  fkl_run_.assign(n_samples, 0);
  fkl_first_.assign(n_samples, -1);
  ema_loss_.assign(n_samples, 0.0);
  single_loss_.assign(n_samples, 0.0);
}

void DynamicsLedger::record_epoch(std::span<const int> preds, std::span<const double> losses,
                                  std::span<const int> labels, double ema_beta) {
  const size_t n = size();
  if (preds.size() != n || losses.size() != n || labels.size() != n)
    throw std::invalid_argument("record_epoch: input length mismatch");
  if (ema_beta < 0.0 || ema_beta >= 1.0)
    throw std::invalid_argument("record_epoch: ema_beta must be in [0,1)");
  for (size_t i = 0; i < n; ++i) {
    if (!std::isfinite(losses[i]) || losses[i] < 0.0)
      throw std::invalid_argument("record_epoch: losses must be finite and non-negative");
  }

  const bool first = epoch_ == 0;
  int wave = 0;
  for (size_t i = 0; i < n; ++i) {
    const bool wrong = preds[i] != labels[i];
    const bool was_correct = !first && last_pred_[i] == labels[i];
    if (wrong) {
      ++wrong_events_[i];
      if (was_correct) ++forgetting_[i];
      fkl_run_[i] = 0;
    } else {
      ++fkl_run_[i];
      if (fkl_first_[i] < 0 && fkl_run_[i] >= fkl_k_) fkl_first_[i] = epoch_ + 1;
    }
    if (!first && preds[i] != last_pred_[i]) ++wave;
    last_pred_[i] = preds[i];
    single_loss_[i] = losses[i];
    ema_loss_[i] = first ? losses[i] : ema_beta * ema_loss_[i] + (1.0 - ema_beta) * losses[i];
  }
  if (!first) label_wave_.push_back(wave);
  ++epoch_;

  if (retain_history_) {
    Snapshot snap;
    snap.wrong = wrong_events_;
    snap.forgetting = forgetting_;
    snap.loss = single_loss_;
    snap.ema = ema_loss_;
    snap.fkl = fkl_scores();
    history_.push_back(std::move(snap));
  }
}

std::vector<char> DynamicsLedger::fluctuation_flags() const {
  if (epoch_ < 2) throw state_error("fluctuation_flags: needs at least two epochs");
  std::vector<char> out(size());
  for (size_t i = 0; i < size(); ++i) out[i] = forgetting_[i] >= 1;
  return out;
}

std::vector<double> DynamicsLedger::normalized_wrong_events() const {
  if (epoch_ < 1) throw state_error("normalized_wrong_events: no epochs recorded");
  std::vector<double> out(size());
  for (size_t i = 0; i < size(); ++i) {
    const double w = static_cast<double>(wrong_events_[i]) / epoch_;
    out[i] = std::clamp(w, kNormClip, 1.0 - kNormClip);
  }
  return out;
}

std::vector<double> DynamicsLedger::fkl_scores() const {
  std::vector<double> out(size());
  for (size_t i = 0; i < size(); ++i)
    out[i] = fkl_first_[i] >= 0 ? fkl_first_[i] : epoch_ + 1;
  return out;
}

namespace {
// per-epoch min-max normalization; constant vectors map to all zeros
std::vector<double> minmax(std::span<const double> v) {
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  std::vector<double> out(v.size(), 0.0);
  const double range = *hi - *lo;
  if (range <= 0.0) return out;
  for (size_t i = 0; i < v.size(); ++i) out[i] = (v[i] - *lo) / range;
  return out;
}
}  // namespace

std::vector<ChangeRateRow> DynamicsLedger::change_rate_stats() const {
  if (!retain_history_) throw state_error("change_rate_stats: history retention disabled");
  if (epoch_ < 2) throw state_error("change_rate_stats: needs at least two epochs");

  const size_t n = size();
  std::vector<ChangeRateRow> rows;
  std::vector<double> we_cur(n);
  std::vector<double> prev_loss_norm, prev_we_norm;
  for (size_t t = 0; t < history_.size(); ++t) {
    for (size_t i = 0; i < n; ++i) we_cur[i] = static_cast<double>(history_[t].wrong[i]);
    auto we_norm = minmax(we_cur);
    auto loss_norm = minmax(history_[t].loss);
    if (t > 0) {
      ChangeRateRow row;
      for (size_t i = 0; i < n; ++i) {
        const double dw = std::abs(we_norm[i] - prev_we_norm[i]);
        const double dl = std::abs(loss_norm[i] - prev_loss_norm[i]);
        row.we_max = std::max(row.we_max, dw);
        row.loss_max = std::max(row.loss_max, dl);
        row.we_avg += dw;
        row.loss_avg += dl;
      }
      row.we_avg /= n;
      row.loss_avg /= n;
      rows.push_back(row);
    }
    prev_we_norm = std::move(we_norm);
    prev_loss_norm = std::move(loss_norm);
  }
  return rows;
}

void DynamicsLedger::export_csv(const std::string& path,
                                const std::vector<char>* oracle_mask) const {
  std::ofstream out(path);
  if (!out) throw io_error("cannot write file: " + path);
  out << "idx,wrong_events,forgetting,fkl,ema_loss,single_loss,is_noisy(oracle)\n";
  for (size_t i = 0; i < size(); ++i) {
    out << i << "," << wrong_events_[i] << "," << forgetting_[i] << ","
        << (fkl_first_[i] >= 0 ? fkl_first_[i] : -1) << "," << format_double(ema_loss_[i]) << ","
        << format_double(single_loss_[i]) << ","
        << (oracle_mask ? static_cast<int>((*oracle_mask)[i]) : 0) << "\n";
  }
  if (!out) throw io_error("write failed: " + path);
}

std::optional<size_t> first_local_min_epoch(std::span<const int> label_wave) {
  for (size_t t = 1; t + 1 < label_wave.size(); ++t) {
    if (label_wave[t] < label_wave[t - 1] && label_wave[t] < label_wave[t + 1]) return t;
  }
  return std::nullopt;
}

}  // namespace ido
