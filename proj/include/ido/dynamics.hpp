#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace ido {

struct ChangeRateRow {
  double we_max = 0, we_avg = 0;
  double loss_max = 0, loss_avg = 0;
};

// Per-sample training-dynamics bookkeeping folded once per epoch: wrong
// events, forgetting events, first-k-epoch learning, EMA loss, and the
// global label-wave series. record_epoch is the only mutator.
class DynamicsLedger {
 public:
  static constexpr double kNormClip = 1e-4;

  explicit DynamicsLedger(size_t n_samples, int fkl_k = 2, bool retain_history = false);

  void record_epoch(std::span<const int> preds, std::span<const double> losses,
                    std::span<const int> labels, double ema_beta);

  size_t size() const { return wrong_events_.size(); }
  int epoch() const { return epoch_; }
  int fkl_k() const { return fkl_k_; }

  const std::vector<int>& wrong_events() const { return wrong_events_; }
  const std::vector<int>& forgetting() const { return forgetting_; }
  const std::vector<double>& ema_loss() const { return ema_loss_; }
  const std::vector<double>& single_loss() const { return single_loss_; }
  const std::vector<int>& label_wave() const { return label_wave_; }

  // true iff some earlier epoch was correct and a later one wrong
  std::vector<char> fluctuation_flags() const;

  // w / epoch, clipped into [kNormClip, 1 - kNormClip] so beta densities
  // stay finite at the support edges
  std::vector<double> normalized_wrong_events() const;

  // first_k when reached, else epoch + 1 (most-suspicious convention)
  std::vector<double> fkl_scores() const;

  // per-epoch max/avg of |delta| on per-epoch min-max-normalized wrong
  // events and losses; rows cover epochs 2..T
  std::vector<ChangeRateRow> change_rate_stats() const;

  struct Snapshot {
    std::vector<int> wrong;
    std::vector<int> forgetting;
    std::vector<double> loss;
    std::vector<double> ema;
    std::vector<double> fkl;
  };
  bool retains_history() const { return retain_history_; }
  const std::vector<Snapshot>& history() const { return history_; }

  // columns: idx,wrong_events,forgetting,fkl,ema_loss,single_loss,is_noisy(oracle)
  void export_csv(const std::string& path, const std::vector<char>* oracle_mask) const;

 private:
  int epoch_ = 0;
  int fkl_k_;
  bool retain_history_;
  std::vector<int> wrong_events_;
  std::vector<int> forgetting_;
  std::vector<int> last_pred_;  // valid from epoch 1 on
  std::vector<int> fkl_run_;    // current consecutive-correct run length
  std::vector<int> fkl_first_;  // -1 until the first run reaches k
  std::vector<double> ema_loss_;
  std::vector<double> single_loss_;
  std::vector<int> label_wave_;
  std::vector<Snapshot> history_;
};

// Smallest index t with wave[t] < wave[t-1] and wave[t] < wave[t+1];
// plateaus are not minima.
std::optional<size_t> first_local_min_epoch(std::span<const int> label_wave);

}  // namespace ido
