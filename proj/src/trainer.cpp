#include "ido/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "ido/errors.hpp"
#include "ido/eval.hpp"
#include "ido/rng.hpp"

namespace ido {

namespace {
constexpr double kPi = 3.14159265358979323846;

std::vector<int> model_dims(const TrainConfig& cfg, const Dataset& train) {
  std::vector<int> dims;
  dims.push_back(train.dim);
  dims.insert(dims.end(), cfg.hidden.begin(), cfg.hidden.end());
  dims.push_back(train.n_classes);
  return dims;
}

double test_acc_or_zero(const Model& m, const Dataset& test) {
  return test.size() ? test_accuracy(m, test) : 0.0;
}

// oracle AUC of a suspiciousness score; -1 when the mask is single-class
double oracle_auc(std::span<const double> scores, const std::vector<char>& mask) {
  const size_t pos = static_cast<size_t>(std::count(mask.begin(), mask.end(), char(1)));
  if (pos == 0 || pos == mask.size()) return -1.0;
  return auc(scores, mask);
}

void fill_epoch_aucs(EpochMetrics& row, const Dataset& train, const DynamicsLedger& ledger) {
  if (!train.has_oracle) return;
  const auto mask = train.noise_mask();
  row.auc_we = oracle_auc(ledger.normalized_wrong_events(), mask);
  row.auc_loss = oracle_auc(ledger.single_loss(), mask);
}

struct PredictionPass {
  std::vector<int> preds;
  std::vector<double> losses;
};

// full-train pass, no augmentation (stage 1)
PredictionPass predict_plain(const Model& m, const Dataset& ds) {
  PredictionPass out;
  out.preds.resize(ds.size());
  out.losses.resize(ds.size());
  Workspace ws;
  for (size_t i = 0; i < ds.size(); ++i) {
    forward(m, ds.row(i), ws);
    const auto& p = ws.act.back();
    out.preds[i] = static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
    out.losses[i] = ce_loss(p, ds.given_labels[i]);
  }
  return out;
}

// full-train pass on the averaged two-view output (stage 2)
PredictionPass predict_two_view(const Model& m, const Dataset& ds, const AugmentParams& aug,
                                std::span<const double> stds, uint64_t seed_w, uint64_t seed_s) {
  const auto weak = augment(ds.features, ds.dim, View::weak, aug, stds, seed_w);
  const auto strong = augment(ds.features, ds.dim, View::strong, aug, stds, seed_s);
  PredictionPass out;
  out.preds.resize(ds.size());
  out.losses.resize(ds.size());
  Workspace ws;
  const int k = ds.n_classes;
  std::vector<double> q(k);
  const size_t d = static_cast<size_t>(ds.dim);
  for (size_t i = 0; i < ds.size(); ++i) {
    forward(m, {weak.data() + i * d, d}, ws);
    for (int j = 0; j < k; ++j) q[j] = 0.5 * ws.act.back()[j];
    forward(m, {strong.data() + i * d, d}, ws);
    for (int j = 0; j < k; ++j) q[j] += 0.5 * ws.act.back()[j];
    out.preds[i] = static_cast<int>(std::max_element(q.begin(), q.end()) - q.begin());
    out.losses[i] = ce_loss(q, ds.given_labels[i]);
  }
  return out;
}

}  // namespace

const char* to_string(LossCombo c) {
  switch (c) {
    case LossCombo::lc_only: return "lc";
    case LossCombo::lc_ln: return "lc+ln";
    case LossCombo::lc_lsim: return "lc+lsim";
    case LossCombo::full: return "full";
  }
  return "?";
}

void TrainConfig::validate() const {
  if (stage1_epochs < 1) throw std::invalid_argument("config: stage1_epochs must be >= 1");
  if (stage2_epochs < 0) throw std::invalid_argument("config: stage2_epochs must be >= 0");
  if (batch_size < 1) throw std::invalid_argument("config: batch_size must be >= 1");
  if (!(lr > 0.0)) throw std::invalid_argument("config: lr must be > 0");
  if (momentum < 0.0 || momentum >= 1.0)
    throw std::invalid_argument("config: momentum must be in [0,1)");
  if (bmm_warm_iters < 1) throw std::invalid_argument("config: bmm_warm_iters must be >= 1");
  if (bmm_cold.max_iters < 1) throw std::invalid_argument("config: bmm max_iters must be >= 1");
  if (fkl_k < 1) throw std::invalid_argument("config: fkl_k must be >= 1");
  if (ema_beta < 0.0 || ema_beta >= 1.0)
    throw std::invalid_argument("config: ema_beta must be in [0,1)");
  for (int h : hidden)
    if (h < 1) throw std::invalid_argument("config: hidden widths must be positive");
  if (!eps_mode.dynamic && (eps_mode.fixed < 0.0 || eps_mode.fixed > 1.0))
    throw std::invalid_argument("config: fixed eps must be in [0,1]");
  augment.validate();
}

Stage1Result stage1(const TrainConfig& cfg, const Dataset& train, const Dataset& test) {
  cfg.validate();
  train.validate();
  if (test.size()) test.validate();
  const size_t n = train.size();
  const int k = train.n_classes;

  Model model = init_model(model_dims(cfg, train), derive_seed(cfg.seed, "init"));
  SgdMomentum opt(cfg.momentum);
  DynamicsLedger ledger(n, cfg.fkl_k, cfg.retain_history);

  Model prev_model = model;  // model after the previous epoch
  Model base;
  int base_epoch = 0;
  bool base_found = false;

  std::vector<EpochMetrics> metrics;
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Gradients grads = make_gradients(model);
  Workspace ws;
  std::vector<double> dp(k);

  for (int e = 1; e <= cfg.stage1_epochs; ++e) {
    Rng shuffler(derive_seed(cfg.seed, "shuffle1", static_cast<uint64_t>(e)));
    shuffler.shuffle(order);

    for (size_t start = 0; start < n; start += cfg.batch_size) {
      const size_t stop = std::min(n, start + cfg.batch_size);
      grads.zero();
      const double inv = 1.0 / static_cast<double>(stop - start);
      for (size_t bi = start; bi < stop; ++bi) {
        const size_t i = order[bi];
        forward(model, train.row(i), ws);
        std::fill(dp.begin(), dp.end(), 0.0);
        ce_grad_p(ws.act.back(), train.given_labels[i], inv, dp);
        backward_from_dp(model, ws, dp, grads);
      }
      opt.step(model, grads, cfg.lr);
    }
    if (!model.finite())
      throw std::runtime_error("stage1: model diverged at epoch " + std::to_string(e));

    const auto pass = predict_plain(model, train);
    ledger.record_epoch(pass.preds, pass.losses, train.given_labels, cfg.ema_beta);

    EpochMetrics row;
    row.epoch = e;
    row.stage = 1;
    row.train_loss =
        std::accumulate(pass.losses.begin(), pass.losses.end(), 0.0) / static_cast<double>(n);
    row.test_acc = test_acc_or_zero(model, test);
    if (e >= 2) row.label_wave = ledger.label_wave().back();
    fill_epoch_aucs(row, train, ledger);
    metrics.push_back(row);

    // wave index e-3 becomes checkable once its right neighbor (e-2) exists;
    // it belongs to epoch e-1, whose model is still in prev_model
    if (!base_found && e >= 4) {
      const auto& wave = ledger.label_wave();
      const size_t t = static_cast<size_t>(e - 3);
      if (t >= 1 && wave[t] < wave[t - 1] && wave[t] < wave[t + 1]) {
        base = prev_model;
        base_epoch = e - 1;
        base_found = true;
      }
    }
    prev_model = model;
  }

  if (!base_found) {
    base = model;
    base_epoch = cfg.stage1_epochs;
  }

  Stage1Result result{std::move(base), std::move(model), base_epoch, std::move(ledger),
                      std::move(metrics)};
  return result;
}

std::vector<WeightTriple> compute_weights(const MixtureBank& bank, const DynamicsLedger& ledger,
                                          std::span<const int> labels) {
  if (labels.size() != ledger.size())
    throw std::invalid_argument("compute_weights: label count mismatch");
  const auto wnorm = ledger.normalized_wrong_events();
  std::vector<WeightTriple> out(labels.size());
  const int k = static_cast<int>(bank.per_class.size());
  for (size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= k)
      throw std::invalid_argument("compute_weights: class index out of range");
    const BetaMixture& m = bank.per_class[labels[i]];
    const auto [t1, t2] = posterior(m, wnorm[i]);
    out[i] = {t1, difficulty(m, wnorm[i]), t2};
  }
  return out;
}

WeightTriple effective_triple(const WeightTriple& wt, LossCombo combo, const EpsMode& eps) {
  switch (combo) {
    case LossCombo::lc_only: return {1.0, 0.0, 0.0};
    case LossCombo::lc_ln: return {wt.tau1, 0.0, wt.tau2};
    case LossCombo::lc_lsim: return {wt.tau1, eps.dynamic ? wt.eps : eps.fixed, 0.0};
    case LossCombo::full: return {wt.tau1, eps.dynamic ? wt.eps : eps.fixed, wt.tau2};
  }
  return wt;
}

double ido_loss(std::span<const double> p_w, std::span<const double> p_s, int label,
                const WeightTriple& wt, std::span<double> dp_w, std::span<double> dp_s) {
  const size_t k = p_w.size();
  double loss = wt.tau1 * (ce_loss(p_w, label) + ce_loss(p_s, label));

  double sim = 0.0;
  double ln = 0.0;
  double conf = 0.0;
  for (size_t j = 0; j < k; ++j) {
    const double diff = p_w[j] - p_s[j];
    sim += diff * diff;
    conf = std::max(conf, 0.5 * (p_w[j] + p_s[j]));
  }
  for (size_t j = 0; j < k; ++j) {
    const double q = 0.5 * (p_w[j] + p_s[j]);
    ln -= conf * q * std::log(std::max(q, kProbFloor));  // q doubles as the detached target
  }
  loss += wt.eps * sim + wt.tau2 * ln;

  if (!dp_w.empty()) {
    std::fill(dp_w.begin(), dp_w.end(), 0.0);
    std::fill(dp_s.begin(), dp_s.end(), 0.0);
    ce_grad_p(p_w, label, wt.tau1, dp_w);
    ce_grad_p(p_s, label, wt.tau1, dp_s);
    for (size_t j = 0; j < k; ++j) {
      const double diff = p_w[j] - p_s[j];
      dp_w[j] += wt.eps * 2.0 * diff;
      dp_s[j] -= wt.eps * 2.0 * diff;
      const double q = 0.5 * (p_w[j] + p_s[j]);
      if (q > kProbFloor) {
        // d/dq_j of -c*qbar_j*log(q_j) with qbar, c detached is -c*qbar_j/q_j,
        // and qbar_j == q_j at the evaluation point; dq/dp_view = 1/2
        const double g = -0.5 * wt.tau2 * conf;
        dp_w[j] += g;
        dp_s[j] += g;
      }
    }
  }
  return loss;
}

double ido_loss_frozen(std::span<const double> p_w, std::span<const double> p_s, int label,
                       const WeightTriple& wt, std::span<const double> q_bar, double conf) {
  const size_t k = p_w.size();
  double loss = wt.tau1 * (ce_loss(p_w, label) + ce_loss(p_s, label));
  double sim = 0.0;
  double ln = 0.0;
  for (size_t j = 0; j < k; ++j) {
    const double diff = p_w[j] - p_s[j];
    sim += diff * diff;
    const double q = 0.5 * (p_w[j] + p_s[j]);
    ln -= conf * q_bar[j] * std::log(std::max(q, kProbFloor));
  }
  return loss + wt.eps * sim + wt.tau2 * ln;
}

IdoLossProbe::IdoLossProbe(std::vector<double> weak, std::vector<double> strong,
                           std::vector<int> labels, std::vector<WeightTriple> weights, int dim)
    : weak_(std::move(weak)),
      strong_(std::move(strong)),
      labels_(std::move(labels)),
      weights_(std::move(weights)),
      dim_(dim) {}

void IdoLossProbe::capture(const Model& m) {
  const size_t n = labels_.size();
  q_bar_.assign(n, {});
  conf_.assign(n, 0.0);
  const size_t d = static_cast<size_t>(dim_);
  for (size_t i = 0; i < n; ++i) {
    const auto pw = forward_probs(m, {weak_.data() + i * d, d});
    const auto ps = forward_probs(m, {strong_.data() + i * d, d});
    auto& q = q_bar_[i];
    q.resize(pw.size());
    for (size_t j = 0; j < pw.size(); ++j) {
      q[j] = 0.5 * (pw[j] + ps[j]);
      conf_[i] = std::max(conf_[i], q[j]);
    }
  }
}

double IdoLossProbe::loss_and_grad(const Model& m, Gradients& g) const {
  g.zero();
  const size_t n = labels_.size();
  const size_t d = static_cast<size_t>(dim_);
  Workspace ws_w, ws_s;
  std::vector<double> dp_w(m.output_dim()), dp_s(m.output_dim());
  double loss = 0.0;
  for (size_t i = 0; i < n; ++i) {
    forward(m, {weak_.data() + i * d, d}, ws_w);
    forward(m, {strong_.data() + i * d, d}, ws_s);
    loss += ido_loss(ws_w.act.back(), ws_s.act.back(), labels_[i], weights_[i], dp_w, dp_s);
    const double inv = 1.0 / static_cast<double>(n);
    for (auto& v : dp_w) v *= inv;
    for (auto& v : dp_s) v *= inv;
    backward_from_dp(m, ws_w, dp_w, g);
    backward_from_dp(m, ws_s, dp_s, g);
  }
  return loss / static_cast<double>(n);
}

double IdoLossProbe::loss_frozen(const Model& m) const {
  const size_t n = labels_.size();
  const size_t d = static_cast<size_t>(dim_);
  double loss = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const auto pw = forward_probs(m, {weak_.data() + i * d, d});
    const auto ps = forward_probs(m, {strong_.data() + i * d, d});
    loss += ido_loss_frozen(pw, ps, labels_[i], weights_[i], q_bar_[i], conf_[i]);
  }
  return loss / static_cast<double>(n);
}

Stage2Result stage2(const TrainConfig& cfg, const Dataset& train, const Dataset& test,
                    const Model& base, DynamicsLedger& ledger) {
  cfg.validate();
  train.validate();
  if (ledger.size() != train.size())
    throw std::invalid_argument("stage2: ledger does not match dataset");
  if (ledger.epoch() < 1) throw state_error("stage2: ledger carries no stage-1 history");

  const size_t n = train.size();
  const int k = train.n_classes;
  Model model = base;
  SgdMomentum opt(cfg.momentum);
  const auto stds = feature_stds(train.features, n, train.dim);

  Stage2Result result;
  MixtureBank bank;
  bool have_bank = false;

  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Gradients grads = make_gradients(model);
  Workspace ws_w, ws_s;
  std::vector<double> dp_w(k), dp_s(k);
  std::vector<WeightTriple> raw_weights;

  auto fit_current_bank = [&](int epoch_no) {
    const auto wnorm = ledger.normalized_wrong_events();
    try {
      bank = fit_bank(wnorm, train.given_labels, k, have_bank ? &bank : nullptr,
                      cfg.bmm_warm_iters, cfg.bmm_cold);
    } catch (const fit_error& err) {
      // keep training: every class falls back to the prior-free init
      bank.per_class.assign(k, default_init());
      bank.fallback = default_init();
      bank.fallback_used.assign(k, 1);
      result.warnings.push_back("epoch " + std::to_string(epoch_no) +
                                ": mixture fit failed (" + err.what() + "); using default mixture");
    }
    have_bank = true;
  };

  auto track_conservation = [&](const std::vector<WeightTriple>& wts) {
    for (const auto& wt : wts) {
      result.coeff_sum_max_dev =
          std::max(result.coeff_sum_max_dev, std::abs(wt.tau1 + wt.tau2 - 1.0));
      result.eps_min = std::min(result.eps_min, wt.eps);
      result.eps_max = std::max(result.eps_max, wt.eps);
    }
  };

  for (int e = 0; e < cfg.stage2_epochs; ++e) {
    fit_current_bank(e + 1);
    raw_weights = compute_weights(bank, ledger, train.given_labels);
    track_conservation(raw_weights);

    const double lr_e = cfg.lr * 0.5 * (1.0 + std::cos(kPi * e / cfg.stage2_epochs));
    Rng shuffler(derive_seed(cfg.seed, "shuffle2", static_cast<uint64_t>(e)));
    shuffler.shuffle(order);

    double epoch_loss = 0.0;
    size_t batch_no = 0;
    for (size_t start = 0; start < n; start += cfg.batch_size, ++batch_no) {
      const size_t stop = std::min(n, start + cfg.batch_size);
      const size_t bn = stop - start;

      std::vector<double> batch_feats(bn * train.dim);
      for (size_t bi = 0; bi < bn; ++bi) {
        const auto x = train.row(order[start + bi]);
        std::copy(x.begin(), x.end(), batch_feats.begin() + bi * train.dim);
      }
      const auto weak = augment(batch_feats, train.dim, View::weak, cfg.augment, stds,
                                derive_seed(cfg.seed, "aug-w", static_cast<uint64_t>(e), batch_no));
      const auto strong =
          augment(batch_feats, train.dim, View::strong, cfg.augment, stds,
                  derive_seed(cfg.seed, "aug-s", static_cast<uint64_t>(e), batch_no));

      grads.zero();
      const double inv = 1.0 / static_cast<double>(bn);
      for (size_t bi = 0; bi < bn; ++bi) {
        const size_t i = order[start + bi];
        const size_t off = bi * static_cast<size_t>(train.dim);
        forward(model, {weak.data() + off, static_cast<size_t>(train.dim)}, ws_w);
        forward(model, {strong.data() + off, static_cast<size_t>(train.dim)}, ws_s);
        const WeightTriple wt = effective_triple(raw_weights[i], cfg.combo, cfg.eps_mode);
        epoch_loss += ido_loss(ws_w.act.back(), ws_s.act.back(), train.given_labels[i], wt,
                               dp_w, dp_s);
        for (size_t j = 0; j < dp_w.size(); ++j) {
          dp_w[j] *= inv;
          dp_s[j] *= inv;
        }
        backward_from_dp(model, ws_w, dp_w, grads);
        backward_from_dp(model, ws_s, dp_s, grads);
      }
      opt.step(model, grads, lr_e);
    }
    if (!model.finite())
      throw std::runtime_error("stage2: model diverged at epoch " + std::to_string(e + 1));

    const auto pass = predict_two_view(
        model, train, cfg.augment, stds,
        derive_seed(cfg.seed, "eval-w", static_cast<uint64_t>(e)),
        derive_seed(cfg.seed, "eval-s", static_cast<uint64_t>(e)));
    ledger.record_epoch(pass.preds, pass.losses, train.given_labels, cfg.ema_beta);

    EpochMetrics row;
    row.epoch = ledger.epoch();
    row.stage = 2;
    row.train_loss = epoch_loss / static_cast<double>(n);
    row.test_acc = test_acc_or_zero(model, test);
    row.label_wave = ledger.label_wave().back();
    fill_epoch_aucs(row, train, ledger);
    result.metrics.push_back(row);
  }

  // refit once more so the exported bank and triples describe the final
  // ledger state
  if (cfg.stage2_epochs > 0) {
    fit_current_bank(cfg.stage2_epochs + 1);
    result.final_weights = compute_weights(bank, ledger, train.given_labels);
    track_conservation(result.final_weights);
    result.final_bank = bank;
    result.final_wnorm = ledger.normalized_wrong_events();
  }
  result.model = std::move(model);
  return result;
}

}  // namespace ido
