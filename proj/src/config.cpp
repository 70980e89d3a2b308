#include "ido/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "ido/errors.hpp"

namespace ido {

namespace {

using nlohmann::json;

void reject_unknown(const json& obj, const std::string& scope,
                    const std::set<std::string>& known) {
  for (const auto& [key, _] : obj.items()) {
    if (!known.count(key))
      throw config_error("unknown config key: " + (scope.empty() ? key : scope + "." + key));
  }
}

template <typename T>
void get_to(const json& obj, const std::string& scope, const std::string& key, T& out) {
  if (!obj.contains(key)) return;
  try {
    obj.at(key).get_to(out);
  } catch (const json::exception&) {
    throw config_error("bad value for config key: " + (scope.empty() ? key : scope + "." + key));
  }
}

void get_seed(const json& obj, const std::string& scope, std::optional<uint64_t>& out) {
  if (!obj.contains("seed")) return;
  uint64_t v = 0;
  get_to(obj, scope, "seed", v);
  out = v;
}

}  // namespace

TrainConfig ExperimentConfig::train_config() const {
  TrainConfig tc;
  tc.stage1_epochs = train.stage1_epochs;
  tc.stage2_epochs = train.stage2_epochs;
  tc.batch_size = train.batch_size;
  tc.lr = train.lr;
  tc.momentum = train.momentum;
  tc.augment = {train.weak_sigma, train.strong_sigma, train.strong_dropout};
  tc.bmm_warm_iters = train.bmm_warm_iters;
  tc.bmm_cold = {train.bmm_max_iters, train.bmm_tol};
  tc.fkl_k = train.fkl_k;
  tc.ema_beta = train.ema_beta;
  tc.hidden = model.hidden;
  tc.retain_history = train.retain_history;
  tc.seed = seed;

  if (train.loss_combo == "lc")
    tc.combo = LossCombo::lc_only;
  else if (train.loss_combo == "lc+ln")
    tc.combo = LossCombo::lc_ln;
  else if (train.loss_combo == "lc+lsim")
    tc.combo = LossCombo::lc_lsim;
  else if (train.loss_combo == "full")
    tc.combo = LossCombo::full;
  else
    throw config_error("bad value for config key: train.loss_combo");

  if (train.eps_mode == "dynamic")
    tc.eps_mode = {true, 0.0};
  else if (train.eps_mode == "fixed")
    tc.eps_mode = {false, train.eps_fixed};
  else
    throw config_error("bad value for config key: train.eps_mode");

  tc.validate();
  return tc;
}

void ExperimentConfig::validate() const {
  if (dataset.kind != "gaussian" && dataset.kind != "csv")
    throw config_error("bad value for config key: dataset.kind");
  if (dataset.kind == "gaussian") {
    if (dataset.k < 2) throw config_error("dataset.k must be >= 2");
    if (dataset.n_per_class < 1) throw config_error("dataset.n_per_class must be >= 1");
    if (dataset.test_per_class < 0) throw config_error("dataset.test_per_class must be >= 0");
    if (dataset.d < 2) throw config_error("dataset.d must be >= 2");
    if (!(dataset.sep > 0.0)) throw config_error("dataset.sep must be > 0");
    if (!(dataset.spread > 0.0)) throw config_error("dataset.spread must be > 0");
  } else {
    if (dataset.train_csv.empty()) throw config_error("dataset.train_csv is required for csv datasets");
  }
  if (noise.kind != "sym" && noise.kind != "asym" && noise.kind != "inst" && noise.kind != "none")
    throw config_error("bad value for config key: noise.kind");
  if (noise.kind == "inst") {
    if (noise.eta < 0.0 || noise.eta >= 1.0) throw config_error("noise.eta must be in [0,1) for inst");
  } else if (noise.eta < 0.0 || noise.eta > 1.0) {
    throw config_error("noise.eta must be in [0,1]");
  }
  for (int p : eval.probe_epochs)
    if (p < 1) throw config_error("eval.probe_epochs entries must be >= 1");
  for (double t : eval.thresholds)
    if (!(t > 0.0) || !(t < 1.0)) throw config_error("eval.thresholds entries must be in (0,1)");
  if (eval.ablate_seeds < 1) throw config_error("eval.ablate_seeds must be >= 1");
  if (output.dir.empty()) throw config_error("output.dir must not be empty");
  train_config();  // validates train+model sections
}

ExperimentConfig parse_config_json(const std::string& text, const std::string& origin) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::exception& e) {
    throw parse_error(origin + ": " + e.what());
  }
  if (!root.is_object()) throw config_error(origin + ": top level must be an object");
  reject_unknown(root, "", {"dataset", "noise", "model", "train", "eval", "output", "seed"});

  ExperimentConfig cfg;
  get_to(root, "", "seed", cfg.seed);

  if (root.contains("dataset")) {
    const auto& o = root.at("dataset");
    reject_unknown(o, "dataset",
                   {"kind", "k", "n_per_class", "test_per_class", "d", "sep", "spread",
                    "train_csv", "test_csv", "seed"});
    get_to(o, "dataset", "kind", cfg.dataset.kind);
    get_to(o, "dataset", "k", cfg.dataset.k);
    get_to(o, "dataset", "n_per_class", cfg.dataset.n_per_class);
    get_to(o, "dataset", "test_per_class", cfg.dataset.test_per_class);
    get_to(o, "dataset", "d", cfg.dataset.d);
    get_to(o, "dataset", "sep", cfg.dataset.sep);
    get_to(o, "dataset", "spread", cfg.dataset.spread);
    get_to(o, "dataset", "train_csv", cfg.dataset.train_csv);
    get_to(o, "dataset", "test_csv", cfg.dataset.test_csv);
    get_seed(o, "dataset", cfg.dataset.seed);
  }
  if (root.contains("noise")) {
    const auto& o = root.at("noise");
    reject_unknown(o, "noise", {"kind", "eta", "seed"});
    get_to(o, "noise", "kind", cfg.noise.kind);
    get_to(o, "noise", "eta", cfg.noise.eta);
    get_seed(o, "noise", cfg.noise.seed);
  }
  if (root.contains("model")) {
    const auto& o = root.at("model");
    reject_unknown(o, "model", {"hidden"});
    get_to(o, "model", "hidden", cfg.model.hidden);
  }
  if (root.contains("train")) {
    const auto& o = root.at("train");
    reject_unknown(o, "train",
                   {"stage1_epochs", "stage2_epochs", "batch_size", "lr", "momentum",
                    "weak_sigma", "strong_sigma", "strong_dropout", "bmm_warm_iters",
                    "bmm_max_iters", "bmm_tol", "fkl_k", "ema_beta", "loss_combo", "eps_mode",
                    "eps_fixed", "retain_history"});
    auto& t = cfg.train;
    get_to(o, "train", "stage1_epochs", t.stage1_epochs);
    get_to(o, "train", "stage2_epochs", t.stage2_epochs);
    get_to(o, "train", "batch_size", t.batch_size);
    get_to(o, "train", "lr", t.lr);
    get_to(o, "train", "momentum", t.momentum);
    get_to(o, "train", "weak_sigma", t.weak_sigma);
    get_to(o, "train", "strong_sigma", t.strong_sigma);
    get_to(o, "train", "strong_dropout", t.strong_dropout);
    get_to(o, "train", "bmm_warm_iters", t.bmm_warm_iters);
    get_to(o, "train", "bmm_max_iters", t.bmm_max_iters);
    get_to(o, "train", "bmm_tol", t.bmm_tol);
    get_to(o, "train", "fkl_k", t.fkl_k);
    get_to(o, "train", "ema_beta", t.ema_beta);
    get_to(o, "train", "loss_combo", t.loss_combo);
    get_to(o, "train", "eps_mode", t.eps_mode);
    get_to(o, "train", "eps_fixed", t.eps_fixed);
    get_to(o, "train", "retain_history", t.retain_history);
  }
  if (root.contains("eval")) {
    const auto& o = root.at("eval");
    reject_unknown(o, "eval", {"probe_epochs", "thresholds", "ablate_seeds"});
    get_to(o, "eval", "probe_epochs", cfg.eval.probe_epochs);
    get_to(o, "eval", "thresholds", cfg.eval.thresholds);
    get_to(o, "eval", "ablate_seeds", cfg.eval.ablate_seeds);
  }
  if (root.contains("output")) {
    const auto& o = root.at("output");
    reject_unknown(o, "output", {"dir"});
    get_to(o, "output", "dir", cfg.output.dir);
  }

  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open config: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_json(ss.str(), path);
}

std::string resolved_config_json(const ExperimentConfig& cfg) {
  json root;
  root["seed"] = cfg.seed;
  auto& d = root["dataset"];
  d["kind"] = cfg.dataset.kind;
  d["k"] = cfg.dataset.k;
  d["n_per_class"] = cfg.dataset.n_per_class;
  d["test_per_class"] = cfg.dataset.test_per_class;
  d["d"] = cfg.dataset.d;
  d["sep"] = cfg.dataset.sep;
  d["spread"] = cfg.dataset.spread;
  d["train_csv"] = cfg.dataset.train_csv;
  d["test_csv"] = cfg.dataset.test_csv;
  if (cfg.dataset.seed) d["seed"] = *cfg.dataset.seed;
  auto& n = root["noise"];
  n["kind"] = cfg.noise.kind;
  n["eta"] = cfg.noise.eta;
  if (cfg.noise.seed) n["seed"] = *cfg.noise.seed;
  root["model"]["hidden"] = cfg.model.hidden;
  auto& t = root["train"];
  t["stage1_epochs"] = cfg.train.stage1_epochs;
  t["stage2_epochs"] = cfg.train.stage2_epochs;
  t["batch_size"] = cfg.train.batch_size;
  t["lr"] = cfg.train.lr;
  t["momentum"] = cfg.train.momentum;
  t["weak_sigma"] = cfg.train.weak_sigma;
  t["strong_sigma"] = cfg.train.strong_sigma;
  t["strong_dropout"] = cfg.train.strong_dropout;
  t["bmm_warm_iters"] = cfg.train.bmm_warm_iters;
  t["bmm_max_iters"] = cfg.train.bmm_max_iters;
  t["bmm_tol"] = cfg.train.bmm_tol;
  t["fkl_k"] = cfg.train.fkl_k;
  t["ema_beta"] = cfg.train.ema_beta;
  t["loss_combo"] = cfg.train.loss_combo;
  t["eps_mode"] = cfg.train.eps_mode;
  t["eps_fixed"] = cfg.train.eps_fixed;
  t["retain_history"] = cfg.train.retain_history;
  auto& e = root["eval"];
  e["probe_epochs"] = cfg.eval.probe_epochs;
  e["thresholds"] = cfg.eval.thresholds;
  e["ablate_seeds"] = cfg.eval.ablate_seeds;
  root["output"]["dir"] = cfg.output.dir;
  return root.dump(2) + "\n";
}

}  // namespace ido
