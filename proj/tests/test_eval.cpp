#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "ido/config.hpp"
#include "ido/datagen.hpp"
#include "ido/errors.hpp"
#include "ido/eval.hpp"
#include "ido/experiment.hpp"
#include "ido/rng.hpp"
#include "oracles.hpp"

using namespace ido;

TEST_CASE("auc: perfect separation, ties, brute-force agreement") {
  const std::vector<double> perfect{0.8, 0.9, 0.1, 0.2};
  const std::vector<char> mask{1, 1, 0, 0};
  CHECK(auc(perfect, mask) == 1.0);

  const std::vector<double> ties(4, 0.5);
  CHECK(auc(ties, mask) == 0.5);

  const std::vector<double> scores{0.1, 0.4, 0.35, 0.8, 0.65, 0.65};
  const std::vector<char> mixed{0, 0, 1, 1, 0, 1};
  CHECK(auc(scores, mixed) == doctest::Approx(oracle::auc_pair_count(scores, mixed)).epsilon(1e-12));

  CHECK_THROWS_AS(auc(perfect, std::vector<char>{1, 1, 1, 1}), eval_error);
  CHECK_THROWS_AS(auc(perfect, std::vector<char>{0, 0, 0, 0}), eval_error);
}

TEST_CASE("auc properties: monotone-transform invariance and class swap") {
  Rng rng(7);
  std::vector<double> scores(60);
  std::vector<char> mask(60);
  for (size_t i = 0; i < scores.size(); ++i) {
    scores[i] = rng.uniform();
    mask[i] = rng.uniform() < 0.4;
  }
  mask[0] = 1;
  mask[1] = 0;
  const double base = auc(scores, mask);
  CHECK(base == doctest::Approx(oracle::auc_pair_count(scores, mask)).epsilon(1e-12));

  std::vector<double> transformed(scores.size());
  for (size_t i = 0; i < scores.size(); ++i)
    transformed[i] = std::exp(3.0 * scores[i]) + 1.0;  // strictly monotone
  CHECK(auc(transformed, mask) == doctest::Approx(base).epsilon(1e-12));

  std::vector<char> swapped(mask.size());
  for (size_t i = 0; i < mask.size(); ++i) swapped[i] = !mask[i];
  CHECK(auc(scores, swapped) == doctest::Approx(1.0 - base).epsilon(1e-12));
}

TEST_CASE("prf at threshold: closed cases and hand computation") {
  // all clean predicted clean, nothing noisy leaks through
  const std::vector<double> tau1{0.9, 0.8, 0.1, 0.2};
  const std::vector<char> mask{0, 0, 1, 1};
  const Prf perfect = prf_at_threshold(tau1, mask, 0.5);
  CHECK(perfect.precision == 1.0);
  CHECK(perfect.recall == 1.0);
  CHECK(perfect.f == 1.0);

  // nothing predicted clean
  const std::vector<double> low{0.1, 0.1, 0.1, 0.1};
  const Prf nothing = prf_at_threshold(low, mask, 0.5);
  CHECK(nothing.precision == 0.0);
  CHECK(nothing.recall == 0.0);
  CHECK(nothing.f == 0.0);

  // 8-sample hand case: predicted clean {0,1,2,3}; oracle clean {0,1,3,6}
  const std::vector<double> t8{0.9, 0.8, 0.6, 0.55, 0.4, 0.3, 0.2, 0.1};
  const std::vector<char> m8{0, 0, 1, 0, 1, 1, 0, 1};
  const Prf hand = prf_at_threshold(t8, m8, 0.5);
  CHECK(hand.precision == doctest::Approx(0.75));
  CHECK(hand.recall == doctest::Approx(0.75));
  CHECK(hand.f == doctest::Approx(0.75));

  CHECK_THROWS_AS(prf_at_threshold(t8, m8, 0.0), std::invalid_argument);
}

TEST_CASE("prf property: recall never rises with the threshold") {
  Rng rng(13);
  std::vector<double> tau1(80);
  std::vector<char> mask(80);
  for (size_t i = 0; i < tau1.size(); ++i) {
    tau1[i] = rng.uniform();
    mask[i] = rng.uniform() < 0.3;
  }
  double prev_recall = 1.0;
  for (double t : {0.1, 0.2, 0.35, 0.5, 0.65, 0.8, 0.9}) {
    const double r = prf_at_threshold(tau1, mask, t).recall;
    CHECK(r <= prev_recall + 1e-12);
    prev_recall = r;
  }
}

TEST_CASE("test_accuracy: perfect, constant, hand-checked") {
  // sign-of-x0 classifier
  Model signer = init_model({2, 2}, 0);
  signer.layers[0].w = {1.0, 0.0, -1.0, 0.0};
  signer.layers[0].b = {0.0, 0.0};

  Dataset blobs;
  blobs.n_classes = 2;
  blobs.dim = 2;
  for (int i = 0; i < 10; ++i) {
    const int c = i % 2;
    blobs.features.push_back(c == 0 ? 2.0 : -2.0);
    blobs.features.push_back(0.5);
    blobs.given_labels.push_back(c);
    blobs.true_labels.push_back(c);
  }
  CHECK(test_accuracy(signer, blobs) == 1.0);

  // zeroed model predicts class 0 everywhere: balanced accuracy 1/K
  Model constant = init_model({2, 4}, 0);
  for (auto& v : constant.layers[0].w) v = 0.0;
  Dataset balanced;
  balanced.n_classes = 4;
  balanced.dim = 2;
  for (int i = 0; i < 40; ++i) {
    balanced.features.push_back(1.0);
    balanced.features.push_back(-1.0);
    balanced.given_labels.push_back(i % 4);
    balanced.true_labels.push_back(i % 4);
  }
  CHECK(test_accuracy(constant, balanced) == doctest::Approx(0.25));

  // 5-sample hand case against the sign classifier: labels {0,0,1,1,1} with
  // features predicting {0,1,1,1,0} -> 3 of 5 correct
  Dataset five;
  five.n_classes = 2;
  five.dim = 2;
  const double xs[5] = {2.0, -2.0, -2.0, -2.0, 2.0};
  const int labels[5] = {0, 0, 1, 1, 1};
  for (int i = 0; i < 5; ++i) {
    five.features.push_back(xs[i]);
    five.features.push_back(0.0);
    five.given_labels.push_back(labels[i]);
    five.true_labels.push_back(labels[i]);
  }
  CHECK(test_accuracy(signer, five) == doctest::Approx(0.6));

  CHECK_THROWS_AS(test_accuracy(signer, Dataset{}), eval_error);
}

TEST_CASE("compare_metrics: unavailable cells at epoch one, probe validation") {
  // 6 samples, 4 epochs; sample 0 noisy-ish (always wrong), others drift
  const std::vector<int> labels{0, 0, 0, 1, 1, 1};
  DynamicsLedger ledger(6, 2, true);
  const std::vector<std::vector<int>> stream{
      {1, 0, 0, 1, 1, 1}, {1, 0, 0, 0, 1, 1}, {1, 0, 0, 1, 1, 1}, {1, 0, 1, 1, 1, 1}};
  Rng rng(3);
  for (const auto& preds : stream) {
    std::vector<double> losses(6);
    for (size_t i = 0; i < 6; ++i) losses[i] = preds[i] == labels[i] ? rng.uniform() * 0.2
                                                                     : 1.0 + rng.uniform();
    ledger.record_epoch(preds, losses, labels, 0.7);
  }
  const std::vector<char> mask{1, 0, 0, 1, 0, 0};

  const auto table = compare_metrics(ledger, mask, std::vector<int>{1, 4});
  REQUIRE(table.metrics.size() == 5);
  REQUIRE(table.probe_epochs.size() == 2);

  // epoch 1: no sample can have forgotten yet or reached k=2 consecutive hits
  const size_t fe_row = 2, fkl_row = 3, we_row = 4;
  CHECK(std::isnan(table.values[fe_row][0]));
  CHECK(std::isnan(table.values[fkl_row][0]));
  CHECK_FALSE(std::isnan(table.values[we_row][0]));
  CHECK_FALSE(std::isnan(table.values[we_row][1]));
  CHECK(table.values[we_row][1] > 0.5);  // the always-wrong noisy sample ranks on top

  CHECK_THROWS_AS(compare_metrics(ledger, mask, std::vector<int>{5}), std::invalid_argument);
  DynamicsLedger no_hist(6, 2, false);
  CHECK_THROWS_AS(compare_metrics(no_hist, mask, std::vector<int>{1}), state_error);

  // determinism: identical inputs give identical tables
  const auto again = compare_metrics(ledger, mask, std::vector<int>{1, 4});
  for (size_t m = 0; m < table.values.size(); ++m)
    for (size_t p = 0; p < table.values[m].size(); ++p) {
      if (std::isnan(table.values[m][p]))
        CHECK(std::isnan(again.values[m][p]));
      else
        CHECK(table.values[m][p] == again.values[m][p]);
    }
}

TEST_CASE("compare_metrics on a real run: wrong event outlasts loss") {
  auto train = make_gaussian_clusters(4, 1000, 2, 6.0, 2.25, derive_seed(1, "datagen"));
  train = apply_transition(train, symmetric_noise_matrix(4, 0.4), derive_seed(1, "noise"));
  const auto test = make_gaussian_clusters(4, 100, 2, 6.0, 2.25, derive_seed(1, "t"));

  TrainConfig cfg;
  cfg.stage1_epochs = 60;
  cfg.stage2_epochs = 0;
  cfg.lr = 0.2;
  cfg.batch_size = 32;
  cfg.retain_history = true;
  cfg.seed = 1;
  const Stage1Result s1 = stage1(cfg, train, test);

  const auto mask = train.noise_mask();
  const auto table = compare_metrics(s1.ledger, mask, std::vector<int>{10, 60});
  const size_t loss_row = 0, we_row = 4;
  CHECK(table.values[we_row][1] > table.values[loss_row][1]);  // late-epoch advantage
  CHECK(table.values[we_row][1] >= 0.9);
}

TEST_CASE("metric table and ablation csv shapes") {
  const auto dir = std::filesystem::temp_directory_path() / "ido_eval_test";
  std::filesystem::create_directories(dir);

  MetricTable table;
  table.probe_epochs = {1, 8};
  table.metrics = {"single_loss", "ema_loss", "fe", "fkl", "wrong_event"};
  table.values = {{0.7, 0.6}, {0.7, 0.65}, {std::nan(""), 0.8}, {std::nan(""), 0.75}, {0.8, 0.9}};
  const auto table_path = (dir / "compare.csv").string();
  write_metric_table_csv(table, table_path);
  {
    std::ifstream in(table_path);
    std::string header;
    std::getline(in, header);
    CHECK(header == "metric,epoch_1,epoch_8");
    std::string row;
    std::getline(in, row);
    size_t rows = 1;
    CHECK(row.substr(0, 11) == "single_loss");
    while (std::getline(in, row)) rows += !row.empty();
    CHECK(rows == 5);
  }

  const auto cells = ablation_grid();
  REQUIRE(cells.size() == 7);
  CHECK(cells[0].name == "lc");
  CHECK(cells[3].name == "full(dynamic)");

  std::filesystem::remove_all(dir);
}
