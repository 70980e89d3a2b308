#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "ido/dynamics.hpp"
#include "ido/errors.hpp"
#include "ido/rng.hpp"

using namespace ido;

namespace {
// replay a per-sample prediction history; losses default to 1.0
DynamicsLedger replay(const std::vector<std::vector<int>>& per_epoch_preds,
                      const std::vector<int>& labels, int fkl_k = 2, bool history = false,
                      double ema_beta = 0.7) {
  DynamicsLedger ledger(labels.size(), fkl_k, history);
  const std::vector<double> ones(labels.size(), 1.0);
  for (const auto& preds : per_epoch_preds) ledger.record_epoch(preds, ones, labels, ema_beta);
  return ledger;
}
}  // namespace

TEST_CASE("wrong and forgetting events on a hand trace") {
  // label a(=0), preds a,a,b,a,b -> 2 wrong epochs, 2 correct->wrong drops
  const auto ledger = replay({{0}, {0}, {1}, {0}, {1}}, {0});
  CHECK(ledger.wrong_events()[0] == 2);
  CHECK(ledger.forgetting()[0] == 2);
}

TEST_CASE("always-correct sample") {
  const int T = 6;
  for (int k = 1; k <= T; ++k) {
    DynamicsLedger ledger(1, k, false);
    const std::vector<int> labels{2};
    const std::vector<double> loss{0.1};
    for (int e = 0; e < T; ++e) ledger.record_epoch(std::vector<int>{2}, loss, labels, 0.7);
    CHECK(ledger.wrong_events()[0] == 0);
    CHECK(ledger.forgetting()[0] == 0);
    CHECK(ledger.fkl_scores()[0] == doctest::Approx(k));  // first run of length k ends at epoch k
  }
}

TEST_CASE("label wave counts changed predictions") {
  const auto ledger = replay({{0, 1}, {1, 1}}, {0, 0});
  REQUIRE(ledger.label_wave().size() == 1);
  CHECK(ledger.label_wave()[0] == 1);
}

TEST_CASE("fluctuation flags") {
  CHECK(replay({{0}, {0}, {0}}, {0}).fluctuation_flags()[0] == 0);
  CHECK(replay({{0}, {1}}, {0}).fluctuation_flags()[0] == 1);
  CHECK(replay({{1}, {0}}, {0}).fluctuation_flags()[0] == 0);  // never correct-then-wrong

  DynamicsLedger fresh(1, 2, false);
  fresh.record_epoch(std::vector<int>{0}, std::vector<double>{1.0}, std::vector<int>{0}, 0.7);
  CHECK_THROWS_AS(fresh.fluctuation_flags(), state_error);
}

TEST_CASE("normalized wrong events clip to the open interval") {
  std::vector<std::vector<int>> preds(10, {1, 0, 0});  // sample0 always wrong, 1 always right,
  for (auto& p : preds) p[2] = 0;
  preds[0][2] = 1;
  preds[1][2] = 1;
  preds[2][2] = 1;
  preds[3][2] = 1;  // sample2 wrong in 4 of 10
  const auto ledger = replay(preds, {0, 0, 0});
  const auto w = ledger.normalized_wrong_events();
  CHECK(w[0] == doctest::Approx(1.0 - 1e-4));
  CHECK(w[1] == doctest::Approx(1e-4));
  CHECK(w[2] == doctest::Approx(0.4));
}

TEST_CASE("ema loss fold") {
  DynamicsLedger ledger(1, 2, false);
  const std::vector<int> labels{0};
  ledger.record_epoch(std::vector<int>{0}, std::vector<double>{2.0}, labels, 0.5);
  CHECK(ledger.ema_loss()[0] == doctest::Approx(2.0));  // initialized to the first loss
  ledger.record_epoch(std::vector<int>{0}, std::vector<double>{4.0}, labels, 0.5);
  CHECK(ledger.ema_loss()[0] == doctest::Approx(3.0));
  CHECK(ledger.single_loss()[0] == doctest::Approx(4.0));
}

TEST_CASE("record_epoch input validation") {
  DynamicsLedger ledger(2, 2, false);
  const std::vector<int> labels{0, 1};
  CHECK_THROWS_AS(
      ledger.record_epoch(std::vector<int>{0}, std::vector<double>{1.0, 1.0}, labels, 0.7),
      std::invalid_argument);
  CHECK_THROWS_AS(ledger.record_epoch(std::vector<int>{0, 1}, std::vector<double>{1.0, -1.0},
                                      labels, 0.7),
                  std::invalid_argument);
}

TEST_CASE("change-rate stats on a two-sample trace (hand computed)") {
  DynamicsLedger ledger(2, 2, true);
  const std::vector<int> labels{0, 0};
  ledger.record_epoch(std::vector<int>{0, 1}, std::vector<double>{1.0, 3.0}, labels, 0.7);
  ledger.record_epoch(std::vector<int>{1, 0}, std::vector<double>{2.0, 1.0}, labels, 0.7);
  // wrong counts per epoch: (0,1) then (1,1); min-max per epoch: (0,1) then (0,0)
  // losses: (1,3)->(0,1), (2,1)->(1,0)
  const auto rows = ledger.change_rate_stats();
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].we_max == doctest::Approx(1.0));
  CHECK(rows[0].we_avg == doctest::Approx(0.5));
  CHECK(rows[0].loss_max == doctest::Approx(1.0));
  CHECK(rows[0].loss_avg == doctest::Approx(1.0));
}

TEST_CASE("change-rate stats: constant metric yields zero deltas") {
  DynamicsLedger ledger(3, 2, true);
  const std::vector<int> labels{0, 0, 0};
  const std::vector<int> preds{0, 1, 0};
  const std::vector<double> loss{1.0, 2.0, 3.0};
  ledger.record_epoch(preds, loss, labels, 0.7);
  ledger.record_epoch(preds, loss, labels, 0.7);
  // second epoch doubles every wrong count, min-max normalization cancels it
  const auto rows = ledger.change_rate_stats();
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].we_max == doctest::Approx(0.0));
  CHECK(rows[0].loss_max == doctest::Approx(0.0));

  DynamicsLedger no_history(3, 2, false);
  no_history.record_epoch(preds, loss, labels, 0.7);
  no_history.record_epoch(preds, loss, labels, 0.7);
  CHECK_THROWS_AS(no_history.change_rate_stats(), state_error);
}

TEST_CASE("first local minimum of the label wave") {
  const std::vector<int> a{10, 7, 9, 4, 8};
  REQUIRE(first_local_min_epoch(a).has_value());
  CHECK(*first_local_min_epoch(a) == 1);

  const std::vector<int> decreasing{9, 8, 7, 6};
  CHECK_FALSE(first_local_min_epoch(decreasing).has_value());

  // plateau is not a strict minimum; the 4 at index 2 is
  const std::vector<int> plateau{5, 5, 4, 6};
  REQUIRE(first_local_min_epoch(plateau).has_value());
  CHECK(*first_local_min_epoch(plateau) == 2);

  CHECK_FALSE(first_local_min_epoch(std::vector<int>{1, 2}).has_value());
}

TEST_CASE("property: wrong-event laws over random prediction streams") {
  Rng rng(99);
  const size_t n = 40;
  const int T = 25;
  const int k = 4;
  std::vector<int> labels(n);
  for (auto& l : labels) l = static_cast<int>(rng.below(k));

  DynamicsLedger ledger(n, 2, true);
  std::vector<int> preds(n);
  std::vector<double> losses(n);
  for (int e = 0; e < T; ++e) {
    for (size_t i = 0; i < n; ++i) {
      preds[i] = static_cast<int>(rng.below(k));
      losses[i] = rng.uniform() * 3.0;
    }
    ledger.record_epoch(preds, losses, labels, 0.7);
  }

  const auto& hist = ledger.history();
  REQUIRE(hist.size() == static_cast<size_t>(T));
  for (size_t i = 0; i < n; ++i) {
    CHECK(ledger.wrong_events()[i] <= T);
    CHECK(ledger.forgetting()[i] <= ledger.wrong_events()[i]);
    for (int t = 1; t < T; ++t) {
      const int delta = hist[t].wrong[i] - hist[t - 1].wrong[i];
      CHECK(delta >= 0);
      CHECK(delta <= 1);
      if (hist[t - 1].wrong[i] >= 1) {
        const double rel = static_cast<double>(delta) / hist[t - 1].wrong[i];
        CHECK(rel >= 0.0);
        CHECK(rel <= 1.0);
      }
    }
  }
  const auto flags = ledger.fluctuation_flags();
  for (size_t i = 0; i < n; ++i) CHECK((flags[i] != 0) == (ledger.forgetting()[i] >= 1));
}

TEST_CASE("property: replaying an identical stream yields an identical ledger") {
  Rng rng(123);
  const size_t n = 8;
  const int T = 12;
  std::vector<int> labels(n, 1);
  std::vector<std::vector<int>> stream(T, std::vector<int>(n));
  for (auto& e : stream)
    for (auto& p : e) p = static_cast<int>(rng.below(3));

  const auto a = replay(stream, labels, 3, true);
  const auto b = replay(stream, labels, 3, true);
  CHECK(a.wrong_events() == b.wrong_events());
  CHECK(a.forgetting() == b.forgetting());
  CHECK(a.label_wave() == b.label_wave());
  CHECK(a.fkl_scores() == b.fkl_scores());
  CHECK(a.ema_loss() == b.ema_loss());
}

TEST_CASE("ledger csv export") {
  const auto dir = std::filesystem::temp_directory_path() / "ido_dynamics_test";
  std::filesystem::create_directories(dir);
  const auto path = (dir / "ledger.csv").string();

  auto ledger = replay({{0, 1}, {1, 1}}, {0, 1});
  const std::vector<char> mask{0, 1};
  ledger.export_csv(path, &mask);

  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  CHECK(header == "idx,wrong_events,forgetting,fkl,ema_loss,single_loss,is_noisy(oracle)");
  size_t rows = 0;
  std::string line;
  while (std::getline(in, line)) rows += !line.empty();
  CHECK(rows == 2);
  std::filesystem::remove_all(dir);
}
