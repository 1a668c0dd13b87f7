#include <stdexcept>
#include <vector>
#include <utility>
#include <cmath>

#include "doctest.h"
#include "hatsim/monitor.hpp"
#include "hatsim/rng.hpp"

using namespace hatsim;

TEST_CASE("ema_update arithmetic") {
  CHECK(ema_update(100.0, 200.0, 0.8) == doctest::Approx(120.0));
  CHECK(ema_update(100.0, 200.0, 1.0) == 100.0);
  CHECK(ema_update(100.0, 200.0, 0.0) == 200.0);
  CHECK_THROWS_AS(ema_update(1.0, 2.0, 1.5), std::invalid_argument);
  CHECK_THROWS_AS(ema_update(1.0, 2.0, -0.1), std::invalid_argument);
}

TEST_CASE("ema stays inside the prev/obs interval") {
  Rng rng(5);
  for (int i = 0; i < 500; ++i) {
    double prev = rng.uniform(-10.0, 10.0);
    double obs = rng.uniform(-10.0, 10.0);
    double alpha = rng.next_double();
    double out = ema_update(prev, obs, alpha);
    CHECK(out >= std::min(prev, obs) - 1e-12);
    CHECK(out <= std::max(prev, obs) + 1e-12);
  }
}

TEST_CASE("predictor bin initialization and update") {
  DelayPredictor pred;
  pred.bin_width = 16;
  pred.alpha = 0.8;

  // first observation lands in bin 1 (20/16) and initializes it exactly
  pred = predictor_observe(std::move(pred), 20, 0.012);
  CHECK(pred.bins.at(1) == 0.012);

  // second observation EMA-updates: 0.8*0.010 + 0.2*0.012 = 0.0104
  DelayPredictor p2;
  p2.bin_width = 16;
  p2.alpha = 0.8;
  p2 = predictor_observe(std::move(p2), 20, 0.010);
  p2 = predictor_observe(std::move(p2), 20, 0.012);
  CHECK(p2.bins.at(1) == doctest::Approx(0.0104).epsilon(1e-12));
}

TEST_CASE("predictor geometric convergence closed form") {
  for (double alpha : {0.5, 0.8, 0.95}) {
    DelayPredictor pred;
    pred.bin_width = 16;
    pred.alpha = alpha;
    double initial = 0.040;
    double o = 0.010;
    pred = predictor_observe(std::move(pred), 8, initial);
    for (int t = 1; t <= 60; ++t) {
      pred = predictor_observe(std::move(pred), 8, o);
      double residual = std::abs(pred.bins.at(0) - o);
      double expected = std::pow(alpha, t) * std::abs(initial - o);
      CHECK(std::abs(residual - expected) <= 1e-12);
    }
  }
}

TEST_CASE("predictor query fallbacks") {
  DelayPredictor pred;
  pred.bin_width = 16;
  pred.default_delay = 0.5;
  CHECK(pred.query(100) == 0.5);  // nothing observed

  pred = predictor_observe(std::move(pred), 20, 0.012);
  CHECK(pred.query(200) == doctest::Approx(0.012));  // nearest observed bin
  CHECK(pred.query(17) == doctest::Approx(0.012));   // containing bin
  CHECK(pred.query(0) == doctest::Approx(0.012));    // nearest from below

  // lower bin wins a tie: bins 0 and 4 observed, query in bin 2
  DelayPredictor tie;
  tie.bin_width = 16;
  tie = predictor_observe(std::move(tie), 1, 0.001);
  tie = predictor_observe(std::move(tie), 70, 0.009);
  CHECK(tie.query(35) == doctest::Approx(0.001));
}

TEST_CASE("predictor convergence under a stationary workload") {
  DelayPredictor pred;
  pred.bin_width = 16;
  pred.alpha = 0.8;
  double d = 0.030;
  // transient from a different regime first, then stationary
  pred = predictor_observe(std::move(pred), 40, 0.200);
  for (int i = 0; i < 50; ++i) pred = predictor_observe(std::move(pred), 40, d);
  CHECK(std::abs(pred.query(40) - d) / d <= 0.01);
}

TEST_CASE("predictor stays monotone when the true delay model is") {
  Rng rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    double d0 = rng.uniform(0.005, 0.05);
    double slope = rng.uniform(0.0, 3e-4);
    int n_sat = 1 + static_cast<int>(rng.next_below(256));
    auto truth = [&](int n) { return d0 + slope * std::max(0, n - n_sat); };

    DelayPredictor pred;
    pred.bin_width = 16;
    pred.alpha = 0.8;
    for (int pass = 0; pass < 50; ++pass) {
      for (int bin = 0; bin < 24; ++bin) {
        int n = bin * 16 + 1 + static_cast<int>(rng.next_below(16));
        pred = predictor_observe(std::move(pred), n, truth(n));
      }
    }
    double prev = 0.0;
    for (int bin = 0; bin < 24; ++bin) {
      double q = pred.query(bin * 16 + 8);
      CHECK(q >= prev * (1.0 - 0.01));
      prev = std::max(prev, q);
    }
  }
}

TEST_CASE("observation sequences are order-sensitive but deterministic") {
  auto feed = [](const std::vector<std::pair<int, double>>& obs) {
    DelayPredictor pred;
    pred.bin_width = 16;
    pred.alpha = 0.8;
    for (auto [n, d] : obs) pred = predictor_observe(std::move(pred), n, d);
    return pred;
  };
  auto a = feed({{10, 0.01}, {10, 0.02}, {30, 0.05}});
  auto b = feed({{10, 0.01}, {10, 0.02}, {30, 0.05}});
  CHECK(a.bins == b.bins);
  auto c = feed({{10, 0.02}, {10, 0.01}, {30, 0.05}});
  CHECK(a.bins != c.bins);
}

TEST_CASE("predictor_observe rejects bad arguments") {
  DelayPredictor pred;
  CHECK_THROWS_AS(predictor_observe(std::move(pred), 0, 0.01), std::invalid_argument);
  DelayPredictor p2;
  CHECK_THROWS_AS(predictor_observe(std::move(p2), 5, -0.01), std::invalid_argument);
}

TEST_CASE("estimate_observe tracks mu and the latest sample") {
  CloudStateEstimate est;
  est.alpha = 0.8;
  est = estimate_observe(est, 100, 0.01);
  CHECK(est.mu == 100.0);  // first observation initializes
  est = estimate_observe(est, 200, 0.02);
  CHECK(est.mu == doctest::Approx(120.0));
  CHECK(est.last_obs_tokens == 200.0);
  CHECK(est.last_delay == 0.02);
  CHECK_THROWS_AS(estimate_observe(est, 10, 0.0), std::invalid_argument);
}

TEST_CASE("device_observe updates all three fields") {
  DeviceState st{5e-3, 8e6, 12e6};
  st = device_observe(st, 7e-3, 9e6, 10e6, 0.8);
  CHECK(st.gamma == doctest::Approx(5.4e-3));
  CHECK(st.beta_up == doctest::Approx(8.2e6));
  CHECK(st.beta_down == doctest::Approx(11.6e6));

  DeviceState unchanged = device_observe(st, 1e-3, 1e6, 1e6, 1.0);
  CHECK(unchanged.gamma == st.gamma);
  DeviceState snapped = device_observe(st, 1e-3, 1e6, 2e6, 0.0);
  CHECK(snapped.gamma == 1e-3);
  CHECK(snapped.beta_up == 1e6);
  CHECK(snapped.beta_down == 2e6);
  CHECK_THROWS_AS(device_observe(st, 0.0, 1e6, 1e6, 0.8), std::invalid_argument);
}
