#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "gradcheck.hpp"
#include "moece/error.hpp"
#include "moece/models/resnet.hpp"
#include "moece/moe/moe_model.hpp"
#include "moece/moe/routing.hpp"
#include "oracles.hpp"

using namespace moece;
using namespace moece::moe;
using numerics::Tensor;

namespace {

// Indices sorted by value descending, equal values by index ascending.
std::vector<std::size_t> ranked(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] > v[b]; });
  return idx;
}

std::vector<double> random_simplex(std::size_t r, std::mt19937_64& rng) {
  std::exponential_distribution<double> e;
  std::vector<double> w(r);
  double s = 0.0;
  for (auto& x : w) s += (x = e(rng));
  for (auto& x : w) x /= s;
  return w;
}

MoEConfig small_config(std::size_t r, std::size_t k) {
  MoEConfig c;
  c.expert = {2, 4, 2};
  c.n_experts = r;
  c.k = k;
  c.thresholds = BalancerThresholds::defaults_for(r);
  return c;
}

Tensor run(MoEModel& m, const Tensor& x, bool bias = true, ForwardCounters* counters = nullptr) {
  Tape t;
  return t.value(moe_forward(t, m, t.constant(x), bias, counters).y);
}

UsageStats stats_from(std::vector<std::size_t> counts, std::size_t window, std::size_t k = 1) {
  UsageStats s(counts.size(), k);
  s.counts = std::move(counts);
  s.window = window;
  return s;
}

}  // namespace

TEST_CASE("select_topk examples") {
  const std::vector<double> w{0.4, 0.3, 0.2, 0.1}, zero(4, 0.0);
  auto d = select_topk(w, zero, 2);
  CHECK(d.selected == std::vector<std::size_t>{0, 1});
  CHECK(d.w_prime[0] == doctest::Approx(0.4 / 0.7).epsilon(1e-15));
  CHECK(d.w_prime[1] == doctest::Approx(0.3 / 0.7).epsilon(1e-15));

  d = select_topk(w, std::vector<double>{-0.5, 0.0, 0.0, 0.5}, 1);
  CHECK(d.selected == std::vector<std::size_t>{3});
  CHECK(d.w_prime == std::vector<double>{1.0});

  d = select_topk(std::vector<double>(4, 0.25), zero, 2);
  CHECK(d.selected == std::vector<std::size_t>{0, 1});

  CHECK_THROWS_AS(select_topk(w, zero, 5), ConfigError);
  CHECK_THROWS_AS(select_topk(w, zero, 0), ConfigError);
}

TEST_CASE("select_topk property suite") {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<std::size_t> pick_r(2, 8);
  std::normal_distribution<double> n01;
  for (int trial = 0; trial < 10000; ++trial) {
    const std::size_t r = pick_r(rng);
    const std::size_t k = std::uniform_int_distribution<std::size_t>(1, r)(rng);
    const auto w = random_simplex(r, rng);
    std::vector<double> u(r);
    // Quantized biases make exact ties common.
    for (auto& x : u) x = trial % 3 == 0 ? std::round(n01(rng) * 4.0) / 4.0 : 0.1 * n01(rng);
    const auto d = select_topk(w, u, k);

    std::vector<double> biased(r);
    for (std::size_t i = 0; i < r; ++i) biased[i] = w[i] + u[i];
    auto expect = ranked(biased);
    expect.resize(k);
    REQUIRE(d.selected == expect);

    double sum = 0.0, raw = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      CHECK(d.w_prime[j] >= 0.0);
      sum += d.w_prime[j];
      raw += w[d.selected[j]];
    }
    CHECK(std::abs(sum - 1.0) < 1e-12);
    for (std::size_t j = 0; j < k; ++j) CHECK(std::abs(d.w_prime[j] - w[d.selected[j]] / raw) < 1e-12);
  }
}

TEST_CASE("routing is invariant to a common logit shift") {
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<int> eighths(-24, 24);
  for (int trial = 0; trial < 100; ++trial) {
    Tensor logits({5});
    for (auto& v : logits.data()) v = eighths(rng) / 8.0;
    Tensor shifted = logits;
    for (auto& v : shifted.data()) v += 5.0;
    Tape t;
    const Tensor a = t.value(t.softmax(t.constant(logits)));
    const Tensor b = t.value(t.softmax(t.constant(shifted)));
    const std::vector<double> wa(a.data().begin(), a.data().end()), wb(b.data().begin(), b.data().end());
    const std::vector<double> u{0.01, 0.0, -0.02, 0.0, 0.005};
    const auto da = select_topk(wa, u, 2), db = select_topk(wb, u, 2);
    CHECK(da.w == db.w);
    CHECK(da.w_biased == db.w_biased);
    CHECK(da.selected == db.selected);
    CHECK(da.w_prime == db.w_prime);
  }
}

TEST_CASE("combine") {
  std::mt19937_64 rng(3);
  const auto p0 = Tensor::randn({2, 3, 2}, rng), p1 = Tensor::randn({2, 3, 2}, rng);
  Tape t;
  const numerics::Var one[] = {t.constant(p0)};
  CHECK(t.value(t.weighted_sum(one, t.constant(Tensor({1}, {1.0})))) == p0);

  const numerics::Var same[] = {t.constant(p0), t.constant(p0)};
  CHECK(oracle::max_abs_diff(t.value(t.weighted_sum(same, t.constant(Tensor({2}, {0.37, 0.63})))), p0) < 1e-15);

  const numerics::Var two[] = {t.constant(p0), t.constant(p1)};
  const Tensor y = t.value(t.weighted_sum(two, t.constant(Tensor({2}, {0.3, 0.7}))));
  for (std::size_t i = 0; i < y.size(); ++i) CHECK(y[i] == doctest::Approx(0.3 * p0[i] + 0.7 * p1[i]).epsilon(1e-15));

  CHECK_THROWS_AS(t.weighted_sum(two, t.constant(Tensor({3}, 1.0 / 3))), ShapeError);
}

TEST_CASE("moe_forward: k = r reduces to full routing") {
  std::mt19937_64 rng(4);
  auto m = MoEModel::init(small_config(4, 4), rng);
  const auto x = Tensor::randn({4, 12, 2}, rng);

  Tape t;
  const auto xv = t.constant(x);
  const Tensor w = t.value(models::router_forward(t, m.router, m.config.router_spec(), xv));
  Tensor full({4, 12, 2});
  for (std::size_t e = 0; e < 4; ++e) {
    const Tensor fe = t.value(models::resnet_forward(t, m.experts[e], m.config.expert, xv));
    for (std::size_t i = 0; i < full.size(); ++i) full[i] += w[e] * fe[i];
  }
  CHECK(oracle::max_abs_diff(run(m, x), full) < 1e-10);
}

TEST_CASE("moe_forward: identical experts give the single expert output") {
  std::mt19937_64 rng(5);
  auto m = MoEModel::init(small_config(4, 2), rng);
  for (auto& e : m.experts) e = m.experts[0];
  m.bias = {0.3, -0.2, 0.1, 0.05};
  const auto x = Tensor::randn({4, 6, 2}, rng);
  Tape t;
  const Tensor single = t.value(models::resnet_forward(t, m.experts[0], m.config.expert, t.constant(x)));
  CHECK(oracle::max_abs_diff(run(m, x), single) < 1e-10);
}

TEST_CASE("moe_forward evaluates exactly k experts") {
  std::mt19937_64 rng(6);
  for (std::size_t k : {1u, 2u, 3u}) {
    auto m = MoEModel::init(small_config(4, k), rng);
    ForwardCounters c;
    for (int i = 0; i < 5; ++i) run(m, Tensor::randn({4, 6, 2}, rng), true, &c);
    CHECK(c.routed_inputs == 5);
    CHECK(c.expert_calls == 5 * k);
  }
}

TEST_CASE("moe gradients: selected experts match finite differences, unselected are zero") {
  std::mt19937_64 rng(7);
  auto m = MoEModel::init(small_config(4, 2), rng);
  m.bias = {0.0, 0.2, -0.1, 0.0};
  const auto x = Tensor::randn({3, 6, 2}, rng);
  const auto target = Tensor::randn({3, 6, 2}, rng);

  for (auto& e : m.experts) models::clear_grads(e);
  models::clear_grads(m.router);
  Tape t;
  const auto out = moe_forward(t, m, t.constant(x));
  t.backward(t.nmse(out.y, target));
  const auto selected = out.decision.selected;
  REQUIRE(selected.size() == 2);

  for (std::size_t e = 0; e < 4; ++e) {
    const bool used = std::find(selected.begin(), selected.end(), e) != selected.end();
    if (used) continue;
    for (const auto& [name, p] : m.experts[e])
      for (double g : p.grad()) CHECK(g == 0.0);
  }

  auto loss = [&](Tape& tape) { return tape.nmse(moe_forward(tape, m, tape.constant(x)).y, target); };
  for (std::size_t e : selected) CHECK(gradcheck::worst_param_error(m.experts[e], loss) < 1e-5);
  CHECK(gradcheck::worst_param_error(m.router, loss) < 1e-5);

  // Finite differences on an unselected expert are exactly zero as well.
  const std::size_t idle = [&] {
    for (std::size_t e = 0; e < 4; ++e)
      if (std::find(selected.begin(), selected.end(), e) == selected.end()) return e;
    return std::size_t{0};
  }();
  auto& p = m.experts[idle].at("stem.kernel");
  const double keep = p[0];
  Tape a, b;
  p[0] = keep + 1e-3;
  const double up = a.value(loss(a))[0];
  p[0] = keep - 1e-3;
  const double down = b.value(loss(b))[0];
  p[0] = keep;
  CHECK(up == down);
}

TEST_CASE("top-1 routing gives the router no gradient") {
  std::mt19937_64 rng(8);
  auto m = MoEModel::init(small_config(4, 1), rng);
  models::clear_grads(m.router);
  const auto x = Tensor::randn({3, 6, 2}, rng);
  Tape t;
  t.backward(t.nmse(moe_forward(t, m, t.constant(x)).y, Tensor::randn({3, 6, 2}, rng)));
  for (const auto& [name, p] : m.router)
    for (double g : p.grad()) CHECK(g == 0.0);
}

TEST_CASE("usage frequencies") {
  UsageStats s(4, 2);
  const std::size_t a[] = {0, 1}, b[] = {0, 3};
  s.record(a);
  s.record(b);
  CHECK(s.window == 2);
  CHECK(std::accumulate(s.counts.begin(), s.counts.end(), std::size_t{0}) == 2 * s.window);
  CHECK(s.frequencies() == std::vector<double>{0.5, 0.25, 0.0, 0.25});
}

TEST_CASE("update_bias threshold rule") {
  const auto th = BalancerThresholds::defaults_for(4);
  CHECK(th.tau1 == 0.5);
  CHECK(th.tau2 == doctest::Approx(0.2).epsilon(1e-15));
  CHECK(th.gamma == 0.001);

  const std::vector<double> u{0.0, 0.1, -0.1, 0.0};
  const auto v = update_bias(u, stats_from({7, 1, 1, 1}, 10), th);
  const std::vector<double> delta{-0.001, 0.001, 0.001, 0.001};
  for (std::size_t i = 0; i < 4; ++i) CHECK(v[i] == doctest::Approx(u[i] + delta[i]).epsilon(1e-15));

  CHECK(update_bias(u, stats_from({1, 1, 1, 1}, 4), th) == u);
  CHECK_THROWS_AS(update_bias(u, stats_from({0, 0, 0, 0}, 0), th), UsageError);
  CHECK_THROWS_AS((BalancerThresholds{0.2, 0.3, 0.001}.validate(4)), ConfigError);
}

TEST_CASE("update_bias pulls traffic away from a degenerate router") {
  const std::vector<double> w{0.4, 0.2, 0.2, 0.2};
  const auto th = BalancerThresholds::defaults_for(4);
  std::vector<double> u(4, 0.0);
  double last = 0.0;
  int steps = 0;
  for (; steps < 1000; ++steps) {
    const auto d = select_topk(w, u, 1);
    if (d.selected[0] != 0) break;
    UsageStats s(4, 1);
    for (int i = 0; i < 8; ++i) s.record(d.selected);
    u = update_bias(u, s, th);
    CHECK(u[0] < last);
    last = u[0];
  }
  // w0 + u0 < w1 + u1 needs 0.2 < 2 * steps * gamma.
  CHECK(steps >= 100);
  CHECK(steps <= 101);
}

TEST_CASE("switch loss matches direct summation") {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t r = 2 + trial % 5, t = 1 + trial % 9;
    std::vector<std::vector<double>> batch;
    for (std::size_t i = 0; i < t; ++i) batch.push_back(random_simplex(r, rng));
    const double alpha = 0.01 * (1 + trial % 7);
    const auto got = switch_aux_loss(batch, alpha, static_cast<double>(r));
    CHECK(std::abs(got.value - oracle::switch_loss_bruteforce(batch, alpha, static_cast<double>(r))) < 1e-12);

    // Gradient w.r.t. w_i(x) is the per-expert coefficient.
    for (std::size_t i = 0; i < r; ++i) {
      auto bumped = batch;
      bumped[0][i] += 1e-6;
      const double fd = (oracle::switch_loss_bruteforce(bumped, alpha, static_cast<double>(r)) -
                         oracle::switch_loss_bruteforce(batch, alpha, static_cast<double>(r))) /
                        1e-6;
      if (ranked(bumped[0])[0] == ranked(batch[0])[0]) CHECK(got.coeff[i] == doctest::Approx(fd).epsilon(1e-6));
    }
  }
  const std::vector<std::vector<double>> none;
  CHECK_THROWS_AS(switch_aux_loss(none, 1.0, 4.0), UsageError);
}

TEST_CASE("switch loss special values") {
  // Uniform hard routing with uniform weights, r = 4, T = 8.
  std::vector<std::vector<double>> uniform(8, std::vector<double>(4, 0.25));
  CHECK(switch_aux_loss(uniform, 1.0, 4.0).value == doctest::Approx(oracle::switch_loss_bruteforce(uniform, 1.0, 4.0)));
  std::vector<std::vector<double>> balanced;
  for (std::size_t i = 0; i < 8; ++i) {
    std::vector<double> w(4, 0.0);
    w[i % 4] = 1.0;
    balanced.push_back(w);
  }
  CHECK(switch_aux_loss(balanced, 1.0, 4.0).value == doctest::Approx(1.0).epsilon(1e-15));

  std::vector<std::vector<double>> collapsed(8, std::vector<double>{1.0, 0.0, 0.0, 0.0});
  CHECK(switch_aux_loss(collapsed, 0.3, 4.0).value == doctest::Approx(0.3 * 4.0).epsilon(1e-15));
}

TEST_CASE("switch loss is minimized by uniform routing over 3 experts and 6 inputs") {
  constexpr int n = 6;
  const double alpha = 1.0, big_n = 3.0;
  // Soft routings sharing one weight vector, on a simplex grid of step 1/6.
  double best = 1e300;
  std::vector<double> argbest;
  for (int a = 0; a <= n; ++a)
    for (int b = 0; a + b <= n; ++b) {
      const std::vector<double> w{a / 6.0, b / 6.0, (n - a - b) / 6.0};
      const double v = switch_aux_loss(std::vector<std::vector<double>>(6, w), alpha, big_n).value;
      if (v < best - 1e-12) {
        best = v;
        argbest = w;
      }
    }
  CHECK(best == doctest::Approx(alpha).epsilon(1e-12));
  for (double x : argbest) CHECK(x == doctest::Approx(1.0 / 3.0));

  // Every hard assignment of 6 inputs: the minimum is reached exactly at
  // balanced counts.
  double hard_best = 1e300;
  for (int code = 0; code < 729; ++code) {
    std::vector<std::vector<double>> batch;
    int counts[3] = {0, 0, 0};
    for (int i = 0, c = code; i < 6; ++i, c /= 3) {
      std::vector<double> w(3, 0.0);
      w[c % 3] = 1.0;
      ++counts[c % 3];
      batch.push_back(w);
    }
    const double v = switch_aux_loss(batch, alpha, big_n).value;
    hard_best = std::min(hard_best, v);
    const bool balanced = counts[0] == 2 && counts[1] == 2 && counts[2] == 2;
    if (balanced)
      CHECK(v == doctest::Approx(alpha).epsilon(1e-12));
    else
      CHECK(v > alpha + 1e-9);
  }
  CHECK(hard_best == doctest::Approx(alpha).epsilon(1e-12));
}

TEST_CASE("switch loss: split soft weights undercut the uniform value") {
  // Soft weights that straddle the argmax let the loss drop below alpha;
  // the uniform optimum holds only within the families above.
  std::vector<std::vector<double>> batch(3, std::vector<double>{0.0, 0.5, 0.5});
  for (int i = 0; i < 3; ++i) batch.push_back({0.5, 0.0, 0.5});
  CHECK(switch_aux_loss(batch, 1.0, 3.0).value == doctest::Approx(0.75).epsilon(1e-12));
}
