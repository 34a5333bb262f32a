#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <array>
#include <cmath>
#include <vector>

#include "fisor/critics.hpp"
#include "fisor/dataset.hpp"
#include "fisor/errors.hpp"
#include "fisor/expectile.hpp"

using namespace fisor;

namespace {

// ---------------------------------------------------------------------------
// Tabular oracle: 5-state deterministic chain, two actions (left / right),
// worst-violation backup Q(s,a) = (1-g) h(s) + g max{h(s), min_a' Q(s',a')}.
// ---------------------------------------------------------------------------

constexpr int kStates = 5;
constexpr int kActions = 2;
const std::array<double, kStates> kH{-1.0, -1.0, 2.0, -1.0, -1.0};
constexpr double kGamma = 0.99;

int chain_next(int s, int a) { return a == 0 ? std::max(s - 1, 0) : std::min(s + 1, kStates - 1); }

using QTable = std::array<std::array<double, kActions>, kStates>;

double vmin(const QTable& q, int s) { return std::min(q[s][0], q[s][1]); }

QTable apply_operator(const QTable& q) {
  QTable out;
  for (int s = 0; s < kStates; ++s)
    for (int a = 0; a < kActions; ++a) {
      const int sn = chain_next(s, a);
      out[s][a] = (1.0 - kGamma) * kH[s] + kGamma * std::max(kH[s], vmin(q, sn));
    }
  return out;
}

double sup_dist(const QTable& a, const QTable& b) {
  double d = 0.0;
  for (int s = 0; s < kStates; ++s)
    for (int k = 0; k < kActions; ++k) d = std::max(d, std::fabs(a[s][k] - b[s][k]));
  return d;
}

QTable iterate_to_fixpoint(QTable q, int iters = 5000) {
  for (int i = 0; i < iters; ++i) q = apply_operator(q);
  return q;
}

// Policy evaluation for a fixed deterministic policy: the same backup with
// the successor action pinned to pi(s').
QTable evaluate_policy(const std::array<int, kStates>& pi, int iters = 5000) {
  QTable q{};
  for (int i = 0; i < iters; ++i) {
    QTable next;
    for (int s = 0; s < kStates; ++s)
      for (int a = 0; a < kActions; ++a) {
        const int sn = chain_next(s, a);
        next[s][a] = (1.0 - kGamma) * kH[s] + kGamma * std::max(kH[s], q[sn][pi[sn]]);
      }
    q = next;
  }
  return q;
}

// Scalar expectile fit by iterating the weighted-mean fixed point of the
// asymmetric squared loss.
double fit_scalar_expectile(const std::vector<double>& samples, double tau, bool reversed) {
  double v = 0.0;
  for (double s : samples) v += s;
  v /= static_cast<double>(samples.size());
  for (int iter = 0; iter < 500; ++iter) {
    double num = 0.0, den = 0.0;
    for (double s : samples) {
      const double u = s - v;
      const double w = reversed ? reversed_expectile_weight(u, tau) : expectile_weight(u, tau);
      num += w * s;
      den += w;
    }
    const double next = num / den;
    if (std::fabs(next - v) < 1e-14) return next;
    v = next;
  }
  return v;
}

// Independent minimizer: two-stage grid search over the written-out loss.
double grid_search_expectile(const std::vector<double>& samples, double tau, bool reversed) {
  auto objective = [&](double v) {
    double total = 0.0;
    for (double s : samples) {
      const double u = s - v;
      const double ind = reversed ? (u > 0.0 ? 1.0 : 0.0) : (u < 0.0 ? 1.0 : 0.0);
      total += std::fabs(tau - ind) * u * u;
    }
    return total;
  };
  double lo = *std::min_element(samples.begin(), samples.end()) - 1.0;
  double hi = *std::max_element(samples.begin(), samples.end()) + 1.0;
  double best = lo;
  for (int stage = 0; stage < 2; ++stage) {
    const int n = 20000;
    double best_obj = std::numeric_limits<double>::infinity();
    for (int i = 0; i <= n; ++i) {
      const double v = lo + (hi - lo) * i / n;
      const double o = objective(v);
      if (o < best_obj) {
        best_obj = o;
        best = v;
      }
    }
    const double cell = (hi - lo) / n;
    lo = best - 2.0 * cell;
    hi = best + 2.0 * cell;
  }
  return best;
}

Dataset tiny_bandit_dataset() {
  Dataset ds;
  ds.obs_dim = 5;
  ds.act_dim = 2;
  for (int arm = 0; arm < 2; ++arm) {
    Transition t;
    t.s = {0.0, 0.0, 0.0, 0.0, 0.0};
    t.a = {arm == 0 ? -0.5 : 0.5, 0.0};
    t.s_next = t.s;
    t.r = arm == 0 ? 0.0 : 1.0;
    t.c = 0.0;
    t.h = -1.0;
    t.done = true;
    ds.append(t);
  }
  return ds;
}

}  // namespace

TEST_CASE("expectile losses at the printed values") {
  CHECK(reversed_expectile_loss(-1.0, 0.9) == doctest::Approx(0.9));
  CHECK(reversed_expectile_loss(1.0, 0.9) == doctest::Approx(0.1));
  CHECK(reversed_expectile_loss(0.0, 0.9) == 0.0);

  CHECK(expectile_loss(1.0, 0.9) == doctest::Approx(0.9));
  CHECK(expectile_loss(-1.0, 0.9) == doctest::Approx(0.1));
  CHECK(expectile_loss(0.0, 0.9) == 0.0);
}

TEST_CASE("feasible backup arithmetic at the fixed points") {
  const double gamma = 0.99;
  // h == -1 everywhere and V == -1: the backup reproduces -1.
  CHECK((1.0 - gamma) * -1.0 + gamma * std::max(-1.0, -1.0) == doctest::Approx(-1.0));
  // Unsafe state h = 25 with V(s') = -1: the max keeps the violation.
  CHECK((1.0 - gamma) * 25.0 + gamma * std::max(25.0, -1.0) == doctest::Approx(25.0));
}

TEST_CASE("cost backup single-state loop reaches the geometric-series value") {
  double q = 0.0;
  for (int i = 0; i < 5000; ++i) q = 1.0 + 0.99 * q;
  CHECK(q == doctest::Approx(100.0).epsilon(1e-9));
}

TEST_CASE("tabular chain: contraction and unique fixed point") {
  QTable zeros{};
  QTable offset{};
  for (int s = 0; s < kStates; ++s)
    for (int a = 0; a < kActions; ++a) offset[s][a] = 7.5 - s + a;

  // Per-iteration sup-norm distance contracts by at least gamma.
  QTable qa = zeros, qb = offset;
  double prev = sup_dist(qa, qb);
  for (int i = 0; i < 50; ++i) {
    qa = apply_operator(qa);
    qb = apply_operator(qb);
    const double d = sup_dist(qa, qb);
    CHECK(d <= kGamma * prev + 1e-12);
    prev = d;
  }

  const QTable fa = iterate_to_fixpoint(zeros);
  const QTable fb = iterate_to_fixpoint(offset);
  CHECK(sup_dist(fa, fb) < 1e-8);
}

TEST_CASE("tabular chain: fixed point equals brute-force policy enumeration") {
  const QTable vi = iterate_to_fixpoint(QTable{});

  QTable brute;
  for (int s = 0; s < kStates; ++s)
    for (int a = 0; a < kActions; ++a) brute[s][a] = std::numeric_limits<double>::infinity();
  for (int mask = 0; mask < (1 << kStates); ++mask) {
    std::array<int, kStates> pi{};
    for (int s = 0; s < kStates; ++s) pi[s] = (mask >> s) & 1;
    const QTable qpi = evaluate_policy(pi);
    for (int s = 0; s < kStates; ++s)
      for (int a = 0; a < kActions; ++a) brute[s][a] = std::min(brute[s][a], qpi[s][a]);
  }
  CHECK(sup_dist(vi, brute) < 1e-6);

  // V*(s) >= h(s): the trajectory maximum includes the start state.
  for (int s = 0; s < kStates; ++s) CHECK(vmin(vi, s) >= kH[s] - 1e-9);
}

TEST_CASE("scalar expectile fits match grid search for both loss forms") {
  RngStream rng(41);
  std::vector<double> samples(64);
  for (auto& s : samples) s = rng.uniform(-2.0, 3.0);
  for (double tau : {0.7, 0.9}) {
    for (bool reversed : {false, true}) {
      const double fit = fit_scalar_expectile(samples, tau, reversed);
      const double oracle = grid_search_expectile(samples, tau, reversed);
      CHECK(std::fabs(fit - oracle) < 1e-3);
    }
  }
}

TEST_CASE("reversed tau=0.9 fit sits below the symmetric fit") {
  RngStream rng(43);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<double> samples(32);
    for (auto& s : samples) s = rng.uniform(-1.0, 1.0) + rng.normal();
    const double low = fit_scalar_expectile(samples, 0.9, true);
    const double mid = fit_scalar_expectile(samples, 0.5, true);  // symmetric at 0.5
    CHECK(low <= mid + 1e-9);
  }
}

TEST_CASE("hyperparameter invariants are enforced") {
  CriticHyper hyper;
  hyper.tau = 0.5;
  CHECK_THROWS_AS(hyper.validate(), ConfigError);
  hyper = CriticHyper{};
  hyper.gamma = 1.0;
  CHECK_THROWS_AS(hyper.validate(), ConfigError);
}

TEST_CASE("advantages: pair reduction then subtraction") {
  RngStream rng(1);
  CriticBank bank;
  bank.obs_dim = 5;
  bank.act_dim = 2;

  auto const_net = [&](int in, double value) {
    Mlp net = Mlp::init({in, 1}, rng);
    for (auto& w : net.weights[0]) w = 0.0;
    net.biases[0][0] = value;
    return net;
  };
  bank.vr.v = const_net(5, 0.5);
  bank.qr.q1 = const_net(7, 1.0);
  bank.qr.q2 = const_net(7, 0.8);
  bank.vh.v = const_net(5, -0.3);
  bank.qh.q1 = const_net(7, -0.2);
  bank.qh.q2 = const_net(7, 0.1);

  const std::vector<double> obs(5, 0.0), act(2, 0.0);
  const auto adv = bank.advantages(obs.data(), act.data());
  CHECK(adv.a_r == doctest::Approx(0.3));   // min(1.0, 0.8) - 0.5
  CHECK(adv.a_h == doctest::Approx(0.4));   // max(-0.2, 0.1) - (-0.3)

  bank.qr.q1 = const_net(7, 0.5);
  bank.qr.q2 = const_net(7, 0.5);
  const auto adv0 = bank.advantages(obs.data(), act.data());
  CHECK(adv0.a_r == doctest::Approx(0.0));
}

TEST_CASE("reward critics on a two-armed bandit match the expectile oracle") {
  const Dataset ds = tiny_bandit_dataset();
  CriticHyper hyper;
  hyper.batch = 32;
  hyper.lr = 1e-3;
  hyper.log_every = 100000;
  RngStream init_rng(7);
  CriticBank bank = CriticBank::init(5, 2, {32, 32}, hyper, init_rng, false);
  RngStream train_rng(9);
  train_reward_values(bank, ds, 6000, train_rng);

  const std::vector<double> obs(5, 0.0);
  const std::vector<double> arm0{-0.5, 0.0}, arm1{0.5, 0.0};
  CHECK(bank.q_r(obs.data(), arm0.data()) == doctest::Approx(0.0).epsilon(0.08));
  CHECK(bank.q_r(obs.data(), arm1.data()) == doctest::Approx(1.0).epsilon(0.08));

  const double oracle = grid_search_expectile({0.0, 1.0}, hyper.tau, false);
  CHECK(oracle == doctest::Approx(0.9).epsilon(1e-3));  // closed form for (0,1) arms
  CHECK(std::fabs(bank.v_r(obs.data()) - oracle) < 0.05);
}

TEST_CASE("zero-reward dataset keeps reward values at the zero fixed point") {
  Dataset ds = generate([] { EnvConfig c; return c; }(), 1500, 500, 21);
  for (auto& r : ds.rew) r = 0.0;
  CriticHyper hyper;
  hyper.batch = 64;
  hyper.log_every = 100000;
  RngStream init_rng(3);
  CriticBank bank = CriticBank::init(5, 2, {32, 32}, hyper, init_rng, false);
  RngStream train_rng(5);
  train_reward_values(bank, ds, 2000, train_rng);
  double acc = 0.0;
  for (std::size_t i = 0; i < 200; ++i) acc += std::fabs(bank.v_r(ds.obs.data() + i * 5));
  CHECK(acc / 200.0 < 0.05);
}

TEST_CASE("feasible training separates hazard interiors from parked-safe states") {
  EnvConfig cfg;
  Dataset ds = generate(cfg, 8000, 8000, 31);
  const DatasetStats stats = compute_stats(ds);
  const Dataset norm = normalized_copy(ds, stats);

  CriticHyper hyper;
  hyper.batch = 128;
  hyper.soft_alpha = 0.01;  // fast targets keep this unit-sized
  hyper.log_every = 100000;
  RngStream init_rng(11);
  CriticBank bank = CriticBank::init(5, 2, {32, 32}, hyper, init_rng, false);
  RngStream train_rng(13);
  train_feasible_values(bank, norm, 8000, train_rng);

  EnvState inside;
  inside.x = cfg.hazard_centers[0].x;
  inside.y = cfg.hazard_centers[0].y;
  inside.v = 1.0;
  const auto obs_in = normalize(observe(inside), stats);

  EnvState parked;
  parked.x = -2.5;
  parked.y = 2.5;
  parked.v = 0.0;
  REQUIRE(oracle_feasible(parked, cfg));
  const auto obs_safe = normalize(observe(parked), stats);

  CHECK(bank.v_h(obs_in.data()) > 0.0);
  CHECK(bank.v_h(obs_safe.data()) <= 0.0);
}

TEST_CASE("training is deterministic given seeds") {
  const Dataset ds = generate([] { EnvConfig c; return c; }(), 1000, 1000, 51);
  CriticHyper hyper;
  hyper.batch = 64;
  hyper.log_every = 100000;

  auto run = [&]() {
    RngStream init_rng(77);
    CriticBank bank = CriticBank::init(5, 2, {16, 16}, hyper, init_rng, true);
    RngStream r1(88);
    train_feasible_values(bank, ds, 300, r1);
    RngStream r2(89);
    train_reward_values(bank, ds, 300, r2);
    RngStream r3(90);
    train_cost_values(bank, ds, 300, r3);
    return bank.checksum();
  };
  CHECK(run() == run());
}

TEST_CASE("all-safe dataset keeps cost values at the zero fixed point") {
  Dataset ds = generate([] { EnvConfig c; return c; }(), 1500, 0, 61, 0.0, 0.0);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    ds.cost[i] = 0.0;
    ds.hval[i] = -1.0;
    ds.h_next[i] = -1.0;
  }
  CriticHyper hyper;
  hyper.batch = 64;
  hyper.log_every = 100000;
  RngStream init_rng(13);
  CriticBank bank = CriticBank::init(5, 2, {32, 32}, hyper, init_rng, true);
  RngStream train_rng(15);
  train_cost_values(bank, ds, 6000, train_rng);
  // The fixed point is exactly 0; the max-pair target bias decays with the
  // soft target updates, so a short run only gets near it.
  double acc = 0.0;
  for (std::size_t i = 0; i < 200; ++i) acc += std::fabs(bank.v_c(ds.obs.data() + i * 5));
  CHECK(acc / 200.0 < 0.1);
}

TEST_CASE("cost critics require initialization with cost heads") {
  const Dataset ds = tiny_bandit_dataset();
  CriticHyper hyper;
  RngStream rng(1);
  CriticBank bank = CriticBank::init(5, 2, {8}, hyper, rng, false);
  RngStream train_rng(2);
  CHECK_THROWS_AS(train_cost_values(bank, ds, 10, train_rng), ConfigError);
}
