#include <algorithm>
#include <cmath>
#include <vector>

#include "dlo/ddpg.hpp"
#include "dlo/errors.hpp"
#include "dlo/rng.hpp"
#include "doctest.h"

using namespace dlo;

namespace {

// state 1-d, action 1-d; q(s,a) = 0.5 s - 0.25 a + 0.1 with hand-set weights,
// target critic q'(s,a) = 0.2 s + 0.3 a - 0.05, target actor a' = tanh(0.4 s + 0.1)
DdpgAgent fixture_agent() {
  DdpgAgent agent{
      mlp_init({1, 1}, Activation::Tanh, 0),     mlp_init({2, 1}, Activation::Identity, 0),
      mlp_init({1, 1}, Activation::Tanh, 0),     mlp_init({2, 1}, Activation::Identity, 0),
      AdamState{},
      AdamState{},
      0.99,
      2,
      0.01,
      OuNoiseProcess(1, 0.15, 0.2, 1.0, 7)};
  agent.actor.weights[0].at(0, 0) = 0.4;
  agent.actor.biases[0] = {0.1};
  agent.actor_target = agent.actor;
  agent.critic.weights[0].at(0, 0) = 0.5;
  agent.critic.weights[0].at(0, 1) = -0.25;
  agent.critic.biases[0] = {0.1};
  agent.critic_target.weights[0].at(0, 0) = 0.2;
  agent.critic_target.weights[0].at(0, 1) = 0.3;
  agent.critic_target.biases[0] = {-0.05};
  agent.actor_opt = make_adam(agent.actor, 1e-4);
  agent.critic_opt = make_adam(agent.critic, 1e-3);
  return agent;
}

std::vector<Transition> fixture_batch() {
  return {
      {{0.5}, {0.2}, {0.8}, 1.0, false},
      {{-0.3}, {-0.6}, {0.1}, -0.5, true},
  };
}

std::vector<Transition> random_batch(Rng& rng, int n, int sdim, int adim) {
  std::vector<Transition> batch(n);
  for (auto& t : batch) {
    t.state.resize(sdim);
    t.next_state.resize(sdim);
    t.action.resize(adim);
    for (double& x : t.state) x = rng.uniform(-1.0, 1.0);
    for (double& x : t.next_state) x = rng.uniform(-1.0, 1.0);
    for (double& x : t.action) x = rng.uniform(-1.0, 1.0);
    t.reward = rng.uniform(-1.0, 0.0);
    t.terminal = rng.below(5) == 0;
  }
  return batch;
}

double grad_max_diff(const GradientSet& a, const GradientSet& b) {
  double worst = 0.0;
  for (std::size_t l = 0; l < a.weights.size(); ++l) {
    for (std::size_t k = 0; k < a.weights[l].data.size(); ++k)
      worst = std::max(worst, std::abs(a.weights[l].data[k] - b.weights[l].data[k]));
    for (std::size_t k = 0; k < a.biases[l].size(); ++k)
      worst = std::max(worst, std::abs(a.biases[l][k] - b.biases[l][k]));
  }
  return worst;
}

}  // namespace

TEST_CASE("replay buffer evicts oldest entries first") {
  ReplayBuffer buf(4, 1);
  for (int i = 0; i < 6; ++i) {
    Transition t;
    t.reward = i;
    buf.store(std::move(t));
  }
  CHECK(buf.size() == 4);
  CHECK(buf.capacity() == 4);
  CHECK(buf.at(0).reward == 2.0);
  CHECK(buf.at(3).reward == 5.0);
  CHECK_THROWS_AS((void)buf.at(4), UsageError);
}

TEST_CASE("replay buffer withholds batches until enough data arrived") {
  ReplayBuffer buf(100, 2);
  for (int i = 0; i < 9; ++i) {
    Transition t;
    t.reward = i;
    buf.store(std::move(t));
  }
  CHECK_FALSE(buf.sample(10).has_value());
  Transition t;
  t.reward = 9;
  buf.store(std::move(t));
  auto batch = buf.sample(10);
  REQUIRE(batch.has_value());
  CHECK(batch->size() == 10);
  // all ten rewards are distinct, so the sample must be too
  std::vector<double> seen;
  for (const auto& tr : *batch) seen.push_back(tr.reward);
  std::sort(seen.begin(), seen.end());
  CHECK(std::adjacent_find(seen.begin(), seen.end()) == seen.end());

  CHECK_THROWS_AS((void)buf.sample(0), UsageError);
}

TEST_CASE("replay sampling visits all slots uniformly") {
  const int capacity = 100;
  ReplayBuffer buf(capacity, 3);
  for (int i = 0; i < capacity; ++i) {
    Transition t;
    t.reward = i;
    buf.store(std::move(t));
  }
  const int draws = 20000;
  std::vector<int> hits(capacity, 0);
  for (int d = 0; d < draws; ++d) {
    auto one = buf.sample(1);
    ++hits[static_cast<int>((*one)[0].reward)];
  }
  // chi-square against uniform: 99 dof, mean 99, sd ~14; 5 sd is generous and
  // the seed is fixed, so this is a deterministic check
  double chi2 = 0.0;
  const double expect = static_cast<double>(draws) / capacity;
  for (int h : hits) chi2 += (h - expect) * (h - expect) / expect;
  CHECK(chi2 > 99.0 - 5.0 * 14.07);
  CHECK(chi2 < 99.0 + 5.0 * 14.07);
  for (int h : hits) CHECK(h > 0);
}

TEST_CASE("ou noise follows its own recurrence exactly") {
  OuNoiseProcess ou(3, 0.15, 0.2, 1.0, 42);
  Rng shadow(42);
  std::vector<double> expect(3, 0.0);
  for (int step = 0; step < 50; ++step) {
    const auto& got = ou.sample();
    for (int i = 0; i < 3; ++i)
      expect[i] += 0.15 * (0.0 - expect[i]) * 1.0 + 0.2 * std::sqrt(1.0) * shadow.gaussian();
    for (int i = 0; i < 3; ++i) CHECK(got[i] == expect[i]);
  }
  ou.reset();
  CHECK(ou.state == std::vector<double>(3, 0.0));
}

TEST_CASE("ou noise reaches its stationary moments") {
  OuNoiseProcess ou(1, 0.15, 0.2, 1.0, 4242);
  const int burn = 1000, n = 40000;
  for (int i = 0; i < burn; ++i) ou.sample();
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = ou.sample()[0];
    sum += x;
    sq += x * x;
  }
  const double mean = sum / n;
  const double var = sq / n - mean * mean;
  // discrete-time stationary variance: sigma^2 dt / (1 - (1 - theta dt)^2)
  const double var_inf = 0.04 / (1.0 - 0.85 * 0.85);
  CHECK(std::abs(mean) < 0.05);
  CHECK(var == doctest::Approx(var_inf).epsilon(0.10));
}

TEST_CASE("make_agent builds the configured architecture") {
  Hyperparams hp;
  DdpgAgent agent = make_agent(30, 3, hp, 11);
  CHECK(agent.state_dim() == 30);
  CHECK(agent.action_dim() == 3);
  CHECK(agent.actor.layer_sizes == std::vector<int>{30, 256, 256, 256, 3});
  CHECK(agent.critic.layer_sizes == std::vector<int>{33, 256, 256, 256, 1});
  CHECK(agent.actor.output_activation == Activation::Tanh);
  CHECK(agent.critic.output_activation == Activation::Identity);
  CHECK(params_hash(agent.actor) == params_hash(agent.actor_target));
  CHECK(params_hash(agent.critic) == params_hash(agent.critic_target));
  CHECK(params_hash(agent.actor) != params_hash(agent.critic));
  CHECK(agent.actor_opt.learning_rate == 1e-4);
  CHECK(agent.critic_opt.learning_rate == 1e-3);

  DdpgAgent again = make_agent(30, 3, hp, 11);
  CHECK(params_hash(again.actor) == params_hash(agent.actor));

  Hyperparams bad = hp;
  bad.gamma = 1.0;
  CHECK_THROWS_AS((void)make_agent(30, 3, bad, 11), ConfigError);
}

TEST_CASE("select_action clamps exploration noise into [-1, 1]") {
  Hyperparams hp;
  hp.hidden_size = 16;
  hp.ou_sigma = 3.0;  // force saturation
  DdpgAgent agent = make_agent(4, 2, hp, 5);
  std::vector<double> state{0.2, -0.4, 0.6, 0.0};

  const std::vector<double> quiet = select_action(agent, state, false);
  CHECK(quiet == policy_action(agent.actor, state));
  CHECK(quiet == select_action(agent, state, false));

  bool saturated = false;
  for (int i = 0; i < 50; ++i) {
    const std::vector<double> a = select_action(agent, state, true);
    for (double x : a) {
      CHECK(x >= -1.0);
      CHECK(x <= 1.0);
      if (x == 1.0 || x == -1.0) saturated = true;
    }
  }
  CHECK(saturated);
}

TEST_CASE("bellman target masks the bootstrap on terminal transitions") {
  CHECK(bellman_target(1.5, false, 2.0, 0.99) == doctest::Approx(1.5 + 0.99 * 2.0));
  CHECK(bellman_target(1.5, true, 2.0, 0.99) == 1.5);
  CHECK(bellman_target(-0.3, true, -50.0, 0.99) == -0.3);
}

TEST_CASE("critic loss matches the hand-worked fixture") {
  DdpgAgent agent = fixture_agent();
  const std::vector<Transition> batch = fixture_batch();

  // transition 1 (non-terminal): a' = tanh(0.4*0.8 + 0.1)
  const double ap = std::tanh(0.42);
  const double qp = 0.2 * 0.8 + 0.3 * ap - 0.05;
  const double qb1 = 1.0 + 0.99 * qp;
  const double q1 = 0.5 * 0.5 - 0.25 * 0.2 + 0.1;
  // transition 2 (terminal): bootstrap suppressed
  const double qb2 = -0.5;
  const double q2 = 0.5 * -0.3 - 0.25 * -0.6 + 0.1;
  const double expect = ((q1 - qb1) * (q1 - qb1) + (q2 - qb2) * (q2 - qb2)) / 2.0;

  GradientSet grads = make_gradient_set(agent.critic);
  const double loss = critic_batch_gradients_serial(agent, batch, grads);
  CHECK(loss == doctest::Approx(expect).epsilon(1e-12));

  // gradients by hand: d loss / d q_i = 2 (q_i - qb_i) / N, and q is linear
  // in the critic parameters: dq/dW = [s, a], dq/db = 1
  const double g1 = 2.0 * (q1 - qb1) / 2.0;
  const double g2 = 2.0 * (q2 - qb2) / 2.0;
  CHECK(grads.weights[0].at(0, 0) ==
        doctest::Approx(g1 * 0.5 + g2 * -0.3).epsilon(1e-12));
  CHECK(grads.weights[0].at(0, 1) ==
        doctest::Approx(g1 * 0.2 + g2 * -0.6).epsilon(1e-12));
  CHECK(grads.biases[0][0] == doctest::Approx(g1 + g2).epsilon(1e-12));

  // critic_update returns the same pre-update loss and advances the optimizer
  DdpgAgent fresh = fixture_agent();
  CHECK(critic_update(fresh, batch) == doctest::Approx(expect).epsilon(1e-12));
  CHECK(fresh.critic_opt.step_count == 1);
  CHECK(params_hash(fresh.critic) != params_hash(agent.critic));
  CHECK(params_hash(fresh.actor) == params_hash(agent.actor));
}

TEST_CASE("policy loss matches the hand-worked fixture") {
  DdpgAgent agent = fixture_agent();
  const std::vector<Transition> batch = fixture_batch();

  const double a1 = std::tanh(0.4 * 0.5 + 0.1);
  const double q1 = 0.5 * 0.5 - 0.25 * a1 + 0.1;
  const double a2 = std::tanh(0.4 * -0.3 + 0.1);
  const double q2 = 0.5 * -0.3 - 0.25 * a2 + 0.1;
  const double expect = -(q1 + q2) / 2.0;

  GradientSet grads = make_gradient_set(agent.actor);
  const double loss = actor_batch_gradients_serial(agent, batch, grads);
  CHECK(loss == doctest::Approx(expect).epsilon(1e-12));

  // chain rule by hand: d(-meanQ)/dw = mean_i( 0.25 * (1 - a_i^2) * s_i )
  const double dw = ((1.0 - a1 * a1) * 0.25 * 0.5 + (1.0 - a2 * a2) * 0.25 * -0.3) / 2.0;
  const double db = ((1.0 - a1 * a1) * 0.25 + (1.0 - a2 * a2) * 0.25) / 2.0;
  CHECK(grads.weights[0].at(0, 0) == doctest::Approx(dw).epsilon(1e-12));
  CHECK(grads.biases[0][0] == doctest::Approx(db).epsilon(1e-12));

  DdpgAgent fresh = fixture_agent();
  CHECK(actor_update(fresh, batch) == doctest::Approx(expect).epsilon(1e-12));
  CHECK(fresh.actor_opt.step_count == 1);
  CHECK(params_hash(fresh.actor) != params_hash(agent.actor));
  CHECK(params_hash(fresh.critic) == params_hash(agent.critic));
}

TEST_CASE("batch gradients agree with finite differences end to end") {
  Hyperparams hp;
  hp.hidden_layers = 2;
  hp.hidden_size = 8;
  DdpgAgent agent = make_agent(3, 2, hp, 31);
  Rng rng(617);
  const std::vector<Transition> batch = random_batch(rng, 5, 3, 2);
  const double h = 1e-6;

  GradientSet cg = make_gradient_set(agent.critic);
  critic_batch_gradients_serial(agent, batch, cg);
  auto critic_loss = [&]() {
    GradientSet scratch = make_gradient_set(agent.critic);
    return critic_batch_gradients_serial(agent, batch, scratch);
  };
  for (int l = 0; l < agent.critic.num_layers(); ++l)
    for (std::size_t k = 0; k < agent.critic.weights[l].data.size(); k += 7) {
      double& p = agent.critic.weights[l].data[k];
      const double saved = p;
      p = saved + h;
      const double up = critic_loss();
      p = saved - h;
      const double dn = critic_loss();
      p = saved;
      const double fd = (up - dn) / (2.0 * h);
      CHECK(cg.weights[l].data[k] == doctest::Approx(fd).epsilon(2e-4));
    }

  GradientSet ag = make_gradient_set(agent.actor);
  actor_batch_gradients_serial(agent, batch, ag);
  auto actor_loss = [&]() {
    GradientSet scratch = make_gradient_set(agent.actor);
    return actor_batch_gradients_serial(agent, batch, scratch);
  };
  for (int l = 0; l < agent.actor.num_layers(); ++l)
    for (std::size_t k = 0; k < agent.actor.weights[l].data.size(); k += 5) {
      double& p = agent.actor.weights[l].data[k];
      const double saved = p;
      p = saved + h;
      const double up = actor_loss();
      p = saved - h;
      const double dn = actor_loss();
      p = saved;
      const double fd = (up - dn) / (2.0 * h);
      CHECK(ag.weights[l].data[k] == doctest::Approx(fd).epsilon(2e-4));
    }
}

TEST_CASE("parallel kernels reproduce the serial reference") {
  Hyperparams hp;
  hp.hidden_layers = 3;
  hp.hidden_size = 24;
  DdpgAgent agent = make_agent(6, 3, hp, 13);
  Rng rng(777);
  const std::vector<Transition> batch = random_batch(rng, 64, 6, 3);

  GradientSet cs = make_gradient_set(agent.critic);
  const double closs = critic_batch_gradients_serial(agent, batch, cs);
  GradientSet as = make_gradient_set(agent.actor);
  const double aloss = actor_batch_gradients_serial(agent, batch, as);

  for (int chunks : {1, 2, 4, 8, 64}) {
    GradientSet cp = make_gradient_set(agent.critic);
    const double cl = critic_batch_gradients_parallel(agent, batch, cp, chunks);
    CHECK(std::abs(cl - closs) < 1e-12);
    CHECK(grad_max_diff(cs, cp) < 1e-12);

    GradientSet ap = make_gradient_set(agent.actor);
    const double al = actor_batch_gradients_parallel(agent, batch, ap, chunks);
    CHECK(std::abs(al - aloss) < 1e-12);
    CHECK(grad_max_diff(as, ap) < 1e-12);
  }

  // bitwise reproducibility for a fixed chunk count
  GradientSet p1 = make_gradient_set(agent.critic);
  GradientSet p2 = make_gradient_set(agent.critic);
  critic_batch_gradients_parallel(agent, batch, p1, 4);
  critic_batch_gradients_parallel(agent, batch, p2, 4);
  CHECK(grad_max_diff(p1, p2) == 0.0);
}

TEST_CASE("repeated critic regression drives the fixture loss down") {
  DdpgAgent agent = fixture_agent();
  const std::vector<Transition> batch = fixture_batch();
  const double first = critic_update(agent, batch);
  double last = first;
  for (int i = 0; i < 2000; ++i) last = critic_update(agent, batch);
  CHECK(last < 0.05 * first);
}

TEST_CASE("soft_update_targets nudges both targets toward the mains") {
  Hyperparams hp;
  hp.hidden_size = 8;
  hp.hidden_layers = 2;
  DdpgAgent agent = make_agent(4, 2, hp, 3);
  Rng rng(21);
  const std::vector<Transition> batch = random_batch(rng, 8, 4, 2);
  critic_update(agent, batch);
  actor_update(agent, batch);
  CHECK(params_hash(agent.actor) != params_hash(agent.actor_target));

  const std::vector<double> main_a = flatten_params(agent.actor);
  const std::vector<double> tgt_a = flatten_params(agent.actor_target);
  soft_update_targets(agent, 0.01);
  const std::vector<double> blended = flatten_params(agent.actor_target);
  for (std::size_t i = 0; i < blended.size(); ++i)
    CHECK(blended[i] ==
          doctest::Approx(0.01 * main_a[i] + 0.99 * tgt_a[i]).epsilon(1e-12));

  // tau = 1 snaps targets onto the mains
  soft_update_targets(agent, 1.0);
  CHECK(params_hash(agent.actor_target) == params_hash(agent.actor));
  CHECK(params_hash(agent.critic_target) == params_hash(agent.critic));
}

TEST_CASE("update kernels reject empty and mismatched batches") {
  Hyperparams hp;
  hp.hidden_size = 8;
  hp.hidden_layers = 1;
  DdpgAgent agent = make_agent(4, 2, hp, 3);
  CHECK_THROWS_AS((void)critic_update(agent, {}), UsageError);
  CHECK_THROWS_AS((void)actor_update(agent, {}), UsageError);

  Transition bad;
  bad.state = {1.0, 2.0};  // wrong dimension
  bad.action = {0.0, 0.0};
  bad.next_state = {0.0, 0.0, 0.0, 0.0};
  std::vector<Transition> batch{bad};
  CHECK_THROWS_AS((void)critic_update(agent, batch), DimensionError);
  CHECK_THROWS_AS((void)actor_update(agent, batch), DimensionError);
}
