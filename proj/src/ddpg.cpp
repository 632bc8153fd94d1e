#include "dlo/ddpg.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "dlo/errors.hpp"

namespace dlo {

ReplayBuffer::ReplayBuffer(std::size_t capacity, std::uint64_t seed)
    : capacity_(capacity), rng_(seed) {
  if (capacity == 0) throw ConfigError("ReplayBuffer: capacity must be positive");
  storage_.reserve(capacity);
}

void ReplayBuffer::store(Transition t) {
  if (storage_.size() < capacity_) {
    storage_.push_back(std::move(t));
    next_ = storage_.size() % capacity_;
    full_ = storage_.size() == capacity_;
  } else {
    storage_[next_] = std::move(t);
    next_ = (next_ + 1) % capacity_;
  }
}

const Transition& ReplayBuffer::at(std::size_t i) const {
  if (i >= size()) throw UsageError("ReplayBuffer::at: index out of range");
  const std::size_t oldest = full_ ? next_ : 0;
  return storage_[(oldest + i) % capacity_];
}

std::optional<std::vector<Transition>> ReplayBuffer::sample(std::size_t n) {
  if (n == 0) throw UsageError("ReplayBuffer::sample: n must be positive");
  const std::size_t sz = size();
  if (sz < n) return std::nullopt;
  // Floyd's algorithm: n distinct indices, uniform over combinations.
  std::unordered_set<std::size_t> chosen;
  std::vector<Transition> batch;
  batch.reserve(n);
  for (std::size_t j = sz - n; j < sz; ++j) {
    std::size_t idx = rng_.below(j + 1);
    if (chosen.count(idx)) idx = j;
    chosen.insert(idx);
    batch.push_back(at(idx));
  }
  return batch;
}

OuNoiseProcess::OuNoiseProcess(int dim, double theta_, double sigma_, double dt_,
                               std::uint64_t seed)
    : theta(theta_), sigma(sigma_), dt(dt_), mu(dim, 0.0), state(dim, 0.0),
      rng(seed) {
  if (dim <= 0) throw ConfigError("OuNoiseProcess: dimension must be positive");
  if (theta <= 0.0 || sigma < 0.0 || dt <= 0.0)
    throw ConfigError("OuNoiseProcess: theta and dt must be positive, sigma >= 0");
}

void OuNoiseProcess::reset() { state = mu; }

const std::vector<double>& OuNoiseProcess::sample() {
  const double sd = sigma * std::sqrt(dt);
  for (std::size_t i = 0; i < state.size(); ++i)
    state[i] += theta * (mu[i] - state[i]) * dt + sd * rng.gaussian();
  return state;
}

void Hyperparams::validate() const {
  if (hidden_layers <= 0) throw ConfigError("hyperparams: hidden_layers must be positive");
  if (hidden_size <= 0) throw ConfigError("hyperparams: hidden_size must be positive");
  if (actor_lr <= 0.0 || critic_lr <= 0.0)
    throw ConfigError("hyperparams: learning rates must be positive");
  if (buffer_capacity == 0) throw ConfigError("hyperparams: buffer_capacity must be positive");
  if (batch_size <= 0) throw ConfigError("hyperparams: batch_size must be positive");
  if (gamma <= 0.0 || gamma >= 1.0) throw ConfigError("hyperparams: gamma must lie in (0,1)");
  if (tau <= 0.0 || tau > 1.0) throw ConfigError("hyperparams: tau must lie in (0,1]");
  if (ou_theta <= 0.0 || ou_sigma < 0.0 || ou_dt <= 0.0)
    throw ConfigError("hyperparams: bad OU parameters");
}

DdpgAgent make_agent(int state_dim, int action_dim, const Hyperparams& hp,
                     std::uint64_t seed) {
  hp.validate();
  if (state_dim <= 0 || action_dim <= 0)
    throw ConfigError("make_agent: state and action dimensions must be positive");

  std::vector<int> actor_arch{state_dim};
  std::vector<int> critic_arch{state_dim + action_dim};
  for (int i = 0; i < hp.hidden_layers; ++i) {
    actor_arch.push_back(hp.hidden_size);
    critic_arch.push_back(hp.hidden_size);
  }
  actor_arch.push_back(action_dim);
  critic_arch.push_back(1);

  DdpgAgent agent{
      mlp_init(actor_arch, Activation::Tanh, mix_seed(seed, 0)),
      mlp_init(critic_arch, Activation::Identity, mix_seed(seed, 1)),
      MlpNetwork{},
      MlpNetwork{},
      AdamState{},
      AdamState{},
      hp.gamma,
      hp.batch_size,
      hp.tau,
      OuNoiseProcess(action_dim, hp.ou_theta, hp.ou_sigma, hp.ou_dt,
                     mix_seed(seed, 2))};
  agent.actor_target = agent.actor;
  agent.critic_target = agent.critic;
  agent.actor_opt = make_adam(agent.actor, hp.actor_lr);
  agent.critic_opt = make_adam(agent.critic, hp.critic_lr);
  return agent;
}

std::vector<double> policy_action(const MlpNetwork& actor,
                                  std::span<const double> state) {
  return forward(actor, state);
}

std::vector<double> select_action(DdpgAgent& agent, std::span<const double> state,
                                  bool explore) {
  std::vector<double> a = forward(agent.actor, state);
  if (explore) {
    const auto& n = agent.noise.sample();
    for (std::size_t i = 0; i < a.size(); ++i)
      a[i] = std::clamp(a[i] + n[i], -1.0, 1.0);
  }
  return a;
}

namespace {

struct KernelScratch {
  MlpBatchWorkspace actor_ws, critic_ws;
  Matrix x;        // state assembly, one transition per row
  Matrix sa;       // state ++ action assembly
  Matrix dout;     // per-sample output gradients
  Matrix dinput;   // input gradients of the critic
  Matrix daction;  // action slice of dinput
  std::vector<double> qb;
};

// Accumulates critic-loss gradients for batch[begin, end); returns the sum of
// squared residuals for that range. inv_n is 1/N of the full batch.
double critic_chunk(const DdpgAgent& agent, std::span<const Transition> batch,
                    std::size_t begin, std::size_t end, double inv_n,
                    GradientSet& accum, KernelScratch& ks) {
  const int sdim = agent.state_dim();
  const int adim = agent.action_dim();
  const int n = static_cast<int>(end - begin);
  for (std::size_t i = begin; i < end; ++i) {
    const Transition& t = batch[i];
    if (static_cast<int>(t.state.size()) != sdim ||
        static_cast<int>(t.next_state.size()) != sdim ||
        static_cast<int>(t.action.size()) != adim)
      throw DimensionError("critic_update: transition does not match agent dimensions");
  }

  // Bellman targets from the target pair at the next states.
  ks.x.resize(n, sdim);
  for (int i = 0; i < n; ++i)
    std::copy(batch[begin + i].next_state.begin(), batch[begin + i].next_state.end(),
              ks.x.row(i));
  forward_batch(agent.actor_target, ks.x, ks.actor_ws);
  const Matrix& next_action = ks.actor_ws.acts.back();
  ks.sa.resize(n, sdim + adim);
  for (int i = 0; i < n; ++i) {
    std::copy(ks.x.row(i), ks.x.row(i) + sdim, ks.sa.row(i));
    std::copy(next_action.row(i), next_action.row(i) + adim, ks.sa.row(i) + sdim);
  }
  forward_batch(agent.critic_target, ks.sa, ks.critic_ws);
  ks.qb.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const Transition& t = batch[begin + i];
    ks.qb[i] = bellman_target(t.reward, t.terminal, ks.critic_ws.acts.back().at(i, 0),
                              agent.gamma);
  }

  // Current Q, residuals, and the regression gradient.
  for (int i = 0; i < n; ++i) {
    const Transition& t = batch[begin + i];
    std::copy(t.state.begin(), t.state.end(), ks.sa.row(i));
    std::copy(t.action.begin(), t.action.end(), ks.sa.row(i) + sdim);
  }
  forward_batch(agent.critic, ks.sa, ks.critic_ws);
  ks.dout.resize(n, 1);
  double loss_sum = 0.0;
  for (int i = 0; i < n; ++i) {
    const double resid = ks.critic_ws.acts.back().at(i, 0) - ks.qb[i];
    loss_sum += resid * resid;
    ks.dout.at(i, 0) = 2.0 * resid * inv_n;
  }
  backward_batch(agent.critic, ks.critic_ws, ks.dout, &accum, nullptr);
  return loss_sum;
}

// Accumulates policy-loss gradients for batch[begin, end); returns the sum of
// Q(s, actor(s)) over the range.
double actor_chunk(const DdpgAgent& agent, std::span<const Transition> batch,
                   std::size_t begin, std::size_t end, double inv_n,
                   GradientSet& accum, KernelScratch& ks) {
  const int sdim = agent.state_dim();
  const int adim = agent.action_dim();
  const int n = static_cast<int>(end - begin);
  for (std::size_t i = begin; i < end; ++i)
    if (static_cast<int>(batch[i].state.size()) != sdim)
      throw DimensionError("actor_update: transition does not match agent dimensions");

  ks.x.resize(n, sdim);
  for (int i = 0; i < n; ++i)
    std::copy(batch[begin + i].state.begin(), batch[begin + i].state.end(),
              ks.x.row(i));
  forward_batch(agent.actor, ks.x, ks.actor_ws);
  const Matrix& action = ks.actor_ws.acts.back();
  ks.sa.resize(n, sdim + adim);
  for (int i = 0; i < n; ++i) {
    std::copy(ks.x.row(i), ks.x.row(i) + sdim, ks.sa.row(i));
    std::copy(action.row(i), action.row(i) + adim, ks.sa.row(i) + sdim);
  }
  forward_batch(agent.critic, ks.sa, ks.critic_ws);
  double q_sum = 0.0;
  for (int i = 0; i < n; ++i) q_sum += ks.critic_ws.acts.back().at(i, 0);

  // d(-mean Q)/d action through the critic input, then into the actor.
  ks.dout.resize(n, 1);
  std::fill(ks.dout.data.begin(), ks.dout.data.end(), -inv_n);
  backward_batch(agent.critic, ks.critic_ws, ks.dout, nullptr, &ks.dinput);
  ks.daction.resize(n, adim);
  for (int i = 0; i < n; ++i)
    std::copy(ks.dinput.row(i) + sdim, ks.dinput.row(i) + sdim + adim,
              ks.daction.row(i));
  backward_batch(agent.actor, ks.actor_ws, ks.daction, &accum, nullptr);
  return q_sum;
}

using ChunkFn = double (*)(const DdpgAgent&, std::span<const Transition>, std::size_t,
                           std::size_t, double, GradientSet&, KernelScratch&);

double run_parallel(ChunkFn fn, const DdpgAgent& agent, const MlpNetwork& net,
                    std::span<const Transition> batch, GradientSet& out, int chunks) {
  const std::size_t n = batch.size();
  if (n == 0) throw UsageError("batch kernel: empty batch");
  const std::size_t k =
      std::min<std::size_t>(std::max(chunks, 1), n);
  const double inv_n = 1.0 / static_cast<double>(n);
  if (k == 1) {
    KernelScratch ks;
    return fn(agent, batch, 0, n, inv_n, out, ks);
  }
  std::vector<GradientSet> partial(k, make_gradient_set(net));
  std::vector<double> sums(k, 0.0);
#pragma omp parallel for schedule(static, 1)
  for (int c = 0; c < static_cast<int>(k); ++c) {
    KernelScratch ks;
    const std::size_t begin = n * c / k;
    const std::size_t end = n * (c + 1) / k;
    sums[c] = fn(agent, batch, begin, end, inv_n, partial[c], ks);
  }
  double total = 0.0;
  for (std::size_t c = 0; c < k; ++c) {
    total += sums[c];
    out.add(partial[c]);
  }
  return total;
}

}  // namespace

double critic_batch_gradients_serial(const DdpgAgent& agent,
                                     std::span<const Transition> batch,
                                     GradientSet& out) {
  if (batch.empty()) throw UsageError("critic_update: empty batch");
  KernelScratch ks;
  const double sum =
      critic_chunk(agent, batch, 0, batch.size(), 1.0 / batch.size(), out, ks);
  return sum / static_cast<double>(batch.size());
}

double critic_batch_gradients_parallel(const DdpgAgent& agent,
                                       std::span<const Transition> batch,
                                       GradientSet& out, int chunks) {
  if (batch.empty()) throw UsageError("critic_update: empty batch");
  const double sum = run_parallel(critic_chunk, agent, agent.critic, batch, out, chunks);
  return sum / static_cast<double>(batch.size());
}

double actor_batch_gradients_serial(const DdpgAgent& agent,
                                    std::span<const Transition> batch,
                                    GradientSet& out) {
  if (batch.empty()) throw UsageError("actor_update: empty batch");
  KernelScratch ks;
  const double sum =
      actor_chunk(agent, batch, 0, batch.size(), 1.0 / batch.size(), out, ks);
  return -sum / static_cast<double>(batch.size());
}

double actor_batch_gradients_parallel(const DdpgAgent& agent,
                                      std::span<const Transition> batch,
                                      GradientSet& out, int chunks) {
  if (batch.empty()) throw UsageError("actor_update: empty batch");
  const double sum = run_parallel(actor_chunk, agent, agent.actor, batch, out, chunks);
  return -sum / static_cast<double>(batch.size());
}

double critic_update(DdpgAgent& agent, std::span<const Transition> batch,
                     int kernel_chunks) {
  GradientSet grads = make_gradient_set(agent.critic);
  const double loss = kernel_chunks > 1
                          ? critic_batch_gradients_parallel(agent, batch, grads,
                                                            kernel_chunks)
                          : critic_batch_gradients_serial(agent, batch, grads);
  adam_step(agent.critic, agent.critic_opt, grads);
  return loss;
}

double actor_update(DdpgAgent& agent, std::span<const Transition> batch,
                    int kernel_chunks) {
  GradientSet grads = make_gradient_set(agent.actor);
  const double loss = kernel_chunks > 1
                          ? actor_batch_gradients_parallel(agent, batch, grads,
                                                           kernel_chunks)
                          : actor_batch_gradients_serial(agent, batch, grads);
  adam_step(agent.actor, agent.actor_opt, grads);
  return loss;
}

void soft_update_targets(DdpgAgent& agent, double tau) {
  polyak_update(agent.actor_target, agent.actor, tau);
  polyak_update(agent.critic_target, agent.critic, tau);
}

}  // namespace dlo
