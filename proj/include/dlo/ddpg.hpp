#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "dlo/nn.hpp"
#include "dlo/rng.hpp"

namespace dlo {

struct Transition {
  std::vector<double> state;
  std::vector<double> action;
  std::vector<double> next_state;
  double reward = 0.0;
  bool terminal = false;
};

// Bounded FIFO with uniform without-replacement batch sampling.
class ReplayBuffer {
public:
  ReplayBuffer(std::size_t capacity, std::uint64_t seed);

  void store(Transition t);
  // nullopt until the buffer holds at least n transitions.
  std::optional<std::vector<Transition>> sample(std::size_t n);

  std::size_t size() const { return full_ ? capacity_ : next_; }
  std::size_t capacity() const { return capacity_; }
  // insertion order, oldest first
  const Transition& at(std::size_t i) const;

private:
  std::size_t capacity_;
  std::vector<Transition> storage_;
  std::size_t next_ = 0;
  bool full_ = false;
  Rng rng_;
};

struct OuNoiseProcess {
  double theta = 0.15;
  double sigma = 0.2;
  double dt = 1.0;
  std::vector<double> mu;
  std::vector<double> state;
  Rng rng;

  OuNoiseProcess(int dim, double theta, double sigma, double dt, std::uint64_t seed);

  void reset();  // state back to mu
  // state += theta*(mu-state)*dt + sigma*sqrt(dt)*gaussian; returns new state
  const std::vector<double>& sample();
};

struct Hyperparams {
  int hidden_layers = 3;
  int hidden_size = 256;
  double actor_lr = 1e-4;
  double critic_lr = 1e-3;
  std::size_t buffer_capacity = 50000;
  int batch_size = 128;
  double gamma = 0.99;
  double tau = 0.01;
  double ou_theta = 0.15;
  double ou_sigma = 0.2;
  double ou_dt = 1.0;

  void validate() const;  // throws ConfigError
};

// One DDPG learner: actor/critic mains, targets, optimizers, exploration noise.
// The critic takes the state concatenated with the action at its input layer.
struct DdpgAgent {
  MlpNetwork actor, critic, actor_target, critic_target;
  AdamState actor_opt, critic_opt;
  double gamma = 0.99;
  int batch_size = 128;
  double tau = 0.01;
  OuNoiseProcess noise;

  int state_dim() const { return actor.input_size(); }
  int action_dim() const { return actor.output_size(); }
};

DdpgAgent make_agent(int state_dim, int action_dim, const Hyperparams& hp,
                     std::uint64_t seed);

// Actor forward pass; with explore, OU noise is added and components are
// clamped to [-1, 1].
std::vector<double> select_action(DdpgAgent& agent, std::span<const double> state,
                                  bool explore);

// Deterministic action from a bare actor network (workers hold snapshots).
std::vector<double> policy_action(const MlpNetwork& actor,
                                  std::span<const double> state);

inline double bellman_target(double reward, bool terminal, double next_q,
                             double gamma) {
  return terminal ? reward : reward + gamma * next_q;
}

// Batch gradient kernels. The serial variants accumulate in transition order
// and are the reference the tests pin the parallel variants against; the
// parallel variants split the batch into `chunks` fixed ranges reduced in
// index order, so results are reproducible for a given chunk count.
double critic_batch_gradients_serial(const DdpgAgent& agent,
                                     std::span<const Transition> batch,
                                     GradientSet& out);
double critic_batch_gradients_parallel(const DdpgAgent& agent,
                                       std::span<const Transition> batch,
                                       GradientSet& out, int chunks);
double actor_batch_gradients_serial(const DdpgAgent& agent,
                                    std::span<const Transition> batch,
                                    GradientSet& out);
double actor_batch_gradients_parallel(const DdpgAgent& agent,
                                      std::span<const Transition> batch,
                                      GradientSet& out, int chunks);

// One critic regression step toward the Bellman targets; returns the
// pre-update MSE loss.
double critic_update(DdpgAgent& agent, std::span<const Transition> batch,
                     int kernel_chunks = 1);

// One policy-gradient step on the actor (critic untouched); returns the
// pre-update policy loss -mean Q.
double actor_update(DdpgAgent& agent, std::span<const Transition> batch,
                    int kernel_chunks = 1);

// Polyak-blend both target networks toward the mains.
void soft_update_targets(DdpgAgent& agent, double tau);

}  // namespace dlo
