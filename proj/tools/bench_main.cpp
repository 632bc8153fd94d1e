#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <vector>

#include <omp.h>

#include "CLI11.hpp"
#include "dlo/ddpg.hpp"
#include "dlo/nn.hpp"
#include "dlo/rng.hpp"

namespace {

std::vector<dlo::Transition> synth_batch(int n, int state_dim, int action_dim,
                                         dlo::Rng& rng) {
  std::vector<dlo::Transition> batch(static_cast<std::size_t>(n));
  for (auto& t : batch) {
    t.state.resize(static_cast<std::size_t>(state_dim));
    t.next_state.resize(static_cast<std::size_t>(state_dim));
    t.action.resize(static_cast<std::size_t>(action_dim));
    for (auto& v : t.state) v = rng.uniform(-1.0, 1.0);
    for (auto& v : t.next_state) v = rng.uniform(-1.0, 1.0);
    for (auto& v : t.action) v = rng.uniform(-1.0, 1.0);
    t.reward = rng.uniform(-1.0, 0.0);
    t.terminal = rng.below(10) == 0;
  }
  return batch;
}

double max_abs_diff(const dlo::GradientSet& a, const dlo::GradientSet& b) {
  double worst = 0.0;
  for (std::size_t l = 0; l < a.weights.size(); ++l) {
    for (std::size_t i = 0; i < a.weights[l].data.size(); ++i)
      worst = std::max(worst, std::abs(a.weights[l].data[i] - b.weights[l].data[i]));
    for (std::size_t i = 0; i < a.biases[l].size(); ++i)
      worst = std::max(worst, std::abs(a.biases[l][i] - b.biases[l][i]));
  }
  return worst;
}

template <typename F>
double best_seconds(int reps, F&& body) {
  double best = std::numeric_limits<double>::infinity();
  for (int r = 0; r < reps; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    body();
    const auto t1 = std::chrono::steady_clock::now();
    best = std::min(best, std::chrono::duration<double>(t1 - t0).count());
  }
  return best;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"serial vs chunked-parallel gradient kernel benchmark"};
  int batch_size = 128;
  int reps = 50;
  int state_dim = 30;
  int action_dim = 3;
  int hidden_layers = 3;
  int hidden_size = 256;
  double tolerance = 1e-9;
  std::vector<int> chunk_counts;
  app.add_option("--batch", batch_size, "transitions per batch")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  app.add_option("--reps", reps, "timed repetitions, best is reported")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  app.add_option("--state", state_dim, "state dimension")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  app.add_option("--action", action_dim, "action dimension")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  app.add_option("--hidden-layers", hidden_layers, "hidden layer count")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  app.add_option("--hidden-size", hidden_size, "hidden layer width")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  app.add_option("--chunks", chunk_counts,
                 "chunk counts to benchmark (default 2 4 and the thread count)");
  CLI11_PARSE(app, argc, argv);

  if (chunk_counts.empty()) {
    chunk_counts = {2, 4};
    const int threads = omp_get_max_threads();
    if (std::find(chunk_counts.begin(), chunk_counts.end(), threads) ==
        chunk_counts.end())
      chunk_counts.push_back(threads);
  }

  dlo::Hyperparams hp;
  hp.hidden_layers = hidden_layers;
  hp.hidden_size = hidden_size;
  dlo::DdpgAgent agent = dlo::make_agent(state_dim, action_dim, hp, 42);
  dlo::Rng rng(7);
  const std::vector<dlo::Transition> batch =
      synth_batch(batch_size, state_dim, action_dim, rng);

  std::printf("batch %d  state %d  action %d  hidden %dx%d  threads %d  reps %d\n\n",
              batch_size, state_dim, action_dim, hidden_layers, hidden_size,
              omp_get_max_threads(), reps);
  std::printf("%-8s %-8s %12s %10s %14s\n", "kernel", "chunks", "best ms", "speedup",
              "max |diff|");

  struct Kernel {
    const char* name;
    double (*serial)(const dlo::DdpgAgent&, std::span<const dlo::Transition>,
                     dlo::GradientSet&);
    double (*parallel)(const dlo::DdpgAgent&, std::span<const dlo::Transition>,
                       dlo::GradientSet&, int);
    const dlo::MlpNetwork* net;
  };
  const Kernel kernels[] = {
      {"critic", dlo::critic_batch_gradients_serial,
       dlo::critic_batch_gradients_parallel, &agent.critic},
      {"actor", dlo::actor_batch_gradients_serial,
       dlo::actor_batch_gradients_parallel, &agent.actor},
  };

  bool ok = true;
  for (const Kernel& k : kernels) {
    dlo::GradientSet reference = dlo::make_gradient_set(*k.net);
    const double serial_s = best_seconds(reps, [&] {
      reference.zero();
      k.serial(agent, batch, reference);
    });
    std::printf("%-8s %-8s %12.3f %10s %14s\n", k.name, "serial", serial_s * 1e3,
                "1.00x", "-");

    dlo::GradientSet grads = dlo::make_gradient_set(*k.net);
    for (int chunks : chunk_counts) {
      const double par_s = best_seconds(reps, [&] {
        grads.zero();
        k.parallel(agent, batch, grads, chunks);
      });
      const double diff = max_abs_diff(reference, grads);
      ok = ok && diff <= tolerance;
      std::printf("%-8s %-8d %12.3f %9.2fx %14.3e\n", k.name, chunks, par_s * 1e3,
                  serial_s / par_s, diff);
    }
    std::printf("\n");
  }

  if (!ok) {
    std::fprintf(stderr, "error: parallel gradients diverge from serial beyond %g\n",
                 tolerance);
    return 1;
  }
  std::printf("parallel kernels match serial within %g\n", tolerance);
  return 0;
}
