#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace dlo {

enum class Activation { Tanh, Identity };

// Row-major dense matrix.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(int r, int c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, 0.0) {}

  double* row(int r) { return data.data() + static_cast<std::size_t>(r) * cols; }
  const double* row(int r) const { return data.data() + static_cast<std::size_t>(r) * cols; }
  double& at(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
  double at(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }

  void resize(int r, int c) {
    rows = r;
    cols = c;
    data.resize(static_cast<std::size_t>(r) * c);
  }
};

// Fully connected network: ReLU hidden layers, Tanh or Identity output.
// weights[k] maps layer_sizes[k] -> layer_sizes[k+1].
struct MlpNetwork {
  std::vector<int> layer_sizes;
  std::vector<Matrix> weights;
  std::vector<std::vector<double>> biases;
  Activation output_activation = Activation::Tanh;

  int input_size() const { return layer_sizes.front(); }
  int output_size() const { return layer_sizes.back(); }
  int num_layers() const { return static_cast<int>(weights.size()); }
  std::size_t parameter_count() const;
  bool same_architecture(const MlpNetwork& other) const;
};

// Per-parameter gradients, shape-matched to the owning network.
struct GradientSet {
  std::vector<Matrix> weights;
  std::vector<std::vector<double>> biases;

  void zero();
  void add(const GradientSet& other);
};

GradientSet make_gradient_set(const MlpNetwork& net);

// Weights and biases uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)], drawn
// layer by layer (W row-major, then b) from mt19937_64(seed).
MlpNetwork mlp_init(const std::vector<int>& layer_sizes, Activation output_activation,
                    std::uint64_t seed);

std::vector<double> forward(const MlpNetwork& net, std::span<const double> input);

// Reusable buffers for the allocation-free fast path.
struct MlpWorkspace {
  std::vector<std::vector<double>> acts;  // acts[0] = input, acts[k+1] = layer k output
  std::vector<std::vector<double>> pre;   // pre-activation per layer
  std::vector<std::vector<double>> delta; // backprop scratch
};

// Forward pass recording activations; result in ws.acts.back().
void forward_into(const MlpNetwork& net, std::span<const double> input, MlpWorkspace& ws);

// Gradients of (output . output_gradient) w.r.t. parameters, accumulated into
// accum (+=); the gradient w.r.t. the input is written to input_gradient.
// Requires ws to hold the forward pass of the same input.
void backward_accumulate(const MlpNetwork& net, MlpWorkspace& ws,
                         std::span<const double> output_gradient, GradientSet& accum,
                         std::vector<double>& input_gradient);

// Same chain rule but propagates to the input only; parameter gradients are
// not formed. Used where a network is differentiated through, not trained.
void backward_input_only(const MlpNetwork& net, MlpWorkspace& ws,
                         std::span<const double> output_gradient,
                         std::vector<double>& input_gradient);

struct BackwardResult {
  GradientSet gradients;
  std::vector<double> input_gradient;
};

BackwardResult backward(const MlpNetwork& net, std::span<const double> input,
                        std::span<const double> output_gradient);

// Batched counterparts: one matrix row per sample. Each weight matrix is
// traversed once per layer instead of once per sample, which is what makes
// the training kernels memory-efficient at realistic batch sizes.
struct MlpBatchWorkspace {
  std::vector<Matrix> acts;   // acts[0] = inputs, acts[k+1] = layer k outputs
  std::vector<Matrix> pre;    // pre-activations per layer
  std::vector<Matrix> delta;  // backprop scratch
  Matrix tr_a, tr_d;          // transposes for the weight-gradient product
};

// Forward pass for input.rows samples; results land in ws.acts.back().
// Matches the per-sample path to rounding (the fused kernels regroup the
// floating-point sums), and is deterministic for fixed inputs.
void forward_batch(const MlpNetwork& net, const Matrix& input, MlpBatchWorkspace& ws);

// Backprop for the batch held in ws. Parameter gradients are summed over
// samples in index order into accum when non-null; per-sample input gradients
// are written to input_gradient when non-null.
void backward_batch(const MlpNetwork& net, MlpBatchWorkspace& ws,
                    const Matrix& output_gradient, GradientSet* accum,
                    Matrix* input_gradient);

struct AdamState {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  long step_count = 0;
  std::vector<Matrix> m_w, v_w;
  std::vector<std::vector<double>> m_b, v_b;
};

AdamState make_adam(const MlpNetwork& net, double learning_rate);

// Bias-corrected Adam update; throws NumericalError if any parameter leaves
// the finite range.
void adam_step(MlpNetwork& net, AdamState& state, const GradientSet& grads);

// target <- tau * source + (1 - tau) * target
void polyak_update(MlpNetwork& target, const MlpNetwork& source, double tau);

// Flat parameter export/import. Order: per layer, W row-major then b.
std::vector<double> flatten_params(const MlpNetwork& net);
void load_params(MlpNetwork& net, std::span<const double> params);
std::vector<double> flatten_adam_moments(const AdamState& state);
void load_adam_moments(AdamState& state, std::span<const double> moments);

std::uint64_t params_hash(const MlpNetwork& net);

}  // namespace dlo
