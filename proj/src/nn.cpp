#include "dlo/nn.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>

#include "dlo/errors.hpp"
#include "dlo/hash.hpp"
#include "dlo/rng.hpp"

namespace dlo {

namespace {

inline double dot(const double* a, const double* b, int n) {
  double s = 0.0;
#pragma omp simd reduction(+ : s)
  for (int i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

inline void axpy(double* y, double a, const double* x, int n) {
#pragma omp simd
  for (int i = 0; i < n; ++i) y[i] += a * x[i];
}

// y = W x + b
inline void affine(const Matrix& w, const std::vector<double>& b, const double* x,
                   double* y) {
  for (int r = 0; r < w.rows; ++r) y[r] = dot(w.row(r), x, w.cols) + b[r];
}

void check_grad_shapes(const MlpNetwork& net, const GradientSet& g, const char* who) {
  if (static_cast<int>(g.weights.size()) != net.num_layers())
    throw DimensionError(std::string(who) + ": gradient layer count mismatch");
  for (int k = 0; k < net.num_layers(); ++k) {
    if (g.weights[k].rows != net.weights[k].rows ||
        g.weights[k].cols != net.weights[k].cols ||
        g.biases[k].size() != net.biases[k].size())
      throw DimensionError(std::string(who) + ": gradient shape mismatch at layer " +
                           std::to_string(k));
  }
}

}  // namespace

std::size_t MlpNetwork::parameter_count() const {
  std::size_t n = 0;
  for (int k = 0; k < num_layers(); ++k)
    n += weights[k].data.size() + biases[k].size();
  return n;
}

bool MlpNetwork::same_architecture(const MlpNetwork& other) const {
  return layer_sizes == other.layer_sizes &&
         output_activation == other.output_activation;
}

void GradientSet::zero() {
  for (auto& w : weights) std::fill(w.data.begin(), w.data.end(), 0.0);
  for (auto& b : biases) std::fill(b.begin(), b.end(), 0.0);
}

void GradientSet::add(const GradientSet& other) {
  if (weights.size() != other.weights.size())
    throw DimensionError("GradientSet::add: layer count mismatch");
  for (std::size_t k = 0; k < weights.size(); ++k) {
    if (weights[k].data.size() != other.weights[k].data.size() ||
        biases[k].size() != other.biases[k].size())
      throw DimensionError("GradientSet::add: shape mismatch");
    axpy(weights[k].data.data(), 1.0, other.weights[k].data.data(),
         static_cast<int>(weights[k].data.size()));
    axpy(biases[k].data(), 1.0, other.biases[k].data(),
         static_cast<int>(biases[k].size()));
  }
}

GradientSet make_gradient_set(const MlpNetwork& net) {
  GradientSet g;
  g.weights.reserve(net.num_layers());
  g.biases.reserve(net.num_layers());
  for (int k = 0; k < net.num_layers(); ++k) {
    g.weights.emplace_back(net.weights[k].rows, net.weights[k].cols);
    g.biases.emplace_back(net.biases[k].size(), 0.0);
  }
  return g;
}

MlpNetwork mlp_init(const std::vector<int>& layer_sizes, Activation output_activation,
                    std::uint64_t seed) {
  if (layer_sizes.size() < 2)
    throw ConfigError("mlp_init: need at least input and output layer sizes");
  for (int s : layer_sizes)
    if (s <= 0) throw ConfigError("mlp_init: layer sizes must be positive");

  MlpNetwork net;
  net.layer_sizes = layer_sizes;
  net.output_activation = output_activation;
  Rng rng(seed);
  for (std::size_t k = 0; k + 1 < layer_sizes.size(); ++k) {
    const int fan_in = layer_sizes[k];
    const int fan_out = layer_sizes[k + 1];
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    Matrix w(fan_out, fan_in);
    for (double& v : w.data) v = rng.uniform(-bound, bound);
    std::vector<double> b(fan_out);
    for (double& v : b) v = rng.uniform(-bound, bound);
    net.weights.push_back(std::move(w));
    net.biases.push_back(std::move(b));
  }
  return net;
}

void forward_into(const MlpNetwork& net, std::span<const double> input,
                  MlpWorkspace& ws) {
  if (static_cast<int>(input.size()) != net.input_size())
    throw DimensionError("forward: input length " + std::to_string(input.size()) +
                         " != " + std::to_string(net.input_size()));
  const int L = net.num_layers();
  ws.acts.resize(L + 1);
  ws.pre.resize(L);
  ws.acts[0].assign(input.begin(), input.end());
  for (int k = 0; k < L; ++k) {
    const int out = net.layer_sizes[k + 1];
    ws.pre[k].resize(out);
    ws.acts[k + 1].resize(out);
    affine(net.weights[k], net.biases[k], ws.acts[k].data(), ws.pre[k].data());
    double* a = ws.acts[k + 1].data();
    const double* p = ws.pre[k].data();
    if (k + 1 < L) {
      for (int i = 0; i < out; ++i) a[i] = p[i] > 0.0 ? p[i] : 0.0;
    } else if (net.output_activation == Activation::Tanh) {
      for (int i = 0; i < out; ++i) a[i] = std::tanh(p[i]);
    } else {
      for (int i = 0; i < out; ++i) a[i] = p[i];
    }
  }
}

std::vector<double> forward(const MlpNetwork& net, std::span<const double> input) {
  MlpWorkspace ws;
  forward_into(net, input, ws);
  return ws.acts.back();
}

namespace {

// Shared backprop core. If accum is non-null, parameter gradients are added
// to it; deltas end up in ws.delta[0] sized like the first hidden layer, and
// the input gradient is written to input_gradient.
void backward_core(const MlpNetwork& net, MlpWorkspace& ws,
                   std::span<const double> output_gradient, GradientSet* accum,
                   std::vector<double>& input_gradient) {
  const int L = net.num_layers();
  if (static_cast<int>(output_gradient.size()) != net.output_size())
    throw DimensionError("backward: output gradient length mismatch");
  if (static_cast<int>(ws.acts.size()) != L + 1)
    throw UsageError("backward: workspace does not hold a forward pass");

  ws.delta.resize(L);
  // output layer: d(pre) = dout * f'(pre)
  {
    const int out = net.layer_sizes[L];
    ws.delta[L - 1].resize(out);
    double* d = ws.delta[L - 1].data();
    if (net.output_activation == Activation::Tanh) {
      const double* a = ws.acts[L].data();
      for (int i = 0; i < out; ++i) d[i] = output_gradient[i] * (1.0 - a[i] * a[i]);
    } else {
      for (int i = 0; i < out; ++i) d[i] = output_gradient[i];
    }
  }

  for (int k = L - 1; k >= 0; --k) {
    const int out = net.layer_sizes[k + 1];
    const int in = net.layer_sizes[k];
    const double* d = ws.delta[k].data();
    if (accum) {
      Matrix& gw = accum->weights[k];
      double* gb = accum->biases[k].data();
      const double* a = ws.acts[k].data();
      for (int r = 0; r < out; ++r) {
        axpy(gw.row(r), d[r], a, in);
        gb[r] += d[r];
      }
    }
    // propagate: prev_delta = W^T d, then ReLU mask (or raw input gradient)
    std::vector<double>& prev = (k > 0) ? ws.delta[k - 1] : input_gradient;
    prev.assign(in, 0.0);
    for (int r = 0; r < out; ++r) axpy(prev.data(), d[r], net.weights[k].row(r), in);
    if (k > 0) {
      const double* p = ws.pre[k - 1].data();
      double* pd = prev.data();
      for (int i = 0; i < in; ++i)
        if (p[i] <= 0.0) pd[i] = 0.0;
    }
  }
}

}  // namespace

void backward_accumulate(const MlpNetwork& net, MlpWorkspace& ws,
                         std::span<const double> output_gradient, GradientSet& accum,
                         std::vector<double>& input_gradient) {
  check_grad_shapes(net, accum, "backward_accumulate");
  backward_core(net, ws, output_gradient, &accum, input_gradient);
}

namespace {

// Weight rows are processed in tiles of eight kept hot in L1 while the whole
// batch streams past: each weight matrix is read once per layer rather than
// once per sample, and the eight independent accumulator chains keep the FMA
// pipeline full where a single running sum would stall on its own latency.
constexpr int kRowTile = 8;

// y[j] = dot(m.row(r0 + j), x) for j in [0, 8)
inline void dot8(const Matrix& m, int r0, const double* x, int n, double* y) {
  const double* r0p = m.row(r0);
  const double* r1p = m.row(r0 + 1);
  const double* r2p = m.row(r0 + 2);
  const double* r3p = m.row(r0 + 3);
  const double* r4p = m.row(r0 + 4);
  const double* r5p = m.row(r0 + 5);
  const double* r6p = m.row(r0 + 6);
  const double* r7p = m.row(r0 + 7);
  double a0 = 0.0, a1 = 0.0, a2 = 0.0, a3 = 0.0;
  double a4 = 0.0, a5 = 0.0, a6 = 0.0, a7 = 0.0;
#pragma omp simd reduction(+ : a0, a1, a2, a3, a4, a5, a6, a7)
  for (int c = 0; c < n; ++c) {
    const double xc = x[c];
    a0 += r0p[c] * xc;
    a1 += r1p[c] * xc;
    a2 += r2p[c] * xc;
    a3 += r3p[c] * xc;
    a4 += r4p[c] * xc;
    a5 += r5p[c] * xc;
    a6 += r6p[c] * xc;
    a7 += r7p[c] * xc;
  }
  y[0] = a0;
  y[1] = a1;
  y[2] = a2;
  y[3] = a3;
  y[4] = a4;
  y[5] = a5;
  y[6] = a6;
  y[7] = a7;
}

// y += sum_j d[r0 + j] * m.row(r0 + j), eight rows fused into one pass
inline void axpy8(const Matrix& m, int r0, const double* d, double* y, int n) {
  const double* r0p = m.row(r0);
  const double* r1p = m.row(r0 + 1);
  const double* r2p = m.row(r0 + 2);
  const double* r3p = m.row(r0 + 3);
  const double* r4p = m.row(r0 + 4);
  const double* r5p = m.row(r0 + 5);
  const double* r6p = m.row(r0 + 6);
  const double* r7p = m.row(r0 + 7);
  const double d0 = d[r0], d1 = d[r0 + 1], d2 = d[r0 + 2], d3 = d[r0 + 3];
  const double d4 = d[r0 + 4], d5 = d[r0 + 5], d6 = d[r0 + 6], d7 = d[r0 + 7];
#pragma omp simd
  for (int c = 0; c < n; ++c) {
    const double t0 = d0 * r0p[c] + d1 * r1p[c];
    const double t1 = d2 * r2p[c] + d3 * r3p[c];
    const double t2 = d4 * r4p[c] + d5 * r5p[c];
    const double t3 = d6 * r6p[c] + d7 * r7p[c];
    y[c] += (t0 + t1) + (t2 + t3);
  }
}

void transpose_into(const Matrix& src, Matrix& dst) {
  dst.resize(src.cols, src.rows);
  for (int i = 0; i < src.rows; ++i) {
    const double* s = src.row(i);
    for (int c = 0; c < src.cols; ++c) dst.at(c, i) = s[c];
  }
}

}  // namespace

void forward_batch(const MlpNetwork& net, const Matrix& input, MlpBatchWorkspace& ws) {
  if (input.cols != net.input_size())
    throw DimensionError("forward_batch: input width " + std::to_string(input.cols) +
                         " != " + std::to_string(net.input_size()));
  const int L = net.num_layers();
  const int n = input.rows;
  ws.acts.resize(L + 1);
  ws.pre.resize(L);
  ws.acts[0] = input;
  for (int k = 0; k < L; ++k) {
    const Matrix& x = ws.acts[k];
    const Matrix& w = net.weights[k];
    const double* b = net.biases[k].data();
    const int out = net.layer_sizes[k + 1];
    const int in = net.layer_sizes[k];
    Matrix& p = ws.pre[k];
    Matrix& a = ws.acts[k + 1];
    p.resize(n, out);
    a.resize(n, out);
    const int full = out - out % kRowTile;
    for (int r0 = 0; r0 < full; r0 += kRowTile) {
      for (int i = 0; i < n; ++i) {
        double* pi = p.row(i) + r0;
        dot8(w, r0, x.row(i), in, pi);
        for (int j = 0; j < kRowTile; ++j) pi[j] += b[r0 + j];
      }
    }
    for (int i = 0; i < n; ++i) {
      const double* xi = x.row(i);
      double* pi = p.row(i);
      for (int r = full; r < out; ++r) pi[r] = dot(w.row(r), xi, in) + b[r];
    }
    const double* pd = p.data.data();
    double* ad = a.data.data();
    const std::size_t total = p.data.size();
    if (k + 1 < L) {
      for (std::size_t i = 0; i < total; ++i) ad[i] = pd[i] > 0.0 ? pd[i] : 0.0;
    } else if (net.output_activation == Activation::Tanh) {
      for (std::size_t i = 0; i < total; ++i) ad[i] = std::tanh(pd[i]);
    } else {
      std::copy(pd, pd + total, ad);
    }
  }
}

void backward_batch(const MlpNetwork& net, MlpBatchWorkspace& ws,
                    const Matrix& output_gradient, GradientSet* accum,
                    Matrix* input_gradient) {
  const int L = net.num_layers();
  if (static_cast<int>(ws.acts.size()) != L + 1)
    throw UsageError("backward_batch: workspace does not hold a forward pass");
  const int n = ws.acts[0].rows;
  if (output_gradient.rows != n || output_gradient.cols != net.output_size())
    throw DimensionError("backward_batch: output gradient shape mismatch");
  if (accum != nullptr) check_grad_shapes(net, *accum, "backward_batch");

  ws.delta.resize(L);
  {
    const int out = net.layer_sizes[L];
    Matrix& d = ws.delta[L - 1];
    d.resize(n, out);
    const double* g = output_gradient.data.data();
    double* dd = d.data.data();
    const std::size_t total = d.data.size();
    if (net.output_activation == Activation::Tanh) {
      const double* a = ws.acts[L].data.data();
      for (std::size_t i = 0; i < total; ++i) dd[i] = g[i] * (1.0 - a[i] * a[i]);
    } else {
      std::copy(g, g + total, dd);
    }
  }

  for (int k = L - 1; k >= 0; --k) {
    const int out = net.layer_sizes[k + 1];
    const int in = net.layer_sizes[k];
    const Matrix& d = ws.delta[k];
    if (accum != nullptr) {
      // gw(r,c) += sum_i d(i,r) a(i,c): both factors transposed so the sums
      // run over contiguous rows and gw is streamed exactly once.
      transpose_into(d, ws.tr_d);
      transpose_into(ws.acts[k], ws.tr_a);
      Matrix& gw = accum->weights[k];
      double* gb = accum->biases[k].data();
      const int cfull = in - in % kRowTile;
      for (int r = 0; r < out; ++r) {
        const double* dr = ws.tr_d.row(r);
        double* gwr = gw.row(r);
        double tmp[kRowTile];
        for (int c0 = 0; c0 < cfull; c0 += kRowTile) {
          dot8(ws.tr_a, c0, dr, n, tmp);
          for (int j = 0; j < kRowTile; ++j) gwr[c0 + j] += tmp[j];
        }
        for (int c = cfull; c < in; ++c) gwr[c] += dot(dr, ws.tr_a.row(c), n);
        double s = 0.0;
        for (int i = 0; i < n; ++i) s += dr[i];
        gb[r] += s;
      }
    }
    if (k == 0 && input_gradient == nullptr) break;
    Matrix* prev = (k > 0) ? &ws.delta[k - 1] : input_gradient;
    prev->resize(n, in);
    std::fill(prev->data.begin(), prev->data.end(), 0.0);
    const Matrix& w = net.weights[k];
    const int rfull = out - out % kRowTile;
    for (int r0 = 0; r0 < rfull; r0 += kRowTile)
      for (int i = 0; i < n; ++i) axpy8(w, r0, d.row(i), prev->row(i), in);
    for (int i = 0; i < n; ++i) {
      double* pi = prev->row(i);
      const double* di = d.row(i);
      for (int r = rfull; r < out; ++r) axpy(pi, di[r], w.row(r), in);
    }
    if (k > 0) {
      const double* p = ws.pre[k - 1].data.data();
      double* pd = prev->data.data();
      const std::size_t total = prev->data.size();
      for (std::size_t i = 0; i < total; ++i)
        if (p[i] <= 0.0) pd[i] = 0.0;
    }
  }
}

void backward_input_only(const MlpNetwork& net, MlpWorkspace& ws,
                         std::span<const double> output_gradient,
                         std::vector<double>& input_gradient) {
  backward_core(net, ws, output_gradient, nullptr, input_gradient);
}

BackwardResult backward(const MlpNetwork& net, std::span<const double> input,
                        std::span<const double> output_gradient) {
  BackwardResult res;
  res.gradients = make_gradient_set(net);
  MlpWorkspace ws;
  forward_into(net, input, ws);
  backward_accumulate(net, ws, output_gradient, res.gradients, res.input_gradient);
  return res;
}

AdamState make_adam(const MlpNetwork& net, double learning_rate) {
  if (learning_rate <= 0.0) throw ConfigError("make_adam: learning rate must be positive");
  AdamState s;
  s.learning_rate = learning_rate;
  for (int k = 0; k < net.num_layers(); ++k) {
    s.m_w.emplace_back(net.weights[k].rows, net.weights[k].cols);
    s.v_w.emplace_back(net.weights[k].rows, net.weights[k].cols);
    s.m_b.emplace_back(net.biases[k].size(), 0.0);
    s.v_b.emplace_back(net.biases[k].size(), 0.0);
  }
  return s;
}

namespace {

inline void adam_apply(double* p, double* m, double* v, const double* g, int n,
                       double lr, double b1, double b2, double eps, double bc1,
                       double bc2) {
#pragma omp simd
  for (int i = 0; i < n; ++i) {
    m[i] = b1 * m[i] + (1.0 - b1) * g[i];
    v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
    const double mhat = m[i] / bc1;
    const double vhat = v[i] / bc2;
    p[i] -= lr * mhat / (std::sqrt(vhat) + eps);
  }
}

}  // namespace

void adam_step(MlpNetwork& net, AdamState& state, const GradientSet& grads) {
  check_grad_shapes(net, grads, "adam_step");
  if (state.m_w.size() != net.weights.size())
    throw DimensionError("adam_step: optimizer state does not match network");
  state.step_count += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step_count));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step_count));
  for (int k = 0; k < net.num_layers(); ++k) {
    adam_apply(net.weights[k].data.data(), state.m_w[k].data.data(),
               state.v_w[k].data.data(), grads.weights[k].data.data(),
               static_cast<int>(net.weights[k].data.size()), state.learning_rate,
               state.beta1, state.beta2, state.epsilon, bc1, bc2);
    adam_apply(net.biases[k].data(), state.m_b[k].data(), state.v_b[k].data(),
               grads.biases[k].data(), static_cast<int>(net.biases[k].size()),
               state.learning_rate, state.beta1, state.beta2, state.epsilon, bc1, bc2);
  }
  for (int k = 0; k < net.num_layers(); ++k) {
    for (double v : net.weights[k].data)
      if (!std::isfinite(v))
        throw NumericalError("adam_step: non-finite weight after update");
    for (double v : net.biases[k])
      if (!std::isfinite(v))
        throw NumericalError("adam_step: non-finite bias after update");
  }
}

void polyak_update(MlpNetwork& target, const MlpNetwork& source, double tau) {
  if (!target.same_architecture(source))
    throw DimensionError("polyak_update: architecture mismatch");
  if (tau < 0.0 || tau > 1.0) throw ConfigError("polyak_update: tau outside [0,1]");
  for (int k = 0; k < target.num_layers(); ++k) {
    double* t = target.weights[k].data.data();
    const double* s = source.weights[k].data.data();
    const int n = static_cast<int>(target.weights[k].data.size());
#pragma omp simd
    for (int i = 0; i < n; ++i) t[i] = tau * s[i] + (1.0 - tau) * t[i];
    double* tb = target.biases[k].data();
    const double* sb = source.biases[k].data();
    const int nb = static_cast<int>(target.biases[k].size());
#pragma omp simd
    for (int i = 0; i < nb; ++i) tb[i] = tau * sb[i] + (1.0 - tau) * tb[i];
  }
}

std::vector<double> flatten_params(const MlpNetwork& net) {
  std::vector<double> out;
  out.reserve(net.parameter_count());
  for (int k = 0; k < net.num_layers(); ++k) {
    out.insert(out.end(), net.weights[k].data.begin(), net.weights[k].data.end());
    out.insert(out.end(), net.biases[k].begin(), net.biases[k].end());
  }
  return out;
}

void load_params(MlpNetwork& net, std::span<const double> params) {
  if (params.size() != net.parameter_count())
    throw DimensionError("load_params: expected " +
                         std::to_string(net.parameter_count()) + " values, got " +
                         std::to_string(params.size()));
  std::size_t off = 0;
  for (int k = 0; k < net.num_layers(); ++k) {
    std::memcpy(net.weights[k].data.data(), params.data() + off,
                net.weights[k].data.size() * sizeof(double));
    off += net.weights[k].data.size();
    std::memcpy(net.biases[k].data(), params.data() + off,
                net.biases[k].size() * sizeof(double));
    off += net.biases[k].size();
  }
}

std::vector<double> flatten_adam_moments(const AdamState& state) {
  std::vector<double> out;
  for (std::size_t k = 0; k < state.m_w.size(); ++k) {
    out.insert(out.end(), state.m_w[k].data.begin(), state.m_w[k].data.end());
    out.insert(out.end(), state.m_b[k].begin(), state.m_b[k].end());
    out.insert(out.end(), state.v_w[k].data.begin(), state.v_w[k].data.end());
    out.insert(out.end(), state.v_b[k].begin(), state.v_b[k].end());
  }
  return out;
}

void load_adam_moments(AdamState& state, std::span<const double> moments) {
  std::size_t total = 0;
  for (std::size_t k = 0; k < state.m_w.size(); ++k)
    total += 2 * (state.m_w[k].data.size() + state.m_b[k].size());
  if (moments.size() != total)
    throw DimensionError("load_adam_moments: expected " + std::to_string(total) +
                         " values, got " + std::to_string(moments.size()));
  std::size_t off = 0;
  auto take = [&](double* dst, std::size_t n) {
    std::memcpy(dst, moments.data() + off, n * sizeof(double));
    off += n;
  };
  for (std::size_t k = 0; k < state.m_w.size(); ++k) {
    take(state.m_w[k].data.data(), state.m_w[k].data.size());
    take(state.m_b[k].data(), state.m_b[k].size());
    take(state.v_w[k].data.data(), state.v_w[k].data.size());
    take(state.v_b[k].data(), state.v_b[k].size());
  }
}

std::uint64_t params_hash(const MlpNetwork& net) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (int k = 0; k < net.num_layers(); ++k) {
    h = fnv1a(std::span<const double>(net.weights[k].data), h);
    h = fnv1a(std::span<const double>(net.biases[k]), h);
  }
  return h;
}

}  // namespace dlo
