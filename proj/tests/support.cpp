/*
 * Copyright 2026 The spikeadapt Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */


#include "support.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

namespace spikeadapt::testing {

Tensor random_tensor(Rng& rng, Shape shape, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = u(rng);
  return t;
}

CnnModel micro_cnn(Rng& rng) {
  std::uniform_int_distribution<std::size_t> rows(4, 7), cols(5, 9), filters(2, 3);
  CnnArchitecture arch;
  arch.conv1_filters = filters(rng);
  arch.conv1_kernel = 3;
  arch.conv2_filters = filters(rng);
  arch.conv2_kernel = 3;
  arch.pool = 2;
  CnnModel m = make_cnn(rows(rng), cols(rng), rng(), arch);
  m.conv1.bias = random_tensor(rng, m.conv1.bias.shape(), -0.2, 0.2);
  m.conv2.bias = random_tensor(rng, m.conv2.bias.shape(), -0.2, 0.2);
  m.dense.bias = random_tensor(rng, m.dense.bias.shape(), -0.2, 0.2);
  return m;
}

namespace {

Tensor naive_conv(const Tensor& in, const Tensor& w, const Tensor& b) {
  const std::size_t C = in.extent(0), H = in.extent(1), W = in.extent(2);
  const std::size_t F = w.extent(0), k = w.extent(2);
  const long pad = static_cast<long>(k / 2);
  Tensor out({F, H, W});
  for (std::size_t f = 0; f < F; ++f)
    for (std::size_t y = 0; y < H; ++y)
      for (std::size_t x = 0; x < W; ++x) {
        double s = b[f];
        for (std::size_t c = 0; c < C; ++c)
          for (std::size_t ky = 0; ky < k; ++ky)
            for (std::size_t kx = 0; kx < k; ++kx) {
              const long iy = static_cast<long>(y + ky) - pad, ix = static_cast<long>(x + kx) - pad;
              if (iy < 0 || ix < 0 || iy >= static_cast<long>(H) || ix >= static_cast<long>(W)) continue;
              s += w[((f * C + c) * k + ky) * k + kx] * in.at(c, static_cast<std::size_t>(iy), static_cast<std::size_t>(ix));
            }
        out.at(f, y, x) = s;
      }
  return out;
}

Tensor naive_relu_pool(const Tensor& in, std::size_t p) {
  const std::size_t C = in.extent(0), H = in.extent(1) / p, W = in.extent(2) / p;
  Tensor out({C, H, W});
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t y = 0; y < H; ++y)
      for (std::size_t x = 0; x < W; ++x) {
        double m = 0.0;
        for (std::size_t dy = 0; dy < p; ++dy)
          for (std::size_t dx = 0; dx < p; ++dx) m = std::max(m, in.at(c, y * p + dy, x * p + dx));
        out.at(c, y, x) = m;
      }
  return out;
}

double loss_of(const CnnModel& m, const Tensor& x, int label, const std::vector<double>& cw) {
  const Tensor logits = forward_cnn(m, x);
  return weighted_cross_entropy(logits.data(), label, cw);
}

}  // namespace

std::vector<double> naive_forward(const CnnModel& model, const Tensor& input) {
  const Tensor x = input.reshaped({1, model.input_rows, model.input_cols});
  const Tensor p1 = naive_relu_pool(naive_conv(x, model.conv1.weight, model.conv1.bias), model.arch.pool);
  const Tensor p2 = naive_relu_pool(naive_conv(p1, model.conv2.weight, model.conv2.bias), model.arch.pool);
  std::vector<double> logits(model.arch.classes);
  for (std::size_t o = 0; o < logits.size(); ++o) {
    double s = model.dense.bias[o];
    for (std::size_t i = 0; i < p2.size(); ++i) s += model.dense.weight[o * p2.size() + i] * p2[i];
    logits[o] = s;
  }
  return logits;
}

std::vector<GradientCheck> check_gradients(std::uint64_t seed, double h) {
  Rng rng(seed);
  CnnModel m = micro_cnn(rng);
  const Tensor x = random_tensor(rng, m.input_shape());
  const int label = static_cast<int>(rng() % 2);
  const std::vector<double> cw{1.3, 0.7};

  CnnGradients g = CnnGradients::zeros_like(m);
  accumulate_gradients(m, Example{x, label}, cw, g);

  std::vector<GradientCheck> out;
  auto params = parameters(m);
  for (std::size_t p = 0; p < params.size(); ++p) {
    GradientCheck c{params[p].name, 0, 0.0};
    Tensor& t = *params[p].tensor;
    for (std::size_t i = 0; i < t.size(); ++i) {
      const double keep = t[i];
      t[i] = keep + h;
      const double up = loss_of(m, x, label, cw);
      t[i] = keep - h;
      const double down = loss_of(m, x, label, cw);
      t[i] = keep;
      const double numeric = (up - down) / (2.0 * h);
      const double analytic = g.tensors[p][i];
      const double scale = std::max({std::abs(numeric), std::abs(analytic), 1e-6});
      c.max_relative_error = std::max(c.max_relative_error, std::abs(numeric - analytic) / scale);
      ++c.checked;
    }
    out.push_back(c);
  }
  return out;
}

namespace {

std::vector<std::int64_t> int_conv(const std::vector<std::int64_t>& in, std::size_t C, std::size_t H, std::size_t W,
                                   const QuantizedConv& conv) {
  const std::size_t F = conv.out_channels(), k = conv.kernel();
  const long pad = static_cast<long>(k / 2);
  std::vector<std::int64_t> out(F * H * W);
  for (std::size_t f = 0; f < F; ++f)
    for (std::size_t y = 0; y < H; ++y)
      for (std::size_t x = 0; x < W; ++x) {
        std::int64_t s = conv.bias[f];
        for (std::size_t c = 0; c < C; ++c)
          for (std::size_t ky = 0; ky < k; ++ky)
            for (std::size_t kx = 0; kx < k; ++kx) {
              const long iy = static_cast<long>(y + ky) - pad, ix = static_cast<long>(x + kx) - pad;
              if (iy < 0 || ix < 0 || iy >= static_cast<long>(H) || ix >= static_cast<long>(W)) continue;
              s += static_cast<std::int64_t>(conv.weight.values[((f * C + c) * k + ky) * k + kx]) *
                   in[(c * H + static_cast<std::size_t>(iy)) * W + static_cast<std::size_t>(ix)];
            }
        out[(f * H + y) * W + x] = s;
      }
  return out;
}

std::vector<std::uint8_t> or_pool(const std::vector<std::uint8_t>& s, std::size_t C, std::size_t H, std::size_t W,
                                  std::size_t p) {
  std::vector<std::uint8_t> out(C * (H / p) * (W / p), 0);
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t y = 0; y < (H / p) * p; ++y)
      for (std::size_t x = 0; x < (W / p) * p; ++x)
        if (s[(c * H + y) * W + x]) out[(c * (H / p) + y / p) * (W / p) + x / p] = 1;
  return out;
}

}  // namespace

IntTrace int_forward_oracle(const QuantizedCnn& q, const Int8Matrix& input) {
  IntTrace t;
  const std::size_t H = q.input_rows, W = q.input_cols, p = q.arch.pool;
  const std::size_t F1 = q.conv1.out_channels(), F2 = q.conv2.out_channels();
  t.preact1 = int_conv(std::vector<std::int64_t>(input.data.begin(), input.data.end()), 1, H, W, q.conv1);
  for (auto v : t.preact1) t.spikes1.push_back(v > q.thresholds.conv1 ? 1 : 0);
  t.pooled1 = or_pool(t.spikes1, F1, H, W, p);
  t.preact2 = int_conv(std::vector<std::int64_t>(t.pooled1.begin(), t.pooled1.end()), F1, H / p, W / p, q.conv2);
  for (auto v : t.preact2) t.spikes2.push_back(v > q.thresholds.conv2 ? 1 : 0);
  t.pooled2 = or_pool(t.spikes2, F2, H / p, W / p, p);
  return t;
}

std::int64_t percentile_oracle(std::vector<std::int64_t> values, double percentile) {
  std::vector<std::int64_t> pos;
  for (auto v : values) {
    if (v > 0) pos.push_back(v);
  }
  if (pos.empty()) return 0;
  std::sort(pos.begin(), pos.end());
  const double rank = std::ceil(percentile / 100.0 * static_cast<double>(pos.size()));
  const std::size_t idx = rank < 1.0 ? 0 : static_cast<std::size_t>(rank) - 1;
  return pos[std::min(idx, pos.size() - 1)];
}

int brute_force_class(const EdgeLayer& layer, const SpikePattern& pattern, std::vector<std::int32_t>* potentials) {
  std::int32_t best = -1;
  std::size_t winner = 0;
  for (std::size_t n = 0; n < layer.num_neurons(); ++n) {
    std::int32_t p = 0;
    for (auto i : pattern.active) p += layer.connected(n, i) ? 1 : 0;
    if (potentials) potentials->push_back(p);
    if (p > best) {
      best = p;
      winner = n;
    }
  }
  return layer.class_of(winner);
}

SpikePattern random_pattern(Rng& rng, std::size_t dim, double density) {
  std::bernoulli_distribution on(density);
  SpikePattern p;
  p.dims = {dim};
  for (std::size_t i = 0; i < dim; ++i) {
    if (on(rng)) p.active.push_back(static_cast<std::uint32_t>(i));
  }
  return p;
}

double welch_p_quadrature(const std::vector<double>& a, const std::vector<double>& b) {
  auto moments = [](const std::vector<double>& v) {
    const double n = static_cast<double>(v.size());
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return std::pair{mean, ss / (n - 1.0)};
  };
  const auto [ma, va] = moments(a);
  const auto [mb, vb] = moments(b);
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  const double se2 = va / na + vb / nb;
  const double t = std::abs(ma - mb) / std::sqrt(se2);
  const double nu = se2 * se2 / ((va / na) * (va / na) / (na - 1.0) + (vb / nb) * (vb / nb) / (nb - 1.0));
  const double log_c = std::lgamma((nu + 1.0) / 2.0) - std::lgamma(nu / 2.0) - 0.5 * std::log(nu * std::numbers::pi);
  auto density = [&](double x) { return std::exp(log_c - (nu + 1.0) / 2.0 * std::log1p(x * x / nu)); };
  // Simpson's rule on [0, t]; p = 1 - 2 * integral.
  const int n = 20000;
  const double step = t / n;
  double s = density(0.0) + density(t);
  for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * density(i * step);
  return 1.0 - 2.0 * s * step / 3.0;
}

}  // namespace spikeadapt::testing
