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

#include "spikeadapt/csnn.hpp"

#include <algorithm>
#include <bit>
#include <string>

#include "int_kernels.hpp"
#include "spikeadapt/error.hpp"

namespace spikeadapt {

namespace {

std::uint64_t conv_macs(const QuantizedConv& conv, const Shape& out) {
  const std::uint64_t k = conv.kernel();
  return static_cast<std::uint64_t>(out[0]) * out[1] * out[2] * k * k * conv.in_channels();
}

OpCount dense_count(std::uint64_t macs) { return OpCount{macs, 0, macs}; }

void check_chain(const QuantizedCnn& net) {
  if (net.conv1.weight.shape.size() != 4 || net.conv2.weight.shape.size() != 4) {
    throw ShapeError("convolution weights must be rank 4");
  }
  if (net.conv1.in_channels() != 1) throw ShapeError("conv1 must take a single input channel");
  if (net.conv2.in_channels() != net.conv1.out_channels()) {
    throw ShapeError("conv2 expects " + std::to_string(net.conv2.in_channels()) + " channels, conv1 produces " +
                     std::to_string(net.conv1.out_channels()));
  }
  if (net.conv1.bias.size() != net.conv1.out_channels() || net.conv2.bias.size() != net.conv2.out_channels()) {
    throw ShapeError("convolution bias length differs from filter count");
  }
  if (net.arch.pool == 0) throw ShapeError("pool size must be positive");
  if (net.feature_count() == 0) {
    throw ShapeError("input " + std::to_string(net.input_rows) + "x" + std::to_string(net.input_cols) +
                     " leaves no features after pooling");
  }
}

void check_edge(const QuantizedCnn& net, const EdgeLayer& edge) {
  if (edge.input_dim() != net.feature_count()) {
    throw ShapeError("edge layer input dimension " + std::to_string(edge.input_dim()) +
                     " does not match flattened feature size " + std::to_string(net.feature_count()));
  }
}

// OR-pooling computed from the active list of a [C,H,W] map.
SpikePattern pool_events(const SpikePattern& in, std::size_t pool) {
  const std::size_t C = in.dims[0], H = in.dims[1], W = in.dims[2];
  const std::size_t OH = H / pool, OW = W / pool;
  SpikePattern out;
  out.dims = {C, OH, OW};
  for (auto idx : in.active) {
    const std::size_t c = idx / (H * W), y = idx / W % H, x = idx % W;
    const std::size_t oy = y / pool, ox = x / pool;
    if (oy >= OH || ox >= OW) continue;
    out.active.push_back(static_cast<std::uint32_t>((c * OH + oy) * OW + ox));
  }
  std::sort(out.active.begin(), out.active.end());
  out.active.erase(std::unique(out.active.begin(), out.active.end()), out.active.end());
  return out;
}

// Scatters each spike of a [C,H,W] pattern through the kernel into a halo
// padded, filter-innermost accumulator, then crops the same-size interior.
std::vector<std::int32_t> scatter_conv(const SpikePattern& in, const QuantizedConv& conv, OpCount& ops) {
  const std::size_t C = in.dims[0], H = in.dims[1], W = in.dims[2];
  const std::size_t F = conv.out_channels(), k = conv.kernel(), pad = k / 2;
  const std::size_t Hp = H + 2 * pad, Wp = W + 2 * pad;
  // [C, k, k, F]
  std::vector<std::int32_t> wt(C * k * k * F);
  const std::int8_t* w = conv.weight.values.data();
  for (std::size_t f = 0; f < F; ++f) {
    for (std::size_t t = 0; t < C * k * k; ++t) wt[t * F + f] = w[f * C * k * k + t];
  }
  std::vector<std::int32_t> halo(Hp * Wp * F, 0);
  for (auto idx : in.active) {
    const std::size_t c = idx / (H * W), iy = idx / W % H, ix = idx % W;
    for (std::size_t ky = 0; ky < k; ++ky) {
      for (std::size_t kx = 0; kx < k; ++kx) {
        // output (iy + pad - ky, ix + pad - kx) in halo coordinates is shifted by +pad
        std::int32_t* dst = halo.data() + ((iy + 2 * pad - ky) * Wp + ix + 2 * pad - kx) * F;
        const std::int32_t* src = wt.data() + ((c * k + ky) * k + kx) * F;
        for (std::size_t f = 0; f < F; ++f) dst[f] += src[f];
      }
    }
  }
  const std::uint64_t performed = static_cast<std::uint64_t>(in.count()) * F * k * k;
  ops.event_accumulates += performed;
  ops.weight_fetches += performed;

  std::vector<std::int32_t> out(F * H * W);
  for (std::size_t y = 0; y < H; ++y) {
    for (std::size_t x = 0; x < W; ++x) {
      const std::int32_t* src = halo.data() + ((y + pad) * Wp + x + pad) * F;
      for (std::size_t f = 0; f < F; ++f) out[(f * H + y) * W + x] = src[f] + conv.bias[f];
    }
  }
  return out;
}

struct EventFeatures {
  SpikeTrace trace;
  OpCount conv1;
  OpCount conv2;
};

EventFeatures event_features(const QuantizedCnn& net, const Int8Matrix& input) {
  EventFeatures r;
  const auto pre1 = detail::layer1_preact(net, input);
  r.conv1 = dense_count(conv_macs(net.conv1, net.conv1_shape()));
  r.trace.conv1 = binarize(pre1, net.conv1_shape(), net.thresholds.conv1);
  r.trace.pool1 = pool_events(r.trace.conv1, net.arch.pool);
  const auto pre2 = scatter_conv(r.trace.pool1, net.conv2, r.conv2);
  r.trace.conv2 = binarize(pre2, net.conv2_shape(), net.thresholds.conv2);
  r.trace.pool2 = pool_events(r.trace.conv2, net.arch.pool);
  return r;
}

}  // namespace

void CsnnModel::index_edge() {
  fan_out_.clear();
  fan_out_words_ = 0;
  if (!edge_) return;
  const std::size_t n = edge_->num_neurons(), d = edge_->input_dim(), wpr = edge_->words_per_row();
  fan_out_words_ = (n + 63) / 64;
  fan_out_.assign(d * fan_out_words_, 0);
  const auto bits = edge_->bits();
  for (std::size_t j = 0; j < n; ++j) {
    const std::uint64_t* row = bits.data() + j * wpr;
    for (std::size_t w = 0; w < wpr; ++w) {
      for (std::uint64_t v = row[w]; v != 0; v &= v - 1) {
        const std::size_t i = w * 64 + static_cast<std::size_t>(std::countr_zero(v));
        fan_out_[i * fan_out_words_ + j / 64] |= std::uint64_t{1} << (j % 64);
      }
    }
  }
}

CsnnModel convert_to_csnn(QuantizedCnn network, std::optional<EdgeLayer> edge) {
  check_chain(network);
  if (edge) check_edge(network, *edge);
  CsnnModel m;
  m.network_ = std::move(network);
  m.edge_ = std::move(edge);
  m.index_edge();
  return m;
}

void attach_edge(CsnnModel& model, EdgeLayer edge) {
  check_edge(model.network_, edge);
  model.edge_ = std::move(edge);
  model.index_edge();
}

InferenceResult infer_dense(const CsnnModel& model, const Int8Matrix& input) {
  const QuantizedCnn& net = model.network();
  const auto fwd = detail::int_forward(net, input);
  InferenceResult r;
  r.trace.conv1 = binarize(fwd.preact1, net.conv1_shape(), net.thresholds.conv1);
  r.trace.pool1 = SpikePattern::from_dense(net.pool1_shape(), fwd.pooled1);
  r.trace.conv2 = binarize(fwd.preact2, net.conv2_shape(), net.thresholds.conv2);
  r.trace.pool2 = SpikePattern::from_dense(net.pool2_shape(), fwd.pooled2);
  r.ops.conv1 = dense_count(conv_macs(net.conv1, net.conv1_shape()));
  r.ops.conv2 = dense_count(conv_macs(net.conv2, net.conv2_shape()));
  if (model.has_edge()) {
    Classification c = classify(*model.edge(), r.trace.pool2);
    r.potentials = std::move(c.potentials);
    r.label = c.label;
    r.ops.readout = dense_count(static_cast<std::uint64_t>(model.edge()->num_neurons()) * model.edge()->input_dim());
  }
  return r;
}

InferenceResult infer_event(const CsnnModel& model, const Int8Matrix& input) {
  EventFeatures f = event_features(model.network(), input);
  InferenceResult r;
  r.trace = std::move(f.trace);
  r.ops.conv1 = f.conv1;
  r.ops.conv2 = f.conv2;
  if (model.has_edge()) {
    const EdgeLayer& edge = *model.edge();
    const std::size_t n = edge.num_neurons();
    r.potentials.assign(n, 0);
    std::uint64_t performed = 0;
    // Bit-sliced counters: plane p holds bit p of every neuron's potential.
    const std::size_t words = model.fan_out(0).size();
    const std::size_t planes = static_cast<std::size_t>(std::bit_width(r.trace.pool2.active.size())) + 1;
    std::vector<std::uint64_t> counter(planes * words, 0);
    for (auto i : r.trace.pool2.active) {
      const auto col = model.fan_out(i);
      for (std::size_t w = 0; w < words; ++w) {
        std::uint64_t carry = col[w];
        performed += static_cast<std::uint64_t>(std::popcount(carry));
        for (std::size_t p = 0; carry != 0; ++p) {
          std::uint64_t& plane = counter[p * words + w];
          const std::uint64_t next = plane & carry;
          plane ^= carry;
          carry = next;
        }
      }
    }
    for (std::size_t p = 0; p < planes; ++p) {
      for (std::size_t j = 0; j < n; ++j) {
        r.potentials[j] += static_cast<std::int32_t>((counter[p * words + j / 64] >> (j % 64)) & 1u) << p;
      }
    }
    r.ops.readout = OpCount{0, performed, performed};
    const auto best = std::max_element(r.potentials.begin(), r.potentials.end());
    r.label = edge.class_of(static_cast<std::size_t>(best - r.potentials.begin()));
  }
  return r;
}

SpikePattern extract_features(const CsnnModel& model, const Int8Matrix& input) {
  SpikePattern p = event_features(model.network(), input).trace.pool2;
  p.dims = {model.feature_count()};
  return p;
}

}  // namespace spikeadapt
