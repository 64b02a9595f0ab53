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

#include "int_kernels.hpp"

#include <algorithm>
#include <string>

namespace spikeadapt::detail {

void conv_same_int(std::span<const std::int32_t> input, std::size_t H, std::size_t W, const QuantizedConv& conv,
                   std::span<std::int32_t> out) {
  const std::size_t F = conv.out_channels(), C = conv.in_channels(), k = conv.kernel();
  const long pad = static_cast<long>(k / 2);
  const std::int8_t* w = conv.weight.values.data();
  for (std::size_t f = 0; f < F; ++f) {
    std::int32_t* o = out.data() + f * H * W;
    std::fill(o, o + H * W, conv.bias[f]);
    for (std::size_t c = 0; c < C; ++c) {
      const std::int32_t* in = input.data() + c * H * W;
      for (std::size_t ky = 0; ky < k; ++ky) {
        for (std::size_t kx = 0; kx < k; ++kx) {
          const std::int32_t wv = w[((f * C + c) * k + ky) * k + kx];
          if (wv == 0) continue;
          const long dx = static_cast<long>(kx) - pad;
          const long x_begin = std::max(0L, -dx);
          const long x_end = std::min(static_cast<long>(W), static_cast<long>(W) - dx);
          for (std::size_t y = 0; y < H; ++y) {
            const long iy = static_cast<long>(y + ky) - pad;
            if (iy < 0 || iy >= static_cast<long>(H)) continue;
            const std::int32_t* src = in + static_cast<std::size_t>(iy) * W + dx;
            std::int32_t* dst = o + y * W;
            for (long x = x_begin; x < x_end; ++x) dst[x] += wv * src[x];
          }
        }
      }
    }
  }
}

std::vector<std::uint8_t> pool_or(std::span<const std::uint8_t> in, std::size_t C, std::size_t H, std::size_t W,
                                  std::size_t pool) {
  const std::size_t OH = H / pool, OW = W / pool;
  std::vector<std::uint8_t> out(C * OH * OW, 0);
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t oy = 0; oy < OH; ++oy) {
      std::uint8_t* dst = out.data() + (c * OH + oy) * OW;
      for (std::size_t dy = 0; dy < pool; ++dy) {
        const std::uint8_t* src = in.data() + (c * H + oy * pool + dy) * W;
        for (std::size_t ox = 0; ox < OW; ++ox) {
          for (std::size_t dx = 0; dx < pool; ++dx) dst[ox] |= src[ox * pool + dx];
        }
      }
    }
  }
  return out;
}

std::vector<std::uint8_t> fire(std::span<const std::int32_t> preact, std::int32_t threshold) {
  std::vector<std::uint8_t> s(preact.size());
  for (std::size_t i = 0; i < preact.size(); ++i) s[i] = preact[i] > threshold ? 1 : 0;
  return s;
}

std::vector<std::int32_t> widen(const Int8Matrix& input) { return {input.data.begin(), input.data.end()}; }

std::vector<std::int32_t> widen(std::span<const std::uint8_t> spikes) { return {spikes.begin(), spikes.end()}; }

void require_input_shape(const QuantizedCnn& model, const Int8Matrix& input) {
  if (input.rows != model.input_rows || input.cols != model.input_cols) {
    throw ShapeError("input is " + std::to_string(input.rows) + "x" + std::to_string(input.cols) +
                     ", model expects " + std::to_string(model.input_rows) + "x" + std::to_string(model.input_cols));
  }
}

std::vector<std::int32_t> layer1_preact(const QuantizedCnn& model, const Int8Matrix& input) {
  require_input_shape(model, input);
  std::vector<std::int32_t> pre(shape_volume(model.conv1_shape()));
  conv_same_int(widen(input), input.rows, input.cols, model.conv1, pre);
  return pre;
}

std::vector<std::int32_t> layer2_preact(const QuantizedCnn& model, std::span<const std::uint8_t> pooled1) {
  const Shape p1 = model.pool1_shape();
  std::vector<std::int32_t> pre(shape_volume(model.conv2_shape()));
  conv_same_int(widen(pooled1), p1[1], p1[2], model.conv2, pre);
  return pre;
}

IntForward int_forward(const QuantizedCnn& model, const Int8Matrix& input) {
  IntForward r;
  r.preact1 = layer1_preact(model, input);
  const Shape c1 = model.conv1_shape();
  r.pooled1 = pool_or(fire(r.preact1, model.thresholds.conv1), c1[0], c1[1], c1[2], model.arch.pool);
  r.preact2 = layer2_preact(model, r.pooled1);
  const Shape c2 = model.conv2_shape();
  r.pooled2 = pool_or(fire(r.preact2, model.thresholds.conv2), c2[0], c2[1], c2[2], model.arch.pool);
  return r;
}

}  // namespace spikeadapt::detail
