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

#include "spikeadapt/quantization.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "int_kernels.hpp"
#include "spikeadapt/random.hpp"

namespace spikeadapt {
namespace {

struct LayerCalibration {
  std::int32_t threshold = 0;
  double mean_above = 0.0;  // mean pre-activation of units that fire, 0 if none
};

LayerCalibration calibrate_layer(std::vector<std::int32_t>& positives, double percentile) {
  LayerCalibration c;
  if (positives.empty()) return c;
  const double n = static_cast<double>(positives.size());
  std::size_t rank = static_cast<std::size_t>(std::ceil(percentile / 100.0 * n));
  rank = std::clamp<std::size_t>(rank, 1, positives.size());
  std::nth_element(positives.begin(), positives.begin() + static_cast<long>(rank - 1), positives.end());
  c.threshold = positives[rank - 1];
  double sum = 0.0;
  std::size_t count = 0;
  for (std::int32_t v : positives) {
    if (v > c.threshold) {
      sum += v;
      ++count;
    }
  }
  c.mean_above = count ? sum / static_cast<double>(count) : 0.0;
  return c;
}

void append_positive(std::vector<std::int32_t>& dst, std::span<const std::int32_t> values) {
  for (std::int32_t v : values) {
    if (v > 0) dst.push_back(v);
  }
}

std::vector<std::int32_t> quantize_biases(const Tensor& bias, double unit) {
  std::vector<std::int32_t> out(bias.size());
  for (std::size_t i = 0; i < bias.size(); ++i) out[i] = quantize_bias(bias[i], unit);
  return out;
}

Tensor dequantize_biases(std::span<const std::int32_t> bias, double unit) {
  Tensor t({bias.size()});
  for (std::size_t i = 0; i < bias.size(); ++i) t[i] = bias[i] * unit;
  return t;
}

double spike_value(const LayerCalibration& c, double unit) {
  return (c.mean_above > 0.0 ? c.mean_above : static_cast<double>(c.threshold) + 1.0) * unit;
}

Shape pooled(const Shape& s, std::size_t pool) { return {s[0], s[1] / pool, s[2] / pool}; }

std::int32_t threshold_in_units(double tau, double unit) {
  if (!(unit > 0.0) || tau <= 0.0) return 0;
  const double q = std::floor(tau / unit + 1e-9);
  return static_cast<std::int32_t>(std::min(q, static_cast<double>(std::numeric_limits<std::int32_t>::max())));
}

// Float mirror of a QuantizedCnn used while retraining. `params` holds the
// shadow weights; thresholds and spike values stay fixed in real units.
struct Shadow {
  CnnModel params;
  double input_scale = 1.0 / 127.0;
  double alpha1 = 1.0, alpha2 = 1.0;
  double tau1 = 0.0, tau2 = 0.0;
  double window1 = 1.0, window2 = 1.0;
};

struct FakeQuantized {
  Tensor w1, b1, w2, b2, wd, bd;
};

FakeQuantized fake_quantize(const Shadow& s) {
  FakeQuantized f;
  const QuantizedTensor q1 = quantize_weights(s.params.conv1.weight);
  const QuantizedTensor q2 = quantize_weights(s.params.conv2.weight);
  const QuantizedTensor qd = quantize_weights(s.params.dense.weight);
  f.w1 = q1.dequantize();
  f.w2 = q2.dequantize();
  f.wd = qd.dequantize();
  const double u1 = q1.scale * s.input_scale, u2 = q2.scale * s.alpha1, u3 = qd.scale * s.alpha2;
  f.b1 = dequantize_biases(quantize_biases(s.params.conv1.bias, u1), u1);
  f.b2 = dequantize_biases(quantize_biases(s.params.conv2.bias, u2), u2);
  f.bd = dequantize_biases(quantize_biases(s.params.dense.bias, u3), u3);
  return f;
}

Shadow make_shadow(const QuantizedCnn& q) {
  Shadow s;
  s.input_scale = q.input_scale;
  s.alpha1 = q.spike_value1;
  s.alpha2 = q.spike_value2;
  s.params.input_rows = q.input_rows;
  s.params.input_cols = q.input_cols;
  s.params.arch = q.arch;
  s.params.conv1 = {q.conv1.weight.dequantize(), dequantize_biases(q.conv1.bias, q.conv1_unit())};
  s.params.conv2 = {q.conv2.weight.dequantize(), dequantize_biases(q.conv2.bias, q.conv2_unit())};
  s.params.dense = {q.dense.weight.dequantize(), dequantize_biases(q.dense.bias, q.dense_unit())};
  s.tau1 = q.thresholds.conv1 * q.conv1_unit();
  s.tau2 = q.thresholds.conv2 * q.conv2_unit();
  s.window1 = s.tau1 > 0.0 ? s.tau1 : s.alpha1;
  s.window2 = s.tau2 > 0.0 ? s.tau2 : s.alpha2;
  return s;
}

QuantizedCnn export_shadow(const Shadow& s) {
  QuantizedCnn q;
  q.input_rows = s.params.input_rows;
  q.input_cols = s.params.input_cols;
  q.arch = s.params.arch;
  q.input_scale = s.input_scale;
  q.spike_value1 = s.alpha1;
  q.spike_value2 = s.alpha2;
  q.conv1.weight = quantize_weights(s.params.conv1.weight);
  q.conv2.weight = quantize_weights(s.params.conv2.weight);
  q.dense.weight = quantize_weights(s.params.dense.weight);
  q.conv1.bias = quantize_biases(s.params.conv1.bias, q.conv1_unit());
  q.conv2.bias = quantize_biases(s.params.conv2.bias, q.conv2_unit());
  q.dense.bias = quantize_biases(s.params.dense.bias, q.dense_unit());
  q.thresholds.conv1 = threshold_in_units(s.tau1, q.conv1_unit());
  q.thresholds.conv2 = threshold_in_units(s.tau2, q.conv2_unit());
  return q;
}

// Spike nonlinearity: forward alpha * [z > tau]; backward uses a box of
// half-width `window` around tau with the slope of the matching linear ramp.
Tensor spike_forward(const Tensor& z, double tau, double alpha) {
  Tensor a(z.shape());
  for (std::size_t i = 0; i < z.size(); ++i) a[i] = z[i] > tau ? alpha : 0.0;
  return a;
}

void spike_backward(Tensor& grad, const Tensor& z, double tau, double alpha, double window) {
  const double slope = alpha / (2.0 * window);
  for (std::size_t i = 0; i < z.size(); ++i) grad[i] = std::abs(z[i] - tau) < window ? grad[i] * slope : 0.0;
}

Tensor to_input(const Int8Matrix& m, double input_scale) {
  Tensor t({1, m.rows, m.cols});
  for (std::size_t i = 0; i < m.data.size(); ++i) t[i] = m.data[i] * input_scale;
  return t;
}

double qat_gradients(const Shadow& s, const FakeQuantized& fq, const Int8Matrix& input, int label,
                     std::span<const double> class_weights, CnnGradients& grads) {
  const std::size_t pool = s.params.arch.pool;
  const Tensor x = to_input(input, s.input_scale);
  const Tensor z1 = conv2d_same(x, fq.w1, fq.b1);
  PoolResult p1 = max_pool(spike_forward(z1, s.tau1, s.alpha1), pool);
  const Tensor z2 = conv2d_same(p1.output, fq.w2, fq.b2);
  PoolResult p2 = max_pool(spike_forward(z2, s.tau2, s.alpha2), pool);
  const Dense readout{fq.wd, fq.bd};
  const Tensor logits = dense_forward(p2.output, readout);
  if (!logits.all_finite()) throw DivergenceError("non-finite logits in dense during retraining");

  Tensor g_logits(logits.shape());
  const double loss = weighted_cross_entropy_grad(logits.data(), label, class_weights, g_logits.data());
  const std::size_t classes = logits.size(), nf = p2.output.size();
  Tensor g_p2(p2.output.shape());
  for (std::size_t o = 0; o < classes; ++o) {
    const double g = g_logits[o];
    grads.tensors[5][o] += g;
    double* gw = grads.tensors[4].data().data() + o * nf;
    const double* w = fq.wd.data().data() + o * nf;
    for (std::size_t i = 0; i < nf; ++i) {
      gw[i] += g * p2.output[i];
      g_p2[i] += g * w[i];
    }
  }
  Tensor g_z2 = max_pool_backward(g_p2, p2.argmax, z2.shape());
  spike_backward(g_z2, z2, s.tau2, s.alpha2, s.window2);
  Tensor g_p1;
  conv2d_same_backward(p1.output, fq.w2, g_z2, grads.tensors[2], grads.tensors[3], &g_p1);
  Tensor g_z1 = max_pool_backward(g_p1, p1.argmax, z1.shape());
  spike_backward(g_z1, z1, s.tau1, s.alpha1, s.window1);
  conv2d_same_backward(x, fq.w1, g_z1, grads.tensors[0], grads.tensors[1], nullptr);
  return loss;
}

}  // namespace

Tensor QuantizedTensor::dequantize() const {
  Tensor t(shape);
  for (std::size_t i = 0; i < values.size(); ++i) t[i] = values[i] * scale;
  return t;
}

QuantizedTensor quantize_weights(const Tensor& t, int bits) {
  if (bits != 8) throw ValidationError("quantize_weights: only 8-bit quantization is supported");
  if (!t.all_finite()) throw ValidationError("quantize_weights: non-finite weights");
  QuantizedTensor q;
  q.shape = t.shape();
  const double m = t.max_abs();
  q.scale = m > 0.0 ? m / 127.0 : 1.0;
  q.values.resize(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double r = std::round(t[i] / q.scale);  // half away from zero
    q.values[i] = static_cast<std::int8_t>(std::clamp(r, -127.0, 127.0));
  }
  return q;
}

std::int32_t quantize_bias(double bias, double unit) {
  if (!(unit > 0.0) || !std::isfinite(bias)) return 0;
  const double r = std::round(bias / unit);
  return static_cast<std::int32_t>(std::clamp(r, -static_cast<double>(kBiasLimit), static_cast<double>(kBiasLimit)));
}

Shape QuantizedCnn::conv1_shape() const { return {conv1.out_channels(), input_rows, input_cols}; }
Shape QuantizedCnn::pool1_shape() const { return pooled(conv1_shape(), arch.pool); }
Shape QuantizedCnn::conv2_shape() const {
  const Shape p = pool1_shape();
  return {conv2.out_channels(), p[1], p[2]};
}
Shape QuantizedCnn::pool2_shape() const { return pooled(conv2_shape(), arch.pool); }

SpikePattern binarize(std::span<const std::int32_t> preact, Shape dims, std::int32_t threshold) {
  if (shape_volume(dims) != preact.size()) {
    throw ShapeError("binarize: " + std::to_string(preact.size()) + " values for dims " + shape_string(dims));
  }
  SpikePattern p;
  p.dims = std::move(dims);
  for (std::size_t i = 0; i < preact.size(); ++i) {
    if (preact[i] > threshold) p.active.push_back(static_cast<std::uint32_t>(i));
  }
  return p;
}

namespace {

struct Calibration {
  LayerCalibration layer1;
  LayerCalibration layer2;
};

LayerCalibration calibrate_first(const QuantizedCnn& model, std::span<const Int8Matrix> calibration,
                                 double percentile) {
  std::vector<std::int32_t> positives;
  for (const Int8Matrix& in : calibration) append_positive(positives, detail::layer1_preact(model, in));
  return calibrate_layer(positives, percentile);
}

LayerCalibration calibrate_second(const QuantizedCnn& model, std::span<const Int8Matrix> calibration,
                                  double percentile) {
  std::vector<std::int32_t> positives;
  const Shape c1 = model.conv1_shape();
  for (const Int8Matrix& in : calibration) {
    const auto pre1 = detail::layer1_preact(model, in);
    const auto pooled1 = detail::pool_or(detail::fire(pre1, model.thresholds.conv1), c1[0], c1[1], c1[2], model.arch.pool);
    append_positive(positives, detail::layer2_preact(model, pooled1));
  }
  return calibrate_layer(positives, percentile);
}

void require_calibration(std::span<const Int8Matrix> calibration, double percentile) {
  if (calibration.empty()) throw ValidationError("calibration set is empty");
  if (!(percentile > 0.0 && percentile <= 100.0)) throw ValidationError("percentile must be in (0, 100]");
}

}  // namespace

ThresholdSet calibrate_thresholds(const QuantizedCnn& model, std::span<const Int8Matrix> calibration,
                                  double percentile) {
  require_calibration(calibration, percentile);
  QuantizedCnn work = model;
  work.thresholds.conv1 = calibrate_first(work, calibration, percentile).threshold;
  work.thresholds.conv2 = calibrate_second(work, calibration, percentile).threshold;
  return work.thresholds;
}

QuantizedCnn quantize_cnn(const CnnModel& model, std::span<const Int8Matrix> calibration, double percentile) {
  require_calibration(calibration, percentile);
  QuantizedCnn q;
  q.input_rows = model.input_rows;
  q.input_cols = model.input_cols;
  q.arch = model.arch;
  q.conv1.weight = quantize_weights(model.conv1.weight);
  q.conv1.bias = quantize_biases(model.conv1.bias, q.conv1_unit());
  q.conv2.weight = quantize_weights(model.conv2.weight);
  q.dense.weight = quantize_weights(model.dense.weight);
  q.conv2.bias.assign(q.conv2.out_channels(), 0);
  q.dense.bias.assign(model.arch.classes, 0);

  const LayerCalibration c1 = calibrate_first(q, calibration, percentile);
  q.thresholds.conv1 = c1.threshold;
  q.spike_value1 = spike_value(c1, q.conv1_unit());
  q.conv2.bias = quantize_biases(model.conv2.bias, q.conv2_unit());

  const LayerCalibration c2 = calibrate_second(q, calibration, percentile);
  q.thresholds.conv2 = c2.threshold;
  q.spike_value2 = spike_value(c2, q.conv2_unit());
  q.dense.bias = quantize_biases(model.dense.bias, q.dense_unit());
  return q;
}

Tensor input_tensor(const Int8Matrix& m, double input_scale) { return to_input(m, input_scale); }

Int8Matrix quantize_data(const FloatMatrix& segment) {
  Int8Matrix out(segment.rows, segment.cols, 0);
  double m = 0.0;
  for (double v : segment.data) {
    if (!std::isfinite(v)) throw ValidationError("quantize_data: non-finite sample");
    m = std::max(m, std::abs(v));
  }
  if (m == 0.0) return out;
  for (std::size_t i = 0; i < segment.data.size(); ++i) {
    const double r = std::round(127.0 * segment.data[i] / m);
    out.data[i] = static_cast<std::int8_t>(std::clamp(r, -127.0, 127.0));
  }
  return out;
}

std::vector<std::int32_t> quantized_logits(const QuantizedCnn& model, const Int8Matrix& input) {
  const detail::IntForward f = detail::int_forward(model, input);
  const std::size_t classes = model.dense.bias.size(), nf = f.pooled2.size();
  std::vector<std::int32_t> logits(model.dense.bias);
  for (std::size_t o = 0; o < classes; ++o) {
    const std::int8_t* w = model.dense.weight.values.data() + o * nf;
    std::int32_t acc = 0;
    for (std::size_t i = 0; i < nf; ++i) acc += f.pooled2[i] ? w[i] : 0;
    logits[o] += acc;
  }
  return logits;
}

std::vector<int> quantized_predict(const QuantizedCnn& model, std::span<const Int8Matrix> inputs) {
  std::vector<int> out;
  out.reserve(inputs.size());
  for (const Int8Matrix& in : inputs) {
    const auto logits = quantized_logits(model, in);
    out.push_back(static_cast<int>(std::max_element(logits.begin(), logits.end()) - logits.begin()));
  }
  return out;
}

void QatConfig::validate() const {
  if (batch_size < 1) throw ValidationError("qat config: batch size must be >= 1");
  if (!(learning_rate >= 0.0)) throw ValidationError("qat config: learning rate must be >= 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ValidationError("qat config: momentum must be in [0,1)");
  for (double w : class_weights) {
    if (!(w > 0.0)) throw ValidationError("qat config: class weights must be positive");
  }
}

bool meets_target(const MetricsReport& m, double target) {
  return m.accuracy > target && m.tpr && *m.tpr > target && m.tnr && *m.tnr > target;
}

QatResult qat_retrain(const QuantizedCnn& model, std::span<const Int8Matrix> inputs, std::span<const int> labels,
                      const QatConfig& config) {
  config.validate();
  if (inputs.empty()) throw ValidationError("qat_retrain: empty dataset");
  if (inputs.size() != labels.size()) throw ValidationError("qat_retrain: inputs and labels differ in length");
  if (config.class_weights.size() != model.arch.classes) {
    throw ValidationError("qat_retrain: need one class weight per class");
  }

  QatResult result;
  result.model = model;
  result.history.push_back(compute_metrics(quantized_predict(model, inputs), labels));
  if (meets_target(result.history.back(), config.target)) {
    result.reached_target = true;
    return result;
  }

  Shadow shadow = make_shadow(model);
  MomentumSgd optimizer(shadow.params);
  std::vector<std::size_t> order(inputs.size());
  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    Rng rng(derive_seed(config.seed, {epoch}));
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      const FakeQuantized fq = fake_quantize(shadow);
      CnnGradients grads = CnnGradients::zeros_like(shadow.params);
      double loss = 0.0;
      for (std::size_t i = start; i < end; ++i) {
        loss += qat_gradients(shadow, fq, inputs[order[i]], labels[order[i]], config.class_weights, grads);
      }
      if (!std::isfinite(loss)) throw DivergenceError("non-finite loss during retraining");
      grads.scale(1.0 / static_cast<double>(end - start));
      optimizer.apply(shadow.params, grads, config.learning_rate, config.momentum);
    }
    result.model = export_shadow(shadow);
    result.epochs_trained = epoch;
    result.history.push_back(compute_metrics(quantized_predict(result.model, inputs), labels));
    if (meets_target(result.history.back(), config.target)) {
      result.reached_target = true;
      break;
    }
  }
  return result;
}

}  // namespace spikeadapt
