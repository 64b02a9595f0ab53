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

#pragma once

#include "json.hpp"
#include "spikeadapt/cnn.hpp"
#include "spikeadapt/edge_layer.hpp"
#include "spikeadapt/eeg.hpp"
#include "spikeadapt/quantization.hpp"
#include "spikeadapt/stats.hpp"

namespace spikeadapt {

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(GeneratorConfig, participants, countdown_trials, stressed_trials,
                                                stoplight_trials, amplitude_min_uv, amplitude_max_uv,
                                                onset_jitter_ms, noise_sigma_uv, alpha_amplitude_uv,
                                                drift_sigma_uv, drift_tau_ms, drift_shared,
                                                stress_multiplier, seed)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(TrainConfig, epochs, learning_rate, momentum, batch_size, seed,
                                                class_weights)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(QatConfig, max_epochs, target, learning_rate, momentum, batch_size,
                                                seed, class_weights)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(EdgeLearnConfig, initial_plasticity, learning_competition,
                                                min_plasticity, plasticity_decay, neurons_per_class, num_classes,
                                                seed)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(CostModel, e_mac, e_acc, e_fetch)

namespace detail {

/// Throws ValidationError for keys of `j` that `reference` lacks, recursing
/// into nested objects.
void reject_unknown_keys(const nlohmann::json& j, const nlohmann::json& reference, const std::string& where);

}  // namespace detail
}  // namespace spikeadapt
