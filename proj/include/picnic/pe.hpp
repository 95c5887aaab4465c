// Copyright 2026 the picnic-sim authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "picnic/common.hpp"
#include "picnic/config.hpp"

namespace picnic {

struct DoubleProgramError : Error {
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Weight-stationary crossbar. Weights are quantized conductance levels
// (int8 by convention), programmed once; smac() streams an input vector and
// returns W^T x with optional ADC quantization and calibration-offset
// compensation. Column j of the output is sum_i W[i][j] * x[i].
// ---------------------------------------------------------------------------

class PeArray {
 public:
  explicit PeArray(const HardwareConfig& hw)
      : size_(hw.pe_array),
        adc_bits_(hw.adc_bits),
        full_scale_(hw.adc_full_scale),
        weight_shift_(hw.numeric_mode == NumericMode::kFixed ? hw.weight_frac_bits : 0) {}

  unsigned size() const { return size_; }
  bool programmed() const { return programmed_; }
  unsigned program_count() const { return program_count_; }

  // One-time programming. The calibration pass runs here: per-column offsets
  // are captured so the post-ADC compensation step can cancel them.
  void program(const std::vector<std::int32_t>& weights,
               const std::vector<Value>& calibration_offsets = {}) {
    if (programmed_) throw DoubleProgramError("PE already programmed; reset() first");
    if (weights.size() != std::size_t(size_) * size_)
      throw Error("weight matrix does not match the array size");
    weights_ = weights;
    analog_offsets_.assign(size_, 0);
    for (std::size_t j = 0; j < calibration_offsets.size() && j < analog_offsets_.size(); ++j)
      analog_offsets_[j] = calibration_offsets[j];
    if (adc_bits_ > 0 && full_scale_ <= 0.0) {
      // Calibrate the ADC swing to the largest column magnitude at unit input.
      double fs = 0.0;
      for (unsigned j = 0; j < size_; ++j) {
        double col = 0.0;
        for (unsigned i = 0; i < size_; ++i)
          col += std::abs(static_cast<double>(weights_[std::size_t(i) * size_ + j]));
        fs = std::max(fs, col);
      }
      calibrated_full_scale_ = std::max(fs, 1.0);
    } else {
      calibrated_full_scale_ = full_scale_;
    }
    // The calibration pass reads each column at zero input, so the stored
    // offsets are the ADC's view of the analog artifact. That is what makes
    // the compensation below cancel exactly.
    stored_offsets_.resize(size_);
    for (unsigned j = 0; j < size_; ++j)
      stored_offsets_[j] = adc_bits_ > 0 ? quantize(analog_offsets_[j]) : analog_offsets_[j];
    programmed_ = true;
    ++program_count_;
  }

  // Row-major int8 tile as produced by the mapper's placement files.
  void program_tile(const std::vector<std::int8_t>& tile,
                    const std::vector<Value>& calibration_offsets = {}) {
    std::vector<std::int32_t> w(tile.begin(), tile.end());
    program(w, calibration_offsets);
  }

  // Explicit reset; re-programming cost is charged by the energy ledger via
  // program_count().
  void reset() {
    programmed_ = false;
    weights_.clear();
    analog_offsets_.clear();
    stored_offsets_.clear();
  }

  // y = compensate(quantize_adc(W^T x + offsets)). Inputs shorter than the
  // array are zero-padded; longer inputs are a wiring bug.
  std::vector<Value> smac(const std::vector<Value>& x) const {
    if (!programmed_) throw Error("smac on an unprogrammed PE");
    if (x.size() > size_) throw Error("smac input length exceeds the array");
    std::vector<Value> y(size_, 0);
    for (unsigned j = 0; j < size_; ++j) {
      Value acc = 0;
      for (std::size_t i = 0; i < x.size(); ++i)
        acc += static_cast<Value>(weights_[i * size_ + j]) * x[i];
      acc = shift_round(acc, weight_shift_);
      acc += analog_offsets_[j];  // analog artifact enters before the ADC
      if (adc_bits_ > 0) acc = quantize(acc);
      y[j] = acc - stored_offsets_[j];
    }
    return y;
  }

  const std::vector<std::int32_t>& weights() const { return weights_; }
  const std::vector<Value>& offsets() const { return stored_offsets_; }
  double full_scale() const { return calibrated_full_scale_; }

 private:
  Value quantize(Value v) const {
    // Uniform mid-rise quantizer over [-FS, FS): error <= 0.5 LSB in range.
    const double fs = calibrated_full_scale_;
    const double step = fs / static_cast<double>(Value{1} << (adc_bits_ - 1));
    const double lo = -std::ldexp(1.0, static_cast<int>(adc_bits_) - 1);
    const double hi = -lo - 1;
    double code = std::nearbyint(static_cast<double>(v) / step);
    code = std::min(std::max(code, lo), hi);
    return static_cast<Value>(code * step >= 0 ? code * step + 0.5 : code * step - 0.5);
  }

  unsigned size_;
  unsigned adc_bits_;
  double full_scale_;
  unsigned weight_shift_;

  bool programmed_ = false;
  unsigned program_count_ = 0;
  std::vector<std::int32_t> weights_;
  std::vector<Value> analog_offsets_;
  std::vector<Value> stored_offsets_;
  double calibrated_full_scale_ = 0.0;
};

}  // namespace picnic
