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

#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "picnic/pe.hpp"

using namespace picnic;

namespace {

HardwareConfig exact_hw(unsigned pe = 256) {
  HardwareConfig hw;
  hw.pe_array = pe;
  hw.numeric_mode = NumericMode::kExact;
  hw.adc_bits = 0;
  return hw;
}

std::vector<std::int32_t> identity(unsigned n) {
  std::vector<std::int32_t> w(std::size_t(n) * n, 0);
  for (unsigned i = 0; i < n; ++i) w[std::size_t(i) * n + i] = 1;
  return w;
}

}  // namespace

TEST_CASE("identity weights pass the input through in exact mode") {
  PeArray pe(exact_hw(64));
  pe.program(identity(64));
  std::mt19937_64 rng(3);
  std::vector<Value> x(64);
  for (auto& v : x) v = rng_range(rng, -1000, 1000);
  CHECK(pe.smac(x) == x);
}

TEST_CASE("zero weights produce zero for any input") {
  PeArray pe(exact_hw(32));
  pe.program(std::vector<std::int32_t>(32 * 32, 0));
  std::mt19937_64 rng(4);
  for (int t = 0; t < 10; ++t) {
    std::vector<Value> x(32);
    for (auto& v : x) v = rng_range(rng, -100000, 100000);
    for (Value y : pe.smac(x)) CHECK(y == 0);
  }
}

TEST_CASE("re-programming without reset fails; reset counts") {
  PeArray pe(exact_hw(16));
  pe.program(identity(16));
  CHECK_THROWS_AS(pe.program(identity(16)), DoubleProgramError);
  pe.reset();
  CHECK_NOTHROW(pe.program(identity(16)));
  CHECK(pe.program_count() == 2);
}

TEST_CASE("2x2 hand example inside a padded array") {
  // W = [[1,2],[3,4]] in the top-left corner, x = [1,1]:
  // y_j = sum_i W[i][j] x[i] -> [1+3, 2+4] = [4, 6].
  PeArray pe(exact_hw(8));
  std::vector<std::int32_t> w(64, 0);
  w[0 * 8 + 0] = 1;
  w[0 * 8 + 1] = 2;
  w[1 * 8 + 0] = 3;
  w[1 * 8 + 1] = 4;
  pe.program(w);
  const auto y = pe.smac({1, 1});
  CHECK(y[0] == 4);
  CHECK(y[1] == 6);
  for (unsigned j = 2; j < 8; ++j) CHECK(y[j] == 0);
}

TEST_CASE("exact mode equals a wide-integer matvec oracle") {
  std::mt19937_64 rng(0xFEED);
  HardwareConfig hw = exact_hw(256);
  for (int trial = 0; trial < 1000; ++trial) {
    // Keep the full array for a handful of cases, a smaller one for bulk.
    const unsigned n = trial < 20 ? 256 : 32;
    hw.pe_array = n;
    PeArray pe(hw);
    std::vector<std::int32_t> w(std::size_t(n) * n);
    for (auto& v : w) v = static_cast<std::int32_t>(rng_range(rng, -128, 127));
    pe.program(w);
    std::vector<Value> x(n);
    for (auto& v : x) v = rng_range(rng, -(1 << 20), 1 << 20);
    const auto y = pe.smac(x);
    for (unsigned j = 0; j < n; ++j) {
      __int128 acc = 0;
      for (unsigned i = 0; i < n; ++i)
        acc += static_cast<__int128>(w[std::size_t(i) * n + j]) * x[i];
      REQUIRE(acc <= kValueMax);
      REQUIRE(acc >= kValueMin);
      CHECK(y[j] == static_cast<Value>(acc));
    }
  }
}

TEST_CASE("zero input cancels to zero through offset compensation") {
  for (unsigned adc : {0u, 8u}) {
    HardwareConfig hw = exact_hw(16);
    hw.adc_bits = adc;
    hw.adc_full_scale = 4096.0;
    PeArray pe(hw);
    std::vector<Value> offsets(16);
    std::mt19937_64 rng(11);
    for (auto& o : offsets) o = rng_range(rng, -80, 80);
    pe.program(identity(16), offsets);
    const auto y = pe.smac(std::vector<Value>(16, 0));
    for (Value v : y) CHECK(v == 0);
  }
}

TEST_CASE("ADC quantization error stays within half an LSB") {
  HardwareConfig hw = exact_hw(16);
  hw.adc_bits = 8;
  hw.adc_full_scale = 1024.0;  // LSB = 1024/128 = 8
  PeArray pe(hw);
  pe.program(identity(16));
  std::mt19937_64 rng(12);
  for (int t = 0; t < 200; ++t) {
    std::vector<Value> x(16);
    for (auto& v : x) v = rng_range(rng, -1000, 1000);
    const auto y = pe.smac(x);
    for (unsigned j = 0; j < 16; ++j) {
      const double lsb = 1024.0 / 128.0;
      CHECK(std::abs(static_cast<double>(y[j] - x[j])) <= 0.5 * lsb + 1.0);
    }
  }
}

TEST_CASE("input length rules: short pads, long rejects") {
  PeArray pe(exact_hw(8));
  std::vector<std::int32_t> w(64, 1);
  pe.program(w);
  const auto y = pe.smac({5});  // one row active: y_j = 5 for all j
  for (Value v : y) CHECK(v == 5);
  CHECK_THROWS_AS(pe.smac(std::vector<Value>(9, 1)), Error);
  CHECK_THROWS_AS(PeArray(exact_hw(8)).smac({1}), Error);  // unprogrammed
}

TEST_CASE("smac does not mutate the weights") {
  PeArray pe(exact_hw(8));
  std::vector<std::int32_t> w(64);
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = static_cast<std::int32_t>(i % 7) - 3;
  pe.program(w);
  const auto before = pe.weights();
  pe.smac({1, 2, 3, 4, 5, 6, 7, 8});
  pe.smac({8, 7, 6, 5, 4, 3, 2, 1});
  CHECK(pe.weights() == before);
}

TEST_CASE("fixed mode rescales by the weight fraction bits") {
  HardwareConfig hw;
  hw.pe_array = 4;
  hw.numeric_mode = NumericMode::kFixed;
  hw.weight_frac_bits = 6;
  hw.adc_bits = 0;
  PeArray pe(hw);
  // W[i][j] = 64 == 1.0 in Q2.6: output should equal sum of inputs.
  pe.program(std::vector<std::int32_t>(16, 64));
  const auto y = pe.smac({100, 200, 300, 400});
  for (Value v : y) CHECK(v == 1000);
}
