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

#include <cmath>
#include <random>

#include "picnic/scu.hpp"

using namespace picnic;

namespace {

constexpr unsigned kFrac = 16;

// Independent reference: chord interpolation of e^x on unit segments of
// [-8, 0], evaluated in double. Reimplements the construction rather than
// calling into the table under test.
double pwl_ref(double x) {
  if (x < -8.0) x = -8.0;
  if (x > 0.0) x = 0.0;
  int k = static_cast<int>(std::floor(x + 8.0));
  if (k > 7) k = 7;
  const double a = -8.0 + k;
  const double slope = std::exp(a + 1.0) - std::exp(a);
  return std::exp(a) + slope * (x - a);
}

std::vector<double> softmax_ref(const std::vector<double>& xs, bool pwl) {
  double mx = xs[0];
  for (double v : xs) mx = std::max(mx, v);
  std::vector<double> e(xs.size());
  double sum = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    e[i] = pwl ? pwl_ref(xs[i] - mx) : std::exp(xs[i] - mx);
    sum += e[i];
  }
  for (auto& v : e) v /= sum;
  return e;
}

PwlTable table() { return PwlTable(-8.0, 8, kFrac); }

ScuUnit unit(NumericMode mode = NumericMode::kFixed, unsigned cap = 4096) {
  static PwlTable t = table();
  return ScuUnit(&t, cap, mode);
}

Value q(double x) { return double_to_fixed(x, kFrac); }
double dq30(Value v) { return fixed_to_double(v, kScuFracBits); }

}  // namespace

TEST_CASE("pwl_exp anchors: x=0 gives 1.0 within 1 LSB") {
  const PwlTable t = table();
  CHECK(std::llabs(t.eval_q(0) - kScuOne) <= 1);
}

TEST_CASE("pwl_exp anchors: x=-8 matches exp(-8) to table precision") {
  const PwlTable t = table();
  const double got = dq30(t.eval_q(q(-8.0)));
  CHECK(std::abs(got - std::exp(-8.0)) < 1e-7);
}

TEST_CASE("pwl_exp domain clamp below -8 is flagged") {
  const PwlTable t = table();
  bool clamped = false;
  const Value v = t.eval_q(q(-12.0), &clamped);
  CHECK(clamped);
  CHECK(v == t.eval_q(q(-8.0)));
}

TEST_CASE("pwl_exp max relative error over [-8,0] equals the recorded bound") {
  const PwlTable t = table();
  double max_rel = 0.0;
  const int n = 1'000'000;
  for (int i = 0; i <= n; ++i) {
    const double x = -8.0 * i / n;
    const double approx = dq30(t.eval_q(q(x)));
    const double exact = std::exp(x);
    max_rel = std::max(max_rel, std::abs(approx - exact) / exact);
  }
  // The analytic chord bound is 0.131374...; the sweep must reach it and the
  // recorded constant must still dominate after fixed-point rounding.
  CHECK(max_rel <= kPwlExpMaxRelError);
  CHECK(max_rel > 0.1310);
}

TEST_CASE("pwl_exp is monotone non-decreasing across the domain") {
  const PwlTable t = table();
  std::mt19937_64 rng(42);
  // Dense probes around every segment boundary plus random pairs.
  for (int k = -8; k <= 0; ++k) {
    const Value b = q(static_cast<double>(k));
    for (Value d = -3; d <= 2; ++d) CHECK(t.eval_q(b + d) <= t.eval_q(b + d + 1));
  }
  for (int i = 0; i < 20'000; ++i) {
    Value x1 = -static_cast<Value>(rng_below(rng, 8u << kFrac));
    Value x2 = -static_cast<Value>(rng_below(rng, 8u << kFrac));
    if (x1 > x2) std::swap(x1, x2);
    CHECK(t.eval_q(x1) <= t.eval_q(x2));
  }
}

TEST_CASE("pwl table dump/load round-trip") {
  const PwlTable t = table();
  const PwlTable back = PwlTable::load(t.dump(), kFrac);
  for (unsigned k = 0; k < t.segments(); ++k) {
    CHECK(back.segment(k).slope_q == t.segment(k).slope_q);
    CHECK(back.segment(k).breakpoint == t.segment(k).breakpoint);
  }
  CHECK_THROWS_AS(PwlTable::load("", kFrac), ConfigError);
}

TEST_CASE("reciprocal: exact on powers of two, tight elsewhere") {
  CHECK(reciprocal_q30(kScuOne).mantissa_recip_q30 == kScuOne);
  CHECK(reciprocal_q30(kScuOne).exponent == 0);
  std::mt19937_64 rng(7);
  for (int i = 0; i < 10'000; ++i) {
    const double s = 1.0 + 4094.0 * static_cast<double>(rng_below(rng, 1u << 20)) / (1u << 20);
    const Value sq = double_to_fixed(s, kScuFracBits);
    const Reciprocal r = reciprocal_q30(sq);
    const double got = dq30(r.mantissa_recip_q30) / std::pow(2.0, r.exponent);
    CHECK(std::abs(got * s - 1.0) < 1e-6);
  }
}

TEST_CASE("softmax of [0,0,0,0] is uniform within 2 LSB") {
  auto u = unit();
  const auto out = softmax_stream(u, {0, 0, 0, 0});
  REQUIRE(out.size() == 4);
  for (Value v : out) CHECK(std::llabs(v - kScuOne / 4) <= 2);
}

TEST_CASE("softmax of a single element is exactly one") {
  auto u = unit();
  const auto out = softmax_stream(u, {0});
  REQUIRE(out.size() == 1);
  CHECK(out[0] == kScuOne);

  auto ex = unit(NumericMode::kExact);
  const auto out2 = softmax_stream(ex, {0});
  CHECK(out2[0] == kScuOne);
}

TEST_CASE("softmax of [0, -ln2, -ln2] tracks the PWL reference") {
  const double ln2 = std::log(2.0);
  auto u = unit();
  const auto out = softmax_stream(u, {0, q(-ln2), q(-ln2)});
  const auto ref = softmax_ref({0.0, fixed_to_double(q(-ln2), kFrac),
                                fixed_to_double(q(-ln2), kFrac)}, /*pwl=*/true);
  for (std::size_t i = 0; i < out.size(); ++i)
    CHECK(std::abs(dq30(out[i]) - ref[i]) < 1e-6);

  // Against the exact softmax the error stays inside the propagated PWL
  // bound 2*beta/(1-beta).
  const auto exact = softmax_ref({0.0, -ln2, -ln2}, /*pwl=*/false);
  const double prop = 2 * kPwlExpMaxRelError / (1 - kPwlExpMaxRelError);
  for (std::size_t i = 0; i < out.size(); ++i)
    CHECK(std::abs(dq30(out[i]) - exact[i]) / exact[i] < prop);
}

TEST_CASE("output sum lands within 2^-10 of one for all stream sizes") {
  std::mt19937_64 rng(123);
  for (std::size_t n : {std::size_t(1), std::size_t(2), std::size_t(17), std::size_t(257),
                        std::size_t(1024), std::size_t(4096)}) {
    std::vector<Value> xs(n);
    for (auto& x : xs) x = -static_cast<Value>(rng_below(rng, 8u << kFrac));
    xs[rng_below(rng, n)] = 0;  // pre-shifted: the maximum is exactly zero
    auto u = unit();
    const auto out = softmax_stream(u, xs);
    double sum = 0;
    for (Value v : out) sum += dq30(v);
    CHECK(std::abs(sum - 1.0) < std::pow(2.0, -10));
  }
}

TEST_CASE("outputs preserve input order and monotonicity") {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + rng_below(rng, 64);
    std::vector<Value> xs(n);
    for (auto& x : xs) x = -static_cast<Value>(rng_below(rng, 8u << kFrac));
    xs[rng_below(rng, n)] = 0;
    auto u = unit();
    const auto out = softmax_stream(u, xs);
    REQUIRE(out.size() == n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (xs[i] > xs[j]) CHECK(out[i] >= out[j]);
  }
}

TEST_CASE("FSM never enters S3 before S2 completes") {
  std::mt19937_64 rng(31);
  auto u = unit();
  for (int stream = 0; stream < 10; ++stream) {
    const std::size_t n = 1 + rng_below(rng, 32);
    std::vector<Value> xs(n);
    for (auto& x : xs) x = -static_cast<Value>(rng_below(rng, 8u << kFrac));
    softmax_stream(u, xs);
  }
  const auto& log = u.event_log();
  REQUIRE(log.size() == 30);  // three states per stream
  for (std::size_t i = 0; i < log.size(); i += 3) {
    CHECK(log[i].state == ScuFsm::kS1Accumulate);
    CHECK(log[i + 1].state == ScuFsm::kS2Reciprocal);
    CHECK(log[i + 2].state == ScuFsm::kS3Multiply);
    CHECK(log[i].cycle <= log[i + 1].cycle);
    CHECK(log[i + 1].cycle <= log[i + 2].cycle);
  }
}

TEST_CASE("streams beyond the indexed cache raise a capacity error") {
  auto u = unit(NumericMode::kFixed, 16);
  CHECK_THROWS_AS(u.begin(17), CapacityError);
  CHECK_THROWS_AS(u.begin(0), Error);
  CHECK_NOTHROW(u.begin(16));
}

TEST_CASE("exact mode matches the exact softmax quantized to Q30") {
  std::mt19937_64 rng(55);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 1 + rng_below(rng, 20);
    std::vector<Value> xs(n);
    for (auto& x : xs) x = rng_range(rng, -40, 0);
    auto u = unit(NumericMode::kExact);
    const auto out = softmax_stream(u, xs);
    // Reference mirrors the documented exact-mode contract.
    Value mx = xs[0];
    for (Value v : xs) mx = std::max(mx, v);
    std::vector<Value> eq(n);
    Value sum = 0;
    for (std::size_t i = 0; i < n; ++i) {
      eq[i] = static_cast<Value>(
          std::llround(std::exp(static_cast<double>(xs[i] - mx)) * double(kScuOne)));
      sum += eq[i];
    }
    const Reciprocal r = reciprocal_q30(sum);
    for (std::size_t i = 0; i < n; ++i)
      CHECK(out[i] == shift_round(eq[i] * r.mantissa_recip_q30, kScuFracBits + r.exponent));
  }
}
