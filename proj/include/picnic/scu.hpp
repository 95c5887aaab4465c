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
#include <deque>
#include <sstream>
#include <string>
#include <vector>

#include "picnic/common.hpp"
#include "picnic/config.hpp"

namespace picnic {

// The softmax datapath runs at its own internal precision: exponentials,
// partial sums and reciprocals are Q30 regardless of the mesh payload format.
constexpr unsigned kScuFracBits = 30;
constexpr Value kScuOne = Value{1} << kScuFracBits;

// Measured maximum relative error of the uniform-breakpoint, endpoint
// interpolated exponential over [-8, 0]. The analytic chord bound for e^x on
// unit segments is (e-1)*exp(-(e-2)/(e-1)) - 1 = 0.131374...; the recorded
// figure adds headroom for coefficient rounding and is checked by an oracle
// sweep in the test suite.
constexpr double kPwlExpMaxRelError = 0.1314;

// ---------------------------------------------------------------------------
// Eight-segment piecewise-linear exponential.
//
// Uniform 1.0-wide segments over [domain_min, 0], chord coefficients through
// the segment endpoints. Coefficients are rounded to Q30 and then stitched so
// the fixed-point evaluation stays monotone across segment boundaries.
// ---------------------------------------------------------------------------

struct PwlSegment {
  double breakpoint = 0.0;  // left edge
  double slope = 0.0;
  double intercept = 0.0;
  Value slope_q = 0;      // Q30
  Value intercept_q = 0;  // Q30
};

class PwlTable {
 public:
  PwlTable(double domain_min, unsigned segments, unsigned in_frac_bits)
      : domain_min_(domain_min), in_frac_(in_frac_bits) {
    if (segments == 0 || domain_min >= 0.0) throw ConfigError("bad PWL table domain");
    const double width = -domain_min / segments;
    segs_.resize(segments);
    for (unsigned k = 0; k < segments; ++k) {
      const double a = domain_min + k * width;
      const double b = a + width;
      PwlSegment s;
      s.breakpoint = a;
      s.slope = (std::exp(b) - std::exp(a)) / width;
      s.intercept = std::exp(a) - s.slope * a;
      s.slope_q = double_to_fixed(s.slope, kScuFracBits);
      s.intercept_q = double_to_fixed(s.intercept, kScuFracBits);
      segs_[k] = s;
    }
    width_q_ = double_to_fixed(width, in_frac_);
    min_q_ = double_to_fixed(domain_min, in_frac_);
    // Stitch boundaries: the fixed-point value entering segment k must not
    // fall below the last value of segment k-1.
    for (unsigned k = 1; k < segments; ++k) {
      const Value edge = min_q_ + static_cast<Value>(k) * width_q_;
      const Value below = eval_seg(k - 1, edge - 1);
      const Value at = eval_seg(k, edge);
      if (at < below) segs_[k].intercept_q += below - at;
    }
  }

  explicit PwlTable(const HardwareConfig& hw)
      : PwlTable(hw.scu_domain_min, hw.scu_pwl_segments, hw.frac_bits) {}

  unsigned segments() const { return static_cast<unsigned>(segs_.size()); }
  const PwlSegment& segment(unsigned k) const { return segs_[k]; }
  double domain_min() const { return domain_min_; }
  unsigned input_frac_bits() const { return in_frac_; }

  // x in input fixed-point format; result in Q30. Inputs below the domain
  // clamp to the leftmost anchor and are flagged; inputs above zero clamp to
  // zero (pre-shifted streams top out at the row maximum, i.e. exactly 0).
  Value eval_q(Value x, bool* clamped = nullptr) const {
    if (x < min_q_) {
      if (clamped) *clamped = true;
      x = min_q_;
    }
    if (x > 0) x = 0;
    Value k = (x - min_q_) / width_q_;
    if (k >= static_cast<Value>(segs_.size())) k = static_cast<Value>(segs_.size()) - 1;
    return eval_seg(static_cast<unsigned>(k), x);
  }

  double eval(double x) const {
    bool c = false;
    return fixed_to_double(eval_q(double_to_fixed(x, in_frac_), &c), kScuFracBits);
  }

  // 8x3 coefficient text file: "breakpoint slope intercept" per line.
  std::string dump() const {
    std::ostringstream out;
    out.precision(17);
    for (const auto& s : segs_)
      out << s.breakpoint << " " << s.slope << " " << s.intercept << "\n";
    return out.str();
  }

  static PwlTable load(const std::string& text, unsigned in_frac_bits) {
    std::istringstream in(text);
    std::vector<double> bp, sl, ic;
    double b, s, i;
    while (in >> b >> s >> i) {
      bp.push_back(b);
      sl.push_back(s);
      ic.push_back(i);
    }
    if (bp.empty()) throw ConfigError("empty PWL table file");
    for (std::size_t k = 1; k < bp.size(); ++k)
      if (bp[k] <= bp[k - 1]) throw ConfigError("PWL breakpoints must be strictly increasing");
    PwlTable t(bp[0], static_cast<unsigned>(bp.size()), in_frac_bits);
    for (std::size_t k = 0; k < bp.size(); ++k) {
      t.segs_[k].breakpoint = bp[k];
      t.segs_[k].slope = sl[k];
      t.segs_[k].intercept = ic[k];
      t.segs_[k].slope_q = double_to_fixed(sl[k], kScuFracBits);
      t.segs_[k].intercept_q = double_to_fixed(ic[k], kScuFracBits);
    }
    return t;
  }

 private:
  Value eval_seg(unsigned k, Value x) const {
    return shift_round(segs_[k].slope_q * x, in_frac_) + segs_[k].intercept_q;
  }

  double domain_min_;
  unsigned in_frac_;
  std::vector<PwlSegment> segs_;
  Value width_q_ = 0;
  Value min_q_ = 0;
};

// ---------------------------------------------------------------------------
// Reciprocal unit: 64-entry seed over [1, 2) plus two Newton-Raphson steps.
// Returns the Q30 reciprocal of the normalized mantissa and the exponent, so
// the multiply stage can fold the shift into its final rounding.
// ---------------------------------------------------------------------------

struct Reciprocal {
  Value mantissa_recip_q30 = 0;
  unsigned exponent = 0;  // input = mantissa * 2^exponent
};

inline Reciprocal reciprocal_q30(Value sum_q30) {
  if (sum_q30 <= 0) throw Error("reciprocal of a non-positive accumulator");
  unsigned e = 0;
  Value m = sum_q30;
  while (m >= (kScuOne << 1)) {
    m >>= 1;
    ++e;
  }
  while (m < kScuOne) m <<= 1;  // defensive for sums below 1.0 (never hit by softmax)
  const unsigned idx = static_cast<unsigned>((m >> 24) - 64) & 63;
  Value r = (Value{64} << kScuFracBits) / (64 + idx);
  auto mul = [](Value a, Value b) { return shift_round(a * b, kScuFracBits); };
  for (int it = 0; it < 2; ++it) r = mul(r, (kScuOne << 1) - mul(m, r));
  return Reciprocal{r, e};
}

constexpr unsigned kRecipCycles = 6;  // seed lookup + two multiply-subtract pairs

// ---------------------------------------------------------------------------
// Softmax compute unit.
//
// Three-state FSM: S1 streams inputs, evaluating the PWL exponential into the
// indexed cache while the partial-sum adder accumulates; S2 computes the
// reciprocal of the sum; S3 multiplies each cached value by the reciprocal,
// emitting outputs in input order. Because fixed-point evaluation needs
// max-shifted inputs, S1 buffers the raw stream first and runs the
// exponential pass against the captured maximum (spec'd pre-shift, kept
// inside the unit so schedules stay independent of runtime data).
// ---------------------------------------------------------------------------

enum class ScuFsm : std::uint8_t { kS1Accumulate = 1, kS2Reciprocal = 2, kS3Multiply = 3 };

struct ScuEvent {
  Cycle cycle;
  ScuFsm state;
};

class ScuUnit {
 public:
  ScuUnit(const PwlTable* table, unsigned cache_capacity, NumericMode mode)
      : table_(table), capacity_(cache_capacity), mode_(mode) {}

  // --- stream-level interface -------------------------------------------

  // Begins a stream of n inputs. Fails a tiling contract if n exceeds the
  // indexed cache.
  void begin(std::size_t n) {
    if (n == 0) throw Error("softmax stream must have at least one element");
    if (n > capacity_)
      throw CapacityError("SCU indexed cache capacity exceeded: " + std::to_string(n) +
                          " > " + std::to_string(capacity_));
    expected_ = n;
    raw_.clear();
    exp_.clear();
    out_.clear();
    sum_ = 0;
    emit_pos_ = 0;
    state_ = ScuFsm::kS1Accumulate;
    log_.push_back({cycle_, state_});
  }

  bool collecting() const { return state_ == ScuFsm::kS1Accumulate && raw_.size() < expected_; }
  bool emitting() const { return state_ == ScuFsm::kS3Multiply && !out_.empty(); }
  bool idle() const { return expected_ == 0; }

  // One input per cycle during S1.
  void push(Value x) {
    if (!collecting()) throw Error("SCU push outside S1");
    raw_.push_back(x);
    ++cycle_;
    if (raw_.size() == expected_) run_pipeline();
  }

  // Outputs in input order, Q30.
  bool pop(Value* out) {
    if (out_.empty()) return false;
    *out = out_.front();
    out_.pop_front();
    ++emit_pos_;
    ++cycle_;
    if (out_.empty()) expected_ = 0;  // stream drained; unit returns to idle
    return true;
  }

  std::size_t pending_outputs() const { return out_.size(); }
  const std::vector<ScuEvent>& event_log() const { return log_; }
  Cycle cycle() const { return cycle_; }
  unsigned domain_clamps() const { return domain_clamps_; }
  Value partial_sum_q30() const { return sum_; }

 private:
  void run_pipeline() {
    // Remainder of S1: exponential + accumulate over the captured stream.
    Value max_raw = raw_[0];
    for (Value v : raw_) max_raw = std::max(max_raw, v);
    exp_.reserve(raw_.size());
    if (mode_ == NumericMode::kFixed) {
      for (Value v : raw_) {
        bool clamped = false;
        const Value e = table_->eval_q(v - max_raw, &clamped);
        if (clamped) ++domain_clamps_;
        exp_.push_back(e);
        sum_ += e;
      }
    } else {
      // Exact mode substitutes the exact exponential, quantized to the Q30
      // output grid, so integer runs stay bit-reproducible.
      for (Value v : raw_) {
        const double e = std::exp(static_cast<double>(v - max_raw));
        const Value q = static_cast<Value>(std::llround(e * static_cast<double>(kScuOne)));
        exp_.push_back(q);
        sum_ += q;
      }
    }
    cycle_ += raw_.size();  // one cached element per cycle

    state_ = ScuFsm::kS2Reciprocal;
    log_.push_back({cycle_, state_});
    const Reciprocal r = reciprocal_q30(sum_);
    cycle_ += kRecipCycles;

    state_ = ScuFsm::kS3Multiply;
    log_.push_back({cycle_, state_});
    const unsigned shift = kScuFracBits + r.exponent;
    for (Value e : exp_) out_.push_back(shift_round(e * r.mantissa_recip_q30, shift));
  }

  const PwlTable* table_;
  std::size_t capacity_;
  NumericMode mode_;

  ScuFsm state_ = ScuFsm::kS1Accumulate;
  std::size_t expected_ = 0;
  std::vector<Value> raw_;
  std::vector<Value> exp_;
  std::deque<Value> out_;
  Value sum_ = 0;
  std::size_t emit_pos_ = 0;
  Cycle cycle_ = 0;
  unsigned domain_clamps_ = 0;
  std::vector<ScuEvent> log_;
};

// Whole-stream convenience wrapper: feeds xs through a unit and returns the
// Q30 outputs in input order.
inline std::vector<Value> softmax_stream(ScuUnit& scu, const std::vector<Value>& xs) {
  scu.begin(xs.size());
  for (Value x : xs) scu.push(x);
  std::vector<Value> out;
  out.reserve(xs.size());
  Value v;
  while (scu.pop(&v)) out.push_back(v);
  return out;
}

}  // namespace picnic
