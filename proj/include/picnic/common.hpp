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

#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>

namespace picnic {

using Word = std::uint64_t;    // raw 64-bit lane contents
using Value = std::int64_t;    // signed payload interpretation
using Cycle = std::uint64_t;

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct FieldOverflowError : Error {
  using Error::Error;
};
struct AssemblyError : Error {
  AssemblyError(int line_no, const std::string& what)
      : Error("line " + std::to_string(line_no) + ": " + what), line(line_no) {}
  int line;
};
struct BankConflictError : Error {
  using Error::Error;
};
struct CapacityError : Error {
  using Error::Error;
};
struct ConfigError : Error {
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Fixed-point helpers
//
// Mesh payloads are signed 64-bit lanes. In fixed mode they carry Q(64-f).f
// values with f = frac_bits; in exact mode they are plain integers and every
// arithmetic step is exact (no shifts). Products are accumulated at full
// precision and rescaled once, at a flush or emit point, with a rounded
// arithmetic shift.
// ---------------------------------------------------------------------------

constexpr Value kValueMax = std::numeric_limits<Value>::max();
constexpr Value kValueMin = std::numeric_limits<Value>::min();

// Rounded arithmetic right shift (round half away from zero).
constexpr Value shift_round(Value v, unsigned bits) {
  if (bits == 0) return v;
  const Value half = Value{1} << (bits - 1);
  if (v >= 0) return (v + half) >> bits;
  return -((-v + half) >> bits);
}

// Saturating add; sets *sat when the result clamps.
inline Value sat_add(Value a, Value b, bool* sat = nullptr) {
  Value r;
  if (__builtin_add_overflow(a, b, &r)) {
    if (sat) *sat = true;
    return b > 0 ? kValueMax : kValueMin;
  }
  return r;
}

// Saturating multiply (used only by the fixed-point DMAC path; operands in
// practice are far from the 64-bit edge, the guard exists for the overflow
// flag contract).
inline Value sat_mul(Value a, Value b, bool* sat = nullptr) {
  Value r;
  if (__builtin_mul_overflow(a, b, &r)) {
    if (sat) *sat = true;
    const bool neg = (a < 0) != (b < 0);
    return neg ? kValueMin : kValueMax;
  }
  return r;
}

inline double fixed_to_double(Value v, unsigned frac_bits) {
  return static_cast<double>(v) / static_cast<double>(Value{1} << frac_bits);
}

inline Value double_to_fixed(double x, unsigned frac_bits) {
  const double scaled = x * static_cast<double>(Value{1} << frac_bits);
  if (scaled >= static_cast<double>(kValueMax)) return kValueMax;
  if (scaled <= static_cast<double>(kValueMin)) return kValueMin;
  return static_cast<Value>(scaled >= 0 ? scaled + 0.5 : scaled - 0.5);
}

// ---------------------------------------------------------------------------
// Deterministic RNG mapping
//
// std::mt19937_64 is bit-stable across platforms; the distributions are not.
// All randomized inputs go through these helpers so seeds reproduce exactly.
// ---------------------------------------------------------------------------

template <typename Engine>
std::uint64_t rng_below(Engine& eng, std::uint64_t n) {
  // Multiply-shift mapping; bias is < 2^-64 per draw, irrelevant here and,
  // unlike std::uniform_int_distribution, identical everywhere.
  const unsigned __int128 wide = static_cast<unsigned __int128>(eng()) * n;
  return static_cast<std::uint64_t>(wide >> 64);
}

template <typename Engine>
std::int64_t rng_range(Engine& eng, std::int64_t lo, std::int64_t hi) {
  return lo + static_cast<std::int64_t>(
                  rng_below(eng, static_cast<std::uint64_t>(hi - lo + 1)));
}

}  // namespace picnic
