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

#include "oracles.hpp"
#include "picnic/runner.hpp"

using namespace picnic;

namespace {

HardwareConfig desk_hw(NumericMode mode) {
  HardwareConfig hw = HardwareConfig::desk();
  hw.numeric_mode = mode;
  return hw;
}

constexpr std::uint8_t bit_of(unsigned port) { return static_cast<std::uint8_t>(1u << port); }

std::map<int, std::vector<std::int8_t>> oracle_weights(const LayerWeights& w, LayerKind kind) {
  std::map<int, std::vector<std::int8_t>> out;
  if (kind == LayerKind::kAttention) {
    out[0] = w.mats.at(MatrixId::kWQ);
    out[1] = w.mats.at(MatrixId::kWK);
    out[2] = w.mats.at(MatrixId::kWV);
    out[3] = w.mats.at(MatrixId::kWO);
  } else {
    out[0] = w.mats.at(MatrixId::kWGate);
    out[1] = w.mats.at(MatrixId::kWUp);
    out[2] = w.mats.at(MatrixId::kWDown);
  }
  return out;
}

}  // namespace

TEST_CASE("desk attention layer is bit-exact against the dense oracle (exact mode)") {
  const HardwareConfig hw = desk_hw(NumericMode::kExact);
  const ModelSpec m = model_preset("desk");
  const LayerWeights w = synth_attention_weights(m, 0xA11CE);
  const MappingPlan plan = desk_attention_plan(hw, m, 16);
  LayerChiplet layer(plan, hw, m, w);

  std::mt19937_64 rng(0xD15C0);
  std::vector<std::vector<Value>> xs;
  for (int t = 0; t < 16; ++t) {
    std::vector<Value> x(m.embed_dim);
    for (auto& v : x) v = rng_range(rng, -8, 8);
    xs.push_back(x);
  }
  const auto expected = oracle::attention_exact(oracle_weights(w, LayerKind::kAttention), xs,
                                                {m.embed_dim, m.kv_dim, m.num_heads});
  for (unsigned t = 0; t < xs.size(); ++t) {
    const auto got = layer.run_token(t, xs[t]);
    REQUIRE(got.size() == m.embed_dim);
    for (unsigned j = 0; j < m.embed_dim; ++j) {
      INFO("token " << t << " element " << j);
      CHECK(got[j] == expected[t][j]);
    }
  }
}

TEST_CASE("desk attention layer tracks the PWL oracle within 1e-2 (fixed mode)") {
  const HardwareConfig hw = desk_hw(NumericMode::kFixed);
  const ModelSpec m = model_preset("desk");
  const LayerWeights w = synth_attention_weights(m, 0xBEE5);
  const MappingPlan plan = desk_attention_plan(hw, m, 16);
  LayerChiplet layer(plan, hw, m, w);

  std::mt19937_64 rng(0xF1D0);
  std::vector<std::vector<double>> xd;
  for (int t = 0; t < 16; ++t) {
    std::vector<double> x(m.embed_dim);
    for (auto& v : x) v = static_cast<double>(rng_range(rng, -1000, 1000)) / 1000.0;
    xd.push_back(x);
  }
  const auto expected = oracle::attention_pwl_double(
      oracle_weights(w, LayerKind::kAttention), xd, {m.embed_dim, m.kv_dim, m.num_heads},
      hw.weight_frac_bits);
  for (unsigned t = 0; t < xd.size(); ++t) {
    std::vector<Value> x(m.embed_dim);
    for (unsigned j = 0; j < m.embed_dim; ++j) x[j] = double_to_fixed(xd[t][j], hw.frac_bits);
    const auto got = layer.run_token(t, x);
    double scale = 1.0;
    for (double v : expected[t]) scale = std::max(scale, std::abs(v));
    for (unsigned j = 0; j < m.embed_dim; ++j) {
      const double gd = fixed_to_double(got[j], hw.frac_bits);
      INFO("token " << t << " element " << j << " got " << gd << " want " << expected[t][j]);
      CHECK(std::abs(gd - expected[t][j]) / scale < 1e-2);
    }
  }
}

TEST_CASE("single-token decode: the attention context equals v0") {
  const HardwareConfig hw = desk_hw(NumericMode::kExact);
  const ModelSpec m = model_preset("desk");
  const LayerWeights w = synth_attention_weights(m, 0x5EED5);
  const MappingPlan plan = desk_attention_plan(hw, m, 4);
  LayerChiplet layer(plan, hw, m, w);

  std::vector<Value> x(m.embed_dim);
  std::mt19937_64 rng(77);
  for (auto& v : x) v = rng_range(rng, -8, 8);
  layer.run_token(0, x);

  // v0 from the same contract the PEs implement.
  const auto v0 = oracle::matvec_t(w.mats.at(MatrixId::kWV), m.embed_dim, m.kv_dim,
                                   std::vector<oracle::I64>(x.begin(), x.end()), 0);
  const auto* sched = layer.attention();
  REQUIRE(sched != nullptr);
  auto& station = layer.tile().router_by_id(sched->station_router());
  for (unsigned j = 0; j < m.kv_dim; ++j)
    CHECK(station.sp_read(static_cast<std::uint16_t>(sched->out_buf() + j)) == v0[j]);
}

TEST_CASE("recompiling a schedule is byte-identical") {
  const HardwareConfig hw = desk_hw(NumericMode::kExact);
  const ModelSpec m = model_preset("desk");
  const MappingPlan plan = desk_attention_plan(hw, m, 8);
  AttentionScheduler s1(plan, hw, m), s2(plan, hw, m);
  std::vector<Value> x(m.embed_dim, 3);
  const CompiledStep a = s1.step(2, x), b = s2.step(2, x);
  REQUIRE(a.images.size() == b.images.size());
  std::string ha, hb;
  for (const auto& img : a.images) ha += emit_hex(img);
  for (const auto& img : b.images) hb += emit_hex(img);
  CHECK(ha == hb);
  CHECK(a.injections == b.injections);
}

TEST_CASE("an empty program compiles to zero images") {
  ProgramBuilder b(desk_hw(NumericMode::kExact));
  CHECK(b.images().empty());
}

TEST_CASE("a broadcast phase dispatches the hand-built 2x2 trace") {
  HardwareConfig hw = HardwareConfig::desk();
  hw.mesh_rows = 2;
  hw.mesh_cols = 2;
  hw.pe_array = 4;
  const SpanTree t = spanning_tree({0, 1, 2, 3}, 0, 2, 2);
  ProgramBuilder b(hw);
  emit_tree_broadcast(b, hw, t, 7, 9);
  const auto& rows = b.rows();
  REQUIRE(rows.size() == 3);

  // Hand-enumerated dispatch table: root pushes E+S, level 1 forwards, the
  // deepest node stores.
  NpmController ctl(4, 64);
  ctl.load_bank_now(1, rows);
  const Instruction root = make_sprd_mask(bit_of(kPortE) | bit_of(kPortS), 7);
  const Instruction fwd1 = make_route(kPortW, bit_of(kPortS), true, 9);   // router 1
  const Instruction fwd2 = make_route(kPortN, 0, true, 9);                // router 2
  const Instruction leaf = make_route(kPortN, 0, true, 9);                // router 3
  const Instruction idle;

  ctl.tick(false);
  CHECK(ctl.dispatch() == std::vector<Instruction>{root, idle, idle, idle});
  ctl.tick(true);
  CHECK(ctl.dispatch() == std::vector<Instruction>{idle, fwd1, fwd2, idle});
  ctl.tick(true);
  CHECK(ctl.dispatch() == std::vector<Instruction>{idle, idle, idle, leaf});
}

TEST_CASE("desk feed-forward layer is bit-exact in exact mode") {
  const HardwareConfig hw = desk_hw(NumericMode::kExact);
  const ModelSpec m = model_preset("desk");
  const LayerWeights w = synth_ffn_weights(m, 0xFFA);
  const MappingPlan plan = desk_ffn_plan(hw, m);
  LayerChiplet layer(plan, hw, m, w);

  std::mt19937_64 rng(0xF00);
  for (int rep = 0; rep < 3; ++rep) {
    std::vector<Value> x(m.embed_dim);
    for (auto& v : x) v = rng_range(rng, -8, 8);
    const auto got = layer.run_token(rep, x);
    const auto want = oracle::ffn_exact(oracle_weights(w, LayerKind::kFeedForward),
                                        std::vector<oracle::I64>(x.begin(), x.end()),
                                        m.embed_dim, m.ffn_dim);
    REQUIRE(got.size() == want.size());
    for (unsigned j = 0; j < want.size(); ++j) {
      INFO("element " << j);
      CHECK(got[j] == want[j]);
    }
  }
}

TEST_CASE("desk feed-forward layer tracks the double oracle in fixed mode") {
  const HardwareConfig hw = desk_hw(NumericMode::kFixed);
  const ModelSpec m = model_preset("desk");
  const LayerWeights w = synth_ffn_weights(m, 0xFFB);
  const MappingPlan plan = desk_ffn_plan(hw, m);
  LayerChiplet layer(plan, hw, m, w);

  std::mt19937_64 rng(0xF01);
  std::vector<double> xd(m.embed_dim);
  for (auto& v : xd) v = static_cast<double>(rng_range(rng, -1000, 1000)) / 1000.0;
  std::vector<Value> x(m.embed_dim);
  for (unsigned j = 0; j < m.embed_dim; ++j) x[j] = double_to_fixed(xd[j], hw.frac_bits);
  const auto got = layer.run_token(0, x);
  const auto want = oracle::ffn_double(oracle_weights(w, LayerKind::kFeedForward), xd,
                                       m.embed_dim, m.ffn_dim, hw.weight_frac_bits);
  double scale = 1.0;
  for (double v : want) scale = std::max(scale, std::abs(v));
  for (unsigned j = 0; j < want.size(); ++j) {
    const double gd = fixed_to_double(got[j], hw.frac_bits);
    INFO("element " << j << " got " << gd << " want " << want[j]);
    CHECK(std::abs(gd - want[j]) / scale < 1e-2);
  }
}

TEST_CASE("doubling the inner-loop unroll strictly reduces score cycles up to saturation") {
  const unsigned context = 64, head_dim = 64, hops = 6;
  Cycle prev = AttentionScheduler::score_stream_cycles(context, head_dim, hops, 1);
  for (unsigned unroll = 2; unroll <= 16; unroll *= 2) {
    const Cycle cur = AttentionScheduler::score_stream_cycles(context, head_dim, hops, unroll);
    CHECK(cur < prev);
    prev = cur;
  }
  // Past the MAC count (and the context) nothing more can be hidden.
  CHECK(AttentionScheduler::score_stream_cycles(context, head_dim, hops, 64) ==
        AttentionScheduler::score_stream_cycles(context, head_dim, hops, 128));
}
