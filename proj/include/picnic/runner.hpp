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
#include <memory>
#include <random>
#include <vector>

#include "picnic/mesh.hpp"
#include "picnic/schedule.hpp"

namespace picnic {

// ---------------------------------------------------------------------------
// Synthetic weights: seeded full-range int8. The query projection absorbs the
// 1/sqrt(head_dim) attention scale at programming time, so neither the mesh
// nor the softmax path needs a divider.
// ---------------------------------------------------------------------------

inline std::vector<std::int8_t> synth_matrix(std::mt19937_64& rng, unsigned rows,
                                             unsigned cols) {
  std::vector<std::int8_t> w(std::size_t(rows) * cols);
  for (auto& v : w) v = static_cast<std::int8_t>(rng_range(rng, -127, 127));
  return w;
}

inline void fold_query_scale(std::vector<std::int8_t>& wq, unsigned head_dim) {
  const double s = 1.0 / std::sqrt(static_cast<double>(head_dim));
  for (auto& v : wq)
    v = static_cast<std::int8_t>(std::llround(static_cast<double>(v) * s));
}

struct LayerWeights {
  std::map<MatrixId, std::vector<std::int8_t>> mats;
};

inline LayerWeights synth_attention_weights(const ModelSpec& m, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  LayerWeights w;
  w.mats[MatrixId::kWQ] = synth_matrix(rng, m.embed_dim, m.embed_dim);
  w.mats[MatrixId::kWK] = synth_matrix(rng, m.embed_dim, m.kv_dim);
  w.mats[MatrixId::kWV] = synth_matrix(rng, m.embed_dim, m.kv_dim);
  w.mats[MatrixId::kWO] = synth_matrix(rng, m.embed_dim, m.embed_dim);
  fold_query_scale(w.mats[MatrixId::kWQ], m.head_dim());
  return w;
}

inline LayerWeights synth_ffn_weights(const ModelSpec& m, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  LayerWeights w;
  w.mats[MatrixId::kWGate] = synth_matrix(rng, m.embed_dim, m.ffn_dim);
  w.mats[MatrixId::kWUp] = synth_matrix(rng, m.embed_dim, m.ffn_dim);
  w.mats[MatrixId::kWDown] = synth_matrix(rng, m.ffn_dim, m.embed_dim);
  return w;
}

inline void matrix_dims(const ModelSpec& m, MatrixId id, unsigned* rows, unsigned* cols) {
  switch (id) {
    case MatrixId::kWQ:
    case MatrixId::kWO: *rows = m.embed_dim, *cols = m.embed_dim; break;
    case MatrixId::kWK:
    case MatrixId::kWV: *rows = m.embed_dim, *cols = m.kv_dim; break;
    case MatrixId::kWGate:
    case MatrixId::kWUp: *rows = m.embed_dim, *cols = m.ffn_dim; break;
    case MatrixId::kWDown: *rows = m.ffn_dim, *cols = m.embed_dim; break;
  }
}

// ---------------------------------------------------------------------------
// One layer running on one simulated chiplet: programs the PEs from the
// plan's tile assignment, then executes one compiled step per token.
// ---------------------------------------------------------------------------

class LayerChiplet {
 public:
  LayerChiplet(const MappingPlan& plan, const HardwareConfig& hw, const ModelSpec& model,
               const LayerWeights& weights)
      : plan_(plan), hw_(hw), model_(model), tile_(std::make_unique<TileSim>(hw)) {
    for (const auto& pm : plan_.matrices) {
      unsigned rows = 0, cols = 0;
      matrix_dims(model, pm.id, &rows, &cols);
      const auto& full = weights.mats.at(pm.id);
      for (unsigned tr = 0; tr < pm.grid.rows; ++tr)
        for (unsigned tc = 0; tc < pm.grid.cols; ++tc) {
          const unsigned router = pm.tile_router(tr, tc, hw_.mesh_cols);
          const auto tile = extract_tile(full, rows, cols, hw_.pe_array, tr, tc);
          tile_->pe(router / hw_.mesh_cols, router % hw_.mesh_cols).program_tile(tile);
        }
    }
    if (plan_.kind == LayerKind::kAttention)
      attn_ = std::make_unique<AttentionScheduler>(plan_, hw_, model_);
    else
      ffn_ = std::make_unique<FfnScheduler>(plan_, hw_, model_);
  }

  TileSim& tile() { return *tile_; }
  const AttentionScheduler* attention() const { return attn_.get(); }

  // Runs one token through the layer and returns its output vector.
  std::vector<Value> run_token(unsigned token_index, const std::vector<Value>& x,
                               Cycle budget = 20'000'000) {
    const CompiledStep step =
        attn_ ? attn_->step(token_index, x) : ffn_->step(x);
    const Cycle start = tile_->now();
    for (const auto& img : step.images) tile_->queue_image(img);
    for (const auto& [router, payload] : step.injections) tile_->inject(router, payload);
    tile_->run(budget);
    last_step_cycles_ = tile_->now() - start;
    last_phases_ = step.phases;

    std::vector<Value> out;
    const auto refs = attn_ ? attn_->output_refs() : ffn_->output_refs();
    for (const auto& ref : refs)
      for (unsigned k = 0; k < ref.len; ++k)
        out.push_back(tile_->router_by_id(ref.router).sp_read(
            static_cast<std::uint16_t>(ref.addr + k)));
    return out;
  }

  Cycle last_step_cycles() const { return last_step_cycles_; }
  const std::vector<PhaseRecord>& last_phases() const { return last_phases_; }

 private:
  MappingPlan plan_;
  HardwareConfig hw_;
  ModelSpec model_;
  std::unique_ptr<TileSim> tile_;
  std::unique_ptr<AttentionScheduler> attn_;
  std::unique_ptr<FfnScheduler> ffn_;
  Cycle last_step_cycles_ = 0;
  std::vector<PhaseRecord> last_phases_;
};

// Desk-scale plans: one chiplet per layer, all of a layer's matrices placed
// together (attention in K-Q-V-O channel order).
inline MappingPlan desk_attention_plan(const HardwareConfig& hw, const ModelSpec& m,
                                       unsigned max_context) {
  const unsigned pe = hw.pe_array;
  std::vector<PlacementRequest> req = {
      {MatrixId::kWK, 0, partition(m.embed_dim, m.kv_dim, pe)},
      {MatrixId::kWQ, 0, partition(m.embed_dim, m.embed_dim, pe)},
      {MatrixId::kWV, 0, partition(m.embed_dim, m.kv_dim, pe)},
      {MatrixId::kWO, 0, partition(m.embed_dim, m.embed_dim, pe)},
  };
  return place(req, hw, LayerKind::kAttention, max_context, m.kv_dim);
}

inline MappingPlan desk_ffn_plan(const HardwareConfig& hw, const ModelSpec& m) {
  const unsigned pe = hw.pe_array;
  std::vector<PlacementRequest> req = {
      {MatrixId::kWGate, 1, partition(m.embed_dim, m.ffn_dim, pe)},
      {MatrixId::kWUp, 2, partition(m.embed_dim, m.ffn_dim, pe)},
      {MatrixId::kWDown, 3, partition(m.ffn_dim, m.embed_dim, pe)},
  };
  return place(req, hw, LayerKind::kFeedForward);
}

}  // namespace picnic
