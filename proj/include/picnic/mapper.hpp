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

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <map>
#include <optional>
#include <queue>
#include <string>
#include <vector>

#include <json.hpp>

#include "picnic/common.hpp"
#include "picnic/config.hpp"
#include "picnic/model.hpp"

namespace picnic {

// ---------------------------------------------------------------------------
// Partitioning: matrices are cut into PE-sized tiles along both dimensions;
// edge tiles are zero-padded.
// ---------------------------------------------------------------------------

struct TileGrid {
  unsigned rows = 0;  // tile rows (input direction)
  unsigned cols = 0;  // tile cols (output direction)
  unsigned count() const { return rows * cols; }
};

inline TileGrid partition(unsigned matrix_rows, unsigned matrix_cols, unsigned tile) {
  if (matrix_rows == 0 || matrix_cols == 0) throw Error("cannot partition an empty matrix");
  return TileGrid{(matrix_rows + tile - 1) / tile, (matrix_cols + tile - 1) / tile};
}

// ---------------------------------------------------------------------------
// Spanning trees for collectives: BFS over a router set with neighbors
// explored in N, E, S, W order.
// ---------------------------------------------------------------------------

struct SpanTree {
  unsigned root = 0;
  std::vector<std::pair<unsigned, unsigned>> edges;  // (parent, child), BFS order
  std::map<unsigned, unsigned> parent;
  std::map<unsigned, unsigned> level;
  unsigned depth = 0;
};

inline SpanTree spanning_tree(const std::vector<unsigned>& region, unsigned root,
                              unsigned mesh_rows, unsigned mesh_cols) {
  std::map<unsigned, bool> in_region;
  for (unsigned r : region) in_region[r] = true;
  if (!in_region.count(root)) throw Error("spanning tree root outside the region");

  SpanTree t;
  t.root = root;
  t.level[root] = 0;
  std::queue<unsigned> frontier;
  frontier.push(root);
  while (!frontier.empty()) {
    const unsigned u = frontier.front();
    frontier.pop();
    const unsigned row = u / mesh_cols, col = u % mesh_cols;
    const int neighbors[4] = {
        row > 0 ? static_cast<int>(u - mesh_cols) : -1,              // N
        col + 1 < mesh_cols ? static_cast<int>(u + 1) : -1,          // E
        row + 1 < mesh_rows ? static_cast<int>(u + mesh_cols) : -1,  // S
        col > 0 ? static_cast<int>(u - 1) : -1,                      // W
    };
    for (int vi : neighbors) {
      if (vi < 0) continue;
      const unsigned v = static_cast<unsigned>(vi);
      if (!in_region.count(v) || t.level.count(v)) continue;
      t.level[v] = t.level[u] + 1;
      t.parent[v] = u;
      t.edges.emplace_back(u, v);
      t.depth = std::max(t.depth, t.level[v]);
      frontier.push(v);
    }
  }
  if (t.level.size() != in_region.size()) throw Error("region is disconnected in the mesh");
  return t;
}

// ---------------------------------------------------------------------------
// Placement: column-wise rectangular regions per matrix, in channel order.
// ---------------------------------------------------------------------------

struct Region {
  unsigned row0 = 0, col0 = 0, rows = 0, cols = 0;
  unsigned cells() const { return rows * cols; }
  bool contains(unsigned row, unsigned col) const {
    return row >= row0 && row < row0 + rows && col >= col0 && col < col0 + cols;
  }
};

struct PlacedMatrix {
  MatrixId id;
  unsigned layer_index = 0;
  TileGrid grid;          // full tile grid of this (part of a) matrix
  Region region;          // routers it occupies
  bool row_major = true;  // tile order within the region

  // Router holding tile (tr, tc).
  unsigned tile_router(unsigned tr, unsigned tc, unsigned mesh_cols) const {
    const unsigned k = tr * grid.cols + tc;
    const unsigned lr = row_major ? k / region.cols : k % region.rows;
    const unsigned lc = row_major ? k % region.cols : k / region.rows;
    return (region.row0 + lr) * mesh_cols + (region.col0 + lc);
  }

  std::vector<unsigned> routers(unsigned mesh_cols) const {
    std::vector<unsigned> out;
    out.reserve(grid.count());
    for (unsigned tr = 0; tr < grid.rows; ++tr)
      for (unsigned tc = 0; tc < grid.cols; ++tc) out.push_back(tile_router(tr, tc, mesh_cols));
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }

  // Routers holding one tile row / tile column.
  std::vector<unsigned> row_group(unsigned tr, unsigned mesh_cols) const {
    std::vector<unsigned> out;
    for (unsigned tc = 0; tc < grid.cols; ++tc) out.push_back(tile_router(tr, tc, mesh_cols));
    return out;
  }
  std::vector<unsigned> col_group(unsigned tc, unsigned mesh_cols) const {
    std::vector<unsigned> out;
    for (unsigned tr = 0; tr < grid.rows; ++tr) out.push_back(tile_router(tr, tc, mesh_cols));
    return out;
  }
};

struct ScratchRange {
  std::uint16_t base = 0;
  std::uint16_t words = 0;
};

struct RoleAlloc {
  std::vector<unsigned> routers;
  ScratchRange range;
};

struct KvAlloc {
  std::vector<unsigned> owners;      // cyclic scratchpad set
  std::uint16_t base = 0;            // uniform range on every owner
  std::uint16_t words_per_vector = 0;
  unsigned tokens_per_owner = 0;
  unsigned max_context() const {
    return static_cast<unsigned>(owners.size()) * tokens_per_owner;
  }
};

struct MappingPlan {
  unsigned mesh_rows = 0, mesh_cols = 0;
  unsigned pe_array = 0;
  LayerKind kind = LayerKind::kAttention;
  std::vector<PlacedMatrix> matrices;
  std::map<std::string, RoleAlloc> scratch;  // intermediates: Q, K, V, S
  KvAlloc kv_k, kv_v;
  unsigned mapped_tiles = 0;

  double utilization() const {
    return static_cast<double>(mapped_tiles) / (mesh_rows * mesh_cols);
  }
  const PlacedMatrix& matrix(MatrixId id) const {
    for (const auto& m : matrices)
      if (m.id == id) return m;
    throw Error(std::string("plan does not place ") + to_string(id));
  }
  bool has(MatrixId id) const {
    for (const auto& m : matrices)
      if (m.id == id) return true;
    return false;
  }
};

struct PlacementRequest {
  MatrixId id;
  unsigned layer_index;
  TileGrid grid;
};

struct PlacementCandidate {
  unsigned height;
  bool row_major;
  std::vector<Region> regions;  // one per request, in order
};

// Every candidate the heuristic considers: common region heights with the
// matrices side by side in request (channel) order, tiles filled row-major or
// column-major.
inline std::vector<PlacementCandidate> enumerate_placements(
    const std::vector<PlacementRequest>& mats, const HardwareConfig& hw) {
  unsigned total = 0;
  for (const auto& m : mats) total += m.grid.count();
  if (total > hw.router_count())
    throw CapacityError("layer needs " + std::to_string(total) + " tiles > " +
                        std::to_string(hw.router_count()) + " router-PE pairs; split across " +
                        std::to_string((total + hw.router_count() - 1) / hw.router_count()) +
                        " chiplets");
  std::vector<PlacementCandidate> out;
  for (unsigned h = 1; h <= hw.mesh_rows; ++h) {
    unsigned col = 0;
    std::vector<Region> regions;
    bool ok = true;
    for (const auto& m : mats) {
      const unsigned rows = std::min(h, m.grid.count());
      const unsigned cols = (m.grid.count() + rows - 1) / rows;
      if (col + cols > hw.mesh_cols) {
        ok = false;
        break;
      }
      regions.push_back(Region{0, col, rows, cols});
      col += cols;
    }
    if (!ok) continue;
    for (bool rm : {true, false}) out.push_back({h, rm, regions});
  }
  if (out.empty()) throw CapacityError("no feasible column arrangement for this layer");
  return out;
}

// Collective cost of one placed matrix: every input-broadcast group (a tile
// row) and output-reduce group (a tile column) moves one tile-sized vector
// per member to or from the group head, so its cost is the summed hop count
// times the tile words.
inline std::uint64_t collective_cost(const PlacedMatrix& m, const HardwareConfig& hw) {
  auto hops = [&](unsigned a, unsigned b) {
    const int ar = static_cast<int>(a / hw.mesh_cols), ac = static_cast<int>(a % hw.mesh_cols);
    const int br = static_cast<int>(b / hw.mesh_cols), bc = static_cast<int>(b % hw.mesh_cols);
    return static_cast<std::uint64_t>(std::abs(ar - br) + std::abs(ac - bc));
  };
  std::uint64_t cost = 0;
  auto group_cost = [&](const std::vector<unsigned>& group) {
    std::uint64_t c = 0;
    for (unsigned r : group) c += hops(group.front(), r);
    return c * hw.pe_array;
  };
  for (unsigned tr = 0; tr < m.grid.rows; ++tr) cost += group_cost(m.row_group(tr, hw.mesh_cols));
  for (unsigned tc = 0; tc < m.grid.cols; ++tc) cost += group_cost(m.col_group(tc, hw.mesh_cols));
  return cost;
}

inline MappingPlan realize_placement(const std::vector<PlacementRequest>& mats,
                                     const PlacementCandidate& cand, const HardwareConfig& hw,
                                     LayerKind kind) {
  MappingPlan plan;
  plan.mesh_rows = hw.mesh_rows;
  plan.mesh_cols = hw.mesh_cols;
  plan.pe_array = hw.pe_array;
  plan.kind = kind;
  for (std::size_t i = 0; i < mats.size(); ++i) {
    PlacedMatrix pm;
    pm.id = mats[i].id;
    pm.layer_index = mats[i].layer_index;
    pm.grid = mats[i].grid;
    pm.region = cand.regions[i];
    pm.row_major = cand.row_major;
    plan.matrices.push_back(pm);
    plan.mapped_tiles += pm.grid.count();
  }
  return plan;
}

inline std::uint64_t plan_cost(const MappingPlan& plan, const HardwareConfig& hw) {
  std::uint64_t c = 0;
  for (const auto& m : plan.matrices) c += collective_cost(m, hw);
  return c;
}

// ---------------------------------------------------------------------------
// KV-cache allocation. Vectors are stored whole, cyclically across a set of
// owner scratchpads with one shared address window, so occupancy stays
// balanced for any context length. When the weight-matrix region alone
// cannot hold the requested context, the set extends to idle routers of the
// same chiplet.
// ---------------------------------------------------------------------------

inline std::uint16_t kv_window_base(const HardwareConfig& hw) {
  return static_cast<std::uint16_t>(hw.scratchpad_words / 8);
}

inline KvAlloc plan_kv(const MappingPlan& plan, const HardwareConfig& hw, MatrixId weight,
                       unsigned kv_dim, unsigned max_context,
                       const std::vector<unsigned>& spill_pool, std::size_t* spill_cursor) {
  KvAlloc kv;
  kv.base = kv_window_base(hw);
  const unsigned epw = std::max(1u, hw.kv_entries_per_word);
  kv.words_per_vector = static_cast<std::uint16_t>((kv_dim + epw - 1) / epw);
  const unsigned window = hw.scratchpad_words - 16 - kv.base;  // config region reserved
  kv.tokens_per_owner = window / kv.words_per_vector;
  if (kv.tokens_per_owner == 0)
    throw CapacityError("a single KV vector exceeds the per-router scratchpad window");

  kv.owners = plan.matrix(weight).routers(hw.mesh_cols);
  while (kv.max_context() < max_context && *spill_cursor < spill_pool.size())
    kv.owners.push_back(spill_pool[(*spill_cursor)++]);
  if (kv.max_context() < max_context)
    throw CapacityError("KV capacity exceeded: plan supports a context of " +
                        std::to_string(kv.max_context()) + " < " + std::to_string(max_context));
  return kv;
}

struct KvSlot {
  unsigned owner_router;
  std::uint16_t addr;
};

// Cyclic placement: token t lands on owner t mod m.
inline KvSlot kv_append(const KvAlloc& kv, unsigned token_index) {
  const unsigned m = static_cast<unsigned>(kv.owners.size());
  const unsigned slot = token_index / m;
  if (slot >= kv.tokens_per_owner)
    throw CapacityError("KV capacity exceeded at token " + std::to_string(token_index) +
                        " (max context " + std::to_string(kv.max_context()) + ")");
  return KvSlot{kv.owners[token_index % m],
                static_cast<std::uint16_t>(kv.base + slot * kv.words_per_vector)};
}

// ---------------------------------------------------------------------------
// place(): channel-ordered placement minimizing the collective cost model.
// Attention layers pass their matrices in K-Q-V-O channel order.
// ---------------------------------------------------------------------------

inline MappingPlan place(const std::vector<PlacementRequest>& mats, const HardwareConfig& hw,
                         LayerKind kind, unsigned max_context = 0, unsigned kv_dim = 0) {
  const auto candidates = enumerate_placements(mats, hw);
  std::optional<MappingPlan> best;
  std::uint64_t best_cost = 0;
  for (const auto& cand : candidates) {
    MappingPlan plan = realize_placement(mats, cand, hw, kind);
    const std::uint64_t cost = plan_cost(plan, hw);
    if (!best || cost < best_cost) {
      best = std::move(plan);
      best_cost = cost;
    }
  }
  MappingPlan plan = std::move(*best);

  // Intermediates are co-located with their weight matrices.
  const std::uint16_t pe = static_cast<std::uint16_t>(hw.pe_array);
  auto role = [&](const char* name, MatrixId weight, std::uint16_t base, std::uint16_t words) {
    if (!plan.has(weight)) return;
    plan.scratch[name] = RoleAlloc{plan.matrix(weight).routers(hw.mesh_cols), {base, words}};
  };
  if (kind == LayerKind::kAttention && plan.has(MatrixId::kWQ)) {
    role("Q", MatrixId::kWQ, static_cast<std::uint16_t>(2 * pe), pe);
    role("K", MatrixId::kWK, static_cast<std::uint16_t>(2 * pe), pe);
    role("V", MatrixId::kWV, static_cast<std::uint16_t>(2 * pe), pe);
    // Scores live beside the query tiles, which keeps the softmax traffic
    // inside the Q channel.
    role("S", MatrixId::kWQ, static_cast<std::uint16_t>(3 * pe), pe);

    if (max_context > 0) {
      std::vector<unsigned> spill;
      std::vector<bool> used(hw.router_count(), false);
      for (const auto& m : plan.matrices)
        for (unsigned r : m.routers(hw.mesh_cols)) used[r] = true;
      for (unsigned r = 0; r < hw.router_count(); ++r)
        if (!used[r]) spill.push_back(r);
      std::size_t cursor = 0;
      plan.kv_k = plan_kv(plan, hw, MatrixId::kWK, kv_dim, max_context, spill, &cursor);
      plan.kv_v = plan_kv(plan, hw, MatrixId::kWV, kv_dim, max_context, spill, &cursor);
    }
  }
  return plan;
}

// ---------------------------------------------------------------------------
// Model-level chiplet assignment. Every layer that fits gets a dedicated
// chiplet; oversized layers split into chiplet-filling pieces, and the
// remainder pieces of one decoder coalesce into shared chiplets (first-fit),
// which keeps the sleeping-chiplet floor low without spanning decoders.
// ---------------------------------------------------------------------------

struct ChipletPart {
  unsigned layer_index;
  LayerKind kind;
  MatrixId id;
  unsigned grid_rows;
  unsigned grid_col0;
  unsigned grid_cols;
  unsigned tiles() const { return grid_rows * grid_cols; }
};

struct ChipletLoad {
  unsigned id = 0;
  unsigned decoder = 0;
  std::vector<ChipletPart> parts;
  unsigned tiles = 0;
  bool uses_scu = false;

  double utilization(const HardwareConfig& hw) const {
    return static_cast<double>(tiles) / hw.router_count();
  }
};

// A part set is placeable when some common region height lays the matrices
// out side by side within the mesh columns.
inline bool parts_placeable(const std::vector<ChipletPart>& parts, const HardwareConfig& hw) {
  unsigned tiles = 0;
  for (const auto& p : parts) tiles += p.tiles();
  if (tiles > hw.router_count()) return false;
  for (unsigned h = 1; h <= hw.mesh_rows; ++h) {
    unsigned cols = 0;
    for (const auto& p : parts) {
      const unsigned rows = std::min(h, p.tiles());
      cols += (p.tiles() + rows - 1) / rows;
    }
    if (cols <= hw.mesh_cols) return true;
  }
  return false;
}

inline std::vector<ChipletLoad> assign_chiplets(const ModelSpec& model,
                                                const HardwareConfig& hw) {
  const auto layers = layer_sequence(model);
  std::vector<ChipletLoad> out;

  auto finalize = [&](ChipletLoad&& load) {
    load.id = static_cast<unsigned>(out.size());
    load.tiles = 0;
    load.uses_scu = false;
    for (const auto& p : load.parts) {
      load.tiles += p.tiles();
      load.uses_scu = load.uses_scu || p.kind == LayerKind::kAttention;
    }
    out.push_back(std::move(load));
  };

  unsigned decoder = 0;
  std::vector<ChipletLoad> remainder_bins;
  auto flush_remainders = [&] {
    for (auto& bin : remainder_bins) finalize(std::move(bin));
    remainder_bins.clear();
  };

  for (const auto& layer : layers) {
    if (layer.decoder != decoder) {
      flush_remainders();
      decoder = layer.decoder;
    }
    // Expand the layer into per-matrix column strips.
    std::vector<ChipletPart> strips;
    for (const auto& m : layer.matrices) {
      const TileGrid g = partition(m.rows, m.cols, hw.pe_array);
      if (g.rows > hw.router_count())
        throw CapacityError("a single tile column exceeds the chiplet capacity");
      strips.push_back({layer.index, layer.kind, m.id, g.rows, 0, g.cols});
    }
    if (parts_placeable(strips, hw)) {
      ChipletLoad load;
      load.decoder = layer.decoder;
      load.parts = std::move(strips);
      finalize(std::move(load));
      continue;
    }
    // Greedy max-fill split along matrix columns, constrained to placeable
    // part sets; every piece but the tail gets a dedicated chiplet.
    ChipletLoad piece;
    piece.decoder = layer.decoder;
    for (const auto& s : strips) {
      unsigned col = 0;
      while (col < s.grid_cols) {
        // Largest column chunk the current piece still accommodates.
        unsigned take = 0;
        for (unsigned c = s.grid_cols - col; c >= 1; --c) {
          auto trial = piece.parts;
          trial.push_back({s.layer_index, s.kind, s.id, s.grid_rows, col, c});
          if (parts_placeable(trial, hw)) {
            take = c;
            break;
          }
        }
        if (take == 0) {
          if (piece.parts.empty())
            throw CapacityError("matrix strip does not fit an empty chiplet");
          finalize(std::move(piece));
          piece = ChipletLoad{};
          piece.decoder = layer.decoder;
          continue;
        }
        piece.parts.push_back({s.layer_index, s.kind, s.id, s.grid_rows, col, take});
        col += take;
      }
    }
    if (piece.parts.empty()) continue;
    // Tail piece: first-fit into this decoder's shared bins.
    bool placed = false;
    for (auto& bin : remainder_bins) {
      auto trial = bin.parts;
      for (const auto& p : piece.parts) trial.push_back(p);
      if (parts_placeable(trial, hw)) {
        bin.parts = std::move(trial);
        placed = true;
        break;
      }
    }
    if (!placed) remainder_bins.push_back(std::move(piece));
  }
  flush_remainders();
  return out;
}

// ---------------------------------------------------------------------------
// Plan serialization (versioned) and the binary weight-tile format: row-major
// int8, pe_array^2 entries per tile, tiles in row-major grid order.
// ---------------------------------------------------------------------------

inline nlohmann::json plan_to_json(const MappingPlan& plan) {
  nlohmann::json j;
  j["version"] = 1;
  j["mesh_rows"] = plan.mesh_rows;
  j["mesh_cols"] = plan.mesh_cols;
  j["pe_array"] = plan.pe_array;
  j["kind"] = to_string(plan.kind);
  j["mapped_tiles"] = plan.mapped_tiles;
  j["utilization"] = plan.utilization();
  auto& mats = j["matrices"] = nlohmann::json::array();
  for (const auto& m : plan.matrices) {
    mats.push_back({{"id", to_string(m.id)},
                    {"layer", m.layer_index},
                    {"grid", {m.grid.rows, m.grid.cols}},
                    {"region", {m.region.row0, m.region.col0, m.region.rows, m.region.cols}},
                    {"row_major", m.row_major}});
  }
  auto& scratch = j["scratch"] = nlohmann::json::object();
  for (const auto& [name, alloc] : plan.scratch)
    scratch[name] = {{"routers", alloc.routers},
                     {"base", alloc.range.base},
                     {"words", alloc.range.words}};
  auto kv_json = [](const KvAlloc& kv) {
    return nlohmann::json{{"owners", kv.owners},
                          {"base", kv.base},
                          {"words_per_vector", kv.words_per_vector},
                          {"tokens_per_owner", kv.tokens_per_owner}};
  };
  if (!plan.kv_k.owners.empty()) j["kv_k"] = kv_json(plan.kv_k);
  if (!plan.kv_v.owners.empty()) j["kv_v"] = kv_json(plan.kv_v);
  return j;
}

inline std::vector<std::int8_t> extract_tile(const std::vector<std::int8_t>& matrix,
                                             unsigned rows, unsigned cols, unsigned tile,
                                             unsigned tr, unsigned tc) {
  std::vector<std::int8_t> out(std::size_t(tile) * tile, 0);
  for (unsigned r = 0; r < tile; ++r) {
    const unsigned mr = tr * tile + r;
    if (mr >= rows) break;
    for (unsigned c = 0; c < tile; ++c) {
      const unsigned mc = tc * tile + c;
      if (mc >= cols) break;
      out[std::size_t(r) * tile + c] = matrix[std::size_t(mr) * cols + mc];
    }
  }
  return out;
}

}  // namespace picnic
