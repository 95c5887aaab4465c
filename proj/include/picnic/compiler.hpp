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

#include <functional>
#include <map>
#include <vector>

#include "picnic/config.hpp"
#include "picnic/isa.hpp"
#include "picnic/mapper.hpp"

namespace picnic {

// ---------------------------------------------------------------------------
// Program construction. A row carries at most two distinct commands; the
// builder packs per-router assignments into rows, splitting one-shot steps
// automatically and refusing to split streams (the caller pairs those).
//
// Stream rows exploit the barrier pipeline: a producer-to-consumer chain
// placed in a single row advances one word end to end per iteration, so FIFO
// occupancy stays at one or two flits regardless of stream length. Chains
// whose forwarding directions change are emitted as one row per straight
// segment with the stream chunked to the FIFO depth.
// ---------------------------------------------------------------------------

class ProgramBuilder {
 public:
  explicit ProgramBuilder(const HardwareConfig& hw)
      : hw_(hw), n_(hw.router_count()) {}

  unsigned router_count() const { return n_; }
  std::size_t row_count() const { return rows_.size(); }

  // One-shot step: any number of distinct commands, split greedily two per row.
  void step(const std::map<unsigned, Instruction>& cmds) {
    std::vector<std::pair<std::uint32_t, Instruction>> groups;  // (word, ins)
    std::map<std::uint32_t, std::vector<unsigned>> members;
    for (const auto& [router, ins] : cmds) {
      const auto word = encode(ins);
      if (!members.count(word)) groups.emplace_back(word, ins);
      members[word].push_back(router);
    }
    for (std::size_t g = 0; g < groups.size(); g += 2) {
      NpmRow row;
      row.select.assign(n_, kSelIdle);
      row.repeat = 1;
      row.cmd1 = groups[g].second;
      for (unsigned r : members[groups[g].first]) row.select[r] = kSelCmd1;
      if (g + 1 < groups.size()) {
        row.cmd2 = groups[g + 1].second;
        for (unsigned r : members[groups[g + 1].first]) row.select[r] = kSelCmd2;
      }
      rows_.push_back(std::move(row));
    }
  }

  // Stream row: every listed router runs its command `repeat` times under the
  // row barrier. At most two distinct commands.
  void stream(const std::map<unsigned, Instruction>& cmds, std::uint32_t repeat) {
    NpmRow row;
    row.select.assign(n_, kSelIdle);
    row.repeat = repeat;
    bool have1 = false, have2 = false;
    for (const auto& [router, ins] : cmds) {
      if (have1 && encode(ins) == encode(row.cmd1)) {
        row.select[router] = kSelCmd1;
      } else if (have2 && encode(ins) == encode(row.cmd2)) {
        row.select[router] = kSelCmd2;
      } else if (!have1) {
        row.cmd1 = ins;
        row.select[router] = kSelCmd1;
        have1 = true;
      } else if (!have2) {
        row.cmd2 = ins;
        row.select[router] = kSelCmd2;
        have2 = true;
      } else {
        throw Error("stream row needs more than two distinct commands");
      }
    }
    rows_.push_back(std::move(row));
  }

  const std::vector<NpmRow>& rows() const { return rows_; }

  // Splits the program into bank-alternating images sized for the double
  // buffer, so configuration of the next image overlaps execution.
  std::vector<NpmImage> images() const {
    std::vector<NpmImage> out;
    std::size_t pos = 0;
    unsigned bank = 1;
    while (pos < rows_.size()) {
      const std::size_t n = std::min<std::size_t>(hw_.npm_rows_per_bank, rows_.size() - pos);
      NpmImage img;
      img.mesh_rows = hw_.mesh_rows;
      img.mesh_cols = hw_.mesh_cols;
      auto& dst = bank == 1 ? img.bank1 : img.bank2;
      dst.assign(rows_.begin() + pos, rows_.begin() + pos + n);
      img.csr["START_BANK"] = bank;
      out.push_back(std::move(img));
      pos += n;
      bank = bank == 1 ? 2 : 1;
    }
    return out;
  }

 private:
  HardwareConfig hw_;
  unsigned n_;
  std::vector<NpmRow> rows_;
};

// ---------------------------------------------------------------------------
// XY paths: row direction first, then column. The path is the list of
// straight segments; each segment's forwarders share one instruction.
// ---------------------------------------------------------------------------

struct PathSegment {
  std::vector<unsigned> forwarders;  // routers that forward along this leg
  unsigned in_port;                  // port they pop from
  unsigned out_port;                 // port they push to
};

struct XyPath {
  unsigned src, dst;
  unsigned src_out_port = kPortCount;  // direction the source pushes
  unsigned dst_in_port = kPortCount;   // port the destination pops
  std::vector<PathSegment> segments;   // empty for adjacent routers
  unsigned hops = 0;
};

inline XyPath xy_path(unsigned src, unsigned dst, unsigned mesh_cols, bool column_first = false) {
  XyPath p;
  p.src = src;
  p.dst = dst;
  if (src == dst) throw Error("xy_path needs distinct endpoints");
  const int sr = static_cast<int>(src / mesh_cols), sc = static_cast<int>(src % mesh_cols);
  const int dr = static_cast<int>(dst / mesh_cols), dc = static_cast<int>(dst % mesh_cols);

  std::vector<unsigned> nodes;  // src, intermediates..., dst
  int r = sr, c = sc;
  nodes.push_back(src);
  auto walk_cols = [&] {
    while (c != dc) {
      c += dc > c ? 1 : -1;
      nodes.push_back(static_cast<unsigned>(r) * mesh_cols + static_cast<unsigned>(c));
    }
  };
  auto walk_rows = [&] {
    while (r != dr) {
      r += dr > r ? 1 : -1;
      nodes.push_back(static_cast<unsigned>(r) * mesh_cols + static_cast<unsigned>(c));
    }
  };
  if (column_first) {
    walk_rows();
    walk_cols();
  } else {
    walk_cols();
    walk_rows();
  }
  p.hops = static_cast<unsigned>(nodes.size() - 1);

  auto dir_between = [&](unsigned a, unsigned b) -> unsigned {
    if (b == a + 1) return kPortE;
    if (a == b + 1) return kPortW;
    if (b == a + mesh_cols) return kPortS;
    return kPortN;
  };
  p.src_out_port = dir_between(nodes[0], nodes[1]);
  p.dst_in_port = opposite_port(dir_between(nodes[nodes.size() - 2], nodes.back()));

  // Intermediate nodes grouped into straight segments.
  PathSegment seg;
  for (std::size_t i = 1; i + 1 < nodes.size(); ++i) {
    const unsigned in = opposite_port(dir_between(nodes[i - 1], nodes[i]));
    const unsigned out = dir_between(nodes[i], nodes[i + 1]);
    if (!seg.forwarders.empty() && (in != seg.in_port || out != seg.out_port)) {
      p.segments.push_back(seg);
      seg = PathSegment{};
    }
    if (seg.forwarders.empty()) {
      seg.in_port = in;
      seg.out_port = out;
    }
    seg.forwarders.push_back(nodes[i]);
  }
  if (!seg.forwarders.empty()) p.segments.push_back(seg);
  return p;
}

// ---------------------------------------------------------------------------
// Scratchpad-to-scratchpad streams over an XY path, chunked to the FIFO
// depth. The consumer instruction is built per chunk so its base address
// tracks the chunk offset.
// ---------------------------------------------------------------------------

using ConsumerFn =
    std::function<Instruction(unsigned in_port, std::uint16_t chunk_offset)>;

inline Instruction make_spwr(unsigned in_port, std::uint16_t addr) {
  Instruction c;
  c.mode_sel = static_cast<std::uint8_t>(Mode::kSpWrite);
  c.rd_en = static_cast<std::uint8_t>(1u << in_port);
  c.intxfer_en = true;
  c.sp_addr = addr;
  return c;
}

inline Instruction make_sprd(unsigned out_port, std::uint16_t addr) {
  Instruction c;
  c.mode_sel = static_cast<std::uint8_t>(Mode::kSpRead);
  c.out_en = static_cast<std::uint8_t>(1u << out_port);
  c.sp_addr = addr;
  return c;
}

inline Instruction make_route(unsigned in_port, std::uint8_t out_mask, bool tap = false,
                              std::uint16_t addr = 0) {
  Instruction c;
  c.mode_sel = static_cast<std::uint8_t>(Mode::kRoute);
  c.rd_en = static_cast<std::uint8_t>(1u << in_port);
  c.out_en = out_mask;
  c.intxfer_en = tap;
  c.sp_addr = addr;
  return c;
}

inline Instruction make_sprd_mask(std::uint8_t out_mask, std::uint16_t addr) {
  Instruction c;
  c.mode_sel = static_cast<std::uint8_t>(Mode::kSpRead);
  c.out_en = out_mask;
  c.sp_addr = addr;
  return c;
}

// Streams `len` words from src scratchpad [src_base..] along a prepared path;
// the destination runs consumer(in_port, chunk_offset).
inline void emit_stream_path(ProgramBuilder& b, const HardwareConfig& hw, unsigned src,
                             std::uint16_t src_base, const XyPath& path,
                             const ConsumerFn& consumer, unsigned len) {
  unsigned off = 0;
  while (off < len) {
    const unsigned chunk = std::min(len - off, hw.fifo_depth);
    // Producer leg.
    b.stream({{src, make_sprd(path.src_out_port, static_cast<std::uint16_t>(src_base + off))}},
             chunk);
    // Forwarding legs, one row per straight segment.
    for (const auto& seg : path.segments) {
      std::map<unsigned, Instruction> cmds;
      const Instruction fwd =
          make_route(seg.in_port, static_cast<std::uint8_t>(1u << seg.out_port));
      for (unsigned f : seg.forwarders) cmds[f] = fwd;
      b.stream(cmds, chunk);
    }
    // Consumer leg.
    b.stream({{path.dst, consumer(path.dst_in_port, static_cast<std::uint16_t>(off))}}, chunk);
    off += chunk;
  }
}

// Convenience XY form. Source and destination must differ.
inline void emit_stream(ProgramBuilder& b, const HardwareConfig& hw, unsigned src,
                        std::uint16_t src_base, unsigned dst, const ConsumerFn& consumer,
                        unsigned len) {
  emit_stream_path(b, hw, src, src_base, xy_path(src, dst, hw.mesh_cols), consumer, len);
}

// ---------------------------------------------------------------------------
// Single-flit collectives over spanning trees.
//
// Broadcast: the root's scratchpad word reaches every region router exactly
// once (stored at dst_addr). Reduce: every router's scratchpad word at
// src_addr is summed into the root's dst_addr, using the partial-summation
// macro with the scratchpad operand at internal nodes.
// ---------------------------------------------------------------------------

inline unsigned port_towards(unsigned from, unsigned to, unsigned mesh_cols) {
  if (to == from + 1) return kPortE;
  if (from == to + 1) return kPortW;
  if (to == from + mesh_cols) return kPortS;
  if (from == to + mesh_cols) return kPortN;
  throw Error("routers are not adjacent");
}

inline void emit_tree_broadcast(ProgramBuilder& b, const HardwareConfig& hw, const SpanTree& t,
                                std::uint16_t src_addr, std::uint16_t dst_addr) {
  // children[u] in BFS order.
  std::map<unsigned, std::vector<unsigned>> children;
  for (const auto& [parent, child] : t.edges) children[parent].push_back(child);

  // Level 0: the root pushes its word to every child direction.
  std::uint8_t root_out = 0;
  for (unsigned c : children[t.root])
    root_out |= static_cast<std::uint8_t>(1u << port_towards(t.root, c, hw.mesh_cols));
  if (root_out == 0) return;
  b.step({{t.root, make_sprd_mask(root_out, src_addr)}});

  // Level by level: each node forwards to its children and taps a copy.
  std::map<unsigned, std::vector<unsigned>> by_level;
  for (const auto& [node, lvl] : t.level)
    if (node != t.root) by_level[lvl].push_back(node);
  for (const auto& [lvl, nodes] : by_level) {
    std::map<unsigned, Instruction> cmds;
    for (unsigned u : nodes) {
      std::uint8_t out = 0;
      for (unsigned c : children[u])
        out |= static_cast<std::uint8_t>(1u << port_towards(u, c, hw.mesh_cols));
      const unsigned in = port_towards(u, t.parent.at(u), hw.mesh_cols);
      cmds[u] = make_route(in, out, /*tap=*/true, dst_addr);
    }
    b.step(cmds);
  }
}

// Sums every region router's word at `addr` into the root's `addr`.
inline void emit_tree_reduce(ProgramBuilder& b, const HardwareConfig& hw, const SpanTree& t,
                             std::uint16_t addr) {
  std::map<unsigned, std::vector<unsigned>> children;
  for (const auto& [parent, child] : t.edges) children[parent].push_back(child);
  std::map<unsigned, std::vector<unsigned>> by_level;
  unsigned max_level = 0;
  for (const auto& [node, lvl] : t.level) {
    by_level[lvl].push_back(node);
    max_level = std::max(max_level, lvl);
  }
  // Deepest level first; leaves send, internal nodes fold the children into
  // their own value and forward, the root folds and stores.
  for (unsigned lvl = max_level;; --lvl) {
    std::map<unsigned, Instruction> cmds;
    for (unsigned u : by_level[lvl]) {
      std::uint8_t child_mask = 0;
      for (unsigned c : children[u])
        child_mask |= static_cast<std::uint8_t>(1u << port_towards(u, c, hw.mesh_cols));
      Instruction ins;
      if (u == t.root) {
        ins.mode_sel = static_cast<std::uint8_t>(Mode::kPartialSum);
        ins.rd_en = child_mask;
        ins.intxfer_en = true;
        ins.sp_addr = addr;  // out_en = 0: the sum lands back in the scratchpad
      } else if (child_mask == 0) {
        ins = make_sprd(port_towards(u, t.parent.at(u), hw.mesh_cols), addr);
      } else {
        ins.mode_sel = static_cast<std::uint8_t>(Mode::kPartialSum);
        ins.rd_en = child_mask;
        ins.intxfer_en = true;
        ins.sp_addr = addr;
        ins.out_en =
            static_cast<std::uint8_t>(1u << port_towards(u, t.parent.at(u), hw.mesh_cols));
      }
      cmds[u] = ins;
    }
    if (!cmds.empty()) b.step(cmds);
    if (lvl == 0) break;
  }
}

}  // namespace picnic
