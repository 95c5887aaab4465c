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

#include <sstream>
#include <utility>
#include <vector>

#include "picnic/isa.hpp"
#include "picnic/mesh.hpp"

namespace picnic::testing {

// Builds NPM rows from explicit (router, instruction) pairs. A row holds two
// distinct commands at most; this throws rather than splitting, since tests
// hand-schedule.
inline NpmRow make_row(unsigned router_count,
                       const std::vector<std::pair<unsigned, Instruction>>& cmds,
                       std::uint32_t repeat = 1) {
  NpmRow row;
  row.select.assign(router_count, kSelIdle);
  row.repeat = repeat;
  bool have1 = false, have2 = false;
  for (const auto& [router, ins] : cmds) {
    if (have1 && ins == row.cmd1) {
      row.select.at(router) = kSelCmd1;
    } else if (have2 && ins == row.cmd2) {
      row.select.at(router) = kSelCmd2;
    } else if (!have1) {
      row.cmd1 = ins;
      row.select.at(router) = kSelCmd1;
      have1 = true;
    } else if (!have2) {
      row.cmd2 = ins;
      row.select.at(router) = kSelCmd2;
      have2 = true;
    } else {
      throw Error("test row needs more than two distinct commands");
    }
  }
  return row;
}

inline Instruction ins(Mode m, std::uint8_t rd = 0, std::uint8_t out = 0, bool xfer = false,
                       std::uint16_t sp = 0) {
  Instruction c;
  c.mode_sel = static_cast<std::uint8_t>(m);
  c.rd_en = rd;
  c.out_en = out;
  c.intxfer_en = xfer;
  c.sp_addr = sp;
  return c;
}

constexpr std::uint8_t bit(unsigned port) { return static_cast<std::uint8_t>(1u << port); }

inline NpmImage image_of(unsigned rows, unsigned cols, std::vector<NpmRow> bank1) {
  NpmImage img;
  img.mesh_rows = rows;
  img.mesh_cols = cols;
  img.bank1 = std::move(bank1);
  return img;
}

// Deterministic digest of the externally visible tile state.
inline std::string state_digest(TileSim& tile) {
  std::ostringstream out;
  out << tile.now() << "|";
  const auto& hw = tile.hw();
  for (unsigned r = 0; r < hw.mesh_rows; ++r)
    for (unsigned c = 0; c < hw.mesh_cols; ++c) {
      auto& router = tile.router(r, c);
      for (unsigned p = 0; p < kPortCount; ++p) {
        out << router.fifos[p].size() << ",";
        if (!router.fifos[p].empty()) out << router.fifos[p].front().payload << ";";
      }
      Value sum = 0;
      for (std::size_t a = 0; a < router.scratchpad.size(); ++a)
        sum += router.scratchpad[a] * static_cast<Value>(a + 1);
      out << sum << "/";
    }
  out << tile.stats().injected << "_" << tile.stats().egress << "_" << tile.stats().stored;
  for (const auto& e : tile.c2c_egress()) out << "|" << e.cycle << ":" << e.payload;
  return out.str();
}

}  // namespace picnic::testing
