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

#include "picnic/mapper.hpp"
#include "picnic/model.hpp"
#include "picnic/power.hpp"

using namespace picnic;

TEST_CASE("unit pair power decomposes as 120 + 42 + 97 = 259 uW") {
  const UnitCosts c;
  CHECK(c.pair_uw() == Catch::Approx(259.0));
  CHECK(c.pe_uw == 120.0);
  CHECK(c.scratchpad_uw == 42.0);
  CHECK(c.router_uw == 97.0);
}

TEST_CASE("full tile at utilization 1 with all SCUs draws 270.654 mW") {
  HardwareConfig hw;
  const double w = tile_power_w(hw, 1.0, TileMode::kFull, hw.scu_count());
  CHECK(hw.scu_count() == 1024);
  CHECK(w * 1e3 == Catch::Approx(270.65344).epsilon(1e-9));
}

TEST_CASE("a sleeping tile draws exactly its scratchpads: 43.008 mW") {
  HardwareConfig hw;
  for (double util : {0.0, 0.3, 1.0}) {
    const double w = tile_power_w(hw, util, TileMode::kScratchpadOnly, 0);
    CHECK(w * 1e3 == Catch::Approx(43.008).epsilon(1e-12));
  }
}

TEST_CASE("an empty full-mode tile draws nothing") {
  HardwareConfig hw;
  CHECK(tile_power_w(hw, 0.0, TileMode::kFull, 0) == 0.0);
  CHECK_THROWS_AS(tile_power_w(hw, 1.5, TileMode::kFull, 0), Error);
}

TEST_CASE("tile area: 1024 pairs at 0.1842 mm2 within 1% of 189.6 mm2") {
  HardwareConfig hw;
  const double area = tile_area_mm2(hw);
  CHECK(area == Catch::Approx(188.6208));
  CHECK(std::abs(area - 189.6) / 189.6 < 0.01);
}

TEST_CASE("ccpg: advancing to another cluster swaps full/sleep modes") {
  HardwareConfig hw;
  ClusterState s = make_cluster_state(hw, 8);  // two clusters of four
  ccpg_step(s, 0);
  CHECK(s.active_cluster == 0);
  for (unsigned t = 0; t < 4; ++t) CHECK(s.mode[t] == TileMode::kFull);
  for (unsigned t = 4; t < 8; ++t) CHECK(s.mode[t] == TileMode::kScratchpadOnly);
  ccpg_step(s, 5);  // advance into cluster B
  CHECK(s.active_cluster == 1);
  for (unsigned t = 0; t < 4; ++t) CHECK(s.mode[t] == TileMode::kScratchpadOnly);
  for (unsigned t = 4; t < 8; ++t) CHECK(s.mode[t] == TileMode::kFull);
  CHECK(s.transitions == 2);
}

TEST_CASE("ccpg: advancing within the active cluster is free") {
  HardwareConfig hw;
  ClusterState s = make_cluster_state(hw, 8);
  ccpg_step(s, 0);
  const unsigned before = s.transitions;
  ccpg_step(s, 1);
  ccpg_step(s, 3);
  CHECK(s.transitions == before);
  CHECK_THROWS_AS(ccpg_step(s, 99), Error);
}

TEST_CASE("an 8B decode pass visits clusters in layer order exactly once per token") {
  HardwareConfig hw;
  const auto loads = assign_chiplets(model_preset("llama-8b"), hw);
  REQUIRE(loads.size() == 128);
  ClusterState s = make_cluster_state(hw, unsigned(loads.size()));
  for (int token = 0; token < 3; ++token) {
    std::vector<int> visited;
    for (const auto& l : loads) {
      ccpg_step(s, l.id);
      if (visited.empty() || visited.back() != s.active_cluster)
        visited.push_back(s.active_cluster);
    }
    REQUIRE(visited.size() == 32);
    for (int c = 0; c < 32; ++c) CHECK(visited[c] == c);  // layer order, once each
  }
}

TEST_CASE("ledger: additivity, non-negativity and derived metrics") {
  EnergyLedger ledger;
  ledger.add("pe", "phase_a", 100.0);
  ledger.add("router", "phase_a", 50.0);
  ledger.add("pe", "phase_b", 25.0);
  CHECK_THROWS_AS(ledger.add("pe", "phase_c", -1.0), Error);
  CHECK(ledger.total_pj() == Catch::Approx(175.0));
  CHECK(ledger.additive());
  CHECK(ledger.by_class().at("pe") == Catch::Approx(125.0));
  CHECK(ledger.by_phase().at("phase_a") == Catch::Approx(150.0));

  ledger.set_cycles(1'000'000);  // 1 ms at 1 GHz
  ledger.set_tokens(10);
  const double p = ledger.average_power_w(1.0);
  const double t = ledger.throughput_tps(1.0);
  CHECK(p == Catch::Approx(175e-12 / 1e-3));
  CHECK(t == Catch::Approx(10.0 / 1e-3));
  CHECK(ledger.efficiency_tpj(1.0) == Catch::Approx(t / p));
}
