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

#include <fstream>
#include <random>
#include <sstream>

#include "picnic/assembler.hpp"
#include "picnic/isa.hpp"

using namespace picnic;

namespace {

Instruction random_instruction(std::mt19937_64& rng) {
  Instruction in;
  in.mode_sel = static_cast<std::uint8_t>(rng_below(rng, 8));
  in.rd_en = static_cast<std::uint8_t>(rng_below(rng, 128));
  in.out_en = static_cast<std::uint8_t>(rng_below(rng, 128));
  in.intxfer_en = rng_below(rng, 2) != 0;
  in.sp_addr = static_cast<std::uint16_t>(rng_below(rng, 4096));
  return in;
}

NpmImage random_image(std::mt19937_64& rng, unsigned rows, unsigned cols) {
  NpmImage img;
  img.mesh_rows = rows;
  img.mesh_cols = cols;
  const unsigned n = img.router_count();
  const auto nrows1 = 1 + rng_below(rng, 4);
  const auto nrows2 = rng_below(rng, 4);
  auto make_row = [&] {
    NpmRow row;
    row.cmd1 = random_instruction(rng);
    row.cmd2 = random_instruction(rng);
    row.select.resize(n);
    for (auto& s : row.select) s = static_cast<std::uint8_t>(rng_below(rng, 3));
    row.repeat = static_cast<std::uint32_t>(1 + rng_below(rng, 0xFFFF));
    return row;
  };
  for (std::uint64_t i = 0; i < nrows1; ++i) img.bank1.push_back(make_row());
  for (std::uint64_t i = 0; i < nrows2; ++i) img.bank2.push_back(make_row());
  img.csr["START_ROW"] = static_cast<std::uint32_t>(rng_below(rng, 4));
  return img;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("all-zero instruction encodes to the IDLE word") {
  CHECK(encode(Instruction{}) == 0x00000000u);
  CHECK(decode(0x00000000u) == Instruction{});
}

TEST_CASE("field packing matches an independent shift-or computation") {
  Instruction in;
  in.mode_sel = 1;
  in.rd_en = 0b0000001;
  in.out_en = 0b0000010;
  in.intxfer_en = false;
  in.sp_addr = 0x00A;
  // Independent computation straight from the declared layout.
  const std::uint32_t expected = (1u << 27) | (1u << 20) | (2u << 13) | (0u << 12) | 0x00Au;
  CHECK(expected == 0x0810400Au);
  CHECK(encode(in) == expected);
  CHECK(decode(expected) == in);
}

TEST_CASE("encode/decode round-trips 10k random instructions") {
  std::mt19937_64 rng(0xC0FFEE);
  for (int i = 0; i < 10'000; ++i) {
    const Instruction in = random_instruction(rng);
    CHECK(decode(encode(in)) == in);
  }
}

TEST_CASE("words with bits 30-31 set are rejected") {
  CHECK_THROWS_AS(decode(0x40000000u), FieldOverflowError);
  CHECK_THROWS_AS(decode(0x80000000u), FieldOverflowError);
  CHECK_THROWS_AS(decode(0xC0000001u), FieldOverflowError);
  CHECK_NOTHROW(decode(0x3FFFFFFFu));
}

TEST_CASE("field overflow is rejected at encode") {
  Instruction in;
  in.sp_addr = 4096;
  CHECK_THROWS_AS(encode(in), FieldOverflowError);
  in = Instruction{};
  in.rd_en = 0x80;
  CHECK_THROWS_AS(encode(in), FieldOverflowError);
  in = Instruction{};
  in.out_en = 0xFF;
  CHECK_THROWS_AS(encode(in), FieldOverflowError);
}

TEST_CASE("empty program assembles to an image with zero rows") {
  const NpmImage img = assemble("");
  CHECK(img.bank1.empty());
  CHECK(img.bank2.empty());
}

TEST_CASE("one-row program: select defaults to IDLE everywhere else") {
  const auto img = assemble(
      "mesh 2 2\n"
      "def fwd mode=route rd=W out=E\n"
      "row cmd1=fwd cmd2=idle repeat=1 sel 0=1\n");
  REQUIRE(img.bank1.size() == 1);
  const auto& row = img.bank1[0];
  CHECK(row.select[0] == kSelCmd1);
  for (std::size_t i = 1; i < row.select.size(); ++i) CHECK(row.select[i] == kSelIdle);
  CHECK(row.repeat == 1);
}

TEST_CASE("assembler reports errors with line numbers") {
  try {
    assemble("mesh 2 2\nrow cmd1=nosuch\n");
    FAIL("expected an assembly error");
  } catch (const AssemblyError& e) {
    CHECK(e.line == 2);
    CHECK(std::string(e.what()).find("undefined command") != std::string::npos);
  }
  CHECK_THROWS_AS(assemble("mesh 2 2\ndef x mode=bogus\n"), AssemblyError);
  CHECK_THROWS_AS(assemble("mesh 2 2\ndef x mode=route sp=4096\n"), AssemblyError);
  CHECK_THROWS_AS(assemble("mesh 2 2\nrow cmd1=idle sel 4=1\n"), AssemblyError);  // index >= N
  CHECK_THROWS_AS(assemble("frobnicate\n"), AssemblyError);
}

TEST_CASE("disassemble/assemble round-trips the shipped corpus program") {
  const std::string src = read_file(std::string(PICNIC_TEST_DATA_DIR) + "/corpus_50rows.pasm");
  const NpmImage img = assemble(src);
  CHECK(img.bank1.size() + img.bank2.size() == 50);
  const NpmImage again = assemble(disassemble(img));
  CHECK(again == img);
}

TEST_CASE("golden hex file stability") {
  const std::string src = read_file(std::string(PICNIC_TEST_DATA_DIR) + "/corpus_50rows.pasm");
  const std::string golden = read_file(std::string(PICNIC_TEST_DATA_DIR) + "/corpus_50rows.hex");
  CHECK(emit_hex(assemble(src)) == golden);
}

TEST_CASE("hex layout of a single-row image on a 1024-router mesh") {
  NpmImage img;
  img.mesh_rows = 32;
  img.mesh_cols = 32;
  NpmRow row;
  row.cmd1 = decode(0x0810400Au);
  row.cmd2 = Instruction{};
  row.select.assign(1024, kSelIdle);
  row.repeat = 1;
  img.bank1.push_back(row);

  std::istringstream lines(emit_hex(img));
  std::string line;
  std::vector<std::string> all;
  while (std::getline(lines, line)) all.push_back(line);
  // cmd1, cmd2, 64 select words, repeat, 8 CSR registers.
  REQUIRE(all.size() == 2 + 64 + 1 + 8);
  CHECK(all[0] == "0810400A");
  CHECK(all[1] == "00000000");
  for (int i = 2; i < 66; ++i) CHECK(all[i] == "00000000");
  CHECK(all[66] == "00000001");
  // CSR block: dims, row counts, then defaults.
  CHECK(all[67] == "00000020");  // MESH_ROWS = 32
  CHECK(all[68] == "00000020");
  CHECK(all[69] == "00000001");  // BANK1_ROWS
  CHECK(all[70] == "00000000");
  CHECK(all[71] == "00000001");  // START_BANK default
}

TEST_CASE("empty image emits CSR defaults only") {
  NpmImage img;
  img.mesh_rows = 1;
  img.mesh_cols = 1;
  std::istringstream lines(emit_hex(img));
  std::string line;
  std::vector<std::string> all;
  while (std::getline(lines, line)) all.push_back(line);
  REQUIRE(all.size() == 8);
  const NpmImage back = parse_hex(emit_hex(img));
  CHECK(back == img);
}

TEST_CASE("select word count is ceil(2N/32)") {
  CHECK(select_words_per_row(1) == 1);
  CHECK(select_words_per_row(16) == 1);
  CHECK(select_words_per_row(17) == 2);
  CHECK(select_words_per_row(1024) == 64);
}

TEST_CASE("emit/parse round-trips random images") {
  std::mt19937_64 rng(0xBADBEEF);
  for (int i = 0; i < 50; ++i) {
    const unsigned rows = 1 + static_cast<unsigned>(rng_below(rng, 6));
    const unsigned cols = 1 + static_cast<unsigned>(rng_below(rng, 6));
    const NpmImage img = random_image(rng, rows, cols);
    const NpmImage back = parse_hex(emit_hex(img));
    CHECK(back == img);
  }
}

TEST_CASE("assemble/disassemble round-trips random images") {
  std::mt19937_64 rng(0x5EED);
  for (int i = 0; i < 30; ++i) {
    const NpmImage img = random_image(rng, 2 + static_cast<unsigned>(rng_below(rng, 3)),
                                      2 + static_cast<unsigned>(rng_below(rng, 3)));
    CHECK(assemble(disassemble(img)) == img);
  }
}
