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

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "picnic/common.hpp"

namespace picnic {

// ---------------------------------------------------------------------------
// The IPCN command word.
//
// 30 bits, packed as
//
//   [29:27] mode_sel     router macro selector
//   [26:20] rd_en        read-enable bitmask over the 7 I/O-port FIFOs
//   [19:13] out_en       output-direction bitmask over the 7 I/O ports
//   [12]    intxfer_en   FIFO <-> scratchpad transfer flag
//   [11:0]  sp_addr      scratchpad word address (4096 x 64-bit words)
//
// Bits 30-31 of the stored 32-bit word are always zero.
// ---------------------------------------------------------------------------

enum class Mode : std::uint8_t {
  kRoute = 0,       // forward flits; intxfer_en taps a copy into the scratchpad
  kPartialSum = 1,  // sum one flit per rd_en port (+ scratchpad operand)
  kActivation = 2,  // affine y = slope*x + offset, optional clamp at zero
  kDmac = 3,        // MAC-array accumulate / flush / elementwise product
  kSpWrite = 4,     // FIFO head -> scratchpad[sp_addr]
  kSpRead = 5,      // scratchpad[sp_addr] -> out_en ports
  kPeIssue = 6,     // stream scratchpad[sp_addr ..] into the attached PE
  kReserved = 7,
};

// Port indexing for rd_en / out_en bits.
enum Port : unsigned {
  kPortN = 0,
  kPortE = 1,
  kPortS = 2,
  kPortW = 3,
  kPortPE = 4,
  kPortUp = 5,    // TSV to the SCU die (odd columns only)
  kPortDown = 6,  // TSV to the optical die (even columns only)
  kPortCount = 7,
};

inline const char* port_name(unsigned p) {
  static const char* names[] = {"N", "E", "S", "W", "PE", "UP", "DN"};
  return p < kPortCount ? names[p] : "?";
}

struct Instruction {
  std::uint8_t mode_sel = 0;
  std::uint8_t rd_en = 0;
  std::uint8_t out_en = 0;
  bool intxfer_en = false;
  std::uint16_t sp_addr = 0;

  Mode mode() const { return static_cast<Mode>(mode_sel); }
  bool is_idle() const {
    return mode_sel == 0 && rd_en == 0 && out_en == 0 && !intxfer_en && sp_addr == 0;
  }

  friend bool operator==(const Instruction&, const Instruction&) = default;
};

constexpr std::uint32_t kInstructionMask = 0x3FFFFFFFu;  // low 30 bits

inline void validate(const Instruction& in) {
  if (in.mode_sel > 7) throw FieldOverflowError("mode_sel exceeds 3 bits");
  if (in.rd_en > 0x7F) throw FieldOverflowError("rd_en has a set bit above index 6");
  if (in.out_en > 0x7F) throw FieldOverflowError("out_en has a set bit above index 6");
  if (in.sp_addr > 0xFFF) throw FieldOverflowError("sp_addr exceeds 12 bits");
}

inline std::uint32_t encode(const Instruction& in) {
  validate(in);
  return (static_cast<std::uint32_t>(in.mode_sel) << 27) |
         (static_cast<std::uint32_t>(in.rd_en) << 20) |
         (static_cast<std::uint32_t>(in.out_en) << 13) |
         (static_cast<std::uint32_t>(in.intxfer_en ? 1 : 0) << 12) |
         static_cast<std::uint32_t>(in.sp_addr);
}

inline Instruction decode(std::uint32_t word) {
  if (word & ~kInstructionMask)
    throw FieldOverflowError("command word has set bits above position 29");
  Instruction in;
  in.mode_sel = static_cast<std::uint8_t>((word >> 27) & 0x7);
  in.rd_en = static_cast<std::uint8_t>((word >> 20) & 0x7F);
  in.out_en = static_cast<std::uint8_t>((word >> 13) & 0x7F);
  in.intxfer_en = ((word >> 12) & 0x1) != 0;
  in.sp_addr = static_cast<std::uint16_t>(word & 0xFFF);
  return in;
}

// ---------------------------------------------------------------------------
// NPM rows and images.
// ---------------------------------------------------------------------------

enum Select : std::uint8_t { kSelIdle = 0, kSelCmd1 = 1, kSelCmd2 = 2 };

struct NpmRow {
  Instruction cmd1;
  Instruction cmd2;
  std::vector<std::uint8_t> select;  // one 2-bit code per router
  std::uint32_t repeat = 1;

  friend bool operator==(const NpmRow&, const NpmRow&) = default;
};

inline void validate(const NpmRow& row, unsigned router_count) {
  validate(row.cmd1);
  validate(row.cmd2);
  if (row.select.size() != router_count)
    throw FieldOverflowError("select entry count does not match the mesh");
  for (auto s : row.select)
    if (s > 2) throw FieldOverflowError("select code 3 is not defined");
  if (row.repeat < 1) throw FieldOverflowError("repeat must be >= 1");
  if (row.repeat > 0xFFFF) throw FieldOverflowError("repeat exceeds 16 bits");
}

// Control/status register file. Serialized in this fixed order at the tail of
// every hex image, which is what makes the format self-describing.
inline const std::array<std::string, 8>& csr_names() {
  static const std::array<std::string, 8> names = {
      "MESH_ROWS", "MESH_COLS", "BANK1_ROWS", "BANK2_ROWS",
      "START_BANK", "START_ROW", "FLAGS", "SCRATCH"};
  return names;
}

struct NpmImage {
  unsigned mesh_rows = 0;
  unsigned mesh_cols = 0;
  std::vector<NpmRow> bank1;
  std::vector<NpmRow> bank2;
  std::map<std::string, std::uint32_t> csr;  // START_BANK etc.; dims/counts derived

  unsigned router_count() const { return mesh_rows * mesh_cols; }

  std::uint32_t csr_value(const std::string& name) const {
    if (name == "MESH_ROWS") return mesh_rows;
    if (name == "MESH_COLS") return mesh_cols;
    if (name == "BANK1_ROWS") return static_cast<std::uint32_t>(bank1.size());
    if (name == "BANK2_ROWS") return static_cast<std::uint32_t>(bank2.size());
    auto it = csr.find(name);
    if (it != csr.end()) return it->second;
    if (name == "START_BANK") return 1;
    return 0;
  }

  // CSR comparison is by register value, so images round-trip through the hex
  // format whether or not default-valued registers were written explicitly.
  friend bool operator==(const NpmImage& a, const NpmImage& b) {
    if (a.mesh_rows != b.mesh_rows || a.mesh_cols != b.mesh_cols) return false;
    if (a.bank1 != b.bank1 || a.bank2 != b.bank2) return false;
    for (const auto& name : csr_names())
      if (a.csr_value(name) != b.csr_value(name)) return false;
    return true;
  }
};

inline void validate(const NpmImage& img, unsigned rows_per_bank = 0) {
  if (img.mesh_rows == 0 || img.mesh_cols == 0)
    throw FieldOverflowError("image has no mesh dimensions");
  if (rows_per_bank != 0 &&
      (img.bank1.size() > rows_per_bank || img.bank2.size() > rows_per_bank))
    throw CapacityError("bank row limit exceeded");
  for (const auto& r : img.bank1) validate(r, img.router_count());
  for (const auto& r : img.bank2) validate(r, img.router_count());
}

inline unsigned select_words_per_row(unsigned router_count) {
  return (2 * router_count + 31) / 32;
}

// ---------------------------------------------------------------------------
// Hex image format.
//
// One line per 32-bit chunk, 8 uppercase hex digits. Bank 1 rows, bank 2
// rows, then the 8 CSR registers in csr_names() order. Each row serializes as
// cmd1 word, cmd2 word, ceil(2N/32) select words (router 0 in the
// least-significant 2 bits of the first word), and one repeat word.
// ---------------------------------------------------------------------------

namespace detail {

inline std::string hex_line(std::uint32_t word) {
  static const char digits[] = "0123456789ABCDEF";
  std::string s(8, '0');
  for (int i = 7; i >= 0; --i) {
    s[static_cast<std::size_t>(i)] = digits[word & 0xF];
    word >>= 4;
  }
  return s;
}

inline void emit_row(const NpmRow& row, unsigned n, std::string& out) {
  out += hex_line(encode(row.cmd1));
  out += '\n';
  out += hex_line(encode(row.cmd2));
  out += '\n';
  const unsigned words = select_words_per_row(n);
  for (unsigned w = 0; w < words; ++w) {
    std::uint32_t packed = 0;
    for (unsigned k = 0; k < 16; ++k) {
      const unsigned router = w * 16 + k;
      if (router < n) packed |= static_cast<std::uint32_t>(row.select[router] & 0x3) << (2 * k);
    }
    out += hex_line(packed);
    out += '\n';
  }
  out += hex_line(row.repeat);
  out += '\n';
}

inline std::uint32_t parse_hex_word(const std::string& line, std::size_t line_no) {
  if (line.size() != 8)
    throw AssemblyError(static_cast<int>(line_no), "hex line is not 8 digits");
  std::uint32_t v = 0;
  for (char c : line) {
    v <<= 4;
    if (c >= '0' && c <= '9') v |= static_cast<std::uint32_t>(c - '0');
    else if (c >= 'A' && c <= 'F') v |= static_cast<std::uint32_t>(c - 'A' + 10);
    else throw AssemblyError(static_cast<int>(line_no), "invalid hex digit");
  }
  return v;
}

}  // namespace detail

inline std::string emit_hex(const NpmImage& img) {
  validate(img);
  std::string out;
  for (const auto& r : img.bank1) detail::emit_row(r, img.router_count(), out);
  for (const auto& r : img.bank2) detail::emit_row(r, img.router_count(), out);
  for (const auto& name : csr_names()) {
    out += detail::hex_line(img.csr_value(name));
    out += '\n';
  }
  return out;
}

inline NpmImage parse_hex(const std::string& text) {
  std::vector<std::uint32_t> words;
  std::vector<std::size_t> line_nos;
  std::size_t line_no = 0;
  std::string line;
  for (std::size_t pos = 0; pos <= text.size();) {
    const std::size_t nl = text.find('\n', pos);
    line = text.substr(pos, nl == std::string::npos ? std::string::npos : nl - pos);
    pos = nl == std::string::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    if (line.empty()) continue;
    words.push_back(detail::parse_hex_word(line, line_no));
    line_nos.push_back(line_no);
  }
  if (words.size() < csr_names().size())
    throw AssemblyError(static_cast<int>(line_no), "image shorter than its CSR block");

  const std::size_t csr_base = words.size() - csr_names().size();
  NpmImage img;
  img.mesh_rows = words[csr_base + 0];
  img.mesh_cols = words[csr_base + 1];
  const std::uint32_t bank1_rows = words[csr_base + 2];
  const std::uint32_t bank2_rows = words[csr_base + 3];
  for (std::size_t i = 4; i < csr_names().size(); ++i)
    img.csr[csr_names()[i]] = words[csr_base + i];

  const unsigned n = img.router_count();
  if (n == 0) throw AssemblyError(1, "CSR mesh dimensions are zero");
  const std::size_t words_per_row = 2 + select_words_per_row(n) + 1;
  if ((bank1_rows + bank2_rows) * words_per_row != csr_base)
    throw AssemblyError(static_cast<int>(line_no), "row payload does not match CSR row counts");

  std::size_t idx = 0;
  auto parse_row = [&]() {
    NpmRow row;
    row.cmd1 = decode(words[idx++]);
    row.cmd2 = decode(words[idx++]);
    row.select.assign(n, 0);
    const unsigned sw = select_words_per_row(n);
    for (unsigned w = 0; w < sw; ++w) {
      const std::uint32_t packed = words[idx++];
      for (unsigned k = 0; k < 16; ++k) {
        const unsigned router = w * 16 + k;
        if (router < n) {
          const auto code = static_cast<std::uint8_t>((packed >> (2 * k)) & 0x3);
          if (code > 2)
            throw AssemblyError(static_cast<int>(line_nos[idx - 1]), "select code 3");
          row.select[router] = code;
        }
      }
    }
    row.repeat = words[idx++];
    return row;
  };
  for (std::uint32_t r = 0; r < bank1_rows; ++r) img.bank1.push_back(parse_row());
  for (std::uint32_t r = 0; r < bank2_rows; ++r) img.bank2.push_back(parse_row());
  validate(img);
  return img;
}

}  // namespace picnic
