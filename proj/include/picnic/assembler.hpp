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
#include <map>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "picnic/isa.hpp"

namespace picnic {

// Line-oriented assembly for NPM images; the grammar is documented in
// docs/isa.md. One `row` directive per NPM row, one mnemonic per field.

namespace detail {

inline const std::unordered_map<std::string, std::uint8_t>& mode_mnemonics() {
  static const std::unordered_map<std::string, std::uint8_t> m = {
      {"route", 0}, {"psum", 1}, {"act", 2}, {"dmac", 3},
      {"spwr", 4},  {"sprd", 5}, {"pe", 6},  {"res", 7},
  };
  return m;
}

inline const char* mode_mnemonic(std::uint8_t code) {
  static const char* names[] = {"route", "psum", "act", "dmac", "spwr", "sprd", "pe", "res"};
  return names[code & 0x7];
}

inline int port_from_name(const std::string& s) {
  for (unsigned p = 0; p < kPortCount; ++p)
    if (s == port_name(p)) return static_cast<int>(p);
  return -1;
}

inline std::uint32_t parse_number(const std::string& s, int line) {
  try {
    std::size_t used = 0;
    const unsigned long v = std::stoul(s, &used, 0);  // handles 0x prefixes
    if (used != s.size()) throw AssemblyError(line, "trailing junk in number '" + s + "'");
    return static_cast<std::uint32_t>(v);
  } catch (const AssemblyError&) {
    throw;
  } catch (...) {
    throw AssemblyError(line, "not a number: '" + s + "'");
  }
}

inline std::uint8_t parse_port_mask(const std::string& list, int line) {
  std::uint8_t mask = 0;
  std::string item;
  std::stringstream ss(list);
  while (std::getline(ss, item, ',')) {
    const int p = port_from_name(item);
    if (p < 0) throw AssemblyError(line, "unknown port '" + item + "'");
    mask |= static_cast<std::uint8_t>(1u << p);
  }
  return mask;
}

inline std::vector<std::string> tokenize(const std::string& line) {
  std::vector<std::string> toks;
  std::string cur;
  for (char c : line) {
    if (c == ';') break;  // comment
    if (c == ' ' || c == '\t' || c == '\r') {
      if (!cur.empty()) toks.push_back(cur), cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) toks.push_back(cur);
  return toks;
}

}  // namespace detail

inline NpmImage assemble(const std::string& source) {
  NpmImage img;
  std::unordered_map<std::string, Instruction> defs;
  defs["idle"] = Instruction{};
  int bank = 1;
  bool mesh_seen = false;

  std::istringstream in(source);
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto toks = detail::tokenize(raw);
    if (toks.empty()) continue;
    const std::string& kw = toks[0];

    if (kw == "mesh") {
      if (toks.size() != 3) throw AssemblyError(line_no, "mesh expects: mesh ROWS COLS");
      img.mesh_rows = detail::parse_number(toks[1], line_no);
      img.mesh_cols = detail::parse_number(toks[2], line_no);
      if (img.router_count() == 0) throw AssemblyError(line_no, "mesh must be non-empty");
      mesh_seen = true;
    } else if (kw == "bank") {
      if (toks.size() != 2) throw AssemblyError(line_no, "bank expects: bank 1|2");
      const auto b = detail::parse_number(toks[1], line_no);
      if (b != 1 && b != 2) throw AssemblyError(line_no, "bank must be 1 or 2");
      bank = static_cast<int>(b);
    } else if (kw == "csr") {
      if (toks.size() != 3) throw AssemblyError(line_no, "csr expects: csr NAME VALUE");
      bool known = false;
      for (const auto& n : csr_names()) known = known || n == toks[1];
      if (!known) throw AssemblyError(line_no, "unknown CSR register '" + toks[1] + "'");
      img.csr[toks[1]] = detail::parse_number(toks[2], line_no);
    } else if (kw == "def") {
      if (toks.size() < 2) throw AssemblyError(line_no, "def expects a name");
      Instruction ins;
      for (std::size_t i = 2; i < toks.size(); ++i) {
        const std::string& t = toks[i];
        const auto eq = t.find('=');
        if (t == "xfer") {
          ins.intxfer_en = true;
        } else if (eq != std::string::npos) {
          const std::string key = t.substr(0, eq), val = t.substr(eq + 1);
          if (key == "mode") {
            const auto it = detail::mode_mnemonics().find(val);
            if (it == detail::mode_mnemonics().end())
              throw AssemblyError(line_no, "undefined mode mnemonic '" + val + "'");
            ins.mode_sel = it->second;
          } else if (key == "rd") {
            ins.rd_en = detail::parse_port_mask(val, line_no);
          } else if (key == "out") {
            ins.out_en = detail::parse_port_mask(val, line_no);
          } else if (key == "sp") {
            const auto v = detail::parse_number(val, line_no);
            if (v > 0xFFF) throw AssemblyError(line_no, "sp_addr exceeds 12 bits");
            ins.sp_addr = static_cast<std::uint16_t>(v);
          } else {
            throw AssemblyError(line_no, "unknown field '" + key + "'");
          }
        } else {
          throw AssemblyError(line_no, "unexpected token '" + t + "'");
        }
      }
      defs[toks[1]] = ins;
    } else if (kw == "row") {
      if (!mesh_seen) throw AssemblyError(line_no, "row before mesh declaration");
      NpmRow row;
      row.select.assign(img.router_count(), kSelIdle);
      bool sel_section = false;
      for (std::size_t i = 1; i < toks.size(); ++i) {
        const std::string& t = toks[i];
        if (t == "sel") {
          sel_section = true;
          continue;
        }
        const auto eq = t.find('=');
        if (eq == std::string::npos) throw AssemblyError(line_no, "expected key=value, got '" + t + "'");
        const std::string key = t.substr(0, eq), val = t.substr(eq + 1);
        if (!sel_section) {
          if (key == "cmd1" || key == "cmd2") {
            const auto it = defs.find(val);
            if (it == defs.end()) throw AssemblyError(line_no, "undefined command '" + val + "'");
            (key == "cmd1" ? row.cmd1 : row.cmd2) = it->second;
          } else if (key == "repeat") {
            const auto v = detail::parse_number(val, line_no);
            if (v < 1 || v > 0xFFFF) throw AssemblyError(line_no, "repeat out of range");
            row.repeat = v;
          } else {
            throw AssemblyError(line_no, "unknown row field '" + key + "'");
          }
        } else {
          const auto code = detail::parse_number(val, line_no);
          if (code > 2) throw AssemblyError(line_no, "select code must be 0, 1 or 2");
          if (key == "*") {
            row.select.assign(img.router_count(), static_cast<std::uint8_t>(code));
          } else {
            const auto idx = detail::parse_number(key, line_no);
            if (idx >= img.router_count())
              throw AssemblyError(line_no, "router index " + key + " >= mesh size");
            row.select[idx] = static_cast<std::uint8_t>(code);
          }
        }
      }
      (bank == 1 ? img.bank1 : img.bank2).push_back(std::move(row));
    } else {
      throw AssemblyError(line_no, "unknown directive '" + kw + "'");
    }
  }
  if (!mesh_seen && (img.bank1.empty() && img.bank2.empty())) {
    // An empty program still needs dimensions for a loadable image.
    img.mesh_rows = 1;
    img.mesh_cols = 1;
  }
  validate(img);
  return img;
}

// Emits canonical source that reassembles to an identical image.
inline std::string disassemble(const NpmImage& img) {
  validate(img);
  std::ostringstream out;
  out << "mesh " << img.mesh_rows << " " << img.mesh_cols << "\n";
  for (const auto& [name, value] : img.csr) out << "csr " << name << " " << value << "\n";

  // First pass: name every distinct non-idle command in first-use order and
  // emit the defs up front, so rows can reference them.
  std::map<std::uint32_t, std::string> names;  // encoded word -> def name
  auto intern = [&](const Instruction& ins) {
    if (ins.is_idle()) return;
    const auto word = encode(ins);
    if (names.count(word)) return;
    std::string name = "c" + std::to_string(names.size());
    out << "def " << name << " mode=" << detail::mode_mnemonic(ins.mode_sel);
    auto mask_list = [](std::uint8_t mask) {
      std::string s;
      for (unsigned p = 0; p < kPortCount; ++p)
        if (mask & (1u << p)) {
          if (!s.empty()) s += ',';
          s += port_name(p);
        }
      return s;
    };
    if (ins.rd_en) out << " rd=" << mask_list(ins.rd_en);
    if (ins.out_en) out << " out=" << mask_list(ins.out_en);
    if (ins.intxfer_en) out << " xfer";
    if (ins.sp_addr) out << " sp=" << ins.sp_addr;
    out << "\n";
    names.emplace(word, std::move(name));
  };
  for (const auto* bank : {&img.bank1, &img.bank2})
    for (const auto& row : *bank) {
      intern(row.cmd1);
      intern(row.cmd2);
    }
  auto name_of = [&](const Instruction& ins) -> std::string {
    return ins.is_idle() ? "idle" : names.at(encode(ins));
  };

  auto emit_bank = [&](const std::vector<NpmRow>& rows, int bank) {
    if (rows.empty()) return;
    out << "bank " << bank << "\n";
    for (const auto& row : rows) {
      const std::string c1 = name_of(row.cmd1), c2 = name_of(row.cmd2);
      out << "row cmd1=" << c1 << " cmd2=" << c2 << " repeat=" << row.repeat << " sel";
      // Majority code as the wildcard keeps lines short.
      std::array<unsigned, 3> hist = {0, 0, 0};
      for (auto s : row.select) hist[s]++;
      std::uint8_t def_code = 0;
      if (hist[1] > hist[def_code]) def_code = 1;
      if (hist[2] > hist[def_code]) def_code = 2;
      out << " *=" << unsigned(def_code);
      for (std::size_t i = 0; i < row.select.size(); ++i)
        if (row.select[i] != def_code) out << " " << i << "=" << unsigned(row.select[i]);
      out << "\n";
    }
  };
  emit_bank(img.bank1, 1);
  emit_bank(img.bank2, 2);
  return out.str();
}

}  // namespace picnic
