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

#include <filesystem>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "picnic/benchmark.hpp"

namespace picnic {

namespace detail_report {

inline std::string fmt(double v, int precision = 6) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(precision) << v;
  return s.str();
}

}  // namespace detail_report

// ---------------------------------------------------------------------------
// CSV writers. Column layouts are part of the external interface and stay
// stable; see docs/formats.md.
// ---------------------------------------------------------------------------

inline std::string benchmark_csv_header() {
  return "model,context_in,context_out,ccpg,interconnect,engine,throughput_tokens_s,"
         "avg_power_w,efficiency_tokens_j,total_cycles,c2c_avg_power_w,chiplets\n";
}

inline std::string benchmark_csv_row(const RunResult& r) {
  using detail_report::fmt;
  std::ostringstream s;
  s << r.model_name << "," << r.prompt_len << "," << r.gen_len << ","
    << (r.ccpg ? "on" : "off") << "," << to_string(r.interconnect) << "," << r.engine << ","
    << fmt(r.throughput_tps, 4) << "," << fmt(r.avg_power_w, 6) << ","
    << fmt(r.efficiency_tpj, 4) << "," << r.total_cycles << "," << fmt(r.c2c_avg_power_w, 6)
    << "," << r.chiplets << "\n";
  return s.str();
}

inline std::string transfers_csv(const std::vector<TransferEvent>& log) {
  std::ostringstream s;
  s << "src,dst,bits,start_cycle,end_cycle,energy_pj\n";
  for (const auto& ev : log)
    s << ev.src << "," << ev.dst << "," << ev.bits << "," << ev.start << "," << ev.end << ","
      << detail_report::fmt(ev.energy_pj, 3) << "\n";
  return s.str();
}

inline std::string energy_breakdown_csv(const EnergyLedger& ledger) {
  std::ostringstream s;
  s << "macro_class,energy_pj\n";
  for (const auto& [k, v] : ledger.by_class()) s << k << "," << detail_report::fmt(v, 3) << "\n";
  s << "phase,energy_pj\n";
  for (const auto& [k, v] : ledger.by_phase()) s << k << "," << detail_report::fmt(v, 3) << "\n";
  return s.str();
}

inline std::string c2c_profile_csv(const C2CPowerProfile& p) {
  std::ostringstream s;
  s << "window_start_cycle,avg_power_w\n";
  for (std::size_t i = 0; i < p.watts.size(); ++i)
    s << i * p.window << "," << detail_report::fmt(p.watts[i], 9) << "\n";
  return s.str();
}

// ---------------------------------------------------------------------------
// Minimal static SVG charts.
// ---------------------------------------------------------------------------

inline std::string svg_bar_chart(const std::string& title,
                                 const std::vector<std::string>& labels,
                                 const std::vector<double>& values, const std::string& unit) {
  const int w = 640, h = 360, pad = 60;
  double vmax = 1e-12;
  for (double v : values) vmax = std::max(vmax, v);
  std::ostringstream s;
  s << "<svg xmlns='http://www.w3.org/2000/svg' width='" << w << "' height='" << h << "'>\n";
  s << "<text x='" << w / 2 << "' y='24' text-anchor='middle' font-size='16'>" << title
    << "</text>\n";
  const double bw = double(w - 2 * pad) / std::max<std::size_t>(values.size(), 1);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double bh = (h - 2 * pad) * values[i] / vmax;
    const double x = pad + i * bw + bw * 0.15;
    s << "<rect x='" << x << "' y='" << h - pad - bh << "' width='" << bw * 0.7 << "' height='"
      << bh << "' fill='#4a78b0'/>\n";
    s << "<text x='" << x + bw * 0.35 << "' y='" << h - pad + 16
      << "' text-anchor='middle' font-size='11'>" << labels[i] << "</text>\n";
    s << "<text x='" << x + bw * 0.35 << "' y='" << h - pad - bh - 4
      << "' text-anchor='middle' font-size='11'>" << detail_report::fmt(values[i], 2)
      << "</text>\n";
  }
  s << "<text x='16' y='" << h / 2 << "' font-size='12' transform='rotate(-90 16 " << h / 2
    << ")'>" << unit << "</text>\n";
  s << "</svg>\n";
  return s.str();
}

inline std::string svg_line_chart(const std::string& title, const std::vector<double>& ys,
                                  const std::string& unit) {
  const int w = 640, h = 320, pad = 50;
  double vmax = 1e-12;
  for (double v : ys) vmax = std::max(vmax, v);
  std::ostringstream s;
  s << "<svg xmlns='http://www.w3.org/2000/svg' width='" << w << "' height='" << h << "'>\n";
  s << "<text x='" << w / 2 << "' y='22' text-anchor='middle' font-size='15'>" << title
    << "</text>\n";
  s << "<polyline fill='none' stroke='#b05030' stroke-width='1.5' points='";
  for (std::size_t i = 0; i < ys.size(); ++i) {
    const double x = pad + double(w - 2 * pad) * double(i) / std::max<std::size_t>(ys.size() - 1, 1);
    const double y = h - pad - (h - 2 * pad) * ys[i] / vmax;
    s << detail_report::fmt(x, 1) << "," << detail_report::fmt(y, 1) << " ";
  }
  s << "'/>\n";
  s << "<line x1='" << pad << "' y1='" << h - pad << "' x2='" << w - pad << "' y2='" << h - pad
    << "' stroke='#222'/>\n";
  s << "<text x='16' y='" << h / 2 << "' font-size='12' transform='rotate(-90 16 " << h / 2
    << ")'>" << unit << "</text>\n";
  s << "</svg>\n";
  return s.str();
}

// ---------------------------------------------------------------------------
// Report bundle: one directory per run.
// ---------------------------------------------------------------------------

inline void write_run_report(const RunResult& r, const std::string& outdir) {
  namespace fs = std::filesystem;
  fs::create_directories(outdir);
  save_text_file(outdir + "/benchmark.csv", benchmark_csv_header() + benchmark_csv_row(r));
  save_text_file(outdir + "/transfers.csv", transfers_csv(r.transfers));
  save_text_file(outdir + "/energy_breakdown.csv", energy_breakdown_csv(r.ledger));
  save_text_file(outdir + "/c2c_profile.csv", c2c_profile_csv(r.c2c_profile));
  save_text_file(outdir + "/mapping_plan.json", r.plan_dump.dump(2) + "\n");
  save_text_file(outdir + "/c2c_power.svg",
                 svg_line_chart("C2C data transfer power over time", r.c2c_profile.watts, "W"));
  {
    std::vector<double> ccpg_w, plain_w;
    for (const auto& [a, b] : r.power_series) {
      ccpg_w.push_back(a);
      plain_w.push_back(b);
    }
    save_text_file(outdir + "/power_with_ccpg.svg",
                   svg_line_chart("System power with CCPG", ccpg_w, "W"));
    save_text_file(
        outdir + "/power_comparison.svg",
        svg_bar_chart("Average power with and without CCPG", {"with CCPG", "without CCPG"},
                      {r.power_ccpg_w, r.power_no_ccpg_w}, "W"));
  }
  if (!r.attention_outputs.empty()) {
    std::ostringstream s;
    for (const auto& row : r.attention_outputs) {
      for (std::size_t j = 0; j < row.size(); ++j) s << (j ? "," : "") << row[j];
      s << "\n";
    }
    save_text_file(outdir + "/attention_outputs.csv", s.str());
  }
}

inline void write_sweep_report(const std::vector<SweepEntry>& entries,
                               const std::string& outdir) {
  namespace fs = std::filesystem;
  fs::create_directories(outdir);
  std::ostringstream csv;
  csv << benchmark_csv_header();
  std::vector<std::string> labels;
  std::vector<double> powers, efficiencies;
  for (const auto& e : entries) {
    if (!e.result) {
      csv << e.cfg.model << "," << e.cfg.prompt_len << "," << e.cfg.gen_len << ","
          << (e.cfg.ccpg ? "on" : "off") << "," << to_string(e.cfg.interconnect)
          << ",error,,,,,,\n";
      continue;
    }
    csv << benchmark_csv_row(*e.result);
    labels.push_back(e.result->model_name + "/" + std::to_string(e.result->prompt_len) +
                     (e.result->ccpg ? "+ccpg" : ""));
    powers.push_back(e.result->avg_power_w);
    efficiencies.push_back(e.result->efficiency_tpj);
  }
  save_text_file(outdir + "/sweep.csv", csv.str());
  if (!powers.empty()) {
    save_text_file(outdir + "/sweep_power.svg",
                   svg_bar_chart("Average system power", labels, powers, "W"));
    save_text_file(outdir + "/sweep_efficiency.svg",
                   svg_bar_chart("Energy efficiency", labels, efficiencies, "tokens/J"));
  }
  // Errors, if any, land beside the table for inspection.
  std::ostringstream errs;
  for (const auto& e : entries)
    if (!e.error.empty()) errs << e.cfg.model << ": " << e.error << "\n";
  if (errs.tellp() > 0) save_text_file(outdir + "/errors.txt", errs.str());
}

}  // namespace picnic
