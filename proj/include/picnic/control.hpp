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
#include <deque>
#include <vector>

#include "picnic/isa.hpp"

namespace picnic {

// Resolves one NPM row through the command crossbar: router i receives cmd1
// when select[i]=1, cmd2 when select[i]=2, the IDLE word otherwise.
inline std::vector<Instruction> dispatch_row(const NpmRow& row) {
  std::vector<Instruction> out(row.select.size());
  for (std::size_t i = 0; i < row.select.size(); ++i) {
    switch (row.select[i]) {
      case kSelCmd1: out[i] = row.cmd1; break;
      case kSelCmd2: out[i] = row.cmd2; break;
      default: out[i] = Instruction{}; break;
    }
  }
  return out;
}

struct NmcState {
  unsigned active_bank = 1;
  std::size_t row_cursor = 0;
  std::uint32_t repeat_counter = 0;
  bool row_active = false;
};

struct CoProcessorState {
  unsigned writing_bank = 0;  // 0 = idle
  std::deque<NpmRow> pending_rows;
  bool busy = false;
};

// Double-buffered program memory plus the two agents that touch it: the
// configuration co-processor fills one bank (one row per cycle) while the
// NMC reads the other. A bank swap blocks until the co-processor has marked
// the next bank loaded; blocked cycles are counted as NMC idle.
class NpmController {
 public:
  NpmController(unsigned router_count, unsigned rows_per_bank,
                unsigned coproc_rows_per_cycle = 1)
      : router_count_(router_count),
        rows_per_bank_(rows_per_bank),
        coproc_rate_(coproc_rows_per_cycle) {}

  // Splits an image into per-bank loads, queued in bank order.
  void queue_image(const NpmImage& img) {
    validate(img, rows_per_bank_);
    if (img.router_count() != router_count_)
      throw ConfigError("image mesh size does not match the controller");
    if (!img.bank1.empty()) loads_.push_back({1, img.bank1});
    if (!img.bank2.empty()) loads_.push_back({2, img.bank2});
  }

  // Direct load used by tests and by the bring-up path: fills a bank at once.
  void load_bank_now(unsigned bank, std::vector<NpmRow> rows) {
    if (rows.size() > rows_per_bank_) throw CapacityError("bank row limit exceeded");
    if (nmc_.row_active && nmc_.active_bank == bank)
      throw BankConflictError("writing the NMC's active bank");
    bank_rows(bank) = std::move(rows);
    bank_loaded(bank) = true;
  }

  const NmcState& nmc() const { return nmc_; }
  const CoProcessorState& coprocessor() const { return cp_; }

  bool row_active() const { return nmc_.row_active; }
  const NpmRow& active_row() const { return bank_rows(nmc_.active_bank)[nmc_.row_cursor]; }
  const std::vector<Instruction>& dispatch() const { return dispatch_; }

  bool done() const {
    return !nmc_.row_active && loads_.empty() && !cp_.busy && !bank_has_unread_rows();
  }

  Cycle idle_cycles() const { return idle_cycles_; }
  std::uint64_t total_dispatches() const { return dispatches_; }

  // One controller cycle. `row_completed` reports that every router dispatched
  // a non-IDLE command for the current iteration raised done (the barrier).
  void tick(bool row_completed) {
    step_coprocessor();
    if (nmc_.row_active && row_completed) {
      ++dispatches_;
      if (--nmc_.repeat_counter == 0) {
        nmc_.row_active = false;
        ++nmc_.row_cursor;
      } else {
        dispatch_ = dispatch_row(active_row());  // next iteration of the same row
      }
    }
    if (!nmc_.row_active) activate_next();
  }

  // Accounting hook: iteration index within the current row (1-based from
  // repeat down to 1).
  std::uint32_t repeat_remaining() const { return nmc_.repeat_counter; }
  std::size_t row_index() const { return nmc_.row_cursor; }
  unsigned active_bank() const { return nmc_.active_bank; }

 private:
  struct Load {
    unsigned bank;
    std::vector<NpmRow> rows;
  };

  std::vector<NpmRow>& bank_rows(unsigned bank) { return bank == 1 ? bank1_ : bank2_; }
  const std::vector<NpmRow>& bank_rows(unsigned bank) const {
    return bank == 1 ? bank1_ : bank2_;
  }
  bool& bank_loaded(unsigned bank) { return bank == 1 ? bank1_loaded_ : bank2_loaded_; }
  bool bank_loaded_c(unsigned bank) const { return bank == 1 ? bank1_loaded_ : bank2_loaded_; }

  bool bank_has_unread_rows() const {
    return bank_loaded_c(nmc_.active_bank) &&
           nmc_.row_cursor < bank_rows(nmc_.active_bank).size();
  }

  void step_coprocessor() {
    if (!cp_.busy && !loads_.empty()) {
      const unsigned target = loads_.front().bank;
      // Interleaving contract: never configure the bank the NMC is reading.
      const bool nmc_holds_target =
          target == nmc_.active_bank && (nmc_.row_active || bank_has_unread_rows());
      if (!nmc_holds_target && !bank_loaded_c(target)) {
        cp_.busy = true;
        cp_.writing_bank = target;
        cp_.pending_rows.assign(loads_.front().rows.begin(), loads_.front().rows.end());
        bank_rows(target).clear();
        loads_.pop_front();
      }
    }
    if (cp_.busy) {
      if (cp_.writing_bank == nmc_.active_bank && nmc_.row_active)
        throw BankConflictError("co-processor writing the NMC's active bank");
      for (unsigned k = 0; k < coproc_rate_ && !cp_.pending_rows.empty(); ++k) {
        bank_rows(cp_.writing_bank).push_back(cp_.pending_rows.front());
        cp_.pending_rows.pop_front();
      }
      if (cp_.pending_rows.empty()) {
        bank_loaded(cp_.writing_bank) = true;
        cp_.busy = false;
        cp_.writing_bank = 0;
      }
    }
  }

  void activate_next() {
    if (bank_has_unread_rows()) {
      nmc_.row_active = true;
      nmc_.repeat_counter = active_row().repeat;
      dispatch_ = dispatch_row(active_row());
      return;
    }
    // Bank exhausted (or never loaded): release it and swap if the other side
    // is ready; otherwise stall.
    const unsigned other = nmc_.active_bank == 1 ? 2 : 1;
    if (bank_loaded_c(nmc_.active_bank) &&
        nmc_.row_cursor >= bank_rows(nmc_.active_bank).size()) {
      bank_loaded(nmc_.active_bank) = false;  // consumed; co-processor may reuse it
      bank_rows(nmc_.active_bank).clear();
      nmc_.row_cursor = 0;
      nmc_.active_bank = other;
      if (bank_has_unread_rows()) {
        activate_next();
        return;
      }
    } else if (!bank_loaded_c(nmc_.active_bank) && bank_loaded_c(other)) {
      // Sitting on an empty bank while the co-processor finished the other
      // one: move over rather than deadlock.
      nmc_.row_cursor = 0;
      nmc_.active_bank = other;
      if (bank_has_unread_rows()) {
        activate_next();
        return;
      }
    }
    if (!loads_.empty() || cp_.busy) ++idle_cycles_;
  }

  unsigned router_count_;
  unsigned rows_per_bank_;
  unsigned coproc_rate_;

  std::vector<NpmRow> bank1_, bank2_;
  bool bank1_loaded_ = false, bank2_loaded_ = false;
  std::deque<Load> loads_;

  NmcState nmc_;
  CoProcessorState cp_;
  std::vector<Instruction> dispatch_;

  Cycle idle_cycles_ = 0;
  std::uint64_t dispatches_ = 0;
};

}  // namespace picnic
