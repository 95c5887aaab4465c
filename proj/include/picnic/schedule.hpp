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
#include <cstdlib>
#include <string>
#include <vector>

#include "picnic/compiler.hpp"
#include "picnic/config.hpp"
#include "picnic/mapper.hpp"
#include "picnic/model.hpp"
#include "picnic/scu.hpp"

namespace picnic {

// ---------------------------------------------------------------------------
// A schedule is the temporally ordered program for one inference step of one
// layer: compiled NPM images plus the injection trace feeding the chiplet's
// entry router, with per-phase analytic cycle counts alongside.
// ---------------------------------------------------------------------------

struct PhaseRecord {
  std::string name;
  Cycle cycles = 0;
  std::uint64_t c2c_bits_out = 0;  // layer handoff volume leaving this chiplet
  bool scu_active = false;
};

struct CompiledStep {
  std::vector<NpmImage> images;
  std::vector<std::pair<unsigned, Value>> injections;  // entry router, payload
  std::vector<PhaseRecord> phases;

  Cycle total_cycles() const {
    Cycle t = 0;
    for (const auto& p : phases) t += p.cycles;
    return t;
  }
};

struct OutputRef {
  unsigned router;
  std::uint16_t addr;
  unsigned len;
};

namespace detail {

inline unsigned manhattan(unsigned a, unsigned b, unsigned cols) {
  const int ar = static_cast<int>(a / cols), ac = static_cast<int>(a % cols);
  const int br = static_cast<int>(b / cols), bc = static_cast<int>(b % cols);
  return static_cast<unsigned>(std::abs(ar - br) + std::abs(ac - bc));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Attention layer scheduling: weight-stationary QKV/O projections with
// in-network reduction, cyclically cached K/V, and a two-level attention loop
// (outer over query positions, inner over cached tokens, the inner work
// spread over the station's MAC lanes).
// ---------------------------------------------------------------------------

class AttentionScheduler {
 public:
  AttentionScheduler(const MappingPlan& plan, const HardwareConfig& hw, const ModelSpec& model)
      : plan_(plan), hw_(hw), model_(model) {
    if (plan.kind != LayerKind::kAttention) throw Error("plan is not an attention layer");
    pe_ = hw_.pe_array;
    d_words_ = model_.embed_dim;
    head_dim_ = model_.head_dim();
    // Scratchpad map (words). The KV window starts at scratchpad_words/8;
    // everything below is working storage shared by all phases.
    x_buf_ = 0;
    y_buf_ = static_cast<std::uint16_t>(pe_);
    acc_buf_ = static_cast<std::uint16_t>(2 * pe_);
    gather_ = static_cast<std::uint16_t>(4 * pe_);
    prob_ = static_cast<std::uint16_t>(gather_ + d_words_);
    out_buf_ = static_cast<std::uint16_t>(prob_ + hw_.macs_per_router * 4);
    hdr_ = static_cast<std::uint16_t>(out_buf_ + d_words_);
    if (hdr_ + 1 > kv_window_base(hw_))
      throw CapacityError("attention working set does not fit below the KV window");
    if (hw_.kv_entries_per_word != 1)
      throw ConfigError("the compiled path stores KV entries one per word");

    entry_ = pick_entry();
    station_ = pick_station();
  }

  unsigned entry_router() const { return entry_; }
  unsigned station_router() const { return station_; }

  // One decode (or prefill position) step: consumes the token's input vector,
  // appends its K/V, attends over tokens 0..token_index, and leaves the
  // projected output at the W_O column heads.
  CompiledStep step(unsigned token_index, const std::vector<Value>& x) {
    if (x.size() != d_words_) throw Error("input vector does not match embed_dim");
    const unsigned context = token_index + 1;
    if (context > hw_.scu_cache_capacity)
      throw CapacityError("attention context exceeds the SCU indexed cache");

    CompiledStep out;
    ProgramBuilder b(hw_);
    inj_ = &out.injections;

    // --- static macro configuration -------------------------------------
    std::size_t rows0 = b.row_count();
    emit_configs(b);
    // --- phase A: input arrival and distribution ------------------------
    inject_vector(b, x, gather_);
    Cycle est = 0;
    for (MatrixId id : {MatrixId::kWQ, MatrixId::kWK, MatrixId::kWV})
      est += distribute_to_rows(b, plan_.matrix(id), gather_);
    push_phase(out, b, rows0, "input_bcast", est + d_words_ + cfg_cycles_);

    // --- phase B: QKV SMAC + column reduction ----------------------------
    rows0 = b.row_count();
    std::vector<const PlacedMatrix*> qkv = {&plan_.matrix(MatrixId::kWQ),
                                            &plan_.matrix(MatrixId::kWK),
                                            &plan_.matrix(MatrixId::kWV)};
    est = emit_smac_and_reduce(b, qkv);
    push_phase(out, b, rows0, "qkv_smac", est);

    // --- phase C: KV append ----------------------------------------------
    rows0 = b.row_count();
    est = emit_kv_append(b, token_index);
    push_phase(out, b, rows0, "kv_append", est);

    // --- phase D: gather q at the station --------------------------------
    rows0 = b.row_count();
    est = emit_q_gather(b);
    push_phase(out, b, rows0, "q_gather", est);

    // --- phase E..G: attention per head ----------------------------------
    for (unsigned h = 0; h < model_.num_heads; ++h) {
      rows0 = b.row_count();
      est = emit_scores(b, h, context);
      PhaseRecord scores{"scores_h" + std::to_string(h), est, 0, false};
      out.phases.push_back(scores);

      rows0 = b.row_count();
      est = emit_softmax(b, context);
      out.phases.push_back({"softmax_h" + std::to_string(h), est, 0, true});

      rows0 = b.row_count();
      est = emit_weighted_values(b, h, context);
      out.phases.push_back({"sv_h" + std::to_string(h), est, 0, false});
    }

    // --- phase H: output projection --------------------------------------
    rows0 = b.row_count();
    est = distribute_from(b, station_, out_buf_, plan_.matrix(MatrixId::kWO), x_buf_);
    std::vector<const PlacedMatrix*> wo = {&plan_.matrix(MatrixId::kWO)};
    est += emit_smac_and_reduce(b, wo);
    push_phase(out, b, rows0, "o_proj", est);

    // --- phase I: layer handoff over C2C ----------------------------------
    rows0 = b.row_count();
    est = emit_egress(b);
    PhaseRecord egress{"egress", est, std::uint64_t(d_words_) * 64, false};
    out.phases.push_back(egress);

    out.images = b.images();
    inj_ = nullptr;
    return out;
  }

  // Where the projected layer output lives after a step.
  std::vector<OutputRef> output_refs() const {
    std::vector<OutputRef> refs;
    const auto& wo = plan_.matrix(MatrixId::kWO);
    for (unsigned tc = 0; tc < wo.grid.cols; ++tc)
      refs.push_back({wo.col_group(tc, hw_.mesh_cols)[0], acc_buf_, pe_});
    return refs;
  }

  std::uint16_t acc_buf() const { return acc_buf_; }
  std::uint16_t out_buf() const { return out_buf_; }

  // Analytic duration of the inner attention loop: the cached-key streams are
  // spread over the MAC lanes (the partial unroll), then every accumulated
  // score flushes into the softmax unit.
  static Cycle score_stream_cycles(unsigned context, unsigned head_dim, unsigned avg_hops,
                                   unsigned unroll) {
    const unsigned u = std::max(1u, std::min(unroll, context));
    const Cycle batches = (context + u - 1) / u;
    return batches * (head_dim + avg_hops + 4) + context;
  }

 private:
  void push_phase(CompiledStep& out, ProgramBuilder& b, std::size_t rows0, const char* name,
                  Cycle est) {
    (void)rows0;
    (void)b;
    out.phases.push_back({name, est, 0, false});
  }

  bool is_kv_owner(unsigned id) const {
    const auto& k = plan_.kv_k.owners;
    const auto& v = plan_.kv_v.owners;
    return std::find(k.begin(), k.end(), id) != k.end() ||
           std::find(v.begin(), v.end(), id) != v.end();
  }

  unsigned pick_entry() const {
    // An even-column router outside every region and KV set, preferring the
    // bottom row (far from the weight channels).
    for (int r = static_cast<int>(hw_.mesh_rows) - 1; r >= 0; --r)
      for (unsigned c = 0; c < hw_.mesh_cols; c += 2) {
        const unsigned id = static_cast<unsigned>(r) * hw_.mesh_cols + c;
        bool free = !is_kv_owner(id);
        for (const auto& m : plan_.matrices)
          if (m.region.contains(static_cast<unsigned>(r), c)) free = false;
        if (free) return id;
      }
    throw CapacityError("no free even-column router for the chiplet entry");
  }

  unsigned pick_station() const {
    // An odd-column router inside (or just east of) the Q channel; it hosts
    // the score MACs, the softmax TSV and the attention-output accumulator.
    const auto& wq = plan_.matrix(MatrixId::kWQ);
    auto usable = [&](unsigned id) { return id != entry_ && !is_kv_owner(id); };
    for (unsigned c = wq.region.col0; c < wq.region.col0 + wq.region.cols; ++c)
      if (c % 2 == 1 && usable(wq.region.row0 * hw_.mesh_cols + c))
        return wq.region.row0 * hw_.mesh_cols + c;
    for (unsigned c = 1; c < hw_.mesh_cols; c += 2)
      for (unsigned r = 0; r < hw_.mesh_rows; ++r)
        if (usable(r * hw_.mesh_cols + c)) return r * hw_.mesh_cols + c;
    throw CapacityError("no odd-column router available for the score station");
  }

  void inject(Value v) { inj_->emplace_back(entry_, v); }

  // Sends one injected flit from the entry to a consumer at dst.
  Cycle flit_to(ProgramBuilder& b, Value v, unsigned dst, const Instruction& consumer_at_dst) {
    inject(v);
    if (dst == entry_) {
      Instruction c = consumer_at_dst;
      c.rd_en = bit(kPortDown);
      b.step({{entry_, c}});
      return 2;
    }
    const XyPath p = xy_path(entry_, dst, hw_.mesh_cols);
    std::map<unsigned, Instruction> first;
    first[entry_] = make_route(kPortDown, static_cast<std::uint8_t>(1u << p.src_out_port));
    b.step(first);
    for (const auto& seg : p.segments) {
      std::map<unsigned, Instruction> cmds;
      for (unsigned f : seg.forwarders)
        cmds[f] = make_route(seg.in_port, static_cast<std::uint8_t>(1u << seg.out_port));
      b.step(cmds);
    }
    Instruction c = consumer_at_dst;
    c.rd_en = static_cast<std::uint8_t>(1u << p.dst_in_port);
    b.step({{dst, c}});
    return p.hops + 2;
  }

  static std::uint8_t bit(unsigned port) { return static_cast<std::uint8_t>(1u << port); }

  // Copies len words within one router's scratchpad by bouncing off a planar
  // neighbor (there is no scratchpad-to-scratchpad command).
  Cycle emit_local_copy(ProgramBuilder& b, unsigned r, std::uint16_t src, std::uint16_t dst,
                        unsigned len) {
    const unsigned col = r % hw_.mesh_cols;
    const unsigned dir = col + 1 < hw_.mesh_cols ? kPortE : kPortW;
    const unsigned nb = dir == kPortE ? r + 1 : r - 1;
    unsigned off = 0;
    while (off < len) {
      const unsigned chunk = std::min(len - off, hw_.fifo_depth);
      b.stream({{r, make_sprd(dir, static_cast<std::uint16_t>(src + off))}}, chunk);
      b.stream({{nb, make_route(opposite_port(dir), bit(dir == kPortE ? kPortW : kPortE))}},
               chunk);
      b.stream({{r, make_spwr(dir == kPortE ? kPortE : kPortW,
                              static_cast<std::uint16_t>(dst + off))}},
               chunk);
      off += chunk;
    }
    return 3 * len + 6;
  }

  // Stream len words src->dst into a plain scratchpad write at dst_base.
  Cycle emit_copy(ProgramBuilder& b, unsigned src, std::uint16_t src_base, unsigned dst,
                  std::uint16_t dst_base, unsigned len) {
    if (src == dst) return emit_local_copy(b, src, src_base, dst_base, len);
    emit_stream(b, hw_, src, src_base, dst,
                [dst_base](unsigned in, std::uint16_t off) {
                  return make_spwr(in, static_cast<std::uint16_t>(dst_base + off));
                },
                len);
    return len + detail::manhattan(src, dst, hw_.mesh_cols) + 4;
  }

  void emit_configs(ProgramBuilder& b) {
    cfg_cycles_ = 0;
    const unsigned shift = hw_.numeric_mode == NumericMode::kFixed ? hw_.frac_bits : 0;
    cfg_cycles_ += flit_to(b, static_cast<Value>(shift), station_,
                           make_spwr(0, cfg_addr(hw_, kCfgDmacShift)));
    const unsigned act_shift =
        hw_.numeric_mode == NumericMode::kFixed ? hw_.frac_bits : kScuFracBits;
    for (unsigned helper : sv_helpers()) {
      cfg_cycles_ += flit_to(b, static_cast<Value>(act_shift), helper,
                             make_spwr(0, cfg_addr(hw_, kCfgActShift)));
      cfg_cycles_ += flit_to(b, 0, helper, make_spwr(0, cfg_addr(hw_, kCfgActClamp)));
    }
  }

  // Injects a vector and parks it at the entry router's scratchpad.
  void inject_vector(ProgramBuilder& b, const std::vector<Value>& x, std::uint16_t base) {
    for (Value v : x) inject(v);
    b.stream({{entry_, make_spwr(kPortDown, base)}}, static_cast<std::uint32_t>(x.size()));
  }

  // Entry scratchpad tile r -> x_buf of every router in the matrix's tile
  // row r. Returns a cycle estimate.
  Cycle distribute_to_rows(ProgramBuilder& b, const PlacedMatrix& m, std::uint16_t src_base) {
    Cycle est = 0;
    for (unsigned tr = 0; tr < m.grid.rows; ++tr)
      for (unsigned target : m.row_group(tr, hw_.mesh_cols))
        est += emit_copy(b, entry_, static_cast<std::uint16_t>(src_base + tr * pe_), target,
                         x_buf_, pe_);
    return est;
  }

  // src scratchpad [src_base ..] holds a full vector; deliver tile r to the
  // x_buf of every router in tile row r of m.
  Cycle distribute_from(ProgramBuilder& b, unsigned src, std::uint16_t src_base,
                        const PlacedMatrix& m, std::uint16_t dst_base) {
    Cycle est = 0;
    for (unsigned tr = 0; tr < m.grid.rows; ++tr)
      for (unsigned target : m.row_group(tr, hw_.mesh_cols))
        est += emit_copy(b, src, static_cast<std::uint16_t>(src_base + tr * pe_), target,
                         dst_base, pe_);
    return est;
  }

  // PE issue + drain + per-column gather-accumulate for a set of matrices.
  // Column heads end with the reduced tile slice in acc_buf.
  Cycle emit_smac_and_reduce(ProgramBuilder& b, const std::vector<const PlacedMatrix*>& mats) {
    Cycle est = hw_.pe_issue_cycles + pe_;
    // Issue everywhere at once (one shared instruction).
    std::map<unsigned, Instruction> issue;
    Instruction pe_cmd;
    pe_cmd.mode_sel = static_cast<std::uint8_t>(Mode::kPeIssue);
    pe_cmd.sp_addr = x_buf_;
    for (const auto* m : mats)
      for (unsigned r : m->routers(hw_.mesh_cols)) issue[r] = pe_cmd;
    b.step(issue);
    // Drain: column heads straight into acc_buf, everyone else into y_buf.
    std::map<unsigned, Instruction> drain;
    for (const auto* m : mats) {
      std::vector<bool> is_head(hw_.router_count(), false);
      for (unsigned tc = 0; tc < m->grid.cols; ++tc)
        is_head[m->col_group(tc, hw_.mesh_cols)[0]] = true;
      for (unsigned r : m->routers(hw_.mesh_cols))
        drain[r] = make_spwr(kPortPE, is_head[r] ? acc_buf_ : y_buf_);
    }
    b.stream(drain, pe_);
    // Gather-accumulate每 column into its head.
    for (const auto* m : mats)
      for (unsigned tc = 0; tc < m->grid.cols; ++tc) {
        const auto group = m->col_group(tc, hw_.mesh_cols);
        const unsigned head = group[0];
        for (std::size_t i = 1; i < group.size(); ++i) {
          emit_stream(b, hw_, group[i], y_buf_, head,
                      [this](unsigned in, std::uint16_t off) {
                        Instruction c;
                        c.mode_sel = static_cast<std::uint8_t>(Mode::kPartialSum);
                        c.rd_en = bit(in);
                        c.intxfer_en = true;
                        c.sp_addr = static_cast<std::uint16_t>(acc_buf_ + off);
                        return c;
                      },
                      pe_);
          est += pe_ + detail::manhattan(group[i], head, hw_.mesh_cols) + 4;
        }
      }
    return est;
  }

  Cycle emit_kv_append(ProgramBuilder& b, unsigned token_index) {
    Cycle est = 0;
    const KvSlot ks = kv_append(plan_.kv_k, token_index);
    const KvSlot vs = kv_append(plan_.kv_v, token_index);
    const auto& wk = plan_.matrix(MatrixId::kWK);
    const auto& wv = plan_.matrix(MatrixId::kWV);
    for (unsigned tc = 0; tc < wk.grid.cols; ++tc)
      est += emit_copy(b, wk.col_group(tc, hw_.mesh_cols)[0], acc_buf_, ks.owner_router,
                       static_cast<std::uint16_t>(ks.addr + tc * pe_), pe_);
    for (unsigned tc = 0; tc < wv.grid.cols; ++tc)
      est += emit_copy(b, wv.col_group(tc, hw_.mesh_cols)[0], acc_buf_, vs.owner_router,
                       static_cast<std::uint16_t>(vs.addr + tc * pe_), pe_);
    return est;
  }

  Cycle emit_q_gather(ProgramBuilder& b) {
    Cycle est = 0;
    const auto& wq = plan_.matrix(MatrixId::kWQ);
    for (unsigned tc = 0; tc < wq.grid.cols; ++tc)
      est += emit_copy(b, wq.col_group(tc, hw_.mesh_cols)[0], acc_buf_, station_,
                       static_cast<std::uint16_t>(gather_ + tc * pe_), pe_);
    return est;
  }

  unsigned kv_head_of(unsigned head) const {
    const unsigned kv_heads = model_.kv_dim / head_dim_;
    const unsigned group = model_.num_heads / kv_heads;
    return head / group;
  }

  // QK^T for the current context at the station: the owner streams the cached
  // key slice, the station multiplies against its gathered q and accumulates
  // on a per-token MAC lane, flushing each batch into the softmax unit.
  Cycle emit_scores(ProgramBuilder& b, unsigned head, unsigned context) {
    Cycle est = 0;
    const unsigned lanes = hw_.macs_per_router;
    const std::uint16_t q_off = static_cast<std::uint16_t>(gather_ + head * head_dim_);
    const unsigned kh_off = kv_head_of(head) * head_dim_;

    unsigned hop_sum = 0;
    for (unsigned r : plan_.kv_k.owners) hop_sum += detail::manhattan(r, station_, hw_.mesh_cols);
    const unsigned avg_hops =
        plan_.kv_k.owners.empty() ? 0 : hop_sum / unsigned(plan_.kv_k.owners.size());

    // Header first: the stream length announces itself to the softmax unit.
    est += flit_to(b, static_cast<Value>(context), station_, make_spwr(0, hdr_));
    b.step({{station_, make_sprd(kPortUp, hdr_)}});
    est += 1 + score_stream_cycles(context, head_dim_, avg_hops, lanes);

    for (unsigned u0 = 0; u0 < context; u0 += lanes) {
      const unsigned batch = std::min(lanes, context - u0);
      for (unsigned k = 0; k < batch; ++k) {
        const unsigned u = u0 + k;
        const KvSlot ks = kv_append(plan_.kv_k, u);
        const std::uint16_t src = static_cast<std::uint16_t>(ks.addr + kh_off);
        const unsigned lane = k;
        // pick_station keeps the station off the KV owner sets.
        emit_stream(b, hw_, ks.owner_router, src, station_,
                    [this, q_off, lane](unsigned in, std::uint16_t off) {
                      Instruction c;
                      c.mode_sel = static_cast<std::uint8_t>(Mode::kDmac);
                      c.rd_en = bit(in);
                      c.intxfer_en = true;
                      c.out_en = static_cast<std::uint8_t>(lane);
                      c.sp_addr = static_cast<std::uint16_t>(q_off + off);
                      return c;
                    },
                    head_dim_);
      }
      // Flush the batch into the SCU in token order.
      for (unsigned k = 0; k < batch; ++k) {
        Instruction f;
        f.mode_sel = static_cast<std::uint8_t>(Mode::kDmac);
        f.out_en = bit(kPortUp);
        f.sp_addr = static_cast<std::uint16_t>(k);
        b.step({{station_, f}});
      }
    }
    return est;
  }

  Cycle emit_softmax(ProgramBuilder& b, unsigned context) {
    // Collect the probabilities back from the TSV in input order.
    b.stream({{station_, make_spwr(kPortUp, prob_)}}, context);
    return 2 * Cycle(context) + kRecipCycles + context;
  }

  std::vector<unsigned> sv_helpers() const {
    std::vector<unsigned> out;
    for (unsigned r : plan_.kv_v.owners) {
      const unsigned helper = helper_of(r);
      if (std::find(out.begin(), out.end(), helper) == out.end()) out.push_back(helper);
    }
    return out;
  }

  unsigned helper_of(unsigned owner) const {
    // First hop on the owner->station path, or any other neighbor when the
    // owner sits next to the station.
    if (detail::manhattan(owner, station_, hw_.mesh_cols) > 1) {
      const XyPath p = xy_path(owner, station_, hw_.mesh_cols);
      if (!p.segments.empty()) return p.segments.front().forwarders.front();
    }
    const unsigned col = owner % hw_.mesh_cols;
    const unsigned row = owner / hw_.mesh_cols;
    std::vector<unsigned> candidates;
    if (row + 1 < hw_.mesh_rows) candidates.push_back(owner + hw_.mesh_cols);
    if (row > 0) candidates.push_back(owner - hw_.mesh_cols);
    if (col + 1 < hw_.mesh_cols) candidates.push_back(owner + 1);
    if (col > 0) candidates.push_back(owner - 1);
    for (unsigned c : candidates)
      if (c != station_ && c != entry_) return c;
    throw Error("no helper router available next to a KV owner");
  }

  // out_h += p_u * v_u for each cached token: the owner streams the value
  // slice through a helper running the affine macro (slope = p_u), and the
  // station accumulates into out_buf with read-modify-write partial sums.
  Cycle emit_weighted_values(ProgramBuilder& b, unsigned head, unsigned context) {
    Cycle est = 0;
    const unsigned kh_off = kv_head_of(head) * head_dim_;
    const std::uint16_t out_off = static_cast<std::uint16_t>(out_buf_ + head * head_dim_);

    for (unsigned u = 0; u < context; ++u) {
      const KvSlot vs = kv_append(plan_.kv_v, u);
      const unsigned helper = helper_of(vs.owner_router);
      // Load slope = p_u into the helper's activation config.
      est += emit_copy_single(b, station_, static_cast<std::uint16_t>(prob_ + u), helper,
                              cfg_addr(hw_, kCfgActSlope));
      // Stream v_u through the helper into the station accumulator.
      est += emit_scaled_stream(b, vs.owner_router, static_cast<std::uint16_t>(vs.addr + kh_off),
                                helper, out_off, head_dim_, u == 0);
    }
    return est;
  }

  // Single word src(addr) -> dst(addr) stream.
  Cycle emit_copy_single(ProgramBuilder& b, unsigned src, std::uint16_t src_addr, unsigned dst,
                         std::uint16_t dst_addr) {
    return emit_copy(b, src, src_addr, dst, dst_addr, 1);
  }

  // owner --v--> helper(affine) --> station(accumulate into out_off).
  Cycle emit_scaled_stream(ProgramBuilder& b, unsigned owner, std::uint16_t src,
                           unsigned helper, std::uint16_t out_off, unsigned len,
                           bool overwrite) {
    unsigned off = 0;
    while (off < len) {
      const unsigned chunk = std::min(len - off, hw_.fifo_depth);
      // Leg 1: owner -> helper (adjacent by construction).
      const unsigned dir_oh = port_towards(owner, helper, hw_.mesh_cols);
      b.stream({{owner, make_sprd(dir_oh, static_cast<std::uint16_t>(src + off))}}, chunk);
      // Leg 2: helper applies the affine macro toward the station.
      const XyPath hp = helper == station_ ? XyPath{} : xy_path(helper, station_, hw_.mesh_cols);
      Instruction act;
      act.mode_sel = static_cast<std::uint8_t>(Mode::kActivation);
      act.rd_en = bit(opposite_port(dir_oh));
      act.out_en = bit(helper == station_ ? kPortW : hp.src_out_port);
      b.stream({{helper, act}}, chunk);
      // Leg 3: forwarders.
      if (helper != station_)
        for (const auto& seg : hp.segments) {
          std::map<unsigned, Instruction> cmds;
          for (unsigned f : seg.forwarders)
            cmds[f] = make_route(seg.in_port, bit(seg.out_port));
          b.stream(cmds, chunk);
        }
      // Leg 4: station folds into out_buf.
      Instruction fold;
      if (overwrite) {
        fold = make_spwr(helper == station_ ? kPortE : hp.dst_in_port,
                         static_cast<std::uint16_t>(out_off + off));
      } else {
        fold.mode_sel = static_cast<std::uint8_t>(Mode::kPartialSum);
        fold.rd_en = bit(helper == station_ ? kPortE : hp.dst_in_port);
        fold.intxfer_en = true;
        fold.sp_addr = static_cast<std::uint16_t>(out_off + off);
      }
      b.stream({{station_, fold}}, chunk);
      off += chunk;
    }
    return 2 * len + detail::manhattan(owner, station_, hw_.mesh_cols) + 8;
  }

  Cycle emit_egress(ProgramBuilder& b) {
    Cycle est = 0;
    const auto& wo = plan_.matrix(MatrixId::kWO);
    std::vector<unsigned> even_cols;
    for (unsigned c = 0; c < hw_.mesh_cols; c += 2) even_cols.push_back(c);
    for (unsigned tc = 0; tc < wo.grid.cols; ++tc) {
      const unsigned head = wo.col_group(tc, hw_.mesh_cols)[0];
      const unsigned ecol = even_cols[tc % even_cols.size()];
      const unsigned egress = (hw_.mesh_rows - 1) * hw_.mesh_cols + ecol;
      if (egress == head) continue;
      emit_stream(b, hw_, head, acc_buf_, egress,
                  [](unsigned in, std::uint16_t) {
                    return make_route(in, static_cast<std::uint8_t>(1u << kPortDown));
                  },
                  pe_);
      est += pe_ + detail::manhattan(head, egress, hw_.mesh_cols) + 4;
    }
    return est;
  }

  MappingPlan plan_;
  HardwareConfig hw_;
  ModelSpec model_;
  unsigned pe_ = 0;
  unsigned d_words_ = 0;
  unsigned head_dim_ = 0;
  std::uint16_t x_buf_ = 0, y_buf_ = 0, acc_buf_ = 0, gather_ = 0, prob_ = 0, out_buf_ = 0,
                hdr_ = 0;
  unsigned entry_ = 0;
  unsigned station_ = 0;
  Cycle cfg_cycles_ = 0;
  std::vector<std::pair<unsigned, Value>>* inj_ = nullptr;
};

// ---------------------------------------------------------------------------
// Feed-forward layer on one chiplet holding gate, up and down projections:
// the attention machinery minus the softmax unit, with the gate/up
// elementwise product on router MACs.
// ---------------------------------------------------------------------------

class FfnScheduler {
 public:
  FfnScheduler(const MappingPlan& plan, const HardwareConfig& hw, const ModelSpec& model)
      : plan_(plan), hw_(hw), model_(model) {
    if (!plan.has(MatrixId::kWGate) || !plan.has(MatrixId::kWUp) || !plan.has(MatrixId::kWDown))
      throw Error("feed-forward plan needs gate, up and down projections");
    pe_ = hw_.pe_array;
    x_buf_ = 0;
    y_buf_ = static_cast<std::uint16_t>(pe_);
    acc_buf_ = static_cast<std::uint16_t>(2 * pe_);
    gather_ = static_cast<std::uint16_t>(4 * pe_);
    if (gather_ + std::max(model_.embed_dim, model_.ffn_dim) > hw_.scratchpad_words - kCfgWords)
      throw CapacityError("feed-forward working set does not fit in the scratchpad");
    entry_ = pick_entry();
  }

  unsigned entry_router() const { return entry_; }

  CompiledStep step(const std::vector<Value>& x) {
    if (x.size() != model_.embed_dim) throw Error("input vector does not match embed_dim");
    CompiledStep out;
    ProgramBuilder b(hw_);
    inj_ = &out.injections;

    const auto& gate = plan_.matrix(MatrixId::kWGate);
    const auto& up = plan_.matrix(MatrixId::kWUp);
    const auto& down = plan_.matrix(MatrixId::kWDown);

    // Configs: identity-slope ReLU at the actors, elementwise shift at the
    // combiners.
    Cycle est = 0;
    const unsigned shift = hw_.numeric_mode == NumericMode::kFixed ? hw_.frac_bits : 0;
    const Value unit_slope = Value{1} << shift;
    for (unsigned tc = 0; tc < gate.grid.cols; ++tc) {
      const Station s = station_for(tc, gate, up, down);
      est += flit_to(b, unit_slope, s.actor, make_spwr(0, cfg_addr(hw_, kCfgActSlope)));
      est += flit_to(b, static_cast<Value>(shift), s.actor,
                     make_spwr(0, cfg_addr(hw_, kCfgActShift)));
      est += flit_to(b, 1, s.actor, make_spwr(0, cfg_addr(hw_, kCfgActClamp)));
      est += flit_to(b, static_cast<Value>(shift), s.combiner,
                     make_spwr(0, cfg_addr(hw_, kCfgDmacShift)));
    }
    out.phases.push_back({"ffn_cfg", est, 0, false});

    // Input distribution to both input-side projections.
    for (Value v : x) inj_->emplace_back(entry_, v);
    b.stream({{entry_, make_spwr(kPortDown, gather_)}}, static_cast<std::uint32_t>(x.size()));
    est = model_.embed_dim;
    est += distribute(b, entry_, gather_, gate);
    est += distribute(b, entry_, gather_, up);
    out.phases.push_back({"ffn_input", est, 0, false});

    // Gate/up SMAC and reduction.
    est = smac_reduce(b, {&gate, &up});
    out.phases.push_back({"ffn_proj", est, 0, false});

    // Elementwise act(g) * u per ffn slice, delivered to the down row group.
    est = 0;
    for (unsigned tc = 0; tc < gate.grid.cols; ++tc) est += emit_combine(b, tc, gate, up, down);
    out.phases.push_back({"ffn_ew", est, 0, false});

    // Down projection.
    est = smac_reduce(b, {&down});
    est += emit_egress(b, down);
    PhaseRecord proj{"ffn_down", est, std::uint64_t(model_.embed_dim) * 64, false};
    out.phases.push_back(proj);

    out.images = b.images();
    inj_ = nullptr;
    return out;
  }

  std::vector<OutputRef> output_refs() const {
    std::vector<OutputRef> refs;
    const auto& down = plan_.matrix(MatrixId::kWDown);
    for (unsigned tc = 0; tc < down.grid.cols; ++tc)
      refs.push_back({down.col_group(tc, hw_.mesh_cols)[0], acc_buf_, pe_});
    return refs;
  }

 private:
  struct Station {
    unsigned actor;     // runs the clamped affine macro on the gate stream
    unsigned combiner;  // multiplies the two streams
    unsigned sink;      // down-projection row-group head receiving the slice
  };

  unsigned pick_entry() const {
    for (int r = static_cast<int>(hw_.mesh_rows) - 1; r >= 0; --r)
      for (unsigned c = 0; c < hw_.mesh_cols; c += 2) {
        const unsigned id = static_cast<unsigned>(r) * hw_.mesh_cols + c;
        bool free = true;
        for (const auto& m : plan_.matrices)
          if (m.region.contains(static_cast<unsigned>(r), c)) free = false;
        if (free) return id;
      }
    throw CapacityError("no free even-column router for the chiplet entry");
  }

  Station station_for(unsigned tc, const PlacedMatrix& gate, const PlacedMatrix& up,
                      const PlacedMatrix& down) const {
    Station s;
    s.sink = down.row_group(tc, hw_.mesh_cols)[0];
    // Combiner and actor sit south of the down region head, clear of the
    // weight channels (regions occupy the top rows).
    const unsigned below = s.sink + hw_.mesh_cols * (down.region.rows + 1);
    s.combiner = below < hw_.router_count() ? below : s.sink + hw_.mesh_cols;
    s.actor = s.combiner + hw_.mesh_cols < hw_.router_count() ? s.combiner + hw_.mesh_cols
                                                              : s.combiner - 1;
    (void)gate;
    (void)up;
    return s;
  }

  void inject(Value v) { inj_->emplace_back(entry_, v); }

  Cycle flit_to(ProgramBuilder& b, Value v, unsigned dst, const Instruction& consumer) {
    inject(v);
    if (dst == entry_) {
      Instruction c = consumer;
      c.rd_en = static_cast<std::uint8_t>(1u << kPortDown);
      b.step({{entry_, c}});
      return 2;
    }
    const XyPath p = xy_path(entry_, dst, hw_.mesh_cols);
    b.step({{entry_, make_route(kPortDown, static_cast<std::uint8_t>(1u << p.src_out_port))}});
    for (const auto& seg : p.segments) {
      std::map<unsigned, Instruction> cmds;
      for (unsigned f : seg.forwarders)
        cmds[f] = make_route(seg.in_port, static_cast<std::uint8_t>(1u << seg.out_port));
      b.step(cmds);
    }
    Instruction c = consumer;
    c.rd_en = static_cast<std::uint8_t>(1u << p.dst_in_port);
    b.step({{dst, c}});
    return p.hops + 2;
  }

  Cycle distribute(ProgramBuilder& b, unsigned src, std::uint16_t src_base,
                   const PlacedMatrix& m) {
    Cycle est = 0;
    for (unsigned tr = 0; tr < m.grid.rows; ++tr)
      for (unsigned target : m.row_group(tr, hw_.mesh_cols)) {
        emit_stream(b, hw_, src, static_cast<std::uint16_t>(src_base + tr * pe_), target,
                    [this](unsigned in, std::uint16_t off) {
                      return make_spwr(in, static_cast<std::uint16_t>(x_buf_ + off));
                    },
                    pe_);
        est += pe_ + detail::manhattan(src, target, hw_.mesh_cols) + 4;
      }
    return est;
  }

  Cycle smac_reduce(ProgramBuilder& b, const std::vector<const PlacedMatrix*>& mats) {
    Cycle est = hw_.pe_issue_cycles + pe_;
    std::map<unsigned, Instruction> issue;
    Instruction pe_cmd;
    pe_cmd.mode_sel = static_cast<std::uint8_t>(Mode::kPeIssue);
    pe_cmd.sp_addr = x_buf_;
    for (const auto* m : mats)
      for (unsigned r : m->routers(hw_.mesh_cols)) issue[r] = pe_cmd;
    b.step(issue);
    std::map<unsigned, Instruction> drain;
    for (const auto* m : mats) {
      std::vector<bool> is_head(hw_.router_count(), false);
      for (unsigned tc = 0; tc < m->grid.cols; ++tc)
        is_head[m->col_group(tc, hw_.mesh_cols)[0]] = true;
      for (unsigned r : m->routers(hw_.mesh_cols))
        drain[r] = make_spwr(kPortPE, is_head[r] ? acc_buf_ : y_buf_);
    }
    b.stream(drain, pe_);
    for (const auto* m : mats)
      for (unsigned tc = 0; tc < m->grid.cols; ++tc) {
        const auto group = m->col_group(tc, hw_.mesh_cols);
        for (std::size_t i = 1; i < group.size(); ++i) {
          emit_stream(b, hw_, group[i], y_buf_, group[0],
                      [this](unsigned in, std::uint16_t off) {
                        Instruction c;
                        c.mode_sel = static_cast<std::uint8_t>(Mode::kPartialSum);
                        c.rd_en = static_cast<std::uint8_t>(1u << in);
                        c.intxfer_en = true;
                        c.sp_addr = static_cast<std::uint16_t>(acc_buf_ + off);
                        return c;
                      },
                      pe_);
          est += pe_ + detail::manhattan(group[i], group[0], hw_.mesh_cols) + 4;
        }
      }
    return est;
  }

  // h_slice(tc) = relu(g_tc) * u_tc, landing in the x_buf of the down
  // projection's tile row tc.
  Cycle emit_combine(ProgramBuilder& b, unsigned tc, const PlacedMatrix& gate,
                     const PlacedMatrix& up, const PlacedMatrix& down) {
    const unsigned g_head = gate.col_group(tc, hw_.mesh_cols)[0];
    const unsigned u_head = up.col_group(tc, hw_.mesh_cols)[0];
    const Station s = station_for(tc, gate, up, down);

    const XyPath g_to_actor = xy_path(g_head, s.actor, hw_.mesh_cols);
    const XyPath actor_to_comb = xy_path(s.actor, s.combiner, hw_.mesh_cols);
    XyPath u_to_comb = xy_path(u_head, s.combiner, hw_.mesh_cols);
    if (u_to_comb.dst_in_port == actor_to_comb.dst_in_port)
      u_to_comb = xy_path(u_head, s.combiner, hw_.mesh_cols, /*column_first=*/true);
    if (u_to_comb.dst_in_port == actor_to_comb.dst_in_port)
      throw Error("gate and up streams collide at the combiner");
    const XyPath comb_to_sink = xy_path(s.combiner, s.sink, hw_.mesh_cols);

    unsigned off = 0;
    while (off < pe_) {
      const unsigned chunk = std::min(pe_ - off, hw_.fifo_depth);
      // The two operand streams may share path routers, so they run strictly
      // one after the other: the activated gate chunk parks in one combiner
      // FIFO, the up chunk in another, then the product drains to the sink.
      b.stream({{g_head, make_sprd(g_to_actor.src_out_port,
                                   static_cast<std::uint16_t>(acc_buf_ + off))}},
               chunk);
      for (const auto& seg : g_to_actor.segments) {
        std::map<unsigned, Instruction> cmds;
        for (unsigned f : seg.forwarders)
          cmds[f] = make_route(seg.in_port, static_cast<std::uint8_t>(1u << seg.out_port));
        b.stream(cmds, chunk);
      }
      Instruction act;
      act.mode_sel = static_cast<std::uint8_t>(Mode::kActivation);
      act.rd_en = static_cast<std::uint8_t>(1u << g_to_actor.dst_in_port);
      act.out_en = static_cast<std::uint8_t>(1u << actor_to_comb.src_out_port);
      b.stream({{s.actor, act}}, chunk);
      for (const auto& seg : actor_to_comb.segments) {
        std::map<unsigned, Instruction> cmds;
        for (unsigned f : seg.forwarders)
          cmds[f] = make_route(seg.in_port, static_cast<std::uint8_t>(1u << seg.out_port));
        b.stream(cmds, chunk);
      }
      b.stream({{u_head, make_sprd(u_to_comb.src_out_port,
                                   static_cast<std::uint16_t>(acc_buf_ + off))}},
               chunk);
      for (const auto& seg : u_to_comb.segments) {
        std::map<unsigned, Instruction> cmds;
        for (unsigned f : seg.forwarders)
          cmds[f] = make_route(seg.in_port, static_cast<std::uint8_t>(1u << seg.out_port));
        b.stream(cmds, chunk);
      }
      Instruction ew;
      ew.mode_sel = static_cast<std::uint8_t>(Mode::kDmac);
      ew.rd_en = static_cast<std::uint8_t>((1u << actor_to_comb.dst_in_port) |
                                           (1u << u_to_comb.dst_in_port));
      ew.out_en = static_cast<std::uint8_t>(1u << comb_to_sink.src_out_port);
      b.stream({{s.combiner, ew}}, chunk);
      for (const auto& seg : comb_to_sink.segments) {
        std::map<unsigned, Instruction> cmds;
        for (unsigned f : seg.forwarders)
          cmds[f] = make_route(seg.in_port, static_cast<std::uint8_t>(1u << seg.out_port));
        b.stream(cmds, chunk);
      }
      b.stream({{s.sink, make_spwr(comb_to_sink.dst_in_port,
                                   static_cast<std::uint16_t>(x_buf_ + off))}},
               chunk);
      off += chunk;
    }

    // Replicate the slice to the rest of the down row group.
    Cycle est = 2 * pe_ + 16;
    for (unsigned target : down.row_group(tc, hw_.mesh_cols))
      if (target != s.sink) {
        emit_stream(b, hw_, s.sink, x_buf_, target,
                    [this](unsigned in, std::uint16_t off2) {
                      return make_spwr(in, static_cast<std::uint16_t>(x_buf_ + off2));
                    },
                    pe_);
        est += pe_ + detail::manhattan(s.sink, target, hw_.mesh_cols) + 4;
      }
    return est;
  }

  Cycle emit_egress(ProgramBuilder& b, const PlacedMatrix& down) {
    Cycle est = 0;
    std::vector<unsigned> even_cols;
    for (unsigned c = 0; c < hw_.mesh_cols; c += 2) even_cols.push_back(c);
    for (unsigned tc = 0; tc < down.grid.cols; ++tc) {
      const unsigned head = down.col_group(tc, hw_.mesh_cols)[0];
      const unsigned egress =
          (hw_.mesh_rows - 1) * hw_.mesh_cols + even_cols[tc % even_cols.size()];
      if (egress == head || egress == entry_) continue;
      emit_stream(b, hw_, head, acc_buf_, egress,
                  [](unsigned in, std::uint16_t) {
                    return make_route(in, static_cast<std::uint8_t>(1u << kPortDown));
                  },
                  pe_);
      est += pe_ + detail::manhattan(head, egress, hw_.mesh_cols) + 4;
    }
    return est;
  }

  MappingPlan plan_;
  HardwareConfig hw_;
  ModelSpec model_;
  unsigned pe_ = 0;
  std::uint16_t x_buf_ = 0, y_buf_ = 0, acc_buf_ = 0, gather_ = 0;
  unsigned entry_ = 0;
  std::vector<std::pair<unsigned, Value>>* inj_ = nullptr;
};

}  // namespace picnic
