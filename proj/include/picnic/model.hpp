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

#include <string>
#include <vector>

#include <json.hpp>

#include "picnic/common.hpp"
#include "picnic/config.hpp"

namespace picnic {

// Transformer shapes. A decoder block expands to one attention layer and
// three feed-forward layers (gate, up, down), each mapped to hardware as its
// own layer.
struct ModelSpec {
  std::string name;
  unsigned num_layers = 1;  // decoder blocks
  unsigned embed_dim = 64;
  unsigned kv_dim = 64;
  unsigned ffn_dim = 128;
  unsigned num_heads = 1;

  unsigned head_dim() const { return embed_dim / num_heads; }

  void validate() const {
    if (num_layers == 0 || embed_dim == 0 || kv_dim == 0 || ffn_dim == 0 || num_heads == 0)
      throw ConfigError("model dimensions must be positive");
    if (embed_dim % num_heads != 0)
      throw ConfigError("embed_dim must divide into num_heads");
    if (kv_dim % head_dim() != 0)
      throw ConfigError("kv_dim must be a multiple of the head dimension");
  }
};

enum class MatrixId { kWQ, kWK, kWV, kWO, kWGate, kWUp, kWDown };

inline const char* to_string(MatrixId m) {
  switch (m) {
    case MatrixId::kWQ: return "W_Q";
    case MatrixId::kWK: return "W_K";
    case MatrixId::kWV: return "W_V";
    case MatrixId::kWO: return "W_O";
    case MatrixId::kWGate: return "W_gate";
    case MatrixId::kWUp: return "W_up";
    case MatrixId::kWDown: return "W_down";
  }
  return "?";
}

enum class LayerKind { kAttention, kFeedForward };

inline const char* to_string(LayerKind k) {
  return k == LayerKind::kAttention ? "attention" : "feed-forward";
}

struct MatrixShape {
  MatrixId id;
  unsigned rows;  // input dimension
  unsigned cols;  // output dimension
};

struct LayerSpec {
  unsigned index;    // position in the end-to-end layer sequence
  unsigned decoder;  // owning decoder block
  LayerKind kind;
  std::vector<MatrixShape> matrices;
};

// Expands a model into its hardware-facing layer sequence.
inline std::vector<LayerSpec> layer_sequence(const ModelSpec& m) {
  m.validate();
  std::vector<LayerSpec> out;
  for (unsigned d = 0; d < m.num_layers; ++d) {
    const unsigned base = static_cast<unsigned>(out.size());
    out.push_back({base, d, LayerKind::kAttention,
                   {{MatrixId::kWQ, m.embed_dim, m.embed_dim},
                    {MatrixId::kWK, m.embed_dim, m.kv_dim},
                    {MatrixId::kWV, m.embed_dim, m.kv_dim},
                    {MatrixId::kWO, m.embed_dim, m.embed_dim}}});
    out.push_back({base + 1, d, LayerKind::kFeedForward,
                   {{MatrixId::kWGate, m.embed_dim, m.ffn_dim}}});
    out.push_back({base + 2, d, LayerKind::kFeedForward,
                   {{MatrixId::kWUp, m.embed_dim, m.ffn_dim}}});
    out.push_back({base + 3, d, LayerKind::kFeedForward,
                   {{MatrixId::kWDown, m.ffn_dim, m.embed_dim}}});
  }
  return out;
}

inline ModelSpec model_from_json(const nlohmann::json& j) {
  ModelSpec m;
  detail::get_opt(j, "name", m.name);
  detail::get_opt(j, "num_layers", m.num_layers);
  detail::get_opt(j, "embed_dim", m.embed_dim);
  detail::get_opt(j, "kv_dim", m.kv_dim);
  detail::get_opt(j, "ffn_dim", m.ffn_dim);
  detail::get_opt(j, "num_heads", m.num_heads);
  m.validate();
  return m;
}

inline nlohmann::json model_to_json(const ModelSpec& m) {
  return nlohmann::json{{"name", m.name},           {"num_layers", m.num_layers},
                        {"embed_dim", m.embed_dim}, {"kv_dim", m.kv_dim},
                        {"ffn_dim", m.ffn_dim},     {"num_heads", m.num_heads}};
}

// Published decoder shapes used by the benchmark harness.
inline ModelSpec model_preset(const std::string& name) {
  ModelSpec m;
  m.name = name;
  if (name == "llama-1b") {
    m.num_layers = 16;
    m.embed_dim = 2048;
    m.kv_dim = 512;
    m.ffn_dim = 8192;
    m.num_heads = 32;
  } else if (name == "llama-8b") {
    m.num_layers = 32;
    m.embed_dim = 4096;
    m.kv_dim = 1024;
    m.ffn_dim = 14336;
    m.num_heads = 32;
  } else if (name == "llama-13b") {
    m.num_layers = 40;
    m.embed_dim = 5120;
    m.kv_dim = 5120;
    m.ffn_dim = 13824;
    m.num_heads = 40;
  } else if (name == "desk") {
    m.num_layers = 1;
    m.embed_dim = 64;
    m.kv_dim = 64;
    m.ffn_dim = 128;
    m.num_heads = 1;
  } else {
    throw ConfigError("unknown model preset: " + name);
  }
  m.validate();
  return m;
}

}  // namespace picnic
