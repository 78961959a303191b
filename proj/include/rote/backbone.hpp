#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "rote/autodiff.hpp"
#include "rote/calendar.hpp"
#include "rote/rote.hpp"
#include "rote/tensor.hpp"

namespace rote {

enum class EncodingMode {
  kPositionalEmbedding,
  kPureTimestamp,
  kYearOnly,
  kYearMonth,
  kYearMonthDay,
};

std::string to_string(EncodingMode mode);
EncodingMode encoding_mode_from_string(const std::string& name);

struct ModelConfig {
  int vocab_size = 0;  // items + 1; id 0 is padding
  int d_model = 32;
  int n_heads = 2;
  int n_layers = 2;
  int max_len = 50;
  double dropout_rate = 0.2;
  EncodingMode mode = EncodingMode::kYearMonthDay;
  RoTEConfig rote;  // head_dim filled from d_model / n_heads

  int head_dim() const { return d_model / n_heads; }
  bool is_rotary() const { return mode != EncodingMode::kPositionalEmbedding; }
  void validate() const;
};

struct LayerParams {
  Tensor wq, wk, wv, wo;      // d_model x d_model
  Tensor bq, bk, bv, bo;      // 1 x d_model
  Tensor ln1_gain, ln1_bias;  // 1 x d_model
  Tensor ln2_gain, ln2_bias;
  Tensor ffn_w1, ffn_b1;  // d_model x d_model, 1 x d_model
  Tensor ffn_w2, ffn_b2;
};

struct Model {
  ModelConfig cfg;
  Tensor item_emb;  // vocab_size x d_model; row 0 stays exactly zero
  Tensor pos_emb;   // max_len x d_model; allocated only in positional mode
  std::vector<LayerParams> layers;
  Tensor final_ln_gain, final_ln_bias;

  // Declaration-order (name, tensor) view over all trainable parameters.
  std::vector<std::pair<std::string, Tensor*>> named_params();
  std::vector<std::pair<std::string, const Tensor*>> named_params() const;
};

Model init_parameters(const ModelConfig& cfg, std::uint64_t seed);

// One fixed-length, left-padded sequence row.
struct RowInput {
  std::vector<int> ids;                       // max_len, 0 = padding
  std::vector<cal::TemporalTriplet> triplets; // (0,0,0) under padding
  std::vector<std::int64_t> raw_ts;           // 0 under padding
};

// Parameter leaves bound to one tape, in named_params order.
struct BoundModel {
  const Model* model = nullptr;
  std::vector<ad::Node*> params;
  ad::Node* item_emb = nullptr;
};

BoundModel bind(ad::Tape& tape, const Model& model, bool requires_grad);

// Per-level expanded (cos, sin) tables for one row's timestamps, shared by
// every head and layer. Empty for positional mode.
ad::RotaryCoeffs make_rotary_coeffs(const ModelConfig& cfg, const RowInput& row);

// Final-layer-norm hidden states (max_len x d_model). Causal masking;
// padding positions are excluded as attention keys.
ad::Node* forward_hidden(ad::Tape& tape, const BoundModel& bm, const RowInput& row,
                         bool train, std::mt19937_64& rng);

// Per-position next-item logits (max_len x vocab_size).
ad::Node* forward_logits(ad::Tape& tape, const BoundModel& bm, const RowInput& row,
                         bool train, std::mt19937_64& rng);

// Dot-product scores against every item row; padding id forced to -inf.
std::vector<double> score_items(std::span<const double> hidden, const Model& model);

// Inference-only hidden state of the final position for one row.
std::vector<double> final_hidden(const Model& model, const RowInput& row);

void save_checkpoint(const Model& model, const std::string& path);
Model load_checkpoint(const std::string& path);

}  // namespace rote
