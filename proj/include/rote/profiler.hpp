#pragma once

#include <cstdint>
#include <string>

#include "rote/backbone.hpp"

namespace rote::prof {

struct LatencyStats {
  double mean_ms = 0.0;
  double p50_ms = 0.0;
  double p95_ms = 0.0;
  int reps = 0;
};

struct EfficiencyReport {
  std::string method;
  std::int64_t params = 0;
  std::int64_t flops_per_forward = 0;  // one row at max_len
  LatencyStats latency;
};

// Exact element count over all trainable tensors.
std::int64_t count_params(const Model& model);

struct FlopBreakdown {
  std::int64_t total = 0;
  std::int64_t rotary = 0;       // rotary transform + fusion terms
  std::int64_t attention = 0;    // scores + softmax + context
  std::int64_t projections = 0;  // QKV/output/FFN matmuls
  std::int64_t scoring = 0;      // final logits against the item table
  std::int64_t other = 0;        // embeddings, layer norms, residuals
};

// Analytic FLOP count for one forward row at max_len.
// Convention: one multiply-add = 2 FLOPs; matmul (m x k)(k x n) = 2mnk;
// sin/cos tables are built once per row, not per layer.
FlopBreakdown estimate_flops(const ModelConfig& cfg);

// Wall-clock per forward pass after warmup, single-threaded.
LatencyStats measure_latency(const Model& model, const RowInput& row, int warmup,
                             int reps);

std::string flop_convention_text();

}  // namespace rote::prof
