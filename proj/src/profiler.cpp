#include "rote/profiler.hpp"

#include <algorithm>
#include <chrono>
#include <stdexcept>
#include <vector>

namespace rote::prof {

std::int64_t count_params(const Model& model) {
  std::int64_t total = 0;
  for (const auto& [name, t] : model.named_params())
    total += static_cast<std::int64_t>(t->size());
  return total;
}

namespace {

int active_levels(EncodingMode mode) {
  switch (mode) {
    case EncodingMode::kPositionalEmbedding: return 0;
    case EncodingMode::kPureTimestamp: return 1;
    case EncodingMode::kYearOnly: return 1;
    case EncodingMode::kYearMonth: return 2;
    case EncodingMode::kYearMonthDay: return 3;
  }
  return 0;
}

}  // namespace

FlopBreakdown estimate_flops(const ModelConfig& cfg) {
  cfg.validate();
  const std::int64_t L = cfg.max_len;
  const std::int64_t D = cfg.d_model;
  const std::int64_t H = cfg.n_heads;
  const std::int64_t V = cfg.vocab_size;
  const std::int64_t N = cfg.n_layers;
  const std::int64_t levels = active_levels(cfg.mode);

  FlopBreakdown fb;
  // Embedding lookup is a copy; the sqrt(d) scale is L*D multiplies.
  fb.other += L * D;
  if (cfg.mode == EncodingMode::kPositionalEmbedding) fb.other += L * D;
  // Layer norms: mean, variance, normalize, affine ~ 8 ops per element.
  const std::int64_t ln = 8 * L * D;
  fb.other += ln;  // final norm
  fb.other += N * 2 * ln;
  fb.other += N * 2 * L * D;  // residual adds

  // Matmul projections, 2mnk each, plus bias adds.
  const std::int64_t proj = 2 * L * D * D + L * D;
  fb.projections += N * (4 * proj /* q,k,v,o */ + 2 * proj /* ffn */ + L * D /* relu */);

  // Attention: scores and context are 2*L*L*hd per head = 2*L*L*D total;
  // softmax ~5 ops per logit; one scale multiply per logit.
  fb.attention += N * (2 * L * L * D + 2 * L * L * D + 5 * H * L * L + H * L * L);

  if (levels > 0 && N > 0) {
    // sin/cos tables once per row (shared across layers and heads).
    fb.rotary += levels * L * D * 2;
    // Per layer, q and k: 4 ops per element per level, plus fusion adds.
    fb.rotary += N * 2 * (levels * 4 * L * D + (levels - 1) * L * D);
  }

  fb.scoring += 2 * L * V * D;

  fb.total = fb.other + fb.projections + fb.attention + fb.rotary + fb.scoring;
  return fb;
}

LatencyStats measure_latency(const Model& model, const RowInput& row, int warmup,
                             int reps) {
  if (reps < 10) throw std::invalid_argument("measure_latency: reps must be >= 10");
  set_thread_override(1);  // pinned single-threaded measurement
  for (int i = 0; i < warmup; ++i) (void)final_hidden(model, row);
  std::vector<double> samples;
  samples.reserve(static_cast<std::size_t>(reps));
  for (int i = 0; i < reps; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    (void)final_hidden(model, row);
    const auto t1 = std::chrono::steady_clock::now();
    samples.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  set_thread_override(0);
  LatencyStats stats;
  stats.reps = reps;
  double sum = 0.0;
  for (double s : samples) sum += s;
  stats.mean_ms = sum / static_cast<double>(reps);
  std::sort(samples.begin(), samples.end());
  stats.p50_ms = samples[samples.size() / 2];
  stats.p95_ms = samples[std::min(samples.size() - 1,
                                  static_cast<std::size_t>(0.95 * static_cast<double>(samples.size())))];
  return stats;
}

std::string flop_convention_text() {
  return "# FLOP convention: multiply-add = 2 FLOPs; matmul (m,k)x(k,n) = 2mnk;\n"
         "# layer norm = 8 ops/element; softmax = 5 ops/logit; sin/cos tables\n"
         "# built once per row and shared across layers and heads.\n";
}

}  // namespace rote::prof
