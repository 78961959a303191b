#pragma once

#include <map>
#include <set>
#include <span>
#include <vector>

#include "rote/backbone.hpp"
#include "rote/datasets.hpp"

namespace rote::eval {

struct RankingMetrics {
  std::map<int, double> recall_at;
  std::map<int, double> ndcg_at;
  std::size_t n_users = 0;
};

// 1-based rank of the target among non-excluded items; ties rank the
// smaller item index first. Item 0 (padding) is always excluded by callers
// via `exclusions` or a -inf score.
int rank_of_target(std::span<const double> scores, int target,
                   const std::set<int>& exclusions = {});

double recall_at_k(int rank, int k);
double ndcg_at_k(int rank, int k);

enum class SplitKind { kValid, kTest };

struct EvalOptions {
  std::vector<int> cutoffs = {5, 10};
  bool exclude_seen = false;  // drop the user's historical items from candidates
};

// Full-vocabulary leave-one-out evaluation. Valid-split inputs are the
// train items; test-split inputs are train + valid. Per-user scoring is
// parallel over a read-only model; aggregation is order-independent.
RankingMetrics evaluate(const Model& model, const data::Dataset& ds, SplitKind split,
                        const EvalOptions& opts = {});

}  // namespace rote::eval
