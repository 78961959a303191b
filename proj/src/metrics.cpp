#include "rote/metrics.hpp"

#include <cmath>
#include <stdexcept>

namespace rote::eval {

int rank_of_target(std::span<const double> scores, int target,
                   const std::set<int>& exclusions) {
  if (target < 0 || static_cast<std::size_t>(target) >= scores.size())
    throw std::invalid_argument("rank_of_target: target out of range");
  if (exclusions.count(target))
    throw std::invalid_argument("rank_of_target: target is excluded");
  const double target_score = scores[static_cast<std::size_t>(target)];
  int rank = 1;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const int idx = static_cast<int>(i);
    if (idx == target || exclusions.count(idx)) continue;
    if (scores[i] > target_score) ++rank;
    else if (scores[i] == target_score && idx < target) ++rank;
  }
  return rank;
}

double recall_at_k(int rank, int k) {
  if (rank < 1 || k < 1) throw std::invalid_argument("recall_at_k: rank and k >= 1");
  return rank <= k ? 1.0 : 0.0;
}

double ndcg_at_k(int rank, int k) {
  if (rank < 1 || k < 1) throw std::invalid_argument("ndcg_at_k: rank and k >= 1");
  return rank <= k ? 1.0 / std::log2(static_cast<double>(rank) + 1.0) : 0.0;
}

RankingMetrics evaluate(const Model& model, const data::Dataset& ds, SplitKind split,
                        const EvalOptions& opts) {
  if (ds.sequences.empty()) throw std::invalid_argument("evaluate: empty split");
  const std::size_t n = ds.sequences.size();
  // Per-user results stored by index: deterministic regardless of threading.
  std::vector<int> ranks(n, 0);
  const long ln = static_cast<long>(n);
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic) num_threads(max_threads())
#endif
  for (long ui = 0; ui < ln; ++ui) {
    const std::size_t u = static_cast<std::size_t>(ui);
    const data::Split sp = data::leave_one_out_split(ds.sequences[u]);
    std::vector<data::Event> inputs = sp.train;
    int target;
    if (split == SplitKind::kValid) {
      target = sp.valid.item;
    } else {
      inputs.push_back(sp.valid);
      target = sp.test.item;
    }
    const RowInput row = data::window(inputs, model.cfg.max_len);
    const std::vector<double> hidden = final_hidden(model, row);
    const std::vector<double> scores = score_items(hidden, model);
    std::set<int> exclusions;  // padding handled by -inf score
    if (opts.exclude_seen)
      for (const data::Event& ev : inputs)
        if (ev.item != target) exclusions.insert(ev.item);
    ranks[u] = rank_of_target(scores, target, exclusions);
  }
  RankingMetrics metrics;
  metrics.n_users = n;
  for (int k : opts.cutoffs) {
    double recall = 0.0, ndcg = 0.0;
    for (int r : ranks) {
      recall += recall_at_k(r, k);
      ndcg += ndcg_at_k(r, k);
    }
    metrics.recall_at[k] = recall / static_cast<double>(n);
    metrics.ndcg_at[k] = ndcg / static_cast<double>(n);
  }
  return metrics;
}

}  // namespace rote::eval
