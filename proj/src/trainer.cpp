#include "rote/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

namespace rote::train {

void TrainConfig::validate() const {
  if (learning_rate < 0.0) throw std::invalid_argument("TrainConfig: learning_rate < 0");
  if (patience > max_epochs) throw std::invalid_argument("TrainConfig: patience > max_epochs");
  if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch_size < 1");
}

AdamState make_adam_state(const Model& model) {
  AdamState state;
  for (const auto& [name, t] : model.named_params()) {
    state.m.emplace_back(t->rows, t->cols);
    state.v.emplace_back(t->rows, t->cols);
  }
  return state;
}

void adam_step(Model& model, const std::vector<Tensor>& grads, AdamState& state,
               const TrainConfig& cfg) {
  auto named = model.named_params();
  if (grads.size() != named.size() || state.m.size() != named.size())
    throw std::invalid_argument("adam_step: parameter/gradient count mismatch");
  ++state.step;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (std::size_t p = 0; p < named.size(); ++p) {
    Tensor& param = *named[p].second;
    const Tensor& g = grads[p];
    if (!param.same_shape(g)) throw std::invalid_argument("adam_step: shape mismatch");
    for (std::size_t i = 0; i < param.data.size(); ++i) {
      double& m = state.m[p].data[i];
      double& v = state.v[p].data[i];
      m = cfg.beta1 * m + (1.0 - cfg.beta1) * g.data[i];
      v = cfg.beta2 * v + (1.0 - cfg.beta2) * g.data[i] * g.data[i];
      const double mhat = m / bc1;
      const double vhat = v / bc2;
      param.data[i] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.adam_eps);
    }
  }
}

namespace {

void clip_global_norm(std::vector<Tensor>& grads, double clip) {
  double sq = 0.0;
  for (const Tensor& g : grads)
    for (double x : g.data) sq += x * x;
  const double norm = std::sqrt(sq);
  if (norm <= clip || norm == 0.0) return;
  const double scale = clip / norm;
  for (Tensor& g : grads)
    for (double& x : g.data) x *= scale;
}

}  // namespace

TrainReport train(Model& model, const data::Dataset& ds, const TrainConfig& cfg) {
  cfg.validate();
  if (ds.sequences.empty()) throw std::invalid_argument("train: empty dataset");
  if (ds.vocab_size() != model.cfg.vocab_size)
    throw std::invalid_argument("train: model/dataset vocab mismatch");
  const auto t_start = std::chrono::steady_clock::now();

  // Pre-built training rows (train split = all but the last two events).
  std::vector<data::TrainRow> rows;
  rows.reserve(ds.sequences.size());
  for (const data::UserSequence& seq : ds.sequences) {
    const data::Split sp = data::leave_one_out_split(seq);
    rows.push_back(data::make_train_row(sp.train, model.cfg.max_len));
  }

  AdamState state = make_adam_state(model);
  std::mt19937_64 shuffle_rng(cfg.seed);
  std::mt19937_64 dropout_rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);

  TrainReport report;
  Model best = model;
  int epochs_since_best = 0;
  const std::size_t n_params = model.named_params().size();

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::vector<std::size_t> order(rows.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    double epoch_loss = 0.0;
    std::size_t epoch_positions = 0;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end =
          std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      // Position-weighted mean over the batch.
      std::size_t batch_positions = 0;
      for (std::size_t i = start; i < end; ++i)
        for (auto f : rows[order[i]].active) batch_positions += f ? 1 : 0;

      std::vector<Tensor> grads;
      grads.reserve(n_params);
      for (const auto& [name, t] : model.named_params()) grads.emplace_back(t->rows, t->cols);

      double batch_loss = 0.0;
      for (std::size_t i = start; i < end; ++i) {
        const data::TrainRow& row = rows[order[i]];
        std::size_t row_positions = 0;
        for (auto f : row.active) row_positions += f ? 1 : 0;

        ad::Tape tape;
        BoundModel bm = bind(tape, model, true);
        ad::Node* logits = forward_logits(tape, bm, row.input, true, dropout_rng);
        ad::Node* loss = ad::cross_entropy_rows(tape, logits, row.targets, row.active);
        if (!std::isfinite(loss->value.data[0]))
          throw std::runtime_error("train: loss diverged at epoch " + std::to_string(epoch) +
                                   ", batch " + std::to_string(start / cfg.batch_size));
        tape.backward(loss);
        const double w =
            static_cast<double>(row_positions) / static_cast<double>(batch_positions);
        batch_loss += loss->value.data[0] * w;
        for (std::size_t p = 0; p < n_params; ++p)
          for (std::size_t j = 0; j < grads[p].data.size(); ++j)
            grads[p].data[j] += bm.params[p]->grad.data[j] * w;
      }
      // Keep the padding embedding frozen at zero.
      for (std::size_t c = 0; c < grads[0].cols; ++c) grads[0].at(0, c) = 0.0;
      clip_global_norm(grads, cfg.clip_norm);
      adam_step(model, grads, state, cfg);

      epoch_loss += batch_loss * static_cast<double>(batch_positions);
      epoch_positions += batch_positions;
    }

    const eval::RankingMetrics valid =
        eval::evaluate(model, ds, eval::SplitKind::kValid);
    EpochStats stats;
    stats.epoch = epoch;
    stats.train_loss = epoch_loss / static_cast<double>(epoch_positions);
    stats.valid_recall5 = valid.recall_at.at(5);
    stats.valid_recall10 = valid.recall_at.at(10);
    stats.valid_ndcg5 = valid.ndcg_at.at(5);
    stats.valid_ndcg10 = valid.ndcg_at.at(10);
    report.epochs.push_back(stats);

    if (report.best_epoch < 0 || stats.valid_ndcg10 > report.best_valid_ndcg10) {
      report.best_epoch = epoch;
      report.best_valid_ndcg10 = stats.valid_ndcg10;
      best = model;
      epochs_since_best = 0;
    } else if (++epochs_since_best >= cfg.patience) {
      break;
    }
  }
  model = best;
  report.wall_clock_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return report;
}

void write_report_tsv(const TrainReport& report, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("write_report_tsv: cannot open " + path);
  os << "epoch\ttrain_loss\tvalid_recall5\tvalid_recall10\tvalid_ndcg5\tvalid_ndcg10\tbest\n";
  char buf[64];
  for (const EpochStats& e : report.epochs) {
    os << e.epoch;
    for (double v : {e.train_loss, e.valid_recall5, e.valid_recall10, e.valid_ndcg5,
                     e.valid_ndcg10}) {
      std::snprintf(buf, sizeof buf, "%.10g", v);
      os << '\t' << buf;
    }
    os << '\t' << (e.epoch == report.best_epoch ? 1 : 0) << '\n';
  }
}

}  // namespace rote::train
