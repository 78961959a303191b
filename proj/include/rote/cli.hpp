#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "rote/backbone.hpp"
#include "rote/datasets.hpp"
#include "rote/trainer.hpp"

namespace rote::cli {

// Usage or I/O problems exit with code 2; other failures with code 1.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Flat run configuration. Every field has a default; a config file overrides
// defaults and command-line flags override the file.
struct RunConfig {
  std::string data_dir = "data";  // prepared dataset directory
  std::string out_dir = "out";
  std::string input_tsv;          // raw interaction log (prepare)
  std::string checkpoint;         // model file (eval); default <out>/model.ckpt
  std::string split = "both";     // eval split: valid | test | both

  int k_core = 5;
  int vocab_size = 1000;  // profile fallback when no dataset is present

  int d_model = 32;
  int n_heads = 2;
  int n_layers = 2;
  int max_len = 50;
  double dropout = 0.2;
  std::string mode = "Y+M+D";
  std::vector<std::string> modes = {"PositionalEmbedding", "PureTimestamp", "Y",
                                    "Y+M", "Y+M+D"};

  double learning_rate = 1e-3;
  int batch_size = 128;
  int max_epochs = 200;
  int patience = 20;
  std::uint64_t seed = 1;
  std::vector<std::uint64_t> seeds = {1, 2, 3};

  int latency_warmup = 3;
  int latency_reps = 30;

  data::SynthParams synth;

  ModelConfig model_config(int vocab, const std::string& mode_name) const;
  train::TrainConfig train_config(std::uint64_t run_seed) const;
};

// Applies one `key = value` setting; throws UsageError on unknown keys or
// unparsable values.
void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value);

// Parses a flat key = value file (# comments, blank lines allowed) on top of
// `base`. Throws UsageError if the file is missing or malformed.
RunConfig load_config_file(const std::string& path, const RunConfig& base);

// Precedence: defaults, then the optional file, then flag overrides in order.
RunConfig resolve_config(const std::string& config_path,
                         const std::vector<std::pair<std::string, std::string>>& flags);

// Deterministic echo of every setting, one `key = value` per line, sorted.
std::string serialize_config(const RunConfig& cfg);

// Subcommands. Each writes its artifacts under cfg.out_dir (cmd_prepare
// writes the dataset itself plus stats.tsv) and throws on failure.
void cmd_prepare(const RunConfig& cfg);
void cmd_synth(const RunConfig& cfg);
void cmd_train(const RunConfig& cfg);
void cmd_eval(const RunConfig& cfg);
void cmd_ablate(const RunConfig& cfg);
void cmd_profile(const RunConfig& cfg);
int cmd_selftest(const RunConfig& cfg);  // returns number of failed checks

}  // namespace rote::cli
