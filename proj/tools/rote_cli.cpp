#include <CLI11.hpp>
#include <iostream>
#include <string>
#include <utility>
#include <vector>

#include "rote/cli.hpp"

namespace {

// Collects only the flags the user actually passed, so they override the
// config file without clobbering file-provided settings with defaults.
struct FlagSet {
  std::vector<std::pair<std::string, std::string>> overrides;

  void add(CLI::App* cmd, const std::string& flag, const std::string& key,
           const std::string& help) {
    auto holder = std::make_shared<std::string>();
    cmd->add_option_function<std::string>(
        flag,
        [this, key, holder](const std::string& value) {
          overrides.emplace_back(key, value);
        },
        help);
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"rote: rotary time embedding recommender pipeline"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> names = {"prepare", "synth",   "train",   "eval",
                                    "ablate",  "profile", "selftest"};
  std::map<std::string, CLI::App*> cmds;
  std::map<std::string, FlagSet> flags;
  for (const auto& name : names) {
    CLI::App* cmd = app.add_subcommand(name);
    cmd->add_option("--config", config_path, "key = value config file");
    FlagSet& fs = flags[name];
    fs.add(cmd, "--seed", "seed", "RNG seed");
    fs.add(cmd, "--seeds", "seeds", "comma-separated seed list (ablate)");
    fs.add(cmd, "--mode", "mode", "encoding mode name");
    fs.add(cmd, "--modes", "modes", "comma-separated mode list");
    fs.add(cmd, "--out", "out", "output directory");
    fs.add(cmd, "--data", "data", "prepared dataset directory");
    fs.add(cmd, "--input", "input", "raw interaction TSV (prepare)");
    fs.add(cmd, "--checkpoint", "checkpoint", "model checkpoint (eval)");
    fs.add(cmd, "--split", "split", "eval split: valid | test | both");
    fs.add(cmd, "--max-len", "max_len", "sequence window length");
    fs.add(cmd, "--k-core", "k_core", "k-core filtering threshold");
    fs.add(cmd, "--d-model", "d_model", "model width");
    fs.add(cmd, "--n-heads", "n_heads", "attention heads");
    fs.add(cmd, "--n-layers", "n_layers", "transformer blocks");
    fs.add(cmd, "--dropout", "dropout", "dropout rate");
    fs.add(cmd, "--learning-rate", "learning_rate", "Adam learning rate");
    fs.add(cmd, "--batch-size", "batch_size", "training batch size");
    fs.add(cmd, "--max-epochs", "max_epochs", "training epoch cap");
    fs.add(cmd, "--patience", "patience", "early-stopping patience");
    cmds[name] = cmd;
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    for (const auto& name : names) {
      if (!cmds[name]->parsed()) continue;
      const rote::cli::RunConfig cfg =
          rote::cli::resolve_config(config_path, flags[name].overrides);
      if (name == "prepare") rote::cli::cmd_prepare(cfg);
      else if (name == "synth") rote::cli::cmd_synth(cfg);
      else if (name == "train") rote::cli::cmd_train(cfg);
      else if (name == "eval") rote::cli::cmd_eval(cfg);
      else if (name == "ablate") rote::cli::cmd_ablate(cfg);
      else if (name == "profile") rote::cli::cmd_profile(cfg);
      else if (name == "selftest") return rote::cli::cmd_selftest(cfg) == 0 ? 0 : 1;
      return 0;
    }
  } catch (const rote::cli::UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;  // no subcommand matched (unreachable with require_subcommand)
}
