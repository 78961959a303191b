#include "rote/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include "rote/autodiff.hpp"
#include "rote/metrics.hpp"
#include "rote/profiler.hpp"
#include "rote/rote.hpp"

namespace rote::cli {

namespace fs = std::filesystem;

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

long long parse_int(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const long long v = std::stoll(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw UsageError("bad integer for '" + key + "': " + value);
  }
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw UsageError("bad number for '" + key + "': " + value);
  }
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> out;
  std::stringstream ss(value);
  std::string part;
  while (std::getline(ss, part, ',')) {
    part = trim(part);
    if (!part.empty()) out.push_back(part);
  }
  return out;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw UsageError("cannot write " + path.string());
  return os;
}

data::Dataset load_prepared(const std::string& dir) {
  if (!fs::exists(dir)) throw UsageError("dataset directory not found: " + dir);
  return data::load_dataset(dir);
}

void write_config_echo(const RunConfig& cfg, const std::string& filename) {
  fs::create_directories(cfg.out_dir);
  auto os = open_out(fs::path(cfg.out_dir) / filename);
  os << serialize_config(cfg);
}

std::string join(const std::vector<std::string>& parts) {
  std::string out;
  for (const auto& p : parts) {
    if (!out.empty()) out += ",";
    out += p;
  }
  return out;
}

void validate_mode_name(const std::string& name) {
  try {
    encoding_mode_from_string(name);
  } catch (const std::exception& e) {
    throw UsageError(e.what());
  }
}

}  // namespace

ModelConfig RunConfig::model_config(int vocab, const std::string& mode_name) const {
  ModelConfig mc;
  mc.vocab_size = vocab;
  mc.d_model = d_model;
  mc.n_heads = n_heads;
  mc.n_layers = n_layers;
  mc.max_len = max_len;
  mc.dropout_rate = dropout;
  mc.mode = encoding_mode_from_string(mode_name);
  return mc;
}

train::TrainConfig RunConfig::train_config(std::uint64_t run_seed) const {
  train::TrainConfig tc;
  tc.learning_rate = learning_rate;
  tc.batch_size = batch_size;
  tc.max_epochs = max_epochs;
  tc.patience = patience;
  tc.seed = run_seed;
  return tc;
}

void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value) {
  if (key == "data") cfg.data_dir = value;
  else if (key == "out") cfg.out_dir = value;
  else if (key == "input") cfg.input_tsv = value;
  else if (key == "checkpoint") cfg.checkpoint = value;
  else if (key == "split") {
    if (value != "valid" && value != "test" && value != "both")
      throw UsageError("split must be valid, test, or both; got: " + value);
    cfg.split = value;
  } else if (key == "k_core") cfg.k_core = static_cast<int>(parse_int(key, value));
  else if (key == "vocab_size") cfg.vocab_size = static_cast<int>(parse_int(key, value));
  else if (key == "d_model") cfg.d_model = static_cast<int>(parse_int(key, value));
  else if (key == "n_heads") cfg.n_heads = static_cast<int>(parse_int(key, value));
  else if (key == "n_layers") cfg.n_layers = static_cast<int>(parse_int(key, value));
  else if (key == "max_len") cfg.max_len = static_cast<int>(parse_int(key, value));
  else if (key == "dropout") cfg.dropout = parse_double(key, value);
  else if (key == "mode") {
    validate_mode_name(value);
    cfg.mode = value;
  } else if (key == "modes") {
    const auto names = split_list(value);
    if (names.empty()) throw UsageError("modes list is empty");
    for (const auto& n : names) validate_mode_name(n);
    cfg.modes = names;
  } else if (key == "learning_rate") cfg.learning_rate = parse_double(key, value);
  else if (key == "batch_size") cfg.batch_size = static_cast<int>(parse_int(key, value));
  else if (key == "max_epochs") cfg.max_epochs = static_cast<int>(parse_int(key, value));
  else if (key == "patience") cfg.patience = static_cast<int>(parse_int(key, value));
  else if (key == "seed") cfg.seed = static_cast<std::uint64_t>(parse_int(key, value));
  else if (key == "seeds") {
    const auto parts = split_list(value);
    if (parts.empty()) throw UsageError("seeds list is empty");
    cfg.seeds.clear();
    for (const auto& p : parts)
      cfg.seeds.push_back(static_cast<std::uint64_t>(parse_int(key, p)));
  } else if (key == "latency_warmup") cfg.latency_warmup = static_cast<int>(parse_int(key, value));
  else if (key == "latency_reps") cfg.latency_reps = static_cast<int>(parse_int(key, value));
  else if (key == "synth_users") cfg.synth.n_users = static_cast<int>(parse_int(key, value));
  else if (key == "synth_items") cfg.synth.n_items = static_cast<int>(parse_int(key, value));
  else if (key == "synth_horizon_days") cfg.synth.horizon_days = static_cast<int>(parse_int(key, value));
  else if (key == "synth_p_season") cfg.synth.p_season = parse_double(key, value);
  else if (key == "synth_p_recent") cfg.synth.p_recent = parse_double(key, value);
  else if (key == "synth_min_events") cfg.synth.min_events = static_cast<int>(parse_int(key, value));
  else if (key == "synth_max_events") cfg.synth.max_events = static_cast<int>(parse_int(key, value));
  else throw UsageError("unknown config key: " + key);
}

RunConfig load_config_file(const std::string& path, const RunConfig& base) {
  std::ifstream is(path);
  if (!is) throw UsageError("cannot open config file: " + path);
  RunConfig cfg = base;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw UsageError("config line " + std::to_string(lineno) + " is not key = value");
    apply_setting(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return cfg;
}

RunConfig resolve_config(
    const std::string& config_path,
    const std::vector<std::pair<std::string, std::string>>& flags) {
  RunConfig cfg;
  if (!config_path.empty()) cfg = load_config_file(config_path, cfg);
  for (const auto& [key, value] : flags) apply_setting(cfg, key, value);
  return cfg;
}

std::string serialize_config(const RunConfig& cfg) {
  std::map<std::string, std::string> kv;
  kv["data"] = cfg.data_dir;
  kv["out"] = cfg.out_dir;
  kv["input"] = cfg.input_tsv;
  kv["checkpoint"] = cfg.checkpoint;
  kv["split"] = cfg.split;
  kv["k_core"] = std::to_string(cfg.k_core);
  kv["vocab_size"] = std::to_string(cfg.vocab_size);
  kv["d_model"] = std::to_string(cfg.d_model);
  kv["n_heads"] = std::to_string(cfg.n_heads);
  kv["n_layers"] = std::to_string(cfg.n_layers);
  kv["max_len"] = std::to_string(cfg.max_len);
  kv["dropout"] = fmt(cfg.dropout);
  kv["mode"] = cfg.mode;
  kv["modes"] = join(cfg.modes);
  kv["learning_rate"] = fmt(cfg.learning_rate);
  kv["batch_size"] = std::to_string(cfg.batch_size);
  kv["max_epochs"] = std::to_string(cfg.max_epochs);
  kv["patience"] = std::to_string(cfg.patience);
  kv["seed"] = std::to_string(cfg.seed);
  {
    std::vector<std::string> s;
    for (auto v : cfg.seeds) s.push_back(std::to_string(v));
    kv["seeds"] = join(s);
  }
  kv["latency_warmup"] = std::to_string(cfg.latency_warmup);
  kv["latency_reps"] = std::to_string(cfg.latency_reps);
  kv["synth_users"] = std::to_string(cfg.synth.n_users);
  kv["synth_items"] = std::to_string(cfg.synth.n_items);
  kv["synth_horizon_days"] = std::to_string(cfg.synth.horizon_days);
  kv["synth_p_season"] = fmt(cfg.synth.p_season);
  kv["synth_p_recent"] = fmt(cfg.synth.p_recent);
  kv["synth_min_events"] = std::to_string(cfg.synth.min_events);
  kv["synth_max_events"] = std::to_string(cfg.synth.max_events);
  std::string out;
  for (const auto& [k, v] : kv) out += k + " = " + v + "\n";
  return out;
}

void cmd_prepare(const RunConfig& cfg) {
  if (cfg.input_tsv.empty()) throw UsageError("prepare needs input = <tsv path>");
  if (!fs::exists(cfg.input_tsv))
    throw UsageError("input file not found: " + cfg.input_tsv);
  const auto raw = data::load_interactions(cfg.input_tsv);
  const auto filtered = data::k_core_filter(raw, cfg.k_core);
  if (filtered.empty())
    throw std::runtime_error("prepare: no interactions survive " +
                             std::to_string(cfg.k_core) + "-core filtering");
  const data::Dataset ds = data::build_sequences(filtered);
  if (ds.sequences.empty())
    throw std::runtime_error("prepare: no users with >= 3 events after filtering");
  fs::create_directories(cfg.out_dir);
  data::save_dataset(ds, cfg.out_dir);

  const std::size_t users = ds.sequences.size();
  const std::size_t items = ds.item_ids.size() - 1;  // minus padding
  std::size_t interactions = 0;
  for (const auto& seq : ds.sequences) interactions += seq.events.size();
  const double density = static_cast<double>(interactions) /
                         (static_cast<double>(users) * static_cast<double>(items));
  auto os = open_out(fs::path(cfg.out_dir) / "stats.tsv");
  os << "users\titems\tinteractions\tdensity\n"
     << users << '\t' << items << '\t' << interactions << '\t' << fmt(density) << '\n';
  write_config_echo(cfg, "config_prepare.txt");
}

void cmd_synth(const RunConfig& cfg) {
  data::SynthParams params = cfg.synth;
  params.seed = cfg.seed;
  const auto interactions = data::synth_seasonal(params);
  fs::create_directories(cfg.out_dir);
  data::write_interactions_tsv(interactions,
                               (fs::path(cfg.out_dir) / "interactions.tsv").string());
  data::write_generator_sidecar(params,
                                (fs::path(cfg.out_dir) / "generator.json").string());
  write_config_echo(cfg, "config_synth.txt");
}

void cmd_train(const RunConfig& cfg) {
  const data::Dataset ds = load_prepared(cfg.data_dir);
  Model model = init_parameters(cfg.model_config(ds.vocab_size(), cfg.mode), cfg.seed);
  const train::TrainReport report = train::train(model, ds, cfg.train_config(cfg.seed));
  fs::create_directories(cfg.out_dir);
  save_checkpoint(model, (fs::path(cfg.out_dir) / "model.ckpt").string());
  train::write_report_tsv(report, (fs::path(cfg.out_dir) / "report.tsv").string());
  write_config_echo(cfg, "config_train.txt");
  std::cerr << "train: best epoch " << report.best_epoch << ", valid NDCG@10 "
            << fmt(report.best_valid_ndcg10) << ", " << fmt(report.wall_clock_seconds)
            << "s\n";
}

void cmd_eval(const RunConfig& cfg) {
  const std::string ckpt = cfg.checkpoint.empty()
                               ? (fs::path(cfg.out_dir) / "model.ckpt").string()
                               : cfg.checkpoint;
  if (!fs::exists(ckpt)) throw UsageError("checkpoint not found: " + ckpt);
  const Model model = load_checkpoint(ckpt);
  const data::Dataset ds = load_prepared(cfg.data_dir);
  if (model.cfg.vocab_size != ds.vocab_size())
    throw std::runtime_error("eval: checkpoint vocab " +
                             std::to_string(model.cfg.vocab_size) +
                             " != dataset vocab " + std::to_string(ds.vocab_size()));
  fs::create_directories(cfg.out_dir);
  auto os = open_out(fs::path(cfg.out_dir) / "metrics.tsv");
  os << "split\tK\trecall\tndcg\tn_users\n";
  for (const std::string& split : {std::string("valid"), std::string("test")}) {
    if (cfg.split != "both" && cfg.split != split) continue;
    const auto m = eval::evaluate(
        model, ds,
        split == "valid" ? eval::SplitKind::kValid : eval::SplitKind::kTest);
    for (int k : {5, 10})
      os << split << '\t' << k << '\t' << fmt(m.recall_at.at(k)) << '\t'
         << fmt(m.ndcg_at.at(k)) << '\t' << m.n_users << '\n';
  }
  write_config_echo(cfg, "config_eval.txt");
}

void cmd_ablate(const RunConfig& cfg) {
  if (cfg.modes.empty() || cfg.seeds.empty())
    throw UsageError("ablate needs at least one mode and one seed");
  const data::Dataset ds = load_prepared(cfg.data_dir);
  fs::create_directories(cfg.out_dir);
  auto os = open_out(fs::path(cfg.out_dir) / "ablation.tsv");
  os << "mode\trecall10_mean\trecall10_std\tndcg10_mean\tndcg10_std\tn_seeds\n";
  for (const std::string& mode : cfg.modes) {
    std::vector<double> r10, n10;
    for (std::uint64_t seed : cfg.seeds) {
      try {
        Model model = init_parameters(cfg.model_config(ds.vocab_size(), mode), seed);
        const auto report = train::train(model, ds, cfg.train_config(seed));
        const auto m = eval::evaluate(model, ds, eval::SplitKind::kTest);
        r10.push_back(m.recall_at.at(10));
        n10.push_back(m.ndcg_at.at(10));
        std::cerr << "ablate: " << mode << " seed " << seed << " test NDCG@10 "
                  << fmt(m.ndcg_at.at(10)) << " (" << fmt(report.wall_clock_seconds)
                  << "s)\n";
      } catch (const std::exception& e) {
        throw std::runtime_error("ablate cell mode=" + mode + " seed=" +
                                 std::to_string(seed) + " failed: " + e.what());
      }
    }
    auto mean = [](const std::vector<double>& xs) {
      double s = 0.0;
      for (double x : xs) s += x;
      return s / static_cast<double>(xs.size());
    };
    auto stdev = [&](const std::vector<double>& xs) {
      const double mu = mean(xs);
      double s = 0.0;
      for (double x : xs) s += (x - mu) * (x - mu);
      return std::sqrt(s / static_cast<double>(xs.size()));
    };
    os << mode << '\t' << fmt(mean(r10)) << '\t' << fmt(stdev(r10)) << '\t'
       << fmt(mean(n10)) << '\t' << fmt(stdev(n10)) << '\t' << cfg.seeds.size()
       << '\n';
  }
  write_config_echo(cfg, "config_ablate.txt");
}

void cmd_profile(const RunConfig& cfg) {
  int vocab = cfg.vocab_size;
  if (fs::exists(cfg.data_dir)) vocab = load_prepared(cfg.data_dir).vocab_size();
  fs::create_directories(cfg.out_dir);
  auto os = open_out(fs::path(cfg.out_dir) / "profile.tsv");
  os << prof::flop_convention_text();
  os << "method\tparams\tflops\tlatency_ms_p50\n";
  for (const std::string& mode : cfg.modes) {
    const ModelConfig mc = cfg.model_config(vocab, mode);
    const Model model = init_parameters(mc, cfg.seed);
    std::vector<data::Event> events;
    for (int i = 0; i < mc.max_len; ++i) {
      data::Event ev;
      ev.item = 1 + i % (vocab - 1);
      ev.ts = 86400LL * (i + 1);
      ev.triplet = cal::decompose_timestamp(ev.ts);
      events.push_back(ev);
    }
    const RowInput row = data::window(events, mc.max_len);
    const auto latency =
        prof::measure_latency(model, row, cfg.latency_warmup, cfg.latency_reps);
    os << mode << '\t' << prof::count_params(model) << '\t'
       << prof::estimate_flops(mc).total << '\t' << fmt(latency.p50_ms) << '\n';
  }
  write_config_echo(cfg, "config_profile.txt");
}

namespace {

// One selftest check: writes ok/FAIL lines identically to the report stream.
struct Checker {
  std::ostream& report;
  int failures = 0;
  void operator()(const std::string& name, bool pass) {
    report << (pass ? "ok " : "FAIL ") << name << "\n";
    if (!pass) ++failures;
  }
};

}  // namespace

int cmd_selftest(const RunConfig& cfg) {
  fs::create_directories(cfg.out_dir);
  auto file = open_out(fs::path(cfg.out_dir) / "selftest.txt");
  std::ostringstream report;
  Checker check{report};

  // Rotary algebra.
  {
    std::mt19937_64 rng(101);
    std::normal_distribution<double> dist(0.0, 1.0);
    bool norm_ok = true, shift_ok = true, invol_ok = true, spectrum_ok = true;
    for (int hd : {2, 4, 32}) {
      const auto omega = inverse_frequencies(1e4, hd);
      spectrum_ok = spectrum_ok && omega[0] == 1.0;
      for (std::size_t i = 1; i < omega.size(); ++i)
        spectrum_ok = spectrum_ok && omega[i] < omega[i - 1];
      for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> x(static_cast<std::size_t>(hd));
        for (double& v : x) v = dist(rng);
        const double t = static_cast<double>(rng() % 10000);
        const auto y = apply_rotary(x, rotation_angles(t, omega));
        double nx = 0.0, ny = 0.0;
        for (int i = 0; i < hd; ++i) {
          nx += x[static_cast<std::size_t>(i)] * x[static_cast<std::size_t>(i)];
          ny += y[static_cast<std::size_t>(i)] * y[static_cast<std::size_t>(i)];
        }
        norm_ok = norm_ok && std::abs(nx - ny) <= 1e-6 * std::max(1.0, nx);
        const auto rr = rotate_half(rotate_half(x));
        for (int i = 0; i < hd; ++i)
          invol_ok = invol_ok && rr[static_cast<std::size_t>(i)] ==
                                     -x[static_cast<std::size_t>(i)];
        // Relative shift: <R(a)q, R(b)k> == <R(a-b)q, k>.
        std::vector<double> q(x), k(static_cast<std::size_t>(hd));
        for (double& v : k) v = dist(rng);
        const double a = t + static_cast<double>(rng() % 100), b = t;
        const auto qa = apply_rotary(q, rotation_angles(a, omega));
        const auto kb = apply_rotary(k, rotation_angles(b, omega));
        const auto qd = apply_rotary(q, rotation_angles(a - b, omega));
        double lhs = 0.0, rhs = 0.0;
        for (int i = 0; i < hd; ++i) {
          lhs += qa[static_cast<std::size_t>(i)] * kb[static_cast<std::size_t>(i)];
          rhs += qd[static_cast<std::size_t>(i)] * k[static_cast<std::size_t>(i)];
        }
        shift_ok = shift_ok && std::abs(lhs - rhs) <= 1e-6 * std::max(1.0, std::abs(rhs));
      }
    }
    check("rotary norm preservation", norm_ok);
    check("rotary relative shift", shift_ok);
    check("rotate_half involution is negation", invol_ok);
    check("frequency spectrum leads with 1 and decreases", spectrum_ok);
    // Zero-time fusion gain = sum of weights = 3.0 with defaults.
    RoTEConfig rc;
    rc.head_dim = 4;
    std::vector<double> x = {1.0, -2.0, 0.5, 3.0};
    const auto fused = fuse_levels(x, cal::TemporalTriplet{0, 0, 0}, rc);
    bool gain_ok = true;
    for (std::size_t i = 0; i < x.size(); ++i)
      gain_ok = gain_ok && std::abs(fused[i] - 3.0 * x[i]) <= 1e-12;
    check("zero-time fusion gain 3.0", gain_ok);
  }

  // Calendar anchors and monotonicity.
  {
    bool ok = cal::decompose_timestamp(0) == cal::TemporalTriplet{0, 0, 0} &&
              cal::decompose_timestamp(31536000) == cal::TemporalTriplet{1, 12, 365} &&
              cal::decompose_timestamp(946684800) == cal::TemporalTriplet{30, 360, 10957};
    std::mt19937_64 rng(103);
    cal::TemporalTriplet prev{0, 0, 0};
    std::vector<std::int64_t> ts;
    for (int i = 0; i < 200; ++i) ts.push_back(static_cast<std::int64_t>(rng() % 2000000000ULL));
    std::sort(ts.begin(), ts.end());
    for (auto t : ts) {
      const auto tri = cal::decompose_timestamp(t);
      ok = ok && tri.y <= tri.m && tri.d == t / 86400 && tri.y >= prev.y &&
           tri.m >= prev.m && tri.d >= prev.d;
      prev = tri;
    }
    check("calendar anchors and monotone decomposition", ok);
  }

  // Gradients on a tiny composite graph.
  {
    std::mt19937_64 rng(107);
    std::normal_distribution<double> dist(0.0, 1.0);
    Tensor a(3, 4), b(4, 3), g(1, 4), bias(1, 4);
    for (Tensor* t : {&a, &b, &g, &bias})
      for (double& v : t->data) v = dist(rng);
    auto build = [](ad::Tape& t, std::vector<ad::Node*>& l) {
      ad::Node* h = ad::relu(t, ad::matmul(t, ad::matmul(t, l[0], l[1]), l[0]));
      ad::Node* n = ad::layer_norm_rows(t, h, l[2], l[3]);
      return ad::sum(t, ad::mul_elem(t, ad::softmax_rows(t, n), n));
    };
    check("gradient check on composite graph", ad::grad_check(build, {a, b, g, bias}).pass);
  }

  // Parameter law.
  {
    bool ok = true;
    for (int d : {8, 32}) {
      for (int len : {10, 50}) {
        ModelConfig pc = cfg.model_config(50, "PositionalEmbedding");
        pc.d_model = d;
        pc.max_len = len;
        pc.dropout_rate = 0.0;
        ModelConfig rc2 = cfg.model_config(50, "Y+M+D");
        rc2.d_model = d;
        rc2.max_len = len;
        rc2.dropout_rate = 0.0;
        Model p = init_parameters(pc, 1);
        Model r = init_parameters(rc2, 1);
        ok = ok && prof::count_params(p) - prof::count_params(r) ==
                       static_cast<std::int64_t>(len) * d;
      }
    }
    check("parameter law", ok);
  }

  // Ranking metric oracle.
  {
    std::mt19937_64 rng(109);
    bool ok = std::abs(eval::ndcg_at_k(3, 5) - 0.5) <= 1e-15;
    for (int trial = 0; trial < 500 && ok; ++trial) {
      const int n = 3 + static_cast<int>(rng() % 12);
      std::vector<double> scores(static_cast<std::size_t>(n));
      for (double& s : scores) s = static_cast<double>(rng() % 6);
      const int target = static_cast<int>(rng() % static_cast<std::uint64_t>(n));
      int oracle = 1;
      for (int i = 0; i < n; ++i) {
        if (i == target) continue;
        const double si = scores[static_cast<std::size_t>(i)];
        const double st = scores[static_cast<std::size_t>(target)];
        if (si > st || (si == st && i < target)) ++oracle;
      }
      ok = eval::rank_of_target(scores, target) == oracle;
    }
    check("ranking metric oracle", ok);
  }

  // Data pipeline invariants on a synthetic log.
  {
    data::SynthParams sp;
    sp.n_users = 40;
    sp.n_items = 60;
    sp.seed = 5;
    const auto log = data::synth_seasonal(sp);
    const auto filtered = data::k_core_filter(log, 5);
    std::map<std::string, int> users, items;
    for (const auto& in : filtered) {
      ++users[in.user];
      ++items[in.item];
    }
    bool ok = !filtered.empty();
    for (const auto& [u, c] : users) ok = ok && c >= 5;
    for (const auto& [i, c] : items) ok = ok && c >= 5;
    const data::Dataset ds = data::build_sequences(filtered);
    for (const auto& seq : ds.sequences) {
      const auto sp2 = data::leave_one_out_split(seq);
      ok = ok && sp2.train.size() + 2 == seq.events.size();
      ok = ok && sp2.valid.ts <= sp2.test.ts;
      const RowInput row = data::window(sp2.train, 20);
      ok = ok && row.ids.size() == 20 && row.triplets.size() == 20;
      for (std::size_t i = 0; i < row.ids.size(); ++i)
        if (row.ids[i] == 0)
          ok = ok && row.raw_ts[i] == 0 &&
               row.triplets[i] == cal::TemporalTriplet{0, 0, 0};
    }
    check("data pipeline invariants", ok);
  }

  file << report.str();
  std::cout << report.str();
  std::cout << (check.failures == 0 ? "selftest: all checks passed\n"
                                    : "selftest: FAILURES\n");
  return check.failures;
}

}  // namespace rote::cli
