#include "rote/backbone.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace rote {

std::string to_string(EncodingMode mode) {
  switch (mode) {
    case EncodingMode::kPositionalEmbedding: return "PositionalEmbedding";
    case EncodingMode::kPureTimestamp: return "PureTimestamp";
    case EncodingMode::kYearOnly: return "Y";
    case EncodingMode::kYearMonth: return "Y+M";
    case EncodingMode::kYearMonthDay: return "Y+M+D";
  }
  throw std::logic_error("to_string: bad EncodingMode");
}

EncodingMode encoding_mode_from_string(const std::string& name) {
  if (name == "PositionalEmbedding" || name == "pos") return EncodingMode::kPositionalEmbedding;
  if (name == "PureTimestamp" || name == "ts") return EncodingMode::kPureTimestamp;
  if (name == "Y" || name == "YearOnly" || name == "y") return EncodingMode::kYearOnly;
  if (name == "Y+M" || name == "YearMonth" || name == "ym") return EncodingMode::kYearMonth;
  if (name == "Y+M+D" || name == "YearMonthDay" || name == "ymd" || name == "rote")
    return EncodingMode::kYearMonthDay;
  throw std::invalid_argument("unknown encoding mode: " + name);
}

void ModelConfig::validate() const {
  if (vocab_size < 2) throw std::invalid_argument("ModelConfig: vocab_size must be >= 2");
  if (d_model < 1 || n_heads < 1 || d_model % n_heads != 0)
    throw std::invalid_argument("ModelConfig: n_heads must divide d_model");
  if (max_len < 1) throw std::invalid_argument("ModelConfig: max_len must be >= 1");
  if (dropout_rate < 0.0 || dropout_rate >= 1.0)
    throw std::invalid_argument("ModelConfig: dropout_rate must be in [0, 1)");
  if (is_rotary() && head_dim() % 2 != 0)
    throw std::invalid_argument("ModelConfig: head_dim must be even in rotary modes");
}

std::vector<std::pair<std::string, Tensor*>> Model::named_params() {
  std::vector<std::pair<std::string, Tensor*>> out;
  out.emplace_back("item_emb", &item_emb);
  if (cfg.mode == EncodingMode::kPositionalEmbedding) out.emplace_back("pos_emb", &pos_emb);
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const std::string p = "layer" + std::to_string(l) + ".";
    LayerParams& lp = layers[l];
    out.emplace_back(p + "ln1_gain", &lp.ln1_gain);
    out.emplace_back(p + "ln1_bias", &lp.ln1_bias);
    out.emplace_back(p + "wq", &lp.wq);
    out.emplace_back(p + "bq", &lp.bq);
    out.emplace_back(p + "wk", &lp.wk);
    out.emplace_back(p + "bk", &lp.bk);
    out.emplace_back(p + "wv", &lp.wv);
    out.emplace_back(p + "bv", &lp.bv);
    out.emplace_back(p + "wo", &lp.wo);
    out.emplace_back(p + "bo", &lp.bo);
    out.emplace_back(p + "ln2_gain", &lp.ln2_gain);
    out.emplace_back(p + "ln2_bias", &lp.ln2_bias);
    out.emplace_back(p + "ffn_w1", &lp.ffn_w1);
    out.emplace_back(p + "ffn_b1", &lp.ffn_b1);
    out.emplace_back(p + "ffn_w2", &lp.ffn_w2);
    out.emplace_back(p + "ffn_b2", &lp.ffn_b2);
  }
  out.emplace_back("final_ln_gain", &final_ln_gain);
  out.emplace_back("final_ln_bias", &final_ln_bias);
  return out;
}

std::vector<std::pair<std::string, const Tensor*>> Model::named_params() const {
  auto mut = const_cast<Model*>(this)->named_params();
  std::vector<std::pair<std::string, const Tensor*>> out;
  out.reserve(mut.size());
  for (auto& [name, t] : mut) out.emplace_back(name, t);
  return out;
}

namespace {

double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Truncated normal (|z| <= 2 std), Box-Muller, portable across stdlibs.
double trunc_normal(std::mt19937_64& rng, double std_dev) {
  for (;;) {
    const double u1 = uniform01(rng);
    const double u2 = uniform01(rng);
    const double z = std::sqrt(-2.0 * std::log(1.0 - u1)) *
                     std::cos(2.0 * 3.14159265358979323846 * u2);
    if (std::abs(z) <= 2.0) return z * std_dev;
  }
}

void fill_trunc_normal(Tensor& t, std::mt19937_64& rng, double std_dev = 0.02) {
  for (double& x : t.data) x = trunc_normal(rng, std_dev);
}

}  // namespace

Model init_parameters(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Model m;
  m.cfg = cfg;
  m.cfg.rote.head_dim = cfg.head_dim();
  std::mt19937_64 rng(seed);
  const std::size_t d = static_cast<std::size_t>(cfg.d_model);
  m.item_emb = Tensor(static_cast<std::size_t>(cfg.vocab_size), d);
  fill_trunc_normal(m.item_emb, rng);
  for (std::size_t c = 0; c < d; ++c) m.item_emb.at(0, c) = 0.0;  // padding row
  if (cfg.mode == EncodingMode::kPositionalEmbedding) {
    m.pos_emb = Tensor(static_cast<std::size_t>(cfg.max_len), d);
    fill_trunc_normal(m.pos_emb, rng);
  }
  m.layers.resize(static_cast<std::size_t>(cfg.n_layers));
  for (LayerParams& lp : m.layers) {
    lp.ln1_gain = Tensor(1, d, 1.0);
    lp.ln1_bias = Tensor(1, d, 0.0);
    lp.wq = Tensor(d, d); fill_trunc_normal(lp.wq, rng);
    lp.bq = Tensor(1, d, 0.0);
    lp.wk = Tensor(d, d); fill_trunc_normal(lp.wk, rng);
    lp.bk = Tensor(1, d, 0.0);
    lp.wv = Tensor(d, d); fill_trunc_normal(lp.wv, rng);
    lp.bv = Tensor(1, d, 0.0);
    lp.wo = Tensor(d, d); fill_trunc_normal(lp.wo, rng);
    lp.bo = Tensor(1, d, 0.0);
    lp.ln2_gain = Tensor(1, d, 1.0);
    lp.ln2_bias = Tensor(1, d, 0.0);
    lp.ffn_w1 = Tensor(d, d); fill_trunc_normal(lp.ffn_w1, rng);
    lp.ffn_b1 = Tensor(1, d, 0.0);
    lp.ffn_w2 = Tensor(d, d); fill_trunc_normal(lp.ffn_w2, rng);
    lp.ffn_b2 = Tensor(1, d, 0.0);
  }
  m.final_ln_gain = Tensor(1, d, 1.0);
  m.final_ln_bias = Tensor(1, d, 0.0);
  return m;
}

BoundModel bind(ad::Tape& tape, const Model& model, bool requires_grad) {
  BoundModel bm;
  bm.model = &model;
  const auto named = model.named_params();
  bm.params.reserve(named.size());
  for (const auto& [name, t] : named) {
    ad::Node* leaf = tape.leaf(*t, requires_grad);
    bm.params.push_back(leaf);
    if (name == "item_emb") bm.item_emb = leaf;
  }
  return bm;
}

ad::RotaryCoeffs make_rotary_coeffs(const ModelConfig& cfg, const RowInput& row) {
  ad::RotaryCoeffs coeffs;
  if (!cfg.is_rotary()) return coeffs;
  const int hd = cfg.head_dim();
  const std::size_t len = row.ids.size();

  struct Level {
    double alpha;
    double base;
    std::vector<double> values;  // per position
  };
  std::vector<Level> levels;
  auto triplet_values = [&](auto member) {
    std::vector<double> v(len);
    for (std::size_t p = 0; p < len; ++p)
      v[p] = static_cast<double>(row.triplets[p].*member);
    return v;
  };
  RoTEConfig rc = cfg.rote;
  rc.head_dim = hd;
  switch (cfg.mode) {
    case EncodingMode::kPureTimestamp: {
      // Single-level rotary over raw Unix seconds, mid-level base, weight 1.
      std::vector<double> v(len);
      for (std::size_t p = 0; p < len; ++p) v[p] = static_cast<double>(row.raw_ts[p]);
      levels.push_back({1.0, rc.base_m, std::move(v)});
      break;
    }
    case EncodingMode::kYearMonthDay:
      levels.push_back({rc.alpha_d, rc.base_d, triplet_values(&cal::TemporalTriplet::d)});
      [[fallthrough]];
    case EncodingMode::kYearMonth:
      levels.push_back({rc.alpha_m, rc.base_m, triplet_values(&cal::TemporalTriplet::m)});
      [[fallthrough]];
    case EncodingMode::kYearOnly:
      levels.push_back({rc.alpha_y, rc.base_y, triplet_values(&cal::TemporalTriplet::y)});
      break;
    default:
      throw std::logic_error("make_rotary_coeffs: positional mode has no coefficients");
  }
  for (const Level& lvl : levels) {
    const auto spectrum = inverse_frequencies(lvl.base, hd);
    Tensor cos_tab(len, static_cast<std::size_t>(hd));
    Tensor sin_tab(len, static_cast<std::size_t>(hd));
    for (std::size_t p = 0; p < len; ++p) {
      for (int i = 0; i < hd / 2; ++i) {
        const double theta = lvl.values[p] * spectrum[static_cast<std::size_t>(i)];
        const double c = std::cos(theta), s = std::sin(theta);
        cos_tab.at(p, 2 * i) = c;
        cos_tab.at(p, 2 * i + 1) = c;
        sin_tab.at(p, 2 * i) = s;
        sin_tab.at(p, 2 * i + 1) = s;
      }
    }
    coeffs.alpha.push_back(lvl.alpha);
    coeffs.cos_tab.push_back(std::move(cos_tab));
    coeffs.sin_tab.push_back(std::move(sin_tab));
  }
  return coeffs;
}

namespace {

struct LayerNodes {
  ad::Node *ln1_gain, *ln1_bias, *wq, *bq, *wk, *bk, *wv, *bv, *wo, *bo;
  ad::Node *ln2_gain, *ln2_bias, *ffn_w1, *ffn_b1, *ffn_w2, *ffn_b2;
};

}  // namespace

ad::Node* forward_hidden(ad::Tape& tape, const BoundModel& bm, const RowInput& row,
                         bool train, std::mt19937_64& rng) {
  const Model& model = *bm.model;
  const ModelConfig& cfg = model.cfg;
  const std::size_t len = static_cast<std::size_t>(cfg.max_len);
  if (row.ids.size() != len || row.triplets.size() != len || row.raw_ts.size() != len)
    throw std::invalid_argument("forward_hidden: row length != max_len");
  for (int id : row.ids)
    if (id < 0 || id >= cfg.vocab_size)
      throw std::out_of_range("forward_hidden: item id out of vocab");

  // Unpack bound parameter leaves in named_params order.
  std::size_t idx = 0;
  ad::Node* item_emb = bm.params[idx++];
  ad::Node* pos_emb = nullptr;
  if (cfg.mode == EncodingMode::kPositionalEmbedding) pos_emb = bm.params[idx++];
  std::vector<LayerNodes> layers(static_cast<std::size_t>(cfg.n_layers));
  for (LayerNodes& ln : layers) {
    ln.ln1_gain = bm.params[idx++]; ln.ln1_bias = bm.params[idx++];
    ln.wq = bm.params[idx++]; ln.bq = bm.params[idx++];
    ln.wk = bm.params[idx++]; ln.bk = bm.params[idx++];
    ln.wv = bm.params[idx++]; ln.bv = bm.params[idx++];
    ln.wo = bm.params[idx++]; ln.bo = bm.params[idx++];
    ln.ln2_gain = bm.params[idx++]; ln.ln2_bias = bm.params[idx++];
    ln.ffn_w1 = bm.params[idx++]; ln.ffn_b1 = bm.params[idx++];
    ln.ffn_w2 = bm.params[idx++]; ln.ffn_b2 = bm.params[idx++];
  }
  ad::Node* final_gain = bm.params[idx++];
  ad::Node* final_bias = bm.params[idx++];

  const double rate = train ? cfg.dropout_rate : 0.0;
  const ad::RotaryCoeffs coeffs = make_rotary_coeffs(cfg, row);

  // Attention mask: causal, padding keys excluded, diagonal always allowed
  // so no row is fully masked.
  std::vector<std::uint8_t> attn_mask(len * len, 0);
  for (std::size_t i = 0; i < len; ++i)
    for (std::size_t j = 0; j <= i; ++j)
      attn_mask[i * len + j] = (row.ids[j] != 0 || j == i) ? 1 : 0;

  // Padding-row zeroing mask for the embedding stream.
  Tensor pad(len, static_cast<std::size_t>(cfg.d_model));
  for (std::size_t p = 0; p < len; ++p)
    if (row.ids[p] != 0)
      for (std::size_t c = 0; c < pad.cols; ++c) pad.at(p, c) = 1.0;
  ad::Node* pad_mask = tape.leaf(std::move(pad), false);

  ad::Node* x = ad::gather_rows(tape, item_emb, row.ids);
  x = ad::mul_scalar(tape, x, std::sqrt(static_cast<double>(cfg.d_model)));
  if (pos_emb) x = ad::add(tape, x, pos_emb);
  x = ad::dropout(tape, x, rate, rng);
  x = ad::mul_elem(tape, x, pad_mask);

  const int hd = cfg.head_dim();
  const double scale = 1.0 / std::sqrt(static_cast<double>(hd));
  for (const LayerNodes& ln : layers) {
    ad::Node* h = ad::layer_norm_rows(tape, x, ln.ln1_gain, ln.ln1_bias);
    ad::Node* q = ad::add_rowvec(tape, ad::matmul(tape, h, ln.wq), ln.bq);
    ad::Node* k = ad::add_rowvec(tape, ad::matmul(tape, h, ln.wk), ln.bk);
    ad::Node* v = ad::add_rowvec(tape, ad::matmul(tape, h, ln.wv), ln.bv);
    std::vector<ad::Node*> heads;
    heads.reserve(static_cast<std::size_t>(cfg.n_heads));
    for (int hh = 0; hh < cfg.n_heads; ++hh) {
      const std::size_t off = static_cast<std::size_t>(hh * hd);
      ad::Node* qh = ad::col_slice(tape, q, off, static_cast<std::size_t>(hd));
      ad::Node* kh = ad::col_slice(tape, k, off, static_cast<std::size_t>(hd));
      ad::Node* vh = ad::col_slice(tape, v, off, static_cast<std::size_t>(hd));
      if (cfg.is_rotary()) {
        qh = ad::rotary_fuse_rows(tape, qh, coeffs);
        kh = ad::rotary_fuse_rows(tape, kh, coeffs);
      }
      ad::Node* scores =
          ad::mul_scalar(tape, ad::matmul(tape, qh, ad::transpose(tape, kh)), scale);
      ad::Node* probs = ad::softmax_rows(tape, scores, &attn_mask);
      probs = ad::dropout(tape, probs, rate, rng);
      heads.push_back(ad::matmul(tape, probs, vh));
    }
    ad::Node* ctx = cfg.n_heads == 1 ? heads[0] : ad::col_concat(tape, heads);
    ad::Node* attn_out = ad::add_rowvec(tape, ad::matmul(tape, ctx, ln.wo), ln.bo);
    attn_out = ad::dropout(tape, attn_out, rate, rng);
    x = ad::add(tape, x, attn_out);

    ad::Node* f = ad::layer_norm_rows(tape, x, ln.ln2_gain, ln.ln2_bias);
    ad::Node* f1 = ad::relu(tape, ad::add_rowvec(tape, ad::matmul(tape, f, ln.ffn_w1), ln.ffn_b1));
    f1 = ad::dropout(tape, f1, rate, rng);
    ad::Node* f2 = ad::add_rowvec(tape, ad::matmul(tape, f1, ln.ffn_w2), ln.ffn_b2);
    f2 = ad::dropout(tape, f2, rate, rng);
    x = ad::add(tape, x, f2);
  }
  return ad::layer_norm_rows(tape, x, final_gain, final_bias);
}

ad::Node* forward_logits(ad::Tape& tape, const BoundModel& bm, const RowInput& row,
                         bool train, std::mt19937_64& rng) {
  ad::Node* hidden = forward_hidden(tape, bm, row, train, rng);
  return ad::matmul(tape, hidden, ad::transpose(tape, bm.item_emb));
}

std::vector<double> score_items(std::span<const double> hidden, const Model& model) {
  if (hidden.size() != static_cast<std::size_t>(model.cfg.d_model))
    throw std::invalid_argument("score_items: hidden size != d_model");
  std::vector<double> scores(static_cast<std::size_t>(model.cfg.vocab_size));
  const long n = model.cfg.vocab_size;
#ifdef _OPENMP
#pragma omp parallel for schedule(static) num_threads(max_threads()) if (n > 4096)
#endif
  for (long i = 0; i < n; ++i) {
    double acc = 0.0;
    const double* row = model.item_emb.row(static_cast<std::size_t>(i));
    for (std::size_t c = 0; c < hidden.size(); ++c) acc += hidden[c] * row[c];
    scores[static_cast<std::size_t>(i)] = acc;
  }
  scores[0] = -std::numeric_limits<double>::infinity();
  return scores;
}

std::vector<double> final_hidden(const Model& model, const RowInput& row) {
  ad::Tape tape;
  BoundModel bm = bind(tape, model, false);
  std::mt19937_64 rng(0);
  ad::Node* hidden = forward_hidden(tape, bm, row, false, rng);
  const std::size_t last = hidden->value.rows - 1;
  return std::vector<double>(hidden->value.row(last),
                             hidden->value.row(last) + hidden->value.cols);
}

// --- checkpoint io -----------------------------------------------------

namespace {

void write_u64(std::ostream& os, std::uint64_t v) {
  unsigned char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  os.write(reinterpret_cast<const char*>(buf), 8);
}

std::uint64_t read_u64(std::istream& is) {
  unsigned char buf[8];
  is.read(reinterpret_cast<char*>(buf), 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  return v;
}

std::string config_text(const ModelConfig& cfg) {
  std::ostringstream os;
  os << "vocab_size=" << cfg.vocab_size << "\n"
     << "d_model=" << cfg.d_model << "\n"
     << "n_heads=" << cfg.n_heads << "\n"
     << "n_layers=" << cfg.n_layers << "\n"
     << "max_len=" << cfg.max_len << "\n"
     << "dropout_rate=" << cfg.dropout_rate << "\n"
     << "mode=" << to_string(cfg.mode) << "\n"
     << "base_y=" << cfg.rote.base_y << "\n"
     << "base_m=" << cfg.rote.base_m << "\n"
     << "base_d=" << cfg.rote.base_d << "\n"
     << "alpha_y=" << cfg.rote.alpha_y << "\n"
     << "alpha_m=" << cfg.rote.alpha_m << "\n"
     << "alpha_d=" << cfg.rote.alpha_d << "\n";
  return os.str();
}

ModelConfig config_from_text(const std::string& text) {
  ModelConfig cfg;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = line.substr(0, eq);
    const std::string val = line.substr(eq + 1);
    if (key == "vocab_size") cfg.vocab_size = std::stoi(val);
    else if (key == "d_model") cfg.d_model = std::stoi(val);
    else if (key == "n_heads") cfg.n_heads = std::stoi(val);
    else if (key == "n_layers") cfg.n_layers = std::stoi(val);
    else if (key == "max_len") cfg.max_len = std::stoi(val);
    else if (key == "dropout_rate") cfg.dropout_rate = std::stod(val);
    else if (key == "mode") cfg.mode = encoding_mode_from_string(val);
    else if (key == "base_y") cfg.rote.base_y = std::stod(val);
    else if (key == "base_m") cfg.rote.base_m = std::stod(val);
    else if (key == "base_d") cfg.rote.base_d = std::stod(val);
    else if (key == "alpha_y") cfg.rote.alpha_y = std::stod(val);
    else if (key == "alpha_m") cfg.rote.alpha_m = std::stod(val);
    else if (key == "alpha_d") cfg.rote.alpha_d = std::stod(val);
  }
  cfg.rote.head_dim = cfg.head_dim();
  return cfg;
}

void write_f64_le(std::ostream& os, const std::vector<double>& data) {
  // Assumes IEEE-754 doubles; byte-swaps on big-endian hosts.
  for (double d : data) {
    std::uint64_t bits;
    std::memcpy(&bits, &d, 8);
    write_u64(os, bits);
  }
}

}  // namespace

void save_checkpoint(const Model& model, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("save_checkpoint: cannot open " + path);
  os.write("ROTE1", 5);
  const std::string cfg = config_text(model.cfg);
  write_u64(os, cfg.size());
  os.write(cfg.data(), static_cast<std::streamsize>(cfg.size()));
  const auto named = model.named_params();
  write_u64(os, named.size());
  for (const auto& [name, t] : named) {
    write_u64(os, name.size());
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_u64(os, t->rows);
    write_u64(os, t->cols);
    write_f64_le(os, t->data);
  }
  if (!os) throw std::runtime_error("save_checkpoint: write failed for " + path);
}

Model load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("load_checkpoint: cannot open " + path);
  char magic[5];
  is.read(magic, 5);
  if (!is || std::string(magic, 5) != "ROTE1")
    throw std::runtime_error("load_checkpoint: bad magic in " + path);
  std::string cfg_text(read_u64(is), '\0');
  is.read(cfg_text.data(), static_cast<std::streamsize>(cfg_text.size()));
  const ModelConfig cfg = config_from_text(cfg_text);
  Model model = init_parameters(cfg, 0);
  const std::uint64_t n_params = read_u64(is);
  auto named = model.named_params();
  if (n_params != named.size())
    throw std::runtime_error("load_checkpoint: parameter count mismatch");
  for (auto& [name, t] : named) {
    std::string stored(read_u64(is), '\0');
    is.read(stored.data(), static_cast<std::streamsize>(stored.size()));
    if (stored != name)
      throw std::runtime_error("load_checkpoint: parameter order mismatch at " + name);
    const std::uint64_t rows = read_u64(is);
    const std::uint64_t cols = read_u64(is);
    if (rows != t->rows || cols != t->cols)
      throw std::runtime_error("load_checkpoint: shape mismatch for " + name);
    for (double& d : t->data) {
      const std::uint64_t bits = read_u64(is);
      std::memcpy(&d, &bits, 8);
    }
  }
  if (!is) throw std::runtime_error("load_checkpoint: truncated file " + path);
  return model;
}

}  // namespace rote
