#include "rote/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace rote::ad {

Node* Tape::leaf(Tensor value, bool requires_grad) {
  return make(std::move(value), requires_grad);
}

Node* Tape::make(Tensor value, bool requires_grad) {
  auto node = std::make_unique<Node>();
  node->value = std::move(value);
  node->requires_grad = requires_grad;
  if (requires_grad) node->grad = Tensor(node->value.rows, node->value.cols);
  Node* ptr = node.get();
  nodes_.push_back(std::move(node));
  return ptr;
}

void Tape::backward(Node* loss) {
  if (loss->value.size() != 1)
    throw std::invalid_argument("Tape::backward: loss must be scalar");
  if (!loss->requires_grad)
    throw std::invalid_argument("Tape::backward: loss does not require grad");
  loss->grad.data[0] = 1.0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    Node* n = it->get();
    if (n->requires_grad && n->backward) n->backward();
  }
}

void accumulate_grad(Node* n, const Tensor& g) {
  if (!n->requires_grad) return;
  for (std::size_t i = 0; i < g.data.size(); ++i) n->grad.data[i] += g.data[i];
}

namespace {

bool any_grad(std::initializer_list<Node*> parents) {
  return std::any_of(parents.begin(), parents.end(),
                     [](Node* n) { return n->requires_grad; });
}

void check_same_shape(Node* a, Node* b, const char* op) {
  if (!a->value.same_shape(b->value))
    throw std::invalid_argument(std::string(op) + ": shape mismatch");
}

}  // namespace

Node* matmul(Tape& t, Node* a, Node* b) {
  Node* out = t.make(rote::matmul(a->value, b->value), any_grad({a, b}));
  if (out->requires_grad) {
    out->backward = [a, b, out] {
      if (a->requires_grad) {
        Tensor ga(a->value.rows, a->value.cols);
        kernels::gemm(false, true, out->grad.rows, b->value.rows, out->grad.cols,
                      out->grad.data.data(), b->value.data.data(), ga.data.data());
        accumulate_grad(a, ga);
      }
      if (b->requires_grad) {
        Tensor gb(b->value.rows, b->value.cols);
        kernels::gemm(true, false, a->value.cols, out->grad.cols, a->value.rows,
                      a->value.data.data(), out->grad.data.data(), gb.data.data());
        accumulate_grad(b, gb);
      }
    };
  }
  return out;
}

Node* add(Tape& t, Node* a, Node* b) {
  check_same_shape(a, b, "add");
  Tensor v = a->value;
  for (std::size_t i = 0; i < v.data.size(); ++i) v.data[i] += b->value.data[i];
  Node* out = t.make(std::move(v), any_grad({a, b}));
  if (out->requires_grad) {
    out->backward = [a, b, out] {
      accumulate_grad(a, out->grad);
      accumulate_grad(b, out->grad);
    };
  }
  return out;
}

Node* add_rowvec(Tape& t, Node* a, Node* bias) {
  if (bias->value.rows != 1 || bias->value.cols != a->value.cols)
    throw std::invalid_argument("add_rowvec: bias must be 1 x cols");
  Tensor v = a->value;
  for (std::size_t r = 0; r < v.rows; ++r)
    for (std::size_t c = 0; c < v.cols; ++c) v.at(r, c) += bias->value.data[c];
  Node* out = t.make(std::move(v), any_grad({a, bias}));
  if (out->requires_grad) {
    out->backward = [a, bias, out] {
      accumulate_grad(a, out->grad);
      if (bias->requires_grad) {
        for (std::size_t r = 0; r < out->grad.rows; ++r)
          for (std::size_t c = 0; c < out->grad.cols; ++c)
            bias->grad.data[c] += out->grad.at(r, c);
      }
    };
  }
  return out;
}

Node* mul_elem(Tape& t, Node* a, Node* b) {
  check_same_shape(a, b, "mul_elem");
  Tensor v = a->value;
  for (std::size_t i = 0; i < v.data.size(); ++i) v.data[i] *= b->value.data[i];
  Node* out = t.make(std::move(v), any_grad({a, b}));
  if (out->requires_grad) {
    out->backward = [a, b, out] {
      if (a->requires_grad)
        for (std::size_t i = 0; i < out->grad.data.size(); ++i)
          a->grad.data[i] += out->grad.data[i] * b->value.data[i];
      if (b->requires_grad)
        for (std::size_t i = 0; i < out->grad.data.size(); ++i)
          b->grad.data[i] += out->grad.data[i] * a->value.data[i];
    };
  }
  return out;
}

Node* mul_scalar(Tape& t, Node* a, double c) {
  Tensor v = a->value;
  for (double& x : v.data) x *= c;
  Node* out = t.make(std::move(v), a->requires_grad);
  if (out->requires_grad) {
    out->backward = [a, c, out] {
      for (std::size_t i = 0; i < out->grad.data.size(); ++i)
        a->grad.data[i] += c * out->grad.data[i];
    };
  }
  return out;
}

Node* transpose(Tape& t, Node* a) {
  Node* out = t.make(rote::transpose(a->value), a->requires_grad);
  if (out->requires_grad) {
    out->backward = [a, out] { accumulate_grad(a, rote::transpose(out->grad)); };
  }
  return out;
}

Node* relu(Tape& t, Node* a) {
  Tensor v = a->value;
  for (double& x : v.data) x = x > 0.0 ? x : 0.0;
  Node* out = t.make(std::move(v), a->requires_grad);
  if (out->requires_grad) {
    out->backward = [a, out] {
      for (std::size_t i = 0; i < out->grad.data.size(); ++i)
        if (a->value.data[i] > 0.0) a->grad.data[i] += out->grad.data[i];
    };
  }
  return out;
}

Node* col_slice(Tape& t, Node* a, std::size_t start, std::size_t len) {
  if (start + len > a->value.cols)
    throw std::invalid_argument("col_slice: range out of bounds");
  Tensor v(a->value.rows, len);
  for (std::size_t r = 0; r < v.rows; ++r)
    for (std::size_t c = 0; c < len; ++c) v.at(r, c) = a->value.at(r, start + c);
  Node* out = t.make(std::move(v), a->requires_grad);
  if (out->requires_grad) {
    out->backward = [a, start, len, out] {
      for (std::size_t r = 0; r < out->grad.rows; ++r)
        for (std::size_t c = 0; c < len; ++c)
          a->grad.at(r, start + c) += out->grad.at(r, c);
    };
  }
  return out;
}

Node* col_concat(Tape& t, const std::vector<Node*>& parts) {
  if (parts.empty()) throw std::invalid_argument("col_concat: no parts");
  std::size_t total = 0;
  for (Node* p : parts) {
    if (p->value.rows != parts[0]->value.rows)
      throw std::invalid_argument("col_concat: row mismatch");
    total += p->value.cols;
  }
  Tensor v(parts[0]->value.rows, total);
  std::size_t off = 0;
  bool rg = false;
  for (Node* p : parts) {
    for (std::size_t r = 0; r < v.rows; ++r)
      for (std::size_t c = 0; c < p->value.cols; ++c)
        v.at(r, off + c) = p->value.at(r, c);
    off += p->value.cols;
    rg = rg || p->requires_grad;
  }
  Node* out = t.make(std::move(v), rg);
  if (out->requires_grad) {
    std::vector<Node*> ps = parts;
    out->backward = [ps, out] {
      std::size_t off = 0;
      for (Node* p : ps) {
        if (p->requires_grad)
          for (std::size_t r = 0; r < out->grad.rows; ++r)
            for (std::size_t c = 0; c < p->value.cols; ++c)
              p->grad.at(r, c) += out->grad.at(r, off + c);
        off += p->value.cols;
      }
    };
  }
  return out;
}

Node* sum(Tape& t, Node* a) {
  double s = 0.0;
  for (double x : a->value.data) s += x;
  Node* out = t.make(Tensor::scalar(s), a->requires_grad);
  if (out->requires_grad) {
    out->backward = [a, out] {
      const double g = out->grad.data[0];
      for (double& gx : a->grad.data) gx += g;
    };
  }
  return out;
}

Node* softmax_rows(Tape& t, Node* a, const std::vector<std::uint8_t>* mask) {
  if (mask && mask->size() != a->value.size())
    throw std::invalid_argument("softmax_rows: mask shape mismatch");
  Tensor v(a->value.rows, a->value.cols);
  for (std::size_t r = 0; r < v.rows; ++r) {
    double mx = -1e300;
    bool any = false;
    for (std::size_t c = 0; c < v.cols; ++c) {
      if (mask && !(*mask)[r * v.cols + c]) continue;
      any = true;
      mx = std::max(mx, a->value.at(r, c));
    }
    if (!any) throw std::domain_error("softmax_rows: fully-masked row");
    double z = 0.0;
    for (std::size_t c = 0; c < v.cols; ++c) {
      if (mask && !(*mask)[r * v.cols + c]) {
        v.at(r, c) = 0.0;
        continue;
      }
      v.at(r, c) = std::exp(a->value.at(r, c) - mx);
      z += v.at(r, c);
    }
    for (std::size_t c = 0; c < v.cols; ++c) v.at(r, c) /= z;
  }
  Node* out = t.make(std::move(v), a->requires_grad);
  if (out->requires_grad) {
    out->backward = [a, out] {
      for (std::size_t r = 0; r < out->grad.rows; ++r) {
        double dot = 0.0;
        for (std::size_t c = 0; c < out->grad.cols; ++c)
          dot += out->grad.at(r, c) * out->value.at(r, c);
        for (std::size_t c = 0; c < out->grad.cols; ++c)
          a->grad.at(r, c) += out->value.at(r, c) * (out->grad.at(r, c) - dot);
      }
    };
  }
  return out;
}

Node* layer_norm_rows(Tape& t, Node* a, Node* gain, Node* bias, double eps) {
  const std::size_t n = a->value.cols;
  if (gain->value.rows != 1 || gain->value.cols != n || bias->value.rows != 1 ||
      bias->value.cols != n)
    throw std::invalid_argument("layer_norm_rows: affine shape mismatch");
  Tensor xhat(a->value.rows, n);
  std::vector<double> inv_sigma(a->value.rows);
  Tensor v(a->value.rows, n);
  for (std::size_t r = 0; r < v.rows; ++r) {
    double mean = 0.0;
    for (std::size_t c = 0; c < n; ++c) mean += a->value.at(r, c);
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t c = 0; c < n; ++c) {
      const double d = a->value.at(r, c) - mean;
      var += d * d;
    }
    var /= static_cast<double>(n);
    inv_sigma[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t c = 0; c < n; ++c) {
      xhat.at(r, c) = (a->value.at(r, c) - mean) * inv_sigma[r];
      v.at(r, c) = xhat.at(r, c) * gain->value.data[c] + bias->value.data[c];
    }
  }
  Node* out = t.make(std::move(v), any_grad({a, gain, bias}));
  if (out->requires_grad) {
    auto xh = std::make_shared<Tensor>(std::move(xhat));
    auto is = std::make_shared<std::vector<double>>(std::move(inv_sigma));
    out->backward = [a, gain, bias, out, xh, is, n] {
      for (std::size_t r = 0; r < out->grad.rows; ++r) {
        if (gain->requires_grad)
          for (std::size_t c = 0; c < n; ++c)
            gain->grad.data[c] += out->grad.at(r, c) * xh->at(r, c);
        if (bias->requires_grad)
          for (std::size_t c = 0; c < n; ++c) bias->grad.data[c] += out->grad.at(r, c);
        if (a->requires_grad) {
          double m1 = 0.0, m2 = 0.0;
          for (std::size_t c = 0; c < n; ++c) {
            const double dxh = out->grad.at(r, c) * gain->value.data[c];
            m1 += dxh;
            m2 += dxh * xh->at(r, c);
          }
          m1 /= static_cast<double>(n);
          m2 /= static_cast<double>(n);
          for (std::size_t c = 0; c < n; ++c) {
            const double dxh = out->grad.at(r, c) * gain->value.data[c];
            a->grad.at(r, c) += (*is)[r] * (dxh - m1 - xh->at(r, c) * m2);
          }
        }
      }
    };
  }
  return out;
}

Node* gather_rows(Tape& t, Node* table, const std::vector<int>& ids) {
  Tensor v(ids.size(), table->value.cols);
  for (std::size_t r = 0; r < ids.size(); ++r) {
    if (ids[r] < 0 || static_cast<std::size_t>(ids[r]) >= table->value.rows)
      throw std::out_of_range("gather_rows: id out of table bounds");
    for (std::size_t c = 0; c < v.cols; ++c)
      v.at(r, c) = table->value.at(static_cast<std::size_t>(ids[r]), c);
  }
  Node* out = t.make(std::move(v), table->requires_grad);
  if (out->requires_grad) {
    std::vector<int> idv = ids;
    out->backward = [table, idv, out] {
      for (std::size_t r = 0; r < idv.size(); ++r)
        for (std::size_t c = 0; c < out->grad.cols; ++c)
          table->grad.at(static_cast<std::size_t>(idv[r]), c) += out->grad.at(r, c);
    };
  }
  return out;
}

Node* dropout(Tape& t, Node* a, double rate, std::mt19937_64& rng) {
  if (rate < 0.0 || rate >= 1.0)
    throw std::invalid_argument("dropout: rate must be in [0, 1)");
  if (rate == 0.0) return a;
  const double scale = 1.0 / (1.0 - rate);
  auto keep = std::make_shared<std::vector<std::uint8_t>>(a->value.size());
  Tensor v = a->value;
  for (std::size_t i = 0; i < v.data.size(); ++i) {
    // Portable uniform draw in [0, 1); distribution objects vary by stdlib.
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    (*keep)[i] = u >= rate ? 1 : 0;
    v.data[i] = (*keep)[i] ? v.data[i] * scale : 0.0;
  }
  Node* out = t.make(std::move(v), a->requires_grad);
  if (out->requires_grad) {
    out->backward = [a, keep, scale, out] {
      for (std::size_t i = 0; i < out->grad.data.size(); ++i)
        if ((*keep)[i]) a->grad.data[i] += scale * out->grad.data[i];
    };
  }
  return out;
}

Node* cross_entropy_rows(Tape& t, Node* logits, const std::vector<int>& targets,
                         const std::vector<std::uint8_t>& active) {
  if (targets.size() != logits->value.rows || active.size() != logits->value.rows)
    throw std::invalid_argument("cross_entropy_rows: row count mismatch");
  std::size_t n_active = 0;
  for (auto f : active) n_active += f ? 1 : 0;
  if (n_active == 0) throw std::domain_error("cross_entropy_rows: no active rows");
  auto probs = std::make_shared<Tensor>(logits->value.rows, logits->value.cols);
  double loss = 0.0;
  for (std::size_t r = 0; r < logits->value.rows; ++r) {
    if (!active[r]) continue;
    const int tgt = targets[r];
    if (tgt < 0 || static_cast<std::size_t>(tgt) >= logits->value.cols)
      throw std::out_of_range("cross_entropy_rows: target out of range");
    double mx = logits->value.at(r, 0);
    for (std::size_t c = 1; c < logits->value.cols; ++c)
      mx = std::max(mx, logits->value.at(r, c));
    double z = 0.0;
    for (std::size_t c = 0; c < logits->value.cols; ++c)
      z += std::exp(logits->value.at(r, c) - mx);
    for (std::size_t c = 0; c < logits->value.cols; ++c)
      probs->at(r, c) = std::exp(logits->value.at(r, c) - mx) / z;
    loss += -(logits->value.at(r, static_cast<std::size_t>(tgt)) - mx - std::log(z));
  }
  loss /= static_cast<double>(n_active);
  Node* out = t.make(Tensor::scalar(loss), logits->requires_grad);
  if (out->requires_grad) {
    auto tg = std::make_shared<std::vector<int>>(targets);
    auto ac = std::make_shared<std::vector<std::uint8_t>>(active);
    out->backward = [logits, probs, tg, ac, n_active, out] {
      const double g = out->grad.data[0] / static_cast<double>(n_active);
      for (std::size_t r = 0; r < logits->value.rows; ++r) {
        if (!(*ac)[r]) continue;
        for (std::size_t c = 0; c < logits->value.cols; ++c) {
          double p = probs->at(r, c);
          if (c == static_cast<std::size_t>((*tg)[r])) p -= 1.0;
          logits->grad.at(r, c) += g * p;
        }
      }
    };
  }
  return out;
}

namespace {

// y = x (.) cos + rotate_half(x) (.) sin, with sign = +1 forward, -1 adjoint.
void rotary_apply_row(const double* x, const double* c, const double* s, double sign,
                      double alpha, std::size_t dim, double* out) {
  for (std::size_t i = 0; i + 1 < dim; i += 2) {
    out[i] += alpha * (x[i] * c[i] - sign * x[i + 1] * s[i]);
    out[i + 1] += alpha * (x[i + 1] * c[i + 1] + sign * x[i] * s[i + 1]);
  }
}

}  // namespace

Node* rotary_fuse_rows(Tape& t, Node* x, const RotaryCoeffs& coeffs) {
  if (x->value.cols % 2 != 0)
    throw std::invalid_argument("rotary_fuse_rows: odd row width");
  const std::size_t levels = coeffs.alpha.size();
  if (coeffs.cos_tab.size() != levels || coeffs.sin_tab.size() != levels)
    throw std::invalid_argument("rotary_fuse_rows: coefficient table mismatch");
  for (std::size_t l = 0; l < levels; ++l)
    if (!coeffs.cos_tab[l].same_shape(x->value) || !coeffs.sin_tab[l].same_shape(x->value))
      throw std::invalid_argument("rotary_fuse_rows: table shape mismatch");
  Tensor v(x->value.rows, x->value.cols);
  for (std::size_t l = 0; l < levels; ++l)
    for (std::size_t r = 0; r < v.rows; ++r)
      rotary_apply_row(x->value.row(r), coeffs.cos_tab[l].row(r),
                       coeffs.sin_tab[l].row(r), +1.0, coeffs.alpha[l], v.cols,
                       v.row(r));
  Node* out = t.make(std::move(v), x->requires_grad);
  if (out->requires_grad) {
    auto cf = std::make_shared<RotaryCoeffs>(coeffs);
    out->backward = [x, cf, out] {
      for (std::size_t l = 0; l < cf->alpha.size(); ++l)
        for (std::size_t r = 0; r < out->grad.rows; ++r)
          rotary_apply_row(out->grad.row(r), cf->cos_tab[l].row(r),
                           cf->sin_tab[l].row(r), -1.0, cf->alpha[l],
                           out->grad.cols, x->grad.row(r));
    };
  }
  return out;
}

GradCheckReport grad_check(
    const std::function<Node*(Tape&, std::vector<Node*>&)>& build,
    std::vector<Tensor> inputs, double eps, double tol) {
  // Analytic gradients.
  std::vector<Tensor> analytic;
  {
    Tape tape;
    std::vector<Node*> leaves;
    leaves.reserve(inputs.size());
    for (const Tensor& in : inputs) leaves.push_back(tape.leaf(in, true));
    Node* loss = build(tape, leaves);
    tape.backward(loss);
    for (Node* l : leaves) analytic.push_back(l->grad);
  }
  auto eval = [&](const std::vector<Tensor>& ins) {
    Tape tape;
    std::vector<Node*> leaves;
    for (const Tensor& in : ins) leaves.push_back(tape.leaf(in, true));
    return build(tape, leaves)->value.data[0];
  };
  GradCheckReport report;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    for (std::size_t j = 0; j < inputs[i].data.size(); ++j) {
      const double orig = inputs[i].data[j];
      inputs[i].data[j] = orig + eps;
      const double fp = eval(inputs);
      inputs[i].data[j] = orig - eps;
      const double fm = eval(inputs);
      inputs[i].data[j] = orig;
      const double fd = (fp - fm) / (2.0 * eps);
      const double an = analytic[i].data[j];
      const double rel =
          std::abs(an - fd) / std::max({1.0, std::abs(an), std::abs(fd)});
      report.max_rel_err = std::max(report.max_rel_err, rel);
    }
  }
  report.pass = report.max_rel_err <= tol;
  return report;
}

}  // namespace rote::ad
