#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <vector>

#include "rote/tensor.hpp"

namespace rote::ad {

class Tape;

struct Node {
  Tensor value;
  Tensor grad;  // allocated iff requires_grad
  bool requires_grad = false;
  std::function<void()> backward;  // adds this node's adjoint into its parents
};

// Reverse-mode tape over a fixed op vocabulary. Nodes are created in
// topological order; backward() walks them in reverse creation order.
// A tape is single-threaded; independent tapes are independent.
class Tape {
 public:
  Node* leaf(Tensor value, bool requires_grad);
  Node* make(Tensor value, bool requires_grad);
  void backward(Node* loss);
  std::size_t node_count() const { return nodes_.size(); }

 private:
  std::vector<std::unique_ptr<Node>> nodes_;
};

void accumulate_grad(Node* n, const Tensor& g);

// --- ops -------------------------------------------------------------

Node* matmul(Tape& t, Node* a, Node* b);
Node* add(Tape& t, Node* a, Node* b);
// Broadcasts a 1 x N bias over every row of a.
Node* add_rowvec(Tape& t, Node* a, Node* bias);
Node* mul_elem(Tape& t, Node* a, Node* b);
Node* mul_scalar(Tape& t, Node* a, double c);
Node* transpose(Tape& t, Node* a);
Node* relu(Tape& t, Node* a);
Node* col_slice(Tape& t, Node* a, std::size_t start, std::size_t len);
Node* col_concat(Tape& t, const std::vector<Node*>& parts);
Node* sum(Tape& t, Node* a);  // scalar

// Row-wise softmax; mask (same shape, nonzero = allowed) forces masked
// entries to exactly 0. Throws std::domain_error on a fully-masked row.
Node* softmax_rows(Tape& t, Node* a, const std::vector<std::uint8_t>* mask = nullptr);

// Last-dim layer norm with affine gain/bias (1 x cols each).
Node* layer_norm_rows(Tape& t, Node* a, Node* gain, Node* bias, double eps = 1e-5);

Node* gather_rows(Tape& t, Node* table, const std::vector<int>& ids);

// Inverted dropout; rate == 0 is the identity and consumes no randomness.
Node* dropout(Tape& t, Node* a, double rate, std::mt19937_64& rng);

// Mean over active rows of -log softmax(logits_row)[target_row]. Scalar.
Node* cross_entropy_rows(Tape& t, Node* logits, const std::vector<int>& targets,
                         const std::vector<std::uint8_t>& active);

// Precomputed per-position rotary coefficients: one (cos, sin) table per
// level, expanded to full row width (each angle repeated across its pair).
struct RotaryCoeffs {
  std::vector<double> alpha;  // per level
  std::vector<Tensor> cos_tab;  // each positions x dim
  std::vector<Tensor> sin_tab;
};

// y_r = sum_l alpha_l * (x_r (.) cos_l[r] + rotate_half(x_r) (.) sin_l[r]).
// Linear in x; the adjoint is the same map with sin negated.
Node* rotary_fuse_rows(Tape& t, Node* x, const RotaryCoeffs& coeffs);

// --- gradient checking -------------------------------------------------

struct GradCheckReport {
  double max_rel_err = 0.0;
  bool pass = false;
};

// build() must construct a scalar loss from leaf nodes made from `inputs`
// (in order) and be a pure function of them. Compares tape gradients with
// central finite differences of step eps.
GradCheckReport grad_check(
    const std::function<Node*(Tape&, std::vector<Node*>&)>& build,
    std::vector<Tensor> inputs, double eps = 1e-3, double tol = 1e-4);

}  // namespace rote::ad
