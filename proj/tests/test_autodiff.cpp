#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "rote/autodiff.hpp"
#include "rote/backbone.hpp"

using namespace rote;
using ad::Node;
using ad::Tape;

namespace {

Tensor random_tensor(std::mt19937_64& rng, std::size_t r, std::size_t c) {
  std::normal_distribution<double> dist(0.0, 1.0);
  Tensor t(r, c);
  for (double& x : t.data) x = dist(rng);
  return t;
}

}  // namespace

TEST_CASE("matmul forward anchors") {
  Tape t;
  Tensor eye(2, 2);
  eye.at(0, 0) = eye.at(1, 1) = 1.0;
  Tensor m(2, 2);
  m.data = {3, 4, 5, 6};
  Node* out = ad::matmul(t, t.leaf(eye, false), t.leaf(m, false));
  CHECK(out->value.data == m.data);

  Tensor a(1, 2);
  a.data = {1, 2};
  Tensor b(2, 1);
  b.data = {3, 4};
  Node* c = ad::matmul(t, t.leaf(a, false), t.leaf(b, false));
  CHECK(c->value.data[0] == 11.0);

  Tensor bad(3, 1);
  CHECK_THROWS_AS(ad::matmul(t, t.leaf(a, false), t.leaf(bad, false)),
                  std::invalid_argument);
}

TEST_CASE("softmax forward anchors") {
  Tape t;
  Tensor x(1, 3);
  Node* p = ad::softmax_rows(t, t.leaf(x, false));
  for (double v : p->value.data) CHECK(v == doctest::Approx(1.0 / 3).epsilon(1e-12));

  Tensor y(1, 2);
  y.data = {std::log(2.0), 0.0};
  Node* q = ad::softmax_rows(t, t.leaf(y, false));
  CHECK(q->value.data[0] == doctest::Approx(2.0 / 3).epsilon(1e-12));
  CHECK(q->value.data[1] == doctest::Approx(1.0 / 3).epsilon(1e-12));

  Tensor z(1, 3, 5.0);
  std::vector<std::uint8_t> mask = {1, 0, 1};
  Node* r = ad::softmax_rows(t, t.leaf(z, false), &mask);
  CHECK(r->value.data[0] == doctest::Approx(0.5));
  CHECK(r->value.data[1] == 0.0);
  CHECK(r->value.data[2] == doctest::Approx(0.5));

  std::vector<std::uint8_t> all_masked = {0, 0, 0};
  CHECK_THROWS_AS(ad::softmax_rows(t, t.leaf(z, false), &all_masked), std::domain_error);
}

TEST_CASE("layer norm anchors") {
  Tape t;
  Tensor x(1, 4, 2.5);  // constant row
  Tensor gain(1, 4, 1.0), bias(1, 4, 0.0);
  Node* out = ad::layer_norm_rows(t, t.leaf(x, false), t.leaf(gain, false),
                                  t.leaf(bias, false));
  for (double v : out->value.data) CHECK(v == doctest::Approx(0.0).epsilon(1e-9));

  Tensor y(1, 2);
  y.data = {1.0, -1.0};
  Tensor g2(1, 2, 1.0), b2(1, 2, 0.0);
  Node* o2 =
      ad::layer_norm_rows(t, t.leaf(y, false), t.leaf(g2, false), t.leaf(b2, false));
  CHECK(o2->value.data[0] == doctest::Approx(1.0).epsilon(1e-4));
  CHECK(o2->value.data[1] == doctest::Approx(-1.0).epsilon(1e-4));
}

TEST_CASE("gather, cross entropy, dropout anchors") {
  Tape t;
  Tensor table(2, 3);
  table.data = {1, 2, 3, 4, 5, 6};
  Node* g = ad::gather_rows(t, t.leaf(table, false), {0});
  CHECK(g->value.data == std::vector<double>{1, 2, 3});
  CHECK_THROWS_AS(ad::gather_rows(t, t.leaf(table, false), {2}), std::out_of_range);

  Tensor logits(1, 2);  // (0, 0), target 0 -> ln 2
  Node* ce = ad::cross_entropy_rows(t, t.leaf(logits, true), {0}, {1});
  CHECK(ce->value.data[0] == doctest::Approx(std::log(2.0)).epsilon(1e-12));

  std::mt19937_64 rng(1);
  Tensor x(2, 2);
  x.data = {1, 2, 3, 4};
  Node* same = ad::dropout(t, t.leaf(x, false), 0.0, rng);
  CHECK(same->value.data == x.data);
}

TEST_CASE("grad_check: sum of squares") {
  Tensor x(1, 3);
  x.data = {1, 2, 3};
  auto build = [](Tape& t, std::vector<Node*>& leaves) {
    return ad::sum(t, ad::mul_elem(t, leaves[0], leaves[0]));
  };
  // Quadratic: central differences are exact up to roundoff.
  const auto report = ad::grad_check(build, {x}, 1e-3, 1e-6);
  CHECK(report.pass);

  // Analytic gradient is (2, 4, 6).
  Tape t;
  std::vector<Node*> leaves{t.leaf(x, true)};
  Node* loss = build(t, leaves);
  t.backward(loss);
  CHECK(leaves[0]->grad.data[0] == doctest::Approx(2.0));
  CHECK(leaves[0]->grad.data[1] == doctest::Approx(4.0));
  CHECK(leaves[0]->grad.data[2] == doctest::Approx(6.0));
}

TEST_CASE("grad_check: every op on randomized small shapes") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t m = 2 + rng() % 4, k = 2 + rng() % 4, n = 2 + rng() % 4;

    // matmul + add + transpose + scalar
    {
      auto build = [](Tape& t, std::vector<Node*>& l) {
        Node* prod = ad::matmul(t, l[0], l[1]);
        Node* shifted = ad::add(t, prod, l[2]);
        return ad::sum(t, ad::mul_scalar(t, ad::transpose(t, shifted), 0.7));
      };
      CHECK(ad::grad_check(build,
                           {random_tensor(rng, m, k), random_tensor(rng, k, n),
                            random_tensor(rng, m, n)})
                .pass);
    }
    // softmax (masked) through a weighted sum
    {
      std::vector<std::uint8_t> mask(m * n, 1);
      mask[0] = 0;
      auto build = [mask](Tape& t, std::vector<Node*>& l) {
        Node* p = ad::softmax_rows(t, l[0], &mask);
        return ad::sum(t, ad::mul_elem(t, p, l[1]));
      };
      CHECK(ad::grad_check(build, {random_tensor(rng, m, n), random_tensor(rng, m, n)})
                .pass);
    }
    // layer norm
    {
      auto build = [](Tape& t, std::vector<Node*>& l) {
        Node* y = ad::layer_norm_rows(t, l[0], l[1], l[2]);
        return ad::sum(t, ad::mul_elem(t, y, y));
      };
      CHECK(ad::grad_check(build,
                           {random_tensor(rng, m, n), random_tensor(rng, 1, n),
                            random_tensor(rng, 1, n)})
                .pass);
    }
    // relu, add_rowvec, col slice/concat
    {
      auto build = [n](Tape& t, std::vector<Node*>& l) {
        Node* y = ad::relu(t, ad::add_rowvec(t, l[0], l[1]));
        Node* a = ad::col_slice(t, y, 0, n / 2);
        Node* b = ad::col_slice(t, y, n / 2, n - n / 2);
        return ad::sum(t, ad::col_concat(t, {b, a}));
      };
      CHECK(ad::grad_check(build, {random_tensor(rng, m, n), random_tensor(rng, 1, n)})
                .pass);
    }
    // gather + cross entropy
    {
      std::vector<int> ids, targets;
      std::vector<std::uint8_t> active;
      for (std::size_t i = 0; i < m; ++i) {
        ids.push_back(static_cast<int>(rng() % k));
        targets.push_back(static_cast<int>(rng() % k));
        active.push_back(i + 1 < m ? 1 : 0);
      }
      auto build = [ids, targets, active](Tape& t, std::vector<Node*>& l) {
        Node* emb = ad::gather_rows(t, l[0], ids);
        Node* logits = ad::matmul(t, emb, ad::transpose(t, l[0]));
        return ad::cross_entropy_rows(t, logits, targets, active);
      };
      CHECK(ad::grad_check(build, {random_tensor(rng, k, n)}).pass);
    }
  }
}

TEST_CASE("rotary gradient law: adjoint is rotation by -theta") {
  std::mt19937_64 rng(23);
  RowInput row;
  const int len = 3;
  row.ids.assign(len, 1);
  row.raw_ts = {86400, 10 * 86400, 400 * 86400};
  for (auto ts : row.raw_ts) row.triplets.push_back(cal::decompose_timestamp(ts));
  ModelConfig cfg;
  cfg.vocab_size = 4;
  cfg.d_model = 4;
  cfg.n_heads = 1;
  cfg.max_len = len;
  cfg.mode = EncodingMode::kYearMonthDay;
  const ad::RotaryCoeffs coeffs = make_rotary_coeffs(cfg, row);

  auto build = [&coeffs](Tape& t, std::vector<Node*>& l) {
    Node* y = ad::rotary_fuse_rows(t, l[0], coeffs);
    return ad::sum(t, ad::mul_elem(t, y, l[1]));
  };
  CHECK(ad::grad_check(build, {random_tensor(rng, 3, 4), random_tensor(rng, 3, 4)})
            .pass);
}

TEST_CASE("determinism: same seed, identical forward/backward") {
  auto run = [] {
    std::mt19937_64 rng(42);
    Tape t;
    Tensor x(4, 4);
    std::mt19937_64 data_rng(5);
    for (double& v : x.data) v = static_cast<double>(data_rng() % 100) / 10.0;
    Node* leaf = t.leaf(x, true);
    Node* y = ad::dropout(t, leaf, 0.3, rng);
    Node* loss = ad::sum(t, ad::mul_elem(t, y, y));
    t.backward(loss);
    return std::make_pair(loss->value.data[0], leaf->grad.data);
  };
  const auto a = run();
  const auto b = run();
  CHECK(a.first == b.first);
  CHECK(a.second == b.second);
}
