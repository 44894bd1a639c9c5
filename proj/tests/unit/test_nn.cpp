#include "doctest.h"

#include <random>
#include <sstream>

#include "oracles.hpp"
#include "segparse/nn.hpp"

using namespace segparse::nn;

TEST_CASE("parameter store basics") {
  ParameterStore store;
  int a = store.add("A", 3, 4);
  int b = store.add("b", 3, 1);
  CHECK(store.find("A") == a);
  CHECK(store.find("missing") == -1);
  CHECK(store.scalar_count() == 15);
  CHECK_THROWS(store.add("A", 1, 1));

  std::mt19937_64 rng(42);
  store.init_uniform(0.08, rng);
  CHECK(store.value(a).cwiseAbs().maxCoeff() <= 0.08);
  CHECK(store.value(b).cwiseAbs().maxCoeff() > 0.0);

  // Flat scalar access walks parameters in id order.
  store.set_scalar(0, 0.5);
  CHECK(store.value(a)(0, 0) == 0.5);
  store.set_scalar(12, -0.25);
  CHECK(store.value(b)(0, 0) == -0.25);
}

TEST_CASE("adam with zero learning rate keeps values") {
  ParameterStore store;
  int a = store.add("A", 2, 2);
  std::mt19937_64 rng(1);
  store.init_uniform(0.08, rng);
  Mat before = store.value(a);
  store.param(a).grad.setConstant(1.0);
  store.adam_step(0.0);
  CHECK((store.value(a) - before).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("parameter blob round trip") {
  ParameterStore store;
  store.add("A", 4, 3);
  store.add("b", 4, 1);
  std::mt19937_64 rng(7);
  store.init_uniform(0.08, rng);
  std::ostringstream out(std::ios::binary);
  store.save(out);

  ParameterStore other;
  other.add("A", 4, 3);
  other.add("b", 4, 1);
  std::istringstream in(out.str(), std::ios::binary);
  other.load(in);
  CHECK((other.value(0) - store.value(0)).cwiseAbs().maxCoeff() == 0.0);
  CHECK((other.value(1) - store.value(1)).cwiseAbs().maxCoeff() == 0.0);

  ParameterStore wrong;
  wrong.add("A", 3, 3);
  std::istringstream in2(out.str(), std::ios::binary);
  CHECK_THROWS_AS(wrong.load(in2), segparse::CheckpointError);
}

TEST_CASE("softmax outputs a simplex") {
  ParameterStore store;
  Tape tape(store);
  Mat x(5, 1);
  x << 2.0, -1.0, 0.5, 3.0, 0.0;
  auto p = tape.softmax(tape.constant(x));
  CHECK(tape.value(p).sum() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(tape.value(p).minCoeff() > 0.0);
}

// One composite function exercising every tape op, gradient-checked against
// central differences.
TEST_CASE("tape gradients match finite differences across all ops") {
  ParameterStore store;
  const int e = 4, h = 5, m = 3;
  int W = store.add("W", h, e);
  int U = store.add("U", h, h);
  int b = store.add("b", h, 1);
  int E = store.add("E", 7, e);
  int A = store.add("A", h, h);
  int w2 = store.add("w2", 1, h);
  int b2 = store.add("b2", 1, 1);
  int wv = store.add("wv", h, 1);
  std::mt19937_64 rng(3);
  store.init_uniform(0.5, rng);

  Mat mask = Mat::Ones(h, 1);
  mask(1, 0) = 0.0;

  auto build = [&](Tape& t) {
    auto x0 = t.embed(E, 2);
    auto x1 = t.embed(E, 5);
    auto hprev = t.zeros(h, 1);
    auto z = t.sigmoid_(t.linear2(W, x0, U, hprev, b));
    auto r = t.tanh_(t.affine(W, x1, b));
    auto g = t.mul_elem(t.one_minus(z), r);
    auto g2 = t.add(g, t.scale(z, 0.3));
    auto g3 = t.sub(g2, t.mask(r, mask));
    auto cols = t.concat_cols({g3, z, r});
    auto att = t.softmax(t.gemv_t(cols, t.param(wv)));
    auto ctx = t.gemv(cols, att);
    auto cat = t.concat(ctx, att);
    (void)cat;
    auto s1 = t.dot(ctx, r);
    auto gate = t.sigmoid_(t.affine(w2, ctx, b2));
    auto p = t.softmax(t.affine(A, ctx, -1));
    auto picked = t.scale_by(t.pick(p, 2), t.one_minus(gate));
    auto mixed = t.add(picked, t.scale_by(t.div_ss(t.pick_sum(att, {0, 2}),
                                                   t.pick_sum(att, {0, 1, 2})),
                                          gate));
    auto lsm = t.log_softmax(t.affine(A, g3, -1));
    auto terms = std::vector<Tape::V>{t.neg(t.log_(mixed)), t.neg(t.pick(lsm, 1)),
                                      t.scale(s1, 0.1)};
    return t.sum(terms);
  };

  auto loss_value = [&]() {
    Tape t(store);
    return t.value(build(t))(0, 0);
  };

  store.zero_grad();
  {
    Tape t(store);
    auto loss = build(t);
    t.backward(loss);
  }

  std::mt19937_64 pick_rng(11);
  std::uniform_int_distribution<std::size_t> dist(0, store.scalar_count() - 1);
  int checked = 0;
  for (int k = 0; k < 60; ++k) {
    std::size_t flat = dist(pick_rng);
    const double fd = oracles::central_difference(store, flat, loss_value);
    const double ad = store.grad_scalar(flat);
    CHECK(oracles::relative_error(ad, fd) < 1e-6);
    ++checked;
  }
  CHECK(checked == 60);
}

TEST_CASE("backward requires a scalar") {
  ParameterStore store;
  Tape tape(store);
  auto v = tape.constant(Mat::Ones(3, 1));
  CHECK_THROWS(tape.backward(v));
}
