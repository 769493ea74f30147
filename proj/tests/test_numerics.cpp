#include <doctest.h>

#include <cmath>
#include <limits>

#include "deid/error.hpp"
#include "deid/numerics.hpp"

using namespace deid;

TEST_CASE("rng streams are reproducible") {
  Rng a(7), b(7), c(8);
  for (int i = 0; i < 100; ++i) CHECK(a.next() == b.next());
  CHECK(Rng(7).next() != c.next());
  CHECK(derive_seed(1, 2) == derive_seed(1, 2));
  CHECK(derive_seed(1, 2) != derive_seed(1, 3));
  Rng r(3);
  for (int i = 0; i < 1000; ++i) {
    const double u = r.uniform();
    CHECK((u >= 0.0 && u < 1.0));
    CHECK(r.below(5) < 5);
  }
}

TEST_CASE("sgd step arithmetic") {
  ParameterStore s;
  auto i = s.add("w", {1});
  s[i].value[0] = 1.0;
  s[i].grad[0] = 2.0;
  sgd_step(s, 0.005);
  CHECK(s[i].value[0] == doctest::Approx(0.99).epsilon(1e-15));
  CHECK(s[i].grad[0] == 0.0);
  sgd_step(s, 0.005);
  CHECK(s[i].value[0] == doctest::Approx(0.99).epsilon(1e-15));
}

TEST_CASE("lr zero is the identity") {
  ParameterStore s;
  auto i = s.add("w", {2, 3});
  for (std::size_t k = 0; k < 6; ++k) {
    s[i].value[k] = double(k);
    s[i].grad[k] = 1.0 + double(k);
  }
  sgd_step(s, 0.0);
  for (std::size_t k = 0; k < 6; ++k) CHECK(s[i].value[k] == double(k));
}

TEST_CASE("non-finite gradient names the parameter") {
  ParameterStore s;
  s.add("ok", {1});
  auto i = s.add("emission.W", {2});
  s[i].grad[1] = std::numeric_limits<double>::quiet_NaN();
  try {
    sgd_step(s, 0.1);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()) == "non-finite gradient in emission.W");
  }
}

TEST_CASE("sparse tables only update touched columns") {
  ParameterStore s;
  auto i = s.add("embed", {2, 4}, true);
  s[i].touch(2);
  s[i].gmat()(0, 2) = 1.0;
  sgd_step(s, 0.5);
  CHECK(s[i].mat()(0, 2) == -0.5);
  CHECK(s[i].touched().empty());
}

TEST_CASE("global norm clipping") {
  ParameterStore s;
  auto a = s.add("a", {1});
  auto b = s.add("b", {1});
  s[a].grad[0] = 3.0;
  s[b].grad[0] = 4.0;
  CHECK(s.clip_grad_norm(5.0) == doctest::Approx(5.0));
  CHECK(s[a].grad[0] == 3.0);
  s.clip_grad_norm(1.0);
  CHECK(s[a].grad[0] == doctest::Approx(0.6));
  CHECK(s[b].grad[0] == doctest::Approx(0.8));
}

TEST_CASE("dropout mask") {
  Rng rng(1);
  auto m = dropout_mask(100, 0.0, rng);
  CHECK((m.array() == 1.0).all());
  m = dropout_mask(100, 0.5, rng, false);
  CHECK((m.array() == 1.0).all());
  m = dropout_mask(1000000, 0.5, rng);
  CHECK(std::abs(m.mean() - 1.0) < 0.01);
  CHECK(((m.array() == 0.0) || (m.array() == 2.0)).all());
}

TEST_CASE("finite difference oracle on closed forms") {
  ParameterStore s;
  auto i = s.add("x", {3});
  s[i].value = {0.3, -1.2, 2.0};
  LossFn quad = [i](ParameterStore& st, bool grad) {
    double l = 0;
    for (std::size_t k = 0; k < 3; ++k) {
      l += st[i].value[k] * st[i].value[k];
      if (grad) st[i].grad[k] += 2 * st[i].value[k];
    }
    return l;
  };
  CHECK(finite_diff_check(quad, s) < 1e-9);
  LossFn constant = [](ParameterStore&, bool) { return 4.0; };
  CHECK(finite_diff_check(constant, s) == 0.0);
  LossFn wrong = [i](ParameterStore& st, bool grad) {
    if (grad) st[i].grad[0] += 1.0;
    return st[i].value[0] * 3.0;
  };
  CHECK(finite_diff_check(wrong, s) > 0.1);
}

TEST_CASE("snapshot and restore") {
  ParameterStore s;
  auto i = s.add("w", {2});
  s[i].value = {1, 2};
  auto snap = s.snapshot();
  s[i].value = {5, 6};
  s.restore(snap);
  CHECK(s[i].value == std::vector<double>{1, 2});
}

TEST_CASE("config validation") {
  TrainingConfig c;
  CHECK_NOTHROW(c.validate());
  c.dropout = 1.0;
  CHECK_THROWS_AS(c.validate(), Error);
  c = TrainingConfig{};
  c.lr = -1;
  CHECK_THROWS_AS(c.validate(), Error);
}
