#include <doctest.h>

#include "deid/error.hpp"
#include "deid/heads.hpp"
#include "deid/network.hpp"
#include "helpers.hpp"

using namespace deid;

namespace {

Tagger make(HeadKind kind, std::uint64_t seed = 5) {
  HeadConfig h;
  h.kind = kind;
  return Tagger(testing::tiny_config(), h, ModelShape{6, 7, 3, 3}, seed);
}

std::vector<EncodedSentence> sentences() {
  std::vector<EncodedSentence> out;
  Rng rng(8);
  for (int n = 0; n < 20; ++n) {
    EncodedSentence s;
    const int T = 1 + int(rng.below(5));
    for (int t = 0; t < T; ++t) {
      s.words.push_back(int(rng.below(7)));
      std::vector<int> cs;
      for (std::size_t c = 0; c < 1 + rng.below(4); ++c) cs.push_back(int(rng.below(6)));
      s.chars.push_back(cs);
    }
    s.domain = int(rng.below(3));
    out.push_back(s);
  }
  return out;
}

} // namespace

TEST_CASE("jdl combined loss weights") {
  CHECK(jdl_combined_loss(1.0, 1.0, 0.85) == 1.0);
  CHECK(jdl_combined_loss(2.0, 0.0, 0.85) == 1.7);
  CHECK(jdl_combined_loss(0.0, 2.0, 0.85) == doctest::Approx(0.3));
}

TEST_CASE("csd loss combination") {
  HeadConfig h;
  h.csd_alpha = 0.25;
  h.csd_lambda = 2.0;
  CHECK(csd_loss(4.0, 8.0, 0.5, h) == doctest::Approx(0.75 * 4 + 0.25 * 8 + 1.0));
}

TEST_CASE("orthogonality penalty") {
  Eigen::MatrixXd a(2, 2), b(2, 2), c(2, 2);
  a << 1, 0, 0, 0;
  b << 0, 3, 0, 0;
  c << 1, 1, 0, 0;
  CHECK(orth_penalty({&a, &b}) == doctest::Approx(0.0));
  // cos(a, c) = 1/sqrt(2): off-diagonal entries 1/sqrt(2) twice.
  CHECK(orth_penalty({&a, &c}) == doctest::Approx(1.0));
  Eigen::MatrixXd z = Eigen::MatrixXd::Zero(2, 2);
  CHECK_THROWS_AS(orth_penalty({&a, &z}), Error);

  ParameterStore s;
  auto i = s.add("a", {2, 3});
  auto j = s.add("b", {2, 3});
  Rng rng(3);
  for (auto& v : s[i].value) v = rng.uniform(-1, 1);
  for (auto& v : s[j].value) v = rng.uniform(-1, 1);
  LossFn f = [&](ParameterStore& st, bool grad) {
    Eigen::MatrixXd x = st[i].mat(), y = st[j].mat();
    std::vector<Eigen::MatrixXd> g;
    const double p = orth_penalty({&x, &y}, grad ? &g : nullptr, 1.0);
    if (grad) {
      st[i].gmat() += g[0];
      st[j].gmat() += g[1];
    }
    return p;
  };
  CHECK(finite_diff_check(f, s) < 1e-6);
}

TEST_CASE("softmax cross entropy") {
  Eigen::VectorXd logits = Eigen::VectorXd::Zero(4);
  CHECK(softmax_cross_entropy(logits, 2) == doctest::Approx(std::log(4.0)));
  Eigen::VectorXd d = Eigen::VectorXd::Zero(4);
  softmax_cross_entropy(logits, 2, &d);
  CHECK(d[2] == doctest::Approx(-0.75));
  CHECK(d[0] == doctest::Approx(0.25));
  CHECK_THROWS_AS(softmax_cross_entropy(logits, 4), Error);
}

TEST_CASE("csd specific components start orthogonal to the common weights") {
  HeadConfig h;
  h.kind = HeadKind::csd;
  h.csd_rank = 3;
  Tagger t(testing::tiny_config(), h, ModelShape{6, 7, 3, 2}, 9);
  CHECK(t.csd_penalty() < 1e-20);
}

TEST_CASE("csd prediction ignores domain-specific parameters") {
  auto t = make(HeadKind::csd);
  testing::scramble(t, 21);
  const auto data = sentences();
  std::vector<std::vector<int>> before;
  std::vector<Eigen::MatrixXd> scores;
  for (const auto& s : data) {
    before.push_back(t.predict(s));
    scores.push_back(t.emissions(t.encode(s)));
  }
  auto& store = t.params();
  Rng rng(4);
  for (auto& p : store)
    if (p.name.rfind("csd.", 0) == 0)
      for (auto& v : p.value) v = rng.uniform(-50, 50);
  for (std::size_t i = 0; i < data.size(); ++i) {
    auto s = data[i];
    s.domain = (s.domain + 1) % 3;
    CHECK(t.predict(s) == before[i]);
    CHECK(t.emissions(t.encode(s)) == scores[i]);
  }
  CHECK(t.csd_emissions(t.encode(data[0]), 1, false).size() == 1);
  CHECK(t.csd_emissions(t.encode(data[0]), 1, true).size() == 2);
}

TEST_CASE("jdl with shared parameters from a plain model predicts identically") {
  auto plain = make(HeadKind::plain, 1);
  testing::scramble(plain, 31);
  auto jdl = make(HeadKind::jdl, 2);
  for (auto& p : jdl.params())
    if (plain.params().contains(p.name)) p.value = plain.params().get(p.name).value;
  for (const auto& s : sentences()) {
    CHECK(jdl.predict(s) == plain.predict(s));
    CHECK(jdl.emissions(jdl.encode(s)) == plain.emissions(plain.encode(s)));
  }
}

TEST_CASE("jdl loss adds the weighted domain term") {
  auto plain = make(HeadKind::plain, 1);
  testing::scramble(plain, 12);
  auto jdl = make(HeadKind::jdl, 2);
  for (auto& p : jdl.params())
    if (plain.params().contains(p.name)) p.value = plain.params().get(p.name).value;
  auto s = testing::tiny_sentence(2);
  const double label = plain.loss(s, nullptr, false);
  const double domain = softmax_cross_entropy(jdl.jdl_domain_logits(jdl.encode(s)), 2);
  CHECK(jdl.loss(s, nullptr, false) == doctest::Approx(0.85 * label + 0.15 * domain));
}

TEST_CASE("head configuration checks") {
  HeadConfig h;
  h.kind = HeadKind::csd;
  CHECK_THROWS_AS(h.validate(1), Error);
  CHECK_NOTHROW(h.validate(2));
  h.csd_rank = 0;
  CHECK_THROWS_AS(h.validate(2), Error);
  h = HeadConfig{};
  h.kind = HeadKind::jdl;
  CHECK_THROWS_AS(h.validate(1), Error);
  h.jdl_rho = 0.0;
  CHECK_THROWS_AS(h.validate(2), Error);
  CHECK(parse_head("csd") == HeadKind::csd);
  CHECK_THROWS_AS(parse_head("dann"), Error);
  CHECK_THROWS_AS(Tagger(testing::tiny_config(), HeadConfig{HeadKind::csd}, ModelShape{6, 7, 3, 1}, 1), Error);
  auto t = make(HeadKind::csd);
  auto s = testing::tiny_sentence(5);
  CHECK_THROWS_AS(t.loss(s, nullptr, false), Error);
}
