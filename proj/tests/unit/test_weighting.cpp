#include <cmath>
#include <numeric>
#include <sstream>
#include <vector>

#include "doctest.h"
#include "wran/error.hpp"
#include "wran/pipeline.hpp"
#include "wran/weighting.hpp"

using namespace wran;

namespace {

// Width-1 discriminator with D(f) = sigmoid(logit) independent of f.
ParamStore constant_disc(double logit) {
  ParamStore ps;
  ps.add("da.w1", Tensor::matrix(1, 1, 0.0));
  ps.add("da.b1", Tensor::matrix(1, 1, 0.0));
  ps.add("da.w2", Tensor::matrix(1, 1, 0.0));
  ps.add("da.b2", Tensor::matrix(1, 1, logit));
  return ps;
}

WeightTable small_table() {
  WeightTable t;
  t.set_relation_weights({0.1, 0.6, 0.3});
  t.set_instance_weights({0.8, 0.2, 0.5, 0.4});
  t.set_alpha(0.25);
  t.set_total_weights(total_weights(0.25, t.instance_weights(), t.relation_weights(),
                                    std::vector<std::size_t>{1, 2, 1, 0}));
  t.freeze();
  return t;
}

}  // namespace

TEST_CASE("relation weights are the mean prediction") {
  SUBCASE("uniform classifier") {
    const auto w = relation_weights(Tensor::matrix(5, 4, 0.25));
    for (double v : w) CHECK(v == 0.25);
  }
  SUBCASE("one-hot classifier") {
    Tensor p = Tensor::matrix(3, 4);
    for (std::size_t i = 0; i < 3; ++i) p.at(i, 2) = 1.0;
    CHECK(relation_weights(p) == std::vector<double>{0, 0, 1, 0});
  }
  SUBCASE("two predictions") {
    const auto w = relation_weights(Tensor({2, 2}, std::vector<double>{0.9, 0.1, 0.5, 0.5}));
    CHECK(w[0] == doctest::Approx(0.7).epsilon(1e-15));
    CHECK(w[1] == doctest::Approx(0.3).epsilon(1e-15));
  }
  SUBCASE("random softmax rows sum to one") {
    Rng rng(1);
    Tensor p = Tensor::matrix(50, 7);
    for (std::size_t i = 0; i < 50; ++i) {
      double s = 0.0;
      for (std::size_t k = 0; k < 7; ++k) s += (p.at(i, k) = std::exp(rng.uniform(-4, 4)));
      for (std::size_t k = 0; k < 7; ++k) p.at(i, k) /= s;
    }
    const auto w = relation_weights(p);
    CHECK(std::abs(std::accumulate(w.begin(), w.end(), 0.0) - 1.0) <= 1e-12);
  }
  CHECK_THROWS_AS(relation_weights(Tensor()), ContractError);
}

TEST_CASE("instance weights are one minus D_a") {
  Discriminator da(1, "da.");
  const Tensor f = Tensor::matrix(3, 1, 0.4);
  ParamStore half = constant_disc(0.0);
  for (double v : instance_weights(da, half, f)) CHECK(v == 0.5);
  ParamStore p2 = constant_disc(std::log(0.2 / 0.8));
  for (double v : instance_weights(da, p2, f)) CHECK(v == doctest::Approx(0.8).epsilon(1e-14));
  ParamStore sat = constant_disc(40.0);
  for (double v : instance_weights(da, sat, f)) CHECK(v == doctest::Approx(kProbClamp).epsilon(1e-6));

  SUBCASE("strictly inside (0, 1) and decreasing in D_a") {
    Rng rng(2);
    Discriminator d(3, "da.");
    ParamStore ps;
    d.init(ps, rng);
    Tensor x = Tensor::matrix(40, 3);
    for (double& v : x.data()) v = rng.uniform(-5, 5);
    const auto w = instance_weights(d, ps, x);
    const auto prob = d.discriminate_all(ps, x);
    for (std::size_t i = 0; i < w.size(); ++i) {
      CHECK(w[i] > 0.0);
      CHECK(w[i] < 1.0);
      for (std::size_t j = 0; j < w.size(); ++j)
        if (prob[i] < prob[j]) CHECK(w[i] > w[j]);
    }
  }
}

TEST_CASE("gate alpha boundaries") {
  const Tensor f = Tensor({2, 2}, std::vector<double>{1.0, 3.0, 3.0, 1.0});  // mean [2, 2]
  const std::vector<double> zero = {0.0, 0.0};
  CHECK(gate_alpha(zero, f) == 0.5);
  const std::vector<double> up = {5.0, 5.0}, down = {-5.0, -5.0};
  CHECK(gate_alpha(up, f) > 1.0 - 1e-8);
  CHECK(gate_alpha(down, f) < 1e-8);

  SUBCASE("per class uses the pseudo-labelled rows") {
    const std::vector<double> g = {1.0, 0.0};
    const std::vector<std::size_t> labels = {0, 0};
    const auto a = gate_alpha_per_class(g, f, labels, 2);
    CHECK(a[0] == gate_alpha(g, f));
    CHECK(a[1] == gate_alpha(g, f));
    const std::vector<std::size_t> split = {0, 1};
    const auto b = gate_alpha_per_class(g, f, split, 2);
    CHECK(b[0] == doctest::Approx(1.0 / (1.0 + std::exp(-1.0))).epsilon(1e-15));
    CHECK(b[1] == doctest::Approx(1.0 / (1.0 + std::exp(-3.0))).epsilon(1e-15));
  }
}

TEST_CASE("total weights fuse and normalize") {
  const std::vector<double> inst = {0.8, 0.2};
  const std::vector<double> rel = {0.6, 0.4};
  const std::vector<std::size_t> labels = {0, 1};
  const auto t = total_weights(0.5, inst, rel, labels);
  CHECK(t[0] == doctest::Approx(1.4).epsilon(1e-15));
  CHECK(t[1] == doctest::Approx(0.6).epsilon(1e-15));

  SUBCASE("alpha = 1 keeps instance weights only") {
    const auto a = total_weights(1.0, inst, rel, labels);
    CHECK(a[0] == doctest::Approx(1.6).epsilon(1e-15));
    CHECK(a[1] == doctest::Approx(0.4).epsilon(1e-15));
  }
  SUBCASE("alpha = 0 keeps per-label relation weights only") {
    const auto a = total_weights(0.0, inst, rel, labels);
    CHECK(a[0] == doctest::Approx(1.2).epsilon(1e-15));
    CHECK(a[1] == doctest::Approx(0.8).epsilon(1e-15));
  }
  SUBCASE("mean is one for random inputs") {
    Rng rng(3);
    std::vector<double> i(200), r(6);
    std::vector<std::size_t> y(200);
    for (auto& v : i) v = rng.uniform();
    for (auto& v : r) v = rng.uniform();
    for (auto& v : y) v = rng.below(6);
    const auto w = total_weights(rng.uniform(), i, r, y);
    CHECK(std::abs(std::accumulate(w.begin(), w.end(), 0.0) / 200.0 - 1.0) <= 1e-12);
  }
  SUBCASE("all-zero raw weights are an error") {
    const std::vector<double> z = {0.0, 0.0};
    CHECK_THROWS_AS(total_weights(0.5, z, z, labels), ContractError);
  }
}

TEST_CASE("weight table freeze semantics and round trip") {
  WeightTable t = small_table();
  CHECK(t.frozen());
  CHECK_THROWS_AS(t.set_relation_weights({1.0}), ContractError);
  CHECK_THROWS_AS(t.set_alpha(0.1), ContractError);
  const WeightTable copy = t;
  t.freeze();
  CHECK(t == copy);

  std::stringstream ss;
  t.write(ss);
  const WeightTable back = WeightTable::read(ss);
  CHECK(back == t);
  CHECK(back.frozen());

  WeightTable partial;
  partial.set_relation_weights({0.5, 0.5});
  CHECK_THROWS_AS(partial.freeze(), ContractError);
}

TEST_CASE("malformed weight files report a parse error") {
  std::stringstream bad("wran-weights v1\nsection relation_weights 2\n0 0.5\n1 abc\n");
  CHECK_THROWS_AS(WeightTable::read(bad), ParseError);
  std::stringstream magic("not-a-table\n");
  CHECK_THROWS_AS(WeightTable::read(magic), ParseError);
}

TEST_CASE("effective weights for each ablation") {
  const WeightTable t = small_table();
  const std::vector<std::size_t> labels = {1, 2, 1, 0};
  WeightingOptions full;
  CHECK(effective_weights(t, full, labels) == t.total_weights());

  WeightingOptions none;
  none.relation = none.instance = false;
  CHECK(effective_weights(t, none, labels) == std::vector<double>(4, 1.0));

  WeightingOptions no_rel;
  no_rel.relation = false;
  CHECK(effective_weights(t, no_rel, labels) ==
        total_weights(1.0, t.instance_weights(), t.relation_weights(), labels));

  WeightingOptions no_inst;
  no_inst.instance = false;
  CHECK(effective_weights(t, no_inst, labels) ==
        total_weights(0.0, t.instance_weights(), t.relation_weights(), labels));

  WeightingOptions no_gate;
  no_gate.gate = false;
  no_gate.fixed_alpha = 0.5;
  CHECK(effective_weights(t, no_gate, labels) ==
        total_weights(0.5, t.instance_weights(), t.relation_weights(), labels));

  const std::vector<std::size_t> short_labels = {1};
  CHECK_THROWS_AS(effective_weights(t, full, short_labels), ShapeError);
}
